#!/usr/bin/env python3
# Curate the knowledge-informed dataset by hand and train one booster
# per horizon. What compare() automates, spelled out.

import numpy as np

from pdmpipe import (
    GbdtParams,
    SimConfig,
    build_dataset,
    compute_metrics,
    default_kb,
    fit_gbdt,
    label_horizon,
    simulate,
    split_chronological,
)

kb = default_kb()
frame, gt = simulate(SimConfig(seed=31415, cycles=20,
                               logging_probability=0.25), kb)

ds = build_dataset(frame, kb, "s2")
print(f"curated: {len(ds)} rows x {ds.X.shape[1]} features, "
      f"{int(ds.y.sum())} positive rows")
print("features:", ", ".join(ds.feature_names))
print()
for note in ds.notes:
    print(f"  note: {note}")
print()

split = split_chronological(ds)
print(f"cycles  train {split.train_cycles[0]}..{split.train_cycles[-1]}"
      f"  val {split.validation_cycles[0]}..{split.validation_cycles[-1]}"
      f"  test {split.test_cycles[0]}..{split.test_cycles[-1]}")
print()

print(f"{'horizon':>8} {'train+':>7} {'test+':>6} {'accuracy':>9} {'F1':>7}")
for horizon in (180, 720, 1440):
    labels, valid = label_horizon(ds, horizon)
    tr = split.train & valid
    te = split.test & valid
    model = fit_gbdt(ds.X[tr], labels[tr], GbdtParams(iterations=60))
    m = compute_metrics(labels[te], model.predict(ds.X[te]))
    print(f"{horizon:>7}m {int(labels[tr].sum()):>7} {int(labels[te].sum()):>6}"
          f" {m.accuracy:>9.3f} {m.f1:>7.3f}")

print()
print("positive rate by horizon is monotone:",
      [float(np.round(label_horizon(ds, h)[0].mean(), 4))
       for h in (180, 720, 1440)])
