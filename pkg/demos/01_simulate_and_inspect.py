#!/usr/bin/env python3
# Generate one month of telemetry for a 10-cycle run and look around.

import numpy as np

from pdmpipe import SimConfig, default_kb, simulate

kb = default_kb()
config = SimConfig(seed=101, cycles=10, logging_probability=0.25)
frame, gt = simulate(config, kb)

print(f"rows: {len(frame)}  ({config.cycles} cycles x 2910 minutes)")
print(f"channels: {', '.join(frame.channels)}")
print(f"span: {frame.timestamps[0]} .. {frame.timestamps[-1]}")
print()

print("minutes per sequence in one cycle:")
first = frame.take(frame.cycle == 1)
for seq in dict.fromkeys(first.sequence):
    n = int((first.sequence == seq).sum())
    print(f"  {seq:>4}  {n:>5}")
print()

print("injected faults (logged = the automation layer recorded it):")
for g in gt.events:
    e = g.event
    mark = "logged" if g.logged else "silent"
    print(f"  cycle {e.cycle:>2}  {e.sequence_id}  {e.fault_name:<24}"
          f" magnitude {g.magnitude:.2f}  [{mark}]")
print()

# the fault_log channel only pulses for logged events
pulses = frame.logs["fault_log"]
print(f"fault_log minutes set: {int(pulses.sum())}")
for c in np.unique(frame.cycle[pulses == 1]):
    print(f"  pulsing in cycle {c}")
