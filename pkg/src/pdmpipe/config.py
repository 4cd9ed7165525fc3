"""Run configuration: one YAML file drives every command.

A config must carry an explicit seed; there is no implicit randomness
anywhere downstream. Unknown keys are rejected loudly since a typoed
parameter silently falling back to a default is worse than an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .features import PreprocessParams
from .simulator import DEFAULT_INJECTION, FAULT_KINDS, SimConfig


class ConfigError(ValueError):
    """Bad or missing run configuration."""


DEFAULT_HORIZONS = (180, 720, 1440)
DEFAULT_SPLIT = (0.6, 0.2, 0.2)

DEFAULT_GRIDS = {
    "forest": ({"trees": 30, "max_depth": 10}, {"trees": 60, "max_depth": 10}),
    "gbdt": ({"iterations": 80, "learning_rate": 0.1, "max_depth": 3},
             {"iterations": 120, "learning_rate": 0.1, "max_depth": 4}),
    "svm": ({"reg": 0.001, "epochs": 30}, {"reg": 0.0001, "epochs": 30}),
}

DEFAULT_MISSING = {
    "non_use": True,
    "blanket": ({"cycle": 7, "start_minute": 1500, "minutes": 180},
                {"cycle": 23, "start_minute": 1620, "minutes": 120}),
    "dropout": ({"cycle": 12, "channel": "temp_external_a",
                 "start_minute": 200, "minutes": 120},
                {"cycle": 31, "channel": "temp_external_c",
                 "start_minute": 1400, "minutes": 90}),
}

DEFAULT_OUTLIERS = (
    {"cycle": 9, "channel": "pressure_internal_b", "minute": 1900,
     "kind": "FalseSpike", "delta": 500.0},
    {"cycle": 17, "channel": "temp_external_c", "minute": 400,
     "kind": "TrueIrrelevant", "delta": 60.0},
)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    out_dir: str = "out"
    kb_path: str = None
    sim: SimConfig = None
    missing: dict = field(default_factory=lambda: dict(DEFAULT_MISSING))
    outliers: tuple = DEFAULT_OUTLIERS
    preprocess: PreprocessParams = field(default_factory=PreprocessParams)
    grids: dict = field(default_factory=lambda: {k: tuple(dict(g) for g in v)
                                                 for k, v in DEFAULT_GRIDS.items()})
    horizons_minutes: tuple = DEFAULT_HORIZONS
    split: tuple = DEFAULT_SPLIT

    def __post_init__(self):
        if self.sim is None:
            object.__setattr__(self, "sim", SimConfig(seed=self.seed))
        if not self.horizons_minutes:
            raise ConfigError("need at least one horizon")
        for h in self.horizons_minutes:
            if h < 0:
                raise ConfigError("horizons must be >= 0")
            if h % self.preprocess.resample_minutes != 0:
                raise ConfigError(
                    f"horizon {h} is not a multiple of the "
                    f"{self.preprocess.resample_minutes}-minute row interval")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError("split must be three fractions summing to 1")
        for family, grid in self.grids.items():
            if family not in ("forest", "gbdt", "svm"):
                raise ConfigError(f"unknown model family {family!r}")
            if not grid:
                raise ConfigError(f"empty grid for {family}")
        for family in ("forest", "gbdt", "svm"):
            if family not in self.grids:
                raise ConfigError(f"missing grid for {family}")

    def to_dict(self) -> dict:
        missing = {k: [dict(i) for i in v] if isinstance(v, (list, tuple)) else v
                   for k, v in self.missing.items()}
        return {
            "seed": self.seed,
            "out": self.out_dir,
            "kb": self.kb_path,
            "sim": {
                "cycles": self.sim.cycles,
                "idle_minutes": self.sim.idle_minutes,
                "start": self.sim.start,
                "injection": dict(self.sim.injection),
                "logging_probability": self.sim.logging_probability,
                "logging_model": self.sim.logging_model,
            },
            "missing": missing,
            "outliers": [dict(o) for o in self.outliers],
            "preprocess": self.preprocess.to_dict(),
            "models": {k: [dict(g) for g in v] for k, v in self.grids.items()},
            "horizons_minutes": list(self.horizons_minutes),
            "split": list(self.split),
        }


_TOP_KEYS = {"seed", "out", "kb", "sim", "missing", "outliers", "preprocess",
             "models", "horizons_minutes", "split"}
_SIM_KEYS = {"cycles", "idle_minutes", "start", "injection", "schedule",
             "logging_probability", "logging_model", "noise", "wander",
             "wander_phi"}


def _build_sim(seed: int, section: dict) -> SimConfig:
    unknown = set(section) - _SIM_KEYS
    if unknown:
        raise ConfigError(f"unknown sim keys: {sorted(unknown)}")
    kwargs = dict(section)
    if "injection" in kwargs:
        injection = dict(DEFAULT_INJECTION)
        for key, p in kwargs["injection"].items():
            if key not in FAULT_KINDS:
                raise ConfigError(f"unknown fault key {key!r} in injection")
            injection[key] = float(p)
        kwargs["injection"] = injection
    if "schedule" in kwargs and kwargs["schedule"] is not None:
        kwargs["schedule"] = tuple((int(c), str(k)) for c, k in kwargs["schedule"])
    try:
        return SimConfig(seed=seed, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sim section: {exc}") from None


def make_config(seed: int, **overrides) -> PipelineConfig:
    """Programmatic constructor mirroring the YAML schema."""
    doc = {"seed": seed}
    doc.update(overrides)
    return _from_doc(doc)


def _from_doc(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if "seed" not in doc or doc["seed"] is None:
        raise ConfigError("seed is required; no implicit randomness")
    try:
        seed = int(doc["seed"])
    except (TypeError, ValueError):
        raise ConfigError("seed must be an integer") from None

    sim = _build_sim(seed, doc.get("sim") or {})
    pp_section = doc.get("preprocess") or {}
    try:
        preprocess = PreprocessParams(**pp_section)
    except TypeError as exc:
        raise ConfigError(f"bad preprocess section: {exc}") from None

    grids = doc.get("models")
    if grids is None:
        grids = {k: tuple(dict(g) for g in v) for k, v in DEFAULT_GRIDS.items()}
    else:
        grids = {str(k): tuple(dict(g) for g in v) for k, v in grids.items()}

    missing = doc.get("missing")
    if missing is None:
        missing = dict(DEFAULT_MISSING)
    outliers = doc.get("outliers")
    if outliers is None:
        outliers = DEFAULT_OUTLIERS
    else:
        outliers = tuple(dict(o) for o in outliers)

    try:
        return PipelineConfig(
            seed=seed,
            out_dir=str(doc.get("out", "out")),
            kb_path=doc.get("kb"),
            sim=sim,
            missing=missing,
            outliers=outliers,
            preprocess=preprocess,
            grids=grids,
            horizons_minutes=tuple(doc["horizons_minutes"])
            if "horizons_minutes" in doc else DEFAULT_HORIZONS,
            split=tuple(doc["split"]) if "split" in doc else DEFAULT_SPLIT,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> PipelineConfig:
    """Read and validate a YAML run configuration."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"configuration is not valid YAML: {exc}") from None
    return _from_doc(doc)
