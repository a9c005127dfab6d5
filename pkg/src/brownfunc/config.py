"""Experiment configuration: a flat JSON object, validated on load."""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .exit_sampler import StartState, Window
from .kernel_path import ConfigError, Kernel, PathSpec

OPERATIONS = (
    "simulate-exit",
    "tail-fit",
    "small-ball",
    "phi-sup",
    "submult",
    "anderson",
    "logconcavity",
    "levy-check",
    "lil",
    "selfcheck",
)


@dataclass
class ExperimentConfig:
    operation: Optional[str] = None
    # kernel
    alpha: float = 1.0
    lam: float = 1.0
    # window
    a: float = 1.0
    b: float = 1.0
    # discretization / streams
    dt: float = 1e-3
    horizon: float = 50.0
    seed: int = 0
    replicates: int = 1000
    workers: int = 1
    ci_level: float = 0.95
    z_level: float = 3.0
    output_dir: str = "results"
    # simulate-exit / tail-fit
    start_x: float = 0.0
    start_y: float = 0.0
    unilateral: Optional[str] = None
    t_grid_step: float = 0.05
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    # small-ball
    eps_list: Optional[list] = None
    # phi-sup, submult, anderson, logconcavity
    starts: Optional[list] = None
    t: float = 2.0
    s: float = 1.0
    triples: Optional[list] = None
    # levy-check
    levels: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    band: Optional[float] = None
    compare_lam: Optional[float] = None
    # lil
    checkpoints: Optional[list] = None
    deltas: list = field(default_factory=lambda: [0.5, 1.0])
    k_hat: Optional[float] = None
    # selfcheck
    scale: float = 1.0

    @property
    def kernel(self):
        return Kernel(self.alpha, self.lam)

    @property
    def window(self):
        return Window(self.a, self.b)

    @property
    def spec(self):
        return PathSpec(self.dt, self.horizon, self.seed, 0)

    @property
    def start(self):
        return StartState(self.start_x, self.start_y)

    def start_list(self):
        return [StartState(float(x), float(y)) for x, y in self.starts]

    def to_dict(self):
        return dataclasses.asdict(self)

    def hash(self):
        """sha256 of the canonical JSON form, excluding the output location and worker count."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INTS = {"seed", "replicates", "workers"}
_OPTIONAL_FLOATS = {"t_min", "t_max", "band", "compare_lam", "k_hat"}


def _number(key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return float(value)


def _float_list(key, value):
    if not isinstance(value, list):
        raise ConfigError(f"{key}: expected a list")
    return [_number(key, v) for v in value]


def from_dict(raw):
    """Build and validate a config; unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kw = {}
    for key, value in raw.items():
        if key in ("operation", "output_dir", "unilateral"):
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{key}: expected a string")
            kw[key] = value
        elif key in _INTS:
            kw[key] = _number(key, value, integer=True)
        elif key in _OPTIONAL_FLOATS:
            kw[key] = None if value is None else _number(key, value)
        elif key in ("eps_list", "levels", "checkpoints", "deltas"):
            kw[key] = None if value is None else _float_list(key, value)
        elif key == "starts":
            if value is not None:
                if not isinstance(value, list) or not all(
                        isinstance(p, list) and len(p) == 2 for p in value):
                    raise ConfigError("starts: expected a list of [x, y] pairs")
                value = [[_number(key, x), _number(key, y)] for x, y in value]
            kw[key] = value
        elif key == "triples":
            if value is not None:
                if not isinstance(value, list) or not all(
                        isinstance(tr, list) and len(tr) == 2 and all(
                            isinstance(p, list) and len(p) == 2 for p in tr) for tr in value):
                    raise ConfigError("triples: expected a list of [[x1, y1], [x2, y2]] endpoints")
                value = [[[_number(key, c) for c in p] for p in tr] for tr in value]
            kw[key] = value
        else:
            kw[key] = _number(key, value)
    cfg = ExperimentConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.operation is not None and cfg.operation not in OPERATIONS:
        raise ConfigError(f"operation must be one of {', '.join(OPERATIONS)}")
    cfg.kernel, cfg.window, cfg.spec  # re-run type invariants
    if cfg.replicates < 0:
        raise ConfigError("replicates must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not 0 < cfg.ci_level < 1:
        raise ConfigError("ci_level must lie in (0, 1)")
    if cfg.z_level <= 0:
        raise ConfigError("z_level must be positive")
    if cfg.t_grid_step <= 0:
        raise ConfigError("t_grid_step must be positive")
    if cfg.unilateral not in (None, "lower", "upper"):
        raise ConfigError("unilateral must be null, 'lower' or 'upper'")
    if cfg.eps_list is not None:
        if any(e <= 0 for e in cfg.eps_list) or any(
                x <= y for x, y in zip(cfg.eps_list, cfg.eps_list[1:])):
            raise ConfigError("eps_list must be positive and strictly decreasing")
    if cfg.levels is not None and (any(v <= 0 for v in cfg.levels) or any(
            x >= y for x, y in zip(cfg.levels, cfg.levels[1:]))):
        raise ConfigError("levels must be positive and increasing")
    if cfg.checkpoints is not None and any(c <= math.e for c in cfg.checkpoints):
        raise ConfigError("checkpoints must exceed e")
    if cfg.band is not None and cfg.band <= 0:
        raise ConfigError("band must be positive")
    if cfg.scale <= 0:
        raise ConfigError("scale must be positive")
    if cfg.t <= 0 or cfg.s <= 0:
        raise ConfigError("s and t must be positive")


def load_config(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(raw)
