"""Benchmark configuration: one JSON document, overridable from the command line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

EXPERIMENTS = ("discrete", "semidiscrete", "continuous", "eps_sweep")


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


def _ten_seeds():
    return list(range(1, 11))


# fields that differ between experiments; a config file overrides these in turn
EXPERIMENT_DEFAULTS = {
    "discrete": {"eps": 0.01, "dim": 2, "passes": 200, "minibatch": 200, "tol": 1e-3},
    "semidiscrete": {
        "eps": 0.01, "dim": 3, "passes": 300, "minibatch": 1, "cost_median": 0.1,
        "eps_grid": [0.0, 1e-3, 1e-2, 1e-1], "sizes": {"I": 1, "J": 10, "N": [100, 1000]},
        "sgd_iters": 10**5, "reference_iters": 10**7, "checkpoint_every": 10,
    },
    "continuous": {
        "eps": 0.1, "dim": 1, "step_c": 0.01, "sizes": {"I": 1, "J": 1, "N": 1000},
        "sgd_iters": 10**5,
    },
    "eps_sweep": {
        "eps": 0.02, "dim": 2, "eps_grid": [0.5, 0.2, 0.1, 0.05, 0.02],
        "sizes": {"I": 5, "J": 5}, "seeds": list(range(10)),
    },
}


@dataclass(frozen=True)
class BenchConfig:
    """Settings for all four experiments; each experiment reads the fields it needs.

    ``seed`` fixes the instance (point clouds, mixtures, references) and
    ``seeds`` lists the independent solver runs.
    """

    experiment: str = "discrete"
    eps: float = 0.01
    eps_grid: list = field(default_factory=lambda: [0.0, 1e-3, 1e-2, 1e-1])
    stepsize_multiples: list = field(default_factory=lambda: [1.0, 3.0, 5.0])
    passes: int = 200
    minibatch: int = 200
    seed: int = 0
    seeds: list = field(default_factory=_ten_seeds)
    sizes: dict = field(default_factory=lambda: {"I": 1000, "J": 1000})
    dim: int = 2
    cloud: str = "uniform"
    tol: float = 1e-3
    checkpoint_every: int = 1
    median_pairs: int = 2000
    cost_median: float = 1.0
    step_c: float | None = None
    sag_multiple: float = 3.0
    sgd_iters: int = 10**5
    reference_iters: int = 10**7
    kernel_sigma: float | None = None
    radius_r: float = 1e4
    proxy_iters: int = 10**6
    proxy_step: float = 1.0
    eval_points: int = 2000
    checkpoints: list = field(default_factory=lambda: [1000, 10000, 100000])
    points_x: str | None = None
    points_y: str | None = None
    embeddings: str | None = None
    skip_top: int = 1000
    record_time: bool = False
    out_dir: str = "otbench_out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.cloud not in ("uniform", "gaussian"):
            raise ConfigError(f"cloud must be 'uniform' or 'gaussian', got {self.cloud!r}")
        if not isinstance(self.eps, (int, float)) or self.eps < 0:
            raise ConfigError(f"eps must be >= 0, got {self.eps!r}")
        if self.experiment in ("continuous", "discrete") and self.eps <= 0:
            raise ConfigError(f"the {self.experiment} experiment needs eps > 0")
        for name in ("passes", "minibatch", "dim", "checkpoint_every", "median_pairs",
                     "reference_iters", "proxy_iters", "eval_points", "sgd_iters"):
            val = getattr(self, name)
            low = 0 if name == "sgd_iters" and self.experiment == "continuous" else 1
            if not isinstance(val, int) or isinstance(val, bool) or val < low:
                raise ConfigError(f"{name} must be an integer >= {low}, got {val!r}")
        for name in ("I", "J"):
            val = self.sizes.get(name, 1)
            if not isinstance(val, int) or val < 1:
                raise ConfigError(f"sizes.{name} must be a positive integer, got {val!r}")
        ns = self.sizes.get("N", [])
        ns = [ns] if isinstance(ns, int) else list(ns)
        if any(not isinstance(n, int) or n < 1 for n in ns):
            raise ConfigError(f"sizes.N must hold positive integers, got {ns!r}")
        if not self.seeds or any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of non-negative integers")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if any(m <= 0 for m in self.stepsize_multiples):
            raise ConfigError("stepsize_multiples must be positive")
        if any(e < 0 for e in self.eps_grid):
            raise ConfigError("eps_grid entries must be >= 0")
        if self.cost_median <= 0 or self.radius_r <= 0 or self.tol <= 0:
            raise ConfigError("cost_median, radius_r and tol must be positive")
        if self.kernel_sigma is not None and self.kernel_sigma <= 0:
            raise ConfigError("kernel_sigma must be positive")

    @property
    def n_samples(self) -> list[int]:
        ns = self.sizes.get("N", [])
        return [ns] if isinstance(ns, int) else list(ns)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def load_config(path=None, **overrides) -> BenchConfig:
    """Read a JSON config (or start from defaults) and apply non-``None`` overrides.

    Precedence, lowest first: generic defaults, per-experiment defaults, the
    file, the overrides.
    """
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(BenchConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    extra = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(extra) - known
    if unknown:
        raise ConfigError(f"unknown override fields: {sorted(unknown)}")
    experiment = extra.get("experiment", data.get("experiment", "discrete"))
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    merged = {**EXPERIMENT_DEFAULTS[experiment], **data, **extra, "experiment": experiment}
    try:
        return BenchConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
