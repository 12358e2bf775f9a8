"""YAML experiment configuration.

Schema (every key optional; an empty file gives the default experiment)::

    model:
      N_b: 32                      # buffer capacity
      N_e: 32                      # battery capacity
      N_h: 8                       # number of channel states
      e_TX: 1
      eta: 50.0                    # overflow penalty per dropped packet
      gamma: 0.98
      plr: [0.8, ..., 0.1]         # packet loss rate per channel, strictly decreasing
      arrival_dist: [0.6, 0.4]     # pmf of data packets per slot
      harvest_dist: [0.3, 0.7]     # pmf of energy packets per slot
      channel_matrix: [[...], ...] # N_h x N_h; default birth-death chain
      channel_stay: 0.5            # stay probability of the default chain
    sim:
      seed: 0
      horizon: 50000
      initial_state: [0, 0, null]  # null channel draws from the stationary law
    algorithm: grid                # optimal | q-learning | pds | ve | grid
    algorithm_config: {...}        # keys depend on the algorithm, see ALGORITHM_KEYS
    replicas: 10
    stride: 100
    workers: 1
    output: results.csv

Errors are reported as ``ConfigError`` with the offending field path and,
when the value came from a file, its line number.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import yaml

from .grid import GridLearnerConfig
from .learners import BetaSchedule, EpsilonSchedule, LearnerConfig
from .model import InvalidParams, ModelParams, birth_death_channel
from .quadtree import BoundingBox
from .sim import SimConfig

ALGORITHMS = ("optimal", "q-learning", "pds", "ve", "grid")

ALGORITHM_KEYS = {
    "optimal": {"tol", "max_iters"},
    "q-learning": {"beta", "epsilon", "q_init"},
    "pds": {"beta"},
    "ve": {"beta", "T"},
    "grid": {"beta", "delta", "T_grid", "delta_unit", "root_bb"},
}

MODEL_KEYS = {"N_b", "N_e", "N_h", "e_TX", "eta", "gamma", "plr", "arrival_dist",
              "harvest_dist", "channel_matrix", "channel_stay"}
SIM_KEYS = {"seed", "horizon", "initial_state"}
TOP_KEYS = {"model", "sim", "algorithm", "algorithm_config", "replicas", "stride", "workers", "output"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OptimalConfig:
    tol: float = 1e-8
    max_iters: int = 5000

    def __post_init__(self):
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tol must be positive and max_iters >= 1")


AlgorithmConfig = Union[OptimalConfig, LearnerConfig, GridLearnerConfig]


@dataclass(frozen=True)
class ExperimentSpec:
    model: ModelParams = field(default_factory=ModelParams)
    sim: SimConfig = field(default_factory=SimConfig)
    algorithm: str = "optimal"
    algorithm_config: AlgorithmConfig = field(default_factory=OptimalConfig)
    replicas: int = 10
    stride: int = 100
    workers: int = 1
    output: Path | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: expected one of {', '.join(ALGORITHMS)}, got {self.algorithm!r}")
        want = {"optimal": OptimalConfig, "grid": GridLearnerConfig}.get(self.algorithm, LearnerConfig)
        if not isinstance(self.algorithm_config, want):
            raise ConfigError(f"algorithm_config: {self.algorithm} needs {want.__name__}, "
                              f"got {type(self.algorithm_config).__name__}")
        if self.replicas < 1:
            raise ConfigError("replicas: must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride: must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")

    @property
    def label(self) -> str:
        cfg = self.algorithm_config
        if self.algorithm == "ve":
            return f"VE-{cfg.T}"
        if self.algorithm == "grid":
            return f"Grid-{cfg.T_grid}"
        return {"optimal": "Optimal", "pds": "PDS", "q-learning": "Q-learning"}[self.algorithm]


def default_algorithm_config(algorithm: str) -> AlgorithmConfig:
    if algorithm == "optimal":
        return OptimalConfig()
    if algorithm == "grid":
        return GridLearnerConfig()
    return LearnerConfig()


class _Lines:
    """Line numbers of mapping keys, keyed by dotted path."""

    def __init__(self, text: str):
        self.lines: dict[str, int] = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, "")

    def _walk(self, node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                self.lines[path] = k.start_mark.line + 1
                self._walk(v, path)

    def where(self, path: str) -> str:
        while path:
            if path in self.lines:
                return f"line {self.lines[path]}: "
            path = path.rpartition(".")[0]
        return ""


class _Reader:
    def __init__(self, lines: _Lines | None = None):
        self.lines = lines or _Lines("")

    def fail(self, path: str, msg: str):
        raise ConfigError(f"{self.lines.where(path)}{path}: {msg}")

    def section(self, data, path: str, allowed: set[str]) -> dict:
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.fail(path, f"expected a mapping, got {type(data).__name__}")
        for key in data:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else str(key),
                          f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return data

    def integer(self, data, key, path, lo=None):
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"{path}.{key}", f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            self.fail(f"{path}.{key}", f"must be >= {lo}, got {v}")
        return v

    def number(self, data, key, path):
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{path}.{key}", f"expected a number, got {v!r}")
        return float(v)

    def vector(self, data, key, path):
        v = data[key]
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                              for x in v):
            self.fail(f"{path}.{key}", "expected a list of numbers")
        return tuple(float(x) for x in v)


def _model(r: _Reader, data) -> ModelParams:
    d = r.section(data, "model", MODEL_KEYS)
    kw: dict[str, Any] = {}
    for key in ("N_b", "N_e", "N_h", "e_TX"):
        if key in d:
            kw[key] = r.integer(d, key, "model", lo=1 if key in ("N_h", "e_TX") else 0)
    for key in ("eta", "gamma"):
        if key in d:
            kw[key] = r.number(d, key, "model")
    for key in ("plr", "arrival_dist", "harvest_dist"):
        if key in d:
            kw[key] = r.vector(d, key, "model")
    if "channel_matrix" in d:
        rows = d["channel_matrix"]
        if not isinstance(rows, list):
            r.fail("model.channel_matrix", "expected a list of rows")
        kw["channel_matrix"] = tuple(r.vector({"row": row}, "row", "model.channel_matrix") for row in rows)
        if "channel_stay" in d:
            r.fail("model.channel_stay", "cannot be combined with channel_matrix")
    elif "channel_stay" in d:
        stay = r.number(d, "channel_stay", "model")
        if not 0.0 <= stay <= 1.0:
            r.fail("model.channel_stay", "must lie in [0, 1]")
        kw["channel_matrix"] = tuple(map(tuple, birth_death_channel(kw.get("N_h", 8), stay).tolist()))
    try:
        return ModelParams(**kw)
    except InvalidParams as exc:
        msg = str(exc)
        key = next((k for k in sorted(MODEL_KEYS, key=len, reverse=True) if msg.startswith(k)), "")
        r.fail(f"model.{key}" if key else "model", msg)


def _sim(r: _Reader, data) -> SimConfig:
    d = r.section(data, "sim", SIM_KEYS)
    kw: dict[str, Any] = {}
    if "seed" in d:
        kw["seed"] = r.integer(d, "seed", "sim", lo=0)
    if "horizon" in d:
        kw["horizon"] = r.integer(d, "horizon", "sim", lo=1)
    if "initial_state" in d:
        s = d["initial_state"]
        if (not isinstance(s, list) or len(s) != 3
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in s[:2])
                or not (s[2] is None or isinstance(s[2], int))):
            r.fail("sim.initial_state", "expected [b, e, h] with integer b, e and integer or null h")
        kw["initial_state"] = tuple(s)
    return SimConfig(**kw)


def _beta(r: _Reader, data, path) -> BetaSchedule:
    d = r.section(data, path, {"kind", "n0", "value"})
    kw = {}
    if "kind" in d:
        kw["kind"] = str(d["kind"])
    for key in ("n0", "value"):
        if key in d:
            kw[key] = r.number(d, key, path)
    try:
        return BetaSchedule(**kw)
    except ValueError as exc:
        r.fail(path, str(exc))


def _algorithm_config(r: _Reader, algorithm: str, data) -> AlgorithmConfig:
    path = "algorithm_config"
    d = r.section(data, path, ALGORITHM_KEYS[algorithm])
    try:
        if algorithm == "optimal":
            kw = {}
            if "tol" in d:
                kw["tol"] = r.number(d, "tol", path)
            if "max_iters" in d:
                kw["max_iters"] = r.integer(d, "max_iters", path, lo=1)
            return OptimalConfig(**kw)
        beta = _beta(r, d["beta"], f"{path}.beta") if "beta" in d else BetaSchedule()
        if algorithm == "grid":
            kw = {"beta": beta}
            if "delta" in d:
                kw["delta"] = r.number(d, "delta", path)
            if "T_grid" in d:
                kw["T_grid"] = r.integer(d, "T_grid", path, lo=1)
            if "delta_unit" in d:
                kw["delta_unit"] = str(d["delta_unit"])
            if "root_bb" in d:
                bb = d["root_bb"]
                if not isinstance(bb, list) or len(bb) != 4 or not all(isinstance(x, int) for x in bb):
                    r.fail(f"{path}.root_bb", "expected [b_minus, b_plus, e_minus, e_plus]")
                kw["root_bb"] = BoundingBox(*bb)
            return GridLearnerConfig(**kw)
        kw = {"beta": beta}
        if "T" in d:
            kw["T"] = r.integer(d, "T", path, lo=1)
        if "q_init" in d:
            kw["q_init"] = r.number(d, "q_init", path)
        if "epsilon" in d:
            e = r.section(d["epsilon"], f"{path}.epsilon", {"floor", "decay"})
            kw["epsilon"] = EpsilonSchedule(**{k: r.number(e, k, f"{path}.epsilon") for k in e})
        return LearnerConfig(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        r.fail(path, str(exc))


def spec_from_dict(data: dict | None, lines: _Lines | None = None) -> ExperimentSpec:
    r = _Reader(lines)
    d = r.section(data, "", TOP_KEYS)
    model = _model(r, d.get("model"))
    sim = _sim(r, d.get("sim"))
    algorithm = d.get("algorithm", "optimal")
    if algorithm not in ALGORITHMS:
        r.fail("algorithm", f"expected one of {', '.join(ALGORITHMS)}, got {algorithm!r}")
    algo_cfg = _algorithm_config(r, algorithm, d.get("algorithm_config"))
    kw: dict[str, Any] = {}
    for key in ("replicas", "stride", "workers"):
        if key in d:
            kw[key] = r.integer(d, key, "", lo=1)
    if d.get("output") is not None:
        kw["output"] = Path(str(d["output"]))
    b0, e0, h0 = sim.initial_state
    if not (0 <= b0 <= model.N_b and 0 <= e0 <= model.N_e and (h0 is None or 0 <= h0 < model.N_h)):
        r.fail("sim.initial_state", f"{list(sim.initial_state)} lies outside the state space")
    return ExperimentSpec(model, sim, algorithm, algo_cfg, **kw)


def load_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return spec_from_dict(data, _Lines(text))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
