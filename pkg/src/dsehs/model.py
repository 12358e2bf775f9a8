"""Energy-harvesting transmission scheduling MDP: states, actions, costs and kernels.

Everything here is a pure function of immutable inputs. Arrays returned by
the ``*_matrix`` helpers are fresh copies and may be modified by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

DIST_TOL = 1e-12


class InvalidParams(ValueError):
    """Raised when model constants violate their invariants."""


class SystemState(NamedTuple):
    b: int
    e: int
    h: int


class PostDecisionState(NamedTuple):
    b: int
    e: int
    h: int


class ExperienceTuple(NamedTuple):
    """Unknown dynamics observed in one slot: data arrivals, energy arrivals, next channel."""

    l: int
    e_H: int
    h_next: int


def birth_death_channel(n_h: int, stay: float = 0.5) -> np.ndarray:
    """Symmetric birth-death chain; mass that would leave the state space stays put."""
    if n_h < 1:
        raise InvalidParams("N_h must be >= 1")
    move = (1.0 - stay) / 2.0
    P = np.zeros((n_h, n_h))
    for h in range(n_h):
        P[h, h] += stay
        P[h, max(h - 1, 0)] += move
        P[h, min(h + 1, n_h - 1)] += move
    return P


def default_plr(n_h: int) -> tuple[float, ...]:
    if n_h == 1:
        return (0.5,)
    return tuple(round(float(q), 12) for q in np.linspace(0.8, 0.1, n_h))


def bernoulli(p: float) -> tuple[float, float]:
    return (1.0 - p, p)


def _check_dist(name: str, dist: Sequence[float]) -> None:
    arr = np.asarray(dist, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidParams(f"{name} must be a non-empty probability vector")
    if np.any(arr < 0) or np.any(arr > 1):
        raise InvalidParams(f"{name} entries must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > DIST_TOL:
        raise InvalidParams(f"{name} sums to {float(arr.sum())!r}, not 1")


@dataclass(frozen=True)
class ModelParams:
    """All constants of the scheduling MDP.

    Field names follow the usual notation: ``N_b``/``N_e`` are buffer and battery
    capacities, ``e_TX`` the energy packets spent per transmission, ``eta`` the
    per-packet overflow penalty and ``plr[h]`` the packet loss rate in channel h.
    ``arrival_dist[l]`` and ``harvest_dist[e_H]`` are pmfs on 0, 1, 2, ...
    """

    N_b: int = 32
    N_e: int = 32
    N_h: int = 8
    e_TX: int = 1
    eta: float = 50.0
    gamma: float = 0.98
    plr: tuple[float, ...] = ()
    arrival_dist: tuple[float, ...] = (0.6, 0.4)
    harvest_dist: tuple[float, ...] = (0.3, 0.7)
    channel_matrix: tuple[tuple[float, ...], ...] = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        set_ = object.__setattr__
        if not self.plr:
            set_(self, "plr", default_plr(self.N_h))
        if not self.channel_matrix:
            set_(self, "channel_matrix", tuple(map(tuple, birth_death_channel(self.N_h).tolist())))
        set_(self, "plr", tuple(float(q) for q in self.plr))
        set_(self, "arrival_dist", tuple(float(p) for p in self.arrival_dist))
        set_(self, "harvest_dist", tuple(float(p) for p in self.harvest_dist))
        set_(self, "channel_matrix", tuple(tuple(float(p) for p in row) for row in self.channel_matrix))
        self.validate()

    def validate(self) -> None:
        for name in ("N_b", "N_e"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be a non-negative integer")
        if self.N_h < 1:
            raise InvalidParams("N_h must be a positive integer")
        if self.e_TX < 1 or self.e_TX > self.N_e:
            raise InvalidParams(f"e_TX must satisfy 1 <= e_TX <= N_e, got {self.e_TX}")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidParams(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.eta < 0:
            raise InvalidParams("eta must be non-negative")
        if len(self.plr) != self.N_h:
            raise InvalidParams(f"plr has {len(self.plr)} entries, expected N_h={self.N_h}")
        if any(not 0.0 <= q <= 1.0 for q in self.plr):
            raise InvalidParams("plr entries must lie in [0, 1]")
        if any(hi >= lo for lo, hi in zip(self.plr, self.plr[1:])):
            raise InvalidParams("plr must be strictly decreasing in h")
        _check_dist("arrival_dist", self.arrival_dist)
        _check_dist("harvest_dist", self.harvest_dist)
        P = np.asarray(self.channel_matrix, dtype=float)
        if P.shape != (self.N_h, self.N_h):
            raise InvalidParams(f"channel_matrix must be {self.N_h}x{self.N_h}, got {P.shape}")
        for h, row in enumerate(P):
            _check_dist(f"channel_matrix[{h}]", row)

    def replace(self, **changes) -> "ModelParams":
        if "N_h" in changes:
            changes.setdefault("plr", ())
            changes.setdefault("channel_matrix", ())
        return replace(self, **changes)

    @property
    def M_l(self) -> int:
        return len(self.arrival_dist) - 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N_b + 1, self.N_e + 1, self.N_h)

    @property
    def n_states(self) -> int:
        return (self.N_b + 1) * (self.N_e + 1) * self.N_h

    def P_h(self) -> np.ndarray:
        return np.array(self.channel_matrix, dtype=float)

    def states(self):
        for b in range(self.N_b + 1):
            for e in range(self.N_e + 1):
                for h in range(self.N_h):
                    yield SystemState(b, e, h)


def feasible_actions(b: int, e: int, params: ModelParams) -> tuple[int, ...]:
    if b > 0 and e >= params.e_TX:
        return (0, 1)
    return (0,)


def goodput_dist(a: int, h: int, params: ModelParams) -> tuple[float, float]:
    """P(f=0), P(f=1). ``plr`` is a loss rate, so a transmission succeeds w.p. 1 - q(h)."""
    if a == 0:
        return (1.0, 0.0)
    q = params.plr[h]
    return (q, 1.0 - q)


def _require_feasible(b: int, e: int, a: int, params: ModelParams) -> None:
    if a not in feasible_actions(b, e, params):
        raise ValueError(f"action {a} infeasible in (b={b}, e={e}) with e_TX={params.e_TX}")


def pds_of(s: SystemState, a: int, f: int, params: ModelParams) -> PostDecisionState:
    b, e, h = s
    _require_feasible(b, e, a, params)
    if f not in (0, 1) or f > a:
        raise ValueError(f"goodput f={f} impossible under action a={a}")
    return PostDecisionState(b - f, e - a * params.e_TX, h)


def next_state(pds: PostDecisionState, x: ExperienceTuple, params: ModelParams) -> SystemState:
    return SystemState(min(pds.b + x.l, params.N_b), min(pds.e + x.e_H, params.N_e), x.h_next)


def overflow_cost(b_pds: int, params: ModelParams) -> float:
    """Expected overflow penalty of a post-decision buffer level."""
    return params.eta * sum(p * max(b_pds + l - params.N_b, 0) for l, p in enumerate(params.arrival_dist))


def buffer_cost(b: int, h: int, a: int, params: ModelParams) -> float:
    """Holding cost plus expected overflow cost, enumerating goodput and arrivals."""
    if a == 1 and b == 0:
        raise ValueError("cannot transmit from an empty buffer")
    total = float(b)
    for f, pf in enumerate(goodput_dist(a, h, params)):
        if pf == 0.0:
            continue
        for l, pl in enumerate(params.arrival_dist):
            total += pl * pf * params.eta * max(b - f + l - params.N_b, 0)
    return total


def buffer_kernel(b: int, h: int, a: int, params: ModelParams) -> np.ndarray:
    if a == 1 and b == 0:
        raise ValueError("cannot transmit from an empty buffer")
    out = np.zeros(params.N_b + 1)
    for f, pf in enumerate(goodput_dist(a, h, params)):
        if pf == 0.0:
            continue
        for l, pl in enumerate(params.arrival_dist):
            out[min(b - f + l, params.N_b)] += pf * pl
    return out


def battery_kernel(e: int, a: int, params: ModelParams) -> np.ndarray:
    if e < a * params.e_TX:
        raise ValueError(f"battery {e} cannot fund action {a}")
    out = np.zeros(params.N_e + 1)
    for e_H, p in enumerate(params.harvest_dist):
        out[min(e - a * params.e_TX + e_H, params.N_e)] += p
    return out


def full_kernel(s: SystemState, a: int, params: ModelParams) -> dict[SystemState, float]:
    """Sparse next-state distribution as the product of the three factor kernels."""
    b, e, h = s
    _require_feasible(b, e, a, params)
    pb = buffer_kernel(b, h, a, params)
    pe = battery_kernel(e, a, params)
    ph = params.channel_matrix[h]
    out = {}
    for b2 in np.flatnonzero(pb):
        for e2 in np.flatnonzero(pe):
            for h2, p in enumerate(ph):
                if p > 0.0:
                    out[SystemState(int(b2), int(e2), h2)] = float(pb[b2] * pe[e2] * p)
    return out


# Vectorized forms used by the solvers and the virtual-experience sweep.

def arrival_matrix(params: ModelParams) -> np.ndarray:
    """U[b_pds, b'] = P(min(b_pds + l, N_b) = b')."""
    B = params.N_b + 1
    U = np.zeros((B, B))
    for b in range(B):
        for l, p in enumerate(params.arrival_dist):
            U[b, min(b + l, params.N_b)] += p
    return U


def harvest_matrix(params: ModelParams) -> np.ndarray:
    """U[e_pds, e'] = P(min(e_pds + e_H, N_e) = e')."""
    E = params.N_e + 1
    U = np.zeros((E, E))
    for e in range(E):
        for e_H, p in enumerate(params.harvest_dist):
            U[e, min(e + e_H, params.N_e)] += p
    return U


def overflow_cost_vector(params: ModelParams) -> np.ndarray:
    return np.array([overflow_cost(b, params) for b in range(params.N_b + 1)])


def cost_table(params: ModelParams) -> np.ndarray:
    """c[b, e, h, a]; infeasible entries are +inf."""
    B, E, H = params.shape
    c = np.full((B, E, H, 2), np.inf)
    for b in range(B):
        for h in range(H):
            c0 = buffer_cost(b, h, 0, params)
            c[b, :, h, 0] = c0
            if b > 0:
                c[b, params.e_TX:, h, 1] = buffer_cost(b, h, 1, params)
    return c


def max_cost(params: ModelParams) -> float:
    c = cost_table(params)
    return float(c[np.isfinite(c)].max())


def v_max(params: ModelParams) -> float:
    """Upper bound max c(s, a) / (1 - gamma) on every value-function entry."""
    key = "v_max"
    if key not in params._cache:
        params._cache[key] = max_cost(params) / (1.0 - params.gamma)
    return params._cache[key]
