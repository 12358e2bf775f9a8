"""Seeded simulator of the scheduling environment and the per-slot metrics it records.

Randomness comes from numpy's Philox4x32-10 counter-based generator. Each
replica seed ``s`` gives two independent streams, ``SeedSequence([s, 0])`` for
the environment and ``SeedSequence([s, 1])`` for any controller that explores.
Every slot consumes exactly four uniforms from the environment stream, in the
order goodput f, data arrivals l, energy arrivals e_H, next channel h'. The
goodput uniform is consumed even when the sensor stays idle, so the arrival,
harvest and channel processes do not depend on the controller.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from typing import Protocol

import numpy as np

from .model import ExperienceTuple, ModelParams, SystemState, feasible_actions

ENV_STREAM = 0
AGENT_STREAM = 1
_BLOCK = 1024


def make_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


class UniformStream:
    """Uniforms from a generator, drawn in fixed blocks of ``width`` per row."""

    def __init__(self, rng: np.random.Generator, width: int):
        self.rng = rng
        self.width = width
        self._rows: list = []
        self._i = 0

    def next(self) -> list[float]:
        if self._i >= len(self._rows):
            self._rows = self.rng.random((_BLOCK, self.width)).tolist()
            self._i = 0
        row = self._rows[self._i]
        self._i += 1
        return row


def stationary_distribution(P: np.ndarray, tol: float = 1e-14, max_iters: int = 100_000) -> np.ndarray:
    """Power iteration from the uniform vector."""
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iters):
        nxt = pi @ P
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt / nxt.sum()
        pi = nxt
    return pi / pi.sum()


def _cdf(probs) -> list[float]:
    return list(accumulate(float(p) for p in probs))


def _sample(cdf: list[float], u: float) -> int:
    return min(bisect_right(cdf, u), len(cdf) - 1)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    horizon: int = 50_000
    initial_state: tuple = (0, 0, None)  # h=None draws h^0 from the stationary law

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


class Environment:
    def __init__(self, params: ModelParams, seed: int):
        self.params = params
        self.uniforms = UniformStream(make_rng(seed, ENV_STREAM), 4)
        self._l_cdf = _cdf(params.arrival_dist)
        self._eh_cdf = _cdf(params.harvest_dist)
        self._h_cdf = [_cdf(row) for row in params.channel_matrix]

    def initial_state(self, initial=(0, 0, None)) -> SystemState:
        b, e, h = initial
        if h is None:
            cache = self.params._cache
            if "pi_h_cdf" not in cache:
                cache["pi_h_cdf"] = _cdf(stationary_distribution(self.params.P_h()))
            h = _sample(cache["pi_h_cdf"], self.uniforms.next()[0])
        return SystemState(int(b), int(e), int(h))

    def step(self, s: SystemState, a: int) -> tuple[SystemState, ExperienceTuple, int, int]:
        """Advance one slot; returns (next state, experience, goodput, dropped packets)."""
        p = self.params
        b, e, h = s
        if a not in feasible_actions(b, e, p):
            raise ValueError(f"action {a} infeasible in {s}")
        u_f, u_l, u_e, u_h = self.uniforms.next()
        f = 1 if a == 1 and u_f < 1.0 - p.plr[h] else 0
        l = _sample(self._l_cdf, u_l)
        e_H = _sample(self._eh_cdf, u_e)
        h2 = _sample(self._h_cdf[h], u_h)
        filled = b - f + l
        overflow = max(filled - p.N_b, 0)
        s2 = SystemState(min(filled, p.N_b), min(e - a * p.e_TX + e_H, p.N_e), h2)
        return s2, ExperienceTuple(l, e_H, h2), f, overflow


class Controller(Protocol):
    updates_last_slot: int

    def act(self, s: SystemState) -> int: ...

    def observe(self, s: SystemState, a: int, f: int, x: ExperienceTuple, s_next: SystemState,
                overflow: int) -> None: ...


class PolicyController:
    """Fixed policy given as an action table ``[b, e, h]`` or a callable of the state."""

    updates_last_slot = 0
    grid_points = 0

    def __init__(self, policy):
        self.policy = policy

    def act(self, s):
        if callable(self.policy):
            return int(self.policy(s))
        return int(self.policy[s])

    def observe(self, s, a, f, x, s_next, overflow):
        pass


@dataclass
class MetricsTrace:
    """Per-slot metrics; entry n describes slots 0..n.

    ``avg_buffer``/``avg_battery``/``avg_cost`` are running means from slot 0 of
    the decision-time state and of the realized cost b + eta * dropped.
    """

    avg_buffer: np.ndarray
    avg_battery: np.ndarray
    cum_overflows: np.ndarray
    updates: np.ndarray
    grid_points: np.ndarray
    avg_cost: np.ndarray
    final_state: SystemState

    @property
    def horizon(self) -> int:
        return len(self.avg_buffer)

    @property
    def total_updates(self) -> int:
        return int(self.updates.sum())


def run_episode(controller, config: SimConfig, params: ModelParams) -> MetricsTrace:
    env = Environment(params, config.seed)
    s = env.initial_state(config.initial_state)
    n = config.horizon
    buf = np.empty(n)
    bat = np.empty(n)
    ovf = np.empty(n, dtype=np.int64)
    upd = np.empty(n, dtype=np.int64)
    pts = np.empty(n, dtype=np.int64)
    cost = np.empty(n)
    sb = se = sc = 0.0
    drops = 0
    eta = params.eta
    has_points = hasattr(controller, "grid_points")
    for k in range(n):
        a = controller.act(s)
        s2, x, f, overflow = env.step(s, a)
        controller.observe(s, a, f, x, s2, overflow)
        sb += s.b
        se += s.e
        sc += s.b + eta * overflow
        drops += overflow
        buf[k] = sb / (k + 1)
        bat[k] = se / (k + 1)
        cost[k] = sc / (k + 1)
        ovf[k] = drops
        upd[k] = controller.updates_last_slot
        pts[k] = controller.grid_points if has_points else 0
        s = s2
    return MetricsTrace(buf, bat, ovf, upd, pts, cost, s)
