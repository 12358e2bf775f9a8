"""Online tabular learners: Q-learning, post-decision-state learning and virtual experience.

All learners are driven by :func:`dsehs.sim.run_episode` through ``act`` and
``observe``; ``updates_last_slot`` reports how many table entries the last
``observe`` call rewrote.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ExperienceTuple, ModelParams, PostDecisionState, SystemState, v_max
from .oracle import ValueFn, action_scores, greedy_action, table_lookup
from .sim import AGENT_STREAM, UniformStream, make_rng


@dataclass(frozen=True)
class BetaSchedule:
    """Learning rate beta_n.

    ``harmonic``: n0 / (n0 + n), which satisfies the Robbins-Monro conditions.
    ``constant``: ``value`` for every n.
    """

    kind: str = "harmonic"
    n0: float = 2000.0
    value: float = 0.1

    def __post_init__(self):
        if self.kind not in ("harmonic", "constant"):
            raise ValueError(f"unknown beta schedule {self.kind!r}")
        if self.kind == "harmonic" and self.n0 <= 0:
            raise ValueError("n0 must be positive")
        if self.kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise ValueError("constant beta must lie in [0, 1]")

    def __call__(self, n: int) -> float:
        if self.kind == "constant":
            return self.value
        return self.n0 / (self.n0 + n)


@dataclass(frozen=True)
class EpsilonSchedule:
    """epsilon_n = max(floor, decay ** n)."""

    floor: float = 0.05
    decay: float = 0.9999

    def __post_init__(self):
        if not (0.0 <= self.floor <= 1.0 and 0.0 < self.decay <= 1.0):
            raise ValueError("epsilon schedule needs floor in [0,1] and decay in (0,1]")

    def __call__(self, n: int) -> float:
        return max(self.floor, self.decay ** n)


@dataclass(frozen=True)
class LearnerConfig:
    beta: BetaSchedule = field(default_factory=BetaSchedule)
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    T: int = 10
    q_init: float = 0.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("update period T must be >= 1")


def next_state_value(value_fn: ValueFn, b: int, e: int, h: int, params: ModelParams) -> float:
    """Greedy one-step lookahead value of a state from post-decision values."""
    score0, score1 = action_scores(value_fn, SystemState(b, e, h), params)
    return score0 if score1 is None or score0 <= score1 else score1


def update_pdsv(value_fn: ValueFn, pds: PostDecisionState, x: ExperienceTuple, beta: float,
                params: ModelParams) -> float:
    """New estimate for one post-decision state from one observed experience tuple."""
    b, e, h = pds
    b2 = min(b + x.l, params.N_b)
    e2 = min(e + x.e_H, params.N_e)
    target = params.eta * max(b + x.l - params.N_b, 0) + params.gamma * next_state_value(
        value_fn, b2, e2, x.h_next, params)
    return (1.0 - beta) * value_fn(b, e, h) + beta * target


def _clamp(v: float, hi: float) -> float:
    return 0.0 if v < 0.0 else hi if v > hi else v


class PDSLearner:
    """Greedy control with one post-decision-state update per slot."""

    grid_points = 0

    def __init__(self, params: ModelParams, config: LearnerConfig | None = None):
        self.params = params
        self.config = config or LearnerConfig()
        self.table = np.zeros(params.shape)
        self.lookup = table_lookup(self.table)
        self.vmax = v_max(params)
        self.n = 0
        self.updates_last_slot = 0

    def act(self, s: SystemState) -> int:
        return greedy_action(self.lookup, s, self.params)

    def observe(self, s, a, f, x, s_next=None, overflow=None):
        p = self.params
        pds = PostDecisionState(s.b - f, s.e - a * p.e_TX, s.h)
        new = update_pdsv(self.lookup, pds, x, self.config.beta(self.n), p)
        self.table[pds] = _clamp(new, self.vmax)
        self.n += 1
        self.updates_last_slot = 1


def channel_values(W: np.ndarray, q: float, e_tx: int) -> np.ndarray:
    """State values on one channel slice ``W[b, e]`` of a post-decision table."""
    B, E = W.shape
    hold = np.arange(B, dtype=float)[:, None]
    V = hold + W
    if B > 1 and E > e_tx:
        send = hold[1:] + q * W[1:, : E - e_tx] + (1.0 - q) * W[:-1, : E - e_tx]
        V[1:, e_tx:] = np.where(send < V[1:, e_tx:], send, V[1:, e_tx:])
    return V


class VELearner(PDSLearner):
    """Virtual experience: every T slots, update all (b~, e~) on the current channel.

    The sweep replays only the most recent experience tuple.
    """

    def __init__(self, params: ModelParams, config: LearnerConfig | None = None):
        super().__init__(params, config)
        B, E, _ = params.shape
        self._b = np.arange(B)
        self._e = np.arange(E)
        self.sweeps = 0

    def sweep(self, h: int, x: ExperienceTuple, beta: float) -> None:
        p = self.params
        V = channel_values(self.table[:, :, x.h_next], p.plr[x.h_next], p.e_TX)
        b2 = np.minimum(self._b + x.l, p.N_b)
        e2 = np.minimum(self._e + x.e_H, p.N_e)
        target = p.eta * np.maximum(self._b + x.l - p.N_b, 0)[:, None] + p.gamma * V[np.ix_(b2, e2)]
        new = (1.0 - beta) * self.table[:, :, h] + beta * target
        self.table[:, :, h] = np.clip(new, 0.0, self.vmax)
        self.sweeps += 1

    def observe(self, s, a, f, x, s_next=None, overflow=None):
        if (self.n + 1) % self.config.T == 0:
            self.sweep(s.h, x, self.config.beta(self.n))
            self.updates_last_slot = self.table.shape[0] * self.table.shape[1]
        else:
            self.updates_last_slot = 0
        self.n += 1


class QLearner:
    """Tabular Q-learning with epsilon-greedy exploration over the feasible actions."""

    grid_points = 0

    def __init__(self, params: ModelParams, config: LearnerConfig | None = None, seed: int = 0):
        self.params = params
        self.config = config or LearnerConfig()
        self.q = np.full(params.shape + (2,), float(self.config.q_init))
        self.vmax = v_max(params)
        self.uniforms = UniformStream(make_rng(seed, AGENT_STREAM), 2)
        self.n = 0
        self.updates_last_slot = 0

    def _best(self, b, e, h) -> tuple[int, float]:
        q0 = self.q[b, e, h, 0]
        if b > 0 and e >= self.params.e_TX:
            q1 = self.q[b, e, h, 1]
            if q1 < q0:
                return 1, q1
        return 0, q0

    def act(self, s: SystemState) -> int:
        b, e, h = s
        u_explore, u_pick = self.uniforms.next()
        if u_explore < self.config.epsilon(self.n):
            if b > 0 and e >= self.params.e_TX:
                return 1 if u_pick < 0.5 else 0
            return 0
        return self._best(b, e, h)[0]

    def observe(self, s, a, f, x, s_next, overflow):
        p = self.params
        beta = self.config.beta(self.n)
        cost = s.b + p.eta * overflow
        target = cost + p.gamma * self._best(*s_next)[1]
        idx = (s.b, s.e, s.h, a)
        self.q[idx] = _clamp((1.0 - beta) * self.q[idx] + beta * target, self.vmax)
        self.n += 1
        self.updates_last_slot = 1
