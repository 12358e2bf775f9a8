"""Exact offline solvers and numerical verifiers for the scheduling MDP.

Value tables are dense float arrays of shape ``(N_b+1, N_e+1, N_h)`` indexed
``[b, e, h]``. A post-decision value table uses the same layout with the
post-decision coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import (
    ModelParams,
    SystemState,
    arrival_matrix,
    battery_kernel,
    buffer_kernel,
    cost_table,
    feasible_actions,
    goodput_dist,
    harvest_matrix,
    overflow_cost_vector,
    v_max,
)

ValueFn = Callable[[int, int, int], float]


@dataclass
class Solution:
    values: np.ndarray
    residual: float
    iterations: int
    converged: bool
    kind: str = "V"
    policy: np.ndarray | None = None
    residuals: list[float] = field(default_factory=list, repr=False)


class _Operators:
    """Precomputed matrices shared by the Bellman operators of one model."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.U_b = arrival_matrix(params)
        self.U_e = harvest_matrix(params)
        self.P_h = params.P_h()
        self.c_u = overflow_cost_vector(params)
        q = np.asarray(params.plr)
        self.q = q[None, None, :]
        B, E, H = params.shape
        b = np.arange(B, dtype=float)
        self.hold = np.broadcast_to(b[:, None, None], (B, E, H))

    def expect_next(self, V: np.ndarray) -> np.ndarray:
        """E[V(min(b+l,N_b), min(e+e_H,N_e), h')] for every post-decision state."""
        X = np.einsum("hk,bek->beh", self.P_h, V)
        X = np.einsum("ij,bjh->bih", self.U_e, X)
        return np.einsum("ij,jeh->ieh", self.U_b, X)

    def pds_from_v(self, V: np.ndarray) -> np.ndarray:
        return self.c_u[:, None, None] + self.params.gamma * self.expect_next(V)

    def action_scores(self, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bracketed greedy expression for a=0 and a=1 given a post-decision table W."""
        e_tx = self.params.e_TX
        s0 = self.hold + W
        s1 = np.full(W.shape, np.inf)
        # f=1 lands on (b-1, e-e_TX), f=0 on (b, e-e_TX)
        lost = W[1:, : W.shape[1] - e_tx, :]
        ok = W[:-1, : W.shape[1] - e_tx, :]
        q = self.q
        s1[1:, e_tx:, :] = self.hold[1:, e_tx:, :] + q * lost + (1.0 - q) * ok
        return s0, s1

    def v_from_pds(self, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s0, s1 = self.action_scores(W)
        send = s1 < s0
        return np.where(send, s1, s0), send.astype(np.int8)

    def h_pds(self, W: np.ndarray) -> np.ndarray:
        return self.pds_from_v(self.v_from_pds(W)[0])


def operators(params: ModelParams) -> _Operators:
    ops = params._cache.get("ops")
    if ops is None:
        ops = params._cache["ops"] = _Operators(params)
    return ops


def v_from_pds(pds_values: np.ndarray, params: ModelParams) -> np.ndarray:
    """V(s) = min_a { b + sum_f P(f|a,h) V~(b-f, e-a*e_TX, h) }."""
    return operators(params).v_from_pds(np.asarray(pds_values, dtype=float))[0]


def pds_from_v(values: np.ndarray, params: ModelParams) -> np.ndarray:
    """V~(s~) = c_u(s~) + gamma * E[V(next state) | s~]."""
    return operators(params).pds_from_v(np.asarray(values, dtype=float))


def pds_bellman(pds_values: np.ndarray, params: ModelParams) -> np.ndarray:
    """The post-decision Bellman operator H_PDS."""
    return operators(params).h_pds(np.asarray(pds_values, dtype=float))


def greedy_policy(pds_values: np.ndarray, params: ModelParams) -> np.ndarray:
    return operators(params).v_from_pds(np.asarray(pds_values, dtype=float))[1]


def table_lookup(table: np.ndarray) -> ValueFn:
    def lookup(b, e, h):
        return table[b, e, h]
    return lookup


def action_scores(value_fn: ValueFn, s: SystemState, params: ModelParams) -> tuple[float, float | None]:
    b, e, h = s
    score0 = b + value_fn(b, e, h)
    if b > 0 and e >= params.e_TX:
        q = params.plr[h]
        e1 = e - params.e_TX
        return score0, b + q * value_fn(b, e1, h) + (1.0 - q) * value_fn(b - 1, e1, h)
    return score0, None


def greedy_action(value_fn: ValueFn | np.ndarray, s: SystemState, params: ModelParams) -> int:
    """Argmin of the post-decision greedy expression; exact ties keep a=0."""
    if isinstance(value_fn, np.ndarray):
        value_fn = table_lookup(value_fn)
    score0, score1 = action_scores(value_fn, s, params)
    return 1 if score1 is not None and score1 < score0 else 0


def _transition_parts(params: ModelParams):
    """Per-action factor matrices of the full kernel, built from the scalar kernels."""
    B, E, H = params.shape
    K_b = np.zeros((2, H, B, B))
    for h in range(H):
        for b in range(B):
            K_b[0, h, b] = buffer_kernel(b, h, 0, params)
            if b > 0:
                K_b[1, h, b] = buffer_kernel(b, h, 1, params)
    K_e = np.zeros((2, E, E))
    for e in range(E):
        K_e[0, e] = battery_kernel(e, 0, params)
        if e >= params.e_TX:
            K_e[1, e] = battery_kernel(e, 1, params)
    return K_b, K_e, params.P_h(), cost_table(params)


def q_values(V: np.ndarray, params: ModelParams, parts=None) -> np.ndarray:
    """Q[b, e, h, a] = c(s, a) + gamma * sum_s' P(s'|s, a) V(s'); infeasible -> inf."""
    K_b, K_e, P_h, c = parts if parts is not None else _transition_parts(params)
    Y = np.einsum("hk,bek->beh", P_h, V)
    Q = np.empty(c.shape)
    for a in (0, 1):
        Z = np.einsum("ij,bjh->bih", K_e[a], Y)
        Q[..., a] = c[..., a] + params.gamma * np.einsum("hbc,ceh->beh", K_b[a], Z)
    return np.where(np.isfinite(c), Q, np.inf)


def _greedy_from_q(Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    send = Q[..., 1] < Q[..., 0]
    return np.where(send, Q[..., 1], Q[..., 0]), send.astype(np.int8)


def value_iteration(params: ModelParams, tol: float = 1e-8, max_iters: int = 5000) -> Solution:
    """Synchronous value iteration on the full state space.

    Stops at the first iterate whose Bellman residual ``||TV - V||_inf`` is at
    most ``tol``; the returned policy is greedy with respect to that iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    parts = _transition_parts(params)
    V = np.zeros(params.shape)
    residuals = []
    for it in range(max_iters + 1):
        TV, policy = _greedy_from_q(q_values(V, params, parts))
        res = float(np.max(np.abs(TV - V)))
        residuals.append(res)
        if res <= tol:
            return Solution(V, res, it, True, "V", policy, residuals)
        if it == max_iters:
            break
        V = TV
    return Solution(V, res, max_iters, False, "V", policy, residuals)


def pds_value_iteration(params: ModelParams, tol: float = 1e-8, max_iters: int = 5000) -> Solution:
    """Fixed-point iteration of H_PDS from the zero table."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    ops = operators(params)
    W = np.zeros(params.shape)
    residuals = []
    for it in range(max_iters + 1):
        HW = ops.h_pds(W)
        res = float(np.max(np.abs(HW - W)))
        residuals.append(res)
        if res <= tol:
            break
        if it == max_iters:
            return Solution(W, res, it, False, "V~", ops.v_from_pds(W)[1], residuals)
        W = HW
    return Solution(W, res, it, True, "V~", ops.v_from_pds(W)[1], residuals)


def solve_pds(params: ModelParams, tol: float = 1e-10) -> np.ndarray:
    """Cached optimal post-decision table, raising if the solver stalls."""
    key = ("pds_star", tol)
    if key not in params._cache:
        sol = pds_value_iteration(params, tol=tol, max_iters=200_000)
        if not sol.converged:
            raise RuntimeError(f"H_PDS iteration did not reach tol={tol} (residual {sol.residual})")
        params._cache[key] = sol.values
    return params._cache[key]


@dataclass
class StructureReport:
    monotone_b: bool
    incr_diff_b: bool
    monotone_e: bool
    incr_diff_e: bool
    max_violation: float
    worst: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.monotone_b and self.incr_diff_b and self.monotone_e and self.incr_diff_e


def check_structure(pds_values: np.ndarray, slack: float = 1e-9) -> StructureReport:
    """Check monotonicity and increasing differences in the buffer and battery axes.

    ``max_violation`` is the largest signed amount by which any of the four
    inequalities fails (negative when all hold strictly). ``worst`` holds the
    same quantity per property.
    """
    W = np.asarray(pds_values, dtype=float)
    db = np.diff(W, axis=0)
    de = np.diff(W, axis=1)
    gaps = {
        "monotone_b": -db,              # V(b) - V(b+1) <= 0
        "incr_diff_b": -np.diff(db, axis=0),
        "monotone_e": de,               # V(e+1) - V(e) <= 0
        "incr_diff_e": -np.diff(de, axis=1),
    }
    worst = {k: (float(v.max()) if v.size else -np.inf) for k, v in gaps.items()}
    flags = {k: w <= slack for k, w in worst.items()}
    return StructureReport(max_violation=max(worst.values()), worst=worst, **flags)


def contraction_ratio(pds_values: np.ndarray, pds_star: np.ndarray, params: ModelParams) -> float:
    num = np.max(np.abs(pds_bellman(pds_values, params) - pds_star))
    den = np.max(np.abs(pds_values - pds_star))
    return float(num / den)


def contraction_check(params: ModelParams, trials: int = 100, seed: int = 0) -> float:
    """Worst observed ||H V~ - V~*|| / ||V~ - V~*|| over random V~ in [0, V_max]."""
    star = solve_pds(params, tol=1e-11)
    rng = np.random.default_rng(seed)
    vmax = v_max(params)
    worst = 0.0
    for _ in range(trials):
        W = rng.uniform(0.0, vmax, size=params.shape)
        if np.max(np.abs(W - star)) == 0.0:
            continue
        worst = max(worst, contraction_ratio(W, star, params))
    return worst


@dataclass
class FactoredModel:
    """Known/unknown split of costs and transitions over flattened state indices.

    ``P_k[s, a, s~]`` and ``P_u[s~, s']`` are dense, so this is only meant for
    small verification models.
    """

    params: ModelParams
    c_k: np.ndarray
    c_u: np.ndarray
    P_k: np.ndarray
    P_u: np.ndarray

    def index(self, b: int, e: int, h: int) -> int:
        return int(np.ravel_multi_index((b, e, h), self.params.shape))


def factored_components(params: ModelParams, max_states: int = 5000) -> FactoredModel:
    S = params.n_states
    if S > max_states:
        raise ValueError(f"{S} states exceed the dense factorization limit {max_states}")
    B, E, H = params.shape
    idx = lambda b, e, h: (b * E + e) * H + h  # noqa: E731  matches ravel_multi_index
    c_u_vec = overflow_cost_vector(params)
    c_k = np.zeros((S, 2))
    c_u = np.zeros(S)
    P_k = np.zeros((S, 2, S))
    P_u = np.zeros((S, S))
    P_h = params.P_h()
    l_dist = params.arrival_dist
    eh_dist = params.harvest_dist
    for b in range(B):
        for e in range(E):
            for h in range(H):
                s = idx(b, e, h)
                c_k[s, :] = b
                c_u[s] = c_u_vec[b]
                for a in feasible_actions(b, e, params):
                    for f, pf in enumerate(goodput_dist(a, h, params)):
                        if pf > 0:
                            P_k[s, a, idx(b - f, e - a * params.e_TX, h)] += pf
                for b2 in range(b, B):
                    # clipped tail mass at the buffer edge
                    pl = sum(l_dist[b2 - b:]) if b2 == params.N_b else (l_dist[b2 - b] if b2 - b < len(l_dist) else 0.0)
                    if pl == 0.0:
                        continue
                    for e2 in range(e, E):
                        pe = sum(eh_dist[e2 - e:]) if e2 == params.N_e else (eh_dist[e2 - e] if e2 - e < len(eh_dist) else 0.0)
                        if pe == 0.0:
                            continue
                        for h2 in range(H):
                            P_u[s, idx(b2, e2, h2)] = pl * pe * P_h[h, h2]
    return FactoredModel(params, c_k, c_u, P_k, P_u)
