"""Invariant suite run by ``dsehs check``; each check returns a ``CheckResult``."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, bernoulli, cost_table, full_kernel, v_max
from .oracle import (
    check_structure,
    contraction_check,
    factored_components,
    operators,
    pds_value_iteration,
    solve_pds,
    value_iteration,
)
from .quadtree import BoundingBox, Quadtree, select_triangle, triangle_corners


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(name, fn) -> CheckResult:
    start = time.perf_counter()
    ok, detail = fn()
    return CheckResult(name, bool(ok), detail, time.perf_counter() - start)


def kernel_rows(params: ModelParams) -> tuple[bool, str]:
    worst = 0.0
    for s in params.states():
        for a in ((0, 1) if s.b > 0 and s.e >= params.e_TX else (0,)):
            worst = max(worst, abs(sum(full_kernel(s, a, params).values()) - 1.0))
    return worst <= 1e-12, f"max |row sum - 1| = {worst:.2e}"


def factorization(params: ModelParams, tol: float = 1e-12) -> tuple[bool, str]:
    """c = c_k + P_k c_u and P = P_k P_u for every feasible (s, a)."""
    fm = factored_components(params)
    c = cost_table(params).reshape(-1, 2)
    err_c = err_p = 0.0
    for s in params.states():
        i = fm.index(*s)
        for a in ((0, 1) if s.b > 0 and s.e >= params.e_TX else (0,)):
            err_c = max(err_c, abs(fm.c_k[i, a] + fm.P_k[i, a] @ fm.c_u - c[i, a]))
            dense = np.zeros(params.n_states)
            for s2, p in full_kernel(s, a, params).items():
                dense[fm.index(*s2)] = p
            err_p = max(err_p, float(np.max(np.abs(fm.P_k[i, a] @ fm.P_u - dense))))
    ok = err_c <= tol * max(1.0, float(np.max(c[np.isfinite(c)]))) and err_p <= tol
    return ok, f"cost error {err_c:.2e}, kernel error {err_p:.2e}"


def solver_agreement(params: ModelParams, tol: float = 1e-8) -> tuple[bool, str]:
    """Value iteration on V and on V~ must describe the same fixed point and policy."""
    sv = value_iteration(params, tol=tol)
    sw = pds_value_iteration(params, tol=tol)
    ops = operators(params)
    V_from_W, policy_w = ops.v_from_pds(sw.values)
    diff = float(np.max(np.abs(V_from_W - sv.values)))
    bound = 4 * tol / (1.0 - params.gamma)
    agree = float(np.mean(policy_w == sv.policy))
    ok = sv.converged and sw.converged and diff <= bound
    return ok, (f"VI {sv.iterations} sweeps res {sv.residual:.2e}; PDS VI {sw.iterations} sweeps; "
                f"|V - V(V~)| = {diff:.2e} (bound {bound:.1e}); policies agree on {agree:.1%}")


def structure(params: ModelParams) -> tuple[bool, str]:
    rep = check_structure(solve_pds(params))
    flags = ", ".join(f"{k}={v:+.2e}" for k, v in rep.worst.items())
    return rep.ok, f"worst signed gaps {flags}"


def contraction(params: ModelParams, trials: int = 100, seed: int = 0) -> tuple[bool, str]:
    ratio = contraction_check(params, trials=trials, seed=seed)
    return ratio <= params.gamma + 1e-9, f"max ratio {ratio:.9f} vs gamma {params.gamma}"


def plane_bound_gaps(W2d: np.ndarray, depth: int) -> np.ndarray:
    """estimate - truth - (triangle max - triangle min) at every lattice point.

    The tree is refined uniformly to ``depth`` with vertex values copied from
    ``W2d[b, e]``; every entry of the result must be <= 0.
    """
    B, E = W2d.shape
    tree = Quadtree(BoundingBox(0, B - 1, 0, E - 1))
    tree.refine_uniform(depth)
    for (b, e) in tree.values:
        tree.values[b, e] = float(W2d[b, e])
    gaps = np.empty((B, E))
    for b in range(B):
        for e in range(E):
            leaf = tree.find_leaf(b, e)
            corners = triangle_corners(leaf.bb, select_triangle(leaf.bb, b, e))
            vals = [tree.values[c] for c in corners]
            est = tree.plane_estimate(leaf, b, e)
            gaps[b, e] = est - W2d[b, e] - (max(vals) - min(vals))
    return gaps


def plane_bound(params: ModelParams, depths=range(5)) -> tuple[bool, str]:
    W = solve_pds(params)
    worst = -np.inf
    for h in range(params.N_h):
        for d in depths:
            worst = max(worst, float(plane_bound_gaps(W[:, :, h], d).max()))
    return worst <= 1e-9, f"max (estimate - truth - triangle spread) = {worst:.3e}"


def run_checks(params: ModelParams, seed: int = 0) -> list[CheckResult]:
    """Full suite. Dense checks run on a small model sharing the given gamma, eta and distributions."""
    small = ModelParams(N_b=4, N_e=4, N_h=2, gamma=params.gamma, eta=params.eta,
                        arrival_dist=params.arrival_dist, harvest_dist=params.harvest_dist)
    bound_model = ModelParams(N_b=16, N_e=16, N_h=2, gamma=params.gamma, eta=params.eta,
                              arrival_dist=bernoulli(0.4), harvest_dist=params.harvest_dist)
    contr_model = ModelParams(N_b=8, N_e=8, N_h=2, gamma=params.gamma, eta=params.eta)
    results = [
        _timed("kernel rows sum to one", lambda: kernel_rows(small)),
        _timed("cost and kernel factorization", lambda: factorization(small)),
        _timed("value iteration vs post-decision iteration", lambda: solver_agreement(params)),
        _timed("monotonicity and increasing differences", lambda: structure(params)),
        _timed("contraction of H_PDS", lambda: contraction(contr_model, seed=seed)),
        _timed("planar estimate bound, depths 0-4", lambda: plane_bound(bound_model)),
    ]
    vm = v_max(params)
    W = solve_pds(params)
    results.append(CheckResult("V~* within [0, V_max]", bool(W.min() >= 0 and W.max() <= vm),
                               f"range [{W.min():.3f}, {W.max():.3f}], V_max {vm:.3f}"))
    return results
