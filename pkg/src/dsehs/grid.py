"""Grid learning: post-decision learning on per-channel adaptive quadtrees."""
from __future__ import annotations

from dataclasses import dataclass, field

from .learners import BetaSchedule, next_state_value
from .model import ExperienceTuple, ModelParams, SystemState, v_max
from .oracle import greedy_action
from .quadtree import BoundingBox, Quadtree


@dataclass(frozen=True)
class GridLearnerConfig:
    delta: float = 10.0
    T_grid: int = 10
    beta: BetaSchedule = field(default_factory=BetaSchedule)
    root_bb: BoundingBox | None = None  # None spans the whole buffer x battery plane
    # "per-slot": delta bounds (1 - gamma) * (max - min), i.e. average cost per slot;
    # "discounted": delta bounds max - min of the discounted values directly
    delta_unit: str = "per-slot"

    def __post_init__(self):
        if self.delta_unit not in ("per-slot", "discounted"):
            raise ValueError(f"unknown delta_unit {self.delta_unit!r}")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.T_grid < 1:
            raise ValueError("T_grid must be >= 1")


class GridLearner:
    """Greedy control through the piecewise-planar estimate.

    Every ``T_grid`` slots the vertices of the current channel's tree are
    updated synchronously from the latest experience tuple, then that tree is
    refined once by ``update_grid``.
    """

    def __init__(self, params: ModelParams, config: GridLearnerConfig | None = None):
        self.params = params
        self.config = config or GridLearnerConfig()
        bb = self.config.root_bb or BoundingBox(0, params.N_b, 0, params.N_e)
        self.trees = [Quadtree(bb) for _ in range(params.N_h)]
        self.vmax = v_max(params)
        self.threshold = self.config.delta
        if self.config.delta_unit == "per-slot":
            self.threshold = self.config.delta / (1.0 - params.gamma)
        self.n = 0
        self.updates_last_slot = 0

    def value(self, b: int, e: int, h: int) -> float:
        return self.trees[h].approximate(b, e)

    def _lookup(self, b, e, h):
        return self.trees[h].approximate(b, e)

    @property
    def grid_points(self) -> int:
        return sum(len(t) for t in self.trees)

    def act(self, s: SystemState) -> int:
        return greedy_action(self._lookup, s, self.params)

    def sweep(self, h: int, x: ExperienceTuple, beta: float) -> int:
        p = self.params
        tree = self.trees[h]
        cache = {}
        targets = {}
        for (b, e) in tree.vertices():
            b2 = min(b + x.l, p.N_b)
            e2 = min(e + x.e_H, p.N_e)
            v2 = cache.get((b2, e2))
            if v2 is None:
                v2 = cache[b2, e2] = next_state_value(self._lookup, b2, e2, x.h_next, p)
            target = p.eta * max(b + x.l - p.N_b, 0) + p.gamma * v2
            new = (1.0 - beta) * tree.values[b, e] + beta * target
            targets[b, e] = 0.0 if new < 0.0 else self.vmax if new > self.vmax else new
        tree.values.update(targets)
        tree.update_grid(self.threshold)
        return len(targets)

    def observe(self, s, a, f, x, s_next=None, overflow=None):
        if (self.n + 1) % self.config.T_grid == 0:
            self.updates_last_slot = self.sweep(s.h, x, self.config.beta(self.n))
        else:
            self.updates_last_slot = 0
        self.n += 1

    def instrument(self) -> dict:
        return {
            "vertices_per_channel": [len(t) for t in self.trees],
            "tree_depths": [t.depth() for t in self.trees],
            "leaf_count": [t.n_leaves for t in self.trees],
            "updates_this_slot": self.updates_last_slot,
        }

    # checkpointing

    def save(self, fh) -> None:
        fh.write("dsehs-grid v1\n")
        fh.write(f"slot {self.n}\n")
        fh.write(f"channels {len(self.trees)}\n")
        for h, tree in enumerate(self.trees):
            fh.write(f"channel {h}\n")
            tree.dump(fh)

    @classmethod
    def load(cls, fh, params: ModelParams, config: GridLearnerConfig | None = None) -> "GridLearner":
        lines = (ln for ln in (raw.strip() for raw in fh) if ln)
        if next(lines) != "dsehs-grid v1":
            raise ValueError("not a grid learner checkpoint")
        learner = cls(params, config)
        learner.n = int(next(lines).split()[1])
        count = int(next(lines).split()[1])
        if count != params.N_h:
            raise ValueError(f"checkpoint has {count} channels, model has {params.N_h}")
        for h in range(count):
            tag, idx = next(lines).split()
            if tag != "channel" or int(idx) != h:
                raise ValueError(f"expected 'channel {h}'")
            learner.trees[h] = Quadtree.load(lines)
        return learner
