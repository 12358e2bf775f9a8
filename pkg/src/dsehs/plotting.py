"""Figures written next to the CSV outputs. Uses the non-interactive Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PANELS = (
    ("avg_buffer", "average buffer occupancy"),
    ("avg_battery", "average battery occupancy"),
    ("cum_overflows", "cumulative overflows"),
)


def _series(rows: list[dict]) -> dict[str, tuple[np.ndarray, dict[str, np.ndarray]]]:
    """Group comparison rows by algorithm."""
    groups: dict[str, list[dict]] = {}
    for r in rows:
        groups.setdefault(r["algorithm"], []).append(r)
    out = {}
    for label, rs in groups.items():
        rs.sort(key=lambda r: r["slot"])
        slots = np.array([r["slot"] for r in rs])
        out[label] = (slots, {key: np.array([r[key] for r in rs]) for key, _ in PANELS})
    return out


def plot_timeseries(rows: list[dict], path: str | Path, title: str | None = None) -> None:
    """One panel per metric, one line per algorithm; rows use the comparison columns."""
    series = _series(rows)
    fig, axes = plt.subplots(1, len(PANELS), figsize=(13, 3.8))
    for ax, (key, ylabel) in zip(axes, PANELS):
        for label, (slots, cols) in series.items():
            ax.plot(slots, cols[key], label=label, lw=1.4)
        ax.set_xlabel("time slot")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
    axes[0].legend(frameon=False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_solution(pds_values: np.ndarray, policy: np.ndarray, path: str | Path,
                  channels: tuple[int, ...] | None = None) -> None:
    """Post-decision value surfaces and the send region for a few channels."""
    H = pds_values.shape[2]
    if channels is None:
        channels = tuple(sorted({0, H // 2, H - 1}))
    fig, axes = plt.subplots(2, len(channels), figsize=(4 * len(channels), 7.5), squeeze=False,
                             layout="constrained")
    vmin, vmax = float(pds_values.min()), float(pds_values.max())
    for j, h in enumerate(channels):
        im = axes[0, j].imshow(pds_values[:, :, h], origin="lower", aspect="auto", vmin=vmin, vmax=vmax)
        axes[0, j].set_title(f"post-decision value, h={h}")
        axes[1, j].imshow(policy[:, :, h], origin="lower", aspect="auto", cmap="Greys", vmin=0, vmax=1)
        axes[1, j].set_title(f"transmit region (black), h={h}")
        for ax in axes[:, j]:
            ax.set_xlabel("battery e")
            ax.set_ylabel("buffer b")
    fig.colorbar(im, ax=axes[0, :].tolist(), shrink=0.8)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_tree(tree, path: str | Path, title: str | None = None) -> None:
    """Leaf boxes of one quadtree with its vertices colored by stored value."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for leaf in tree.leaves():
        bb = leaf.bb
        ax.add_patch(plt.Rectangle((bb.e_minus, bb.b_minus), bb.e_plus - bb.e_minus,
                                   bb.b_plus - bb.b_minus, fill=False, lw=0.8))
    pts = np.array([(b, e, v) for (b, e), v in sorted(tree.values.items())])
    sc = ax.scatter(pts[:, 1], pts[:, 0], c=pts[:, 2], s=18, zorder=3)
    fig.colorbar(sc, ax=ax, label="value")
    rb = tree.bb
    ax.set_xlim(rb.e_minus - 0.5, rb.e_plus + 0.5)
    ax.set_ylim(rb.b_minus - 0.5, rb.b_plus + 0.5)
    ax.set_xlabel("battery e")
    ax.set_ylabel("buffer b")
    ax.set_title(title or f"{len(tree)} vertices")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
