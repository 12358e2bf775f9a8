"""Command line entry point: ``dsehs {solve,learn,compare,check}``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ALGORITHMS, ConfigError, ExperimentSpec, default_algorithm_config, load_config
from .grid import GridLearnerConfig
from .harness import compare, read_csv, rows_to_csv, run_experiment, sidecar, write_outputs
from .learners import LearnerConfig
from .model import InvalidParams, v_max

EXIT_INVARIANT = 1
EXIT_USAGE = 2


def _base_spec(args) -> ExperimentSpec:
    return load_config(args.config) if args.config else ExperimentSpec()


def apply_overrides(spec: ExperimentSpec, args, algorithm: str | None = None) -> ExperimentSpec:
    """Command-line flags take precedence over the config file."""
    algorithm = algorithm or getattr(args, "algo", None) or spec.algorithm
    cfg = spec.algorithm_config if algorithm == spec.algorithm else default_algorithm_config(algorithm)
    if getattr(args, "delta", None) is not None and isinstance(cfg, GridLearnerConfig):
        cfg = replace(cfg, delta=args.delta)
    if getattr(args, "period", None) is not None:
        if isinstance(cfg, GridLearnerConfig):
            cfg = replace(cfg, T_grid=args.period)
        elif isinstance(cfg, LearnerConfig) and algorithm == "ve":
            cfg = replace(cfg, T=args.period)
    sim = spec.sim
    if getattr(args, "slots", None) is not None:
        sim = replace(sim, horizon=args.slots)
    if getattr(args, "seed", None) is not None:
        sim = replace(sim, seed=args.seed)
    kw = {}
    for flag, key in (("replicas", "replicas"), ("stride", "stride"), ("workers", "workers"),
                      ("out", "output")):
        if getattr(args, flag, None) is not None:
            kw[key] = args.out if flag == "out" else getattr(args, flag)
    return replace(spec, algorithm=algorithm, algorithm_config=cfg, sim=sim, **kw)


def cmd_solve(args) -> int:
    from .oracle import check_structure, pds_value_iteration, value_iteration
    from .plotting import plot_solution

    spec = _base_spec(args)
    params = spec.model
    tol = getattr(spec.algorithm_config, "tol", 1e-8)
    max_iters = getattr(spec.algorithm_config, "max_iters", 5000)
    start = time.perf_counter()
    sol = value_iteration(params, tol=tol, max_iters=max_iters)
    elapsed = time.perf_counter() - start
    pds = pds_value_iteration(params, tol=tol, max_iters=max_iters)
    rep = check_structure(pds.values)
    print(f"states {params.n_states}  V_max {v_max(params):.6g}")
    print(f"value iteration: {sol.iterations} sweeps, residual {sol.residual:.3e}, "
          f"{'converged' if sol.converged else 'NOT converged'}, {elapsed:.2f}s")
    print(f"post-decision iteration: {pds.iterations} sweeps, residual {pds.residual:.3e}")
    for name, gap in rep.worst.items():
        print(f"  {name:12s} {'ok ' if gap <= 1e-9 else 'VIOLATED'} worst gap {gap:+.3e}")
    if args.out:
        out = Path(args.out)
        B, E, H = params.shape
        b, e, h = np.meshgrid(np.arange(B), np.arange(E), np.arange(H), indexing="ij")
        rows = zip(b.ravel().tolist(), e.ravel().tolist(), h.ravel().tolist(), sol.values.ravel().tolist(),
                   pds.values.ravel().tolist(), sol.policy.ravel().tolist())
        text = rows_to_csv(("b", "e", "h", "value", "pds_value", "action"), rows)
        summary = {"iterations": sol.iterations, "residual": sol.residual, "converged": sol.converged,
                   "pds_iterations": pds.iterations, "structure": rep.worst,
                   "v_max": v_max(params), "wall_time_s": round(elapsed, 3)}
        figure = None if args.no_figures else (lambda p: plot_solution(pds.values, sol.policy, p))
        for p in write_outputs(out, text, summary, figure):
            print(f"wrote {p}")
    if not sol.converged:
        print("error: value iteration did not converge", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


def _figure_for(result, no_figures: bool):
    if no_figures:
        return None
    from .plotting import plot_timeseries, plot_tree

    def draw(path):
        from .harness import mean_rows
        rows = [dict(zip(("algorithm", "slot", "replicas", "avg_buffer", "avg_battery", "cum_overflows"), r))
                for r in mean_rows(result.spec.label, result)]
        plot_timeseries(rows, path, title=f"{result.spec.label}, mean of {len(result.replicas)} replicas")
        ctrl = result.replicas[0].controller
        if result.spec.algorithm == "grid" and ctrl is not None:
            h = int(np.argmax([len(t) for t in ctrl.trees]))
            plot_tree(ctrl.trees[h], sidecar(path, f".tree-h{h}.png"),
                      title=f"replica 0, channel {h}: {len(ctrl.trees[h])} vertices")
    return draw


def cmd_learn(args) -> int:
    spec = apply_overrides(_base_spec(args), args)
    result = run_experiment(spec)
    summary = result.summary()
    print(json.dumps(summary, indent=2, sort_keys=True))
    if spec.output is not None:
        for p in write_outputs(spec.output, result.csv_text(), summary, _figure_for(result, args.no_figures)):
            print(f"wrote {p}")
    else:
        sys.stdout.write(result.csv_text())
    return 0


def cmd_compare(args) -> int:
    specs = []
    if args.config and len(args.config) > 1:
        if args.algos:
            raise ConfigError("--algos cannot be combined with several --config files")
        specs = [apply_overrides(load_config(c), args, None) for c in args.config]
    else:
        base = load_config(args.config[0]) if args.config else ExperimentSpec()
        algos = args.algos.split(",") if args.algos else ["optimal", "ve", "grid", "pds", "q-learning"]
        for a in algos:
            if a not in ALGORITHMS:
                raise ConfigError(f"--algos: unknown algorithm {a!r}")
            specs.append(apply_overrides(base, args, a))
    text, rows, results = compare(specs)
    for res in results:
        s = res.summary()
        print(f"{s['label']:12s} final avg buffer {s['final_avg_buffer']:.4f}  battery "
              f"{s['final_avg_battery']:.4f}  overflows {s['final_cum_overflows']:.1f}  "
              f"updates {s['total_updates']}  {s['wall_time_s']:.1f}s")
    out = args.out
    if out is None:
        sys.stdout.write(text)
        return 0
    summary = {"series": [r.summary() for r in results]}
    figure = None
    if not args.no_figures:
        from .plotting import plot_timeseries
        figure = lambda p: plot_timeseries(read_csv(out), p, title="comparison")  # noqa: E731
    for p in write_outputs(Path(out), text, summary, figure):
        print(f"wrote {p}")
    return 0


def cmd_check(args) -> int:
    from .checks import run_checks

    spec = _base_spec(args)
    results = run_checks(spec.model, seed=args.seed or 0)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_INVARIANT if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsehs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, run_flags=True):
        p.add_argument("--config", type=Path, help="YAML experiment file")
        p.add_argument("--seed", type=int)
        if run_flags:
            p.add_argument("--slots", type=int, help="horizon in time slots")
            p.add_argument("--delta", type=float, help="grid refinement threshold")
            p.add_argument("--period", type=int, help="update period T (ve) or T_grid (grid)")
            p.add_argument("--replicas", type=int)
            p.add_argument("--stride", type=int, help="CSV sampling stride in slots")
            p.add_argument("--workers", type=int, help="processes for replicas")
        p.add_argument("--no-figures", action="store_true", help="skip PNG output")

    p = sub.add_parser("solve", help="solve the model exactly and report structure")
    common(p, run_flags=False)
    p.add_argument("--out", type=Path, help="CSV of V*, V~* and the optimal action per state")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("learn", help="run one algorithm")
    common(p)
    p.add_argument("--algo", choices=ALGORITHMS)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("compare", help="run several algorithms on one model")
    p.add_argument("--config", type=Path, action="append",
                   help="YAML experiment file; repeat to compare several files")
    p.add_argument("--algos", help="comma separated algorithms (default: all five)")
    p.add_argument("--seed", type=int)
    p.add_argument("--slots", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--period", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="run the invariant suite")
    common(p, run_flags=False)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParams, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
