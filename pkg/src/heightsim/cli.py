"""Command-line interface: ``heightsim <command> [options]``.

Every experiment command accepts the same flags; ``--config`` reads a flat
JSON or YAML mapping with ExperimentConfig keys, and explicit flags override
it.  The exit status is 0 iff every check in the run passed.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from .acceptance import CRITERIA, AcceptanceConfig, verify_all
from .experiments import ExperimentConfig, run_experiment
from .pathops import MaxStepsExceeded, stop_at_local_time
from .pruning import mark_replay, prune
from .reflected_bm import ReflectedBmConfig, simulate_reflected, tanaka_residual
from .report import ExperimentReport, write_csv
from .rng import BROWNIAN, MARKS, stream

EXPERIMENTS = {
    "ray-knight": "ray_knight",
    "prune": "pruning",
    "project": "projection",
    "occupation": "occupation",
    "girsanov": "girsanov",
    "extinction": "extinction",
    "stationary": "stationary",
}

EXIT_FAIL = 1
EXIT_BUDGET = 3


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and run parameters (override --config)")
    g.add_argument("--theta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--a", type=float, help="upper barrier")
    g.add_argument("--b", type=float, help="sub-barrier for projections")
    g.add_argument("--x", type=float, help="local time at 0 at which paths are stopped")
    g.add_argument("--dt", type=float)
    g.add_argument("--eps", type=float, help="band width of the local-time estimator")
    g.add_argument("--paths", type=int, help="number of paths")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory for report.json and CSV tables")
    g.add_argument("--config", help="JSON or YAML file with ExperimentConfig keys")
    g.add_argument("--lambdas", type=_floats, help="Laplace arguments, e.g. '0.5,1,2'")
    g.add_argument("--levels", type=_floats, help="field levels, e.g. '0.5,1'")
    g.add_argument("--t", type=float, help="time of marginal comparisons")
    g.add_argument("--horizon", type=float, help="CSBP horizon (extinction)")
    g.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heightsim",
                                description="Height-process simulation and statistical checks.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one reflected path and write it as CSV")
    _common(s)
    s.add_argument("--steps", type=int, help="number of grid steps (default: t/dt)")
    s.add_argument("--stop", action="store_true", help="stop when the local time at 0 exceeds x")

    for name in EXPERIMENTS:
        e = sub.add_parser(name, help=f"run the {EXPERIMENTS[name]} experiment")
        _common(e)

    v = sub.add_parser("verify-all", help="run the acceptance criteria")
    v.add_argument("--paths", type=int, help="paths per check (default 10000)")
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--quick", action="store_true", help="small smoke-test scale")
    v.add_argument("--only", type=int, nargs="+", choices=sorted(CRITERIA),
                   help="run only these criteria")
    return p


def load_config_file(path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a flat key-value mapping")
    return data


def experiment_config(kind: str, args: argparse.Namespace) -> ExperimentConfig:
    data = load_config_file(args.config) if args.config else {}
    data.pop("kind", None)
    flags = {k: getattr(args, k) for k in ("theta", "gamma", "a", "b", "x", "dt", "eps",
                                           "paths", "seed", "out", "lambdas", "levels", "t",
                                           "horizon", "workers")}
    return ExperimentConfig.from_mapping(data, kind=kind, **flags)


def _print_report(report: ExperimentReport) -> None:
    for line in report.lines():
        print(line)
    print(f"{'ALL PASSED' if report.all_passed else 'SOME CHECKS FAILED'} "
          f"({sum(r.passed for r in report.results)}/{len(report.results)}, "
          f"{report.runtime:.1f}s)")


def cmd_simulate(args) -> int:
    data = load_config_file(args.config) if args.config else {}
    get = lambda k, d: getattr(args, k) if getattr(args, k) is not None else data.get(k, d)  # noqa: E731
    cfg = ReflectedBmConfig(get("theta", 0.0), get("a", 1.0), get("dt", 1e-4))
    rng = stream(get("seed", 0), "simulate", 0, BROWNIAN)
    if args.stop:
        path = stop_at_local_time(cfg, get("x", 1.0), rng)
    else:
        n = args.steps if args.steps is not None else int(round(get("t", 1.0) / cfg.dt))
        path = simulate_reflected(cfg, n, rng)
    cols = path.as_columns()
    header = list(cols)
    rows = np.column_stack([cols[k] for k in header])
    gamma = get("gamma", 0.0)
    if gamma:
        marked = mark_replay(path, gamma, stream(get("seed", 0), "simulate", 0, MARKS))
        header.append("keep")
        rows = np.column_stack([rows, marked.keep.astype(int)])
    out = get("out", None)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(out) / "path.csv", header, rows.tolist())
        if gamma:
            pruned = prune(marked).as_columns()
            write_csv(Path(out) / "pruned.csv", list(pruned),
                      np.column_stack(list(pruned.values())).tolist())
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(repr(float(v)) for v in row))
    print(f"steps={path.n_steps} L0={2 * path.reg0[-1]:.6g} La={2 * path.regA[-1]:.6g} "
          f"tanaka_residual={tanaka_residual(path):.3g}", file=sys.stderr)
    return 0


def cmd_experiment(kind: str, args) -> int:
    cfg = experiment_config(kind, args)
    report = run_experiment(cfg)
    _print_report(report)
    return 0 if report.all_passed else EXIT_FAIL


def cmd_verify_all(args) -> int:
    cfg = AcceptanceConfig.quick() if args.quick else AcceptanceConfig()
    overrides = {"workers": args.workers}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.paths is not None:
        overrides.update(n_paths=args.paths, n_chains=args.paths, n_sampler=10 * args.paths)
    cfg = AcceptanceConfig(**{**cfg.to_dict(), **overrides})
    t0 = time.perf_counter()
    outcomes = verify_all(cfg, args.only)
    results = [r for o in outcomes for r in o.results]
    for o in outcomes:
        print(o.line())
        for r in o.results:
            if not r.passed:
                print("    " + r.line())
    rows = [[o.number, o.title, o.passed, len(o.results), o.runtime] for o in outcomes]
    report = ExperimentReport(cfg.to_dict(), cfg.seed, results,
                              {"criteria": (["criterion", "title", "passed", "checks", "runtime"],
                                            rows)},
                              runtime=time.perf_counter() - t0)
    if args.out:
        report.write(args.out)
    ok = all(o.passed for o in outcomes)
    print("ALL CRITERIA PASSED" if ok else "SOME CRITERIA FAILED")
    return 0 if ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "verify-all":
            return cmd_verify_all(args)
        return cmd_experiment(EXPERIMENTS[args.command], args)
    except MaxStepsExceeded as exc:
        print(f"error: {exc}; partial path has {exc.partial.n_steps} steps "
              f"(raise max_steps or lower x)", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
