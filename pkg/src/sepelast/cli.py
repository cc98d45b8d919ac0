"""Command-line front end: solve, evaluate, report, selftest.

The CLI is a thin shell over the library; every behavior here is
reachable through `sepelast.training` and `sepelast.problems` with
identical results. Configuration comes from an optional JSON file plus
flags, flags winning; the resolved configuration is echoed into the
output directory so a run can be reproduced from its artifacts alone.

Exit codes: 0 success, 2 configuration or input error (one line on
stderr), 3 training aborted on non-finite values (partial outputs are
kept). `selftest` exits with the number of failed suites.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from .losses import ConfigurationError
from .models import load_checkpoint, save_checkpoint
from .problems import (
    PROBLEMS,
    eval_points,
    export_prediction,
    get_problem,
    ingest_reference,
    make_evaluator,
    predict_at,
)
from .reporting import aggregate_across_seeds, report_lines, write_report
from .selftest import run_selftest
from .training import (
    RunSettings,
    build_objective,
    read_metrics,
    train,
    write_metrics,
    write_timing,
)

MODES = ("pinn-pde", "spinn-pde", "spinn-dem")

# flags that may also appear in a JSON config file (dashes as underscores)
_CONFIG_KEYS = (
    "problem",
    "mode",
    "epochs",
    "seeds",
    "jobs",
    "out",
    "reference",
    "lambda_bc",
    "lr",
    "decay_rate",
    "decay_every",
    "grid",
    "rank",
    "hidden",
    "eval_every",
    "resample_every",
    "constitutive",
)


def _parse_int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _parse_grid(value):
    """'33,33,33' or '129,9,33;129,33,9' -> flat triple or per-box tuples."""
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            return tuple(tuple(int(n) for n in box) for box in value)
        return tuple(int(n) for n in value)
    groups = [g for g in str(value).split(";") if g.strip()]
    parsed = [tuple(int(n) for n in g.split(",")) for g in groups]
    return parsed[0] if len(parsed) == 1 else tuple(parsed)


def _parse_hidden(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(int(n) for n in value)
    return tuple(int(n) for n in str(value).split(",") if n.strip())


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sepelast",
        description="Variational solvers for 3D linear elastostatics with "
        "separable and pointwise neural fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="train one or more seeds")
    solve.add_argument("--problem", choices=sorted(PROBLEMS))
    solve.add_argument("--mode", choices=MODES)
    solve.add_argument("--epochs", type=int)
    solve.add_argument("--seeds", help="comma-separated seed list, e.g. 0,1,2")
    solve.add_argument("--jobs", type=int, help="max concurrent seeds")
    solve.add_argument("--config", help="JSON file with flag defaults")
    solve.add_argument("--out", help="output directory")
    solve.add_argument("--reference", help="reference field CSV for scoring")
    solve.add_argument("--lambda-bc", dest="lambda_bc", type=float)
    solve.add_argument("--lr", type=float)
    solve.add_argument("--decay-rate", dest="decay_rate", type=float)
    solve.add_argument("--decay-every", dest="decay_every", type=int)
    solve.add_argument("--grid", help="nx,ny,nz per box, boxes ';'-separated")
    solve.add_argument("--rank", type=int)
    solve.add_argument("--hidden", help="comma-separated layer widths")
    solve.add_argument("--eval-every", dest="eval_every", type=int)
    solve.add_argument("--resample-every", dest="resample_every", type=int)
    solve.add_argument("--constitutive", choices=("standard", "halved"))

    ev = sub.add_parser("evaluate", help="score a checkpoint against a reference")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--reference", help="reference field CSV")
    ev.add_argument("--problem", choices=sorted(PROBLEMS), help="override stored name")
    ev.add_argument("--out", help="directory for evaluation.csv")

    rep = sub.add_parser("report", help="aggregate seed metrics into tables")
    rep.add_argument("--out", required=True, help="run directory holding seed-*/")

    st = sub.add_parser("selftest", help="run built-in invariant suites")
    st.add_argument("--fault", help="inject a known fault (testing hook)")
    return parser


def _resolve_config(args):
    """Defaults < JSON config < flags; returns a plain dict."""
    cfg = {k: None for k in _CONFIG_KEYS}
    if args.config:
        with open(args.config) as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"bad config file {args.config}: {exc}")
        unknown = sorted(set(loaded) - set(_CONFIG_KEYS))
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {', '.join(unknown)}"
            )
        cfg.update(loaded)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if cfg["problem"] is None:
        raise ConfigurationError("--problem is required (flag or config)")
    if cfg["mode"] is None:
        raise ConfigurationError("--mode is required (flag or config)")
    if cfg["mode"] not in MODES:
        raise ConfigurationError(
            f"unknown mode {cfg['mode']!r}; expected one of {MODES}"
        )
    cfg["seeds"] = _parse_int_list(cfg["seeds"]) if cfg["seeds"] is not None else [0]
    cfg["jobs"] = int(cfg["jobs"]) if cfg["jobs"] is not None else 1
    if cfg["jobs"] < 1:
        raise ConfigurationError("--jobs must be at least 1")
    cfg["grid"] = _parse_grid(cfg["grid"])
    cfg["hidden"] = _parse_hidden(cfg["hidden"])
    cfg["constitutive"] = cfg["constitutive"] or "standard"
    if cfg["out"] is None:
        cfg["out"] = os.path.join("runs", f"{cfg['problem']}-{cfg['mode']}")
    return cfg


def _settings_for(cfg, seed):
    kwargs = dict(mode=cfg["mode"], seed=seed)
    for key in (
        "epochs",
        "lambda_bc",
        "lr",
        "decay_rate",
        "decay_every",
        "grid",
        "rank",
        "hidden",
        "eval_every",
        "resample_every",
    ):
        if cfg[key] is not None:
            kwargs[key] = cfg[key]
    return RunSettings(**kwargs)


def _solve_seed(problem, settings, reference_path, seed_dir, constitutive):
    """Train one seed and write its artifacts; safe to run in a subprocess."""
    os.makedirs(seed_dir, exist_ok=True)
    reference = (
        ingest_reference(reference_path, problem) if reference_path else None
    )
    objective = build_objective(problem, settings)
    evaluator = make_evaluator(problem, objective.bundle, settings.mode, reference)
    result = train(problem, settings, evaluator=evaluator)
    write_metrics(
        os.path.join(seed_dir, "metrics.ndjson"),
        result.records,
        problem=problem.name,
        mode=settings.mode,
    )
    write_timing(os.path.join(seed_dir, "timing.ndjson"), result.records)
    meta = {
        "problem": problem.name,
        "mode": settings.mode,
        "seed": settings.seed,
        "epoch": result.records[-1].epoch if result.records else 0,
        "constitutive": constitutive,
    }
    if result.aborted:
        meta["aborted"] = result.aborted
    save_checkpoint(
        os.path.join(seed_dir, "checkpoint.bin"),
        result.objective.bundle,
        result.params,
        meta,
    )
    pts = eval_points(problem)
    u, sigma = predict_at(
        problem, result.objective.bundle, settings.mode, result.params, pts
    )
    export_prediction(
        os.path.join(seed_dir, "prediction.csv"),
        pts,
        u,
        sigma,
        header={
            "problem": problem.name,
            "mode": settings.mode,
            "seed": settings.seed,
            "epoch": meta["epoch"],
        },
    )
    if result.aborted:
        with open(os.path.join(seed_dir, "aborted.txt"), "w") as fh:
            fh.write(result.aborted + "\n")
    return result.aborted


def _cmd_solve(args):
    cfg = _resolve_config(args)
    problem = get_problem(cfg["problem"], constitutive=cfg["constitutive"])
    if cfg["reference"]:
        ingest_reference(cfg["reference"], problem)  # validate before training
    os.makedirs(cfg["out"], exist_ok=True)
    with open(os.path.join(cfg["out"], "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")

    jobs = min(cfg["jobs"], len(cfg["seeds"]))
    seed_dirs = {
        seed: os.path.join(cfg["out"], f"seed-{seed}") for seed in cfg["seeds"]
    }
    aborted = {}
    if jobs == 1:
        for seed in cfg["seeds"]:
            print(f"seed {seed}: training {cfg['problem']} [{cfg['mode']}]")
            aborted[seed] = _solve_seed(
                problem,
                _settings_for(cfg, seed),
                cfg["reference"],
                seed_dirs[seed],
                cfg["constitutive"],
            )
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(
                    _solve_seed,
                    problem,
                    _settings_for(cfg, seed),
                    cfg["reference"],
                    seed_dirs[seed],
                    cfg["constitutive"],
                ): seed
                for seed in cfg["seeds"]
            }
            for fut in concurrent.futures.as_completed(futures):
                aborted[futures[fut]] = fut.result()

    runs = [
        read_metrics(os.path.join(seed_dirs[seed], "metrics.ndjson"))
        for seed in cfg["seeds"]
    ]
    summaries = aggregate_across_seeds(runs)
    write_report(cfg["out"], summaries, cfg["problem"], cfg["mode"])
    print("\n".join(report_lines(summaries, cfg["problem"], cfg["mode"])))
    failures = {s: msg for s, msg in aborted.items() if msg}
    for seed, msg in sorted(failures.items()):
        print(f"seed {seed}: aborted ({msg})", file=sys.stderr)
    return 3 if failures else 0


def _cmd_evaluate(args):
    bundle, theta, meta = load_checkpoint(args.checkpoint)
    name = args.problem or meta.get("problem")
    if not name:
        raise ConfigurationError(
            "checkpoint has no problem name; pass --problem"
        )
    mode = meta.get("mode")
    if mode not in MODES:
        raise ConfigurationError(f"checkpoint has no usable mode (got {mode!r})")
    problem = get_problem(
        name, constitutive=meta.get("constitutive", "standard")
    )
    reference = (
        ingest_reference(args.reference, problem) if args.reference else None
    )
    evaluator = make_evaluator(problem, bundle, mode, reference)
    errors = evaluator(theta)
    lines = []
    for q, err in errors.items():
        shown = "---" if err is None else f"{err:.17e}"
        lines.append(f"L2[{q}] = {shown}")
    print("\n".join(lines) if lines else "no scorable quantities")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "evaluation.csv")
        with open(path, "w") as fh:
            fh.write("quantity,l2\n")
            for q, err in errors.items():
                fh.write(f"{q},{'' if err is None else repr(err)}\n")
    return 0


def _cmd_report(args):
    seed_dirs = sorted(
        d
        for d in os.listdir(args.out)
        if d.startswith("seed-")
        and os.path.isfile(os.path.join(args.out, d, "metrics.ndjson"))
    )
    if not seed_dirs:
        raise ConfigurationError(f"no seed-*/metrics.ndjson under {args.out}")
    runs, problem, mode = [], None, None
    for d in seed_dirs:
        path = os.path.join(args.out, d, "metrics.ndjson")
        runs.append(read_metrics(path))
        with open(path) as fh:
            first = json.loads(fh.readline())
            problem = first.get("problem", problem)
            mode = first.get("mode", mode)
    summaries = aggregate_across_seeds(runs)
    write_report(args.out, summaries, problem, mode)
    print("\n".join(report_lines(summaries, problem, mode)))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "report":
            return _cmd_report(args)
        return run_selftest(fault=args.fault)
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
