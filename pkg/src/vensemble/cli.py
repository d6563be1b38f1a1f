"""Command-line entry point.

Exit status: 0 on success, 2 for configuration errors, 3 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .data_model import DataError, Method, Mode, Task, load_csv, load_points
from .ensemble import fit_ensemble, load_ensemble, save_ensemble
from .harness.config import MAX_SEED, ConfigError, ExperimentConfig, load_config
from .harness.experiments import EXPERIMENTS, bench_predictive
from .harness.reports import write_report
from .rng import SeedSpec
from .sampling import PlanError, draw_im_plan, draw_plan
from .variance import EstimatorError, confidence_interval, estimate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return value


def _threads(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return value


def _common(p: argparse.ArgumentParser, config_required: bool) -> None:
    p.add_argument("--config", required=config_required, help="JSON experiment or model config")
    p.add_argument("--seed", type=_seed, help="master seed, overrides the config")
    p.add_argument("--out", help="output path")
    p.add_argument("--threads", type=_threads, default=1, help="worker processes (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vensemble", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo study and write a report")
    sim.add_argument("experiment", choices=sorted(EXPERIMENTS))
    _common(sim, True)
    sim.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    bench = sub.add_parser("bench", help="test-set error across subsample proportions")
    bench.add_argument("--data", help="CSV dataset (header row, last column y)")
    _common(bench, False)
    bench.add_argument("--no-figures", action="store_true")

    fit = sub.add_parser("fit", help="fit an ensemble and save it as JSON")
    fit.add_argument("--data", required=True)
    _common(fit, False)

    pred = sub.add_parser("predict", help="ensemble predictions at query points")
    pred.add_argument("--model", required=True)
    pred.add_argument("--points", required=True, help="CSV of query points with a header row")
    _common(pred, False)

    var = sub.add_parser("variance", help="variance estimates and intervals at query points")
    var.add_argument("--model", required=True)
    var.add_argument("--points", required=True)
    var.add_argument("--methods", help="comma-separated estimators (default: suited to the plan)")
    var.add_argument("--level", type=float, default=0.95)
    _common(var, False)
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_seed(args.seed)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> None:
    cfg = _config(args)
    report = EXPERIMENTS[args.experiment](cfg, workers=args.threads)
    out = args.out or cfg.output_path or f"results/{args.experiment}"
    for path in write_report(report, out, figures=cfg.figures and not args.no_figures):
        print(path)


def cmd_bench(args) -> None:
    cfg = _config(args)
    data = args.data or cfg.csv_path
    if data is None:
        raise ConfigError("bench needs --data or a csv:<path> generator")
    report = bench_predictive(data, cfg, workers=args.threads)
    out = args.out or cfg.output_path or "results/bench"
    for path in write_report(report, out, figures=cfg.figures and not args.no_figures):
        print(path)


def cmd_fit(args) -> None:
    cfg = _config(args)
    if cfg.kernel.task is not cfg.task:
        raise ConfigError(f"kernel {cfg.kernel.kind.value} does not fit a {cfg.task.value} task")
    data = load_csv(args.data, cfg.task)
    cfg.check_kernel(data.p)
    k, B = cfg.k[0], cfg.B[0]
    seed = SeedSpec(cfg.seed, "fit")
    if cfg.mode is Mode.IM_TWO_LEVEL:
        if cfg.n_in is None or B % cfg.n_in:
            raise ConfigError("im_two_level needs n_in dividing B")
        plan = draw_im_plan(data.n, k, B // cfg.n_in, cfg.n_in, cfg.im_inner_mode, seed.child("plan"))
    else:
        plan = draw_plan(cfg.mode, data.n, k, B, seed.child("plan"))
    fit = fit_ensemble(data, cfg.kernel, plan, seed.child("learners"), workers=args.threads)
    out = args.out or "model.json"
    save_ensemble(fit, out, extra={"config": cfg.to_json(), "task": cfg.task.value})
    print(out)


def _load_model(path: str):
    try:
        return load_ensemble(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: cannot load model: {exc}") from exc


def cmd_predict(args) -> None:
    fit = _load_model(args.model)
    X = load_points(args.points, fit.learners[0].n_features)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if fit.spec.task is Task.CLASSIFICATION:
        proba = fit.predict_proba(X)
        w.writerow(["point", "label", *(f"p{c}" for c in range(proba.shape[1]))])
        for i, row in enumerate(proba):
            w.writerow([i, int(row.argmax()), *(repr(float(v)) for v in row)])
    else:
        w.writerow(["point", "prediction"])
        for i, v in enumerate(fit.predict(X)):
            w.writerow([i, repr(float(v))])
    _emit(buf.getvalue(), args.out)


def _default_methods(mode: Mode) -> list[Method]:
    return list(ExperimentConfig(mode=mode).resolved_estimators())


def cmd_variance(args) -> None:
    fit = _load_model(args.model)
    X = load_points(args.points, fit.learners[0].n_features)
    try:
        methods = [Method(m.strip()) for m in args.methods.split(",")] if args.methods else _default_methods(fit.plan.mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    H = fit.h_matrix(X)
    results = []
    for i, x in enumerate(X):
        h = H[i]
        center = float(h.mean())
        entry = {"point": i, "x": [float(v) for v in x], "prediction": center, "estimates": []}
        for m in methods:
            rep = estimate(m, h, fit.plan, fit.inclusion)
            iv = confidence_interval(center, rep.total_variance, args.level)
            entry["estimates"].append(
                rep.to_json() | {"interval": {"level": iv.level, "lower": iv.lower, "upper": iv.upper}}
            )
        results.append(entry)
    _emit(json.dumps({"model": Path(args.model).name, "results": results}, indent=1) + "\n", args.out)


_COMMANDS = {
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "variance": cmd_variance,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, PlanError, EstimatorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
