"""Monte Carlo studies of the variance estimators, and a predictive benchmark.

Every replicate ``r`` draws its data and plans from streams under
``rep:r`` of the master seed, so results do not depend on how replicates
are spread over workers.  For the i.i.d. sampling modes one plan of the
largest ensemble size is drawn per ``k`` and smaller ensembles are its
prefixes; balanced and two-level plans are drawn separately for each B.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from ..data_model import Dataset, Method, Mode, Task, inclusion_counts, load_csv
from ..ensemble import fit_ensemble
from ..rng import SeedSpec
from ..sampling import draw_im_plan, draw_plan
from ..stats import normality_test
from ..variance import EstimatorError, confidence_interval, estimate
from .config import ConfigError, ExperimentConfig
from .generators import gen_linear, gen_mars, resample_rows

REPORT_FORMAT = "vensemble-report"
REPORT_VERSION = 1

_PREFIX_MODES = (Mode.WITH_REPLACEMENT, Mode.WITHOUT_REPLACEMENT)
_U_MODES = (Mode.WITHOUT_REPLACEMENT, Mode.BALANCED_U)


@dataclass
class ExperimentReport:
    kind: str
    config: dict[str, Any]
    records: list[dict[str, Any]]
    raw: dict[str, Any] | None = None
    keep_raw: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        out = {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "kind": self.kind,
            "seed": self.config["seed"],
            "config": self.config,
            **self.extra,
            "records": self.records,
        }
        if self.keep_raw and self.raw is not None:
            out["raw"] = self.raw
        return out


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def _load_population(cfg: ExperimentConfig) -> Dataset | None:
    if cfg.csv_path is None:
        return None
    return load_csv(cfg.csv_path, cfg.task)


def replicate_dataset(cfg: ExperimentConfig, rep: int, population: Dataset | None = None) -> Dataset:
    seed = SeedSpec(cfg.seed, f"rep:{rep}").child("data")
    if cfg.generator == "linear":
        return gen_linear(cfg.n, seed)
    if cfg.generator == "mars":
        return gen_mars(cfg.n, seed, cfg.mars_x3_center)
    if population is None:
        raise ConfigError(f"generator {cfg.generator!r} needs a loaded population")
    return resample_rows(population, cfg.n, seed)


def default_test_points(cfg: ExperimentConfig, population: Dataset | None = None) -> np.ndarray:
    """Linear: x = 10.  MARS: the centre (0.5, ..., 0.5) plus two uniform draws."""
    if cfg.test_points is not None:
        return np.array(cfg.test_points, dtype=np.float64)
    if cfg.generator == "linear":
        return np.array([[10.0]])
    if cfg.generator == "mars":
        extra = SeedSpec(cfg.seed, "test_points").generator().random((2, 5))
        return np.vstack([np.full((1, 5), 0.5), extra])
    return population.features.mean(axis=0, keepdims=True)


def _reference_method(mode: Mode) -> Method:
    if mode is Mode.IM_TWO_LEVEL:
        return Method.IM
    return Method.CORRECTED_U if mode in _U_MODES else Method.CORRECTED_V


class _EnsembleCache:
    """Per-replicate fitted predictions, keyed by (k, B)."""

    def __init__(self, cfg: ExperimentConfig, data: Dataset, points: np.ndarray, seed: SeedSpec, sizes: Iterable[int]):
        self.cfg, self.data, self.points, self.seed = cfg, data, points, seed
        self.B_total = max(sizes)
        self._full: dict[int, tuple] = {}

    def _fit(self, plan, label: str) -> np.ndarray:
        fit = fit_ensemble(self.data, self.cfg.kernel, plan, self.seed.child(label), focus=self.points)
        return fit.h_matrix(self.points)

    def get(self, k: int, B: int):
        cfg = self.cfg
        if cfg.mode in _PREFIX_MODES:
            if k not in self._full:
                plan = draw_plan(cfg.mode, cfg.n, k, self.B_total, self.seed.child(f"plan:k={k}"))
                self._full[k] = (plan, self._fit(plan, f"fit:k={k}"))
            plan, H = self._full[k]
            plan = plan.head(B)
            return plan, H[:, :B]
        label = f"k={k}:B={B}"
        if cfg.mode is Mode.IM_TWO_LEVEL:
            plan = draw_im_plan(cfg.n, k, B // cfg.n_in, cfg.n_in, cfg.im_inner_mode, self.seed.child("plan:" + label))
        else:
            plan = draw_plan(cfg.mode, cfg.n, k, B, self.seed.child("plan:" + label))
        return plan, self._fit(plan, "fit:" + label)


def _estimate_all(methods, H: np.ndarray, plan) -> np.ndarray:
    """(n_methods, 3, n_points) array of total variance, zeta_1 and zeta_kk."""
    inc = inclusion_counts(plan)
    out = np.full((len(methods), 3, H.shape[0]), np.nan)
    for i, m in enumerate(methods):
        for p in range(H.shape[0]):
            try:
                rep = estimate(m, H[p], plan, inc)
            except EstimatorError:
                continue
            out[i, :, p] = rep.total_variance, rep.zeta1_hat, rep.zetakk_hat
    return out


def _run_replicate(job) -> dict[str, np.ndarray]:
    cfg, kind, rep, points, population = job
    data = replicate_dataset(cfg, rep, population)
    seed = SeedSpec(cfg.seed, f"rep:{rep}")
    methods = cfg.resolved_estimators()
    sizes = list(cfg.B) + ([cfg.reference_B] if kind == "components" else [])
    cache = _EnsembleCache(cfg, data, points, seed, sizes)
    K, NB, P = len(cfg.k), len(cfg.B), points.shape[0]
    preds = np.empty((K, NB, P))
    est = np.empty((K, NB, len(methods), 3, P))
    ref = np.full((K, 2, P), np.nan)
    for a, k in enumerate(cfg.k):
        for c, B in enumerate(cfg.B):
            plan, H = cache.get(k, B)
            preds[a, c] = H.mean(axis=1)
            est[a, c] = _estimate_all(methods, H, plan)
        if kind == "components":
            plan, H = cache.get(k, cfg.reference_B)
            ref[a] = _estimate_all([_reference_method(cfg.mode)], H, plan)[0, 1:]
    return {"pred": preds, "est": est, "ref": ref}


def _finite_mean(x: np.ndarray) -> float | None:
    x = x[np.isfinite(x)]
    return float(x.mean()) if x.size else None


def _estimator_summary(values: np.ndarray, emp: float | None) -> dict[str, Any]:
    """``values``: (reps, 3) of total variance, zeta_1, zeta_kk."""
    ok = np.isfinite(values[:, 0])
    tot = values[ok, 0]
    out: dict[str, Any] = {"n_failed": int((~ok).sum())}
    if tot.size == 0:
        return out | {"mean_variance": None, "mean_zeta1": None, "mean_zetakk": None,
                      "mean_log_variance": None, "n_nonpositive": 0, "ratio": None}
    nonpos = int((tot <= 0).sum())
    mean = float(tot.mean())
    out |= {
        "mean_variance": mean,
        "mean_zeta1": float(values[ok, 1].mean()),
        "mean_zetakk": float(values[ok, 2].mean()),
        "mean_log_variance": None if nonpos else float(np.log(tot).mean()),
        "n_nonpositive": nonpos,
        "ratio": mean / emp if emp else None,
    }
    return out


def _simulate(cfg: ExperimentConfig, kind: str, workers: int) -> ExperimentReport:
    cfg.validate_simulation(kind)
    population = _load_population(cfg)
    points = default_test_points(cfg, population)
    dim = population.p if population is not None else (1 if cfg.generator == "linear" else 5)
    if points.ndim != 2 or points.shape[1] != dim:
        raise ConfigError(f"test points must have {dim} features")
    cfg.check_kernel(dim)
    methods = cfg.resolved_estimators()
    jobs = [(cfg, kind, r, points, population) for r in range(cfg.mc_reps)]
    results = _map(_run_replicate, jobs, workers)
    pred = np.stack([r["pred"] for r in results])
    est = np.stack([r["est"] for r in results])
    ref = np.stack([r["ref"] for r in results])
    z = confidence_interval(0.0, 1.0, cfg.level).half_width

    records = []
    for a, k in enumerate(cfg.k):
        for c, B in enumerate(cfg.B):
            for p in range(points.shape[0]):
                y = pred[:, a, c, p]
                emp = float(np.var(y, ddof=1))
                center = float(y.mean())
                rec: dict[str, Any] = {
                    "k": k, "B": B, "point": p, "x": [float(v) for v in points[p]],
                    "mean_prediction": center, "empirical_variance": emp,
                }
                if kind == "coverage":
                    try:
                        nt = normality_test(y)
                        rec["normality"] = {"statistic": nt.statistic, "p_value": nt.p_value, "error": None}
                    except ValueError as exc:
                        rec["normality"] = {"statistic": None, "p_value": None, "error": str(exc)}
                per = {}
                for i, m in enumerate(methods):
                    vals = est[:, a, c, i, :, p]
                    s = _estimator_summary(vals, emp if emp > 0 else None)
                    if kind == "coverage":
                        tot = vals[:, 0]
                        ok = np.isfinite(tot)
                        half = z * np.sqrt(np.maximum(tot[ok], 0.0))
                        hits = np.abs(y[ok] - center) <= half
                        s["coverage"] = float(100.0 * hits.mean()) if ok.any() else None
                        s["n_clamped"] = int((tot[ok] < 0).sum())
                    per[m.value] = s
                rec["estimators"] = per
                if kind == "components":
                    z1, zkk = _finite_mean(ref[:, a, 0, p]), _finite_mean(ref[:, a, 1, p])
                    t1 = None if z1 is None else k * k / cfg.n * z1
                    tkk = None if zkk is None else zkk / B
                    total = None if t1 is None or tkk is None else t1 + tkk
                    rec["components"] = {
                        "reference_B": cfg.reference_B,
                        "reference_method": _reference_method(cfg.mode).value,
                        "zeta1_term": t1,
                        "zetakk_term": tkk,
                        "sum": total,
                        "ratio": total / emp if total is not None and emp > 0 else None,
                    }
                records.append(rec)
    raw = {
        "predictions": pred.tolist(),
        "estimates": {m.value: est[:, :, :, i, 0, :].tolist() for i, m in enumerate(methods)},
    }
    return ExperimentReport(kind, cfg.to_json(), records, raw, cfg.keep_raw)


def run_bias_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Mean (log) variance estimates against the Monte Carlo variance of predictions."""
    return _simulate(cfg, "bias", workers)


def run_coverage_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Normality, variance ratios and interval coverage per (k, B, test point)."""
    return _simulate(cfg, "coverage", workers)


def run_components_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """The two variance components across B, with zetas from a reference ensemble."""
    return _simulate(cfg, "components", workers)


EXPERIMENTS = {
    "bias": run_bias_experiment,
    "coverage": run_coverage_experiment,
    "components": run_components_experiment,
}


def _bench_repeat(job) -> list[float]:
    cfg, data, r = job
    seed = SeedSpec(cfg.seed, f"repeat:{r}")
    perm = seed.child("split").generator().permutation(data.n)
    n_test = max(1, round(cfg.test_fraction * data.n))
    test, train = data.subset(perm[:n_test]), data.subset(perm[n_test:])
    out = []
    for mode in cfg.bench_modes:
        for prop in cfg.proportions:
            k = max(1, round(prop * train.n))
            label = f"{mode.value}:{prop!r}"
            plan = draw_plan(mode, train.n, k, cfg.trees, seed.child("plan:" + label))
            fit = fit_ensemble(train, cfg.kernel, plan, seed.child("fit:" + label), focus=test.features)
            if cfg.task is Task.CLASSIFICATION:
                labels = fit.predict_proba(test.features).argmax(axis=1)
                out.append(float(np.mean(labels == test.targets)))
            else:
                err = fit.predict(test.features) - test.targets
                out.append(float(np.sqrt(np.mean(err * err))))
    return out


def bench_predictive(csv_path: str | Path, cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Test-set RMSE or accuracy per (sampling mode, subsample proportion)."""
    cfg.validate_bench()
    if cfg.kernel.task is not cfg.task:
        raise ConfigError(f"kernel {cfg.kernel.kind.value} does not fit a {cfg.task.value} task")
    bad = [m.value for m in cfg.bench_modes if m not in _PREFIX_MODES]
    if bad:
        raise ConfigError(f"bench modes must be with/without replacement, got {bad}")
    data = load_csv(csv_path, cfg.task)
    cfg.check_kernel(data.p)
    if data.n < 3:
        raise ConfigError("bench needs at least three rows")
    scores = np.array(_map(_bench_repeat, [(cfg, data, r) for r in range(cfg.repeats)], workers))
    metric = "accuracy" if cfg.task is Task.CLASSIFICATION else "rmse"
    n_train = data.n - max(1, round(cfg.test_fraction * data.n))
    records = []
    col = 0
    for mode in cfg.bench_modes:
        for prop in cfg.proportions:
            v = scores[:, col]
            col += 1
            records.append({
                "mode": mode.value,
                "proportion": prop,
                "k": max(1, round(prop * n_train)),
                "metric": metric,
                "mean": float(v.mean()),
                "se": float(v.std(ddof=1) / math.sqrt(v.size)),
            })
    digest = hashlib.sha256(Path(csv_path).read_bytes()).hexdigest()
    extra = {"data": {"path": Path(csv_path).name, "sha256": digest, "n": data.n, "p": data.p}}
    return ExperimentReport("bench", cfg.to_json(), records, {"scores": scores.tolist()}, cfg.keep_raw, extra)
