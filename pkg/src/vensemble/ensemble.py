"""Ensembles of base learners trained over a subsample plan."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .data_model import Dataset, InclusionMatrix, SubsamplePlan, inclusion_counts
from .learners import FittedKernel, KernelSpec, fit_kernel, kernel_from_json
from .rng import SeedSpec

MODEL_FORMAT = "vensemble-model"
MODEL_VERSION = 1


class LearnerError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"learner {index}: {cause}")
        self.index = index


@dataclass(frozen=True)
class EnsembleFit:
    learners: tuple[FittedKernel, ...]
    plan: SubsamplePlan
    inclusion: InclusionMatrix
    spec: KernelSpec

    def __post_init__(self) -> None:
        if len(self.learners) != self.plan.B:
            raise ValueError("need one learner per subsample")

    @property
    def B(self) -> int:
        return self.plan.B

    def h_matrix(self, X: np.ndarray) -> np.ndarray:
        """Per-learner predictions, shape (n_points, B)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.column_stack([m.predict(X) for m in self.learners])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.h_matrix(X).mean(axis=1)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        probs = [m.predict_proba(X) for m in self.learners]
        width = max(p.shape[1] for p in probs)
        total = np.zeros((X.shape[0], width))
        for p in probs:
            total[:, : p.shape[1]] += p
        return total / len(probs)


@dataclass(frozen=True)
class PointEvaluation:
    h_values: np.ndarray
    mean: float


def _fit_one(args) -> FittedKernel:
    data, indices, spec, seed, focus, b = args
    try:
        return fit_kernel(data, indices, spec, seed, focus)
    except Exception as exc:  # noqa: BLE001 - re-raised with the learner index
        raise LearnerError(b, exc) from exc


def fit_ensemble(
    data: Dataset,
    spec: KernelSpec,
    plan: SubsamplePlan,
    seed: SeedSpec,
    focus: np.ndarray | None = None,
    workers: int = 1,
) -> EnsembleFit:
    """Fit learner ``b`` on ``plan.subsamples[b]`` with stream ``learner:b``.

    ``focus`` restricts tree growth to the query points that will be
    evaluated (see :func:`fit_kernel`).  Results do not depend on ``workers``.
    """
    if plan.n != data.n:
        raise ValueError(f"plan is over n={plan.n} points but data has n={data.n}")
    jobs = [
        (data, plan.subsamples[b], spec, seed.child(f"learner:{b}"), focus, b)
        for b in range(plan.B)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            learners = list(pool.map(_fit_one, jobs, chunksize=max(1, plan.B // (4 * workers))))
    else:
        learners = [_fit_one(job) for job in jobs]
    return EnsembleFit(tuple(learners), plan, inclusion_counts(plan), spec)


def evaluate_point(fit: EnsembleFit, x: np.ndarray) -> PointEvaluation:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("evaluate_point takes one feature vector")
    h = fit.h_matrix(x[None, :])[0]
    return PointEvaluation(h, float(h.mean()))


def save_ensemble(fit: EnsembleFit, path: str | Path, extra: dict[str, Any] | None = None) -> None:
    obj = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "spec": fit.spec.to_json(),
        "plan": fit.plan.to_json(include_indices=True),
        "learners": [m.to_json() for m in fit.learners],
    }
    if extra:
        obj["meta"] = extra
    Path(path).write_text(json.dumps(obj, separators=(",", ":")), encoding="utf-8")


def load_ensemble(path: str | Path) -> EnsembleFit:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if obj.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {obj.get('version')}")
    plan = SubsamplePlan.from_json(obj["plan"])
    learners = tuple(kernel_from_json(m) for m in obj["learners"])
    return EnsembleFit(learners, plan, inclusion_counts(plan), KernelSpec.from_json(obj["spec"]))
