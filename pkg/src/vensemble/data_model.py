"""Value types shared across the package and inclusion-count bookkeeping."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

import numpy as np


class DataError(ValueError):
    """Raised for malformed or invalid input data."""


class Task(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class Mode(str, enum.Enum):
    WITH_REPLACEMENT = "with_replacement"
    WITHOUT_REPLACEMENT = "without_replacement"
    BALANCED_V = "balanced_v"
    BALANCED_U = "balanced_u"
    IM_TWO_LEVEL = "im_two_level"


class Method(str, enum.Enum):
    IM = "IM"
    BM = "BM"
    IJ = "IJ"
    CORRECTED_V = "corrected_V"
    CORRECTED_U = "corrected_U"
    CORRECTED_IJ = "corrected_IJ"


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    task: Task = Task.REGRESSION
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.targets, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1:
            raise DataError("features must be 2-D and targets 1-D")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset needs at least one row and one feature")
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"features have {X.shape[0]} rows but targets have {y.shape[0]}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        task = Task(self.task)
        if task is Task.CLASSIFICATION:
            if np.any(y < 0) or np.any(y != np.round(y)):
                raise DataError("class labels must be consecutive integers from 0")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "task", task)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task is not Task.CLASSIFICATION:
            return 1
        return int(self.targets.max()) + 1

    def subset(self, rows: np.ndarray) -> Dataset:
        return Dataset(self.features[rows], self.targets[rows], self.task, self.feature_names)


def load_csv(path: str | Path, task: Task | str = Task.REGRESSION) -> Dataset:
    """Read a dataset: header row, feature columns, then a target column ``y``.

    Classification labels are remapped to consecutive integers from 0 in
    sorted order of the raw values.
    """
    path = Path(path)
    task = Task(task)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "y":
            raise DataError(f"{path}:1: last column must be named 'y'")
        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{line}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                values = [float(c) for c in row[:-1]]
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric feature value") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{line}: non-finite feature value")
            label = row[-1].strip()
            if task is Task.REGRESSION:
                try:
                    target = float(label)
                except ValueError:
                    raise DataError(f"{path}:{line}: non-numeric target") from None
                if not math.isfinite(target):
                    raise DataError(f"{path}:{line}: non-finite target")
                values.append(target)
            else:
                raw_labels.append(label)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    if task is Task.CLASSIFICATION:
        levels = _sorted_levels(raw_labels)
        codes = [levels[label] for label in raw_labels]
        X = np.array(rows, dtype=np.float64)
        y = np.array(codes, dtype=np.float64)
    else:
        arr = np.array(rows, dtype=np.float64)
        X, y = arr[:, :-1], arr[:, -1]
    return Dataset(X, y, task, tuple(header[:-1]))


def load_points(path: str | Path, p: int | None = None) -> np.ndarray:
    """Read query points: header row then numeric rows.  A trailing ``y`` column is ignored."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if not header:
            raise DataError(f"{path}: empty file")
        width = len(header) - (header[-1] == "y")
        if width < 1:
            raise DataError(f"{path}:1: no feature columns")
        if p is not None and width != p:
            raise DataError(f"{path}:1: expected {p} feature columns, got {width}")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(c) for c in row[:width]]
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric feature value") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{line}: non-finite feature value")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def _sorted_levels(labels: list[str]) -> dict[str, int]:
    uniq = set(labels)
    try:
        ordered = sorted(uniq, key=float)
    except ValueError:
        ordered = sorted(uniq)
    return {lab: i for i, lab in enumerate(ordered)}


def write_csv(data: Dataset, path: str | Path) -> None:
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "y"])
        for xrow, target in zip(data.features, data.targets):
            w.writerow([repr(float(v)) for v in xrow] + [repr(float(target))])


@dataclass(frozen=True)
class SubsamplePlan:
    """B index lists of length k over ``range(n)``.

    For ``im_two_level`` plans ``groups[b]`` is the outer group of subsample
    ``b`` and ``fixed_points[g]`` is the training index shared by group ``g``.
    """

    subsamples: np.ndarray
    mode: Mode
    n: int
    seed: int | None = None
    groups: np.ndarray | None = None
    fixed_points: np.ndarray | None = None

    def __post_init__(self) -> None:
        subs = np.array(self.subsamples, dtype=np.int64, copy=True)
        if subs.ndim != 2 or subs.shape[0] < 1 or subs.shape[1] < 1:
            raise ValueError("subsamples must be a non-empty B x k array")
        if subs.min() < 0 or subs.max() >= self.n:
            raise ValueError(f"subsample indices must lie in [0, {self.n})")
        mode = Mode(self.mode)
        if mode in (Mode.WITHOUT_REPLACEMENT, Mode.BALANCED_U):
            srt = np.sort(subs, axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                raise ValueError(f"{mode.value} subsamples must hold distinct indices")
        if mode in (Mode.BALANCED_V, Mode.BALANCED_U):
            N = np.bincount(subs.ravel(), minlength=self.n)
            if np.any(N != N[0]):
                raise ValueError("balanced plans must use every index equally often")
        subs.setflags(write=False)
        object.__setattr__(self, "subsamples", subs)
        object.__setattr__(self, "mode", mode)
        if mode is Mode.IM_TWO_LEVEL:
            if self.groups is None or self.fixed_points is None:
                raise ValueError("im_two_level plans need groups and fixed_points")
            groups = np.asarray(self.groups, dtype=np.int64)
            fixed = np.asarray(self.fixed_points, dtype=np.int64)
            if groups.shape != (subs.shape[0],):
                raise ValueError("one group label per subsample required")
            for b in range(subs.shape[0]):
                if fixed[groups[b]] not in subs[b]:
                    raise ValueError(f"subsample {b} misses its group's fixed point")
            object.__setattr__(self, "groups", groups)
            object.__setattr__(self, "fixed_points", fixed)

    @property
    def B(self) -> int:
        return self.subsamples.shape[0]

    @property
    def k(self) -> int:
        return self.subsamples.shape[1]

    @property
    def r(self) -> int | None:
        """Appearances per training point, defined for balanced plans only."""
        if self.mode in (Mode.BALANCED_V, Mode.BALANCED_U):
            return self.B * self.k // self.n
        return None

    def head(self, B: int) -> SubsamplePlan:
        """The first ``B`` subsamples; still a valid i.i.d. plan for unbalanced modes."""
        if self.mode not in (Mode.WITH_REPLACEMENT, Mode.WITHOUT_REPLACEMENT):
            raise ValueError(f"cannot truncate a {self.mode.value} plan")
        if not 1 <= B <= self.B:
            raise ValueError(f"B must be in [1, {self.B}]")
        return SubsamplePlan(self.subsamples[:B], self.mode, self.n, self.seed)

    def to_json(self, include_indices: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "mode": self.mode.value,
            "n": self.n,
            "k": self.k,
            "B": self.B,
            "seed": self.seed,
        }
        if self.r is not None:
            out["r"] = self.r
        if include_indices:
            out["subsamples"] = self.subsamples.tolist()
            if self.groups is not None:
                out["groups"] = self.groups.tolist()
                out["fixed_points"] = self.fixed_points.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SubsamplePlan:
        if "subsamples" not in obj:
            raise ValueError("plan JSON has no explicit subsamples; regenerate from its seed")
        return cls(
            np.asarray(obj["subsamples"]),
            Mode(obj["mode"]),
            int(obj["n"]),
            obj.get("seed"),
            None if obj.get("groups") is None else np.asarray(obj["groups"]),
            None if obj.get("fixed_points") is None else np.asarray(obj["fixed_points"]),
        )


@dataclass(frozen=True)
class InclusionMatrix:
    """``counts[i, b]``: how many times training point i appears in subsample b."""

    counts: np.ndarray

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def B(self) -> int:
        return self.counts.shape[1]

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1, dtype=np.int64)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0, dtype=np.int64)


def inclusion_counts(plan: SubsamplePlan) -> InclusionMatrix:
    n, B, k = plan.n, plan.B, plan.k
    flat = plan.subsamples + n * np.arange(B)[:, None]
    counts = np.bincount(flat.ravel(), minlength=n * B).reshape(B, n).T
    counts = np.ascontiguousarray(counts, dtype=np.int16)
    counts.setflags(write=False)
    return InclusionMatrix(counts)


@dataclass
class VarianceReport:
    method: Method
    zeta1_hat: float
    zetakk_hat: float
    total_variance: float
    n: int
    k: int
    B: int
    ss_tau: float | None = None
    ss_eps: float | None = None
    sigma_eps2_hat: float | None = None
    clamped: bool = field(init=False)

    def __post_init__(self) -> None:
        self.method = Method(self.method)
        self.clamped = bool(self.zeta1_hat < 0 or self.total_variance < 0)

    @property
    def interval_variance(self) -> float:
        """Total variance floored at zero, the value used for intervals."""
        return max(self.total_variance, 0.0)

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        out["method"] = self.method.value
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)
