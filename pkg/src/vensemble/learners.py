"""Base learners evaluated on subsamples.

Trees are grown with exhaustive CART split search over a random subset of
``mtry`` features drawn afresh at every node.  The feature subset of a node is
addressed by the learner key and the node's root-to-node path, so growing the
tree fully or only along the paths of a few query points (``focus``) yields the
same prediction at those points.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data_model import Dataset, Task
from .rng import SeedSpec, counter_uniforms

_LEAF = -1
_STUB = -2


class KernelKind(str, enum.Enum):
    REGRESSION_TREE = "regression_tree"
    CLASSIFICATION_TREE = "classification_tree"
    SUBSAMPLE_MEAN = "subsample_mean"


@dataclass(frozen=True)
class TreeParams:
    mtry: int | None = None
    min_samples_split: int = 2
    max_depth: int | None = None

    def __post_init__(self) -> None:
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


def default_mtry(p: int, task: Task) -> int:
    if Task(task) is Task.CLASSIFICATION:
        return max(1, math.ceil(math.sqrt(p)))
    return max(1, p // 3)


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    tree_params: TreeParams | None = None
    randomized: bool = True
    positive_class: int = 1

    def __post_init__(self) -> None:
        kind = KernelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is KernelKind.SUBSAMPLE_MEAN:
            if self.tree_params is not None:
                raise ValueError("subsample_mean takes no tree parameters")
        elif self.tree_params is None:
            object.__setattr__(self, "tree_params", TreeParams())

    @property
    def task(self) -> Task:
        if self.kind is KernelKind.CLASSIFICATION_TREE:
            return Task.CLASSIFICATION
        return Task.REGRESSION

    def resolve_mtry(self, p: int) -> int:
        if self.kind is KernelKind.SUBSAMPLE_MEAN:
            return 0
        if not self.randomized:
            return p
        mtry = self.tree_params.mtry or default_mtry(p, self.task)
        if mtry > p:
            raise ValueError(f"mtry={mtry} exceeds p={p}")
        return mtry

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": self.kind.value,
            "randomized": self.randomized,
            "positive_class": self.positive_class,
        }
        if self.tree_params is not None:
            tp = self.tree_params
            out["tree_params"] = {
                "mtry": tp.mtry,
                "min_samples_split": tp.min_samples_split,
                "max_depth": tp.max_depth,
            }
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> KernelSpec:
        tp = obj.get("tree_params")
        return cls(
            KernelKind(obj["kind"]),
            None if tp is None else TreeParams(**tp),
            bool(obj.get("randomized", True)),
            int(obj.get("positive_class", 1)),
        )


def _fingerprint(indices: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(indices, dtype="<i8").tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class ConstantKernel:
    value: float
    n_features: int
    fingerprint: str = ""
    seed: str = ""

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _as_rows(X, self.n_features)
        return np.full(X.shape[0], self.value)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.predict(X)[:, None]

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "constant",
            "value": self.value,
            "n_features": self.n_features,
            "fingerprint": self.fingerprint,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TreeKernel:
    """Flat-array binary tree.  ``value`` holds one row per node: the mean
    target (regression, one column) or the class frequencies."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    positive_class: int = 1
    classification: bool = False
    fingerprint: str = ""
    seed: str = ""
    partial: bool = field(default=False)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def _leaves(self, X: np.ndarray) -> np.ndarray:
        X = _as_rows(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            idx = rows[inner]
            nd = node[inner]
            go_left = X[idx, f[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        if np.any(self.feature[node] == _STUB):
            raise ValueError("query point falls outside the grown part of a partial tree")
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self._leaves(X)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        vals = self.predict_proba(X)
        if not self.classification:
            return vals[:, 0]
        if self.positive_class >= vals.shape[1]:
            return np.zeros(vals.shape[0])
        return vals[:, self.positive_class]

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "tree",
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_features": self.n_features,
            "positive_class": self.positive_class,
            "classification": self.classification,
            "fingerprint": self.fingerprint,
            "seed": self.seed,
            "partial": self.partial,
        }


FittedKernel = ConstantKernel | TreeKernel


def kernel_from_json(obj: dict[str, Any]) -> FittedKernel:
    if obj["type"] == "constant":
        return ConstantKernel(float(obj["value"]), int(obj["n_features"]), obj["fingerprint"], obj["seed"])
    return TreeKernel(
        np.asarray(obj["feature"], dtype=np.int64),
        np.asarray(obj["threshold"], dtype=np.float64),
        np.asarray(obj["left"], dtype=np.int64),
        np.asarray(obj["right"], dtype=np.int64),
        np.asarray(obj["value"], dtype=np.float64).reshape(len(obj["feature"]), -1),
        int(obj["n_features"]),
        int(obj["positive_class"]),
        bool(obj["classification"]),
        obj["fingerprint"],
        obj["seed"],
        bool(obj["partial"]),
    )


def _as_rows(X: np.ndarray, p: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != p:
        raise ValueError(f"expected feature vectors of length {p}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature vectors must be finite")
    return X


def fit_kernel(
    data: Dataset,
    indices: np.ndarray,
    spec: KernelSpec,
    seed: SeedSpec,
    focus: np.ndarray | None = None,
) -> FittedKernel:
    """Fit one base learner on ``data`` rows ``indices`` (repeats count as weight).

    With ``focus`` given, only the branches reached by those query points are
    grown; the returned tree predicts them exactly as the full tree would.
    """
    indices = np.sort(np.asarray(indices, dtype=np.int64).ravel())
    if indices.size == 0:
        raise ValueError("cannot fit a kernel on an empty subsample")
    if indices[0] < 0 or indices[-1] >= data.n:
        raise ValueError("subsample indices out of range")
    fp = _fingerprint(indices)
    y = data.targets[indices]
    if spec.kind is KernelKind.SUBSAMPLE_MEAN:
        return ConstantKernel(float(y.mean()), data.p, fp, seed.stream_id)
    X = data.features[indices]
    classification = spec.kind is KernelKind.CLASSIFICATION_TREE
    if classification:
        if data.task is not Task.CLASSIFICATION:
            raise ValueError("classification_tree needs a classification dataset")
        n_classes = max(data.n_classes, spec.positive_class + 1)
        Y = np.zeros((y.size, n_classes))
        Y[np.arange(y.size), y.astype(np.int64)] = 1.0
    else:
        Y = y[:, None]
    if focus is not None:
        focus = _as_rows(focus, data.p)
    builder = _TreeBuilder(X, Y, classification, spec.resolve_mtry(data.p), spec.tree_params, seed.key())
    arrays = builder.build(focus)
    return TreeKernel(
        *arrays,
        n_features=data.p,
        positive_class=spec.positive_class,
        classification=classification,
        fingerprint=fp,
        seed=seed.stream_id,
        partial=focus is not None,
    )


def predict_kernel(model: FittedKernel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_kernel takes a single feature vector")
    return float(model.predict(x[None, :])[0])


class _TreeBuilder:
    def __init__(self, X, Y, classification, mtry, params: TreeParams, key: bytes):
        self.X = X
        self.Y = Y
        self.classification = classification
        self.p = X.shape[1]
        self.mtry = mtry
        self.min_split = params.min_samples_split
        self.max_depth = params.max_depth
        self.key = key

    def _features(self, path: bytes) -> np.ndarray:
        if self.mtry >= self.p:
            return np.arange(self.p)
        u = counter_uniforms(self.key, path, self.p)
        return np.sort(np.argsort(u, kind="stable")[: self.mtry])

    def _impurity(self, Yn: np.ndarray) -> float:
        m = Yn.shape[0]
        if self.classification:
            c = Yn.sum(axis=0)
            return float(m - (c @ c) / m)
        d = Yn[:, 0] - Yn[:, 0].mean()
        return float(d @ d)

    def _best_split(self, rows: np.ndarray, path: bytes):
        """Lowest child impurity over drawn features; first minimum wins, which
        orders ties by feature index then threshold."""
        feats = self._features(path)
        Xn = self.X[rows][:, feats]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        m = rows.size
        nl = np.arange(1, m, dtype=np.float64)[:, None]
        nr = m - nl
        Yn = self.Y[rows]
        if self.classification:
            ys = Yn[order]  # m x f x C
            cl = np.cumsum(ys, axis=0)[:-1]
            cr = Yn.sum(axis=0) - cl
            score = (nl - (cl * cl).sum(axis=2) / nl) + (nr - (cr * cr).sum(axis=2) / nr)
        else:
            yc = Yn[:, 0] - Yn[:, 0].mean()
            ys = yc[order]
            s1 = np.cumsum(ys, axis=0)[:-1]
            s2 = np.cumsum(ys * ys, axis=0)[:-1]
            t1 = ys.sum(axis=0)
            t2 = (ys * ys).sum(axis=0)
            score = (s2 - s1 * s1 / nl) + ((t2 - s2) - (t1 - s1) ** 2 / nr)
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            return None
        score = np.where(valid, score, np.inf)
        flat = int(np.argmin(score.T))  # feature-major scan
        j, i = divmod(flat, m - 1)
        lo, hi = xs[i, j], xs[i + 1, j]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        return int(feats[j]), float(thr), float(score[i, j])

    def build(self, focus: np.ndarray | None):
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[np.ndarray] = []

        def new_node() -> int:
            feature.append(_LEAF)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(None)
            return len(feature) - 1

        n_focus = 0 if focus is None else focus.shape[0]
        root = new_node()
        stack = [(root, np.arange(self.X.shape[0]), b"", 0, np.arange(n_focus))]
        while stack:
            node, rows, path, depth, fidx = stack.pop()
            Yn = self.Y[rows]
            value[node] = Yn.mean(axis=0)
            if focus is not None and fidx.size == 0:
                feature[node] = _STUB
                continue
            m = rows.size
            if m < self.min_split or (self.max_depth is not None and depth >= self.max_depth):
                continue
            if np.all(Yn == Yn[0]):
                continue
            parent = self._impurity(Yn)
            split = self._best_split(rows, path)
            if split is None:
                continue
            f, thr, score = split
            if not score < parent * (1.0 - 1e-12):
                continue
            go_left = self.X[rows, f] <= thr
            lnode, rnode = new_node(), new_node()
            feature[node], threshold[node] = f, thr
            left[node], right[node] = lnode, rnode
            if focus is not None:
                fl = focus[fidx, f] <= thr
                lf, rf = fidx[fl], fidx[~fl]
            else:
                lf = rf = fidx
            stack.append((rnode, rows[~go_left], path + b"R", depth + 1, rf))
            stack.append((lnode, rows[go_left], path + b"L", depth + 1, lf))
        vals = np.array([v if v is not None else np.full(self.Y.shape[1], np.nan) for v in value])
        return (
            np.asarray(feature, dtype=np.int64),
            np.asarray(threshold, dtype=np.float64),
            np.asarray(left, dtype=np.int64),
            np.asarray(right, dtype=np.int64),
            vals,
        )
