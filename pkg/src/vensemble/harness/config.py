"""Experiment configuration: a flat JSON object validated up front."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from ..data_model import Method, Mode, Task
from ..learners import KernelKind, KernelSpec
from .generators import MARS_X3_CENTER

MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    pass


_DEFAULT_ESTIMATORS = {
    Mode.WITH_REPLACEMENT: ("BM", "IJ", "corrected_V"),
    Mode.BALANCED_V: ("BM", "IJ", "corrected_V"),
    Mode.WITHOUT_REPLACEMENT: ("BM", "IJ", "corrected_U", "corrected_IJ"),
    Mode.BALANCED_U: ("BM", "IJ", "corrected_U", "corrected_IJ"),
    Mode.IM_TWO_LEVEL: ("IM",),
}


def _int_list(name: str, value: Any) -> tuple[int, ...]:
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(f"{name} must not be empty")
    out = []
    for v in items:
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"{name} entries must be positive integers, got {v!r}")
        out.append(v)
    return tuple(out)


def _pos_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    generator: str = "linear"
    n: int = 200
    k: tuple[int, ...] = (50,)
    B: tuple[int, ...] = (100,)
    mode: Mode = Mode.WITH_REPLACEMENT
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(KernelKind.REGRESSION_TREE))
    mc_reps: int = 50
    test_points: tuple[tuple[float, ...], ...] | None = None
    estimators: tuple[Method, ...] = ()
    seed: int = 0
    n_in: int | None = None
    im_inner_mode: Mode = Mode.WITH_REPLACEMENT
    reference_B: int = 1000
    level: float = 0.95
    mars_x3_center: float = MARS_X3_CENTER
    keep_raw: bool = False
    figures: bool = True
    task: Task = Task.REGRESSION
    proportions: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    bench_modes: tuple[Mode, ...] = (Mode.WITHOUT_REPLACEMENT, Mode.WITH_REPLACEMENT)
    trees: int = 100
    repeats: int = 20
    test_fraction: float = 0.2
    output_path: str | None = None

    @property
    def csv_path(self) -> str | None:
        return self.generator[4:] if self.generator.startswith("csv:") else None

    @property
    def B_max(self) -> int:
        return max(self.B)

    def resolved_estimators(self) -> tuple[Method, ...]:
        return self.estimators or tuple(Method(m) for m in _DEFAULT_ESTIMATORS[self.mode])

    def with_seed(self, seed: int | None) -> ExperimentConfig:
        return self if seed is None else replace(self, seed=_check_seed(seed))

    def validate_simulation(self, kind: str) -> None:
        if self.generator not in ("linear", "mars") and self.csv_path is None:
            raise ConfigError(f"unknown generator {self.generator!r}")
        if kind == "coverage" and self.mc_reps < 50:
            raise ConfigError("coverage experiments need mc_reps >= 50")
        if self.mc_reps < 20:
            raise ConfigError("mc_reps must be >= 20")
        if list(self.B) != sorted(set(self.B)):
            raise ConfigError("B grid must be strictly ascending")
        if kind == "components" and self.reference_B < 2:
            raise ConfigError("reference_B must be >= 2")
        if not 0 < self.level < 1:
            raise ConfigError("level must lie in (0, 1)")
        u_mode = self.mode in (Mode.WITHOUT_REPLACEMENT, Mode.BALANCED_U)
        for k in self.k:
            if u_mode and k > self.n:
                raise ConfigError(f"k={k} exceeds n={self.n} for sampling without replacement")
            for B in self.B:
                if B < 2:
                    raise ConfigError("every B must be >= 2")
                if self.mode in (Mode.BALANCED_V, Mode.BALANCED_U) and (B * k) % self.n:
                    raise ConfigError(f"balanced plans need n | B*k (n={self.n}, k={k}, B={B})")
        if self.mode is Mode.IM_TWO_LEVEL:
            if self.n_in is None or self.n_in < 2:
                raise ConfigError("im_two_level needs n_in >= 2")
            bad = [B for B in self.B if B % self.n_in or B // self.n_in < 2]
            if bad:
                raise ConfigError(f"B values {bad} are not multiples of n_in with n_out >= 2")
        for m in self.resolved_estimators():
            if (m is Method.IM) != (self.mode is Mode.IM_TWO_LEVEL):
                raise ConfigError(f"estimator {m.value} does not apply to mode {self.mode.value}")
            if m in (Method.CORRECTED_U, Method.CORRECTED_IJ) and max(self.k) >= self.n:
                raise ConfigError(f"{m.value} needs k < n")

    def check_kernel(self, p: int) -> None:
        try:
            self.kernel.resolve_mtry(p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate_bench(self) -> None:
        if not self.proportions or any(not 0 < p <= 1 for p in self.proportions):
            raise ConfigError("proportions must lie in (0, 1]")
        if self.trees < 2 or self.repeats < 2:
            raise ConfigError("bench needs trees >= 2 and repeats >= 2")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")

    def to_json(self) -> dict[str, Any]:
        obj = asdict(self)
        obj["mode"] = self.mode.value
        obj["im_inner_mode"] = self.im_inner_mode.value
        obj["task"] = self.task.value
        obj["kernel"] = self.kernel.to_json()
        obj["estimators"] = [m.value for m in self.estimators]
        obj["bench_modes"] = [m.value for m in self.bench_modes]
        obj["k"] = list(self.k)
        obj["B"] = list(self.B)
        obj["proportions"] = list(self.proportions)
        if self.test_points is not None:
            obj["test_points"] = [list(p) for p in self.test_points]
        return obj


def _check_seed(seed: Any) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return seed


_FIELDS = set(ExperimentConfig.__dataclass_fields__)


def config_from_json(obj: Any) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(obj) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
    kw: dict[str, Any] = dict(obj)
    try:
        if "k" in kw:
            kw["k"] = _int_list("k", kw["k"])
        if "B" in kw:
            kw["B"] = _int_list("B", kw["B"])
        for name in ("n", "mc_reps", "reference_B", "trees", "repeats"):
            if name in kw:
                kw[name] = _pos_int(name, kw[name])
        for name in ("mode", "im_inner_mode"):
            if name in kw:
                kw[name] = Mode(kw[name])
        if "task" in kw:
            kw["task"] = Task(kw["task"])
        if "kernel" in kw:
            kw["kernel"] = KernelSpec.from_json(kw["kernel"])
        elif kw.get("task") is Task.CLASSIFICATION:
            kw["kernel"] = KernelSpec(KernelKind.CLASSIFICATION_TREE)
        if "estimators" in kw:
            kw["estimators"] = tuple(Method(m) for m in kw["estimators"])
        if "bench_modes" in kw:
            kw["bench_modes"] = tuple(Mode(m) for m in kw["bench_modes"])
        if "proportions" in kw:
            kw["proportions"] = tuple(float(p) for p in kw["proportions"])
        if kw.get("test_points") is not None:
            pts = kw["test_points"]
            if not isinstance(pts, list) or not pts:
                raise ConfigError("test_points must be a non-empty list of feature vectors")
            kw["test_points"] = tuple(tuple(float(v) for v in p) for p in pts)
        if "seed" in kw:
            kw["seed"] = _check_seed(kw["seed"])
        for name in ("level", "mars_x3_center", "test_fraction"):
            if name in kw:
                kw[name] = float(kw[name])
        if "n_in" in kw and kw["n_in"] is not None:
            kw["n_in"] = _pos_int("n_in", kw["n_in"])
        if "generator" in kw and not isinstance(kw["generator"], str):
            raise ConfigError("generator must be a string")
        cfg = ExperimentConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.n < 2:
        raise ConfigError("n must be >= 2")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_json(obj)
