"""Variance estimators for ensemble predictions at a single query point.

All estimators consume the per-learner predictions ``h`` (length B) and the
inclusion counts ``N[i, b]`` of the plan that produced them.  Training points
never drawn (``N_i = 0``) carry no information about their conditional mean
and are left out of every per-point average.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .data_model import InclusionMatrix, Method, Mode, SubsamplePlan, VarianceReport


class EstimatorError(ValueError):
    pass


def _as_h(h_values, B: int | None = None) -> np.ndarray:
    h = np.asarray(h_values, dtype=np.float64).ravel()
    if B is not None and h.size != B:
        raise EstimatorError(f"expected {B} predictions, got {h.size}")
    if not np.all(np.isfinite(h)):
        raise EstimatorError("predictions must be finite")
    return h


def _dims(inclusion: InclusionMatrix) -> tuple[int, int, int]:
    cols = inclusion.col_sums
    k = int(cols[0])
    if np.any(cols != k):
        raise EstimatorError("inclusion matrix columns must share one subsample size")
    return inclusion.n, k, inclusion.B


def _check_dims(inclusion: InclusionMatrix, n, k, B) -> tuple[int, int, int]:
    dn, dk, dB = _dims(inclusion)
    for name, given, actual in (("n", n, dn), ("k", k, dk), ("B", B, dB)):
        if given is not None and given != actual:
            raise EstimatorError(f"{name}={given} does not match the inclusion matrix ({actual})")
    return dn, dk, dB


def total_variance(zeta1: float, zetakk: float, n: int, k: int, B: int) -> float:
    """Variance of the incomplete statistic: (k^2/n) zeta_1 + zeta_kk / B."""
    return k * k / n * zeta1 + zetakk / B


def zeta_kk_hat(h_values) -> float:
    h = _as_h(h_values)
    if h.size < 2:
        raise EstimatorError("need at least two learners")
    return float(np.var(h, ddof=1))


def point_means(h_values, inclusion: InclusionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Multiplicity-weighted mean prediction ``m_i`` of each sampled point.

    Returns ``(m, N, counts)`` restricted to points with ``N_i > 0``.
    """
    h = _as_h(h_values, inclusion.B)
    N = inclusion.row_sums
    keep = N > 0
    counts = inclusion.counts[keep].astype(np.float64)
    m = counts @ h / N[keep]
    return m, N[keep].astype(np.float64), counts


def _sampled_spread(m: np.ndarray) -> float:
    if m.size < 2:
        raise EstimatorError("fewer than two training points were ever sampled")
    return float(np.var(m, ddof=1))


def bm_zeta1(h_values, inclusion: InclusionMatrix) -> float:
    m, _, _ = point_means(h_values, inclusion)
    return _sampled_spread(m)


def bm_estimate(h_values, inclusion: InclusionMatrix) -> VarianceReport:
    n, k, B = _dims(inclusion)
    z1 = bm_zeta1(h_values, inclusion)
    zkk = zeta_kk_hat(h_values)
    return VarianceReport(Method.BM, z1, zkk, total_variance(z1, zkk, n, k, B), n, k, B)


def im_estimate(h_values, plan: SubsamplePlan) -> VarianceReport:
    """Two-level estimate: spread of group means and of all predictions."""
    if plan.mode is not Mode.IM_TWO_LEVEL:
        raise EstimatorError(f"IM needs an im_two_level plan, got {plan.mode.value}")
    h = _as_h(h_values, plan.B)
    n_out = plan.fixed_points.size
    sizes = np.bincount(plan.groups, minlength=n_out)
    if n_out < 2 or sizes.min() < 2:
        raise EstimatorError("IM needs n_out >= 2 and n_in >= 2")
    group_means = np.bincount(plan.groups, weights=h, minlength=n_out) / sizes
    grand = group_means.mean()
    z1 = float(np.sum((group_means - grand) ** 2) / (n_out - 1))
    zkk = float(np.sum((h - grand) ** 2) / (h.size - 1))
    return VarianceReport(Method.IM, z1, zkk, total_variance(z1, zkk, plan.n, plan.k, plan.B), plan.n, plan.k, plan.B)


def ij_estimate(h_values, inclusion: InclusionMatrix) -> float:
    """Infinitesimal jackknife: sum over points of cov(N_ib, h_b)^2, divisor B."""
    h = _as_h(h_values, inclusion.B)
    if h.size < 2:
        raise EstimatorError("need at least two learners")
    # sum_b (h_b - hbar) = 0, so centring N is unnecessary
    cov = inclusion.counts.astype(np.float64) @ (h - h.mean()) / h.size
    return float(cov @ cov)


def ij_report(h_values, inclusion: InclusionMatrix) -> VarianceReport:
    """IJ targets (k^2/n) zeta_1 directly; the Monte Carlo term zeta_kk/B is added."""
    n, k, B = _dims(inclusion)
    v = ij_estimate(h_values, inclusion)
    zkk = zeta_kk_hat(h_values)
    z1 = v * n / (k * k)
    return VarianceReport(Method.IJ, z1, zkk, total_variance(z1, zkk, n, k, B), n, k, B)


def corrected_v(h_values, inclusion: InclusionMatrix, n=None, k=None, B=None) -> VarianceReport:
    """ANOVA bias-corrected estimate of zeta_1.

    Each sampled point is a group whose members are its appearances (with
    multiplicity).  With ``K`` sampled points and ``C = B*k`` appearances::

        zeta_1 = (SS_tau - (K - 1) s2) / (C - sum N_i^2 / C),  s2 = SS_eps / (C - K)
    """
    n, k, B = _check_dims(inclusion, n, k, B)
    h = _as_h(h_values, B)
    m, N, counts = point_means(h, inclusion)
    K = m.size
    C = float(B * k)
    if K < 2:
        raise EstimatorError("fewer than two training points were ever sampled")
    if C <= K:
        raise EstimatorError(f"B*k = {B * k} must exceed the number of sampled points ({K})")
    grand = float(N @ m / C)
    ss_tau = float(N @ (m - grand) ** 2)
    ss_eps = float(np.sum(counts * (h[None, :] - m[:, None]) ** 2))
    s2 = ss_eps / (C - K)
    z1 = (ss_tau - (K - 1) * s2) / (C - float(N @ N) / C)
    zkk = zeta_kk_hat(h)
    return VarianceReport(
        Method.CORRECTED_V, z1, zkk, total_variance(z1, zkk, n, k, B), n, k, B,
        ss_tau=ss_tau, ss_eps=ss_eps, sigma_eps2_hat=s2,
    )


def _balanced_r(inclusion: InclusionMatrix) -> int:
    N = inclusion.row_sums
    r = int(N[0])
    if np.any(N != r):
        raise EstimatorError("plan is not balanced")
    if r <= 1:
        raise EstimatorError("balanced correction needs r > 1")
    return r


def corrected_v_simplified(h_values, inclusion: InclusionMatrix, n=None, k=None, B=None) -> float:
    """Balanced-plan shortcut: BM estimate minus (n / (k B)) zeta_kk."""
    n, k, B = _check_dims(inclusion, n, k, B)
    _balanced_r(inclusion)
    h = _as_h(h_values, B)
    return bm_zeta1(h, inclusion) - n / (k * B) * zeta_kk_hat(h)


def corrected_v_exact_form(h_values, inclusion: InclusionMatrix, n=None, k=None, B=None) -> float:
    """The balanced-plan expression before dropping O(1/r) terms; equals corrected_v.

    ``(1/(n-1) + 1/(n(r-1))) * SS_m - k/(r n (r-1)) * SS_h``.  Expanding
    ``SS_eps = k SS_h - r SS_m`` makes the SS_m coefficient positive.
    """
    n, k, B = _check_dims(inclusion, n, k, B)
    r = _balanced_r(inclusion)
    h = _as_h(h_values, B)
    m, _, _ = point_means(h, inclusion)
    ss_m = float(np.sum((m - m.mean()) ** 2))
    ss_h = float(np.sum((h - h.mean()) ** 2))
    return (1 / (n - 1) + 1 / (n * (r - 1))) * ss_m - k / (r * n * (r - 1)) * ss_h


def corrected_u(h_values, inclusion: InclusionMatrix, n=None, k=None, B=None) -> float:
    """Without-replacement correction: rescaled BM minus a shrunk Monte Carlo term."""
    n, k, B = _check_dims(inclusion, n, k, B)
    if k >= n:
        raise EstimatorError(f"corrected_u needs k < n (k={k}, n={n})")
    h = _as_h(h_values, B)
    inner = bm_zeta1(h, inclusion) - (n - k) / (k * B) * zeta_kk_hat(h)
    return n * (n - 1) / (n - k) ** 2 * inner


def corrected_u_report(h_values, inclusion: InclusionMatrix) -> VarianceReport:
    n, k, B = _dims(inclusion)
    z1 = corrected_u(h_values, inclusion)
    zkk = zeta_kk_hat(h_values)
    return VarianceReport(Method.CORRECTED_U, z1, zkk, total_variance(z1, zkk, n, k, B), n, k, B)


def corrected_ij(v_ij: float, n: int, k: int) -> float:
    if k >= n:
        raise EstimatorError(f"corrected_ij needs k < n (k={k}, n={n})")
    return v_ij * n * (n - 1) / (n - k) ** 2


def corrected_ij_report(h_values, inclusion: InclusionMatrix) -> VarianceReport:
    n, k, B = _dims(inclusion)
    v = corrected_ij(ij_estimate(h_values, inclusion), n, k)
    zkk = zeta_kk_hat(h_values)
    z1 = v * n / (k * k)
    return VarianceReport(Method.CORRECTED_IJ, z1, zkk, total_variance(z1, zkk, n, k, B), n, k, B)


def estimate(method: Method | str, h_values, plan: SubsamplePlan, inclusion: InclusionMatrix) -> VarianceReport:
    method = Method(method)
    if method is Method.IM:
        return im_estimate(h_values, plan)
    if method is Method.BM:
        return bm_estimate(h_values, inclusion)
    if method is Method.IJ:
        return ij_report(h_values, inclusion)
    if method is Method.CORRECTED_V:
        return corrected_v(h_values, inclusion)
    if method is Method.CORRECTED_U:
        return corrected_u_report(h_values, inclusion)
    return corrected_ij_report(h_values, inclusion)


@dataclass(frozen=True)
class IntervalEstimate:
    center: float
    half_width: float
    level: float
    variance_used: float
    clamped: bool = False

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def normal_quantile(q: float) -> float:
    return NormalDist().inv_cdf(q)


def confidence_interval(center: float, variance: float, level: float = 0.95) -> IntervalEstimate:
    """Normal interval ``center +- z * sqrt(max(variance, 0))``."""
    if not 0 < level < 1:
        raise EstimatorError("level must lie in (0, 1)")
    used = max(float(variance), 0.0)
    z = normal_quantile((1 + level) / 2)
    return IntervalEstimate(float(center), z * used ** 0.5, level, used, clamped=variance < 0)
