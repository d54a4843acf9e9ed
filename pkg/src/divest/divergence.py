"""Divergence estimators: adaptive KL, Hellinger, chi-square, and plug-in baselines.

The adaptive estimators work on three-fold split Poissonized counts. Each
symbol is routed by the third split part into a smooth regime (bias-corrected
plug-in) or a non-smooth regime (unbiased estimate of a polynomial surrogate
whose coefficients come from :mod:`divest.approx`). All per-symbol terms are
aggregated with exact summation (math.fsum), so results do not depend on
evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from . import approx
from .errors import DimensionMismatch, EmptyInput, EmptyP, RateTooSmall
from .unbiased import (ScaledPolyEstimator, unbiased_poly_estimate,
                       unbiased_poly_estimate_vec)


@dataclass
class Histogram:
    """Observed symbol counts with the nominal Poisson sampling rate."""

    counts: np.ndarray
    rate: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if self.rate < 1:
            raise ValueError("rate must be >= 1")

    @property
    def dim(self) -> int:
        return int(self.counts.size)

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class SplitSamples:
    """Three independent sub-histograms from thinning one Poissonized sample.

    ``rate`` is the effective per-part rate (one third of the input rate,
    carried as a real number); every threshold, degree, and lattice spacing
    downstream is expressed in terms of it.
    """

    parts: tuple[Histogram, Histogram, Histogram]
    rate: float

    def __post_init__(self):
        dims = {p.dim for p in self.parts}
        if len(dims) != 1:
            raise DimensionMismatch("split parts must share symbol dimension")
        if not self.rate >= 1:
            raise RateTooSmall(f"per-part rate must be >= 1, got {self.rate}")

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def freq(self, j: int) -> np.ndarray:
        """Empirical frequencies of part j on the 1/rate lattice."""
        return self.parts[j].counts / self.rate


class RegimeCounts(NamedTuple):
    smooth: int
    nonsmooth: int


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning constants shared by all adaptive estimators.

    ``c1`` scales the regime threshold c1*ln(n)/n, ``c2`` the polynomial
    degree round(c2*ln(n)); ``truncate`` clamps the non-smooth KL term. The
    defaults are practical desk-scale choices; the constants that appear in
    worst-case proofs are reachable by overriding.
    """

    c1: float = 1.0
    c2: float = 1.6
    truncate: float = 1.0
    min_degree: int = 2
    average_smooth_p: bool = False

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0 and self.truncate > 0):
            raise ValueError("c1, c2, truncate must be positive")
        if self.min_degree < 1:
            raise ValueError("min_degree must be >= 1")

    def threshold(self, rate: float) -> float:
        return self.c1 * math.log(rate) / rate

    def delta(self, rate: float) -> float:
        return 2.0 * self.c1 * math.log(rate) / rate

    def degree(self, rate: float) -> int:
        return max(self.min_degree, round(self.c2 * math.log(rate)))


@dataclass(frozen=True)
class DivergenceEstimate:
    """An estimate plus its per-symbol decomposition and regime tallies.

    ``value`` equals ``offset + fsum(per_symbol)`` where the offset is the
    estimator's additive constant (0 for KL, +1 for Hellinger, -1 for
    chi-square); ``regime_counts`` tallies smooth/non-smooth branch decisions.
    """

    value: float
    per_symbol: Optional[tuple[float, ...]]
    regime_counts: RegimeCounts
    offset: float = 0.0


class Regime:
    SMOOTH = "smooth"
    NONSMOOTH = "nonsmooth"


def classify_regime(qhat3: float, n: float, c1: float) -> str:
    """Non-smooth iff qhat3 <= c1 * ln(n) / n (boundary inclusive)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Regime.NONSMOOTH if qhat3 <= c1 * math.log(n) / n else Regime.SMOOTH


# ---------------------------------------------------------------------------
# coefficient assembly (memoized per rate/config)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _kl_nonsmooth_estimator(n: float, c1: float, c2: float, min_degree: int) -> ScaledPolyEstimator:
    # coefficients of the log surrogate: degree-(K+1) best approximation of
    # x ln x on [0,1], constant dropped, divided by x, rescaled to [0, delta];
    # the interval's log scale folds into the linear term
    cfg = EstimatorConfig(c1=c1, c2=c2, min_degree=min_degree)
    K = cfg.degree(n)
    delta = cfg.delta(n)
    r = approx.xlogx_coeffs(K).poly.coeffs  # length K+2
    base = (r[1] + math.log(delta),) + tuple(r[2:])
    return ScaledPolyEstimator(base, rate=n, scale=delta)


@lru_cache(maxsize=256)
def _entropy_lower_estimator(m: float, c1: float, c2: float, min_degree: int) -> ScaledPolyEstimator:
    # best degree-K approximation of -x ln x on [0, delta_m], affinely
    # rescaled from [0,1], constant term dropped so unseen symbols give 0
    cfg = EstimatorConfig(c1=c1, c2=c2, min_degree=min_degree)
    K = cfg.degree(m)
    delta = cfg.delta(m)
    r = approx.xlogx_coeffs(K - 1).poly.coeffs  # degree K on [0,1]
    base = [0.0, -delta * (r[1] + math.log(delta))]
    base += [-delta * rk for rk in r[2:]]
    return ScaledPolyEstimator(tuple(base), rate=m, scale=delta)


@lru_cache(maxsize=256)
def _hellinger_estimator(l: float, c1: float, c2: float, min_degree: int) -> ScaledPolyEstimator:
    # sqrt surrogate: best degree-K approximation of sqrt on [0,1], constant
    # dropped, rescaled so the k-th coefficient carries delta**(1/2 - k)
    cfg = EstimatorConfig(c1=c1, c2=c2, min_degree=min_degree)
    K = cfg.degree(l)
    delta = cfg.delta(l)
    a = approx.sqrt_coeffs(K).poly.coeffs  # length K+1
    base = (0.0,) + tuple(math.sqrt(delta) * ak for ak in a[1:])
    return ScaledPolyEstimator(base, rate=l, scale=delta)


@lru_cache(maxsize=256)
def _chi2_nonsmooth_estimator(n: float, c1: float, c2: float, min_degree: int) -> ScaledPolyEstimator:
    cfg = EstimatorConfig(c1=c1, c2=c2, min_degree=min_degree)
    K = cfg.degree(n)
    delta = cfg.delta(n)
    base = tuple(b / delta for b in approx.cheb_inverse_scaled_coeffs(K))
    return ScaledPolyEstimator(base, rate=n, scale=delta)


def _cfg_key(cfg: EstimatorConfig):
    return cfg.c1, cfg.c2, cfg.min_degree


# ---------------------------------------------------------------------------
# per-symbol terms
# ---------------------------------------------------------------------------


def kl_smooth_term(phat1: float, qhat1: float, qhat2: float, n: float) -> float:
    """Order-three bias-corrected plug-in term for p*ln(q); 0 when qhat1 = 0."""
    if qhat1 == 0.0 or phat1 == 0.0:
        return 0.0
    d = qhat2 - qhat1
    q1 = qhat1
    corr = (math.log(q1) + d / q1 - d * d / (2 * q1**2) + 3 * qhat2 / (2 * n * q1**2)
            + d**3 / (3 * q1**3) - qhat2**2 / (n * q1**3) + 2 * qhat2 / (n**2 * q1**3))
    return phat1 * corr


def kl_nonsmooth_term(phat1: float, qhat1: float, n: float, cfg: EstimatorConfig) -> float:
    """Clamped unbiased evaluation of the log surrogate polynomial times phat1."""
    est = _kl_nonsmooth_estimator(n, *_cfg_key(cfg))
    raw = phat1 * unbiased_poly_estimate(est, qhat1)
    return min(max(raw, -cfg.truncate), cfg.truncate)


def entropy_upper(phat1: float, m: float) -> float:
    """-x ln x + 1/(2m), with 0 ln 0 := 0."""
    if phat1 < 0:
        raise ValueError("phat1 must be nonnegative")
    base = -phat1 * math.log(phat1) if phat1 > 0 else 0.0
    return base + 1.0 / (2.0 * m)


def entropy_lower(phat1: float, m: float, cfg: EstimatorConfig) -> float:
    """Unbiased polynomial part of the entropy estimator, clamped at 1."""
    est = _entropy_lower_estimator(m, *_cfg_key(cfg))
    return min(unbiased_poly_estimate(est, phat1), 1.0)


def hellinger_term(xhat1: float, xhat2: float, xhat3: float, l: float,
                   cfg: EstimatorConfig) -> float:
    """One side's sqrt factor: plug-in sqrt when smooth, clamped surrogate otherwise."""
    if xhat3 >= cfg.threshold(l):
        return math.sqrt(xhat2)
    est = _hellinger_estimator(l, *_cfg_key(cfg))
    raw = unbiased_poly_estimate(est, xhat1)
    return min(max(raw, -1.0), 1.0)


def chi2_smooth_term(phat1: float, qhat1: float, qhat2: float, m: float, n: float) -> float:
    """Order-three bias-corrected plug-in term for p^2/q; 0 when qhat1 = 0."""
    if qhat1 == 0.0:
        return 0.0
    pfac = phat1 * (phat1 - 1.0 / m)
    if pfac == 0.0:
        return 0.0
    d = qhat2 - qhat1
    q1 = qhat1
    corr = (1.0 / q1 - d / q1**2 + d * d / q1**3 - 4 * qhat2 / (n * q1**3)
            - d**3 / q1**4 + 3 * qhat2**2 / (n * q1**4) - 6 * qhat2 / (n**2 * q1**4))
    return pfac * corr


# ---------------------------------------------------------------------------
# adaptive estimators
# ---------------------------------------------------------------------------


def _check_pair(sp: SplitSamples, sq: SplitSamples) -> None:
    if sp.dim != sq.dim:
        raise DimensionMismatch(f"P side has {sp.dim} symbols, Q side {sq.dim}")
    if sp.rate < 2 or sq.rate < 2:
        raise RateTooSmall("per-part rates must be >= 2 for log-scale thresholds")


def _kl_smooth_vec(p_eff, q1, q2, n):
    q1g = np.where(q1 > 0, q1, 1.0)
    d = q2 - q1
    corr = (np.log(q1g) + d / q1g - d * d / (2 * q1g**2) + 3 * q2 / (2 * n * q1g**2)
            + d**3 / (3 * q1g**3) - q2**2 / (n * q1g**3) + 2 * q2 / (n**2 * q1g**3))
    return np.where(q1 > 0, p_eff * corr, 0.0)


def estimate_kl_adaptive(sp: SplitSamples, sq: SplitSamples,
                         cfg: EstimatorConfig = EstimatorConfig()) -> DivergenceEstimate:
    """Adaptive KL divergence estimate from split samples.

    Per symbol: an entropy part (polynomial lower part or -x ln x upper part,
    routed by the third P part) plus a cross part (clamped log surrogate in
    the non-smooth regime, order-three corrected plug-in otherwise, routed by
    the third Q part); the estimate negates the sum. Needs neither the
    support size nor a likelihood-ratio bound.
    """
    _check_pair(sp, sq)
    m, n = sp.rate, sq.rate
    p1, p2, p3 = sp.freq(0), sp.freq(1), sp.freq(2)
    q1, q2, q3 = sq.freq(0), sq.freq(1), sq.freq(2)

    ent_ns = p3 <= cfg.threshold(m)
    lower = np.minimum(
        unbiased_poly_estimate_vec(_entropy_lower_estimator(m, *_cfg_key(cfg)), p1), 1.0)
    p1g = np.where(p1 > 0, p1, 1.0)
    upper = -p1 * np.log(p1g) + 1.0 / (2.0 * m)
    entropy_part = np.where(ent_ns, lower, upper)

    div_ns = q3 <= cfg.threshold(n)
    raw_ns = p1 * unbiased_poly_estimate_vec(_kl_nonsmooth_estimator(n, *_cfg_key(cfg)), q1)
    t_ns = np.clip(raw_ns, -cfg.truncate, cfg.truncate)
    p_eff = 0.5 * (p1 + p2) if cfg.average_smooth_p else p1
    t_s = _kl_smooth_vec(p_eff, q1, q2, n)
    cross_part = np.where(div_ns, t_ns, t_s)

    per_symbol = -(entropy_part + cross_part)
    value = math.fsum(per_symbol)
    counts = RegimeCounts(smooth=int(np.sum(~div_ns)), nonsmooth=int(np.sum(div_ns)))
    return DivergenceEstimate(value, tuple(float(t) for t in per_symbol), counts)


def estimate_hellinger(sp: SplitSamples, sq: SplitSamples,
                       cfg: EstimatorConfig = EstimatorConfig()) -> DivergenceEstimate:
    """Squared Hellinger distance estimate: 1 minus the product of sqrt factors."""
    _check_pair(sp, sq)

    def side_terms(ss: SplitSamples) -> tuple[np.ndarray, np.ndarray]:
        l = ss.rate
        x1, x2, x3 = ss.freq(0), ss.freq(1), ss.freq(2)
        smooth = x3 >= cfg.threshold(l)
        raw = unbiased_poly_estimate_vec(_hellinger_estimator(l, *_cfg_key(cfg)), x1)
        surrogate = np.clip(raw, -1.0, 1.0)
        return np.where(smooth, np.sqrt(x2), surrogate), smooth

    tp, sm_p = side_terms(sp)
    tq, sm_q = side_terms(sq)
    per_symbol = -(tp * tq)
    value = 1.0 + math.fsum(per_symbol)
    smooth = int(np.sum(sm_p)) + int(np.sum(sm_q))
    counts = RegimeCounts(smooth=smooth, nonsmooth=2 * sp.dim - smooth)
    return DivergenceEstimate(value, tuple(float(t) for t in per_symbol), counts, offset=1.0)


def estimate_chi2(sp: SplitSamples, sq: SplitSamples,
                  cfg: EstimatorConfig = EstimatorConfig()) -> DivergenceEstimate:
    """Chi-square divergence estimate with the reciprocal surrogate in the
    non-smooth regime and an order-three corrected plug-in otherwise."""
    _check_pair(sp, sq)
    m, n = sp.rate, sq.rate
    p1 = sp.freq(0)
    q1, q2, q3 = sq.freq(0), sq.freq(1), sq.freq(2)

    smooth = q3 >= cfg.threshold(n)
    pfac = p1 * (p1 - 1.0 / m)
    q1g = np.where(q1 > 0, q1, 1.0)
    d = q2 - q1
    corr = (1.0 / q1g - d / q1g**2 + d * d / q1g**3 - 4 * q2 / (n * q1g**3)
            - d**3 / q1g**4 + 3 * q2**2 / (n * q1g**4) - 6 * q2 / (n**2 * q1g**4))
    t_s = np.where(q1 > 0, pfac * corr, 0.0)
    raw_ns = pfac * unbiased_poly_estimate_vec(_chi2_nonsmooth_estimator(n, *_cfg_key(cfg)), q1)
    t_ns = np.clip(raw_ns, -1.0, 1.0)

    per_symbol = np.where(smooth, t_s, t_ns)
    value = math.fsum(per_symbol) - 1.0
    counts = RegimeCounts(smooth=int(np.sum(smooth)), nonsmooth=int(np.sum(~smooth)))
    return DivergenceEstimate(value, tuple(float(t) for t in per_symbol), counts, offset=-1.0)


# ---------------------------------------------------------------------------
# plug-in baselines
# ---------------------------------------------------------------------------


def estimate_kl_plugin(hp: Histogram, hq: Histogram) -> float:
    """Plug-in KL with empirical P and the Q side floored at one lattice step.

    Q-side frequencies are counts/rate with zeros lifted to 1/rate, which
    keeps the estimate finite for every input with a nonzero P total.
    """
    if hp.dim != hq.dim:
        raise DimensionMismatch(f"P side has {hp.dim} symbols, Q side {hq.dim}")
    tp = hp.total()
    if tp == 0:
        raise EmptyP("plug-in KL needs at least one P-side observation")
    n = hq.rate
    phat = hp.counts / tp
    qfloor = np.maximum(hq.counts / n, 1.0 / n)
    mask = phat > 0
    terms = phat[mask] * np.log(phat[mask] / qfloor[mask])
    return math.fsum(terms)


def hellinger_plugin(hp: Histogram, hq: Histogram) -> float:
    """Plug-in squared Hellinger distance on the two empirical distributions."""
    if hp.dim != hq.dim:
        raise DimensionMismatch(f"P side has {hp.dim} symbols, Q side {hq.dim}")
    tp, tq = hp.total(), hq.total()
    if tp == 0 or tq == 0:
        raise EmptyInput("plug-in Hellinger needs observations on both sides")
    diff = np.sqrt(hp.counts / tp) - np.sqrt(hq.counts / tq)
    return 0.5 * math.fsum(diff * diff)


def chi2_plugin(hp: Histogram, hq: Histogram) -> float:
    """Plug-in chi-square with the same Q-side lattice floor as the KL plug-in."""
    if hp.dim != hq.dim:
        raise DimensionMismatch(f"P side has {hp.dim} symbols, Q side {hq.dim}")
    tp = hp.total()
    if tp == 0:
        raise EmptyInput("plug-in chi-square needs at least one P-side observation")
    n = hq.rate
    phat = hp.counts / tp
    qfloor = np.maximum(hq.counts / n, 1.0 / n)
    mask = phat > 0
    terms = phat[mask] ** 2 / qfloor[mask]
    return math.fsum(terms) - 1.0
