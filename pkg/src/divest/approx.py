"""Best uniform polynomial approximation and special polynomial constructions.

Everything here is data-independent: estimators consume the coefficient sets
produced by this module, which are computed offline (and cached on disk) via
the Remez exchange algorithm or, for the reciprocal surrogate, by exact
Chebyshev coefficient extraction.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import InvalidDomain, NonConvergence

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_SPLITTER = 134217729.0  # 2**27 + 1, Dekker coefficient splitting


@dataclass(frozen=True)
class Interval:
    """A finite approximation interval [lo, hi] with lo < hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidDomain(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise InvalidDomain(f"interval must satisfy lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _two_sum(a, b):
    s = a + b
    t = s - a
    return s, (a - (s - t)) + (b - t)


def _two_prod(a, b):
    p = a * b
    ca = _SPLITTER * a
    ahi = ca - (ca - a)
    alo = a - ahi
    cb = _SPLITTER * b
    bhi = cb - (cb - b)
    blo = b - bhi
    return p, ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def compensated_horner(coeffs: Sequence[float], x):
    """Evaluate sum(coeffs[k] * x**k) by Horner's scheme with EFT compensation.

    Behaves as if the recurrence ran in roughly twice the working precision,
    which matters for the ill-conditioned monomial coefficient sets produced
    by high-degree constructions. Accepts scalar or ndarray ``x``.
    """
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        out = np.zeros_like(xs)
        return float(out[0]) if scalar else out
    acc = np.full_like(xs, c[-1])
    comp = np.zeros_like(xs)
    for k in range(c.size - 2, -1, -1):
        prod, perr = _two_prod(acc, xs)
        acc, serr = _two_sum(prod, c[k])
        comp = comp * xs + (perr + serr)
    out = acc + comp
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class Polynomial:
    """A polynomial in the monomial basis over a stated interval.

    ``coeffs[k]`` is the coefficient of ``x**k``. Evaluation always uses the
    compensated Horner scheme on the raw variable; callers needing a scaled
    variable pre-scale their coefficients.
    """

    coeffs: tuple[float, ...]
    domain: Interval

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise InvalidDomain("polynomial needs at least one coefficient")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise InvalidDomain("polynomial coefficients must be finite")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return compensated_horner(self.coeffs, x)


@dataclass(frozen=True)
class ApproxResult:
    """A converged best uniform approximation with its certificate.

    ``equioscillation_points`` are the degree+2 locations where the residual
    f - poly alternates in sign; ``residuals`` holds the signed residual
    values recorded there at convergence (computed from the well-conditioned
    internal representation, before monomial conversion).
    """

    poly: Polynomial
    levelled_error: float
    equioscillation_points: tuple[float, ...]
    iterations: int
    residuals: tuple[float, ...] = field(default=())


def chebyshev_T(K: int, x: float) -> float:
    """First-kind Chebyshev polynomial T_K(x) by the three-term recurrence.

    The recurrence extends T_K beyond [-1, 1] as the same polynomial.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    if K == 0:
        return 1.0
    tkm1, tk = 1.0, float(x)
    for _ in range(K - 1):
        tkm1, tk = tk, 2.0 * x * tk - tkm1
    return tk


def w_bound(s: float) -> float:
    """Piecewise envelope s/e below e, ln s above; continuous and nondecreasing."""
    if s <= 0:
        raise ValueError("s must be positive")
    return s / math.e if s <= math.e else math.log(s)


def _golden_max(g: Callable[[float], float], lo: float, hi: float, xtol: float):
    """Golden-section maximization of g on [lo, hi]; derivative-free."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > xtol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)
    xm = 0.5 * (a + b)
    return xm, g(xm)


def _alternating_extrema(err, lo, hi, ref, target, oversample):
    """Locate alternating local extrema of err between the reference points.

    Samples ``oversample`` points per gap of the current reference, groups the
    samples into maximal sign runs, and refines the best point of each run by
    golden-section search. Returns (points, values) or None when fewer than
    ``target`` sign runs were resolved.
    """
    knots = np.unique(np.concatenate(([lo], np.asarray(ref, dtype=float), [hi])))
    pieces = [np.linspace(knots[i], knots[i + 1], oversample + 1) for i in range(len(knots) - 1)]
    grid = np.unique(np.concatenate(pieces))
    vals = np.array([err(x) for x in grid])

    signs = np.sign(vals)
    for i in range(1, len(signs)):  # zeros inherit the previous sign
        if signs[i] == 0:
            signs[i] = signs[i - 1]
    if signs[0] == 0:
        signs[0] = 1.0

    runs = []
    start = 0
    for i in range(1, len(grid) + 1):
        if i == len(grid) or signs[i] != signs[start]:
            runs.append((start, i))
            start = i
    if len(runs) < target:
        return None

    xtol = (hi - lo) * 1e-14
    pts, resid = [], []
    for a, b in runs:
        seg = np.abs(vals[a:b])
        j = a + int(np.argmax(seg))
        s = signs[j]
        bl = grid[max(j - 1, 0)]
        br = grid[min(j + 1, len(grid) - 1)]
        if br > bl:
            x, v = _golden_max(lambda t: s * err(t), bl, br, xtol)
            pts.append(x)
            resid.append(s * v)
        else:
            pts.append(grid[j])
            resid.append(vals[j])

    # trim from the ends, keeping the largest residuals, until target remains
    while len(pts) > target:
        if abs(resid[0]) <= abs(resid[-1]):
            pts.pop(0)
            resid.pop(0)
        else:
            pts.pop()
            resid.pop()
    if len(pts) < target or any(pts[i] >= pts[i + 1] for i in range(len(pts) - 1)):
        return None
    return np.array(pts), np.array(resid)


def _as_monomial(cheb) -> tuple[float, ...]:
    # target domain [-1,1] == window, i.e. coefficients in the raw variable
    poly = cheb.convert(kind=np.polynomial.Polynomial)
    return tuple(float(c) for c in poly.coef)


def remez_best_approx(f: Callable[[float], float], K: int, domain: Interval,
                      tol: float = 1e-10, max_iter: int = 100) -> ApproxResult:
    """Best uniform degree-K approximation of f on the domain, by Remez exchange.

    Uses a Chebyshev-basis trial polynomial for conditioning, a full
    (multi-point) exchange per iteration, and declares convergence when the
    relative spread of the residual magnitudes over the reference set drops
    below ``tol``. Residual extrema are located by golden-section refinement
    on a 20x oversampled grid between reference points.

    Raises NonConvergence (carrying the last iterate) past ``max_iter``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = domain.lo, domain.hi
    npts = K + 2
    # Chebyshev extrema of the domain, ascending
    j = np.arange(npts)
    ref = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(math.pi * (npts - 1 - j) / (npts - 1))
    ref[0], ref[-1] = lo, hi

    fscale = max(abs(f(lo)), abs(f(hi)), abs(f(0.5 * (lo + hi))), 1e-300)
    abs_floor = 1e-14 * max(1.0, fscale)
    signs = np.array([(-1.0) ** i for i in range(npts)])

    cheb = None
    last = None
    for it in range(1, max_iter + 1):
        fvals = np.array([f(x) for x in ref])
        design = np.empty((npts, npts))
        u = (2.0 * ref - (lo + hi)) / (hi - lo)
        design[:, 0] = 1.0
        if K >= 1:
            design[:, 1] = u
        for k in range(2, K + 1):
            design[:, k] = 2.0 * u * design[:, k - 1] - design[:, k - 2]
        design[:, K + 1] = signs
        sol = np.linalg.solve(design, fvals)
        cheb = npcheb.Chebyshev(sol[: K + 1], domain=[lo, hi])

        def err(x, _c=cheb):
            return f(x) - _c(x)

        found = None
        over = 20
        for _ in range(3):
            found = _alternating_extrema(err, lo, hi, ref, npts, over)
            if found is not None:
                break
            over *= 5
        if found is None:
            emax_ref = float(np.max(np.abs(fvals - design[:, : K + 1] @ sol[: K + 1])))
            if emax_ref <= abs_floor:  # f is (numerically) a degree-K polynomial
                resid = fvals - design[:, : K + 1] @ sol[: K + 1]
                return ApproxResult(Polynomial(_as_monomial(cheb), domain), emax_ref,
                                    tuple(ref), it, tuple(resid))
            raise NonConvergence("could not resolve an alternating reference set",
                                 result=last, spread=None)

        pts, resid = found
        emax = float(np.max(np.abs(resid)))
        emin = float(np.min(np.abs(resid)))
        last = ApproxResult(Polynomial(_as_monomial(cheb), domain), emax,
                            tuple(pts), it, tuple(resid))
        if emax <= abs_floor or (emax - emin) <= tol * emax:
            return last
        ref = pts

    raise NonConvergence(f"no convergence after {max_iter} iterations",
                         result=last, spread=(emax - emin) / emax)


# ---------------------------------------------------------------------------
# named targets with on-disk coefficient cache
# ---------------------------------------------------------------------------

CACHE_ENV = "DIVEST_CACHE_DIR"


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "divest"


def _cache_path(target: str, K: int, domain: Interval) -> Path:
    tag = f"{target}-K{K}-{domain.lo:.17g}-{domain.hi:.17g}"
    tag = tag.replace("+", "").replace(".", "_")
    return cache_dir() / f"{tag}.coeffs"


def _cache_write(path: Path, target: str, K: int, result: ApproxResult) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"target {target}",
        f"K {K}",
        f"lo {result.poly.domain.lo:.17g}",
        f"hi {result.poly.domain.hi:.17g}",
        f"error {result.levelled_error:.17g}",
        f"iterations {result.iterations}",
    ]
    lines += [f"coeff {k} {c:.17g}" for k, c in enumerate(result.poly.coeffs)]
    lines += [f"point {x:.17g}" for x in result.equioscillation_points]
    lines += [f"residual {r:.17g}" for r in result.residuals]
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)  # atomic: readers never see partial files
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cache_read(path: Path) -> Optional[ApproxResult]:
    try:
        text = path.read_text()
    except OSError:
        return None
    fields: dict[str, str] = {}
    coeffs: list[float] = []
    points: list[float] = []
    residuals: list[float] = []
    try:
        for line in text.splitlines():
            if not line.strip():
                continue
            parts = line.split()
            if parts[0] == "coeff":
                coeffs.append(float(parts[2]))
            elif parts[0] == "point":
                points.append(float(parts[1]))
            elif parts[0] == "residual":
                residuals.append(float(parts[1]))
            else:
                fields[parts[0]] = parts[1]
        domain = Interval(float(fields["lo"]), float(fields["hi"]))
        return ApproxResult(Polynomial(tuple(coeffs), domain), float(fields["error"]),
                            tuple(points), int(fields["iterations"]), tuple(residuals))
    except (KeyError, IndexError, ValueError, InvalidDomain):
        return None  # corrupt record: recompute


def _cached_remez(target: str, f, K: int, degree: int, domain: Interval) -> ApproxResult:
    path = _cache_path(target, K, domain)
    hit = _cache_read(path)
    if hit is not None and hit.poly.degree == degree:
        return hit
    result = remez_best_approx(f, degree, domain, tol=1e-10)
    _cache_write(path, target, K, result)
    return result


def _xlogx(x: float) -> float:
    # continuous extension at 0; Remez only needs continuity
    return x * math.log(x) if x > 0.0 else 0.0


def xlogx_coeffs(K: int) -> ApproxResult:
    """Best uniform degree-(K+1) approximation of x*ln(x) on [0, 1], cached.

    The K+2 monomial coefficients feed the non-smooth log-divergence term
    after rescaling; index 1 absorbs the interval's log scale there.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    return _cached_remez("xlogx", _xlogx, K, K + 1, Interval(0.0, 1.0))


def sqrt_coeffs(K: int) -> ApproxResult:
    """Best uniform degree-K approximation of sqrt(x) on [0, 1], cached."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return _cached_remez("sqrt", math.sqrt, K, K, Interval(0.0, 1.0))


def log_coeffs(K: int, domain: Interval) -> ApproxResult:
    """Best uniform degree-K approximation of ln(x) on a positive interval, cached."""
    if K < 0:
        raise ValueError("K must be >= 0")
    if domain.lo <= 0:
        raise InvalidDomain("log approximation needs lo > 0")
    return _cached_remez("log", math.log, K, max(K, 0), domain)


def _cheb_int_coeffs(N: int) -> list[int]:
    """Monomial coefficients of T_N as exact integers, ascending order."""
    if N == 0:
        return [1]
    prev, cur = [1], [0, 1]
    for _ in range(N - 1):
        nxt = [0] + [2 * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    return cur


def cheb_inverse_scaled_coeffs(K: int) -> tuple[float, ...]:
    """Unit-variable coefficients b_0..b_K of the reciprocal surrogate.

    Extracts the even polynomial S with T_{2(K+2)}(y) = S(y) y^4
    - 2 (-1)^K (K+2)^2 y^2 + (-1)^K from exact integer Chebyshev coefficients;
    b_j is the coefficient of (x/delta)^j in delta * Q_K, independent of
    delta (Q_K itself scales like 1/x, hence carries an extra 1/delta).
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    t = _cheb_int_coeffs(2 * (K + 2))
    sign = -1 if K % 2 else 1
    # sanity of the identity on the low-order terms
    assert t[0] == sign and t[1] == 0 and t[3] == 0
    assert t[2] == -2 * sign * (K + 2) ** 2
    denom = 2 * (K + 2) ** 2
    return tuple(sign * t[2 * j + 4] / denom for j in range(K + 1))


def cheb_inverse_poly(K: int, delta: float) -> Polynomial:
    """Degree-K polynomial Q_K on [0, delta] with sup x^2 |1/x - Q_K(x)| = delta/(K+2)^2.

    Built from the exact Chebyshev identity, so the stated sup holds as an
    equality rather than a bound. Exporting monomial coefficients rounds each
    to float64; certify the identity itself with
    :func:`cheb_inverse_identity_gap`, which keeps the integer core exact.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    scaled = cheb_inverse_scaled_coeffs(K)
    coeffs = tuple(b / delta ** (j + 1) for j, b in enumerate(scaled))
    return Polynomial(coeffs, Interval(0.0, delta))


def cheb_inverse_identity_gap(K: int, delta: float, x) -> np.ndarray:
    """x^2 |1/x - Q_K(x)| evaluated through the exact integer coefficient core.

    The extracted coefficients are integers representable exactly in float64
    (checked), so the only rounding is the final scaling; this is the path to
    use when certifying the exact-error identity to tight tolerances.
    """
    t = _cheb_int_coeffs(2 * (K + 2))
    core = [t[2 * j + 4] for j in range(K + 1)]
    assert all(abs(c) <= 2**53 for c in core), "integer coefficients exceed float64 exactness"
    sign = -1.0 if K % 2 else 1.0
    xs = np.asarray(x, dtype=float)
    s = compensated_horner([float(c) for c in core], xs / delta)
    q = sign * s / (2.0 * (K + 2) ** 2 * delta)
    return np.abs(xs - xs * xs * q)


def bernstein_apply(f: Callable[[float], float], n: int, x: float) -> float:
    """Evaluate the degree-n Bernstein operator of f at x in [0, 1].

    Binomial weights are formed in the log domain (gammaln) so the operator
    stays usable up to n ~ 1e4.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return float(f(0.0))
    if x == 1.0:
        return float(f(1.0))
    from scipy.special import gammaln

    i = np.arange(n + 1)
    logw = (gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
            + i * math.log(x) + (n - i) * math.log1p(-x))
    w = np.exp(logw)
    w /= w.sum()
    fvals = np.array([f(k / n) for k in i])
    return float(w @ fvals)
