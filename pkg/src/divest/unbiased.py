"""Unbiased estimation of monomials and polynomials of Poisson rates.

Under Poisson sampling with rate n, the product prod_{l<j} (xhat - l/n) is
the unique unbiased estimator of q**j when n*xhat ~ Poisson(n*q). Polynomial
estimators are stored against a scaled variable so that high-degree
coefficient sets stay evaluable without overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonLatticeInput

_LATTICE_TOL = 1e-9


def _check_lattice(xhat: float, n: float) -> None:
    if xhat < 0:
        raise NonLatticeInput(f"count-derived value must be nonnegative, got {xhat}")
    scaled = xhat * n
    if abs(scaled - round(scaled)) > _LATTICE_TOL * max(1.0, abs(scaled)):
        raise NonLatticeInput(f"{xhat} is not an integer multiple of 1/{n}")


def falling_factorial_estimate(xhat: float, j: int, n: float) -> float:
    """prod_{k=0}^{j-1} (xhat - k/n); the empty product (j=0) is 1.

    Unbiased for q**j when n*xhat ~ Poisson(n*q). Rejects non-lattice xhat
    rather than rounding: unbiasedness only holds on the lattice.
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    _check_lattice(xhat, n)
    out = 1.0
    for k in range(j):
        out *= xhat - k / n
    return out


@dataclass(frozen=True)
class ScaledPolyEstimator:
    """Falling-factorial polynomial estimator with a preconditioning scale.

    ``base_coeffs[k]`` multiplies prod_{l<k} ((xhat - l/n) / scale), making the
    whole object unbiased for the polynomial whose monomial coefficient of
    q**k is base_coeffs[k] * scale**(-k). Keeping coefficients against the
    scaled variable y = x/scale keeps every intermediate O(1)-sized at high
    degree.
    """

    base_coeffs: tuple[float, ...]
    rate: float
    scale: float

    def __post_init__(self):
        if self.rate < 1:
            raise ValueError("rate must be >= 1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not all(math.isfinite(c) for c in self.base_coeffs):
            raise ValueError("coefficients must be finite")

    def monomial_coeff(self, k: int) -> float:
        return self.base_coeffs[k] * self.scale ** (-k)


def unbiased_poly_estimate(est: ScaledPolyEstimator, xhat: float) -> float:
    """Evaluate the scaled falling-factorial sum at a lattice point.

    Accumulates sum_k base_coeffs[k] * prod_{l<k} ((xhat - l/n)/scale) with
    Neumaier-compensated summation across terms.
    """
    _check_lattice(xhat, est.rate)
    n, scale = est.rate, est.scale
    total = 0.0
    comp = 0.0
    term = 1.0
    for k, c in enumerate(est.base_coeffs):
        if k > 0:
            term *= (xhat - (k - 1) / n) / scale
        add = c * term
        s = total + add
        if abs(total) >= abs(add):
            comp += (total - s) + add
        else:
            comp += (add - s) + total
        total = s
    return total + comp


def unbiased_poly_estimate_vec(est: ScaledPolyEstimator, xhat: np.ndarray) -> np.ndarray:
    """Vectorized unbiased_poly_estimate over a lattice array (no lattice check)."""
    x = np.asarray(xhat, dtype=float)
    n, scale = est.rate, est.scale
    total = np.zeros_like(x)
    comp = np.zeros_like(x)
    term = np.ones_like(x)
    for k, c in enumerate(est.base_coeffs):
        if k > 0:
            term = term * ((x - (k - 1) / n) / scale)
        add = c * term
        s = total + add
        big = np.abs(total) >= np.abs(add)
        comp = comp + np.where(big, (total - s) + add, (add - s) + total)
        total = s
    return total + comp


def falling_factorial_second_moment(j: int, p: float, q: float, n: float) -> float:
    """Exact second moment of the unbiased estimator of (p-q)**j under Poisson(n*p).

    Closed form: sum_{k=0}^{j} C(j,k)^2 (p-q)^{2(j-k)} p^k k! / n^k. Serves as
    a variance oracle in tests; no sampling involved.
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    if p < 0 or q < 0:
        raise ValueError("p and q must be nonnegative")
    total = 0.0
    for k in range(j + 1):
        total += math.comb(j, k) ** 2 * (p - q) ** (2 * (j - k)) * p**k * math.factorial(k) / n**k
    return total
