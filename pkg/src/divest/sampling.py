"""Synthetic distributions, Poissonized sampling, and three-fold splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .divergence import Histogram, SplitSamples
from .errors import InvalidParams

_SUM_TOL = 1e-12
_RATIO_SLACK = 1e-9


@dataclass
class DiscreteDistribution:
    """A probability vector: nonnegative entries summing to 1 (within 1e-12)."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise InvalidParams("probs must be a nonempty vector")
        if np.any(self.probs < 0):
            raise InvalidParams("probabilities must be nonnegative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > _SUM_TOL:
            raise InvalidParams(f"probabilities sum to {total!r}, not 1")

    @property
    def dim(self) -> int:
        return int(self.probs.size)


@dataclass
class DistributionPair:
    """A (P, Q) pair together with a certified likelihood-ratio bound."""

    p: DiscreteDistribution
    q: DiscreteDistribution
    u_bound: float

    def __post_init__(self):
        if self.p.dim != self.q.dim:
            raise InvalidParams("P and Q must share dimension")
        if self.u_bound < 1:
            raise InvalidParams("u_bound must be >= 1")
        bad = self.p.probs > self.u_bound * self.q.probs * (1.0 + _RATIO_SLACK)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InvalidParams(
                f"p_{i}/q_{i} = {self.p.probs[i] / self.q.probs[i]:.6g} exceeds u = {self.u_bound}")

    @property
    def dim(self) -> int:
        return self.p.dim


def philox_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator: independent reproducible stream per (seed, stream).

    Streams are spaced 2**128 apart in the Philox counter, so parallel trials
    can each own one without any chance of overlap.
    """
    bitgen = np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                              counter=int(stream) << 128)
    return np.random.Generator(bitgen)


def sample_poisson_histogram(d: DiscreteDistribution, rate: int, seed: int) -> Histogram:
    """Independent Poisson(rate * p_i) counts per symbol, deterministic in seed."""
    if rate < 1:
        raise ValueError("rate must be >= 1")
    rng = philox_stream(seed)
    return sample_poisson_histogram_rng(d, rate, rng)


def sample_poisson_histogram_rng(d: DiscreteDistribution, rate: int,
                                 rng: np.random.Generator) -> Histogram:
    counts = rng.poisson(rate * d.probs)
    return Histogram(counts, rate)


def split3(h: Histogram, seed: int) -> SplitSamples:
    """Thin each count into three parts by iid uniform trisection.

    The parts sum to the input counts exactly; when the input is Poissonized
    each part is marginally Poisson with one third of the rate. The effective
    per-part rate rate/3 is carried as a real number.
    """
    rng = philox_stream(seed)
    return split3_rng(h, rng)


def split3_rng(h: Histogram, rng: np.random.Generator) -> SplitSamples:
    parts = rng.multinomial(h.counts, [1.0 / 3.0] * 3)
    return SplitSamples(
        parts=tuple(Histogram(parts[:, j], h.rate) for j in range(3)),
        rate=h.rate / 3.0,
    )


def make_worst_case_pair(S: int, u: float) -> DistributionPair:
    """Uniform P against near-uniform Q with likelihood ratio u on S-1 symbols."""
    if S < 2 or u <= 1:
        raise InvalidParams("need S >= 2 and u > 1")
    if (S - 1) / (S * u) >= 1:
        raise InvalidParams("(S-1)/(S*u) must be < 1")
    p = np.full(S, 1.0 / S)
    q = np.full(S, 1.0 / (S * u))
    q[-1] = 1.0 - (S - 1) / (S * u)
    return DistributionPair(DiscreteDistribution(p), DiscreteDistribution(q), u)


def make_two_point_pair(S: int, u: float, eps: float) -> tuple[DistributionPair, DistributionPair]:
    """Two (P, Q) pairs whose divergence gap is at least eps**2 / 4.

    P is half-mass-on-last with the rest uniform; Q1 spreads 1/u uniformly
    over the first S-1 symbols; Q0 perturbs those alternately by (1 +/- eps).
    Requires odd S >= 3, eps in (0, 1/2), and u large enough that both pairs
    stay inside the likelihood-ratio class.
    """
    if S < 3 or S % 2 == 0:
        raise InvalidParams("S must be an odd integer >= 3")
    if not 0 < eps < 0.5:
        raise InvalidParams("eps must lie in (0, 1/2)")
    if u <= 1:
        raise InvalidParams("u must be > 1")
    head = S - 1
    p = np.full(S, 1.0 / (2 * head))
    p[-1] = 0.5
    q1 = np.full(S, 1.0 / (head * u))
    q1[-1] = 1.0 - 1.0 / u
    q0 = np.empty(S)
    q0[0:head:2] = (1.0 + eps) / (head * u)
    q0[1:head:2] = (1.0 - eps) / (head * u)
    q0[-1] = 1.0 - 1.0 / u
    dist_p = DiscreteDistribution(p)
    pair1 = DistributionPair(dist_p, DiscreteDistribution(q1), u)
    pair0 = DistributionPair(dist_p, DiscreteDistribution(q0), u)
    return pair1, pair0


# ---------------------------------------------------------------------------
# exact divergences of known pairs (fixture truths)
# ---------------------------------------------------------------------------


def kl_divergence_exact(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any((q == 0) & (p > 0)):
        return math.inf
    mask = p > 0
    return math.fsum(p[mask] * np.log(p[mask] / q[mask]))


def hellinger2_exact(p: np.ndarray, q: np.ndarray) -> float:
    diff = np.sqrt(np.asarray(p, dtype=float)) - np.sqrt(np.asarray(q, dtype=float))
    return 0.5 * math.fsum(diff * diff)


def chi2_divergence_exact(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any((q == 0) & (p > 0)):
        return math.inf
    mask = p > 0
    return math.fsum(p[mask] ** 2 / q[mask]) - 1.0


# ---------------------------------------------------------------------------
# distribution files: "symbol_index probability" lines, '#' comments
# ---------------------------------------------------------------------------


def load_distribution(path: str | Path) -> DiscreteDistribution:
    entries: dict[int, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidParams(f"{path}:{lineno}: expected 'symbol_index probability'")
        try:
            idx, prob = int(parts[0]), float(parts[1])
        except ValueError as exc:
            raise InvalidParams(f"{path}:{lineno}: {exc}") from exc
        if idx < 0:
            raise InvalidParams(f"{path}:{lineno}: negative symbol index")
        if idx in entries:
            raise InvalidParams(f"{path}:{lineno}: duplicate symbol index {idx}")
        entries[idx] = prob
    if not entries:
        raise InvalidParams(f"{path}: no probability entries")
    probs = np.zeros(max(entries) + 1)
    for idx, prob in entries.items():
        probs[idx] = prob
    return DiscreteDistribution(probs)


def save_distribution(d: DiscreteDistribution, path: str | Path) -> None:
    lines = [f"{i} {p:.17g}" for i, p in enumerate(d.probs)]
    Path(path).write_text("\n".join(lines) + "\n")
