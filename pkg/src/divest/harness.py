"""Monte Carlo risk evaluation and rate diagnostics.

Each grid point draws Poissonized datasets from a parametric fixture whose
true divergence is computed in closed form by direct summation, never
hard-coded. Trials own independent counter-based RNG streams, so running
them across any number of threads reproduces the same report bytes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .divergence import (EstimatorConfig, estimate_chi2, estimate_hellinger,
                         estimate_kl_adaptive, estimate_kl_plugin,
                         chi2_plugin, hellinger_plugin)
from .errors import InsufficientRows, InvalidParams, UnknownEstimator, UnknownFixture
from .sampling import (DiscreteDistribution, DistributionPair,
                       chi2_divergence_exact, hellinger2_exact,
                       kl_divergence_exact, load_distribution,
                       make_two_point_pair, make_worst_case_pair,
                       philox_stream, sample_poisson_histogram_rng, split3_rng)

CSV_HEADER = "estimator,S,m,n,u,mse,bias,variance,stderr_mse,trials"

# estimator id -> (truth kind, needs split samples)
ESTIMATORS = {
    "kl_adaptive": ("kl", True),
    "kl_plugin": ("kl", False),
    "hellinger": ("hellinger", True),
    "hellinger_plugin": ("hellinger", False),
    "chi2": ("chi2", True),
    "chi2_plugin": ("chi2", False),
}


@dataclass(frozen=True)
class GridPoint:
    S: int
    m: int
    n: int
    u: float


@dataclass(frozen=True)
class ExperimentSpec:
    fixture: str
    estimators: tuple[str, ...]
    grid: tuple[GridPoint, ...]
    trials: int
    seed: int
    cfg: EstimatorConfig = EstimatorConfig()
    fixture_params: tuple[tuple[str, str], ...] = ()
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParams("trials must be >= 1")
        if not self.grid:
            raise InvalidParams("grid must be non-empty")
        for est in self.estimators:
            if est not in ESTIMATORS:
                raise UnknownEstimator(f"unknown estimator id {est!r}")

    def params(self) -> dict[str, str]:
        return dict(self.fixture_params)


@dataclass(frozen=True)
class RiskRow:
    estimator: str
    S: int
    m: int
    n: int
    u: float
    mse: float
    bias: float
    variance: float
    stderr_mse: float
    trials: int


@dataclass(frozen=True)
class RiskReport:
    rows: tuple[RiskRow, ...] = field(default=())

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.estimator},{r.S},{r.m},{r.n},{r.u:.12g},{r.mse:.12g},"
                f"{r.bias:.12g},{r.variance:.12g},{r.stderr_mse:.12g},{r.trials}")
        return "\n".join(lines) + "\n"


def _fixture_uniform(g: GridPoint, params: dict[str, str]) -> DistributionPair:
    probs = np.full(g.S, 1.0 / g.S)
    d = DiscreteDistribution(probs)
    return DistributionPair(d, DiscreteDistribution(probs.copy()), 1.0)


def _fixture_worst_case(g: GridPoint, params: dict[str, str]) -> DistributionPair:
    return make_worst_case_pair(g.S, g.u)


def _fixture_two_point(which: int):
    def build(g: GridPoint, params: dict[str, str]) -> DistributionPair:
        eps = float(params.get("eps", 0.3))
        pairs = make_two_point_pair(g.S, g.u, eps)
        return pairs[which]

    return build


def _fixture_files(g: GridPoint, params: dict[str, str]) -> DistributionPair:
    try:
        p = load_distribution(params["p_file"])
        q = load_distribution(params["q_file"])
    except KeyError as exc:
        raise InvalidParams(f"files fixture needs p_file and q_file, missing {exc}") from exc
    if p.dim != g.S or q.dim != g.S:
        raise InvalidParams(f"loaded dimension {p.dim}/{q.dim} disagrees with grid S={g.S}")
    with np.errstate(divide="ignore"):
        ratios = np.where(p.probs > 0, p.probs / np.where(q.probs > 0, q.probs, np.inf), 0.0)
    u = max(1.0, float(np.max(ratios)))
    return DistributionPair(p, q, u)


FIXTURES = {
    "uniform": _fixture_uniform,
    "worst_case": _fixture_worst_case,
    "two_point_q1": _fixture_two_point(0),
    "two_point_q0": _fixture_two_point(1),
    "files": _fixture_files,
}


def resolve_fixture(name: str):
    try:
        return FIXTURES[name]
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r}") from None


def _truths(pair: DistributionPair) -> dict[str, float]:
    p, q = pair.p.probs, pair.q.probs
    return {
        "kl": kl_divergence_exact(p, q),
        "hellinger": hellinger2_exact(p, q),
        "chi2": chi2_divergence_exact(p, q),
    }


def _run_trial(pair: DistributionPair, g: GridPoint, estimators: tuple[str, ...],
               cfg: EstimatorConfig, seed: int, stream: int) -> dict[str, float]:
    # one dataset per trial, shared by all estimators; the draw order is fixed
    # so adding or removing estimators never changes another estimator's value
    rng = philox_stream(seed, stream)
    hp = sample_poisson_histogram_rng(pair.p, g.m, rng)
    hq = sample_poisson_histogram_rng(pair.q, g.n, rng)
    sp = split3_rng(hp, rng)
    sq = split3_rng(hq, rng)
    out = {}
    for est in estimators:
        if est == "kl_adaptive":
            out[est] = estimate_kl_adaptive(sp, sq, cfg).value
        elif est == "kl_plugin":
            out[est] = estimate_kl_plugin(hp, hq)
        elif est == "hellinger":
            out[est] = estimate_hellinger(sp, sq, cfg).value
        elif est == "hellinger_plugin":
            out[est] = hellinger_plugin(hp, hq)
        elif est == "chi2":
            out[est] = estimate_chi2(sp, sq, cfg).value
        elif est == "chi2_plugin":
            out[est] = chi2_plugin(hp, hq)
    return out


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def summarize_errors(estimates: list[float], truth: float) -> tuple[float, float, float, float]:
    """(mse, bias, variance, stderr_mse) from one trial set.

    The decomposition mse = bias**2 + variance is exact by construction:
    variance is the population variance of the same trials. The MSE standard
    error is the standard error of the mean of the squared errors.
    """
    errs = [e - truth for e in estimates]
    sq = [e * e for e in errs]
    mse = _mean(sq)
    bias = _mean(errs)
    variance = mse - bias * bias
    t = len(errs)
    if t >= 2:
        var_sq = math.fsum((s - mse) ** 2 for s in sq) / (t - 1)
        stderr = math.sqrt(var_sq / t)
    else:
        stderr = math.nan
    return mse, bias, variance, stderr


def run_risk_experiment(spec: ExperimentSpec) -> RiskReport:
    """Monte Carlo risk table over the experiment grid; deterministic in seed."""
    build = resolve_fixture(spec.fixture)
    params = spec.params()
    rows: list[RiskRow] = []
    for gi, g in enumerate(spec.grid):
        pair = build(g, params)
        truths = _truths(pair)
        streams = [gi * spec.trials + t for t in range(spec.trials)]

        def job(stream, _g=g, _pair=pair):
            return _run_trial(_pair, _g, spec.estimators, spec.cfg, spec.seed, stream)

        if spec.threads > 1:
            with ThreadPoolExecutor(max_workers=spec.threads) as pool:
                trial_results = list(pool.map(job, streams))
        else:
            trial_results = [job(s) for s in streams]

        for est in spec.estimators:
            truth = truths[ESTIMATORS[est][0]]
            estimates = [tr[est] for tr in trial_results]
            mse, bias, variance, stderr = summarize_errors(estimates, truth)
            rows.append(RiskRow(est, g.S, g.m, g.n, g.u, mse, bias, variance,
                                stderr, spec.trials))
    return RiskReport(tuple(rows))


def rate_fit(report: RiskReport, estimator: str, axis: str) -> tuple[float, float]:
    """Least-squares slope and r^2 of log(mse) against log(axis) for one estimator.

    Requires at least three rows for the estimator that differ only along the
    chosen axis.
    """
    if axis not in ("n", "m", "S"):
        raise ValueError("axis must be one of 'n', 'm', 'S'")
    rows = [r for r in report.rows if r.estimator == estimator]
    if len(rows) < 3:
        raise InsufficientRows(f"need >= 3 rows for {estimator!r}, have {len(rows)}")
    others = [a for a in ("S", "m", "n", "u") if a != axis]
    for a in others:
        vals = {getattr(r, a) for r in rows}
        if len(vals) != 1:
            raise InsufficientRows(f"rows vary along {a!r} as well as {axis!r}")
    x = np.log([getattr(r, axis) for r in rows])
    y = np.log([max(r.mse, 1e-300) for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


# ---------------------------------------------------------------------------
# experiment spec files: "key = value" lines, '#' comments
# ---------------------------------------------------------------------------

_CFG_KEYS = {"c1": float, "c2": float, "truncate": float, "min_degree": int}
_FIXTURE_KEYS = ("eps", "p_file", "q_file")


def parse_experiment_spec(text: str) -> ExperimentSpec:
    """Parse the simulate config format (see README for the key list)."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParams(f"spec line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()

    missing = [k for k in ("fixture", "estimators", "grid", "trials", "seed") if k not in pairs]
    if missing:
        raise InvalidParams(f"spec is missing keys: {', '.join(missing)}")

    grid = []
    for chunk in pairs["grid"].split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        fields = {}
        for token in chunk.split():
            if ":" not in token:
                raise InvalidParams(f"grid token {token!r} must look like S:200")
            k, v = token.split(":", 1)
            fields[k] = v
        try:
            grid.append(GridPoint(S=int(fields["S"]), m=int(fields["m"]),
                                  n=int(fields["n"]), u=float(fields.get("u", "1"))))
        except KeyError as exc:
            raise InvalidParams(f"grid entry {chunk!r} is missing {exc}") from exc

    cfg_kwargs = {k: conv(pairs[k]) for k, conv in _CFG_KEYS.items() if k in pairs}
    fixture_params = tuple((k, pairs[k]) for k in _FIXTURE_KEYS if k in pairs)
    estimators = tuple(e.strip() for e in pairs["estimators"].split(",") if e.strip())

    return ExperimentSpec(
        fixture=pairs["fixture"],
        estimators=estimators,
        grid=tuple(grid),
        trials=int(pairs["trials"]),
        seed=int(pairs["seed"]),
        cfg=EstimatorConfig(**cfg_kwargs),
        fixture_params=fixture_params,
        threads=int(pairs.get("threads", "1")),
    )
