"""Command-line surface: estimate, simulate, approx dump, selftest."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import approx
from .divergence import (EstimatorConfig, Histogram, chi2_plugin,
                         estimate_chi2, estimate_hellinger,
                         estimate_kl_adaptive, estimate_kl_plugin,
                         hellinger_plugin)
from .errors import DivestError
from .harness import parse_experiment_spec, run_risk_experiment
from .sampling import split3
from .unbiased import falling_factorial_estimate


def read_histogram_file(path: str | Path) -> dict[str, int]:
    """Parse 'symbol count' lines; '#' starts a comment."""
    out: dict[str, int] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DivestError(f"{path}:{lineno}: expected 'symbol count'")
        symbol, count = parts[0], parts[1]
        try:
            value = int(count)
        except ValueError as exc:
            raise DivestError(f"{path}:{lineno}: count must be an integer") from exc
        if value < 0:
            raise DivestError(f"{path}:{lineno}: count must be nonnegative")
        if symbol in out:
            raise DivestError(f"{path}:{lineno}: duplicate symbol {symbol!r}")
        out[symbol] = value
    return out


def write_histogram_file(counts: dict[str, int], path: str | Path) -> None:
    lines = [f"{symbol} {count}" for symbol, count in counts.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def align_histograms(cp: dict[str, int], cq: dict[str, int]) -> tuple[Histogram, Histogram]:
    """Union-align two symbol->count maps; missing symbols count zero.

    The nominal rate of each side is its total count (ingested data carries
    no separate rate), so plug-in floors sit at one over the observed total.
    """
    symbols = sorted(set(cp) | set(cq))
    if not symbols:
        raise DivestError("both histogram files are empty")
    p = np.array([cp.get(s, 0) for s in symbols], dtype=np.int64)
    q = np.array([cq.get(s, 0) for s in symbols], dtype=np.int64)
    return (Histogram(p, max(int(p.sum()), 1)), Histogram(q, max(int(q.sum()), 1)))


def _cmd_estimate(args) -> int:
    hp, hq = align_histograms(read_histogram_file(args.p), read_histogram_file(args.q))
    if args.plugin:
        value = {
            "kl": estimate_kl_plugin,
            "hellinger": hellinger_plugin,
            "chi2": chi2_plugin,
        }[args.divergence](hp, hq)
    else:
        cfg = EstimatorConfig(c1=args.c1, c2=args.c2, truncate=args.truncate)
        sp = split3(hp, args.seed)
        sq = split3(hq, args.seed + 1)
        est = {
            "kl": estimate_kl_adaptive,
            "hellinger": estimate_hellinger,
            "chi2": estimate_chi2,
        }[args.divergence](sp, sq, cfg)
        value = est.value
    print(f"{value:.12g}")
    return 0


def _cmd_simulate(args) -> int:
    spec = parse_experiment_spec(Path(args.spec).read_text())
    report = run_risk_experiment(spec)
    Path(args.out).write_bytes(report.to_csv().encode("ascii"))
    return 0


def _cmd_approx_dump(args) -> int:
    target, k = args.target, args.degree
    if target == "invx":
        if args.hi is None:
            raise DivestError("invx needs --hi (the interval is [0, hi])")
        poly = approx.cheb_inverse_poly(k, args.hi)
        coeffs, error = poly.coeffs, args.hi / (k + 2) ** 2
    elif target == "log":
        if args.lo is None or args.hi is None:
            raise DivestError("log needs --lo and --hi with 0 < lo < hi")
        result = approx.log_coeffs(k, approx.Interval(args.lo, args.hi))
        coeffs, error = result.poly.coeffs, result.levelled_error
    elif target == "xlogx":
        result = approx.xlogx_coeffs(k)
        coeffs, error = result.poly.coeffs, result.levelled_error
    else:  # sqrt
        result = approx.sqrt_coeffs(k)
        coeffs, error = result.poly.coeffs, result.levelled_error
    for i, c in enumerate(coeffs):
        print(f"{i},{c:.17g}")
    print(f"error,{error:.17g}")
    return 0


def _selftest_checks():
    yield "chebyshev recurrence matches cos(K acos x)", lambda: all(
        abs(approx.chebyshev_T(k, x) - math.cos(k * math.acos(x))) < 1e-12
        for k in (0, 1, 2, 5, 9) for x in (-1.0, -0.3, 0.0, 0.5, 1.0))

    def check_inverse_identity():
        for k in (0, 1, 3, 6):
            for delta in (1.0, 0.01):
                poly = approx.cheb_inverse_poly(k, delta)
                x = np.linspace(delta / 20000, delta, 20000)
                sup = float(np.max(np.abs(x - x * x * poly(x))))
                if abs(sup - delta / (k + 2) ** 2) > 1e-9 * delta / (k + 2) ** 2:
                    return False
        return True

    yield "reciprocal surrogate exact-error identity", check_inverse_identity

    def check_unbiased():
        from scipy.stats import poisson
        for n, q in ((20, 0.1), (50, 0.5)):
            kk = np.arange(0, int(n * q + 40 * math.sqrt(n * q) + 40))
            pmf = poisson.pmf(kk, n * q)
            for j in (0, 1, 2, 4):
                val = math.fsum(pmf[i] * falling_factorial_estimate(k / n, j, n)
                                for i, k in enumerate(kk))
                if abs(val - q**j) > 1e-10:
                    return False
        return True

    yield "falling factorials unbiased under Poisson", check_unbiased

    def check_wbound():
        grid = np.linspace(0.01, 20.0, 500)
        vals = [approx.w_bound(s) for s in grid]
        mono = all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
        cont = abs(approx.w_bound(math.e) - 1.0) < 1e-15
        return mono and cont

    yield "log-envelope bound continuous and nondecreasing", check_wbound

    def check_remez_degenerate():
        res = approx.remez_best_approx(lambda x: x * x, 1, approx.Interval(-1.0, 1.0), 1e-10)
        return abs(res.levelled_error - 0.5) < 1e-9 and abs(res.poly(0.3) - 0.5) < 1e-8

    yield "best linear fit of square has levelled error 1/2", check_remez_degenerate

    def check_bernstein():
        return all(abs(approx.bernstein_apply(lambda t: 2 * t + 1, 50, x) - (2 * x + 1)) < 1e-12
                   for x in (0.0, 0.25, 0.7, 1.0))

    yield "degree-50 smoothing operator reproduces affine functions", check_bernstein


def _cmd_selftest(_args) -> int:
    failures = 0
    for name, check in _selftest_checks():
        try:
            ok = check()
        except Exception as exc:  # noqa: BLE001 - selftest reports, never crashes
            ok = False
            name = f"{name} ({exc})"
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divest",
                                     description="divergence estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a divergence from two histogram files")
    est.add_argument("--divergence", required=True, choices=["kl", "hellinger", "chi2"])
    est.add_argument("--p", required=True, help="P-side histogram file (symbol count lines)")
    est.add_argument("--q", required=True, help="Q-side histogram file")
    est.add_argument("--plugin", action="store_true", help="use the plug-in baseline")
    est.add_argument("--c1", type=float, default=1.0)
    est.add_argument("--c2", type=float, default=1.6)
    est.add_argument("--truncate", type=float, default=1.0)
    est.add_argument("--seed", type=int, default=0, help="seed for the internal three-way split")
    est.set_defaults(func=_cmd_estimate)

    sim = sub.add_parser("simulate", help="run a Monte Carlo risk experiment")
    sim.add_argument("--spec", required=True, help="experiment spec file (key = value lines)")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=_cmd_simulate)

    ap = sub.add_parser("approx", help="polynomial coefficient utilities")
    apsub = ap.add_subparsers(dest="approx_command", required=True)
    dump = apsub.add_parser("dump", help="emit coefficients and certified error as CSV")
    dump.add_argument("--target", required=True, choices=["xlogx", "sqrt", "log", "invx"])
    dump.add_argument("--degree", required=True, type=int)
    dump.add_argument("--lo", type=float, default=None)
    dump.add_argument("--hi", type=float, default=None)
    dump.set_defaults(func=_cmd_approx_dump)

    st = sub.add_parser("selftest", help="run fixture-free invariant checks")
    st.set_defaults(func=_cmd_selftest)
    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DivestError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
