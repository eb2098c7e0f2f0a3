"""``ruin-asym`` command line: simulate, asymptotics, compare, validate, presets.

Exit codes: 0 success, 1 a validation check failed, 2 configuration error,
3 numerical non-convergence, 4 inconclusive validation.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import Optional, Sequence

from . import asym, config, mc, quad, validate
from .dist import DistributionError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

SIMULATE_COLUMNS = ("x", "p_hat", "ci_low", "ci_high", "n", "seed")
ASYMPTOTICS_COLUMNS = ("x", "first_order", "corr_F", "corr_G_tilde", "corr_G", "corr_F_tilde",
                       "remainder_scale", "total_second_order", "regime_flag")
COMPARE_COLUMNS = ("x", "mc_p", "mc_lo", "mc_hi", "first_order", "second_order",
                   "closed_first", "closed_second", "regime_flag")
VALIDATE_COLUMNS = ("check", "status", "statistic", "target", "detail")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# pipelines (return rows; the CLI only formats them)
# ---------------------------------------------------------------------------

def run_simulate(s: asym.Scenario, opts: config.RunOptions) -> list:
    ests = mc.estimate_tail(s, opts.x_grid, opts.samples, opts.seed, opts.workers)
    return [dict(x=e.x, p_hat=e.p_hat, ci_low=e.ci_low, ci_high=e.ci_high, n=e.n, seed=e.seed) for e in ests]


def run_asymptotics(s: asym.Scenario, opts: config.RunOptions) -> list:
    with quad.tolerance(opts.quad_tol):
        parts = asym.second_order_grid(s, opts.x_grid, workers=mc.resolve_workers(opts.workers))
    return [b.as_row(x) for x, b in zip(opts.x_grid, parts)]


def _closed(s: asym.Scenario, x: float) -> Optional[asym.AsymptoticBreakdown]:
    try:
        return asym.closed_form(s, x)
    except DistributionError:
        return None


def run_compare(s: asym.Scenario, opts: config.RunOptions) -> list:
    ests = mc.estimate_tail(s, opts.x_grid, opts.samples, opts.seed, opts.workers)
    with quad.tolerance(opts.quad_tol):
        parts = asym.second_order_grid(s, opts.x_grid, workers=mc.resolve_workers(opts.workers))
    rows = []
    for e, b in zip(ests, parts):
        c = _closed(s, e.x)
        rows.append(dict(x=e.x, mc_p=e.p_hat, mc_lo=e.ci_low, mc_hi=e.ci_high,
                         first_order=b.first_order, second_order=b.total_second_order,
                         closed_first=c.first_order if c else None,
                         closed_second=c.total_second_order if c else None,
                         regime_flag=b.regime_flag))
    return rows


def _row(check, status, statistic, target, detail=""):
    return dict(check=check, status=status, statistic=statistic, target=target, detail=detail)


def run_validate(check: str, s: asym.Scenario, opts: config.RunOptions, args) -> list:
    mc_n, seed, workers = args.mc_n, opts.seed, opts.workers
    if check == "s2":
        grid = opts.x_grid if args.x_grid else (1e2, 1e3, 1e4)
        diag = validate.s2_defining_ratio(s.main_claim, grid)
        detail = " ".join(f"{x:g}:{r:.6g}" for x, r in zip(diag.x_grid, diag.ratios))
        return [_row("s2", "pass" if diag.approaching_one else "fail", diag.ratios[-1], "(0.9, 1.1)", detail)]
    if check == "kesten":
        x = args.x if args.x is not None else 1e3
        g = validate.kesten_growth(s.main_claim, tuple(args.box), range(2, args.max_n + 1), x, mc_n,
                                   seed=seed, workers=workers)
        detail = " ".join(f"n{e.n}:{e.ratio:.6g}" for e in g.estimates)
        return [_row("kesten", g.status, g.slope, f"<= {g.bound!r}", detail)]
    if check == "lemma62":
        x = args.x if args.x is not None else 1e3
        w = args.weights
        rep = validate.weighted_sum_expansion_check([s.main_claim] * len(w), w, x, mc_n, seed=seed, workers=workers)
        ok = 0.8 < rep.ratio < 1.2
        return [_row("lemma62", "pass" if ok else "fail", rep.ratio, "(0.8, 1.2)",
                     f"lhs={rep.lhs!r} first={rep.first_sum!r} second={rep.second_sum!r}")]
    if check in ("lemma63", "lemma64"):
        x = args.x if args.x is not None else 50.0
        with quad.tolerance(opts.quad_tol):
            reps = validate.byclaim_identity_check(s, x, mc_n, seed=seed, workers=workers,
                                                   estimator=args.estimator)
        rep = reps[0] if check == "lemma63" else reps[1]
        return [_row(check, "pass" if rep.rel_gap < 0.1 else "fail", rep.rel_gap, "< 0.1",
                     f"lhs={rep.lhs!r} se={rep.lhs_stderr!r} rhs={rep.rhs!r}")]
    raise ValueError(f"unknown check {check!r}")


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _scenario_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="scenario file")
    src.add_argument("--preset", help="built-in scenario (see `presets`)")
    p.add_argument("--x-grid", help='comma list or "logspace:lo:hi:count"')
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--t", type=float, help="horizon t (must not exceed T)")
    p.add_argument("--quad-tol", type=float, help="relative quadrature tolerance")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ruin-asym", description="Tail asymptotics of discounted aggregate claims.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "crude Monte-Carlo tail estimates"),
                        ("asymptotics", "first- and second-order expansions by quadrature"),
                        ("compare", "Monte-Carlo next to the expansions")):
        _scenario_args(sub.add_parser(name, help=help_))
    v = sub.add_parser("validate", help="definition and lemma checks")
    v.add_argument("check", choices=("s2", "kesten", "lemma62", "lemma63", "lemma64"))
    _scenario_args(v)
    v.add_argument("--mc-n", type=int, default=1_000_000)
    v.add_argument("--x", type=float)
    v.add_argument("--box", type=float, nargs=2, default=(0.5, 2.0), metavar=("A", "B"))
    v.add_argument("--max-n", type=int, default=8)
    v.add_argument("--weights", type=float, nargs="+", default=[1.0, 1.0])
    v.add_argument("--estimator", choices=("conditional", "crude"), default="conditional")
    pr = sub.add_parser("presets", help="list presets, or print one")
    pr.add_argument("name", nargs="?")
    return p


def _load(args) -> tuple:
    if args.config:
        s, opts = config.parse_scenario(args.config)
    else:
        s, opts = config.load_preset(args.preset or "pareto-s4")
    grid = config.parse_x_grid(args.x_grid) if args.x_grid else None
    opts = config.with_overrides(opts, samples=args.samples, seed=args.seed, workers=args.workers,
                                 x_grid=grid, quad_tol=args.quad_tol)
    if args.t is not None:
        if not 0 <= args.t <= s.T:
            raise config.ConfigError(f"--t must lie in [0, T={s.T}]", key="t", source="<command line>")
        s = s.at(args.t)
    if opts.samples < 1 or opts.workers < 1 or not opts.quad_tol > 0:
        raise config.ConfigError("samples and workers must be >= 1, quad tolerance > 0", source="<command line>")
    return s, opts


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        if args.name is None:
            sys.stdout.write("\n".join(sorted(config.PRESETS)) + "\n")
            return EXIT_OK
        if args.name not in config.PRESETS:
            print(f"ruin-asym: unknown preset {args.name!r}", file=sys.stderr)
            return EXIT_CONFIG
        sys.stdout.write(config.PRESETS[args.name])
        return EXIT_OK
    try:
        s, opts = _load(args)
        if args.command == "simulate":
            _emit(to_csv(SIMULATE_COLUMNS, run_simulate(s, opts)), args.output)
        elif args.command == "asymptotics":
            _emit(to_csv(ASYMPTOTICS_COLUMNS, run_asymptotics(s, opts)), args.output)
        elif args.command == "compare":
            _emit(to_csv(COMPARE_COLUMNS, run_compare(s, opts)), args.output)
        else:
            try:
                rows = run_validate(args.check, s, opts, args)
            except validate.InconclusiveError as err:
                _emit(to_csv(VALIDATE_COLUMNS, [_row(args.check, "inconclusive", None, None, str(err))]),
                      args.output)
                return EXIT_INCONCLUSIVE
            _emit(to_csv(VALIDATE_COLUMNS, rows), args.output)
            return EXIT_OK if all(r["status"] == "pass" for r in rows) else EXIT_FAIL
    except config.ConfigError as err:
        print(f"ruin-asym: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DistributionError, ValueError) as err:
        print(f"ruin-asym: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except quad.QuadratureError as err:
        print(f"ruin-asym: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
