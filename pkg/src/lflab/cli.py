"""Command line entry point: ``lflab run | example | bounds | acceptance``.

Exit codes: 0 ok, 1 acceptance failure, 2 usage or config error,
3 non-finite chain state, 4 quadrature failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import analytic as an
from .config import ConfigParseError, Experiment, load_experiment
from .core import (
    Constant,
    ConfigError,
    DivergenceError,
    LabError,
    PowerDecay,
    QuadratureError,
    schedule_steps,
)
from .diagnostics import (
    EstimateCI,
    empirical_moment,
    ensemble_run,
    grad_second_moment,
    mean_ci,
    page_bias,
    score_fi_estimate,
)
from .fmt import csv_text, fmt_float
from .potentials import AuditError, FiniteSumQuadratic, PseudoHuber, Quadratic

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_QUADRATURE = 4

ESTIMATES_HEADER = ("step", "time", "estimator", "value", "std_error", "n")
EXAMPLE_HEADER = ("m", "fi", "fi_bound", "fi_ok", "tv", "tv_floor", "tv_ok")


class UsageError(LabError):
    pass


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _est_row(step, time, name, est: EstimateCI):
    return [str(step), fmt_float(time), name, fmt_float(est.value), fmt_float(est.std_error), str(est.n_samples)]


def _exact_row(step, time, name, value):
    return [str(step), fmt_float(time), name, fmt_float(value), "0", "0"]


def _gaussian_moments(init, d):
    """(E|x0|^2, E|x0|^4) for a point mass or an isotropic Gaussian start."""
    m2 = float(np.sum(init.mean_vector(d) ** 2))
    v = init.var if init.kind == "gaussian" else 0.0
    second = m2 + d * v
    return second, second**2 + 2 * d * v * v + 4 * v * m2


def _quadratic_laws(exp: Experiment):
    """Exact Gaussian chain laws on an isotropic quadratic, or None if not tractable."""
    cfg = exp.run
    pot = cfg.potential
    if not isinstance(pot, Quadratic) or cfg.variant not in ("lmc", "sg_lmc"):
        return None
    if np.ndim(cfg.init.mean) != 0 or np.ndim(cfg.bias) != 0:
        return None
    var0 = cfg.init.var if cfg.init.kind == "gaussian" else 0.0
    bias = cfg.bias if cfg.variant == "sg_lmc" else 0.0
    noise = cfg.noise_var if cfg.variant == "sg_lmc" else 0.0
    return an.gaussian_chain_moments(pot.lam, schedule_steps(cfg.schedule, cfg.N), float(cfg.init.mean), var0, bias, noise)


def estimate_rows(exp: Experiment, snapshots) -> list[list[str]]:
    cfg = exp.run
    pot = cfg.potential
    laws = _quadratic_laws(exp)
    rows = []
    for snap in snapshots:
        k, t = snap.step, snap.time
        rows.append(_est_row(k, t, "mean_x1", mean_ci(snap.positions[:, 0])))
        rows.append(_est_row(k, t, "second_moment", empirical_moment(snap, 2)))
        rows.append(_est_row(k, t, "fourth_moment", empirical_moment(snap, 4)))
        rows.append(_est_row(k, t, "grad_sq", grad_second_moment(snap, pot)))
        rows.append(_est_row(k, t, "grad_evals", mean_ci(snap.evals)))
        if snap.g is not None:
            for j, est in enumerate(page_bias(snap, pot)):
                rows.append(_est_row(k, t, f"page_bias_{j}", est))
        if laws is not None:
            m, var = float(laws[0][k]), float(laws[1][k])
            rows.append(_exact_row(k, t, "mean_x1_exact", m))
            rows.append(_exact_row(k, t, "second_moment_exact", m * m + cfg.d * var))
            if var > 0:
                law = an.GaussianLaw(m, var, cfg.d)
                lam = pot.lam

                def mu_score(x, m=m, var=var):
                    shift = np.zeros_like(x)
                    shift[:, 0] = m
                    return -(x - shift) / var

                rows.append(_est_row(k, t, "score_fi", score_fi_estimate(snap, mu_score, lambda x: -lam * x)))
                rows.append(_exact_row(k, t, "fi_exact", an.gaussian_fi(law, lam)))
                rows.append(_exact_row(k, t, "kl_exact", an.gaussian_kl(law, lam)))
    return rows


def _init_kl(exp: Experiment, lam, center):
    init = exp.run.init
    d = exp.run.d
    if init.kind != "gaussian":
        return math.inf
    shift = float(np.sum((init.mean_vector(d) - center) ** 2))
    v = init.var
    return 0.5 * d * (lam * v - 1 - math.log(lam * v)) + 0.5 * lam * shift


def bound_reports(exp: Experiment) -> list[an.BoundReport]:
    cfg = exp.run
    pot = cfg.potential
    d, N = cfg.d, cfg.N
    out = []
    const = isinstance(cfg.schedule, Constant)
    if isinstance(pot, Quadratic):
        K0 = _init_kl(exp, pot.lam, np.zeros(d))
        if cfg.variant == "lmc" and const:
            out.append(_safe(an.theorem1_bound, K0, pot.lam, d, N, cfg.schedule.h))
            out.append(_safe(an.theorem1_bound, K0, pot.lam, d, N, "optimal"))
            out.append(_safe(an.corollary4_bound, 1 / pot.lam, pot.lam, d, K0, N))
        if cfg.variant == "lmc" and isinstance(cfg.schedule, PowerDecay) and N >= 1:
            value = an.theorem2_averaged_bound(K0, pot.lam, d, cfg.schedule, N)
            s = cfg.schedule
            out.append(
                an.BoundReport(
                    "thm2", dict(K0=K0, L=pot.lam, d=d, n=N, h0=s.h0, alpha=s.alpha), value, math.isfinite(value)
                )
            )
        if cfg.variant == "sg_lmc" and const:
            beta = np.zeros(d)
            if np.ndim(cfg.bias) == 0:
                beta[0] = cfg.bias
            else:
                beta[:] = cfg.bias
            out.append(
                _safe(an.theorem6_bound, K0, pot.lam, d, N, float(beta @ beta), cfg.noise_var * d, cfg.schedule.h)
            )
    if cfg.variant == "gs_lmc" and const and pot.holder is not None and cfg.eta > 0:
        s, L = pot.holder
        L_hat, dv, db = an.gs_params(L, s, d, cfg.eta, cfg.batch)
        out.append(_safe(an.theorem6_bound, math.inf, L_hat, d, N, db, dv, cfg.schedule.h))
    if isinstance(pot, FiniteSumQuadratic) and cfg.variant == "vr_lmc" and const:
        # the average of quadratics is itself N(minimizer, I / mean curvature)
        KL0 = _init_kl(exp, pot.mean_curvature(), pot.minimizer(d))
        out.append(_safe(an.theorem10_bound, KL0, 0.0, pot.lipschitz_grad, d, N, cfg.p, cfg.schedule.h))
        out.append(
            an.BoundReport(
                "page_cost", dict(n=pot.n_components, p=cfg.p), an.page_expected_cost(pot.n_components, cfg.p), True
            )
        )
    if isinstance(pot, PseudoHuber) and cfg.variant == "lmc" and const:
        g = pot.growth
        h = cfg.schedule.h
        ok = h <= min(g.a / (4 * g.m**2), 1.0)
        e2, e4 = _gaussian_moments(cfg.init, d)
        for k in exp.snapshot_steps:
            second, fourth = an.moment_bounds(g.a, g.b, g.gamma, d, e2, e4, k, h)
            inputs = dict(a=g.a, b=g.b, gamma=g.gamma, d=d, k=k)
            out.append(an.BoundReport("prop12_second", inputs, second, ok, h=h))
            out.append(an.BoundReport("prop12_fourth", inputs, fourth, ok, h=h))
    return out


def _safe(fn, *args):
    """Evaluate a calculator; non-finite inputs (a point-mass start has KL = inf) give an inadmissible row."""
    with np.errstate(all="ignore"):
        try:
            rep = fn(*args)
        except (ValueError, OverflowError, ZeroDivisionError):
            return an.BoundReport(_calc_id(fn), {"args": ",".join(map(str, args))}, math.nan, False)
    if not math.isfinite(rep.value):
        return an.BoundReport(rep.theorem_id, rep.inputs, rep.value, False, rep.scaling_only, rep.h)
    return rep


def _calc_id(fn):
    return {
        an.theorem1_bound: "thm1",
        an.corollary4_bound: "cor4",
        an.theorem6_bound: "thm6",
        an.theorem10_bound: "thm10",
    }.get(fn, fn.__name__)


def run_experiment(exp: Experiment, workers: int | None = None):
    """(estimates CSV text, bounds CSV text) for an experiment."""
    snaps = ensemble_run(exp.run, exp.snapshot_steps, workers=workers)
    est = csv_text(ESTIMATES_HEADER, estimate_rows(exp, snaps))
    bounds = csv_text(an.BoundReport.CSV_HEADER, [r.row() for r in bound_reports(exp)])
    return est, bounds


def cmd_run(args) -> int:
    exp = load_experiment(args.config)
    out_dir = args.out or exp.output_dir or "."
    est, bounds = run_experiment(exp, args.workers)
    os.makedirs(out_dir, exist_ok=True)
    for name, text in (("estimates.csv", est), ("bounds.csv", bounds)):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    print(f"wrote {os.path.join(out_dir, 'estimates.csv')} and {os.path.join(out_dir, 'bounds.csv')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# example, bounds, acceptance
# ---------------------------------------------------------------------------


def example_rows(ms) -> list[list[str]]:
    rows = []
    for m in ms:
        if not m > 0:
            raise UsageError(f"m must be positive, got {m}")
        pi, mu = an.bimodal_pair(m)
        div = an.quad_divergences(mu, pi)
        bound = an.bimodal_fi_bound(m)
        rows.append(
            [
                fmt_float(m),
                fmt_float(div.fi),
                fmt_float(bound),
                _flag(div.fi <= bound),
                fmt_float(div.tv),
                fmt_float(an.BIMODAL_TV_FLOOR),
                _flag(div.tv >= an.BIMODAL_TV_FLOOR),
            ]
        )
    return rows


def _flag(ok):
    return "pass" if ok else "fail"


def cmd_example(args) -> int:
    try:
        ms = [float(t) for t in args.m.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--m expects a comma-separated list of numbers, got {args.m!r}") from None
    if not ms:
        raise UsageError("--m needs at least one value")
    sys.stdout.write(csv_text(EXAMPLE_HEADER, example_rows(ms)))
    return EXIT_OK


def _num(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def _bounds_thm1(K0, L, d, N, h="optimal"):
    return an.theorem1_bound(K0, L, d, N, h)


def _bounds_thm2(K0, L, d, n, h0, alpha=1.0):
    value = an.theorem2_averaged_bound(K0, L, d, PowerDecay(h0, alpha), int(n))
    return an.BoundReport("thm2", dict(K0=K0, L=L, d=d, n=n, h0=h0, alpha=alpha), value, True)


def _bounds_lemma3(C_PI, FI):
    return an.BoundReport("lemma3", dict(C_PI=C_PI, FI=FI), an.poincare_tv_bound(C_PI, FI), True)


def _bounds_prop12(a, b, gamma, d, k, h, E_x0_sq=0.0, E_x0_4=0.0, m=None):
    second, fourth = an.moment_bounds(a, b, gamma, d, E_x0_sq, E_x0_4, k, h)
    ok = m is None or h <= min(a / (4 * m * m), 1.0)
    inputs = dict(a=a, b=b, gamma=gamma, d=d, k=k, second=second)
    return an.BoundReport("prop12", inputs, fourth, ok, h=h)


def _bounds_gs(L, s, d, eta, B=1):
    L_hat, dv, db = an.gs_params(L, s, d, eta, int(B))
    return an.BoundReport("gs", dict(L=L, s=s, d=d, eta=eta, B=B, L_hat=L_hat, delta_v=dv), db, True, scaling_only=False)


def _bounds_page(n, p):
    return an.BoundReport("page_cost", dict(n=n, p=p), an.page_expected_cost(int(n), p), True)


BOUNDS = {
    "thm1": _bounds_thm1,
    "thm2": _bounds_thm2,
    "lemma3": _bounds_lemma3,
    "cor4": an.corollary4_bound,
    "thm5": an.theorem5_bound,
    "prop12": _bounds_prop12,
    "thm6": an.theorem6_bound,
    "gs": _bounds_gs,
    "cor8": an.corollary8_iterations,
    "cor9": an.corollary9_report,
    "thm10": an.theorem10_bound,
    "page_cost": _bounds_page,
}


def bound_report(theorem: str, params: dict) -> an.BoundReport:
    fn = BOUNDS.get(theorem)
    if fn is None:
        raise UsageError(f"unknown theorem id {theorem!r}; expected one of {sorted(BOUNDS)}")
    try:
        return fn(**params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for {theorem}: {exc}") from None


def cmd_bounds(args) -> int:
    params = {}
    for item in args.params:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = _num(v.strip())
    rep = bound_report(args.theorem, params)
    sys.stdout.write(csv_text(an.BoundReport.CSV_HEADER, [rep.row()]))
    return EXIT_OK


def cmd_acceptance(args) -> int:
    from .acceptance import SUITES, run_suite

    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; expected one of {sorted(SUITES)}")
    results = run_suite(args.suite, workers=args.workers)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lflab", description="Langevin Monte Carlo lab with exact Fisher-information oracles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an ensemble from a config file")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    r.add_argument("--out", default=None, help="output directory (overrides [output] directory)")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("example", help="bimodal FI/TV table")
    e.add_argument("--m", required=True, help="comma-separated mode offsets, e.g. 1,2,3,4")
    e.set_defaults(func=cmd_example)

    b = sub.add_parser("bounds", help="evaluate one bound calculator")
    b.add_argument("theorem")
    b.add_argument("params", nargs="*", metavar="key=value")
    b.set_defaults(func=cmd_bounds)

    a = sub.add_parser("acceptance", help="run the acceptance criteria")
    a.add_argument("suite", help="fast or full")
    a.add_argument("--workers", type=int, default=None)
    a.set_defaults(func=cmd_acceptance)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigParseError, ConfigError, AuditError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except QuadratureError as exc:
        print(f"quadrature failed: {exc} (last estimates {exc.estimates})", file=sys.stderr)
        return EXIT_QUADRATURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
