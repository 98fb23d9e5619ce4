"""Command-line front end.

Subcommands: ``estimate``, ``asymptotics``, ``simulate``, ``oracle`` and
``coherence``.  Results are printed as ``key = value`` lines (17
significant digits) or, with ``--format table``, as CSV.

Exit codes: 0 on success, 2 on invalid arguments (one-line diagnostic on
stderr), 1 on runtime failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from pathlib import Path

from . import distributions as dist
from . import harness
from .asymptotics import limit_sd_avar, limit_sd_higher_order, limit_sd_semideviation
from .errors import ParameterOutOfRange, RiskCLTError
from .measures import AVAR, HIGHER_ORDER, KINDS, SEMIDEVIATION, MeasureSpec, coherence_check, estimate


class UsageError(Exception):
    """Invalid command-line input (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    if x is None:
        return "none"
    return format(float(x), ".17g")


# ---------------------------------------------------------------- parser

def _add_measure(p):
    g = p.add_argument_group("measure")
    g.add_argument("--measure", choices=KINDS, default=None, help="risk measure (required unless --config is given)")
    g.add_argument("--alpha", type=float, default=0.05, help="AVaR tail level in (0, 1] (default 0.05)")
    g.add_argument("--p", type=float, default=2.0, help="order p of the semideviation or higher-order measure (default 2)")
    g.add_argument("--c", type=float, default=20.0, help="higher-order scale c > 1 (default 20); p = 1 gives AVaR at 1/c")
    g.add_argument("--kappa", type=float, default=0.5, help="semideviation weight in [0, 1] (default 0.5)")


def _add_dist(p, with_n=True):
    g = p.add_argument_group("distribution")
    g.add_argument("--dist", choices=("normal", "t"), default=None, help="sample from a parametric family")
    g.add_argument("--mean", type=float, default=0.0, help="normal mean (default 0)")
    g.add_argument("--sd", type=float, default=1.0, help="normal standard deviation (default 1)")
    g.add_argument("--df", type=float, default=None, help="Student t degrees of freedom")
    g.add_argument("--shift", type=float, default=0.0, help="Student t location shift (default 0)")
    if with_n:
        g.add_argument("--n", type=int, default=None, help="sample size drawn from --dist")
        g.add_argument("--seed", type=int, default=0, help="seed of the sampler (default 0)")


def _add_output(p):
    g = p.add_argument_group("output")
    g.add_argument("--output", default=None, help="write results to this file instead of stdout")
    g.add_argument("--format", choices=("text", "table"), default="text", help="key = value text or CSV table (default text)")


def _sample_cmd(sub, name, help_):
    p = sub.add_parser(name, help=help_, description=help_)
    _add_measure(p)
    src = p.add_argument_group("input")
    src.add_argument("--data", default=None, help="CSV file, one observation per row, optional header")
    _add_dist(p)
    _add_output(p)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riskclt", description="Plug-in estimation and normal limits of risk functionals.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    _sample_cmd(sub, "estimate", "Plug-in estimate of a risk measure.")
    _sample_cmd(sub, "asymptotics", "Plug-in estimate with its limit standard deviation.")

    p = _sample_cmd(sub, "coherence", "Coherence-axiom residuals of the plug-in estimator.")
    g = p.add_argument_group("axioms")
    g.add_argument("--a", type=float, default=1.0, help="translation / monotonicity offset (default 1)")
    g.add_argument("--lam", type=float, default=2.0, help="positive homogeneity factor (default 2)")

    p = sub.add_parser("oracle", help="Population values by numerical integration.",
                       description="Population values by numerical integration.")
    _add_measure(p)
    _add_dist(p, with_n=False)
    _add_output(p)

    p = sub.add_parser("simulate", help="Monte Carlo check of the normal approximation.",
                       description="Monte Carlo check of the normal approximation.")
    p.add_argument("--config", default=None, help="JSON experiment config; replaces the measure and distribution flags")
    _add_measure(p)
    g = p.add_argument_group("distribution")
    g.add_argument("--dist", choices=("normal", "t"), default=None, help="parametric family of the replicates")
    g.add_argument("--mean", type=float, default=0.0, help="normal mean (default 0)")
    g.add_argument("--sd", type=float, default=1.0, help="normal standard deviation (default 1)")
    g.add_argument("--df", type=float, default=None, help="Student t degrees of freedom")
    g.add_argument("--shift", type=float, default=0.0, help="Student t location shift (default 0)")
    g = p.add_argument_group("experiment")
    g.add_argument("--n", type=int, nargs="+", default=None, help="one or more sample sizes")
    g.add_argument("--m", type=int, default=None, help="replications per sample size")
    g.add_argument("--seed", type=int, default=None, help="master seed (default 20150417)")
    g.add_argument("--standardize", choices=(harness.ORACLE, harness.PLUGIN), default=None,
                   help="overlay sd from the population oracle or per-replicate plug-in (default oracle)")
    g.add_argument("--threads", type=int, default=None, help="worker threads (default RISKCLT_THREADS or CPU count)")
    _add_output(p)
    return parser


# ---------------------------------------------------------------- validation

def _measure(a) -> MeasureSpec:
    if a.measure is None:
        raise UsageError("--measure is required")
    try:
        if a.measure == AVAR:
            return MeasureSpec(AVAR, p=1.0, alpha=a.alpha)
        if a.measure == SEMIDEVIATION:
            return MeasureSpec(SEMIDEVIATION, p=a.p, kappa=a.kappa)
        return MeasureSpec(HIGHER_ORDER, p=a.p, c=a.c)
    except ParameterOutOfRange as e:
        raise UsageError(str(e)) from None


def _family(a):
    if a.dist is None:
        raise UsageError("--dist is required")
    try:
        if a.dist == "normal":
            return dist.Normal(a.mean, a.sd)
        if a.df is None:
            raise UsageError("--dist t needs --df")
        return dist.StudentT(a.df, a.shift)
    except ParameterOutOfRange as e:
        raise UsageError(str(e)) from None


def _input(a):
    """Resolve exactly one input source into a zero-argument sample loader."""
    if (a.data is None) == (a.dist is None):
        raise UsageError("give exactly one of --data or --dist")
    if a.data is not None:
        return lambda: dist.sample(dist.DistributionSpec(dist.Empirical(a.data)))
    fam = _family(a)
    if a.n is None or a.n < 1:
        raise UsageError("--dist needs --n >= 1")
    spec = dist.DistributionSpec(fam, a.seed, a.n)
    return lambda: dist.sample(spec)


# ---------------------------------------------------------------- commands

def _emit(a, pairs, out):
    if a.format == "table":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([k for k, _ in pairs])
        w.writerow([v for _, v in pairs])
        text = buf.getvalue()
    else:
        text = "".join(f"{k} = {v}\n" for k, v in pairs)
    _write(a, text, out)


def _write(a, text, out):
    if a.output:
        Path(a.output).write_text(text)
    else:
        out.write(text)


def _limit(spec: MeasureSpec, s):
    r = spec.resolved()
    if r.kind == AVAR:
        return limit_sd_avar(s, r.alpha)
    if r.kind == HIGHER_ORDER:
        return limit_sd_higher_order(s, r.p, r.c)
    return limit_sd_semideviation(s, r.p, r.kappa)


def cmd_estimate(a, out):
    spec = _measure(a)
    load = _input(a)
    s = load()
    est = estimate(spec, s)
    _emit(a, [("measure", spec.label), ("n", str(s.n)), ("value", _fmt(est.value)),
              ("minimizer", _fmt(est.minimizer))], out)


def cmd_asymptotics(a, out):
    spec = _measure(a)
    load = _input(a)
    s = load()
    est = _limit(spec, s)
    _emit(a, [("measure", spec.label), ("n", str(s.n)), ("value", _fmt(est.value)),
              ("minimizer", _fmt(est.minimizer)), ("sd", _fmt(est.sd)), ("stderr", _fmt(est.stderr))], out)


def cmd_coherence(a, out):
    spec = _measure(a)
    if not a.lam > 0:
        raise UsageError("--lam must be positive")
    load = _input(a)
    rep = coherence_check(spec, load(), a.a, a.lam)
    _emit(a, [("measure", spec.label), ("translation", _fmt(rep.translation)),
              ("homogeneity", _fmt(rep.homogeneity)), ("monotonicity", _fmt(rep.monotonicity)),
              ("convexity", _fmt(rep.convexity))], out)


def cmd_oracle(a, out):
    spec = _measure(a)
    fam = _family(a)
    orc = dist.oracle(spec, fam)
    _emit(a, [("measure", spec.label), ("family", fam.name), ("minimizer", _fmt(orc.z)),
              ("rho", _fmt(orc.rho)), ("sigma", _fmt(orc.sigma))], out)


def _experiment(a) -> harness.ExperimentConfig:
    try:
        if a.config is not None:
            if a.measure is not None or a.dist is not None:
                raise UsageError("--config cannot be combined with --measure or --dist")
            try:
                cfg = harness.load_config(a.config)
            except (OSError, ValueError, KeyError) as e:
                raise UsageError(f"cannot read config {a.config}: {e}") from None
            over = {}
            if a.n is not None:
                over["sizes"] = tuple(a.n)
            if a.m is not None:
                over["m"] = a.m
            if a.seed is not None:
                over["seed"] = a.seed
            if a.standardize is not None:
                over["standardize"] = a.standardize
            if over:
                d = {f: getattr(cfg, f) for f in ("family", "measure", "sizes", "m", "seed", "standardize")}
                d.update(over)
                cfg = harness.ExperimentConfig(**d)
            return cfg
        spec = _measure(a)
        fam = _family(a)
        if a.n is None or a.m is None:
            raise UsageError("simulate needs --n and --m (or --config)")
        kw = {} if a.seed is None else {"seed": a.seed}
        return harness.ExperimentConfig(fam, spec, tuple(a.n), a.m, standardize=a.standardize or harness.ORACLE, **kw)
    except ParameterOutOfRange as e:
        raise UsageError(str(e)) from None


def cmd_simulate(a, out):
    cfg = _experiment(a)
    if a.threads is not None and a.threads < 1:
        raise UsageError("--threads must be >= 1")
    report = harness.run_experiment(cfg, threads=a.threads)
    text = harness.format_table(report) if a.format == "table" else harness.format_report(report)
    _write(a, text, out)


COMMANDS = {
    "estimate": cmd_estimate,
    "asymptotics": cmd_asymptotics,
    "coherence": cmd_coherence,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()

    def show(message, category, *_args, **_kw):
        err.write(f"riskclt: warning: {' '.join(str(message).split())}\n")

    try:
        a = parser.parse_args(argv)
        with warnings.catch_warnings():
            warnings.showwarning = show
            COMMANDS[a.command](a, out)
    except UsageError as e:
        err.write(f"riskclt: error: {' '.join(str(e).split())}\n")
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except (RiskCLTError, OSError, ArithmeticError, ValueError) as e:
        err.write(f"riskclt: {type(e).__name__}: {' '.join(str(e).split())}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
