"""Command-line front end.

All rates are in units of gamma (gamma = 1); the two-channel commands use
gamma' = 2. Every command writes CSV: a '#' comment block with the code
version, the reproduced figure and all parameters, one header row, then
data with 12 significant digits. The first column is the swept variable.

Exit codes: 0 success, 1 usage or invalid input, 2 verification failure,
3 resource limit.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__, analytic, kernels, numeric, twochannel
from .core import Grid1D, PhysParams, ResourceError, StimError, make_exponential_pulse

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RESOURCE = 0, 1, 2, 3
THREADS_ENV = "STIMEMIT_THREADS"

FIGURES = {
    "rho-ee": "excited-state population vs time",
    "tau-eff": "effective lifetime vs pulse width",
    "g2": "two-click density G2(t, t+tau) vs delay",
    "p2": "probability of two clicks within tau_final",
    "simulate": "solver run: population, pair norm and total probability vs time",
    "two-channel": "channel probabilities and cloning fidelity",
    "sweep": "transmission fidelity vs pulse width",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    params: PhysParams
    options: dict = field(default_factory=dict)
    output: Optional[str] = None


def _fmt(x) -> str:
    return "%.12g" % x


def write_csv(config: RunConfig, columns: Sequence[str], rows, extra: Optional[dict] = None) -> None:
    lines = [f"# stimemit {__version__}",
             f"# command: {config.command}",
             f"# figure: {FIGURES.get(config.command, '')}",
             "# units: rates in gamma, times in 1/gamma"]
    p = config.params
    for key in ("gamma", "delta", "detuning", "gamma_prime", "beta", "gamma_star"):
        lines.append(f"# {key} = {getattr(p, key)!r}")
    for key in sorted(config.options):
        lines.append(f"# {key} = {config.options[key]!r}")
    for key, val in (extra or {}).items():
        lines.append(f"# {key} = {val}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    text = "\n".join(lines) + "\n"
    if config.output in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(config.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {config.output}: {exc}") from exc


# -- commands -------------------------------------------------------------------

def _history(params: PhysParams, t_max: float, dr: float, **kw):
    grid = Grid1D.for_run(params.delta, t_max, dr=dr)
    return numeric.evolve(make_exponential_pulse(params, grid), params, grid, **kw)


def _cmd_rho_ee(cfg: RunConfig):
    o = cfg.options
    p = cfg.params
    t = np.round(np.arange(0.0, o["tmax"] + 0.5 * o["dt"], o["dt"]), 12)
    funcs = {"semi": analytic.rho_ee, "transmitting": analytic.rho_ee_full,
             "lambda": analytic.rho_ee_lambda}
    cols = ["t", "rho_ee"]
    data = [t, np.atleast_1d(funcs[o["system"]](t, p))]
    if o["numeric"]:
        if o["system"] == "semi":
            hist = _history(p, o["tmax"], o["dr"])
            num = [numeric.rho_ee_numeric(hist, x) for x in t]
        elif o["system"] == "transmitting":
            num = twochannel.excited_population_transmitting(p, t, dr=o["dr"])
        else:
            hist = _history(p, o["tmax"], o["dr"], decay=p.gamma_prime, feedback=0.5 * p.gamma_prime)
            num = [numeric.rho_ee_numeric(hist, x) for x in t]
        cols.append("rho_ee_numeric")
        data.append(np.asarray(num))
    write_csv(cfg, cols, zip(*data))


def _cmd_tau_eff(cfg: RunConfig):
    o = cfg.options
    full = o["system"] == "transmitting"
    g = cfg.params.gamma_prime if full else cfg.params.gamma
    func = analytic.tau_eff_full if full else analytic.tau_eff
    deltas = list(np.geomspace(o["delta_min"], o["delta_max"], o["points"]))
    # d tau/d delta vanishes at gamma + delta = 4 gamma: the minimizer is exactly 3 gamma
    best = 3.0 * g
    if o["delta_min"] <= best <= o["delta_max"] and best not in deltas:
        deltas.append(best)
    deltas.sort()
    write_csv(cfg, ["delta", "tau_eff"], [(d, func(g, d)) for d in deltas],
              extra={"minimum": f"delta={_fmt(best)} tau_eff={_fmt(func(g, best))}"})


def _cmd_g2(cfg: RunConfig):
    o = cfg.options
    p = cfg.params
    tau = np.round(np.linspace(0.0, o["tau_max"], o["points"]), 12)
    func = analytic.g2 if o["system"] == "semi" else analytic.g2_aa
    cols = ["tau", "g2"]
    data = [tau, np.atleast_1d(func(o["t"], tau, p))]
    if o["numeric"]:
        if o["system"] != "semi":
            raise UsageError("--numeric g2 is available for --system semi only")
        t_inf = o["t_inf"]
        hist = _history(p, t_inf, o["dr"])
        g2map = numeric.g2_numeric(hist, t_inf)
        data.append(g2map(np.full_like(tau, o["t"]), tau))
        cols.append("g2_numeric")
    write_csv(cfg, cols, zip(*data))


def _cmd_p2(cfg: RunConfig):
    o = cfg.options
    tau = np.round(np.linspace(0.0, o["tau_max"], o["points"]), 12)
    write_csv(cfg, ["tau_final", "p2"], zip(tau, np.atleast_1d(analytic.p2_integrated(tau, cfg.params))))


def _cmd_simulate(cfg: RunConfig):
    o = cfg.options
    hist = _history(cfg.params, o["tmax"], o["dr"])
    audit = numeric.norm_audit(hist, samples=o["samples"])
    if o["dump"]:
        numeric.dump_history(hist, o["dump"])
    write_csv(cfg, ["t", "rho_ee_numeric", "pair_norm", "total"],
              zip(audit.times, audit.atom, audit.pairs, audit.atom + audit.pairs),
              extra={"backend": kernels.BACKEND,
                     "max_deviation": _fmt(audit.max_deviation)})


def _cmd_two_channel(cfg: RunConfig):
    o = cfg.options
    p = cfg.params
    if o["system"] == "semi":
        raise UsageError("two-channel needs --system transmitting or lambda")
    if o["numeric"]:
        build = (twochannel.final_fields_lambda if o["system"] == "lambda"
                 else twochannel.final_fields_transmitting)
        probs = twochannel.channel_probabilities(build(p, dr=o["dr"]))
    else:
        probs = twochannel.channel_probabilities_exact(p, o["system"])
    row = (p.delta, probs.p_aa, probs.p_ab, probs.p_bb, twochannel.cloning_fidelity(probs))
    write_csv(cfg, ["delta", "p_aa", "p_ab", "p_bb", "fidelity"], [row])


def _cmd_sweep(cfg: RunConfig):
    o = cfg.options
    p = cfg.params
    curve = twochannel.transmission_fidelity_curve(p, o["ratio_min"], o["ratio_max"], o["points"])
    lam = [twochannel.cloning_fidelity(
        twochannel.channel_probabilities_exact(p.with_(delta=r * p.gamma_prime, detuning=0.0), "lambda"))
        for r in curve.delta_ratio]
    extra = {"optimum": f"delta/gamma'={_fmt(curve.optimum_ratio)} F_T={_fmt(curve.optimum_value)}",
             "F_T at delta=2gamma'": _fmt(curve.candidates["2"]),
             "F_T at delta=3gamma'": _fmt(curve.candidates["3"])}
    write_csv(cfg, ["delta_over_gamma_prime", "transmission_fidelity", "lambda_fidelity"],
              zip(curve.delta_ratio, curve.values, lam), extra=extra)


def _cmd_verify(cfg: RunConfig) -> int:
    from .verify import run_checks

    checks = run_checks(cfg.options.get("suites"))
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


COMMANDS = {
    "rho-ee": _cmd_rho_ee,
    "tau-eff": _cmd_tau_eff,
    "g2": _cmd_g2,
    "p2": _cmd_p2,
    "simulate": _cmd_simulate,
    "two-channel": _cmd_two_channel,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


# -- parsing --------------------------------------------------------------------

def _positive(text: str) -> float:
    val = float(text)
    if not val > 0 or math.isnan(val):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return val


def _count(text: str) -> int:
    val = int(text)
    if val < 2:
        raise argparse.ArgumentTypeError("need at least 2 points")
    return val


def _detuning(text: str) -> float:
    val = float(text)
    if math.isnan(val):
        raise argparse.ArgumentTypeError("detuning is NaN")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stimemit", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"stimemit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, system_default="semi"):
        sp.add_argument("--delta", type=_positive, default=3.0, help="pulse width (default 3)")
        sp.add_argument("--detuning", type=_detuning, default=0.0, help="carrier detuning; 'inf' allowed")
        sp.add_argument("--system", choices=("semi", "transmitting", "lambda"), default=system_default)
        sp.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")

    sp = sub.add_parser("rho-ee", help="excited population vs time")
    common(sp)
    sp.add_argument("--tmax", type=_positive, default=10.0)
    sp.add_argument("--dt", type=_positive, default=0.01)
    sp.add_argument("--numeric", action="store_true", help="add the solver's population")
    sp.add_argument("--dr", type=_positive, default=0.01)

    sp = sub.add_parser("tau-eff", help="effective lifetime vs pulse width")
    common(sp)
    sp.add_argument("--delta-min", type=_positive, default=0.1)
    sp.add_argument("--delta-max", type=_positive, default=100.0)
    sp.add_argument("--points", type=_count, default=200)

    sp = sub.add_parser("g2", help="two-click density vs delay")
    common(sp)
    sp.add_argument("--t", type=float, default=0.0, help="first click time")
    sp.add_argument("--tau-max", type=_positive, default=3.0)
    sp.add_argument("--points", type=_count, default=301)
    sp.add_argument("--numeric", action="store_true")
    sp.add_argument("--dr", type=_positive, default=0.01)
    sp.add_argument("--t-inf", type=_positive, default=30.0)

    sp = sub.add_parser("p2", help="two clicks within tau_final")
    common(sp)
    sp.add_argument("--tau-max", type=_positive, default=5.0)
    sp.add_argument("--points", type=_count, default=501)

    sp = sub.add_parser("simulate", help="run the space-time solver")
    common(sp)
    sp.add_argument("--tmax", type=_positive, default=10.0)
    sp.add_argument("--dr", type=_positive, default=0.01)
    sp.add_argument("--samples", type=_count, default=101)
    sp.add_argument("--dump", default=None, help="write the binary field history here")

    sp = sub.add_parser("two-channel", help="channel probabilities and fidelity")
    common(sp, system_default="lambda")
    sp.add_argument("--numeric", action="store_true")
    sp.add_argument("--dr", type=_positive, default=0.005)

    sp = sub.add_parser("sweep", help="transmission fidelity vs delta/gamma'")
    common(sp, system_default="transmitting")
    sp.add_argument("--ratio-min", type=_positive, default=0.1)
    sp.add_argument("--ratio-max", type=_positive, default=100.0)
    sp.add_argument("--points", type=_count, default=60)

    sp = sub.add_parser("verify", help="run the self-check suite")
    sp.add_argument("--suite", action="append", choices=("analytic", "twochannel", "numeric"),
                    dest="suites", help="restrict to a suite (repeatable)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    opts = {k: v for k, v in vars(args).items()
            if k not in ("command", "delta", "detuning", "output")}
    if args.command == "verify":
        return RunConfig(command="verify", params=PhysParams(), options=opts)
    params = PhysParams(gamma=1.0, delta=args.delta, detuning=args.detuning)
    if opts.get("numeric") or args.command == "simulate":
        if math.isinf(params.detuning):
            raise UsageError("the solver needs a finite --detuning")
    return RunConfig(command=args.command, params=params, options=opts, output=args.output)


def run(config: RunConfig) -> int:
    result = COMMANDS[config.command](config)
    return EXIT_OK if result is None else result


def main(argv: Optional[Sequence[str]] = None) -> int:
    threads = os.environ.get(THREADS_ENV)
    if threads:
        kernels.set_threads(int(threads))
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except ResourceError as exc:
        print(f"stimemit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, StimError, ValueError) as exc:
        print(f"stimemit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
