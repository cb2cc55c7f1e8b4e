"""Command-line front end.

Exit codes: 0 success, 2 malformed arguments, 3 input file format violation,
4 computation error (non-convergence, invalid physical input).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as pio
from .correlator import (DEFAULT_BIN_WIDTH, DEFAULT_TAU_MAX, count_rate, cross_correlate,
                         cross_correlate_chunked, normalize_g2)
from .coupling import (DEFAULT_STAGE_NAMES, EfficiencyChain, efficiency_chain, fit_gaussian_2d,
                       gaussian_field, overlap_efficiency)
from .fitter import FitError
from .hom import HOMParams, SplitterPair
from .models import corrected_rate, g2_two_level, lorentzian, saturation
from .montecarlo import CW, DetectorConfig, EmitterConfig, Pulsed, route_hbt, route_hom, \
    simulate_emission
from .recipes import fit_g2_cw, fit_hom_joint, fit_lorentzian, fit_saturation
from .tags import PS_PER_S

DEFAULT_SEED = 20240607

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_COMPUTE = 4

log = logging.getLogger("photonkit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


# -- subcommands ----------------------------------------------------------------

def cmd_simulate(args):
    if args.mode == "pulsed":
        exc = Pulsed(args.rep_rate, args.pulse_width, args.excitation_prob)
    else:
        exc = CW()
    cfg = EmitterConfig(args.tau_rad, args.pump_rate, args.background_rate, exc, args.duration)
    det = DetectorConfig(args.efficiency, args.jitter, args.dead_time, args.dark_rate)
    stream = simulate_emission(cfg, args.seed, threads=args.threads)
    if args.setup == "hbt":
        a, b = route_hbt(stream, (1.0 - args.split, args.split), det, det, seed=args.seed)
        stream = a.merge(b)
    elif args.setup == "hom":
        s = SplitterPair(args.r1, 1.0 - args.r1, args.r2, 1.0 - args.r2)
        p = HOMParams(s, args.dtau2, args.visibility, args.tau_c)
        a, b = route_hom(stream, p, det, det, seed=args.seed)
        stream = a.merge(b)
    pio.write_tags(args.out, stream)
    print(f"wrote {len(stream)} tags over {stream.duration} ps to {args.out}")
    for ch in stream.channel_set:
        print(f"channel {ch}: {count_rate(stream.select(ch)):.6g} cps")


def cmd_correlate(args):
    duration = None if args.duration is None else int(round(args.duration * PS_PER_S))
    stream = pio.read_tags(args.input, duration)
    a, b = stream.select(args.channels[0]), stream.select(args.channels[1])
    if args.channels[0] == args.channels[1]:
        b = a
    if args.threads > 1:
        h = cross_correlate_chunked(a, b, args.bin_width, args.tau_max,
                                    n_chunks=args.threads, threads=args.threads)
    else:
        h = cross_correlate(a, b, args.bin_width, args.tau_max)
    h = normalize_g2(h, count_rate(a), count_rate(b), stream.duration_s)
    pio.write_histogram(args.out, h)
    if args.svg:
        pio.write_svg_plot(args.svg, [("g2", h.centers_ns, h.normalized)], title="g2(tau)")
    print(f"wrote {h.n_bins} bins ({h.total_pairs} pairs) to {args.out}")


def _emit_fit(args, result, model_name, x=None, data=None, model=None, xlabel="x"):
    text = pio.format_fit_result(result, model_name)
    sys.stdout.write(text)
    if args.out:
        pio.write_fit_result(args.out, result, model_name)
    if x is not None and getattr(args, "plot_csv", None):
        pio.write_xy(args.plot_csv, f"{xlabel},data,model", x, data, model)
    if x is not None and getattr(args, "svg", None):
        pio.write_svg_plot(args.svg, [("data", x, data), ("fit", x, model)], title=model_name)
    if not result.converged:
        raise FitError(f"{model_name} fit did not converge")


def cmd_fit_g2(args):
    h = pio.read_histogram(args.input)
    if h.norm is None:
        raise pio.FormatError(f"{args.input}: histogram carries no normalization")
    r = fit_g2_cw(h, args.tau_window)
    x = h.centers_ns
    _emit_fit(args, r, "g2_two_level", x, h.normalized, g2_two_level(x, *r.params), "tau_ns")


def cmd_fit_sat(args):
    data = pio.read_xy(args.input)
    power, rate = data[:, 0], data[:, 1]
    if args.correct:
        if data.shape[1] < 3:
            raise pio.FormatError(f"{args.input}: --correct needs a third g2_zero column")
        rate = corrected_rate(rate, data[:, 2])
    fixed = None if args.fix_i0 is None else {"i0": args.fix_i0}
    r = fit_saturation(np.column_stack([power, rate]), fixed=fixed)
    _emit_fit(args, r, "saturation", power, rate, saturation(power, *r.params), "power_uW")


def cmd_fit_spectrum(args):
    data = pio.read_xy(args.input)
    r = fit_lorentzian(data[:, :2])
    x = data[:, 0]
    _emit_fit(args, r, "lorentzian", x, data[:, 1], lorentzian(x, *r.params), "wavelength_nm")


def cmd_fit_hom(args):
    h_co, h_cross = pio.read_histogram(args.co), pio.read_histogram(args.cross)
    if h_co.norm is None or h_cross.norm is None:
        raise pio.FormatError("HOM histograms must carry a normalization")
    s = SplitterPair(args.r1, 1.0 - args.r1, args.r2, 1.0 - args.r2)
    r = fit_hom_joint(h_co, h_cross, s, args.dtau2, args.tau_window, args.g2_zero)
    _emit_fit(args, r, "hom_joint")


def cmd_overlap(args):
    f1 = pio.read_field(args.field)
    lines = []
    if args.fit:
        params, res = fit_gaussian_2d(f1, magnitude=not args.fit_aligned)
        for k, v in params.items():
            lines.append(f"fit.{k} = {float(v)!r}")
            lines.append(f"fit.{k}_sigma = {float(res.error(k))!r}")
    if args.field2:
        f2 = pio.read_field(args.field2)
    elif args.fiber_waist:
        f2 = gaussian_field(f1.nx, f1.ny, f1.dx, f1.dy, args.fiber_waist)
    else:
        raise ValueError("give --field2 or --fiber-waist")
    lines.append(f"overlap = {overlap_efficiency(f1, f2)!r}")
    if args.fit:
        fitted = gaussian_field(f1.nx, f1.ny, f1.dx, f1.dy, params["waist_x"], params["waist_y"],
                                (params["center_x"], params["center_y"]), params["amplitude"])
        lines.append(f"overlap_fitted_gaussian = {overlap_efficiency(fitted, f2)!r}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)


def budget_lines(i_sat, rep, stages, names=DEFAULT_STAGE_NAMES):
    chain = EfficiencyChain.from_values(stages, names)
    b = efficiency_chain(i_sat, rep, chain)
    return [f"end_to_end = {100 * b['end_to_end']:.3f}%",
            f"b_fib = {100 * b['b_fib']:.3f}%",
            f"b_source = {100 * b['b_source']:.3f}%"], b


def cmd_budget(args):
    names = tuple(args.names.split(",")) if args.names else DEFAULT_STAGE_NAMES
    lines, _ = budget_lines(args.isat, args.rep, args.stages, names)
    print("\n".join(lines))


def cmd_report(args):
    from .report import build_report

    table = build_report(seed=args.seed, full=args.full)
    sys.stdout.write(table)
    if args.out:
        Path(args.out).write_text(table)


# -- parser ---------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="photonkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker cap")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo tag stream")
    s.add_argument("--mode", choices=("cw", "pulsed"), default="cw")
    s.add_argument("--tau-rad", type=float, default=1.87, help="ns")
    s.add_argument("--pump-rate", type=float, default=0.2, help="excitations per ns (CW)")
    s.add_argument("--background-rate", type=float, default=0.0, help="cps")
    s.add_argument("--duration", type=float, default=1e-3, help="s")
    s.add_argument("--rep-rate", type=float, default=40.0, help="MHz")
    s.add_argument("--pulse-width", type=float, default=300.0, help="ps")
    s.add_argument("--excitation-prob", type=float, default=1.0)
    s.add_argument("--setup", choices=("hbt", "hom", "none"), default="hbt")
    s.add_argument("--split", type=float, default=0.5, help="HBT fraction sent to channel 0")
    s.add_argument("--r1", type=float, default=0.5)
    s.add_argument("--r2", type=float, default=0.5)
    s.add_argument("--dtau2", type=float, default=4.36, help="ns")
    s.add_argument("--visibility", type=float, default=1.0)
    s.add_argument("--tau-c", type=float, default=450.0, help="ps")
    s.add_argument("--efficiency", type=float, default=1.0)
    s.add_argument("--jitter", type=float, default=0.0, help="ps rms")
    s.add_argument("--dead-time", type=float, default=0.0, help="ns")
    s.add_argument("--dark-rate", type=float, default=0.0, help="cps")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out", required=True, help=".csv for text, anything else for binary")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("correlate", help="coincidence histogram from a tag file")
    c.add_argument("--input", required=True)
    c.add_argument("--channels", type=int, nargs=2, default=(0, 1))
    c.add_argument("--bin-width", type=_positive_int, default=DEFAULT_BIN_WIDTH, help="ps")
    c.add_argument("--tau-max", type=_positive_int, default=DEFAULT_TAU_MAX, help="ps")
    c.add_argument("--duration", type=float, help="acquisition length in s")
    c.add_argument("--out", required=True)
    c.add_argument("--svg")
    c.set_defaults(func=cmd_correlate)

    g = sub.add_parser("fit-g2", help="two-level antibunching fit")
    g.add_argument("--input", required=True)
    g.add_argument("--tau-window", type=float, help="ns")
    g.add_argument("--out")
    g.add_argument("--plot-csv")
    g.add_argument("--svg")
    g.set_defaults(func=cmd_fit_g2)

    sat = sub.add_parser("fit-sat", help="saturation fit of power,rate CSV")
    sat.add_argument("--input", required=True)
    sat.add_argument("--correct", action="store_true",
                     help="scale rates by sqrt(1 - g2_zero) from a third column")
    sat.add_argument("--fix-i0", type=float)
    sat.add_argument("--out")
    sat.add_argument("--plot-csv")
    sat.add_argument("--svg")
    sat.set_defaults(func=cmd_fit_sat)

    h = sub.add_parser("fit-hom", help="joint co/cross HOM fit")
    h.add_argument("--co", required=True)
    h.add_argument("--cross", required=True)
    h.add_argument("--r1", type=float, default=0.5)
    h.add_argument("--r2", type=float, default=0.5)
    h.add_argument("--dtau2", type=float, default=4.36, help="ns")
    h.add_argument("--tau-window", type=float, help="ns")
    h.add_argument("--g2-zero", type=float, help="purity used for the visibility correction")
    h.add_argument("--out")
    h.set_defaults(func=cmd_fit_hom)

    sp = sub.add_parser("fit-spectrum", help="Lorentzian fit of wavelength,counts CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out")
    sp.add_argument("--plot-csv")
    sp.add_argument("--svg")
    sp.set_defaults(func=cmd_fit_spectrum)

    o = sub.add_parser("overlap", help="mode overlap of field maps")
    o.add_argument("--field", required=True)
    o.add_argument("--field2")
    o.add_argument("--fiber-waist", type=float, help="1/e field radius of the fiber mode, um")
    o.add_argument("--fit", action="store_true", help="also fit a 2-D Gaussian to --field")
    o.add_argument("--fit-aligned", action="store_true",
                   help="fit the phase-aligned real part instead of the magnitude")
    o.add_argument("--out")
    o.set_defaults(func=cmd_overlap)

    b = sub.add_parser("budget", help="photon budget")
    b.add_argument("--isat", type=float, required=True, help="cps")
    b.add_argument("--rep", type=float, required=True, help="Hz")
    b.add_argument("--stages", type=_floats, required=True)
    b.add_argument("--names", help="comma-separated stage names")
    b.set_defaults(func=cmd_budget)

    r = sub.add_parser("report", help="regenerate the reference numbers")
    r.add_argument("--seed", type=int, default=DEFAULT_SEED)
    r.add_argument("--full", action="store_true", help="include the slower MC pipelines")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (pio.FormatError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"photonkit: input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (FitError, ValueError, KeyError, ZeroDivisionError, ArithmeticError) as exc:
        print(f"photonkit: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
