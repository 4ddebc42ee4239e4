#!/usr/bin/env python3
"""
DOB toolkit CLI - design checks, frequency responses, root loci and simulations
for disturbance observer based motion control scenarios.
"""
import argparse
import logging
import os
import sys
from contextlib import contextmanager
from typing import Iterator, List, Optional, Sequence, TextIO

from dotenv import load_dotenv

from dob_toolkit.domain.errors import ConfigError, NotSettled, NumericalBlowup, ToolkitError
from dob_toolkit.domain.models import Scenario
from dob_toolkit.services.analysis import bode, log_grid, parameter_locus, root_locus
from dob_toolkit.services.dob_design import design_report, render_report
from dob_toolkit.services.loop_models import (
    build_accel_response,
    build_l_dob,
    build_position_loop,
    build_rtob_loop,
    nominal_for_alpha,
    sensitivity_pair,
)
from dob_toolkit.services.poly_tf import RationalTF
from dob_toolkit.services.timesim import simulate, trace_metrics
from dob_toolkit.storage.csv_export import fmt, write_bode_csv, write_locus_csv, write_trace_csv
from dob_toolkit.storage.scenario_file import dump_scenario, load_scenario, save_scenario

EXIT_OK = 0
EXIT_RULE_FAILED = 1
EXIT_USAGE = 2
EXIT_INVALID_SCENARIO = 3

TF_CHOICES = (
    "inner-sens",
    "inner-cosens",
    "inner-accel",
    "outer-sens",
    "outer-cosens",
    "pos-closed",
    "rtob-open",
    "rtob-closed",
)


@contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
        return
    with open(path, "w", newline="", encoding="utf-8") as f:
        yield f


def _require_force_loop(scenario: Scenario, what: str) -> None:
    if scenario.env is None:
        raise ConfigError([("environment", f"required for {what}")])


def select_tf(scenario: Scenario, name: str) -> RationalTF:
    plant, nominal, bw, gains = scenario.plant, scenario.nominal, scenario.bw, scenario.gains
    if name in ("inner-sens", "inner-cosens"):
        sens, cosens = sensitivity_pair(build_l_dob(plant, nominal, bw))
        return sens if name == "inner-sens" else cosens
    if name == "inner-accel":
        return build_accel_response(plant, nominal, bw)
    if name in ("outer-sens", "outer-cosens", "pos-closed"):
        loop = build_position_loop(plant, nominal, bw, gains)
        if name == "pos-closed":
            return loop.closed
        sens, cosens = sensitivity_pair(loop.open)
        return sens if name == "outer-sens" else cosens
    _require_force_loop(scenario, f"--tf {name}")
    loop = build_rtob_loop(plant, nominal, scenario.identified, bw, scenario.env, gains.C_f)
    return loop.open if name == "rtob-open" else loop.closed


def cmd_check(args) -> int:
    report = design_report(load_scenario(args.scenario))
    with _output(args.output) as out:
        out.write(render_report(report))
    return EXIT_OK if report.passed else EXIT_RULE_FAILED


def _given(value, default):
    return value if value is not None else default


def cmd_bode(args) -> int:
    scenario = load_scenario(args.scenario)
    defaults = scenario.analysis
    omega_lo = _given(args.omega_lo, defaults.omega_lo)
    omega_hi = _given(args.omega_hi, defaults.omega_hi)
    per_decade = _given(args.points_per_decade, defaults.points_per_decade)
    if not (0 < omega_lo < omega_hi) or per_decade < 1:
        logging.error(
            f"Bode band needs 0 < omega-lo < omega-hi and points-per-decade >= 1 "
            f"(got {omega_lo:g}, {omega_hi:g}, {per_decade})"
        )
        return EXIT_USAGE
    grid = bode(select_tf(scenario, args.tf), omega_lo, omega_hi, per_decade)
    with _output(args.output) as out:
        rows = write_bode_csv(out, grid)
    logging.info(f"Bode of {args.tf}: {rows} points ({len(grid.skipped)} skipped)")
    return EXIT_OK


def cmd_rootlocus(args) -> int:
    scenario = load_scenario(args.scenario)
    defaults = scenario.analysis
    plant, nominal, bw, gains = scenario.plant, scenario.nominal, scenario.bw, scenario.gains

    if args.sweep == "cf":
        _require_force_loop(scenario, "--sweep cf")
        open_loop = build_rtob_loop(plant, nominal, scenario.identified, bw, scenario.env, C_f=1.0).open
        result = root_locus(open_loop, log_grid(defaults.gain_lo, defaults.gain_hi, defaults.gains_per_decade))
    else:
        alphas = log_grid(defaults.alpha_lo, defaults.alpha_hi, defaults.gains_per_decade)
        if scenario.uses_position_loop:
            def poly_of(alpha: float):
                return build_position_loop(plant, nominal_for_alpha(plant, nominal, alpha), bw, gains).closed.den
        else:
            _require_force_loop(scenario, "--sweep alpha")

            def poly_of(alpha: float):
                shifted = nominal_for_alpha(plant, nominal, alpha)
                return build_rtob_loop(plant, shifted, scenario.identified, bw, scenario.env, gains.C_f).closed.den
        result = parameter_locus(poly_of, alphas)

    with _output(args.output) as out:
        write_locus_csv(out, result)
    unstable = int((~result.stable_mask).sum())
    logging.info(f"Root locus ({args.sweep}): {len(result.gains)} values, {unstable} unstable")
    return EXIT_OK


def cmd_simulate(args) -> int:
    trace = simulate(load_scenario(args.scenario))
    with _output(args.output) as out:
        rows = write_trace_csv(out, trace)
    logging.info(f"Simulated {rows} samples")
    return EXIT_OK


def metric_pairs(scenario: Scenario) -> List[tuple]:
    pairs = []
    if scenario.uses_position_loop:
        pairs.append(("q_m", "q_ref"))
    if scenario.uses_force_loop:
        pairs.append(("tau_load_hat", "tau_ref"))
    return pairs


def cmd_metrics(args) -> int:
    scenario = load_scenario(args.scenario)
    trace = simulate(scenario)
    lines = []
    for channel, ref in metric_pairs(scenario):
        try:
            m = trace_metrics(trace, channel, ref)
        except NotSettled as e:
            logging.warning(f"{channel}: {e}")
            lines.append(f"{channel}: not settled")
            continue
        lines.append(f"{channel}.overshoot_pct = {fmt(m.overshoot_pct)}")
        lines.append(f"{channel}.settling_time_s = {fmt(m.settling_time_s)}")
        lines.append(f"{channel}.ss_error = {fmt(m.ss_error)}")
        lines.append(f"{channel}.rms_residual = {fmt(m.rms_residual)}")
    with _output(args.output) as out:
        out.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_normalize(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.output in (None, "-"):
        sys.stdout.write(dump_scenario(scenario))
    else:
        save_scenario(args.output, scenario)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="DOB toolkit - robust motion control design and simulation")
    parser.add_argument("--log-level", default=os.getenv("LOG_LEVEL", "INFO"))
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
        p.set_defaults(handler=handler)
        return p

    add("check", cmd_check, "evaluate every design rule")
    p = add("bode", cmd_bode, "frequency response CSV")
    p.add_argument("--tf", required=True, choices=TF_CHOICES)
    p.add_argument("--omega-lo", type=float, default=None)
    p.add_argument("--omega-hi", type=float, default=None)
    p.add_argument("--points-per-decade", type=int, default=None)
    p = add("rootlocus", cmd_rootlocus, "root-locus CSV over C_f or alpha")
    p.add_argument("--sweep", required=True, choices=("alpha", "cf"))
    add("simulate", cmd_simulate, "time simulation CSV")
    add("metrics", cmd_metrics, "step-response metrics of the simulated trace")
    add("normalize", cmd_normalize, "rewrite the scenario with every default filled in")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv(override=False)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO),
                        format="%(asctime)s - %(levelname)s - %(message)s")

    try:
        return args.handler(args)
    except ConfigError as e:
        for key, msg in e.diagnostics:
            logging.error(f"{key}: {msg}")
        return EXIT_INVALID_SCENARIO
    except NumericalBlowup as e:
        logging.error(f"Simulation diverged: {e}")
        return EXIT_RULE_FAILED
    except ToolkitError as e:
        logging.error(str(e))
        return EXIT_RULE_FAILED


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
