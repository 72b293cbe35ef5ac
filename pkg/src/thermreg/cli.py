"""Command-line entry point: ``thermreg run|calibrate|jacobian|compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .calibration import calibrate, dominance_ratio, write_calibration
from .controller import STANDARD_FREQ_SET, DiscreteSet, parse_mode, relative_error
from .errors import CalibrationError, ConfigError, ThermalRunaway
from .harness.compare import compare_modes
from .harness.loop import RunawayAbort, simulate
from .harness.metrics import compute_metrics, format_metrics, program_windows
from .harness.output import write_outputs
from .harness.scenario import Scenario, load_scenario, shipped_scenarios

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_RUNAWAY = 3
EXIT_IO = 4

log = logging.getLogger("thermreg")


def _scenario(args: argparse.Namespace) -> Scenario:
    sc = load_scenario(args.scenario)
    if getattr(args, "mode", None):
        sc = sc.replace(mode=parse_mode(args.mode))
    if getattr(args, "discrete", False):
        levels = sc.freq_domain.levels if isinstance(sc.freq_domain, DiscreteSet) else STANDARD_FREQ_SET
        sc = sc.replace(freq_domain=DiscreteSet(levels))
    if getattr(args, "cycles", None) is not None:
        sc = sc.replace(n_cycles=args.cycles)
    if getattr(args, "seed", None) is not None:
        sc = sc.with_seed(args.seed)
    return sc


def cmd_run(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    out = Path(args.out)
    try:
        result = simulate(sc)
    except RunawayAbort as abort:
        records = abort.records
        write_outputs(records, compute_metrics(records) if records else None, out)
        (out / "runaway.txt").write_text(abort.report())
        log.error("%s", abort)
        return EXIT_RUNAWAY
    records = result.records
    metrics = compute_metrics(records, until_ms=program_windows(sc)) if records else None
    for path in write_outputs(records, metrics, out):
        log.info("wrote %s", path)
    if metrics is not None:
        sys.stdout.write(format_metrics(metrics))
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    report = calibrate(sc.chip, delta_p=args.delta_p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = write_calibration(report, out / "calibration.json")
    for j, fit in enumerate(report.fits):
        print(f"core {j}: slope {fit.slope:.4f} K/W  intercept {fit.intercept:.3f} K  R^2 {fit.r_squared:.5f}")
    print(f"averaged dT/dP: {report.dtdp:.4f} K/W")
    print("dT_i/dT_j:")
    print(np.array2string(report.coupling_sens, precision=6, suppress_small=False))
    print(f"dominance ratio: {report.coupling_dominance:.4g}")
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_jacobian(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    result = simulate(sc, keep_jacobians=True)
    if not result.jacobians:
        print("no cycles were run")
        return EXIT_OK
    ratios = [dominance_ratio(j) for j in result.jacobians]
    worst = int(np.argmin(ratios))
    jac = result.jacobians[min(args.cycle - 1, len(result.jacobians) - 1)]
    print(f"Jacobian dT/dphi at cycle {min(args.cycle, len(result.jacobians))} [K/GHz]:")
    print(np.array2string(jac, precision=5))
    diag = np.diag(np.diag(jac))
    print(f"relative error of diagonal approximation: {relative_error(diag, jac):.4g}")
    print(f"dominance ratio: min {ratios[worst]:.4g} (cycle {worst + 1}), max {max(ratios):.4g}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    modes = args.modes or ["adaptive", "fixed:0.01", "fixed:0.12"]
    report = compare_modes(sc, modes)
    text = report.table(cores=args.core)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.txt").write_text(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermreg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_required: bool) -> None:
        p.add_argument(
            "--scenario", required=True,
            help=f"scenario file, or a shipped name ({', '.join(shipped_scenarios())})",
        )
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--mode", help="adaptive | fixed:<ghz_per_k>")
        p.add_argument("--discrete", action="store_true", help="restrict to the discrete frequency set")
        p.add_argument("--cycles", type=int, help="override the number of control cycles")
        p.add_argument("--seed", type=int, help="override the workload seed (u64)")

    p = sub.add_parser("run", help="closed-loop run, writes trace.csv, metrics.txt, temperature.svg")
    common(p, True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("calibrate", help="open-loop sweep, dT/dP fits and coupling sensitivities")
    common(p, True)
    p.add_argument("--delta-p", type=float, default=0.5, help="power perturbation, W")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("jacobian", help="per-cycle Jacobians and their diagonal dominance")
    common(p, False)
    p.add_argument("--cycle", type=int, default=10, help="cycle whose Jacobian is printed")
    p.set_defaults(func=cmd_jacobian)

    p = sub.add_parser("compare", help="compare gain modes on one scenario")
    common(p, False)
    p.add_argument("--modes", nargs="+", help="modes to compare (default: adaptive fixed:0.01 fixed:0.12)")
    p.add_argument("--core", type=int, action="append", help="only report these cores")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        log.error("seed must be an unsigned 64-bit integer")
        return EXIT_PARSE
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except (ThermalRunaway, CalibrationError) as exc:
        log.error("%s", exc)
        return EXIT_RUNAWAY
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
