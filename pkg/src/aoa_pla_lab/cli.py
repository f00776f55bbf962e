"""Command-line front end.

Exit codes: 0 success, 1 failed validation or a runtime error, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, validation
from .authtest import analytic_report
from .config import RunConfig, load_config, with_overrides
from .errors import AoaPlaError, ConfigurationError, DomainError
from .montecarlo import Hypothesis, phase_averaged_analytic, run_trials
from .signal_model import inject_s1_fault
from .svg import plot_rows
from .sweeps import PRESETS, SweepRunner, rows_to_csv

log = logging.getLogger("aoa_pla_lab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI scenario file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="master seed (default: config, then $AOA_PLA_SEED, then 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoa-pla-lab", description="AoA physical-layer authentication bounds and simulation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="analytic report for one scenario")
    _add_common(p)
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    p.add_argument("--empirical", action="store_true", help="also run the Monte Carlo trials")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep", help="parameter sweep to CSV (and SVG)")
    _add_common(p)
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--empirical", action="store_true", help="add Monte Carlo columns")
    p.add_argument("--plot", action="store_true", help="write SVG plots next to the CSV")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--snr-step", type=float, help="SNR step of the fig1 preset in dB")
    p.add_argument("--offset-step", type=float, help="angular-offset step of the fig2 presets in degrees")
    p.add_argument("--phase-draws", type=int, help="phase realizations averaged by analytic phase-spread curves")
    p.add_argument("--timing", action="store_true", help="append a runtime_ms column (makes the CSV non-reproducible)")

    p = sub.add_parser("validate", help="run the oracle self-checks")
    p.add_argument("--suite", action="append", choices=sorted(validation.SUITES), help="restrict to a suite (repeatable)")
    p.add_argument("--inject-fault", choices=["s1"], help="perturb S1 by 1e-6 to demonstrate the checks catch it")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config, args.seed)
    if getattr(args, "preset", None):
        # a preset on the command line replaces any sweep in the file
        cfg = replace(cfg, preset_name=args.preset, sweep_axis=None, series_axis=None, series_values=None)
    return with_overrides(
        cfg,
        trials=getattr(args, "trials", None),
        snr_step=getattr(args, "snr_step", None),
        offset_step=getattr(args, "offset_step", None),
        phase_draws=getattr(args, "phase_draws", None),
    )


def _render_report(d: dict) -> str:
    lines = [f"{k:>22} : {v}" for k, v in d.items()]
    return "\n".join(lines)


def cmd_analytic(args) -> int:
    cfg = _load(args)
    sc = cfg.point.scenario(cfg.trials, cfg.seed, cfg.search)
    rep = analytic_report(sc.geometry, sc.theta_u, sc.spoofer, sc.sigma2, sc.snapshots, sc.alpha)
    out = rep.to_dict()
    if sc.phase_spread.active:
        avg = phase_averaged_analytic(sc, cfg.phase_draws)
        out["phase_averaged"] = {
            "p_sd": avg.p_sd,
            "p_md": avg.p_md,
            "mean_theta0_deg": math.degrees(avg.mean_theta0),
            "mean_mcrb_k": avg.mean_mcrb_k,
            "mean_abs_gain": avg.mean_abs_gain,
            "draws": avg.draws,
        }
    if args.empirical:
        h0 = run_trials(sc, Hypothesis.H0, workers=args.workers)
        h1 = run_trials(sc, Hypothesis.H1, workers=args.workers)
        out["empirical"] = {
            "trials": sc.trials,
            "seed": sc.seed,
            "p_fa_hat": h0.p_fa_hat.p_hat,
            "p_fa_ci": [h0.p_fa_hat.ci_low, h0.p_fa_hat.ci_high],
            "p_sd_hat": h1.p_sd_hat.p_hat,
            "p_sd_ci": [h1.p_sd_hat.ci_low, h1.p_sd_hat.ci_high],
            "h0_var": h0.theta_var,
            "h1_mean_deg": math.degrees(h1.theta_mean),
            "h1_var": h1.theta_var,
        }
    text = json.dumps(out, indent=2, sort_keys=False)
    print(text if args.json else _render_report({k: v for k, v in out.items() if not isinstance(v, dict)}))
    if not args.json:
        for key in ("phase_averaged", "empirical"):
            if key in out:
                print(f"[{key}]")
                print(_render_report(out[key]))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "analytic.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    plan = cfg.sweeps()
    runner = SweepRunner(
        empirical=args.empirical,
        trials=cfg.trials,
        seed=cfg.seed,
        workers=args.workers,
        search=cfg.search,
        phase_draws=cfg.phase_draws,
    )
    rows = runner.run(plan.sweeps)
    text = rows_to_csv(rows, cfg.seed, timing=args.timing)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{plan.name}.csv"
    csv_path.write_text(text, encoding="utf-8")
    print(f"wrote {csv_path} ({len(rows)} rows)")
    if args.plot:
        for metric in ("p_sd", "p_fa"):
            svg_path = out / f"{plan.name}_{metric}.svg"
            svg_path.write_text(plot_rows(rows, plan.name, plan.x_label, plan.log_x, metric), encoding="utf-8")
            print(f"wrote {svg_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.inject_fault == "s1":
        inject_s1_fault(1e-6)
    try:
        results, elapsed = validation.run_all(args.suite)
    finally:
        inject_s1_fault(0.0)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  [{r.suite}] {r.name}: {r.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {elapsed:.1f} s")
    if elapsed > validation.SOFT_BUDGET_S:
        print(f"warning: validation exceeded the {validation.SOFT_BUDGET_S:.0f} s budget", file=sys.stderr)
    for r in failed:
        print(f"violated: {r.name}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"analytic": cmd_analytic, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AoaPlaError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
