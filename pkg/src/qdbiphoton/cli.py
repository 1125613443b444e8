"""Command-line interface: ``simulate``, ``analyze`` and ``reproduce-figures``.

Relative output paths are resolved against ``$QDBIPHOTON_OUTPUT_DIR`` when it
is set. Exit status: 0 success, 1 I/O or input-format error, 2 invalid
parameters, 3 fit did not converge (report still written).
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import FIT_KINDS, SINUSOID, FitError
from .counting import (
    DEFAULT_JITTER_LAMBDA,
    DEFAULT_N_SWEEPS,
    DEFAULT_PAIRS_PER_POINT,
    SweepConfig,
    SweepFormatError,
    SweepResult,
)
from .interferometer import DEFAULT_LAMBDA_NM
from .scenarios import REFERENCE_BACKGROUND, SCENARIOS, Scenario, build_report, dump_json, manifest, reproduce_figures, simulate

OUTPUT_DIR_ENV = "QDBIPHOTON_OUTPUT_DIR"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _out_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", 1) from None


def _add_sweep_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=80, help="grid points (default 80)")
    p.add_argument("--pairs", type=float, default=DEFAULT_PAIRS_PER_POINT,
                   help="expected detected pairs per point per sweep (default 1e4)")
    p.add_argument("--d-start", type=float, default=0.0, help="first retardation, nm")
    p.add_argument("--d-end", type=float, default=1350.0, help="last retardation, nm")
    p.add_argument("--jitter-lambda", type=float, default=DEFAULT_JITTER_LAMBDA,
                   help="retarder setting error, fraction of lambda (default 0.03)")
    p.add_argument("--sweeps", type=int, default=DEFAULT_N_SWEEPS, help="repeated sweeps summed per point")
    p.add_argument("--lambda-bar", type=float, default=DEFAULT_LAMBDA_NM, help="mean wavelength, nm")


_FLAG_NAMES = {
    "d_start_nm": "--d-start", "d_end_nm": "--d-end", "n_points": "--points", "pairs_per_point": "--pairs",
    "jitter_lambda": "--jitter-lambda", "n_sweeps": "--sweeps", "lambda_bar_nm": "--lambda-bar",
    "seed": "--seed", "s_ueV": "--s-uev", "tau_ns": "--tau-ns",
}


def _flagged(exc: Exception) -> str:
    msg = str(exc)
    for field_name, flag in _FLAG_NAMES.items():
        msg = msg.replace(field_name, flag)
    return msg


def _sweep_config(args) -> SweepConfig:
    try:
        return SweepConfig(d_start_nm=args.d_start, d_end_nm=args.d_end, n_points=args.points,
                           pairs_per_point=args.pairs, jitter_lambda=args.jitter_lambda,
                           n_sweeps=args.sweeps, seed=args.seed, lambda_bar_nm=args.lambda_bar)
    except ValueError as exc:
        raise CliError(f"invalid sweep parameter: {_flagged(exc)}", 2) from None


def cmd_simulate(args) -> int:
    cfg = _sweep_config(args)
    try:
        sc = Scenario(args.scenario, sweep=cfg, delta_lambda=args.delta_lambda, z=args.z, b=args.b,
                      s_ueV=args.s_ueV, tau_ns=args.tau_ns)
        sc.source()
    except ValueError as exc:
        raise CliError(f"invalid source parameter: {_flagged(exc)}", 2) from None
    sweep = simulate(sc)
    out = _out_path(args.out)
    man = _out_path(args.manifest) if args.manifest else out.with_suffix(".json")
    _write(out, sweep.to_csv())
    _write(man, dump_json(manifest(sc, {"csv": out.name})))
    print(f"wrote {len(sweep)} rows to {out}", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    try:
        sweep = SweepResult.from_csv(Path(args.input), lambda_bar_nm=args.lambda_bar)
        mixed = SweepResult.from_csv(Path(args.mixed_reference), lambda_bar_nm=args.lambda_bar) \
            if args.mixed_reference else None
    except SweepFormatError as exc:
        raise CliError(f"malformed sweep CSV: {exc}", 1) from None
    except OSError as exc:
        raise CliError(f"cannot read input: {exc}", 1) from None
    try:
        report = build_report(sweep, args.model, args.lambda_bar, args.weight, mixed)
    except FitError as exc:
        raise CliError(f"cannot fit: {exc}", 1) from None
    text = dump_json(report)
    if args.out:
        _write(_out_path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0 if report["status"] == "ok" else 3


def cmd_reproduce(args) -> int:
    out_dir = _out_path(args.out_dir)
    _sweep_config(args)
    if not 0.0 <= args.b <= 1.0:
        raise CliError(f"invalid source parameter: --b must lie in [0, 1], got {args.b!r}", 2)
    overrides = {"n_points": args.points, "jitter_lambda": args.jitter_lambda, "n_sweeps": args.sweeps,
                 "lambda_bar_nm": args.lambda_bar, "d_start_nm": args.d_start, "d_end_nm": args.d_end}
    try:
        doc = reproduce_figures(out_dir, seed=args.seed, pairs_per_point=args.pairs, b=args.b,
                                sweep_overrides=overrides)
    except OSError as exc:
        raise CliError(f"cannot write figures to {out_dir}: {exc.strerror or exc}", 1) from None
    print(f"wrote figure data for {', '.join(doc['figure_3'])} and single_photon to {out_dir}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdbiphoton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate one interferogram sweep")
    sim.add_argument("--scenario", choices=SCENARIOS, required=True)
    sim.add_argument("--b", type=float, default=0.0, help="background fraction")
    sim.add_argument("--z", type=float, default=None, help="interbasis coherence (overrides scenario default)")
    sim.add_argument("--delta-lambda", type=float, default=0.0, help="source phase offset, fraction of lambda")
    sim.add_argument("--s-uev", dest="s_ueV", type=float, default=None, help="fine-structure splitting, ueV")
    sim.add_argument("--tau-ns", type=float, default=None, help="exciton lifetime, ns (with --s-uev)")
    sim.add_argument("--out", default="sweep.csv", help="sweep CSV path")
    sim.add_argument("--manifest", default=None, help="run manifest JSON path (default: CSV path with .json)")
    _add_sweep_args(sim)
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="fit a sweep CSV and print a JSON report")
    ana.add_argument("input", help="sweep CSV")
    ana.add_argument("--model", choices=FIT_KINDS, default=SINUSOID)
    ana.add_argument("--lambda-bar", type=float, default=DEFAULT_LAMBDA_NM)
    ana.add_argument("--weight", choices=("inverse_sigma", "uniform"), default="inverse_sigma")
    ana.add_argument("--mixed-reference", default=None, help="mixed-classical sweep CSV for background bounds")
    ana.add_argument("--out", default=None, help="report path (default stdout)")
    ana.set_defaults(func=cmd_analyze)

    rep = sub.add_parser("reproduce-figures", help="simulate and fit the four canonical scenarios")
    rep.add_argument("--out-dir", default="figures")
    rep.add_argument("--b", type=float, default=REFERENCE_BACKGROUND)
    _add_sweep_args(rep)
    rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"qdbiphoton {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
