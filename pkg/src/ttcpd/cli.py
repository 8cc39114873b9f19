"""Command-line interface: ``ttcpd {calibrate,simulate,check,wcdr,experiment}``.

Exit codes
----------
0  success (``check``: panel identifiable)
1  other calibration error
2  command-line usage error
3  input file could not be read or parsed
4  panel not identifiable (singular system or portfolio without data)
5  nonlinear calibration did not converge
6  numeric input outside the model's domain

If ``--output`` is not given, ``calibrate`` writes to stdout and ``simulate``
/ ``experiment`` write into ``$TTCPD_OUTPUT_DIR`` (default: current directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .datasets import PAPER_HORIZON, paper_setup, reference_factor_path
from .errors import CalibrationError, DomainError, EmptyPortfolio, NotConverged, SingularSystem
from .identifiability import AvailabilityMask, check_identifiability
from .model import CORPORATE, RETAIL, AssetClassParams, BaselLinked, CalibrationConfig, FixedRho, basel_rho, wcdr
from .nonlinear import calibrate
from .simulator import AR1, ExplicitPath, SimulationSpec, gen_default_panel, gen_factor_path
from .simulator import run_recovery_experiment, run_sample_size_sweep

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_UNIDENTIFIABLE = 4
EXIT_NOT_CONVERGED = 5
EXIT_DOMAIN = 6

OUTPUT_DIR_ENV = "TTCPD_OUTPUT_DIR"

log = logging.getLogger("ttcpd")


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _asset_class(tokens):
    if not tokens:
        return None
    name = tokens[0].lower()
    if name == "corporate" and len(tokens) == 1:
        return CORPORATE
    if name == "retail" and len(tokens) == 1:
        return RETAIL
    if name == "custom" and len(tokens) == 2:
        vals = _floats(tokens[1])
        if len(vals) != 3:
            raise UsageError("--asset-class custom expects rho_min,rho_max,W")
        return AssetClassParams(*vals)
    raise UsageError("--asset-class must be corporate, retail or 'custom rho_min,rho_max,W'")


def _output_dir():
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_calibrate(args):
    panel = io.read_panel(args.input)
    asset_class = _asset_class(args.asset_class)
    if args.fixed_rho is not None and asset_class is not None:
        raise UsageError("--fixed-rho and --asset-class are mutually exclusive")
    if args.fixed_rho is not None:
        if len(args.fixed_rho) not in (1, len(panel.portfolio_ids)):
            raise UsageError(f"--fixed-rho needs 1 or {len(panel.portfolio_ids)} values")
        mode = FixedRho(tuple(args.fixed_rho))
        rho_for_check = np.broadcast_to(np.array(mode.values), (len(panel.portfolio_ids),))
    else:
        mode = BaselLinked(asset_class or CORPORATE)
        rho_for_check = None
    config = CalibrationConfig(
        alpha_mean=args.alpha,
        tol=args.tol,
        max_iter=args.max_iter,
        clamp_eps=args.clamp_eps,
        rho_mode=mode,
        weight_by_obligors=args.weight_by_obligors,
    )
    report = check_identifiability(AvailabilityMask.from_panel(panel), rho_for_check)
    for note in report.notes:
        _warn(note)
    if not report.identifiable:
        print(report.summary(), file=sys.stderr)
        raise SingularSystem(report)

    result, trace = calibrate(panel, config)
    for rec in result.warnings:
        _warn(rec.message())
    doc = io.result_to_dict(result, config, report, trace, notes=report.notes)
    text = io.dumps(doc) if args.format == "json" else io.result_to_csv(doc)
    out = args.output
    if out is None and OUTPUT_DIR_ENV in os.environ:
        out = _output_dir() / f"{Path(args.input).stem}.result.{args.format}"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def _spec_from_args(args, n_default=None):
    """Assemble a SimulationSpec from --spec / --paper-setup / explicit flags."""
    if getattr(args, "spec", None):
        try:
            spec = io.spec_from_dict(json.loads(Path(args.spec).read_text()))
        except json.JSONDecodeError as exc:
            raise io.PanelFormatError(f"{args.spec}: {exc}") from None
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.n is not None:
            overrides["n_obligors"] = args.n
        if overrides:
            from dataclasses import replace

            spec = replace(spec, **overrides)
        if args.mask:
            spec = _with_mask(spec, args.mask)
        return spec
    if args.seed is None:
        raise UsageError("--seed is required for reproducible simulation")
    n = args.n if args.n is not None else n_default
    if args.paper_setup:
        if n is None:
            raise UsageError("--n is required")
        spec = paper_setup(n, args.seed)
    else:
        if args.pds is None or n is None:
            raise UsageError("give --paper-setup, --spec, or at least --pds and --n")
        asset_class = _asset_class(args.asset_class) or CORPORATE
        if args.factor_file:
            factor = ExplicitPath(io.read_factor_path(args.factor_file))
            horizon = len(factor.path)
        elif args.ar1 is not None:
            factor = AR1(args.ar1)
            horizon = args.years or PAPER_HORIZON
        else:
            factor = ExplicitPath(reference_factor_path())
            horizon = PAPER_HORIZON
            if args.years not in (None, horizon):
                raise UsageError("the reference factor path has 20 years; use --ar1 or --factor-file")
        spec = SimulationSpec(
            true_ttc_pds=tuple(args.pds),
            horizon=horizon,
            factor_spec=factor,
            n_obligors=n,
            asset_class=asset_class,
            seed=args.seed,
            first_year=args.first_year,
        )
    if args.mask:
        spec = _with_mask(spec, args.mask)
    return spec


def _with_mask(spec, path):
    from dataclasses import replace

    mask = io.read_mask(path)
    if mask.shape != (len(spec.true_ttc_pds), spec.horizon):
        raise io.PanelFormatError(
            f"{path}: mask is {mask.shape[0]}x{mask.shape[1]}, spec needs {len(spec.true_ttc_pds)}x{spec.horizon}"
        )
    return replace(spec, mask=AvailabilityMask(mask.grid, spec.portfolio_ids, spec.years))


def cmd_simulate(args):
    spec = _spec_from_args(args)
    if spec.mask is not None:
        report = check_identifiability(spec.mask, spec.true_rho)
        if not report.identifiable:
            _warn("mask is not identifiable; the generated panel cannot be calibrated")
            for note in report.notes:
                _warn(note)
    factor = gen_factor_path(spec)
    panel, truth = gen_default_panel(spec, factor)
    out = Path(args.output) if args.output else _output_dir() / f"panel_seed{spec.seed}.csv"
    truth_path = Path(args.truth) if args.truth else out.with_name(out.stem + ".truth.json")
    io.write_panel(panel, out)
    truth_path.write_text(io.dumps(io.truth_to_dict(spec, factor, truth)))
    print(f"wrote {out} and {truth_path}", file=sys.stderr)
    return EXIT_OK


def cmd_check(args):
    panel = io.read_panel(args.input)
    report = check_identifiability(AvailabilityMask.from_panel(panel))
    if args.json:
        sys.stdout.write(io.dumps(report.to_dict()))
    else:
        print(report.summary())
    return EXIT_OK if report.identifiable else EXIT_UNIDENTIFIABLE


def cmd_wcdr(args):
    asset_class = _asset_class(args.asset_class)
    if (args.rho is None) == (asset_class is None):
        raise UsageError("give exactly one of --rho or --asset-class")
    rho = args.rho if args.rho is not None else basel_rho(args.pd, asset_class)
    value = wcdr(args.pd, rho, args.confidence)
    print(f"pd          {args.pd:.12g}")
    print(f"rho         {rho:.12g}")
    print(f"confidence  {args.confidence:.12g}")
    print(f"wcdr        {value:.12g}")
    return EXIT_OK


def cmd_experiment(args):
    config = CalibrationConfig(
        alpha_mean=args.alpha, tol=args.tol, max_iter=args.max_iter, clamp_eps=args.clamp_eps
    )
    out_dir = Path(args.output_dir) if args.output_dir else _output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix or args.kind
    if args.kind == "recovery":
        spec = _spec_from_args(args, n_default=100_000)
        exp = run_recovery_experiment(spec, config)
    else:
        spec = _spec_from_args(args, n_default=max(args.sizes))
        exp = run_sample_size_sweep(spec, args.sizes, args.replications, config, workers=args.workers)
        for msg in exp.sweep.failures:
            _warn(msg)
        (out_dir / f"{prefix}.table.csv").write_text(io.sweep_table_csv(exp))
    (out_dir / f"{prefix}.json").write_text(io.dumps(io.experiment_to_dict(exp, config)))
    (out_dir / f"{prefix}.series.csv").write_text(io.experiment_series(exp))
    if exp.result is not None:
        for pid, t, f in zip(spec.portfolio_ids, exp.true_ttc_pd, exp.result.ttc_pd):
            print(f"{pid}: true {t:.6g}  fitted {f:.6g}  rel. error {(f - t) / t:+.3%}")
    else:
        mean = exp.sweep.mean()
        for si, s in enumerate(exp.sweep.sizes):
            print(f"n={s}: " + "  ".join(f"{pid} {m:.6g}" for pid, m in zip(spec.portfolio_ids, mean[si])))
    print(f"wrote {prefix}.* to {out_dir}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_solver_flags(p):
    p.add_argument("--alpha", type=float, default=0.0, help="target mean of the factor path (default 0)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--clamp-eps", type=float, default=1e-6)


def _add_spec_flags(p):
    p.add_argument("--spec", help="simulation spec as JSON (same layout as the truth file's 'spec')")
    p.add_argument("--paper-setup", action="store_true", help="six corporate portfolios on the reference path")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="obligors per portfolio and year")
    p.add_argument("--pds", type=_floats, help="true TTC PDs, comma-separated")
    p.add_argument("--years", type=int, help="horizon (with --ar1)")
    p.add_argument("--first-year", type=int, default=1)
    p.add_argument("--ar1", type=float, metavar="PHI", help="simulate the factor as AR(1) with persistence PHI")
    p.add_argument("--factor-file", help="explicit factor path CSV (year,factor)")
    p.add_argument("--asset-class", nargs="+", metavar="CLASS")
    p.add_argument("--mask", help="availability mask file (rows of 0/1)")


def build_parser():
    parser = argparse.ArgumentParser(prog="ttcpd", description="Through-the-cycle PD calibration")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit TTC PDs, factor path and PIT PDs to a panel")
    p.add_argument("input")
    p.add_argument("--asset-class", nargs="+", metavar="CLASS", help="corporate | retail | custom RMIN,RMAX,W")
    p.add_argument("--fixed-rho", type=_floats, help="fixed correlations (one value, or one per portfolio)")
    _add_solver_flags(p)
    p.add_argument("--weight-by-obligors", action="store_true")
    p.add_argument("--output", "-o")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="generate a synthetic default panel and its truth file")
    _add_spec_flags(p)
    p.add_argument("--output", "-o")
    p.add_argument("--truth")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="report whether a panel's missing-data pattern is identifiable")
    p.add_argument("input")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("wcdr", help="worst-case default rate")
    p.add_argument("--pd", type=float, required=True)
    p.add_argument("--rho", type=float)
    p.add_argument("--asset-class", nargs="+", metavar="CLASS")
    p.add_argument("--confidence", type=float, default=0.999)
    p.set_defaults(func=cmd_wcdr)

    p = sub.add_parser("experiment", help="simulation experiments with plot-ready output")
    p.add_argument("kind", choices=["recovery", "sweep"])
    _add_spec_flags(p)
    _add_solver_flags(p)
    p.add_argument("--sizes", type=_ints, default=[1000, 3162, 10000, 31623, 100000])
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir")
    p.add_argument("--prefix")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ttcpd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.PanelFormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"ttcpd: cannot read input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SingularSystem, EmptyPortfolio) as exc:
        print(f"ttcpd: not identifiable: {exc}", file=sys.stderr)
        return EXIT_UNIDENTIFIABLE
    except NotConverged as exc:
        print(f"ttcpd: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except DomainError as exc:
        print(f"ttcpd: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except CalibrationError as exc:
        print(f"ttcpd: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
