"""Command-line entry point: ``qmetro <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, QMetroError
from .estimation import (
    DEFAULT_GRID_POINTS,
    bayes_posterior,
    ml_estimate,
    outcomes_sample,
    sample_outcomes,
)
from .harness import (
    ExperimentConfig,
    merge_bundles,
    parse_axes,
    parse_phase,
    parse_state_spec,
    run_and_write,
)
from .interferometer import (
    NoiseModel,
    calibration_residual,
    fit_calibration,
    probability_model,
    simulate_calibration,
)
from .io import load_density_matrix, read_calibration_csv, read_outcomes, write_calibration_csv
from .qfi import classify_depth, optimize_axes, qfi, witness_value
from .states import collective_generator

log = logging.getLogger("qmetro")


class UsageError(Exception):
    pass


def _existing(path: str) -> str:
    if not Path(path).exists():
        raise UsageError(f"file not found: {path}")
    return path


def _load_state(args):
    if args.state_file and args.state:
        raise UsageError("give either --state or --state-file, not both")
    if args.state_file:
        return load_density_matrix(_existing(args.state_file))
    return parse_state_spec(args.state or "dicke:4:2")


def _noise(args):
    tilt = args.tilt
    if tilt is not None and "," in tilt:
        tilt = tuple(float(t) for t in tilt.split(","))
    elif tilt is not None:
        tilt = float(tilt)
    noise = NoiseModel(tilt or 0.0, args.white_noise, args.visibility)
    return None if noise.is_identity else noise


def _interval(args):
    lo, hi = (parse_phase(v) for v in args.interval.split(","))
    return lo, hi


def _add_state(p, axes=True):
    p.add_argument("--state", help="dicke:N:k, ghz:N or product:N:ket (default dicke:4:2)")
    p.add_argument("--state-file", help="density matrix JSON {dim, re, im}")
    if axes:
        p.add_argument("--axes", default="y", help="one axis label for all qubits or a comma list")


def _add_noise(p):
    p.add_argument("--tilt", help="misalignment angle(s) in radians, one value or a comma list")
    p.add_argument("--white-noise", type=float, default=0.0)
    p.add_argument("--visibility", type=float, default=1.0)


def _model(args):
    rho = _load_state(args)
    return probability_model(rho, parse_axes(args.axes, rho.n_qubits), _noise(args))


def cmd_qfi(args):
    rho = _load_state(args)
    if args.optimize:
        res = optimize_axes(rho, restarts=args.restarts, seed=args.seed)
        value = res.value
        axes = [[round(v, 6) for v in a.as_array()] for a in res.axes]
    else:
        value = qfi(rho, collective_generator(parse_axes(args.axes, rho.n_qubits)))
        axes = None
    n = rho.n_qubits
    depth = classify_depth(min(value, n * n), n)
    print(f"{value:.6f}")
    print(f"certified_depth={depth.certified_depth}")
    if axes is not None:
        print(f"axes={json.dumps(axes)}")


def cmd_witness(args):
    print(f"{witness_value(_load_state(args)):.6f}")


def cmd_curves(args):
    model = _model(args)
    lo, hi = _interval(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(
        state=args.state or "dicke:4:2",
        state_file=args.state_file,
        axes=args.axes,
        noise=(model.noise or NoiseModel()).as_dict(),
        theta0=[], m=[], interval=[lo, hi], curve_points=args.points,
        output_dir=str(out), figures=not args.no_figures,
    )
    run_and_write(cfg)
    if args.events:
        thetas = np.linspace(lo, hi, args.calibration_points)
        data = simulate_calibration(model, thetas, args.events, args.seed)
        write_calibration_csv(data, out / "calibration.csv")
    print(out)


def cmd_calibrate(args):
    data = read_calibration_csv(_existing(args.data))
    rho = _load_state(args)
    model = probability_model(rho, parse_axes(args.axes, rho.n_qubits))
    noise, fitted = fit_calibration(data, model, family=args.family, fit_visibility=args.fit_visibility)
    rms = float(np.sqrt(np.mean(calibration_residual(data, fitted) ** 2)))
    result = dict(noise.as_dict(), family=args.family, residual_rms=rms)
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)


def cmd_estimate(args):
    model = _model(args)
    interval = _interval(args)
    if args.outcomes:
        if args.theta0 is not None or args.m is not None:
            raise UsageError("--outcomes cannot be combined with --theta0/--m")
        sample = outcomes_sample(read_outcomes(_existing(args.outcomes)))
    else:
        if args.theta0 is None or args.m is None:
            raise UsageError("give --outcomes FILE or both --theta0 and --m")
        sample = sample_outcomes(model, parse_phase(args.theta0), args.m, args.seed)
    ml = ml_estimate(model, sample, interval, args.grid)
    post = bayes_posterior(model, sample, interval, args.grid)
    result = {
        "m": sample.m,
        "ml_theta_est": ml.theta_est,
        "bayes_theta_est": post.theta_est,
        "bayes_confidence": post.confidence,
        "bayes_clipped": post.clipped,
    }
    if np.isfinite(sample.theta_true):
        result["theta_true"] = sample.theta_true
    print(json.dumps(result, indent=2, sort_keys=True))


def cmd_campaign(args):
    if args.config:
        cfg = ExperimentConfig.load(_existing(args.config))
        if args.output:
            cfg.output_dir = args.output
    else:
        cfg = ExperimentConfig(
            state=args.state or "dicke:4:2",
            state_file=args.state_file and _existing(args.state_file),
            axes=args.axes,
            noise=(_noise(args) or NoiseModel()).as_dict(),
            theta0=args.theta0 or ["0.1pi", "0.2pi", "0.3pi"],
            m=args.m or [10, 100],
            repetitions=args.reps,
            base_seed=args.seed,
            interval=args.interval.split(","),
            grid_points=args.grid,
            output_dir=args.output or "report",
        )
        cfg.validate()
    if args.no_figures:
        cfg.figures = False
    print(run_and_write(cfg))


def cmd_report(args):
    paths = [_existing(p) for p in args.bundle]
    print(merge_bundles(paths, args.output, figures=not args.no_figures))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmetro", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qfi", help="quantum Fisher information and certified entanglement depth")
    _add_state(p)
    p.add_argument("--optimize", action="store_true", help="optimize the local axes")
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_qfi)

    p = sub.add_parser("witness", help="Dicke projector witness 2/3 - fidelity (4 qubits)")
    _add_state(p, axes=False)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("curves", help="write P(mu|theta) and F(theta) tables")
    _add_state(p)
    _add_noise(p)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--interval", default="0,0.5pi")
    p.add_argument("--events", type=int, default=0, help="also simulate calibration counts")
    p.add_argument("--calibration-points", type=int, default=31)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("calibrate", help="fit a noise model to calibration counts")
    _add_state(p)
    p.add_argument("--data", required=True, help="CSV with header theta,mu,count")
    p.add_argument("--family", choices=["collective", "per-qubit"], default="collective")
    p.add_argument("--fit-visibility", action="store_true")
    p.add_argument("--output")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("estimate", help="ML and Bayesian estimate from one m-experiment")
    _add_state(p)
    _add_noise(p)
    p.add_argument("--outcomes", help="file with header 'mu' and one outcome per line")
    p.add_argument("--theta0")
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--interval", default="0,0.5pi")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID_POINTS)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("campaign", help="Monte Carlo ML/Bayes campaign and full report bundle")
    p.add_argument("--config", help="experiment config JSON (flags below are then ignored)")
    _add_state(p)
    _add_noise(p)
    p.add_argument("--theta0", action="append", help="true phase, repeatable (e.g. 0.2pi)")
    p.add_argument("--m", type=int, action="append", help="m-experiment size, repeatable")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--interval", default="0,0.5pi")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--output")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("report", help="merge report bundles and render comparison figures")
    p.add_argument("--bundle", action="append", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"qmetro {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except QMetroError as exc:
        print(f"qmetro {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
