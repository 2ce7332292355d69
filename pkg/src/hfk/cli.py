"""Command-line interface.

Subcommands: synth, simulate, verify, worst-case, report.  Every emitted
artifact embeds the tool version, the full parsed configuration, the
master seed, and tags naming the checks performed, so a rerun with the
same configuration reproduces the files byte for byte.

Exit codes: 0 success, 2 synthesis infeasible, 3 ill-conditioned
recovery, 4 input/output failure, 5 simulation divergence, 6 a
verification check reported a violation, 7 worst-case gate not negative
definite, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, fixtures
from .exprs import ExpressionError, nonlinear_filter_from_json, \
    nonlinear_system_from_json
from .model import DimensionError, LinearFilter, augment_linear, \
    augment_nonlinear, load_linear_system
from .sim import DisturbanceSignal, DivergenceError, NoiseModel, \
    UndefinedRatioError, empirical_gain, energy_report_to_csv, monte_carlo, \
    simulate_trajectory, trajectory_to_csv, trial_seed
from .synth import GateNotNegativeError, IllConditionedError, InfeasibleError, \
    MinGammaResult, NoBracketError, SynthesisResult, h2_cost_under_worst_case, \
    min_gamma, synthesize_h2_hinf, synthesize_hinf, worst_case_disturbance
from .verify import Box, QuadraticLyapunov, check_affine_inequalities, gari_check

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_ILL_CONDITIONED = 3
EXIT_IO = 4
EXIT_DIVERGENCE = 5
EXIT_COUNTEREXAMPLE = 6
EXIT_GATE = 7
EXIT_USAGE = 64


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors get their own exit code
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _envelope(args: argparse.Namespace, checks: list[str]) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"tool": "hfk", "version": __version__,
            "command": args.command, "config": config,
            "master_seed": getattr(args, "seed", None), "checks": checks}


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_vector(text: str | None, length: int, name: str) -> np.ndarray:
    if text is None:
        return np.zeros(length)
    try:
        vec = np.array([float(part) for part in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse {name} {text!r}") from None
    if vec.shape != (length,):
        raise UsageError(f"{name} must have {length} comma-separated entries")
    return vec


def _parse_disturbance(text: str | None, default: DisturbanceSignal,
                       n_v: int) -> DisturbanceSignal:
    if text is None:
        return default
    if text == "zero":
        return DisturbanceSignal.zero(n_v)
    if text.startswith("geometric:"):
        parts = text[len("geometric:"):].split(",")
        if len(parts) != 2:
            raise UsageError("geometric disturbance needs amplitude,ratio")
        try:
            return DisturbanceSignal.geometric(float(parts[0]), float(parts[1]), n_v)
        except ValueError as err:
            raise UsageError(str(err)) from None
    raise UsageError(f"unknown disturbance {text!r}")


def _load_result(path: str) -> SynthesisResult:
    with open(path) as fh:
        return SynthesisResult.from_json(json.load(fh)["result"])


def _report_lines(result: SynthesisResult) -> list[str]:
    aug = result.augmented()
    rho = float(np.max(np.abs(np.linalg.eigvals(aug.a_t))))
    recovery = result.recovery_residual()
    checks = [
        ("constraint margin", result.constraint_lambda_max <= -result.delta,
         f"lambda_max = {result.constraint_lambda_max:.6e} <= -delta = {-result.delta:.3e}"),
        ("positivity floors", all(v >= result.eps for v in
                                  result.floor_lambda_min.values()),
         ", ".join(f"{k}: {v:.6e}" for k, v in
                   sorted(result.floor_lambda_min.items()))),
        ("riccati gate", float(result.gari.gate_eigs[-1]) < 0.0,
         f"max gate eig = {float(result.gari.gate_eigs[-1]):.6e}"),
        ("riccati residual", float(result.gari.schur_eigs[-1]) < 0.0,
         f"max residual eig = {float(result.gari.schur_eigs[-1]):.6e}"),
        ("joint quadratic form", result.gari.joint_lambda_max < 0.0,
         f"lambda_max = {result.gari.joint_lambda_max:.6e}"),
        ("gain recovery", recovery <= 1e-8,
         f"relative residual of P2 khat = PK: {recovery:.3e}"),
        ("spectral radius", rho < 1.0, f"rho(At) = {rho:.6f}"),
    ]
    lines = [f"hfk {__version__} synthesis report",
             f"gamma = {result.gamma}",
             f"trace(P1+P2) = {result.trace_value:.6f}",
             f"objective minimized: {result.minimized}", ""]
    for name, ok, detail in checks:
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return lines


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        if args.system is not None:
            sys_model = load_linear_system(args.system)
        elif args.fixture == "example52":
            sys_model = fixtures.example52_system()
        else:
            raise UsageError("synth needs --system or --fixture example52")
    except UsageError:
        raise
    except (OSError, json.JSONDecodeError, DimensionError, KeyError) as err:
        print(f"error: cannot load system: {err}", file=sys.stderr)
        return EXIT_IO

    bisection: MinGammaResult | None = None
    try:
        if args.min_gamma:
            bisection = min_gamma(sys_model, lo=args.lo, hi=args.hi,
                                  tol=args.tol, eps=args.eps)
            result = bisection.result
        elif args.minimize_trace:
            result = synthesize_h2_hinf(sys_model, args.gamma, eps=args.eps,
                                        delta=args.delta)
        else:
            result = synthesize_hinf(sys_model, args.gamma, eps=args.eps,
                                     delta=args.delta)
    except NoBracketError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InfeasibleError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IllConditionedError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ILL_CONDITIONED

    os.makedirs(args.out_dir, exist_ok=True)
    doc = _envelope(args, ["block-lmi-feasibility",
                           "independent-eigenvalue-certification",
                           "riccati-split-check"])
    doc["result"] = result.to_json()
    if bisection is not None:
        doc["bisection"] = {
            "gamma_star": bisection.gamma_star,
            "evaluations": [[g, ok] for g, ok in bisection.evaluations],
            "warning": bisection.warning,
        }
    _write_json(os.path.join(args.out_dir, "synthesis.json"), doc)
    with open(os.path.join(args.out_dir, "synthesis_report.txt"), "w") as fh:
        fh.write("\n".join(_report_lines(result)) + "\n")
    print(f"synthesized filter at gamma={result.gamma}: "
          f"trace={result.trace_value:.6f}, "
          f"lambda_max={result.constraint_lambda_max:.3e}")
    return EXIT_OK


def _simulation_setup(args: argparse.Namespace):
    """Resolve (augmented system, eta0, disturbance, gamma, metadata)."""
    meta: dict = {}
    if args.fixture == "example51":
        sys_model = fixtures.example51_system()
        filt = fixtures.example51_filter()
        aug = augment_nonlinear(sys_model, filt)
        x0 = _parse_vector(args.x0, 2, "--x0")
        xh0 = _parse_vector(args.xhat0, 2, "--xhat0")
        eta0 = np.concatenate([x0, xh0])
        default_dist = fixtures.example51_disturbance()
        gamma = args.gamma if args.gamma is not None else fixtures.EXAMPLE51_GAMMA
    elif args.fixture == "example52" or args.system is not None \
            or args.result is not None:
        if args.result is not None:
            result = _load_result(args.result)
            sys_model, gain = result.system, result.gain
            gamma = args.gamma if args.gamma is not None else result.gamma
            meta["gain_source"] = "result-file"
        else:
            if args.system is not None:
                sys_model = load_linear_system(args.system)
            else:
                sys_model = fixtures.example52_system()
            gamma = args.gamma if args.gamma is not None else 1.0
            result = synthesize_hinf(sys_model, gamma)
            gain = result.gain
            meta["gain_source"] = f"synthesized at gamma={gamma}"
        aug = augment_linear(sys_model, gain)
        n = sys_model.dims.n_x
        x0 = _parse_vector(args.x0, n, "--x0")
        xh0 = _parse_vector(args.xhat0, n, "--xhat0")
        eta0 = np.concatenate([x0, x0 - xh0])
        if args.fixture == "example52":
            default_dist = fixtures.example52_disturbance()
        else:
            default_dist = DisturbanceSignal.zero(sys_model.dims.n_v)
        meta["gain"] = gain.gain.tolist()
    else:
        raise UsageError("simulate needs --fixture, --system, or --result")
    dist = _parse_disturbance(args.disturbance, default_dist, aug.n_v)
    return aug, eta0, dist, gamma, meta


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.horizon < 0:
        raise UsageError("--horizon must be nonnegative")
    try:
        aug, eta0, dist, gamma, meta = _simulation_setup(args)
    except (OSError, json.JSONDecodeError, DimensionError, KeyError) as err:
        print(f"error: cannot load inputs: {err}", file=sys.stderr)
        return EXIT_IO
    except InfeasibleError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE

    noise = NoiseModel(n_w=aug.n_w)
    try:
        report = monte_carlo(aug, dist, noise, eta0, args.horizon,
                             args.trials, args.seed)
        first = simulate_trajectory(aug, dist, noise, eta0, args.horizon,
                                    trial_seed(args.seed, 0))
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE

    os.makedirs(args.out_dir, exist_ok=True)
    doc = _envelope(args, ["monte-carlo-energy", "cumulative-gain-inequality"])
    doc["metadata"] = meta
    doc["disturbance"] = dist.describe()
    doc["gamma"] = gamma
    doc["energy"] = report.to_json()
    if report.cum_v[-1] > 0.0:
        doc["gain_check"] = empirical_gain(report, gamma).to_json()
    else:
        doc["gain_check"] = None
    _write_json(os.path.join(args.out_dir, "energy.json"), doc)
    energy_report_to_csv(report, os.path.join(args.out_dir, "energy.csv"))
    trajectory_to_csv(first, os.path.join(args.out_dir, "trajectory.csv"))
    print(f"simulated {args.trials} trials over horizon {args.horizon}; "
          f"final energies z={report.cum_z[-1]:.6g} v={report.cum_v[-1]:.6g}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    if args.fixture == "example51":
        sys_affine, filt_affine = fixtures.example51_affine()
        gamma = args.gamma if args.gamma is not None else fixtures.EXAMPLE51_GAMMA
        domain = Box.symmetric(args.box, sys_affine.dims.n_x + filt_affine.n_state)
        outcome = check_affine_inequalities(
            sys_affine, filt_affine, np.eye(2), np.eye(2), gamma,
            domain, points=args.points, seed=args.seed)
        doc = _envelope(args, ["affine-gate-inequality", "affine-drift-inequality"])
        doc["gamma"] = gamma
        doc["outcome"] = outcome.to_json()
        _write_json(os.path.join(args.out_dir, "verify.json"), doc)
        if outcome.violated:
            print(f"violation found: {outcome.counterexample.label} margin "
                  f"{outcome.counterexample.value:.6g}", file=sys.stderr)
            return EXIT_COUNTEREXAMPLE
        print(f"no violation found over {outcome.points_checked} points "
              f"(worst margin {outcome.max_margin:.6g})")
        return EXIT_OK

    if args.result is None:
        raise UsageError("verify needs --fixture example51 or --result")
    try:
        result = _load_result(args.result)
    except (OSError, json.JSONDecodeError, KeyError) as err:
        print(f"error: cannot load result: {err}", file=sys.stderr)
        return EXIT_IO
    gamma = args.gamma if args.gamma is not None else result.gamma
    report = gari_check(result.lyapunov, result.augmented(), gamma)
    doc = _envelope(args, ["riccati-split-check"])
    doc["gamma"] = gamma
    doc["gari"] = report.to_json()
    _write_json(os.path.join(args.out_dir, "verify.json"), doc)
    if not report.feasible:
        print(f"riccati check failed: joint lambda_max "
              f"{report.joint_lambda_max:.6g}", file=sys.stderr)
        return EXIT_COUNTEREXAMPLE
    print(f"riccati check passed: joint lambda_max {report.joint_lambda_max:.6g}")
    return EXIT_OK


def cmd_worst_case(args: argparse.Namespace) -> int:
    try:
        result = _load_result(args.result)
    except (OSError, json.JSONDecodeError, KeyError) as err:
        print(f"error: cannot load result: {err}", file=sys.stderr)
        return EXIT_IO
    gamma = args.gamma if args.gamma is not None else result.gamma
    aug = result.augmented()
    lyap = result.lyapunov
    try:
        law = worst_case_disturbance(aug, lyap, gamma)
    except GateNotNegativeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_GATE
    eta0 = _parse_vector(args.eta0, aug.n_eta, "--eta0")
    try:
        cost = h2_cost_under_worst_case(aug, law, lyap, eta0, args.trials,
                                        args.horizon, args.seed)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    os.makedirs(args.out_dir, exist_ok=True)
    doc = _envelope(args, ["worst-case-gate", "h2-cost-residual"])
    doc["law"] = law.to_json()
    doc["cost"] = cost.to_json()
    _write_json(os.path.join(args.out_dir, "worst_case.json"), doc)
    print(f"worst-case feedback computed: residual {cost.residual:.6g} "
          f"(stderr {cost.stderr:.3g})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        result = _load_result(args.result)
    except (OSError, json.JSONDecodeError, KeyError) as err:
        print(f"error: cannot load result: {err}", file=sys.stderr)
        return EXIT_IO
    os.makedirs(args.out_dir, exist_ok=True)
    lines = _report_lines(result)
    with open(os.path.join(args.out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hfk",
                     description="H-infinity filter synthesis and verification "
                                 "for discrete-time stochastic systems")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default="out", help="artifact directory")
        p.add_argument("--seed", type=int, default=0, help="master seed")

    p = sub.add_parser("synth", help="synthesize a filter via the block constraint")
    p.add_argument("--fixture", choices=["example52"])
    p.add_argument("--system", help="linear system JSON file")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--min-gamma", action="store_true",
                   help="bisect for the smallest feasible level")
    p.add_argument("--lo", type=float, default=1e-6)
    p.add_argument("--hi", type=float, default=1e3)
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--minimize-trace", action="store_true")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--delta", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="seeded Monte Carlo simulation")
    p.add_argument("--fixture", choices=list(fixtures.FIXTURE_NAMES))
    p.add_argument("--system", help="linear system JSON file")
    p.add_argument("--result", help="synthesis result JSON file")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--x0", help="initial plant state, comma-separated")
    p.add_argument("--xhat0", help="initial filter state, comma-separated")
    p.add_argument("--disturbance", help="zero or geometric:a,r")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="analytic/sampling stability checks")
    p.add_argument("--fixture", choices=["example51"])
    p.add_argument("--result", help="synthesis result JSON file")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--points", type=int, default=100_000)
    p.add_argument("--box", type=float, default=3.0,
                   help="half-width of the sampling box")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("worst-case", help="worst-case disturbance analysis")
    p.add_argument("--result", required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--eta0", help="initial augmented state, comma-separated")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--horizon", type=int, default=300)
    common(p)
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("report", help="human-readable synthesis report")
    p.add_argument("--result", required=True)
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ExpressionError, UndefinedRatioError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
