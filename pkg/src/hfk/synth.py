"""Filter synthesis, attenuation-level search, and worst-case analysis.

Synthesis solves the block constraint assembled by `hfk.sdp` for
(P1, P2, PK), recovers the observer gain from P2 khat = PK, and
post-verifies the closed loop through the Riccati-type check of
`hfk.verify`.  The worst-case disturbance of a certified design is a
linear state feedback whose gain follows from completing the square in
the disturbance channel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import LinearAugmentedSystem, LinearFilter, LinearStochasticSystem, \
    augment_linear, linear_system_from_json, linear_system_to_json
from .sdp import FeasibilityFailure, SdpSolution, assemble_lmi, minimize_trace, \
    solve_feasibility
from .sim import DisturbanceSignal, NoiseModel, monte_carlo, trial_seed
from .verify import GariReport, QuadraticLyapunov, gari_check


class SynthesisError(RuntimeError):
    pass


class InfeasibleError(SynthesisError):
    """No feasible point found within the solver budget (not a proof)."""

    def __init__(self, gamma: float, failure: FeasibilityFailure):
        self.gamma = gamma
        self.failure = failure
        super().__init__(
            f"no feasible point found at gamma={gamma} "
            f"(best lambda_max {failure.best_lambda_max:.3e}, {failure.reason})")


class IllConditionedError(SynthesisError):
    """Gain recovery refused because P2 is numerically singular."""


class GateNotNegativeError(SynthesisError):
    """The disturbance gate is not negative definite at this (P, gamma)."""


MAX_RECOVERY_CONDITION = 1e12


@dataclass(frozen=True)
class SynthesisResult:
    """A certified filter design at a given attenuation level."""

    system: LinearStochasticSystem
    gain: LinearFilter
    p1: np.ndarray
    p2: np.ndarray
    p_k: np.ndarray
    gamma: float
    trace_value: float
    constraint_lambda_max: float
    floor_lambda_min: dict
    eps: float
    delta: float
    gari: GariReport
    minimized: bool
    gap_estimate: float | None

    @property
    def lyapunov(self) -> QuadraticLyapunov:
        return QuadraticLyapunov.block_diag(self.p1, self.p2)

    def augmented(self) -> LinearAugmentedSystem:
        return augment_linear(self.system, self.gain)

    def recovery_residual(self) -> float:
        """Relative residual of P2 khat = PK."""
        return float(np.linalg.norm(self.p2 @ self.gain.gain - self.p_k)
                     / max(1e-300, np.linalg.norm(self.p_k)))

    def to_json(self) -> dict:
        return {
            "system": linear_system_to_json(self.system),
            "gain": self.gain.gain.tolist(),
            "p1": self.p1.tolist(),
            "p2": self.p2.tolist(),
            "p_k": self.p_k.tolist(),
            "gamma": self.gamma,
            "trace_value": self.trace_value,
            "constraint_lambda_max": self.constraint_lambda_max,
            "floor_lambda_min": dict(self.floor_lambda_min),
            "eps": self.eps,
            "delta": self.delta,
            "gari": self.gari.to_json(),
            "minimized": self.minimized,
            "gap_estimate": self.gap_estimate,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SynthesisResult":
        system = linear_system_from_json(doc["system"])
        gari = GariReport(
            schur_eigs=np.asarray(doc["gari"]["schur_eigs"], dtype=float),
            gate_eigs=np.asarray(doc["gari"]["gate_eigs"], dtype=float),
            feasible=bool(doc["gari"]["feasible"]),
            joint_lambda_max=float(doc["gari"]["joint_lambda_max"]))
        return cls(system=system,
                   gain=LinearFilter(np.asarray(doc["gain"], dtype=float)),
                   p1=np.asarray(doc["p1"], dtype=float),
                   p2=np.asarray(doc["p2"], dtype=float),
                   p_k=np.asarray(doc["p_k"], dtype=float),
                   gamma=float(doc["gamma"]),
                   trace_value=float(doc["trace_value"]),
                   constraint_lambda_max=float(doc["constraint_lambda_max"]),
                   floor_lambda_min=dict(doc["floor_lambda_min"]),
                   eps=float(doc["eps"]), delta=float(doc["delta"]),
                   gari=gari, minimized=bool(doc["minimized"]),
                   gap_estimate=doc.get("gap_estimate"))


def recover_gain(p2: np.ndarray, p_k: np.ndarray) -> LinearFilter:
    """Solve P2 khat = PK for the observer gain.

    Solving the linear system instead of forming the inverse keeps the
    recovery stable when P2 is poorly conditioned; beyond condition 1e12
    the recovery is refused.
    """
    p2 = np.asarray(p2, dtype=float)
    eigs = np.linalg.eigvalsh(0.5 * (p2 + p2.T))
    if eigs[0] <= 0.0 or eigs[-1] / eigs[0] > MAX_RECOVERY_CONDITION:
        raise IllConditionedError(
            f"P2 condition number {eigs[-1] / max(eigs[0], 1e-300):.3e} "
            "exceeds the recovery limit")
    return LinearFilter(np.linalg.solve(p2, np.asarray(p_k, dtype=float)))


def _finish(sys: LinearStochasticSystem, gamma: float, sol: SdpSolution,
            minimized: bool) -> SynthesisResult:
    p1, p2, p_k = sol.blocks["p1"], sol.blocks["p2"], sol.blocks["pk"]
    filt = recover_gain(p2, p_k)
    aug = augment_linear(sys, filt)
    lyap = QuadraticLyapunov.block_diag(p1, p2)
    gari = gari_check(lyap, aug, gamma)
    if not gari.feasible:
        raise SynthesisError(
            "internal inconsistency: certified constraint but failed "
            "Riccati post-verification")
    return SynthesisResult(system=sys, gain=filt, p1=p1, p2=p2, p_k=p_k,
                           gamma=float(gamma),
                           trace_value=float(np.trace(p1) + np.trace(p2)),
                           constraint_lambda_max=sol.constraint_lambda_max,
                           floor_lambda_min=sol.floor_lambda_min,
                           eps=sol.eps, delta=sol.delta, gari=gari,
                           minimized=minimized, gap_estimate=sol.gap_estimate)


def synthesize_hinf(sys: LinearStochasticSystem, gamma: float,
                    eps: float = 1e-6, delta: float | None = None,
                    max_iter: int = 500) -> SynthesisResult:
    """Find a certified filter at attenuation level gamma.

    Raises InfeasibleError when the solver finds no point within budget
    and IllConditionedError when the recovery solve is refused.
    """
    problem = assemble_lmi(sys, gamma)
    sol = solve_feasibility(problem, eps=eps, delta=delta, max_iter=max_iter)
    if isinstance(sol, FeasibilityFailure):
        raise InfeasibleError(gamma, sol)
    return _finish(sys, gamma, sol, minimized=False)


def synthesize_h2_hinf(sys: LinearStochasticSystem, gamma: float,
                       eps: float = 1e-6, delta: float | None = None,
                       max_iter: int = 500) -> SynthesisResult:
    """Among gamma-level designs, minimize trace(P1 + P2)."""
    problem = assemble_lmi(sys, gamma)
    sol = minimize_trace(problem, eps=eps, delta=delta, max_iter=max_iter)
    if isinstance(sol, FeasibilityFailure):
        raise InfeasibleError(gamma, sol)
    return _finish(sys, gamma, sol, minimized=True)


@dataclass(frozen=True)
class MinGammaResult:
    gamma_star: float
    result: SynthesisResult
    evaluations: tuple[tuple[float, bool], ...]
    warning: str | None = None


class NoBracketError(SynthesisError):
    """The upper end of the bisection bracket is not feasible."""


def min_gamma(sys: LinearStochasticSystem, lo: float = 1e-6, hi: float = 1e3,
              tol: float = 1e-2, eps: float = 1e-6,
              max_iter: int = 500) -> MinGammaResult:
    """Bisect for the smallest certified-feasible attenuation level.

    Relies on the monotone structure of the feasible set: a level that
    admits a design admits every larger level.  A solver failure is
    treated as the infeasible side of the bracket (it is not a proof of
    infeasibility, so gamma_star is an upper bound on the true optimum).
    """
    if not (lo <= hi):
        raise ValueError("need lo <= hi")
    if tol <= 0:
        raise ValueError("tol must be positive")

    evaluations: list[tuple[float, bool]] = []

    def attempt(gamma: float) -> SynthesisResult | None:
        try:
            result = synthesize_hinf(sys, gamma, eps=eps, max_iter=max_iter)
        except SynthesisError:
            evaluations.append((gamma, False))
            return None
        evaluations.append((gamma, True))
        return result

    best = attempt(hi)
    if best is None:
        raise NoBracketError(f"upper bracket gamma={hi} is not feasible")
    best_gamma = hi
    if lo == hi:
        return MinGammaResult(gamma_star=hi, result=best,
                              evaluations=tuple(evaluations),
                              warning="degenerate-bracket: lo == hi")
    low_result = attempt(lo)
    if low_result is not None:
        return MinGammaResult(gamma_star=lo, result=low_result,
                              evaluations=tuple(evaluations),
                              warning="degenerate-bracket: lower end feasible")
    lo_cur, hi_cur = lo, hi
    while hi_cur - lo_cur > tol:
        mid = 0.5 * (lo_cur + hi_cur)
        result = attempt(mid)
        if result is None:
            lo_cur = mid
        else:
            hi_cur = mid
            best, best_gamma = result, mid
    return MinGammaResult(gamma_star=best_gamma, result=best,
                          evaluations=tuple(evaluations))


@dataclass(frozen=True)
class WorstCaseLaw:
    """Linear worst-case disturbance v_k = f_gain @ eta_k."""

    f_gain: np.ndarray
    gate: np.ndarray
    gamma: float
    gate_condition: float

    def to_json(self) -> dict:
        return {"f_gain": self.f_gain.tolist(), "gate": self.gate.tolist(),
                "gamma": self.gamma, "gate_condition": self.gate_condition}


def worst_case_disturbance(aug: LinearAugmentedSystem, lyap: QuadraticLyapunov,
                           gamma: float) -> WorstCaseLaw:
    """The disturbance feedback maximizing the Hamiltonian margin.

    With gate = Bt'P Bt + Dt'P Dt + Mt'Mt - gamma^2 I (required negative
    definite) and T = At'P Bt + Ct'P Dt + Gt'Mt, the maximizer of the
    margin over v at fixed eta is v = -gate^{-1} T' eta.
    """
    p = lyap.p
    at, bt, ct, dt, gt, mt = aug.a_t, aug.b_t, aug.c_t, aug.d_t, aug.g_t, aug.m_t
    gate = bt.T @ p @ bt + dt.T @ p @ dt + mt.T @ mt - gamma**2 * np.eye(aug.n_v)
    gate = 0.5 * (gate + gate.T)
    eigs = np.linalg.eigvalsh(gate)
    if eigs[-1] >= 0.0:
        raise GateNotNegativeError(
            f"gate lambda_max = {eigs[-1]:.3e} >= 0 at gamma={gamma}")
    t = at.T @ p @ bt + ct.T @ p @ dt + gt.T @ mt
    f_gain = -np.linalg.solve(gate, t.T)
    cond = float(np.abs(eigs[0]) / np.abs(eigs[-1]))
    return WorstCaseLaw(f_gain=f_gain, gate=gate, gamma=float(gamma),
                        gate_condition=cond)


@dataclass(frozen=True)
class H2CostReport:
    """Monte Carlo energies of the worst-case closed loop.

    residual = E sum||z||^2 - gamma^2 E sum||v||^2 - V(eta0).  A strictly
    feasible design keeps the residual nonpositive up to sampling noise;
    it approaches zero as the Riccati margin shrinks to equality.
    """

    z_energy: float
    v_energy: float
    gamma: float
    v0: float
    residual: float
    stderr: float
    trials: int
    horizon: int
    master_seed: int

    @property
    def within_one_sided_bound(self) -> bool:
        return self.residual <= 3.0 * self.stderr

    def to_json(self) -> dict:
        return {
            "z_energy": self.z_energy, "v_energy": self.v_energy,
            "gamma": self.gamma, "v0": self.v0, "residual": self.residual,
            "stderr": self.stderr, "trials": self.trials,
            "horizon": self.horizon, "master_seed": self.master_seed,
            "within_one_sided_bound": self.within_one_sided_bound,
        }


def h2_cost_under_worst_case(aug: LinearAugmentedSystem, law: WorstCaseLaw,
                             lyap: QuadraticLyapunov, eta0, trials: int,
                             horizon: int, master_seed: int) -> H2CostReport:
    """Simulate the worst-case feedback loop and report the cost residual."""
    eigs = np.linalg.eigvalsh(law.gate)
    if eigs[-1] >= 0.0:
        raise GateNotNegativeError("gate is not negative definite")
    dist = DisturbanceSignal.state_feedback(law.f_gain)
    noise = NoiseModel(n_w=aug.n_w)
    report = monte_carlo(aug, dist, noise, eta0, horizon, trials, master_seed)
    v0 = lyap.value(np.asarray(eta0, dtype=float))
    per_trial = report.final_z_per_trial - law.gamma**2 * report.final_v_per_trial
    if trials > 1:
        stderr = float(np.std(per_trial, ddof=1) / np.sqrt(trials))
    else:
        stderr = 0.0
    residual = float(np.mean(per_trial) - v0)
    return H2CostReport(z_energy=float(report.cum_z[-1]),
                        v_energy=float(report.cum_v[-1]),
                        gamma=law.gamma, v0=v0, residual=residual,
                        stderr=stderr, trials=trials, horizon=horizon,
                        master_seed=int(master_seed))


def result_to_json(result: SynthesisResult, path=None) -> dict:
    doc = result.to_json()
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return doc
