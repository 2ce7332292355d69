"""Analytic and sampling-based verification of dissipation inequalities.

The central objects are the expected Lyapunov increment

    delta_v(V, eta, v) = E[V(f_t(eta, w, v))] - V(eta)

and the Hamiltonian margin

    hamiltonian(V, eta, v) - gamma^2 ||v||^2,

which must be nonpositive everywhere for the augmented error system to be
externally stable at attenuation level gamma.  For linear systems with a
quadratic V the margin is an exact quadratic form, so feasibility can be
certified by eigenvalues; for nonlinear systems the checks here are
falsification only and report "no-violation-found", never "verified".
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .model import AffineAugmentedSystem, AffineFilter, AffineStochasticSystem, \
    LinearAugmentedSystem


class StructureError(ValueError):
    """An expectation method was asked for on an incompatible system."""


class ConditioningError(RuntimeError):
    """A matrix that must be inverted is singular within tolerance."""


@dataclass(frozen=True)
class QuadraticLyapunov:
    """V(eta) = eta' P eta with P symmetric positive definite.

    An optional block split (q1 over the plant state, q2 over the filter
    state) is kept for checks that need the two diagonal blocks.
    """

    p: np.ndarray
    q1: np.ndarray | None = None
    q2: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("P must be square")
        scale = max(1.0, float(np.max(np.abs(p))))
        if float(np.max(np.abs(p - p.T))) > 1e-10 * scale:
            raise ValueError("P must be symmetric to machine tolerance")
        p = 0.5 * (p + p.T)
        if float(np.linalg.eigvalsh(p)[0]) <= 0.0:
            raise ValueError("P must be positive definite")
        object.__setattr__(self, "p", p)
        if (self.q1 is None) != (self.q2 is None):
            raise ValueError("give both blocks or neither")
        if self.q1 is not None:
            q1 = np.asarray(self.q1, dtype=float)
            q2 = np.asarray(self.q2, dtype=float)
            expected = np.block([
                [q1, np.zeros((q1.shape[0], q2.shape[1]))],
                [np.zeros((q2.shape[0], q1.shape[1])), q2],
            ])
            if expected.shape != p.shape or not np.allclose(expected, p, atol=1e-12):
                raise ValueError("block split does not match P")
            object.__setattr__(self, "q1", q1)
            object.__setattr__(self, "q2", q2)

    @classmethod
    def block_diag(cls, q1, q2) -> "QuadraticLyapunov":
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        p = np.block([
            [q1, np.zeros((q1.shape[0], q2.shape[1]))],
            [np.zeros((q2.shape[0], q1.shape[1])), q2],
        ])
        return cls(p=p, q1=q1, q2=q2)

    def value(self, eta: np.ndarray) -> float:
        eta = np.asarray(eta, dtype=float).reshape(-1)
        return float(eta @ self.p @ eta)


@dataclass(frozen=True)
class ExpectationConfig:
    """How E[.] over the driving noise w is evaluated.

    analytic-affine: exact, needs linear or affine structure with scalar
    unit-variance noise (only the first two moments enter).
    gauss-hermite: tensor quadrature per noise dimension, normal noise.
    monte-carlo:   seeded sampling, any supported distribution.
    """

    method: str = "analytic-affine"
    nodes: int = 9
    samples: int = 100_000
    seed: int = 0
    distribution: str = "standard-normal"

    def __post_init__(self):
        if self.method not in ("analytic-affine", "gauss-hermite", "monte-carlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "gauss-hermite" and self.nodes < 3:
            raise ValueError("quadrature needs at least 3 nodes")
        if self.method == "monte-carlo" and self.samples < 1000:
            raise ValueError("monte-carlo needs at least 1000 samples")
        if self.distribution not in ("standard-normal", "rademacher"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


def _lyap_value(lyap, eta: np.ndarray) -> float:
    if isinstance(lyap, QuadraticLyapunov):
        return lyap.value(eta)
    return float(lyap(np.asarray(eta, dtype=float)))


def _gauss_hermite_grid(n_w: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    # Probabilists' nodes: weight function exp(-x^2/2), total mass sqrt(2*pi).
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    if n_w == 1:
        return x.reshape(-1, 1), w
    grids = np.array(list(itertools.product(x, repeat=n_w)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=n_w))), axis=1)
    return grids, weights


def delta_v(lyap, aug, k: int, eta, v, cfg: ExpectationConfig) -> float:
    """Expected Lyapunov increment E[V(next state)] - V(eta)."""
    eta = np.asarray(eta, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)

    if cfg.method == "analytic-affine":
        if not isinstance(lyap, QuadraticLyapunov):
            raise StructureError("analytic expectation needs a quadratic V")
        p = lyap.p
        if getattr(aug, "kind", None) == "linear":
            drift = aug.a_t @ eta + aug.b_t @ v
            spread = aug.c_t @ eta + aug.d_t @ v
        elif getattr(aug, "kind", None) == "affine":
            drift = aug.f1_t(eta) + aug.h1_t(eta) @ v
            spread = aug.f2_t(eta) + aug.h2_t(eta) @ v
        else:
            raise StructureError(
                "analytic expectation needs linear or affine structure")
        # E[w] = 0, E[w^2] = 1 kill the cross term and fix the spread term.
        return float(drift @ p @ drift + spread @ p @ spread - eta @ p @ eta)

    if cfg.method == "gauss-hermite":
        if cfg.distribution != "standard-normal":
            raise StructureError("quadrature is only valid for normal noise")
        grid, weights = _gauss_hermite_grid(aug.n_w, cfg.nodes)
        total = 0.0
        for w_node, weight in zip(grid, weights):
            total += weight * _lyap_value(lyap, aug.step(k, eta, w_node, v))
        return total - _lyap_value(lyap, eta)

    rng = np.random.default_rng(cfg.seed)
    if cfg.distribution == "standard-normal":
        draws = rng.standard_normal((cfg.samples, aug.n_w))
    else:
        draws = rng.integers(0, 2, size=(cfg.samples, aug.n_w)) * 2.0 - 1.0
    kind = getattr(aug, "kind", None)
    if isinstance(lyap, QuadraticLyapunov) and kind in ("linear", "affine"):
        # scalar-noise structure: next state is drift + w * spread
        if kind == "linear":
            drift = aug.a_t @ eta + aug.b_t @ v
            spread = aug.c_t @ eta + aug.d_t @ v
        else:
            drift = aug.f1_t(eta) + aug.h1_t(eta) @ v
            spread = aug.f2_t(eta) + aug.h2_t(eta) @ v
        nxt = drift[None, :] + draws[:, :1] * spread[None, :]
        values = np.einsum("ij,jk,ik->i", nxt, lyap.p, nxt)
        return float(values.mean()) - lyap.value(eta)
    acc = 0.0
    for w_draw in draws:
        acc += _lyap_value(lyap, aug.step(k, eta, w_draw, v))
    return acc / cfg.samples - _lyap_value(lyap, eta)


def hamiltonian(lyap, aug, k: int, eta, v, cfg: ExpectationConfig) -> float:
    """delta_v plus the squared error-output norm."""
    eta = np.asarray(eta, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    out = np.asarray(aug.output(k, eta, v), dtype=float).reshape(-1)
    return delta_v(lyap, aug, k, eta, v, cfg) + float(out @ out)


def hji_quadratic_matrix(aug: LinearAugmentedSystem, lyap: QuadraticLyapunov,
                         gamma: float) -> np.ndarray:
    """The symmetric matrix Q with H(eta,v) - gamma^2||v||^2 = [eta;v]' Q [eta;v]."""
    p = lyap.p
    at, bt, ct, dt, gt, mt = aug.a_t, aug.b_t, aug.c_t, aug.d_t, aug.g_t, aug.m_t
    s = at.T @ p @ at + ct.T @ p @ ct - p + gt.T @ gt
    t = at.T @ p @ bt + ct.T @ p @ dt + gt.T @ mt
    gate = bt.T @ p @ bt + dt.T @ p @ dt + mt.T @ mt - gamma**2 * np.eye(aug.n_v)
    full = np.block([[s, t], [t.T, gate]])
    return 0.5 * (full + full.T)


@dataclass(frozen=True)
class GariReport:
    """Both conditions of the Riccati-type inequality for linear systems."""

    schur_eigs: np.ndarray
    gate_eigs: np.ndarray
    feasible: bool
    joint_lambda_max: float

    def to_json(self) -> dict:
        return {
            "schur_eigs": self.schur_eigs.tolist(),
            "gate_eigs": self.gate_eigs.tolist(),
            "feasible": self.feasible,
            "joint_lambda_max": self.joint_lambda_max,
        }


def gari_check(lyap: QuadraticLyapunov, aug: LinearAugmentedSystem,
               gamma: float) -> GariReport:
    """Evaluate the generalized algebraic Riccati inequality at P.

    feasible iff the disturbance gate
        Bt'P Bt + Dt'P Dt + Mt'Mt - gamma^2 I
    and the Schur-complement residual
        At'P At + Ct'P Ct - P + Gt'Gt - T gate^{-1} T'
    are both negative definite.  The verdict is cross-checked against the
    sign of the largest eigenvalue of the joint quadratic form, to which
    it is equivalent by the Schur complement.
    """
    p = lyap.p
    at, bt, ct, dt, gt, mt = aug.a_t, aug.b_t, aug.c_t, aug.d_t, aug.g_t, aug.m_t
    gate = bt.T @ p @ bt + dt.T @ p @ dt + mt.T @ mt - gamma**2 * np.eye(aug.n_v)
    gate = 0.5 * (gate + gate.T)
    gate_eigs = np.linalg.eigvalsh(gate)
    if float(np.min(np.abs(gate_eigs))) <= 1e-12 * (1.0 + float(np.max(np.abs(gate_eigs)))):
        raise ConditioningError("disturbance gate is singular within tolerance")
    s = at.T @ p @ at + ct.T @ p @ ct - p + gt.T @ gt
    t = at.T @ p @ bt + ct.T @ p @ dt + gt.T @ mt
    residual = s - t @ np.linalg.solve(gate, t.T)
    residual = 0.5 * (residual + residual.T)
    schur_eigs = np.linalg.eigvalsh(residual)
    feasible = bool(gate_eigs[-1] < 0.0 and schur_eigs[-1] < 0.0)

    joint = float(np.linalg.eigvalsh(hji_quadratic_matrix(aug, lyap, gamma))[-1])
    tol = 1e-8 * (1.0 + abs(joint))
    if feasible and joint > tol:
        raise RuntimeError("Schur split and joint form disagree (internal error)")
    if not feasible and joint < -tol:
        raise RuntimeError("Schur split and joint form disagree (internal error)")
    return GariReport(schur_eigs=schur_eigs, gate_eigs=gate_eigs,
                      feasible=feasible, joint_lambda_max=joint)


@dataclass(frozen=True)
class AffineTerms:
    """Decomposition pieces of the affine-case Hamiltonian bound.

    state_term: w-averaged quadratic of the drift components,
        f1_t'Q f1_t + f2_t'Q f2_t.
    gated_disturbance_term: doubled disturbance-channel quadratic minus
        the attenuation gate, v'(2 h1_t'Q h1_t + 2 h2_t'Q h2_t - gamma^2 I)v.
    """

    state_term: float
    gated_disturbance_term: float


def affine_hji_terms(aug: AffineAugmentedSystem, lyap: QuadraticLyapunov,
                     eta, v, gamma: float) -> AffineTerms:
    if getattr(aug, "kind", None) != "affine":
        raise StructureError("affine decomposition needs an affine augmented system")
    eta = np.asarray(eta, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    q = lyap.p
    f1, f2 = aug.f1_t(eta), aug.f2_t(eta)
    h1, h2 = aug.h1_t(eta), aug.h2_t(eta)
    state = float(f1 @ q @ f1 + f2 @ q @ f2)
    gate = 2.0 * (h1.T @ q @ h1 + h2.T @ q @ h2) - gamma**2 * np.eye(aug.n_v)
    return AffineTerms(state_term=state,
                       gated_disturbance_term=float(v @ gate @ v))


def affine_hji_upper_bound(aug: AffineAugmentedSystem, lyap: QuadraticLyapunov,
                           eta, v, gamma: float) -> float:
    """Closed-form upper bound on H(eta,v) - gamma^2||v||^2.

    Doubling the drift and disturbance quadratics absorbs the cross terms
    (2a'Qb <= a'Qa + b'Qb), so this is always >= the exact margin.
    """
    eta = np.asarray(eta, dtype=float).reshape(-1)
    terms = affine_hji_terms(aug, lyap, eta, v, gamma)
    out = aug.m_t_plain(eta)
    return (2.0 * terms.state_term + terms.gated_disturbance_term
            - lyap.value(eta) + float(out @ out))


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounding box used as a sampling domain."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, radius: float, dim: int) -> "Box":
        r = float(radius) * np.ones(dim)
        return cls(lower=-r, upper=r)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def sample(self, count: int, seed: int) -> np.ndarray:
        sampler = qmc.Sobol(d=self.dim, scramble=True, seed=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            unit = sampler.random(count)
        pts = self.lower + unit * (self.upper - self.lower)
        # Include the midpoint so symmetric boxes always probe the origin.
        pts[0] = 0.5 * (self.lower + self.upper)
        return pts


@dataclass(frozen=True)
class Counterexample:
    eta: np.ndarray
    v: np.ndarray | None
    value: float
    label: str = ""

    def to_json(self) -> dict:
        return {
            "eta": self.eta.tolist(),
            "v": None if self.v is None else self.v.tolist(),
            "value": self.value,
            "label": self.label,
        }


@dataclass(frozen=True)
class CheckOutcome:
    """Result of a sampling falsification run.

    status is "violated" only when a concrete point exceeded the
    tolerance; the complementary status is "no-violation-found" because
    sampling cannot certify an inequality over an unbounded domain.
    """

    status: str
    counterexample: Counterexample | None
    points_checked: int
    max_margin: float
    margins: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def violated(self) -> bool:
        return self.status == "violated"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "points_checked": self.points_checked,
            "max_margin": self.max_margin,
            "margins": dict(self.margins),
            "notes": list(self.notes),
            "counterexample": None if self.counterexample is None
            else self.counterexample.to_json(),
        }


def hji_tolerance(v_value: float) -> float:
    # Relative tolerance: rounding on V(eta) must not produce spurious
    # violations far from the origin.
    return 1e-8 * (1.0 + abs(v_value))


def check_hji_sampling(lyap, aug, gamma: float, domain: Box, budget: int = 4096,
                       cfg: ExpectationConfig | None = None, seed: int = 0,
                       refine: bool = True) -> CheckOutcome:
    """Search a box for points violating the Hamiltonian margin inequality.

    Low-discrepancy sampling over (eta, v) followed by a local
    maximization around the worst sample.  For linear systems with a
    quadratic V the margin is evaluated through its exact quadratic form;
    reported counterexamples are always re-evaluated through the generic
    expectation path before the verdict.
    """
    if budget < 1000:
        raise ValueError("budget must be at least 1000 points")
    n_eta, n_v = aug.n_eta, aug.n_v
    if domain.dim != n_eta + n_v:
        raise ValueError(f"domain must cover (eta, v): expected dim {n_eta + n_v}")
    if cfg is None:
        if getattr(aug, "kind", None) in ("linear", "affine") and \
                isinstance(lyap, QuadraticLyapunov):
            cfg = ExpectationConfig(method="analytic-affine")
        else:
            cfg = ExpectationConfig(method="gauss-hermite")

    fast_quadratic = (getattr(aug, "kind", None) == "linear"
                      and isinstance(lyap, QuadraticLyapunov)
                      and cfg.method == "analytic-affine")

    def margin_of(point: np.ndarray) -> float:
        return hamiltonian(lyap, aug, 0, point[:n_eta], point[n_eta:], cfg) \
            - gamma**2 * float(point[n_eta:] @ point[n_eta:])

    points = domain.sample(budget, seed)
    if fast_quadratic:
        form = hji_quadratic_matrix(aug, lyap, gamma)
        margins = np.einsum("ij,jk,ik->i", points, form, points)
        v_values = np.einsum("ij,jk,ik->i", points[:, :n_eta], lyap.p,
                             points[:, :n_eta])
    else:
        margins = np.array([margin_of(pt) for pt in points])
        v_values = np.array([_lyap_value(lyap, pt[:n_eta]) for pt in points])

    tols = 1e-8 * (1.0 + np.abs(v_values))
    excess = margins - tols
    worst = int(np.argmax(excess))
    worst_point = points[worst].copy()
    max_margin = float(np.max(margins))

    if refine:
        result = optimize.minimize(
            lambda pt: -margin_of(np.asarray(pt)),
            worst_point, method="Nelder-Mead",
            bounds=list(zip(domain.lower, domain.upper)),
            options={"maxiter": 200 * domain.dim, "xatol": 1e-10, "fatol": 1e-12})
        refined = np.clip(result.x, domain.lower, domain.upper)
        if -result.fun > margins[worst]:
            worst_point = refined

    # Independent recomputation through the generic expectation path.
    final_margin = margin_of(worst_point)
    max_margin = max(max_margin, final_margin)
    tol = hji_tolerance(_lyap_value(lyap, worst_point[:n_eta]))
    if final_margin > tol:
        ce = Counterexample(eta=worst_point[:n_eta], v=worst_point[n_eta:],
                            value=final_margin, label="hamiltonian-margin")
        return CheckOutcome(status="violated", counterexample=ce,
                            points_checked=budget, max_margin=max_margin)
    return CheckOutcome(status="no-violation-found", counterexample=None,
                        points_checked=budget, max_margin=max_margin)


def check_affine_inequalities(sys: AffineStochasticSystem, filt: AffineFilter,
                              q1, q2, gamma: float, domain: Box,
                              points: int = 100_000, seed: int = 0) -> CheckOutcome:
    """Sample the two sufficient inequalities for affine plant/filter pairs.

    Over sampled (x, x_hat) in the domain box this evaluates

    * the disturbance-channel gate, as a matrix inequality:
        2[h1'Q1 h1 + (g_hat g2)'Q2 (g_hat g2)] - gamma^2 I <= 0,
    * the state-drift decrease, as a scalar inequality:
        2[f1'Q1 f1 + (f_hat + g_hat g1)'Q2 (f_hat + g_hat g1)]
            - x'Q1 x - x_hat'Q2 x_hat + 2||m(x)||^2 + 2||m_hat(x_hat)||^2 <= 0.

    Together they bound the Hamiltonian margin from above for every
    disturbance, so a clean sweep supports (but does not prove) external
    stability of the filtered system.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    n_x, n_h = sys.dims.n_x, filt.n_state
    if domain.dim != n_x + n_h:
        raise ValueError(f"domain must cover (x, x_hat): expected dim {n_x + n_h}")
    eye_v = np.eye(sys.dims.n_v)

    def gate_margin(x, xh):
        h1 = np.asarray(sys.h1(x), dtype=float)
        gg = np.asarray(filt.g_hat(xh), dtype=float) @ np.asarray(sys.g2(x), dtype=float)
        mat = 2.0 * (h1.T @ q1 @ h1 + gg.T @ q2 @ gg) - gamma**2 * eye_v
        return float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[-1])

    def drift_margin(x, xh):
        f1 = np.asarray(sys.f1(x), dtype=float).reshape(-1)
        drift = (np.asarray(filt.f_hat(xh), dtype=float).reshape(-1)
                 + np.asarray(filt.g_hat(xh), dtype=float)
                 @ np.asarray(sys.g1(x), dtype=float).reshape(-1))
        m = np.asarray(sys.m(x), dtype=float).reshape(-1)
        mh = np.asarray(filt.m_hat(xh), dtype=float).reshape(-1)
        return float(2.0 * (f1 @ q1 @ f1 + drift @ q2 @ drift)
                     - x @ q1 @ x - xh @ q2 @ xh
                     + 2.0 * (m @ m) + 2.0 * (mh @ mh))

    samples = domain.sample(points, seed)
    worst = {"gate": (-np.inf, None), "drift": (-np.inf, None)}
    for pt in samples:
        x, xh = pt[:n_x], pt[n_x:]
        g = gate_margin(x, xh)
        if g > worst["gate"][0]:
            worst["gate"] = (g, pt.copy())
        d = drift_margin(x, xh)
        if d > worst["drift"][0]:
            worst["drift"] = (d, pt.copy())

    margins = {name: val for name, (val, _) in worst.items()}
    label, (value, arg) = max(worst.items(), key=lambda item: item[1][0])
    tol = hji_tolerance(float(arg[:n_x] @ q1 @ arg[:n_x]
                              + arg[n_x:] @ q2 @ arg[n_x:]))
    notes = (
        "sampling is falsification only; a clean sweep is not a proof",
        "the radial growth of the error output away from the origin is "
        "not checked here and must be assessed separately",
    )
    if value > tol:
        ce = Counterexample(eta=arg, v=None, value=value, label=label)
        return CheckOutcome(status="violated", counterexample=ce,
                            points_checked=points, max_margin=value,
                            margins=margins, notes=notes)
    return CheckOutcome(status="no-violation-found", counterexample=None,
                        points_checked=points, max_margin=value,
                        margins=margins, notes=notes)
