"""Small dense semidefinite-programming engine.

Decision variables are symmetric and free matrix blocks packed into one
vector x; the constraint is an affine map F(x) = F0 + sum_i x_i F_i into
symmetric matrices, required to satisfy F(x) <= -delta I together with
positivity floors P_b >= eps I on selected symmetric blocks.

The solver is a log-det barrier interior-point method: feasibility is a
phase-I minimization of the scalar t in F(x) <= t I, and linear-objective
(trace) minimization follows the central path from a feasible point.
Newton steps use backtracking line search; the outer barrier weight
shrinks by a constant factor.

Solutions are never trusted as returned: every certificate is re-verified
with the package's own tridiagonal QL eigenvalue routine, which shares no
code with the LAPACK paths used inside the Newton iteration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .model import LinearStochasticSystem

DEFAULT_EPS = 1e-6
DEFAULT_NEWTON_TOL = 1e-10
DEFAULT_BUDGET = 500
DEFAULT_BOUND = 1e4
MU_FACTOR = 10.0


class CertificationError(RuntimeError):
    """A solver-produced point failed independent re-verification."""


@dataclass(frozen=True)
class VarBlock:
    name: str
    kind: str  # "sym" | "free"
    rows: int
    cols: int

    def __post_init__(self):
        if self.kind not in ("sym", "free"):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.kind == "sym" and self.rows != self.cols:
            raise ValueError("symmetric blocks must be square")

    @property
    def size(self) -> int:
        if self.kind == "sym":
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols

    def unpack(self, values: np.ndarray) -> np.ndarray:
        if self.kind == "free":
            return values.reshape(self.rows, self.cols)
        m = np.zeros((self.rows, self.rows))
        idx = 0
        for i in range(self.rows):
            for j in range(i, self.rows):
                m[i, j] = values[idx]
                m[j, i] = values[idx]
                idx += 1
        return m

    def pack(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        if self.kind == "free":
            return matrix.reshape(-1)
        out = np.empty(self.size)
        idx = 0
        for i in range(self.rows):
            for j in range(i, self.rows):
                out[idx] = matrix[i, j]
                idx += 1
        return out


@dataclass(frozen=True)
class SdpProblem:
    """F(x) = f0 + sum_i x_i basis[i] required <= -delta I, plus floors."""

    blocks: tuple[VarBlock, ...]
    f0: np.ndarray
    basis: np.ndarray  # (n_vars, side, side)
    floors: tuple[str, ...] = ()
    objective: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(b.size for b in self.blocks)
        if self.basis.shape[0] != total:
            raise ValueError("basis count does not match variable layout")
        for i in range(self.basis.shape[0]):
            if not np.allclose(self.basis[i], self.basis[i].T, atol=1e-12):
                raise ValueError(f"basis matrix {i} is not symmetric")
        if not np.allclose(self.f0, self.f0.T, atol=1e-12):
            raise ValueError("constant term is not symmetric")
        names = [b.name for b in self.blocks]
        for name in self.floors:
            block = self.block(name)
            if block.kind != "sym":
                raise ValueError(f"floor on non-symmetric block {name!r}")
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names")

    @property
    def n_vars(self) -> int:
        return self.basis.shape[0]

    @property
    def side(self) -> int:
        return self.f0.shape[0]

    def block(self, name: str) -> VarBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def block_slice(self, name: str) -> slice:
        offset = 0
        for b in self.blocks:
            if b.name == name:
                return slice(offset, offset + b.size)
            offset += b.size
        raise KeyError(name)

    def pack(self, values: dict) -> np.ndarray:
        x = np.zeros(self.n_vars)
        for b in self.blocks:
            x[self.block_slice(b.name)] = b.pack(values[b.name])
        return x

    def unpack(self, x: np.ndarray) -> dict:
        return {b.name: b.unpack(np.asarray(x)[self.block_slice(b.name)])
                for b in self.blocks}

    def constraint(self, x: np.ndarray) -> np.ndarray:
        return self.f0 + np.tensordot(np.asarray(x, dtype=float), self.basis, axes=1)

    def default_delta(self) -> float:
        scale = float(np.abs(np.linalg.eigvalsh(self.f0)).max()) if self.side else 0.0
        return 1e-9 * (1.0 + scale)

    def to_json(self) -> dict:
        return {
            "blocks": [
                {"name": b.name, "kind": b.kind, "rows": b.rows, "cols": b.cols}
                for b in self.blocks
            ],
            "f0": self.f0.tolist(),
            "basis": [m.tolist() for m in self.basis],
            "floors": list(self.floors),
            "objective": None if self.objective is None else self.objective.tolist(),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SdpProblem":
        blocks = tuple(VarBlock(b["name"], b["kind"], int(b["rows"]), int(b["cols"]))
                       for b in doc["blocks"])
        objective = doc.get("objective")
        return cls(blocks=blocks,
                   f0=np.asarray(doc["f0"], dtype=float),
                   basis=np.asarray(doc["basis"], dtype=float),
                   floors=tuple(doc.get("floors", ())),
                   objective=None if objective is None
                   else np.asarray(objective, dtype=float),
                   meta=dict(doc.get("meta", {})))


@dataclass(frozen=True)
class SdpSolution:
    x: np.ndarray
    blocks: dict
    objective_value: float | None
    constraint_lambda_max: float
    floor_lambda_min: dict
    eps: float
    delta: float
    newton_steps: int
    gap_estimate: float | None
    trace_summary: tuple[dict, ...] = ()

    def to_json(self) -> dict:
        return {
            "x": self.x.tolist(),
            "blocks": {k: v.tolist() for k, v in self.blocks.items()},
            "objective_value": self.objective_value,
            "constraint_lambda_max": self.constraint_lambda_max,
            "floor_lambda_min": dict(self.floor_lambda_min),
            "eps": self.eps,
            "delta": self.delta,
            "newton_steps": self.newton_steps,
            "gap_estimate": self.gap_estimate,
            "trace_summary": list(self.trace_summary),
        }


@dataclass(frozen=True)
class FeasibilityFailure:
    """No point satisfying the margins was found.

    This is "not found within budget", never a proof of infeasibility:
    reason is "budget-exhausted" when the Newton budget ran out and
    "converged-above-threshold" when the phase-I minimum stalled above
    the required margin.
    """

    best_lambda_max: float
    reason: str
    newton_steps: int
    trace_summary: tuple[dict, ...] = ()

    def to_json(self) -> dict:
        return {
            "best_lambda_max": self.best_lambda_max,
            "reason": self.reason,
            "newton_steps": self.newton_steps,
            "trace_summary": list(self.trace_summary),
        }


# --------------------------------------------------------------------------
# Filter-synthesis constraint assembly
# --------------------------------------------------------------------------

def _filter_lmi_value(sys: LinearStochasticSystem, gamma: float,
                      p1: np.ndarray, p2: np.ndarray, pk: np.ndarray) -> np.ndarray:
    """The block constraint matrix at given (P1, P2, PK).

    Square blocks of sizes (n, n, n_v, n, n, n, n, n_z); the strictly
    upper block rows are

        [-P1   0    0     A'P1  0           C'P1  C'P2  0  ]
        [ .   -P2   0     0     A'P2-K'PK'  0     0     G' ]
        [ .    .  -g^2 I  B'P1  B'P2-L'PK'  D'P1  D'P2  M' ]

    with the remaining diagonal (-P1, -P2, -P1, -P2, -I) and zeros
    elsewhere; the lower triangle is the mirror image.
    """
    n, nv, nz = sys.dims.n_x, sys.dims.n_v, sys.dims.n_z
    sizes = [n, n, nv, n, n, n, n, nz]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    side = offs[-1]
    f = np.zeros((side, side))

    def put(i, j, block):
        f[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = block
        if i != j:
            f[offs[j]:offs[j + 1], offs[i]:offs[i + 1]] = block.T

    put(0, 0, -p1)
    put(1, 1, -p2)
    put(2, 2, -gamma**2 * np.eye(nv))
    put(3, 3, -p1)
    put(4, 4, -p2)
    put(5, 5, -p1)
    put(6, 6, -p2)
    put(7, 7, -np.eye(nz))
    put(0, 3, sys.a.T @ p1)
    put(0, 5, sys.c.T @ p1)
    put(0, 6, sys.c.T @ p2)
    put(1, 4, sys.a.T @ p2 - sys.k_meas.T @ pk.T)
    put(1, 7, sys.g_out.T)
    put(2, 3, sys.b.T @ p1)
    put(2, 4, sys.b.T @ p2 - sys.l_meas.T @ pk.T)
    put(2, 5, sys.d.T @ p1)
    put(2, 6, sys.d.T @ p2)
    put(2, 7, sys.m_out.T)
    return f


def assemble_lmi(sys: LinearStochasticSystem, gamma: float) -> SdpProblem:
    """Filter-synthesis constraint as an SdpProblem.

    Decision variables: P1, P2 symmetric n x n and the free coupling
    block PK (n x n_y) from which the observer gain is later recovered.
    The objective is trace(P1 + P2), ignored by pure feasibility solves.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n, ny = sys.dims.n_x, sys.dims.n_y
    blocks = (VarBlock("p1", "sym", n, n),
              VarBlock("p2", "sym", n, n),
              VarBlock("pk", "free", n, ny))
    zero = {"p1": np.zeros((n, n)), "p2": np.zeros((n, n)),
            "pk": np.zeros((n, ny))}
    f0 = _filter_lmi_value(sys, gamma, **zero)
    n_vars = sum(b.size for b in blocks)
    basis = np.empty((n_vars, f0.shape[0], f0.shape[1]))
    offset = 0
    for b in blocks:
        for local in range(b.size):
            unit = np.zeros(b.size)
            unit[local] = 1.0
            values = dict(zero)
            values[b.name] = b.unpack(unit)
            basis[offset + local] = _filter_lmi_value(sys, gamma, **values) - f0
        offset += b.size
    objective = np.zeros(n_vars)
    for name in ("p1", "p2"):
        block = blocks[0] if name == "p1" else blocks[1]
        sl = slice(0, block.size) if name == "p1" else slice(blocks[0].size,
                                                             blocks[0].size + block.size)
        local = 0
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    objective[sl.start + local] = 1.0
                local += 1
    return SdpProblem(blocks=blocks, f0=f0, basis=basis,
                      floors=("p1", "p2"), objective=objective,
                      meta={"gamma": float(gamma),
                            "block_sizes": [n, n, sys.dims.n_v, n, n, n, n,
                                            sys.dims.n_z]})


# --------------------------------------------------------------------------
# Barrier machinery
# --------------------------------------------------------------------------

class _Cone:
    """One affine matrix constraint S(y) = c0 + sum y[idx[i]] * coeffs[i] > 0."""

    def __init__(self, c0: np.ndarray, idx: np.ndarray, coeffs: np.ndarray):
        self.c0 = c0
        self.idx = idx
        self.coeffs = coeffs
        self.side = c0.shape[0]

    def value(self, y: np.ndarray) -> np.ndarray:
        return self.c0 + np.tensordot(y[self.idx], self.coeffs, axes=1)

    def chol(self, y: np.ndarray) -> np.ndarray | None:
        try:
            return np.linalg.cholesky(self.value(y))
        except np.linalg.LinAlgError:
            return None


class _VarBox:
    """Scalar bounds lo < y[idx] < hi, handled in vectorized form."""

    def __init__(self, idx: np.ndarray, lower: np.ndarray, upper: np.ndarray):
        self.idx = idx
        self.lower = lower
        self.upper = upper

    def gaps(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vals = y[self.idx]
        return vals - self.lower, self.upper - vals

    def log_barrier(self, y: np.ndarray) -> float | None:
        lo_gap, hi_gap = self.gaps(y)
        if np.any(lo_gap <= 0.0) or np.any(hi_gap <= 0.0):
            return None
        return -float(np.sum(np.log(lo_gap)) + np.sum(np.log(hi_gap)))

    def degree(self) -> int:
        return 2 * self.idx.shape[0]


def _log_barrier(cones: list[_Cone], box: _VarBox | None, y: np.ndarray) -> float | None:
    total = 0.0
    for cone in cones:
        chol = cone.chol(y)
        if chol is None:
            return None
        total -= 2.0 * float(np.sum(np.log(np.diag(chol))))
    if box is not None:
        contrib = box.log_barrier(y)
        if contrib is None:
            return None
        total += contrib
    return total


def _grad_hess(cones: list[_Cone], box: _VarBox | None, y: np.ndarray):
    n = y.shape[0]
    g = np.zeros(n)
    h = np.zeros((n, n))
    for cone in cones:
        chol = cone.chol(y)
        if chol is None:
            raise np.linalg.LinAlgError("iterate left the cone")
        ws = np.empty((cone.idx.shape[0], cone.side, cone.side))
        for i, ci in enumerate(cone.coeffs):
            half = solve_triangular(chol, ci, lower=True)
            ws[i] = solve_triangular(chol, half.T, lower=True).T
        g[cone.idx] -= np.trace(ws, axis1=1, axis2=2)
        flat = ws.reshape(ws.shape[0], -1)
        h[np.ix_(cone.idx, cone.idx)] += flat @ flat.T
    if box is not None:
        lo_gap, hi_gap = box.gaps(y)
        g[box.idx] += 1.0 / hi_gap - 1.0 / lo_gap
        h[box.idx, box.idx] += 1.0 / hi_gap**2 + 1.0 / lo_gap**2
    return g, h


def _newton_direction(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Jacobi-scaled Cholesky solve: the barrier Hessian mixes curvatures
    # spanning many decades (floors vs caps vs the main cone), and an
    # unscaled solve can lose the direction entirely.
    d = np.sqrt(np.maximum(np.diag(h), 1e-300))
    hs = h / np.outer(d, d)
    hs[np.diag_indices_from(hs)] += 1e-13
    gs = g / d
    try:
        chol = np.linalg.cholesky(hs)
        z = solve_triangular(chol, -gs, lower=True)
        step = solve_triangular(chol.T, z, lower=False)
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(hs, -gs, rcond=None)[0]
    return step / d


def _newton_center(cones, box, cvec, mu, y, newton_tol, budget_left):
    """Minimize c.y/mu + barrier(y); returns (y, steps, converged)."""
    steps = 0
    while steps < budget_left:
        g_bar, h = _grad_hess(cones, box, y)
        g = cvec / mu + g_bar
        delta = _newton_direction(h, g)
        decrement = float(-g @ delta)
        if decrement <= 2.0 * newton_tol:
            return y, steps, True
        f_now = float(cvec @ y) / mu + _log_barrier(cones, box, y)
        # Damped start keeps the first trial inside the cone when the
        # decrement is large; backtracking handles the rest.
        alpha = min(1.0, 1.0 / (1.0 + math.sqrt(max(decrement, 0.0))))
        accepted = False
        while alpha > 1e-14:
            cand = y + alpha * delta
            barrier = _log_barrier(cones, box, cand)
            if barrier is not None:
                f_cand = float(cvec @ cand) / mu + barrier
                if f_cand <= f_now + 0.25 * alpha * float(g @ delta):
                    y = cand
                    accepted = True
                    break
            alpha *= 0.5
        steps += 1
        if not accepted:
            return y, steps, True  # cannot improve further at this mu
    return y, steps, False


def _unit_matrices(block: VarBlock) -> np.ndarray:
    coeffs = np.empty((block.size, block.rows, block.cols))
    for local in range(block.size):
        unit = np.zeros(block.size)
        unit[local] = 1.0
        coeffs[local] = block.unpack(unit)
    return coeffs


def _constraint_set(problem: SdpProblem, eps: float, bound: float,
                    extra_vars: int) -> tuple[list[_Cone], _VarBox | None]:
    """Floors, symmetric caps, and scalar boxes shared by both phases."""
    cones = []
    box_idx: list[int] = []
    box_lo: list[float] = []
    box_hi: list[float] = []
    for b in problem.blocks:
        sl = problem.block_slice(b.name)
        idx = np.arange(sl.start, sl.stop)
        if b.kind == "sym":
            units = _unit_matrices(b)
            if b.name in problem.floors:
                cones.append(_Cone(c0=-eps * np.eye(b.rows), idx=idx, coeffs=units))
            else:
                cones.append(_Cone(c0=bound * np.eye(b.rows), idx=idx, coeffs=units))
            cones.append(_Cone(c0=bound * np.eye(b.rows), idx=idx, coeffs=-units))
        else:
            box_idx.extend(idx.tolist())
            box_lo.extend([-bound] * idx.shape[0])
            box_hi.extend([bound] * idx.shape[0])
    box = None
    if box_idx:
        box = _VarBox(idx=np.array(box_idx, dtype=int),
                      lower=np.array(box_lo), upper=np.array(box_hi))
    return cones, box


def _initial_floor_point(problem: SdpProblem, eps: float) -> np.ndarray:
    x = np.zeros(problem.n_vars)
    scale = max(1.0, 2.0 * eps)
    for name in problem.floors:
        block = problem.block(name)
        x[problem.block_slice(name)] = block.pack(scale * np.eye(block.rows))
    return x


def _verify_point(problem: SdpProblem, x: np.ndarray, eps: float, delta: float):
    """Independent eigenvalue re-verification of all constraints."""
    lam_constraint = float(linalg.symmetric_eigenvalues(problem.constraint(x))[-1])
    floor_mins = {}
    values = problem.unpack(x)
    for name in problem.floors:
        floor_mins[name] = float(linalg.symmetric_eigenvalues(values[name])[0])
    tol = 1e-12 * (1.0 + abs(lam_constraint))
    ok = lam_constraint <= -delta + tol
    for name, lam in floor_mins.items():
        ok = ok and lam >= eps - 1e-12 * (1.0 + abs(lam))
    return ok, lam_constraint, floor_mins


def solve_feasibility(problem: SdpProblem, eps: float = DEFAULT_EPS,
                      delta: float | None = None,
                      max_iter: int = DEFAULT_BUDGET,
                      newton_tol: float = DEFAULT_NEWTON_TOL,
                      bound: float = DEFAULT_BOUND):
    """Find x with F(x) <= -delta I and floors >= eps I.

    Phase-I barrier scheme minimizing the scalar t in F(x) <= t I,
    confined to variable magnitudes below `bound`.  The descent stops
    early once the margin target is comfortably met or further outer
    iterations stop paying; on success the returned point is re-verified
    by the independent eigenvalue routine.  Failure reports the best
    achieved largest eigenvalue and the iteration trace; it never claims
    infeasibility.
    """
    if delta is None:
        delta = problem.default_delta()
    m = problem.n_vars

    main_idx = np.concatenate([np.arange(m), [m]])
    main_coeffs = np.concatenate([-problem.basis,
                                  np.eye(problem.side)[None, :, :]])
    main = _Cone(c0=-problem.f0, idx=main_idx, coeffs=main_coeffs)
    extra, box = _constraint_set(problem, eps, bound, extra_vars=1)
    cones = [main] + extra

    x0 = _initial_floor_point(problem, eps)
    lam0 = float(np.linalg.eigvalsh(problem.constraint(x0))[-1])
    y = np.concatenate([x0, [lam0 + 1.0 + 1e-6 * abs(lam0)]])
    cvec = np.zeros(m + 1)
    cvec[m] = 1.0

    scale = 1.0 + float(np.abs(np.linalg.eigvalsh(problem.f0)).max())
    stop_level = -max(100.0 * delta, 1e-4 * scale)
    per_outer = max(60, 3 * (m + 1))

    mu = max(1.0, abs(y[m]))
    steps_used = 0
    best_x = x0.copy()
    best_lam = lam0
    history = []
    prev_lam = math.inf
    while steps_used < max_iter:
        y, steps, _ = _newton_center(cones, box, cvec, mu, y, newton_tol,
                                     min(per_outer, max_iter - steps_used))
        steps_used += steps
        lam = float(np.linalg.eigvalsh(problem.constraint(y[:m]))[-1])
        history.append({"mu": mu, "t": float(y[m]), "lambda_max": lam,
                        "newton_steps": steps})
        if lam < best_lam:
            best_lam = lam
            best_x = y[:m].copy()
        if lam <= stop_level:
            break
        # Feasible with diminishing returns: take the margin we have.
        if best_lam <= -100.0 * delta and prev_lam < 0.0 and \
                (prev_lam - lam) <= 0.05 * abs(lam):
            break
        if mu * nu_total(cones, box) < max(1e-14, 1e-3 * delta):
            break
        prev_lam = lam
        mu /= MU_FACTOR

    if best_lam <= -delta:
        ok, lam_check, floor_mins = _verify_point(problem, best_x, eps, delta)
        if not ok:
            raise CertificationError(
                f"solution failed re-verification: lambda_max={lam_check}")
        objective_value = (float(problem.objective @ best_x)
                           if problem.objective is not None else None)
        return SdpSolution(x=best_x, blocks=problem.unpack(best_x),
                           objective_value=objective_value,
                           constraint_lambda_max=lam_check,
                           floor_lambda_min=floor_mins, eps=eps, delta=delta,
                           newton_steps=steps_used, gap_estimate=None,
                           trace_summary=tuple(history))
    reason = "budget-exhausted" if steps_used >= max_iter \
        else "converged-above-threshold"
    return FeasibilityFailure(best_lambda_max=best_lam, reason=reason,
                              newton_steps=steps_used,
                              trace_summary=tuple(history))


def nu_total(cones: list[_Cone], box: _VarBox | None) -> float:
    nu = float(sum(c.side for c in cones))
    if box is not None:
        nu += box.degree()
    return nu


def minimize_trace(problem: SdpProblem, eps: float = DEFAULT_EPS,
                   delta: float | None = None,
                   max_iter: int = DEFAULT_BUDGET,
                   newton_tol: float = DEFAULT_NEWTON_TOL,
                   gap_tol: float | None = None,
                   bound: float = DEFAULT_BOUND):
    """Minimize the problem's linear objective over the feasible set.

    Phase-I feasibility runs first; failures propagate.  Phase-II follows
    the central path of the objective; per-outer central objectives are
    recorded (they decrease monotonically) and the final duality-gap
    estimate mu * (barrier degree) is reported.
    """
    if problem.objective is None:
        raise ValueError("problem has no objective to minimize")
    if delta is None:
        delta = problem.default_delta()
    phase1 = solve_feasibility(problem, eps=eps, delta=delta,
                               max_iter=max_iter, newton_tol=newton_tol,
                               bound=bound)
    if isinstance(phase1, FeasibilityFailure):
        return phase1

    m = problem.n_vars
    main = _Cone(c0=-problem.f0 - delta * np.eye(problem.side),
                 idx=np.arange(m), coeffs=-problem.basis)
    extra, box = _constraint_set(problem, eps, bound, extra_vars=0)
    cones = [main] + extra
    nu = nu_total(cones, box)

    y = phase1.x.copy()
    cvec = problem.objective
    mu = max(1.0, abs(float(cvec @ y)))
    steps_used = 0
    per_outer = max(60, 3 * m)
    history = []
    while steps_used < max_iter:
        y, steps, converged = _newton_center(cones, box, cvec, mu, y, newton_tol,
                                             min(per_outer, max_iter - steps_used))
        steps_used += steps
        obj_now = float(cvec @ y)
        history.append({"mu": mu, "objective": obj_now, "newton_steps": steps})
        target = gap_tol if gap_tol is not None else 1e-8 * (1.0 + abs(obj_now))
        if mu * nu < target:
            break
        mu /= MU_FACTOR

    ok, lam_check, floor_mins = _verify_point(problem, y, eps, delta)
    if not ok:
        raise CertificationError(
            f"trace-minimal point failed re-verification: lambda_max={lam_check}")
    return SdpSolution(x=y, blocks=problem.unpack(y),
                       objective_value=float(cvec @ y),
                       constraint_lambda_max=lam_check,
                       floor_lambda_min=floor_mins, eps=eps, delta=delta,
                       newton_steps=steps_used + phase1.newton_steps,
                       gap_estimate=mu * nu,
                       trace_summary=tuple(history))


def solution_to_json(solution, path=None) -> dict:
    doc = solution.to_json()
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return doc
