import numpy as np
import pytest

from hfk import linalg
from hfk.model import Dims, build_linear_system
from hfk.sdp import FeasibilityFailure, SdpProblem, SdpSolution, VarBlock, \
    assemble_lmi, minimize_trace, solve_feasibility

from conftest import random_linear_system


def scalar_toy(weights, eps_floor=("p",)):
    """diag((a_i^2 - 1) p_i) <= -delta with floors p_i >= eps."""
    names = [f"p{i}" for i in range(len(weights))]
    blocks = tuple(VarBlock(n, "sym", 1, 1) for n in names)
    side = len(weights)
    f0 = np.zeros((side, side))
    basis = np.zeros((len(weights), side, side))
    for i, a in enumerate(weights):
        basis[i, i, i] = a**2 - 1.0
    objective = np.ones(len(weights))
    return SdpProblem(blocks=blocks, f0=f0, basis=basis,
                      floors=tuple(names), objective=objective)


def test_vehicle_lmi_dimensions(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    assert prob.side == 14  # 6 n_x + n_v + n_z
    assert prob.n_vars == 10
    assert prob.meta["block_sizes"] == [2, 2, 1, 2, 2, 2, 2, 1]


def test_gamma_enters_only_one_constant_block(ex52_system):
    gamma = 0.8
    p1 = assemble_lmi(ex52_system, gamma)
    p2 = assemble_lmi(ex52_system, 2.0 * gamma)
    assert np.array_equal(p1.basis, p2.basis)
    diff = p2.f0 - p1.f0
    expected = np.zeros_like(diff)
    expected[4, 4] = -3.0 * gamma**2  # the disturbance block sits at offset 2n
    assert np.array_equal(diff, expected)


def test_constant_term_structure_zero_couplings():
    dims = Dims(2, 2, 1, 1)
    matrices = {"A": np.eye(2) * 0.5, "B": np.ones((2, 1)), "C": np.eye(2) * 0.1,
                "D": np.zeros((2, 1)), "K": np.eye(2), "L": np.ones((2, 1)),
                "G": np.zeros((1, 2)), "M": np.zeros((1, 1))}
    sys = build_linear_system(matrices, dims)
    gamma = 1.5
    prob = assemble_lmi(sys, gamma)
    # with G = M = 0 the constant part is purely diagonal
    assert np.array_equal(prob.f0, np.diag(np.diag(prob.f0)))
    diag = np.diag(prob.f0)
    assert diag[4] == -gamma**2
    assert diag[-1] == -1.0
    assert float(np.linalg.eigvalsh(prob.f0)[-1]) == 0.0


def test_constraint_map_is_affine_and_symmetric(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.standard_normal(prob.n_vars)
        y = rng.standard_normal(prob.n_vars)
        alpha = float(rng.uniform())
        lhs = prob.constraint(alpha * x + (1 - alpha) * y)
        rhs = alpha * prob.constraint(x) + (1 - alpha) * prob.constraint(y)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))
        fx = prob.constraint(x)
        assert np.max(np.abs(fx - fx.T)) <= 1e-12


def test_pack_unpack_round_trip(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    rng = np.random.default_rng(1)
    sym = rng.standard_normal((2, 2))
    values = {"p1": sym + sym.T, "p2": np.eye(2), "pk": rng.standard_normal((2, 2))}
    back = prob.unpack(prob.pack(values))
    for name, mat in values.items():
        assert np.allclose(back[name], mat, atol=0)


def test_scalar_toy_feasibility():
    prob = scalar_toy([0.0])
    eps, delta = 1e-6, 1e-3
    sol = solve_feasibility(prob, eps=eps, delta=delta)
    assert isinstance(sol, SdpSolution)
    p = sol.blocks["p0"][0, 0]
    assert p >= max(eps, delta)
    assert sol.constraint_lambda_max <= -delta


def test_scalar_trace_oracle():
    # minimize p1 + p2 subject to (a_i^2 - 1) p_i <= -delta, p_i >= eps:
    # the optimum is p_i = max(eps, delta / (1 - a_i^2))
    a = [0.5, 0.9]
    delta, eps = 1e-4, 1e-6
    prob = scalar_toy(a)
    sol = minimize_trace(prob, eps=eps, delta=delta, gap_tol=1e-12)
    assert isinstance(sol, SdpSolution)
    expected = [max(eps, delta / (1 - ai**2)) for ai in a]
    got = [sol.blocks["p0"][0, 0], sol.blocks["p1"][0, 0]]
    assert got == pytest.approx(expected, rel=1e-4, abs=1e-9)
    assert sol.objective_value == pytest.approx(sum(expected), abs=1e-6)


def test_redundant_constraint_leaves_optimum_unchanged():
    a = [0.5, 0.9]
    delta = 1e-4
    base = scalar_toy(a)
    sol_base = minimize_trace(base, delta=delta, gap_tol=1e-12)
    # duplicate the constraint block diagonally
    side = base.side
    f0 = np.zeros((2 * side, 2 * side))
    basis = np.zeros((base.n_vars, 2 * side, 2 * side))
    basis[:, :side, :side] = base.basis
    basis[:, side:, side:] = base.basis
    doubled = SdpProblem(blocks=base.blocks, f0=f0, basis=basis,
                         floors=base.floors, objective=base.objective)
    sol_doubled = minimize_trace(doubled, delta=delta, gap_tol=1e-12)
    assert sol_doubled.objective_value == pytest.approx(
        sol_base.objective_value, abs=1e-6)


def test_vehicle_feasible_at_unit_gamma(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    sol = solve_feasibility(prob)
    assert isinstance(sol, SdpSolution)
    assert sol.constraint_lambda_max <= -sol.delta
    assert all(v >= sol.eps for v in sol.floor_lambda_min.values())
    # margins hold under the package's own eigenvalue routine as well
    lam = linalg.symmetric_eigenvalues(prob.constraint(sol.x))[-1]
    assert lam <= -sol.delta + 1e-14


def test_unstable_plant_reports_positive_best():
    rng = np.random.default_rng(2)
    sys = random_linear_system(rng, radius=2.0)
    prob = assemble_lmi(sys, gamma=0.5)
    out = solve_feasibility(prob, max_iter=250)
    assert isinstance(out, FeasibilityFailure)
    assert out.best_lambda_max > 0.0
    assert out.reason in ("budget-exhausted", "converged-above-threshold")
    assert out.trace_summary


def test_feasibility_monotone_in_gamma():
    rng = np.random.default_rng(3)
    for _ in range(3):
        sys = random_linear_system(rng, radius=0.7)
        seen_feasible = False
        for gamma in (0.5, 2.0, 8.0, 32.0):
            ok = isinstance(solve_feasibility(assemble_lmi(sys, gamma),
                                              max_iter=250), SdpSolution)
            if seen_feasible:
                assert ok, f"feasible set shrank at gamma={gamma}"
            seen_feasible = seen_feasible or ok


def test_minimize_trace_monotone_path(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    sol = minimize_trace(prob)
    assert isinstance(sol, SdpSolution)
    objs = [h["objective"] for h in sol.trace_summary]
    assert all(objs[i + 1] <= objs[i] + 1e-9 for i in range(len(objs) - 1))
    assert sol.gap_estimate is not None and sol.gap_estimate < 1e-6 * (1 + objs[-1])


def test_minimize_trace_not_above_feasibility_point(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    feas = solve_feasibility(prob)
    best = minimize_trace(prob)
    assert best.objective_value <= feas.objective_value + 1e-9


def test_problem_json_round_trip(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    back = SdpProblem.from_json(prob.to_json())
    assert np.array_equal(back.f0, prob.f0)
    assert np.array_equal(back.basis, prob.basis)
    assert back.floors == prob.floors
    assert np.array_equal(back.objective, prob.objective)


def test_solution_json_contains_margins(ex52_system):
    prob = assemble_lmi(ex52_system, 1.0)
    sol = solve_feasibility(prob)
    doc = sol.to_json()
    assert doc["constraint_lambda_max"] < 0
    assert set(doc["floor_lambda_min"]) == {"p1", "p2"}
    assert doc["trace_summary"]
