import csv
import json

import numpy as np
import pytest

from hfk.fixtures import example51_disturbance, example51_filter, \
    example51_system, example52_system
from hfk.model import LinearAugmentedSystem, LinearFilter, augment_linear, \
    augment_nonlinear
from hfk.sim import DisturbanceSignal, DivergenceError, EnergyReport, \
    NoiseModel, Trajectory, UndefinedRatioError, empirical_gain, \
    energy_report_to_csv, energy_report_to_json, internal_stability_probe, \
    monte_carlo, sample_noise, simulate_trajectory, splitmix64, \
    trajectory_to_csv, trial_seed

from conftest import random_augmented


def test_sample_noise_deterministic():
    model = NoiseModel(n_w=3)
    a = sample_noise(model, seed=123, horizon=50)
    b = sample_noise(model, seed=123, horizon=50)
    assert np.array_equal(a, b)
    assert a.shape == (50, 3)


def test_sample_noise_moments():
    model = NoiseModel()
    draws = sample_noise(model, seed=5, horizon=100_000)
    assert abs(draws.mean()) < 0.02
    assert abs(draws.var() - 1.0) < 0.02


def test_rademacher_support():
    model = NoiseModel(distribution="rademacher", n_w=2)
    draws = sample_noise(model, seed=9, horizon=1000)
    assert set(np.unique(draws)) == {-1.0, 1.0}
    assert abs(draws.mean()) < 0.1


def test_splitmix_streams_differ():
    seeds = {splitmix64(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert splitmix64(42, 7) == splitmix64(42, 7)


def test_zero_disturbance_origin_is_fixed_point(ex52_result):
    aug = ex52_result.augmented()
    traj = simulate_trajectory(aug, DisturbanceSignal.zero(1), NoiseModel(),
                               np.zeros(4), 100, seed=1)
    assert np.all(traj.eta == 0.0)
    assert np.all(traj.z_tilde == 0.0)


def test_example51_matches_independent_recursion():
    aug = augment_nonlinear(example51_system(), example51_filter())
    dist = example51_disturbance()
    horizon, seed = 120, 77
    traj = simulate_trajectory(aug, dist, NoiseModel(), np.zeros(4), horizon, seed)

    # straight-line re-implementation of the same recursion
    w = sample_noise(NoiseModel(), seed, horizon)[:, 0]
    x = np.array([0.0, 0.0])
    xh = np.array([0.0, 0.0])
    for k in range(horizon):
        v = 2.0 * 0.9999**k
        assert traj.eta[k] == pytest.approx([*x, *xh], abs=0.0)
        y1 = 0.5 * x[0] + v * np.sin(x[0])
        y2 = 0.5 * x[1] + v * np.sin(x[1])
        x_new = np.array([
            0.6 * x[0] ** 3 / (1 + x[0] ** 2 + x[1] ** 2) + 0.1 * v * x[0]
            + 0.5 * x[1] * np.sin(v) * w[k],
            0.65 * x[1] + 0.1 * x[1] * x[0] + 0.5 * v * np.sin(x[1]) * w[k],
        ])
        xh = 0.5 * xh + 0.5 * np.array([y1, y2])
        x = x_new


def test_deterministic_pass_matches_matrix_iteration(ex52_result):
    aug = ex52_result.augmented()
    dist = DisturbanceSignal.geometric(0.01, 0.9)
    eta0 = np.array([0.1, 1.0, 0.1, 1.0])
    traj = simulate_trajectory(aug, dist, None, eta0, 50, seed=0)
    eta = eta0.copy()
    for k in range(51):
        assert np.array_equal(traj.eta[k], eta)
        v = np.array([0.01 * 0.9**k])
        eta = aug.a_t @ eta + aug.b_t @ v
    assert np.all(traj.v[:, 0] == np.array([0.01 * 0.9**k for k in range(51)]))


def test_state_feedback_uses_pre_step_state(ex52_result):
    aug = ex52_result.augmented()
    f = np.array([[0.1, 0.0, -0.2, 0.05]])
    dist = DisturbanceSignal.state_feedback(f)
    eta0 = np.array([0.5, -0.2, 0.1, 0.3])
    traj = simulate_trajectory(aug, dist, None, eta0, 5, seed=0)
    assert np.array_equal(traj.v[0], f @ eta0)
    assert np.array_equal(traj.v[1], f @ traj.eta[1])


def test_divergence_reports_step():
    aug = LinearAugmentedSystem(a_t=2.0 * np.eye(2), b_t=np.zeros((2, 1)),
                                c_t=np.zeros((2, 2)), d_t=np.zeros((2, 1)),
                                g_t=np.eye(1, 2), m_t=np.zeros((1, 1)), n_x=1)
    with pytest.raises(DivergenceError) as err:
        simulate_trajectory(aug, DisturbanceSignal.zero(1), None,
                            np.array([1.0, 1.0]), 100, seed=0)
    assert 0 < err.value.step < 100


def test_monte_carlo_single_trial_identity(ex52_result):
    aug = ex52_result.augmented()
    dist = DisturbanceSignal.geometric(0.01, 0.9)
    report = monte_carlo(aug, dist, NoiseModel(), np.zeros(4), 80, 1, 99)
    traj = simulate_trajectory(aug, dist, NoiseModel(), np.zeros(4), 80,
                               trial_seed(99, 0))
    cz, cv = traj.cumulative_energies()
    assert np.array_equal(report.cum_z, cz)
    assert np.array_equal(report.cum_v, cv)
    assert np.all(report.stderr_z == 0)


def test_monte_carlo_zero_case(ex52_result):
    aug = ex52_result.augmented()
    report = monte_carlo(aug, DisturbanceSignal.zero(1), NoiseModel(),
                         np.zeros(4), 50, 5, 3)
    assert np.all(report.cum_z == 0) and np.all(report.cum_v == 0)


def test_monte_carlo_deterministic_and_worker_invariant(ex52_result):
    aug = ex52_result.augmented()
    dist = DisturbanceSignal.geometric(0.01, 0.9)
    eta0 = np.array([0.1, 1.0, 0.1, 1.0])
    r1 = monte_carlo(aug, dist, NoiseModel(), eta0, 60, 8, 12345)
    r2 = monte_carlo(aug, dist, NoiseModel(), eta0, 60, 8, 12345)
    r4 = monte_carlo(aug, dist, NoiseModel(), eta0, 60, 8, 12345, max_workers=4)
    assert np.array_equal(r1.cum_z, r2.cum_z)
    assert np.array_equal(r1.stderr_z, r2.stderr_z)
    assert np.array_equal(r1.cum_z, r4.cum_z)
    assert np.array_equal(r1.stderr_v, r4.stderr_v)


def test_monte_carlo_monotone_cumulatives(ex52_result):
    aug = ex52_result.augmented()
    report = monte_carlo(aug, DisturbanceSignal.geometric(0.01, 0.9),
                         NoiseModel(), np.array([0.1, 1.0, 0.1, 1.0]), 100, 10, 4)
    assert np.all(np.diff(report.cum_z) >= 0)
    assert np.all(np.diff(report.cum_v) >= 0)


def test_linear_scaling_is_exact(ex52_result):
    # doubling the disturbance amplitude scales energies by exactly 4
    # (power-of-two scaling commutes with float rounding)
    aug = ex52_result.augmented()
    base = monte_carlo(aug, DisturbanceSignal.geometric(0.01, 0.9),
                       NoiseModel(), np.zeros(4), 80, 4, 21)
    double = monte_carlo(aug, DisturbanceSignal.geometric(0.02, 0.9),
                         NoiseModel(), np.zeros(4), 80, 4, 21)
    assert np.array_equal(double.cum_z, 4.0 * base.cum_z)
    assert np.array_equal(double.cum_v, 4.0 * base.cum_v)


def test_empirical_gain_zero_output():
    report = EnergyReport(horizon=2, trials=1,
                          cum_z=np.zeros(3), cum_v=np.array([1.0, 2.0, 3.0]),
                          stderr_z=np.zeros(3), stderr_v=np.zeros(3),
                          master_seed=0)
    check = empirical_gain(report, gamma=1.0)
    assert check.ratio == 0.0
    assert check.satisfied


def test_empirical_gain_scaling_identity():
    report = EnergyReport(horizon=1, trials=1,
                          cum_z=np.array([1.0, 2.0]), cum_v=np.array([1.0, 4.0]),
                          stderr_z=np.zeros(2), stderr_v=np.zeros(2),
                          master_seed=0)
    r1 = empirical_gain(report, gamma=1.0)
    r2 = empirical_gain(report, gamma=2.0)
    assert r2.ratio == pytest.approx(r1.ratio / 4.0, rel=1e-14)


def test_empirical_gain_undefined_ratio():
    report = EnergyReport(horizon=1, trials=1,
                          cum_z=np.array([1.0, 2.0]), cum_v=np.zeros(2),
                          stderr_z=np.zeros(2), stderr_v=np.zeros(2),
                          master_seed=0)
    with pytest.raises(UndefinedRatioError):
        empirical_gain(report, gamma=1.0)


def test_probe_origin_stays(ex52_result):
    aug = ex52_result.augmented()
    report = internal_stability_probe(aug, NoiseModel(), [np.zeros(4)],
                                      horizon=50, trials=5, master_seed=8)
    probe = report.probes[0]
    assert probe.decay_fraction == 1.0
    assert np.all(probe.sup_norms == 0.0)


def test_probe_detects_divergence_direction():
    aug = LinearAugmentedSystem(a_t=1.05 * np.eye(2), b_t=np.zeros((2, 1)),
                                c_t=np.zeros((2, 2)), d_t=np.zeros((2, 1)),
                                g_t=np.eye(1, 2), m_t=np.zeros((1, 1)), n_x=1)
    report = internal_stability_probe(aug, None, [np.array([1.0, 1.0])],
                                      horizon=200, trials=3, master_seed=8)
    assert report.probes[0].decay_fraction == 0.0


def test_geometric_requires_contraction():
    with pytest.raises(ValueError):
        DisturbanceSignal.geometric(1.0, 1.0)


def test_explicit_sequence_zero_after_end():
    dist = DisturbanceSignal.explicit(np.array([[1.0], [2.0]]))
    assert dist.value(1, None) == pytest.approx([2.0])
    assert np.all(dist.value(5, None) == 0.0)


def test_serialization_round_trips(tmp_path, ex52_result):
    aug = ex52_result.augmented()
    dist = DisturbanceSignal.geometric(0.01, 0.9)
    report = monte_carlo(aug, dist, NoiseModel(), np.zeros(4), 20, 3, 5)
    csv_path = tmp_path / "energy.csv"
    json_path = tmp_path / "energy.json"
    energy_report_to_csv(report, csv_path)
    energy_report_to_json(report, json_path, metadata={"note": "test"})
    rows = list(csv.DictReader(open(csv_path)))
    assert len(rows) == 21
    assert float(rows[5]["cum_v"]) == report.cum_v[5]
    doc = json.loads(json_path.read_text())
    assert doc["trials"] == 3 and doc["metadata"]["note"] == "test"

    traj = simulate_trajectory(aug, dist, NoiseModel(), np.zeros(4), 10, 1)
    traj_path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, traj_path)
    rows = list(csv.DictReader(open(traj_path)))
    assert len(rows) == 11
    assert float(rows[3]["v_0"]) == traj.v[3, 0]
