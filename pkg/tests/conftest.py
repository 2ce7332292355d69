import numpy as np
import pytest

from hfk.fixtures import example52_system
from hfk.model import Dims, LinearFilter, augment_linear, build_linear_system
from hfk.synth import synthesize_hinf


def random_spd(rng, n, scale=1.0):
    w = rng.standard_normal((n, n))
    return scale * (w @ w.T + n * np.eye(n))


def random_linear_system(rng, n_x=2, n_y=2, n_v=1, n_z=1,
                         radius=0.8, noise_scale=0.1):
    """A random plant with spectral radius `radius` and small state noise."""
    a = rng.standard_normal((n_x, n_x))
    rho = max(abs(np.linalg.eigvals(a)))
    a = a * (radius / max(rho, 1e-9))
    c = noise_scale * rng.standard_normal((n_x, n_x))
    matrices = {
        "A": a,
        "B": rng.standard_normal((n_x, n_v)),
        "C": c,
        "D": noise_scale * rng.standard_normal((n_x, n_v)),
        "K": rng.standard_normal((n_y, n_x)),
        "L": rng.standard_normal((n_y, n_v)),
        "G": rng.standard_normal((n_z, n_x)),
        "M": rng.standard_normal((n_z, n_v)),
    }
    return build_linear_system(matrices, Dims(n_x, n_y, n_v, n_z))


def random_augmented(rng, **kwargs):
    sys = random_linear_system(rng, **kwargs)
    gain = 0.3 * rng.standard_normal((sys.dims.n_x, sys.dims.n_y))
    return sys, augment_linear(sys, LinearFilter(gain))


def riccati_equality_solution(aug, gamma, tol=1e-13, max_iter=20000):
    """Fixed-point iteration driving the Riccati residual to zero.

    Returns the limit P (with residual ~ tol) or None when the gate
    condition breaks or the iteration fails to converge.
    """
    at, bt, ct, dt, gt, mt = aug.a_t, aug.b_t, aug.c_t, aug.d_t, aug.g_t, aug.m_t
    n_v = aug.n_v
    p = np.zeros((aug.n_eta, aug.n_eta))
    for _ in range(max_iter):
        gate = bt.T @ p @ bt + dt.T @ p @ dt + mt.T @ mt - gamma**2 * np.eye(n_v)
        gate = 0.5 * (gate + gate.T)
        if np.linalg.eigvalsh(gate)[-1] >= -1e-12:
            return None
        t = at.T @ p @ bt + ct.T @ p @ dt + gt.T @ mt
        p_next = at.T @ p @ at + ct.T @ p @ ct + gt.T @ gt \
            - t @ np.linalg.solve(gate, t.T)
        p_next = 0.5 * (p_next + p_next.T)
        if np.max(np.abs(p_next - p)) <= tol * (1.0 + np.max(np.abs(p_next))):
            return p_next
        p = p_next
    return None


def mean_square_stable(a_cl, c_cl):
    """Second-moment stability of x' = (a_cl + c_cl w) x with unit-variance w."""
    op = np.kron(a_cl, a_cl) + np.kron(c_cl, c_cl)
    return max(abs(np.linalg.eigvals(op))) < 1.0


@pytest.fixture(scope="session")
def ex52_system():
    return example52_system()


@pytest.fixture(scope="session")
def ex52_result(ex52_system):
    return synthesize_hinf(ex52_system, 1.0)
