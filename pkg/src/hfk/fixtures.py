"""Built-in demonstration fixtures.

Two worked systems ship with the package:

* "example51": a two-state nonlinear plant with trigonometric/rational
  maps and a fixed averaging filter, exercised by the simulation and
  sampling checks.  Its attenuation level is a fixture constant (1.0),
  not a derived quantity.
* "example52": the roll dynamics of a commercial vehicle, discretized at
  10 ms, with calibrated measurement and disturbance matrices.  Filters
  for it come from synthesis.

The vehicle fixture also carries a reference solution set (P1, P2, PK
and the recovered gain) used as a regression target for gain recovery.
"""

from __future__ import annotations

import numpy as np

from .model import AffineFilter, AffineStochasticSystem, Dims, \
    LinearStochasticSystem, NonlinearFilter, NonlinearStochasticSystem, \
    VehicleParams, discretize_vehicle
from .sim import DisturbanceSignal

EXAMPLE51_GAMMA = 1.0  # fixture constant, see package docs

_DIMS51 = Dims(n_x=2, n_y=2, n_v=1, n_z=1, n_w=1)


def example51_system() -> NonlinearStochasticSystem:
    def f(k, x, w, v):
        v0, w0 = v[0], w[0]
        return np.array([
            0.6 * x[0] ** 3 / (1.0 + x[0] ** 2 + x[1] ** 2)
            + 0.1 * v0 * x[0] + 0.5 * x[1] * np.sin(v0) * w0,
            0.65 * x[1] + 0.1 * x[1] * x[0] + 0.5 * v0 * np.sin(x[1]) * w0,
        ])

    def g(k, x, v):
        v0 = v[0]
        return np.array([0.5 * x[0] + v0 * np.sin(x[0]),
                         0.5 * x[1] + v0 * np.sin(x[1])])

    def m(k, x, v):
        return np.array([0.1 * x[0] + 0.1 * x[1]])

    return NonlinearStochasticSystem(f=f, g=g, m=m, dims=_DIMS51)


def example51_filter() -> NonlinearFilter:
    return NonlinearFilter(
        f_hat=lambda k, xh: 0.5 * xh,
        g_hat=lambda k, y: 0.5 * y,
        m_hat=lambda k, xh: np.array([0.1 * xh[0] + 0.1 * xh[1]]),
        n_state=2)


def example51_affine() -> tuple[AffineStochasticSystem, AffineFilter]:
    """Affine decomposition of the demo plant and its filter.

    The state-noise channel multiplying both the disturbance and the
    noise is linearized in the disturbance (sin v -> v); the inequality
    checks that consume this decomposition do not involve that channel.
    """
    sys = AffineStochasticSystem(
        f1=lambda x: np.array([0.6 * x[0] ** 3 / (1.0 + x[0] ** 2 + x[1] ** 2),
                               0.65 * x[1] + 0.1 * x[0] * x[1]]),
        f2=lambda x: np.zeros(2),
        h1=lambda x: np.array([[0.1 * x[0]], [0.0]]),
        h2=lambda x: np.array([[0.5 * x[1]], [0.5 * np.sin(x[1])]]),
        g1=lambda x: 0.5 * x,
        g2=lambda x: np.array([[np.sin(x[0])], [np.sin(x[1])]]),
        m=lambda x: np.array([0.1 * x[0] + 0.1 * x[1]]),
        dims=_DIMS51)
    filt = AffineFilter(
        f_hat=lambda xh: 0.5 * xh,
        g_hat=lambda xh: 0.5 * np.eye(2),
        m_hat=lambda xh: np.array([0.1 * xh[0] + 0.1 * xh[1]]),
        n_state=2)
    return sys, filt


def example51_disturbance() -> DisturbanceSignal:
    return DisturbanceSignal.geometric(2.0, 0.9999)


# --- vehicle roll fixture ---------------------------------------------------

EXAMPLE52_K_MEAS = np.array([[0.4048, 0.6405], [1.1213, 1.4616]])
EXAMPLE52_B = np.array([[-0.7916], [0.3652]])
EXAMPLE52_L_MEAS = np.array([[0.8248], [-1.3774]])
EXAMPLE52_G_OUT = np.array([[1.0, 0.0]])


def example52_params() -> VehicleParams:
    return VehicleParams(c_r=53071.0, m_s=1700.0, h_cr=0.25, i_xx=1700.0,
                         k_r=55314.0, d_n=20.0, t_s=0.01)


def example52_system(include_gravity: bool = False) -> LinearStochasticSystem:
    return discretize_vehicle(example52_params(),
                              k_meas=EXAMPLE52_K_MEAS,
                              b=EXAMPLE52_B,
                              l_meas=EXAMPLE52_L_MEAS,
                              g_out=EXAMPLE52_G_OUT,
                              include_gravity=include_gravity)


def example52_disturbance() -> DisturbanceSignal:
    return DisturbanceSignal.geometric(0.01, 0.9)


# Reference solution set for the vehicle fixture (4-decimal precision), a
# regression target for the gain-recovery identity khat = P2^{-1} PK.
EXAMPLE52_REFERENCE_P1 = np.array([[0.0114, 0.0002], [0.0002, 0.0002]])
EXAMPLE52_REFERENCE_P2 = np.array([[7.5939, 0.1379], [0.1379, 0.0029]])
EXAMPLE52_REFERENCE_PK = np.array([[-6.3529, 2.8009], [-0.1137, 0.0503]])
EXAMPLE52_REFERENCE_GAIN = np.array([[-0.9194, 0.3965], [4.5617, -1.5241]])

FIXTURE_NAMES = ("example51", "example52")
