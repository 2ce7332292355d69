"""System, filter, and augmentation models.

Three plant families are supported:

* linear systems with state/disturbance-multiplicative scalar noise,
    x' = A x + B v + (C x + D v) w,   y = K x + L v,   z = G x + M v
* general nonlinear time-varying systems given by opaque maps
  (f, g, m) with f(k, 0, 0, 0) = 0 etc.,
* affine-in-disturbance nonlinear systems,
    x' = f1(x) + h1(x) v + [f2(x) + h2(x) v] w,
    y  = g1(x) + g2(x) v,   z = m(x),
  which admit closed-form expectations over w.

Augmentation couples a plant with an estimation filter and produces the
error dynamics eta -> eta' whose output is the estimation error
z_tilde = z - z_hat.  The linear augmentation uses the error coordinates
eta = [x; x - x_hat]; the nonlinear one stacks eta = [x; x_hat].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_GRAVITY = 9.81  # m/s^2, only used by the optional lever-arm variant


class DimensionError(ValueError):
    """A matrix or vector does not have the shape the model requires."""


def _as_matrix(name: str, value, shape: tuple[int, int]) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.ndim == 1 and shape[1] == 1:
        m = m.reshape(-1, 1)
    if m.shape != shape:
        raise DimensionError(f"matrix {name}: expected shape {shape}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionError(f"matrix {name}: entries must be finite")
    return m


def _as_vector(name: str, value, length: int) -> np.ndarray:
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.shape != (length,):
        raise DimensionError(f"vector {name}: expected length {length}, got {v.shape}")
    return v


@dataclass(frozen=True)
class Dims:
    """Dimensions of a stochastic plant.

    n_x: state, n_y: measurement, n_v: disturbance, n_z: regulated output,
    n_w: driving noise.
    """

    n_x: int
    n_y: int
    n_v: int
    n_z: int
    n_w: int = 1

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_v", "n_z", "n_w"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value <= 0:
                raise DimensionError(f"{name} must be a positive integer, got {value!r}")

    def to_dict(self) -> dict:
        return {"n_x": self.n_x, "n_y": self.n_y, "n_v": self.n_v,
                "n_z": self.n_z, "n_w": self.n_w}

    @classmethod
    def from_dict(cls, doc: dict) -> "Dims":
        return cls(int(doc["n_x"]), int(doc["n_y"]), int(doc["n_v"]),
                   int(doc["n_z"]), int(doc.get("n_w", 1)))


@dataclass(frozen=True)
class LinearStochasticSystem:
    """x' = A x + B v + (C x + D v) w,  y = K x + L v,  z = G x + M v."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    k_meas: np.ndarray
    l_meas: np.ndarray
    g_out: np.ndarray
    m_out: np.ndarray
    dims: Dims

    def __post_init__(self):
        n, ny, nv, nz = self.dims.n_x, self.dims.n_y, self.dims.n_v, self.dims.n_z
        checked = {
            "a": (self.a, (n, n)),
            "b": (self.b, (n, nv)),
            "c": (self.c, (n, n)),
            "d": (self.d, (n, nv)),
            "k_meas": (self.k_meas, (ny, n)),
            "l_meas": (self.l_meas, (ny, nv)),
            "g_out": (self.g_out, (nz, n)),
            "m_out": (self.m_out, (nz, nv)),
        }
        for name, (value, shape) in checked.items():
            object.__setattr__(self, name, _as_matrix(name, value, shape))
        if self.dims.n_w != 1:
            raise DimensionError("linear systems carry a scalar noise channel (n_w=1)")


_JSON_KEYS = ("A", "B", "C", "D", "K", "L", "G", "M")
_FIELD_FOR_KEY = dict(zip(_JSON_KEYS, ("a", "b", "c", "d", "k_meas", "l_meas",
                                       "g_out", "m_out")))


def build_linear_system(matrices: dict, dims: Dims) -> LinearStochasticSystem:
    """Validate and assemble a linear system from named matrices.

    `matrices` maps the external names A, B, C, D, K, L, G, M (K is the
    measurement matrix, G/M the regulated-output matrices) to row-major
    arrays.
    """
    missing = [k for k in _JSON_KEYS if k not in matrices]
    if missing:
        raise DimensionError(f"missing matrices: {', '.join(missing)}")
    fields = {_FIELD_FOR_KEY[k]: matrices[k] for k in _JSON_KEYS}
    return LinearStochasticSystem(dims=dims, **fields)


def linear_system_to_json(sys: LinearStochasticSystem) -> dict:
    doc = {"dims": sys.dims.to_dict()}
    for key in _JSON_KEYS:
        doc[key] = getattr(sys, _FIELD_FOR_KEY[key]).tolist()
    return doc


def linear_system_from_json(doc: dict) -> LinearStochasticSystem:
    dims = Dims.from_dict(doc["dims"])
    return build_linear_system({k: doc[k] for k in _JSON_KEYS}, dims)


def load_linear_system(path) -> LinearStochasticSystem:
    with open(path) as fh:
        return linear_system_from_json(json.load(fh))


@dataclass(frozen=True)
class LinearFilter:
    """Full-order observer gain: x_hat' = A x_hat + gain (y - K x_hat)."""

    gain: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gain, dtype=float)
        if g.ndim != 2 or not np.all(np.isfinite(g)):
            raise DimensionError("gain must be a finite 2-d matrix")
        object.__setattr__(self, "gain", g)


@dataclass(frozen=True)
class NonlinearStochasticSystem:
    """Opaque time-varying maps x' = f(k,x,w,v), y = g(k,x,v), z = m(k,x,v).

    All maps must vanish at the origin; this is checked once by evaluating
    at (k=0, 0, 0, 0).  Time-invariant systems simply ignore k.
    """

    f: Callable[[int, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    m: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    dims: Dims

    def __post_init__(self):
        d = self.dims
        x0 = np.zeros(d.n_x)
        w0 = np.zeros(d.n_w)
        v0 = np.zeros(d.n_v)
        fx = _as_vector("f(0,0,0,0)", self.f(0, x0, w0, v0), d.n_x)
        gy = _as_vector("g(0,0,0)", self.g(0, x0, v0), d.n_y)
        mz = _as_vector("m(0,0,0)", self.m(0, x0, v0), d.n_z)
        for name, val in (("f", fx), ("g", gy), ("m", mz)):
            if np.any(val != 0.0):
                raise DimensionError(f"{name} must vanish at the origin, got {val}")


@dataclass(frozen=True)
class NonlinearFilter:
    """x_hat' = f_hat(k, x_hat) + g_hat(k, y),  z_hat = m_hat(k, x_hat).

    The filter starts from x_hat_0 = 0 and its maps vanish at 0.
    """

    f_hat: Callable[[int, np.ndarray], np.ndarray]
    g_hat: Callable[[int, np.ndarray], np.ndarray]
    m_hat: Callable[[int, np.ndarray], np.ndarray]
    n_state: int

    def __post_init__(self):
        if self.n_state <= 0:
            raise DimensionError("filter state dimension must be positive")
        x0 = np.zeros(self.n_state)
        fx = np.asarray(self.f_hat(0, x0), dtype=float)
        mz = np.asarray(self.m_hat(0, x0), dtype=float)
        if np.any(fx != 0.0) or np.any(mz != 0.0):
            raise DimensionError("filter maps must vanish at the origin")


@dataclass(frozen=True)
class LinearAugmentedSystem:
    """Error dynamics eta = [x; x - x_hat] of a linear plant + observer.

    eta' = At eta + Bt v + (Ct eta + Dt v) w,  z_tilde = Gt eta + Mt v.
    """

    a_t: np.ndarray
    b_t: np.ndarray
    c_t: np.ndarray
    d_t: np.ndarray
    g_t: np.ndarray
    m_t: np.ndarray
    n_x: int

    kind = "linear"

    @property
    def n_eta(self) -> int:
        return self.a_t.shape[0]

    @property
    def n_v(self) -> int:
        return self.b_t.shape[1]

    @property
    def n_z(self) -> int:
        return self.g_t.shape[0]

    @property
    def n_w(self) -> int:
        return 1

    def step(self, k: int, eta: np.ndarray, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        w0 = float(np.asarray(w).reshape(-1)[0])
        return self.a_t @ eta + self.b_t @ v + (self.c_t @ eta + self.d_t @ v) * w0

    def output(self, k: int, eta: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.g_t @ eta + self.m_t @ v

    # Block accessors: the augmentation is invertible, each input matrix
    # sits verbatim inside a tilde matrix.
    def block_a(self) -> np.ndarray:
        return self.a_t[: self.n_x, : self.n_x]

    def block_a_err(self) -> np.ndarray:
        return self.a_t[self.n_x :, self.n_x :]

    def block_b(self) -> np.ndarray:
        return self.b_t[: self.n_x, :]

    def block_b_err(self) -> np.ndarray:
        return self.b_t[self.n_x :, :]

    def block_c(self) -> np.ndarray:
        return self.c_t[: self.n_x, : self.n_x]

    def block_d(self) -> np.ndarray:
        return self.d_t[: self.n_x, :]

    def block_g(self) -> np.ndarray:
        return self.g_t[:, self.n_x :]

    def block_m(self) -> np.ndarray:
        return self.m_t


@dataclass(frozen=True)
class NonlinearAugmentedSystem:
    """Stacked dynamics eta = [x; x_hat] of a nonlinear plant + filter."""

    f_t: Callable[[int, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    m_t: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    n_x: int
    n_eta: int
    n_v: int
    n_z: int
    n_w: int

    kind = "nonlinear"

    def step(self, k: int, eta: np.ndarray, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.f_t(k, eta, w, v)

    def output(self, k: int, eta: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.m_t(k, eta, v)


def augment_linear(sys: LinearStochasticSystem,
                   filt: LinearFilter) -> LinearAugmentedSystem:
    """Build the augmented error system for a linear plant and observer gain.

    With khat the gain, the blocks are
        At = diag(A, A - khat K),  Bt = [B; B - khat L],
        Ct = [C 0; C 0],           Dt = [D; D],
        Gt = [0 G],                Mt = M.
    """
    n, ny, nv, nz = sys.dims.n_x, sys.dims.n_y, sys.dims.n_v, sys.dims.n_z
    khat = _as_matrix("gain", filt.gain, (n, ny))
    zero_nn = np.zeros((n, n))
    a_t = np.block([[sys.a, zero_nn], [zero_nn, sys.a - khat @ sys.k_meas]])
    b_t = np.vstack([sys.b, sys.b - khat @ sys.l_meas])
    c_t = np.block([[sys.c, zero_nn], [sys.c, zero_nn]])
    d_t = np.vstack([sys.d, sys.d])
    g_t = np.hstack([np.zeros((nz, n)), sys.g_out])
    m_t = sys.m_out.copy()
    return LinearAugmentedSystem(a_t=a_t, b_t=b_t, c_t=c_t, d_t=d_t,
                                 g_t=g_t, m_t=m_t, n_x=n)


def augment_nonlinear(sys: NonlinearStochasticSystem,
                      filt: NonlinearFilter) -> NonlinearAugmentedSystem:
    """Stack a nonlinear plant with its filter.

    eta = [x; x_hat],
    f_t(k, eta, w, v) = [f(k,x,w,v); f_hat(k,x_hat) + g_hat(k, g(k,x,v))],
    m_t(k, eta, v)    = m(k,x,v) - m_hat(k,x_hat).
    """
    d = sys.dims
    if filt.n_state > d.n_x:
        raise DimensionError("filter state dimension exceeds plant state dimension")
    n_x, n_h = d.n_x, filt.n_state

    probe = np.asarray(filt.g_hat(0, np.zeros(d.n_y)), dtype=float).reshape(-1)
    if probe.shape != (n_h,):
        raise DimensionError(
            f"g_hat output: expected length {n_h}, got {probe.shape}")
    if np.any(probe != 0.0):
        raise DimensionError("g_hat must vanish at the origin")

    def f_t(k, eta, w, v):
        x, xh = eta[:n_x], eta[n_x:]
        y = np.asarray(sys.g(k, x, v), dtype=float).reshape(-1)
        top = np.asarray(sys.f(k, x, w, v), dtype=float).reshape(-1)
        bot = (np.asarray(filt.f_hat(k, xh), dtype=float).reshape(-1)
               + np.asarray(filt.g_hat(k, y), dtype=float).reshape(-1))
        return np.concatenate([top, bot])

    def m_t(k, eta, v):
        x, xh = eta[:n_x], eta[n_x:]
        return (np.asarray(sys.m(k, x, v), dtype=float).reshape(-1)
                - np.asarray(filt.m_hat(k, xh), dtype=float).reshape(-1))

    return NonlinearAugmentedSystem(f_t=f_t, m_t=m_t, n_x=n_x,
                                    n_eta=n_x + n_h, n_v=d.n_v,
                                    n_z=d.n_z, n_w=d.n_w)


@dataclass(frozen=True)
class AffineStochasticSystem:
    """Affine-in-disturbance plant with scalar multiplicative noise.

    x' = f1(x) + h1(x) v + [f2(x) + h2(x) v] w,
    y  = g1(x) + g2(x) v,
    z  = m(x).

    f1, f2 return state vectors; h1, h2 return (n_x, n_v) matrices;
    g1 returns a measurement vector, g2 an (n_y, n_v) matrix; m an
    (n_z,) vector.
    """

    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    h1: Callable[[np.ndarray], np.ndarray]
    h2: Callable[[np.ndarray], np.ndarray]
    g1: Callable[[np.ndarray], np.ndarray]
    g2: Callable[[np.ndarray], np.ndarray]
    m: Callable[[np.ndarray], np.ndarray]
    dims: Dims

    def __post_init__(self):
        if self.dims.n_w != 1:
            raise DimensionError("affine systems carry a scalar noise channel")
        d = self.dims
        x0 = np.zeros(d.n_x)
        # The drift and output maps must vanish at the origin; the
        # disturbance-coefficient maps h1, h2, g2 may not.
        for name, val, n in (("f1(0)", self.f1(x0), d.n_x),
                             ("f2(0)", self.f2(x0), d.n_x),
                             ("g1(0)", self.g1(x0), d.n_y),
                             ("m(0)", self.m(x0), d.n_z)):
            if np.any(_as_vector(name, val, n) != 0.0):
                raise DimensionError(f"{name} must vanish")
        _as_matrix("h1(0)", self.h1(x0), (d.n_x, d.n_v))
        _as_matrix("h2(0)", self.h2(x0), (d.n_x, d.n_v))
        _as_matrix("g2(0)", self.g2(x0), (d.n_y, d.n_v))


@dataclass(frozen=True)
class AffineFilter:
    """x_hat' = f_hat(x_hat) + g_hat(x_hat) y,  z_hat = m_hat(x_hat).

    g_hat is matrix-valued: it returns the (n_state, n_y) injection gain
    evaluated at the current filter state.
    """

    f_hat: Callable[[np.ndarray], np.ndarray]
    g_hat: Callable[[np.ndarray], np.ndarray]
    m_hat: Callable[[np.ndarray], np.ndarray]
    n_state: int

    def __post_init__(self):
        if self.n_state <= 0:
            raise DimensionError("filter state dimension must be positive")
        xh0 = np.zeros(self.n_state)
        if np.any(np.asarray(self.f_hat(xh0), dtype=float) != 0.0) or \
                np.any(np.asarray(self.m_hat(xh0), dtype=float) != 0.0):
            raise DimensionError("filter drift and output must vanish at the origin")


@dataclass(frozen=True)
class AffineAugmentedSystem:
    """Augmented affine error dynamics eta = [x; x_hat].

    eta' = f1_t(eta) + h1_t(eta) v + [f2_t(eta) + h2_t(eta) v] w,
    z_tilde = m_t(eta), with
        f1_t = [f1(x); f_hat(xh) + g_hat(xh) g1(x)],
        f2_t = [f2(x); 0],
        h1_t = [h1(x); g_hat(xh) g2(x)],
        h2_t = [h2(x); 0].
    """

    f1_t: Callable[[np.ndarray], np.ndarray]
    f2_t: Callable[[np.ndarray], np.ndarray]
    h1_t: Callable[[np.ndarray], np.ndarray]
    h2_t: Callable[[np.ndarray], np.ndarray]
    m_t_plain: Callable[[np.ndarray], np.ndarray]
    n_x: int
    n_eta: int
    n_v: int
    n_z: int

    kind = "affine"
    n_w = 1

    def step(self, k: int, eta: np.ndarray, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        w0 = float(np.asarray(w).reshape(-1)[0])
        return (self.f1_t(eta) + self.h1_t(eta) @ v
                + (self.f2_t(eta) + self.h2_t(eta) @ v) * w0)

    def output(self, k: int, eta: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.m_t_plain(eta)

    def m_t(self, k: int, eta: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.m_t_plain(eta)


def augment_affine(sys: AffineStochasticSystem,
                   filt: AffineFilter) -> AffineAugmentedSystem:
    n_x, n_h = sys.dims.n_x, filt.n_state
    zeros_h = np.zeros(n_h)
    zeros_hv = np.zeros((n_h, sys.dims.n_v))

    def f1_t(eta):
        x, xh = eta[:n_x], eta[n_x:]
        return np.concatenate([
            np.asarray(sys.f1(x), dtype=float).reshape(-1),
            np.asarray(filt.f_hat(xh), dtype=float).reshape(-1)
            + np.asarray(filt.g_hat(xh), dtype=float)
            @ np.asarray(sys.g1(x), dtype=float).reshape(-1),
        ])

    def f2_t(eta):
        return np.concatenate(
            [np.asarray(sys.f2(eta[:n_x]), dtype=float).reshape(-1), zeros_h])

    def h1_t(eta):
        x, xh = eta[:n_x], eta[n_x:]
        return np.vstack([
            np.asarray(sys.h1(x), dtype=float),
            np.asarray(filt.g_hat(xh), dtype=float) @ np.asarray(sys.g2(x), dtype=float),
        ])

    def h2_t(eta):
        return np.vstack([np.asarray(sys.h2(eta[:n_x]), dtype=float), zeros_hv])

    def m_t_plain(eta):
        x, xh = eta[:n_x], eta[n_x:]
        return (np.asarray(sys.m(x), dtype=float).reshape(-1)
                - np.asarray(filt.m_hat(xh), dtype=float).reshape(-1))

    return AffineAugmentedSystem(f1_t=f1_t, f2_t=f2_t, h1_t=h1_t, h2_t=h2_t,
                                 m_t_plain=m_t_plain, n_x=n_x, n_eta=n_x + n_h,
                                 n_v=sys.dims.n_v, n_z=sys.dims.n_z)


@dataclass(frozen=True)
class VehicleParams:
    """Roll-plane parameters of a commercial vehicle.

    c_r: total torsional damping [N m s/rad], m_s: sprung mass [kg],
    h_cr: sprung-mass height about the roll axis [m], i_xx: roll inertia
    [kg m^2], k_r: stiffness [N m s/rad], d_n: noise intensity, t_s:
    sampling interval [s].
    """

    c_r: float
    m_s: float
    h_cr: float
    i_xx: float
    k_r: float
    d_n: float
    t_s: float

    def __post_init__(self):
        for name in ("c_r", "m_s", "h_cr", "i_xx", "k_r", "d_n", "t_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_json(cls, doc: dict) -> "VehicleParams":
        return cls(**{k: float(doc[k]) for k in
                      ("c_r", "m_s", "h_cr", "i_xx", "k_r", "d_n", "t_s")})

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("c_r", "m_s", "h_cr", "i_xx", "k_r", "d_n", "t_s")}


def discretize_vehicle(params: VehicleParams,
                       k_meas,
                       b,
                       l_meas,
                       g_out,
                       m_out=None,
                       include_gravity: bool = False) -> LinearStochasticSystem:
    """Discretized roll dynamics with sampled torsional noise.

    A and C come from the roll model at sampling interval t_s; the
    measurement and disturbance matrices are taken as given (they are
    calibration data, not derived from the physical parameters).

    include_gravity scales the lever-arm term m_s*h_cr by g for
    sensitivity studies; the default keeps the plain product.
    """
    p = params
    t = p.t_s
    lever = p.m_s * p.h_cr * (_GRAVITY if include_gravity else 1.0)
    a = np.array([
        [1.0, t],
        [(lever - p.k_r) * t / p.i_xx, 1.0 - p.c_r * t / p.i_xx],
    ])
    c = np.array([
        [0.0, 0.0],
        [0.0, -p.d_n * t / p.i_xx],
    ])
    k_meas = np.asarray(k_meas, dtype=float)
    ny = k_meas.shape[0]
    b = np.asarray(b, dtype=float).reshape(2, -1)
    nv = b.shape[1]
    g_out = np.asarray(g_out, dtype=float).reshape(-1, 2)
    nz = g_out.shape[0]
    if m_out is None:
        m_out = np.zeros((nz, nv))
    dims = Dims(n_x=2, n_y=ny, n_v=nv, n_z=nz, n_w=1)
    return LinearStochasticSystem(
        a=a, b=b, c=c, d=np.zeros((2, nv)), k_meas=k_meas,
        l_meas=np.asarray(l_meas, dtype=float).reshape(ny, nv),
        g_out=g_out, m_out=np.asarray(m_out, dtype=float).reshape(nz, nv),
        dims=dims)
