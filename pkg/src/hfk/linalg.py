"""Self-contained dense symmetric eigenvalue computation.

Householder reduction to tridiagonal form followed by QL iteration with
implicit shifts.  This is the verification path for solver certificates:
it shares no code with the LAPACK-backed routines the solver itself uses,
so a solution certified here has been checked by an independent route.
"""

from __future__ import annotations

import math

import numpy as np


class EigenConvergenceError(RuntimeError):
    """QL iteration failed to converge within the sweep budget."""


def _check_symmetric(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if float(np.max(np.abs(a - a.T), initial=0.0)) > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    # Work on the exactly symmetric part so roundoff in the caller's
    # assembly cannot produce complex-pair artifacts.
    return 0.5 * (a + a.T)


def householder_tridiagonal(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a symmetric matrix to tridiagonal form.

    Returns (d, e): the diagonal and the subdiagonal (e[i] couples
    d[i] and d[i+1]; len(e) == len(d) - 1).
    """
    t = _check_symmetric(a).copy()
    n = t.shape[0]
    for k in range(n - 2):
        x = t[k + 1 :, k].copy()
        norm_x = math.sqrt(float(x @ x))
        if norm_x == 0.0:
            continue
        alpha = -norm_x if x[0] >= 0.0 else norm_x
        u = x.copy()
        u[0] -= alpha
        unorm = math.sqrt(float(u @ u))
        if unorm == 0.0:
            continue
        u /= unorm
        # Two-sided reflector update of the trailing block:
        # T <- (I - 2uu')T(I - 2uu') = T - u w' - w u', w = 2p - 2(u'p)u.
        sub = t[k + 1 :, k + 1 :]
        p = sub @ u
        w = 2.0 * p - 2.0 * float(u @ p) * u
        sub -= np.outer(u, w) + np.outer(w, u)
        t[k + 1, k] = alpha
        t[k, k + 1] = alpha
        t[k + 2 :, k] = 0.0
        t[k, k + 2 :] = 0.0
    return np.diag(t).copy(), np.diag(t, -1).copy()


def tridiagonal_eigenvalues(
    d: np.ndarray, e: np.ndarray, max_sweeps: int = 50
) -> np.ndarray:
    """Eigenvalues of a symmetric tridiagonal matrix via implicit-shift QL."""
    d = np.asarray(d, dtype=float).copy()
    n = d.shape[0]
    if n == 0:
        return d
    work = np.zeros(n)
    work[: n - 1] = np.asarray(e, dtype=float)
    eps = np.finfo(float).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(work[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                raise EigenConvergenceError(
                    f"QL iteration exceeded {max_sweeps} sweeps at index {l}"
                )
            g = (d[l + 1] - d[l]) / (2.0 * work[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + work[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * work[i]
                b = c * work[i]
                r = math.hypot(f, g)
                work[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    work[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
            if underflow:
                continue
            d[l] -= p
            work[l] = g
            work[m] = 0.0
    d.sort()
    return d


def symmetric_eigenvalues(a: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, sorted ascending."""
    a = _check_symmetric(a)
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0]])
    d, e = householder_tridiagonal(a)
    return tridiagonal_eigenvalues(d, e)
