import numpy as np
import pytest

from hfk.linalg import householder_tridiagonal, symmetric_eigenvalues


def test_matches_reference_on_random_matrices():
    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(1, 25))
        a = rng.standard_normal((n, n))
        a = a + a.T
        mine = symmetric_eigenvalues(a)
        ref = np.linalg.eigvalsh(a)
        assert np.max(np.abs(mine - ref)) <= 1e-11 * max(1.0, np.max(np.abs(ref)))


def test_handles_degenerate_spectra():
    rng = np.random.default_rng(7)
    # repeated eigenvalues, rank-one, diagonal, and zero matrices
    cases = [np.zeros((4, 4)), np.eye(5), np.diag([3.0, 3.0, -1.0])]
    w = rng.standard_normal(6)
    cases.append(np.outer(w, w))
    for a in cases:
        assert np.allclose(symmetric_eigenvalues(a), np.linalg.eigvalsh(a),
                           atol=1e-12)


def test_tridiagonal_form_preserves_spectrum():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((8, 8))
    a = a + a.T
    d, e = householder_tridiagonal(a)
    t = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.allclose(np.linalg.eigvalsh(t), np.linalg.eigvalsh(a), atol=1e-10)


def test_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        symmetric_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_scalar_matrix():
    assert symmetric_eigenvalues(np.array([[4.5]])) == pytest.approx([4.5])
