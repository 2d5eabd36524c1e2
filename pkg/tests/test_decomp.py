import numpy as np
import pytest

from psmimo import decomp
from psmimo.errors import RankDeficient


def random_complex(rng, m, n):
    return rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))


def test_qr_identity():
    f = decomp.qr(np.eye(3))
    assert np.allclose(f.q, np.eye(3), atol=1e-12)
    assert np.allclose(f.r, np.eye(3), atol=1e-12)


def test_qr_permutation_case():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    f = decomp.qr(a)
    assert np.allclose(np.diagonal(f.r), [1.0, 1.0])
    assert np.allclose(f.q.conj().T @ f.q, np.eye(2), atol=1e-12)
    assert np.allclose(f.q @ f.r, a, atol=1e-12)


def test_qr_random_reconstruction():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = random_complex(rng, 6, 4)
        f = decomp.qr(a)
        assert np.linalg.norm(f.q @ f.r - a) < 1e-9 * np.linalg.norm(a)
        assert np.abs(f.q.conj().T @ f.q - np.eye(4)).max() < 1e-10
        d = np.diagonal(f.r)
        assert np.all(d.imag == 0) and np.all(d.real > 0)
        assert np.abs(np.tril(f.r, -1)).max() == 0.0


def test_qr_rejects_rank_deficient():
    a = np.ones((4, 2), dtype=complex)
    with pytest.raises(RankDeficient):
        decomp.qr(a)


def test_qr_rejects_wide():
    with pytest.raises(ValueError):
        decomp.qr(np.ones((2, 3)))


def test_qr_rejects_nonfinite():
    a = np.eye(3)
    a = a.astype(complex)
    a[0, 0] = np.nan
    with pytest.raises(ValueError):
        decomp.qr(a)


def test_svd_diagonal():
    u, s, v = decomp.svd(np.diag([3.0, 1.0]))
    assert np.allclose(s, [3.0, 1.0])
    assert np.allclose(np.abs(u), np.eye(2), atol=1e-12)
    assert np.allclose(np.abs(v), np.eye(2), atol=1e-12)


def test_svd_scaled_identity():
    _, s, _ = decomp.svd(2.0 * np.eye(4))
    assert np.allclose(s, 2.0)


def test_svd_matches_eigen_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = random_complex(rng, 4, 4)
        u, s, v = decomp.svd(a)
        assert np.linalg.norm(u @ np.diag(s) @ v.conj().T - a) \
            < 1e-9 * np.linalg.norm(a)
        eig = np.sort(np.linalg.eigvalsh(a.conj().T @ a))[::-1]
        assert np.abs(np.sqrt(np.maximum(eig, 0)) - s).max() < 1e-8 * s[0]
        assert np.all(np.diff(s) <= 1e-12)


def test_gmd_two_by_two_hand_case():
    f = decomp.gmd(np.diag([4.0, 1.0]))
    assert np.allclose(np.diagonal(f.r).real, 2.0, rtol=1e-12)
    assert np.linalg.norm(f.q @ f.r @ f.p.conj().T - np.diag([4.0, 1.0])) < 1e-9


def test_gmd_equal_singular_values_need_no_mixing():
    for c in (0.5, 3.0):
        a = c * np.eye(4)
        f = decomp.gmd(a)
        assert np.allclose(np.diagonal(f.r).real, c, rtol=1e-12)
        assert np.abs(f.r - np.diag(np.diagonal(f.r))).max() < 1e-12
        assert np.linalg.norm(f.q @ f.r @ f.p.conj().T - a) < 1e-9


def test_gmd_rectangular_diagonal_is_geomean():
    rng = np.random.default_rng(3)
    a = random_complex(rng, 5, 3)
    f = decomp.gmd(a)
    s = np.linalg.svd(a, compute_uv=False)
    target = np.prod(s) ** (1.0 / 3.0)
    assert np.abs(np.diagonal(f.r).real - target).max() < 1e-9 * target


def test_gmd_factor_properties_random():
    rng = np.random.default_rng(19)
    for _ in range(60):
        m = rng.integers(2, 9)
        n = rng.integers(2, m + 1)
        a = random_complex(rng, m, n)
        f = decomp.gmd(a)
        d = np.diagonal(f.r).real
        assert d.max() / d.min() - 1 < 1e-9
        assert np.abs(f.q.conj().T @ f.q - np.eye(n)).max() < 1e-10
        assert np.abs(f.p.conj().T @ f.p - np.eye(n)).max() < 1e-10
        assert np.abs(f.p @ f.p.conj().T - np.eye(n)).max() < 1e-10
        assert np.linalg.norm(f.q @ f.r @ f.p.conj().T - a) \
            < 1e-9 * np.linalg.norm(a)
        s = np.linalg.svd(a, compute_uv=False)
        # determinant-magnitude preservation
        assert abs(np.prod(d) - np.prod(s)) < 1e-8 * np.prod(s)


def test_gmd_rejects_rank_deficient():
    a = np.zeros((4, 3), dtype=complex)
    a[:, 0] = 1.0
    a[:, 1] = 2.0
    a[0, 2] = 1e-15
    with pytest.raises(RankDeficient):
        decomp.gmd(a)
