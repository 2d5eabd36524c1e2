"""Complex dense matrix factorizations: QR, SVD, and the geometric mean
decomposition (GMD).

All factorizations follow one phase convention: triangular factors carry a
real, strictly positive diagonal, with unit-phase factors absorbed into the
orthonormal columns.  That makes each factorization unique and lets tests
compare factors directly.

The GMD of a matrix A (rows >= cols, full column rank) is

    A = Q R P^H

with Q semi-unitary, P unitary, and R upper triangular whose diagonal
entries all equal the geometric mean of A's singular values.
"""

from typing import NamedTuple

import numpy as np

from .errors import ConvergenceFailure, RankDeficient

# Default tolerances for double precision; tests may override locally.
RECONSTRUCTION_TOL = 1e-9
UNITARITY_TOL = 1e-10
RANK_TOL = 1e-12


class QrFactors(NamedTuple):
    q: np.ndarray  # (m, n), orthonormal columns
    r: np.ndarray  # (n, n), upper triangular, real positive diagonal


class GmdFactors(NamedTuple):
    q: np.ndarray  # (m, n), orthonormal columns
    r: np.ndarray  # (n, n), upper triangular, equal real diagonal
    p: np.ndarray  # (n, n), unitary


def _as_complex_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix entries must be finite")
    return a


def _check_full_column_rank(a: np.ndarray, what: str) -> np.ndarray:
    """Return the singular values, raising RankDeficient when the smallest
    one falls below RANK_TOL times the largest."""
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficient(
            f"{what}: smallest singular value {s[-1]:.3e} below "
            f"{RANK_TOL:g} * largest ({s[0]:.3e})"
        )
    return s


def qr(a) -> QrFactors:
    """QR factorization with orthonormal q and real-positive diagonal r.

    Requires rows >= cols and full column rank.
    """
    a = _as_complex_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"qr requires rows >= cols, got {m}x{n}")
    _check_full_column_rank(a, "qr")
    q, r = np.linalg.qr(a, mode="reduced")
    d = np.diagonal(r).copy()
    # Absorb the diagonal phases into q so diag(r) is real positive.
    phase = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    q = q * phase[np.newaxis, :]
    r = phase.conj()[:, np.newaxis] * r
    r = np.triu(r)  # exact zeros below the diagonal
    np.fill_diagonal(r, np.diagonal(r).real)
    return QrFactors(q, r)


def svd(a):
    """Thin singular value decomposition a = u @ diag(s) @ v^H.

    Returns (u, s, v) with orthonormal-column u and v and s sorted
    descending.  Note v is returned, not v^H.
    """
    a = _as_complex_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"svd did not converge: {exc}") from exc
    return u, s, vh.conj().T


def _gmd_rotation_pair(d1: float, d2: float, target: float):
    """2x2 rotation parameters placing `target` on the diagonal.

    For D = diag(d1, d2) with min(d1,d2) <= target <= max(d1,d2), returns
    real orthogonal U2, V2 with

        U2^T @ D @ V2 = [[target, beta], [0, d1*d2/target]].
    """
    if abs(d1 - d2) <= 1e-15 * max(d1, d2):
        return np.eye(2), np.eye(2)
    c2 = (target * target - d2 * d2) / (d1 * d1 - d2 * d2)
    c = np.sqrt(min(max(c2, 0.0), 1.0))
    s = np.sqrt(max(1.0 - c * c, 0.0))
    v2 = np.array([[c, -s], [s, c]])
    u2 = np.array(
        [[c * d1 / target, -s * d2 / target], [s * d2 / target, c * d1 / target]]
    )
    return u2, v2


def gmd(a) -> GmdFactors:
    """Geometric mean decomposition a = q @ r @ p^H.

    Starts from the SVD and applies the classic Givens/permutation sweep to
    the singular-value diagonal: at step k the leftmost remaining value at
    or above the geometric mean is paired with the smallest remaining one,
    and a two-sided rotation places the geometric mean at position k.
    """
    a = _as_complex_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"gmd requires rows >= cols, got {m}x{n}")
    u, s, v = svd(a)
    if s[0] == 0.0 or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficient(
            f"gmd: smallest singular value {s[-1]:.3e} below "
            f"{RANK_TOL:g} * largest ({s[0]:.3e})"
        )
    sbar = float(np.exp(np.mean(np.log(s))))

    r = np.diag(s).astype(np.complex128)
    q = u.copy()
    p = v.copy()

    def swap(i, j):
        if i == j:
            return
        r[[i, j], :] = r[[j, i], :]
        r[:, [i, j]] = r[:, [j, i]]
        q[:, [i, j]] = q[:, [j, i]]
        p[:, [i, j]] = p[:, [j, i]]

    for k in range(n - 1):
        diag = np.real(np.diagonal(r))
        # Leftmost remaining entry >= geometric mean (fall back to the
        # largest if rounding left none at or above it).
        above = [i for i in range(k, n) if diag[i] >= sbar]
        i_hi = above[0] if above else k + int(np.argmax(diag[k:]))
        swap(k, i_hi)
        diag = np.real(np.diagonal(r))
        i_lo = k + 1 + int(np.argmin(diag[k + 1 :]))
        swap(k + 1, i_lo)

        d1 = float(np.real(r[k, k]))
        d2 = float(np.real(r[k + 1, k + 1]))
        u2, v2 = _gmd_rotation_pair(d1, d2, sbar)
        rows = slice(k, k + 2)
        r[rows, :] = u2.T @ r[rows, :]
        r[:, rows] = r[:, rows] @ v2
        q[:, rows] = q[:, rows] @ u2
        p[:, rows] = p[:, rows] @ v2
        r[k + 1, k] = 0.0

    r = np.triu(r)
    np.fill_diagonal(r, np.diagonal(r).real)
    return GmdFactors(q, r, p)
