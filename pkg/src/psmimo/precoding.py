"""Precoder construction: identity, SVD, the distribution-aware GMD scheme
(BGMD), and the uniform-prior GMD baseline (UCD).

Both GMD schemes share one pipeline.  With the channel SVD H = U S V^H and
power loading Phi, the prior-augmented matrix

    B = [[alpha * U S Phi^(1/2)], [reg * I_L]]

is factored by the geometric mean decomposition B = Q_B R_B P_B^H, giving
the precoder F = V Phi^(1/2) P_B and the receiver-side triangular factor
R_B whose diagonal is constant across layers.  The schemes differ only in
the augmentation level ``reg``:

  * BGMD: reg = sqrt(noise_var * nu)  (the shaped-prior term), so the
    factorization and therefore F depend on the shaping parameter.
  * UCD:  reg = sqrt(noise_var / symbol_var), the MMSE regularizer for a
    uniform prior with per-layer symbol energy ``symbol_var``.

Setting nu = 1/symbol_var makes the two pipelines identical, which the
tests use as a regression lock.
"""

from dataclasses import dataclass

import numpy as np

from . import decomp
from .errors import DegenerateShaping, RankDeficient

_POWER_TOL = 1e-9
_CONSISTENCY_TOL = 1e-8


@dataclass(frozen=True)
class PrecoderBundle:
    """A precoder plus the receiver-side factors detection needs."""

    f: np.ndarray  # (n_t, L)
    r_g: np.ndarray  # (L, L) upper triangular, positive diagonal
    q_u: np.ndarray  # (n_r, L): upper block of the augmented Q
    scheme: str  # identity | svd | bgmd | ucd
    phi: np.ndarray  # (L,) power loading
    reg: float  # augmentation level used to build r_g

    @property
    def layers(self) -> int:
        return self.f.shape[1]


def augmented_channel(h, f, alpha: float, reg: float) -> np.ndarray:
    """Stack [alpha*H@F; reg*I], the matrix whose QR drives detection."""
    h = np.asarray(h, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    layers = f.shape[1]
    return np.vstack([alpha * (h @ f), reg * np.eye(layers, dtype=np.complex128)])


def _check_phi(phi, layers: int) -> np.ndarray:
    if phi is None:
        return np.ones(layers)
    phi = np.asarray(phi, dtype=np.float64).ravel()
    if phi.size != layers or np.any(phi < 0):
        raise ValueError("phi must be nonnegative with one entry per layer")
    if abs(phi.sum() - layers) > 1e-9:
        raise ValueError("phi must sum to the number of layers")
    return phi


def _check_power(f: np.ndarray):
    layers = f.shape[1]
    gram_trace = float(np.real(np.trace(f.conj().T @ f)))
    if gram_trace > layers * (1.0 + _POWER_TOL):
        raise ValueError(
            f"precoder violates the transmit power budget: "
            f"trace(F^H F) = {gram_trace} > {layers}")


def _truncated_svd(h, layers):
    h = np.asarray(h, dtype=np.complex128)
    u, s, v = decomp.svd(h)
    max_layers = min(h.shape)
    layers = max_layers if layers is None else layers
    if not 1 <= layers <= max_layers:
        raise ValueError(f"layers must be in [1, {max_layers}]")
    if s[layers - 1] <= decomp.RANK_TOL * s[0]:
        raise RankDeficient("channel is rank deficient over the requested layers")
    return u[:, :layers], s[:layers], v[:, :layers], layers


def _build_gmd_bundle(h, reg, alpha, phi, layers, scheme) -> PrecoderBundle:
    u, s, v, layers = _truncated_svd(h, layers)
    phi = _check_phi(phi, layers)
    n_r = np.asarray(h).shape[0]
    b = np.vstack([
        alpha * u * (s * np.sqrt(phi))[np.newaxis, :],
        reg * np.eye(layers, dtype=np.complex128),
    ])
    q_b, r_b, p_b = decomp.gmd(b)
    f = v * np.sqrt(phi)[np.newaxis, :] @ p_b
    _check_power(f)
    bundle = PrecoderBundle(f=f, r_g=r_b, q_u=q_b[:n_r, :], scheme=scheme,
                            phi=phi, reg=float(reg))
    _check_consistency(h, bundle, alpha)
    return bundle


def _check_consistency(h, bundle: PrecoderBundle, alpha: float):
    """The QR of the explicitly assembled augmented channel must reproduce
    the factor the GMD pipeline produced."""
    g = augmented_channel(h, bundle.f, alpha, bundle.reg)
    r_direct = decomp.qr(g).r
    scale = max(np.abs(np.diagonal(bundle.r_g)))
    if np.max(np.abs(r_direct - bundle.r_g)) > _CONSISTENCY_TOL * scale:
        raise RuntimeError(
            f"{bundle.scheme}: triangular factor inconsistent with direct QR")


def build_bgmd(h, nu: float, noise_var: float, alpha: float,
               phi=None, layers=None) -> PrecoderBundle:
    """Distribution-aware GMD precoder for a shaped source.

    Raises DegenerateShaping for nu <= 0 (the augmentation vanishes and the
    construction loses its prior; use the UCD baseline instead).
    """
    if nu <= 0:
        raise DegenerateShaping("bgmd needs nu > 0; use build_ucd for uniform priors")
    reg = np.sqrt(noise_var * nu)
    return _build_gmd_bundle(h, reg, alpha, phi, layers, "bgmd")


def build_ucd(h, noise_var: float, alpha: float, symbol_var: float,
              phi=None, layers=None) -> PrecoderBundle:
    """Uniform-prior GMD baseline with the MMSE augmentation."""
    if symbol_var <= 0:
        raise ValueError("symbol_var must be positive")
    reg = np.sqrt(noise_var / symbol_var)
    return _build_gmd_bundle(h, reg, alpha, phi, layers, "ucd")


def _qr_bundle(h, f, reg, alpha, phi, scheme) -> PrecoderBundle:
    _check_power(f)
    n_r = np.asarray(h).shape[0]
    g = augmented_channel(h, f, alpha, reg)
    q, r = decomp.qr(g)
    return PrecoderBundle(f=f, r_g=r, q_u=q[:n_r, :], scheme=scheme, phi=phi,
                          reg=float(reg))


def build_identity(h, noise_var: float, alpha: float, symbol_var: float,
                   layers=None) -> PrecoderBundle:
    """No precoding: F selects the first L transmit antennas.

    Detection still runs on the MMSE-augmented QR so the triangular factor
    is well conditioned at any SNR.
    """
    h = np.asarray(h, dtype=np.complex128)
    n_t = h.shape[1]
    layers = min(h.shape) if layers is None else layers
    f = np.eye(n_t, dtype=np.complex128)[:, :layers]
    reg = np.sqrt(noise_var / symbol_var)
    return _qr_bundle(h, f, reg, alpha, np.ones(layers), "identity")


def build_svd(h, phi=None, *, noise_var: float = 0.0, alpha: float = 1.0,
              symbol_var: float = 1.0, layers=None) -> PrecoderBundle:
    """Plain SVD precoding F = V Phi^(1/2); no layer mixing.

    Exposes the raw (generally unequal) subchannel gains on the diagonal of
    the triangular factor.
    """
    u, s, v, layers = _truncated_svd(h, layers)
    phi = _check_phi(phi, layers)
    f = v * np.sqrt(phi)[np.newaxis, :]
    reg = np.sqrt(noise_var / symbol_var) if noise_var > 0 else 0.0
    return _qr_bundle(h, f, reg, alpha, phi, "svd")
