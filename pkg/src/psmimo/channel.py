"""Block flat-fading Rayleigh channel and AWGN with reproducible seeding.

Every random draw goes through a counter-based (Philox) generator keyed by
an integer tuple, so trial k of point j is reproducible independently of
execution order.  SNR is pinned as total transmit power over per-antenna
noise variance with unit-variance channel entries.
"""

from dataclasses import dataclass

import numpy as np


def make_rng(*key) -> np.random.Generator:
    """Counter-based generator for an integer key tuple."""
    flat = [int(k) & 0xFFFFFFFFFFFFFFFF for k in key]  # fold negatives
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(flat)))


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # (n_r, n_t), i.i.d. CN(0, 1)
    noise_var: float
    seed: tuple


def draw_channel(n_r: int, n_t: int, seed, noise_var: float = 0.0) -> ChannelRealization:
    """One i.i.d. CN(0,1) channel matrix, constant over the slot."""
    seed = tuple(np.atleast_1d(seed).astype(np.int64).tolist())
    rng = make_rng(*seed, 0xC4A)
    h = (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t)))
    return ChannelRealization(h=h / np.sqrt(2.0), noise_var=noise_var, seed=seed)


def add_noise(signal, noise_var: float, seed) -> np.ndarray:
    """Add circularly-symmetric AWGN of the given variance."""
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    signal = np.asarray(signal, dtype=np.complex128)
    if noise_var == 0.0:
        return signal.copy()
    seed = tuple(np.atleast_1d(seed).astype(np.int64).tolist())
    rng = make_rng(*seed, 0xA36)
    noise = rng.standard_normal(signal.shape) + 1j * rng.standard_normal(signal.shape)
    return signal + np.sqrt(noise_var / 2.0) * noise


def snr_db_to_noise_var(snr_db: float, total_power: float) -> float:
    """Noise variance for SNR = P_t / sigma_n^2."""
    return total_power / 10.0 ** (snr_db / 10.0)
