"""Probabilistic amplitude shaping end to end.

Walks the shaped-source chain: the Maxwell-Boltzmann target over PAM
amplitudes, its integer composition for a finite block, constant-
composition matching of uniform bits to amplitude sequences, Gray labels,
and the power normalization. Saves a bar chart of the shaped 64-QAM
constellation frequencies next to this script.

Run:  python3 demos/shaping_pipeline.py
"""

import os

import numpy as np

from psmimo import shaping as sh

alphabet = sh.AmplitudeAlphabet(m=3)  # 8-PAM per real dimension -> 64-QAM

print("amplitude levels:", alphabet.amplitudes.astype(int))
for nu in (0.0, 0.05, 0.1):
    dist = sh.mb_pmf(nu, alphabet)
    print(f"nu={nu:<5} marginal {np.round(dist.amplitude_marginal, 4)}"
          f"  entropy {sh.mb_entropy(dist):.3f} bits/amplitude")

# Finite blocks force integer occurrence counts; the quantizer picks the
# KL-closest composition reachable from largest-remainder rounding.
nu = 0.05
dist = sh.mb_pmf(nu, alphabet)
comp = sh.quantize_composition(dist, 72)
print(f"\ncomposition for 72 amplitudes at nu={nu}: {comp.counts}")
print(f"sequences with that composition: {comp.n_sequences:.3e} "
      f"-> {comp.k_bits} data bits per block")

# The matcher is an exact-integer arithmetic code: encode/decode roundtrip
# bit-for-bit.
rng = np.random.default_rng(7)
bits = rng.integers(0, 2, comp.k_bits, dtype=np.uint8)
levels = sh.ccdm_encode(bits, comp)
assert np.array_equal(sh.ccdm_decode(levels, comp), bits)
print("\nfirst 24 shaped levels:", levels[:24])
print("per-level counts:", np.bincount(levels, minlength=4),
      "(matches the composition exactly)")

# Power normalization: alpha makes each layer meet its power budget.
scaling = sh.compute_alpha(dist, total_power=4.0, layers=4)
print(f"\nalpha = {scaling.alpha:.4f}  ->  E|alpha s|^2 = "
      f"{scaling.alpha**2 * dist.mean_square():.6f} "
      f"(target {scaling.per_layer_power})")

# Empirical shaped constellation from many CCDM blocks.
n_blocks = 600
levels = np.concatenate([
    sh.ccdm_encode(rng.integers(0, 2, comp.k_bits, dtype=np.uint8), comp)
    for _ in range(n_blocks)])
signs = rng.integers(0, 2, levels.size)
signed = alphabet.amplitudes[levels] * (1 - 2 * signs)
symbols = signed[0::2] + 1j * signed[1::2]

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    values, counts = np.unique(signed, return_counts=True)
    target = sh.mb_pmf(nu, alphabet).pmf
    axes[0].bar(values, counts / signed.size, width=1.2, label="empirical")
    axes[0].plot(alphabet.signed_symbols, target, "k.-", label="MB target")
    axes[0].set_xlabel("PAM level")
    axes[0].set_ylabel("frequency")
    axes[0].set_title(f"shaped amplitudes, nu={nu}")
    axes[0].legend()

    hb = axes[1].hexbin(symbols.real, symbols.imag, gridsize=15, cmap="viridis")
    axes[1].set_title("shaped 64-QAM occupancy")
    axes[1].set_xlabel("I")
    axes[1].set_ylabel("Q")
    fig.colorbar(hb, ax=axes[1])
    out = os.path.join(os.path.dirname(__file__), "shaping_pipeline.png")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    print(f"\nsaved {out}")
except ImportError:
    print("\nmatplotlib not available; skipped the plot")
