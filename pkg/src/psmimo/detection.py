"""Symbol detection and soft demapping on the triangularized channel.

All detectors work on the reduced observation y_tilde = (Q_G^upper)^H y and
the upper-triangular factor R from the augmented-channel QR, minimizing

    J(s) = ||y_tilde - R s||^2 / noise_var - sum_i w(s_i)

where w are the constellation's prior log-weights.  The prior term is
applied only when ``prior_in_metric`` is set: when the augmentation that
built R already encodes the shaped prior, the pure Euclidean metric *is*
the MAP metric, and adding w would double-count it.  Per-bit LLRs, by
contrast, always weight hypotheses by the prior; they describe posterior
bit probabilities on the post-cancellation scalar channel regardless of
how R was built.

LLRs follow the project-wide convention (positive means bit 0) and clamp
at +/-20.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import SearchSpaceTooLarge
from .fec import LLR_SAT
from .shaping import Constellation

_EXHAUSTIVE_CAP = 10**6


@dataclass(frozen=True)
class DetectionInput:
    y_tilde: np.ndarray  # (L,) reduced observation
    r_g: np.ndarray  # (L, L) upper triangular, positive real diagonal
    constellation: Constellation
    noise_var: float
    prior_in_metric: bool = False


@dataclass(frozen=True)
class DetectionOutput:
    hard_symbols: np.ndarray  # (L,) constellation points
    llrs: np.ndarray = field(repr=False)  # (L, bits_per_symbol)
    per_layer_residual_var: np.ndarray = field(repr=False)  # (L,)


# ---------------------------------------------------------------------------
# Soft demapping
# ---------------------------------------------------------------------------

def soft_demap_scalar(z: complex, gain: float, noise_var: float,
                      constellation: Constellation, bit_index: int) -> float:
    """Prior-weighted max-log LLR of one label bit from one observation.

    Minimizes |z - gain*c|^2/noise_var - ln P(c) over the points whose
    ``bit_index``-th label bit (MSB first) is 1, minus the same minimum over
    bit 0.  Reference form; the vectorized grid demapper must agree exactly.
    """
    if gain <= 0:
        raise ValueError("gain must be positive")
    pts = constellation.points
    metric = np.abs(z - gain * pts) ** 2 / noise_var - constellation.prior_logw
    nbits = constellation.bits_per_symbol
    bit = (np.arange(pts.size) >> (nbits - 1 - bit_index)) & 1
    llr = metric[bit == 1].min() - metric[bit == 0].min()
    return float(np.clip(llr, -LLR_SAT, LLR_SAT))


def demap_grid(z, gain: float, noise_var: float,
               constellation: Constellation) -> np.ndarray:
    """(n,) observations -> (n, bits_per_symbol) LLRs, vectorized.

    Exploits I/Q separability of square QAM: per real dimension the max-log
    metric over the full constellation reduces to the per-PAM metric, so
    each bit needs only the 2^m PAM table of its own dimension.
    """
    z = np.asarray(z, dtype=np.complex128).ravel()
    m = constellation.alphabet.m
    pam = constellation.pam_points
    logw = constellation.pam_logw

    llrs = np.empty((z.size, 2 * m))
    for dim, obs in enumerate((z.real, z.imag)):
        metric = (obs[:, np.newaxis] - gain * pam[np.newaxis, :]) ** 2 / noise_var
        metric = metric - logw[np.newaxis, :]
        for b in range(m):
            mask1 = ((np.arange(pam.size) >> (m - 1 - b)) & 1).astype(bool)
            llr = metric[:, mask1].min(axis=1) - metric[:, ~mask1].min(axis=1)
            llrs[:, dim * m + b] = llr
    return np.clip(llrs, -LLR_SAT, LLR_SAT)


# ---------------------------------------------------------------------------
# MAP-VBLAST: sequential nulling and cancellation, layer L down to 1
# ---------------------------------------------------------------------------

def _slice_symbols(z, gain: float, noise_var: float,
                   constellation: Constellation, prior_in_metric: bool):
    """Per-observation argmin of the slicing metric; returns point indices."""
    z = np.asarray(z, dtype=np.complex128).ravel()
    pts = constellation.points
    metric = np.abs(z[:, np.newaxis] - gain * pts[np.newaxis, :]) ** 2
    if prior_in_metric:
        metric = metric / noise_var - constellation.prior_logw[np.newaxis, :]
    return np.argmin(metric, axis=1)


def map_vblast_grid(y_tilde, r_g, constellation: Constellation,
                    noise_var: float, prior_in_metric: bool = False):
    """Vectorized VBLAST over a whole slot grid.

    ``y_tilde`` has shape (L, S).  Returns (hard point indices (L, S),
    LLRs (L, S, bits), residual noise variance per layer (L,)).
    """
    y = np.atleast_2d(np.asarray(y_tilde, dtype=np.complex128))
    r = np.asarray(r_g, dtype=np.complex128)
    layers, n_slots = y.shape
    pts = constellation.points
    hard = np.zeros((layers, n_slots), dtype=np.int64)
    llrs = np.zeros((layers, n_slots, constellation.bits_per_symbol))
    resid = np.zeros(layers)
    cancelled = np.zeros_like(y)
    for i in range(layers - 1, -1, -1):
        z = y[i] - cancelled[i]
        gain = float(np.real(r[i, i]))
        hard[i] = _slice_symbols(z, gain, noise_var, constellation,
                                 prior_in_metric)
        llrs[i] = demap_grid(z, gain, noise_var, constellation)
        resid[i] = noise_var / gain**2
        if i > 0:
            cancelled[:i] += r[:i, i : i + 1] * pts[hard[i]][np.newaxis, :]
    return hard, llrs, resid


def map_vblast(inp: DetectionInput) -> DetectionOutput:
    """Successive nulling and cancellation on the triangular factor.

    Default slicing is nearest-point Euclidean (the augmentation already
    carries the prior); ``prior_in_metric`` switches to prior-weighted MAP
    slicing.
    """
    hard, llrs, resid = map_vblast_grid(
        inp.y_tilde[:, np.newaxis], inp.r_g, inp.constellation, inp.noise_var,
        inp.prior_in_metric)
    return DetectionOutput(
        hard_symbols=inp.constellation.points[hard[:, 0]],
        llrs=llrs[:, 0, :],
        per_layer_residual_var=resid)


# ---------------------------------------------------------------------------
# Exhaustive MAP oracle
# ---------------------------------------------------------------------------

def map_exhaustive(inp: DetectionInput) -> DetectionOutput:
    """Exact MAP by enumeration of every candidate vector (oracle)."""
    y = np.asarray(inp.y_tilde, dtype=np.complex128).ravel()
    r = np.asarray(inp.r_g, dtype=np.complex128)
    layers = y.size
    pts = inp.constellation.points
    q = pts.size
    if q**layers > _EXHAUSTIVE_CAP:
        raise SearchSpaceTooLarge(f"{q}^{layers} candidates exceed the cap")

    grids = np.meshgrid(*([np.arange(q)] * layers), indexing="ij")
    cand = np.stack([g.ravel() for g in grids], axis=1)  # (N, L) indices
    vectors = pts[cand]  # (N, L)
    resid = y[np.newaxis, :] - vectors @ r.T
    metric = (np.abs(resid) ** 2).sum(axis=1) / inp.noise_var
    if inp.prior_in_metric:
        metric = metric - inp.constellation.prior_logw[cand].sum(axis=1)

    best = int(np.argmin(metric))
    nbits = inp.constellation.bits_per_symbol
    llrs = np.zeros((layers, nbits))
    for i in range(layers):
        for b in range(nbits):
            bit = (cand[:, i] >> (nbits - 1 - b)) & 1
            llrs[i, b] = metric[bit == 1].min() - metric[bit == 0].min()
    gains = np.real(np.diagonal(r))
    return DetectionOutput(
        hard_symbols=pts[cand[best]],
        llrs=np.clip(llrs, -LLR_SAT, LLR_SAT),
        per_layer_residual_var=inp.noise_var / gains**2)


# ---------------------------------------------------------------------------
# Sphere decoder (Schnorr-Euchner depth-first, prior-aware, soft output)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _sphere_kernel(y, r, points, cost_shift, point_bits, noise_var, radius):
    """Returns (best point indices (L,), bit0/bit1 min metrics (L, nbits)).

    After the depth-first search, every (layer, bit) that still lacks a
    counter-hypothesis in the visited list gets one from a flipped-bit
    re-detection: the best path is kept above the layer, the bit is forced
    to its counter value there, and the remaining layers are sliced
    greedily.  The resulting metric upper-bounds the true counter minimum,
    so LLR magnitudes stay meaningful instead of saturating.
    """
    layers = y.shape[0]
    q = points.shape[0]
    nbits = point_bits.shape[1]

    order = np.zeros((layers, q), dtype=np.int64)
    inc = np.zeros((layers, q))
    ptr = np.zeros(layers, dtype=np.int64)
    partial = np.zeros(layers + 1)  # partial[i] = metric above level i
    chosen = np.zeros(layers, dtype=np.int64)
    best_choice = np.zeros(layers, dtype=np.int64)
    bit_min = np.full((2, layers, nbits), np.inf)

    best = radius
    found_leaf = False

    def expand(level):
        b = y[level]
        for j in range(level + 1, layers):
            b -= r[level, j] * points[chosen[j]]
        for k in range(q):
            d = b - r[level, level] * points[k]
            inc[level, k] = (d.real * d.real + d.imag * d.imag) / noise_var \
                + cost_shift[k]
        order[level, :] = np.argsort(inc[level, :])
        ptr[level] = 0

    level = layers - 1
    expand(level)
    while True:
        if ptr[level] >= q:
            level += 1
            if level >= layers:
                break
            continue
        k = order[level, ptr[level]]
        m = partial[level + 1] + inc[level, k]
        if found_leaf and m >= best:
            # children are sorted: nothing further at this node can win
            ptr[level] = q
            continue
        ptr[level] += 1
        chosen[level] = k
        if level == 0:
            if not found_leaf:
                # first depth-first leaf = Babai point; always keep it so a
                # small start radius cannot leave us without a solution
                found_leaf = True
                for i in range(layers):
                    best_choice[i] = chosen[i]
                if m < best:
                    best = m
            elif m < best:
                best = m
                for i in range(layers):
                    best_choice[i] = chosen[i]
            for i in range(layers):
                ki = chosen[i]
                for bb in range(nbits):
                    v = point_bits[ki, bb]
                    if m < bit_min[v, i, bb]:
                        bit_min[v, i, bb] = m
        else:
            partial[level] = m
            level -= 1
            expand(level)

    # flipped-bit re-detection for missing counter-hypotheses
    best_inc = np.zeros(layers)
    for i in range(layers):
        b = y[i]
        for j in range(i + 1, layers):
            b -= r[i, j] * points[best_choice[j]]
        d = b - r[i, i] * points[best_choice[i]]
        best_inc[i] = (d.real * d.real + d.imag * d.imag) / noise_var \
            + cost_shift[best_choice[i]]
    suffix = np.zeros(layers + 1)
    for i in range(layers - 1, -1, -1):
        suffix[i] = suffix[i + 1] + best_inc[i]
    sel = np.zeros(layers, dtype=np.int64)
    for i in range(layers):
        for bb in range(nbits):
            v_ctr = 1 - point_bits[best_choice[i], bb]
            for j in range(i + 1, layers):
                sel[j] = best_choice[j]
            total = suffix[i + 1]
            for lvl in range(i, -1, -1):
                b = y[lvl]
                for j in range(lvl + 1, layers):
                    b -= r[lvl, j] * points[sel[j]]
                best_k = -1
                best_m = np.inf
                for k in range(q):
                    if lvl == i and point_bits[k, bb] != v_ctr:
                        continue
                    d = b - r[lvl, lvl] * points[k]
                    mk = (d.real * d.real + d.imag * d.imag) / noise_var \
                        + cost_shift[k]
                    if mk < best_m:
                        best_m = mk
                        best_k = k
                sel[lvl] = best_k
                total += best_m
            if total < bit_min[v_ctr, i, bb]:
                bit_min[v_ctr, i, bb] = total
    return best_choice, bit_min


def sphere_decode(inp: DetectionInput,
                  initial_radius: float = np.inf) -> DetectionOutput:
    """Depth-first Schnorr-Euchner search solving the same objective as
    :func:`map_exhaustive`, with max-log soft output over the visited list.

    The radius only tightens the search: the first depth-first leaf (the
    Babai point under the slicing metric) is always accepted, so the call
    terminates with a solution for any ``initial_radius``.  Bits that never
    saw a counter-hypothesis among visited leaves saturate at +/-20.
    """
    y = np.asarray(inp.y_tilde, dtype=np.complex128).ravel()
    r = np.asarray(inp.r_g, dtype=np.complex128)
    const = inp.constellation
    q = const.points.size
    nbits = const.bits_per_symbol
    if inp.prior_in_metric:
        cost_shift = const.prior_logw.max() - const.prior_logw
    else:
        cost_shift = np.zeros(q)
    point_bits = (
        (np.arange(q)[:, np.newaxis] >> np.arange(nbits - 1, -1, -1)) & 1
    ).astype(np.uint8)

    choice, bit_min = _sphere_kernel(
        y, r, const.points, cost_shift, point_bits,
        float(inp.noise_var), float(initial_radius))

    with np.errstate(invalid="ignore"):
        llrs = bit_min[1] - bit_min[0]
    llrs = np.where(np.isnan(llrs), 0.0, llrs)  # both sides unseen
    llrs = np.clip(llrs, -LLR_SAT, LLR_SAT)
    gains = np.real(np.diagonal(r))
    return DetectionOutput(
        hard_symbols=const.points[choice],
        llrs=llrs,
        per_layer_residual_var=inp.noise_var / gains**2)
