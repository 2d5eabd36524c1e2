"""Probabilistic amplitude shaping for square QAM.

A 2^(2M)-QAM symbol is the Cartesian product of two 2^M-PAM constellations
with amplitude levels {1, 3, ..., 2^M - 1}.  Shaping puts a Maxwell-
Boltzmann (MB) distribution on the amplitudes while sign bits stay uniform.
Uniform bits are mapped to fixed-composition amplitude sequences by a
constant-composition distribution matcher (CCDM) built on exact big-integer
interval arithmetic, so encode/decode are bit-exact on every platform.

Bit labeling (pinned; the demapper inverts it exactly):
  * per real dimension a symbol carries ``m`` label bits
    ``[sign, gray(m-1 bits, MSB first)]``; sign bit 0 maps to +.
  * a complex symbol's label is the I-dimension label followed by the
    Q-dimension label.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSequence, LengthMismatch


# ---------------------------------------------------------------------------
# Gray labeling of amplitude levels
# ---------------------------------------------------------------------------

def gray_encode(i):
    return i ^ (i >> 1)


def gray_decode(g):
    g = np.asarray(g).copy()
    shift = 1
    # Prefix-XOR inverts the Gray map for any operand width we use here.
    while shift < 32:
        g = g ^ (g >> shift)
        shift *= 2
    return g


# ---------------------------------------------------------------------------
# Alphabet and MB distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplitudeAlphabet:
    """Positive odd amplitude levels of a 2^m-PAM constellation."""

    m: int  # bits per PAM symbol

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least 1 bit per PAM symbol")

    @property
    def amplitudes(self) -> np.ndarray:
        return np.arange(1, 2 ** self.m, 2, dtype=np.float64)

    @property
    def n_levels(self) -> int:
        return 2 ** (self.m - 1)

    @property
    def signed_symbols(self) -> np.ndarray:
        amps = self.amplitudes
        return np.concatenate([-amps[::-1], amps])


@dataclass(frozen=True)
class MbDistribution:
    """Maxwell-Boltzmann pmf exp(-nu*s^2)/zeta over the signed alphabet."""

    nu: float
    alphabet: AmplitudeAlphabet
    pmf: np.ndarray  # over signed_symbols, ascending
    zeta: float

    @property
    def amplitude_marginal(self) -> np.ndarray:
        """Pmf over the positive levels (ascending); sums to 1."""
        n = self.alphabet.n_levels
        return 2.0 * self.pmf[n:]

    def mean_square(self) -> float:
        """E[|s|^2] of one complex symbol (I and Q i.i.d.)."""
        amps = self.alphabet.amplitudes
        return 2.0 * float(np.dot(self.amplitude_marginal, amps**2))


def mb_pmf(nu: float, alphabet: AmplitudeAlphabet) -> MbDistribution:
    """Evaluate the MB distribution for shaping parameter nu >= 0."""
    if nu < 0:
        raise ValueError("shaping parameter must be nonnegative")
    symbols = alphabet.signed_symbols
    weights = np.exp(-nu * symbols**2)
    zeta = float(weights.sum())
    return MbDistribution(nu=nu, alphabet=alphabet, pmf=weights / zeta, zeta=zeta)


def mb_entropy(dist: MbDistribution) -> float:
    """Shannon entropy in bits of the amplitude marginal."""
    p = dist.amplitude_marginal
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


# ---------------------------------------------------------------------------
# Composition quantization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Composition:
    """Occurrence counts per positive amplitude level for one CCDM block."""

    block_len: int
    counts: tuple

    def __post_init__(self):
        if self.block_len < 1:
            raise ValueError("block_len must be >= 1")
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.block_len:
            raise ValueError("counts must be nonnegative and sum to block_len")

    @property
    def n_sequences(self) -> int:
        """Number of distinct sequences with this composition (exact)."""
        total = 1
        placed = 0
        for c in self.counts:
            placed += c
            total *= math.comb(placed, c)
        return total

    @property
    def k_bits(self) -> int:
        """Input bits per block: floor(log2(#sequences))."""
        return self.n_sequences.bit_length() - 1


def _kl_to_target(counts, block_len, target) -> float:
    kl = 0.0
    for c, p in zip(counts, target):
        if c == 0:
            continue
        if p == 0.0:
            return math.inf
        q = c / block_len
        kl += q * math.log(q / p)
    return kl


def quantize_composition(dist: MbDistribution, block_len: int) -> Composition:
    """Integer composition approximating the amplitude marginal.

    Largest-remainder rounding of ``block_len * marginal`` followed by a
    greedy pass that keeps moving single counts between levels while doing
    so lowers the KL divergence to the target marginal.
    """
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    target = dist.amplitude_marginal
    exact = block_len * target
    counts = np.floor(exact).astype(int)
    remainders = exact - counts
    short = block_len - int(counts.sum())
    for idx in np.argsort(-remainders, kind="stable")[:short]:
        counts[idx] += 1

    counts = counts.tolist()
    n_levels = len(counts)
    improved = True
    while improved:
        improved = False
        best = _kl_to_target(counts, block_len, target)
        best_move = None
        for i in range(n_levels):
            if counts[i] == 0:
                continue
            for j in range(n_levels):
                if i == j:
                    continue
                counts[i] -= 1
                counts[j] += 1
                kl = _kl_to_target(counts, block_len, target)
                counts[i] += 1
                counts[j] -= 1
                if kl < best - 1e-15:
                    best = kl
                    best_move = (i, j)
        if best_move is not None:
            i, j = best_move
            counts[i] -= 1
            counts[j] += 1
            improved = True
    return Composition(block_len=block_len, counts=tuple(counts))


# ---------------------------------------------------------------------------
# Constant-composition distribution matcher
# ---------------------------------------------------------------------------

def _bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)],
                    dtype=np.uint8)


def ccdm_encode(bits, comp: Composition) -> np.ndarray:
    """Map ``k_bits`` uniform bits to one fixed-composition level sequence.

    The bits, read MSB-first as an integer, select a subinterval of the
    sequence tree at every position; interval widths are the exact counts of
    completions given the remaining composition, so the map is injective and
    involves no floating point.
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    k = comp.k_bits
    if bits.size != k:
        raise LengthMismatch(f"expected {k} bits for {comp}, got {bits.size}")
    index = _bits_to_int(bits)
    counts = list(comp.counts)
    remaining = comp.block_len
    total = comp.n_sequences
    seq = np.empty(comp.block_len, dtype=np.int64)
    for pos in range(comp.block_len):
        for level, c in enumerate(counts):
            if c == 0:
                continue
            # completions if `level` is emitted next (exact division)
            sub = total * c // remaining
            if index < sub:
                seq[pos] = level
                counts[level] -= 1
                remaining -= 1
                total = sub
                break
            index -= sub
    return seq


def ccdm_decode(seq, comp: Composition) -> np.ndarray:
    """Invert :func:`ccdm_encode`; raises InvalidSequence off the image."""
    seq = np.asarray(seq, dtype=np.int64).ravel()
    if seq.size != comp.block_len:
        raise InvalidSequence(
            f"sequence length {seq.size} != block_len {comp.block_len}")
    observed = np.bincount(seq, minlength=len(comp.counts)) if seq.size else \
        np.zeros(len(comp.counts), dtype=np.int64)
    if seq.size and (seq.min() < 0 or seq.max() >= len(comp.counts)):
        raise InvalidSequence("sequence contains out-of-alphabet levels")
    if tuple(observed.tolist()) != comp.counts:
        raise InvalidSequence(
            f"sequence composition {tuple(observed.tolist())} != {comp.counts}")
    counts = list(comp.counts)
    remaining = comp.block_len
    total = comp.n_sequences
    index = 0
    for level in seq:
        for lower in range(level):
            if counts[lower] > 0:
                index += total * counts[lower] // remaining
        total = total * counts[level] // remaining
        counts[level] -= 1
        remaining -= 1
    k = comp.k_bits
    if index >= (1 << k):
        raise InvalidSequence("sequence is outside the encoder's image")
    return _int_to_bits(index, k)


# ---------------------------------------------------------------------------
# Symbol mapping and label bits
# ---------------------------------------------------------------------------

def levels_to_label_bits(levels, alphabet: AmplitudeAlphabet) -> np.ndarray:
    """Gray label bits, shape (n, m-1), MSB first, for amplitude levels."""
    levels = np.asarray(levels, dtype=np.int64)
    g = gray_encode(levels)
    width = alphabet.m - 1
    shifts = np.arange(width - 1, -1, -1)
    return ((g[:, np.newaxis] >> shifts) & 1).astype(np.uint8)


def label_bits_to_levels(bits, alphabet: AmplitudeAlphabet) -> np.ndarray:
    """Inverse of :func:`levels_to_label_bits`."""
    bits = np.asarray(bits, dtype=np.int64)
    width = alphabet.m - 1
    if bits.ndim != 2 or bits.shape[1] != width:
        raise LengthMismatch(f"expected (n, {width}) label bits")
    shifts = np.arange(width - 1, -1, -1)
    g = (bits << shifts).sum(axis=1)
    return gray_decode(g)


def map_symbols(amplitudes, sign_bits, alphabet: AmplitudeAlphabet) -> np.ndarray:
    """Compose complex symbols from amplitude values and sign bits.

    ``amplitudes`` and ``sign_bits`` interleave I and Q: entries 2t and
    2t+1 belong to complex symbol t.  Sign bit 0 maps to +.
    """
    amplitudes = np.asarray(amplitudes, dtype=np.float64).ravel()
    sign_bits = np.asarray(sign_bits, dtype=np.int64).ravel()
    if amplitudes.size != sign_bits.size:
        raise LengthMismatch("one sign bit per amplitude required")
    if amplitudes.size % 2:
        raise LengthMismatch("need an I and a Q amplitude per complex symbol")
    if not np.isin(amplitudes, alphabet.amplitudes).all():
        raise ValueError("amplitude outside the alphabet")
    signed = amplitudes * (1 - 2 * sign_bits)
    return signed[0::2] + 1j * signed[1::2]


# ---------------------------------------------------------------------------
# Power scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFactor:
    alpha: float
    per_layer_power: float


def compute_alpha(dist: MbDistribution, total_power: float,
                  layers: int) -> ScalingFactor:
    """Scale so E[|alpha*s|^2] = total_power / layers under the MB pmf."""
    if total_power <= 0 or layers < 1:
        raise ValueError("need total_power > 0 and layers >= 1")
    per_layer = total_power / layers
    return ScalingFactor(alpha=math.sqrt(per_layer / dist.mean_square()),
                         per_layer_power=per_layer)


# ---------------------------------------------------------------------------
# Constellation tables used by mapping and detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constellation:
    """Unscaled PS-QAM point set addressed by label index.

    ``points[v]`` is the complex point whose 2m label bits, MSB first, equal
    v.  ``prior_logw`` holds -nu*|point|^2 (a common additive constant is
    irrelevant to every consumer).  ``pam_points``/``pam_logw`` are the
    per-real-dimension tables under the m-bit per-dimension labels.
    """

    alphabet: AmplitudeAlphabet
    nu: float
    points: np.ndarray = field(repr=False)
    prior_logw: np.ndarray = field(repr=False)
    pam_points: np.ndarray = field(repr=False)
    pam_logw: np.ndarray = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return 2 * self.alphabet.m

    @property
    def size(self) -> int:
        return self.points.size


def make_constellation(alphabet: AmplitudeAlphabet, nu: float) -> Constellation:
    m = alphabet.m
    labels = np.arange(2**m)
    signs = labels >> (m - 1)
    levels = gray_decode(labels & (2 ** (m - 1) - 1))
    pam_points = alphabet.amplitudes[levels] * (1 - 2 * signs)
    pam_logw = -nu * pam_points**2

    full = np.arange(4**m)
    hi = full >> m  # I-dimension label
    lo = full & (2**m - 1)  # Q-dimension label
    points = pam_points[hi] + 1j * pam_points[lo]
    prior_logw = pam_logw[hi] + pam_logw[lo]
    return Constellation(alphabet=alphabet, nu=nu, points=points,
                         prior_logw=prior_logw, pam_points=pam_points,
                         pam_logw=pam_logw)


def uniform_prior(constellation: Constellation) -> Constellation:
    """Same point set with all prior log-weights zeroed."""
    return Constellation(
        alphabet=constellation.alphabet, nu=0.0,
        points=constellation.points,
        prior_logw=np.zeros_like(constellation.prior_logw),
        pam_points=constellation.pam_points,
        pam_logw=np.zeros_like(constellation.pam_logw))


# ---------------------------------------------------------------------------
# Shaping spec: one bundle describing the PS source
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShapingSpec:
    """Everything defining the shaped source for one configuration."""

    alphabet: AmplitudeAlphabet
    nu: float
    dist: MbDistribution
    block_len: int
    composition: Composition
    scaling: ScalingFactor
    constellation: Constellation

    @property
    def alpha(self) -> float:
        return self.scaling.alpha


def make_shaping_spec(qam_order: int, nu: float, block_len: int,
                      total_power: float, layers: int) -> ShapingSpec:
    mm = round(math.log2(qam_order) / 2)
    if 4**mm != qam_order:
        raise ValueError(f"qam_order must be a power of 4, got {qam_order}")
    alphabet = AmplitudeAlphabet(m=mm)
    dist = mb_pmf(nu, alphabet)
    comp = quantize_composition(dist, block_len)
    scaling = compute_alpha(dist, total_power, layers)
    constellation = make_constellation(alphabet, nu)
    return ShapingSpec(alphabet=alphabet, nu=nu, dist=dist,
                       block_len=block_len, composition=comp,
                       scaling=scaling, constellation=constellation)
