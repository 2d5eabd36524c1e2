"""Codeword-to-layer mapping and the codeblock-level SIC receiver.

Coded bits map bijectively onto the label bits of the slot's resource grid
(layers x symbol slots x bits-per-symbol).  Within each codeblock the bit
stream is partitioned positionally: the first ``m_amp`` coded bits are the
Gray labels of the CCDM-shaped amplitudes and fill the grid's amplitude
label positions, the remaining bits are sign bits.  The transmit side
constructs the systematic part of each codeblock so this holds (amplitude
labels come out of the matcher, the rest of the payload is uniform data).

Two placements are supported:

  * ``lc_mimo``: each codeblock is confined to one spatial layer and
    occupies a contiguous run of its slots.  This enables SIC at codeblock
    granularity (decode, re-encode, remodulate, cancel).
  * ``nr_mimo``: the codeword's symbols are dealt round-robin across the
    layers, so every codeblock touches all of them.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import make_rng
from .detection import _slice_symbols, demap_grid, map_vblast_grid, sphere_decode, \
    map_exhaustive, DetectionInput
from .errors import GridMismatch
from .fec import CodeBlock, LdpcCode, TransportBlock, crc_check, ldpc_decode, \
    ldpc_encode
from .shaping import ShapingSpec, ccdm_encode, levels_to_label_bits, \
    label_bits_to_levels, uniform_prior


# ---------------------------------------------------------------------------
# Mapping geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerMapping:
    scheme: str  # 'lc_mimo' | 'nr_mimo'
    n_cb: int
    n_cbit: int
    layers: int
    slots: int
    bits_per_symbol: int
    m_amp: int  # amplitude label bits per codeblock
    cb_symbols: list = field(repr=False)  # per CB: (S_cb, 2) [layer, slot]
    assignment: list = field(repr=False)  # per CB: (n_cbit,) flat grid index
    cb_layer: tuple = ()  # layer per CB under lc_mimo, () otherwise

    @property
    def symbols_per_cb(self) -> int:
        return self.n_cbit // self.bits_per_symbol


def build_layer_mapping(scheme: str, n_cb: int, n_cbit: int, layers: int,
                        bits_per_symbol: int) -> LayerMapping:
    """Construct the coded-bit-to-grid bijection for one slot."""
    if scheme not in ("lc_mimo", "nr_mimo"):
        raise ValueError(f"unknown mapping scheme {scheme!r}")
    if bits_per_symbol % 2 or bits_per_symbol < 4:
        raise GridMismatch("bits_per_symbol must be even and >= 4")
    if n_cbit % bits_per_symbol:
        raise GridMismatch(
            f"n_cbit {n_cbit} not a multiple of {bits_per_symbol} bits/symbol")
    s_cb = n_cbit // bits_per_symbol
    total_symbols = n_cb * s_cb
    if total_symbols % layers:
        raise GridMismatch(
            f"{total_symbols} symbols do not tile {layers} layers")
    slots = total_symbols // layers
    if scheme == "lc_mimo" and n_cb % layers:
        raise GridMismatch(
            f"lc_mimo needs codeblocks divisible across layers "
            f"({n_cb} CBs, {layers} layers)")

    m = bits_per_symbol // 2
    m_amp = 2 * (m - 1) * s_cb

    cb_symbols = []
    cb_layer = []
    for i in range(n_cb):
        if scheme == "lc_mimo":
            per_layer = n_cb // layers
            layer = i // per_layer
            start = (i % per_layer) * s_cb
            coords = np.stack([
                np.full(s_cb, layer, dtype=np.int64),
                np.arange(start, start + s_cb, dtype=np.int64),
            ], axis=1)
            cb_layer.append(layer)
        else:
            t = np.arange(i * s_cb, (i + 1) * s_cb, dtype=np.int64)
            coords = np.stack([t % layers, t // layers], axis=1)
        cb_symbols.append(coords)

    # flat index into the (layers, slots, bits_per_symbol) grid
    def flat(layer, slot, pos):
        return (layer * slots + slot) * bits_per_symbol + pos

    amp_pos = np.concatenate([np.arange(1, m), np.arange(m + 1, 2 * m)])
    sign_pos = np.array([0, m])
    assignment = []
    for coords in cb_symbols:
        amp = flat(coords[:, 0:1], coords[:, 1:2], amp_pos[np.newaxis, :])
        sign = flat(coords[:, 0:1], coords[:, 1:2], sign_pos[np.newaxis, :])
        assignment.append(np.concatenate([amp.ravel(), sign.ravel()]))

    mapping = LayerMapping(
        scheme=scheme, n_cb=n_cb, n_cbit=n_cbit, layers=layers, slots=slots,
        bits_per_symbol=bits_per_symbol, m_amp=m_amp, cb_symbols=cb_symbols,
        assignment=assignment, cb_layer=tuple(cb_layer))

    flat_all = np.concatenate(assignment)
    if not np.array_equal(np.sort(flat_all),
                          np.arange(layers * slots * bits_per_symbol)):
        raise GridMismatch("assignment is not a bijection onto the grid")
    if scheme == "lc_mimo":
        for i, coords in enumerate(cb_symbols):
            if len(set(coords[:, 0].tolist())) != 1:
                raise GridMismatch(f"codeblock {i} leaks across layers")
    return mapping


# ---------------------------------------------------------------------------
# Bit grid <-> symbols
# ---------------------------------------------------------------------------

def _bits_to_symbol_grid(bit_grid: np.ndarray, shaping: ShapingSpec) -> np.ndarray:
    """(L, S, 2m) label bits -> (L, S) unscaled constellation points."""
    nbits = bit_grid.shape[-1]
    weights = 1 << np.arange(nbits - 1, -1, -1)
    idx = (bit_grid.astype(np.int64) * weights).sum(axis=-1)
    return shaping.constellation.points[idx]


def map_to_layers(tb: TransportBlock, mapping: LayerMapping,
                  shaping: ShapingSpec) -> np.ndarray:
    """Place every coded bit on the grid and emit the (L, S) symbol matrix."""
    if tb.n_cb != mapping.n_cb:
        raise GridMismatch(f"expected {mapping.n_cb} codeblocks, got {tb.n_cb}")
    total = mapping.layers * mapping.slots * mapping.bits_per_symbol
    if mapping.n_cb * mapping.n_cbit != total:
        raise GridMismatch("coded bits do not fill the resource grid")
    flat = np.empty(total, dtype=np.uint8)
    for cb, pos in zip(tb.codeblocks, mapping.assignment):
        if cb.coded_bits.size != mapping.n_cbit:
            raise GridMismatch("codeblock size does not match the mapping")
        flat[pos] = cb.coded_bits
    for i, cb in enumerate(tb.codeblocks):
        cb.layer = mapping.cb_layer[i] if mapping.cb_layer else None
    grid = flat.reshape(mapping.layers, mapping.slots, mapping.bits_per_symbol)
    return _bits_to_symbol_grid(grid, shaping)


def demap_bits(bit_grid: np.ndarray, mapping: LayerMapping) -> list:
    """Inverse placement: per-codeblock coded bits from a label-bit grid."""
    flat = np.asarray(bit_grid).reshape(-1)
    return [flat[pos].copy() for pos in mapping.assignment]


def gather_llrs(llr_grid: np.ndarray, mapping: LayerMapping, cb_index: int):
    """Per-codeblock LLR vector from the (L, S, bits) LLR grid."""
    return llr_grid.reshape(-1)[mapping.assignment[cb_index]]


def _cb_symbols_from_coded(coded_bits: np.ndarray, mapping: LayerMapping,
                           shaping: ShapingSpec) -> np.ndarray:
    """Rebuild one codeblock's symbol sequence from its coded bits."""
    m = mapping.bits_per_symbol // 2
    s_cb = mapping.symbols_per_cb
    amp = coded_bits[: mapping.m_amp].reshape(2 * s_cb, m - 1)
    sign = coded_bits[mapping.m_amp :].reshape(s_cb, 2)
    levels = label_bits_to_levels(amp, shaping.alphabet)
    amps = shaping.alphabet.amplitudes[levels].reshape(s_cb, 2)
    signed = amps * (1 - 2 * sign.astype(np.float64))
    return signed[:, 0] + 1j * signed[:, 1]


# ---------------------------------------------------------------------------
# Transmit-side payload construction
# ---------------------------------------------------------------------------

def build_shaped_tb_info(seed, mapping: LayerMapping, code: LdpcCode,
                         shaping: ShapingSpec) -> np.ndarray:
    """Draw one transport block's systematic bits.

    Per codeblock: CCDM blocks of uniform data bits become shaped amplitude
    levels whose Gray labels form the first ``m_amp`` payload bits; the rest
    of the payload is uniform data.  Encoding is systematic, so those label
    bits reappear verbatim at the head of the codeword.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    comp = shaping.composition
    amps_per_cb = mapping.m_amp // (shaping.alphabet.m - 1)
    if amps_per_cb % comp.block_len:
        raise GridMismatch(
            f"{amps_per_cb} amplitudes per CB not divisible by CCDM block "
            f"length {comp.block_len}")
    if mapping.m_amp > code.k_payload:
        raise GridMismatch("amplitude labels do not fit the systematic payload")
    n_blocks = amps_per_cb // comp.block_len
    chunks = []
    for _ in range(mapping.n_cb):
        levels = np.concatenate([
            ccdm_encode(rng.integers(0, 2, comp.k_bits, dtype=np.uint8), comp)
            for _ in range(n_blocks)
        ])
        labels = levels_to_label_bits(levels, shaping.alphabet).ravel()
        free = rng.integers(0, 2, code.k_payload - mapping.m_amp, dtype=np.uint8)
        chunks.append(np.concatenate([labels, free]))
    return np.concatenate(chunks)


# ---------------------------------------------------------------------------
# Receivers
# ---------------------------------------------------------------------------

def _constellation_for(shaping: ShapingSpec, use_priors: bool):
    const = shaping.constellation
    return const if use_priors else uniform_prior(const)


def _decode_cb(llrs, code, max_iters):
    info, converged = ldpc_decode(llrs, code, max_iters)
    ok = bool(converged and crc_check(info, code.crc_poly, code.crc_len))
    coded = ldpc_encode(info, code)
    return CodeBlock(info_bits=info, coded_bits=coded, crc_ok=ok), ok


def cb_sic_receive(y_grid, bundle, mapping: LayerMapping, code: LdpcCode,
                   shaping: ShapingSpec, noise_var: float, max_iters: int = 25,
                   use_priors: bool = True, prior_in_metric: bool = False,
                   slot_duration: float = 5e-4):
    """Codeblock-level SIC: per layer, demap, decode, re-encode, cancel.

    Layers are processed from L down to 1 following the triangular factor.
    A codeblock that passes its CRC is reconstructed bit-exactly and its
    interference removed; on failure the fallback is hard symbol estimates,
    and the block is flagged.  Returns the decoded transport block and the
    pre-decoder LLR grid used by the throughput metric.
    """
    if mapping.scheme != "lc_mimo":
        raise GridMismatch("cb_sic requires the layer-contained mapping")
    const = _constellation_for(shaping, use_priors)
    y_tilde = bundle.q_u.conj().T @ np.asarray(y_grid, dtype=np.complex128)
    r = bundle.r_g
    layers, slots = y_tilde.shape
    s_hat = np.zeros((layers, slots), dtype=np.complex128)
    llr_grid = np.zeros((layers, slots, mapping.bits_per_symbol))
    decoded = [None] * mapping.n_cb
    for layer in range(layers - 1, -1, -1):
        z = y_tilde[layer] - r[layer, layer + 1 :] @ s_hat[layer + 1 :]
        gain = float(np.real(r[layer, layer]))
        llr_grid[layer] = demap_grid(z, gain, noise_var, const)
        for i in range(mapping.n_cb):
            if mapping.cb_layer[i] != layer:
                continue
            cb, ok = _decode_cb(gather_llrs(llr_grid, mapping, i), code,
                                max_iters)
            decoded[i] = cb
            slot_idx = mapping.cb_symbols[i][:, 1]
            if ok:
                s_hat[layer, slot_idx] = _cb_symbols_from_coded(
                    cb.coded_bits, mapping, shaping)
            else:
                picks = _slice_symbols(z[slot_idx], gain, noise_var, const,
                                       prior_in_metric)
                s_hat[layer, slot_idx] = const.points[picks]
    tb = TransportBlock(codeblocks=decoded, slot_duration=slot_duration)
    return tb, llr_grid


def hard_sic_receive(y_grid, bundle, mapping: LayerMapping, code: LdpcCode,
                     shaping: ShapingSpec, noise_var: float,
                     max_iters: int = 25, use_priors: bool = True,
                     prior_in_metric: bool = False,
                     slot_duration: float = 5e-4):
    """Symbol-level SIC baseline: VBLAST per slot, decode afterwards.

    No re-encoding feedback; detection errors on early layers propagate
    into the cancellation of later ones.
    """
    const = _constellation_for(shaping, use_priors)
    y_tilde = bundle.q_u.conj().T @ np.asarray(y_grid, dtype=np.complex128)
    _, llr_grid, _ = map_vblast_grid(y_tilde, bundle.r_g, const, noise_var,
                                     prior_in_metric)
    decoded = []
    for i in range(mapping.n_cb):
        cb, _ = _decode_cb(gather_llrs(llr_grid, mapping, i), code, max_iters)
        decoded.append(cb)
    tb = TransportBlock(codeblocks=decoded, slot_duration=slot_duration)
    return tb, llr_grid


def sd_receive(y_grid, bundle, mapping: LayerMapping, code: LdpcCode,
               shaping: ShapingSpec, noise_var: float, max_iters: int = 25,
               use_priors: bool = True, prior_in_metric: bool = True,
               detector: str = "sphere", slot_duration: float = 5e-4):
    """Per-symbol-vector sphere (or exhaustive) detection, then decoding."""
    const = _constellation_for(shaping, use_priors)
    y_tilde = bundle.q_u.conj().T @ np.asarray(y_grid, dtype=np.complex128)
    layers, slots = y_tilde.shape
    llr_grid = np.zeros((layers, slots, mapping.bits_per_symbol))
    detect = sphere_decode if detector == "sphere" else map_exhaustive
    for s in range(slots):
        out = detect(DetectionInput(
            y_tilde=y_tilde[:, s], r_g=bundle.r_g, constellation=const,
            noise_var=noise_var, prior_in_metric=prior_in_metric))
        llr_grid[:, s, :] = out.llrs
    decoded = []
    for i in range(mapping.n_cb):
        cb, _ = _decode_cb(gather_llrs(llr_grid, mapping, i), code, max_iters)
        decoded.append(cb)
    tb = TransportBlock(codeblocks=decoded, slot_duration=slot_duration)
    return tb, llr_grid
