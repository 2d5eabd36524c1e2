"""Channel coding: quasi-cyclic LDPC codes, CRC, and codeblock segmentation.

Codes are described by an integer protograph (base matrix) whose entries are
circulant shifts, -1 marking an all-zero block, lifted by a circulant size
``z``.  The shipped default is an IRA-style high-rate protograph (rate
50/54 = 0.9259) with weight-3 information columns and a bidiagonal
accumulator parity section; shifts are assigned by a deterministic greedy
pass that avoids 4-cycles where possible.

Rate matching is a deterministic shorten/puncture rule: information tail
bits are shortened (known zeros, never transmitted) and parity tail bits
punctured until the transmitted block is exactly ``n_cbit`` bits long.

Decoding is normalized min-sum (factor 0.75) with a flooding schedule.  The
LLR sign convention is pinned project-wide: positive LLR means bit 0.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from numba import njit

from .errors import LengthMismatch, SizeMismatch

LLR_SAT = 20.0  # project-wide LLR clamp
_KNOWN_BIT_LLR = 1000.0  # shortened (known-zero) positions

CRC24_POLY = 0x1864CFB
CRC24_LEN = 24


# ---------------------------------------------------------------------------
# Protograph construction and I/O
# ---------------------------------------------------------------------------

def make_protograph(n_info_blocks: int, n_parity_blocks: int, z: int) -> np.ndarray:
    """Deterministic IRA-style base matrix (shifts; -1 = zero block)."""
    return _make_protograph_cached(n_info_blocks, n_parity_blocks, z).copy()


@lru_cache(maxsize=32)
def _make_protograph_cached(n_info_blocks: int, n_parity_blocks: int,
                            z: int) -> np.ndarray:
    """Build the base matrix.

    Information columns get weight min(3, rows) on cyclically chosen rows;
    shifts are scanned greedily so the pairwise shift differences seen by
    each row pair stay distinct (no 4-cycles) whenever the circulant size
    allows it.  The parity section is a bidiagonal accumulator chain of
    0-shift identities.
    """
    mb = n_parity_blocks
    nb = n_info_blocks + n_parity_blocks
    base = -np.ones((mb, nb), dtype=np.int64)

    used = {}  # (r1, r2) -> set of shift differences mod z
    for i in range(mb):
        base[i, n_info_blocks + i] = 0
        if i > 0:
            base[i, n_info_blocks + i - 1] = 0
            used.setdefault((i - 1, i), set()).add(0)

    weight = min(3, mb)
    for j in range(n_info_blocks):
        rows = sorted((j + t) % mb for t in range(weight))
        # Fix the first row's shift to 0 and scan the remaining shifts; the
        # pairwise differences are what 4-cycles depend on.
        best = None
        best_collisions = None
        n_free = weight - 1
        for code in range(z**n_free):
            shifts = [0] + [(code // z**t) % z for t in range(n_free)]
            collisions = 0
            for a in range(weight):
                for b in range(a + 1, weight):
                    diff = (shifts[a] - shifts[b]) % z
                    if diff in used.setdefault((rows[a], rows[b]), set()):
                        collisions += 1
            if collisions == 0:
                best = shifts
                break
            if best_collisions is None or collisions < best_collisions:
                best_collisions = collisions
                best = shifts
        for a in range(weight):
            base[rows[a], j] = best[a]
            for b in range(a + 1, weight):
                used[(rows[a], rows[b])].add((best[a] - best[b]) % z)
    return base


def load_protograph(path):
    """Read ``z rows cols`` then the shift matrix from a plain-text file."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise ValueError(f"{path}: expected 'z rows cols' header")
    z, rows, cols = int(tokens[0]), int(tokens[1]), int(tokens[2])
    body = tokens[3:]
    if len(body) != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, got {len(body)}")
    base = np.array([int(t) for t in body], dtype=np.int64).reshape(rows, cols)
    return base, z


def save_protograph(base, z, path):
    base = np.asarray(base)
    lines = [f"{z} {base.shape[0]} {base.shape[1]}"]
    for row in base:
        lines.append(" ".join(str(int(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# GF(2) helpers
# ---------------------------------------------------------------------------

def _gf2_inverse(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    work = np.concatenate([a.astype(np.uint8) % 2, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivots = np.nonzero(work[col:, col])[0]
        if pivots.size == 0:
            raise ValueError("matrix is singular over GF(2)")
        pivot = col + pivots[0]
        if pivot != col:
            work[[col, pivot]] = work[[pivot, col]]
        rows = np.nonzero(work[:, col])[0]
        rows = rows[rows != col]
        work[rows] ^= work[col]
    return work[:, n:]


# ---------------------------------------------------------------------------
# Code object
# ---------------------------------------------------------------------------

@dataclass
class LdpcCode:
    """Lifted quasi-cyclic code plus rate-matching and CRC configuration."""

    base_matrix: np.ndarray
    z: int
    n_cbit: Optional[int] = None  # transmitted bits per CB (default: n_full)
    k_info: Optional[int] = None  # info bits per CB incl. CRC (default: k_full)
    crc_len: int = CRC24_LEN
    crc_poly: int = CRC24_POLY

    # derived, filled in __post_init__
    n_full: int = field(init=False)
    k_full: int = field(init=False)

    def __post_init__(self):
        self.base_matrix = np.asarray(self.base_matrix, dtype=np.int64)
        mb, nb = self.base_matrix.shape
        if nb <= mb:
            raise ValueError("protograph needs more columns than rows")
        if self.base_matrix.max() >= self.z:
            raise ValueError("shift values must be below the circulant size")
        self.n_full = nb * self.z
        self.k_full = (nb - mb) * self.z
        if self.n_cbit is None:
            self.n_cbit = self.n_full
        if self.k_info is None:
            self.k_info = self.k_full
        self._validate_rate_matching()
        self._build_tables()

    def _validate_rate_matching(self):
        m = self.n_full - self.k_full
        if not 0 < self.k_info <= self.k_full:
            raise ValueError("k_info must be in (0, k_full]")
        punct = self.k_info + m - self.n_cbit
        if punct < 0:
            raise ValueError("n_cbit larger than the shortened codeword")
        if punct >= m:
            raise ValueError("cannot puncture every parity bit")
        self._n_shorten = self.k_full - self.k_info
        self._n_puncture = punct

    def _build_tables(self):
        mb, nb = self.base_matrix.shape
        z = self.z
        rows, cols = [], []
        for r in range(mb):
            for c in range(nb):
                shift = self.base_matrix[r, c]
                if shift < 0:
                    continue
                i = np.arange(z)
                rows.append(r * z + i)
                cols.append(c * z + (i + shift) % z)
        row_idx = np.concatenate(rows)
        col_idx = np.concatenate(cols)
        order = np.lexsort((col_idx, row_idx))
        self._edge_var = col_idx[order].astype(np.int64)
        m = mb * z
        self._check_ptr = np.searchsorted(
            row_idx[order], np.arange(m + 1)).astype(np.int64)

        h = np.zeros((m, nb * z), dtype=np.uint8)
        h[row_idx, col_idx] = 1
        self._h_dense = h
        hp_inv = _gf2_inverse(h[:, self.k_full:])
        # parity = encoder_matrix @ info (mod 2)
        self._encoder_matrix = (hp_inv.astype(np.int64) @ h[:, : self.k_full]) % 2
        self._encoder_matrix = self._encoder_matrix.astype(np.uint8)

    # -- public geometry ---------------------------------------------------

    @property
    def rate(self) -> float:
        return self.k_info / self.n_cbit

    @property
    def n(self) -> int:
        return self.n_cbit

    @property
    def k(self) -> int:
        return self.k_info

    @property
    def k_payload(self) -> int:
        """Info bits per CB excluding the CRC."""
        return self.k_info - self.crc_len

    def parity_check_matrix(self) -> np.ndarray:
        """Dense lifted H (before rate matching); test oracle."""
        return self._h_dense.copy()


def default_code(z: int = 36, **kwargs) -> LdpcCode:
    """Rate-50/54 IRA protograph; z=36 gives n=1944, k=1800."""
    return LdpcCode(make_protograph(50, 4, z), z, **kwargs)


# ---------------------------------------------------------------------------
# Encode / decode
# ---------------------------------------------------------------------------

def ldpc_encode(info, code: LdpcCode) -> np.ndarray:
    """Systematic encode of ``k_info`` bits to an ``n_cbit``-bit block."""
    info = np.asarray(info, dtype=np.uint8).ravel()
    if info.size != code.k_info:
        raise LengthMismatch(f"expected {code.k_info} info bits, got {info.size}")
    full_info = np.zeros(code.k_full, dtype=np.uint8)
    full_info[: code.k_info] = info
    parity = (code._encoder_matrix @ full_info.astype(np.int64)) % 2
    if code._n_puncture:
        parity = parity[: -code._n_puncture]
    return np.concatenate([info, parity.astype(np.uint8)])


@njit(cache=True)
def _min_sum_kernel(llr, edge_var, check_ptr, max_iters, norm):
    n = llr.shape[0]
    n_checks = check_ptr.shape[0] - 1
    n_edges = edge_var.shape[0]
    c2v = np.zeros(n_edges)
    c2v_new = np.zeros(n_edges)
    post = llr.copy()
    hard = np.zeros(n, dtype=np.uint8)
    converged = False
    iters = 0
    for it in range(max_iters):
        iters = it + 1
        # check update from the previous iteration's snapshot (flooding)
        for c in range(n_checks):
            lo, hi = check_ptr[c], check_ptr[c + 1]
            min1 = 1e300
            min2 = 1e300
            argmin = -1
            sign_prod = 1.0
            for e in range(lo, hi):
                v2c = post[edge_var[e]] - c2v[e]
                mag = abs(v2c)
                if v2c < 0.0:
                    sign_prod = -sign_prod
                if mag < min1:
                    min2 = min1
                    min1 = mag
                    argmin = e
                elif mag < min2:
                    min2 = mag
            for e in range(lo, hi):
                v2c = post[edge_var[e]] - c2v[e]
                sign = sign_prod if v2c >= 0.0 else -sign_prod
                mag = min2 if e == argmin else min1
                c2v_new[e] = norm * sign * mag
        for v in range(n):
            post[v] = llr[v]
        for e in range(n_edges):
            c2v[e] = c2v_new[e]
            post[edge_var[e]] += c2v[e]
        # a bit with exactly zero posterior is unresolved, never "converged"
        ok = True
        for v in range(n):
            hard[v] = 1 if post[v] < 0.0 else 0
            if post[v] == 0.0:
                ok = False
        if ok:
            for c in range(n_checks):
                parity = 0
                for e in range(check_ptr[c], check_ptr[c + 1]):
                    parity ^= hard[edge_var[e]]
                if parity:
                    ok = False
                    break
        if ok:
            converged = True
            break
    return hard, converged, iters


def ldpc_decode(llrs, code: LdpcCode, max_iters: int = 25):
    """Normalized min-sum decode; returns (info_bits, converged)."""
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    if llrs.size != code.n_cbit:
        raise LengthMismatch(f"expected {code.n_cbit} LLRs, got {llrs.size}")
    full = np.zeros(code.n_full)
    full[: code.k_info] = llrs[: code.k_info]
    if code._n_shorten:
        full[code.k_info : code.k_full] = _KNOWN_BIT_LLR
    n_parity_tx = code.n_cbit - code.k_info
    full[code.k_full : code.k_full + n_parity_tx] = llrs[code.k_info :]
    hard, converged, _ = _min_sum_kernel(
        full, code._edge_var, code._check_ptr, max_iters, 0.75)
    return hard[: code.k_info].copy(), bool(converged)


# ---------------------------------------------------------------------------
# CRC
# ---------------------------------------------------------------------------

@njit(cache=True)
def _crc_remainder(bits, poly, width):
    reg = np.uint64(0)
    top = np.uint64(1) << np.uint64(width)
    mask = top - np.uint64(1)
    for i in range(bits.shape[0]):
        reg = (reg << np.uint64(1)) | np.uint64(bits[i])
        if reg & top:
            reg ^= poly | top
    for _ in range(width):
        reg = reg << np.uint64(1)
        if reg & top:
            reg ^= poly | top
    return reg & mask


def crc_attach(info, poly: int = CRC24_POLY, width: int = CRC24_LEN) -> np.ndarray:
    """Append the ``width``-bit CRC of ``info`` (MSB first)."""
    info = np.asarray(info, dtype=np.uint8).ravel()
    rem = int(_crc_remainder(info, np.uint64(poly), np.uint64(width)))
    crc_bits = np.array([(rem >> (width - 1 - i)) & 1 for i in range(width)],
                        dtype=np.uint8)
    return np.concatenate([info, crc_bits])


def crc_check(block, poly: int = CRC24_POLY, width: int = CRC24_LEN) -> bool:
    block = np.asarray(block, dtype=np.uint8).ravel()
    if block.size < width:
        raise LengthMismatch("block shorter than the CRC")
    payload = block[: block.size - width]
    return bool(np.array_equal(crc_attach(payload, poly, width), block))


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

@dataclass
class CodeBlock:
    info_bits: np.ndarray  # k_info bits: payload + CRC
    coded_bits: np.ndarray  # n_cbit bits
    crc_ok: Optional[bool] = None
    layer: Optional[int] = None


@dataclass
class TransportBlock:
    codeblocks: list
    slot_duration: float = 5e-4

    @property
    def n_cb(self) -> int:
        return len(self.codeblocks)


def segment(tb_info, code: LdpcCode, n_cb: int,
            slot_duration: float = 5e-4) -> TransportBlock:
    """Split a transport block into ``n_cb`` CRC-protected, encoded CBs."""
    tb_info = np.asarray(tb_info, dtype=np.uint8).ravel()
    if n_cb < 1:
        raise SizeMismatch("need at least one codeblock")
    per_cb = code.k_payload
    if tb_info.size != n_cb * per_cb:
        raise SizeMismatch(
            f"transport block of {tb_info.size} bits does not split into "
            f"{n_cb} codeblocks of {per_cb} payload bits")
    blocks = []
    for i in range(n_cb):
        payload = tb_info[i * per_cb : (i + 1) * per_cb]
        info = crc_attach(payload, code.crc_poly, code.crc_len)
        blocks.append(CodeBlock(info_bits=info, coded_bits=ldpc_encode(info, code)))
    return TransportBlock(codeblocks=blocks, slot_duration=slot_duration)
