import numpy as np
import pytest

from psmimo import fec
from psmimo.errors import LengthMismatch, SizeMismatch


def small_code(**kw):
    # 2x4 base, z=4: rate-1/2 toy code
    return fec.LdpcCode(fec.make_protograph(2, 2, 4), 4, crc_len=8,
                        crc_poly=0x07, **kw)


def awgn_llrs(codeword, snr_db, rng):
    sigma2 = 10 ** (-snr_db / 10.0)
    x = 1.0 - 2.0 * codeword.astype(np.float64)
    y = x + rng.standard_normal(codeword.size) * np.sqrt(sigma2)
    return 2.0 * y / sigma2


def test_all_zero_codeword():
    code = small_code()
    cw = fec.ldpc_encode(np.zeros(code.k_info, dtype=np.uint8), code)
    assert not cw.any()


def test_parity_check_oracle():
    code = small_code()
    rng = np.random.default_rng(0)
    h = code.parity_check_matrix()
    for _ in range(20):
        info = rng.integers(0, 2, code.k_info, dtype=np.uint8)
        cw = fec.ldpc_encode(info, code)
        assert cw.size == code.n_cbit
        assert ((h @ cw.astype(np.int64)) % 2 == 0).all()
        assert np.array_equal(cw[: code.k_info], info)  # systematic


def test_encode_linearity():
    code = small_code()
    rng = np.random.default_rng(1)
    for _ in range(10):
        a = rng.integers(0, 2, code.k_info, dtype=np.uint8)
        b = rng.integers(0, 2, code.k_info, dtype=np.uint8)
        assert np.array_equal(fec.ldpc_encode(a ^ b, code),
                              fec.ldpc_encode(a, code) ^ fec.ldpc_encode(b, code))


def test_encode_length_mismatch():
    code = small_code()
    with pytest.raises(LengthMismatch):
        fec.ldpc_encode(np.zeros(code.k_info + 1, dtype=np.uint8), code)


def test_decode_noiseless():
    code = fec.default_code()
    rng = np.random.default_rng(2)
    info = rng.integers(0, 2, code.k_info, dtype=np.uint8)
    cw = fec.ldpc_encode(info, code)
    llr = 20.0 * (1.0 - 2.0 * cw.astype(np.float64))
    bits, converged = fec.ldpc_decode(llr, code, max_iters=2)
    assert converged and np.array_equal(bits, info)


def test_decode_corrects_single_flip():
    code = fec.default_code()
    rng = np.random.default_rng(3)
    info = rng.integers(0, 2, code.k_info, dtype=np.uint8)
    cw = fec.ldpc_encode(info, code)
    llr = 8.0 * (1.0 - 2.0 * cw.astype(np.float64))
    llr[137] *= -1.0  # one flipped-sign LLR at moderate magnitude
    bits, converged = fec.ldpc_decode(llr, code)
    assert converged and np.array_equal(bits, info)


def test_decode_no_information():
    code = small_code()
    bits, converged = fec.ldpc_decode(np.zeros(code.n_cbit), code, max_iters=10)
    assert not converged


def test_default_code_geometry():
    code = fec.default_code()
    assert (code.n_full, code.k_full) == (1944, 1800)
    assert code.rate == pytest.approx(0.92593, abs=2e-4)
    # spec target: rate 0.9258 within 1/N_cbit
    assert abs(code.rate - 0.9258) <= 1.0 / code.n_cbit


def test_rate_matching_shorten_and_puncture():
    base = fec.make_protograph(50, 4, 12)  # n=648, k=600
    code = fec.LdpcCode(base, 12, n_cbit=600, k_info=560)
    assert code._n_shorten == 40 and code._n_puncture == 8
    assert code.rate == pytest.approx(560 / 600)
    rng = np.random.default_rng(4)
    info = rng.integers(0, 2, 560, dtype=np.uint8)
    cw = fec.ldpc_encode(info, code)
    assert cw.size == 600
    llr = 15.0 * (1.0 - 2.0 * cw.astype(np.float64))
    bits, converged = fec.ldpc_decode(llr, code)
    assert converged and np.array_equal(bits, info)


def test_crc_roundtrip_exhaustive_small():
    for value in range(256):
        info = np.array([(value >> (7 - i)) & 1 for i in range(8)],
                        dtype=np.uint8)
        assert fec.crc_check(fec.crc_attach(info))


def test_crc_detects_any_single_flip():
    rng = np.random.default_rng(5)
    info = rng.integers(0, 2, 64, dtype=np.uint8)
    block = fec.crc_attach(info)
    for pos in range(block.size):
        bad = block.copy()
        bad[pos] ^= 1
        assert not fec.crc_check(bad)


def test_crc_empty_payload_deterministic():
    a = fec.crc_attach(np.empty(0, dtype=np.uint8))
    b = fec.crc_attach(np.empty(0, dtype=np.uint8))
    assert a.size == 24 and np.array_equal(a, b)


def test_segment_single_and_multi():
    code = small_code()
    rng = np.random.default_rng(6)
    tb1 = fec.segment(rng.integers(0, 2, code.k_payload, dtype=np.uint8), code, 1)
    assert tb1.n_cb == 1

    info = rng.integers(0, 2, 4 * code.k_payload, dtype=np.uint8)
    tb = fec.segment(info, code, 4)
    assert tb.n_cb == 4
    # reassembly oracle: concatenated payloads reproduce the input
    back = np.concatenate([cb.info_bits[: code.k_payload]
                           for cb in tb.codeblocks])
    assert np.array_equal(back, info)
    for cb in tb.codeblocks:
        assert cb.coded_bits.size == code.n_cbit
        assert fec.crc_check(cb.info_bits, code.crc_poly, code.crc_len)


def test_segment_size_mismatch():
    code = small_code()
    with pytest.raises(SizeMismatch):
        fec.segment(np.zeros(code.k_payload + 1, dtype=np.uint8), code, 1)


def test_protograph_file_roundtrip(tmp_path):
    base = fec.make_protograph(6, 2, 8)
    path = tmp_path / "proto.txt"
    fec.save_protograph(base, 8, path)
    loaded, z = fec.load_protograph(path)
    assert z == 8 and np.array_equal(loaded, base)
    code = fec.LdpcCode(loaded, z)
    assert code.n_full == 8 * 8


def test_default_protograph_girth_six():
    # no 4-cycles: shift differences per row pair are distinct
    base = fec.make_protograph(50, 4, 36)
    mb, nb = base.shape
    for r1 in range(mb):
        for r2 in range(r1 + 1, mb):
            cols = [c for c in range(nb) if base[r1, c] >= 0 and base[r2, c] >= 0]
            diffs = [(base[r1, c] - base[r2, c]) % 36 for c in cols]
            assert len(diffs) == len(set(diffs))


def test_awgn_bler_monotone():
    code = fec.LdpcCode(fec.make_protograph(50, 4, 12), 12)  # n=648
    rng = np.random.default_rng(7)
    points = []
    for snr_db in (4.5, 6.0, 7.5):
        errors = 0
        trials = 60
        for _ in range(trials):
            info = rng.integers(0, 2, code.k_info, dtype=np.uint8)
            cw = fec.ldpc_encode(info, code)
            bits, _ = fec.ldpc_decode(awgn_llrs(cw, snr_db, rng), code)
            errors += int(not np.array_equal(bits, info))
        points.append(errors / trials)
    assert points[0] > points[1] > points[2] or (
        points[0] > points[2] and points[1] >= points[2])
