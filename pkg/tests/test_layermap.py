import numpy as np
import pytest

from psmimo import fec, layermap as lm, precoding as pc, shaping as sh
from psmimo.channel import add_noise, draw_channel, make_rng
from psmimo.errors import GridMismatch

UNIFORM_ES = 42.0


def small_setup(mapping_scheme="lc_mimo", n_cb=4, layers=4, z=12, nu=0.1,
                block_len=72):
    code = fec.LdpcCode(fec.make_protograph(50, 4, z), z)  # n = 54*z
    shaping = sh.make_shaping_spec(64, nu, block_len, float(layers), layers)
    mapping = lm.build_layer_mapping(mapping_scheme, n_cb, code.n_cbit,
                                     layers, 6)
    return code, shaping, mapping


def make_tb(code, mapping, shaping, seed=0):
    info = lm.build_shaped_tb_info(make_rng(seed), mapping, code, shaping)
    return fec.segment(info, code, mapping.n_cb)


def test_mapping_geometry_lc():
    code, shaping, mapping = small_setup()
    assert mapping.slots * mapping.layers * 6 == 4 * code.n_cbit
    assert mapping.m_amp == 2 * (3 - 1) * (code.n_cbit // 6)
    assert mapping.cb_layer == (0, 1, 2, 3)


def test_lc_containment_and_nr_spread():
    code, shaping, mapping = small_setup("lc_mimo")
    for i, coords in enumerate(mapping.cb_symbols):
        assert set(coords[:, 0].tolist()) == {mapping.cb_layer[i]}
    _, _, nr = small_setup("nr_mimo")
    for coords in nr.cb_symbols:
        assert set(coords[:, 0].tolist()) == {0, 1, 2, 3}


def test_fig1_example_two_layers():
    code = fec.LdpcCode(fec.make_protograph(50, 4, 12), 12)
    mapping = lm.build_layer_mapping("lc_mimo", 2, code.n_cbit, 2, 6)
    assert mapping.cb_layer == (0, 1)
    assert set(mapping.cb_symbols[0][:, 0].tolist()) == {0}
    assert set(mapping.cb_symbols[1][:, 0].tolist()) == {1}


def test_single_layer_mappings_identical():
    code, shaping, lc = small_setup("lc_mimo", n_cb=2, layers=1)
    _, _, nr = small_setup("nr_mimo", n_cb=2, layers=1)
    tb = make_tb(code, lc, shaping)
    grid_lc = lm.map_to_layers(tb, lc, shaping)
    grid_nr = lm.map_to_layers(tb, nr, shaping)
    assert np.array_equal(grid_lc, grid_nr)


@pytest.mark.parametrize("scheme", ["lc_mimo", "nr_mimo"])
def test_roundtrip_every_coded_bit(scheme):
    code, shaping, mapping = small_setup(scheme)
    tb = make_tb(code, mapping, shaping, seed=3)
    total = mapping.layers * mapping.slots * 6
    flat = np.empty(total, dtype=np.uint8)
    for cb, pos in zip(tb.codeblocks, mapping.assignment):
        flat[pos] = cb.coded_bits
    recovered = lm.demap_bits(flat, mapping)
    for cb, bits in zip(tb.codeblocks, recovered):
        assert np.array_equal(bits, cb.coded_bits)


def test_grid_symbols_respect_composition():
    code, shaping, mapping = small_setup()
    tb = make_tb(code, mapping, shaping, seed=4)
    grid = lm.map_to_layers(tb, mapping, shaping)
    amps = np.concatenate([np.abs(grid.real.ravel()), np.abs(grid.imag.ravel())])
    counts = {a: int((amps == a).sum()) for a in (1.0, 3.0, 5.0, 7.0)}
    comp = shaping.composition
    n_blocks = amps.size // comp.block_len
    expected = {float(2 * i + 1): n_blocks * comp.counts[i] for i in range(4)}
    assert counts == expected


def test_shaped_info_misfit_raises():
    code, shaping, mapping = small_setup(block_len=144)
    # 216 amplitudes per CB at z=12 are not divisible by block_len 144
    with pytest.raises(GridMismatch):
        lm.build_shaped_tb_info(make_rng(0), mapping, code, shaping)


def run_link(code, shaping, mapping, receiver, snr_db=30.0, seed=5,
             corrupt=None, **rx_kwargs):
    layers = mapping.layers
    noise_var = float(layers) / 10 ** (snr_db / 10.0)
    ch = draw_channel(layers, layers, (seed,), noise_var)
    bundle = pc.build_ucd(ch.h, noise_var, shaping.alpha, UNIFORM_ES)
    tb = make_tb(code, mapping, shaping, seed=seed)
    grid = lm.map_to_layers(tb, mapping, shaping)
    y = ch.h @ (shaping.alpha * (bundle.f @ grid))
    if snr_db < 200:
        y = add_noise(y, noise_var, (seed,))
    if corrupt is not None:
        y = y + corrupt(bundle)
    rx = lm.cb_sic_receive if receiver == "cb_sic" else lm.hard_sic_receive
    tb_dec, llr_grid = rx(y, bundle, mapping, code, shaping,
                          noise_var=noise_var, use_priors=False, **rx_kwargs)
    return tb, tb_dec, llr_grid, grid, bundle


def test_noiseless_receive_exact():
    code, shaping, mapping = small_setup()
    tb, tb_dec, _, grid, _ = run_link(code, shaping, mapping, "cb_sic",
                                      snr_db=300.0)
    assert all(cb.crc_ok for cb in tb_dec.codeblocks)
    for sent, got in zip(tb.codeblocks, tb_dec.codeblocks):
        assert np.array_equal(sent.coded_bits, got.coded_bits)
    # reconstructed grid equals the transmitted one exactly
    rebuilt = np.stack([
        lm._cb_symbols_from_coded(cb.coded_bits, mapping, shaping)
        for cb in tb_dec.codeblocks
    ])
    assert np.array_equal(rebuilt, grid)


def test_noiseless_hard_and_cb_sic_agree():
    code, shaping, mapping = small_setup()
    _, dec_a, llr_a, _, _ = run_link(code, shaping, mapping, "cb_sic",
                                     snr_db=300.0)
    _, dec_b, llr_b, _, _ = run_link(code, shaping, mapping, "hard_sic",
                                     snr_db=300.0)
    for a, b in zip(dec_a.codeblocks, dec_b.codeblocks):
        assert np.array_equal(a.info_bits, b.info_bits)
        assert a.crc_ok and b.crc_ok


def test_single_layer_receivers_agree():
    code, shaping, mapping = small_setup(n_cb=2, layers=2)
    lc1 = lm.build_layer_mapping("lc_mimo", 2, code.n_cbit, 1, 6)
    tb = make_tb(code, lc1, shaping, seed=9)
    noise_var = 0.05
    ch = draw_channel(1, 1, (9,), noise_var)
    bundle = pc.build_ucd(ch.h, noise_var, shaping.alpha, UNIFORM_ES, layers=1)
    grid = lm.map_to_layers(tb, lc1, shaping)
    y = add_noise(ch.h @ (shaping.alpha * (bundle.f @ grid)), noise_var, (9,))
    kw = dict(noise_var=noise_var, use_priors=False)
    dec_a, _ = lm.cb_sic_receive(y, bundle, lc1, code, shaping, **kw)
    dec_b, _ = lm.hard_sic_receive(y, bundle, lc1, code, shaping, **kw)
    for a, b in zip(dec_a.codeblocks, dec_b.codeblocks):
        assert np.array_equal(a.info_bits, b.info_bits)


def test_cb_sic_requires_layer_containment():
    code, shaping, mapping = small_setup("nr_mimo")
    with pytest.raises(GridMismatch):
        lm.cb_sic_receive(np.zeros((4, mapping.slots), dtype=complex),
                          None, mapping, code, shaping, noise_var=0.1)


def test_corrupted_top_layer_cancels_exactly():
    # bounded corruption confined to the last-detected layer's observations:
    # its CB still decodes, reconstruction is bit-exact, and downstream
    # layers see no residual interference
    code, shaping, mapping = small_setup()
    layers, slots = mapping.layers, mapping.slots
    top = layers - 1
    noise_var = 1e-9
    ch = draw_channel(layers, layers, (17,), noise_var)
    bundle = pc.build_ucd(ch.h, noise_var, shaping.alpha, UNIFORM_ES)
    tb = make_tb(code, mapping, shaping, seed=17)
    grid = lm.map_to_layers(tb, mapping, shaping)
    y = ch.h @ (shaping.alpha * (bundle.f @ grid))

    e = np.zeros((layers, slots), dtype=complex)
    rng = np.random.default_rng(17)
    e[top, rng.choice(slots, 6, replace=False)] = 0.35 * (1 + 1j)
    # lift into the receive space so q_u^H y picks up exactly e
    q_u = bundle.q_u
    y = y + q_u @ np.linalg.solve(q_u.conj().T @ q_u, e)

    tb_dec, _ = lm.cb_sic_receive(y, bundle, mapping, code, shaping,
                                  noise_var=noise_var, use_priors=False)
    for cb_sent, cb_got in zip(tb.codeblocks, tb_dec.codeblocks):
        assert cb_got.crc_ok
        assert np.array_equal(cb_sent.coded_bits, cb_got.coded_bits)
    # after cancelling the exactly reconstructed top layer, the downstream
    # reduced observations match the clean triangular model
    y_tilde = q_u.conj().T @ y
    s_top = lm._cb_symbols_from_coded(tb_dec.codeblocks[top].coded_bits,
                                      mapping, shaping)
    assert np.array_equal(s_top, grid[top])
    model = bundle.r_g @ grid
    for i in range(top):
        assert np.abs(y_tilde[i] - model[i]).max() < 1e-9


def test_failed_cb_flagged_and_fallback_used():
    code, shaping, mapping = small_setup()
    tb, tb_dec, _, _, _ = run_link(code, shaping, mapping, "cb_sic",
                                   snr_db=3.0)
    assert any(not cb.crc_ok for cb in tb_dec.codeblocks)
