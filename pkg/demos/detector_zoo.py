"""Symbol-vector detectors side by side.

Compares successive nulling/cancellation (VBLAST), depth-first sphere
decoding, and the exhaustive MAP oracle on a small shaped-QAM MIMO link:
identical hard decisions for SD and the oracle, SIC slightly behind at low
SNR, everything exact when noise vanishes.

Run:  python3 demos/detector_zoo.py
"""

import numpy as np

from psmimo import decomp, detection as det, shaping as sh

rng = np.random.default_rng(3)
const = sh.make_constellation(sh.AmplitudeAlphabet(2), nu=0.08)  # shaped 16-QAM
layers = 3

print(f"{layers} layers, shaped 16-QAM, prior included in the search metric")
print(f"{'noise std':>10} {'VBLAST':>8} {'sphere':>8} {'exact MAP':>10} "
      f"{'SD==MAP':>8}")

for noise_std in (0.9, 0.6, 0.4, 0.2, 0.01):
    errs = {"vb": 0, "sd": 0, "map": 0}
    agree = True
    trials = 400
    for _ in range(trials):
        a = rng.standard_normal((layers + 1, layers)) \
            + 1j * rng.standard_normal((layers + 1, layers))
        r = decomp.qr(a).r
        s_idx = rng.integers(0, const.size, layers)
        sent = const.points[s_idx]
        y = r @ sent + noise_std * (rng.standard_normal(layers)
                                    + 1j * rng.standard_normal(layers))
        inp = det.DetectionInput(y, r, const, noise_var=2 * noise_std**2,
                                 prior_in_metric=True)
        got_vb = det.map_vblast(inp).hard_symbols
        got_sd = det.sphere_decode(inp).hard_symbols
        got_map = det.map_exhaustive(inp).hard_symbols
        errs["vb"] += int(np.any(got_vb != sent))
        errs["sd"] += int(np.any(got_sd != sent))
        errs["map"] += int(np.any(got_map != sent))
        agree &= bool(np.array_equal(got_sd, got_map))
    print(f"{noise_std:>10} {errs['vb'] / trials:>8.3f} "
          f"{errs['sd'] / trials:>8.3f} {errs['map'] / trials:>10.3f} "
          f"{str(agree):>8}")

print("\nVBLAST error rate dominates the MAP oracle's (SIC is suboptimal);")
print("the sphere decoder tracks the oracle decision-for-decision.")
