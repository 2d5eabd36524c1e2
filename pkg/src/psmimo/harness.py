"""Monte-Carlo experiment runner: configuration, metrics, sweeps, CSV.

One trial = one transport block over one block-fading channel draw.  Trials
are keyed by (base seed, SNR point, trial index) through a counter-based
generator, so any trial is reproducible in isolation and results never
depend on scheduling.  Early stopping evaluates Wilson confidence intervals
at fixed batch boundaries only, keeping the sweep deterministic for a given
configuration regardless of thread count.
"""

import concurrent.futures
import csv
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import yaml

from . import layermap as lm
from .channel import add_noise, draw_channel, make_rng, snr_db_to_noise_var
from .errors import ConfigError, LengthMismatch
from .fec import LdpcCode, default_code, load_protograph, make_protograph, segment
from .layermap import build_layer_mapping, build_shaped_tb_info, map_to_layers
from .precoding import build_bgmd, build_identity, build_svd, build_ucd
from .shaping import ShapingSpec, make_shaping_spec, mb_entropy, mb_pmf

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "snr_db", "precoder", "receiver", "mapping", "detector", "nu",
    "bler", "bler_ci", "cb_error_rate", "throughput_bps", "throughput_ci",
    "trials", "seed",
]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    n_t: int = 4
    n_r: int = 4
    layers: int = 4
    qam_order: int = 64
    nu: float = 0.05
    n_cbit: int = 1944
    code_rate: Optional[float] = None  # default: the protograph's own rate
    n_cb: int = 4
    crc_len: int = 24
    block_len: int = 72
    t_slot: float = 5e-4
    snr_grid_db: tuple = (20.0, 24.0, 28.0, 32.0)
    precoder: str = "bgmd"  # identity | svd | bgmd | ucd
    detector: str = "vblast"  # vblast | sphere | exhaustive
    mapping: str = "lc_mimo"  # lc_mimo | nr_mimo
    receiver: str = "cb_sic"  # cb_sic | hard_sic | sd
    trials: int = 100
    seed: int = 0
    max_iters: int = 25
    total_power: Optional[float] = None  # default: one unit per layer
    threads: int = 1
    batch: int = 100
    ci_stop_frac: float = 0.1
    prior_in_metric: Optional[bool] = None  # None = per-scheme default
    demap_priors: Optional[bool] = None  # None = per-scheme default
    protograph_file: Optional[str] = None

    def __post_init__(self):
        self.snr_grid_db = tuple(float(v) for v in self.snr_grid_db)
        self.validate()

    # -- derived quantities --------------------------------------------------

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.qam_order)))

    @property
    def p_total(self) -> float:
        return float(self.layers if self.total_power is None else self.total_power)

    def validate(self):
        q = self.qam_order
        if q < 4 or 4 ** round(math.log2(q) / 2) != q:
            raise ConfigError(f"qam_order must be a power of 4, got {q}")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must not be empty")
        if list(self.snr_grid_db) != sorted(self.snr_grid_db):
            raise ConfigError("snr_grid_db must be ascending")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 1 <= self.layers <= min(self.n_t, self.n_r):
            raise ConfigError("layers must be in [1, min(n_t, n_r)]")
        if self.precoder not in ("identity", "svd", "bgmd", "ucd"):
            raise ConfigError(f"unknown precoder {self.precoder!r}")
        if self.receiver not in ("cb_sic", "hard_sic", "sd"):
            raise ConfigError(f"unknown receiver {self.receiver!r}")
        if self.mapping not in ("lc_mimo", "nr_mimo"):
            raise ConfigError(f"unknown mapping {self.mapping!r}")
        if self.detector not in ("vblast", "sphere", "exhaustive"):
            raise ConfigError(f"unknown detector {self.detector!r}")
        if self.receiver == "cb_sic" and self.mapping != "lc_mimo":
            raise ConfigError("cb_sic requires lc_mimo mapping")
        if self.precoder == "bgmd" and self.nu <= 0:
            raise ConfigError("bgmd requires nu > 0 (use ucd for nu = 0)")
        if self.nu < 0:
            raise ConfigError("nu must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_grid_db"] = list(self.snr_grid_db)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path}: parse error{line}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return SimConfig.from_dict(data)


def apply_overrides(cfg: SimConfig, overrides) -> SimConfig:
    """Apply ``key=value`` strings on top of an existing configuration."""
    data = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in data:
            raise ConfigError(f"unknown config key {key!r}")
        data[key] = yaml.safe_load(raw)
    return SimConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Built objects shared by all trials of a sweep
# ---------------------------------------------------------------------------

class _SimObjects:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        if cfg.protograph_file:
            base, z = load_protograph(cfg.protograph_file)
        else:
            if cfg.n_cbit % 54:
                raise ConfigError(
                    "default protograph needs n_cbit divisible by 54")
            z = cfg.n_cbit // 54
            base = make_protograph(50, 4, z)
        k_info = None
        if cfg.code_rate is not None:
            k_info = int(round(cfg.code_rate * cfg.n_cbit))
        self.code = LdpcCode(base, z, n_cbit=cfg.n_cbit, k_info=k_info,
                             crc_len=cfg.crc_len)
        self.shaping = make_shaping_spec(cfg.qam_order, cfg.nu, cfg.block_len,
                                         cfg.p_total, cfg.layers)
        self.mapping = build_layer_mapping(cfg.mapping, cfg.n_cb, cfg.n_cbit,
                                           cfg.layers, cfg.bits_per_symbol)
        # uniform-prior symbol energy of the unscaled constellation (the
        # MMSE regularizer baselines assume a uniform source)
        self.uniform_var = mb_pmf(0.0, self.shaping.alphabet).mean_square()
        if self.mapping.m_amp > self.code.k_payload:
            raise ConfigError(
                "amplitude labels exceed the systematic payload; raise the "
                "code rate or n_cbit")
        amps_per_cb = self.mapping.m_amp // (self.shaping.alphabet.m - 1)
        if amps_per_cb % cfg.block_len:
            raise ConfigError(
                f"{amps_per_cb} amplitudes per CB not divisible by "
                f"block_len {cfg.block_len}")

    def build_precoder(self, h, noise_var):
        cfg = self.cfg
        alpha = self.shaping.alpha
        if cfg.precoder == "bgmd":
            return build_bgmd(h, cfg.nu, noise_var, alpha, layers=cfg.layers)
        if cfg.precoder == "ucd":
            return build_ucd(h, noise_var, alpha, self.uniform_var,
                             layers=cfg.layers)
        if cfg.precoder == "identity":
            return build_identity(h, noise_var, alpha, self.uniform_var,
                                  layers=cfg.layers)
        return build_svd(h, noise_var=noise_var, alpha=alpha,
                         symbol_var=self.uniform_var, layers=cfg.layers)

    def prior_policy(self):
        """(use_priors, prior_in_metric) for the configured scheme.

        The distribution-aware transceiver (BGMD) carries the shaped prior
        in its augmentation and weights its demapper by it.  Every baseline
        runs a uniform-prior receive chain, which keeps the throughput
        metric comparable across curves; prior-aware detection for any
        scheme remains available through the ``demap_priors`` and
        ``prior_in_metric`` overrides.
        """
        cfg = self.cfg
        use_priors = cfg.precoder == "bgmd"
        in_metric = False
        if cfg.demap_priors is not None:
            use_priors = cfg.demap_priors
        if cfg.prior_in_metric is not None:
            in_metric = cfg.prior_in_metric
        return use_priors, in_metric


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def source_entropy_per_cb(shaping: ShapingSpec, mapping) -> float:
    """H(x) per codeblock: amplitude entropy plus one bit per sign bit."""
    m = shaping.alphabet.m
    h_amp = mapping.m_amp / (m - 1) * mb_entropy(shaping.dist)
    h_sign = mapping.n_cbit - mapping.m_amp
    return h_amp + h_sign


def _binary_entropy_from_llr(llr: np.ndarray) -> np.ndarray:
    """H_b of the posterior (1 + e^-llr)^-1, numerically stable."""
    a = np.abs(llr)
    out = np.zeros_like(a)
    finite = np.isfinite(a)
    af = a[finite]
    t = np.exp(-af)
    out[finite] = (np.log1p(t) + af * t / (1.0 + t)) / math.log(2.0)
    return out


def empirical_throughput(llr_grid, shaping: ShapingSpec, code: LdpcCode,
                         tb) -> float:
    """Source entropy minus residual bit uncertainty, per slot duration.

    ``llr_grid`` holds one equalizer-output LLR per coded bit (any shape).
    Negative results clamp to zero.
    """
    llrs = np.asarray(llr_grid, dtype=np.float64).reshape(-1)
    n_cb = tb.n_cb
    if llrs.size != n_cb * code.n_cbit:
        raise LengthMismatch(
            f"expected {n_cb * code.n_cbit} LLRs, got {llrs.size}")
    m = shaping.alphabet.m
    s_cb = code.n_cbit // (2 * m)
    m_amp = 2 * (m - 1) * s_cb
    h_x = m_amp / (m - 1) * mb_entropy(shaping.dist) + (code.n_cbit - m_amp)
    residual = _binary_entropy_from_llr(llrs).sum()
    bits = n_cb * h_x - residual
    return max(bits, 0.0) / tb.slot_duration


def wilson_halfwidth(p_hat: float, n: int, z: float = 1.959964) -> float:
    if n == 0:
        return math.inf
    z2 = z * z
    return (z * math.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n))
            / (1 + z2 / n))


# ---------------------------------------------------------------------------
# Single trial and point
# ---------------------------------------------------------------------------

def _run_trial(objs: _SimObjects, snr_db: float, trial: int):
    cfg = objs.cfg
    key = (cfg.seed, int(round(snr_db * 1000)), trial)
    noise_var = snr_db_to_noise_var(snr_db, cfg.p_total)

    ch = draw_channel(cfg.n_r, cfg.n_t, key, noise_var)
    bundle = objs.build_precoder(ch.h, noise_var)

    tb_info = build_shaped_tb_info(make_rng(*key, 0xB175), objs.mapping,
                                   objs.code, objs.shaping)
    tb = segment(tb_info, objs.code, cfg.n_cb, cfg.t_slot)
    s_grid = map_to_layers(tb, objs.mapping, objs.shaping)
    tx = objs.shaping.alpha * (bundle.f @ s_grid)
    y = add_noise(ch.h @ tx, noise_var, key)

    use_priors, in_metric = objs.prior_policy()
    common = dict(code=objs.code, shaping=objs.shaping, noise_var=noise_var,
                  max_iters=cfg.max_iters, use_priors=use_priors,
                  prior_in_metric=in_metric, slot_duration=cfg.t_slot)
    if cfg.receiver == "cb_sic":
        tb_dec, llr_grid = lm.cb_sic_receive(y, bundle, objs.mapping, **common)
    elif cfg.receiver == "hard_sic":
        tb_dec, llr_grid = lm.hard_sic_receive(y, bundle, objs.mapping, **common)
    else:
        tb_dec, llr_grid = lm.sd_receive(y, bundle, objs.mapping,
                                         detector=cfg.detector, **common)

    cb_fail = sum(0 if cb.crc_ok else 1 for cb in tb_dec.codeblocks)
    throughput = empirical_throughput(llr_grid, objs.shaping, objs.code, tb_dec)
    return (1 if cb_fail else 0), cb_fail, throughput


def _run_trial_batch(cfg_dict: dict, snr_db: float, lo: int, hi: int):
    objs = _SimObjects(SimConfig.from_dict(cfg_dict))
    return [_run_trial(objs, snr_db, t) for t in range(lo, hi)]


@dataclass
class SimPointResult:
    snr_db: float
    bler: float
    bler_ci: float
    cb_error_rate: float
    throughput_bps: float
    throughput_ci: float
    trials: int
    seed: int


@dataclass
class SimResult:
    config: dict
    points: list = field(default_factory=list)


def run_point(cfg: SimConfig, snr_db: float, objs: Optional[_SimObjects] = None,
              executor=None) -> SimPointResult:
    """Aggregate up to ``cfg.trials`` transport blocks at one SNR.

    Trials run in fixed batches; after each batch the Wilson interval on
    BLER is checked and the point stops early once the half-width drops
    below ``ci_stop_frac`` of the estimate.  Batch boundaries make the
    stopping rule independent of parallel scheduling.
    """
    objs = objs or _SimObjects(cfg)
    cw_errors = 0
    cb_errors = 0
    throughputs = []
    done = 0
    while done < cfg.trials:
        hi = min(done + cfg.batch, cfg.trials)
        if executor is not None and cfg.threads > 1 and hi - done > 1:
            step = math.ceil((hi - done) / cfg.threads)
            futures = [
                executor.submit(_run_trial_batch, cfg.to_dict(), snr_db,
                                lo, min(lo + step, hi))
                for lo in range(done, hi, step)
            ]
            outcomes = [row for fut in futures for row in fut.result()]
        else:
            outcomes = [_run_trial(objs, snr_db, t) for t in range(done, hi)]
        for cw, cb, thr in outcomes:
            cw_errors += cw
            cb_errors += cb
            throughputs.append(thr)
        done = hi
        p_hat = cw_errors / done
        if p_hat > 0 and wilson_halfwidth(p_hat, done) < cfg.ci_stop_frac * p_hat:
            break
    thr = np.asarray(throughputs)
    thr_ci = 1.959964 * thr.std(ddof=1) / math.sqrt(done) if done > 1 else 0.0
    return SimPointResult(
        snr_db=float(snr_db),
        bler=cw_errors / done,
        bler_ci=wilson_halfwidth(cw_errors / done, done),
        cb_error_rate=cb_errors / (done * cfg.n_cb),
        throughput_bps=float(thr.mean()),
        throughput_ci=float(thr_ci),
        trials=done,
        seed=cfg.seed,
    )


def run_sweep(cfg: SimConfig, out_path=None, progress=None) -> SimResult:
    """Map :func:`run_point` over the SNR grid, flushing CSV per point."""
    objs = _SimObjects(cfg)
    result = SimResult(config=cfg.to_dict())
    executor = None
    try:
        if cfg.threads > 1:
            executor = concurrent.futures.ProcessPoolExecutor(cfg.threads)
        writer = None
        fh = None
        if out_path:
            fh = open(out_path, "w", newline="")
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
        for snr_db in cfg.snr_grid_db:
            point = run_point(cfg, snr_db, objs=objs, executor=executor)
            result.points.append(point)
            if writer is not None:
                writer.writerow(_csv_row(cfg, point))
                fh.flush()
            if progress is not None:
                progress(point)
        if fh is not None:
            fh.close()
    finally:
        if executor is not None:
            executor.shutdown()
    return result


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _csv_row(cfg: SimConfig, point: SimPointResult) -> list:
    return [_fmt(v) for v in (
        point.snr_db, cfg.precoder, cfg.receiver, cfg.mapping, cfg.detector,
        cfg.nu, point.bler, point.bler_ci, point.cb_error_rate,
        point.throughput_bps, point.throughput_ci, point.trials, point.seed)]


def emit_csv(result: SimResult, path):
    """Write one data row per SNR point (schema in CSV_COLUMNS)."""
    cfg = SimConfig.from_dict(result.config)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for point in result.points:
            writer.writerow(_csv_row(cfg, point))


def csv_rows(result: SimResult) -> str:
    """CSV data rows as a string (used by the determinism checks)."""
    cfg = SimConfig.from_dict(result.config)
    lines = [",".join(CSV_COLUMNS)]
    for point in result.points:
        lines.append(",".join(_csv_row(cfg, point)))
    return "\n".join(lines) + "\n"
