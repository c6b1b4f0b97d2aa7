"""In-band and out-of-band figures of merit.

Kernel-domain quantities (leakage powers, mask ratios, EVM) live in the same
units as the frequency grid.  Time-domain quantities (PSD, ACLR) come from
averaged per-symbol periodograms of the synthesized waveform.  The two sides
meet through a calibration constant: the analytic ensemble mean of the
in-band kernel power density anchors both the mask bounds (gamma from dB
offsets) and the display normalization of the PSD, so a dB value means the
same thing in either domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .signal_model import OfdmNumerology, _kernel_matrix

_DB_FLOOR = 1e-30


def _to_db(x):
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), _DB_FLOOR))


@dataclass(frozen=True)
class MaskSpec:
    """Per-point leakage bounds, linear in kernel power units.

    mask_db and ref_db keep the display form: gamma_m sits mask_db[m] dB
    away from the reference level ref_db.
    """

    gamma: np.ndarray
    mask_db: np.ndarray = None
    ref_db: float = None

    def __post_init__(self):
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if np.any(gamma <= 0):
            raise ConfigError("mask bounds must be positive", field="mask.gamma")
        object.__setattr__(self, "gamma", gamma)
        if self.mask_db is not None:
            object.__setattr__(self, "mask_db", np.atleast_1d(np.asarray(self.mask_db, dtype=float)))

    @property
    def n_points(self):
        return int(self.gamma.size)


def analytic_inband_reference(numerology, step=0.25):
    """Ensemble mean in-band kernel power for unit-power constellations.

    E|a(nu)^T d|^2 = sum_{k active} |A(nu, k)|^2 when the data entries are
    i.i.d. with unit power, averaged over a fine nu grid spanning the active
    band.  This is the per-antenna calibration constant the mask and PSD
    display share.
    """
    offs = numerology.active_offsets
    nu = np.arange(offs[0], offs[-1] + step / 2, step)
    rows = _kernel_matrix(numerology.fft_size, numerology.cp_len, nu)
    act = rows[:, numerology.active_bins]
    return float(np.mean(np.sum(np.abs(act) ** 2, axis=1)))


def calibrate_mask(mask_db, numerology, ref_db, reference_power=None):
    """Convert display-form mask values to linear kernel-domain bounds.

    gamma_m = 10^((mask_db[m] - ref_db)/10) * reference_power, with the
    reference defaulting to the analytic in-band mean.  Density conversion
    factors cancel in the ratio, so the bounds are exact regardless of the
    reporting bandwidth.
    """
    mask_db = np.atleast_1d(np.asarray(mask_db, dtype=float))
    if reference_power is None:
        reference_power = analytic_inband_reference(numerology)
    gamma = 10.0 ** ((mask_db - ref_db) / 10.0) * reference_power
    return MaskSpec(gamma=gamma, mask_db=mask_db, ref_db=float(ref_db))


def _grid_values(d):
    return np.asarray(getattr(d, "symbols", d), dtype=complex)


def oobe_power(dbar, kernel):
    """|a(nu_m)^T dbar|^2 per constraint point.

    Vector input gives an (M,) array; an (n_tx, N) grid gives (M, n_tx).
    """
    vals = _grid_values(dbar)
    proj = np.tensordot(kernel.matrix, vals, axes=([1], [-1])) if vals.ndim == 1 \
        else np.einsum("mk,jk->mj", kernel.matrix, vals)
    return np.abs(proj) ** 2


def mask_ratio(dbar, kernel, mask):
    """Per-point |a^T dbar|^2 / gamma; 1.0 is the mask boundary."""
    powers = oobe_power(dbar, kernel)
    gamma = np.asarray(mask.gamma if hasattr(mask, "gamma") else mask, dtype=float)
    if powers.ndim == 2:
        return powers / gamma[:, None]
    return powers / gamma


@dataclass(frozen=True)
class EvmReport:
    """EVM fractions at every scope, with zero-power scopes flagged.

    per_subcarrier and per_prb follow the active band in offset order;
    entries whose reference power is zero hold NaN and are marked invalid.
    """

    wideband_per_antenna: np.ndarray
    pooled: float
    per_subcarrier: np.ndarray
    per_prb: np.ndarray
    subcarrier_valid: np.ndarray
    prb_valid: np.ndarray
    active_offsets: np.ndarray


def evm_metrics(x, xbar):
    """Error-vector magnitudes between a reference grid and its precoded form.

    wideband per antenna j: ||xbar_j - x_j|| / ||x_j||; pooled: Frobenius
    over the whole grid; per-subcarrier and per-PRB pool over columns.
    """
    num = x.numerology
    ref = _grid_values(x)
    out = _grid_values(xbar)
    if ref.shape != out.shape:
        raise ConfigError("grids must have matching shapes", field="grid")

    diff = out - ref
    ref_row = np.linalg.norm(ref, axis=1)
    if np.any(ref_row == 0):
        raise ConfigError("a reference antenna row has zero power", field="grid")
    wideband = np.linalg.norm(diff, axis=1) / ref_row
    pooled = float(np.linalg.norm(diff) / np.linalg.norm(ref))

    bins = num.active_bins
    err_col = np.sum(np.abs(diff[:, bins]) ** 2, axis=0)
    pow_col = np.sum(np.abs(ref[:, bins]) ** 2, axis=0)
    sc_valid = pow_col > 0
    per_sc = np.full(bins.size, np.nan)
    per_sc[sc_valid] = np.sqrt(err_col[sc_valid] / pow_col[sc_valid])

    n_prb = num.n_prb
    err_prb = err_col.reshape(n_prb, num.prb_size).sum(axis=1)
    pow_prb = pow_col.reshape(n_prb, num.prb_size).sum(axis=1)
    prb_valid = pow_prb > 0
    per_prb = np.full(n_prb, np.nan)
    per_prb[prb_valid] = np.sqrt(err_prb[prb_valid] / pow_prb[prb_valid])

    return EvmReport(wideband_per_antenna=wideband, pooled=pooled,
                     per_subcarrier=per_sc, per_prb=per_prb,
                     subcarrier_valid=sc_valid, prb_valid=prb_valid,
                     active_offsets=num.active_offsets.copy())


@dataclass(frozen=True)
class PsdConfig:
    """Periodogram averaging settings.

    segment_len defaults to one full oversampled OFDM symbol; the reference
    pair (ref_density, ref_db) fixes the dB display: a density equal to
    ref_density (per Hz) is shown as ref_db (per 100 kHz bins).
    """

    oversample: int = 4
    segment_len: int = None
    overlap: int = 0
    window: str = "rect"
    bin_hz: float = 100e3
    ref_density: float = 1.0
    ref_db: float = 0.0

    def __post_init__(self):
        if self.oversample < 1:
            raise ConfigError("oversample must be at least 1", field="psd.oversample")
        if self.overlap < 0:
            raise ConfigError("overlap must be non-negative", field="psd.overlap")
        if self.bin_hz <= 0 or self.ref_density <= 0:
            raise ConfigError("bin width and reference density must be positive", field="psd")

    def resolved_segment(self, numerology):
        seg = self.segment_len or self.oversample * numerology.symbol_len
        if self.overlap >= seg:
            raise ConfigError("overlap must be smaller than the segment", field="psd.overlap")
        return seg


@dataclass(frozen=True)
class PsdEstimate:
    """Averaged-periodogram density summed over antennas.

    freq_hz are ascending bin centers on the bin_hz lattice; density_db is
    the per-bin mean density expressed per 100 kHz relative to the
    configured reference; density_per_hz is the linear form used for band
    integrals.
    """

    freq_hz: np.ndarray
    density_db: np.ndarray
    density_per_hz: np.ndarray
    bin_hz: float
    sample_rate_hz: float
    segments: int
    ref_density: float
    ref_db: float

    def band_power(self, f_lo, f_hi):
        """Integral of the linear density over [f_lo, f_hi], with partial
        bins weighted by their overlap fraction."""
        if f_hi <= f_lo:
            raise ConfigError("empty integration band", field="aclr")
        lo_edges = self.freq_hz - self.bin_hz / 2
        hi_edges = self.freq_hz + self.bin_hz / 2
        if f_lo < lo_edges[0] - 1e-9 or f_hi > hi_edges[-1] + 1e-9:
            raise ConfigError("integration band exceeds the PSD span", field="aclr")
        overlap = np.minimum(hi_edges, f_hi) - np.maximum(lo_edges, f_lo)
        overlap = np.clip(overlap, 0.0, None)
        return float(np.sum(self.density_per_hz * overlap))


class PsdAccumulator:
    """Order-independent sums for incremental periodogram averaging.

    Symbols are added one at a time (runner calls this in symbol order for
    bit-stable accumulation); finalize() bins to the reporting lattice.
    Also tracks exact-frequency periodogram values at optional probe
    frequencies for kernel cross-checks.
    """

    def __init__(self, numerology, config, probe_freqs_hz=None):
        self.numerology = numerology
        self.config = config
        self.seg_len = config.resolved_segment(numerology)
        self.fs = config.oversample * numerology.sample_rate_hz
        if config.window == "rect":
            self._win = np.ones(self.seg_len)
        else:
            from scipy.signal import get_window
            self._win = get_window(config.window, self.seg_len)
        self._win_power = float(np.sum(self._win ** 2))
        self._psd_sum = np.zeros(self.seg_len)
        self._segments = 0
        self.probe_freqs_hz = None if probe_freqs_hz is None else np.asarray(probe_freqs_hz, float)
        if self.probe_freqs_hz is not None:
            n = np.arange(self.seg_len)
            self._probe_basis = np.exp(-2j * np.pi * np.outer(self.probe_freqs_hz / self.fs, n))
            self._probe_sum = np.zeros(self.probe_freqs_hz.size)

    def add(self, samples):
        """Accumulate one waveform block (n_tx, n_samples); antennas sum."""
        samples = np.atleast_2d(np.asarray(samples, dtype=complex))
        hop = self.seg_len - self.config.overlap
        n_seg = (samples.shape[1] - self.config.overlap) // hop
        if n_seg < 1:
            raise ConfigError("waveform shorter than one PSD segment", field="psd")
        for s in range(n_seg):
            seg = samples[:, s * hop:s * hop + self.seg_len] * self._win
            spec = np.fft.fft(seg, axis=1)
            self._psd_sum += np.sum(np.abs(spec) ** 2, axis=0) / (self.fs * self._win_power)
            if self.probe_freqs_hz is not None:
                vals = seg @ self._probe_basis.T
                self._probe_sum += np.sum(np.abs(vals) ** 2, axis=0) / (self.fs * self._win_power)
            self._segments += 1

    def probe_density(self):
        """Mean exact-frequency density (per Hz) at the probe frequencies."""
        if self.probe_freqs_hz is None or self._segments == 0:
            raise ConfigError("no probe frequencies accumulated", field="psd")
        return self._probe_sum / self._segments

    def finalize(self):
        if self._segments == 0:
            raise ConfigError("no segments accumulated", field="psd")
        mean_psd = self._psd_sum / self._segments
        freqs = np.fft.fftfreq(self.seg_len, d=1.0 / self.fs)
        order = np.argsort(freqs)
        freqs = freqs[order]
        mean_psd = mean_psd[order]

        cfg = self.config
        idx = np.floor(freqs / cfg.bin_hz + 1e-9).astype(int)   # bin i covers [i, i+1) * bin_hz
        uniq = np.arange(idx.min(), idx.max() + 1)
        density = np.zeros(uniq.size)
        counts = np.zeros(uniq.size)
        np.add.at(density, idx - idx.min(), mean_psd)
        np.add.at(counts, idx - idx.min(), 1.0)
        keep = counts > 0
        density = density[keep] / counts[keep]
        centers = (uniq[keep] + 0.5) * cfg.bin_hz
        density_db = cfg.ref_db + _to_db(density / cfg.ref_density)
        return PsdEstimate(freq_hz=centers, density_db=density_db,
                           density_per_hz=density, bin_hz=cfg.bin_hz,
                           sample_rate_hz=self.fs, segments=self._segments,
                           ref_density=cfg.ref_density, ref_db=cfg.ref_db)


def psd_estimate(samples, numerology, config=None, probe_freqs_hz=None):
    """Averaged periodogram of a concatenated CP-OFDM waveform.

    samples: (n_tx, n_samples) at oversample * base rate.  Returns a
    PsdEstimate (summed over antennas); pass probe_freqs_hz to also get the
    exact-frequency densities as (estimate, probe_density) for cross-checks.
    """
    config = config or PsdConfig()
    acc = PsdAccumulator(numerology, config, probe_freqs_hz=probe_freqs_hz)
    acc.add(samples)
    est = acc.finalize()
    if probe_freqs_hz is not None:
        return est, acc.probe_density()
    return est


def kernel_psd_prediction(grids, numerology, oversample, freqs_hz):
    """Ensemble leakage density predicted from the frequency grids.

    Evaluates the leakage rows of the sampling convention actually used by
    the synthesizer (FFT size and CP scaled by the oversampling factor) at
    the probe frequencies and averages |a(nu)^T dbar_j|^2 over symbols and
    antennas, returning a density per Hz comparable to PsdEstimate and
    probe_density values.
    """
    freqs_hz = np.asarray(freqs_hz, dtype=float)
    nu_os = freqs_hz / numerology.scs_hz
    n_os = oversample * numerology.fft_size
    cp_os = oversample * numerology.cp_len
    rows = _kernel_matrix(n_os, cp_os, nu_os)
    fs = oversample * numerology.sample_rate_hz
    seg = n_os + cp_os
    total = np.zeros(freqs_hz.size)
    count = 0
    for grid in grids:
        vals = _grid_values(grid)
        bins_os = np.mod(numerology.active_offsets, n_os)
        act = vals[:, numerology.active_bins]
        proj = np.einsum("mk,jk->mj", rows[:, bins_os], act)
        # The oversampled body is scaled by 1/sqrt(N) of the base FFT, while
        # the kernel rows here carry 1/sqrt(os*N); undo the mismatch.
        total += np.sum(np.abs(proj) ** 2, axis=1) * oversample
        count += 1
    if count == 0:
        raise ConfigError("no grids provided", field="psd")
    return total / count / (fs * seg)


@dataclass(frozen=True)
class AclrReport:
    lower_db: float
    upper_db: float
    worst_db: float


def aclr(psd, carriers):
    """Adjacent-channel leakage ratio from a PSD estimate.

    carriers: {"bw_hz": integration bandwidth, "spacing_hz": adjacent
    carrier offset}.  Returns 10 log10(in-band power / adjacent power) for
    the lower and upper neighbors and their minimum.
    """
    bw = float(carriers["bw_hz"])
    spacing = float(carriers["spacing_hz"])
    if bw <= 0 or spacing <= 0:
        raise ConfigError("carrier bandwidth and spacing must be positive", field="aclr")
    inband = psd.band_power(-bw / 2, bw / 2)
    lower = psd.band_power(-spacing - bw / 2, -spacing + bw / 2)
    upper = psd.band_power(spacing - bw / 2, spacing + bw / 2)
    lower_db = float(_to_db(inband) - _to_db(lower))
    upper_db = float(_to_db(inband) - _to_db(upper))
    return AclrReport(lower_db=lower_db, upper_db=upper_db,
                      worst_db=min(lower_db, upper_db))
