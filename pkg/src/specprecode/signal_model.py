"""CP-OFDM signal model: numerology, leakage kernel, QAM grids, synthesis.

One OFDM symbol places complex amplitudes on an N-point FFT grid, applies an
inverse DFT with 1/sqrt(N) scaling, and prepends a cyclic prefix of N_CP
samples.  Leakage of the whole L = N + N_CP sample symbol onto a (generally
fractional) subcarrier frequency nu is the windowed DTFT

    a(nu)^T d,   a(nu)_k = (1/sqrt(N)) * sum_{n=-N_CP}^{N-1} exp(-j*2*pi*(nu-k)*n/N),

whose closed form is a Dirichlet ratio

    a(nu)_k = exp(j*pi*(nu-k)*(N_CP-N+1)/N) * sin(pi*(nu-k)*L/N)
              / (sqrt(N) * sin(pi*(nu-k)/N))

with removable singularities at nu - k = 0 (mod N) where the entry equals
L/sqrt(N).  Rows are evaluated through a reduced offset so the expression is
exact (to roundoff) arbitrarily close to the singular points.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import diric

from .errors import ConfigError

QAM_ORDERS = {"QPSK": 4, "16QAM": 16, "64QAM": 64, "256QAM": 256}

_WAVEFORM_MAGIC = b"SPWF"
_WAVEFORM_VERSION = 1
_WAVEFORM_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class OfdmNumerology:
    """Static description of the OFDM grid.

    Parameters
    ----------
    fft_size : int
        FFT length N.
    cp_len : int
        Cyclic prefix length N_CP, in samples at the base rate.
    scs_hz : float
        Subcarrier spacing in Hz.
    active_offsets : ndarray of int
        Signed subcarrier offsets (relative to DC) that carry data.  All
        other bins are guard bins and stay exactly zero.
    prb_size : int
        Subcarriers per resource block, used when expanding per-block
        error-vector limits.
    """

    fft_size: int
    cp_len: int
    scs_hz: float
    active_offsets: np.ndarray
    prb_size: int = 12

    def __post_init__(self):
        if self.fft_size < 2:
            raise ConfigError("fft_size must be at least 2", field="numerology.fft_size")
        if self.cp_len < 0 or self.cp_len >= self.fft_size:
            raise ConfigError("cp_len must satisfy 0 <= cp_len < fft_size", field="numerology.cp_len")
        if not self.scs_hz > 0:
            raise ConfigError("scs_hz must be positive", field="numerology.scs_hz")
        if self.prb_size < 1:
            raise ConfigError("prb_size must be positive", field="numerology.prb_size")
        offsets = np.asarray(self.active_offsets, dtype=int)
        if offsets.ndim != 1 or offsets.size == 0:
            raise ConfigError("active_offsets must be a non-empty 1-D list", field="numerology.active_offsets")
        if np.unique(offsets).size != offsets.size:
            raise ConfigError("active_offsets contains duplicates", field="numerology.active_offsets")
        half = self.fft_size // 2
        if offsets.min() < -half or offsets.max() > (self.fft_size - 1) // 2:
            raise ConfigError("active_offsets exceed the FFT half-range", field="numerology.active_offsets")
        object.__setattr__(self, "active_offsets", np.sort(offsets))

    @classmethod
    def centered(cls, fft_size, cp_len, scs_hz, n_active, first_offset=None, prb_size=12):
        """Numerology with a contiguous active band.

        When ``first_offset`` is omitted the band is centred on DC with the
        extra bin (for even ``n_active``) on the negative side, giving
        offsets ``-n/2 .. n/2 - 1``.
        """
        if first_offset is None:
            first_offset = -(n_active // 2)
        offsets = np.arange(first_offset, first_offset + n_active)
        return cls(fft_size=fft_size, cp_len=cp_len, scs_hz=scs_hz,
                   active_offsets=offsets, prb_size=prb_size)

    @property
    def symbol_len(self):
        """Samples per symbol including the cyclic prefix."""
        return self.fft_size + self.cp_len

    @property
    def sample_rate_hz(self):
        return self.fft_size * self.scs_hz

    @property
    def n_active(self):
        return int(self.active_offsets.size)

    @property
    def active_bins(self):
        """FFT bin indices (0..N-1) of the active subcarriers, sorted by offset."""
        return np.mod(self.active_offsets, self.fft_size)

    @property
    def occupied_bandwidth_hz(self):
        return self.n_active * self.scs_hz

    def active_mask(self):
        """Boolean length-N mask, True on active bins."""
        mask = np.zeros(self.fft_size, dtype=bool)
        mask[self.active_bins] = True
        return mask

    @property
    def n_prb(self):
        if self.n_active % self.prb_size:
            raise ConfigError("active band is not a whole number of resource blocks",
                              field="numerology.active_offsets")
        return self.n_active // self.prb_size


@dataclass(frozen=True)
class FrequencyGrid:
    """Evaluation frequencies for leakage constraints, in subcarrier units."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        if pts.ndim != 1 or pts.size == 0:
            raise ConfigError("frequency grid must be a non-empty 1-D list", field="frequencies")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_hz(cls, freqs_hz, scs_hz):
        return cls(points=np.asarray(freqs_hz, dtype=float) / scs_hz)

    def to_hz(self, scs_hz):
        return self.points * scs_hz

    @property
    def size(self):
        return int(self.points.size)


def _kernel_matrix(fft_size, cp_len, points):
    """Dirichlet-ratio evaluation of the leakage rows, one row per point."""
    n = fft_size
    length = n + cp_len
    k = np.arange(n)
    delta = np.asarray(points, dtype=float)[:, None] - k[None, :]
    # The row entries are N-periodic in delta; reducing to |delta| <= N/2
    # keeps the sine ratio well conditioned next to the singular points.
    delta = delta - n * np.round(delta / n)
    ratio = length * diric(2.0 * np.pi * delta / n, length)
    phase = np.exp(1j * np.pi * delta * (cp_len - n + 1) / n)
    return phase * ratio / np.sqrt(n)


@dataclass(frozen=True)
class SpectralKernel:
    """Leakage rows a(nu_m)^T stacked into an M x N matrix.

    ``matrix`` holds the full rows over every FFT bin.  ``active_rows`` are
    the same rows with guard-bin columns forced to zero; solvers use those so
    that any update they generate stays supported on the active band.
    """

    matrix: np.ndarray
    freq_grid: FrequencyGrid
    numerology: OfdmNumerology

    @property
    def n_points(self):
        return self.matrix.shape[0]

    @property
    def row_norms_sq(self):
        """Squared 2-norm of each full row."""
        return np.einsum("mk,mk->m", self.matrix, self.matrix.conj()).real

    @property
    def active_rows(self):
        rows = np.zeros_like(self.matrix)
        bins = self.numerology.active_bins
        rows[:, bins] = self.matrix[:, bins]
        return rows

    @property
    def active_row_norms_sq(self):
        rows = self.matrix[:, self.numerology.active_bins]
        return np.einsum("mk,mk->m", rows, rows.conj()).real


def build_kernel(numerology, freq_grid):
    """Evaluate the leakage kernel for ``freq_grid`` under ``numerology``."""
    if not isinstance(freq_grid, FrequencyGrid):
        freq_grid = FrequencyGrid(points=np.asarray(freq_grid, dtype=float))
    matrix = _kernel_matrix(numerology.fft_size, numerology.cp_len, freq_grid.points)
    return SpectralKernel(matrix=matrix, freq_grid=freq_grid, numerology=numerology)


def kernel_row(numerology, point):
    """Single leakage row a(nu)^T as a length-N vector."""
    return _kernel_matrix(numerology.fft_size, numerology.cp_len, [float(point)])[0]


@dataclass(frozen=True)
class DataGrid:
    """Per-antenna frequency-domain symbols, shape (n_tx, fft_size).

    Guard bins are exactly zero; that invariant is checked on construction
    and every precoder in this package preserves it.
    """

    symbols: np.ndarray
    numerology: OfdmNumerology

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=complex)
        if sym.ndim == 1:
            sym = sym[None, :]
        if sym.ndim != 2 or sym.shape[1] != self.numerology.fft_size:
            raise ConfigError("data grid must be (n_tx, fft_size)", field="grid")
        guard = ~self.numerology.active_mask()
        if sym[:, guard].any():
            raise ConfigError("guard bins of a data grid must be exactly zero", field="grid")
        object.__setattr__(self, "symbols", sym)

    @property
    def n_tx(self):
        return self.symbols.shape[0]

    def with_symbols(self, symbols):
        return replace(self, symbols=symbols)

    def active_values(self):
        """The (n_tx, n_active) block of amplitudes on active bins."""
        return self.symbols[:, self.numerology.active_bins]

    def power(self):
        """Total squared magnitude over the grid."""
        return float(np.vdot(self.symbols, self.symbols).real)


def qam_constellation(name):
    """Unit-average-power square QAM with Gray labelling on each axis.

    Returns the (order,) array of points indexed by symbol integer; the two
    halves of the integer's bits select the in-phase and quadrature level.
    """
    if name not in QAM_ORDERS:
        raise ConfigError(f"unknown constellation {name!r}; choose from {sorted(QAM_ORDERS)}",
                          field="constellation")
    order = QAM_ORDERS[name]
    side = int(round(np.sqrt(order)))
    bits_per_axis = side.bit_length() - 1
    idx = np.arange(side)
    levels = 2 * idx - (side - 1)
    # Gray label of the i-th amplitude level is i ^ (i >> 1); invert so that
    # a label selects its level and adjacent levels differ in one bit.
    level_for_label = np.empty(side, dtype=float)
    level_for_label[idx ^ (idx >> 1)] = levels
    s = np.arange(order)
    i_level = level_for_label[s >> bits_per_axis]
    q_level = level_for_label[s & (side - 1)]
    scale = np.sqrt(3.0 / (2.0 * (order - 1)))
    return (i_level + 1j * q_level) * scale


def generate_qam_grid(seed, numerology, n_tx, constellation, symbol_index=0):
    """Draw one i.i.d. QAM data grid.

    The stream is a counter-based generator keyed by ``seed`` with
    ``symbol_index`` in the counter, so any symbol of a run can be
    regenerated independently and the draw for (seed, symbol) never depends
    on how many symbols were produced before it.
    """
    if n_tx < 1:
        raise ConfigError("n_tx must be at least 1", field="n_tx")
    points = qam_constellation(constellation)
    rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, symbol_index]))
    draws = rng.integers(0, points.size, size=(n_tx, numerology.n_active))
    symbols = np.zeros((n_tx, numerology.fft_size), dtype=complex)
    symbols[:, numerology.active_bins] = points[draws]
    return DataGrid(symbols=symbols, numerology=numerology)


def synthesize_time_signal(grid, oversample=1):
    """CP-OFDM synthesis of one symbol per antenna.

    Returns an (n_tx, oversample * (N + N_CP)) complex array: the inverse DFT
    of the grid with 1/sqrt(N) scaling, oversampled by zero padding the
    spectrum, with the cyclic prefix prepended.  At ``oversample=1`` sample n
    of the body is (1/sqrt(N)) * sum_k d_k exp(j*2*pi*k*n/N).
    """
    if oversample < 1 or int(oversample) != oversample:
        raise ConfigError("oversample must be a positive integer", field="oversample")
    num = grid.numerology
    n = num.fft_size
    n_os = oversample * n
    spec = np.zeros((grid.n_tx, n_os), dtype=complex)
    bins_os = np.mod(num.active_offsets, n_os)
    spec[:, bins_os] = grid.symbols[:, num.active_bins]
    body = np.fft.ifft(spec, axis=1) * (n_os / np.sqrt(n))
    cp = body[:, n_os - oversample * num.cp_len:]
    return np.concatenate([cp, body], axis=1)


def write_waveform(path, samples):
    """Write complex streams as little-endian float64 (re, im) pairs.

    Layout: 16-byte header (magic ``SPWF``, format version, stream count,
    samples per stream) followed by the streams row-major.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=complex))
    n_streams, n_samples = samples.shape
    interleaved = np.empty((n_streams, n_samples, 2), dtype="<f8")
    interleaved[..., 0] = samples.real
    interleaved[..., 1] = samples.imag
    with open(path, "wb") as fh:
        fh.write(_WAVEFORM_HEADER.pack(_WAVEFORM_MAGIC, _WAVEFORM_VERSION, n_streams, n_samples))
        fh.write(interleaved.tobytes())


def read_waveform(path):
    """Inverse of :func:`write_waveform`; returns (n_streams, n_samples) complex."""
    with open(path, "rb") as fh:
        header = fh.read(_WAVEFORM_HEADER.size)
        magic, version, n_streams, n_samples = _WAVEFORM_HEADER.unpack(header)
        if magic != _WAVEFORM_MAGIC:
            raise ConfigError("not a waveform file (bad magic)", field="waveform")
        if version != _WAVEFORM_VERSION:
            raise ConfigError(f"unsupported waveform version {version}", field="waveform")
        raw = np.frombuffer(fh.read(n_streams * n_samples * 16), dtype="<f8")
    pairs = raw.reshape(n_streams, n_samples, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]
