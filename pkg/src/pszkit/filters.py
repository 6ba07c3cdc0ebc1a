"""FIR filter banks, the stacked coefficient layout, and pressure rendering.

One FilterBank holds a single band's filters for every (program k, audio
channel c, driver m). The canonical stacked vector flattens taps in C order
over (k, c, m, n) with channel L before R; its length is
D_b = 2 * K * M_b * L_b.

Rendering has two routes: a frequency-domain product over DFT bins (fast
path used everywhere) and a direct time-domain convolution chain (oracle).
On the shared DFT grid the two agree because the frequency product is the
circular convolution of one RIR period.
"""

from dataclasses import dataclass

import numpy as np

from . import binio
from .acoustics import AtfSet, FrequencyGrid
from .errors import GridError, ShapeError
from .scene import K_LISTENERS

CHANNELS = ("L", "R")

_BANK_KIND = "filter_bank"
_BANK_VERSION = 1


@dataclass(frozen=True)
class FilterBank:
    """One band's FIR taps, shape (K, 2, M, L): program, channel, driver, tap."""

    band: str
    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim != 4:
            raise ShapeError("taps must be (K, 2, M, L)")
        if taps.shape[0] != K_LISTENERS or taps.shape[1] != 2:
            raise ShapeError(f"taps must be ({K_LISTENERS}, 2, M, L), got {taps.shape}")
        if taps.shape[2] < 1 or taps.shape[3] < 1:
            raise ShapeError("need at least one driver and one tap")
        if not np.all(np.isfinite(taps)):
            raise ShapeError("non-finite filter taps")
        object.__setattr__(self, "taps", taps)

    @property
    def n_drivers(self) -> int:
        return self.taps.shape[2]

    @property
    def length(self) -> int:
        return self.taps.shape[3]

    @property
    def stacked_size(self) -> int:
        """D_b = 2 * K * M * L."""
        return self.taps.size


@dataclass(frozen=True)
class PressureField:
    """Complex ear pressures (K, 2, N_e, bins) for one program and channel set."""

    values: np.ndarray
    program: int
    channels: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 4 or v.shape[0] != K_LISTENERS or v.shape[1] != 2:
            raise ShapeError("pressure values must be (K, 2, N_e, bins)")
        if not np.all(np.isfinite(v)):
            raise ShapeError("non-finite pressure values")


# ---------------------------------------------------------------------------
# Stacked layout
# ---------------------------------------------------------------------------
def stacked_size(n_drivers: int, filter_length: int, n_programs: int = K_LISTENERS) -> int:
    """Coefficient count D_b = 2 * K * M * L of one band's stacked vector."""
    return 2 * n_programs * n_drivers * filter_length


def pack(bank: FilterBank) -> np.ndarray:
    """Flatten taps to the stacked vector (C order over k, c, m, n)."""
    return bank.taps.reshape(-1).copy()


def unpack(vector, band: str, n_drivers: int, filter_length: int) -> FilterBank:
    """Inverse of pack. Raises on length mismatch."""
    vector = np.asarray(vector, dtype=float)
    expected = stacked_size(n_drivers, filter_length)
    if vector.shape != (expected,):
        raise ShapeError(
            f"stacked vector has {vector.size} coefficients, expected {expected}")
    return FilterBank(band=band,
                      taps=vector.reshape(K_LISTENERS, 2, n_drivers, filter_length))


# ---------------------------------------------------------------------------
# Frequency responses and rendering
# ---------------------------------------------------------------------------
def frequency_response(bank: FilterBank, grid: FrequencyGrid) -> np.ndarray:
    """Zero-padded DFT of the taps on the grid bins: (K, 2, M, n_bins) complex."""
    if grid.fft_length < bank.length:
        raise GridError(
            f"fft_length {grid.fft_length} shorter than filter length {bank.length}")
    return np.fft.rfft(bank.taps, n=grid.fft_length, axis=-1)


def _check_band_compat(atfs: AtfSet, banks: dict[str, FilterBank]) -> None:
    for band, bank in banks.items():
        if band not in atfs.atfs:
            raise GridError(f"band {band!r} has filters but no ATFs")
        if band in atfs.grid.filter_lengths and bank.length != atfs.grid.filter_lengths[band]:
            raise GridError(
                f"band {band!r}: filter length {bank.length} does not match "
                f"grid's {atfs.grid.filter_lengths[band]}")
        if bank.n_drivers != atfs.atfs[band].shape[3]:
            raise ShapeError(
                f"band {band!r}: {bank.n_drivers} filters vs "
                f"{atfs.atfs[band].shape[3]} ATF drivers")


def _channel_indices(channels) -> list[int]:
    idx = []
    for ch in channels:
        if ch not in CHANNELS:
            raise ShapeError(f"unknown channel {ch!r}")
        idx.append(CHANNELS.index(ch))
    if not idx:
        raise ShapeError("channel set must be nonempty")
    return idx


def render_pressure_freq(atfs: AtfSet, banks: dict[str, FilterBank],
                         program: int, channels=CHANNELS) -> PressureField:
    """Ear pressures for one program with unit input on the given channels.

    P[k, c, e, f] = sum over bands b, drivers m, requested channels c' of
    H_b[k, c, e, m, f] * G_b[program, c', m, f]. Multiple channels add
    coherently here; energy metrics render channels one at a time instead.
    """
    if not 0 <= program < K_LISTENERS:
        raise ShapeError(f"program must be in [0, {K_LISTENERS})")
    _check_band_compat(atfs, banks)
    ch_idx = _channel_indices(channels)
    grid = atfs.grid
    total = np.zeros((K_LISTENERS, 2, atfs.n_points, grid.n_bins), dtype=complex)
    for band, bank in banks.items():
        resp = frequency_response(bank, grid)            # (K, 2, M, F)
        drive = resp[program, ch_idx].sum(axis=0)        # (M, F)
        total += np.einsum("kcemf,mf->kcef", atfs.atfs[band], drive)
    return PressureField(values=total, program=program,
                         channels=tuple(channels))


def render_pressure_time(rirs: dict[str, np.ndarray], banks: dict[str, FilterBank],
                         program: int, probe, channels=CHANNELS) -> np.ndarray:
    """Direct convolution oracle: probe -> filters -> RIRs -> ear signals.

    ``rirs[band]`` is a real (K, 2, N_e, M, T_b) array of impulse responses.
    Returns real sequences (K, 2, N_e, T_out) where T_out covers the longest
    band's full linear convolution. Slow by design; used for verification.
    """
    probe = np.asarray(probe, dtype=float)
    if probe.ndim != 1 or probe.size < 1:
        raise ShapeError("probe must be a nonempty 1-D sequence")
    ch_idx = _channel_indices(channels)
    shapes = set()
    lengths = []
    for band, bank in banks.items():
        if band not in rirs:
            raise GridError(f"band {band!r} has filters but no RIRs")
        h = rirs[band]
        shapes.add(h.shape[:3])
        lengths.append(probe.size + bank.length - 1 + h.shape[4] - 1)
    if len(shapes) != 1:
        raise ShapeError("RIR banks disagree on (K, 2, N_e)")
    k_n, c_n, e_n = shapes.pop()
    t_out = max(lengths)
    out = np.zeros((k_n, c_n, e_n, t_out))
    for band, bank in banks.items():
        h = rirs[band]
        for ci in ch_idx:
            for m in range(bank.n_drivers):
                v = np.convolve(probe, bank.taps[program, ci, m])  # drive signal
                for k in range(k_n):
                    for c in range(c_n):
                        for e in range(e_n):
                            y = np.convolve(v, h[k, c, e, m])
                            out[k, c, e, :y.size] += y
    return out


def fold_periodic(signal, n: int) -> np.ndarray:
    """Wrap a sequence modulo n (overlap-add), giving one circular period.

    Relates the linear-convolution oracle to the DFT product: the folded
    time render has exactly the spectrum H*G on the length-n grid.
    """
    signal = np.asarray(signal)
    t = signal.shape[-1]
    pad = (-t) % n
    padded = np.concatenate(
        [signal, np.zeros(signal.shape[:-1] + (pad,), dtype=signal.dtype)], axis=-1)
    return padded.reshape(signal.shape[:-1] + (-1, n)).sum(axis=-2)


# ---------------------------------------------------------------------------
# Container IO
# ---------------------------------------------------------------------------
def save_filter_bank(path: str, bank: FilterBank) -> None:
    """Write a FilterBank to the binary container format."""
    meta = {"band": bank.band, "n_drivers": bank.n_drivers, "length": bank.length}
    binio.write_container(path, _BANK_KIND, _BANK_VERSION, meta,
                          {"taps": bank.taps})


def load_filter_bank(path: str) -> FilterBank:
    """Read a FilterBank written by save_filter_bank."""
    header, arrays = binio.read_container(path, kind=_BANK_KIND, version=_BANK_VERSION)
    return FilterBank(band=header["meta"]["band"], taps=arrays["taps"])
