"""Frequency grid and free-field acoustic transfer functions.

ATFs are complex responses from every driver to every ear control point,
sampled on the non-negative half of a DFT grid. The acoustic model is a
free-field monopole: no reflections, no directivity. Room effects are out
of scope; measured ATF sets can be swapped in through the binary container.
"""

from dataclasses import dataclass, field

import numpy as np

from . import binio
from .errors import GeometryError, GridError
from .scene import K_LISTENERS, STACKED_DIM, SceneConfig, ear_points, listener_center

SPEED_OF_SOUND = 343.0

DEFAULT_BAND_EDGES = {"w": (100.0, 2000.0), "t": (2000.0, 20000.0)}
DEFAULT_FILTER_LENGTHS = {"w": 512, "t": 256}

_ATF_KIND = "atf_set"
_ATF_VERSION = 1


@dataclass(frozen=True)
class FrequencyGrid:
    """DFT bin grid shared by filters, ATFs, losses, and metrics.

    ``filter_lengths`` names the enabled bands and their FIR lengths;
    ``band_edges`` gives each band's frequency interval in Hz. The band
    holding the lower edge of a shared crossover point owns that bin: the
    lowest band's mask is closed on both ends, every later band is open at
    its low edge. With the defaults, the 2000 Hz bin belongs to the woofer.
    """

    sample_rate: float = 48000.0
    fft_length: int = 4096
    filter_lengths: dict[str, int] = field(
        default_factory=lambda: dict(DEFAULT_FILTER_LENGTHS))
    band_edges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BAND_EDGES))

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise GridError("sample_rate must be > 0")
        if self.fft_length < 2:
            raise GridError("fft_length must be >= 2")
        if not self.filter_lengths:
            raise GridError("at least one band must be enabled")
        for band, length in self.filter_lengths.items():
            if band not in self.band_edges:
                raise GridError(f"band {band!r} has no band_edges entry")
            if length < 1:
                raise GridError(f"band {band!r}: filter length must be >= 1")
            if self.fft_length < 2 * length:
                raise GridError(
                    f"fft_length {self.fft_length} < 2 * filter length {length} "
                    f"for band {band!r}")
        masks = self._compute_masks()
        stacked = np.stack([masks[b] for b in self.bands])
        if np.any(stacked.sum(axis=0) > 1):
            raise GridError("band masks overlap")
        for band in self.bands:
            if not masks[band].any():
                raise GridError(f"band {band!r} has no bins inside its edges")

    @property
    def bands(self) -> tuple[str, ...]:
        """Enabled bands, ordered by low band edge (woofer before tweeter)."""
        return tuple(sorted(self.filter_lengths, key=lambda b: self.band_edges[b][0]))

    @property
    def bins(self) -> np.ndarray:
        """Bin center frequencies in Hz, strictly increasing from 0."""
        return np.fft.rfftfreq(self.fft_length, d=1.0 / self.sample_rate)

    @property
    def n_bins(self) -> int:
        return self.fft_length // 2 + 1

    def _compute_masks(self) -> dict[str, np.ndarray]:
        bins = self.bins
        order = sorted(self.filter_lengths, key=lambda b: self.band_edges[b][0])
        masks = {}
        for i, band in enumerate(order):
            lo, hi = self.band_edges[band]
            if lo >= hi:
                raise GridError(f"band {band!r}: edges must satisfy lo < hi")
            low_ok = bins >= lo if i == 0 else bins > lo
            masks[band] = low_ok & (bins <= hi)
        return masks

    @property
    def band_masks(self) -> dict[str, np.ndarray]:
        """Boolean in-band mask over bins for each enabled band."""
        return self._compute_masks()

    def band_bins(self, band: str) -> np.ndarray:
        """Integer bin indices inside ``band``."""
        if band not in self.filter_lengths:
            raise GridError(f"band {band!r} not enabled")
        return np.flatnonzero(self.band_masks[band])

    @property
    def full_mask(self) -> np.ndarray:
        """Union of the enabled bands' masks (full evaluation range)."""
        masks = self.band_masks
        out = np.zeros(self.n_bins, dtype=bool)
        for band in self.bands:
            out |= masks[band]
        return out


# ---------------------------------------------------------------------------
# Free-field model
# ---------------------------------------------------------------------------
def point_source_response(src, rcv, f, c_sound: float = SPEED_OF_SOUND):
    """Monopole response e^{-j 2 pi f r / c} / (4 pi r) from src to rcv.

    Vectorized over ``f``; returns a complex scalar for scalar ``f``.
    """
    src = np.asarray(src, dtype=float)
    rcv = np.asarray(rcv, dtype=float)
    r = float(np.linalg.norm(src - rcv))
    if r == 0.0:
        raise GeometryError("degenerate geometry: source and receiver coincide")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise GridError("frequency must be >= 0")
    out = np.exp(-2j * np.pi * f * r / c_sound) / (4.0 * np.pi * r)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AtfSet:
    """Per-band complex ATF tensors [k, c, e, m, bin] plus their coordinates.

    ``coords`` records the stacked listener positions the set was built
    from; decoupled evaluation relies on this bookkeeping.
    """

    grid: FrequencyGrid
    coords: np.ndarray
    atfs: dict[str, np.ndarray]

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (STACKED_DIM,):
            raise GeometryError("coords must be a stacked 4-vector")
        object.__setattr__(self, "coords", coords)
        for band, h in self.atfs.items():
            if h.ndim != 5 or h.shape[0] != K_LISTENERS or h.shape[1] != 2:
                raise GridError(f"band {band!r}: ATF tensor must be (K, 2, N_e, M, bins)")
            if h.shape[4] != self.grid.n_bins:
                raise GridError(f"band {band!r}: ATF bin count does not match grid")
            if not np.all(np.isfinite(h)):
                raise GridError(f"band {band!r}: non-finite ATF entries")

    @property
    def n_points(self) -> int:
        return next(iter(self.atfs.values())).shape[2]


def build_atf_set(scene: SceneConfig, x, grid: FrequencyGrid,
                  c_sound: float = SPEED_OF_SOUND) -> AtfSet:
    """Free-field ATFs from every driver of every enabled band to every ear point.

    Deterministic in its inputs. Raises on coincident driver/point pairs.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (STACKED_DIM,):
        raise GeometryError("x must be a stacked 4-vector")
    points = np.stack([
        ear_points(listener_center(x, k), scene.head) for k in range(K_LISTENERS)
    ])  # (K, 2, N_e, 2)
    bins = grid.bins
    atfs = {}
    for band in grid.bands:
        drivers = scene.array.positions[band]          # (M, 2)
        diff = points[..., None, :] - drivers          # (K, 2, N_e, M, 2)
        r = np.linalg.norm(diff, axis=-1)              # (K, 2, N_e, M)
        if np.any(r == 0.0):
            raise GeometryError(
                f"degenerate geometry: band {band!r} driver coincides with a control point")
        phase = -2j * np.pi * bins * (r[..., None] / c_sound)
        atfs[band] = np.exp(phase) / (4.0 * np.pi * r[..., None])
    return AtfSet(grid=grid, coords=x, atfs=atfs)


def atf_to_impulse_response(spectrum, grid: FrequencyGrid) -> np.ndarray:
    """Real impulse response of a spectrum given on the non-negative DFT grid.

    Inverse real DFT with Hermitian extension; output length is
    ``grid.fft_length``. Works on any leading batch shape.
    """
    spectrum = np.asarray(spectrum)
    if spectrum.shape[-1] != grid.n_bins:
        raise GridError("spectrum bin count does not match grid")
    return np.fft.irfft(spectrum, n=grid.fft_length, axis=-1)


# ---------------------------------------------------------------------------
# Container IO
# ---------------------------------------------------------------------------
def save_atf_set(path: str, atfs: AtfSet) -> None:
    """Write an AtfSet to the binary container format."""
    g = atfs.grid
    meta = {
        "sample_rate": g.sample_rate,
        "fft_length": g.fft_length,
        "filter_lengths": g.filter_lengths,
        "band_edges": {b: list(e) for b, e in g.band_edges.items()},
        "bands": list(atfs.atfs.keys()),
    }
    arrays = {"coords": atfs.coords}
    for band, h in atfs.atfs.items():
        arrays[f"atf_{band}"] = h
    binio.write_container(path, _ATF_KIND, _ATF_VERSION, meta, arrays)


def load_atf_set(path: str) -> AtfSet:
    """Read an AtfSet written by save_atf_set."""
    header, arrays = binio.read_container(path, kind=_ATF_KIND, version=_ATF_VERSION)
    meta = header["meta"]
    grid = FrequencyGrid(
        sample_rate=float(meta["sample_rate"]),
        fft_length=int(meta["fft_length"]),
        filter_lengths={b: int(v) for b, v in meta["filter_lengths"].items()},
        band_edges={b: (float(e[0]), float(e[1])) for b, e in meta["band_edges"].items()},
    )
    atfs = {band: arrays[f"atf_{band}"] for band in meta["bands"]}
    return AtfSet(grid=grid, coords=arrays["coords"], atfs=atfs)
