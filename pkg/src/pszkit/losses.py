"""Loss terms for two-zone filter design plus the neighbor-consistency term.

Four per-sample terms (bright-zone match, dark-zone energy, response-gain
hinge, late-tap compactness) combine with fixed scale factors into the
band objective; a masked mean-squared filter difference between a sample
and its perturbed twin adds the consistency term.

Conventions used throughout:
  - every term is a mean over its own index set, so magnitudes are
    size-independent;
  - programs are driven one audio channel at a time and the per-channel
    terms averaged (incoherent channel accounting);
  - the dark-zone term is multiplied per sample by the overlap-regime
    indicator r (0 disables suppression when listeners overlap).

BandObjective is the vectorized value-and-gradient path used in training;
the standalone functions are the same math one term at a time.
"""

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .acoustics import FrequencyGrid
from .errors import GridError, ShapeError
from .filters import FilterBank, PressureField, stacked_size
from .scene import K_LISTENERS, STACKED_DIM

DEFAULT_G_MAX = {"w": 4.0, "t": 4.0}
DEFAULT_TARGET = 1.0


@dataclass(frozen=True)
class LossWeights:
    """Objective weights. Scale factors are fixed constants of the method."""

    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.5
    lambda_b: float = 0.75
    delta: float = 0.01
    g_max: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_G_MAX))
    eps: float = 1e-9

    SCALE_BZDZ: ClassVar[float] = 1e3
    SCALE_COMPACT: ClassVar[float] = 5.0
    SCALE_NC: ClassVar[float] = 1e3

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ShapeError("alpha must be in [0, 1]")
        if self.beta < 0 or self.gamma < 0 or self.lambda_b < 0:
            raise ShapeError("beta, gamma, lambda_b must be >= 0")
        if self.delta < 0:
            raise ShapeError("delta must be >= 0")
        if any(v <= 0 for v in self.g_max.values()):
            raise ShapeError("g_max must be > 0")
        if self.eps <= 0:
            raise ShapeError("eps must be > 0")


@dataclass(frozen=True)
class LossBreakdown:
    """Raw term values plus the weighted, scaled total.

    For a single sample ``dz`` is the unmasked dark-zone mean and the regime
    factor enters only the total; batch producers store the regime-masked
    batch mean in ``dz`` instead (factor already applied). ``mask_rate`` is
    the fraction of consistency pairs that passed the same-region mask.
    """

    bz: float
    dz: float
    gain: float
    compact: float
    nc: float
    total: float
    mask_rate: float


# ---------------------------------------------------------------------------
# Individual terms
# ---------------------------------------------------------------------------
def _masked_bins(values: np.ndarray, band_mask) -> np.ndarray:
    band_mask = np.asarray(band_mask, dtype=bool)
    if band_mask.ndim != 1 or band_mask.shape[0] != values.shape[-1]:
        raise GridError("band mask length does not match bin count")
    if not band_mask.any():
        raise GridError("band mask selects no bins")
    return values[..., band_mask]


def _target_over_mask(target, n_masked: int, n_bins: int) -> np.ndarray:
    t = np.asarray(target, dtype=float)
    if t.ndim == 0:
        return np.full(n_masked, float(t))
    if t.shape == (n_bins,):
        raise ShapeError("pass the target already restricted to in-band bins")
    if t.shape != (n_masked,):
        raise ShapeError(f"target must be scalar or ({n_masked},)")
    return t


def bright_zone_loss(pressure: PressureField, target, band_mask) -> float:
    """Mean squared magnitude error to the target at the bright listener.

    The bright listener is the field's own program; the mean runs over its
    ears, control points, and in-band bins.
    """
    p = _masked_bins(pressure.values[pressure.program], band_mask)
    t = _target_over_mask(target, p.shape[-1], pressure.values.shape[-1])
    return float(np.mean((np.abs(p) - t) ** 2))


def dark_zone_loss(pressure: PressureField, band_mask) -> float:
    """Mean squared pressure magnitude at every listener other than the program's."""
    dark = [i for i in range(pressure.values.shape[0]) if i != pressure.program]
    p = _masked_bins(pressure.values[dark], band_mask)
    return float(np.mean(np.abs(p) ** 2))


def gain_penalty(responses_in_band, g_max: float) -> float:
    """Mean squared hinge of response magnitudes over the cap.

    ``responses_in_band`` is any complex array already restricted to in-band
    bins; the mean runs over every entry.
    """
    if g_max <= 0:
        raise ShapeError("g_max must be > 0")
    excess = np.maximum(np.abs(responses_in_band) - g_max, 0.0)
    return float(np.mean(excess ** 2))


def compact_window(length: int) -> np.ndarray:
    """Late-tap weighting: zero for n < L/2, then a linear ramp reaching 1 at L-1."""
    if length < 1:
        raise ShapeError("filter length must be >= 1")
    n = np.arange(length, dtype=float)
    half = 0.5 * length
    w = np.zeros(length)
    ramp = n >= half
    if ramp.sum() == 1 or length - 1 <= half:
        w[-1] = 1.0
    else:
        w[ramp] = (n[ramp] - half) / (length - 1 - half)
    return w


def compactness_penalty(bank: FilterBank, window) -> float:
    """Mean over all coefficients of window[n] * tap[n]^2."""
    window = np.asarray(window, dtype=float)
    if window.shape != (bank.length,):
        raise ShapeError(f"window length {window.shape} != filter length {bank.length}")
    if np.any(window < 0) or np.any(np.diff(window) < 0):
        raise ShapeError("window must be nonnegative and nondecreasing")
    return float(np.mean(window * bank.taps ** 2))


# ---------------------------------------------------------------------------
# Consistency term
# ---------------------------------------------------------------------------
def sample_perturbation(rng: np.random.Generator, delta: float,
                        dims: int = STACKED_DIM) -> np.ndarray:
    """I.i.d. uniform draw on [-delta, delta]^dims."""
    if delta < 0:
        raise ShapeError("delta must be >= 0")
    return rng.uniform(-delta, delta, size=dims)


def nc_loss(g, g_pert, mask: int, dim: int) -> tuple[float, int]:
    """One pair's contribution: (mask * ||g - g_pert||^2 / dim, mask)."""
    g = np.asarray(g, dtype=float)
    g_pert = np.asarray(g_pert, dtype=float)
    if g.shape != g_pert.shape:
        raise ShapeError("filter vectors differ in length")
    if mask not in (0, 1):
        raise ShapeError("mask must be 0 or 1")
    num = mask * float(np.sum((g - g_pert) ** 2)) / dim
    return num, mask


def nc_batch(numerators, masks, eps: float) -> float:
    """Batch rule: sum of numerators over (sum of masks + eps)."""
    return float(np.sum(numerators) / (np.sum(masks) + eps))


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------
def total_loss(psz: LossBreakdown, nc: float, lambda_b: float,
               mask_rate: float = 0.0) -> LossBreakdown:
    """Attach the consistency term to a psz-only breakdown.

    lambda_b = 0 returns the psz total untouched, bit for bit.
    """
    total = psz.total
    if lambda_b != 0.0:
        total = total + lambda_b * LossWeights.SCALE_NC * nc
    return LossBreakdown(bz=psz.bz, dz=psz.dz, gain=psz.gain, compact=psz.compact,
                         nc=nc, total=total, mask_rate=mask_rate)


class BandObjective:
    """Vectorized value-and-gradient evaluation of one band's objective.

    Precomputes the in-band DFT matrix so the tap-to-response map and its
    adjoint are explicit linear algebra; gradients are exact (no FFT state).
    Instances are immutable and reusable across steps.
    """

    def __init__(self, grid: FrequencyGrid, band: str, weights: LossWeights,
                 n_drivers: int, target=DEFAULT_TARGET):
        if band not in grid.filter_lengths:
            raise GridError(f"band {band!r} not enabled on this grid")
        self.grid = grid
        self.band = band
        self.weights = weights
        self.n_drivers = int(n_drivers)
        self.length = grid.filter_lengths[band]
        self.bin_idx = grid.band_bins(band)
        self.n_inband = self.bin_idx.size
        self.g_max = weights.g_max[band]
        # explicit in-band DFT matrix: E[f, n] = exp(-2j pi bin_f n / N)
        n = np.arange(self.length)
        self.dft = np.exp(-2j * np.pi * np.outer(self.bin_idx, n) / grid.fft_length)
        self.window = compact_window(self.length)
        self.target = _target_over_mask(target, self.n_inband, grid.n_bins)
        self.stacked_dim = stacked_size(self.n_drivers, self.length)

    def slice_atfs(self, atf_tensor: np.ndarray) -> np.ndarray:
        """Restrict a (..., M, bins) ATF tensor to this band's bins."""
        return atf_tensor[..., self.bin_idx]

    def psz_terms(self, g: np.ndarray, atfs_in_band: np.ndarray, regime,
                  want_grad: bool = True):
        """Per-sample psz term values and the gradient of their batch mean.

        ``g``: (B, D_b) stacked filter vectors; ``atfs_in_band``:
        (B, K, 2, N_e, M, F_in) fixed transfer functions; ``regime``: (B,)
        overlap indicators. Returns (terms, grad) where terms maps
        {bz, dz, gain, compact} to (B,) raw per-sample values (dz unmasked)
        and grad is d(batch psz loss)/dg of shape (B, D_b), including the
        alpha/beta/gamma weights, fixed scales, the per-sample regime factor
        on dz, and the 1/B of the batch mean. grad is None when not wanted.
        """
        w = self.weights
        b_n = g.shape[0]
        if g.shape != (b_n, self.stacked_dim):
            raise ShapeError(f"filter block must be (B, {self.stacked_dim})")
        if atfs_in_band.shape[:1] != (b_n,) or atfs_in_band.shape[-2:] != \
                (self.n_drivers, self.n_inband):
            raise ShapeError("ATF block does not match the objective layout")
        regime = np.asarray(regime, dtype=float)
        taps = g.reshape(b_n, K_LISTENERS, 2, self.n_drivers, self.length)
        resp = taps @ self.dft.T                       # (B, K, 2, M, F)
        # one render per (program j, driving channel p)
        pres = np.einsum("bkcemf,bjpmf->bjpkcef", atfs_in_band, resp)
        mag = np.abs(pres)
        eye = np.eye(K_LISTENERS)
        bright = eye[:, None, :, None, None, None]     # aligns (j, p, k, c, e, f)
        dark = 1.0 - bright
        err = mag - self.target
        n_e = atfs_in_band.shape[3]
        count_bz = K_LISTENERS * 2 * 2 * n_e * self.n_inband
        count_dz = K_LISTENERS * 2 * (K_LISTENERS - 1) * 2 * n_e * self.n_inband
        count_gain = resp[0].size
        axes = tuple(range(1, 7))
        bz = np.sum(bright * err ** 2, axis=axes) / count_bz
        dz = np.sum(dark * mag ** 2, axis=axes) / count_dz
        mag_g = np.abs(resp)
        excess = np.maximum(mag_g - self.g_max, 0.0)
        gain = np.sum(excess ** 2, axis=(1, 2, 3, 4)) / count_gain
        compact = np.sum(self.window * taps ** 2, axis=(1, 2, 3, 4)) / self.stacked_dim
        terms = {"bz": bz, "dz": dz, "gain": gain, "compact": compact}
        if not want_grad:
            return terms, None

        # adjoint of |z|: (dL/d|z|) * z / |z|, zero at the origin
        phase = np.where(mag > 0, pres / np.where(mag > 0, mag, 1.0), 0.0)
        d_mag = bright * err * (2.0 * w.alpha * w.SCALE_BZDZ / (count_bz * b_n))
        d_pres = d_mag * phase
        dz_coef = dark * (2.0 * (1.0 - w.alpha) * w.SCALE_BZDZ / (count_dz * b_n))
        d_pres += dz_coef * regime[:, None, None, None, None, None, None] * pres
        d_resp = np.einsum("bkcemf,bjpkcef->bjpmf", atfs_in_band.conj(), d_pres)
        coef_g = 2.0 * w.beta / (count_gain * b_n)
        phase_g = np.where(excess > 0, resp / np.where(mag_g > 0, mag_g, 1.0), 0.0)
        d_resp += coef_g * excess * phase_g
        d_taps = np.einsum("bjpmf,fn->bjpmn", d_resp.conj(), self.dft).real
        d_taps += (2.0 * w.gamma * w.SCALE_COMPACT /
                   (self.stacked_dim * b_n)) * self.window * taps
        return terms, d_taps.reshape(b_n, self.stacked_dim)


def batch_loss_and_grad(obj: BandObjective, g: np.ndarray, atfs_in_band: np.ndarray,
                        regime, g_pert: np.ndarray | None = None, nc_mask=None,
                        want_grad: bool = True):
    """Full batch objective with optional consistency pairing.

    Returns (LossBreakdown, grad_g, grad_g_pert); gradients are None when
    not requested, and grad_g_pert is None when no perturbed pass was made.
    The consistency term is active only when lambda_b > 0 and ``g_pert``
    is given; the baseline path never touches the pairing machinery.
    """
    w = obj.weights
    terms, grad = obj.psz_terms(g, atfs_in_band, regime, want_grad=want_grad)
    regime = np.asarray(regime, dtype=float)
    bz = float(np.mean(terms["bz"]))
    dz = float(np.mean(regime * terms["dz"]))
    gain = float(np.mean(terms["gain"]))
    compact = float(np.mean(terms["compact"]))
    total = (w.alpha * w.SCALE_BZDZ * bz + (1.0 - w.alpha) * w.SCALE_BZDZ * dz
             + w.beta * gain + w.gamma * w.SCALE_COMPACT * compact)
    nc = 0.0
    mask_rate = 0.0
    grad_pert = None
    if w.lambda_b > 0.0 and g_pert is not None:
        if g_pert.shape != g.shape:
            raise ShapeError("perturbed filter block shape mismatch")
        m = np.asarray(nc_mask, dtype=float)
        if m.shape != (g.shape[0],):
            raise ShapeError("nc_mask must be one indicator per sample")
        diff = g - g_pert
        per_pair = np.sum(diff ** 2, axis=1) / obj.stacked_dim
        denom = float(np.sum(m)) + w.eps
        nc = float(np.sum(m * per_pair) / denom)
        mask_rate = float(np.mean(m))
        total = total + w.lambda_b * w.SCALE_NC * nc
        if want_grad:
            d_pair = (2.0 * w.lambda_b * w.SCALE_NC / (obj.stacked_dim * denom)) \
                * m[:, None] * diff
            grad = grad + d_pair
            grad_pert = -d_pair
    breakdown = LossBreakdown(bz=bz, dz=dz, gain=gain, compact=compact,
                              nc=nc, total=total, mask_rate=mask_rate)
    return breakdown, grad, grad_pert


def psz_loss(g_vector, atfs, band: str, weights: LossWeights, regime: int,
             target=DEFAULT_TARGET) -> LossBreakdown:
    """Single-sample psz breakdown for one band (no consistency term).

    ``dz`` is stored unmasked; the regime factor enters the total. Shares
    the vectorized path with training (batch of one).
    """
    if regime not in (0, 1):
        raise ShapeError("regime must be 0 or 1")
    g_vector = np.asarray(g_vector, dtype=float)
    h = atfs.atfs[band]
    obj = BandObjective(atfs.grid, band, weights, n_drivers=h.shape[3], target=target)
    terms, _ = obj.psz_terms(g_vector[None, :], obj.slice_atfs(h)[None], [regime],
                             want_grad=False)
    w = weights
    bz = float(terms["bz"][0])
    dz = float(terms["dz"][0])
    gain = float(terms["gain"][0])
    compact = float(terms["compact"][0])
    total = (w.alpha * w.SCALE_BZDZ * bz
             + (1.0 - w.alpha) * w.SCALE_BZDZ * dz * regime
             + w.beta * gain + w.gamma * w.SCALE_COMPACT * compact)
    return LossBreakdown(bz=bz, dz=dz, gain=gain, compact=compact,
                         nc=0.0, total=total, mask_rate=0.0)
