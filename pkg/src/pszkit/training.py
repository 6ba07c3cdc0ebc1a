"""Training loop for one band's filter generator.

Each step draws a fresh batch of listener coordinates, pairs every sample
with a clipped perturbation, evaluates the band objective (psz terms on the
unperturbed sample, consistency across the pair under the same-region
mask), backpropagates through the generator, and applies one optimizer
step. Three independent RNG streams (init / batches / perturbations) keep
the coordinate schedule identical across runs that differ only in
lambda_b or delta, so such runs are directly comparable.
"""

import csv
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import network
from .acoustics import AtfSet, FrequencyGrid, build_atf_set
from .errors import GridError, TrainingDivergedError
from .losses import BandObjective, LossBreakdown, LossWeights, batch_loss_and_grad
from .scene import STACKED_DIM, SceneConfig, clip_to_bounds

LOG_COLUMNS = ("step", "bz", "dz", "gain", "compact", "nc", "total", "mask_rate")


@dataclass
class TrainConfig:
    """Everything one training run needs besides the scene and grid."""

    band: str
    steps: int = 3000
    batch_size: int = 32
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    hidden: tuple[int, ...] = network.DEFAULT_HIDDEN
    encoding: int = network.DEFAULT_ENCODING
    learning_rate: float = 1e-3
    log_every: int = 50
    checkpoint_path: str | None = None
    log_path: str | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise GridError("steps must be >= 1")
        if self.batch_size < 1:
            raise GridError("batch_size must be >= 1")


def sample_batch(rng: np.random.Generator, scene: SceneConfig,
                 batch_size: int) -> np.ndarray:
    """Uniform coordinates over each listener's box, stacked to (B, 4).

    Overlap-regime draws are kept; the loss masks them instead.
    """
    b = scene.bounds.reshape(STACKED_DIM, 2)
    return rng.uniform(b[:, 0], b[:, 1], size=(batch_size, STACKED_DIM))


class CachedAtfProvider:
    """build_atf_set memoized on coordinates quantized to 1 mm.

    Sub-millimeter coordinate differences do not produce meaningfully
    different free-field ATFs, and quantized keys make the cache hit for
    the repeated anchor lookups of evaluation. Bounded so long sweeps
    cannot grow without limit.
    """

    def __init__(self, scene: SceneConfig, grid: FrequencyGrid, maxsize: int = 128):
        self.scene = scene
        self.grid = grid
        self.calls = 0
        self._cached = lru_cache(maxsize=maxsize)(self._build)

    def _build(self, key: tuple[int, ...]) -> AtfSet:
        self.calls += 1
        return build_atf_set(self.scene, np.asarray(key, dtype=float) / 1000.0, self.grid)

    def __call__(self, x) -> AtfSet:
        key = tuple(int(v) for v in np.round(np.asarray(x, dtype=float) * 1000.0))
        return self._cached(key)


def regime_indicators(coords: np.ndarray, d_ov: float) -> np.ndarray:
    """Vectorized overlap-regime indicator r for (B, 4) stacked coordinates."""
    sep = np.linalg.norm(coords[:, :2] - coords[:, 2:], axis=1)
    return (sep > d_ov).astype(float)


def _write_log(path: str, rows: list[dict]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow([row["step"]] + [repr(float(row[c])) for c in LOG_COLUMNS[1:]])


def train(config: TrainConfig, scene: SceneConfig, grid: FrequencyGrid,
          atf_provider=None) -> tuple[network.GeneratorParams, list[dict]]:
    """Train one band's generator; returns final params and the step log.

    Deterministic in (config, scene, grid): identical seeds give identical
    checkpoints. The log holds one LossBreakdown dict per logged step
    (cadence ``log_every``, always including the final step). ``dz`` in the
    log is the regime-masked batch mean.
    """
    if config.band not in grid.filter_lengths:
        raise GridError(f"band {config.band!r} not enabled on this grid")
    if atf_provider is None:
        atf_provider = CachedAtfProvider(scene, grid)
    n_drivers = scene.array.count(config.band)
    objective = BandObjective(grid, config.band, config.weights, n_drivers)

    root = np.random.SeedSequence(config.seed)
    seq_init, seq_batch, seq_delta = root.spawn(3)
    rng_init = np.random.default_rng(seq_init)
    rng_batch = np.random.default_rng(seq_batch)
    rng_delta = np.random.default_rng(seq_delta)

    params = network.init_params(
        config.band, objective.stacked_dim, scene.bounds.reshape(STACKED_DIM, 2),
        rng_init, hidden=config.hidden, encoding=config.encoding)
    state = network.AdamState.for_params(params)
    w = config.weights
    use_nc = w.lambda_b > 0.0

    log: list[dict] = []
    for step in range(1, config.steps + 1):
        coords = sample_batch(rng_batch, scene, config.batch_size)
        regime = regime_indicators(coords, scene.d_ov)
        atfs_in_band = np.stack([
            objective.slice_atfs(atf_provider(c).atfs[config.band]) for c in coords])
        if use_nc:
            # pair each sample with a clipped uniform perturbation
            deltas = rng_delta.uniform(-w.delta, w.delta,
                                       size=(config.batch_size, STACKED_DIM))
            coords_pert = clip_to_bounds(coords + deltas, scene.bounds)
            regime_pert = regime_indicators(coords_pert, scene.d_ov)
            nc_mask = (regime == regime_pert).astype(float)
            stacked_in = np.concatenate([coords, coords_pert])
            out, tape = network.forward(params, stacked_in)
            g, g_pert = out[:config.batch_size], out[config.batch_size:]
            breakdown, grad_g, grad_gp = batch_loss_and_grad(
                objective, g, atfs_in_band, regime, g_pert=g_pert, nc_mask=nc_mask)
            out_adj = np.concatenate([grad_g, grad_gp])
        else:
            g, tape = network.forward(params, coords)
            breakdown, grad_g, _ = batch_loss_and_grad(
                objective, g, atfs_in_band, regime)
            out_adj = grad_g
        if not np.isfinite(breakdown.total):
            raise TrainingDivergedError(
                f"non-finite loss at step {step}: {breakdown}")
        w_grads, b_grads = network.backward(tape, out_adj)
        network.optimizer_step(state, params, w_grads, b_grads,
                               rate=config.learning_rate)
        if step % config.log_every == 0 or step == config.steps or step == 1:
            entry = {"step": step, **_breakdown_dict(breakdown)}
            log.append(entry)

    if config.log_path:
        _write_log(config.log_path, log)
    if config.checkpoint_path:
        extra = {
            "seed": config.seed, "steps": config.steps,
            "batch_size": config.batch_size, "lambda": w.lambda_b,
            "delta": w.delta, "alpha": w.alpha, "beta": w.beta, "gamma": w.gamma,
            "learning_rate": config.learning_rate,
        }
        network.save_checkpoint(params, config.checkpoint_path, extra=extra)
    return params, log


def _breakdown_dict(b: LossBreakdown) -> dict:
    return {"bz": b.bz, "dz": b.dz, "gain": b.gain, "compact": b.compact,
            "nc": b.nc, "total": b.total, "mask_rate": b.mask_rate}
