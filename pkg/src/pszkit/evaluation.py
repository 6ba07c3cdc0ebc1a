"""Robustness evaluation around anchors under coordinate perturbation.

The protocol is decoupled: physical transfer functions stay fixed at the
anchor while the generator is driven by perturbed coordinates, so any
metric change is attributable to the coordinate-to-filter mapping alone.
Per-point isolation metrics aggregate into neighborhood quality summaries
(median plus a lower bound) and stability summaries (metric variation per
meter over the 4-neighbor grid graph).
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import network
from .acoustics import AtfSet, FrequencyGrid, build_atf_set
from .errors import EvaluationError, GridError
from .filters import CHANNELS, render_pressure_freq, unpack
from .scene import K_LISTENERS, STACKED_DIM, SceneConfig, stack_coords

DB_FLOOR = -300.0
METRICS = ("izi", "ipi")


@dataclass(frozen=True)
class EvalProtocol:
    """Knobs of one neighborhood evaluation.

    ``listeners`` are 1-based labels as they appear in reports. With
    ``full_band`` the metrics aggregate over the union of enabled bands
    under a single "full" label instead of per band.
    """

    r_max: float = 0.10
    spacing: float = 0.01
    summary_mode: str = "cvar10"
    full_band: bool = False
    listeners: tuple[int, ...] = (2,)
    eps: float = 1e-9

    def __post_init__(self):
        if self.summary_mode not in ("cvar10", "min"):
            raise EvaluationError(f"unknown summary mode {self.summary_mode!r}")
        if not self.listeners or any(not 1 <= l <= K_LISTENERS for l in self.listeners):
            raise EvaluationError("listeners must be 1-based labels")


@dataclass(frozen=True)
class EnergyTriple:
    """Per-listener, per-bin energies: own program, others', and leaked-out."""

    e_tar: np.ndarray
    e_int: np.ndarray
    e_leak: np.ndarray

    def __post_init__(self):
        for name in ("e_tar", "e_int", "e_leak"):
            v = getattr(self, name)
            if v.shape != self.e_tar.shape:
                raise EvaluationError("energy arrays must share one shape")
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise EvaluationError(f"{name} must be finite and nonnegative")


@dataclass(frozen=True)
class SummaryStats:
    median: float
    lower: float
    mode: str
    sigma_mean: float
    sigma_rms: float


@dataclass(frozen=True)
class NeighborhoodReport:
    """Per-point metric values around one anchor plus their summaries.

    ``values`` and ``summaries`` are keyed by (metric, listener label,
    band label); per-point arrays follow the row-major grid order of
    ``points``.
    """

    anchor: np.ndarray
    points: np.ndarray
    offsets: np.ndarray
    grid_shape: tuple[int, int]
    values: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)
    edge_count: int = 0
    mode: str = "cvar10"


# ---------------------------------------------------------------------------
# Perturbation grid
# ---------------------------------------------------------------------------
def offset_values(r_max: float, spacing: float) -> np.ndarray:
    """Symmetric offsets -r_max..r_max in steps of spacing."""
    if r_max < 0:
        raise GridError("r_max must be >= 0")
    if r_max == 0.0:
        return np.zeros(1)
    if spacing <= 0:
        raise GridError("spacing must be > 0")
    n = 2.0 * r_max / spacing
    n_round = round(n)
    if n_round < 1 or abs(n - n_round) > 1e-9:
        raise GridError(f"spacing {spacing} does not evenly divide the span {2 * r_max}")
    return (np.arange(n_round + 1) - n_round / 2.0) * spacing


def perturbed_grid(anchor, r_max: float, spacing: float) -> np.ndarray:
    """Square offset grid applied to Listener 2 only, row-major, (N, 4).

    Rows sweep the x offset, columns the y offset; Listener 1 components
    are copied unchanged into every point.
    """
    anchor = np.asarray(anchor, dtype=float)
    if anchor.shape != (STACKED_DIM,):
        raise GridError("anchor must be a stacked 4-vector")
    vals = offset_values(r_max, spacing)
    dx, dy = np.meshgrid(vals, vals, indexing="ij")
    offsets = np.column_stack([dx.ravel(), dy.ravel()])
    points = np.tile(anchor, (offsets.shape[0], 1))
    points[:, 2:] += offsets
    return points


def build_neighbor_edges(shape: tuple[int, int], spacing: float
                         ) -> tuple[np.ndarray, np.ndarray]:
    """4-neighbor adjacencies of a rows-by-cols grid, flattened row-major.

    Returns (edges, distances): edges is (E, 2) index pairs, each stored
    once; every distance equals ``spacing``.
    """
    rows, cols = int(shape[0]), int(shape[1])
    if rows < 1 or cols < 1:
        raise GridError("grid must have at least one point per axis")
    idx = np.arange(rows * cols).reshape(rows, cols)
    pairs = []
    if cols > 1:
        pairs.append(np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()]))
    if rows > 1:
        pairs.append(np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()]))
    edges = np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=int)
    return edges, np.full(edges.shape[0], float(spacing))


# ---------------------------------------------------------------------------
# Decoupled point evaluation
# ---------------------------------------------------------------------------
def decoupled_point_eval(atfs: AtfSet, generators: dict, x_hat,
                         forward_fn=None) -> EnergyTriple:
    """Energies at every listener with filters generated from ``x_hat``.

    ``atfs`` stays fixed at its own anchor coordinates; only the generator
    sees ``x_hat``. Per listener k and bin: e_tar sums program k's squared
    pressure magnitudes at listener k over ears, control points, and both
    independently driven audio channels; e_int sums the other programs'
    energy at listener k; e_leak sums program k's energy at the other
    listeners.
    """
    if forward_fn is None:
        forward_fn = network.forward
    grid = atfs.grid
    banks = {}
    for band, params in generators.items():
        if band not in atfs.atfs:
            raise GridError(f"generator band {band!r} missing from the ATF set")
        vec, _ = forward_fn(params, np.asarray(x_hat, dtype=float))
        banks[band] = unpack(vec, band, atfs.atfs[band].shape[3],
                             grid.filter_lengths[band])
    # energy[j, k, f]: program j driven one channel at a time, incoherent sum
    energy = np.zeros((K_LISTENERS, K_LISTENERS, grid.n_bins))
    for j in range(K_LISTENERS):
        for ch in CHANNELS:
            p = render_pressure_freq(atfs, banks, j, channels=(ch,))
            energy[j] += np.sum(np.abs(p.values) ** 2, axis=(1, 2))
    k_idx = np.arange(K_LISTENERS)
    e_tar = energy[k_idx, k_idx]
    e_int = energy.sum(axis=0)[k_idx] - e_tar
    e_leak = energy.sum(axis=1)[k_idx] - e_tar
    return EnergyTriple(e_tar=e_tar, e_int=e_int, e_leak=e_leak)


def izi(e_tar, e_leak, eps: float = 1e-9, floor: float = DB_FLOOR) -> np.ndarray:
    """Isolation of a program's own zone: 10 log10(e_tar / (e_leak + eps)) dB.

    Zero target energy gives -inf, clamped to ``floor``.
    """
    ratio = np.asarray(e_tar, dtype=float) / (np.asarray(e_leak, dtype=float) + eps)
    with np.errstate(divide="ignore"):
        return np.maximum(10.0 * np.log10(ratio), floor)


def ipi(e_tar, e_int, eps: float = 1e-9, floor: float = DB_FLOOR) -> np.ndarray:
    """Isolation from other programs at a listener; same form as izi."""
    return izi(e_tar, e_int, eps=eps, floor=floor)


def band_logmean(q_db, mask) -> float:
    """Arithmetic mean of per-bin dB values over the masked bins."""
    q_db = np.asarray(q_db, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != q_db.shape[-1:]:
        raise GridError("mask length does not match bin count")
    if not mask.any():
        raise GridError("band mask selects no bins")
    return float(np.mean(q_db[..., mask]))


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------
def quality_summaries(values, mode: str) -> tuple[float, float]:
    """(median, lower bound); the bound is the min or the mean of the
    smallest ceil(N/10) values depending on ``mode``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EvaluationError("no values to summarize")
    med = float(np.median(values))
    if mode == "min":
        return med, float(values.min())
    if mode == "cvar10":
        k = int(np.ceil(0.1 * values.size))
        tail = np.sort(values)[:k]
        return med, float(tail.mean())
    raise EvaluationError(f"unknown summary mode {mode!r}")


def stability_stats(values, edges, distances) -> tuple[float, float]:
    """Mean and RMS of |q_i - q_j| / d_ij over the neighbor edges (dB/m)."""
    values = np.asarray(values, dtype=float)
    edges = np.asarray(edges, dtype=int)
    if edges.size == 0:
        raise EvaluationError("edge set is empty")
    rates = np.abs(values[edges[:, 0]] - values[edges[:, 1]]) / np.asarray(distances)
    return float(rates.mean()), float(np.sqrt(np.mean(rates ** 2)))


def improvement(base: float, nc: float, kind: str, eps: float = 1e-9) -> float:
    """Percent change, signed so positive is always better.

    Quality metrics improve upward, stability (variation rates) improve
    downward.
    """
    if kind == "quality":
        return 100.0 * (nc - base) / (abs(base) + eps)
    if kind == "stability":
        return 100.0 * (base - nc) / (base + eps)
    raise EvaluationError(f"unknown improvement kind {kind!r}")


# ---------------------------------------------------------------------------
# Neighborhood protocol
# ---------------------------------------------------------------------------
def admissible_anchor(anchor, d_ov: float, r_max: float) -> bool:
    """Separation strictly clears d_ov plus the grid's worst-case reach."""
    anchor = np.asarray(anchor, dtype=float)
    sep = float(np.linalg.norm(anchor[:2] - anchor[2:]))
    return sep > d_ov + np.sqrt(2.0) * r_max


def _metric_bands(grid: FrequencyGrid, protocol: EvalProtocol,
                  covered: set) -> dict[str, np.ndarray]:
    """Masks to aggregate over, limited to bands the generators can drive."""
    bands = [b for b in grid.bands if b in covered]
    if not bands:
        raise EvaluationError("no generator covers any enabled band")
    masks = grid.band_masks
    if protocol.full_band:
        union = np.zeros(grid.n_bins, dtype=bool)
        for b in bands:
            union |= masks[b]
        return {"full": union}
    return {b: masks[b] for b in bands}


def evaluate_neighborhood(anchor, generators: dict, scene: SceneConfig,
                          grid: FrequencyGrid, protocol: EvalProtocol,
                          atf_builder=None, forward_fn=None) -> NeighborhoodReport:
    """Evaluate one anchor's perturbation neighborhood.

    Transfer functions are built once from the anchor; every grid point is
    then scored by decoupled_point_eval. ``atf_builder`` and ``forward_fn``
    exist for dependency injection (instrumented audits, cached builders).
    """
    anchor = np.asarray(anchor, dtype=float)
    if not admissible_anchor(anchor, scene.d_ov, protocol.r_max):
        raise EvaluationError(
            "overlap risk: anchor separation does not clear d_ov at every grid offset")
    if atf_builder is None:
        atf_builder = lambda x: build_atf_set(scene, x, grid)
    atfs = atf_builder(anchor)
    points = perturbed_grid(anchor, protocol.r_max, protocol.spacing)
    offsets = points[:, 2:] - anchor[2:]
    n_axis = int(round(np.sqrt(points.shape[0])))
    grid_shape = (n_axis, n_axis)
    edges, dists = build_neighbor_edges(grid_shape, protocol.spacing)

    masks = _metric_bands(grid, protocol, set(generators))
    keys = [(metric, listener, band)
            for metric in METRICS for listener in protocol.listeners for band in masks]
    values = {key: np.empty(points.shape[0]) for key in keys}
    for i, point in enumerate(points):
        tri = decoupled_point_eval(atfs, generators, point, forward_fn=forward_fn)
        per_bin = {"izi": izi(tri.e_tar, tri.e_leak, eps=protocol.eps),
                   "ipi": ipi(tri.e_tar, tri.e_int, eps=protocol.eps)}
        for metric, listener, band in keys:
            values[(metric, listener, band)][i] = band_logmean(
                per_bin[metric][listener - 1], masks[band])

    summaries = {}
    for key, q in values.items():
        med, lower = quality_summaries(q, protocol.summary_mode)
        if edges.shape[0] > 0:
            s_mean, s_rms = stability_stats(q, edges, dists)
        else:
            s_mean, s_rms = 0.0, 0.0
        summaries[key] = SummaryStats(median=med, lower=lower,
                                      mode=protocol.summary_mode,
                                      sigma_mean=s_mean, sigma_rms=s_rms)
    return NeighborhoodReport(anchor=anchor, points=points, offsets=offsets,
                              grid_shape=grid_shape, values=values,
                              summaries=summaries, edge_count=edges.shape[0],
                              mode=protocol.summary_mode)


def sample_anchors(scene: SceneConfig, r_max: float, n_anchors: int,
                   rng: np.random.Generator, max_tries: int = 10000) -> np.ndarray:
    """Listener 2 anchors drawn uniformly from its box, rejecting
    inadmissible ones; Listener 1 stays at the scene's fixed position."""
    box = scene.bounds[1]
    anchors = []
    tries = 0
    while len(anchors) < n_anchors:
        if tries >= max_tries:
            raise EvaluationError(
                "bounds too tight: could not draw enough admissible anchors")
        tries += 1
        x2 = rng.uniform(box[:, 0], box[:, 1])
        anchor = stack_coords(scene.x1, x2)
        if admissible_anchor(anchor, scene.d_ov, r_max):
            anchors.append(anchor)
    return np.stack(anchors)


def multi_anchor_run(generators: dict, scene: SceneConfig, grid: FrequencyGrid,
                     protocol: EvalProtocol, n_anchors: int, seed: int,
                     anchors=None, atf_builder=None
                     ) -> tuple[list[NeighborhoodReport], dict]:
    """Neighborhood reports over several anchors plus the averaged table.

    Anchors come from a seeded rejection sampler unless given explicitly.
    The table maps (metric, listener, band) to {stat: (mean, std)} across
    anchors for each summary statistic.
    """
    if anchors is None:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        anchors = sample_anchors(scene, protocol.r_max, n_anchors, rng)
    else:
        anchors = np.asarray(anchors, dtype=float)
    reports = [evaluate_neighborhood(anchor, generators, scene, grid, protocol,
                                     atf_builder=atf_builder)
               for anchor in anchors]
    table = {}
    for key in reports[0].summaries:
        stats = {}
        for stat in ("median", "lower", "sigma_mean", "sigma_rms"):
            vals = np.array([getattr(r.summaries[key], stat) for r in reports])
            stats[stat] = (float(vals.mean()), float(vals.std()))
        table[key] = stats
    return reports, table


def improvement_table(base_table: dict, nc_table: dict, eps: float = 1e-9) -> list[dict]:
    """Anchor-averaged improvements of an NC run over a baseline run.

    Quality convention for median/lower, stability convention for the
    variation rates; rows keyed by (metric, listener, band, summary).
    """
    if base_table.keys() != nc_table.keys():
        raise EvaluationError("runs report different metric sets")
    kinds = {"median": "quality", "lower": "quality",
             "sigma_mean": "stability", "sigma_rms": "stability"}
    rows = []
    for key in base_table:
        metric, listener, band = key
        for stat, kind in kinds.items():
            base = base_table[key][stat][0]
            nc = nc_table[key][stat][0]
            rows.append({
                "metric": metric, "listener": listener, "band": band,
                "summary": stat, "baseline": base, "nc": nc,
                "improvement_pct": improvement(base, nc, kind, eps=eps),
            })
    return rows


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------
def _fmt(v) -> str:
    return repr(float(v))


def write_point_csv(path: str, reports: list[NeighborhoodReport]) -> None:
    """One row per (anchor, grid point, metric, band)."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["anchor", "dx", "dy", "metric", "band", "value_db"])
        for a, rep in enumerate(reports):
            for (metric, listener, band), vals in sorted(rep.values.items()):
                for (dx, dy), v in zip(rep.offsets, vals):
                    writer.writerow([a, _fmt(dx), _fmt(dy),
                                     f"{metric}_{listener}", band, _fmt(v)])


def write_summary_csv(path: str, reports: list[NeighborhoodReport]) -> None:
    """One row per (anchor, metric, band) with all summary statistics."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["anchor", "metric", "median", "lower_bound", "mode",
                         "sigma_mean", "sigma_rms"])
        for a, rep in enumerate(reports):
            for (metric, listener, band), s in sorted(rep.summaries.items()):
                writer.writerow([a, f"{metric}_{listener}_{band}", _fmt(s.median),
                                 _fmt(s.lower), s.mode, _fmt(s.sigma_mean),
                                 _fmt(s.sigma_rms)])


def write_improvement_csv(path: str, rows: list[dict]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["metric", "listener", "band", "summary",
                         "baseline", "nc", "improvement_pct"])
        for row in sorted(rows, key=lambda r: (r["metric"], r["listener"],
                                               r["band"], r["summary"])):
            writer.writerow([row["metric"], row["listener"], row["band"],
                             row["summary"], _fmt(row["baseline"]), _fmt(row["nc"]),
                             _fmt(row["improvement_pct"])])
