"""Array and listener geometry for a two-zone split-band loudspeaker system.

The scene lives on a 2-D horizontal plane: the driver line sits on y = 0 and
listeners sit at y > 0. Listener positions are handled as a stacked coordinate
vector ``[x1, y1, x2, y2]`` (meters) throughout the package.

All functions here are pure and stateless.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

K_LISTENERS = 2
COORD_DIM = 2
STACKED_DIM = K_LISTENERS * COORD_DIM

WOOFER = "w"
TWEETER = "t"
BANDS = (WOOFER, TWEETER)


# ---------------------------------------------------------------------------
# Geometry types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ArrayGeometry:
    """Driver positions per band, each an (M_b, 2) array of x/y in meters."""

    positions: dict[str, np.ndarray]

    def __post_init__(self):
        for band, pos in self.positions.items():
            pos = np.asarray(pos, dtype=float)
            if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
                raise GeometryError(f"band {band!r}: driver positions must be (M, 2) with M >= 1")
            if not np.all(np.isfinite(pos)):
                raise GeometryError(f"band {band!r}: non-finite driver position")
            self.positions[band] = pos

    def count(self, band: str) -> int:
        return self.positions[band].shape[0]

    @property
    def bands(self) -> tuple[str, ...]:
        return tuple(self.positions.keys())


def default_array(
    n_woofers: int = 8,
    n_tweeters: int = 16,
    woofer_spacing: float = 0.152,
    tweeter_spacing: float = 0.076,
) -> ArrayGeometry:
    """Split-band line array centered on x = 0 at y = 0.

    Defaults give a 24-driver cabinet: 8 woofers at 0.152 m pitch and
    16 tweeters at 0.076 m pitch, both rows centered on the same axis.
    """
    def _line(n: int, spacing: float) -> np.ndarray:
        x = (np.arange(n) - (n - 1) / 2.0) * spacing
        return np.column_stack([x, np.zeros(n)])

    return ArrayGeometry(positions={
        WOOFER: _line(n_woofers, woofer_spacing),
        TWEETER: _line(n_tweeters, tweeter_spacing),
    })


@dataclass(frozen=True)
class HeadConfig:
    """Nominal head model used to derive ear control points.

    ``half_width`` is the head-center to ear distance. With
    ``points_per_ear`` > 1, control points sit on a circle of
    ``cluster_radius`` around each ear position.
    """

    half_width: float = 0.08
    points_per_ear: int = 1
    facing: tuple[float, float] = (0.0, 1.0)
    cluster_radius: float = 0.01

    def __post_init__(self):
        if self.half_width < 0:
            raise GeometryError("half_width must be >= 0")
        if self.points_per_ear < 1:
            raise GeometryError("points_per_ear must be >= 1")
        norm = float(np.hypot(*self.facing))
        if not np.isfinite(norm) or norm == 0.0:
            raise GeometryError("facing must be a nonzero direction")


@dataclass(frozen=True)
class SceneConfig:
    """Full scene: array, per-listener coordinate boxes, overlap threshold.

    ``bounds`` has shape (K, 2, 2): ``bounds[k, axis] = (low, high)`` for
    listener k. ``x1`` is the fixed Listener 1 anchor used by the
    evaluation protocols.
    """

    array: ArrayGeometry = field(default_factory=default_array)
    bounds: np.ndarray = field(
        default_factory=lambda: np.array([[[-0.8, 0.8], [0.7, 1.6]]] * K_LISTENERS)
    )
    d_ov: float = 0.30
    head: HeadConfig = field(default_factory=HeadConfig)
    x1: tuple[float, float] = (-0.40, 1.10)

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.shape == (COORD_DIM, 2):
            b = np.broadcast_to(b, (K_LISTENERS, COORD_DIM, 2)).copy()
        if b.shape != (K_LISTENERS, COORD_DIM, 2):
            raise GeometryError("bounds must be (K, 2, 2) or a shared (2, 2) box")
        if np.any(b[..., 0] > b[..., 1]):
            raise GeometryError("bounds has low > high")
        object.__setattr__(self, "bounds", b)
        if self.d_ov <= 0:
            raise GeometryError("d_ov must be > 0")
        x1 = np.asarray(self.x1, dtype=float)
        if np.any(x1 < b[0, :, 0]) or np.any(x1 > b[0, :, 1]):
            raise GeometryError("x1 must lie inside the Listener 1 box")


# ---------------------------------------------------------------------------
# Stacked coordinates
# ---------------------------------------------------------------------------
def stack_coords(x1, x2) -> np.ndarray:
    """Stack two listener centers into the canonical [x1; x2] vector."""
    out = np.concatenate([np.asarray(x1, float).ravel(), np.asarray(x2, float).ravel()])
    if out.shape != (STACKED_DIM,):
        raise GeometryError("listener centers must each be 2-D points")
    return out


def listener_center(x: np.ndarray, k: int) -> np.ndarray:
    """Extract listener k's (2,) center from stacked coordinates (k = 0 or 1)."""
    x = np.asarray(x, float)
    return x[..., k * COORD_DIM:(k + 1) * COORD_DIM]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def ear_points(center, head: HeadConfig) -> np.ndarray:
    """Control points for both ears of a head at ``center``.

    Returns (2, points_per_ear, 2): index 0 is the left ear, 1 the right.
    The ear axis is perpendicular to ``facing``; the left ear lies on the
    counterclockwise side (facing +y puts it at x - half_width). Clusters
    with more than one point per ear are spread evenly on a circle of
    ``cluster_radius`` so each cluster's centroid is the ear position.
    """
    center = np.asarray(center, dtype=float)
    fx, fy = head.facing
    norm = np.hypot(fx, fy)
    left_dir = np.array([-fy, fx]) / norm
    ears = np.stack([
        center + head.half_width * left_dir,
        center - head.half_width * left_dir,
    ])
    n = head.points_per_ear
    if n == 1:
        return ears[:, None, :]
    angles = 2.0 * np.pi * np.arange(n) / n
    offsets = head.cluster_radius * np.column_stack([np.cos(angles), np.sin(angles)])
    offsets -= offsets.mean(axis=0)  # exact centroid at the ear position
    return ears[:, None, :] + offsets[None, :, :]


def region_indicator(x: np.ndarray, d_ov: float) -> int:
    """1 when the listener separation strictly exceeds ``d_ov``, else 0.

    A separation exactly equal to the threshold counts as overlapping.
    """
    sep = np.linalg.norm(listener_center(x, 0) - listener_center(x, 1))
    return int(sep > d_ov)


def same_region_mask(x: np.ndarray, x_pert: np.ndarray, d_ov: float) -> int:
    """1 when both coordinate vectors fall in the same overlap regime."""
    return int(region_indicator(x, d_ov) == region_indicator(x_pert, d_ov))


def clip_to_bounds(x: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Clamp each stacked component into its axis interval. Idempotent.

    Accepts a single (4,) vector or a batch (..., 4).
    """
    b = np.asarray(bounds, dtype=float).reshape(STACKED_DIM, 2)
    return np.clip(np.asarray(x, dtype=float), b[:, 0], b[:, 1])


def anchor_admissible(x2, scene: SceneConfig, r_max: float) -> bool:
    """Whether a Listener 2 anchor keeps every grid-perturbed input non-overlapping.

    Requires ``||x1 - x2|| > d_ov + sqrt(2) * r_max`` (strict), where r_max is
    the largest per-axis offset the evaluation grid will apply.
    """
    if r_max < 0:
        raise GeometryError("r_max must be >= 0")
    sep = np.linalg.norm(np.asarray(scene.x1, float) - np.asarray(x2, float))
    return bool(sep > scene.d_ov + np.sqrt(2.0) * r_max)
