"""Coordinate-conditioned filter generator: a small MLP with its own autodiff.

The generator maps stacked listener coordinates to one band's stacked filter
vector. Everything is plain numpy float64: forward records a tape of
activations, backward walks it in reverse, and the optimizer is a standard
bias-corrected adaptive-moment update. No framework underneath, so training
is bit-reproducible from a seed.
"""

from dataclasses import dataclass, field

import numpy as np

from . import binio
from .errors import (BandMismatchError, CorruptCheckpointError, NumericalOverflowError,
                     ShapeError)
from .scene import STACKED_DIM

_CKPT_KIND = "generator"
_CKPT_VERSION = 1

DEFAULT_HIDDEN = (256, 256, 256)
DEFAULT_ENCODING = 2
OUTPUT_SCALE = 1e-2


# ---------------------------------------------------------------------------
# Input encoding
# ---------------------------------------------------------------------------
def encoded_width(encoding: int, dims: int = STACKED_DIM) -> int:
    """Feature count: dims * (1 + 2 * encoding)."""
    return dims * (1 + 2 * encoding)


def encode_coordinates(x, bounds, encoding: int) -> np.ndarray:
    """Normalize stacked coordinates to [-1, 1] and append sinusoid features.

    ``bounds`` is (dims, 2) of per-component (low, high). Inputs are clipped
    into the box first. With encoding depth E the output per component u is
    [u, sin(2^i pi u), cos(2^i pi u) for i = 0..E-1], components grouped so
    the plain u block comes first, then each frequency's sin block and cos
    block. Accepts a single (dims,) vector or a batch (..., dims).
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ShapeError("bounds must be (dims, 2)")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != bounds.shape[0]:
        raise ShapeError(f"coordinate width {x.shape[-1]} != bounds rows {bounds.shape[0]}")
    lo, hi = bounds[:, 0], bounds[:, 1]
    x = np.clip(x, lo, hi)
    span = np.where(hi > lo, hi - lo, 1.0)  # degenerate axes map to -1
    u = 2.0 * (x - lo) / span - 1.0
    if encoding == 0:
        return u
    feats = [u]
    for i in range(encoding):
        arg = (2.0 ** i) * np.pi * u
        feats.append(np.sin(arg))
        feats.append(np.cos(arg))
    return np.concatenate(feats, axis=-1)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------
@dataclass
class GeneratorParams:
    """MLP weights for one band's filter generator.

    ``layer_sizes`` runs from encoded input width to the stacked filter
    dimension D_b. ``weights[i]`` has shape (layer_sizes[i],
    layer_sizes[i+1]); hidden layers use tanh, the last layer is linear and
    multiplied by the fixed ``output_scale``. ``bounds`` is the (dims, 2)
    normalization box baked in at init time.
    """

    band: str
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    encoding: int
    bounds: np.ndarray
    output_scale: float = OUTPUT_SCALE

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ShapeError("need at least input and output layers")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("weights/biases do not match layer_sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != want or b.shape != (want[1],):
                raise ShapeError(f"layer {i}: weight {w.shape}, expected {want}")
        if self.layer_sizes[0] != encoded_width(self.encoding, self.bounds.shape[0]):
            raise ShapeError("input layer width does not match the coordinate encoding")

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and \
            all(np.all(np.isfinite(b)) for b in self.biases)


def init_params(band: str, output_size: int, bounds, rng: np.random.Generator,
                hidden=DEFAULT_HIDDEN, encoding: int = DEFAULT_ENCODING,
                output_scale: float = OUTPUT_SCALE) -> GeneratorParams:
    """Fan-in-scaled uniform init, zero biases, fixed output scale.

    Weight draws consume the rng layer by layer in order, so a seeded rng
    reproduces the same network exactly.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    sizes = [encoded_width(encoding, bounds.shape[0])] + list(hidden) + [int(output_size)]
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return GeneratorParams(band=band, layer_sizes=sizes, weights=weights,
                           biases=biases, encoding=encoding, bounds=bounds,
                           output_scale=float(output_scale))


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------
@dataclass
class Tape:
    """Recorded activations of one forward pass, consumed by backward."""

    params: GeneratorParams
    activations: list[np.ndarray] = field(default_factory=list)  # [a0 .. a_H], 2-D
    single: bool = False


def forward(params: GeneratorParams, x) -> tuple[np.ndarray, Tape]:
    """Generate stacked filter vectors for coordinates ``x``.

    ``x`` may be (dims,) or (B, dims); output is (D_b,) or (B, D_b)
    accordingly. Deterministic. Raises NumericalOverflowError if any
    intermediate goes non-finite.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = encode_coordinates(np.atleast_2d(x), params.bounds, params.encoding)
    tape = Tape(params=params, single=single)
    tape.activations.append(a)
    n_layers = len(params.weights)
    for i in range(n_layers - 1):
        a = np.tanh(a @ params.weights[i] + params.biases[i])
        tape.activations.append(a)
    y = (a @ params.weights[-1] + params.biases[-1]) * params.output_scale
    if not np.all(np.isfinite(y)):
        raise NumericalOverflowError("numerical overflow in generator forward")
    return (y[0] if single else y), tape


def backward(tape: Tape, out_adjoint) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Parameter gradients of <out_adjoint, forward output>.

    For batched tapes the adjoint is (B, D_b) and gradients accumulate over
    the batch. Returns (weight_grads, bias_grads) shaped like the params.
    """
    params = tape.params
    adj = np.asarray(out_adjoint, dtype=float)
    if tape.single:
        adj = np.atleast_2d(adj)
    if adj.shape != (tape.activations[0].shape[0], params.output_size):
        raise ShapeError(f"adjoint shape {adj.shape} does not match the forward pass")
    w_grads = [None] * len(params.weights)
    b_grads = [None] * len(params.biases)
    delta = adj * params.output_scale
    for i in range(len(params.weights) - 1, -1, -1):
        a_prev = tape.activations[i]
        w_grads[i] = a_prev.T @ delta
        b_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (1.0 - tape.activations[i] ** 2)
    return w_grads, b_grads


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------
@dataclass
class AdamState:
    """First/second moment buffers plus the step counter."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: GeneratorParams) -> "AdamState":
        return cls(m_w=[np.zeros_like(w) for w in params.weights],
                   v_w=[np.zeros_like(w) for w in params.weights],
                   m_b=[np.zeros_like(b) for b in params.biases],
                   v_b=[np.zeros_like(b) for b in params.biases])


def optimizer_step(state: AdamState, params: GeneratorParams,
                   w_grads: list[np.ndarray], b_grads: list[np.ndarray],
                   rate: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> None:
    """One bias-corrected adaptive-moment update, in place."""
    if len(w_grads) != len(params.weights) or len(b_grads) != len(params.biases):
        raise ShapeError("gradient structure does not match parameters")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for group, grads, m_list, v_list in (
            (params.weights, w_grads, state.m_w, state.v_w),
            (params.biases, b_grads, state.m_b, state.v_b)):
        for p, g, m, v in zip(group, grads, m_list, v_list):
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= rate * (m / c1) / (np.sqrt(v / c2) + eps)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------
def save_checkpoint(params: GeneratorParams, path: str, extra: dict | None = None) -> None:
    """Persist a generator with self-describing metadata.

    ``extra`` lands in the header unchanged (seed, loss weights, ...).
    """
    meta = {
        "band": params.band,
        "layer_sizes": list(params.layer_sizes),
        "encoding": params.encoding,
        "output_scale": params.output_scale,
        "extra": extra or {},
    }
    arrays = {"bounds": params.bounds}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    binio.write_container(path, _CKPT_KIND, _CKPT_VERSION, meta, arrays)


def load_checkpoint(path: str, expected_band: str | None = None
                    ) -> tuple[GeneratorParams, dict]:
    """Load a generator checkpoint, returning (params, extra metadata).

    Corrupt files, format-version mismatches, band mismatches, and shape
    mismatches raise their own error types.
    """
    header, arrays = binio.read_container(path, kind=_CKPT_KIND, version=_CKPT_VERSION)
    meta = header["meta"]
    try:
        band = meta["band"]
        sizes = [int(s) for s in meta["layer_sizes"]]
        encoding = int(meta["encoding"])
        output_scale = float(meta["output_scale"])
        extra = meta.get("extra", {})
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptCheckpointError(f"{path}: incomplete checkpoint header") from e
    if expected_band is not None and band != expected_band:
        raise BandMismatchError(
            f"{path}: band mismatch, checkpoint is {band!r}, expected {expected_band!r}")
    try:
        weights = [arrays[f"w{i}"] for i in range(len(sizes) - 1)]
        biases = [arrays[f"b{i}"] for i in range(len(sizes) - 1)]
        bounds = arrays["bounds"]
    except KeyError as e:
        raise CorruptCheckpointError(f"{path}: missing parameter block") from e
    params = GeneratorParams(band=band, layer_sizes=sizes, weights=weights,
                             biases=biases, encoding=encoding, bounds=bounds,
                             output_scale=output_scale)
    return params, extra
