"""Experiment configuration: strict JSON with defaults and presets.

A config is a nested JSON object with sections scene / grid / model /
train / eval / sweep / io. Unknown keys anywhere are hard errors so a
typo cannot silently fall back to a default. Every command writes the
fully resolved config next to its outputs, and that copy re-runs to the
same results.
"""

import copy
import json
import os

import numpy as np

from .acoustics import FrequencyGrid
from .errors import ConfigError
from .evaluation import EvalProtocol
from .losses import LossWeights
from .network import DEFAULT_ENCODING, DEFAULT_HIDDEN
from .scene import HeadConfig, SceneConfig, default_array
from .training import TrainConfig

ENV_OUT_DIR = "PSZKIT_OUT_DIR"

DEFAULTS = {
    "scene": {
        "d_ov": 0.30,
        "bounds": [[-0.8, 0.8], [0.7, 1.6]],
        "x1": [-0.40, 1.10],
        "n_woofers": 8,
        "n_tweeters": 16,
        "woofer_spacing": 0.152,
        "tweeter_spacing": 0.076,
        "head_half_width": 0.08,
        "points_per_ear": 1,
    },
    "grid": {
        "sample_rate": 48000.0,
        "fft_length": 4096,
        "filter_lengths": {"w": 512, "t": 256},
    },
    "model": {
        "hidden": list(DEFAULT_HIDDEN),
        "encoding": DEFAULT_ENCODING,
    },
    "train": {
        "steps": 3000,
        "batch_size": 32,
        "seed": 0,
        "alpha": 0.5,
        "beta": 0.5,
        "gamma": 0.5,
        "lambda": 0.75,
        "delta": 0.01,
        "g_max": {"w": 4.0, "t": 4.0},
        "learning_rate": 1e-3,
        "log_every": 50,
    },
    "eval": {
        "r_max": 0.10,
        "spacing": 0.01,
        "summary_mode": "cvar10",
        "n_anchors": 25,
        "listeners": [2],
        "seed": 1,
        "meas_spacings": [0.02, 0.05, 0.10],
        "meas_anchors": [[0.0, 0.85], [0.2, 1.15], [0.5, 1.45]],
    },
    "sweep": {
        "lambdas": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
        "deltas": [0.005, 0.01, 0.02],
    },
    "io": {
        "out_dir": "runs",
    },
}

# dict-valued leaves whose keys are data (band names), not schema
_OPEN_LEAVES = {("grid", "filter_lengths"), ("train", "g_max")}


def desk_preset() -> dict:
    """CPU-friendly single-band setup: 16 kHz, 1024-point grid, short filters."""
    cfg = copy.deepcopy(DEFAULTS)
    cfg["grid"]["sample_rate"] = 16000.0
    cfg["grid"]["fft_length"] = 1024
    cfg["grid"]["filter_lengths"] = {"w": 128}
    cfg["train"]["g_max"] = {"w": 4.0}
    # 3000 steps needs a faster rate than the default to reach a well-fit
    # operating point; at 1e-3 the generator is still far from stationary
    # and the smoothness term has no visible effect.
    cfg["train"]["learning_rate"] = 2e-3
    cfg["eval"]["r_max"] = 0.05
    cfg["eval"]["n_anchors"] = 5
    return cfg


def _merge(defaults: dict, user: dict, path: tuple = ()) -> dict:
    out = {}
    for key, default in defaults.items():
        if key in user:
            given = user[key]
            if isinstance(default, dict) and (path + (key,)) not in _OPEN_LEAVES:
                if not isinstance(given, dict):
                    raise ConfigError(f"{'.'.join(path + (key,))}: expected an object")
                out[key] = _merge(default, given, path + (key,))
            else:
                out[key] = copy.deepcopy(given)
        else:
            out[key] = copy.deepcopy(default)
    for key in user:
        if key not in defaults:
            raise ConfigError(f"unknown key {'.'.join(path + (key,))!r}")
    return out


def resolve_config(user: dict | None = None, preset: str | None = None) -> dict:
    """Merge a user config over the defaults (or a named preset), strictly."""
    if preset is None:
        base = copy.deepcopy(DEFAULTS)
    elif preset == "desk":
        base = desk_preset()
    else:
        raise ConfigError(f"unknown preset {preset!r}")
    return _merge(base, user or {})


def load_config(path: str) -> dict:
    """Read and resolve a JSON config file.

    A top-level "preset" key selects the base the file is merged over.
    """
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    preset = raw.pop("preset", None)
    return resolve_config(raw, preset=preset)


def write_resolved(cfg: dict, out_dir: str, name: str = "config.resolved.json") -> str:
    """Write the resolved config beside the outputs; returns its path."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def output_dir(cfg: dict) -> str:
    """io.out_dir, unless the environment override is set."""
    return os.environ.get(ENV_OUT_DIR) or cfg["io"]["out_dir"]


# ---------------------------------------------------------------------------
# Section builders
# ---------------------------------------------------------------------------
def build_scene(cfg: dict) -> SceneConfig:
    s = cfg["scene"]
    try:
        array = default_array(n_woofers=int(s["n_woofers"]),
                              n_tweeters=int(s["n_tweeters"]),
                              woofer_spacing=float(s["woofer_spacing"]),
                              tweeter_spacing=float(s["tweeter_spacing"]))
        head = HeadConfig(half_width=float(s["head_half_width"]),
                          points_per_ear=int(s["points_per_ear"]))
        return SceneConfig(array=array, bounds=np.asarray(s["bounds"], dtype=float),
                           d_ov=float(s["d_ov"]), head=head,
                           x1=tuple(float(v) for v in s["x1"]))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"scene: {e}") from e


def build_grid(cfg: dict) -> FrequencyGrid:
    g = cfg["grid"]
    try:
        return FrequencyGrid(sample_rate=float(g["sample_rate"]),
                             fft_length=int(g["fft_length"]),
                             filter_lengths={b: int(v) for b, v in
                                             g["filter_lengths"].items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"grid: {e}") from e


def build_weights(cfg: dict, lambda_override: float | None = None,
                  delta_override: float | None = None) -> LossWeights:
    t = cfg["train"]
    lam = t["lambda"] if lambda_override is None else lambda_override
    delta = t["delta"] if delta_override is None else delta_override
    try:
        return LossWeights(alpha=float(t["alpha"]), beta=float(t["beta"]),
                           gamma=float(t["gamma"]), lambda_b=float(lam),
                           delta=float(delta),
                           g_max={b: float(v) for b, v in t["g_max"].items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"train: {e}") from e


def build_train_config(cfg: dict, band: str, weights: LossWeights,
                       checkpoint_path: str | None = None,
                       log_path: str | None = None) -> TrainConfig:
    t, m = cfg["train"], cfg["model"]
    try:
        return TrainConfig(band=band, steps=int(t["steps"]),
                           batch_size=int(t["batch_size"]), seed=int(t["seed"]),
                           weights=weights,
                           hidden=tuple(int(h) for h in m["hidden"]),
                           encoding=int(m["encoding"]),
                           learning_rate=float(t["learning_rate"]),
                           log_every=int(t["log_every"]),
                           checkpoint_path=checkpoint_path, log_path=log_path)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"train/model: {e}") from e


def build_protocol(cfg: dict, mode: str) -> EvalProtocol:
    """Simulation protocol from the eval section; the measurement-style
    variant switches to min summaries, full-band aggregation, and both
    listeners (its grids come from eval.meas_spacings)."""
    e = cfg["eval"]
    try:
        if mode == "sim":
            return EvalProtocol(r_max=float(e["r_max"]), spacing=float(e["spacing"]),
                                summary_mode=str(e["summary_mode"]), full_band=False,
                                listeners=tuple(int(l) for l in e["listeners"]))
        if mode == "meas":
            spacing = float(e["meas_spacings"][0])
            return EvalProtocol(r_max=spacing, spacing=spacing, summary_mode="min",
                                full_band=True, listeners=(1, 2))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"eval: {err}") from err
    raise ConfigError(f"unknown eval mode {mode!r}")
