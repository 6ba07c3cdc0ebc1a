"""Command-line front end: train / eval / sweep / report.

Every command is a pure function of (config, seed): outputs land in the
config's io.out_dir (or the PSZKIT_OUT_DIR override) with deterministic
names, a resolved config copy beside them, and byte-stable CSV content
across identical re-runs.

Exit codes group failures by category: 2 configuration, 3 checkpoints,
4 geometry/evaluation, 5 numerical divergence, 1 anything else.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import config as cfgmod
from . import network
from .errors import (CheckpointError, ConfigError, EvaluationError, GeometryError,
                     GridError, NumericalOverflowError, PszkitError, ShapeError,
                     TrainingDivergedError)
from .evaluation import (EvalProtocol, improvement_table, multi_anchor_run,
                         sample_anchors, write_improvement_csv, write_point_csv,
                         write_summary_csv)
from .filters import stacked_size
from .network import encoded_width
from .scene import STACKED_DIM, stack_coords
from .training import train


def _fmt_val(v: float) -> str:
    return f"{v:g}"


def _stem(band: str, lam: float, delta: float) -> str:
    return f"{band}_lam{_fmt_val(lam)}_del{_fmt_val(delta)}"


def _check_architecture(params: network.GeneratorParams, cfg: dict, scene, grid) -> None:
    """A checkpoint must match the config's band setup and model shape."""
    if params.band not in grid.filter_lengths:
        raise ConfigError(f"band {params.band!r} not enabled by this config")
    d_out = stacked_size(scene.array.count(params.band),
                         grid.filter_lengths[params.band])
    expected = [encoded_width(int(cfg["model"]["encoding"]), STACKED_DIM)] \
        + [int(h) for h in cfg["model"]["hidden"]] + [d_out]
    if params.layer_sizes != expected:
        raise ConfigError(
            f"checkpoint architecture {params.layer_sizes} does not match "
            f"the config's {expected}")


def _train_one(cfg: dict, band: str, lam: float, delta: float, out_dir: str):
    """Train one (band, lambda, delta) point; returns (params, ckpt path)."""
    scene = cfgmod.build_scene(cfg)
    grid = cfgmod.build_grid(cfg)
    if band not in grid.filter_lengths:
        raise ConfigError(f"band not enabled: {band!r} (grid has {grid.bands})")
    weights = cfgmod.build_weights(cfg, lambda_override=lam, delta_override=delta)
    stem = _stem(band, lam, delta)
    ckpt = os.path.join(out_dir, f"gen_{stem}.ckpt")
    log = os.path.join(out_dir, f"train_{stem}.csv")
    tc = cfgmod.build_train_config(cfg, band, weights,
                                   checkpoint_path=ckpt, log_path=log)
    params, _ = train(tc, scene, grid)
    return params, ckpt


def _ensure_trained(cfg: dict, band: str, lam: float, delta: float, out_dir: str):
    """Reuse a matching checkpoint if one already sits in the run dir.

    Reuse requires the recorded (seed, steps, lambda, delta) to match; a
    stale file from another setup is an error rather than a silent retrain.
    """
    stem = _stem(band, lam, delta)
    ckpt = os.path.join(out_dir, f"gen_{stem}.ckpt")
    if os.path.exists(ckpt):
        params, extra = network.load_checkpoint(ckpt, expected_band=band)
        t = cfg["train"]
        want = {"seed": int(t["seed"]), "steps": int(t["steps"]),
                "lambda": float(lam), "delta": float(delta)}
        got = {k: extra.get(k) for k in want}
        if got != want:
            raise ConfigError(
                f"{ckpt}: existing checkpoint was trained with {got}, "
                f"this config wants {want}; remove it or change io.out_dir")
        scene = cfgmod.build_scene(cfg)
        grid = cfgmod.build_grid(cfg)
        _check_architecture(params, cfg, scene, grid)
        return params, ckpt
    return _train_one(cfg, band, lam, delta, out_dir)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def cmd_train(args) -> int:
    cfg = cfgmod.load_config(args.config)
    if args.lam is not None:
        cfg["train"]["lambda"] = args.lam
    if args.delta is not None:
        cfg["train"]["delta"] = args.delta
    out_dir = cfgmod.output_dir(cfg)
    os.makedirs(out_dir, exist_ok=True)
    lam = float(cfg["train"]["lambda"])
    delta = float(cfg["train"]["delta"])
    cfgmod.write_resolved(cfg, out_dir,
                          f"config_train_{_stem(args.band, lam, delta)}.resolved.json")
    _, ckpt = _train_one(cfg, args.band, lam, delta, out_dir)
    print(ckpt)
    return 0


def _load_generators(paths: list[str], cfg: dict, scene, grid) -> dict:
    gens = {}
    for path in paths:
        params, _ = network.load_checkpoint(path)
        _check_architecture(params, cfg, scene, grid)
        if params.band in gens:
            raise ConfigError(f"two checkpoints given for band {params.band!r}")
        gens[params.band] = params
    return gens


def _eval_pair(base_gens, nc_gens, scene, grid, protocol, anchors, out_dir, tag):
    base_reports, base_table = multi_anchor_run(
        base_gens, scene, grid, protocol, len(anchors), seed=0, anchors=anchors)
    nc_reports, nc_table = multi_anchor_run(
        nc_gens, scene, grid, protocol, len(anchors), seed=0, anchors=anchors)
    write_point_csv(os.path.join(out_dir, f"points_{tag}_baseline.csv"), base_reports)
    write_point_csv(os.path.join(out_dir, f"points_{tag}_nc.csv"), nc_reports)
    write_summary_csv(os.path.join(out_dir, f"summaries_{tag}_baseline.csv"), base_reports)
    write_summary_csv(os.path.join(out_dir, f"summaries_{tag}_nc.csv"), nc_reports)
    rows = improvement_table(base_table, nc_table)
    write_improvement_csv(os.path.join(out_dir, f"improvements_{tag}.csv"), rows)
    return rows


def cmd_eval(args) -> int:
    cfg = cfgmod.load_config(args.config)
    scene = cfgmod.build_scene(cfg)
    grid = cfgmod.build_grid(cfg)
    base_gens = _load_generators(args.baseline, cfg, scene, grid)
    nc_gens = _load_generators(args.nc, cfg, scene, grid)
    if base_gens.keys() != nc_gens.keys():
        raise ConfigError("baseline and nc checkpoints cover different bands")
    out_dir = cfgmod.output_dir(cfg)
    os.makedirs(out_dir, exist_ok=True)
    cfgmod.write_resolved(cfg, out_dir, f"config_eval_{args.mode}.resolved.json")
    if args.mode == "sim":
        protocol = cfgmod.build_protocol(cfg, "sim")
        rng = np.random.default_rng(np.random.SeedSequence(int(cfg["eval"]["seed"])))
        anchors = sample_anchors(scene, protocol.r_max,
                                 int(cfg["eval"]["n_anchors"]), rng)
        _eval_pair(base_gens, nc_gens, scene, grid, protocol, anchors, out_dir, "sim")
    else:
        anchors = np.stack([stack_coords(scene.x1, a)
                            for a in cfg["eval"]["meas_anchors"]])
        for spacing in cfg["eval"]["meas_spacings"]:
            protocol = EvalProtocol(r_max=float(spacing), spacing=float(spacing),
                                    summary_mode="min", full_band=True,
                                    listeners=(1, 2))
            _eval_pair(base_gens, nc_gens, scene, grid, protocol, anchors,
                       out_dir, f"meas_{_fmt_val(float(spacing))}")
    return 0


def cmd_sweep(args) -> int:
    cfg = cfgmod.load_config(args.config)
    scene = cfgmod.build_scene(cfg)
    grid = cfgmod.build_grid(cfg)
    lambdas = [float(v) for v in cfg["sweep"]["lambdas"]]
    deltas = [float(v) for v in cfg["sweep"]["deltas"]]
    if not lambdas or not deltas:
        raise ConfigError("sweep.lambdas and sweep.deltas must be nonempty")
    out_dir = cfgmod.output_dir(cfg)
    os.makedirs(out_dir, exist_ok=True)
    cfgmod.write_resolved(cfg, out_dir, "config_sweep.resolved.json")
    protocol = cfgmod.build_protocol(cfg, "sim")
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg["eval"]["seed"])))
    anchors = sample_anchors(scene, protocol.r_max, int(cfg["eval"]["n_anchors"]), rng)
    lam_fix = float(cfg["train"]["lambda"])
    delta_fix = float(cfg["train"]["delta"])
    bands = args.bands or list(grid.bands)

    rows = []
    for band in bands:
        if band not in grid.filter_lengths:
            raise ConfigError(f"band not enabled: {band!r}")
        base_params, _ = _ensure_trained(cfg, band, 0.0, delta_fix, out_dir)
        _, base_table = multi_anchor_run({band: base_params}, scene, grid,
                                         protocol, len(anchors), seed=0,
                                         anchors=anchors)
        tables = {}

        def point_table(lam, delta):
            key = (lam, delta)
            if key not in tables:
                if lam == 0.0:
                    params = base_params
                else:
                    params, _ = _ensure_trained(cfg, band, lam, delta, out_dir)
                _, tables[key] = multi_anchor_run({band: params}, scene, grid,
                                                  protocol, len(anchors), seed=0,
                                                  anchors=anchors)
            return tables[key]

        for param_name, values, fixed in (("lambda", lambdas, delta_fix),
                                          ("delta", deltas, lam_fix)):
            for value in values:
                lam, delta = (value, fixed) if param_name == "lambda" else (fixed, value)
                imp = improvement_table(base_table, point_table(lam, delta))
                for r in imp:
                    rows.append({"band": band, "param": param_name, "value": value,
                                 "metric": r["metric"], "listener": r["listener"],
                                 "band_label": r["band"], "summary": r["summary"],
                                 "baseline": r["baseline"], "nc": r["nc"],
                                 "improvement_pct": r["improvement_pct"]})
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["band", "param", "value", "metric", "listener",
                         "band_label", "summary", "baseline", "nc",
                         "improvement_pct"])
        for r in rows:
            writer.writerow([r["band"], r["param"], _fmt_val(r["value"]),
                             r["metric"], r["listener"], r["band_label"],
                             r["summary"], repr(float(r["baseline"])),
                             repr(float(r["nc"])), repr(float(r["improvement_pct"]))])
    print(path)
    return 0


def cmd_report(args) -> int:
    names = sorted(n for n in os.listdir(args.run_dir)
                   if n.startswith(("improvements", "sweep")) and n.endswith(".csv"))
    if not names:
        print("no report CSVs found; expected improvements_*.csv or sweep.csv in "
              f"{args.run_dir}", file=sys.stderr)
        return 4
    for name in names:
        path = os.path.join(args.run_dir, name)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        print(f"== {name}")
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        for r in rows:
            print("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        print()
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pszkit",
                                description="Two-zone filter generator experiments")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one band's generator")
    t.add_argument("--config", required=True)
    t.add_argument("--band", required=True, choices=["w", "t"])
    t.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="override train.lambda (0 gives the baseline)")
    t.add_argument("--delta", type=float, default=None, help="override train.delta")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="compare a baseline and an NC run")
    e.add_argument("--config", required=True)
    e.add_argument("--baseline", action="append", required=True,
                   help="baseline checkpoint (repeat per band)")
    e.add_argument("--nc", action="append", required=True,
                   help="NC checkpoint (repeat per band)")
    e.add_argument("--mode", choices=["sim", "meas"], default="sim")
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("sweep", help="hyperparameter sweep against a shared baseline")
    s.add_argument("--config", required=True)
    s.add_argument("--bands", nargs="*", default=None, choices=["w", "t"])
    s.set_defaults(fn=cmd_sweep)

    r = sub.add_parser("report", help="print tables from a run directory")
    r.add_argument("run_dir")
    r.set_defaults(fn=cmd_report)
    return p


_EXIT_CODES = (
    (ConfigError, 2),
    (CheckpointError, 3),
    ((EvaluationError, GridError, GeometryError, ShapeError), 4),
    ((TrainingDivergedError, NumericalOverflowError), 5),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PszkitError as e:
        print(f"error: {e}", file=sys.stderr)
        for types, code in _EXIT_CODES:
            if isinstance(e, types):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
