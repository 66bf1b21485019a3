"""Command-line entry point.

Exit codes: 0 success, 1 usage/config/runtime error, 2 calibration failure.
"""

import argparse
import datetime as dt
import hashlib
import os
import sys
import traceback
from dataclasses import replace

import numpy as np
import yaml

from . import __version__
from .bench import load_iris, run_experiment, simulate_raster, sweep_training_size
from .config import (ConfigError, default_config, dump_config, grid_values, load_config, parse_sizes,
                     template_text)
from .errors import NoExcitablePointFound
from .inputs import build_mask, mask_dataset, synthesize_waveform
from .laser import LaserParams, calibrate_operating_point, simulate

EXIT_OK, EXIT_ERROR, EXIT_CALIBRATION = 0, 1, 2


class UsageError(Exception):
    pass


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _prepare_outdir(path):
    """Create ``path`` and prove it is writable before any work starts."""
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-test")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise UsageError(f"output directory {path!r} is not writable: {exc}") from exc


def write_manifest(outdir, config, artifacts, started, argv):
    """RunManifest: config, artifact paths with hashes, timestamps and tool version."""
    manifest = {
        "tool": "vcsel_snn",
        "version": __version__,
        "command": list(argv),
        "started": started,
        "finished": _now(),
        "config": config.to_dict(),
        "artifacts": {name: {"path": os.path.relpath(p, outdir), "sha256": _sha256(p)}
                      for name, p in artifacts.items()},
    }
    path = os.path.join(outdir, "manifest.yaml")
    with open(path, "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    return path


def _load(args):
    if not args.config:
        raise UsageError("--config is required")
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        config = replace(config, threads=args.threads)
    return config


def cmd_init_config(args):
    out = args.out or "config.yaml"
    cfg = default_config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    with open(out, "w") as fh:
        fh.write(template_text(cfg))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_calibrate(args):
    config = _load(args)
    if not isinstance(config.laser, LaserParams):
        raise ConfigError("calibration applies to the sfm laser model only")
    grid = config.search_grid
    if not grid:
        raise ConfigError("laser.search_grid is missing")
    amps = grid_values(grid.get("injection_amplitude"), "laser.search_grid.injection_amplitude")
    dets = grid_values(grid.get("detuning"), "laser.search_grid.detuning")
    target = float(grid.get("target_margin", 0.07))
    ref = float(grid.get("reference_drop", 0.3))
    result = calibrate_operating_point(config.laser, amps, dets, target_margin=target, reference_drop=ref,
                                       node_duration=config.theta)
    calib = result.summary()
    calib["target_margin"] = target
    calib["calibrated_at"] = _now()
    new = replace(config, laser=result.params, calibration={k: _plain_float(v) for k, v in calib.items()})
    out = args.out or _sibling(args.config, ".calibrated.yaml")
    dump_config(new, out, header=f"calibrated by vcsel_snn {__version__} from {args.config}")
    print(f"excitable point: amplitude {result.params.injection_amplitude:.6g}, "
          f"detuning {result.params.detuning / 1e9:.3g} GHz, margin {result.margin:.4f} "
          f"above the locking edge {result.lock_boundary:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def _plain_float(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _sibling(path, suffix):
    root, _ = os.path.splitext(path)
    return root + suffix


def cmd_run(args):
    started = _now()
    config = _load(args)
    out = args.out or "run"
    _prepare_outdir(out)
    dataset = load_iris(config.dataset)
    report = run_experiment(config, dataset)
    paths = report.write(out, plot=args.plot)
    write_manifest(out, config, paths, started, sys.argv)
    print(f"accuracy {report.accuracy:.4f} on {report.test_idx.size} test points; outputs in {out}")
    return EXIT_OK


def cmd_sweep(args):
    started = _now()
    config = _load(args)
    sizes = parse_sizes(args.sizes if args.sizes is not None else config.sweep_sizes)
    runs = args.runs if args.runs is not None else config.sweep_runs
    if runs < 1:
        raise UsageError(f"--runs must be at least 1, got {runs}")
    if min(sizes) < 1 or max(sizes) > 49:
        raise UsageError(f"--sizes must lie in [1, 49] points per class, got {min(sizes)}..{max(sizes)}")
    out = args.out or "sweep"
    _prepare_outdir(out)
    dataset = load_iris(config.dataset)
    curve = sweep_training_size(config, dataset, sizes, runs)
    paths = {"error_curve": os.path.join(out, "error_curve.csv")}
    curve.to_csv(paths["error_curve"])
    if args.plot:
        paths["error_curve_svg"] = os.path.join(out, "error_curve.svg")
        curve.to_svg(paths["error_curve_svg"])
    write_manifest(out, config, paths, started, sys.argv)
    best = int(np.argmin(curve.mean_error))
    print(f"lowest mean error {curve.mean_error[best]:.4f} at {curve.training_sizes[best]} per class; "
          f"outputs in {out}")
    return EXIT_OK


def cmd_export_raster(args):
    started = _now()
    config = _load(args)
    out = args.out or "raster"
    _prepare_outdir(out)
    dataset = load_iris(config.dataset)
    product = simulate_raster(config, dataset)
    paths = {"raster": os.path.join(out, "raster.csv")}
    product.raster.to_csv(paths["raster"])
    if args.plot:
        paths["raster_svg"] = os.path.join(out, "raster.svg")
        product.raster.to_svg(paths["raster_svg"], title=f"{config.n_nodes} nodes")
    write_manifest(out, config, paths, started, sys.argv)
    print(f"raster {product.raster.states.shape} with spike fraction {product.raster.states.mean():.3f}")
    return EXIT_OK


def cmd_simulate_trace(args):
    started = _now()
    config = _load(args)
    dataset = load_iris(config.dataset)
    if args.points:
        try:
            idx = [int(p) for p in args.points.split(",")]
        except ValueError as exc:
            raise UsageError(f"--points must be comma-separated indices, got {args.points!r}") from exc
        if min(idx) < 0 or max(idx) >= len(dataset):
            raise UsageError(f"--points must lie in [0, {len(dataset) - 1}]")
    else:
        idx = list(range(len(dataset)))
    out = args.out or "trace"
    _prepare_outdir(out)
    mask = build_mask(config.seed, config.n_nodes, 4, config.mask_distribution)
    seqs_all = mask_dataset(mask, dataset.points)
    # the scale comes from the full dataset so a subset sees the same drive levels
    from .inputs import AffineScale
    scale = AffineScale.fit(seqs_all)
    wave = synthesize_waveform(seqs_all[idx], dataset.labels[idx], config.theta, config.sample_rate,
                               config.gap, order="given", scale=scale)
    trace = simulate(config.laser, wave, config.trace_sample_period, seed=config.seed, dt=config.dt,
                     mode=config.simulation_mode, threads=config.threads)
    paths = {"trace": os.path.join(out, "trace.csv"), "drive": os.path.join(out, "drive.csv")}
    trace.to_csv(paths["trace"])
    paths["drive_meta"] = wave.to_csv(paths["drive"])
    write_manifest(out, config, paths, started, sys.argv)
    print(f"{trace.samples.size} trace samples for {len(idx)} points; outputs in {out}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="vcsel-snn", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--out", help=out_help)
        p.add_argument("--seed", type=int, help="override experiment.seed")
        p.add_argument("--threads", type=int, help="workers for per_point simulation")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")

    p = sub.add_parser("init-config", help="write a commented default configuration")
    p.add_argument("--out", help="file to write (default config.yaml)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_init_config)

    p = sub.add_parser("calibrate", help="search for an excitable operating point")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--out", help="calibrated config path (default <config>.calibrated.yaml)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("run", help="full Iris experiment")
    common(p, "output directory (default ./run)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="error against training-set size")
    common(p, "output directory (default ./sweep)")
    p.add_argument("--sizes", help='training points per class, e.g. "1:49" or "1,2,5,10"')
    p.add_argument("--runs", type=int, help="split seeds per size")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-raster", help="simulate and write the spike raster only")
    common(p, "output directory (default ./raster)")
    p.set_defaults(func=cmd_export_raster)

    p = sub.add_parser("simulate-trace", help="write the laser output trace and its drive waveform")
    common(p, "output directory (default ./trace)")
    p.add_argument("--points", help="comma-separated data point indices (default: all, file order)")
    p.set_defaults(func=cmd_simulate_trace)
    return ap


def _origin(exc):
    """Package module where ``exc`` was raised, for error messages."""
    pkg = os.path.dirname(__file__)
    origin = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        fname = frame.f_code.co_filename
        if fname.startswith(pkg):
            origin = os.path.splitext(os.path.basename(fname))[0].lstrip("_")
    return origin


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for calibration failures here
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except NoExcitablePointFound as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # any pipeline failure maps to exit 1
        print(f"error in {_origin(exc)}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
