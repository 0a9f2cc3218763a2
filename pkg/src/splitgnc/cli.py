"""Command-line front end: ``register``, ``features``, ``bench`` and ``eval``.

Results go to stdout (or ``--out``) as JSON/CSV. Failures print a JSON
object ``{"error": <category>, "message": ...}`` on stderr and exit with a
category-specific non-zero code.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .config import CONFIG_ENV, PRESETS, load_bench_config, load_run_config
from .errors import (
    AllSplitsFailedError,
    ConfigError,
    DegenerateGeometryError,
    InsufficientCorrespondencesError,
    PlyParseError,
    RegistrationError,
    ValidationError,
)
from .features import match_descriptors, prepare_cloud
from .geometry import PointCloud, voxel_downsample
from .splitting import solve_with_splits
from .synthbench import is_success, make_standin_cloud, rotation_error, run_campaign, translation_error

EXIT_CODES = {
    ConfigError: 2,
    PlyParseError: 3,
    InsufficientCorrespondencesError: 4,
    DegenerateGeometryError: 5,
    AllSplitsFailedError: 5,
    ValidationError: 6,
}


def exit_code_for(exc):
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return 1


def _solver_flags(p):
    p.add_argument("--config", help=f"INI config file (default: ${CONFIG_ENV})")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--voxel", type=float, dest="voxel_size")
    p.add_argument("--normal-radius", type=float)
    p.add_argument("--feature-radius", type=float)
    p.add_argument("--splits", type=int, dest="num_splits")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iterations")
    p.add_argument("--scheme", choices=["contiguous", "shuffled", "spatial"])
    p.add_argument("--selection", choices=["subcloud", "full"])
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold-rot-deg", type=float)
    p.add_argument("--threshold-trans-m", type=float)


_RUN_KEYS = ("voxel_size", "normal_radius", "feature_radius", "num_splits", "alpha0", "beta",
             "epsilon", "max_iterations", "scheme", "selection", "seed",
             "threshold_rot_deg", "threshold_trans_m")


def _run_config(args):
    return load_run_config(args.config, args.preset, **{k: getattr(args, k) for k in _RUN_KEYS})


def _emit(text, out):
    if out:
        with fileio.atomic_write(out) as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _finite_or_none(x):
    return float(x) if np.isfinite(x) else None


def register(source_path, target_path, config, matches_path=None):
    """Full pipeline; returns the result record as a dict."""
    start = time.perf_counter()
    source = fileio.read_cloud(source_path)
    target = fileio.read_cloud(target_path)
    if matches_path:
        corr = fileio.read_correspondences(matches_path)
        src_used, tgt_used = source, target
    else:
        params = config.features()
        src_used, desc_s = prepare_cloud(source, params)
        tgt_used, desc_t = prepare_cloud(target, params)
        corr = match_descriptors(desc_s, desc_t)
    if len(corr) < 3:
        raise InsufficientCorrespondencesError(
            f"insufficient correspondences: {len(corr)} mutual matches, need at least 3"
        )
    rep = solve_with_splits(corr, src_used, tgt_used, config.gnc(), config.split())
    ms = (time.perf_counter() - start) * 1e3
    win = rep.winning_report
    return {
        "transform": fileio.transform_to_list(rep.transform),
        "final_loss": win.final_gamma,
        "num_correspondences": len(corr),
        "num_splits": config.num_splits,
        "per_split_losses": [_finite_or_none(x) for x in rep.losses],
        "winner": rep.winner,
        "wall_time_ms": ms,
        "config": {
            **config.echo(),
            "source": str(source_path),
            "target": str(target_path),
            "matches": str(matches_path) if matches_path else None,
        },
    }


def cmd_register(args):
    cfg = _run_config(args)
    rec = register(args.source, args.target, cfg, args.matches)
    _emit(fileio.write_json(rec), args.out)
    return 0


def cmd_features(args):
    cfg = _run_config(args)
    params = cfg.features()
    source = fileio.read_cloud(args.source)
    target = fileio.read_cloud(args.target)
    src_d, desc_s = prepare_cloud(source, params)
    tgt_d, desc_t = prepare_cloud(target, params)
    corr = match_descriptors(desc_s, desc_t)
    if args.dump_dir:
        d = Path(args.dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        fileio.write_cloud(src_d, d / "source_down.ply")
        fileio.write_cloud(tgt_d, d / "target_down.ply")
        for name, desc in (("source_fpfh.csv", desc_s), ("target_fpfh.csv", desc_t)):
            with fileio.atomic_write(d / name) as fh:
                np.savetxt(fh, desc, delimiter=",", fmt="%.10g")
    if args.out:
        fileio.write_correspondences(corr, args.out)
    else:
        sys.stdout.write("src_idx,tgt_idx\n")
        for a, b in zip(corr.source_indices, corr.target_indices):
            sys.stdout.write(f"{a},{b}\n")
    return 0


def cmd_bench(args):
    bc = load_bench_config(args.config_path)
    if bc.source == "builtin":
        src = make_standin_cloud(bc.source_points, bc.source_seed)
    else:
        src = fileio.read_cloud(bc.source)
    src = voxel_downsample(src, bc.voxel_size)
    res = run_campaign(src, bc.scenarios, bc.methods, (bc.threshold_rot_deg, bc.threshold_trans_m))
    if args.records:
        with fileio.atomic_write(args.records) as fh:
            fh.write(res.records_jsonl())
    _emit(res.to_csv(timing=bc.timing), args.out)
    return 0


def cmd_eval(args):
    est = fileio.read_transform(args.estimate)
    gt = fileio.read_transform(args.ground_truth)
    rot_t = args.threshold_rot_deg if args.threshold_rot_deg is not None else 10.0
    tr_t = args.threshold_trans_m if args.threshold_trans_m is not None else 1.0
    re_, te = rotation_error(est, gt), translation_error(est, gt)
    rec = {
        "rotation_error_deg": re_,
        "translation_error_m": te,
        "success": is_success(re_, te, rot_t, tr_t),
        "thresholds": {"rotation_deg": rot_t, "translation_m": tr_t},
    }
    _emit(json.dumps(rec, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="splitgnc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="estimate the transform aligning SOURCE onto TARGET")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--matches", help="CSV with header src_idx,tgt_idx; skips the FPFH front end")
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("features", help="downsample, describe and mutually match two clouds")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--out", help="matches CSV (indices refer to the downsampled clouds)")
    p.add_argument("--dump-dir", help="also write downsampled clouds and descriptor tables here")
    _solver_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("bench", help="run a synthetic outlier campaign")
    p.add_argument("config_path")
    p.add_argument("--out", help="aggregate CSV (default: stdout)")
    p.add_argument("--records", help="write per-trial JSON lines here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="compare an estimated transform with ground truth")
    p.add_argument("estimate")
    p.add_argument("ground_truth")
    p.add_argument("--threshold-rot-deg", type=float)
    p.add_argument("--threshold-trans-m", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RegistrationError, OSError) as exc:
        category = getattr(exc, "category", "io")
        sys.stderr.write(json.dumps({"error": category, "message": str(exc)}) + "\n")
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
