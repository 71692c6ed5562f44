"""Command-line interface: estimation over pair files, synthetic benchmarks,
and metric evaluation of result files against ground truth.

Exit codes: 0 success, 1 usage, 2 I/O, 3 parse. Per-pair estimation failures
do not affect the exit code; they yield status=failed result records.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace

import numpy as np

from .geometry import ErrorThresholds, Pose, focal_error, pose_auc, pose_error
from .ransac import EstimationConfig, estimate
from .records import (
    PairRecord,
    ParseError,
    ResultRecord,
    parse_pair_records,
    parse_result_records,
    write_result_records,
)
from . import synthetic

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_PARSE = 3

CONFIG_KEYS = {
    "mode": "calibrated",
    "tau_r": 8.0,
    "tau_s": 2.0,
    "lambda_s": 1.0,
    "min_iters": 1000,
    "max_iters": 10000,
    "lo_steps": 4,
    "confidence": 0.9999,
    "seed": 0,
    "threads": 1,
    "timing": "off",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="pairpose", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate relative poses for a pair file")
    est.add_argument("input", help="pair-record file (JSON lines)")
    est.add_argument("-o", "--output", required=True, help="result-record file to write")
    est.add_argument("--config", help="JSON config file; flags override its values")
    est.add_argument("--mode", choices=["calibrated", "shared-focal", "two-focal"])
    est.add_argument("--tau-r", type=float, help="reprojection inlier threshold [px]")
    est.add_argument("--tau-s", type=float, help="Sampson inlier threshold [px]")
    est.add_argument("--lambda-s", type=float, help="epipolar score weight")
    est.add_argument("--min-iters", type=int)
    est.add_argument("--max-iters", type=int)
    est.add_argument("--lo-steps", type=int)
    est.add_argument("--confidence", type=float)
    est.add_argument("--seed", type=int)
    est.add_argument("--threads", type=int, help="parallel workers across pairs")
    est.add_argument("--timing", choices=["off", "wall"], help="elapsed_seconds source")

    ben = sub.add_parser("bench", help="run a synthetic benchmark experiment")
    ben.add_argument("spec", help="benchmark spec file (JSON)")
    ben.add_argument(
        "--experiment", required=True, choices=["shift", "hybrid", "noise"]
    )
    ben.add_argument("-o", "--outdir", default=".", help="directory for report files")
    ben.add_argument("--dry-run", action="store_true", help="print resolved config only")

    ev = sub.add_parser("eval", help="score a result file against ground truth")
    ev.add_argument("results", help="result-record file")
    ev.add_argument("ground_truth", help="ground-truth result-record file")
    ev.add_argument("-o", "--output", help="optional JSON summary file")
    return parser


# ---------------------------------------------------------------------------
# estimate


def _resolve_config(args) -> dict:
    cfg = dict(CONFIG_KEYS)
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.lineno, f"config file: {exc.msg}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise _UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    cfg["mode"] = str(cfg["mode"]).replace("-", "_")
    return cfg


def _estimation_config(cfg: dict, seed: int) -> EstimationConfig:
    return EstimationConfig(
        mode=cfg["mode"],
        thresholds=ErrorThresholds(cfg["tau_r"], cfg["tau_s"], cfg["lambda_s"]),
        min_iterations=int(cfg["min_iters"]),
        max_iterations=int(cfg["max_iters"]),
        lo_steps=int(cfg["lo_steps"]),
        confidence=float(cfg["confidence"]),
        seed=seed,
    )


def _pair_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), index]).generate_state(1, np.uint64)[0])


def estimate_pair_record(rec: PairRecord, cfg: dict, index: int) -> ResultRecord:
    """Run the estimator on one pair record; failures become failed records."""
    econfig = _estimation_config(cfg, _pair_seed(cfg["seed"], index))
    start = time.perf_counter()
    try:
        corr = rec.correspondences()
        if econfig.mode == "calibrated":
            if rec.camera1 is None or rec.camera2 is None:
                raise ValueError("calibrated mode requires intrinsics")
            report = estimate(corr, econfig, cams=(rec.camera1, rec.camera2))
        else:
            report = estimate(corr, econfig, principal_points=rec.principal_points())
    except ValueError as exc:
        return ResultRecord(pair_id=rec.pair_id, status="failed", reason=str(exc))
    if not report.success:
        return ResultRecord(
            pair_id=rec.pair_id,
            status="failed",
            reason="no valid hypothesis found",
            iterations=report.iterations,
        )
    elapsed = time.perf_counter() - start if cfg["timing"] == "wall" else 0.0
    best = report.best
    return ResultRecord(
        pair_id=rec.pair_id,
        status="ok",
        R=best.pose.R,
        t=best.pose.t,
        alpha=best.affine.alpha,
        beta1=best.affine.beta1,
        beta2=best.affine.beta2,
        f1=best.focal1,
        f2=best.focal2,
        inliers=report.masks.counts(),
        score=report.score,
        iterations=report.iterations,
        lo_runs=report.lo_runs,
        elapsed_seconds=elapsed,
    )


def _estimate_worker(payload):
    rec, cfg, index = payload
    return estimate_pair_record(rec, cfg, index)


def cmd_estimate(args) -> int:
    cfg = _resolve_config(args)
    records, _ = parse_pair_records(args.input)
    jobs = [(rec, cfg, i) for i, rec in enumerate(records)]
    threads = int(cfg["threads"])
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_estimate_worker, jobs))
    else:
        results = [_estimate_worker(job) for job in jobs]
    write_result_records(args.output, results, config=cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _load_bench_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.lineno, f"bench spec: {exc.msg}") from exc
    scene_kwargs = dict(spec.get("scene", {}))
    if "affine_gt" in scene_kwargs and scene_kwargs["affine_gt"] is not None:
        from .geometry import AffineCorrection

        a = scene_kwargs["affine_gt"]
        scene_kwargs["affine_gt"] = AffineCorrection(a["alpha"], a["beta1"], a["beta2"])
    for key in ("depth_range", "focal_range", "baseline_range", "image_size"):
        if key in scene_kwargs:
            scene_kwargs[key] = tuple(scene_kwargs[key])
    scene = synthetic.SceneSpec(**scene_kwargs)
    est_cfg = spec.get("estimator", {})
    base_cfg = EstimationConfig(
        mode=est_cfg.get("mode", "calibrated"),
        thresholds=ErrorThresholds(
            est_cfg.get("tau_r", 8.0), est_cfg.get("tau_s", 2.0), est_cfg.get("lambda_s", 1.0)
        ),
        min_iterations=est_cfg.get("min_iters", 100),
        max_iterations=est_cfg.get("max_iters", 500),
        lo_steps=est_cfg.get("lo_steps", 4),
    )
    return spec, scene, base_cfg


def _write_table(path, rows):
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _write_raw(path, raw):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in raw:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def cmd_bench(args) -> int:
    spec, scene, base_cfg = _load_bench_spec(args.spec)
    params = spec.get(args.experiment, {})
    if args.dry_run:
        resolved = {
            "experiment": args.experiment,
            "scene": asdict(scene),
            "estimator": {
                "mode": base_cfg.mode,
                "tau_r": base_cfg.thresholds.tau_r,
                "tau_s": base_cfg.thresholds.tau_s,
                "lambda_s": base_cfg.thresholds.lambda_s,
                "min_iters": base_cfg.min_iterations,
                "max_iters": base_cfg.max_iterations,
                "lo_steps": base_cfg.lo_steps,
            },
            "params": params,
        }
        print(json.dumps(resolved, indent=2, default=str))
        return EXIT_OK

    if args.experiment == "shift":
        rows, raw = synthetic.run_shift_ablation(
            scene,
            params.get("shift_fractions", [0.0, 0.1, 0.25, 0.5]),
            methods=tuple(params.get("methods", ["full", "scale_only", "pnp_like"])),
            n_trials=params.get("n_trials", 20),
            config=base_cfg,
        )
    elif args.experiment == "hybrid":
        rows, raw = synthetic.run_hybrid_ablation(
            scene,
            variants=tuple(params.get("variants", synthetic.HYBRID_VARIANTS)),
            garbage_fraction=params.get("garbage_fraction", 0.5),
            n_pairs=params.get("n_pairs", 50),
            config=base_cfg,
        )
    else:
        rows, raw = synthetic.run_noise_sweep(
            scene,
            noise_sigmas=params.get("sigmas", [0.0, 0.5, 1.0, 2.0]),
            n_trials=params.get("n_trials", 20),
            config=base_cfg,
        )
    os.makedirs(args.outdir, exist_ok=True)
    _write_table(os.path.join(args.outdir, f"table_{args.experiment}.csv"), rows)
    _write_raw(os.path.join(args.outdir, f"raw_{args.experiment}.jsonl"), raw)
    for row in rows:
        print(json.dumps(row))
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def evaluate_results(results, ground_truth) -> dict:
    gt_by_id = {rec.pair_id: rec for rec in ground_truth}
    if set(r.pair_id for r in results) != set(gt_by_id):
        raise _UsageError("result and ground-truth pair ids do not match")
    rot_errs, trans_errs, focal_errs, pose_errs = [], [], [], []
    failed = 0
    for rec in results:
        gt = gt_by_id[rec.pair_id]
        if gt.status != "ok":
            continue
        if rec.status != "ok":
            failed += 1
            rot_errs.append(np.inf)
            trans_errs.append(np.inf)
            pose_errs.append(np.inf)
            continue
        er, et = pose_error(Pose(rec.R, rec.t), Pose(gt.R, gt.t))
        rot_errs.append(er)
        trans_errs.append(et)
        pose_errs.append(max(er, et))
        if rec.f1 is not None and gt.f1 is not None:
            ef = focal_error(rec.f1, gt.f1)
            if rec.f2 is not None and gt.f2 is not None:
                ef = max(ef, focal_error(rec.f2, gt.f2))
            focal_errs.append(ef)
    aucs = pose_auc(pose_errs, [5.0, 10.0, 20.0])
    summary = {
        "n_pairs": len(pose_errs),
        "n_failed": failed,
        "median_rot_err_deg": float(np.median(rot_errs)),
        "median_trans_err_deg": float(np.median(trans_errs)),
        "auc5": aucs[0],
        "auc10": aucs[1],
        "auc20": aucs[2],
    }
    if focal_errs:
        summary["median_focal_err_pct"] = float(np.median(focal_errs))
    return summary


def cmd_eval(args) -> int:
    results, _ = parse_result_records(args.results)
    gt, _ = parse_result_records(args.ground_truth)
    summary = evaluate_results(results, gt)
    text = json.dumps(summary, indent=2)
    print(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_eval(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
