/**
 * In-memory estimation through the pairpose command line.
 *
 * The binding serializes the matches into a single-pair record file, runs
 * `python -m pairpose.cli estimate`, and parses the result record back, so
 * results are numerically identical to invoking the CLI on the same file
 * with the same seed.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import {
  CameraJson,
  PairRecord,
  RecordFormatError,
  ResultRecord,
  parseResults,
  serializePairs,
} from "./records.js";

export type EstimationMode = "calibrated" | "shared-focal" | "two-focal";

export interface EstimatorOptions {
  mode?: EstimationMode;
  tauR?: number;
  tauS?: number;
  lambdaS?: number;
  minIters?: number;
  maxIters?: number;
  loSteps?: number;
  seed?: number;
  /** python executable used to run the estimator (default: $PAIRPOSE_PYTHON or python3) */
  python?: string;
}

export interface EstimatePairInput {
  /** rows of [x1, y1, x2, y2, d1, d2] in pixels / unit-free depth */
  matches: number[][];
  image1: [number, number];
  image2: [number, number];
  camera1?: CameraJson | null;
  camera2?: CameraJson | null;
  pairId?: string;
}

const MIN_SAMPLE = { calibrated: 5, "shared-focal": 7, "two-focal": 7 } as const;

function pythonExe(opts: EstimatorOptions): string {
  return opts.python ?? process.env.PAIRPOSE_PYTHON ?? "python3";
}

function cliArgs(opts: EstimatorOptions, input: string, output: string): string[] {
  const args = ["-m", "pairpose.cli", "estimate", input, "-o", output];
  args.push("--mode", opts.mode ?? "calibrated");
  if (opts.tauR !== undefined) args.push("--tau-r", String(opts.tauR));
  if (opts.tauS !== undefined) args.push("--tau-s", String(opts.tauS));
  if (opts.lambdaS !== undefined) args.push("--lambda-s", String(opts.lambdaS));
  if (opts.minIters !== undefined) args.push("--min-iters", String(opts.minIters));
  if (opts.maxIters !== undefined) args.push("--max-iters", String(opts.maxIters));
  if (opts.loSteps !== undefined) args.push("--lo-steps", String(opts.loSteps));
  args.push("--seed", String(opts.seed ?? 0));
  return args;
}

/**
 * An immutable estimator configuration bound to a python-side CLI.
 * Valid for any number of estimatePair calls; calls on distinct handles may
 * run concurrently (each call works in its own temp directory).
 */
export class BoundEstimator {
  readonly options: Readonly<EstimatorOptions>;

  constructor(options: EstimatorOptions = {}) {
    this.options = Object.freeze({ ...options });
  }

  estimatePair(input: EstimatePairInput): ResultRecord {
    const mode = this.options.mode ?? "calibrated";
    if (!Array.isArray(input.matches) || input.matches.length < MIN_SAMPLE[mode]) {
      throw new RecordFormatError(
        `too few correspondences: need at least ${MIN_SAMPLE[mode]} for ${mode}`,
      );
    }
    const rec: PairRecord = {
      pair_id: input.pairId ?? "pair0",
      image1: input.image1,
      image2: input.image2,
      camera1: input.camera1 ?? null,
      camera2: input.camera2 ?? null,
      matches: input.matches,
    };
    if (mode === "calibrated" && (rec.camera1 === null || rec.camera2 === null)) {
      throw new RecordFormatError("calibrated mode requires camera1 and camera2");
    }
    const work = mkdtempSync(join(tmpdir(), "pairpose-"));
    try {
      const inputPath = join(work, "pair.jsonl");
      const outputPath = join(work, "result.jsonl");
      writeFileSync(inputPath, serializePairs([rec]));
      execFileSync(pythonExe(this.options), cliArgs(this.options, inputPath, outputPath), {
        stdio: ["ignore", "pipe", "pipe"],
      });
      const { results } = parseResults(readFileSync(outputPath, "utf-8"));
      if (results.length !== 1) {
        throw new RecordFormatError(`expected one result record, got ${results.length}`);
      }
      return results[0];
    } finally {
      rmSync(work, { recursive: true, force: true });
    }
  }
}

/** One-shot convenience wrapper around BoundEstimator. */
export function estimatePair(
  input: EstimatePairInput,
  options: EstimatorOptions = {},
): ResultRecord {
  return new BoundEstimator(options).estimatePair(input);
}
