/**
 * The pairpose line-delimited record formats (version 1).
 *
 * Each line is a JSON object with `version` and `kind`. Pair records carry
 * matches as [x1, y1, x2, y2, d1, d2] rows in pixel coordinates with
 * unit-free depth priors; result records carry the estimated pose, depth
 * correction, optional focals, and bookkeeping. Output files start with a
 * header record echoing the effective configuration.
 */

export const FORMAT_VERSION = 1;

export interface CameraJson {
  focal: number;
  cx: number;
  cy: number;
}

export interface PairRecord {
  pair_id: string;
  image1: [number, number]; // (w, h)
  image2: [number, number];
  camera1: CameraJson | null;
  camera2: CameraJson | null;
  matches: number[][]; // rows of 6
}

export interface ResultRecord {
  pair_id: string;
  status: "ok" | "failed";
  R: number[] | null; // 9 numbers, row-major
  t: number[] | null;
  alpha: number | null;
  beta1: number | null;
  beta2: number | null;
  f1: number | null;
  f2: number | null;
  inliers: [number, number, number];
  score: number | null;
  iterations: number;
  lo_runs: number;
  elapsed_seconds: number;
  reason?: string;
}

export class RecordFormatError extends Error {
  constructor(message: string, public readonly line?: number) {
    super(line === undefined ? message : `line ${line}: ${message}`);
    this.name = "RecordFormatError";
  }
}

export function pairToLine(rec: PairRecord): string {
  validatePair(rec);
  return JSON.stringify({
    version: FORMAT_VERSION,
    kind: "pair",
    pair_id: rec.pair_id,
    image1: rec.image1,
    image2: rec.image2,
    camera1: rec.camera1,
    camera2: rec.camera2,
    matches: rec.matches,
  });
}

export function serializePairs(records: PairRecord[], config?: object): string {
  const lines: string[] = [];
  if (config !== undefined) {
    lines.push(JSON.stringify({ version: FORMAT_VERSION, kind: "header", config }));
  }
  for (const rec of records) lines.push(pairToLine(rec));
  return lines.join("\n") + "\n";
}

export function validatePair(rec: PairRecord): void {
  if (!rec.pair_id) throw new RecordFormatError("pair_id must be a non-empty string");
  for (const key of ["image1", "image2"] as const) {
    const size = rec[key];
    if (!Array.isArray(size) || size.length !== 2 || size.some((v) => !(v > 0))) {
      throw new RecordFormatError(`${key} must be [width, height] with positive entries`);
    }
  }
  rec.matches.forEach((row, i) => {
    if (!Array.isArray(row) || row.length !== 6 || row.some((v) => !Number.isFinite(v))) {
      throw new RecordFormatError(`match row ${i} must hold 6 finite numbers`);
    }
  });
  for (const [side, cam, size] of [
    ["camera1", rec.camera1, rec.image1],
    ["camera2", rec.camera2, rec.image2],
  ] as const) {
    if (cam !== null && !(Number.isFinite(cam.focal) && cam.focal > 0)) {
      throw new RecordFormatError(`${side}.focal must be positive`);
    }
    void size;
  }
}

function parseLines(text: string): { kind: string; obj: any; line: number }[] {
  const out: { kind: string; obj: any; line: number }[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new RecordFormatError(`invalid JSON: ${(err as Error).message}`, i + 1);
    }
    if (obj.version !== FORMAT_VERSION) {
      throw new RecordFormatError(`unsupported version ${obj.version}`, i + 1);
    }
    out.push({ kind: obj.kind, obj, line: i + 1 });
  }
  return out;
}

export function parseResults(text: string): { results: ResultRecord[]; header: object | null } {
  const results: ResultRecord[] = [];
  let header: object | null = null;
  for (const { kind, obj, line } of parseLines(text)) {
    if (kind === "header") {
      header = obj.config ?? null;
      continue;
    }
    if (kind !== "result") {
      throw new RecordFormatError(`expected a result record, got kind ${kind}`, line);
    }
    if (obj.status !== "ok" && obj.status !== "failed") {
      throw new RecordFormatError(`bad status ${obj.status}`, line);
    }
    results.push(obj as ResultRecord);
  }
  return { results, header };
}

export function parsePairs(text: string): { pairs: PairRecord[]; header: object | null } {
  const pairs: PairRecord[] = [];
  let header: object | null = null;
  for (const { kind, obj, line } of parseLines(text)) {
    if (kind === "header") {
      header = obj.config ?? null;
      continue;
    }
    if (kind !== "pair") {
      throw new RecordFormatError(`expected a pair record, got kind ${kind}`, line);
    }
    const rec = obj as PairRecord;
    try {
      validatePair(rec);
    } catch (err) {
      throw new RecordFormatError((err as Error).message, line);
    }
    pairs.push(rec);
  }
  return { pairs, header };
}
