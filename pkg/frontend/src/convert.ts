/**
 * Converters from externally produced matcher/depth exports to pair-record
 * files the estimator CLI accepts.
 *
 * Input schemas (CSV, optional header line, comma-separated):
 *   matches file:  x1,y1,x2,y2      one match per line, pixel coordinates
 *   depths file:   d1,d2            per-match depth samples, same row order
 */

import { readFileSync, writeFileSync } from "node:fs";

import { CameraJson, PairRecord, RecordFormatError, serializePairs } from "./records.js";

export interface ConvertMeta {
  pairId: string;
  image1: [number, number];
  image2: [number, number];
  camera1?: CameraJson | null;
  camera2?: CameraJson | null;
}

function parseCsv(text: string, columns: number, what: string): number[][] {
  const rows: number[][] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    const cells = line.split(",").map((c) => c.trim());
    if (i === 0 && cells.some((c) => Number.isNaN(Number(c)))) continue; // header
    if (cells.length !== columns) {
      throw new RecordFormatError(
        `${what}: expected ${columns} columns, got ${cells.length}`,
        i + 1,
      );
    }
    const values = cells.map(Number);
    const bad = values.findIndex((v) => !Number.isFinite(v));
    if (bad >= 0) {
      throw new RecordFormatError(`${what}: column ${bad + 1} is not a finite number`, i + 1);
    }
    rows.push(values);
  }
  return rows;
}

/** Combine matcher and depth exports into a PairRecord. */
export function buildPairRecord(
  matchesCsv: string,
  depthsCsv: string,
  meta: ConvertMeta,
): PairRecord {
  const matches = parseCsv(matchesCsv, 4, "matches file");
  const depths = parseCsv(depthsCsv, 2, "depths file");
  if (matches.length !== depths.length) {
    throw new RecordFormatError(
      `row count mismatch: ${matches.length} matches vs ${depths.length} depth rows`,
    );
  }
  if (matches.length === 0) {
    throw new RecordFormatError("matches file holds no data rows");
  }
  return {
    pair_id: meta.pairId,
    image1: meta.image1,
    image2: meta.image2,
    camera1: meta.camera1 ?? null,
    camera2: meta.camera2 ?? null,
    matches: matches.map((m, i) => [...m, depths[i][0], depths[i][1]]),
  };
}

/** Read matcher + depth export files and write a pair-record file. */
export function convertExternal(
  matchesPath: string,
  depthsPath: string,
  outputPath: string,
  meta: ConvertMeta,
): PairRecord {
  const rec = buildPairRecord(
    readFileSync(matchesPath, "utf-8"),
    readFileSync(depthsPath, "utf-8"),
    meta,
  );
  writeFileSync(outputPath, serializePairs([rec]));
  return rec;
}
