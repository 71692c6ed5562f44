import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { buildPairRecord, convertExternal } from "../src/convert.js";
import { parsePairs, parseResults, RecordFormatError } from "../src/records.js";
import { syntheticPair } from "./fixtures.js";

const PYTHON = process.env.PAIRPOSE_PYTHON ?? "python3";
const work = mkdtempSync(join(tmpdir(), "pairpose-convert-"));

afterAll(() => rmSync(work, { recursive: true, force: true }));

const META = {
  pairId: "converted0",
  image1: [640, 480] as [number, number],
  image2: [640, 480] as [number, number],
  camera1: { focal: 500, cx: 320, cy: 240 },
  camera2: { focal: 500, cx: 320, cy: 240 },
};

describe("convertExternal", () => {
  it("builds a parseable record from a minimal 3-match fixture", () => {
    const matches = "x1,y1,x2,y2\n10,20,30,40\n50,60,70,80\n90,100,110,120\n";
    const depths = "d1,d2\n1.5,2.5\n0.7,0.9\n3.1,2.9\n";
    const rec = buildPairRecord(matches, depths, META);
    expect(rec.matches).toHaveLength(3);
    expect(rec.matches[0]).toEqual([10, 20, 30, 40, 1.5, 2.5]);
  });

  it("rejects a depths file missing a column", () => {
    const matches = "10,20,30,40\n50,60,70,80\n90,100,110,120\n";
    const depths = "1.5\n0.7\n3.1\n";
    expect(() => buildPairRecord(matches, depths, META)).toThrow(/depths file.*columns/);
  });

  it("rejects mismatched row counts", () => {
    const matches = "10,20,30,40\n50,60,70,80\n";
    const depths = "1.5,2.5\n";
    expect(() => buildPairRecord(matches, depths, META)).toThrow(/row count mismatch/);
  });

  it("rejects non-numeric cells with a field diagnostic", () => {
    const matches = "10,20,30,40\n50,oops,70,80\n";
    const depths = "1.5,2.5\n0.7,0.9\n";
    expect(() => buildPairRecord(matches, depths, META)).toThrow(RecordFormatError);
    expect(() => buildPairRecord(matches, depths, META)).toThrow(/line 2.*column 2/);
  });

  it("round-trips the written file through the parser", () => {
    const fixture = syntheticPair(7, 12);
    const matchesCsv = fixture.matches
      .map((m) => m.slice(0, 4).join(","))
      .join("\n");
    const depthsCsv = fixture.matches.map((m) => `${m[4]},${m[5]}`).join("\n");
    const mPath = join(work, "matches.csv");
    const dPath = join(work, "depths.csv");
    const outPath = join(work, "pair.jsonl");
    writeFileSync(mPath, matchesCsv);
    writeFileSync(dPath, depthsCsv);
    const rec = convertExternal(mPath, dPath, outPath, META);
    const { pairs } = parsePairs(readFileSync(outPath, "utf-8"));
    expect(pairs).toHaveLength(1);
    expect(pairs[0].pair_id).toBe(rec.pair_id);
    expect(pairs[0].matches).toEqual(rec.matches);
  });

  it("produces a file the estimator CLI accepts", () => {
    const fixture = syntheticPair(8, 40);
    const mPath = join(work, "m2.csv");
    const dPath = join(work, "d2.csv");
    const outPath = join(work, "pair2.jsonl");
    writeFileSync(mPath, fixture.matches.map((m) => m.slice(0, 4).join(",")).join("\n"));
    writeFileSync(dPath, fixture.matches.map((m) => `${m[4]},${m[5]}`).join("\n"));
    convertExternal(mPath, dPath, outPath, {
      ...META,
      camera1: fixture.camera1!,
      camera2: fixture.camera2!,
    });
    const resPath = join(work, "res2.jsonl");
    execFileSync(PYTHON, [
      "-m", "pairpose.cli", "estimate", outPath, "-o", resPath,
      "--mode", "calibrated", "--seed", "3", "--min-iters", "40", "--max-iters", "120",
    ]);
    const { results } = parseResults(readFileSync(resPath, "utf-8"));
    expect(results[0].status).toBe("ok");
  }, 60000);
});
