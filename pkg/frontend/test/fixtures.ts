/** Deterministic synthetic two-view fixtures for the binding tests. */

import { EstimatePairInput } from "../src/estimator.js";

/** mulberry32: tiny seeded PRNG, good enough for fixture geometry. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

type Vec3 = [number, number, number];

function rotate(axis: Vec3, angle: number, v: Vec3): Vec3 {
  // Rodrigues rotation of v about the unit axis
  const [kx, ky, kz] = axis;
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const dot = kx * v[0] + ky * v[1] + kz * v[2];
  const cross: Vec3 = [
    ky * v[2] - kz * v[1],
    kz * v[0] - kx * v[2],
    kx * v[1] - ky * v[0],
  ];
  return [
    v[0] * c + cross[0] * s + kx * dot * (1 - c),
    v[1] * c + cross[1] * s + ky * dot * (1 - c),
    v[2] * c + cross[2] * s + kz * dot * (1 - c),
  ];
}

export function syntheticPair(seed: number, nPoints = 60): EstimatePairInput {
  const rand = rng(seed);
  const f = 500 + 400 * rand();
  const w = 640;
  const h = 480;
  const ax: Vec3 = [rand() - 0.5, rand() - 0.5, rand() - 0.5];
  const norm = Math.hypot(...ax);
  const axis: Vec3 = [ax[0] / norm, ax[1] / norm, ax[2] / norm];
  const angle = 0.1 + 0.3 * rand();
  const t: Vec3 = [0.4 * (rand() - 0.5), 0.4 * (rand() - 0.5), 0.3 * (rand() - 0.5)];
  const alpha = 0.5 + 1.5 * rand();
  const beta1 = (rand() - 0.5) * 2;
  const beta2 = (rand() - 0.5) * 2;

  const matches: number[][] = [];
  while (matches.length < nPoints) {
    const z = 2 + 8 * rand();
    const u = (rand() - 0.5) * w;
    const v = (rand() - 0.5) * h;
    const P1: Vec3 = [(u / f) * z, (v / f) * z, z];
    const Pr = rotate(axis, angle, P1);
    const P2: Vec3 = [Pr[0] + t[0], Pr[1] + t[1], Pr[2] + t[2]];
    if (P2[2] < 0.2) continue;
    const u2 = (P2[0] / P2[2]) * f;
    const v2 = (P2[1] / P2[2]) * f;
    if (Math.abs(u2) > w / 2 || Math.abs(v2) > h / 2) continue;
    const noise = () => (rand() - 0.5) * 1.0;
    matches.push([
      u + w / 2 + noise(),
      v + h / 2 + noise(),
      u2 + w / 2 + noise(),
      v2 + h / 2 + noise(),
      P1[2] - beta1,
      P2[2] / alpha - beta2,
    ]);
  }
  return {
    matches,
    image1: [w, h],
    image2: [w, h],
    camera1: { focal: f, cx: w / 2, cy: h / 2 },
    camera2: { focal: f, cx: w / 2, cy: h / 2 },
    pairId: `fixture${seed}`,
  };
}
