"""Line-delimited record formats for correspondence input and estimation output.

Both formats are JSON Lines with an explicit version and kind per line:

  pair record    {"version": 1, "kind": "pair", "pair_id": ..., "image1": [w, h],
                  "image2": [w, h], "camera1": {"focal", "cx", "cy"} | null,
                  "camera2": ..., "matches": [[x1, y1, x2, y2, d1, d2], ...]}
  result record  {"version": 1, "kind": "result", "pair_id": ..., "status":
                  "ok" | "failed", "R": [9 row-major], "t": [3], "alpha",
                  "beta1", "beta2", "f1": null | px, "f2": ..., "inliers":
                  [n1, n2, n3], "score", "iterations", "lo_runs",
                  "elapsed_seconds", "reason": only when failed}
  header record  {"version": 1, "kind": "header", "config": {...}} -- written
                  first in output files; parsers skip it.

Depth priors travel as per-match scalars (unit-free); coordinates are pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import CameraModel, Correspondences

__all__ = [
    "FORMAT_VERSION",
    "ParseError",
    "PairRecord",
    "ResultRecord",
    "parse_pair_records",
    "parse_result_records",
    "write_pair_records",
    "write_result_records",
]

FORMAT_VERSION = 1
BOUNDS_SLACK_PX = 1.0


class ParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    image1: tuple[int, int]  # (w, h)
    image2: tuple[int, int]
    matches: np.ndarray  # (N, 6) rows (x1, y1, x2, y2, d1, d2)
    camera1: Optional[CameraModel] = None
    camera2: Optional[CameraModel] = None

    def __post_init__(self):
        object.__setattr__(
            self, "matches", np.asarray(self.matches, dtype=np.float64).reshape(-1, 6)
        )
        for side, (w, h) in (("1", self.image1), ("2", self.image2)):
            cols = self.matches[:, 0:2] if side == "1" else self.matches[:, 2:4]
            if len(cols) and (
                np.any(cols[:, 0] < -BOUNDS_SLACK_PX)
                or np.any(cols[:, 0] > w + BOUNDS_SLACK_PX)
                or np.any(cols[:, 1] < -BOUNDS_SLACK_PX)
                or np.any(cols[:, 1] > h + BOUNDS_SLACK_PX)
            ):
                raise ValueError(f"match coordinates outside image {side} bounds")
        if not np.all(np.isfinite(self.matches)):
            raise ValueError("matches must be finite")

    def correspondences(self) -> Correspondences:
        return Correspondences.from_array(self.matches)

    def principal_points(self):
        pp1 = (
            np.array([self.camera1.cx, self.camera1.cy])
            if self.camera1
            else np.array(self.image1, dtype=float) / 2.0
        )
        pp2 = (
            np.array([self.camera2.cx, self.camera2.cy])
            if self.camera2
            else np.array(self.image2, dtype=float) / 2.0
        )
        return pp1, pp2


@dataclass(frozen=True)
class ResultRecord:
    pair_id: str
    status: str  # "ok" | "failed"
    R: Optional[np.ndarray] = None  # (3, 3)
    t: Optional[np.ndarray] = None  # (3,)
    alpha: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    f1: Optional[float] = None
    f2: Optional[float] = None
    inliers: tuple[int, int, int] = (0, 0, 0)
    score: float = float("inf")
    iterations: int = 0
    lo_runs: int = 0
    elapsed_seconds: float = 0.0
    reason: Optional[str] = None

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "ok":
            R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
            object.__setattr__(self, "R", R)
            object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))
            if np.abs(R.T @ R - np.eye(3)).max() > 1e-6:
                raise ValueError("R is not orthonormal")


# ---------------------------------------------------------------------------
# serialization


def _cam_to_json(cam: Optional[CameraModel]):
    if cam is None:
        return None
    return {"focal": cam.focal, "cx": cam.cx, "cy": cam.cy}


def _cam_from_json(obj, line_no):
    if obj is None:
        return None
    try:
        return CameraModel(float(obj["focal"]), float(obj["cx"]), float(obj["cy"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(line_no, f"bad camera object: {exc}") from exc


def pair_to_json(rec: PairRecord) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": "pair",
        "pair_id": rec.pair_id,
        "image1": list(rec.image1),
        "image2": list(rec.image2),
        "camera1": _cam_to_json(rec.camera1),
        "camera2": _cam_to_json(rec.camera2),
        "matches": rec.matches.tolist(),
    }


def result_to_json(rec: ResultRecord) -> dict:
    obj = {
        "version": FORMAT_VERSION,
        "kind": "result",
        "pair_id": rec.pair_id,
        "status": rec.status,
        "R": rec.R.reshape(-1).tolist() if rec.R is not None else None,
        "t": rec.t.tolist() if rec.t is not None else None,
        "alpha": rec.alpha,
        "beta1": rec.beta1,
        "beta2": rec.beta2,
        "f1": rec.f1,
        "f2": rec.f2,
        "inliers": list(rec.inliers),
        "score": rec.score if np.isfinite(rec.score) else None,
        "iterations": rec.iterations,
        "lo_runs": rec.lo_runs,
        "elapsed_seconds": rec.elapsed_seconds,
    }
    if rec.reason is not None:
        obj["reason"] = rec.reason
    return obj


def _parse_line(line: str, line_no: int) -> Optional[dict]:
    line = line.strip()
    if not line:
        return None
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ParseError(line_no, "record must be a JSON object")
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise ParseError(line_no, f"unsupported version {version!r}")
    return obj


def parse_pair_records(path) -> tuple[list[PairRecord], Optional[dict]]:
    """Read pair records; returns (records, header config or None)."""
    records = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            obj = _parse_line(line, line_no)
            if obj is None:
                continue
            kind = obj.get("kind")
            if kind == "header":
                header = obj.get("config")
                continue
            if kind != "pair":
                raise ParseError(line_no, f"expected a pair record, got kind {kind!r}")
            try:
                rec = PairRecord(
                    pair_id=str(obj["pair_id"]),
                    image1=tuple(int(v) for v in obj["image1"]),
                    image2=tuple(int(v) for v in obj["image2"]),
                    matches=obj["matches"],
                    camera1=_cam_from_json(obj.get("camera1"), line_no),
                    camera2=_cam_from_json(obj.get("camera2"), line_no),
                )
            except ParseError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(line_no, str(exc)) from exc
            records.append(rec)
    return records, header


def parse_result_records(path) -> tuple[list[ResultRecord], Optional[dict]]:
    records = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            obj = _parse_line(line, line_no)
            if obj is None:
                continue
            kind = obj.get("kind")
            if kind == "header":
                header = obj.get("config")
                continue
            if kind != "result":
                raise ParseError(line_no, f"expected a result record, got kind {kind!r}")
            try:
                score = obj.get("score")
                rec = ResultRecord(
                    pair_id=str(obj["pair_id"]),
                    status=obj["status"],
                    R=obj.get("R"),
                    t=obj.get("t"),
                    alpha=obj.get("alpha"),
                    beta1=obj.get("beta1"),
                    beta2=obj.get("beta2"),
                    f1=obj.get("f1"),
                    f2=obj.get("f2"),
                    inliers=tuple(obj.get("inliers", (0, 0, 0))),
                    score=float("inf") if score is None else float(score),
                    iterations=int(obj.get("iterations", 0)),
                    lo_runs=int(obj.get("lo_runs", 0)),
                    elapsed_seconds=float(obj.get("elapsed_seconds", 0.0)),
                    reason=obj.get("reason"),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(line_no, str(exc)) from exc
            records.append(rec)
    return records, header


def _write_lines(path, objs):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def write_pair_records(path, records, config: Optional[dict] = None) -> None:
    objs = []
    if config is not None:
        objs.append({"version": FORMAT_VERSION, "kind": "header", "config": config})
    objs.extend(pair_to_json(r) for r in records)
    _write_lines(path, objs)


def write_result_records(path, records, config: Optional[dict] = None) -> None:
    objs = []
    if config is not None:
        objs.append({"version": FORMAT_VERSION, "kind": "header", "config": config})
    objs.extend(result_to_json(r) for r in records)
    _write_lines(path, objs)
