"""Pair/result record formats: round trips and parse diagnostics."""

import numpy as np
import pytest

from pairpose.geometry import CameraModel
from pairpose.records import (
    PairRecord,
    ParseError,
    ResultRecord,
    parse_pair_records,
    parse_result_records,
    write_pair_records,
    write_result_records,
)


def sample_pair(pid="p0"):
    matches = np.array(
        [
            [10.0, 20.0, 30.0, 40.0, 1.5, 2.5],
            [100.0, 200.0, 120.0, 210.0, 0.7, 0.9],
            [300.0, 400.0, 310.0, 390.0, 3.1, 2.9],
        ]
    )
    return PairRecord(
        pid,
        (640, 480),
        (640, 480),
        matches,
        CameraModel(500.0, 320.0, 240.0),
        CameraModel(510.0, 320.0, 240.0),
    )


def sample_result(pid="p0"):
    return ResultRecord(
        pair_id=pid,
        status="ok",
        R=np.eye(3),
        t=np.array([0.1, 0.2, 0.3]),
        alpha=1.5,
        beta1=0.25,
        beta2=-0.5,
        f1=None,
        f2=None,
        inliers=(3, 2, 3),
        score=42.5,
        iterations=100,
        lo_runs=4,
        elapsed_seconds=0.0,
    )


class TestPairRecords:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        recs = [sample_pair("a"), sample_pair("b")]
        write_pair_records(path, recs, config={"mode": "calibrated"})
        parsed, header = parse_pair_records(path)
        assert header == {"mode": "calibrated"}
        assert [r.pair_id for r in parsed] == ["a", "b"]
        for orig, back in zip(recs, parsed):
            assert np.array_equal(orig.matches, back.matches)
            assert back.camera1.focal == orig.camera1.focal
            assert back.image1 == orig.image1

    def test_rewrite_is_identical(self, tmp_path):
        p1 = tmp_path / "a.jsonl"
        p2 = tmp_path / "b.jsonl"
        write_pair_records(p1, [sample_pair()])
        parsed, _ = parse_pair_records(p1)
        write_pair_records(p2, parsed)
        assert p1.read_text() == p2.read_text()

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"version": 1, "kind": "pair", "pair_id": "x"}\nnot json\n')
        with pytest.raises(ParseError, match="line 1"):
            parse_pair_records(path)

    def test_bad_json_line_number(self, tmp_path):
        path = tmp_path / "bad2.jsonl"
        good = sample_pair()
        write_pair_records(path, [good])
        with open(path, "a") as fh:
            fh.write("{broken\n")
        with pytest.raises(ParseError, match="line 2"):
            parse_pair_records(path)

    def test_version_checked(self, tmp_path):
        path = tmp_path / "v.jsonl"
        path.write_text('{"version": 99, "kind": "pair"}\n')
        with pytest.raises(ParseError, match="version"):
            parse_pair_records(path)

    def test_out_of_bounds_coordinates_rejected(self):
        matches = np.array([[2000.0, 20.0, 30.0, 40.0, 1.0, 1.0]])
        with pytest.raises(ValueError, match="bounds"):
            PairRecord("p", (640, 480), (640, 480), matches)

    def test_missing_camera_is_none(self, tmp_path):
        rec = PairRecord("p", (640, 480), (640, 480), sample_pair().matches)
        path = tmp_path / "nocam.jsonl"
        write_pair_records(path, [rec])
        parsed, _ = parse_pair_records(path)
        assert parsed[0].camera1 is None
        pp1, pp2 = parsed[0].principal_points()
        assert np.allclose(pp1, [320, 240])


class TestResultRecords:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "res.jsonl"
        recs = [sample_result("a"), ResultRecord(pair_id="b", status="failed", reason="too few")]
        write_result_records(path, recs, config={"seed": 1})
        parsed, header = parse_result_records(path)
        assert header == {"seed": 1}
        assert parsed[0].status == "ok"
        assert np.array_equal(parsed[0].R, np.eye(3))
        assert parsed[1].status == "failed" and parsed[1].reason == "too few"

    def test_orthonormality_enforced(self):
        with pytest.raises(ValueError, match="orthonormal"):
            ResultRecord(pair_id="x", status="ok", R=np.eye(3) * 2.0, t=np.zeros(3))

    def test_bad_status_rejected(self):
        with pytest.raises(ValueError, match="status"):
            ResultRecord(pair_id="x", status="maybe")
