import pytest

from posewarp.errors import InvalidArgumentError, ManifestError
from posewarp.evaluate import (
    PredictionRecord,
    evaluate,
    format_report,
    pose_bin,
    report_key_values,
    sequence_pose,
)
from posewarp.manifest import ManifestEntry
from posewarp.morphable import PoseAngles


class TestSequencePose:
    def test_constant_pose(self):
        poses = [PoseAngles(yaw=-20.0, pitch=10.0)] * 5
        assert sequence_pose(poses) == (20.0, 10.0)

    def test_abs_before_mean(self):
        poses = [PoseAngles(yaw=-30.0, pitch=0.0), PoseAngles(yaw=30.0, pitch=0.0)]
        assert sequence_pose(poses)[0] == 30.0

    def test_single_frame(self):
        assert sequence_pose([PoseAngles(yaw=-7.5, pitch=3.25)]) == (7.5, 3.25)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sequence_pose([])


class TestPoseBin:
    def test_edges(self):
        angles = [0.0, 14.999, 15.0, 29.999, 30.0, 44.999, 45.0, 59.999, 60.0, 90.0]
        bins = [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]
        assert [pose_bin(a) for a in angles] == bins

    def test_clamp_above_90(self):
        assert pose_bin(95.0) == 4

    def test_negative_rejected(self):
        with pytest.raises(InvalidArgumentError):
            pose_bin(-0.1)

    def test_partition(self):
        import numpy as np
        for a in np.linspace(0.0, 90.0, 1801):
            assert pose_bin(float(a)) in range(5)


def entry(eid, yaw, pitch, word="W"):
    return ManifestEntry(entry_id=eid, path=eid, word=word, split="test",
                         frame_count=29, mean_abs_yaw=yaw, mean_abs_pitch=pitch)


class TestEvaluate:
    def test_all_correct(self):
        manifest = [entry(f"e{k}", 5.0 + 10.0 * k, 2.0) for k in range(5)]
        preds = [PredictionRecord(f"e{k}", "W", "W") for k in range(5)]
        report = evaluate(preds, manifest)
        assert report.overall_accuracy == 100.0
        for b in report.yaw_table.bins:
            if b.count:
                assert b.accuracy == 100.0

    def test_hand_tabulated_fixture(self):
        # 10 predictions, 7 correct; yaw / pitch chosen to hit known bins.
        rows = [
            # (id, yaw, pitch, correct)
            ("e0", 3.0, 1.0, True),    # yaw bin 0, pitch bin 0
            ("e1", 10.0, 16.0, False),  # yaw bin 0, pitch bin 1
            ("e2", 17.0, 2.0, True),   # yaw bin 1, pitch bin 0
            ("e3", 29.0, 29.0, True),  # yaw bin 1, pitch bin 1
            ("e4", 31.0, 3.0, False),   # yaw bin 2, pitch bin 0
            ("e5", 44.0, 44.0, True),  # yaw bin 2, pitch bin 2
            ("e6", 46.0, 4.0, True),   # yaw bin 3, pitch bin 0
            ("e7", 59.0, 59.0, False),  # yaw bin 3, pitch bin 3
            ("e8", 60.0, 5.0, True),   # yaw bin 4, pitch bin 0
            ("e9", 89.0, 89.0, True),  # yaw bin 4, pitch bin 4
        ]
        manifest = [entry(eid, yaw, pitch) for eid, yaw, pitch, _ in rows]
        preds = [PredictionRecord(eid, "W" if ok else "X", "W") for eid, _, _, ok in rows]
        report = evaluate(preds, manifest)
        assert report.total == 10 and report.correct == 7
        assert report.overall_accuracy == 70.0

        yaw_counts = [b.count for b in report.yaw_table.bins]
        yaw_correct = [b.correct for b in report.yaw_table.bins]
        assert yaw_counts == [2, 2, 2, 2, 2]
        assert yaw_correct == [1, 2, 1, 1, 2]

        pitch_counts = [b.count for b in report.pitch_table.bins]
        pitch_correct = [b.correct for b in report.pitch_table.bins]
        assert pitch_counts == [5, 2, 1, 1, 1]
        assert pitch_correct == [4, 1, 1, 0, 1]

    def test_empty_predictions_rejected(self):
        with pytest.raises(InvalidArgumentError):
            evaluate([], [entry("e0", 1.0, 1.0)])

    def test_unknown_id_listed(self):
        preds = [PredictionRecord("missing1", "W", "W"), PredictionRecord("e0", "W", "W")]
        with pytest.raises(ManifestError, match="missing1"):
            evaluate(preds, [entry("e0", 1.0, 1.0)])

    def test_duplicate_ids_rejected(self):
        preds = [PredictionRecord("e0", "W", "W"), PredictionRecord("e0", "X", "W")]
        with pytest.raises(ManifestError, match="duplicate"):
            evaluate(preds, [entry("e0", 1.0, 1.0)])

    def test_missing_pose_rejected(self):
        bad = ManifestEntry(entry_id="e0", path="e0", word="W", split="test", frame_count=29)
        with pytest.raises(ManifestError, match="pose"):
            evaluate([PredictionRecord("e0", "W", "W")], [bad])

    def test_weighted_bin_mean_equals_overall(self):
        import numpy as np
        rng = np.random.default_rng(0)
        manifest, preds = [], []
        for k in range(200):
            manifest.append(entry(f"e{k}", rng.uniform(0, 95), rng.uniform(0, 95)))
            ok = rng.random() < 0.6
            preds.append(PredictionRecord(f"e{k}", "W" if ok else "X", "W"))
        report = evaluate(preds, manifest)
        weighted = sum(b.count * b.accuracy for b in report.yaw_table.bins if b.count)
        assert abs(weighted / report.total - report.overall_accuracy) < 1e-9

    def test_order_independent(self):
        manifest = [entry(f"e{k}", 5.0 * k, 3.0 * k) for k in range(10)]
        preds = [PredictionRecord(f"e{k}", "W" if k % 3 else "X", "W") for k in range(10)]
        a = evaluate(preds, manifest)
        b = evaluate(list(reversed(preds)), manifest)
        assert a == b

    def test_report_rendering(self):
        manifest = [entry("e0", 5.0, 70.0)]
        report = evaluate([PredictionRecord("e0", "W", "W")], manifest)
        text = format_report(report)
        assert "Overall accuracy: 100.00%" in text
        assert "0-15" in text and "60-90" in text
        kv = report_key_values(report)
        assert "overall_accuracy=100.000000" in kv
        assert "yaw_bin0_count=1" in kv
        assert "pitch_bin4_accuracy=100.000000" in kv
        # Empty bins omit the accuracy key.
        assert "yaw_bin2_accuracy" not in kv
