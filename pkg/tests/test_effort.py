import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroeffort import DataError, Dataset
from neuroeffort.effort import (
    EPSILON,
    AgreementReport,
    EffortMode,
    QuadrantState,
    _pearson,
    classify_state,
    compare,
    effort_points,
    effort_z,
    performance_z,
    read_effort_csv,
    rne_rni,
    summarize_segments,
    write_agreement,
    write_effort_csv,
)

from test_core import make_trial


def two_participant_dataset():
    """p01: flat 1.0 signal, labels 1 on the first two questions only.
    p02: flat 2.0 signal, all labels 1."""
    trials = []
    for order in range(1, 17):
        trials.append(
            make_trial(
                pid="p01",
                order=order,
                label=1 if order <= 2 else 0,
                hbo=np.full((200, 16), 1.0),
            )
        )
        trials.append(
            make_trial(pid="p02", order=order, label=1, hbo=np.full((200, 16), 2.0))
        )
    return Dataset(tuple(trials))


class TestSummarizeSegments:
    def test_scores_sum_labels_per_segment(self):
        summaries = summarize_segments(two_participant_dataset())
        assert [s.key for s in summaries] == [
            ("p01", 1), ("p01", 2), ("p01", 3), ("p01", 4),
            ("p02", 1), ("p02", 2), ("p02", 3), ("p02", 4),
        ]
        assert [s.score for s in summaries] == [2, 0, 0, 0, 4, 4, 4, 4]
        assert [s.mean_hbo for s in summaries] == [1.0] * 4 + [2.0] * 4

    def test_predicted_labels_replace_actual(self):
        ds = two_participant_dataset()
        predicted = {t.key: 1 for t in ds.trials}
        summaries = summarize_segments(ds, predicted=predicted)
        assert [s.score for s in summaries] == [4] * 8

    def test_missing_prediction_rejected(self):
        ds = two_participant_dataset()
        predicted = {t.key: 1 for t in ds.trials}
        del predicted[("p01", 7)]
        with pytest.raises(DataError, match="missing trial p01"):
            summarize_segments(ds, predicted=predicted)

    def test_incomplete_segment_rejected(self):
        ds = two_participant_dataset()
        with pytest.raises(DataError, match="p01 segment 1 has 3"):
            summarize_segments(Dataset(ds.trials[2:]))

    def test_masked_channels_excluded_from_mean(self):
        mask = np.ones(16, dtype=bool)
        mask[0] = False
        hbo = np.full((200, 16), 1.0)
        hbo[:, 0] = 99.0
        trials = tuple(
            make_trial(pid="p01", order=k, hbo=hbo.copy(), mask=mask)
            for k in range(1, 5)
        )
        summaries = summarize_segments(Dataset(trials))
        assert summaries[0].mean_hbo == 1.0

    def test_fully_masked_segment_is_zero(self):
        trials = tuple(
            make_trial(
                pid="p01",
                order=k,
                hbo=np.zeros((200, 16)),
                mask=np.zeros(16, dtype=bool),
            )
            for k in range(1, 5)
        )
        assert summarize_segments(Dataset(trials))[0].mean_hbo == 0.0

    def test_empty_dataset_rejected(self):
        with pytest.raises(DataError, match="empty"):
            summarize_segments(Dataset(()))

    def test_default_synth_yields_64_summaries(self, default_dataset):
        summaries = summarize_segments(default_dataset)
        assert len(summaries) == 64
        assert all(0 <= s.score <= 4 for s in summaries)


class TestPerformanceZ:
    def test_worked_example(self):
        assert performance_z([2.0, 4.0]) == pytest.approx(
            [-0.999001, 0.999001], abs=1e-9
        )

    def test_equal_scores_map_to_zero(self):
        assert (performance_z([3.0, 3.0, 3.0]) == 0).all()

    def test_smoothing_keeps_magnitude_below_plain_zscore(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        plain = (x - x.mean()) / x.std()
        assert (np.abs(performance_z(x)) < np.abs(plain)).all()

    @given(
        scores=st.lists(
            st.integers(min_value=0, max_value=4), min_size=2, max_size=64
        ),
        shift=st.integers(min_value=-5, max_value=5),
    )
    def test_translation_invariant(self, scores, shift):
        base = performance_z(scores)
        shifted = performance_z([s + shift for s in scores])
        assert shifted == pytest.approx(base, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            performance_z([])


class TestEffortZ:
    def test_reciprocal_worked_example(self):
        out = effort_z([0.5, 1.0], mode="reciprocal")
        gm, sd = 0.75, 0.25
        expected = [
            (2.0 - 1.0 / gm) / (1.0 / sd + EPSILON),
            (1.0 - 1.0 / gm) / (1.0 / sd + EPSILON),
        ]
        assert out == pytest.approx(expected, abs=1e-12)
        assert out == pytest.approx([0.16662501, -0.08331251], abs=1e-8)

    def test_reciprocal_decreases_with_activation(self):
        out = effort_z([0.5, 1.0, 2.0], mode="reciprocal")
        assert out[0] > out[1] > out[2]

    def test_tiny_magnitudes_clamped(self):
        assert effort_z([0.0, 1.0]) == pytest.approx(effort_z([1e-6, 1.0]))
        assert effort_z([1e-12, 1.0]) == pytest.approx(effort_z([1e-6, 1.0]))

    def test_clamp_preserves_sign(self):
        up = effort_z([1e-12, 1.0])
        down = effort_z([-1e-12, 1.0])
        assert up[0] > 0 > down[0]

    def test_zero_group_mean_rejected_with_pointer_to_negation(self):
        with pytest.raises(DataError, match="negation"):
            effort_z([-1.0, 1.0], mode="reciprocal")

    def test_zero_spread_rejected_in_reciprocal_mode(self):
        with pytest.raises(DataError, match="sd 0.0"):
            effort_z([2.0, 2.0, 2.0], mode="reciprocal")

    def test_negation_worked_example(self):
        assert effort_z([1.0, 3.0], mode="negation") == pytest.approx(
            [0.999001, -0.999001], abs=1e-9
        )

    def test_negation_handles_zero_centered_groups(self):
        out = effort_z([-1.0, 0.0, 1.0], mode="negation")
        assert out[0] > out[1] > out[2]
        assert (effort_z([0.0, 0.0], mode="negation") == 0).all()

    @given(
        st.lists(
            st.floats(min_value=-10, max_value=10, allow_nan=False),
            min_size=2,
            max_size=30,
        )
    )
    def test_negation_is_antitone(self, xs):
        out = effort_z(xs, mode="negation")
        order = np.argsort(xs)
        assert (np.diff(out[order]) <= 1e-12).all()

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="unknown effort mode"):
            effort_z([1.0, 2.0], mode="inverse")


class TestRotation:
    def test_scalar_and_array_forms(self):
        rne, rni = rne_rni(1.0, 1.0)
        assert isinstance(rne, float)
        assert rne == pytest.approx(0.0)
        assert rni == pytest.approx(math.sqrt(2.0))
        arr_rne, arr_rni = rne_rni(np.array([1.0, -1.0]), np.array([0.0, 0.0]))
        assert arr_rne == pytest.approx([1 / math.sqrt(2), -1 / math.sqrt(2)])
        assert arr_rni == pytest.approx([1 / math.sqrt(2), -1 / math.sqrt(2)])

    @given(
        p=st.floats(min_value=-100, max_value=100, allow_nan=False),
        c=st.floats(min_value=-100, max_value=100, allow_nan=False),
    )
    def test_norm_preserved(self, p, c):
        rne, rni = rne_rni(p, c)
        assert rne * rne + rni * rni == pytest.approx(p * p + c * c, abs=1e-9)

    @given(
        p=st.floats(min_value=-100, max_value=100, allow_nan=False),
        c=st.floats(min_value=-100, max_value=100, allow_nan=False),
    )
    def test_invertible(self, p, c):
        rne, rni = rne_rni(p, c)
        assert (rni + rne) / math.sqrt(2) == pytest.approx(p, abs=1e-9)
        assert (rni - rne) / math.sqrt(2) == pytest.approx(c, abs=1e-9)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            rne_rni(float("nan"), 0.0)


class TestClassifyState:
    @pytest.mark.parametrize(
        "rne,rni,expected",
        [
            (1.0, 1.0, QuadrantState.HE_HI),
            (1.0, -1.0, QuadrantState.HE_LI),
            (-1.0, 1.0, QuadrantState.LE_HI),
            (-1.0, -1.0, QuadrantState.LE_LI),
            (0.0, 0.0, QuadrantState.LE_LI),
            (0.0, 1.0, QuadrantState.LE_HI),
            (1.0, 0.0, QuadrantState.HE_LI),
        ],
    )
    def test_sign_table(self, rne, rni, expected):
        assert classify_state(rne, rni) is expected

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            classify_state(float("inf"), 0.0)


@pytest.fixture(scope="module")
def points(default_dataset):
    return effort_points(summarize_segments(default_dataset))


class TestEffortPoints:
    def test_one_point_per_participant_segment(self, points):
        assert len(points) == 64
        assert len({p.key for p in points}) == 64

    def test_rotation_consistency(self, points):
        for p in points:
            assert p.rne == pytest.approx((p.p_z - p.ce_z) / math.sqrt(2), abs=1e-12)
            assert p.rni == pytest.approx((p.p_z + p.ce_z) / math.sqrt(2), abs=1e-12)
            assert p.state is classify_state(p.rne, p.rni)

    def test_group_all_standardizes_jointly(self, points):
        assert np.mean([p.p_z for p in points]) == pytest.approx(0.0, abs=1e-9)

    def test_group_by_segment(self, default_dataset):
        points = effort_points(
            summarize_segments(default_dataset), group_by="segment"
        )
        by_segment = {}
        for p in points:
            by_segment.setdefault(p.segment, []).append(p.p_z)
        assert set(by_segment) == {1, 2, 3, 4}
        for vals in by_segment.values():
            assert np.mean(vals) == pytest.approx(0.0, abs=1e-9)

    def test_unknown_group_rejected(self, default_dataset):
        with pytest.raises(ValueError, match="group_by"):
            effort_points(summarize_segments(default_dataset), group_by="session")

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            effort_points([])


class TestCompare:
    def test_identity_is_perfect_agreement(self, points):
        report = compare(points, points)
        assert report.mae_rne == 0.0
        assert report.mae_rni == 0.0
        assert report.pearson_rne == pytest.approx(1.0)
        assert report.pearson_rni == pytest.approx(1.0)
        assert report.quadrant_matches == report.quadrant_total == 64

    def test_constant_shift_detected(self, points):
        shifted = [dataclasses.replace(p, rne=p.rne + 0.1) for p in points]
        report = compare(points, shifted)
        assert report.mae_rne == pytest.approx(0.1)
        assert report.mae_rni == 0.0
        assert report.pearson_rne == pytest.approx(1.0)

    def test_key_mismatch_lists_both_sides(self, points):
        with pytest.raises(DataError, match=r"only in actual.*only in predicted"):
            compare(points, points[1:] + [dataclasses.replace(points[0], segment=99)])

    def test_duplicate_keys_rejected(self, points):
        with pytest.raises(DataError, match="duplicate"):
            compare(list(points) + [points[0]], points)

    def test_mae_is_symmetric(self, points):
        shifted = [dataclasses.replace(p, rni=p.rni - 0.25) for p in points]
        assert compare(points, shifted).mae_rni == pytest.approx(
            compare(shifted, points).mae_rni
        )

    def test_pearson_degenerate_rules(self):
        assert _pearson(np.array([1.0, 1.0]), np.array([1.0, 1.0])) == 1.0
        assert _pearson(np.array([1.0, 1.0]), np.array([1.0, 2.0])) == 0.0

    def test_report_str_mentions_match_count(self, points):
        text = str(compare(points, points))
        assert "quadrant states matched: 64/64" in text

    def test_match_count_validated(self):
        with pytest.raises(ValueError):
            AgreementReport(0.0, 0.0, 1.0, 1.0, quadrant_matches=5, quadrant_total=4)


class TestEffortCsv:
    def test_round_trip_bit_exact(self, tmp_path, default_dataset):
        points = effort_points(summarize_segments(default_dataset))
        path = write_effort_csv(points, tmp_path / "effort.csv")
        assert read_effort_csv(path) == points

    def test_not_an_effort_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="not an effort CSV"):
            read_effort_csv(path)

    def test_agreement_files(self, tmp_path, default_dataset):
        points = effort_points(summarize_segments(default_dataset))
        report = compare(points, points)
        path = write_agreement(report, tmp_path / "agreement.csv")
        text = (tmp_path / "agreement.txt").read_text()
        assert "quadrant states matched: 64/64" in text
        header, row = path.read_text().strip().splitlines()
        assert "mae_rne" in header
        assert row.startswith("0,0")
