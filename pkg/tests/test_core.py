import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroeffort import (
    DEFAULT_LAYOUT,
    DEFAULT_SESSION,
    ChannelLayout,
    Dataset,
    Region,
    SessionStructure,
    TrialRecord,
    segment_of,
    session_of,
    validate_dataset,
)


def make_trial(
    pid="p01",
    order=1,
    label=1,
    hbo=None,
    mask=None,
    session=None,
    segment=None,
):
    if hbo is None:
        hbo = np.zeros((200, 16))
    if mask is None:
        mask = np.ones(16, dtype=bool)
    return TrialRecord(
        participant_id=pid,
        session=session if session is not None else session_of(order),
        segment=segment if segment is not None else segment_of(order),
        question_id=f"q{order:02d}",
        question_order=order,
        label=label,
        hbo=hbo,
        channel_mask=mask,
    )


class TestChannelLayout:
    def test_region_partition(self):
        assert DEFAULT_LAYOUT.channels(Region.LPFC) == (1, 2, 3, 4, 13, 14, 15, 16)
        assert DEFAULT_LAYOUT.channels(Region.VMPFC) == tuple(range(5, 13))

    def test_every_channel_has_one_region(self):
        lpfc = set(DEFAULT_LAYOUT.channels(Region.LPFC))
        vmpfc = set(DEFAULT_LAYOUT.channels(Region.VMPFC))
        assert lpfc | vmpfc == set(range(1, 17))
        assert lpfc & vmpfc == set()

    def test_wrong_channel_count_rejected(self):
        with pytest.raises(ValueError):
            ChannelLayout(channel_count=8)

    def test_wrong_region_map_rejected(self):
        bad = {ch: Region.LPFC for ch in range(1, 17)}
        with pytest.raises(ValueError):
            ChannelLayout(region_of=bad)


class TestSessionStructure:
    def test_defaults(self):
        s = DEFAULT_SESSION
        assert s.sampling_rate_hz == 10.0
        assert s.analysis_window_samples == 200
        assert s.segment_duration_s == 140.0
        assert s.total_segments == 4
        assert s.total_questions == 16
        assert s.questions_per_session == 8

    def test_inconsistent_segment_duration_rejected(self):
        with pytest.raises(ValueError):
            SessionStructure(segment_duration_s=100.0)

    def test_window_longer_than_question_rejected(self):
        with pytest.raises(ValueError):
            SessionStructure(analysis_window_samples=301)


class TestQuestionMapping:
    def test_segment_boundaries(self):
        assert [segment_of(q) for q in (1, 4, 5, 8, 9, 12, 13, 16)] == [
            1, 1, 2, 2, 3, 3, 4, 4,
        ]

    def test_session_boundaries(self):
        assert [session_of(q) for q in (1, 8, 9, 16)] == [1, 1, 2, 2]

    @given(st.integers(min_value=1, max_value=16))
    def test_segment_consistent_with_session(self, q):
        # segments 1-2 belong to session 1, segments 3-4 to session 2
        assert session_of(q) == (segment_of(q) + 1) // 2

    @pytest.mark.parametrize("q", [0, 17, -3])
    def test_out_of_range_rejected(self, q):
        with pytest.raises(ValueError):
            segment_of(q)
        with pytest.raises(ValueError):
            session_of(q)


class TestTrialRecord:
    def test_arrays_frozen(self):
        t = make_trial()
        with pytest.raises(ValueError):
            t.hbo[0, 0] = 1.0
        with pytest.raises(ValueError):
            t.channel_mask[0] = False

    def test_key(self):
        assert make_trial(pid="p03", order=7).key == ("p03", 7)

    def test_equality_covers_arrays(self):
        a = make_trial(hbo=np.full((200, 16), 0.5))
        b = make_trial(hbo=np.full((200, 16), 0.5))
        c = make_trial(hbo=np.full((200, 16), 0.25))
        assert a == b
        assert a != c


class TestDataset:
    def test_participants_ordered_unique(self):
        ds = Dataset(
            (
                make_trial(pid="p02", order=1),
                make_trial(pid="p01", order=1),
                make_trial(pid="p02", order=2),
            )
        )
        assert ds.participants == ("p02", "p01")

    def test_class_counts(self, default_dataset):
        n0, n1 = default_dataset.class_counts()
        assert (n0, n1) == (88, 168)
        assert n0 + n1 == len(default_dataset)

    def test_by_key(self, default_dataset):
        t = default_dataset.trials[0]
        assert default_dataset.by_key[t.key] is t


class TestValidateDataset:
    def test_clean_dataset_ok(self, default_dataset):
        report = validate_dataset(default_dataset)
        assert report.ok
        assert str(report) == "dataset valid"

    def test_short_window_reported(self):
        bad = make_trial(hbo=np.zeros((150, 16)))
        report = validate_dataset(Dataset((bad,)))
        assert not report.ok
        assert [v.rule for v in report.violations] == ["window_shape"]
        assert report.violations[0].trial_key == ("p01", 1)

    def test_nonfinite_reported(self):
        hbo = np.zeros((200, 16))
        hbo[5, 3] = np.nan
        report = validate_dataset(Dataset((make_trial(hbo=hbo),)))
        assert [v.rule for v in report.violations] == ["nonfinite"]

    def test_bad_label_reported(self):
        report = validate_dataset(Dataset((make_trial(label=2),)))
        assert "label_binary" in [v.rule for v in report.violations]

    def test_segment_mismatch_reported(self):
        report = validate_dataset(Dataset((make_trial(order=5, segment=1),)))
        assert "segment_mismatch" in [v.rule for v in report.violations]

    def test_session_mismatch_reported(self):
        report = validate_dataset(Dataset((make_trial(order=9, session=1),)))
        assert "session_mismatch" in [v.rule for v in report.violations]

    def test_order_out_of_range_reported(self):
        t = TrialRecord(
            participant_id="p01",
            session=1,
            segment=1,
            question_id="q17",
            question_order=17,
            label=0,
            hbo=np.zeros((200, 16)),
            channel_mask=np.ones(16, dtype=bool),
        )
        report = validate_dataset(Dataset((t,)))
        assert "order_range" in [v.rule for v in report.violations]

    def test_duplicate_key_reported(self):
        report = validate_dataset(Dataset((make_trial(), make_trial())))
        assert "duplicate_key" in [v.rule for v in report.violations]

    def test_bad_mask_shape_reported(self):
        report = validate_dataset(
            Dataset((make_trial(mask=np.ones(8, dtype=bool)),))
        )
        assert "mask_shape" in [v.rule for v in report.violations]

    def test_validation_is_idempotent(self):
        ds = Dataset((make_trial(label=5, order=3, segment=2),))
        first = validate_dataset(ds)
        second = validate_dataset(ds)
        assert [v.rule for v in first.violations] == [
            v.rule for v in second.violations
        ]
