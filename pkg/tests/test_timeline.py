import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spotcap.errors import TemporalBackendError
from spotcap.media import clip_from_arrays
from spotcap.scripted import ScriptedTemporal
from spotcap.timeline import (
    FALLBACK_CAPTION,
    Event,
    Timeline,
    analyze_timeline,
    events_for_time,
    normalize_events,
)


def clip_5s():
    return clip_from_arrays([np.zeros((8, 8, 3), np.uint8)] * 25, fps=5.0)


class TestAnalyzeTimeline:
    def test_passthrough_when_already_normalized(self):
        backend = ScriptedTemporal([(0, 2, "a man runs"), (2, 5, "a man jumps")])
        timeline = analyze_timeline(clip_5s(), backend)
        assert [(e.start, e.end, e.caption) for e in timeline.events] == [
            (0.0, 2.0, "a man runs"),
            (2.0, 5.0, "a man jumps"),
        ]
        assert timeline.duration == 5.0

    def test_empty_backend_output_falls_back(self):
        timeline = analyze_timeline(clip_5s(), ScriptedTemporal([]))
        assert [(e.start, e.end, e.caption) for e in timeline.events] == [
            (0.0, 5.0, FALLBACK_CAPTION)
        ]

    def test_backend_failure_raises(self):
        backend = ScriptedTemporal([], error=TimeoutError("backend down"))
        with pytest.raises(TemporalBackendError):
            analyze_timeline(clip_5s(), backend)


class TestNormalizeEvents:
    def test_clamps_boundaries(self):
        timeline = normalize_events([(-1, 3, "a"), (2, 5, "b")], duration=4)
        assert [(e.start, e.end, e.caption) for e in timeline.events] == [
            (0.0, 3.0, "a"),
            (2.0, 4.0, "b"),
        ]

    def test_drop_then_fallback(self):
        timeline = normalize_events([(3, 1, "bad")], duration=10)
        assert [(e.start, e.end, e.caption) for e in timeline.events] == [
            (0.0, 10.0, FALLBACK_CAPTION)
        ]

    def test_valid_input_unchanged(self):
        raw = [(0.0, 1.5, "x"), (1.5, 4.0, "y")]
        timeline = normalize_events(raw, duration=4)
        assert [(e.start, e.end, e.caption) for e in timeline.events] == raw

    def test_sorts_by_start_then_end(self):
        timeline = normalize_events(
            [(2, 3, "late"), (0, 5, "long"), (0, 1, "short")], duration=5
        )
        assert [e.caption for e in timeline.events] == ["short", "long", "late"]

    def test_overlaps_preserved(self):
        timeline = normalize_events([(0, 4, "a"), (1, 3, "b")], duration=5)
        assert len(timeline.events) == 2

    def test_empty_caption_dropped(self):
        timeline = normalize_events([(0, 2, "  "), (2, 4, "ok")], duration=5)
        assert [e.caption for e in timeline.events] == ["ok"]

    def test_non_finite_dropped(self):
        timeline = normalize_events(
            [(float("nan"), 2, "a"), (0, float("inf"), "b"), (1, 2, "c")], duration=5
        )
        assert [e.caption for e in timeline.events] == ["c"]

    @settings(max_examples=300, deadline=None)
    @given(
        raw=st.lists(
            st.tuples(
                st.floats(allow_nan=True, allow_infinity=True, width=32),
                st.floats(allow_nan=True, allow_infinity=True, width=32),
                st.text(max_size=8),
            ),
            max_size=12,
        ),
        duration=st.floats(min_value=0.1, max_value=1e5),
    )
    def test_properties_idempotent_and_valid(self, raw, duration):
        timeline = normalize_events(raw, duration)
        # every event satisfies the invariants
        for e in timeline.events:
            assert 0 <= e.start < e.end <= duration
            assert e.caption.strip()
        # sorted
        keys = [(e.start, e.end) for e in timeline.events]
        assert keys == sorted(keys)
        # idempotent
        again = normalize_events(
            [(e.start, e.end, e.caption) for e in timeline.events], duration
        )
        assert again == timeline


class TestEventsForTime:
    def timeline(self):
        return Timeline(
            events=(Event(0, 2, "first"), Event(2, 5, "second")), duration=5
        )

    def test_boundary_is_end_exclusive(self):
        hits = events_for_time(self.timeline(), 2.0)
        assert [e.caption for e in hits] == ["second"]

    def test_clip_end_maps_to_last_event(self):
        hits = events_for_time(self.timeline(), 5.0)
        assert [e.caption for e in hits] == ["second"]

    def test_overlapping_events_both_returned_in_order(self):
        timeline = Timeline(
            events=(Event(0, 4, "outer"), Event(1, 3, "inner")), duration=5
        )
        hits = events_for_time(timeline, 2.0)
        assert [e.caption for e in hits] == ["outer", "inner"]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            events_for_time(self.timeline(), 5.1)
        with pytest.raises(ValueError):
            events_for_time(self.timeline(), -0.1)

    def test_partition_of_non_overlapping_timeline(self):
        timeline = Timeline(
            events=(Event(0, 1, "a"), Event(1, 3, "b"), Event(3, 5, "c")),
            duration=5,
        )
        for t in np.linspace(0, 5, 101):
            hits = events_for_time(timeline, float(t))
            assert len(hits) == 1

    def test_gap_at_clip_end_yields_nothing(self):
        timeline = Timeline(events=(Event(0, 4, "a"),), duration=5)
        assert events_for_time(timeline, 5.0) == []
