import numpy as np
import pytest

from spotcap.errors import ReplayMissError
from spotcap.media import clip_from_arrays
from spotcap.pipeline import BackendSuite, Session
from spotcap.scripted import ScriptedCaptioner, ScriptedSegmenter, ScriptedTemporal
from spotcap.captioner import render_structured_caption
from spotcap.trace import (
    BackendTrace,
    RecordingCaptioner,
    RecordingSegmenter,
    RecordingTemporal,
    ReplayCaptioner,
    ReplaySegmenter,
    ReplayTemporal,
    captioner_request_digest,
    load_traces,
    new_trace,
    save_traces,
    segmenter_request_digest,
    temporal_request_digest,
)

from conftest import make_fixture_caption


def center_gesture():
    return {
        "kind": "points",
        "points": [{"x": 0.1, "y": 0.4, "positive": True}],
        "anchor_frame": 0,
    }


def recording_suite(masks, traces):
    return BackendSuite(
        segmenter=RecordingSegmenter(ScriptedSegmenter(masks), traces["segmenter"]),
        temporal=RecordingTemporal(
            ScriptedTemporal([(0, 0.5, "a"), (0.5, 1.0, "b")]), traces["temporal"]
        ),
        captioner=RecordingCaptioner(
            ScriptedCaptioner([render_structured_caption(make_fixture_caption())]),
            traces["captioner"],
        ),
    )


def replay_suite(traces, strict=True):
    return BackendSuite(
        segmenter=ReplaySegmenter(traces["segmenter"], strict=strict),
        temporal=ReplayTemporal(traces["temporal"], strict=strict),
        captioner=ReplayCaptioner(traces["captioner"], strict=strict),
    )


def fresh_traces():
    return {
        "segmenter": new_trace("segmenter", "scripted-segmenter"),
        "temporal": new_trace("temporal", "scripted-temporal"),
        "captioner": new_trace("captioner", "scripted-captioner"),
    }


class TestRecordReplay:
    def test_record_then_replay_identical_result(self, moving_square):
        clip, masklets = moving_square
        traces = fresh_traces()
        session = Session(suite=recording_suite(list(masklets[0].masks), traces), clip=clip)
        session.select_object(center_gesture())
        recorded = session.run_pipeline()

        replayed_session = Session(suite=replay_suite(traces), clip=clip)
        replayed_session.select_object(center_gesture())
        replayed = replayed_session.run_pipeline()
        assert replayed.canonical_bytes() == recorded.canonical_bytes()

    def test_perturbed_frame_strict_miss(self, moving_square):
        clip, masklets = moving_square
        traces = fresh_traces()
        session = Session(suite=recording_suite(list(masklets[0].masks), traces), clip=clip)
        session.select_object(center_gesture())
        session.run_pipeline()

        pixels = clip.frames[0].pixels.copy()
        pixels[0, 0, 0] ^= 0xFF
        perturbed = clip_from_arrays(
            [pixels] + [f.pixels for f in clip.frames[1:]], clip.fps
        )
        replay_session = Session(suite=replay_suite(traces, strict=True), clip=perturbed)
        with pytest.raises(Exception) as exc:
            replay_session.select_object(center_gesture())
        assert isinstance(exc.value.__cause__ or exc.value, ReplayMissError) or (
            "not in trace" in str(exc.value)
        )

    def test_lenient_replay_serves_nearest_with_warning(self, moving_square):
        clip, masklets = moving_square
        traces = fresh_traces()
        session = Session(suite=recording_suite(list(masklets[0].masks), traces), clip=clip)
        session.select_object(center_gesture())
        session.run_pipeline()

        pixels = clip.frames[0].pixels.copy()
        pixels[0, 0, 0] ^= 0xFF
        perturbed = clip_from_arrays(
            [pixels] + [f.pixels for f in clip.frames[1:]], clip.fps
        )
        suite = replay_suite(traces, strict=False)
        replay_session = Session(suite=suite, clip=perturbed)
        replay_session.select_object(center_gesture())
        result = replay_session.run_pipeline()
        assert result is not None
        assert suite.segmenter.warnings  # the perturbed frame missed

    def test_save_load_roundtrip(self, moving_square, tmp_path):
        clip, masklets = moving_square
        traces = fresh_traces()
        session = Session(suite=recording_suite(list(masklets[0].masks), traces), clip=clip)
        session.select_object(center_gesture())
        recorded = session.run_pipeline()

        path = tmp_path / "run.jsonl"
        save_traces(
            path,
            traces,
            header={"gesture": center_gesture(), "result": recorded.canonical_bytes().decode()},
        )
        header, loaded = load_traces(path)
        assert header["gesture"] == center_gesture()
        assert set(loaded) == {"segmenter", "temporal", "captioner"}
        assert len(loaded["segmenter"]) == len(traces["segmenter"])

        replay_session = Session(suite=replay_suite(loaded), clip=clip)
        replay_session.select_object(center_gesture())
        replayed = replay_session.run_pipeline()
        assert replayed.canonical_bytes().decode() == header["result"]

    def test_stateless_flag_restored_from_trace(self, moving_square, tmp_path):
        clip, masklets = moving_square
        traces = fresh_traces()
        suite = recording_suite(list(masklets[0].masks), traces)
        assert suite.segmenter.stateless is True
        path = tmp_path / "run.jsonl"
        save_traces(path, traces, header={})
        _, loaded = load_traces(path)
        assert ReplaySegmenter(loaded["segmenter"]).stateless is True


class TestDigests:
    def test_segmenter_digest_depends_on_pixels(self, moving_square):
        clip, _ = moving_square
        a = segmenter_request_digest(clip.frames[0], None, None)
        b = segmenter_request_digest(clip.frames[1], None, None)
        assert a != b

    def test_temporal_digest_covers_all_frames(self, moving_square):
        clip, _ = moving_square
        full = temporal_request_digest(clip)
        shorter = clip_from_arrays([f.pixels for f in clip.frames[:-1]], clip.fps)
        assert full != temporal_request_digest(shorter)

    def test_captioner_digest_includes_history(self, moving_square):
        from spotcap.captioner import ChatTurn

        clip, _ = moving_square
        frames = [clip.frames[0]]
        a = captioner_request_digest(frames, "p", None)
        b = captioner_request_digest(frames, "p", [ChatTurn("user", "hi")])
        assert a != b

    def test_duplicate_digest_same_response_tolerated(self):
        trace = new_trace("captioner", "x")
        trace.add("d1", {"text": "same"})
        trace.add("d1", {"text": "same"})
        assert len(trace) == 1
        with pytest.raises(ValueError):
            trace.add("d1", {"text": "different"})
