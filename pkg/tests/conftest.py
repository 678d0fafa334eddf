import numpy as np
import pytest

from spotcap.captioner import StructuredCaption, render_structured_caption
from spotcap.pipeline import BackendSuite
from spotcap.scripted import ScriptedCaptioner, ScriptedSegmenter, ScriptedTemporal
from spotcap.synth import SceneObject, ScriptedScene, synth_clip


@pytest.fixture
def moving_square_scene():
    """One 10x10 square moving +2 px/frame for 5 frames on a 64x48 canvas."""
    return ScriptedScene(
        width=64,
        height=48,
        frame_count=5,
        fps=5.0,
        objects=(
            SceneObject(
                shape="rectangle", x=0, y=10, width=10, height=10, vx=2.0, color=(200, 40, 40)
            ),
        ),
    )


@pytest.fixture
def moving_square(moving_square_scene):
    return synth_clip(moving_square_scene)


def make_fixture_caption(tag: str = "fixture") -> StructuredCaption:
    return StructuredCaption(
        ho=f"the {tag} object",
        attributes="small, red, square",
        actions="slides steadily to the right",
        statuses="fully visible in every frame",
        interacting_objects="none",
        environments="a flat dark canvas",
        related_events="From 0.0s to 1.0s: a square moves",
        final_paragraph=(
            "The HO is a small red square, on a flat dark canvas. "
            "From 0.0s to 1.0s, the HO slides steadily to the right. "
            "The OH's final status is visible."
        ),
    )


def scripted_suite(clip, masklet_masks, events=None, responses=None) -> BackendSuite:
    if events is None:
        events = [(0.0, clip.duration / 2, "a square moves"), (clip.duration / 2, clip.duration, "a square keeps moving")]
    if responses is None:
        responses = [render_structured_caption(make_fixture_caption())]
    return BackendSuite(
        segmenter=ScriptedSegmenter(masklet_masks),
        temporal=ScriptedTemporal(events),
        captioner=ScriptedCaptioner(responses),
    )
