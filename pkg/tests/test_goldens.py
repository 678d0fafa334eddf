"""Pin the rendered output of every style against the stored golden corpus."""

import hashlib
import json
from pathlib import Path

import pytest

from spotcap.highlight import STYLE_KINDS, InjectionStyle, StyleParams, inject
from spotcap.media import pixels_from_png
from spotcap.synth import ScriptedScene, synth_clip

GOLDEN_DIR = Path(__file__).parent / "goldens"


@pytest.fixture(scope="module")
def manifest():
    return json.loads((GOLDEN_DIR / "manifest.json").read_text())


@pytest.fixture(scope="module")
def golden_inputs(manifest):
    clip, masklets = synth_clip(ScriptedScene.from_json(manifest["scene"]))
    return clip.frames[0], masklets[0].masks[0]


def pixel_sha(pixels) -> str:
    return hashlib.sha256(pixels.tobytes()).hexdigest()


def test_input_matches_manifest(manifest, golden_inputs):
    frame, _ = golden_inputs
    assert pixel_sha(frame.pixels) == manifest["input"]["pixel_sha256"]
    stored = pixels_from_png((GOLDEN_DIR / manifest["input"]["file"]).read_bytes())
    assert (stored == frame.pixels).all()


@pytest.mark.parametrize("kind", STYLE_KINDS)
def test_style_render_matches_golden(kind, manifest, golden_inputs):
    frame, mask = golden_inputs
    entry = next(r for r in manifest["renders"] if r["style"] == kind)
    params = StyleParams.from_json(manifest["params"])
    rendered = inject(frame, mask, InjectionStyle(kind=kind, params=params))
    assert pixel_sha(rendered.pixels) == entry["output_pixel_sha256"]
    stored = pixels_from_png((GOLDEN_DIR / entry["file"]).read_bytes())
    assert (stored == rendered.pixels).all()
