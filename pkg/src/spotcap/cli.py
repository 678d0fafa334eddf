"""Command-line interface.

Subcommands:
  caption        select an object and produce its structured caption
  render-styles  render every highlight style for one frame + mask
  events         run temporal analysis and write the event table
  chat           caption an object, then chat about it on a REPL
  replay         re-run a recorded trace and verify bit-exactness
  serve          start the HTTP gateway

Inputs ending in .json are treated as synthetic scene specs instead of
video files, which makes every subcommand runnable without real footage.
All coordinates are pixels unless --normalized is given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

from .adapters import HttpCaptioner, HttpSegmenter, HttpTemporal
from .captioner import FIELD_LABELS
from .errors import SpotcapError
from .highlight import InjectionStyle, STYLE_KINDS, StyleParams
from .media import RleMask, VideoClip, load_video, rle_decode, save_frame_png
from .pipeline import BackendSuite, CaptionResult, PipelineConfig, Session
from .report import render_style_sheet, render_timeline_figure, write_events_csv
from .scripted import MockCaptioner, MockSegmenter, MockTemporal
from .synth import ScriptedScene, synth_clip
from .timeline import analyze_timeline
from .trace import (
    BackendTrace,
    RecordingCaptioner,
    RecordingSegmenter,
    RecordingTemporal,
    ReplayCaptioner,
    ReplaySegmenter,
    ReplayTemporal,
    load_traces,
    new_trace,
    save_traces,
)


def _load_input(path: str, target_fps: Optional[float]) -> tuple[VideoClip, dict]:
    """Video file or .json scene spec -> (clip, clip_source descriptor)."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        scene = ScriptedScene.from_json(json.loads(p.read_text()))
        clip, _ = synth_clip(scene)
        return clip, {"kind": "scene", "scene": scene.to_json()}
    clip = load_video(p, target_fps)
    sha = hashlib.sha256(p.read_bytes()).hexdigest()
    return clip, {
        "kind": "file",
        "path": str(p.resolve()),
        "sha256": sha,
        "target_fps": target_fps,
    }


def _clip_from_source(source: dict) -> VideoClip:
    if source["kind"] == "scene":
        clip, _ = synth_clip(ScriptedScene.from_json(source["scene"]))
        return clip
    p = Path(source["path"])
    sha = hashlib.sha256(p.read_bytes()).hexdigest()
    if sha != source["sha256"]:
        raise SpotcapError(f"video {p} changed since the trace was recorded")
    return load_video(p, source.get("target_fps"))


def _parse_xy(value: str) -> tuple[float, float]:
    try:
        x, y = value.split(",")
        return float(x), float(y)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {value!r}")


def _gesture_from_args(args) -> dict:
    pixel_coords = not args.normalized
    anchor = args.anchor_frame
    if args.box:
        parts = [float(v) for v in args.box.split(",")]
        if len(parts) != 4:
            raise SystemExit("--box expects X0,Y0,X1,Y1")
        return {
            "kind": "box",
            "box": {"x0": parts[0], "y0": parts[1], "x1": parts[2], "y1": parts[3]},
            "anchor_frame": anchor,
            "pixel_coords": pixel_coords,
        }
    if args.region:
        payload = json.loads(Path(args.region).read_text())
        return {"kind": "region", "region": payload, "anchor_frame": anchor}
    points = [
        {"x": x, "y": y, "positive": True} for x, y in (args.point or [])
    ] + [
        {"x": x, "y": y, "positive": False} for x, y in (args.neg_point or [])
    ]
    if not points:
        raise SystemExit("give --point, --box, or --region to select an object")
    return {
        "kind": "points",
        "points": points,
        "anchor_frame": anchor,
        "pixel_coords": pixel_coords,
    }


def _build_suite(args) -> tuple[BackendSuite, Optional[dict[str, BackendTrace]]]:
    """Backends from CLI flags; optionally wrapped for trace recording."""
    if getattr(args, "replay_trace", None):
        header, traces = load_traces(args.replay_trace)
        suite = BackendSuite(
            segmenter=ReplaySegmenter(traces["segmenter"], strict=not args.lenient),
            temporal=ReplayTemporal(traces["temporal"], strict=not args.lenient),
            captioner=ReplayCaptioner(traces["captioner"], strict=not args.lenient),
        )
        return suite, None
    if args.backend == "http":
        missing = [
            flag
            for flag, value in (
                ("--segmenter-url", args.segmenter_url),
                ("--temporal-url", args.temporal_url),
                ("--captioner-url", args.captioner_url),
            )
            if not value
        ]
        if missing:
            raise SystemExit(f"http backend needs {', '.join(missing)}")
        suite = BackendSuite(
            segmenter=HttpSegmenter(args.segmenter_url),
            temporal=HttpTemporal(args.temporal_url),
            captioner=HttpCaptioner(args.captioner_url),
        )
    else:
        suite = BackendSuite(
            segmenter=MockSegmenter(),
            temporal=MockTemporal(),
            captioner=MockCaptioner(),
        )
    if getattr(args, "trace", None):
        traces = {
            "segmenter": new_trace("segmenter", suite.segmenter.identity),
            "temporal": new_trace("temporal", suite.temporal.identity),
            "captioner": new_trace("captioner", suite.captioner.identity),
        }
        suite = BackendSuite(
            segmenter=RecordingSegmenter(suite.segmenter, traces["segmenter"]),
            temporal=RecordingTemporal(suite.temporal, traces["temporal"]),
            captioner=RecordingCaptioner(suite.captioner, traces["captioner"]),
        )
        return suite, traces
    return suite, None


def _config_from_args(args) -> PipelineConfig:
    params = StyleParams(overlay_alpha=args.alpha, stroke_width=args.stroke_width)
    return PipelineConfig(
        injection_style=InjectionStyle(kind=args.style, params=params),
        stabilize=args.stabilize,
        temporal_fallback=not args.no_temporal_fallback,
        captioner_frame_budget=args.frame_budget,
        segmenter_endpoint=args.segmenter_url,
        temporal_endpoint=args.temporal_url,
        captioner_endpoint=args.captioner_url,
    )


def _print_result(result: CaptionResult) -> None:
    print("\n== timeline ==")
    for event in result.timeline.events:
        print(f"  {event.start:7.2f}s  {event.end:7.2f}s  {event.caption}")
    print("\n== structured caption ==")
    for label, value in zip(FIELD_LABELS, result.structured.fields()):
        print(f"{label}: {value}")
    for w in result.warnings + result.structured.warnings:
        print(f"warning: {w}", file=sys.stderr)


def _write_outputs(result: CaptionResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "caption.json").write_text(
        json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n"
    )
    write_events_csv(result.timeline, out_dir / "events.csv")
    render_timeline_figure(result.timeline, out_dir / "timeline.png")
    print(f"\nwrote {out_dir / 'caption.json'}, events.csv, timeline.png")


def _run_caption(args) -> tuple[Session, CaptionResult, Optional[dict]]:
    clip, source = _load_input(args.input, args.fps)
    suite, traces = _build_suite(args)
    config = _config_from_args(args)
    session = Session(suite=suite, clip=clip, config=config)
    gesture = _gesture_from_args(args)
    session.select_object(gesture)
    result = session.run_pipeline()
    if traces is not None and args.trace:
        header = {
            "clip_source": source,
            "gesture": gesture,
            "config": config.to_json(),
            "result": result.canonical_bytes().decode(),
            "result_sha256": hashlib.sha256(result.canonical_bytes()).hexdigest(),
        }
        save_traces(args.trace, traces, header)
        print(f"trace written to {args.trace}")
    return session, result, traces


def cmd_caption(args) -> int:
    _, result, _ = _run_caption(args)
    _print_result(result)
    if args.out:
        _write_outputs(result, Path(args.out))
    return 0


def cmd_chat(args) -> int:
    session, result, _ = _run_caption(args)
    _print_result(result)
    print("\nchat about the highlighted object; empty line or 'exit' quits")
    while True:
        try:
            line = input("you> ").strip()
        except EOFError:
            break
        if not line or line.lower() in ("exit", "quit"):
            break
        try:
            reply = session.chat_turn(line)
        except SpotcapError as e:
            print(f"error: {e}", file=sys.stderr)
            continue
        print(f"assistant> {reply}")
    return 0


def cmd_events(args) -> int:
    clip, _ = _load_input(args.input, args.fps)
    suite, _ = _build_suite(args)
    timeline = analyze_timeline(clip, suite.temporal)
    for event in timeline.events:
        print(f"{event.start:7.2f}s  {event.end:7.2f}s  {event.caption}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_events_csv(timeline, out_dir / "events.csv")
        render_timeline_figure(timeline, out_dir / "timeline.png")
        print(f"wrote {out_dir / 'events.csv'} and timeline.png")
    return 0


def cmd_render_styles(args) -> int:
    clip, source = _load_input(args.input, args.fps)
    if not 0 <= args.frame < len(clip):
        raise SystemExit(f"frame {args.frame} outside clip of {len(clip)} frames")
    frame = clip.frames[args.frame]
    if args.mask:
        payload = json.loads(Path(args.mask).read_text())
        mask = rle_decode(RleMask.from_json(payload))
    elif source["kind"] == "scene":
        _, masklets = synth_clip(ScriptedScene.from_json(source["scene"]))
        if not masklets:
            raise SystemExit("scene has no objects; pass --mask")
        mask = masklets[args.scene_object].masks[args.frame]
    else:
        raise SystemExit("--mask is required for video inputs")
    params = StyleParams(overlay_alpha=args.alpha, stroke_width=args.stroke_width)
    out_dir = Path(args.out)
    metrics = render_style_sheet(frame, mask, out_dir, params)
    save_frame_png(frame, out_dir / "original.png")
    print(f"{'style':<16} interior_color_shift")
    for kind in STYLE_KINDS:
        print(f"{kind:<16} {metrics[kind]:.2f}")
    print(f"wrote sheet and per-style PNGs to {out_dir}")
    return 0


def cmd_replay(args) -> int:
    header, traces = load_traces(args.trace)
    clip = _clip_from_source(header["clip_source"])
    suite = BackendSuite(
        segmenter=ReplaySegmenter(traces["segmenter"], strict=not args.lenient),
        temporal=ReplayTemporal(traces["temporal"], strict=not args.lenient),
        captioner=ReplayCaptioner(traces["captioner"], strict=not args.lenient),
    )
    config = PipelineConfig.from_json(header["config"])
    session = Session(suite=suite, clip=clip, config=config)
    session.select_object(header["gesture"])
    result = session.run_pipeline()
    _print_result(result)
    recorded = header.get("result", "").encode()
    replayed = result.canonical_bytes()
    if recorded:
        if replayed == recorded:
            print("\nreplay verified: result is bit-exact with the recording")
            return 0
        print("\nreplay MISMATCH: result differs from the recording", file=sys.stderr)
        return 1
    print("\ntrace has no recorded result to verify against", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    suite, _ = _build_suite(args)
    app = create_app(suite, config=_config_from_args(args))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_backend_flags(parser: argparse.ArgumentParser, with_trace: bool = True) -> None:
    parser.add_argument(
        "--backend", choices=("mock", "http"), default="mock",
        help="mock backends run with no model server (default)",
    )
    parser.add_argument("--segmenter-url", default=None)
    parser.add_argument("--temporal-url", default=None)
    parser.add_argument("--captioner-url", default=None)
    if with_trace:
        parser.add_argument("--trace", default=None, help="record all backend exchanges to this JSONL file")
        parser.add_argument("--replay-trace", default=None, help="serve backend responses from a recorded trace")
        parser.add_argument("--lenient", action="store_true", help="replay misses fall back to the nearest entry")


def _add_style_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--style", choices=STYLE_KINDS, default="bbox_plus_mask")
    parser.add_argument("--alpha", type=float, default=0.4)
    parser.add_argument("--stroke-width", type=int, default=3)
    parser.add_argument("--stabilize", action="store_true", help="gate masks with the Kalman tracker")
    parser.add_argument("--no-temporal-fallback", action="store_true")
    parser.add_argument("--frame-budget", type=int, default=16)


def _add_gesture_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--point", type=_parse_xy, action="append", help="positive point X,Y (repeatable)")
    parser.add_argument("--neg-point", type=_parse_xy, action="append", help="negative point X,Y (repeatable)")
    parser.add_argument("--box", default=None, help="box X0,Y0,X1,Y1")
    parser.add_argument("--region", default=None, help="path to an RLE mask JSON file")
    parser.add_argument("--anchor-frame", type=int, default=0)
    parser.add_argument("--normalized", action="store_true", help="coordinates are in [0,1] instead of pixels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spotcap",
        description="object-centric video captioning: segment, timeline, highlight, caption, chat",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("caption", help="caption one user-selected object")
    p.add_argument("input", help="video file, or a .json synthetic scene spec")
    p.add_argument("--fps", type=float, default=None, help="resample the video to this rate")
    p.add_argument("--out", default=None, help="directory for caption.json, events.csv, timeline.png")
    _add_gesture_flags(p)
    _add_style_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("chat", help="caption, then chat about the object")
    p.add_argument("input")
    p.add_argument("--fps", type=float, default=None)
    _add_gesture_flags(p)
    _add_style_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("events", help="temporal analysis only")
    p.add_argument("input")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--out", default=None, help="directory for events.csv and timeline.png")
    _add_backend_flags(p, with_trace=False)
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("render-styles", help="side-by-side sheet of all highlight styles")
    p.add_argument("input")
    p.add_argument("frame", type=int)
    p.add_argument("--mask", default=None, help="RLE mask JSON for that frame")
    p.add_argument("--scene-object", type=int, default=0, help="scene object index when input is a scene")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--stroke-width", type=int, default=3)
    p.add_argument("--out", default="styles_out")
    p.set_defaults(func=cmd_render_styles)

    p = sub.add_parser("replay", help="re-run a recorded trace and verify the result")
    p.add_argument("trace")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="start the HTTP gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    _add_style_flags(p)
    _add_backend_flags(p, with_trace=False)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpotcapError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
