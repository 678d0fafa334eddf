"""spotcap: interactive object-centric video captioning pipeline.

Select an object in one frame, track its mask through the clip, detect
event boundaries, burn a visual highlight into the frames, and drive a
captioning backend into structured, temporally grounded descriptions and
multi-round chat about that one object.
"""

from .captioner import (
    CHAT_PREAMBLE,
    FIELD_LABELS,
    CaptionerBackend,
    ChatTurn,
    CotTemplate,
    StructuredCaption,
    build_cot_prompt,
    parse_structured_caption,
    render_structured_caption,
    request_caption,
)
from .errors import SpotcapError
from .highlight import (
    STYLE_KINDS,
    InjectionStyle,
    StyleParams,
    default_style,
    inject,
    inject_video,
    interior_color_shift,
)
from .media import (
    Box,
    Frame,
    Polygon,
    RleMask,
    VideoClip,
    bbox_of,
    clip_from_arrays,
    contour_polygon,
    iou,
    load_video,
    morphology,
    rle_decode,
    rle_encode,
)
from .pipeline import (
    BackendSuite,
    CaptionResult,
    PipelineConfig,
    Session,
    SessionStore,
    sample_frames,
)
from .segmenter import (
    Masklet,
    PromptPoint,
    SegmenterBackend,
    SegmentResult,
    VisualPrompt,
    normalize_prompt,
    segment_video,
)
from .synth import SceneObject, ScriptedScene, synth_clip
from .timeline import (
    Event,
    TemporalBackend,
    Timeline,
    analyze_timeline,
    events_for_time,
    normalize_events,
)
from .tracking import KalmanParams, KfState, kalman_step, stabilize_track

__version__ = "0.1.0"

__all__ = [
    "BackendSuite",
    "Box",
    "CaptionResult",
    "CaptionerBackend",
    "ChatTurn",
    "CotTemplate",
    "Event",
    "Frame",
    "InjectionStyle",
    "KalmanParams",
    "KfState",
    "Masklet",
    "PipelineConfig",
    "Polygon",
    "PromptPoint",
    "RleMask",
    "SceneObject",
    "ScriptedScene",
    "SegmentResult",
    "SegmenterBackend",
    "Session",
    "SessionStore",
    "SpotcapError",
    "StructuredCaption",
    "StyleParams",
    "TemporalBackend",
    "Timeline",
    "VideoClip",
    "VisualPrompt",
    "analyze_timeline",
    "bbox_of",
    "build_cot_prompt",
    "clip_from_arrays",
    "contour_polygon",
    "default_style",
    "events_for_time",
    "inject",
    "inject_video",
    "interior_color_shift",
    "iou",
    "kalman_step",
    "load_video",
    "morphology",
    "normalize_events",
    "normalize_prompt",
    "parse_structured_caption",
    "render_structured_caption",
    "request_caption",
    "rle_decode",
    "rle_encode",
    "sample_frames",
    "segment_video",
    "stabilize_track",
    "synth_clip",
]
