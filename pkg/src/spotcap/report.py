"""Report rendering: style comparison sheets and delimited summaries."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import DegenerateInteriorError
from .highlight import STYLE_KINDS, InjectionStyle, StyleParams, inject, interior_color_shift
from .media import Frame, Mask, save_frame_png
from .timeline import Timeline


def render_style_sheet(
    frame: Frame,
    mask: Mask,
    out_dir: str | Path,
    params: StyleParams | None = None,
) -> dict[str, float]:
    """Render every highlight style side by side and measure its color shift.

    Writes one PNG per style, a combined sheet (styles.png), and
    style_metrics.csv into ``out_dir``. Returns style -> interior color
    shift at margin = stroke width (NaN when the interior erodes away).
    """
    params = params or StyleParams()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    metrics: dict[str, float] = {}
    rendered: dict[str, Frame] = {}
    for kind in STYLE_KINDS:
        style = InjectionStyle(kind=kind, params=params)
        result = inject(frame, mask, style)
        rendered[kind] = result
        try:
            metrics[kind] = interior_color_shift(frame, result, mask, params.stroke_width)
        except DegenerateInteriorError:
            metrics[kind] = float("nan")
        save_frame_png(result, out / f"style_{kind}.png")

    fig, axes = plt.subplots(3, 3, figsize=(12, 9))
    axes = axes.ravel()
    axes[0].imshow(frame.pixels)
    axes[0].set_title("original")
    for ax, kind in zip(axes[1:], STYLE_KINDS):
        ax.imshow(rendered[kind].pixels)
        shift = metrics[kind]
        ax.set_title(f"{kind}\ncolor shift {shift:.1f}")
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(out / "styles.png", dpi=110)
    plt.close(fig)

    with (out / "style_metrics.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["style", "interior_color_shift"])
        for kind in STYLE_KINDS:
            writer.writerow([kind, f"{metrics[kind]:.4f}"])

    return metrics


def write_events_csv(timeline: Timeline, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_s", "end_s", "caption"])
        for event in timeline.events:
            writer.writerow([f"{event.start:.3f}", f"{event.end:.3f}", event.caption])


def render_timeline_figure(timeline: Timeline, path: str | Path) -> None:
    """Horizontal bar chart of event spans over the clip."""
    fig, ax = plt.subplots(figsize=(10, 1.2 + 0.5 * len(timeline.events)))
    for i, event in enumerate(timeline.events):
        ax.barh(i, event.end - event.start, left=event.start, height=0.6)
        ax.text(event.start, i, f" {event.caption}", va="center", fontsize=9)
    ax.set_xlim(0, timeline.duration)
    ax.set_yticks([])
    ax.set_xlabel("seconds")
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
