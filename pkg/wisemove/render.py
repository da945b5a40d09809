"""
Watch-only rendering of episode traces, as ASCII frames or SVG files.

Frames are built from trace records, so a trace read back from disk renders
exactly like one still in memory.
"""
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Polygon, Rectangle

from .exceptions import RenderError
from .traces import EpisodeTrace, LoggedTrace, trace_records, vehicle_records
from .world import Rect, RoadGeometry, Route, WorldState

logger = logging.getLogger(__name__)

ASCII_COLS = 121
ASCII_ROWS = 61
METERS_PER_COL = 1.0
METERS_PER_ROW = 2.0
STYLES = ("ascii", "svg")


@dataclass(frozen=True)
class VehicleGlyph:
    index: int
    center: Tuple[float, float]
    corners: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class Frame:
    t: int
    time: float
    option: str
    vehicles: Tuple[VehicleGlyph, ...]


def world_to_canvas(x: float, y: float, g: RoadGeometry = None) -> Tuple[int, int]:
    """(column, row) of a world point on the ASCII canvas; row 0 is the top."""
    g = g or RoadGeometry()
    half = g.route_length / 2
    return round((x + half) / METERS_PER_COL), round((half - y) / METERS_PER_ROW)


def _corners(record: dict, g: RoadGeometry):
    fx, fy = math.sin(record["theta"]) * g.veh_len / 2, math.cos(record["theta"]) * g.veh_len / 2
    lx, ly = -math.cos(record["theta"]) * g.veh_wid / 2, math.sin(record["theta"]) * g.veh_wid / 2
    x, y = record["X"], record["Y"]
    return (
        (x + fx + lx, y + fy + ly),
        (x + fx - lx, y + fy - ly),
        (x - fx - lx, y - fy - ly),
        (x - fx + lx, y - fy + ly),
    )


def _records_of(trace) -> List[dict]:
    if isinstance(trace, EpisodeTrace):
        return trace_records(trace)
    if isinstance(trace, LoggedTrace):
        return trace.records
    return list(trace)


def build_frames(trace, g: RoadGeometry = None) -> List[Frame]:
    """One frame per step record."""
    g = g or RoadGeometry()
    frames = []
    for record in _records_of(trace):
        if record.get("kind") != "step":
            continue
        glyphs = tuple(
            VehicleGlyph(index=i, center=(veh["X"], veh["Y"]), corners=_corners(veh, g))
            for i, veh in enumerate(record["vehicles"])
        )
        frames.append(Frame(t=record["t"], time=record["time"], option=record.get("option", ""), vehicles=glyphs))
    return frames


# --- ASCII ------------------------------------------------------------------

def _paint_rect(grid, rect: Rect, char: str, g: RoadGeometry):
    c0, r1 = world_to_canvas(rect.xmin, rect.ymin, g)
    c1, r0 = world_to_canvas(rect.xmax, rect.ymax, g)
    for row in range(max(r0, 0), min(r1, ASCII_ROWS - 1) + 1):
        for col in range(max(c0, 0), min(c1, ASCII_COLS - 1) + 1):
            grid[row][col] = char


def _inside(corners, x: float, y: float) -> bool:
    sign = None
    for (x0, y0), (x1, y1) in zip(corners, corners[1:] + corners[:1]):
        cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
        if cross != 0:
            if sign is None:
                sign = cross > 0
            elif (cross > 0) != sign:
                return False
    return True


def _background(g: RoadGeometry):
    grid = [[" "] * ASCII_COLS for _ in range(ASCII_ROWS)]
    half = g.route_length / 2
    _paint_rect(grid, Rect(-half, half, -g.lane_width, g.lane_width), ".", g)
    _paint_rect(grid, Rect(-g.lane_width, g.lane_width, -half, half), ".", g)
    for route in Route:
        _paint_rect(grid, g.stop_region(route), "=", g)
    _paint_rect(grid, g.intersection_box, "+", g)
    _paint_rect(grid, g.goal_region, "G", g)
    return grid


def render_ascii(frame: Frame, g: RoadGeometry = None) -> str:
    g = g or RoadGeometry()
    grid = _background(g)
    for glyph in frame.vehicles:
        char = "E" if glyph.index == 0 else str(glyph.index % 10)
        xs = [c[0] for c in glyph.corners]
        ys = [c[1] for c in glyph.corners]
        c0, r1 = world_to_canvas(min(xs), min(ys), g)
        c1, r0 = world_to_canvas(max(xs), max(ys), g)
        for row in range(max(r0, 0), min(r1, ASCII_ROWS - 1) + 1):
            for col in range(max(c0, 0), min(c1, ASCII_COLS - 1) + 1):
                x = col * METERS_PER_COL - g.route_length / 2
                y = g.route_length / 2 - row * METERS_PER_ROW
                if _inside(list(glyph.corners), x, y):
                    grid[row][col] = char
        col, row = world_to_canvas(*glyph.center, g)
        if 0 <= row < ASCII_ROWS and 0 <= col < ASCII_COLS:
            grid[row][col] = char
    header = f"t={frame.time:.1f}s option={frame.option}"
    return header + "\n" + "\n".join("".join(row) for row in grid) + "\n"


# --- SVG --------------------------------------------------------------------

def _rect_patch(rect: Rect, **style) -> Rectangle:
    return Rectangle((rect.xmin, rect.ymin), rect.xmax - rect.xmin, rect.ymax - rect.ymin, **style)


def render_svg(frame: Frame, g: RoadGeometry = None) -> str:
    g = g or RoadGeometry()
    half = g.route_length / 2
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot()
    ax.set_xlim(-half, half)
    ax.set_ylim(-half, half)
    ax.set_aspect("equal")
    ax.set_axis_off()
    ax.add_patch(_rect_patch(Rect(-half, half, -g.lane_width, g.lane_width), color="0.8"))
    ax.add_patch(_rect_patch(Rect(-g.lane_width, g.lane_width, -half, half), color="0.8"))
    ax.axhline(0, color="white", linestyle="--", linewidth=0.5)
    ax.axvline(0, color="white", linestyle="--", linewidth=0.5)
    for route in Route:
        ax.add_patch(_rect_patch(g.stop_region(route), color="tab:red", alpha=0.3))
    ax.add_patch(_rect_patch(g.intersection_box, color="0.6"))
    ax.add_patch(_rect_patch(g.goal_region, color="tab:green", alpha=0.3))
    for glyph in frame.vehicles:
        color = "tab:blue" if glyph.index == 0 else "tab:orange"
        ax.add_patch(Polygon(glyph.corners, closed=True, color=color))
    ax.set_title(f"t={frame.time:.1f}s  {frame.option}")
    buffer = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "wisemove", "svg.fonttype": "none"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def render(trace, style: str = "ascii", out: Optional[str] = None, g: RoadGeometry = None) -> List[str]:
    """
    Render every step of ``trace``.  SVG frames are written to ``out`` as
    frame_%06d.svg when a directory is given; the rendered frames are
    returned either way.
    """
    if style not in STYLES:
        raise RenderError(f"Unknown render style {style!r}; expected one of {', '.join(STYLES)}")
    g = g or RoadGeometry()
    painter = render_ascii if style == "ascii" else render_svg
    rendered = [painter(frame, g) for frame in build_frames(trace, g)]
    if out is not None and style == "svg":
        directory = Path(out)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            for number, svg in enumerate(rendered):
                (directory / f"frame_{number:06d}.svg").write_text(svg, encoding="utf-8")
        except OSError as e:
            raise RenderError(f"Cannot write frames to {directory}: {e}") from e
        logger.info("Wrote %d SVG frames to %s", len(rendered), directory)
    return rendered


def render_state(s: WorldState, style: str = "ascii") -> str:
    record = {"kind": "step", "t": s.time_step, "time": s.time_step * s.dynamics.dt, "vehicles": vehicle_records(s)}
    return render([record], style=style, g=s.geometry)[0]
