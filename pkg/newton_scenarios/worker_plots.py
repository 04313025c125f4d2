# -*- coding: utf-8 -*-

"""
SVG rendering of projected trajectories with velocity and force glyphs
"""
from dataclasses import dataclass
import logging
from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from newton_scenarios.worker_camera import Camera, project_curve, project_direction
from newton_scenarios.worker_matching import ScenarioBank


mlogger = logging.getLogger("newton-scenarios")


class Colors:
    TRAJECTORY = "#FF8C00"
    VELOCITY = "#00A000"
    FORCE = "#FF00FF"
    MARKER = "#FF8C00"
    BACKGROUND = "#FFFFFF"
    QUERY = ("#FF8C00", "#1F77B4", "#D62728", "#9467BD", "#8C564B", "#17BECF")


@dataclass(frozen=True)
class SvgLayout:
    width: int = 480
    height: int = 360
    margin: int = 30
    glyph_length: float = 24.0
    stroke: float = 2.0
    marker_radius: float = 5.0


class _Canvas:
    """Maps image-plane points into the SVG viewport, v axis up"""

    def __init__(self, points: np.ndarray, layout: SvgLayout):
        self.layout = layout
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
        inner_w = layout.width - 2 * layout.margin
        inner_h = layout.height - 2 * layout.margin
        self.scale = min(inner_w, inner_h) / span if span > 0 else 1.0
        self.center = (lo + hi) / 2

    def to_px(self, uv: Sequence[float]) -> Tuple[float, float]:
        x = self.layout.width / 2 + (uv[0] - self.center[0]) * self.scale
        y = self.layout.height / 2 - (uv[1] - self.center[1]) * self.scale
        return x, y


def _num(value: float) -> str:
    return f"{value:.3f}"


def _header(layout: SvgLayout, title: str) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{layout.width}" '
        f'height="{layout.height}" viewBox="0 0 {layout.width} {layout.height}">',
        f"<title>{escape(title)}</title>",
        f'<rect width="{layout.width}" height="{layout.height}" '
        f'fill="{Colors.BACKGROUND}"/>',
    ]


def _polyline(
    pixels: Sequence[Tuple[float, float]], color: str, width: float, cls: str
) -> str:
    pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in pixels)
    return (
        f'<polyline class="{cls}" points="{pts}" fill="none" '
        f'stroke="{color}" stroke-width="{width}"/>'
    )


def _glyph(
    start: Tuple[float, float],
    direction: np.ndarray,
    layout: SvgLayout,
    color: str,
    cls: str,
) -> str:
    x1, y1 = start
    x2 = x1 + direction[0] * layout.glyph_length
    y2 = y1 - direction[1] * layout.glyph_length
    return (
        f'<line class="{cls}" x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" '
        f'y2="{_num(y2)}" stroke="{color}" stroke-width="{layout.stroke}"/>'
    )


def render_entry(
    bank: ScenarioBank, entry_id: int, layout: SvgLayout = SvgLayout()
) -> str:
    """
    Draws an entry's sampled trajectory as seen from its viewpoint: the path
    in orange, velocity glyphs in green and net-force glyphs in magenta.
    A path without extent is drawn as a single point marker.

    Args:
        bank:                   ScenarioBank with stored states
        entry_id:               catalog entry to draw
        layout:                 SvgLayout

    Returns:
        SVG document
    """
    entry = bank.entry(entry_id)
    mlogger.debug(f"Rendering entry {entry_id} to SVG.")
    cam = Camera.from_viewpoint(entry.viewpoint)
    states = bank.states[entry_id]
    image = np.array(project_curve(cam, states))
    canvas = _Canvas(image, layout)
    pixels = [canvas.to_px(p) for p in image]

    title = (
        f"entry {entry_id}: scenario {entry.scenario_id}, "
        f"azimuth {entry.viewpoint.azimuth:g}, "
        f"elevation {entry.viewpoint.elevation:g}"
    )
    lines = _header(layout, title)
    if np.ptp(image, axis=0).max() > 0:
        lines.append(_polyline(pixels, Colors.TRAJECTORY, layout.stroke, "trajectory"))
    else:
        x, y = pixels[0]
        lines.append(
            f'<circle class="marker" cx="{_num(x)}" cy="{_num(y)}" '
            f'r="{layout.marker_radius}" fill="{Colors.MARKER}"/>'
        )
    for state, px in zip(states, pixels):
        vel = project_direction(cam, state.position, state.velocity_dir)
        force = project_direction(cam, state.position, state.force_dir)
        lines.append(_glyph(px, vel, layout, Colors.VELOCITY, "velocity"))
        lines.append(_glyph(px, force, layout, Colors.FORCE, "force"))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_curves(
    curves: Sequence[Tuple[str, np.ndarray]], layout: SvgLayout = SvgLayout()
) -> str:
    """
    Draws one polyline per labelled image-plane curve on a shared canvas

    Args:
        curves:                 (label, N x 2 image points) pairs
        layout:                 SvgLayout

    Returns:
        SVG document
    """
    lines = _header(layout, f"{len(curves)} predicted curves")
    if curves:
        canvas = _Canvas(np.vstack([np.asarray(c) for _, c in curves]), layout)
        for k, (label, points) in enumerate(curves):
            color = Colors.QUERY[k % len(Colors.QUERY)]
            pixels = [canvas.to_px(p) for p in np.asarray(points)]
            lines.append(f"<g><title>{escape(label)}</title>")
            lines.append(_polyline(pixels, color, layout.stroke, "query"))
            lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
