# -*- coding: utf-8 -*-

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from newton_scenarios.errors import BankError
from newton_scenarios.worker_plots import Colors, SvgLayout, render_curves, render_entry


SVG_NS = "{http://www.w3.org/2000/svg}"


def _classes(svg, tag):
    root = ET.fromstring(svg)
    return [el.get("class") for el in root.iter(f"{SVG_NS}{tag}")]


def test_render_entry_glyphs(canonical_bank):
    svg = render_entry(canonical_bank, 1)
    assert svg.startswith("<svg")
    assert _classes(svg, "polyline") == ["trajectory"]
    lines = _classes(svg, "line")
    assert lines.count("velocity") == 10
    assert lines.count("force") == 10
    assert Colors.TRAJECTORY in svg
    assert Colors.VELOCITY in svg
    assert Colors.FORCE in svg


def test_render_entry_title(canonical_bank):
    root = ET.fromstring(render_entry(canonical_bank, 12))
    title = root.find(f"{SVG_NS}title").text
    assert title == "entry 12: scenario 2, azimuth 135, elevation 0"


def test_render_entry_static_scenario_is_a_marker(canonical_bank):
    svg = render_entry(canonical_bank, 29)
    assert _classes(svg, "polyline") == []
    assert _classes(svg, "circle") == ["marker"]


def test_render_entry_fits_canvas(canonical_bank):
    layout = SvgLayout()
    root = ET.fromstring(render_entry(canonical_bank, 63, layout))
    poly = root.find(f"{SVG_NS}polyline")
    pts = np.array(
        [[float(v) for v in p.split(",")] for p in poly.get("points").split()]
    )
    assert pts[:, 0].min() >= layout.margin - 1e-3
    assert pts[:, 0].max() <= layout.width - layout.margin + 1e-3
    assert pts[:, 1].min() >= 0.0
    assert pts[:, 1].max() <= layout.height


def test_render_entry_unknown(canonical_bank):
    with pytest.raises(BankError):
        render_entry(canonical_bank, 99)


def test_render_curves():
    curves = [
        ("q1", np.array([[0.0, 0.0], [0.1, 0.05]])),
        ("q2", np.array([[0.0, 0.1], [-0.1, 0.0], [-0.2, -0.1]])),
    ]
    svg = render_curves(curves)
    assert _classes(svg, "polyline") == ["query", "query"]
    root = ET.fromstring(svg)
    labels = [g.find(f"{SVG_NS}title").text for g in root.iter(f"{SVG_NS}g")]
    assert labels == ["q1", "q2"]


def test_render_curves_empty():
    svg = render_curves([])
    assert _classes(svg, "polyline") == []
    ET.fromstring(svg)


def test_render_curves_escapes_labels():
    label = 'run <3> & "tuned"'
    svg = render_curves([(label, np.array([[0.0, 0.0], [0.1, 0.1]]))])
    assert "<3>" not in svg
    root = ET.fromstring(svg)
    (group,) = root.iter(f"{SVG_NS}g")
    assert group.find(f"{SVG_NS}title").text == label
