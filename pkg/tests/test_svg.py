import re
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualmind.svg import bar_chart, line_chart

NS = "{http://www.w3.org/2000/svg}"


def test_line_chart_one_polyline_per_series():
    svg = line_chart("t", [0, 1, 2], {"a": [0, 0.5, 1], "b<&>": [1, 1, 0]})
    root = ET.fromstring(svg)
    lines = root.findall(f"{NS}polyline")
    assert [p.get("data-series") for p in lines] == ["a", "b<&>"]
    assert all(len(p.get("points").split()) == 3 for p in lines)


def test_points_map_into_the_plot_area():
    svg = line_chart("t", [0, 10], {"a": [0.0, 1.0]})
    (line,) = ET.fromstring(svg).findall(f"{NS}polyline")
    (x0, y0), (x1, y1) = [tuple(map(float, p.split(","))) for p in line.get("points").split()]
    assert x0 < x1 and y0 > y1  # y grows downwards in SVG


def test_bar_chart_groups():
    svg = bar_chart("t", ["x", "y", "z"], {"s1": [0.1, 0.2, 0.3], "s2": [1, 0, 0.5]})
    rects = [r for r in ET.fromstring(svg).findall(f"{NS}rect") if r.get("data-series")]
    assert len(rects) == 6
    assert all(float(r.get("height")) >= 0 for r in rects)


def test_length_mismatch():
    with pytest.raises(ValueError):
        line_chart("t", [0, 1], {"a": [1.0]})
    with pytest.raises(ValueError):
        bar_chart("t", ["a"], {"s": [1.0, 2.0]})


@given(ys=st.lists(st.floats(-10, 10), min_size=2, max_size=8))
def test_output_is_deterministic_and_well_formed(ys):
    xs = list(range(len(ys)))
    a = line_chart("t", xs, {"s": ys}, y_range=(-10, 10))
    assert a == line_chart("t", xs, {"s": ys}, y_range=(-10, 10))
    ET.fromstring(a)
    assert not re.search(r"\d\.\d{3,}", a)  # fixed two-decimal coordinates


def test_degenerate_ranges_do_not_divide_by_zero():
    ET.fromstring(line_chart("t", [1.0], {"s": [0.5]}, y_range=(0.5, 0.5)))
