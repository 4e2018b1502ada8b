import csv
import io
import re

import numpy as np
import pytest

from krylovlab.errors import ConfigError
from krylovlab.report import column_values, format_value, read_csv, rows_to_csv, svg_plot


def _points(svg, name):
    m = re.search(rf'data-name="{re.escape(name)}"[^>]*points="([^"]*)"', svg)
    return np.array([[float(t) for t in p.split(",")] for p in m.group(1).split()])


class TestFormatting:
    def test_reals_round_trip(self):
        x = 0.1 + 0.2
        assert float(format_value(x)) == x

    def test_complex(self):
        assert format_value(1.5 - 2j) == "1.5-2i"

    def test_bool_and_none(self):
        assert format_value(True) == "true"
        assert format_value(None) == ""

    def test_csv_is_rfc4180(self):
        text = rows_to_csv([{"a": 1, "b": "x,y"}])
        assert text == 'a,b\r\n1,"x,y"\r\n'
        assert list(csv.reader(io.StringIO(text))) == [["a", "b"], ["1", "x,y"]]

    def test_header_for_empty_rows(self):
        assert rows_to_csv([], ["N", "err"]) == "N,err\r\n"


class TestReading:
    def test_expression_columns(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(rows_to_csv([{"N": 2, "rho1": 0.5}, {"N": 4, "rho1": 0.25}]))
        header, rows = read_csv(path)
        np.testing.assert_allclose(column_values(header, rows, "rho1*N^2"), [2.0, 4.0])

    def test_unknown_column_lists_available(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(rows_to_csv([{"N": 2, "rho1": 0.5}]))
        header, rows = read_csv(path)
        with pytest.raises(ConfigError, match="available: N, rho1"):
            column_values(header, rows, "rho9")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("")
        with pytest.raises(ConfigError):
            read_csv(path)


class TestSvg:
    def test_empty_plot_has_axes(self):
        svg = svg_plot([], {})
        assert svg.startswith("<svg") and svg.count('class="axis"') == 2
        assert "polyline" not in svg

    def test_monotone_column_gives_monotone_polyline(self):
        svg = svg_plot([1, 2, 3, 4], {"y": [1.0, 2.0, 4.0, 8.0]})
        pts = _points(svg, "y")
        assert np.all(np.diff(pts[:, 0]) > 0)
        # screen y grows downward
        assert np.all(np.diff(pts[:, 1]) < 0)

    def test_log_scale_breaks_at_nonpositive(self):
        svg = svg_plot([1, 2, 3], {"y": [1.0, 0.0, 1e-3]}, log=True)
        assert svg.count('data-name="y"') == 2

    def test_escapes_labels(self):
        svg = svg_plot([1], {"a<b": [1.0]}, title="x & y")
        assert "a&lt;b" in svg and "x &amp; y" in svg
