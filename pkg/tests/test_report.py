"""Serialization helpers: canonical JSON, human summaries, CSV flattening."""

import json
import math

import pytest

from prekahler.report import (
    ReportDocument,
    canonical_json,
    fmt_number,
    human_summary,
    jsonable,
    records_csv,
)


def _doc(**over):
    base = dict(command="analyze", version="0", inputs={"builtin": "flat"},
                tolerances={"tol": 1e-8}, records=[], aggregate={}, notes=[])
    base.update(over)
    return ReportDocument(**base)


class TestJsonable:
    def test_complex_becomes_re_im_pair(self):
        assert jsonable(1 + 2j) == {"im": 2.0, "re": 1.0}

    def test_non_finite_floats_become_strings(self):
        assert jsonable(math.inf) == "inf"
        assert jsonable(-math.inf) == "-inf"
        assert jsonable(math.nan) == "nan"

    def test_containers_recurse(self):
        out = jsonable({"xs": (1, 2.5), "flag": True, "none": None})
        assert out == {"xs": [1, 2.5], "flag": True, "none": None}

    def test_numpy_scalars_unwrap(self):
        import numpy as np
        assert jsonable(np.float64(0.5)) == 0.5
        assert jsonable(np.int32(7)) == 7
        assert jsonable(np.array([1.0, 2.0])) == [1.0, 2.0]

    def test_unknown_types_are_loud(self):
        with pytest.raises(TypeError):
            jsonable(object())


class TestCanonicalJson:
    def test_sorted_compact_and_newline_terminated(self):
        text = canonical_json(_doc(aggregate={"b": 1, "a": 2}))
        assert text.endswith("\n")
        assert '"a":2' in text and text.index('"a":2') < text.index('"b":1')
        assert ": " not in text

    def test_round_trips_through_json(self):
        doc = _doc(records=[{"T1": 0.5 + 0.25j}], aggregate={"order": math.inf})
        tree = json.loads(canonical_json(doc))
        assert tree["records"][0]["T1"] == {"im": 0.25, "re": 0.5}
        assert tree["aggregate"]["order"] == "inf"

    def test_identical_documents_serialize_identically(self):
        a = canonical_json(_doc(aggregate={"x": 1.0, "y": 2.0}))
        b = canonical_json(_doc(aggregate={"y": 2.0, "x": 1.0}))
        assert a == b


def test_fmt_number_styles():
    assert fmt_number(True) == "true"
    assert fmt_number(0.125) == "0.125"
    assert "i" in fmt_number(1 + 2j)


def test_human_summary_mentions_the_command_and_skips_missing():
    doc = _doc(aggregate={"verdict": "flat2Nondeg", "max_bT1": None})
    text = human_summary(doc)
    assert "analyze" in text
    assert "verdict" in text
    assert "max_bT1" not in text
    assert "None" not in text


class TestRecordsCsv:
    def test_complex_columns_split(self):
        rows = [{"T1": 1 + 2j, "rank": 1}]
        text = records_csv(rows)
        header = text.splitlines()[0].split(",")
        assert "T1_re" in header and "T1_im" in header and "rank" in header

    def test_missing_cells_are_empty(self):
        rows = [{"x": 1.0}, {"y": 2.0}]
        lines = records_csv(rows).splitlines()
        assert len(lines) == 3
        assert "" in lines[1].split(",") or "" in lines[2].split(",")

    def test_re_im_dicts_flatten_like_complex(self):
        rows = [{"T3": {"re": 0.0, "im": -1.0}}]
        header = records_csv(rows).splitlines()[0].split(",")
        assert "T3_re" in header and "T3_im" in header

    def test_nested_keys_use_dots(self):
        rows = [{"point": {"z1": 0.5}}]
        header = records_csv(rows).splitlines()[0].split(",")
        assert "point.z1" in header
