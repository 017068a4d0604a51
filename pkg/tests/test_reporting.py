import math
import os
import xml.etree.ElementTree as ET
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ablasim import reporting
from ablasim.postprocess import TimeSeriesRecord


def _record(t=1.0, method="BE", **kw):
    base = dict(
        t=t, method=method, applied_voltage=30.0, convection_ratio=0.25,
        lesion_area=2.5e-6, lesion_volume=1.5e-8, t_max=61.25,
        t_max_location=(1.0e-3, 2.17e-2),
        probe_temperatures=(40.0, 45.5, 39.25),
        stored_energy={"Muscle": 12.0, "Blood": 3.0, "Electrode": 0.5},
        joule_energy={"Muscle": 25.0, "Blood": 100.0, "Electrode": 0.0},
    )
    base.update(kw)
    return TimeSeriesRecord(**base)


def test_run_csv_schema_is_frozen():
    assert reporting.RUN_CSV_COLUMNS == (
        "t_s", "method", "voltage_V", "conv_ratio",
        "lesion_area_mm2", "lesion_volume_mm3",
        "T_max_C", "r_max_mm", "z_max_mm",
        "T_probe_1p3_C", "T_probe_2p6_C", "T_probe_5p2_C",
        "E_stored_muscle_J", "E_stored_blood_J", "E_stored_electrode_J",
        "E_joule_muscle_J", "E_joule_blood_J",
    )
    header = reporting.run_csv_text([]).splitlines()[0]
    assert header == ",".join(reporting.RUN_CSV_COLUMNS)


def test_run_row_units_and_formats():
    row = reporting.run_row(_record())
    named = dict(zip(reporting.RUN_CSV_COLUMNS, row))
    assert named["t_s"] == "1.0000"
    assert named["method"] == "BE"
    assert named["conv_ratio"] == "0.25"
    assert named["lesion_area_mm2"] == "2.500000"     # m^2 -> mm^2
    assert named["lesion_volume_mm3"] == "15.000000"  # m^3 -> mm^3
    assert named["r_max_mm"] == "1.000000"
    assert named["z_max_mm"] == "21.700000"
    assert named["E_joule_blood_J"] == "100.000000"


def test_nan_cells_render_empty():
    rec = _record(probe_temperatures=(40.0, math.nan, 39.0))
    row = reporting.run_row(rec)
    assert row[reporting.RUN_CSV_COLUMNS.index("T_probe_2p6_C")] == ""


def test_truncation_marker_row():
    text = reporting.run_csv_text([_record()], truncation="boom, at t=3\nmore")
    rows = text.strip().splitlines()
    last = rows[-1].split(",")
    assert last[0] == reporting.TRUNCATION_MARKER
    assert "boom; at t=3 more" == last[1]
    assert len(last) == len(reporting.RUN_CSV_COLUMNS)
    # data rows before the marker stay valid
    assert rows[1].split(",")[0] == "1.0000"


def test_summary_blanks_for_missing_metrics():
    rows = [
        {"group": "convection", "voltage_V": 30.0, "conv_ratio": 0.5,
         "crossover_time_s": 29.9, "peak_diff_ratio": 0.21,
         "t_peak_diff_s": 30.0, "lesion_volume_be_120s_mm3": 162.0,
         "lesion_volume_hbe_120s_mm3": 177.0, "T_max_be_120s_C": 66.0,
         "T_max_hbe_120s_C": 66.5},
        {"group": "convection", "voltage_V": 30.0, "conv_ratio": 1.5},
    ]
    text = reporting.summary_csv_text(rows)
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(reporting.SUMMARY_CSV_COLUMNS)
    ok_cells = lines[1].split(",")
    failed_cells = lines[2].split(",")
    assert ok_cells[3] == "29.900000"
    assert failed_cells[:3] == ["convection", "30", "1.5"]
    assert all(c == "" for c in failed_cells[3:])


def test_atomic_write_overwrites_and_leaves_no_temp(tmp_path):
    path = tmp_path / "out" / "file.csv"
    reporting.write_text_atomic(path, "one\n")
    reporting.write_text_atomic(path, "two\n")
    assert path.read_text() == "two\n"
    leftovers = [f for f in os.listdir(path.parent) if f.startswith(".tmp-")]
    assert leftovers == []


def _series(label, x, y, dash=False):
    return reporting.Series(label, tuple(x), tuple(y), dash=dash)


def test_line_chart_is_valid_svg_and_deterministic():
    s = [_series("a", [0, 1, 2], [1.0, 3.0, 2.0]),
         _series("b", [0, 1, 2], [0.5, 0.7, 0.4], dash=True)]
    svg1 = reporting.line_chart(s, "Demo", "x", "y")
    svg2 = reporting.line_chart(s, "Demo", "x", "y")
    assert svg1 == svg2
    root = ET.fromstring(svg1)
    assert root.tag.endswith("svg")
    assert svg1.count("<polyline") == 2


def test_line_chart_splits_on_nan():
    s = [_series("gap", [0, 1, 2, 3, 4], [1.0, 2.0, math.nan, 3.0, 4.0])]
    svg = reporting.line_chart(s, "Gaps", "x", "y")
    assert svg.count("<polyline") == 2  # one segment on each side of the hole


def test_line_chart_rejects_degenerate_input():
    with pytest.raises(reporting.ReportingError):
        reporting.line_chart([], "t", "x", "y")
    with pytest.raises(reporting.ReportingError):
        reporting.line_chart([_series("n", [0.0, 1.0], [math.nan, math.nan])],
                             "t", "x", "y")


def test_series_length_mismatch_rejected():
    with pytest.raises(reporting.ReportingError):
        _series("bad", [0, 1, 2], [1.0, 2.0])


@settings(max_examples=30, deadline=None)
@given(ys=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=40))
def test_line_chart_handles_arbitrary_finite_series(ys):
    s = [_series("s", list(range(len(ys))), ys)]
    svg = reporting.line_chart(s, "Fuzz", "x", "y")
    ET.fromstring(svg)
    assert svg.count("<polyline") == 1


def _fake_run(method, n=40, scale=1.0):
    recs = []
    for i in range(n):
        t = (i + 1) * 1.0
        recs.append(SimpleNamespace(
            t=t, method=method,
            lesion_volume=scale * 1e-9 * max(0.0, t - 5.0),
            lesion_area=scale * 1e-6 * max(0.0, t - 5.0),
            t_max=37.0 + scale * t / 4.0,
            probe_temperatures=(37.0 + t / 10.0, 37.0 + t / 8.0, 37.0 + t / 20.0),
            stored_energy={"Muscle": 0.2 * t, "Blood": 0.1 * t},
            joule_energy={"Muscle": 2.0 * t, "Blood": 8.0 * t},
        ))
    return recs


def test_run_chart_set():
    charts = reporting.run_charts(_fake_run("BE"))
    assert set(charts) == {"lesion_volume", "max_temperature", "probes", "energy"}
    for svg in charts.values():
        ET.fromstring(svg)


def test_comparison_charts_omit_undefined_ratio_panel():
    be = _fake_run("BE")
    hbe = _fake_run("HBE", scale=0.9)
    times = [r.t for r in be]
    defined = SimpleNamespace(times=times,
                              difference_ratio=[0.1] * len(times))
    undefined = SimpleNamespace(times=times,
                                difference_ratio=[math.nan] * len(times))
    with_panel = reporting.comparison_charts(be, hbe, defined)
    without = reporting.comparison_charts(be, hbe, undefined)
    assert "difference_ratio" in with_panel
    assert "difference_ratio" not in without
    assert set(without) == {"lesion_volume", "max_temperature", "energy"}


def test_sweep_charts_skip_failed_points():
    be = _fake_run("BE")
    hbe = _fake_run("HBE", scale=0.9)
    cmp_ = SimpleNamespace(times=[r.t for r in be],
                           difference_ratio=[0.2] * len(be))
    labeled = [("r=0.5", be, hbe, cmp_), ("r=1.0", None, None, None)]
    charts = reporting.sweep_charts(labeled)
    assert {"lesion_volume", "max_temperature", "difference_ratio"} <= set(charts)
    with pytest.raises(reporting.ReportingError):
        reporting.sweep_charts([("x", None, None, None)])
