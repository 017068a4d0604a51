"""CSV emission and dependency-free SVG line charts.

The two CSV schemas below are a compatibility contract: consumers parse by
header name and the column order never changes.  Floats are printed through
fixed format strings so identical runs produce byte-identical files, and all
files are written atomically (temp file + rename) so parallel sweep points
never interleave partial output.
"""
from __future__ import annotations

import math
import os
import re
import tempfile
from dataclasses import dataclass

from .postprocess import ComparisonSeries, TimeSeriesRecord


class ReportingError(ValueError):
    pass


RUN_CSV_COLUMNS = (
    "t_s", "method", "voltage_V", "conv_ratio",
    "lesion_area_mm2", "lesion_volume_mm3",
    "T_max_C", "r_max_mm", "z_max_mm",
    "T_probe_1p3_C", "T_probe_2p6_C", "T_probe_5p2_C",
    "E_stored_muscle_J", "E_stored_blood_J", "E_stored_electrode_J",
    "E_joule_muscle_J", "E_joule_blood_J",
)

SUMMARY_CSV_COLUMNS = (
    "group", "voltage_V", "conv_ratio",
    "crossover_time_s", "peak_diff_ratio", "t_peak_diff_s",
    "lesion_volume_be_120s_mm3", "lesion_volume_hbe_120s_mm3",
    "T_max_be_120s_C", "T_max_hbe_120s_C",
)

TRUNCATION_MARKER = "truncated"

_FMAX = 1.7976931348623157e308  # sys.float_info.max; chart-range clamp


def _num(x, fmt: str = "%.6f") -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return fmt % x


def run_row(rec: TimeSeriesRecord) -> list:
    """One Run CSV row (strings) for one record, in schema order."""
    return [
        _num(rec.t, "%.4f"),
        rec.method,
        _num(rec.applied_voltage, "%.6g"),
        _num(rec.convection_ratio, "%.6g"),
        _num(rec.lesion_area * 1e6),
        _num(rec.lesion_volume * 1e9),
        _num(rec.t_max),
        _num(rec.t_max_location[0] * 1e3),
        _num(rec.t_max_location[1] * 1e3),
        _num(rec.probe_temperatures[0]),
        _num(rec.probe_temperatures[1]),
        _num(rec.probe_temperatures[2]),
        _num(rec.stored_energy.get("Muscle", 0.0)),
        _num(rec.stored_energy.get("Blood", 0.0)),
        _num(rec.stored_energy.get("Electrode", 0.0)),
        _num(rec.joule_energy.get("Muscle", 0.0)),
        _num(rec.joule_energy.get("Blood", 0.0)),
    ]


def run_csv_text(records, truncation: str | None = None) -> str:
    """Full Run CSV.  truncation, when given, appends a marker row whose
    first cell is TRUNCATION_MARKER and whose second carries the reason;
    the rows before it are the valid partial output."""
    lines = [",".join(RUN_CSV_COLUMNS)]
    for rec in records:
        lines.append(",".join(run_row(rec)))
    if truncation is not None:
        reason = truncation.replace(",", ";").replace("\n", " ")
        marker = [TRUNCATION_MARKER, reason] + [""] * (len(RUN_CSV_COLUMNS) - 2)
        lines.append(",".join(marker))
    return "\n".join(lines) + "\n"


def summary_csv_text(rows) -> str:
    """Summary CSV from dicts keyed by SUMMARY_CSV_COLUMNS names.

    Missing or None metric values print as empty cells; a failed sweep point
    keeps its parameter cells and leaves the metrics blank.
    """
    lines = [",".join(SUMMARY_CSV_COLUMNS)]
    for row in rows:
        cells = []
        for col in SUMMARY_CSV_COLUMNS:
            v = row.get(col)
            if col == "group":
                cells.append(str(v))
            elif col in ("voltage_V", "conv_ratio"):
                cells.append(_num(v, "%.6g"))
            else:
                cells.append(_num(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_text_atomic(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# ---------------------------------------------------------------------------
# SVG line charts

_PALETTE = (
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee",
    "#aa3377", "#994455", "#225522", "#555555", "#7733bb",
    "#cc7711", "#2244cc",
)


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple
    y: tuple
    dash: bool = False  # dashed stroke, used to mark the hyperbolic method

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ReportingError("series x and y lengths differ")


def _nice_step(span: float, target: int) -> float:
    if span <= 0:
        return 1.0
    if not math.isfinite(span):
        return math.inf
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 5.0, 10.0):
        if raw <= m * mag:
            return m * mag
    return 10.0 * mag


def _ticks(lo: float, hi: float, target: int = 6) -> list:
    """Nice tick positions in [lo, hi]; empty when the range defies them.

    Stepping by index rather than accumulation keeps this loop finite even
    for ranges the float grid cannot resolve (huge offsets, sub-ulp spans).
    """
    step = _nice_step(hi - lo, target)
    if not math.isfinite(step) or step < 1e-13 * max(abs(lo), abs(hi)):
        return []
    first = math.ceil(lo / step - 1e-9) * step
    limit = hi + 1e-9 * max(1.0, abs(hi))
    out = []
    for i in range(2 * target + 4):
        v = first + i * step
        if not math.isfinite(v) or v > limit:
            break
        out.append(0.0 if abs(v) < 1e-12 * step else v)
    return out


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-3:
        return "%.1e" % v
    s = "%.4f" % v
    s = s.rstrip("0").rstrip(".")
    return s


def _slug(title: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-") or "chart"


def line_chart(series, title: str, xlabel: str, ylabel: str,
               width: int = 760, height: int = 460) -> str:
    """Render polyline series to a standalone SVG string.

    NaN gaps split a series into separate segments; axes autoscale over the
    finite values with a small pad.  Purely deterministic output.
    """
    series = list(series)
    if not series:
        raise ReportingError("no series to plot")
    xs, ys = [], []
    for s in series:
        for xv, yv in zip(s.x, s.y):
            if math.isfinite(xv) and math.isfinite(yv):
                xs.append(float(xv))
                ys.append(float(yv))
    if not xs:
        raise ReportingError("series contain no finite points")
    # mid/half form: differences of halved values stay finite over the whole
    # float range, so even absurd data cannot overflow the scaling below
    x_mid = 0.5 * min(xs) + 0.5 * max(xs)
    x_half = 0.5 * max(xs) - 0.5 * min(xs)
    if not x_half > 0.0:
        x_half = max(0.5, 1e-9 * abs(x_mid))
    y_mid = 0.5 * min(ys) + 0.5 * max(ys)
    y_half = 0.5 * max(ys) - 0.5 * min(ys)
    if y_half > 0.0:
        y_half = min(1.1 * y_half, _FMAX)   # 5% pad each side
    else:
        y_half = max(1.0, 0.1 * abs(y_mid))

    ml, mr, mt, mb = 64, 16, 34, 46
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + ((0.5 * v - 0.5 * x_mid) / x_half + 0.5) * pw

    def py(v):
        return mt + (0.5 - (0.5 * v - 0.5 * y_mid) / y_half) * ph

    clip_id = "clip-" + _slug(title)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<defs><clipPath id="{clip_id}"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath></defs>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for tv in _ticks(max(x_mid - x_half, -_FMAX), min(x_mid + x_half, _FMAX)):
        x = px(tv)
        out.append(f'<line x1="{x:.2f}" y1="{mt}" x2="{x:.2f}" y2="{mt + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{x:.2f}" y="{mt + ph + 16}" text-anchor="middle">{_fmt_tick(tv)}</text>')
    for tv in _ticks(max(y_mid - y_half, -_FMAX), min(y_mid + y_half, _FMAX)):
        y = py(tv)
        out.append(f'<line x1="{ml}" y1="{y:.2f}" x2="{ml + pw}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{ml - 6}" y="{y + 4:.2f}" text-anchor="end">{_fmt_tick(tv)}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333333"/>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylabel}</text>')

    out.append(f'<g clip-path="url(#{clip_id})">')
    for i, s in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        dash = ' stroke-dasharray="6 4"' if s.dash else ""
        seg = []
        for xv, yv in zip(s.x, s.y):
            if math.isfinite(xv) and math.isfinite(yv):
                seg.append(f"{px(float(xv)):.2f},{py(float(yv)):.2f}")
            elif seg:
                if len(seg) > 1:
                    out.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
                seg = []
        if len(seg) > 1:
            out.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
    out.append("</g>")

    ly = mt + 14
    for i, s in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        dash = ' stroke-dasharray="6 4"' if s.dash else ""
        out.append(f'<line x1="{ml + 8}" y1="{ly - 4}" x2="{ml + 34}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.6"{dash}/>')
        out.append(f'<text x="{ml + 40}" y="{ly}">{s.label}</text>')
        ly += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _col(records, attr):
    return tuple(getattr(r, attr) for r in records)


def _times(records):
    return tuple(r.t for r in records)


def run_charts(records) -> dict:
    """Figure set for a single run: lesion growth, peak temperature, probes,
    and the energy partition.  Keys are file stems."""
    records = list(records)
    if not records:
        raise ReportingError("no records to chart")
    t = _times(records)
    method = records[0].method
    vol = Series(f"{method} lesion volume", t, tuple(r.lesion_volume * 1e9 for r in records))
    area = Series(f"{method} lesion area", t, tuple(r.lesion_area * 1e6 for r in records), dash=True)
    charts = {
        "lesion_volume": line_chart([vol, area], "Lesion growth", "time [s]",
                                    "volume [mm3] / area [mm2]"),
        "max_temperature": line_chart(
            [Series(f"{method} T_max", t, _col(records, "t_max"))],
            "Peak tissue temperature", "time [s]", "temperature [C]"),
        "probes": line_chart(
            [Series(f"{d} mm", t, tuple(r.probe_temperatures[i] for r in records))
             for i, d in enumerate(("1.3", "2.6", "5.2"))],
            "Probe temperatures", "time [s]", "temperature [C]"),
        "energy": line_chart(
            [Series("joule blood", t, tuple(r.joule_energy.get("Blood", 0.0) for r in records)),
             Series("joule muscle", t, tuple(r.joule_energy.get("Muscle", 0.0) for r in records)),
             Series("stored muscle", t, tuple(r.stored_energy.get("Muscle", 0.0) for r in records)),
             Series("stored blood", t, tuple(r.stored_energy.get("Blood", 0.0) for r in records))],
            "Energy partition", "time [s]", "energy [J]"),
    }
    return charts


def _any_finite(series_list) -> bool:
    return any(math.isfinite(float(xv)) and math.isfinite(float(yv))
               for s in series_list for xv, yv in zip(s.x, s.y))


def comparison_charts(be_records, hbe_records, comparison: ComparisonSeries) -> dict:
    """Parabolic-vs-hyperbolic figure set for one operating point.

    The difference-ratio panel is omitted when the ratio is nowhere defined
    (runs shorter than its settling window)."""
    t = _times(be_records)
    diff = [Series("(BE - HBE)/BE", comparison.times, comparison.difference_ratio)]
    charts = {
        "lesion_volume": line_chart(
            [Series("BE", t, tuple(r.lesion_volume * 1e9 for r in be_records)),
             Series("HBE", t, tuple(r.lesion_volume * 1e9 for r in hbe_records), dash=True)],
            "Lesion volume, BE vs HBE", "time [s]", "volume [mm3]"),
        "max_temperature": line_chart(
            [Series("BE", t, _col(be_records, "t_max")),
             Series("HBE", t, _col(hbe_records, "t_max"), dash=True)],
            "Peak tissue temperature, BE vs HBE", "time [s]", "temperature [C]"),
        "energy": line_chart(
            [Series("joule blood", t, tuple(r.joule_energy.get("Blood", 0.0) for r in be_records)),
             Series("joule muscle", t, tuple(r.joule_energy.get("Muscle", 0.0) for r in be_records)),
             Series("stored muscle BE", t, tuple(r.stored_energy.get("Muscle", 0.0) for r in be_records)),
             Series("stored muscle HBE", t, tuple(r.stored_energy.get("Muscle", 0.0) for r in hbe_records), dash=True)],
            "Energy partition", "time [s]", "energy [J]"),
    }
    if _any_finite(diff):
        charts["difference_ratio"] = line_chart(
            diff, "Lesion volume difference ratio", "time [s]", "ratio")
    return charts


def sweep_charts(labeled_points) -> dict:
    """Overlay figure set across sweep points.

    labeled_points: iterable of (label, be_records, hbe_records, comparison);
    failed points (records None) are skipped.  The energy panel shows the
    first successful point in full detail; the overlays carry every point.
    """
    vol, tmax, ratio = [], [], []
    energy = None
    for label, be, hbe, cmp_ in labeled_points:
        if be is None or hbe is None:
            continue
        t = _times(be)
        vol.append(Series(f"BE {label}", t, tuple(r.lesion_volume * 1e9 for r in be)))
        vol.append(Series(f"HBE {label}", t, tuple(r.lesion_volume * 1e9 for r in hbe), dash=True))
        tmax.append(Series(f"BE {label}", t, _col(be, "t_max")))
        tmax.append(Series(f"HBE {label}", t, _col(hbe, "t_max"), dash=True))
        if cmp_ is not None:
            ratio.append(Series(label, cmp_.times, cmp_.difference_ratio))
        if energy is None:
            energy = comparison_charts(be, hbe, cmp_)["energy"] if cmp_ is not None else None
    if not vol:
        raise ReportingError("no successful sweep points to chart")
    charts = {
        "lesion_volume": line_chart(vol, "Lesion volume across points", "time [s]", "volume [mm3]"),
        "max_temperature": line_chart(tmax, "Peak tissue temperature across points", "time [s]", "temperature [C]"),
    }
    if _any_finite(ratio):
        charts["difference_ratio"] = line_chart(
            ratio, "Lesion volume difference ratio", "time [s]", "ratio")
    if energy is not None:
        charts["energy"] = energy
    return charts
