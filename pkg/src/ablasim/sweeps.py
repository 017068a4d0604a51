"""The two experiment groups: cooling-intensity and voltage sweeps.

Group "convection" varies the film multiplier at fixed voltage; group
"voltage" varies the applied voltage at fixed multiplier.  Every point runs
both methods on the same mesh and reduces to one summary row.  Points are
independent, so a process pool may map them; a failed point is recorded with
its error message and the sweep continues.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .bioheat import SimulationConfig, run_full
from .mesh import build_mesh
from .postprocess import compare_series


class SweepError(ValueError):
    pass


GROUP_CONVECTION = "convection"
GROUP_VOLTAGE = "voltage"
GROUPS = (GROUP_CONVECTION, GROUP_VOLTAGE)

DEFAULT_RATIOS = (0.0, 0.1, 0.25, 0.5, 1.0, 1.5)
DEFAULT_VOLTAGES = (25.0, 30.0, 35.0, 40.0)


@dataclass(frozen=True)
class SweepSpec:
    """One experiment group and the values it visits."""

    group: str = GROUP_CONVECTION
    convection_ratios: tuple = DEFAULT_RATIOS
    voltages: tuple = DEFAULT_VOLTAGES
    fixed_voltage: float = 30.0
    fixed_ratio: float = 1.0
    methods: tuple = ("BE", "HBE")
    base: SimulationConfig = field(default_factory=SimulationConfig)

    def validate(self):
        if self.group not in GROUPS:
            raise SweepError(f"group must be one of {GROUPS}, got {self.group!r}")
        if not self.convection_ratios or not self.voltages:
            raise SweepError("sweep value lists must be non-empty")
        if any(r < 0 for r in self.convection_ratios):
            raise SweepError("convection ratios must be non-negative")
        if any(v < 0 for v in self.voltages):
            raise SweepError("voltages must be non-negative")
        if not self.methods or any(m not in ("BE", "HBE") for m in self.methods):
            raise SweepError("methods must be a non-empty subset of BE/HBE")
        self.base.validate()

    def points(self) -> tuple:
        """(voltage, ratio) pairs in sweep order."""
        self.validate()
        if self.group == GROUP_CONVECTION:
            return tuple((self.fixed_voltage, r) for r in self.convection_ratios)
        return tuple((v, self.fixed_ratio) for v in self.voltages)


@dataclass(frozen=True)
class PointResult:
    voltage: float
    ratio: float
    records: dict            # method -> list[TimeSeriesRecord]; {} on failure
    comparison: object       # ComparisonSeries | None
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def run_point(base: SimulationConfig, voltage: float, ratio: float,
              methods=("BE", "HBE"), mesh=None) -> PointResult:
    """Run one sweep point; never raises, failures land in .error."""
    try:
        records = {}
        for method in methods:
            cfg = replace(base, method=method, applied_voltage=voltage,
                          convection_ratio=ratio)
            records[method] = run_full(cfg, mesh=mesh).records
        comparison = None
        if "BE" in records and "HBE" in records:
            comparison = compare_series(records["BE"], records["HBE"])
        return PointResult(voltage, ratio, records, comparison)
    except Exception as exc:
        return PointResult(voltage, ratio, {}, None, error=f"{type(exc).__name__}: {exc}")


def _point_task(args):
    return run_point(*args)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    """All points of a sweep, in spec order regardless of completion order.

    jobs > 1 maps points over a process pool; the mesh is built once and
    shipped to the workers so every point sees the identical discretization.
    """
    spec.validate()
    if jobs < 1:
        raise SweepError("jobs must be >= 1")
    mesh = build_mesh(spec.base.geometry, target_edge_length=spec.base.target_edge_length)
    tasks = [(spec.base, v, r, spec.methods, mesh) for v, r in spec.points()]
    if jobs == 1 or len(tasks) == 1:
        return [_point_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        futures = [pool.submit(_point_task, t) for t in tasks]
        return [f.result() for f in futures]


def summary_rows(spec: SweepSpec, results) -> list:
    """Summary-CSV row dicts, one per point, blanks for failed points."""
    rows = []
    for res in results:
        row = {"group": spec.group, "voltage_V": res.voltage, "conv_ratio": res.ratio}
        if res.ok:
            cmp_ = res.comparison
            if cmp_ is not None:
                row["crossover_time_s"] = cmp_.crossover_time
                row["peak_diff_ratio"] = cmp_.peak_ratio
                row["t_peak_diff_s"] = cmp_.t_peak
            be = res.records.get("BE")
            hbe = res.records.get("HBE")
            if be:
                row["lesion_volume_be_120s_mm3"] = be[-1].lesion_volume * 1e9
                row["T_max_be_120s_C"] = be[-1].t_max
            if hbe:
                row["lesion_volume_hbe_120s_mm3"] = hbe[-1].lesion_volume * 1e9
                row["T_max_hbe_120s_C"] = hbe[-1].t_max
        rows.append(row)
    return rows
