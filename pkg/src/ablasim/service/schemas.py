"""Pydantic request/response models for the HTTP API.

Requests mirror the solver configuration types field by field, everything
optional with the reference defaults, unknown keys rejected.  Response
records deliberately use the same attribute names as the in-process record
type so the CSV writer accepts either.
"""
from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .. import __version__
from ..bioheat import BoundaryConditions, SimulationConfig
from ..geometry import ModelGeometry
from ..materials import MaterialTable, RegionProperties
from ..mesh import DEFAULT_TARGET_EDGE_LENGTH
from ..sweeps import DEFAULT_RATIOS, DEFAULT_VOLTAGES


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryModel(_Strict):
    electrode_length: float = Field(5.0e-3, gt=0)
    electrode_radius: float = Field(1.3e-3, gt=0)
    insertion_depth: float = Field(1.3e-3, gt=0)
    tissue_thickness: float = Field(8.0e-3, gt=0)
    tissue_radius: float = Field(20.0e-3, gt=0)
    blood_depth: float = Field(32.0e-3, gt=0)
    model_depth: float = Field(40.0e-3, gt=0)

    def to_domain(self) -> ModelGeometry:
        return ModelGeometry(**self.model_dump())


class RegionPropertiesModel(_Strict):
    rho: float = Field(gt=0)
    c: float = Field(gt=0)
    k: float = Field(gt=0)
    sigma: float = Field(gt=0)


class MaterialsModel(_Strict):
    electrode: RegionPropertiesModel = RegionPropertiesModel(rho=21500.0, c=132.0, k=71.0, sigma=4.0e6)
    muscle: RegionPropertiesModel = RegionPropertiesModel(rho=1200.0, c=3200.0, k=0.550, sigma=0.222)
    blood: RegionPropertiesModel = RegionPropertiesModel(rho=1000.0, c=4180.0, k=0.543, sigma=0.667)
    tau_muscle: float = Field(16.0, ge=0)

    def to_domain(self) -> MaterialTable:
        return MaterialTable(
            electrode=RegionProperties(**self.electrode.model_dump()),
            muscle=RegionProperties(**self.muscle.model_dump()),
            blood=RegionProperties(**self.blood.model_dump()),
            tau_muscle=self.tau_muscle,
        )


class BoundaryModel(_Strict):
    h_e: float = Field(2000.0, ge=0)
    h_c: float = Field(40000.0, ge=0)
    T_blood: float = 37.0
    T_outer: float = 37.0
    T_initial: float = 37.0

    def to_domain(self, convection_ratio: float) -> BoundaryConditions:
        return BoundaryConditions(convection_ratio=convection_ratio, **self.model_dump())


class RunRequest(_Strict):
    """One transient run.  Field names and defaults match the solver config."""

    method: Literal["BE", "HBE"] = "BE"
    applied_voltage: float = Field(30.0, ge=0)
    convection_ratio: float = Field(1.0, ge=0)
    dt: float = Field(0.1, gt=0)
    t_end: float = Field(120.0, gt=0)
    target_edge_length: float = Field(DEFAULT_TARGET_EDGE_LENGTH, gt=0)
    solver_tol: float = Field(1e-10, gt=0)
    lumped_mass: bool = False
    probe_depths: tuple[float, float, float] = (1.3e-3, 2.6e-3, 5.2e-3)
    lesion_threshold: float = Field(50.0, gt=0)
    interface_mode: Literal["robin_fixed", "contact"] = "robin_fixed"
    source_impulse: bool = False
    output_stride: int = Field(1, ge=1)
    geometry: GeometryModel = GeometryModel()
    materials: MaterialsModel = MaterialsModel()
    boundary: BoundaryModel = BoundaryModel()

    def to_config(self) -> SimulationConfig:
        return SimulationConfig(
            method=self.method,
            applied_voltage=self.applied_voltage,
            convection_ratio=self.convection_ratio,
            dt=self.dt,
            t_end=self.t_end,
            target_edge_length=self.target_edge_length,
            solver_tol=self.solver_tol,
            lumped_mass=self.lumped_mass,
            probe_depths=tuple(self.probe_depths),
            lesion_threshold=self.lesion_threshold,
            interface_mode=self.interface_mode,
            source_impulse=self.source_impulse,
            output_stride=self.output_stride,
            geometry=self.geometry.to_domain(),
            materials=self.materials.to_domain(),
            boundary=self.boundary.to_domain(self.convection_ratio),
        )


def _clean(x) -> Optional[float]:
    """NaN is not valid JSON; encode it as null."""
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


class RecordModel(_Strict):
    """One time-step summary; attribute-compatible with the solver record."""

    t: float
    method: str
    applied_voltage: float
    convection_ratio: float
    lesion_area: float
    lesion_volume: float
    t_max: float
    t_max_location: tuple[float, float]
    probe_temperatures: tuple[float, float, float]
    stored_energy: dict[str, float]
    joule_energy: dict[str, float]
    t_min: float
    t_max_domain: float
    balance_error: float

    @classmethod
    def from_record(cls, rec) -> "RecordModel":
        return cls(
            t=float(rec.t),
            method=rec.method,
            applied_voltage=float(rec.applied_voltage),
            convection_ratio=float(rec.convection_ratio),
            lesion_area=float(rec.lesion_area),
            lesion_volume=float(rec.lesion_volume),
            t_max=float(rec.t_max),
            t_max_location=(float(rec.t_max_location[0]), float(rec.t_max_location[1])),
            probe_temperatures=tuple(float(v) for v in rec.probe_temperatures),
            stored_energy={k: float(v) for k, v in rec.stored_energy.items()},
            joule_energy={k: float(v) for k, v in rec.joule_energy.items()},
            t_min=float(rec.t_min),
            t_max_domain=float(rec.t_max_domain),
            balance_error=float(rec.balance_error),
        )


class MeshInfoModel(_Strict):
    n_nodes: int
    n_triangles: int
    min_angle_deg: float
    max_aspect: float
    region_volumes: dict[str, float]
    total_volume: float
    target_edge_length: float


class RunResponse(_Strict):
    records: list[RecordModel]
    power_by_region: dict[str, float] = {}
    mesh: Optional[MeshInfoModel] = None
    error: str = ""        # non-empty: solver failed, records are partial
    error_stage: str = ""


class ComparisonModel(_Strict):
    times: list[float]
    volume_be: list[float]
    volume_hbe: list[float]
    difference_ratio: list[Optional[float]]   # null where BE volume is zero
    crossover_time: Optional[float] = None
    peak_ratio: Optional[float] = None
    t_peak: Optional[float] = None

    @classmethod
    def from_comparison(cls, cmp_) -> "ComparisonModel":
        return cls(
            times=[float(v) for v in cmp_.times],
            volume_be=[float(v) for v in cmp_.volume_be],
            volume_hbe=[float(v) for v in cmp_.volume_hbe],
            difference_ratio=[_clean(v) for v in cmp_.difference_ratio],
            crossover_time=_clean(cmp_.crossover_time),
            peak_ratio=_clean(cmp_.peak_ratio),
            t_peak=_clean(cmp_.t_peak),
        )


class SweepRequest(_Strict):
    group: Literal["convection", "voltage"] = "convection"
    convection_ratios: tuple[float, ...] = DEFAULT_RATIOS
    voltages: tuple[float, ...] = DEFAULT_VOLTAGES
    fixed_voltage: float = Field(30.0, ge=0)
    fixed_ratio: float = Field(1.0, ge=0)
    methods: tuple[Literal["BE", "HBE"], ...] = ("BE", "HBE")
    jobs: int = Field(1, ge=1)
    base: RunRequest = RunRequest()


class SweepPointModel(_Strict):
    voltage: float
    ratio: float
    records: dict[str, list[RecordModel]] = {}
    comparison: Optional[ComparisonModel] = None
    error: str = ""


class SummaryRowModel(_Strict):
    group: str
    voltage_V: float
    conv_ratio: float
    crossover_time_s: Optional[float] = None
    peak_diff_ratio: Optional[float] = None
    t_peak_diff_s: Optional[float] = None
    lesion_volume_be_120s_mm3: Optional[float] = None
    lesion_volume_hbe_120s_mm3: Optional[float] = None
    T_max_be_120s_C: Optional[float] = None
    T_max_hbe_120s_C: Optional[float] = None


class SweepResponse(_Strict):
    group: str
    points: list[SweepPointModel]
    summary: list[SummaryRowModel]


class CheckModel(_Strict):
    name: str
    measured: float
    bound: float
    comparator: str
    passed: bool
    detail: str = ""


class ValidateResponse(_Strict):
    checks: list[CheckModel]
    passed: bool
    report: str


class MeshExportRequest(_Strict):
    target_edge_length: float = Field(DEFAULT_TARGET_EDGE_LENGTH, gt=0)
    geometry: GeometryModel = GeometryModel()


class MeshExportResponse(_Strict):
    text: str
    info: MeshInfoModel


class HealthResponse(_Strict):
    status: Literal["ok"] = "ok"
    version: str = __version__
