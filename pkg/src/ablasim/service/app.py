"""FastAPI application exposing the simulator.

All orchestration lives here; command-line use goes through this app (in
process or over HTTP) so both front ends see identical behavior.  A run
that fails mid-transient still answers 200 with the partial records and the
failure stage, mirroring the partial-CSV contract of the CLI.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException, Query

from ..bioheat import SimulationError, run_full
from ..geometry import REGION_NAMES
from ..mesh import DEFAULT_TARGET_EDGE_LENGTH, build_mesh, mesh_quality, mesh_to_text
from ..sweeps import SweepSpec, run_sweep, summary_rows
from ..validation import all_passed, format_report, run_validation_suite
from .schemas import (
    CheckModel,
    ComparisonModel,
    GeometryModel,
    HealthResponse,
    MeshExportRequest,
    MeshExportResponse,
    MeshInfoModel,
    RecordModel,
    RunRequest,
    RunResponse,
    SummaryRowModel,
    SweepPointModel,
    SweepRequest,
    SweepResponse,
    ValidateResponse,
)


def _quality_info(mesh, target_edge_length: float) -> MeshInfoModel:
    q = mesh_quality(mesh)
    return MeshInfoModel(
        n_nodes=q.n_nodes,
        n_triangles=q.n_triangles,
        min_angle_deg=q.min_angle_deg,
        max_aspect=q.max_aspect,
        region_volumes={REGION_NAMES[k]: v for k, v in q.region_volumes.items()},
        total_volume=q.total_volume,
        target_edge_length=target_edge_length,
    )


def _mesh_info(geometry: GeometryModel, target_edge_length: float) -> MeshInfoModel:
    try:
        mesh = build_mesh(geometry.to_domain(), target_edge_length=target_edge_length)
    except (ValueError, RuntimeError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return _quality_info(mesh, target_edge_length)


def create_app() -> FastAPI:
    app = FastAPI(title="ablasim", description=__doc__)

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse()

    @app.post("/api/run", response_model=RunResponse)
    def api_run(req: RunRequest) -> RunResponse:
        try:
            cfg = req.to_config()
            cfg.validate()
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            result = run_full(cfg)
        except SimulationError as exc:
            return RunResponse(
                records=[RecordModel.from_record(r) for r in exc.records],
                error=str(exc),
                error_stage=exc.stage,
            )
        return RunResponse(
            records=[RecordModel.from_record(r) for r in result.records],
            power_by_region={REGION_NAMES[k]: float(v)
                             for k, v in result.joule.power_by_region.items()}
            if result.joule is not None else {},
            mesh=_quality_info(result.mesh, req.target_edge_length),
        )

    @app.post("/api/sweep", response_model=SweepResponse)
    def api_sweep(req: SweepRequest) -> SweepResponse:
        spec = SweepSpec(
            group=req.group,
            convection_ratios=tuple(req.convection_ratios),
            voltages=tuple(req.voltages),
            fixed_voltage=req.fixed_voltage,
            fixed_ratio=req.fixed_ratio,
            methods=tuple(req.methods),
            base=req.base.to_config(),
        )
        try:
            spec.validate()
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        results = run_sweep(spec, jobs=req.jobs)
        points = [
            SweepPointModel(
                voltage=p.voltage,
                ratio=p.ratio,
                records={m: [RecordModel.from_record(r) for r in recs]
                         for m, recs in p.records.items()},
                comparison=ComparisonModel.from_comparison(p.comparison)
                if p.comparison is not None else None,
                error=p.error,
            )
            for p in results
        ]
        summary = [SummaryRowModel(**row) for row in summary_rows(spec, results)]
        return SweepResponse(group=req.group, points=points, summary=summary)

    @app.post("/api/validate", response_model=ValidateResponse)
    def api_validate() -> ValidateResponse:
        checks = run_validation_suite()
        return ValidateResponse(
            checks=[CheckModel(**c.__dict__) for c in checks],
            passed=all_passed(checks),
            report=format_report(checks),
        )

    @app.get("/api/mesh/info", response_model=MeshInfoModel)
    def api_mesh_info(
        target_edge_length: float = Query(DEFAULT_TARGET_EDGE_LENGTH, gt=0),
    ) -> MeshInfoModel:
        return _mesh_info(GeometryModel(), target_edge_length)

    @app.post("/api/mesh/export", response_model=MeshExportResponse)
    def api_mesh_export(req: MeshExportRequest) -> MeshExportResponse:
        info = _mesh_info(req.geometry, req.target_edge_length)
        mesh = build_mesh(req.geometry.to_domain(), target_edge_length=req.target_edge_length)
        return MeshExportResponse(text=mesh_to_text(mesh), info=info)

    return app


app = create_app()
