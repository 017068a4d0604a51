"""Shared fixtures.

The expensive pieces -- the default mesh, the full-horizon reference runs,
and the two sweeps -- are built once per session; every consumer treats them
as read-only.
"""
import time
from dataclasses import replace

import pytest

from ablasim.bioheat import SimulationConfig, run_full
from ablasim.mesh import build_mesh
from ablasim.postprocess import compare_series
from ablasim.sweeps import SweepSpec, run_sweep


@pytest.fixture(scope="session")
def default_mesh():
    return build_mesh()


@pytest.fixture(scope="session")
def coarse_mesh():
    """Fast mesh for tests that only need a working discretization."""
    return build_mesh(target_edge_length=5e-4)


@pytest.fixture(scope="session")
def reference_point(default_mesh):
    """Timed full-horizon runs at the reference operating point (30 V, ratio 1).

    Returns a dict with RunResults under "BE"/"HBE", wall-clock seconds under
    "BE_seconds"/"HBE_seconds", and the paired diagnostics under "comparison".
    """
    out = {}
    for method in ("BE", "HBE"):
        t0 = time.perf_counter()
        out[method] = run_full(SimulationConfig(method=method), mesh=default_mesh)
        out[f"{method}_seconds"] = time.perf_counter() - t0
    out["comparison"] = compare_series(out["BE"].records, out["HBE"].records)
    return out


@pytest.fixture(scope="session")
def ratio_sweep():
    spec = SweepSpec(group="convection")
    return spec, run_sweep(spec)


@pytest.fixture(scope="session")
def voltage_sweep():
    spec = SweepSpec(group="voltage")
    return spec, run_sweep(spec)


@pytest.fixture(scope="session")
def halved_dt_runs(default_mesh):
    """Reference-point runs at dt = 0.05 s for the step-refinement bound."""
    return {
        method: run_full(SimulationConfig(method=method, dt=0.05), mesh=default_mesh)
        for method in ("BE", "HBE")
    }
