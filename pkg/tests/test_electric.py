import numpy as np
import pytest

from ablasim.electric import (
    ElectricError,
    electrode_boundary_power,
    electrode_node_ids,
    joule_heat,
    solve_potential,
)
from ablasim.geometry import BoundaryTag, Region
from ablasim.materials import MaterialTable


@pytest.fixture(scope="module")
def field(coarse_mesh):
    return solve_potential(coarse_mesh, MaterialTable(), 30.0)


def test_dirichlet_values_exact(coarse_mesh, field):
    hot = electrode_node_ids(coarse_mesh)
    ground = coarse_mesh.nodes_with_tag(BoundaryTag.OUTER_GROUND_AND_THERMAL)
    assert np.all(field.v[hot] == 30.0)
    assert np.all(field.v[ground] == 0.0)


def test_potential_within_bounds(coarse_mesh, field):
    # discrete maximum principle on this mesh family: V in [0, V0]
    assert field.v.min() >= -1e-9
    assert field.v.max() <= 30.0 + 1e-9


def test_power_by_region_sums_to_total(coarse_mesh, field):
    src = joule_heat(coarse_mesh, field, MaterialTable())
    assert sum(src.power_by_region.values()) == pytest.approx(src.total_power, rel=1e-12)
    assert src.power_by_region[Region.ELECTRODE] == 0.0
    assert src.total_power > 0.0
    assert np.all(src.q_elem >= 0.0)


def test_voltage_scaling_is_quadratic(coarse_mesh):
    mat = MaterialTable()
    f1 = solve_potential(coarse_mesh, mat, 15.0)
    f2 = solve_potential(coarse_mesh, mat, 30.0)
    # linear PDE: doubling the voltage doubles the field, quadruples the power
    assert np.allclose(f2.v, 2.0 * f1.v, rtol=0, atol=1e-8)
    p1 = joule_heat(coarse_mesh, f1, mat).total_power
    p2 = joule_heat(coarse_mesh, f2, mat).total_power
    assert p2 == pytest.approx(4.0 * p1, rel=1e-9)


def test_zero_voltage_short_circuit(coarse_mesh):
    f = solve_potential(coarse_mesh, MaterialTable(), 0.0)
    assert np.all(f.v == 0.0)
    src = joule_heat(coarse_mesh, f, MaterialTable())
    assert src.total_power == 0.0


def test_negative_voltage_rejected(coarse_mesh):
    with pytest.raises(ElectricError):
        solve_potential(coarse_mesh, MaterialTable(), -5.0)


def test_boundary_power_matches_volume_power(default_mesh):
    # the independently integrated electrode-surface power and the summed
    # element dissipation are two discretizations of the same number
    mat = MaterialTable()
    f = solve_potential(default_mesh, mat, 30.0)
    vol = joule_heat(default_mesh, f, mat).total_power
    surf = electrode_boundary_power(default_mesh, f, mat)
    assert surf == pytest.approx(vol, rel=5e-3)


def test_field_mesh_mismatch_rejected(coarse_mesh, default_mesh):
    f = solve_potential(coarse_mesh, MaterialTable(), 10.0)
    with pytest.raises(ElectricError):
        joule_heat(default_mesh, f, MaterialTable())
