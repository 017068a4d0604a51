import numpy as np
import pytest

from ablasim.geometry import BoundaryTag, ModelGeometry, Region
from ablasim.mesh import (
    build_mesh,
    load_mesh_text,
    mesh_quality,
    mesh_to_text,
    MeshingError,
    refine,
    save_mesh_text,
)


def test_default_mesh_structure(default_mesh):
    default_mesh.validate()  # raises on any structural violation
    q = mesh_quality(default_mesh)
    assert q.min_angle_deg > 20.0
    assert q.max_aspect < 3.0
    assert q.n_nodes == default_mesh.n_nodes


def test_axis_nodes_sit_exactly_on_axis(default_mesh):
    axis = default_mesh.nodes_with_tag(BoundaryTag.AXIS)
    assert axis.size > 0
    assert np.all(default_mesh.nodes[axis, 0] == 0.0)


def test_every_region_and_tag_present(default_mesh):
    assert set(np.unique(default_mesh.tri_region)) == {r.value for r in Region}
    assert set(np.unique(default_mesh.edge_tag)) == {t.value for t in BoundaryTag}


def test_region_volumes_approach_exact(default_mesh):
    g = ModelGeometry()
    exact = g.region_volumes_exact()
    vols = default_mesh.region_volumes()
    # hull and planar interfaces are polygon-exact; only the cap arc is approximated
    total = sum(vols.values())
    assert total == pytest.approx(sum(exact.values()), rel=1e-9)
    for region in Region:
        assert vols[region] == pytest.approx(exact[region], rel=5e-3)


def test_refinement_quadruples_triangles_and_converges(default_mesh):
    g = ModelGeometry()
    exact = g.region_volumes_exact()[Region.ELECTRODE]
    fine = refine(default_mesh)
    fine.validate()
    assert len(fine.triangles) == 4 * len(default_mesh.triangles)
    err_coarse = abs(default_mesh.region_volumes()[Region.ELECTRODE] - exact)
    err_fine = abs(fine.region_volumes()[Region.ELECTRODE] - exact)
    assert err_fine < err_coarse


def test_build_is_deterministic():
    a = build_mesh(target_edge_length=8e-4)
    b = build_mesh(target_edge_length=8e-4)
    assert mesh_to_text(a) == mesh_to_text(b)


def test_text_round_trip(tmp_path, coarse_mesh):
    path = tmp_path / "mesh.txt"
    save_mesh_text(coarse_mesh, path)
    back = load_mesh_text(path)
    assert np.array_equal(back.nodes, coarse_mesh.nodes)
    assert np.array_equal(back.triangles, coarse_mesh.triangles)
    assert np.array_equal(back.tri_region, coarse_mesh.tri_region)
    assert np.array_equal(back.edges, coarse_mesh.edges)
    assert np.array_equal(back.edge_tag, coarse_mesh.edge_tag)
    back.validate()


def test_load_rejects_malformed_text(tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("3 1\n")  # header must carry three counts
    with pytest.raises((MeshingError, ValueError)):
        load_mesh_text(path)


def test_bad_target_edge_length_rejected():
    with pytest.raises(MeshingError):
        build_mesh(target_edge_length=0.0)


def test_coarse_limit_rejected():
    # coarser than the smallest feature cannot resolve the electrode
    with pytest.raises(MeshingError):
        build_mesh(target_edge_length=0.5)
