import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ablasim import fem
from ablasim.geometry import Region
from ablasim.materials import MaterialTable
from ablasim.mesh import Mesh
from ablasim.oracles import build_strip_mesh


def _strip(nr=3, nz=12):
    return build_strip_mesh(1e-3, 3e-3, 0.0, 4e-3, nr, nz)


def test_stiffness_annihilates_constant_field(coarse_mesh):
    k_map = MaterialTable().coefficient_map("k")
    K = fem.assemble_stiffness(coarse_mesh, k_map)
    ones = np.ones(coarse_mesh.n_nodes)
    scale = max(abs(K).max(), 1.0)
    assert np.max(np.abs(K @ ones)) <= 1e-13 * scale


def test_laplace_reproduces_linear_axial_field():
    # T = a + b z is in the P1 space and solves the axisymmetric Laplace
    # problem with insulated radial sides, so the only error left is the
    # linear solver's stopping tolerance (any discretization error would
    # show up at the 1e-2 scale on this 3x12 strip)
    mesh = _strip()
    K = fem.assemble_stiffness(mesh, 0.55)
    z = mesh.nodes[:, 1]
    lo = np.flatnonzero(np.isclose(z, 0.0))
    hi = np.flatnonzero(np.isclose(z, 4e-3))
    exact = 5.0 + 2500.0 * z
    fixed = np.concatenate([lo, hi])
    a, b = fem.apply_dirichlet(K, np.zeros(mesh.n_nodes), fixed, exact[fixed])
    x = fem.solve_spd(a, b)
    assert np.max(np.abs(x - exact)) < 1e-6


def test_mass_total_is_density_weighted_volume(coarse_mesh):
    mat = MaterialTable()
    M = fem.assemble_mass(coarse_mesh, mat.coefficient_map("rho_c"))
    vols = coarse_mesh.region_volumes()
    expected = sum(mat.of(reg).rho_c * vols[reg] for reg in Region)
    ones = np.ones(coarse_mesh.n_nodes)
    assert ones @ (M @ ones) == pytest.approx(expected, rel=1e-12)


def test_lumped_mass_is_diagonal_with_same_total(coarse_mesh):
    M = fem.assemble_mass(coarse_mesh, 1.0)
    L = fem.assemble_mass(coarse_mesh, 1.0, lumped=True)
    assert L.nnz == np.count_nonzero(L.diagonal())
    assert L.diagonal().sum() == pytest.approx(M.sum(), rel=1e-12)
    assert np.all(L.diagonal() > 0)


def test_source_load_total_is_power(coarse_mesh):
    q = 3.7e5
    load = fem.assemble_source_load(coarse_mesh, q)
    total_volume = sum(coarse_mesh.region_volumes().values())
    assert load.sum() == pytest.approx(q * total_volume, rel=1e-12)


def test_source_load_accepts_per_element_array(coarse_mesh):
    q = np.zeros(coarse_mesh.n_triangles)
    q[coarse_mesh.tri_region == int(Region.MUSCLE)] = 2.0e5
    load = fem.assemble_source_load(coarse_mesh, q)
    muscle_volume = coarse_mesh.region_volumes()[Region.MUSCLE]
    assert load.sum() == pytest.approx(2.0e5 * muscle_volume, rel=1e-12)


@given(r1=st.floats(0.0, 0.05), r2=st.floats(1e-6, 0.05),
       z1=st.floats(-0.02, 0.02), z2=st.floats(-0.02, 0.02))
def test_film_block_row_sums_equal_load_weights(r1, r2, z1, z2):
    # row i of the film block integrates phi_i * (phi_1 + phi_2) = phi_i,
    # which is the load weight; holds for any edge with positive length
    nodes = np.array([[r1, z1], [r2, z2]])
    if math.hypot(r2 - r1, z2 - z1) < 1e-9:
        return
    blocks, loads = fem.edge_film_blocks(nodes, np.array([[0, 1]]))
    assert np.allclose(blocks.sum(axis=2), loads, rtol=1e-12, atol=1e-18)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_assembly_is_element_order_independent(seed):
    mesh = _strip()
    K = fem.assemble_stiffness(mesh, 0.55)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(mesh.n_triangles)
    shuffled = replace(mesh, triangles=mesh.triangles[perm].copy(),
                       tri_region=mesh.tri_region[perm].copy())
    K2 = fem.assemble_stiffness(shuffled, 0.55)
    diff = abs(K - K2)
    gap = diff.max() if diff.nnz else 0.0
    assert gap <= 1e-13 * abs(K).max()


def test_apply_dirichlet_pins_values_and_keeps_free_equations():
    mesh = _strip()
    A = fem.assemble_stiffness(mesh, 1.0) + fem.assemble_mass(mesh, 1.0)
    rng = np.random.default_rng(7)
    b = rng.standard_normal(mesh.n_nodes)
    fixed = np.array([0, 5, mesh.n_nodes - 1])
    values = np.array([1.5, -2.0, 0.25])
    a2, b2 = fem.apply_dirichlet(A, b, fixed, values)
    # the constrained system pins exactly: unit rows, values moved to the rhs
    assert np.array_equal(b2[fixed], values)
    rows = a2[fixed].toarray()
    expect = np.zeros_like(rows)
    expect[np.arange(len(fixed)), fixed] = 1.0
    assert np.array_equal(rows, expect)
    x = fem.solve_spd(a2, b2)
    assert x[fixed] == pytest.approx(values, abs=1e-8)
    free = fem.dirichlet_mask(mesh.n_nodes, fixed)
    resid = (A @ x - b)[free]
    assert np.max(np.abs(resid)) < 1e-8 * max(1.0, np.abs(b).max())


def test_constrain_matrix_unit_diagonal_on_fixed_rows():
    A = sp.random(20, 20, density=0.3, random_state=3)
    A = (A + A.T).tocsr()
    out = fem.constrain_matrix(A, [2, 11])
    dense = out.toarray()
    for i in (2, 11):
        row = np.zeros(20)
        row[i] = 1.0
        assert np.array_equal(dense[i], row)
        assert np.array_equal(dense[:, i], row)


def test_frozen_solver_matches_one_shot():
    mesh = _strip()
    A = fem.assemble_stiffness(mesh, 1.0) + fem.assemble_mass(mesh, 5.0)
    rng = np.random.default_rng(11)
    solver = fem.FrozenSpdSolver(A)
    for _ in range(3):
        b = rng.standard_normal(mesh.n_nodes)
        x = solver.solve(b)
        assert np.allclose(A @ x, b, rtol=0, atol=1e-9 * np.abs(b).max())
        # the stiffness part makes |x| huge, so compare the solvers relatively
        assert np.allclose(x, fem.solve_spd(A, b), rtol=1e-8, atol=0)


def test_degenerate_triangle_rejected():
    nodes = np.array([[0.0, 0.0], [1e-3, 0.0], [2e-3, 0.0], [1e-3, 1e-3]])
    tris = np.array([[0, 1, 2], [0, 1, 3]], dtype=np.int32)  # first is collinear
    mesh = Mesh(nodes=nodes, triangles=tris,
                tri_region=np.array([1, 1], dtype=np.int8),
                edges=np.zeros((0, 2), dtype=np.int32),
                edge_tag=np.zeros(0, dtype=np.int8))
    with pytest.raises(fem.FemError):
        fem.assemble_stiffness(mesh, 1.0)


def test_negative_film_coefficient_rejected(coarse_mesh):
    from ablasim.geometry import BoundaryTag

    with pytest.raises(fem.FemError):
        fem.assemble_robin(coarse_mesh, BoundaryTag.ELECTRODE_SURFACE, -1.0, 37.0)
