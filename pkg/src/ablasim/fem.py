"""Axisymmetric P1 finite-element kernels.

All integrals carry the 2*pi*r revolution weight and are evaluated with exact
polynomial quadrature (the integrands are polynomials once the linear shape
functions are substituted, so no numerical quadrature rule is needed):

    stiffness   K_ij = sum_e  coeff * 2*pi*rbar * (b_i b_j + c_i c_j) / (4A)
    mass        M_ij = sum_e  coeff * 2*pi * A * sum_k r_k * I(i,j,k)
    robin film  R_ij = sum_edges h * 2*pi * (L/12) * [[3r1+r2, r1+r2],
                                                      [r1+r2, r1+3r2]]

with I(i,j,k) the exact triangle integral of phi_i phi_j phi_k / A
(1/10 all equal, 1/30 two equal, 1/60 all distinct).

The solver is a hand-rolled Jacobi-preconditioned conjugate gradient with an
explicit residual contract, plus a prefactorized direct variant for the many
repeated solves of a transient run.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import BoundaryTag
from .mesh import Mesh

_TWO_PI = 2.0 * math.pi

# exact integrals of phi_i*phi_j*phi_k over a triangle, divided by area
_PHI3 = np.empty((3, 3, 3))
for _i in range(3):
    for _j in range(3):
        for _k in range(3):
            n_eq = len({_i, _j, _k})
            _PHI3[_i, _j, _k] = {1: 1.0 / 10.0, 2: 1.0 / 30.0, 3: 1.0 / 60.0}[n_eq]


class FemError(RuntimeError):
    pass


class NotSpdError(FemError):
    """The matrix handed to the SPD solver is not positive definite."""


class ConvergenceError(FemError):
    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


def triangle_coefficients(nodes: np.ndarray, triangles: np.ndarray):
    """Shape-function gradient coefficients and areas.

    For phi_i = (a_i + b_i r + c_i z) / (2A):
        b_i = z_j - z_k,  c_i = r_k - r_j  (cyclic),
    returned as (area, b, c) with shapes (m,), (m, 3), (m, 3).
    """
    p = nodes[triangles]
    r = p[:, :, 0]
    z = p[:, :, 1]
    b = np.stack([z[:, 1] - z[:, 2], z[:, 2] - z[:, 0], z[:, 0] - z[:, 1]], axis=1)
    c = np.stack([r[:, 2] - r[:, 1], r[:, 0] - r[:, 2], r[:, 1] - r[:, 0]], axis=1)
    area = 0.5 * (r[:, 0] * b[:, 0] + r[:, 1] * b[:, 1] + r[:, 2] * b[:, 2])
    return area, b, c


def _coeff_per_element(mesh: Mesh, coeff) -> np.ndarray:
    """Accept a per-region map, a scalar, or a per-element array."""
    if isinstance(coeff, dict):
        out = np.empty(mesh.n_triangles)
        for reg, v in coeff.items():
            out[mesh.tri_region == int(reg)] = float(v)
        return out
    arr = np.asarray(coeff, dtype=float)
    if arr.ndim == 0:
        return np.full(mesh.n_triangles, float(arr))
    if arr.shape != (mesh.n_triangles,):
        raise FemError(f"coefficient array has shape {arr.shape}, want ({mesh.n_triangles},)")
    return arr


def _check_areas(area: np.ndarray):
    bad = np.flatnonzero(area <= 0.0)
    if len(bad):
        raise FemError(f"degenerate triangle (non-positive area) at element {bad[0]}")


def _scatter(triangles: np.ndarray, ke: np.ndarray, n: int) -> sp.csr_matrix:
    """Accumulate per-element 3x3 blocks into CSR.

    Element order is fixed by the mesh's canonical triangle ordering, and the
    COO->CSR duplicate summation is performed in that deterministic order.
    """
    m = triangles.shape[0]
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    a = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n))
    return a.tocsr()


def assemble_stiffness(mesh: Mesh, coeff, dofs=None, n_dofs=None) -> sp.csr_matrix:
    """Diffusion operator: sum_e coeff * grad(phi_i).grad(phi_j) * 2*pi*r dA.

    dofs/n_dofs optionally redirect the scatter targets (per-element index
    triples and total system size); geometry always comes from the mesh.
    """
    cf = _coeff_per_element(mesh, coeff)
    area, b, c = triangle_coefficients(mesh.nodes, mesh.triangles)
    _check_areas(area)
    rbar = mesh.nodes[mesh.triangles, 0].mean(axis=1)
    scale = cf * _TWO_PI * rbar / (4.0 * area)
    ke = scale[:, None, None] * (
        np.einsum("mi,mj->mij", b, b) + np.einsum("mi,mj->mij", c, c)
    )
    target = mesh.triangles if dofs is None else np.asarray(dofs)
    return _scatter(target, ke, mesh.n_nodes if n_dofs is None else int(n_dofs))


def assemble_mass(mesh: Mesh, coeff, lumped: bool = False, dofs=None, n_dofs=None) -> sp.csr_matrix:
    """Mass operator: sum_e coeff * phi_i phi_j * 2*pi*r dA (consistent or lumped)."""
    cf = _coeff_per_element(mesh, coeff)
    area, _, _ = triangle_coefficients(mesh.nodes, mesh.triangles)
    _check_areas(area)
    r = mesh.nodes[mesh.triangles, 0]
    ke = (_TWO_PI * cf * area)[:, None, None] * np.einsum("ijk,mk->mij", _PHI3, r)
    target = mesh.triangles if dofs is None else np.asarray(dofs)
    m = _scatter(target, ke, mesh.n_nodes if n_dofs is None else int(n_dofs))
    if lumped:
        diag = np.asarray(m.sum(axis=1)).ravel()
        return sp.diags(diag, shape=m.shape).tocsr()
    return m


def assemble_source_load(mesh: Mesh, q_elem, dofs=None, n_dofs=None) -> np.ndarray:
    """Load vector for a per-element-constant source: F_i = q * int phi_i 2*pi*r dA.

    The exact triangle integral is A * (2 r_i + r_j + r_k) / 12.
    """
    q = _coeff_per_element(mesh, q_elem)
    area, _, _ = triangle_coefficients(mesh.nodes, mesh.triangles)
    _check_areas(area)
    r = mesh.nodes[mesh.triangles, 0]
    rs = r.sum(axis=1)
    fe = (_TWO_PI * q * area / 12.0)[:, None] * (r + rs[:, None])
    target = mesh.triangles if dofs is None else np.asarray(dofs)
    out = np.zeros(mesh.n_nodes if n_dofs is None else int(n_dofs))
    np.add.at(out, np.asarray(target).ravel(), fe.ravel())
    return out


def edge_film_blocks(nodes: np.ndarray, edges: np.ndarray):
    """Per-edge film matrices and load bases (without the h factor).

    Returns (blocks, loads): blocks (e, 2, 2) = int phi_i phi_j 2*pi*r ds,
    loads (e, 2) = int phi_i 2*pi*r ds, both exact for straight edges.
    """
    p0 = nodes[edges[:, 0]]
    p1 = nodes[edges[:, 1]]
    L = np.hypot(p1[:, 0] - p0[:, 0], p1[:, 1] - p0[:, 1])
    r1 = p0[:, 0]
    r2 = p1[:, 0]
    blocks = np.empty((len(edges), 2, 2))
    blocks[:, 0, 0] = 3.0 * r1 + r2
    blocks[:, 0, 1] = r1 + r2
    blocks[:, 1, 0] = r1 + r2
    blocks[:, 1, 1] = r1 + 3.0 * r2
    blocks *= (_TWO_PI * L / 12.0)[:, None, None]
    loads = np.empty((len(edges), 2))
    loads[:, 0] = 2.0 * r1 + r2
    loads[:, 1] = r1 + 2.0 * r2
    loads *= (_TWO_PI * L / 6.0)[:, None]
    return blocks, loads


def assemble_robin(mesh: Mesh, edge_tag, h: float, t_ref: float):
    """Convective film on tagged edges: matrix int h phi_i phi_j 2*pi*r ds
    and load int h t_ref phi_i 2*pi*r ds.  h = 0 yields empty operators.
    """
    if h < 0.0:
        raise FemError("film coefficient must be non-negative")
    try:
        edge_tag = BoundaryTag(int(edge_tag))
    except ValueError as exc:
        raise FemError(f"unknown edge tag {edge_tag!r}") from exc
    edges = mesh.edges_with_tag(edge_tag)
    n = mesh.n_nodes
    load = np.zeros(n)
    if h == 0.0 or len(edges) == 0:
        return sp.csr_matrix((n, n)), load
    blocks, loads = edge_film_blocks(mesh.nodes, edges)
    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    mat = sp.coo_matrix((h * blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    np.add.at(load, edges.ravel(), h * t_ref * loads.ravel())
    return mat, load


# ---------------------------------------------------------------------------
# Dirichlet elimination


def dirichlet_mask(n: int, fixed_idx) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(fixed_idx, dtype=int)] = False
    return mask


def constrain_matrix(a: sp.spmatrix, fixed_idx) -> sp.csr_matrix:
    """Zero constrained rows and columns symmetrically, unit diagonal there."""
    n = a.shape[0]
    free = dirichlet_mask(n, fixed_idx).astype(float)
    d_free = sp.diags(free)
    return (d_free @ a @ d_free + sp.diags(1.0 - free)).tocsr()


def apply_dirichlet(a: sp.spmatrix, b: np.ndarray, fixed_idx, values):
    """Symmetric elimination with fold-in of prescribed values.

    Returns (A', b') such that solving A' x = b' yields x[fixed] = values and
    the original equations on the free set.  SPD is preserved when A is SPD
    on the free block.
    """
    n = a.shape[0]
    fixed_idx = np.asarray(fixed_idx, dtype=int)
    x_fix = np.zeros(n)
    x_fix[fixed_idx] = values
    free = dirichlet_mask(n, fixed_idx)
    b2 = np.where(free, b - a @ x_fix, x_fix)
    return constrain_matrix(a, fixed_idx), b2


# ---------------------------------------------------------------------------
# solvers


def solve_spd(a: sp.spmatrix, b: np.ndarray, x0=None, tol: float = 1e-10,
              maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Guarantees ||A x - b||_2 <= tol * ||b||_2 on return (the true residual is
    re-checked, not just the recurrence); raises NotSpdError if a direction of
    non-positive curvature is met, ConvergenceError if the iteration cap is hit.
    """
    if not (0.0 < tol < 1.0):
        raise FemError(f"tol must lie in (0, 1), got {tol}")
    n = b.shape[0]
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros(n)
    if maxiter is None:
        maxiter = max(200, 20 * n)
    diag = a.diagonal()
    if np.any(diag <= 0.0):
        raise NotSpdError("matrix has a non-positive diagonal entry")
    inv_d = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    for _restart in range(3):
        r = b - a @ x
        if np.linalg.norm(r) <= tol * norm_b:
            return x
        z = inv_d * r
        p = z.copy()
        rz = float(r @ z)
        for _ in range(maxiter):
            ap = a @ p
            pap = float(p @ ap)
            if pap <= 0.0:
                raise NotSpdError(f"non-positive curvature direction (p.Ap = {pap:g})")
            alpha = rz / pap
            x += alpha * p
            r -= alpha * ap
            if np.linalg.norm(r) <= tol * norm_b:
                break
            z = inv_d * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        # loop ended: verify the true residual before accepting
        achieved = float(np.linalg.norm(b - a @ x)) / norm_b
        if achieved <= tol:
            return x
    raise ConvergenceError(
        f"CG did not reach tol {tol:g} (achieved {achieved:g})", achieved=achieved
    )


class FrozenSpdSolver:
    """Prefactorized solver for repeated right-hand sides of one SPD matrix.

    A transient run solves the same operator ~1e3 times; an LU factorization
    amortizes that.  Every solve still verifies the same residual contract as
    solve_spd and falls back to CG polishing if the factorization drifted.
    """

    def __init__(self, a: sp.spmatrix, tol: float = 1e-10):
        self._a = a.tocsc()
        self._tol = tol
        self._lu = splu(self._a, permc_spec="MMD_AT_PLUS_A")

    def solve(self, b: np.ndarray) -> np.ndarray:
        norm_b = float(np.linalg.norm(b))
        if norm_b == 0.0:
            return np.zeros_like(b)
        x = self._lu.solve(b)
        if float(np.linalg.norm(b - self._a @ x)) <= self._tol * norm_b:
            return x
        return solve_spd(self._a, b, x0=x, tol=self._tol)
