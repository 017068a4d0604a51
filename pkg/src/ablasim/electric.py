"""Quasi-static electric potential and the resulting Joule heat source.

The potential solves div(sigma grad V) = 0 on muscle and blood with
V = applied_voltage on the electrode and V = 0 on the grounded outer
boundary; the axis carries the natural zero-flux condition.  The metal
electrode is treated as an equipotential body: its elements are excluded
from the conduction problem and every electrode node carries the Dirichlet
value (including interior nodes, which keeps the constrained system
non-singular without polluting conditioning with sigma = 4e6 elements).

With a constant applied voltage the field, and therefore the Joule source
Q = sigma * |grad V|^2, is time-invariant: solve once, reuse for the whole
transient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import assemble_stiffness, solve_spd, apply_dirichlet, triangle_coefficients
from .geometry import BoundaryTag, ModelGeometry, Region
from .materials import MaterialTable
from .mesh import Mesh

_TWO_PI = 2.0 * math.pi


class ElectricError(RuntimeError):
    pass


@dataclass(frozen=True)
class PotentialField:
    v: np.ndarray
    applied_voltage: float

    def __post_init__(self):
        self.v.flags.writeable = False


@dataclass(frozen=True)
class JouleSource:
    """Piecewise-constant volumetric power density per element."""

    q_elem: np.ndarray  # W/m^3, zero on electrode elements
    total_power: float  # W
    power_by_region: dict

    def __post_init__(self):
        self.q_elem.flags.writeable = False


def electrode_node_ids(mesh: Mesh) -> np.ndarray:
    """All nodes of electrode elements plus tagged electrode-surface nodes."""
    on_elems = np.unique(mesh.triangles[mesh.tri_region == int(Region.ELECTRODE)])
    on_surf = np.union1d(
        mesh.nodes_with_tag(BoundaryTag.ELECTRODE_SURFACE),
        mesh.nodes_with_tag(BoundaryTag.ELECTRODE_BLOOD_INTERFACE),
    )
    return np.union1d(on_elems, on_surf)


def solve_potential(
    mesh: Mesh,
    materials: MaterialTable,
    applied_voltage: float,
    tol: float = 1e-10,
) -> PotentialField:
    """Solve the conduction problem for one applied electrode voltage.

    Args:
        mesh: full model mesh.
        materials: provides sigma per region (electrode sigma is unused).
        applied_voltage: electrode potential in volts, >= 0.
        tol: relative residual passed to the SPD solver.

    Returns:
        PotentialField with one value per mesh node (electrode nodes carry
        the applied voltage exactly).
    """
    if applied_voltage < 0.0:
        raise ElectricError("applied_voltage must be non-negative")
    n = mesh.n_nodes
    if applied_voltage == 0.0:
        return PotentialField(v=np.zeros(n), applied_voltage=0.0)

    sigma = {
        Region.ELECTRODE: 0.0,  # excluded from the conduction domain
        Region.MUSCLE: materials.muscle.sigma,
        Region.BLOOD: materials.blood.sigma,
    }
    k = assemble_stiffness(mesh, sigma)

    hot = electrode_node_ids(mesh)
    ground = mesh.nodes_with_tag(BoundaryTag.OUTER_GROUND_AND_THERMAL)
    if np.intersect1d(hot, ground).size:
        raise ElectricError("electrode touches the grounded outer boundary")
    fixed = np.concatenate([hot, ground])
    values = np.concatenate([
        np.full(len(hot), float(applied_voltage)),
        np.zeros(len(ground)),
    ])
    a, b = apply_dirichlet(k, np.zeros(n), fixed, values)
    v = solve_spd(a, b, tol=tol)
    v[fixed] = values  # solver rounding must not leak into pinned dofs
    return PotentialField(v=v, applied_voltage=float(applied_voltage))


def joule_heat(mesh: Mesh, field: PotentialField, materials: MaterialTable) -> JouleSource:
    """Element-constant resistive source sigma * |grad V|^2 outside the electrode."""
    if field.v.shape[0] != mesh.n_nodes:
        raise ElectricError("potential field does not match the mesh")
    area, b, c = triangle_coefficients(mesh.nodes, mesh.triangles)
    vv = field.v[mesh.triangles]
    gr = (b * vv).sum(axis=1) / (2.0 * area)
    gz = (c * vv).sum(axis=1) / (2.0 * area)
    grad2 = gr * gr + gz * gz
    sigma_e = np.zeros(mesh.n_triangles)
    for reg in (Region.MUSCLE, Region.BLOOD):
        sigma_e[mesh.tri_region == int(reg)] = materials.of(reg).sigma
    q = sigma_e * grad2
    vols = mesh.triangle_volumes()
    power_by_region = {
        reg: float((q * vols)[mesh.tri_region == int(reg)].sum()) for reg in Region
    }
    return JouleSource(
        q_elem=q,
        total_power=float((q * vols).sum()),
        power_by_region=power_by_region,
    )


# degree-4 triangle quadrature (6 points, barycentric, weights sum to 1)
_QP_L = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])
_QP_W = np.array([
    0.223381589678011, 0.223381589678011, 0.223381589678011,
    0.109951743655322, 0.109951743655322, 0.109951743655322,
])


def electrode_boundary_power(
    mesh: Mesh,
    field: PotentialField,
    materials: MaterialTable,
    geom: ModelGeometry | None = None,
    band: tuple[float, float] | None = None,
) -> float:
    """Electrode-surface power int sigma dV/dn V ds, evaluated independently.

    Because div(sigma grad V) vanishes in the tissue, the surface integral
    equals V0 * int sigma grad V . grad w dOmega for any smooth w that is 1
    on the electrode and 0 at the grounded boundary.  Using an analytic
    cutoff w(distance to electrode) supported in the smooth midfield gives an
    estimate that never touches the assembled operator (the volume Joule sum
    is the variational quantity), so the comparison is a real discretization
    check, and the corner singularities at the electrode do not pollute it.
    """
    if geom is None:
        geom = ModelGeometry()
    if band is None:
        a = geom.electrode_radius
        band = (a, 5.0 * a)
    d0, d1 = band
    if not (0.0 < d0 < d1):
        raise ElectricError("band must satisfy 0 < inner < outer")

    area, b, c = triangle_coefficients(mesh.nodes, mesh.triangles)
    vv = field.v[mesh.triangles]
    gr = (b * vv).sum(axis=1) / (2.0 * area)
    gz = (c * vv).sum(axis=1) / (2.0 * area)
    sigma_e = np.zeros(mesh.n_triangles)
    for reg in (Region.MUSCLE, Region.BLOOD):
        sigma_e[mesh.tri_region == int(reg)] = materials.of(reg).sigma

    p = mesh.nodes[mesh.triangles]  # (m, 3, 2)
    # quadrature points for every element: (m, q, 2)
    qp = np.einsum("ql,mlx->mqx", _QP_L, p)
    d = geom.electrode_surface_distance(qp[..., 0], qp[..., 1])

    # smoothstep cutoff w(d): 1 below d0, 0 above d1; dw/dd = -6 s(1-s)/(d1-d0)
    s = np.clip((d1 - d) / (d1 - d0), 0.0, 1.0)
    dwdd = -6.0 * s * (1.0 - s) / (d1 - d0)

    # gradient of the distance field (piecewise analytic, outside the electrode)
    r = qp[..., 0]
    z = qp[..., 1]
    zc = geom.cap_center_z
    zt = geom.electrode_top_z
    ae = geom.electrode_radius
    rho = np.hypot(r, z - zc)
    rho = np.where(rho == 0.0, 1.0, rho)
    gd_r = np.where(
        z <= zc,
        r / rho,
        np.where(z <= zt, 1.0, np.where(r <= ae, 0.0, (r - ae) / np.where(d == 0, 1.0, d))),
    )
    gd_z = np.where(
        z <= zc,
        (z - zc) / rho,
        np.where(z <= zt, 0.0, np.where(r <= ae, 1.0, (z - zt) / np.where(d == 0, 1.0, d))),
    )

    # V0 * sum_e sigma_e grad V_e . int grad w 2 pi r dA  (per-element gradV const)
    wgt = _QP_W[None, :] * area[:, None] * _TWO_PI * r * dwdd
    contrib = sigma_e * (gr * (wgt * gd_r).sum(axis=1) + gz * (wgt * gd_z).sum(axis=1))
    return float(field.applied_voltage * contrib.sum())
