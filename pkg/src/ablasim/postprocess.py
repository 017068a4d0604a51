"""Lesion metrics, probes, energy accounting, and BE/HBE comparison.

Everything here is a pure function of (mesh, nodal field); the transient
stepper calls into this module to build its per-step records.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import REGION_NAMES, Region
from .mesh import Mesh


class PostprocessError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeriesRecord:
    """Per-step summary of a transient run.

    Energies are keyed by region name; stored energy is enthalpy relative to
    the initial temperature, joule energy is the cumulative source input.
    t_min/t_max_domain/balance_error are solver diagnostics and are not part
    of the CSV schema.
    """

    t: float
    method: str
    applied_voltage: float
    convection_ratio: float
    lesion_area: float
    lesion_volume: float
    t_max: float
    t_max_location: tuple
    probe_temperatures: tuple
    stored_energy: dict
    joule_energy: dict
    t_min: float = math.nan
    t_max_domain: float = math.nan
    balance_error: float = 0.0


def _rolled(p: np.ndarray, v: np.ndarray, k: np.ndarray):
    """Cyclically rotate each triangle's vertices so vertex k comes first."""
    rows = np.arange(len(k))[:, None]
    cols = (k[:, None] + np.arange(3)[None, :]) % 3
    return p[rows, cols], v[rows, cols]


def _tri_measures(p0, p1, p2):
    """(area, revolved volume) of triangles given as (m,2) vertex arrays."""
    area = 0.5 * np.abs(
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )
    rbar = (p0[:, 0] + p1[:, 0] + p2[:, 0]) / 3.0
    return area, 2.0 * math.pi * rbar * area


def lesion_metrics(mesh: Mesh, temperature, threshold: float) -> tuple:
    """Exact super-threshold measure of the P1 interpolant over Muscle.

    The linear level set clips each triangle into a polygon; its r-z area and
    revolved volume are accumulated exactly (both are polynomial in the
    crossing points).  Returns (area m^2, volume m^3).
    """
    T = np.asarray(temperature, dtype=float)
    sel = mesh.tri_region == int(Region.MUSCLE)
    tri = mesh.triangles[sel]
    if tri.size == 0:
        return 0.0, 0.0
    P = mesh.nodes[tri]
    V = T[tri]
    above = V >= threshold
    cnt = above.sum(axis=1)

    area_full, vol_full = _tri_measures(P[:, 0], P[:, 1], P[:, 2])
    area = np.zeros(len(tri))
    vol = np.zeros(len(tri))

    m3 = cnt == 3
    area[m3] = area_full[m3]
    vol[m3] = vol_full[m3]

    m1 = cnt == 1
    if m1.any():
        p, v = _rolled(P[m1], V[m1], np.argmax(above[m1], axis=1))
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        va, vb, vc = v[:, 0], v[:, 1], v[:, 2]
        tb = ((threshold - va) / (vb - va))[:, None]
        tc = ((threshold - va) / (vc - va))[:, None]
        sa, sv = _tri_measures(a, a + tb * (b - a), a + tc * (c - a))
        area[m1] = sa
        vol[m1] = sv

    m2 = cnt == 2
    if m2.any():
        p, v = _rolled(P[m2], V[m2], np.argmax(~above[m2], axis=1))
        c, a, b = p[:, 0], p[:, 1], p[:, 2]  # c is the sub-threshold vertex
        vc, va, vb = v[:, 0], v[:, 1], v[:, 2]
        ta = ((threshold - vc) / (va - vc))[:, None]
        tb = ((threshold - vc) / (vb - vc))[:, None]
        sa, sv = _tri_measures(c, c + ta * (a - c), c + tb * (b - c))
        area[m2] = area_full[m2] - sa
        vol[m2] = vol_full[m2] - sv

    return float(area.sum()), float(vol.sum())


def max_temperature(mesh: Mesh, temperature) -> tuple:
    """Nodal maximum over the whole mesh; ties resolve to the lowest index."""
    T = np.asarray(temperature, dtype=float)[: len(mesh.nodes)]
    i = int(np.argmax(T))
    return float(T[i]), (float(mesh.nodes[i, 0]), float(mesh.nodes[i, 1]))


def region_nodes(mesh: Mesh, region: Region) -> np.ndarray:
    """Sorted ids of nodes touched by elements of the given region."""
    sel = mesh.tri_region == int(region)
    return np.unique(mesh.triangles[sel])


def max_temperature_in_region(mesh: Mesh, temperature, region: Region) -> tuple:
    """Nodal maximum restricted to one region, lowest-node-index tie-break."""
    ids = region_nodes(mesh, region)
    if ids.size == 0:
        raise PostprocessError(f"region {REGION_NAMES[int(region)]} is empty")
    T = np.asarray(temperature, dtype=float)
    i = int(ids[np.argmax(T[ids])])
    return float(T[i]), (float(mesh.nodes[i, 0]), float(mesh.nodes[i, 1]))


@dataclass(frozen=True)
class PointProbe:
    """Precomputed P1 sampler at a fixed point: T -> sum(w * T[nodes])."""

    point: tuple
    triangle: int
    nodes: tuple
    weights: tuple

    def __call__(self, temperature) -> float:
        T = np.asarray(temperature, dtype=float)
        return float(
            self.weights[0] * T[self.nodes[0]]
            + self.weights[1] * T[self.nodes[1]]
            + self.weights[2] * T[self.nodes[2]]
        )


def locate(mesh: Mesh, point) -> PointProbe:
    """Find the containing triangle and barycentric weights of a point.

    Deterministic: the lowest-index triangle whose barycentric coordinates
    are all >= -1e-9 (scaled) wins.  Points outside every triangle are
    rejected.
    """
    r, z = float(point[0]), float(point[1])
    p = mesh.nodes[mesh.triangles]  # (m,3,2)
    r0, r1, r2 = p[:, 0, 0], p[:, 1, 0], p[:, 2, 0]
    z0, z1, z2 = p[:, 0, 1], p[:, 1, 1], p[:, 2, 1]
    det = (r1 - r0) * (z2 - z0) - (r2 - r0) * (z1 - z0)
    l1 = ((r - r0) * (z2 - z0) - (r2 - r0) * (z - z0)) / det
    l2 = ((r1 - r0) * (z - z0) - (r - r0) * (z1 - z0)) / det
    l0 = 1.0 - l1 - l2
    tol = 1e-9
    ok = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise PostprocessError(f"point ({r:g}, {z:g}) lies outside the mesh")
    t = int(hits[0])
    lam = np.clip([l0[t], l1[t], l2[t]], 0.0, 1.0)
    lam = lam / lam.sum()
    return PointProbe(
        point=(r, z),
        triangle=t,
        nodes=tuple(int(n) for n in mesh.triangles[t]),
        weights=tuple(float(w) for w in lam),
    )


def probe(mesh: Mesh, temperature, point) -> float:
    """P1 interpolation of a nodal field at one point."""
    return locate(mesh, point)(temperature)


def region_energy(mesh: Mesh, temperature, materials, t_ref: float = 37.0) -> dict:
    """Stored enthalpy per region, relative to t_ref: sum rho c (T-t_ref) vol.

    Nodal quadrature (lumped volumes), consistent with the conservation
    statements of the implicit stepping.
    """
    T = np.asarray(temperature, dtype=float)
    out = {}
    p = mesh.nodes[mesh.triangles]
    area = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    for region in Region:
        sel = mesh.tri_region == int(region)
        name = REGION_NAMES[int(region)]
        if not sel.any():
            out[name] = 0.0
            continue
        tri = mesh.triangles[sel]
        rr = mesh.nodes[tri][:, :, 0]
        # per-vertex lumped revolved volume: 2 pi A (2 r_i + r_j + r_k) / 12
        w = 2.0 * math.pi * area[sel, None] * (rr + rr.sum(axis=1, keepdims=True)) / 12.0
        props = materials.of(region)
        out[name] = float(props.rho * props.c * np.sum(w * (T[tri] - t_ref)))
    return out


@dataclass(frozen=True)
class ComparisonSeries:
    """Paired BE/HBE lesion-volume series and their difference diagnostics.

    difference_ratio is |V_BE - V_HBE| / V_BE where V_BE > 0 and NaN
    elsewhere; peak_ratio and t_peak consider only t >= ratio_t_min.
    """

    times: np.ndarray
    volume_be: np.ndarray
    volume_hbe: np.ndarray
    difference_ratio: np.ndarray
    crossover_time: float | None
    peak_ratio: float | None
    t_peak: float | None
    ratio_t_min: float = 30.0

    def __post_init__(self):
        for name in ("times", "volume_be", "volume_hbe", "difference_ratio"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


def crossover_time(times, series_a, series_b, t_min: float = 5.0):
    """First sign change of (a - b) after t_min, linearly interpolated.

    Returns None when the difference never changes sign.  Samples at or
    before t_min and samples where the difference is exactly zero do not by
    themselves constitute a crossing; a zero is a crossing only when the
    difference has opposite signs on the two sides.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(series_a, dtype=float) - np.asarray(series_b, dtype=float)
    prev_sign = 0.0
    prev_t = None
    prev_d = 0.0
    for i in range(len(t)):
        if t[i] <= t_min:
            continue
        s = math.copysign(1.0, d[i]) if d[i] != 0.0 else 0.0
        if s != 0.0 and prev_sign != 0.0 and s != prev_sign:
            # linear interpolation between the bracketing samples
            return float(prev_t + (t[i] - prev_t) * (-prev_d) / (d[i] - prev_d))
        if s != 0.0:
            prev_sign, prev_t, prev_d = s, t[i], d[i]
    return None


def compare_series(be_records, hbe_records, ratio_t_min: float = 30.0) -> ComparisonSeries:
    """Pair BE/HBE runs on matching time grids and compute the diagnostics."""
    tb = np.array([r.t for r in be_records])
    th = np.array([r.t for r in hbe_records])
    if len(tb) != len(th) or not np.allclose(tb, th, rtol=0.0, atol=1e-9):
        raise PostprocessError("BE and HBE records are on different time grids")
    vb = np.array([r.lesion_volume for r in be_records])
    vh = np.array([r.lesion_volume for r in hbe_records])
    ratio = np.full(len(tb), np.nan)
    pos = vb > 0.0
    ratio[pos] = np.abs(vb[pos] - vh[pos]) / vb[pos]
    window = pos & (tb >= ratio_t_min)
    if window.any():
        sub = np.flatnonzero(window)
        k = sub[int(np.argmax(ratio[sub]))]
        peak, t_peak = float(ratio[k]), float(tb[k])
    else:
        peak, t_peak = None, None
    return ComparisonSeries(
        times=tb,
        volume_be=vb,
        volume_hbe=vh,
        difference_ratio=ratio,
        crossover_time=crossover_time(tb, vb, vh, t_min=5.0),
        peak_ratio=peak,
        t_peak=t_peak,
        ratio_t_min=ratio_t_min,
    )
