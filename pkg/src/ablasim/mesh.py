"""Graded unstructured triangulation of the axisymmetric ablation domain.

The mesher is deliberately self-contained and deterministic:

1. every boundary/interface curve is discretized with node spacing that follows
   a sizing field h(p) growing linearly with distance from the electrode,
2. interior candidates come from a fixed hexagonal lattice at the finest
   spacing and are thinned greedily (fine-first) to Poisson-disk spacing h(p),
3. scipy's Delaunay triangulates the point set (the cross-section rectangle is
   convex, so the hull is exactly the outer boundary),
4. a few quality-guarded Laplacian smoothing passes relax interior nodes, and
5. triangles are classified into regions by flood fill across non-interface
   edges, then everything is put into canonical order.

Identical inputs produce byte-identical meshes: there is no randomness, all
candidate orderings are explicit lexicographic sorts, and Qhull is
deterministic for a fixed point sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .geometry import (
    REGION_BY_NAME,
    REGION_NAMES,
    TAG_BY_NAME,
    TAG_NAMES,
    BoundaryTag,
    Curve,
    ModelGeometry,
    Region,
    model_curves,
)

DEFAULT_TARGET_EDGE_LENGTH = 2.45e-4

# sizing-field shape: h(p) = clip(hmin + GRADING * dist_to_electrode, hmin, hmax)
_H_MIN_FACTOR = 0.50
_H_MAX_FACTOR = 2.60
_GRADING = 0.30
_CURVE_CLEARANCE = 0.68  # interior candidates keep this * h away from curves
_THINNING = 0.82  # Poisson-disk radius as a fraction of local h
_SMOOTH_PASSES = 4
_SMOOTH_CLEARANCE = 0.60  # smoothed nodes may not come closer to curves than this * h

_KEY_SCALE = 1e9  # node dedup resolution: 1 nm, far below any feature size


class MeshingError(RuntimeError):
    """Raised when a conforming mesh cannot be produced for the inputs."""


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh of the (r, z) cross-section.

    nodes       (n, 2) float64, columns r and z in meters
    triangles   (m, 3) int32, CCW in the (r, z) plane
    tri_region  (m,) int8, values from Region
    edges       (k, 2) int32, tagged boundary/interface edges, n1 < n2
    edge_tag    (k,) int8, values from BoundaryTag
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_region: np.ndarray
    edges: np.ndarray
    edge_tag: np.ndarray

    def __post_init__(self):
        for arr in (self.nodes, self.triangles, self.tri_region, self.edges, self.edge_tag):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    def centroid_radii(self) -> np.ndarray:
        return self.nodes[self.triangles, 0].mean(axis=1)

    def triangle_volumes(self) -> np.ndarray:
        """Revolved volume of each triangle, 2*pi*rbar*area (exact for linear r)."""
        return 2.0 * math.pi * self.centroid_radii() * self.signed_areas()

    def region_volumes(self) -> dict[Region, float]:
        vols = self.triangle_volumes()
        return {
            reg: float(vols[self.tri_region == int(reg)].sum()) for reg in Region
        }

    def nodes_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        sel = self.edges[self.edge_tag == int(tag)]
        return np.unique(sel)

    def edges_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        return self.edges[self.edge_tag == int(tag)]

    def validate(self):
        """Check structural invariants; raise MeshingError on violation.

        These are the invariants any Mesh value must satisfy, including small
        synthetic meshes used in tests.  Completeness of the full model (all
        regions and tags present, hull fully tagged) is checked separately by
        build_mesh.
        """
        n = self.n_nodes
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=-1) >= n:
            raise MeshingError("triangle node index out of range")
        if np.any(self.signed_areas() <= 0.0):
            raise MeshingError("triangle with non-positive area (orientation broken)")
        if np.any(self.nodes[:, 0] < 0.0):
            raise MeshingError("node at negative radius")
        for reg in np.unique(self.tri_region):
            Region(int(reg))  # raises on unknown codes
        axis_nodes = self.nodes_with_tag(BoundaryTag.AXIS)
        if len(axis_nodes) and np.any(self.nodes[axis_nodes, 0] != 0.0):
            raise MeshingError("Axis-tagged node with r != 0")

        count, regions_of = _edge_incidence(self.triangles, self.tri_region)
        for (a, b), tag in zip(self.edges, self.edge_tag):
            key = _edge_key(int(a), int(b))
            c = count.get(key, 0)
            tag = BoundaryTag(int(tag))
            if tag in (BoundaryTag.AXIS, BoundaryTag.OUTER_GROUND_AND_THERMAL):
                if c != 1:
                    raise MeshingError(f"outer edge {key} has {c} incident triangles")
            else:
                if c != 2:
                    raise MeshingError(f"interface edge {key} has {c} incident triangles")
                got = {Region(r) for r in regions_of[key]}
                allowed = {
                    BoundaryTag.ELECTRODE_SURFACE: (
                        {Region.ELECTRODE, Region.MUSCLE},
                        {Region.ELECTRODE, Region.BLOOD},
                    ),
                    BoundaryTag.ELECTRODE_BLOOD_INTERFACE: (
                        {Region.ELECTRODE, Region.BLOOD},
                    ),
                    BoundaryTag.MUSCLE_BLOOD_INTERFACE: (
                        {Region.MUSCLE, Region.BLOOD},
                    ),
                }[tag]
                if got not in allowed:
                    raise MeshingError(
                        f"interface edge {key} separates {got}, expected one of {allowed}"
                    )

    def check_complete_model(self):
        """Full-model postconditions: every region and tag present, hull tagged."""
        present_regions = set(np.unique(self.tri_region).tolist())
        if not {int(r) for r in Region} <= present_regions:
            raise MeshingError("a material region is empty")
        present_tags = set(np.unique(self.edge_tag).tolist())
        if not {int(t) for t in BoundaryTag} <= present_tags:
            raise MeshingError("a boundary tag is missing")
        count, _ = _edge_incidence(self.triangles, self.tri_region)
        hull_keys = {k for k, c in count.items() if c == 1}
        outer = set()
        for (a, b), tag in zip(self.edges, self.edge_tag):
            if int(tag) in (int(BoundaryTag.AXIS), int(BoundaryTag.OUTER_GROUND_AND_THERMAL)):
                outer.add(_edge_key(int(a), int(b)))
        if hull_keys != outer:
            raise MeshingError("hull edges and Axis/Outer tagged edges disagree")


@dataclass(frozen=True)
class QualityReport:
    n_nodes: int
    n_triangles: int
    min_angle_deg: float
    max_aspect: float
    region_volumes: dict
    total_volume: float


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _edge_incidence(triangles, tri_region):
    count: dict[tuple[int, int], int] = {}
    regions_of: dict[tuple[int, int], list[int]] = {}
    for tri, reg in zip(triangles.tolist(), tri_region.tolist()):
        for i in range(3):
            k = _edge_key(tri[i], tri[(i + 1) % 3])
            count[k] = count.get(k, 0) + 1
            regions_of.setdefault(k, []).append(reg)
    return count, regions_of


def mesh_quality(mesh: Mesh) -> QualityReport:
    p = mesh.nodes[mesh.triangles]
    # side vectors opposite each vertex
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    l0 = np.hypot(e0[:, 0], e0[:, 1])
    l1 = np.hypot(e1[:, 0], e1[:, 1])
    l2 = np.hypot(e2[:, 0], e2[:, 1])
    lengths = np.stack([l0, l1, l2], axis=1)

    def angle(u, v):
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        dot = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]
        return np.arctan2(np.abs(cross), dot)

    ang = np.stack([angle(-e1, e2), angle(-e2, e0), angle(-e0, e1)], axis=1)
    vols = mesh.region_volumes()
    return QualityReport(
        n_nodes=mesh.n_nodes,
        n_triangles=mesh.n_triangles,
        min_angle_deg=float(np.degrees(ang.min())),
        max_aspect=float((lengths.max(axis=1) / lengths.min(axis=1)).max()),
        region_volumes=vols,
        total_volume=float(sum(vols.values())),
    )


# ---------------------------------------------------------------------------
# construction


def build_mesh(
    geom: ModelGeometry | None = None,
    target_edge_length: float = DEFAULT_TARGET_EDGE_LENGTH,
) -> Mesh:
    """Build a graded conforming triangulation of the model cross-section.

    Args:
        geom: model dimensions; defaults describe the standard assembly.
        target_edge_length: nominal edge length in meters; the sizing field
            ranges over roughly [0.5, 2.6] times this value, finest at the
            electrode surface.

    Returns:
        A validated Mesh in canonical node/triangle/edge order.

    Raises:
        GeometryError: infeasible dimensions (from ModelGeometry.validate).
        MeshingError: resolution incompatible with the geometry, or the point
            set failed to reproduce some boundary curve as triangle edges.
    """
    if geom is None:
        geom = ModelGeometry()
    geom.validate()
    tel = float(target_edge_length)
    features = {
        "electrode_radius": geom.electrode_radius,
        "insertion_depth": geom.insertion_depth,
        "tissue_thickness": geom.tissue_thickness,
        "tissue_radius": geom.tissue_radius,
        "blood_depth": geom.blood_depth,
        "electrode_length": geom.electrode_length,
    }
    if not (tel > 0.0) or not math.isfinite(tel):
        raise MeshingError(f"target_edge_length must be positive, got {tel!r}")
    for name, size in features.items():
        if tel >= size:
            raise MeshingError(
                f"target_edge_length {tel} must be smaller than {name} {size}"
            )

    h_min = _H_MIN_FACTOR * tel
    h_max = _H_MAX_FACTOR * tel

    def h_at(pts: np.ndarray) -> np.ndarray:
        d = geom.electrode_surface_distance(pts[:, 0], pts[:, 1])
        return np.clip(h_min + _GRADING * np.asarray(d), h_min, h_max)

    curves = model_curves(geom)
    points, chains, chain_tags, dense = _discretize_curves(curves, h_at, h_min)
    n_fixed = len(points)

    cand = _interior_candidates(geom, h_min)
    curve_tree = cKDTree(dense)
    h_cand = h_at(cand)
    d_curve, _ = curve_tree.query(cand, workers=1)
    keep = d_curve >= _CURVE_CLEARANCE * h_cand
    cand = cand[keep]
    h_cand = h_cand[keep]

    accepted = _thin_candidates(np.asarray(points), cand, h_cand, h_max)
    pts = np.vstack([np.asarray(points), accepted]) if len(accepted) else np.asarray(points)

    pts = _smooth(pts, n_fixed, h_at, curve_tree)

    tri = Delaunay(pts)
    simplices = tri.simplices.astype(np.int32)
    _check_conformity(simplices, chains)

    tri_region = _assign_regions(geom, pts, simplices, chains)
    simplices = _orient_ccw(pts, simplices)
    simplices, tri_region = _canonical_triangles(simplices, tri_region)
    edges, edge_tag = _collect_edges(chains, chain_tags)

    mesh = Mesh(
        nodes=pts,
        triangles=simplices,
        tri_region=tri_region,
        edges=edges,
        edge_tag=edge_tag,
    )
    mesh.validate()
    mesh.check_complete_model()
    return mesh


class _NodeRegistry:
    """Deduplicates curve nodes; junctions shared between curves collapse."""

    def __init__(self):
        self.points: list[tuple[float, float]] = []
        self._index: dict[tuple[int, int], int] = {}

    def add(self, r: float, z: float) -> int:
        key = (int(round(r * _KEY_SCALE)), int(round(z * _KEY_SCALE)))
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.points)
            self._index[key] = idx
            self.points.append((r, z))
        return idx


def _discretize_curves(curves: list[Curve], h_at, h_min: float):
    """Place nodes along every curve at the graded spacing.

    Node positions divide each curve into segments of equal weight under the
    measure ds / h(s), so local spacing tracks the sizing field.  Returns the
    deduplicated node list, per-curve index chains, per-curve tags and a dense
    sample cloud used for clearance queries.
    """
    reg = _NodeRegistry()
    chains: list[list[int]] = []
    tags: list[BoundaryTag] = []
    dense_parts = []
    for curve in curves:
        n_fine = max(16, int(math.ceil(curve.length / (h_min / 6.0))))
        t_fine = np.linspace(0.0, 1.0, n_fine + 1)
        p_fine = curve.point(t_fine)
        dense_parts.append(p_fine)
        seg = np.hypot(np.diff(p_fine[:, 0]), np.diff(p_fine[:, 1]))
        mid = 0.5 * (p_fine[:-1] + p_fine[1:])
        w = seg / h_at(mid)
        cum = np.concatenate([[0.0], np.cumsum(w)])
        total = cum[-1]
        n_div = max(1, int(round(total)))
        interior_t = np.interp(
            total * np.arange(1, n_div) / n_div, cum, t_fine
        )
        t_nodes = np.concatenate([[0.0], interior_t, [1.0]])
        p_nodes = curve.point(t_nodes)
        chain = [reg.add(float(r), float(z)) for r, z in p_nodes]
        chains.append(chain)
        tags.append(curve.tag)
    return reg.points, chains, tags, np.vstack(dense_parts)


def _interior_candidates(geom: ModelGeometry, h_min: float) -> np.ndarray:
    """Hexagonal lattice of candidate points covering the open rectangle."""
    R = geom.tissue_radius
    H = geom.model_depth
    dy = h_min * math.sqrt(3.0) / 2.0
    rows = []
    j = 1
    while j * dy < H - 0.25 * h_min:
        y = j * dy
        x0 = 0.5 * h_min if j % 2 else h_min
        xs = np.arange(x0, R - 0.25 * h_min, h_min)
        if len(xs):
            rows.append(np.stack([xs, np.full(len(xs), y)], axis=1))
        j += 1
    if not rows:
        raise MeshingError("resolution too coarse: no interior candidates")
    return np.vstack(rows)


def _thin_candidates(fixed: np.ndarray, cand: np.ndarray, h_cand: np.ndarray, h_max: float):
    """Greedy Poisson-disk thinning, finest candidates first.

    Fixed (curve) nodes participate as blockers so interior points never
    crowd the boundary discretization.
    """
    order = np.lexsort((cand[:, 0], cand[:, 1], h_cand))
    cell = _THINNING * h_max
    grid: dict[tuple[int, int], list[int]] = {}
    coords: list[tuple[float, float]] = []

    def cell_of(x, y):
        return (int(math.floor(x / cell)), int(math.floor(y / cell)))

    def insert(x, y):
        coords.append((x, y))
        grid.setdefault(cell_of(x, y), []).append(len(coords) - 1)

    for x, y in fixed.tolist():
        insert(x, y)

    accepted = []
    for i in order.tolist():
        x, y = float(cand[i, 0]), float(cand[i, 1])
        rad = _THINNING * float(h_cand[i])
        cx, cy = cell_of(x, y)
        ok = True
        for gx in range(cx - 1, cx + 2):
            for gy in range(cy - 1, cy + 2):
                for k in grid.get((gx, gy), ()):
                    px, py = coords[k]
                    if (px - x) ** 2 + (py - y) ** 2 < rad * rad:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            insert(x, y)
            accepted.append((x, y))
    return np.asarray(accepted, dtype=float).reshape(-1, 2)


def _smooth(pts: np.ndarray, n_fixed: int, h_at, curve_tree: cKDTree) -> np.ndarray:
    """Laplacian smoothing of interior nodes with a clearance guard."""
    pts = pts.copy()
    n = len(pts)
    free = np.arange(n) >= n_fixed
    for _ in range(_SMOOTH_PASSES):
        tri = Delaunay(pts)
        s = tri.simplices
        pairs = np.vstack([s[:, [0, 1]], s[:, [1, 2]], s[:, [2, 0]]])
        acc = np.zeros_like(pts)
        cnt = np.zeros(n)
        for a, b in ((pairs[:, 0], pairs[:, 1]), (pairs[:, 1], pairs[:, 0])):
            np.add.at(acc, a, pts[b])
            np.add.at(cnt, a, 1.0)
        target = acc / np.maximum(cnt, 1.0)[:, None]
        prop = pts.copy()
        prop[free] = 0.5 * pts[free] + 0.5 * target[free]
        d, _ = curve_tree.query(prop[free], workers=1)
        ok = d >= _SMOOTH_CLEARANCE * h_at(prop[free])
        idx = np.flatnonzero(free)[ok]
        pts[idx] = prop[idx]
    return pts


def _check_conformity(simplices: np.ndarray, chains: list[list[int]]):
    present = set()
    for a, b, c in simplices.tolist():
        present.add(_edge_key(a, b))
        present.add(_edge_key(b, c))
        present.add(_edge_key(c, a))
    missing = 0
    for chain in chains:
        for a, b in zip(chain[:-1], chain[1:]):
            if _edge_key(a, b) not in present:
                missing += 1
    if missing:
        raise MeshingError(
            f"{missing} boundary-curve edges are not present in the triangulation; "
            "reduce target_edge_length or adjust the geometry"
        )


def _assign_regions(geom, pts, simplices, chains) -> np.ndarray:
    """Flood fill across untagged edges, then classify each component.

    The representative point of a component (area-weighted centroid mean) is
    far from the interfaces, so the analytic classifier is reliable even
    though curved boundaries are approximated by chords.
    """
    walls = set()
    for chain in chains:
        for a, b in zip(chain[:-1], chain[1:]):
            walls.add(_edge_key(a, b))

    m = len(simplices)
    edge_to_tris: dict[tuple[int, int], list[int]] = {}
    for t, (a, b, c) in enumerate(simplices.tolist()):
        for k in (_edge_key(a, b), _edge_key(b, c), _edge_key(c, a)):
            edge_to_tris.setdefault(k, []).append(t)

    comp = np.full(m, -1, dtype=np.int64)
    n_comp = 0
    for seed in range(m):
        if comp[seed] >= 0:
            continue
        stack = [seed]
        comp[seed] = n_comp
        while stack:
            t = stack.pop()
            a, b, c = simplices[t]
            for k in (_edge_key(a, b), _edge_key(b, c), _edge_key(c, a)):
                if k in walls:
                    continue
                for u in edge_to_tris[k]:
                    if comp[u] < 0:
                        comp[u] = n_comp
                        stack.append(u)
        n_comp += 1

    p = pts[simplices]
    areas = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    centroids = p.mean(axis=1)
    tri_region = np.empty(m, dtype=np.int8)
    for ci in range(n_comp):
        sel = comp == ci
        w = areas[sel]
        rep = (centroids[sel] * w[:, None]).sum(axis=0) / w.sum()
        tri_region[sel] = int(geom.classify_point(float(rep[0]), float(rep[1])))
    return tri_region


def _orient_ccw(pts, simplices):
    p = pts[simplices]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]
    ) * (p[:, 1, 1] - p[:, 0, 1])
    flip = signed < 0.0
    out = simplices.copy()
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def _canonical_triangles(simplices, tri_region):
    # roll each row so the smallest index leads (cyclic, keeps orientation)
    shift = np.argmin(simplices, axis=1)
    rows = np.arange(len(simplices))[:, None]
    cols = (shift[:, None] + np.arange(3)[None, :]) % 3
    rolled = simplices[rows, cols]
    order = np.lexsort((rolled[:, 2], rolled[:, 1], rolled[:, 0]))
    return rolled[order], tri_region[order]


def _collect_edges(chains, chain_tags):
    pairs = []
    tags = []
    for chain, tag in zip(chains, chain_tags):
        for a, b in zip(chain[:-1], chain[1:]):
            lo, hi = _edge_key(a, b)
            pairs.append((lo, hi))
            tags.append(int(tag))
    pairs = np.asarray(pairs, dtype=np.int32)
    tags = np.asarray(tags, dtype=np.int8)
    order = np.lexsort((pairs[:, 1], pairs[:, 0], tags))
    return pairs[order], tags[order]


# ---------------------------------------------------------------------------
# refinement


def refine(mesh: Mesh) -> Mesh:
    """Uniform 4-way midpoint refinement.

    Region and boundary tags are inherited.  Midpoints of edges whose both
    endpoints lie on the electrode tip cap are reprojected onto the cap
    circle, so the discrete cap converges to the true surface.  The cap
    circle is recovered from the tagged electrode-surface nodes themselves
    (apex and equator fix a circle centered on the axis), keeping the
    operation self-contained.
    """
    nodes = mesh.nodes
    n = mesh.n_nodes
    mid_index: dict[tuple[int, int], int] = {}
    mid_keys: list[tuple[int, int]] = []

    def midpoint(a: int, b: int) -> int:
        k = _edge_key(a, b)
        idx = mid_index.get(k)
        if idx is None:
            idx = n + len(mid_keys)
            mid_index[k] = idx
            mid_keys.append(k)
        return idx

    new_tris = []
    new_regs = []
    for (a, b, c), reg in zip(mesh.triangles.tolist(), mesh.tri_region.tolist()):
        mab = midpoint(a, b)
        mbc = midpoint(b, c)
        mca = midpoint(c, a)
        new_tris.extend([(a, mab, mca), (b, mbc, mab), (c, mca, mbc), (mab, mbc, mca)])
        new_regs.extend([reg, reg, reg, reg])

    # deterministic midpoint block: sorted by parent edge key
    order = sorted(range(len(mid_keys)), key=lambda i: mid_keys[i])
    rank = {}
    for newpos, i in enumerate(order):
        rank[mid_keys[i]] = n + newpos
    remap = {}
    for k, old in mid_index.items():
        remap[old] = rank[k]

    mid_coords = np.empty((len(mid_keys), 2))
    for k in mid_keys:
        a, b = k
        mid_coords[rank[k] - n] = 0.5 * (nodes[a] + nodes[b])

    new_edges = []
    new_tags = []
    for (a, b), tag in zip(mesh.edges.tolist(), mesh.edge_tag.tolist()):
        mid = rank[_edge_key(a, b)] if _edge_key(a, b) in rank else None
        if mid is None:
            raise MeshingError("tagged edge missing from refinement midpoints")
        new_edges.append(_edge_key(a, mid))
        new_edges.append(_edge_key(mid, b))
        new_tags.extend([tag, tag])

    all_nodes = np.vstack([nodes, mid_coords])
    _reproject_cap_midpoints(mesh, rank, all_nodes)

    # apply the canonical midpoint numbering
    tris = np.asarray(new_tris, dtype=np.int64)
    flat = tris.ravel()
    hit = flat >= n
    flat[hit] = np.asarray([remap[int(v)] for v in flat[hit]], dtype=np.int64)
    tris = flat.reshape(-1, 3).astype(np.int32)
    regs = np.asarray(new_regs, dtype=np.int8)

    tris = _orient_ccw(all_nodes, tris)
    tris, regs = _canonical_triangles(tris, regs)
    pairs = np.asarray(new_edges, dtype=np.int32)
    tags = np.asarray(new_tags, dtype=np.int8)
    eorder = np.lexsort((pairs[:, 1], pairs[:, 0], tags))
    out = Mesh(
        nodes=all_nodes,
        triangles=tris,
        tri_region=regs,
        edges=pairs[eorder],
        edge_tag=tags[eorder],
    )
    out.validate()
    return out


def _detect_cap_circle(mesh: Mesh):
    """Recover (center_z, radius) of the tip cap from tagged surface nodes.

    The cap center lies on the axis.  The apex is the lowest tagged node;
    the equator is the largest-radius tagged node (smallest z among ties,
    which skips any straight electrode side sitting above the equator).
    """
    ids = mesh.nodes_with_tag(BoundaryTag.ELECTRODE_SURFACE)
    if len(ids) < 2:
        return None
    pts = mesh.nodes[ids]
    z0 = float(pts[:, 1].min())
    rmax = float(pts[:, 0].max())
    tol = 1e-9 * max(rmax, 1e-12)
    at_rmax = pts[pts[:, 0] >= rmax - tol]
    zq = float(at_rmax[:, 1].min())
    dz = zq - z0
    if dz <= 0.0 or rmax <= 0.0:
        return None
    a = (rmax * rmax + dz * dz) / (2.0 * dz)
    return z0 + a, a


def _reproject_cap_midpoints(mesh: Mesh, rank, all_nodes):
    cap = _detect_cap_circle(mesh)
    if cap is None:
        return
    zc, a = cap
    center = np.array([0.0, zc])
    tol = 1e-9 * max(1.0, a)
    on_cap = np.abs(np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1] - zc) - a) <= tol
    es = int(BoundaryTag.ELECTRODE_SURFACE)
    for (p, q), tag in zip(mesh.edges.tolist(), mesh.edge_tag.tolist()):
        if tag != es or not (on_cap[p] and on_cap[q]):
            continue
        idx = rank[_edge_key(p, q)]
        v = all_nodes[idx] - center
        norm = math.hypot(v[0], v[1])
        if norm > 0.0:
            all_nodes[idx] = center + v * (a / norm)
            if all_nodes[idx][0] < 0.0:
                all_nodes[idx][0] = 0.0


# ---------------------------------------------------------------------------
# plain-text export / import


def mesh_to_text(mesh: Mesh) -> str:
    """Plain-text serialization: counts header, then nodes, triangles with
    region names, and tagged edges, all index-prefixed."""
    lines = [f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.edges)}"]
    for i, (r, z) in enumerate(mesh.nodes.tolist()):
        lines.append(f"{i} {r:.17g} {z:.17g}")
    for i, ((a, b, c), reg) in enumerate(
        zip(mesh.triangles.tolist(), mesh.tri_region.tolist())
    ):
        lines.append(f"{i} {a} {b} {c} {REGION_NAMES[Region(reg)]}")
    for i, ((a, b), tag) in enumerate(zip(mesh.edges.tolist(), mesh.edge_tag.tolist())):
        lines.append(f"{i} {a} {b} {TAG_NAMES[BoundaryTag(tag)]}")
    return "\n".join(lines) + "\n"


def save_mesh_text(mesh: Mesh, path):
    with open(path, "w") as f:
        f.write(mesh_to_text(mesh))


def load_mesh_text(path) -> Mesh:
    with open(path) as f:
        tokens = f.read().split("\n")
    try:
        head = tokens[0].split()
        n, m, k = int(head[0]), int(head[1]), int(head[2])
        nodes = np.empty((n, 2))
        for i in range(n):
            parts = tokens[1 + i].split()
            nodes[int(parts[0])] = (float(parts[1]), float(parts[2]))
        tris = np.empty((m, 3), dtype=np.int32)
        regs = np.empty(m, dtype=np.int8)
        for i in range(m):
            parts = tokens[1 + n + i].split()
            tris[int(parts[0])] = (int(parts[1]), int(parts[2]), int(parts[3]))
            regs[int(parts[0])] = int(REGION_BY_NAME[parts[4]])
        edges = np.empty((k, 2), dtype=np.int32)
        tags = np.empty(k, dtype=np.int8)
        for i in range(k):
            parts = tokens[1 + n + m + i].split()
            edges[int(parts[0])] = (int(parts[1]), int(parts[2]))
            tags[int(parts[0])] = int(TAG_BY_NAME[parts[3]])
    except (IndexError, ValueError, KeyError) as exc:
        raise MeshingError(f"malformed mesh file {path}: {exc}") from exc
    mesh = Mesh(nodes=nodes, triangles=tris, tri_region=regs, edges=edges, edge_tag=tags)
    mesh.validate()
    return mesh
