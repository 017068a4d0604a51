"""Axisymmetric model geometry for an electrode embedded in tissue and blood.

The computational domain is the (r, z) half-plane rectangle [0, R] x [0, H]
revolved about r = 0.  A cylindrical electrode with a hemispherical tip hangs
down the axis: the tip is inserted into a muscle slab that is sandwiched
between two blood layers.  Everything here is purely analytic; meshing lives
in :mod:`ablasim.mesh`.

Coordinates are in meters.  z runs upward from the bottom of the lower blood
layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class GeometryError(ValueError):
    """Raised when a geometry description is not physically realizable."""


class Region(IntEnum):
    ELECTRODE = 0
    MUSCLE = 1
    BLOOD = 2


class BoundaryTag(IntEnum):
    AXIS = 0
    OUTER_GROUND_AND_THERMAL = 1
    ELECTRODE_SURFACE = 2
    ELECTRODE_BLOOD_INTERFACE = 3
    MUSCLE_BLOOD_INTERFACE = 4


REGION_NAMES = {
    Region.ELECTRODE: "Electrode",
    Region.MUSCLE: "Muscle",
    Region.BLOOD: "Blood",
}
REGION_BY_NAME = {v: k for k, v in REGION_NAMES.items()}

TAG_NAMES = {
    BoundaryTag.AXIS: "Axis",
    BoundaryTag.OUTER_GROUND_AND_THERMAL: "OuterGroundAndThermal",
    BoundaryTag.ELECTRODE_SURFACE: "ElectrodeSurface",
    BoundaryTag.ELECTRODE_BLOOD_INTERFACE: "ElectrodeBloodInterface",
    BoundaryTag.MUSCLE_BLOOD_INTERFACE: "MuscleBloodInterface",
}
TAG_BY_NAME = {v: k for k, v in TAG_NAMES.items()}


@dataclass(frozen=True)
class ModelGeometry:
    """Dimensions of the electrode / muscle / blood assembly.

    Defaults describe a 5 mm long, 1.3 mm radius electrode whose
    hemispherical tip is inserted 1.3 mm into an 8 mm thick muscle slab.
    The slab sits midway in a 32 mm deep blood pool, 20 mm domain radius,
    40 mm total depth.
    """

    electrode_length: float = 5.0e-3
    electrode_radius: float = 1.3e-3
    insertion_depth: float = 1.3e-3
    tissue_thickness: float = 8.0e-3
    tissue_radius: float = 20.0e-3
    blood_depth: float = 32.0e-3
    model_depth: float = 40.0e-3

    def __post_init__(self):
        self.validate()

    # ---- derived planes (z coordinates) ----

    @property
    def muscle_bottom_z(self) -> float:
        # muscle centered in the blood pool: equal blood layers above and below
        return self.blood_depth / 2.0

    @property
    def muscle_top_z(self) -> float:
        return self.muscle_bottom_z + self.tissue_thickness

    @property
    def tip_z(self) -> float:
        """z of the electrode apex (lowest point)."""
        return self.muscle_top_z - self.insertion_depth

    @property
    def cap_center_z(self) -> float:
        """Center of the hemispherical tip cap."""
        return self.tip_z + self.electrode_radius

    @property
    def electrode_top_z(self) -> float:
        return self.tip_z + self.electrode_length

    def validate(self):
        pos = [
            ("electrode_length", self.electrode_length),
            ("electrode_radius", self.electrode_radius),
            ("insertion_depth", self.insertion_depth),
            ("tissue_thickness", self.tissue_thickness),
            ("tissue_radius", self.tissue_radius),
            ("blood_depth", self.blood_depth),
            ("model_depth", self.model_depth),
        ]
        for name, v in pos:
            if not (v > 0.0) or not math.isfinite(v):
                raise GeometryError(f"{name} must be positive and finite, got {v!r}")
        if abs(self.tissue_thickness + self.blood_depth - self.model_depth) > 1e-12:
            raise GeometryError(
                "tissue_thickness + blood_depth must equal model_depth "
                f"({self.tissue_thickness} + {self.blood_depth} != {self.model_depth})"
            )
        if self.insertion_depth >= self.tissue_thickness:
            raise GeometryError("insertion_depth must be smaller than tissue_thickness")
        if self.electrode_length <= self.insertion_depth:
            raise GeometryError(
                "electrode_length must exceed insertion_depth (part of the "
                "electrode sits in blood)"
            )
        if self.electrode_radius >= self.tissue_radius:
            raise GeometryError("electrode_radius must be smaller than tissue_radius")
        # meshability guards beyond the basic invariants
        if self.electrode_length - self.insertion_depth >= self.blood_depth / 2.0:
            raise GeometryError("electrode must not pierce the top of the blood pool")
        if self.insertion_depth < self.electrode_radius:
            # a cap straddling the muscle surface is not supported; the tip cap
            # must be fully embedded in muscle
            raise GeometryError(
                "insertion_depth must be at least electrode_radius so the tip cap "
                "is fully embedded in muscle"
            )

    # ---- analytic point classification ----

    def electrode_surface_distance(self, r, z):
        """Unsigned distance to the electrode surface, vectorized.

        Exact for points outside the electrode; for interior points it is the
        distance to the nearest face, which is all the mesh grading needs.
        """
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        a = self.electrode_radius
        zc = self.cap_center_z
        zt = self.electrode_top_z
        # below the cap center every nearest surface point lies on the cap sphere
        d_cap = np.abs(np.hypot(r, z - zc) - a)
        d_out = np.hypot(np.maximum(r - a, 0.0), np.maximum(z - zt, 0.0))
        d_in = np.minimum(a - r, zt - z)
        d_upper = np.where((r <= a) & (z <= zt), d_in, d_out)
        d = np.where(z <= zc, d_cap, d_upper)
        return d if d.ndim else float(d)

    def point_in_electrode(self, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        a = self.electrode_radius
        in_body = (r <= a) & (z >= self.cap_center_z) & (z <= self.electrode_top_z)
        in_cap = (np.hypot(r, z - self.cap_center_z) <= a) & (z <= self.cap_center_z)
        return in_body | in_cap

    def classify_point(self, r: float, z: float) -> Region:
        """Region containing an interior point (undefined exactly on interfaces)."""
        if self.point_in_electrode(r, z):
            return Region.ELECTRODE
        if self.muscle_bottom_z < z < self.muscle_top_z:
            return Region.MUSCLE
        return Region.BLOOD

    # ---- exact revolved volumes for verification ----

    def electrode_embedded_volume(self) -> float:
        """Volume of the electrode part below the muscle surface plane."""
        a = self.electrode_radius
        h = self.insertion_depth
        if h <= a:
            # spherical cap of height h
            return math.pi * h * h * (3 * a - h) / 3.0
        # full half-ball plus a cylinder stub
        return 2.0 / 3.0 * math.pi * a**3 + math.pi * a * a * (h - a)

    def electrode_volume(self) -> float:
        a = self.electrode_radius
        return 2.0 / 3.0 * math.pi * a**3 + math.pi * a * a * (
            self.electrode_top_z - self.cap_center_z
        )

    def region_volumes_exact(self) -> dict[Region, float]:
        slab = math.pi * self.tissue_radius**2 * self.tissue_thickness
        total = math.pi * self.tissue_radius**2 * self.model_depth
        v_el = self.electrode_volume()
        v_mu = slab - self.electrode_embedded_volume()
        return {
            Region.ELECTRODE: v_el,
            Region.MUSCLE: v_mu,
            Region.BLOOD: total - v_el - v_mu,
        }


# ---------------------------------------------------------------------------
# curve primitives used by the mesher


@dataclass(frozen=True)
class Segment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    tag: BoundaryTag

    def point(self, t):
        t = np.asarray(t, dtype=float)
        r = self.p0[0] + (self.p1[0] - self.p0[0]) * t
        z = self.p0[1] + (self.p1[1] - self.p0[1]) * t
        return np.stack([r, z], axis=-1)

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])


@dataclass(frozen=True)
class Arc:
    """Circular arc, parameterized by angle from phi0 to phi1 about center.

    Points are (cr + rad*cos(phi), cz + rad*sin(phi)).
    """

    center: tuple[float, float]
    radius: float
    phi0: float
    phi1: float
    tag: BoundaryTag

    def point(self, t):
        t = np.asarray(t, dtype=float)
        phi = self.phi0 + (self.phi1 - self.phi0) * t
        r = self.center[0] + self.radius * np.cos(phi)
        z = self.center[1] + self.radius * np.sin(phi)
        return np.stack([r, z], axis=-1)

    @property
    def length(self) -> float:
        return abs(self.phi1 - self.phi0) * self.radius


Curve = Segment | Arc


def model_curves(geom: ModelGeometry) -> list[Curve]:
    """Boundary and interface curves of the model, each with its tag.

    The union of these curves partitions the rectangle into the electrode,
    muscle, lower blood and upper blood regions.  Consecutive curves need not
    share endpoints; junction points repeat exactly (same arithmetic) so the
    mesher can deduplicate them.
    """
    R = geom.tissue_radius
    H = geom.model_depth
    zb = geom.muscle_bottom_z
    zt = geom.muscle_top_z
    a = geom.electrode_radius
    z_apex = geom.tip_z
    zc = geom.cap_center_z
    ze = geom.electrode_top_z
    AX = BoundaryTag.AXIS
    OUT = BoundaryTag.OUTER_GROUND_AND_THERMAL
    ES = BoundaryTag.ELECTRODE_SURFACE
    EB = BoundaryTag.ELECTRODE_BLOOD_INTERFACE
    MB = BoundaryTag.MUSCLE_BLOOD_INTERFACE

    curves: list[Curve] = [
        # axis pieces (r = 0), bottom to top; the electrode interior spans
        # [z_apex, ze] on the axis, so that stretch is still hull boundary
        Segment((0.0, 0.0), (0.0, zb), AX),
        Segment((0.0, zb), (0.0, z_apex), AX),
        Segment((0.0, z_apex), (0.0, ze), AX),
        Segment((0.0, ze), (0.0, H), AX),
        # grounded outer wall and top/bottom planes
        Segment((0.0, 0.0), (R, 0.0), OUT),
        Segment((R, 0.0), (R, zb), OUT),
        Segment((R, zb), (R, zt), OUT),
        Segment((R, zt), (R, H), OUT),
        Segment((R, H), (0.0, H), OUT),
        # muscle surfaces against blood
        Segment((0.0, zb), (R, zb), MB),
        Segment((a, zt), (R, zt), MB),
        # electrode tip cap inside muscle, apex (phi=-pi/2) to equator (phi=0)
        Arc((0.0, zc), a, -math.pi / 2.0, 0.0, ES),
    ]
    if zc < zt - 1e-12:
        # part of the cylinder side sits in muscle (insertion deeper than tip radius)
        curves.append(Segment((a, zc), (a, zt), ES))
        curves.append(Segment((a, zt), (a, ze), EB))
    else:
        curves.append(Segment((a, zc), (a, ze), EB))
    # flat electrode top wetted by blood
    curves.append(Segment((a, ze), (0.0, ze), EB))
    return curves
