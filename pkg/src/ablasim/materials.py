"""Physical constants of the model regions.

Values are the standard set for a metal ablation electrode, cardiac muscle
and blood: density rho (kg/m^3), specific heat c (J/(kg*K)), thermal
conductivity k (W/(m*K)), electrical conductivity sigma (S/m), plus the
thermal relaxation time of muscle for the hyperbolic transport law.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Region


@dataclass(frozen=True)
class RegionProperties:
    rho: float
    c: float
    k: float
    sigma: float

    def validate(self, name: str):
        for attr in ("rho", "c", "k", "sigma"):
            v = getattr(self, attr)
            if not v > 0.0:
                raise ValueError(f"{name}.{attr} must be positive, got {v!r}")

    @property
    def rho_c(self) -> float:
        return self.rho * self.c


@dataclass(frozen=True)
class MaterialTable:
    electrode: RegionProperties = field(
        default_factory=lambda: RegionProperties(rho=21500.0, c=132.0, k=71.0, sigma=4.0e6)
    )
    muscle: RegionProperties = field(
        default_factory=lambda: RegionProperties(rho=1200.0, c=3200.0, k=0.550, sigma=0.222)
    )
    blood: RegionProperties = field(
        default_factory=lambda: RegionProperties(rho=1000.0, c=4180.0, k=0.543, sigma=0.667)
    )
    tau_muscle: float = 16.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.electrode.validate("electrode")
        self.muscle.validate("muscle")
        self.blood.validate("blood")
        if self.tau_muscle < 0.0:
            raise ValueError(f"tau_muscle must be >= 0, got {self.tau_muscle!r}")

    def of(self, region: Region) -> RegionProperties:
        return {
            Region.ELECTRODE: self.electrode,
            Region.MUSCLE: self.muscle,
            Region.BLOOD: self.blood,
        }[Region(region)]

    def coefficient_map(self, attr: str) -> dict[Region, float]:
        """Per-region map of one property, e.g. 'k', 'sigma', 'rho_c'."""
        return {reg: getattr(self.of(reg), attr) for reg in Region}
