"""Wall material catalogue with ITU-R P.2040 electrical constants.

Conductivity follows the power-law fit sigma(f) = c * (f / 1 GHz)^d in S/m.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import NonPositiveInput, UnknownMaterial

VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m


@dataclass(frozen=True)
class Material:
    name: str
    relative_permittivity: float
    conductivity_c: float  # S/m at 1 GHz
    conductivity_d: float  # frequency exponent

    def __post_init__(self):
        if self.relative_permittivity < 1.0:
            raise ValueError(f"relative_permittivity must be >= 1, got {self.relative_permittivity}")
        if self.conductivity_c < 0.0:
            raise ValueError(f"conductivity coefficient must be >= 0, got {self.conductivity_c}")

    def conductivity(self, frequency_hz: float) -> float:
        """Conductivity in S/m at the given frequency."""
        if frequency_hz <= 0.0:
            raise NonPositiveInput(f"frequency must be > 0, got {frequency_hz}")
        f_ghz = frequency_hz / 1e9
        return self.conductivity_c * f_ghz**self.conductivity_d


CONCRETE = Material("concrete", 5.31, 0.0326, 0.8095)
WOOD = Material("wood", 1.99, 0.0047, 1.0718)
GLASS = Material("glass", 6.27, 0.0043, 1.1925)
BACKGROUND = Material("background", 1.0, 0.0, 0.0)

MATERIALS: dict[str, Material] = {m.name: m for m in (CONCRETE, WOOD, GLASS, BACKGROUND)}

# Stable ids for raster channel 0; background is 0 so empty cells zero-fill.
MATERIAL_IDS: dict[str, int] = {"background": 0, "concrete": 1, "wood": 2, "glass": 3}
ID_TO_MATERIAL: dict[int, str] = {v: k for k, v in MATERIAL_IDS.items()}


def get_material(name: str) -> Material:
    try:
        return MATERIALS[name]
    except KeyError:
        raise UnknownMaterial(f"unknown material {name!r}; known: {sorted(MATERIALS)}") from None
