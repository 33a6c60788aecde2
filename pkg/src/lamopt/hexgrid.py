"""Hexagonal cell lattice with unit-area cells.

Pointy-top hexagons in axial coordinates (q, r); a cell id is the integer
pair.  Point-to-cell lookup is exact hexagon containment via cube rounding,
which is also the nearest-center (Voronoi) assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lamopt.errors import GeometryError

Cell = tuple[int, int]

_AXIAL_DIRECTIONS: tuple[Cell, ...] = (
    (1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1),
)


@dataclass(frozen=True)
class HexGrid:
    """Plane tiling by hexagonal cells of the given area (km^2)."""

    cell_area: float = 1.0

    def __post_init__(self) -> None:
        if self.cell_area <= 0.0:
            raise GeometryError("cell area must be > 0")

    @property
    def size(self) -> float:
        """Circumradius (corner distance) of a cell, km."""
        return math.sqrt(self.cell_area * 2.0 / (3.0 * math.sqrt(3.0)))

    @property
    def pitch(self) -> float:
        """Distance between adjacent cell centers, km."""
        return math.sqrt(3.0) * self.size

    def center(self, cell: Cell) -> tuple[float, float]:
        q, r = cell
        s = self.size
        return (math.sqrt(3.0) * s * (q + r / 2.0), 1.5 * s * r)

    def cell_of(self, x: float, y: float) -> Cell:
        """Cell containing the point (cube rounding of fractional axials)."""
        s = self.size
        qf = (math.sqrt(3.0) / 3.0 * x - y / 3.0) / s
        rf = (2.0 / 3.0 * y) / s
        return _cube_round(qf, rf)

    def neighbors(self, cell: Cell) -> tuple[Cell, ...]:
        q, r = cell
        return tuple((q + dq, r + dr) for dq, dr in _AXIAL_DIRECTIONS)

    def cells_within(self, center_xy: tuple[float, float],
                     radius: float) -> list[Cell]:
        """Cells whose centers lie within ``radius`` of the given point.

        Deterministic row-major order (by r then q).
        """
        if radius <= 0.0:
            raise GeometryError("radius must be > 0")
        cx, cy = center_xy
        s = self.size
        out: list[Cell] = []
        r_lo = math.ceil((cy - radius) / (1.5 * s))
        r_hi = math.floor((cy + radius) / (1.5 * s))
        for r in range(r_lo, r_hi + 1):
            y = 1.5 * s * r
            span2 = radius * radius - (y - cy) ** 2
            if span2 < 0.0:
                continue
            span = math.sqrt(span2)
            q_lo = math.ceil((cx - span) / (math.sqrt(3.0) * s) - r / 2.0)
            q_hi = math.floor((cx + span) / (math.sqrt(3.0) * s) - r / 2.0)
            out.extend((q, r) for q in range(q_lo, q_hi + 1))
        return out


def _cube_round(qf: float, rf: float) -> Cell:
    sf = -qf - rf
    q, r, s = round(qf), round(rf), round(sf)
    dq, dr, ds = abs(q - qf), abs(r - rf), abs(s - sf)
    if dq > dr and dq > ds:
        q = -r - s
    elif dr > ds:
        r = -q - s
    return int(q), int(r)


def centers_array(grid: HexGrid, cells) -> np.ndarray:
    """(n, 2) array of cell centers."""
    return np.array([grid.center(c) for c in cells], dtype=float)
