"""Small synthetic tile sets used for testing and demos."""

from __future__ import annotations

import numpy as np

from .model import DIRECTIONS, PLANAR_DIRECTIONS, Boundary, TileSet, build_tileset


def _dirs(dim: int):
    return PLANAR_DIRECTIONS if dim == 2 else DIRECTIONS


def checkerboard(boundary: Boundary | None = None, dim: int = 2) -> TileSet:
    """Two tiles that may only sit next to each other (C2)."""
    rules = [(0, 1, d) for d in _dirs(dim)]
    return build_tileset(2, rules, boundary=boundary, dim=dim, name="checkerboard")


def free(tile_count: int = 2, boundary: Boundary | None = None, dim: int = 2) -> TileSet:
    """Every tile may neighbor every tile (F2 for two tiles)."""
    rules = [(a, b, d) for a in range(tile_count) for b in range(tile_count) for d in _dirs(dim)]
    return build_tileset(tile_count, rules, boundary=boundary, dim=dim, name=f"free{tile_count}")


def chain(boundary: Boundary | None = None, dim: int = 2, weights=None) -> TileSet:
    """Tiles 0-1-2 in a line: 0 and 2 touch themselves, 1 bridges them."""
    pairs = [(0, 0), (0, 1), (1, 2), (2, 2)]
    rules = [(a, b, d) for a, b in pairs for d in _dirs(dim)]
    return build_tileset(3, rules, weights, boundary=boundary, dim=dim, name="chain")


def stripes() -> TileSet:
    """Columns alternate between tiles 0 and 1."""
    rules = [(0, 1, d) for d in PLANAR_DIRECTIONS[:2]]
    rules += [(t, t, d) for t in (0, 1) for d in PLANAR_DIRECTIONS[2:]]
    return build_tileset(2, rules, name="stripes")


def single(self_adjacent: bool = False, boundary: Boundary | None = None) -> TileSet:
    rules = [(0, 0, d) for d in PLANAR_DIRECTIONS] if self_adjacent else []
    return build_tileset(1, rules, boundary=boundary, name="single")


def random_tileset(
    rng: np.random.Generator,
    tile_count: int,
    density: float,
    *,
    dim: int = 2,
    boundary: str = "open",
    weighted: bool = False,
) -> TileSet:
    """Symmetric random rules: each (a, b, d) with d positive and its mirror
    is admitted with probability ``density``."""
    rules = []
    for d in _dirs(dim)[::2]:
        for a in range(tile_count):
            for b in range(tile_count):
                if rng.random() < density:
                    rules.append((a, b, d))
    weights = None
    if weighted:
        weights = [float(w) for w in rng.integers(1, 5, size=tile_count)]
    b = Boundary.zero(0) if boundary == "zero" else Boundary.open()
    return build_tileset(tile_count, rules, weights, b, dim=dim, name=f"random{tile_count}")
