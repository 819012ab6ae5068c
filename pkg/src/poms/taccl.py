"""Tile arc consistent correlation length.

For each tile, resolve the centre of an otherwise indeterminate scratch
block to that tile, propagate, and measure the bounding box of the cells
whose domain changed. The largest box side over all tiles is the estimate.
A box reaching the scratch border means the measurement is cut off, so that
tile is flagged unbounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .model import BlockRegion, SetupRestriction, TileSet
from .propagator import BlockState

DEFAULT_SCRATCH = 65


@dataclass
class TileExtent:
    tile: int
    extent: tuple[int, int, int]
    unbounded: bool = False
    unplaceable: bool = False

    @property
    def length(self) -> int:
        return max(self.extent)


@dataclass
class TacclReport:
    scratch: tuple[int, int, int]
    tiles: list[TileExtent] = field(default_factory=list)

    @property
    def unbounded(self) -> bool:
        return any(t.unbounded for t in self.tiles)

    @property
    def length(self) -> float:
        """Largest extent over tiles and axes; ``inf`` when any tile is
        unbounded."""
        if self.unbounded:
            return math.inf
        return max([1] + [t.length for t in self.tiles])

    @property
    def axis_lengths(self) -> tuple[float, float, float]:
        out = []
        for axis in range(3):
            if any(t.unbounded and t.extent[axis] >= self.scratch[axis] > 1 for t in self.tiles):
                out.append(math.inf)
            else:
                out.append(max([1] + [t.extent[axis] for t in self.tiles]))
        return tuple(out)

    @property
    def unplaceable(self) -> list[int]:
        return [t.tile for t in self.tiles if t.unplaceable]

    def to_dict(self) -> dict:
        def num(v):
            return "inf" if v == math.inf else v

        return {
            "scratch": list(self.scratch),
            "length": num(self.length),
            "axisLengths": [num(v) for v in self.axis_lengths],
            "unbounded": self.unbounded,
            "unplaceable": self.unplaceable,
            "tiles": [
                {
                    "tile": t.tile,
                    "extent": list(t.extent),
                    "unbounded": t.unbounded,
                    "unplaceable": t.unplaceable,
                }
                for t in self.tiles
            ],
        }

    def to_csv(self) -> str:
        lines = ["tile,extent_x,extent_y,extent_z,unbounded,unplaceable"]
        for t in self.tiles:
            ex, ey, ez = t.extent
            lines.append(f"{t.tile},{ex},{ey},{ez},{int(t.unbounded)},{int(t.unplaceable)}")
        return "\n".join(lines) + "\n"


def default_scratch(ts: TileSet) -> tuple[int, int, int]:
    return (DEFAULT_SCRATCH, DEFAULT_SCRATCH, DEFAULT_SCRATCH if ts.dim == 3 else 1)


def bounding_extent(cells: Sequence[tuple[int, int, int]]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    lo = tuple(min(c[a] for c in cells) for a in range(3))
    hi = tuple(max(c[a] for c in cells) for a in range(3))
    return lo, hi


def measure_tile(
    ts: TileSet,
    tile: int,
    scratch: Sequence[int],
    restrictions: Sequence[SetupRestriction] = (),
) -> TileExtent:
    scratch = tuple(scratch)
    region = BlockRegion((0, 0, 0), scratch)
    b = BlockState(region, ts, scratch, open_boundary=True)
    for r in restrictions:
        b.apply_restriction(r)
    if not b.make_arc_consistent():
        return TileExtent(tile, (0, 0, 0), unplaceable=True)
    baseline = b.snapshot()
    center = b.index(*(s // 2 for s in scratch))
    if b.pinned[center] or not b.masks[center] >> tile & 1:
        return TileExtent(tile, (0, 0, 0), unplaceable=True)
    ok = b.resolve_cell(center, tile)
    changed = b.altered_cells(baseline)
    coords = [b.coords(i) for i in changed] or [b.coords(center)]
    lo, hi = bounding_extent(coords)
    extent = tuple(h - l + 1 for l, h in zip(lo, hi))
    touches = any(s > 1 and (l == 0 or h == s - 1) for l, h, s in zip(lo, hi, scratch))
    return TileExtent(tile, extent, unbounded=touches, unplaceable=not ok)


def compute_taccl(
    ts: TileSet,
    scratch: Sequence[int] | None = None,
    restrictions: Sequence[SetupRestriction] = (),
) -> TacclReport:
    scratch = tuple(scratch) if scratch is not None else default_scratch(ts)
    if len(scratch) == 2:
        scratch = scratch + (1,)
    if any(s < 1 for s in scratch):
        raise ValueError("scratch dims must be positive")
    if any(s > 1 and s % 2 == 0 for s in scratch):
        raise ValueError("scratch dims must be odd so the block has a unique centre")
    if ts.dim == 2 and scratch[2] != 1:
        raise ValueError("2D tile sets need a scratch Z extent of 1")
    report = TacclReport(scratch)
    for t in range(ts.tile_count):
        report.tiles.append(measure_tile(ts, t, scratch, restrictions))
    return report
