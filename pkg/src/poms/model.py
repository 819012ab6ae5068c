"""Domain types shared by every stage: directions, tile sets, grids, blocks
and setup restrictions.

Tile domains are stored as Python ints used as bitsets (bit ``t`` set means
tile ``t`` is admissible), which keeps the hot propagation loop cheap for
small and moderately large tile counts alike.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

INDETERMINATE = -1


class Direction(enum.IntEnum):
    PX = 0
    NX = 1
    PY = 2
    NY = 3
    PZ = 4
    NZ = 5

    def opposite(self) -> "Direction":
        return Direction(self ^ 1)

    @property
    def offset(self) -> tuple[int, int, int]:
        return OFFSETS[self]

    @property
    def axis(self) -> int:
        return self >> 1

    @property
    def label(self) -> str:
        return ("+X", "-X", "+Y", "-Y", "+Z", "-Z")[self]


OFFSETS = (
    (1, 0, 0), (-1, 0, 0),
    (0, 1, 0), (0, -1, 0),
    (0, 0, 1), (0, 0, -1),
)
DIRECTIONS = tuple(Direction)
PLANAR_DIRECTIONS = DIRECTIONS[:4]


def parse_direction(value) -> Direction:
    if isinstance(value, Direction):
        return value
    if isinstance(value, int):
        return Direction(value)
    labels = {d.label: d for d in DIRECTIONS}
    try:
        return labels[str(value).upper()]
    except KeyError:
        raise ValueError(f"unknown direction {value!r}") from None


def bits(mask: int) -> Iterator[int]:
    """Yield the set bit positions of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class TileMask:
    """Set of tile ids over ``0..capacity-1`` with a cached cardinality."""

    __slots__ = ("capacity", "_bits", "_count")

    def __init__(self, capacity: int, tiles: Iterable[int] = ()):
        self.capacity = capacity
        self._bits = 0
        self._count = 0
        for t in tiles:
            self.add(t)

    @classmethod
    def from_bits(cls, capacity: int, value: int) -> "TileMask":
        if value >> capacity:
            raise ValueError("mask has bits beyond capacity")
        m = cls(capacity)
        m._bits = value
        m._count = value.bit_count()
        return m

    @classmethod
    def full(cls, capacity: int) -> "TileMask":
        return cls.from_bits(capacity, (1 << capacity) - 1)

    def _check(self, t: int) -> None:
        if not 0 <= t < self.capacity:
            raise ValueError(f"tile id {t} outside 0..{self.capacity - 1}")

    def add(self, t: int) -> None:
        self._check(t)
        b = 1 << t
        if not self._bits & b:
            self._bits |= b
            self._count += 1

    def remove(self, t: int) -> None:
        self._check(t)
        b = 1 << t
        if self._bits & b:
            self._bits ^= b
            self._count -= 1

    @property
    def bits(self) -> int:
        return self._bits

    @property
    def empty(self) -> bool:
        return self._count == 0

    def __len__(self) -> int:
        return self._count

    def __contains__(self, t: int) -> bool:
        return 0 <= t < self.capacity and bool(self._bits >> t & 1)

    def __iter__(self) -> Iterator[int]:
        return bits(self._bits)

    def __eq__(self, other) -> bool:
        if isinstance(other, TileMask):
            return self._bits == other._bits and self.capacity == other.capacity
        if isinstance(other, (set, frozenset)):
            return set(self) == other
        return NotImplemented

    def __repr__(self) -> str:
        return f"TileMask({sorted(self)})"


@dataclass(frozen=True)
class Boundary:
    """What lies beyond the grid edge.

    ``mode="zero"`` means a fixed ``zero_tile`` surrounds the grid, so edge
    cells must be admissible next to it. ``mode="open"`` imposes nothing.
    """

    mode: str = "open"
    zero_tile: int | None = None

    def __post_init__(self):
        if self.mode not in ("zero", "open"):
            raise ValueError(f"boundary mode must be 'zero' or 'open', got {self.mode!r}")
        if self.mode == "zero" and self.zero_tile is None:
            raise ValueError("zero boundary requires a zero tile")
        if self.mode == "open" and self.zero_tile is not None:
            raise ValueError("open boundary takes no zero tile")

    @classmethod
    def zero(cls, tile: int = 0) -> "Boundary":
        return cls("zero", tile)

    @classmethod
    def open(cls) -> "Boundary":
        return cls("open")


@dataclass(frozen=True)
class RenderTable:
    """Where each tile's pixels live inside a tile sheet image."""

    tile_sheet: str
    tile_pixels: int
    rects: tuple[tuple[int, int], ...]


@dataclass(frozen=True, eq=False)
class TileSet:
    tile_count: int
    adjacency: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]
    boundary: Boundary = field(default_factory=Boundary)
    dim: int = 2
    name: str = ""
    render: RenderTable | None = None

    @property
    def full_mask(self) -> int:
        return (1 << self.tile_count) - 1

    @property
    def directions(self) -> tuple[Direction, ...]:
        return PLANAR_DIRECTIONS if self.dim == 2 else DIRECTIONS

    def allowed(self, a: int, b: int, d) -> bool:
        return bool(self.adjacency[a][d] >> b & 1)

    def rules(self) -> list[tuple[int, int, Direction]]:
        """Every admissible (a, b, d) triple, sorted."""
        out = []
        for a in range(self.tile_count):
            for d in DIRECTIONS:
                out.extend((a, b, d) for b in bits(self.adjacency[a][d]))
        out.sort()
        return out

    def rule_set(self) -> frozenset[tuple[int, int, int]]:
        return frozenset((a, b, int(d)) for a, b, d in self.rules())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TileSet):
            return NotImplemented
        return (
            self.tile_count == other.tile_count
            and self.adjacency == other.adjacency
            and self.weights == other.weights
            and self.boundary == other.boundary
            and self.dim == other.dim
            and self.name == other.name
            and self.render == other.render
        )

    __hash__ = None

    def is_symmetric(self) -> bool:
        for a in range(self.tile_count):
            for d in DIRECTIONS:
                od = d.opposite()
                for b in bits(self.adjacency[a][d]):
                    if not self.adjacency[b][od] >> a & 1:
                        return False
        return True


def build_tileset(
    tile_count: int,
    rules: Iterable[tuple[int, int, object]],
    weights: Sequence[float] | None = None,
    boundary: Boundary | None = None,
    *,
    dim: int = 2,
    name: str = "",
    render: RenderTable | None = None,
) -> TileSet:
    """Build a tile set from (a, b, direction) rules.

    The symmetric closure is applied: a rule (a, b, d) also admits
    (b, a, opposite(d)). Duplicate rules collapse.
    """
    if tile_count < 1:
        raise ValueError("tile count must be at least 1")
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    boundary = boundary or Boundary.open()
    if boundary.mode == "zero" and not 0 <= boundary.zero_tile < tile_count:
        raise ValueError(f"zero tile {boundary.zero_tile} outside 0..{tile_count - 1}")
    if weights is None:
        weights = [1.0] * tile_count
    weights = tuple(float(w) for w in weights)
    if len(weights) != tile_count:
        raise ValueError(f"expected {tile_count} weights, got {len(weights)}")
    if any(w < 0 or not math.isfinite(w) for w in weights):
        raise ValueError("weights must be finite and non-negative")
    if not any(w > 0 for w in weights):
        raise ValueError("at least one weight must be positive")
    if render is not None and len(render.rects) != tile_count:
        raise ValueError("render table needs one rect per tile")

    adj = [[0] * 6 for _ in range(tile_count)]
    for a, b, d in rules:
        d = parse_direction(d)
        if not (0 <= a < tile_count and 0 <= b < tile_count):
            raise ValueError(f"rule ({a}, {b}, {d.label}) references a tile outside 0..{tile_count - 1}")
        if dim == 2 and d.axis == 2:
            raise ValueError("2D tile sets cannot carry Z-direction rules")
        adj[a][d] |= 1 << b
        adj[b][d.opposite()] |= 1 << a
    return TileSet(
        tile_count=tile_count,
        adjacency=tuple(tuple(row) for row in adj),
        weights=weights,
        boundary=boundary,
        dim=dim,
        name=name,
        render=render,
    )


def neighbor_support_mask(ts: TileSet, t: int, d) -> TileMask:
    """Tiles admissible in the neighbor along ``d`` of a cell holding ``t``."""
    return TileMask.from_bits(ts.tile_count, ts.adjacency[t][parse_direction(d)])


def out_of_bounds_support(ts: TileSet, t: int, d) -> bool:
    """Whether tile ``t`` is supported across a grid edge facing ``d``."""
    d = parse_direction(d)
    if ts.dim == 2 and d.axis == 2:
        return True
    if ts.boundary.mode == "open":
        return True
    return ts.allowed(t, ts.boundary.zero_tile, d)


@dataclass(frozen=True)
class BlockRegion:
    origin: tuple[int, int, int]
    dims: tuple[int, int, int]

    def __post_init__(self):
        if len(self.origin) != 3 or len(self.dims) != 3:
            raise ValueError("origin and dims must be 3-tuples")
        if any(m < 1 for m in self.dims) or any(o < 0 for o in self.origin):
            raise ValueError(f"invalid block region {self}")

    @property
    def cell_count(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def fits(self, grid_dims: Sequence[int]) -> bool:
        return all(o + m <= n for o, m, n in zip(self.origin, self.dims, grid_dims))

    def contains(self, x: int, y: int, z: int) -> bool:
        return all(o <= c < o + m for c, o, m in zip((x, y, z), self.origin, self.dims))

    def slices(self) -> tuple[slice, slice, slice]:
        """Index into a (z, y, x) ordered array."""
        (ox, oy, oz), (mx, my, mz) = self.origin, self.dims
        return slice(oz, oz + mz), slice(oy, oy + my), slice(ox, ox + mx)


class GridState:
    """Grid-level state: one resolved tile id or ``INDETERMINATE`` per cell.

    Cells are stored in an int32 array indexed ``[z, y, x]``, so storage per
    cell is four bytes regardless of the tile count.
    """

    def __init__(self, dims: Sequence[int]):
        dims = tuple(int(n) for n in dims)
        if len(dims) == 2:
            dims = dims + (1,)
        if len(dims) != 3 or any(n < 1 for n in dims):
            raise ValueError(f"grid dims must be positive, got {dims}")
        self.dims: tuple[int, int, int] = dims
        nx, ny, nz = dims
        self.tiles = np.full((nz, ny, nx), INDETERMINATE, dtype=np.int32)
        self.round = 0
        self.failures = 0

    @classmethod
    def from_array(cls, tiles: np.ndarray) -> "GridState":
        tiles = np.asarray(tiles, dtype=np.int32)
        if tiles.ndim == 2:
            tiles = tiles[None]
        g = cls((tiles.shape[2], tiles.shape[1], tiles.shape[0]))
        g.tiles[...] = tiles
        return g

    @property
    def cell_count(self) -> int:
        return self.tiles.size

    @property
    def bytes_per_cell(self) -> int:
        return self.tiles.itemsize

    def __getitem__(self, xyz: tuple[int, int, int]) -> int:
        x, y, z = xyz
        return int(self.tiles[z, y, x])

    def __setitem__(self, xyz: tuple[int, int, int], value: int) -> None:
        x, y, z = xyz
        self.tiles[z, y, x] = value

    def in_bounds(self, x: int, y: int, z: int) -> bool:
        nx, ny, nz = self.dims
        return 0 <= x < nx and 0 <= y < ny and 0 <= z < nz

    def indeterminate_count(self) -> int:
        return int(np.count_nonzero(self.tiles < 0))

    def resolved_fraction(self) -> float:
        return 1.0 - self.indeterminate_count() / self.cell_count

    def fully_resolved(self) -> bool:
        return not (self.tiles < 0).any()

    def copy(self) -> "GridState":
        g = GridState(self.dims)
        g.tiles[...] = self.tiles
        g.round, g.failures = self.round, self.failures
        return g

    def resolved_pair_violations(self, ts: TileSet) -> int:
        """Count adjacent Resolved pairs that break the tile constraints."""
        table = allowed_table(ts)
        t = self.tiles
        total = 0
        for d, axis in ((Direction.PX, 2), (Direction.PY, 1), (Direction.PZ, 0)):
            if t.shape[axis] < 2:
                continue
            a = np.take(t, range(t.shape[axis] - 1), axis=axis)
            b = np.take(t, range(1, t.shape[axis]), axis=axis)
            both = (a >= 0) & (b >= 0)
            ok = table[d][a[both], b[both]]
            total += int(np.count_nonzero(~ok))
        return total


def allowed_table(ts: TileSet) -> np.ndarray:
    """Boolean array ``[d, a, b]`` of the rule relation."""
    table = np.zeros((6, ts.tile_count, ts.tile_count), dtype=bool)
    for a, b, d in ts.rules():
        table[d, a, b] = True
    return table


@dataclass(frozen=True)
class CellSelector:
    """Which grid cells a restriction touches.

    ``kind`` is ``"cell"`` (``lo`` only), ``"range"`` (``lo`` inclusive to
    ``hi`` exclusive) or ``"frame"`` (every cell within ``width`` of a grid
    face, skipping axes of extent 1).
    """

    kind: str
    lo: tuple[int, int, int] = (0, 0, 0)
    hi: tuple[int, int, int] | None = None
    width: int = 1

    def __post_init__(self):
        if self.kind not in ("cell", "range", "frame"):
            raise ValueError(f"unknown selector kind {self.kind!r}")
        if self.kind == "range" and self.hi is None:
            raise ValueError("range selector needs hi")
        if self.kind == "frame" and self.width < 1:
            raise ValueError("frame width must be at least 1")

    def grid_mask(self, dims: Sequence[int]) -> np.ndarray:
        nx, ny, nz = dims
        mask = np.zeros((nz, ny, nx), dtype=bool)
        if self.kind == "cell":
            x, y, z = self.lo
            if 0 <= x < nx and 0 <= y < ny and 0 <= z < nz:
                mask[z, y, x] = True
        elif self.kind == "range":
            (x0, y0, z0), (x1, y1, z1) = self.lo, self.hi
            mask[max(z0, 0):z1, max(y0, 0):y1, max(x0, 0):x1] = True
        else:
            w = self.width
            for axis, n in zip((2, 1, 0), dims):
                if n == 1:
                    continue
                idx = [slice(None)] * 3
                idx[axis] = slice(0, w)
                mask[tuple(idx)] = True
                idx[axis] = slice(max(n - w, 0), n)
                mask[tuple(idx)] = True
        return mask


@dataclass(frozen=True)
class SetupRestriction:
    """Add, remove or pin tiles on selected cells before a block is solved.

    ``pin`` sets the cell's domain to exactly ``tiles`` and freezes it; a pin
    with the full domain keeps the cell unresolved but inert.
    """

    action: str
    tiles: tuple[int, ...]
    selector: CellSelector

    def __post_init__(self):
        if self.action not in ("add", "remove", "pin"):
            raise ValueError(f"unknown restriction action {self.action!r}")

    def tile_bits(self) -> int:
        out = 0
        for t in self.tiles:
            out |= 1 << t
        return out

    @classmethod
    def pin_frame(cls, ts: TileSet, width: int = 1) -> "SetupRestriction":
        return cls("pin", tuple(range(ts.tile_count)), CellSelector("frame", width=width))
