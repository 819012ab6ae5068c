"""Infer a tile set from an exemplar image.

The image is cut into square raw tiles, deduplicated by exact pixel
equality. A window of ``W x W`` raw tiles slides over the image one tile at
a time; each distinct window is a super tile and becomes one tile of the
output. Two super tiles may neighbor along a direction when the band left
after shifting one of them by a tile matches the other. With ``W == 1`` the
bands are empty, so adjacency is taken directly from neighboring placements.

Edges are handled either by wrapping the window around the image, or by
padding with a synthetic "zero" raw tile so that the tiles along the edge
learn rules against a zero super tile (always id 0).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .model import Boundary, Direction, RenderTable, TileSet, build_tileset

ZERO_RAW = -1


@dataclass(frozen=True)
class ExtractConfig:
    tile_pixels: int
    window: int = 2
    boundary: str = "zero"  # "zero" (hard boundary) or "wrap"
    representative: str = "upper-left"  # or "middle"

    def __post_init__(self):
        if self.tile_pixels < 1:
            raise ValueError("tile size must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.boundary not in ("zero", "wrap"):
            raise ValueError(f"boundary must be 'zero' or 'wrap', got {self.boundary!r}")
        if self.representative not in ("upper-left", "middle"):
            raise ValueError(f"unknown representative tile {self.representative!r}")
        if self.representative == "middle" and self.window % 2 == 0:
            raise ValueError("a middle representative tile needs an odd window")


@dataclass
class SuperTile:
    raw: tuple[tuple[int, ...], ...]  # [row][col] raw ids
    count: int = 0
    placements: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class Extraction:
    tileset: TileSet
    super_tiles: list[SuperTile]
    raw_tiles: list[np.ndarray]  # pixel blocks, index = raw id
    raw_grid: np.ndarray  # raw id per exemplar tile position [row, col]
    sheet: np.ndarray  # packed representative tiles, H x W x C uint8
    config: ExtractConfig

    def representative_raw(self, tile: int) -> int:
        st = self.super_tiles[tile].raw
        if self.config.representative == "middle":
            h = self.config.window // 2
            return st[h][h]
        return st[0][0]

    def provenance(self) -> dict:
        return {
            "tilePixels": self.config.tile_pixels,
            "window": self.config.window,
            "boundary": self.config.boundary,
            "representative": self.config.representative,
            "rawTileCount": len(self.raw_tiles),
            "superTiles": [
                {
                    "id": i,
                    "raw": [list(row) for row in st.raw],
                    "count": st.count,
                    "placements": [list(p) for p in st.placements],
                }
                for i, st in enumerate(self.super_tiles)
            ],
        }


def _as_pixels(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.size == 0:
        raise ValueError("exemplar image is empty or malformed")
    return np.ascontiguousarray(arr.astype(np.uint8, copy=False))


def slice_raw_tiles(pixels: np.ndarray, tile_pixels: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Cut the image into tiles and number the distinct ones in row-major
    order of first appearance."""
    h, w = pixels.shape[:2]
    T = tile_pixels
    if h == 0 or w == 0:
        raise ValueError("exemplar image is empty")
    if h % T or w % T:
        raise ValueError(f"image size {w}x{h} is not divisible by tile size {T}")
    rows, cols = h // T, w // T
    ids: dict[bytes, int] = {}
    raw: list[np.ndarray] = []
    grid = np.zeros((rows, cols), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            block = pixels[r * T:(r + 1) * T, c * T:(c + 1) * T]
            key = block.tobytes()
            if key not in ids:
                ids[key] = len(raw)
                raw.append(block.copy())
            grid[r, c] = ids[key]
    return grid, raw


def _windows(raw_grid: np.ndarray, W: int, wrap: bool):
    rows, cols = raw_grid.shape
    if wrap:
        origins = [(r, c) for r in range(rows) for c in range(cols)]
    else:
        origins = [(r, c) for r in range(-(W - 1), rows) for c in range(-(W - 1), cols)]
    for r0, c0 in origins:
        win = []
        for dr in range(W):
            row = []
            for dc in range(W):
                r, c = r0 + dr, c0 + dc
                if wrap:
                    row.append(int(raw_grid[r % rows, c % cols]))
                elif 0 <= r < rows and 0 <= c < cols:
                    row.append(int(raw_grid[r, c]))
                else:
                    row.append(ZERO_RAW)
            win.append(tuple(row))
        yield (r0, c0), tuple(win)


def _band(st: tuple[tuple[int, ...], ...], axis: str, trailing: bool):
    if axis == "x":
        return tuple(row[1:] if trailing else row[:-1] for row in st)
    return st[1:] if trailing else st[:-1]


def extract_tileset(image, cfg: ExtractConfig, name: str = "", sheet_name: str = "") -> Extraction:
    pixels = _as_pixels(image)
    raw_grid, raw_tiles = slice_raw_tiles(pixels, cfg.tile_pixels)
    W = cfg.window
    wrap = cfg.boundary == "wrap"
    hard = not wrap

    index: dict[tuple, int] = {}
    supers: list[SuperTile] = []
    if hard:
        zero = tuple((ZERO_RAW,) * W for _ in range(W))
        index[zero] = 0
        supers.append(SuperTile(zero))
    placement_id: dict[tuple[int, int], int] = {}
    for origin, win in _windows(raw_grid, W, wrap):
        if win not in index:
            index[win] = len(supers)
            supers.append(SuperTile(win))
        st = supers[index[win]]
        st.count += 1
        st.placements.append(origin)
        placement_id[origin] = index[win]

    rules: set[tuple[int, int, Direction]] = set()
    if W == 1:
        rows, cols = raw_grid.shape
        for (r, c), a in placement_id.items():
            for d, (dr, dc) in ((Direction.PX, (0, 1)), (Direction.PY, (1, 0))):
                rr, cc = r + dr, c + dc
                if wrap:
                    b = placement_id[(rr % rows, cc % cols)]
                elif 0 <= rr < rows and 0 <= cc < cols:
                    b = placement_id[(rr, cc)]
                else:
                    b = 0
                rules.add((a, b, d))
            if hard and (r == 0 or c == 0):
                if r == 0:
                    rules.add((0, a, Direction.PY))
                if c == 0:
                    rules.add((0, a, Direction.PX))
        if hard:
            for d in (Direction.PX, Direction.PY):
                rules.add((0, 0, d))
    else:
        for axis, d in (("x", Direction.PX), ("y", Direction.PY)):
            leading = defaultdict(list)
            for i, st in enumerate(supers):
                leading[_band(st.raw, axis, trailing=False)].append(i)
            for a, st in enumerate(supers):
                for b in leading.get(_band(st.raw, axis, trailing=True), ()):
                    rules.add((a, b, d))

    weights = [float(st.count) for st in supers]
    sheet, rects = _pack_sheet(supers, raw_tiles, cfg, pixels.shape[2])
    render = RenderTable(sheet_name, cfg.tile_pixels, tuple(rects))
    ts = build_tileset(
        len(supers),
        sorted(rules),
        weights,
        Boundary.zero(0) if hard else Boundary.open(),
        dim=2,
        name=name,
        render=render,
    )
    return Extraction(ts, supers, raw_tiles, raw_grid, sheet, cfg)


def _pack_sheet(supers, raw_tiles, cfg: ExtractConfig, channels: int):
    T = cfg.tile_pixels
    n = len(supers)
    cols = max(1, math.ceil(math.sqrt(n)))
    rows = math.ceil(n / cols)
    sheet = np.zeros((rows * T, cols * T, channels), dtype=np.uint8)
    rects = []
    for i, st in enumerate(supers):
        if cfg.representative == "middle":
            h = cfg.window // 2
            rid = st.raw[h][h]
        else:
            rid = st.raw[0][0]
        y, x = (i // cols) * T, (i % cols) * T
        if rid != ZERO_RAW:
            sheet[y:y + T, x:x + T] = raw_tiles[rid]
        rects.append((x, y))
    return sheet, rects


def tile_pixels_for(ext: Extraction, tile: int) -> np.ndarray:
    T = ext.config.tile_pixels
    x, y = ext.tileset.render.rects[tile]
    return ext.sheet[y:y + T, x:x + T]


def compose(grid_tiles: np.ndarray, sheet: np.ndarray, render: RenderTable) -> np.ndarray:
    """Paint a 2D grid of tile ids using the sheet (no placeholder for
    indeterminate cells; see :mod:`poms.render` for that)."""
    T = render.tile_pixels
    ny, nx = grid_tiles.shape
    out = np.zeros((ny * T, nx * T, sheet.shape[2]), dtype=np.uint8)
    for y in range(ny):
        for x in range(nx):
            t = int(grid_tiles[y, x])
            if t < 0:
                continue
            sx, sy = render.rects[t]
            out[y * T:(y + 1) * T, x * T:(x + 1) * T] = sheet[sy:sy + T, sx:sx + T]
    return out


def round_trip_rules(ext: Extraction, grid_tiles: np.ndarray) -> tuple[set, set]:
    """Render a tiling, extract it again with the same settings and express
    both rule sets in terms of tile pixel content.

    Returns ``(original, reextracted)``; a tiling that only uses admissible
    adjacencies gives ``reextracted <= original``. Only meaningful for
    ``window == 1``, where a tile's pixels identify it.
    """
    if ext.config.window != 1:
        raise ValueError("round trip comparison needs window == 1")
    image = compose(np.asarray(grid_tiles), ext.sheet, ext.tileset.render)
    again = extract_tileset(image, ext.config)

    def keyed(e: Extraction) -> set:
        keys = [tile_pixels_for(e, t).tobytes() for t in range(e.tileset.tile_count)]
        return {(keys[a], keys[b], int(d)) for a, b, d in e.tileset.rules()}

    return keyed(ext), keyed(again)
