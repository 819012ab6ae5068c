"""PNG rendering of grids through a tile set's render table."""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np
from PIL import Image

from .io import atomic_write_bytes
from .model import GridState, TileSet


def placeholder(T: int, channels: int = 4) -> np.ndarray:
    """Magenta/black checker for cells with no tile."""
    yy, xx = np.mgrid[0:T, 0:T]
    on = ((yy * 2 // max(T, 1)) + (xx * 2 // max(T, 1))) % 2 == 0
    out = np.zeros((T, T, channels), dtype=np.uint8)
    magenta = [255, 0, 255, 255][:channels] if channels >= 3 else [255]
    out[on] = magenta
    if channels == 4:
        out[..., 3] = 255
    return out


def load_sheet(ts: TileSet, base_dir: str | os.PathLike = ".") -> np.ndarray:
    if ts.render is None:
        raise ValueError("tile set has no render table")
    path = Path(ts.render.tile_sheet)
    if not path.is_absolute():
        path = Path(base_dir) / path
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA"))


def render_slice(tiles2d: np.ndarray, ts: TileSet, sheet: np.ndarray) -> np.ndarray:
    T = ts.render.tile_pixels
    ny, nx = tiles2d.shape
    ch = sheet.shape[2]
    out = np.zeros((ny * T, nx * T, ch), dtype=np.uint8)
    hole = placeholder(T, ch)
    crops = []
    for x, y in ts.render.rects:
        crops.append(sheet[y:y + T, x:x + T])
    for y in range(ny):
        for x in range(nx):
            t = int(tiles2d[y, x])
            out[y * T:(y + 1) * T, x * T:(x + 1) * T] = crops[t] if 0 <= t < ts.tile_count else hole
    return out


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


def render_grid(grid: GridState, ts: TileSet, sheet: np.ndarray) -> list[np.ndarray]:
    return [render_slice(grid.tiles[z], ts, sheet) for z in range(grid.dims[2])]


def write_render(path, grid: GridState, ts: TileSet, sheet: np.ndarray) -> list[Path]:
    """Write a PNG; 3D grids produce one ``<stem>_z###.png`` per Z slice."""
    path = Path(path)
    images = render_grid(grid, ts, sheet)
    if grid.dims[2] == 1:
        atomic_write_bytes(path, png_bytes(images[0]))
        return [path]
    out = []
    for z, img in enumerate(images):
        p = path.with_name(f"{path.stem}_z{z:03d}{path.suffix or '.png'}")
        atomic_write_bytes(p, png_bytes(img))
        out.append(p)
    return out


def write_png(path, pixels: np.ndarray) -> None:
    atomic_write_bytes(path, png_bytes(pixels))


def taccl_heatmap(extents: list[int], cell: int = 8) -> np.ndarray:
    """A strip of squares, one per tile, shaded by extent (white = largest)."""
    n = max(len(extents), 1)
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    top = max(extents, default=1) or 1
    img = np.zeros((rows * cell, cols * cell, 3), dtype=np.uint8)
    for i, e in enumerate(extents):
        v = int(round(255 * e / top))
        y, x = (i // cols) * cell, (i % cols) * cell
        img[y:y + cell, x:x + cell] = (v, v // 2, 255 - v)
    return img
