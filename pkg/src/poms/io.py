"""Tile set and grid snapshot JSON formats, with atomic writes."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .model import Boundary, GridState, RenderTable, TileSet, build_tileset

FORMAT_VERSION = 1

_TILESET_KEYS = {
    "formatVersion", "name", "dim", "tileCount", "weights", "rules", "boundary",
    "render", "representative",
}
_GRID_KEYS = {"formatVersion", "dims", "cells", "round", "seed", "configDigest"}


class FormatError(ValueError):
    """A file does not follow the expected schema."""


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


@dataclass
class LoadedTileSet:
    tileset: TileSet
    extra: dict


def tileset_to_dict(ts: TileSet, extra: dict | None = None) -> dict:
    # (a, b, d) with a <= b is enough: the loader applies the symmetric closure.
    rules = sorted([a, b, int(d)] for a, b, d in ts.rules() if a <= b)
    weights = [int(w) if float(w).is_integer() else w for w in ts.weights]
    boundary: dict[str, Any] = {"mode": ts.boundary.mode}
    if ts.boundary.mode == "zero":
        boundary["zeroTile"] = ts.boundary.zero_tile
    doc: dict[str, Any] = {
        "formatVersion": FORMAT_VERSION,
        "name": ts.name,
        "dim": ts.dim,
        "tileCount": ts.tile_count,
        "weights": weights,
        "rules": rules,
        "boundary": boundary,
    }
    if ts.render is not None:
        doc["render"] = {
            "tileSheet": ts.render.tile_sheet,
            "tilePixels": ts.render.tile_pixels,
            "rects": [list(r) for r in ts.render.rects],
        }
    if extra:
        for k, v in extra.items():
            doc.setdefault(k, v)
    return doc


def tileset_from_dict(doc: dict, *, strict: bool = True) -> LoadedTileSet:
    if not isinstance(doc, dict):
        raise FormatError("tile set document must be a JSON object")
    if doc.get("formatVersion") != FORMAT_VERSION:
        raise FormatError(f"unsupported formatVersion {doc.get('formatVersion')!r}")
    unknown = set(doc) - _TILESET_KEYS
    if unknown and strict:
        raise FormatError(f"unknown tile set fields: {sorted(unknown)}")
    try:
        D = int(doc["tileCount"])
        dim = int(doc.get("dim", 2))
        b = doc.get("boundary", {"mode": "open"})
        if b.get("mode") == "zero":
            boundary = Boundary.zero(int(b["zeroTile"]))
        elif b.get("mode", "open") == "open":
            boundary = Boundary.open()
        else:
            raise FormatError(f"unknown boundary mode {b.get('mode')!r}")
        rules = []
        for rule in doc["rules"]:
            a, bb, d = rule
            if not 0 <= int(d) < 6:
                raise FormatError(f"rule direction {d} outside 0..5")
            rules.append((int(a), int(bb), int(d)))
        render = None
        if doc.get("render") is not None:
            r = doc["render"]
            render = RenderTable(
                str(r["tileSheet"]),
                int(r["tilePixels"]),
                tuple((int(x), int(y)) for x, y in r["rects"]),
            )
        ts = build_tileset(
            D,
            rules,
            doc.get("weights"),
            boundary,
            dim=dim,
            name=str(doc.get("name", "")),
            render=render,
        )
    except (KeyError, TypeError) as e:
        raise FormatError(f"malformed tile set: {e}") from e
    extra = {k: doc[k] for k in unknown}
    if "representative" in doc:
        extra["representative"] = doc["representative"]
    return LoadedTileSet(ts, extra)


def save_tileset(path, ts: TileSet, extra: dict | None = None) -> None:
    atomic_write_text(path, dumps(tileset_to_dict(ts, extra)))


def load_tileset(path, *, strict: bool = True) -> TileSet:
    return load_tileset_doc(path, strict=strict).tileset


def load_tileset_doc(path, *, strict: bool = True) -> LoadedTileSet:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON: {e}") from e
    return tileset_from_dict(doc, strict=strict)


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def grid_to_dict(grid: GridState, *, seed: int | None = None, digest: str = "") -> dict:
    return {
        "formatVersion": FORMAT_VERSION,
        "dims": list(grid.dims),
        "cells": grid.tiles.reshape(-1).tolist(),
        "round": grid.round,
        "seed": seed,
        "configDigest": digest,
    }


def grid_from_dict(doc: dict, *, strict: bool = True) -> GridState:
    if not isinstance(doc, dict) or doc.get("formatVersion") != FORMAT_VERSION:
        raise FormatError("not a version 1 grid snapshot")
    unknown = set(doc) - _GRID_KEYS
    if unknown and strict:
        raise FormatError(f"unknown grid fields: {sorted(unknown)}")
    try:
        dims = [int(n) for n in doc["dims"]]
        cells = doc["cells"]
    except (KeyError, TypeError) as e:
        raise FormatError(f"malformed grid snapshot: {e}") from e
    if len(dims) != 3:
        raise FormatError("grid dims must have three entries")
    g = GridState(dims)
    if len(cells) != g.cell_count:
        raise FormatError(f"expected {g.cell_count} cells, got {len(cells)}")
    arr = np.asarray(cells, dtype=np.int64)
    if (arr < -1).any():
        raise FormatError("cell entries must be -1 or a tile id")
    g.tiles[...] = arr.reshape(g.tiles.shape)
    g.round = int(doc.get("round", 0))
    return g


def save_grid(path, grid: GridState, *, seed: int | None = None, digest: str = "") -> None:
    atomic_write_text(path, dumps(grid_to_dict(grid, seed=seed, digest=digest)))


def load_grid(path, *, strict: bool = True) -> GridState:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON: {e}") from e
    return grid_from_dict(doc, strict=strict)
