"""Reference checks written without the propagator: a remove-until-stable
fixpoint, a brute-force realization enumerator for tiny grids and a
realization verifier.

Everything here works on plain sets and the rule triples of a tile set so
that it shares no machinery with the AC4 code it is used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import GridState, TileSet

_OFFSETS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))
_LABELS = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")

ENUMERATION_LIMIT = 10**8


def _relation(ts: TileSet) -> set[tuple[int, int, int]]:
    return {(a, b, int(d)) for a, b, d in ts.rules()}


def _edge_ok(ts: TileSet, rel, t: int, d: int) -> bool:
    if ts.dim == 2 and d >= 4:
        return True
    if ts.boundary.mode == "open":
        return True
    return (t, ts.boundary.zero_tile, d) in rel


def naive_fixpoint(
    masks: Sequence[Iterable[int]],
    pinned: Sequence[bool],
    ts: TileSet,
    dims: Sequence[int],
    *,
    origin: Sequence[int] = (0, 0, 0),
    grid_dims: Sequence[int] | None = None,
    open_boundary: bool = False,
    order: Sequence[int] | None = None,
) -> list[set[int]] | None:
    """Repeatedly drop unsupported tiles from unpinned cells until nothing
    changes. Returns the final domains, or None if any cell empties.

    Cells are indexed x-fastest. Directions that leave the block but stay in
    the grid are treated as supported; directions that leave the grid follow
    the tile set's boundary (or nothing, with ``open_boundary``).
    """
    mx, my, mz = dims
    grid_dims = tuple(grid_dims) if grid_dims is not None else tuple(dims)
    rel = _relation(ts)
    dirs = range(4) if ts.dim == 2 else range(6)
    doms = [set(m) for m in masks]
    n = mx * my * mz
    if any(not d for d in doms):
        return None
    order = list(order) if order is not None else list(range(n))

    def where(i):
        return i % mx, (i // mx) % my, i // (mx * my)

    changed = True
    while changed:
        changed = False
        for i in order:
            if pinned[i]:
                continue
            x, y, z = where(i)
            keep = set()
            for t in doms[i]:
                ok = True
                for d in dirs:
                    dx, dy, dz = _OFFSETS[d]
                    lx, ly, lz = x + dx, y + dy, z + dz
                    if 0 <= lx < mx and 0 <= ly < my and 0 <= lz < mz:
                        nb = doms[lx + mx * (ly + my * lz)]
                        if not any((t, b, d) in rel for b in nb):
                            ok = False
                            break
                    else:
                        g = (origin[0] + lx, origin[1] + ly, origin[2] + lz)
                        inside = all(0 <= c < n_ for c, n_ in zip(g, grid_dims))
                        if not inside and not open_boundary and not _edge_ok(ts, rel, t, d):
                            ok = False
                            break
                if ok:
                    keep.add(t)
            if keep != doms[i]:
                if not keep:
                    return None
                doms[i] = keep
                changed = True
    return doms


def enumerate_realizations(
    ts: TileSet,
    dims: Sequence[int],
    *,
    collect: bool = False,
) -> tuple[int, list[tuple[int, ...]]]:
    """Count every valid tiling of a small grid by depth-first assignment
    with forward checking. Realizations are tuples indexed x-fastest."""
    dims = tuple(dims) + (1,) * (3 - len(dims))
    nx, ny, nz = dims
    n = nx * ny * nz
    D = ts.tile_count
    if n * math.log10(max(D, 1)) > math.log10(ENUMERATION_LIMIT):
        raise ValueError(f"{D}^{n} assignments exceeds the enumeration limit")
    rel = _relation(ts)
    dirs = range(4) if ts.dim == 2 else range(6)

    neighbors: list[list[tuple[int, int]]] = []
    start: list[set[int]] = []
    for i in range(n):
        x, y, z = i % nx, (i // nx) % ny, i // (nx * ny)
        nb = []
        allowed = set(range(D))
        for d in dirs:
            dx, dy, dz = _OFFSETS[d]
            lx, ly, lz = x + dx, y + dy, z + dz
            if 0 <= lx < nx and 0 <= ly < ny and 0 <= lz < nz:
                nb.append((d, lx + nx * (ly + ny * lz)))
            else:
                allowed = {t for t in allowed if _edge_ok(ts, rel, t, d)}
        neighbors.append(nb)
        start.append(allowed)

    found: list[tuple[int, ...]] = []
    count = 0
    assign = [-1] * n

    def dfs(i: int, doms: list[set[int]]) -> None:
        nonlocal count
        if i == n:
            count += 1
            if collect:
                found.append(tuple(assign))
            return
        for t in sorted(doms[i]):
            nxt = doms
            ok = True
            pruned = {}
            for d, j in neighbors[i]:
                if assign[j] >= 0:
                    if (t, assign[j], d) not in rel:
                        ok = False
                        break
                else:
                    keep = {b for b in (pruned.get(j, doms[j])) if (t, b, d) in rel}
                    if not keep:
                        ok = False
                        break
                    pruned[j] = keep
            if not ok:
                continue
            if pruned:
                nxt = list(doms)
                for j, keep in pruned.items():
                    nxt[j] = keep
            assign[i] = t
            dfs(i + 1, nxt)
            assign[i] = -1

    if all(start):
        dfs(0, start)
    return count, found


@dataclass(frozen=True)
class Violation:
    kind: str  # "pair", "unresolved" or "boundary"
    cell: tuple[int, int, int]
    other: tuple[int, int, int] | None = None
    direction: str | None = None
    tiles: tuple[int, ...] = ()

    def describe(self) -> str:
        if self.kind == "unresolved":
            return f"unresolved cell {self.cell}"
        if self.kind == "boundary":
            return f"boundary violation at {self.cell} facing {self.direction}: tile {self.tiles[0]}"
        return (
            f"pair violation {self.cell} -> {self.other} ({self.direction}): "
            f"tiles {self.tiles[0]} {self.tiles[1]}"
        )


@dataclass
class VerifyReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_realization(
    grid: GridState | np.ndarray,
    ts: TileSet,
    *,
    skip: np.ndarray | None = None,
) -> VerifyReport:
    """Check that every cell holds a tile, that each adjacent pair is
    admissible and that edge cells respect the boundary policy.

    ``skip`` is an optional boolean ``[z, y, x]`` array of cells to ignore,
    such as a frame pinned to an unresolved state.
    """
    tiles = grid.tiles if isinstance(grid, GridState) else np.asarray(grid)
    if tiles.ndim == 2:
        tiles = tiles[None]
    nz, ny, nx = tiles.shape
    rows = tiles.tolist()
    skip_rows = skip.tolist() if skip is not None else None
    rel = _relation(ts)
    D = ts.tile_count
    report = VerifyReport()
    edge_dirs = range(4) if ts.dim == 2 else range(6)
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if skip_rows is not None and skip_rows[z][y][x]:
                    continue
                t = rows[z][y][x]
                if not 0 <= t < D:
                    report.violations.append(Violation("unresolved", (x, y, z)))
                    continue
                for d in edge_dirs:
                    dx, dy, dz = _OFFSETS[d]
                    lx, ly, lz = x + dx, y + dy, z + dz
                    inside = 0 <= lx < nx and 0 <= ly < ny and 0 <= lz < nz
                    if not inside:
                        if not _edge_ok(ts, rel, t, d):
                            report.violations.append(
                                Violation("boundary", (x, y, z), None, _LABELS[d], (t,))
                            )
                        continue
                    # each pair once, from its lower cell
                    if d % 2:
                        continue
                    if skip_rows is not None and skip_rows[lz][ly][lx]:
                        continue
                    u = rows[lz][ly][lx]
                    if 0 <= u < D and (t, u, d) not in rel:
                        report.violations.append(
                            Violation("pair", (x, y, z), (lx, ly, lz), _LABELS[d], (t, u))
                        )
    return report
