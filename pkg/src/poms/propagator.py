"""Block-scale AC4 constraint propagation.

A :class:`BlockState` holds the full tile domain of every cell in one block
plus AC4 support counters. ``support[(c * D + t) * 6 + d]`` counts the tiles
in the neighbor of cell ``c`` along ``d`` that admit ``t``. Removing a tile
decrements the counters it contributed to; a counter reaching zero removes
the supported tile in turn.

Pinned cells lend support from their mask but are never reduced. Directions
leaving the block are either grid edges (governed by the tile set's boundary
policy) or interior block faces, which are always supported: the coupling to
the rest of the grid goes through the pinned boundary layer.
"""

from __future__ import annotations

import sys
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .model import (
    OFFSETS,
    BlockRegion,
    GridState,
    SetupRestriction,
    TileSet,
    bits,
    out_of_bounds_support,
)

NDIR = 6
# Support count for directions that never lose support.
_FREE = 1 << 30


@dataclass
class Snapshot:
    masks: list[int]
    support: list[int] | None


class BlockState:
    def __init__(
        self,
        region: BlockRegion,
        ts: TileSet,
        grid_dims: Sequence[int] | None = None,
        *,
        open_boundary: bool = False,
    ):
        grid_dims = tuple(grid_dims) if grid_dims is not None else tuple(region.dims)
        if not region.fits(grid_dims):
            raise ValueError(f"block {region} does not fit grid {grid_dims}")
        self.region = region
        self.ts = ts
        self.grid_dims = grid_dims
        mx, my, mz = region.dims
        self.dims = region.dims
        self.n = n = mx * my * mz
        self.D = ts.tile_count
        self.masks: list[int] = [ts.full_mask] * n
        self.pinned: list[bool] = [False] * n
        self.support: list[int] = [0] * (n * self.D * NDIR)
        self.contradiction: int | None = None
        self._queue: deque[tuple[int, int]] = deque()
        self._supports_valid = False

        # Neighbor index per direction (-1 when the step leaves the block or
        # the direction is unused) and which steps leave the grid itself.
        active = [int(d) for d in ts.directions]
        ox, oy, oz = region.origin
        gx, gy, gz = grid_dims
        idx = np.arange(n)
        x, y, z = idx % mx, (idx // mx) % my, idx // (mx * my)
        nbr = np.full((n, NDIR), -1, dtype=np.int32)
        edge = np.zeros((n, NDIR), dtype=bool)
        for d in active:
            dx, dy, dz = OFFSETS[d]
            lx, ly, lz = x + dx, y + dy, z + dz
            inside = (lx >= 0) & (lx < mx) & (ly >= 0) & (ly < my) & (lz >= 0) & (lz < mz)
            nbr[inside, d] = (lx + mx * (ly + my * lz))[inside]
            wx, wy, wz = ox + lx, oy + ly, oz + lz
            in_grid = (wx >= 0) & (wx < gx) & (wy >= 0) & (wy < gy) & (wz >= 0) & (wz < gz)
            edge[:, d] = ~inside & ~in_grid
        self.nbr = nbr
        self.edge = edge

        # Tiles unsupported across each grid-edge direction.
        unsupported = [0] * NDIR
        if not open_boundary:
            for d in ts.directions:
                for t in range(self.D):
                    if not out_of_bounds_support(ts, t, d):
                        unsupported[d] |= 1 << t
        self._edge_unsupported = unsupported

    @cached_property
    def neighbors(self) -> list[tuple[tuple[int, int], ...]]:
        """In-block (direction, neighbor) pairs per cell."""
        return [tuple((d, nb) for d, nb in enumerate(row) if nb >= 0) for row in self.nbr.tolist()]

    @cached_property
    def edge_dirs(self) -> list[tuple[int, ...]]:
        return [tuple(d for d, e in enumerate(row) if e) for row in self.edge.tolist()]

    def edge_bad_array(self) -> np.ndarray:
        """Per cell, the tiles ruled out by the grid edge (needs D <= 64)."""
        bad = np.zeros(self.n, dtype=np.uint64)
        for d, m in enumerate(self._edge_unsupported):
            if m:
                bad[self.edge[:, d]] |= np.uint64(m)
        return bad

    # -- coordinates -------------------------------------------------------

    def index(self, x: int, y: int, z: int = 0) -> int:
        mx, my, _ = self.dims
        return x + mx * (y + my * z)

    def coords(self, i: int) -> tuple[int, int, int]:
        mx, my, _ = self.dims
        return i % mx, (i // mx) % my, i // (mx * my)

    def grid_coords(self, i: int) -> tuple[int, int, int]:
        x, y, z = self.coords(i)
        ox, oy, oz = self.region.origin
        return ox + x, oy + y, oz + z

    # -- setup -------------------------------------------------------------

    def pin(self, i: int, mask: int) -> None:
        self.masks[i] = mask
        self.pinned[i] = True
        self._supports_valid = False
        if not mask and self.contradiction is None:
            self.contradiction = i

    def set_mask(self, i: int, mask: int) -> None:
        self.masks[i] = mask
        self._supports_valid = False
        if not mask and self.contradiction is None:
            self.contradiction = i

    def apply_restriction(self, r: SetupRestriction) -> None:
        tiles = r.tile_bits()
        if tiles >> self.D:
            raise ValueError(f"restriction references tiles outside 0..{self.D - 1}")
        mask = r.selector.grid_mask(self.grid_dims)[self.region.slices()]
        for z, y, x in zip(*np.nonzero(mask)):
            i = self.index(int(x), int(y), int(z))
            if r.action == "pin":
                self.pin(i, tiles)
            elif r.action == "add":
                self.set_mask(i, self.masks[i] | tiles)
            else:
                self.set_mask(i, self.masks[i] & ~tiles)

    # -- propagation -------------------------------------------------------

    def rebuild_support(self) -> None:
        """Recount every support from the current masks and queue the tiles
        left without support."""
        doomed: list[tuple[int, int]] = []
        for c in range(self.n):
            if not self.pinned[c]:
                doomed.extend(self._recount_cell(c))
        self._queue.clear()
        masks = self.masks
        for c, t in doomed:
            masks[c] ^= 1 << t
            self._queue.append((c, t))
            if not masks[c] and self.contradiction is None:
                self.contradiction = c
        self._supports_valid = True

    def _propagate(self) -> bool:
        masks, pinned, support = self.masks, self.pinned, self.support
        adj, D, neighbors = self.ts.adjacency, self.D, self.neighbors
        queue = self._queue
        while queue:
            c, u = queue.popleft()
            row = adj[u]
            for d, nb in neighbors[c]:
                if pinned[nb]:
                    continue
                hit = row[d] & masks[nb]
                if not hit:
                    continue
                od = d ^ 1
                base = nb * D
                while hit:
                    low = hit & -hit
                    hit ^= low
                    t = low.bit_length() - 1
                    k = (base + t) * NDIR + od
                    cnt = support[k] - 1
                    support[k] = cnt
                    if not cnt:
                        m = masks[nb] ^ low
                        masks[nb] = m
                        if not m:
                            self.contradiction = nb
                            queue.clear()
                            return False
                        queue.append((nb, t))
        return True

    def make_arc_consistent(self) -> bool:
        """Propagate to a fixpoint. Returns False on contradiction, with the
        first emptied cell in ``self.contradiction``."""
        if self.contradiction is not None:
            return False
        if not self._supports_valid:
            self.rebuild_support()
            if self.contradiction is not None:
                self._queue.clear()
                return False
        return self._propagate()

    def resolve_cell(self, i: int, t: int) -> bool:
        assert not self.pinned[i], "cannot resolve a pinned cell"
        assert self.masks[i] >> t & 1, f"tile {t} not in domain of cell {i}"
        if not self._supports_valid and not self.make_arc_consistent():
            return False
        # the setup fixpoint may already have taken t away
        m = self.masks[i]
        keep = m & (1 << t)
        self.masks[i] = keep
        if not keep:
            self.contradiction = i
            return False
        self._queue.extend((i, u) for u in bits(m ^ keep))
        return self._propagate()

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> Snapshot:
        return Snapshot(
            masks=self.masks.copy(),
            support=self.support.copy() if self._supports_valid else None,
        )

    def restore(self, s: Snapshot) -> None:
        if len(s.masks) != self.n:
            raise ValueError("snapshot taken on a different block shape")
        self.masks[:] = s.masks
        self._queue.clear()
        self.contradiction = None
        if s.support is not None:
            self.support[:] = s.support
            self._supports_valid = True
        else:
            self._supports_valid = False

    def restore_cells(self, s: Snapshot, cells) -> None:
        """Revert only ``cells`` (pinned ones are skipped) to the snapshot.

        The snapshot's domains must contain the current ones, as when
        softening back to the initial state. With valid supports only the
        cells around the grown domains are recounted; the next fixpoint then
        removes whatever the restored tiles lack support for.
        """
        if len(s.masks) != self.n:
            raise ValueError("snapshot taken on a different block shape")
        masks, pinned = self.masks, self.pinned
        grown = []
        for c in cells:
            if not pinned[c] and s.masks[c] != masks[c]:
                if masks[c] & ~s.masks[c]:
                    self._supports_valid = False
                masks[c] = s.masks[c]
                grown.append(c)
        self._queue.clear()
        self.contradiction = None
        if not self._supports_valid or not grown:
            return
        touched = set(grown)
        for c in grown:
            touched.update(nb for _, nb in self.neighbors[c])
        doomed = []
        for c in sorted(touched):
            if not pinned[c]:
                doomed.extend(self._recount_cell(c))
        for c, t in doomed:
            masks[c] ^= 1 << t
            self._queue.append((c, t))
            if not masks[c] and self.contradiction is None:
                self.contradiction = c

    def _recount_cell(self, c: int) -> list[tuple[int, int]]:
        D, adj, masks, support = self.D, self.ts.adjacency, self.masks, self.support
        unsupported = self._edge_unsupported
        nbrs, edges = self.neighbors[c], self.edge_dirs[c]
        doomed = []
        for t in bits(masks[c]):
            base = (c * D + t) * NDIR
            row = adj[t]
            for d in range(NDIR):
                support[base + d] = _FREE
            bad = False
            for d, nb in nbrs:
                cnt = (row[d] & masks[nb]).bit_count()
                support[base + d] = cnt
                if not cnt:
                    bad = True
            for d in edges:
                if unsupported[d] >> t & 1:
                    support[base + d] = 0
                    bad = True
            if bad:
                doomed.append((c, t))
        return doomed

    def altered_cells(self, since: Snapshot) -> list[int]:
        if len(since.masks) != self.n:
            raise ValueError("snapshot taken on a different block shape")
        return [i for i, (a, b) in enumerate(zip(self.masks, since.masks)) if a != b]

    # -- queries -----------------------------------------------------------

    def is_resolved(self) -> bool:
        return all(p or not (m & (m - 1)) for m, p in zip(self.masks, self.pinned))

    def unresolved_cells(self) -> list[int]:
        return [i for i, (m, p) in enumerate(zip(self.masks, self.pinned)) if not p and m & (m - 1)]

    def domain(self, i: int) -> set[int]:
        return set(bits(self.masks[i]))

    def recount_support(self) -> dict[tuple[int, int, int], int]:
        """Support counts recomputed from scratch, for every unpinned cell,
        tile in its domain and in-block direction."""
        adj, out = self.ts.adjacency, {}
        for c in range(self.n):
            if self.pinned[c]:
                continue
            for t in bits(self.masks[c]):
                for d, nb in self.neighbors[c]:
                    out[(c, t, d)] = (adj[t][d] & self.masks[nb]).bit_count()
        return out

    def maintained_support(self) -> dict[tuple[int, int, int], int]:
        out = {}
        for c in range(self.n):
            if self.pinned[c]:
                continue
            for t in bits(self.masks[c]):
                for d, _ in self.neighbors[c]:
                    out[(c, t, d)] = self.support[(c * self.D + t) * NDIR + d]
        return out

    def state_bytes(self) -> int:
        """Approximate bytes held by the full-domain state of this block."""
        size = sys.getsizeof(self.masks) + sys.getsizeof(self.support) + sys.getsizeof(self.pinned)
        size += sum(sys.getsizeof(m) for m in self.masks)
        return size + self.nbr.nbytes + self.edge.nbytes


def init_block(
    region: BlockRegion,
    ts: TileSet,
    grid: GridState,
    restrictions: Sequence[SetupRestriction] = (),
) -> BlockState:
    """Set up a block for solving inside ``grid``.

    Every cell starts with the full domain. Cells on the block's outer layer
    that are not on the grid edge and are Resolved in the grid are pinned to
    that tile. Restrictions are applied afterwards in order. No propagation
    is performed.
    """
    b = BlockState(region, ts, grid.dims)
    mx, my, mz = region.dims
    ox, oy, oz = region.origin
    gx, gy, gz = grid.dims
    tiles = grid.tiles
    for i in range(b.n):
        x, y, z = i % mx, (i // mx) % my, i // (mx * my)
        on_layer = (
            (x == 0 and ox > 0) or (x == mx - 1 and ox + mx < gx)
            or (y == 0 and oy > 0) or (y == my - 1 and oy + my < gy)
            or (z == 0 and oz > 0) or (z == mz - 1 and oz + mz < gz)
        )
        if not on_layer:
            continue
        t = int(tiles[oz + z, oy + y, ox + x])
        if t >= 0:
            b.pin(i, 1 << t)
    for r in restrictions:
        b.apply_restriction(r)
    return b
