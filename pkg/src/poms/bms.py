"""Breakout Model Synthesis: a block solver that resolves one cell at a time
and, on contradiction, softens a small region back to the block's initial
arc consistent state instead of starting over.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernel
from .model import TileSet, bits
from .propagator import BlockState


class BmsStatus(enum.Enum):
    SUCCESS = "success"
    INITIAL_AC_FAILURE = "initial-ac-failure"
    ITERATION_EXHAUSTED = "iteration-exhausted"


@dataclass
class BmsConfig:
    max_iterations: int | None = None  # None: 10 x block cells
    soften_size: tuple[int, int, int] = (8, 8, 8)
    tile_choice: str = "min-entropy"  # or "uniform-cell"
    backend: str = "auto"  # "auto", "python" or "compiled"

    def __post_init__(self):
        if isinstance(self.soften_size, int):
            self.soften_size = (self.soften_size,) * 3
        self.soften_size = tuple(int(s) for s in self.soften_size)
        if len(self.soften_size) == 2:
            self.soften_size = self.soften_size + (1,)
        if any(s < 1 for s in self.soften_size):
            raise ValueError("soften size must be at least 1 per axis")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tile_choice not in ("min-entropy", "uniform-cell"):
            raise ValueError(f"unknown tile choice policy {self.tile_choice!r}")
        if self.backend not in ("auto", "python", "compiled"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "compiled" and not kernel.available():
            raise ValueError("the compiled backend needs numba")

    def use_kernel(self, ts: TileSet) -> bool:
        if self.backend == "python":
            return False
        fits = ts.tile_count <= kernel.MAX_TILES
        if self.backend == "compiled" and not fits:
            raise ValueError(f"the compiled backend handles at most {kernel.MAX_TILES} tiles")
        return fits and kernel.available()

    def iterations_for(self, cells: int) -> int:
        return self.max_iterations if self.max_iterations is not None else 10 * cells


_KERNEL_STATUS = {
    kernel.SUCCESS: BmsStatus.SUCCESS,
    kernel.INITIAL_FAILURE: BmsStatus.INITIAL_AC_FAILURE,
    kernel.EXHAUSTED: BmsStatus.ITERATION_EXHAUSTED,
}


@dataclass
class BmsOutcome:
    status: BmsStatus
    iterations: int = 0
    contradictions: int = 0

    @property
    def success(self) -> bool:
        return self.status is BmsStatus.SUCCESS


class _EntropyTable(dict):
    """Weighted Shannon entropy keyed by domain bitset; singletons and
    pinned-out cells map to infinity."""

    def __init__(self, weights: Sequence[float]):
        super().__init__()
        self.weights = weights

    def __missing__(self, mask: int) -> float:
        if not mask & (mask - 1):
            h = math.inf
        else:
            ws = [self.weights[t] for t in bits(mask)]
            total = sum(ws)
            if total <= 0:
                h = math.log(len(ws))
            else:
                h = math.log(total) - sum(w * math.log(w) for w in ws if w > 0) / total
        self[mask] = h
        return h


def sample_tile(mask: int, weights: Sequence[float], rng: np.random.Generator) -> int:
    """Draw a tile from ``mask`` proportionally to its weight. Zero-weight
    tiles are only drawn when every tile in the mask has zero weight."""
    tiles = list(bits(mask))
    if len(tiles) == 1:
        return tiles[0]
    ws = [weights[t] for t in tiles]
    total = sum(ws)
    if total <= 0:
        return tiles[int(rng.integers(len(tiles)))]
    r = rng.random() * total
    acc = 0.0
    for t, w in zip(tiles, ws):
        acc += w
        if r < acc and w > 0:
            return t
    return next(t for t, w in zip(reversed(tiles), reversed(ws)) if w > 0)


def choose_cell_and_tile(
    b: BlockState,
    ts: TileSet,
    policy: str,
    rng: np.random.Generator,
    entropy: _EntropyTable | None = None,
    candidates: Sequence[int] | None = None,
) -> tuple[int, int] | None:
    """Pick the next (cell, tile) to resolve, or None if nothing is left."""
    masks = b.masks
    if candidates is None:
        candidates = [i for i in range(b.n) if not b.pinned[i]]
    if not candidates:
        return None
    vals = [masks[i] for i in candidates]
    if policy == "uniform-cell":
        open_cells = [i for i, m in zip(candidates, vals) if m & (m - 1)]
        if not open_cells:
            return None
        cell = open_cells[int(rng.integers(len(open_cells)))]
    else:
        if entropy is None:
            entropy = _EntropyTable(ts.weights)
        # few distinct domains, so rank those rather than every cell
        ents = {m: entropy[m] for m in set(vals)}
        best = min(ents.values())
        if best == math.inf:
            return None
        cut = best + 1e-12
        low = {m for m, e in ents.items() if e <= cut}
        ties = [i for i, m in zip(candidates, vals) if m in low]
        cell = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
    return cell, sample_tile(masks[cell], ts.weights, rng)


def soften_region(b: BlockState, cell: int, size: Sequence[int]) -> list[int]:
    """Unpinned cells of the ``size`` box centred on ``cell``, clamped to
    stay inside the block."""
    c = b.coords(cell)
    lo, hi = [], []
    for ci, s, m in zip(c, size, b.dims):
        s = min(s, m)
        start = min(max(ci - s // 2, 0), m - s)
        lo.append(start)
        hi.append(start + s)
    out = []
    for z in range(lo[2], hi[2]):
        for y in range(lo[1], hi[1]):
            for x in range(lo[0], hi[0]):
                i = b.index(x, y, z)
                if not b.pinned[i]:
                    out.append(i)
    return out


def solve_block(
    b: BlockState,
    ts: TileSet,
    cfg: BmsConfig,
    rng: np.random.Generator,
    cache: dict | None = None,
) -> BmsOutcome:
    """Run BMS on a freshly initialised block, mutating it in place.

    On success every unpinned cell holds a single supported tile. ``cache``
    lets repeated calls share the compiled backend's per-tile-set tables.
    """
    if cfg.use_kernel(ts):
        status, iterations, contradictions = kernel.solve(b, ts, cfg, rng, cache)
        return BmsOutcome(_KERNEL_STATUS[status], iterations, contradictions)
    if not b.make_arc_consistent():
        return BmsOutcome(BmsStatus.INITIAL_AC_FAILURE)
    initial = b.snapshot()
    budget = cfg.iterations_for(b.n)
    entropy = _EntropyTable(ts.weights)
    candidates = [i for i in range(b.n) if not b.pinned[i]]
    iterations = contradictions = 0
    while True:
        choice = choose_cell_and_tile(b, ts, cfg.tile_choice, rng, entropy, candidates)
        if choice is None:
            return BmsOutcome(BmsStatus.SUCCESS, iterations, contradictions)
        if iterations >= budget:
            return BmsOutcome(BmsStatus.ITERATION_EXHAUSTED, iterations, contradictions)
        iterations += 1
        before = b.snapshot()
        cell, tile = choice
        if not b.resolve_cell(cell, tile):
            contradictions += 1
            bad = b.contradiction
            b.restore(before)
            b.restore_cells(initial, soften_region(b, bad, cfg.soften_size))
            if not b.make_arc_consistent():
                return BmsOutcome(BmsStatus.ITERATION_EXHAUSTED, iterations, contradictions)
