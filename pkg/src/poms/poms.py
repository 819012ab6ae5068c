"""Grid-level Punch Out Model Synthesis.

The grid keeps one tile id (or ``INDETERMINATE``) per cell. Each round picks
a block, pins its boundary layer to the grid, solves it with BMS and then
either writes the result back, reverts the block region (the block could not
even be made arc consistent) or erodes the edges of resolved regions (the
solver gave up).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bms import BmsConfig, BmsStatus, solve_block
from .model import (
    INDETERMINATE,
    BlockRegion,
    GridState,
    SetupRestriction,
    TileSet,
    allowed_table,
)
from .propagator import BlockState, init_block

BLOCK_CHOICES = ("uniform", "diagonal", "center-out")


class RoundOutcome(enum.Enum):
    SUCCESS = "success"
    INITIAL_AC_FAILURE = "initial-ac-failure"
    SOLVER_FAILURE = "solver-failure"


class FinalStatus(enum.Enum):
    RESOLVED = "resolved"
    ROUNDS_EXHAUSTED = "rounds-exhausted"


@dataclass
class PomsConfig:
    block_size: tuple[int, ...]
    block_choice: str = "uniform"
    block_lambda: float | None = None  # None: a quarter of the largest grid side
    erosion_p0: float = 0.02
    erosion_pmax: float = 0.5
    erosion_mode: str = "linear"  # "linear" escalation or "constant"
    max_rounds: int | None = None
    snapshot_interval: int | None = None
    seed: int = 0
    restrictions: list[SetupRestriction] = field(default_factory=list)
    bms: BmsConfig = field(default_factory=BmsConfig)
    check_soundness: bool = False

    def __post_init__(self):
        bs = tuple(int(s) for s in self.block_size)
        if len(bs) == 2:
            bs = bs + (1,)
        if len(bs) != 3 or any(s < 1 for s in bs):
            raise ValueError(f"invalid block size {self.block_size}")
        self.block_size = bs
        if self.block_choice not in BLOCK_CHOICES:
            raise ValueError(f"unknown block choice {self.block_choice!r}")
        if not 0 <= self.erosion_p0 <= self.erosion_pmax <= 1:
            raise ValueError("need 0 <= erosion_p0 <= erosion_pmax <= 1")
        if self.erosion_mode not in ("linear", "constant"):
            raise ValueError(f"unknown erosion mode {self.erosion_mode!r}")
        if self.block_lambda is not None and self.block_lambda <= 0:
            raise ValueError("block_lambda must be positive")

    def rounds_for(self, grid_dims: Sequence[int]) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        cells = math.prod(grid_dims)
        block = math.prod(self.block_size)
        return max(1, 64 * math.ceil(cells / block))

    def erosion_probability(self, failures: int) -> float:
        if self.erosion_mode == "constant":
            return self.erosion_p0
        return min(self.erosion_pmax, self.erosion_p0 * (1 + failures))


@dataclass
class RoundReport:
    round: int
    origin: tuple[int, int, int]
    dims: tuple[int, int, int]
    outcome: RoundOutcome
    written: int = 0
    reverted: int = 0
    eroded: int = 0
    erosion_probability: float = 0.0
    erosion_candidates: int = 0
    iterations: int = 0
    contradictions: int = 0
    resolved_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "origin": list(self.origin),
            "dims": list(self.dims),
            "outcome": self.outcome.value,
            "written": self.written,
            "reverted": self.reverted,
            "eroded": self.eroded,
            "erosionProbability": self.erosion_probability,
            "erosionCandidates": self.erosion_candidates,
            "iterations": self.iterations,
            "contradictions": self.contradictions,
            "resolvedFraction": self.resolved_fraction,
        }


@dataclass
class PomsStats:
    """Instrumentation gathered during a run."""

    peak_block_cells: int = 0
    peak_block_bytes: int = 0
    block_bytes: list[int] = field(default_factory=list)
    grid_bytes: int = 0
    grid_bytes_per_cell: int = 0
    soundness_failures: int = 0


@dataclass
class PomsResult:
    grid: GridState
    reports: list[RoundReport]
    status: FinalStatus
    stats: PomsStats

    @property
    def resolved(self) -> bool:
        return self.status is FinalStatus.RESOLVED


class GridPins:
    """Grid-level view of the setup restrictions' pin actions.

    Cells pinned to a single tile are fixed in the grid from the start;
    cells pinned to several tiles stay unresolved for good and are left out
    of block choice, erosion and completion checks.
    """

    def __init__(self, ts: TileSet, dims: Sequence[int], restrictions: Sequence[SetupRestriction]):
        nx, ny, nz = dims
        self.fixed = np.full((nz, ny, nx), INDETERMINATE, dtype=np.int32)
        self.inert = np.zeros((nz, ny, nx), dtype=bool)
        for r in restrictions:
            if r.action != "pin":
                continue
            sel = r.selector.grid_mask(dims)
            if len(set(r.tiles)) == 1:
                self.fixed[sel] = r.tiles[0]
                self.inert[sel] = False
            else:
                self.fixed[sel] = INDETERMINATE
                self.inert[sel] = True
        self.pinned = (self.fixed >= 0) | self.inert


def choose_block(
    grid: GridState,
    cfg: PomsConfig,
    rng: np.random.Generator,
    exclude: np.ndarray | None = None,
) -> BlockRegion:
    """Pick the next block: a centre among the Indeterminate cells, weighted
    by the configured scheduler, then a block-sized box around it clamped
    into the grid."""
    open_cells = grid.tiles < 0
    if exclude is not None:
        open_cells &= ~exclude
    zs, ys, xs = np.nonzero(open_cells)
    if len(xs) == 0:
        raise ValueError("no indeterminate cells left to choose from")
    if cfg.block_choice == "uniform":
        k = int(rng.integers(len(xs)))
    else:
        if cfg.block_choice == "diagonal":
            ref = (0.0, 0.0, 0.0)
        else:
            ref = tuple((n - 1) / 2 for n in grid.dims)
        dist = np.sqrt((xs - ref[0]) ** 2 + (ys - ref[1]) ** 2 + (zs - ref[2]) ** 2)
        lam = cfg.block_lambda if cfg.block_lambda is not None else max(grid.dims) / 4
        w = np.exp(-(dist - dist.min()) / lam)
        cdf = np.cumsum(w)
        k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        k = min(k, len(xs) - 1)
    center = (int(xs[k]), int(ys[k]), int(zs[k]))
    return region_around(center, cfg.block_size, grid.dims)


def region_around(center: Sequence[int], size: Sequence[int], dims: Sequence[int]) -> BlockRegion:
    origin = []
    extent = []
    for c, s, n in zip(center, size, dims):
        s = min(s, n)
        origin.append(min(max(c - s // 2, 0), n - s))
        extent.append(s)
    return BlockRegion(tuple(origin), tuple(extent))


def erosion_candidates(grid: GridState, protected: np.ndarray | None = None) -> np.ndarray:
    """Resolved cells with at least one Indeterminate face neighbor."""
    t = grid.tiles
    resolved = t >= 0
    open_ = ~resolved
    if protected is not None:
        open_ &= ~protected
    touch = np.zeros_like(resolved)
    for axis in range(3):
        if t.shape[axis] < 2:
            continue
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        touch[tuple(lo)] |= open_[tuple(hi)]
        touch[tuple(hi)] |= open_[tuple(lo)]
    cand = resolved & touch
    if protected is not None:
        cand &= ~protected
    return cand


def erode(
    grid: GridState,
    failures: int,
    cfg: PomsConfig,
    rng: np.random.Generator,
    protected: np.ndarray | None = None,
    probability: float | None = None,
) -> int:
    """Revert each resolved/indeterminate interface cell with probability
    ``min(pmax, p0 * (1 + failures))``. Returns the number reverted."""
    p = cfg.erosion_probability(failures) if probability is None else probability
    cand = erosion_candidates(grid, protected)
    idx = np.flatnonzero(cand)
    if len(idx) == 0:
        return 0
    hit = idx[rng.random(len(idx)) < p]
    grid.tiles.reshape(-1)[hit] = INDETERMINATE
    return len(hit)


def write_back(grid: GridState, b: BlockState, table: np.ndarray | None = None) -> int:
    """Copy the block's resolved unpinned cells into the grid. A cell on the
    block's outer layer whose tile clashes with a Resolved grid cell just
    outside the block is left Indeterminate."""
    if table is None:
        table = allowed_table(b.ts)
    tiles = grid.tiles
    gx, gy, gz = grid.dims
    region = b.region
    ox, oy, oz = region.origin
    mx, my, mz = region.dims
    dirs = b.ts.directions
    written = 0
    for i in range(b.n):
        if b.pinned[i]:
            continue
        m = b.masks[i]
        if not m or m & (m - 1):
            continue
        t = m.bit_length() - 1
        x, y, z = i % mx, (i // mx) % my, i // (mx * my)
        ok = True
        if x == 0 or y == 0 or z == 0 or x == mx - 1 or y == my - 1 or z == mz - 1:
            for d in dirs:
                dx, dy, dz = d.offset
                lx, ly, lz = x + dx, y + dy, z + dz
                if 0 <= lx < mx and 0 <= ly < my and 0 <= lz < mz:
                    continue
                wx, wy, wz = ox + lx, oy + ly, oz + lz
                if not (0 <= wx < gx and 0 <= wy < gy and 0 <= wz < gz):
                    continue
                u = int(tiles[wz, wy, wx])
                if u >= 0 and not table[d, t, u]:
                    ok = False
                    break
        if ok:
            tiles[oz + z, oy + y, ox + x] = t
            written += 1
        else:
            tiles[oz + z, oy + y, ox + x] = INDETERMINATE
    return written


def run_poms(
    ts: TileSet,
    dims: Sequence[int],
    cfg: PomsConfig,
    *,
    on_round: Callable[[GridState, RoundReport], None] | None = None,
    initial: GridState | None = None,
) -> PomsResult:
    """Run the grid loop. ``initial`` resumes from an earlier grid (copied,
    not modified); its round counter carries over."""
    dims = tuple(int(n) for n in dims)
    if len(dims) == 2:
        dims = dims + (1,)
    if any(s > n for s, n in zip(cfg.block_size, dims)):
        raise ValueError(f"block {cfg.block_size} larger than grid {dims}")
    if ts.dim == 2 and dims[2] != 1:
        raise ValueError("2D tile set needs a grid with Z extent 1")

    rng = np.random.default_rng(cfg.seed)
    if initial is not None:
        if tuple(initial.dims) != dims:
            raise ValueError(f"initial grid dims {initial.dims} do not match {dims}")
        if int(initial.tiles.max(initial=-1)) >= ts.tile_count:
            raise ValueError("initial grid holds tile ids outside the tile set")
        grid = initial.copy()
    else:
        grid = GridState(dims)
    pins = GridPins(ts, dims, cfg.restrictions)
    grid.tiles[pins.fixed >= 0] = pins.fixed[pins.fixed >= 0]
    table = allowed_table(ts)
    kernel_cache: dict = {}
    stats = PomsStats(grid_bytes=grid.tiles.nbytes, grid_bytes_per_cell=grid.bytes_per_cell)
    reports: list[RoundReport] = []
    max_rounds = cfg.rounds_for(dims)
    total = grid.cell_count

    def open_count() -> int:
        return int(np.count_nonzero((grid.tiles < 0) & ~pins.inert))

    status = FinalStatus.RESOLVED
    while open_count():
        if grid.round >= max_rounds:
            status = FinalStatus.ROUNDS_EXHAUSTED
            break
        region = choose_block(grid, cfg, rng, exclude=pins.inert)
        block = init_block(region, ts, grid, cfg.restrictions)
        nbytes = block.state_bytes()
        stats.block_bytes.append(nbytes)
        stats.peak_block_bytes = max(stats.peak_block_bytes, nbytes)
        stats.peak_block_cells = max(stats.peak_block_cells, block.n)

        outcome = solve_block(block, ts, cfg.bms, rng, kernel_cache)
        report = RoundReport(
            round=grid.round,
            origin=region.origin,
            dims=region.dims,
            outcome=RoundOutcome.SUCCESS,
            iterations=outcome.iterations,
            contradictions=outcome.contradictions,
        )
        if outcome.status is BmsStatus.INITIAL_AC_FAILURE:
            report.outcome = RoundOutcome.INITIAL_AC_FAILURE
            view = grid.tiles[region.slices()]
            keep = pins.pinned[region.slices()]
            revert = (view >= 0) & ~keep
            report.reverted = int(np.count_nonzero(revert))
            view[revert] = INDETERMINATE
        elif outcome.status is BmsStatus.ITERATION_EXHAUSTED:
            report.outcome = RoundOutcome.SOLVER_FAILURE
            p = cfg.erosion_probability(grid.failures)
            report.erosion_probability = p
            report.erosion_candidates = int(np.count_nonzero(erosion_candidates(grid, pins.pinned)))
            report.eroded = erode(grid, grid.failures, cfg, rng, pins.pinned, probability=p)
            grid.failures += 1
        else:
            report.written = write_back(grid, block, table)
            grid.failures = 0
        del block

        if cfg.check_soundness and grid.resolved_pair_violations(ts):
            stats.soundness_failures += 1
        report.resolved_fraction = 1.0 - int(np.count_nonzero(grid.tiles < 0)) / total
        reports.append(report)
        grid.round += 1
        if on_round is not None:
            on_round(grid, report)
    return PomsResult(grid, reports, status, stats)
