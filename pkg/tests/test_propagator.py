import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poms import library
from poms.model import BlockRegion, Boundary, CellSelector, GridState, SetupRestriction, bits
from poms.oracle import naive_fixpoint
from poms.propagator import BlockState, init_block


def block(ts, dims, grid_dims=None, origin=(0, 0, 0)):
    dims = tuple(dims) + (1,) * (3 - len(dims))
    return BlockState(BlockRegion(origin, dims), ts, grid_dims or dims)


def masks_as_sets(b):
    return [set(bits(m)) for m in b.masks]


def test_checkerboard_row_pin_propagates(c2):
    b = block(c2, (3, 1))
    b.pin(0, 0b01)
    assert b.make_arc_consistent()
    assert masks_as_sets(b) == [{0}, {1}, {0}]


def test_checkerboard_resolve_contradicts_after_pin(c2):
    b = block(c2, (2, 1))
    b.pin(0, 0b01)
    assert not b.resolve_cell(1, 0)
    assert b.contradiction == 1


def test_free_tileset_never_prunes(f2):
    b = block(f2, (4, 4))
    assert b.make_arc_consistent()
    assert b.resolve_cell(5, 1)
    assert all(m == 0b11 for i, m in enumerate(b.masks) if i != 5)


def test_zero_boundary_prunes_edges(c2_zero):
    # with a 0 tile outside the grid, every edge cell must be 1, so a 2x2 fails
    b = block(c2_zero, (2, 2))
    assert not b.make_arc_consistent()


def test_interior_block_faces_do_not_constrain(c2_zero):
    b = block(c2_zero, (2, 1), grid_dims=(4, 4, 1), origin=(1, 1, 0))
    assert b.make_arc_consistent()
    assert all(m == 0b11 for m in b.masks)


def test_pinned_cells_are_never_reduced(c2):
    b = block(c2, (3, 1))
    b.pin(1, 0b11)
    b.pin(0, 0b01)
    assert b.make_arc_consistent()
    assert b.masks[1] == 0b11
    assert b.masks[2] == 0b11


def test_empty_pin_is_a_contradiction(c2):
    b = block(c2, (2, 1))
    b.pin(0, 0)
    assert not b.make_arc_consistent()
    assert b.contradiction == 0


def test_altered_cells_covers_checkerboard(c2):
    b = block(c2, (8, 8))
    assert b.make_arc_consistent()
    base = b.snapshot()
    assert b.resolve_cell(0, 0)
    assert len(b.altered_cells(base)) == 64


def test_snapshot_restore_round_trip(chain):
    b = block(chain, (6, 6))
    b.make_arc_consistent()
    s = b.snapshot()
    b.resolve_cell(14, 1)
    b.restore(s)
    assert b.masks == s.masks
    assert b.maintained_support() == b.recount_support()


def test_restore_cells_then_fixpoint_matches_oracle(chain):
    b = block(chain, (5, 5))
    b.make_arc_consistent()
    p = b.snapshot()
    b.resolve_cell(12, 1)
    b.resolve_cell(0, 2)
    region = [0, 1, 5, 6]
    b.restore_cells(p, region)
    mixed = list(b.masks)
    ok = b.make_arc_consistent()
    want = naive_fixpoint([set(bits(m)) for m in mixed], b.pinned, chain, b.dims)
    assert ok == (want is not None)
    if ok:
        assert masks_as_sets(b) == want


def test_init_block_pins_resolved_layer(c2):
    grid = GridState((6, 6))
    grid.tiles[0, 2, 1] = 0  # left of the block's first column
    grid.tiles[0, 2, 2] = 1  # on the block's layer
    grid.tiles[0, 3, 3] = 0  # interior: ignored
    b = init_block(BlockRegion((2, 2, 0), (3, 3, 1)), c2, grid)
    assert b.pinned[b.index(0, 0)] and b.masks[b.index(0, 0)] == 0b10
    assert not b.pinned[b.index(1, 1)]
    assert sum(b.pinned) == 1


def test_init_block_skips_grid_edge_layer(c2):
    grid = GridState((4, 4))
    grid.tiles[0, 0, 0] = 0
    b = init_block(BlockRegion((0, 0, 0), (3, 3, 1)), c2, grid)
    assert not any(b.pinned)


def test_init_block_restrictions(c2):
    grid = GridState((4, 4))
    r = SetupRestriction("remove", (1,), CellSelector("cell", (0, 0, 0)))
    b = init_block(BlockRegion((0, 0, 0), (4, 4, 1)), c2, grid, [r])
    assert b.masks[0] == 0b01
    pin = SetupRestriction("pin", (0, 1), CellSelector("frame"))
    b = init_block(BlockRegion((0, 0, 0), (4, 4, 1)), c2, grid, [pin])
    assert sum(b.pinned) == 12


def random_case(seed):
    r = np.random.default_rng(seed)
    dim = int(r.choice([2, 3]))
    D = int(r.integers(1, 5))
    ts = library.random_tileset(
        r, D, float(r.uniform(0.3, 0.9)), dim=dim, boundary=str(r.choice(["open", "zero"]))
    )
    dims = (int(r.integers(1, 5)), int(r.integers(1, 5)), int(r.integers(1, 3)) if dim == 3 else 1)
    grid_dims = tuple(d + int(r.integers(0, 2)) for d in dims[:2]) + (dims[2],)
    origin = tuple(g - d for g, d in zip(grid_dims, dims))
    b = BlockState(BlockRegion(origin, dims), ts, grid_dims)
    full = ts.full_mask
    for i in range(b.n):
        u = r.random()
        if u < 0.15:
            b.pin(i, int(r.integers(1, full + 1)))
        elif u < 0.4:
            b.set_mask(i, int(r.integers(1, full + 1)))
    return ts, b


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_ac4_matches_naive_fixpoint(seed):
    ts, b = random_case(seed)
    start = [set(bits(m)) for m in b.masks]
    want = naive_fixpoint(start, b.pinned, ts, b.dims, origin=b.region.origin, grid_dims=b.grid_dims)
    ok = b.make_arc_consistent()
    assert ok == (want is not None)
    if ok:
        assert masks_as_sets(b) == want
        assert b.maintained_support() == b.recount_support()


@given(st.integers(0, 2**32 - 1), st.integers(0, 10**6))
@settings(max_examples=100, deadline=None)
def test_resolution_is_monotone_and_counts_stay_exact(seed, pick):
    ts, b = random_case(seed)
    if not b.make_arc_consistent():
        return
    rnd = random.Random(pick)
    for _ in range(4):
        open_cells = b.unresolved_cells()
        if not open_cells:
            break
        before = list(b.masks)
        i = rnd.choice(open_cells)
        t = rnd.choice(sorted(bits(b.masks[i])))
        ok = b.resolve_cell(i, t)
        assert all(a & ~p == 0 for a, p in zip(b.masks, before))
        for c in range(b.n):
            if b.pinned[c]:
                assert b.masks[c] == before[c]
        if not ok:
            break
        assert b.maintained_support() == b.recount_support()
        want = naive_fixpoint(
            [set(bits(m)) for m in b.masks], b.pinned, ts, b.dims,
            origin=b.region.origin, grid_dims=b.grid_dims,
        )
        assert want == masks_as_sets(b)


def test_state_bytes_grows_with_block():
    ts = library.free(4)
    small = block(ts, (8, 8)).state_bytes()
    large = block(ts, (16, 16)).state_bytes()
    assert 3.5 < large / small < 4.5


def test_block_must_fit():
    with pytest.raises(ValueError):
        BlockState(BlockRegion((2, 0, 0), (4, 4, 1)), library.free(2), (5, 5, 1))


@given(st.integers(0, 2**32 - 1), st.integers(0, 10**6))
@settings(max_examples=100, deadline=None)
def test_partial_restore_matches_naive_fixpoint(seed, pick):
    ts, b = random_case(seed)
    if not b.make_arc_consistent():
        return
    p = b.snapshot()
    rnd = random.Random(pick)
    for _ in range(3):
        open_cells = b.unresolved_cells()
        if not open_cells:
            break
        i = rnd.choice(open_cells)
        before = b.snapshot()
        if not b.resolve_cell(i, rnd.choice(sorted(bits(b.masks[i])))):
            b.restore(before)
            break
    region = rnd.sample(range(b.n), rnd.randint(1, b.n))
    mixed = [set(bits(m)) for m in b.masks]
    for c in region:
        if not b.pinned[c]:
            mixed[c] = set(bits(p.masks[c]))
    want = naive_fixpoint(mixed, b.pinned, ts, b.dims, origin=b.region.origin, grid_dims=b.grid_dims)
    b.restore_cells(p, region)
    ok = b.make_arc_consistent()
    assert ok == (want is not None)
    if ok:
        assert masks_as_sets(b) == want
        assert b.maintained_support() == b.recount_support()
