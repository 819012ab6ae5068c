import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poms import library
from poms.model import (
    DIRECTIONS,
    PLANAR_DIRECTIONS,
    BlockRegion,
    Boundary,
    CellSelector,
    Direction,
    GridState,
    TileMask,
    build_tileset,
    neighbor_support_mask,
    out_of_bounds_support,
)


def test_opposite_is_an_involution():
    for d in DIRECTIONS:
        assert d.opposite().opposite() is d
        assert d.opposite() is not d
        assert tuple(-v for v in d.offset) == d.opposite().offset


def test_direction_order_is_fixed():
    assert [d.label for d in DIRECTIONS] == ["+X", "-X", "+Y", "-Y", "+Z", "-Z"]


def test_single_rule_gets_mirrored():
    ts = build_tileset(2, [(0, 1, Direction.PX)])
    assert ts.allowed(1, 0, Direction.NX)
    assert not ts.allowed(1, 0, Direction.PX)
    assert ts.is_symmetric()


def test_duplicate_rules_collapse():
    ts = build_tileset(2, [(0, 1, "+X"), (0, 1, "+X"), (1, 0, "-X")])
    assert ts.rules() == [(0, 1, Direction.PX), (1, 0, Direction.NX)]


def test_checkerboard(c2):
    for d in PLANAR_DIRECTIONS:
        assert not c2.allowed(0, 0, d)
        assert not c2.allowed(1, 1, d)
        assert c2.allowed(0, 1, d) and c2.allowed(1, 0, d)


def test_free_tileset_masks_full(f2):
    for t in range(2):
        for d in PLANAR_DIRECTIONS:
            assert f2.adjacency[t][d] == 0b11


def test_neighbor_support_mask(c2, f2):
    assert neighbor_support_mask(c2, 0, Direction.PX) == {1}
    assert neighbor_support_mask(f2, 0, Direction.NY) == {0, 1}
    assert neighbor_support_mask(c2, 1, Direction.PY) == {0}


def test_out_of_bounds_support(c2):
    zero = library.checkerboard(Boundary.zero(0))
    for d in PLANAR_DIRECTIONS:
        assert not out_of_bounds_support(zero, 0, d)
        assert out_of_bounds_support(zero, 1, d)
        for t in (0, 1):
            assert out_of_bounds_support(c2, t, d)


def test_planar_tileset_ignores_z_edges():
    zero = library.checkerboard(Boundary.zero(0))
    assert out_of_bounds_support(zero, 0, Direction.PZ)
    assert out_of_bounds_support(zero, 0, Direction.NZ)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(tile_count=2, rules=[(0, 2, Direction.PX)]),
        dict(tile_count=2, rules=[], boundary=Boundary.zero(2)),
        dict(tile_count=2, rules=[], weights=[0, 0]),
        dict(tile_count=0, rules=[]),
        dict(tile_count=2, rules=[(0, 1, Direction.PZ)]),
    ],
)
def test_build_errors(kwargs):
    with pytest.raises(ValueError):
        build_tileset(**kwargs)


@given(
    st.integers(1, 6),
    st.floats(0.0, 1.0),
    st.integers(0, 2**32 - 1),
    st.sampled_from([2, 3]),
)
@settings(max_examples=60, deadline=None)
def test_random_tilesets_are_symmetric(D, density, seed, dim):
    ts = library.random_tileset(np.random.default_rng(seed), D, density, dim=dim)
    assert ts.is_symmetric()
    for a in range(D):
        for d in ts.directions:
            for b in range(D):
                assert ts.allowed(a, b, d) == ts.allowed(b, a, d.opposite())


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 9)), max_size=60))
def test_tile_mask_count_cache(ops):
    m = TileMask(10)
    for add, t in ops:
        (m.add if add else m.remove)(t)
        assert len(m) == bin(m.bits).count("1") == len(list(m))
    assert m.empty == (len(m) == 0)


def test_tile_mask_rejects_out_of_range():
    with pytest.raises(ValueError):
        TileMask(3).add(3)


def test_grid_storage_independent_of_tile_count():
    g = GridState((16, 16))
    assert g.bytes_per_cell == 4
    assert g.tiles.nbytes == 16 * 16 * 4
    assert g.tiles.dtype == np.int32


def test_grid_soundness_counter(c2):
    g = GridState((4, 1))
    g.tiles[0, 0] = [0, 1, 0, -1]
    assert g.resolved_pair_violations(c2) == 0
    g.tiles[0, 0] = [0, 1, 1, 0]
    assert g.resolved_pair_violations(c2) == 1


def test_block_region():
    r = BlockRegion((2, 2, 0), (4, 4, 1))
    assert r.fits((8, 8, 1))
    assert not r.fits((5, 8, 1))
    assert r.cell_count == 16
    with pytest.raises(ValueError):
        BlockRegion((0, 0, 0), (0, 1, 1))


def test_frame_selector():
    mask = CellSelector("frame").grid_mask((4, 4, 1))
    assert mask.sum() == 12
    assert not mask[0, 1:3, 1:3].any()
    mask3d = CellSelector("frame").grid_mask((3, 3, 3))
    assert mask3d.sum() == 26
