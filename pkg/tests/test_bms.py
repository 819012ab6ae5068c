import math

import numpy as np
import pytest

from poms import library
from poms.bms import (
    BmsConfig,
    BmsStatus,
    _EntropyTable,
    choose_cell_and_tile,
    sample_tile,
    soften_region,
    solve_block,
)
from poms.model import BlockRegion, build_tileset
from poms.oracle import enumerate_realizations, verify_realization
from poms.propagator import BlockState


BACKENDS = ["python", "compiled"]


def block(ts, dims):
    dims = tuple(dims) + (1,) * (3 - len(dims))
    return BlockState(BlockRegion((0, 0, 0), dims), ts, dims)


def as_grid(b):
    mx, my, mz = b.dims
    return np.array([m.bit_length() - 1 for m in b.masks]).reshape(mz, my, mx)


@pytest.mark.parametrize("backend", BACKENDS)
def test_free_block_needs_one_step_per_cell(f2, rng, backend):
    b = block(f2, (4, 4))
    out = solve_block(b, f2, BmsConfig(backend=backend), rng)
    assert out.status is BmsStatus.SUCCESS
    assert out.iterations == 16
    assert out.contradictions == 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_parity_conflict_is_initial_failure(c2, rng, backend):
    b = block(c2, (3, 1))
    b.pin(0, 0b01)
    b.pin(2, 0b10)
    assert solve_block(b, c2, BmsConfig(backend=backend), rng).status is BmsStatus.INITIAL_AC_FAILURE


@pytest.mark.parametrize("backend", BACKENDS)
def test_checkerboard_block_is_a_coloring(c2, rng, backend):
    b = block(c2, (8, 8))
    assert solve_block(b, c2, BmsConfig(backend=backend), rng).success
    g = as_grid(b)
    assert verify_realization(g, c2).passed
    assert g[0, 0, 0] != g[0, 0, 1]


@pytest.mark.parametrize("backend", BACKENDS)
def test_small_block_result_is_enumerated(chain, backend):
    _, found = enumerate_realizations(chain, (3, 3), collect=True)
    found = set(found)
    for seed in range(15):
        b = block(chain, (3, 3))
        assert solve_block(b, chain, BmsConfig(backend=backend), np.random.default_rng(seed)).success
        assert tuple(m.bit_length() - 1 for m in b.masks) in found


@pytest.mark.parametrize("backend", BACKENDS)
def test_iteration_starved_block_exhausts(rng, backend):
    ts = library.chain()
    b = block(ts, (8, 8))
    out = solve_block(b, ts, BmsConfig(max_iterations=1, backend=backend), rng)
    assert out.status is BmsStatus.ITERATION_EXHAUSTED
    assert out.iterations == 1


def test_min_entropy_prefers_smaller_domain(rng):
    ts = library.free(3)
    b = block(ts, (3, 1))
    b.set_mask(1, 0b011)
    cell, tile = choose_cell_and_tile(b, ts, "min-entropy", rng)
    assert cell == 1 and tile in (0, 1)


def test_min_entropy_ties_are_broken_by_the_rng():
    ts = library.free(2)
    seen = set()
    for seed in range(40):
        b = block(ts, (4, 1))
        seen.add(choose_cell_and_tile(b, ts, "min-entropy", np.random.default_rng(seed))[0])
    assert seen == {0, 1, 2, 3}


def test_uniform_cell_skips_resolved(rng):
    ts = library.free(2)
    b = block(ts, (3, 1))
    b.set_mask(0, 0b01)
    b.set_mask(2, 0b10)
    for _ in range(10):
        assert choose_cell_and_tile(b, ts, "uniform-cell", rng)[0] == 1


def test_nothing_left_to_choose(rng):
    ts = library.free(2)
    b = block(ts, (2, 1))
    b.set_mask(0, 1)
    b.set_mask(1, 2)
    assert choose_cell_and_tile(b, ts, "min-entropy", rng) is None
    assert choose_cell_and_tile(b, ts, "uniform-cell", rng) is None


def test_weighted_entropy():
    table = _EntropyTable([1.0, 3.0])
    assert table[0b01] == math.inf
    want = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
    assert table[0b11] == pytest.approx(want)


def test_sampling_follows_weights():
    rng = np.random.default_rng(7)
    draws = [sample_tile(0b111, [1.0, 0.0, 3.0], rng) for _ in range(4000)]
    assert 1 not in draws
    assert draws.count(2) / len(draws) == pytest.approx(0.75, abs=0.03)


def test_all_zero_weights_sample_uniformly():
    rng = np.random.default_rng(7)
    draws = {sample_tile(0b11, [0.0, 0.0], rng) for _ in range(50)}
    assert draws == {0, 1}


def test_soften_region_is_clamped_and_skips_pins(f2):
    b = block(f2, (10, 10))
    b.pin(b.index(1, 1), 1)
    r = soften_region(b, b.index(0, 0), (4, 4, 4))
    coords = {b.coords(i) for i in r}
    assert len(r) == 15
    assert (1, 1, 0) not in coords
    assert max(c[0] for c in coords) == 3


def test_soften_whole_block_restores_initial_state(chain, rng):
    b = block(chain, (6, 6))
    b.make_arc_consistent()
    p = b.snapshot()
    b.resolve_cell(7, 1)
    b.restore_cells(p, soften_region(b, 20, (6, 6, 1)))
    assert b.masks == p.masks


@pytest.mark.parametrize("backend", BACKENDS)
def test_same_seed_same_block(chain, backend):
    outs = []
    for _ in range(2):
        b = block(chain, (10, 10))
        solve_block(b, chain, BmsConfig(soften_size=4, backend=backend), np.random.default_rng(3))
        outs.append(list(b.masks))
    assert outs[0] == outs[1]


def test_config_validation():
    assert BmsConfig(soften_size=5).soften_size == (5, 5, 5)
    assert BmsConfig().iterations_for(64) == 640
    with pytest.raises(ValueError):
        BmsConfig(soften_size=0)
    with pytest.raises(ValueError):
        BmsConfig(max_iterations=0)
    with pytest.raises(ValueError):
        BmsConfig(tile_choice="greedy")


@pytest.mark.parametrize("backend", BACKENDS)
def test_weight_zero_tile_never_chosen(rng, backend):
    ts = build_tileset(2, [(a, b, d) for a in range(2) for b in range(2) for d in range(4)], [1.0, 0.0])
    b = block(ts, (5, 5))
    assert solve_block(b, ts, BmsConfig(backend=backend), rng).success
    assert set(b.masks) == {1}


@pytest.mark.parametrize("seed", range(40))
def test_compiled_backend_agrees_on_random_blocks(seed):
    """Both backends are randomized differently, so compare what must
    agree: the initial verdict, and validity of any solution found."""
    from poms.oracle import naive_fixpoint
    from poms.model import bits

    r = np.random.default_rng(seed)
    ts = library.random_tileset(r, int(r.integers(1, 5)), float(r.uniform(0.3, 1.0)),
                                boundary=str(r.choice(["open", "zero"])), weighted=True)
    dims = (int(r.integers(1, 6)), int(r.integers(1, 6)))
    starts = {}
    for backend in BACKENDS:
        b = block(ts, dims)
        rr = np.random.default_rng(seed)
        for i in range(b.n):
            if rr.random() < 0.15:
                b.pin(i, int(rr.integers(1, ts.full_mask + 1)))
        starts[backend] = (list(b.masks), list(b.pinned))
        out = solve_block(b, ts, BmsConfig(backend=backend), np.random.default_rng(seed))
        masks, pinned = starts[backend]
        want = naive_fixpoint([set(bits(m)) for m in masks], pinned, ts, b.dims)
        assert (out.status is BmsStatus.INITIAL_AC_FAILURE) == (want is None)
        if out.success:
            assert all(b.masks[i] == masks[i] for i in range(b.n) if pinned[i])
            for i in range(b.n):
                if not pinned[i]:
                    assert b.masks[i] & (b.masks[i] - 1) == 0
                    assert b.masks[i] & masks[i]
            fixed = naive_fixpoint([set(bits(m)) for m in b.masks], pinned, ts, b.dims)
            assert fixed is not None and [set(bits(m)) for m in b.masks] == fixed


def test_backend_validation():
    with pytest.raises(ValueError):
        BmsConfig(backend="gpu")
    big = library.free(65)
    assert not BmsConfig().use_kernel(big)
    with pytest.raises(ValueError):
        BmsConfig(backend="compiled").use_kernel(big)
