import random

import numpy as np
import pytest

from poms import library
from poms.model import Boundary, GridState
from poms.oracle import enumerate_realizations, naive_fixpoint, verify_realization


def test_checkerboard_2x2_has_two_colorings(c2):
    n, found = enumerate_realizations(c2, (2, 2), collect=True)
    assert n == 2
    assert sorted(found) == [(0, 1, 1, 0), (1, 0, 0, 1)]


def test_free_2x2_has_sixteen(f2):
    assert enumerate_realizations(f2, (2, 2))[0] == 16


def test_lonely_tile_has_no_realization():
    assert enumerate_realizations(library.single(False), (1, 2))[0] == 0
    assert enumerate_realizations(library.single(False), (1, 1))[0] == 1


def test_zero_boundary_enumeration(c2_zero):
    # an isolated cell must be the tile that can face the zero tile
    n, found = enumerate_realizations(c2_zero, (1, 1), collect=True)
    assert found == [(1,)]


def test_enumeration_limit(f2):
    with pytest.raises(ValueError):
        enumerate_realizations(library.free(6), (6, 6))


def test_chain_count_matches_brute_force(chain):
    import itertools

    rules = chain.rule_set()
    brute = 0
    for a in itertools.product(range(3), repeat=6):
        g = np.array(a).reshape(2, 3)
        if verify_realization(g, chain).passed:
            brute += 1
    assert enumerate_realizations(chain, (3, 2))[0] == brute
    assert rules


def test_verify_flags_pairs_once(c2):
    g = np.array([[0, 0, 1]])
    report = verify_realization(g, c2)
    assert len(report.violations) == 1
    v = report.violations[0]
    assert v.kind == "pair" and v.cell == (0, 0, 0) and v.direction == "+X"
    assert "pair violation" in v.describe()


def test_verify_unresolved_and_skip(c2):
    g = GridState((2, 1))
    g.tiles[0, 0, 0] = 0
    report = verify_realization(g, c2)
    assert [v.kind for v in report.violations] == ["unresolved"]
    skip = g.tiles < 0
    assert verify_realization(g, c2, skip=skip).passed


def test_verify_boundary(c2_zero):
    report = verify_realization(np.array([[0]]), c2_zero)
    assert {v.kind for v in report.violations} == {"boundary"}
    assert verify_realization(np.array([[1]]), c2_zero).passed


@pytest.mark.parametrize("seed", range(20))
def test_naive_fixpoint_is_order_independent(seed):
    rng = np.random.default_rng(seed)
    ts = library.random_tileset(rng, 3, 0.5)
    dims = (3, 3, 1)
    masks = [set(t for t in range(3) if rng.random() < 0.7) or {0} for _ in range(9)]
    pinned = [bool(rng.random() < 0.2) for _ in range(9)]
    order = list(range(9))
    random.Random(seed).shuffle(order)
    assert naive_fixpoint(masks, pinned, ts, dims) == naive_fixpoint(masks, pinned, ts, dims, order=order)
