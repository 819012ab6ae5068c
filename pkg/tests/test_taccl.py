import math

import numpy as np
import pytest

from poms import library
from poms.model import CellSelector, SetupRestriction
from poms.taccl import compute_taccl, default_scratch

from taccl_oracle import oracle_taccl


def test_free_tileset_has_unit_length(f2):
    rep = compute_taccl(f2, (9, 9))
    assert rep.length == 1
    assert not rep.unbounded
    assert all(t.extent == (1, 1, 1) for t in rep.tiles)


def test_checkerboard_is_unbounded(c2):
    rep = compute_taccl(c2, (9, 9))
    assert all(t.unbounded for t in rep.tiles)
    assert rep.length == math.inf
    assert rep.axis_lengths[:2] == (math.inf, math.inf)
    assert rep.to_dict()["length"] == "inf"


def test_chain_is_finite_and_matches_oracle(chain):
    rep = compute_taccl(chain, (11, 11))
    assert not rep.unbounded
    want = oracle_taccl(chain, (11, 11, 1))
    assert [t.extent for t in rep.tiles] == [w[0] for w in want]
    assert rep.length == 3


@pytest.mark.parametrize("seed", range(20))
def test_random_tilesets_match_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    dim = 3 if seed % 5 == 4 else 2
    ts = library.random_tileset(rng, int(rng.integers(1, 5)), float(rng.uniform(0.3, 0.9)), dim=dim)
    scratch = (7, 7, 5 if dim == 3 else 1)
    rep = compute_taccl(ts, scratch)
    want = oracle_taccl(ts, scratch)
    for got, w in zip(rep.tiles, want):
        if w is None:
            assert got.unplaceable
        else:
            assert not got.unplaceable
            assert (got.extent, got.unbounded) == w


def test_length_grows_with_scratch_until_bounded(chain, c2):
    assert compute_taccl(chain, (9, 9)).length == compute_taccl(chain, (21, 21)).length
    small = compute_taccl(c2, (5, 5)).tiles[0].extent
    large = compute_taccl(c2, (9, 9)).tiles[0].extent
    assert large[0] >= small[0]


def test_even_scratch_is_rejected(f2):
    with pytest.raises(ValueError):
        compute_taccl(f2, (8, 9))


def test_unplaceable_tile(chain):
    r = SetupRestriction("remove", (1,), CellSelector("cell", (4, 4, 0)))
    rep = compute_taccl(chain, (9, 9), [r])
    assert rep.unplaceable == [1]


def test_default_scratch(f2):
    assert default_scratch(f2) == (65, 65, 1)
    assert default_scratch(library.free(2, dim=3)) == (65, 65, 65)


def test_csv_report(chain):
    text = compute_taccl(chain, (9, 9)).to_csv()
    assert text.splitlines()[0].startswith("tile,extent_x")
    assert len(text.splitlines()) == 4
