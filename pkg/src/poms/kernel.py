"""Compiled BMS inner loop for tile sets of at most 64 tiles.

The block is flattened into numpy arrays (one ``uint64`` mask per cell, an
``(n, 6)`` neighbor table, a dense support table) and the whole
resolve/propagate/soften loop runs under numba. Semantics follow
:func:`poms.bms.solve_block`; the random stream differs, so results are
equivalent in distribution rather than bit-identical to the Python path.

AC4 supports are not snapshotted per step. After a contradiction the block
is rolled back and softened, then supports are recounted from scratch,
which lands on the same fixpoint because arc consistency has a unique
greatest fixpoint.
"""

from __future__ import annotations

import math

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

MAX_TILES = 64
FREE = 1 << 30
_TABLE_BITS = 12

SUCCESS, INITIAL_FAILURE, EXHAUSTED = 0, 1, 2


def available() -> bool:
    return numba is not None


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


@_njit
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return int((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@_njit
def _low_index(x):
    return _popcount((x & (~x + np.uint64(1))) - np.uint64(1))


@_njit
def _rebuild(masks, pinned, nbr, adj, edge_bad, support, qc, qt):
    """Recount all supports; queue and drop unsupported tiles. Returns
    (queue length, first emptied cell or -1)."""
    n = masks.shape[0]
    D = adj.shape[0]
    qn = 0
    for c in range(n):
        if pinned[c]:
            continue
        m = masks[c]
        for t in range(D):
            if not (m >> np.uint64(t)) & np.uint64(1):
                continue
            bad = (edge_bad[c] >> np.uint64(t)) & np.uint64(1) != 0
            for d in range(6):
                nb = nbr[c, d]
                if nb < 0:
                    support[c, t, d] = FREE
                else:
                    cnt = _popcount(adj[t, d] & masks[nb])
                    support[c, t, d] = cnt
                    if cnt == 0:
                        bad = True
            if bad:
                qc[qn] = c
                qt[qn] = t
                qn += 1
    bad_cell = -1
    for k in range(qn):
        c = qc[k]
        masks[c] &= ~(np.uint64(1) << np.uint64(qt[k]))
        if masks[c] == 0 and bad_cell < 0:
            bad_cell = c
    return qn, bad_cell


@_njit
def _propagate(masks, pinned, nbr, adj, support, qc, qt, qn):
    """Drain the removal queue. Returns the first emptied cell or -1."""
    head = 0
    while head < qn:
        c = qc[head]
        u = qt[head]
        head += 1
        for d in range(6):
            nb = nbr[c, d]
            if nb < 0 or pinned[nb]:
                continue
            hit = adj[u, d] & masks[nb]
            od = d ^ 1
            while hit:
                low = hit & (~hit + np.uint64(1))
                hit ^= low
                t = _low_index(low)
                cnt = support[nb, t, od] - 1
                support[nb, t, od] = cnt
                if cnt == 0:
                    m = masks[nb] ^ low
                    masks[nb] = m
                    if m == 0:
                        return nb
                    qc[qn] = nb
                    qt[qn] = t
                    qn += 1
    return -1


@_njit
def _entropy(m, weights, table):
    if table.shape[0] > 0:
        return table[m]
    total = 0.0
    acc = 0.0
    k = 0
    for t in range(weights.shape[0]):
        if (m >> np.uint64(t)) & np.uint64(1):
            w = weights[t]
            k += 1
            total += w
            if w > 0:
                acc += w * math.log(w)
    if k < 2:
        return math.inf
    if total <= 0:
        return math.log(k)
    return math.log(total) - acc / total


@_njit
def _sample(m, weights):
    total = 0.0
    k = 0
    for t in range(weights.shape[0]):
        if (m >> np.uint64(t)) & np.uint64(1):
            total += weights[t]
            k += 1
    if total <= 0:
        pick = np.random.randint(0, k)
        for t in range(weights.shape[0]):
            if (m >> np.uint64(t)) & np.uint64(1):
                if pick == 0:
                    return t
                pick -= 1
    r = np.random.random() * total
    acc = 0.0
    last = -1
    for t in range(weights.shape[0]):
        if (m >> np.uint64(t)) & np.uint64(1) and weights[t] > 0:
            acc += weights[t]
            last = t
            if r < acc:
                return t
    return last


@_njit
def _solve(masks, pinned, nbr, adj, edge_bad, weights, table, dims, soften, budget, uniform_cell, seed):
    np.random.seed(seed)
    n = masks.shape[0]
    D = adj.shape[0]
    support = np.zeros((n, D, 6), dtype=np.int32)
    qc = np.empty(n * D + 1, dtype=np.int32)
    qt = np.empty(n * D + 1, dtype=np.int32)
    for c in range(n):
        if masks[c] == 0:
            return INITIAL_FAILURE, 0, 0
    qn, bad = _rebuild(masks, pinned, nbr, adj, edge_bad, support, qc, qt)
    if bad >= 0 or _propagate(masks, pinned, nbr, adj, support, qc, qt, qn) >= 0:
        return INITIAL_FAILURE, 0, 0
    initial = masks.copy()
    before = masks.copy()
    ties = np.empty(n, dtype=np.int32)
    mx, my, mz = dims[0], dims[1], dims[2]
    iterations = 0
    contradictions = 0
    while True:
        nt = 0
        best = math.inf
        for c in range(n):
            if pinned[c]:
                continue
            m = masks[c]
            if m & (m - np.uint64(1)) == 0:
                continue
            if uniform_cell:
                ties[nt] = c
                nt += 1
                continue
            h = _entropy(m, weights, table)
            if h < best - 1e-12:
                best = h
                ties[0] = c
                nt = 1
            elif h <= best + 1e-12:
                ties[nt] = c
                nt += 1
        if nt == 0:
            return SUCCESS, iterations, contradictions
        if iterations >= budget:
            return EXHAUSTED, iterations, contradictions
        iterations += 1
        if not uniform_cell and nt > 1:
            # keep only cells within tolerance of the final minimum
            k = 0
            for j in range(nt):
                if _entropy(masks[ties[j]], weights, table) <= best + 1e-12:
                    ties[k] = ties[j]
                    k += 1
            nt = k
        cell = ties[np.random.randint(0, nt)] if nt > 1 else ties[0]
        tile = _sample(masks[cell], weights)
        before[:] = masks
        m = masks[cell]
        keep = np.uint64(1) << np.uint64(tile)
        masks[cell] = keep
        qn = 0
        rest = m ^ keep
        while rest:
            low = rest & (~rest + np.uint64(1))
            rest ^= low
            qc[qn] = cell
            qt[qn] = _low_index(low)
            qn += 1
        bad = _propagate(masks, pinned, nbr, adj, support, qc, qt, qn)
        if bad < 0:
            continue
        contradictions += 1
        masks[:] = before
        x = bad % mx
        y = (bad // mx) % my
        z = bad // (mx * my)
        lo = np.empty(3, dtype=np.int64)
        hi = np.empty(3, dtype=np.int64)
        for a in range(3):
            ca = x if a == 0 else (y if a == 1 else z)
            s = min(soften[a], dims[a])
            start = min(max(ca - s // 2, 0), dims[a] - s)
            lo[a] = start
            hi[a] = start + s
        for zz in range(lo[2], hi[2]):
            for yy in range(lo[1], hi[1]):
                for xx in range(lo[0], hi[0]):
                    i = xx + mx * (yy + my * zz)
                    if not pinned[i]:
                        masks[i] = initial[i]
        qn, bad = _rebuild(masks, pinned, nbr, adj, edge_bad, support, qc, qt)
        if bad >= 0 or _propagate(masks, pinned, nbr, adj, support, qc, qt, qn) >= 0:
            return EXHAUSTED, iterations, contradictions


def entropy_table(weights) -> np.ndarray:
    """Entropy of every mask when the tile count is small enough to
    enumerate, else an empty array (computed on the fly)."""
    D = len(weights)
    if D > _TABLE_BITS:
        return np.zeros(0, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    out = np.empty(1 << D, dtype=np.float64)
    for m in range(1 << D):
        sel = [(m >> t) & 1 for t in range(D)]
        ws = w[np.array(sel, dtype=bool)]
        if len(ws) < 2:
            out[m] = math.inf
        elif ws.sum() <= 0:
            out[m] = math.log(len(ws))
        else:
            total = ws.sum()
            pos = ws[ws > 0]
            out[m] = math.log(total) - float((pos * np.log(pos)).sum()) / total
    return out


def adjacency_array(ts) -> np.ndarray:
    adj = np.zeros((ts.tile_count, 6), dtype=np.uint64)
    for t, row in enumerate(ts.adjacency):
        for d, m in enumerate(row):
            adj[t, d] = m
    return adj


def solve(b, ts, cfg, rng: np.random.Generator, cache: dict | None = None) -> tuple[int, int, int]:
    """Run the compiled BMS on a :class:`BlockState`, writing the final
    masks back into it. Returns (status, iterations, contradictions)."""
    if ts.tile_count > MAX_TILES:
        raise ValueError(f"compiled kernel handles at most {MAX_TILES} tiles")
    cache = cache if cache is not None else {}
    if "adj" not in cache:
        cache["adj"] = adjacency_array(ts)
        cache["weights"] = np.asarray(ts.weights, dtype=np.float64)
        cache["table"] = entropy_table(ts.weights)
    masks = np.array(b.masks, dtype=np.uint64)
    pinned = np.array(b.pinned, dtype=np.bool_)
    seed = int(rng.integers(0, 2**31 - 1))
    status, iterations, contradictions = _solve(
        masks,
        pinned,
        b.nbr,
        cache["adj"],
        b.edge_bad_array(),
        cache["weights"],
        cache["table"],
        np.asarray(b.dims, dtype=np.int64),
        np.asarray(cfg.soften_size, dtype=np.int64),
        cfg.iterations_for(b.n),
        cfg.tile_choice == "uniform-cell",
        seed,
    )
    b.masks[:] = [int(m) for m in masks]
    b._supports_valid = False
    b._queue.clear()
    b.contradiction = None
    return int(status), int(iterations), int(contradictions)
