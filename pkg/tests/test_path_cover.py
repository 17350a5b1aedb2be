import numpy as np
import pytest
from hypothesis import given, strategies as st

from apriori_tsp.core import HopInstance, Tour, khop_cost
from apriori_tsp.errors import ValidationError
from apriori_tsp.generators import random_feasible_cover, random_monotone_path, random_small_hier
from apriori_tsp.hierarchy import build_hierarchy
from apriori_tsp.path_cover import (PathLevelPair, check_pair, cover_to_tour, cover_weight, covers,
                                    degenerate_cell, full_universe, is_feasible, is_feasible_conditions,
                                    k_run_start, newly_covered, pair_weight, path_khop, reduce_degenerate,
                                    sort_segment, walk_insert)


def grouped(sizes=(4, 2), far=4, k=2):
    """Zero-cost groups, `far` between groups; gives cells matching the groups at level 2."""
    n = sum(sizes)
    c = np.full((n, n), far, dtype=np.int64)
    start = 0
    for s in sizes:
        c[start:start + s, start:start + s] = 0
        start += s
    return build_hierarchy(HopInstance(c, k, well_scaled=True), seed=0)


def seeds():
    return st.integers(0, 10**6)


def test_pair_weight_singletons():
    h = random_small_hier(6, 2, np.random.default_rng(0))
    assert pair_weight(((0,), h.L), h) == 0
    assert pair_weight(((0,), 1), h) == 4 * h.D[0]


def test_pair_weight_three_vertex_path():
    h = random_small_hier(6, 2, np.random.default_rng(1))
    a, b, c = h.order[:3]
    want = h.tilde[a, b] + h.tilde[b, c] + h.tilde[a, c] + 4 * h.D[0]
    assert pair_weight(((a, b, c), 1), h) == want


def test_check_pair_rejects_non_monotone():
    h = random_small_hier(5, 1, np.random.default_rng(2))
    a, b = h.order[:2]
    with pytest.raises(ValidationError):
        check_pair(((b, a), 1), h)
    with pytest.raises(ValidationError):
        check_pair(((), 1), h)


def test_covers_rules():
    h = grouped()
    a = max(h.cells(2), key=len)
    assert len(a) == 4
    assert covers(((a[0],), 2), (a[0], 2), h)
    assert not covers(((a[0],), 1), (a[1], h.L), h)
    assert covers(((a[0], a[1]), 1), (a[3], 1), h)
    assert not covers(((a[0],), 1), (a[3], 1), h)


def test_feasibility_examples():
    h = random_small_hier(6, 2, np.random.default_rng(3))
    full = [PathLevelPair(h.order, 1)]
    assert is_feasible(full, h) and is_feasible_conditions(full, h)
    assert not is_feasible([], h) and not is_feasible_conditions([], h)


@given(seeds())
def test_feasibility_routes_agree(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    h = random_small_hier(int(rng.integers(k + 2, 10)), k, rng)
    cover = random_feasible_cover(h, rng)
    assert is_feasible(cover, h) and is_feasible_conditions(cover, h)
    sub = [p for p in cover if rng.random() < 0.6]
    assert is_feasible(sub, h) == is_feasible_conditions(sub, h)


def test_newly_covered_counts_responsibility():
    h = grouped()
    a = max(h.cells(2), key=len)
    U = np.zeros((h.n, h.L), dtype=bool)
    U[list(a), 0] = True
    assert newly_covered(((a[0], a[1]), 1), h, U) == 4
    assert newly_covered(((a[0],), 1), h, U) == 1


def test_cover_to_tour_single_pair():
    h = random_small_hier(7, 2, np.random.default_rng(4))
    cover = [PathLevelPair(h.order, 1)]
    t = cover_to_tour(cover, h)
    assert t.visits == h.order
    assert khop_cost(h.tilde, t, 2) <= path_khop(h, h.order) + 4 * h.D[0]


def test_cover_to_tour_two_level_one_pairs():
    h = random_small_hier(8, 1, np.random.default_rng(5))
    left, right = h.order[:4], h.order[4:]
    cover = [PathLevelPair(left, 1), PathLevelPair(right, 1)]
    t = cover_to_tour(cover, h)
    assert t.is_hamiltonian(8)
    assert khop_cost(h.tilde, t, 1) <= 2 * cover_weight(cover, h)


@given(seeds())
def test_cover_to_tour_bound(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    h = random_small_hier(int(rng.integers(k + 2, 12)), k, rng)
    cover = random_feasible_cover(h, rng)
    trace = []
    t = cover_to_tour(cover, h, trace)
    assert t.covers(range(h.n))
    assert khop_cost(h.tilde, t, k) <= 2 * cover_weight(cover, h)
    pots = [r["potential"] for r in trace]
    assert pots == sorted(pots, reverse=True)


def test_walk_insert_empty_is_identity():
    h = grouped()
    a = max(h.cells(2), key=len)
    assert walk_insert(a, 0, (), 2, h) == tuple(a)


def test_walk_insert_in_zero_cost_cell():
    h = grouped()
    a = max(h.cells(2), key=len)
    main, q = (a[0], a[2]), (a[1], a[3])
    out = walk_insert(main, 0, q, 2, h)
    delta = path_khop(h, out) - path_khop(h, main) - path_khop(h, q)
    assert out == q + main and delta <= 2 * 4 * h.D[1]


@given(seeds())
def test_walk_insert_random(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 3))
    h = random_small_hier(int(rng.integers(k + 3, 10)), k, rng)
    lvl = int(rng.integers(1, h.L + 1))
    big = [c for c in h.cells(lvl) if len(c) >= k]
    if not big:
        return
    cell = big[int(rng.integers(len(big)))]
    main = tuple(rng.permutation(h.order)[: int(rng.integers(0, 4))])
    at = int(rng.integers(0, len(main) + 1))
    main = main[:at] + tuple(cell[:k]) + main[at:]
    q = tuple(int(v) for v in rng.choice(cell, size=int(rng.integers(1, len(cell) + 1))))
    s = k_run_start(h, main, h.cell_span(cell[0], lvl))
    assert s is not None
    walk_insert(main, s, q, lvl, h)


def test_sort_segment_examples():
    h = random_small_hier(6, 2, np.random.default_rng(6))
    a, b, c = h.order[:3]
    assert sort_segment((a, b, c), 0, 3, h).visits == (a, b, c)
    out = sort_segment((c, b, a), 0, 3, h)
    assert out.visits == (a, b, c)
    assert path_khop(h, out.visits) <= path_khop(h, (c, b, a))


@given(seeds())
def test_sort_short_path_never_worse(seed):
    rng = np.random.default_rng(seed)
    h = random_small_hier(7, 4, rng)
    path = tuple(int(v) for v in rng.permutation(7)[:5])
    sort_segment(path, 0, 5, h)


def test_non_degenerate_passes_through():
    h = random_small_hier(8, 1, np.random.default_rng(7))
    sentinel = Tour(tuple(h.order))
    if degenerate_cell(h) is None:
        assert reduce_degenerate(h, lambda inst: sentinel) is sentinel


def test_degenerate_base_case_n_is_k_plus_one():
    n = 6
    c = np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)
    c[0, :] = 3
    c[:, 0] = 3
    c[0, 0] = 0
    h = build_hierarchy(HopInstance(c, n - 1, well_scaled=True), seed=0)
    t = reduce_degenerate(h, lambda inst: pytest.fail("solver must not run"))
    assert t.is_hamiltonian(n)
    assert khop_cost(h.tilde, t, n - 1) == int(h.tilde.sum())


def test_degenerate_recursion_tours_everything():
    rng = np.random.default_rng(8)
    hits = 0
    for _ in range(60):
        h = random_small_hier(9, 4, rng, high=8)
        H = degenerate_cell(h)
        if H is None or len(H) <= h.k:
            continue
        hits += 1
        t = reduce_degenerate(h, lambda inst: Tour(tuple(inst.order)))
        assert t.covers(range(h.n))
    assert hits > 0
