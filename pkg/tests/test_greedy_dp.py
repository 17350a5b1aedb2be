import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from apriori_tsp.core import HopInstance, khop_cost
from apriori_tsp.generators import random_monotone_path, random_small_hier
from apriori_tsp.greedy_dp import (DpContext, best_ratio_path, cost_k_prime, greedy_cover,
                                   height, hop_padding, solve_hierarchical, weight_bound, weight_bound_seq,
                                   width)
from apriori_tsp.hierarchy import build_hierarchy
from apriori_tsp.oracles import brute_best_ratio, brute_hop_opt
from apriori_tsp.path_cover import (PathLevelPair, covered_elements, full_universe, is_feasible,
                                    newly_covered, pair_weight, path_khop, prune_cover)


def grouped(sizes=(4, 2), far=4, k=2):
    n = sum(sizes)
    c = np.full((n, n), far, dtype=np.int64)
    start = 0
    for s in sizes:
        c[start:start + s, start:start + s] = 0
        start += s
    return build_hierarchy(HopInstance(c, k, well_scaled=True), seed=0)


def forward_free(n, k):
    """Forward arcs cost 0, backward arcs 1: one level-1 cell, singletons below."""
    idx = np.arange(n)
    c = (idx[:, None] > idx[None, :]).astype(np.int64)
    return build_hierarchy(HopInstance(c, k, well_scaled=True), seed=0)


def small_cases(seed, ks=(1, 3), n_max=8):
    rng = np.random.default_rng(seed)
    k = int(rng.choice(ks))
    h = random_small_hier(int(rng.integers(k + 2, n_max + 1)), k, rng)
    U = rng.random((h.n, h.L)) < 0.7
    return h, U, rng


# heights and weights

def test_height_width_examples():
    assert (height(12, 3), width(12, 3)) == (2, 3)
    assert height(0, 3) == 3
    assert (height(7, 3), width(7, 3)) == (0, 0)
    assert height(-4, 3) == 2


def test_hop_padding():
    assert [hop_padding(k) for k in (1, 2, 3, 4, 7, 8)] == [(1, 1), (3, 2), (3, 2), (7, 3), (7, 3), (15, 4)]
    for k in range(1, 40):
        kp, g = hop_padding(k)
        assert k <= kp <= 2 * k and kp == 2**g - 1


def test_weight_bound_small_paths():
    h = random_small_hier(5, 1, np.random.default_rng(0))
    v0, v1 = h.order[:2]
    assert weight_bound((v0,), 0, h, 1) == h.D[0]
    assert weight_bound((v0, v1), 0, h, 1) == h.D[0] + 2 * h.tilde[v0, v1]


@given(st.integers(0, 10**6))
def test_weight_bound_inequalities(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    h = random_small_hier(int(rng.integers(k + 2, 12)), k, rng)
    lvl = int(rng.integers(1, h.L + 1))
    path = random_monotone_path(h, lvl, rng, 10)
    kp, gamma = hop_padding(k)
    w = pair_weight((path, lvl), h)
    ws = [weight_bound(path, q, h, lvl) for q in range(kp + 1)]
    assert all(w <= x for x in ws)
    assert min(ws) <= 4 * (gamma + 2) * w
    assert cost_k_prime(path, h) <= 4 * path_khop(h, path)


# profiles

def test_singleton_profile():
    h, U, _ = small_cases(1)
    ctx = DpContext(h, U, 1, h.order)
    v = ctx.offset + 2
    phi = ctx.single(v)
    assert phi == ctx.profile_of((v,))
    amin, amax, fmin, fmax, gmin, gmax, gam = phi
    assert amin == amax == v and set(fmin) <= {1} and set(gmax) <= {0}
    assert gam == sum(U[ctx.verts[v], lvl - 1] for lvl in range(1, h.L + 1))


def test_whole_cell_has_no_interior_term():
    h = grouped()
    U = full_universe(h)
    ctx = DpContext(h, U, 1, h.order)
    cell = max(h.cells(2), key=len)
    sub = tuple(ctx.offset + int(h.pos[v]) for v in cell)
    phi = ctx.profile_of(sub)
    direct = sum(U[v, lvl - 1] for v in cell for lvl in range(1, h.L + 1))
    assert phi[-1] == direct


def test_boundary_cell_adds_gap_and_outside():
    h = grouped()
    U = full_universe(h)
    ctx = DpContext(h, U, 1, h.order)
    cell = sorted(max(h.cells(2), key=len), key=lambda v: h.pos[v])
    p = (ctx.offset + int(h.pos[cell[0]]), ctx.offset + int(h.pos[cell[2]]))
    phi = ctx.profile_of(p)
    assert phi[2][0] >= h.k and phi[4][0] == 1
    # the group is a cell at levels 2 and 3; each adds one gap vertex and one outside vertex
    assert tuple(cell) in h.cells(3)
    assert ctx.xi(phi) - phi[-1] == 2 * (1 + 1)
    assert ctx.xi(phi) == newly_covered(((cell[0], cell[2]), 1), h, U)


def test_xi_zero_when_nothing_new():
    h, _, _ = small_cases(2)
    U = np.zeros((h.n, h.L), dtype=bool)
    ctx = DpContext(h, U, 1, h.order)
    assert ctx.xi(ctx.profile_of((ctx.offset,))) == 0


@given(st.integers(0, 10**6))
def test_xi_and_combine_exhaustive(seed):
    h, U, rng = small_cases(seed, n_max=7)
    for lstar in range(1, h.L + 1):
        for cell in h.cells(lstar):
            if len(cell) < 2:
                continue
            ctx = DpContext(h, U, lstar, cell)
            real = [i for i, v in enumerate(ctx.verts) if v >= 0]
            for r in range(1, len(real) + 1):
                for sub in itertools.combinations(real, r):
                    phi = ctx.profile_of(sub)
                    path = tuple(ctx.verts[i] for i in sub)
                    assert ctx.xi(phi) == newly_covered((path, lstar), h, U)
                    for cut in range(1, r):
                        assert ctx.combine(ctx.profile_of(sub[:cut]), ctx.profile_of(sub[cut:])) == phi
                    if r >= 3:
                        a, b = sorted(rng.choice(range(1, r), size=2, replace=False))
                        p1, p2, p3 = (ctx.profile_of(sub[:a]), ctx.profile_of(sub[a:b]),
                                      ctx.profile_of(sub[b:]))
                        assert ctx.combine(ctx.combine(p1, p2), p3) == ctx.combine(p1, ctx.combine(p2, p3))


def test_combine_adjacent_singleton_increments_f():
    h = grouped()
    ctx = DpContext(h, full_universe(h), 1, h.order)
    cell = sorted(max(h.cells(2), key=len), key=lambda v: h.pos[v])
    a, b = (ctx.offset + int(h.pos[v]) for v in cell[:2])
    left = ctx.profile_of((a,))
    out = ctx.combine(left, ctx.single(b))
    assert out[3][0] == left[3][0] + 1


def test_combine_disjoint_cells_keeps_boundaries():
    h = grouped()
    ctx = DpContext(h, full_universe(h), 1, h.order)
    cells = sorted(h.cells(2), key=lambda c: h.pos[c[0]])
    p1 = ctx.profile_of(tuple(ctx.offset + int(h.pos[v]) for v in cells[0]))
    p2 = ctx.profile_of(tuple(ctx.offset + int(h.pos[v]) for v in cells[1]))
    out = ctx.combine(p1, p2)
    assert out[2] == p1[2] and out[4] == p1[4] and out[3] == p2[3] and out[5] == p2[5]


def test_combine_rejects_overlap():
    h, U, _ = small_cases(3)
    ctx = DpContext(h, U, 1, h.order)
    with pytest.raises(ValueError):
        ctx.combine(ctx.single(5), ctx.single(5))


# tree-solution DP

def test_block_k_prime_one():
    h = random_small_hier(6, 1, np.random.default_rng(4))
    ctx = DpContext(h, full_universe(h), 1, h.order)
    x, y = 1, 4
    got = ctx.block_dp(x, y)
    for phi, sol in got.items():
        (v,) = sol.vertices
        assert sol.cost == 2 * (ctx.cost[x][v] + ctx.cost[v][y])


def test_block_three_interior_vertices():
    h = random_small_hier(7, 3, np.random.default_rng(5))
    ctx = DpContext(h, full_universe(h), 1, h.order)
    x, y = ctx.offset, ctx.offset + 4
    (sol,) = ctx.block_dp(x, y).values()
    assert sol.vertices == (x + 1, x + 2, x + 3)
    assert sol.cost == weight_bound_seq(ctx.cost, (x,) + sol.vertices + (y,), 0, ctx.gamma, 0)


@given(st.integers(0, 10**6))
def test_block_dp_matches_brute(seed):
    h, U, _ = small_cases(seed, n_max=7)
    for lstar in range(1, h.L + 1):
        for cell in h.cells(lstar):
            if len(cell) < 2:
                continue
            ctx = DpContext(h, U, lstar, cell)
            for x in range(ctx.m):
                for y in range(x + ctx.kp + 1, min(ctx.m, x + 8)):
                    got = ctx.block_dp(x, y)
                    want = ctx.brute_block(x, y)
                    assert {p: s.cost for p, s in got.items()} == {p: s.cost for p, s in want.items()}
                    for phi, sol in got.items():
                        seq = (x,) + sol.vertices + (y,)
                        assert sol.cost == weight_bound_seq(ctx.cost, seq, 0, ctx.gamma, 0)
                        assert ctx.profile_of(sol.vertices) == phi


# ratio oracle and greedy

def test_only_deepest_elements_left():
    h, _, _ = small_cases(6)
    U = np.zeros((h.n, h.L), dtype=bool)
    v = h.order[2]
    U[v, h.L - 1] = True
    pair, ratio = best_ratio_path(h, U)
    assert pair.path == (v,)
    assert ratio == Fraction(pair_weight(pair, h), 1)


def exact_best_ratio(h, U):
    best = None
    for lstar in range(1, h.L + 1):
        for cell in h.cells(lstar):
            _, r = brute_best_ratio(h, U, lstar, cell)
            if r is not None and (best is None or r < best):
                best = r
    return best


@given(st.integers(0, 10**6))
def test_ratio_within_factor_of_exhaustive(seed):
    h, U, _ = small_cases(seed)
    if not U.any():
        return
    pair, ratio = best_ratio_path(h, U)
    _, gamma = hop_padding(h.k)
    assert ratio == Fraction(pair_weight(pair, h), newly_covered(pair, h, U))
    assert ratio <= 4 * (gamma + 2) * exact_best_ratio(h, U)


def test_responsibility_pair_is_chosen():
    h = grouped()
    cell = max(h.cells(2), key=len)
    U = np.zeros((h.n, h.L), dtype=bool)
    U[list(cell), 0] = True
    pair, _ = best_ratio_path(h, U)
    assert sum(v in cell for v in pair.path) >= h.k


def test_forward_free_path_survives_pruning():
    h = forward_free(6, 2)
    cover = greedy_cover(h)
    assert is_feasible(cover, h)
    assert prune_cover(cover, h) == [PathLevelPair(h.order, 1)]


def optimal_cover_weight(h):
    """Min-weight cover by DP over covered-element bitmasks, all monotone pairs enumerated."""
    n, L = h.n, h.L
    masks = {}
    for lvl in range(1, L + 1):
        for cell in h.cells(lvl):
            for r in range(1, len(cell) + 1):
                for path in itertools.combinations(cell, r):
                    bits = covered_elements((path, lvl), h).ravel()
                    m = int(sum(1 << i for i in np.flatnonzero(bits)))
                    w = pair_weight((path, lvl), h)
                    if m not in masks or w < masks[m]:
                        masks[m] = w
    full = (1 << (n * L)) - 1
    inf = float("inf")
    best = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for s in frontier:
            for m, w in masks.items():
                t = s | m
                if t != s and best[s] + w < best.get(t, inf):
                    best[t] = best[s] + w
                    nxt.append(t)
        frontier = nxt
    return best[full]


@pytest.mark.parametrize("seed", range(6))
def test_greedy_against_optimal_cover(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.choice([1, 3]))
    h = random_small_hier(int(rng.integers(k + 2, 6)), k, rng)
    cover = greedy_cover(h)
    assert is_feasible(cover, h)
    _, gamma = hop_padding(k)
    elements = h.n * h.L
    harmonic = sum(Fraction(1, i) for i in range(1, elements + 1))
    got = sum(pair_weight(p, h) for p in cover)
    assert got <= 4 * (gamma + 2) * harmonic * optimal_cover_weight(h)


@given(st.integers(0, 10**6))
def test_solve_hierarchical_end_to_end(seed):
    h, _, _ = small_cases(seed, ks=(1, 2, 3))
    tour = solve_hierarchical(h)
    assert tour.is_hamiltonian(h.n)
    assert khop_cost(h.tilde, tour, h.k) >= brute_hop_opt(h)[0]


def test_solve_hierarchical_degenerate_base():
    n = 4
    c = np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)
    h = build_hierarchy(HopInstance(c, n - 1, well_scaled=True), seed=0)
    assert solve_hierarchical(h).is_hamiltonian(n)


def test_memo_cap_aborts_and_falls_back():
    h = random_small_hier(8, 3, np.random.default_rng(11))
    trace = []
    cover = greedy_cover(h, memo_cap=1, trace=trace)
    assert is_feasible(cover, h)
    assert any(row["aborted"] for row in trace)
