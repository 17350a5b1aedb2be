"""Brute-force ground truth at desk scale. Every oracle refuses inputs beyond its budget."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import AprioriInstance, Tour, shortcut_costs
from .errors import BudgetError


@dataclass(frozen=True)
class OracleBudget:
    apriori: int = 9
    held_karp: int = 13
    hop: int = 9
    ratio_path: int = 8
    subset_enum: int = 12


DEFAULT_BUDGET = OracleBudget()


def _check(size: int, limit: int, what: str) -> None:
    if size > limit:
        raise BudgetError(f"{what} oracle limited to size {limit}, got {size}")


def held_karp(cost, subset=None, budget: OracleBudget = DEFAULT_BUDGET):
    """Exact ATSP on `subset` by bitmask DP; returns (value, Tour in original labels)."""
    c_full = np.asarray(cost)
    verts = list(range(c_full.shape[0])) if subset is None else sorted(int(v) for v in subset)
    s = len(verts)
    _check(s, budget.held_karp, "Held-Karp")
    if s == 0:
        raise BudgetError("Held-Karp needs a non-empty subset")
    integral = c_full.dtype.kind in "iu"
    if s == 1:
        return (0 if integral else 0.0), Tour((verts[0],))
    c = c_full[np.ix_(verts, verts)].astype(float)
    m = s - 1
    full = 1 << m
    dp = np.full((full, m), np.inf)
    parent = np.full((full, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = c[0, j + 1]
    masks = np.arange(full)
    popcount = np.array([bin(x).count("1") for x in range(full)])
    for size in range(2, m + 1):
        layer = masks[popcount == size]
        for j in range(m):
            sel = layer[(layer >> j) & 1 == 1]
            prev = sel ^ (1 << j)
            cand = dp[prev] + c[1:, j + 1][None, :]
            best = np.argmin(cand, axis=1)
            dp[sel, j] = cand[np.arange(sel.size), best]
            parent[sel, j] = best
    closing = dp[full - 1] + c[1:, 0]
    last = int(np.argmin(closing))
    value = float(closing[last])
    order = []
    mask, j = full - 1, last
    while j >= 0:
        order.append(j + 1)
        pj = int(parent[mask, j])
        mask ^= 1 << j
        j = pj
    order.append(0)
    order.reverse()
    tour = Tour(tuple(verts[i] for i in order))
    return (int(round(value)) if integral else value), tour


def brute_tsp(cost, subset=None, budget: OracleBudget = DEFAULT_BUDGET):
    verts = list(range(np.shape(cost)[0])) if subset is None else list(subset)
    if len(verts) < 2:
        raise BudgetError("brute_tsp needs at least two vertices")
    return held_karp(cost, verts, budget)


def permutation_tsp(cost, subset):
    """Full permutation enumeration; independent second route for Held-Karp tests."""
    c = np.asarray(cost)
    verts = sorted(subset)
    best = None
    for perm in itertools.permutations(verts[1:]):
        seq = (verts[0],) + perm
        val = sum(c[seq[i], seq[(i + 1) % len(seq)]] for i in range(len(seq)))
        if best is None or val < best[0]:
            best = (val, Tour(seq))
    return best


def _all_cycles(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros((1, 1), dtype=np.int64)
    rest = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    return np.hstack([np.zeros((rest.shape[0], 1), dtype=np.int64), rest])


def _expected_many(c: np.ndarray, p: np.ndarray, perms: np.ndarray) -> np.ndarray:
    rows, n = perms.shape
    pv = p[perms]
    q = 1.0 - pv
    carry = np.ones((rows, n))
    total = np.zeros(rows)
    for d in range(1, n):
        shifted = np.roll(perms, -d, axis=1)
        ps = np.roll(pv, -d, axis=1)
        total += np.sum(c[perms, shifted] * pv * ps * carry, axis=1)
        carry = carry * np.roll(q, -d, axis=1)
    return total


def brute_apriori_opt(inst: AprioriInstance, budget: OracleBudget = DEFAULT_BUDGET):
    """Minimum exact expected cost over all (n-1)! cyclic orders; first minimum in lexicographic order."""
    _check(inst.n, budget.apriori, "a priori")
    perms = _all_cycles(inst.n)
    vals = _expected_many(inst.cost.astype(float), inst.prob, perms)
    i = int(np.argmin(vals))
    return float(vals[i]), Tour(tuple(perms[i]))


def _khop_many(c: np.ndarray, perms: np.ndarray, k: int) -> np.ndarray:
    total = np.zeros(perms.shape[0], dtype=c.dtype)
    for d in range(1, k + 1):
        total = total + np.sum(c[perms, np.roll(perms, -d, axis=1)], axis=1)
    return total


def brute_hop_opt(inst, budget: OracleBudget = DEFAULT_BUDGET):
    """Minimum k-hop cost over Hamiltonian cycles; uses the derived cost for hierarchical instances."""
    c = getattr(inst, "tilde", None)
    if c is None:
        c = inst.cost
    n = c.shape[0]
    _check(n, budget.hop, "hop")
    perms = _all_cycles(n)
    vals = _khop_many(np.asarray(c), perms, inst.k)
    i = int(np.argmin(vals))
    return vals[i].item(), Tour(tuple(perms[i]))


def subset_matrix(n: int) -> np.ndarray:
    """All 2^n activation patterns as a boolean matrix, row r encoding bit mask r."""
    masks = np.arange(1 << n)
    return (masks[:, None] >> np.arange(n)[None, :]) & 1 == 1


def subset_probs(prob: np.ndarray, act: np.ndarray) -> np.ndarray:
    p = np.asarray(prob, dtype=float)
    return np.prod(np.where(act, p[None, :], 1.0 - p[None, :]), axis=1)


def expected_cost_enum(inst: AprioriInstance, tour: Tour, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Sum over all 2^n activation sets of P[A] times the shortcut tour cost."""
    _check(inst.n, budget.subset_enum, "subset enumeration")
    act = subset_matrix(inst.n)
    return float(np.dot(subset_probs(inst.prob, act), shortcut_costs(inst.cost, act, tour)))


def expected_tsp_enum(inst: AprioriInstance, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """E[TSP(A, c)] by subset-weighted Held-Karp."""
    _check(inst.n, min(budget.subset_enum, budget.held_karp), "subset enumeration")
    act = subset_matrix(inst.n)
    weights = subset_probs(inst.prob, act)
    total = 0.0
    for row, w in zip(act, weights):
        members = np.flatnonzero(row)
        if members.size >= 2 and w > 0:
            total += w * float(held_karp(inst.cost, members, budget)[0])
    return total


def brute_best_ratio(inst, uncovered, level: int, cell, budget: OracleBudget = DEFAULT_BUDGET):
    """Exact min of weight / newly covered over all nonempty monotone paths in `cell` at `level`.

    `cell` is an iterable of vertices forming one cell of that level. Returns
    ((path, level), ratio) with ratio a Fraction, or (None, None) if no path covers anything new.
    Ties go to smaller weight, then lexicographic position sequence.
    """
    from .path_cover import newly_covered, pair_weight

    members = sorted(cell, key=lambda v: inst.pos[v])
    _check(len(members), budget.ratio_path, "ratio-path")
    best = None
    for r in range(1, len(members) + 1):
        for path in itertools.combinations(members, r):
            gain = newly_covered((path, level), inst, uncovered)
            if gain == 0:
                continue
            w = pair_weight((path, level), inst)
            key = (Fraction(w, gain), w, tuple(inst.pos[v] for v in path))
            if best is None or key < best[0]:
                best = (key, (tuple(path), level))
    if best is None:
        return None, None
    return best[1], best[0][0]
