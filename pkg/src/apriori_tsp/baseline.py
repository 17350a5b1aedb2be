"""The O(sqrt n) baseline: depot guessing, the tiny-activation shortcut and a threshold split."""

from __future__ import annotations

import math

import numpy as np

from .core import AprioriInstance, Tour, expected_cost_exact, expected_cost_mc
from .errors import ValidationError
from .oracles import held_karp

EXACT_ATSP_LIMIT = 13
EXACT_EVAL_LIMIT = 18
MC_EVAL_SAMPLES = 20000


def atsp_mode(size: int) -> str:
    return "exact" if size <= EXACT_ATSP_LIMIT else "heuristic"


def nearest_neighbor(cost: np.ndarray, verts: list[int], start: int) -> list[int]:
    vs = np.asarray(verts)
    sub = np.asarray(cost, dtype=float)[np.ix_(vs, vs)]
    free = np.ones(vs.size, dtype=bool)
    cur = int(np.flatnonzero(vs == start)[0])
    free[cur] = False
    order = [cur]
    for _ in range(vs.size - 1):
        row = np.where(free, sub[cur], np.inf)
        cur = int(np.argmin(row))
        free[cur] = False
        order.append(cur)
    return [int(vs[i]) for i in order]


def atsp_tour(cost, subset) -> Tour:
    """Hamiltonian cycle on `subset`: Held-Karp up to 13 vertices, else best nearest-neighbor start."""
    c = np.asarray(cost)
    verts = sorted(int(v) for v in subset)
    if not verts:
        raise ValidationError("atsp_tour needs a non-empty subset")
    if len(verts) == 1:
        return Tour((verts[0],))
    if atsp_mode(len(verts)) == "exact":
        return held_karp(c, verts)[1]
    best = None
    for s in verts:
        order = nearest_neighbor(c, verts, s)
        val = sum(c[order[i], order[(i + 1) % len(order)]] for i in range(len(order)))
        if best is None or val < best[0]:
            best = (val, order)
    return Tour(tuple(best[1]))


def rotate_to(tour: Tour, v: int) -> tuple[int, ...]:
    i = tour.visits.index(v)
    return tour.visits[i:] + tour.visits[:i]


def join_at_depot(first: Tour, second: Tour, depot: int) -> Tour:
    """Both cycles pass through the depot; splice them there into one cycle."""
    a = rotate_to(first, depot)
    b = rotate_to(second, depot)
    return Tour(a + b[1:])


def evaluate(inst: AprioriInstance, tour: Tour, seed: int) -> float:
    if inst.n <= EXACT_EVAL_LIMIT:
        return expected_cost_exact(inst, tour)
    return expected_cost_mc(inst, tour, MC_EVAL_SAMPLES, seed)[0]


def pick_best(inst: AprioriInstance, candidates, seed: int):
    """Choose the cheapest (cost, depot index) among candidate tours."""
    best = None
    for depot, tour in candidates:
        val = evaluate(inst, tour, seed)
        if best is None or (val, depot) < (best[0], best[1]):
            best = (val, depot, tour)
    return best


def depot_probs(inst: AprioriInstance, depot: int) -> np.ndarray:
    p = np.array(inst.prob)
    p[depot] = 1.0
    return p


def sqrt_approx(inst: AprioriInstance, seed: int, return_trace: bool = False):
    n = inst.n
    trace = []
    if n == 1 or float(np.sum(inst.prob)) <= 0.5:
        tour = Tour(tuple(range(n)))
        return (tour, trace) if return_trace else tour

    def candidates():
        threshold = 1.0 / math.sqrt(n)
        for v in range(n):
            p = depot_probs(inst, v)
            heavy = [u for u in range(n) if p[u] >= threshold]
            light = sorted(set(range(n)) - set(heavy) | {v})
            trace.append({"depot": v, "heavy": len(heavy), "light": len(light) - 1,
                          "mode": atsp_mode(len(heavy))})
            yield v, join_at_depot(atsp_tour(inst.cost, heavy), Tour(tuple(light)), v)

    _, _, tour = pick_best(inst, candidates(), seed)
    return (tour, trace) if return_trace else tour
