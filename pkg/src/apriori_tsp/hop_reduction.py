"""Reduce a general a priori instance to well-scaled Hop-ATSP and map tours back."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .baseline import atsp_tour, depot_probs, join_at_depot, pick_best
from .core import (AprioriInstance, HopInstance, Tour, expected_cost_exact, metric_closure,
                   shortcut_to_hamiltonian)
from .errors import BudgetError, ValidationError
from .oracles import brute_apriori_opt

COPY_CAP = 50000
ENUM_LIMIT = 9
METRIC_CHECK_LIMIT = 200


@dataclass(frozen=True)
class ClusterMap:
    projection: tuple[int, ...]
    clusters: tuple[tuple[int, ...], ...]
    epsilon: float


@dataclass(frozen=True)
class ScaleRecord:
    K: Fraction | float
    diameter: float
    n: int


def copy_count(p: float, epsilon: float) -> int:
    """Smallest k with (1 - eps/2)^k <= 1 - p/2."""
    x = math.log1p(-p / 2) / math.log1p(-epsilon / 2)
    return max(1, math.ceil(x - 1e-12))


def uniformize(inst: AprioriInstance, epsilon: float, min_copies: dict[int, int] | None = None,
               copy_cap: int = COPY_CAP):
    """Replace every vertex by co-located copies, each active with probability eps/2."""
    if not 0 < epsilon <= 1:
        raise ValidationError("epsilon must lie in (0, 1]")
    if np.any(inst.prob < epsilon * (1 - 1e-12)):
        raise ValidationError("every probability must be at least epsilon")
    min_copies = min_copies or {}
    counts = [max(copy_count(float(p), epsilon), min_copies.get(v, 0)) for v, p in enumerate(inst.prob)]
    total = sum(counts)
    if total > copy_cap:
        raise BudgetError(f"uniformization needs {total} copies, cap is {copy_cap}")
    proj = np.repeat(np.arange(inst.n), counts)
    clusters, start = [], 0
    for cnt in counts:
        clusters.append(tuple(range(start, start + cnt)))
        start += cnt
    cost = inst.cost[np.ix_(proj, proj)]
    uinst = AprioriInstance(cost, np.full(total, epsilon / 2), metric=False)
    return uinst, ClusterMap(tuple(int(v) for v in proj), tuple(clusters), epsilon)


def _runs(seq: list[int], proj) -> list[tuple[int, int, int]]:
    """Maximal cyclic runs as (cluster, start index, length)."""
    m = len(seq)
    labels = [proj[v] for v in seq]
    if len(set(labels)) == 1:
        return [(labels[0], 0, m)]
    shift = next(i for i in range(m) if labels[i] != labels[i - 1])
    runs, i = [], 0
    while i < m:
        lab, j = labels[(shift + i) % m], i
        while j < m and labels[(shift + j) % m] == lab:
            j += 1
        runs.append((lab, (shift + i) % m, j - i))
        i = j
    return runs


def consolidate_clusters(uinst: AprioriInstance, cmap: ClusterMap, tour: Tour,
                         check: bool = True) -> Tour:
    """Merge split clusters two runs at a time, keeping the cheaper of the two merge orders."""
    seq = list(tour.visits)
    if len(seq) != len(cmap.projection) or set(seq) != set(range(len(cmap.projection))):
        raise ValidationError("tour must be Hamiltonian on the copy instance")
    proj = cmap.projection
    cur = expected_cost_exact(uinst, tour)
    while True:
        runs = _runs(seq, proj)
        seen, pair = {}, None
        for lab, start, length in runs:
            if lab in seen:
                pair = (seen[lab], (start, length))
                break
            seen[lab] = (start, length)
        if pair is None:
            return Tour(tuple(seq))
        (s1, l1), (s2, l2) = pair
        rot = seq[s1:] + seq[:s1]
        off = (s2 - s1) % len(seq)
        r1, p, r2, q = rot[:l1], rot[l1:off], rot[off:off + l2], rot[off + l2:]
        first = r1 + r2 + p + q
        second = r2 + r1 + q + p
        e1 = expected_cost_exact(uinst, Tour(tuple(first)))
        e2 = expected_cost_exact(uinst, Tour(tuple(second)))
        seq, best = (first, e1) if e1 <= e2 else (second, e2)
        if check and best > cur + 1e-9 * max(1.0, cur):
            raise AssertionError(f"cluster merge increased expected cost {cur} -> {best}")
        cur = best


def project_tour(cmap: ClusterMap, tour: Tour) -> Tour:
    out = []
    for v in tour.visits:
        c = cmap.projection[v]
        if not out or out[-1] != c:
            out.append(c)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return Tour(tuple(out))


def to_hop(uinst: AprioriInstance, check_metric: bool | None = None) -> HopInstance:
    delta = float(uinst.prob[0])
    if not np.all(uinst.prob == delta) or delta <= 0:
        raise ValidationError("to_hop needs a uniform positive probability")
    k = math.floor(1.0 / delta + 1e-9)
    if k >= uinst.n:
        raise ValidationError(f"hop distance {k} must be below n={uinst.n}")
    if check_metric is None:
        check_metric = uinst.n <= METRIC_CHECK_LIMIT
    return HopInstance(uinst.cost, k, check_metric=check_metric)


def well_scale(inst: HopInstance):
    """Divide by K = diam/(2n^3), round down, and take the metric closure."""
    n = inst.n
    c = inst.cost
    diam = c.max()
    if diam <= 0:
        raise ValidationError("well_scale needs a positive diameter")
    top = 2 * n**3
    if c.dtype.kind in "iu":
        scaled = (c.astype(object) * top // int(diam)).astype(np.int64)
        K: Fraction | float = Fraction(int(diam), top)
    else:
        scaled = np.floor(c * top / diam).astype(np.int64)
        K = float(diam) / top
    closed = metric_closure(scaled)
    out = HopInstance(closed, inst.k, well_scaled=True, check_metric=n <= METRIC_CHECK_LIMIT)
    return out, ScaleRecord(K, float(diam), n)


HopSolver = Callable[[HopInstance], Tour]


def reduce_and_solve(inst: AprioriInstance, hop_solver: HopSolver, seed: int,
                     epsilon: float | None = None, enum_limit: int = ENUM_LIMIT,
                     copy_cap: int = COPY_CAP, return_trace: bool = False):
    """Depot loop around the threshold split; the heavy side is enumerated or solved through Hop-ATSP."""
    n = inst.n
    trace: list[dict] = []
    if n == 1 or float(np.sum(inst.prob)) <= 0.5:
        trace.append({"stage": "tiny", "n": n})
        tour = Tour(tuple(range(n)))
        return (tour, trace) if return_trace else tour
    closure = metric_closure(inst.cost)
    eps = 1.0 / n if epsilon is None else epsilon

    def heavy_tour(heavy: list[int], p: np.ndarray, depot: int, row: dict) -> Tour:
        sub = AprioriInstance(closure[np.ix_(heavy, heavy)], p[heavy])
        if len(heavy) <= enum_limit:
            row["stage"] = "enumerate"
            local = brute_apriori_opt(sub)[1]
            return Tour(tuple(heavy[i] for i in local.visits))
        row["stage"] = "hop"
        pad = {heavy.index(depot): 4 * n}
        uinst, cmap = uniformize(sub, eps, pad, copy_cap)
        hop = to_hop(uinst, check_metric=False)
        scaled, rec = well_scale(hop)
        row.update(copies=uinst.n, delta=float(uinst.prob[0]), k=hop.k, K=float(rec.K))
        raw = hop_solver(scaled)
        ham = shortcut_to_hamiltonian(scaled, raw)
        merged = consolidate_clusters(uinst, cmap, ham)
        local = project_tour(cmap, merged)
        return Tour(tuple(heavy[i] for i in local.visits))

    def candidates():
        for v in range(n):
            p = depot_probs(inst, v)
            heavy = [u for u in range(n) if p[u] >= eps]
            light = sorted(set(range(n)) - set(heavy) | {v})
            row = {"depot": v, "heavy": len(heavy), "light": len(light) - 1}
            t = heavy_tour(heavy, p, v, row)
            trace.append(row)
            yield v, join_at_depot(t, Tour(tuple(light)), v)

    _, _, tour = pick_best(inst, candidates(), seed)
    return (tour, trace) if return_trace else tour


def atsp_hop_solver(inst: HopInstance) -> Tour:
    """Cheap Hop-ATSP heuristic: a good ordinary tour on the hop costs."""
    return atsp_tour(inst.cost, range(inst.n))
