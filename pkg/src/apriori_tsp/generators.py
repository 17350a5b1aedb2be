"""Seeded random instance families used by tests, examples and the verify command."""

from __future__ import annotations

import numpy as np

from .core import AprioriInstance, HopInstance, metric_closure
from .hierarchy import HierInstance, build_hierarchy
from .hop_reduction import well_scale


def random_metric(n: int, rng: np.random.Generator, low: int = 1, high: int = 100) -> np.ndarray:
    """Asymmetric integer metric: closure of uniform random arc costs."""
    c = rng.integers(low, high + 1, size=(n, n))
    np.fill_diagonal(c, 0)
    return metric_closure(c.astype(np.int64))


def random_apriori(n: int, rng: np.random.Generator, p_low: float = 0.0, p_high: float = 1.0) -> AprioriInstance:
    return AprioriInstance(random_metric(n, rng), rng.uniform(p_low, p_high, n), metric=True)


def random_well_scaled(n: int, k: int, rng: np.random.Generator) -> HopInstance:
    return well_scale(HopInstance(random_metric(n, rng), k))[0]


def random_small_hier(n: int, k: int, rng: np.random.Generator, high: int = 3,
                      seed: int | None = None) -> HierInstance:
    """Hierarchy over a metric with costs in {0..high}; small `high` keeps the depth L small."""
    c = random_metric(n, rng, 0, high)
    while c.max() == 0:
        c = random_metric(n, rng, 0, high)
    inst = HopInstance(c, k, well_scaled=True)
    s = int(rng.integers(2**31)) if seed is None else seed
    return build_hierarchy(inst, s)


def random_monotone_path(inst: HierInstance, level: int, rng: np.random.Generator,
                         max_len: int | None = None) -> tuple[int, ...]:
    """Random nonempty increasing subsequence of a random cell at `level`."""
    cells = inst.cells(level)
    cell = cells[int(rng.integers(len(cells)))]
    top = len(cell) if max_len is None else min(len(cell), max_len)
    size = int(rng.integers(1, top + 1))
    idx = np.sort(rng.choice(len(cell), size=size, replace=False))
    return tuple(cell[i] for i in idx)


def random_feasible_cover(inst: HierInstance, rng: np.random.Generator, extra: int = 4):
    """A few random pairs, then singletons at the shallowest level each vertex still lacks."""
    from .path_cover import PathLevelPair, covered_elements

    pairs = []
    for _ in range(int(rng.integers(0, extra + 1))):
        lvl = int(rng.integers(1, inst.L + 1))
        pairs.append(PathLevelPair(random_monotone_path(inst, lvl, rng), lvl))
    got = np.zeros((inst.n, inst.L), dtype=bool)
    for p in pairs:
        got |= covered_elements(p, inst)
    for v in range(inst.n):
        missing = np.flatnonzero(~got[v])
        if missing.size:
            p = PathLevelPair((v,), int(missing[0]) + 1)
            pairs.append(p)
            got |= covered_elements(p, inst)
    return pairs
