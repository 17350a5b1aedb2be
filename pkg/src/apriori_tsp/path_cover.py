"""Path-level pairs, the covering view of Hop-ATSP, and turning covers into tours."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Tour, khop_cost, shortcut_to_hamiltonian
from .errors import ValidationError
from .hierarchy import HierInstance


@dataclass(frozen=True)
class PathLevelPair:
    path: tuple[int, ...]
    level: int

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(v) for v in self.path))
        object.__setattr__(self, "level", int(self.level))


def as_pair(pair) -> PathLevelPair:
    return pair if isinstance(pair, PathLevelPair) else PathLevelPair(*pair)


def check_pair(pair, inst: HierInstance) -> PathLevelPair:
    """Raise unless the path is nonempty, strictly increasing under the order, and inside one cell."""
    pair = as_pair(pair)
    if not pair.path:
        raise ValidationError("a path-level pair needs a nonempty path")
    if not 1 <= pair.level <= inst.L:
        raise ValidationError(f"level {pair.level} outside 1..{inst.L}")
    pos = [int(inst.pos[v]) for v in pair.path]
    if any(a >= b for a, b in zip(pos, pos[1:])):
        raise ValidationError("path must be monotone (strictly increasing positions)")
    a, b = inst.cell_span(pair.path[0], pair.level)
    if not (a <= pos[0] and pos[-1] < b):
        raise ValidationError("path leaves the cell of its level")
    return pair


def path_khop(inst: HierInstance, path: Sequence[int]) -> int:
    return khop_cost(inst.tilde, Tour(tuple(path), closed=False), inst.k)


def pair_weight(pair, inst: HierInstance) -> int:
    pair = check_pair(pair, inst)
    return path_khop(inst, pair.path) + inst.k**2 * inst.D[pair.level - 1]


def full_universe(inst: HierInstance) -> np.ndarray:
    """Uncovered-set bit matrix U[v, l-1]; initially every element is uncovered."""
    return np.ones((inst.n, inst.L), dtype=bool)


def covered_elements(pair, inst: HierInstance) -> np.ndarray:
    """Bit matrix of all (v, l') covered by the pair, directly or by responsibility."""
    pair = as_pair(pair)
    out = np.zeros((inst.n, inst.L), dtype=bool)
    path = list(pair.path)
    out[np.ix_(path, range(pair.level - 1, inst.L))] = True
    pos = inst.pos[path]
    for lp in range(pair.level, inst.L):
        ids, counts = np.unique(inst.cell_index[lp, pos], return_counts=True)
        bs = inst.boundaries[lp]
        for cid in ids[counts >= inst.k]:
            members = list(inst.order[bs[cid]:bs[cid + 1]])
            out[members, lp - 1] = True
    return out


def covers(pair, element: tuple[int, int], inst: HierInstance) -> bool:
    pair = as_pair(pair)
    v, lp = element
    if v in pair.path and pair.level <= lp:
        return True
    if pair.level <= lp < inst.L:
        a, b = inst.cell_span(v, lp + 1)
        return sum(a <= inst.pos[u] < b for u in pair.path) >= inst.k
    return False


def newly_covered(pair, inst: HierInstance, uncovered: np.ndarray) -> int:
    return int(np.count_nonzero(covered_elements(pair, inst) & uncovered))


def cover_weight(cover: Iterable, inst: HierInstance) -> int:
    return sum(pair_weight(p, inst) for p in cover)


def is_feasible(cover: Iterable, inst: HierInstance) -> bool:
    """Every element of V x [L] covered by some pair."""
    got = np.zeros((inst.n, inst.L), dtype=bool)
    for p in cover:
        got |= covered_elements(p, inst)
    return bool(got.all())


def is_feasible_conditions(cover: Iterable, inst: HierInstance) -> bool:
    """Second route: every vertex is on a path, and each cell below level 1 is either
    fully visited by shallower pairs or has a shallower pair with k vertices inside it."""
    pairs = [as_pair(p) for p in cover]
    on_path = set().union(*[set(p.path) for p in pairs]) if pairs else set()
    if on_path != set(range(inst.n)):
        return False
    for lvl in range(2, inst.L + 1):
        shallow = [p for p in pairs if p.level < lvl]
        visited = set().union(*[set(p.path) for p in shallow]) if shallow else set()
        for H in inst.cells(lvl):
            if set(H) <= visited:
                continue
            cell = set(H)
            if not any(sum(v in cell for v in p.path) >= inst.k for p in shallow):
                return False
    return True


def k_run_start(inst: HierInstance, walk: Sequence[int], span: tuple[int, int]) -> int | None:
    """Earliest index s with walk[s:s+k] inside the position span."""
    a, b = span
    run = 0
    for i, v in enumerate(walk):
        run = run + 1 if a <= inst.pos[v] < b else 0
        if run >= inst.k:
            return i - inst.k + 1
    return None


def walk_insert(main: Sequence[int], sub_start: int, q: Sequence[int], level: int,
                inst: HierInstance) -> tuple[int, ...]:
    """Splice q right before main[sub_start]; asserts the insertion cost bound."""
    main, q = tuple(main), tuple(q)
    if not q:
        return main
    k = inst.k
    run = main[sub_start:sub_start + k]
    if len(run) < k:
        raise ValidationError("insertion point needs k following visits")
    span = inst.cell_span(run[0], level)
    if not all(span[0] <= inst.pos[v] < span[1] for v in run + q):
        raise ValidationError("the k-run and the inserted walk must share one cell")
    out = main[:sub_start] + q + main[sub_start:]
    before = path_khop(inst, main) + path_khop(inst, q) + 2 * k * k * inst.D[level - 1]
    after = path_khop(inst, out)
    if after > before:
        raise AssertionError(f"walk insertion bound violated: {after} > {before}")
    return out


def prune_cover(cover: Sequence, inst: HierInstance) -> list[PathLevelPair]:
    """Drop pairs, most expensive first, while the cover stays feasible."""
    pairs = [check_pair(p, inst) for p in cover]
    masks = [covered_elements(p, inst) for p in pairs]
    count = np.sum(masks, axis=0) if masks else np.zeros((inst.n, inst.L), dtype=int)
    if not np.all(count > 0):
        raise ValidationError("cover is infeasible")
    alive = [True] * len(pairs)
    weights = [pair_weight(p, inst) for p in pairs]
    for i in sorted(range(len(pairs)), key=lambda i: (-weights[i], i)):
        if np.all(count[masks[i]] >= 2):
            alive[i] = False
            count = count - masks[i]
    return [p for p, a in zip(pairs, alive) if a]


def cover_to_tour(cover: Sequence, inst: HierInstance, trace: list | None = None) -> Tour:
    """Insert every pair into a responsible shallower pair, deepest first, then chain the roots."""
    original = [check_pair(p, inst) for p in cover]
    bound = 2 * cover_weight(original, inst)
    pairs = prune_cover(original, inst)
    k = inst.k
    walks = {i: p.path for i, p in enumerate(pairs)}
    level = {i: p.level for i, p in enumerate(pairs)}
    parent: dict[int, int] = {}
    for i, p in enumerate(pairs):
        if p.level == 1:
            continue
        a, b = inst.cell_span(p.path[0], p.level)
        cands = [j for j, o in enumerate(pairs)
                 if o.level < p.level and sum(a <= inst.pos[v] < b for v in o.path) >= k]
        if not cands:
            raise AssertionError("minimal cover has a pair without a responsible parent")
        parent[i] = min(cands, key=lambda j: (pairs[j].level, int(inst.pos[pairs[j].path[0]]), j))

    def potential() -> int:
        return sum(path_khop(inst, walks[i]) + 2 * k * k * inst.D[level[i] - 1] for i in walks)

    pot = potential()
    while parent:
        leaf = min(parent, key=lambda i: (-level[i], i))
        par = parent.pop(leaf)
        span = inst.cell_span(walks[leaf][0], level[leaf])
        s = k_run_start(inst, walks[par], span)
        if s is None:
            raise AssertionError("parent walk has no k-run inside the child's cell")
        walks[par] = walk_insert(walks[par], s, walks.pop(leaf), level[leaf], inst)
        new_pot = potential()
        if new_pot > pot:
            raise AssertionError("cover-to-tour potential increased")
        pot = new_pot
        if trace is not None:
            trace.append({"child": leaf, "parent": par, "potential": pot})
    roots = sorted(walks, key=lambda i: (int(inst.pos[walks[i][0]]), i))
    tour = Tour(tuple(v for i in roots for v in walks[i]))
    if not tour.covers(range(inst.n)):
        raise AssertionError("tour misses a vertex")
    cost = khop_cost(inst.tilde, tour, k)
    if cost > bound:
        raise AssertionError(f"tour k-hop cost {cost} exceeds twice the cover weight {bound}")
    return tour


def sort_segment(path: Sequence[int], start: int, stop: int, inst: HierInstance) -> Tour:
    """Sort path[start:stop] by position; for paths of at most k+1 vertices the k-hop cost cannot rise."""
    path = tuple(path.visits if isinstance(path, Tour) else path)
    seg = sorted(path[start:stop], key=lambda v: inst.pos[v])
    out = path[:start] + tuple(seg) + path[stop:]
    if len(path) <= inst.k + 1 and path_khop(inst, out) > path_khop(inst, path):
        raise AssertionError("sorting a short path raised its k-hop cost")
    return Tour(out, closed=False)


def degenerate_cell(inst: HierInstance) -> tuple[int, ...] | None:
    """A level-2 cell H with |V \\ H| <= k/2, if any."""
    if inst.L < 2:
        return None
    for H in inst.cells(2):
        if 2 * (inst.n - len(H)) <= inst.k:
            return H
    return None


def _insert_front(inst: HierInstance, core: Tour, extra: Sequence[int]) -> Tour:
    tour = Tour(tuple(extra) + core.visits)
    limit = khop_cost(inst.tilde, core, inst.k) + len(extra) * 2 * inst.k * inst.D[0]
    if khop_cost(inst.tilde, tour, inst.k) > limit:
        raise AssertionError("vertex insertion exceeded 2kD_1 per vertex")
    return tour


def reduce_degenerate(inst: HierInstance, solver: Callable[[HierInstance], Tour]) -> Tour:
    """Peel level 1 while some level-2 cell holds all but k/2 vertices, then call the solver."""
    H = degenerate_cell(inst)
    if H is None:
        return solver(inst)
    outside = [v for v in inst.order if v not in set(H)]
    if len(H) > inst.k:
        sub, verts = inst.restrict_shift(H)
        inner = reduce_degenerate(sub, solver)
        core = Tour(tuple(verts[i] for i in inner.visits))
        return _insert_front(inst, core, outside)
    keep = list(H) + outside[: inst.k + 1 - len(H)]
    rest = outside[inst.k + 1 - len(H):]
    core = Tour(tuple(sorted(keep, key=lambda v: inst.pos[v])))
    return _insert_front(inst, core, rest)


def solve_with_cover(inst: HierInstance, cover_fn) -> Tour:
    """Tour from a cover builder, shortcut to a Hamiltonian cycle."""
    cover = cover_fn(inst)
    return shortcut_to_hamiltonian(inst.tilde, cover_to_tour(cover, inst))
