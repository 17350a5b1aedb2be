"""Directed low-diameter decomposition and hierarchically ordered instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import HopInstance, triangle_violation
from .errors import ValidationError

DEFAULT_C0 = 4.0


@dataclass(frozen=True)
class LddCut:
    vertices: tuple[int, ...]
    removed: np.ndarray  # removed[i, j]: edge vertices[i] -> vertices[j] is in F
    D: int

    def removed_pairs(self) -> set[tuple[int, int]]:
        return {(self.vertices[i], self.vertices[j]) for i, j in np.argwhere(self.removed)}


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ldd(cost, D: int, seed, vertices=None, c0: float = DEFAULT_C0) -> LddCut:
    """Randomized ball carving until every piece has max internal cost <= D.

    Radii follow a geometric law with mean D/(c0 ln n), clamped to floor(D/2).
    Each carve cuts every edge from the ball to the rest (out-ball) or from the
    rest into the ball (in-ball), so no strongly connected component can cross it.
    """
    if D < 1:
        raise ValidationError("ldd needs D >= 1")
    c = np.asarray(cost)
    verts = tuple(range(c.shape[0])) if vertices is None else tuple(int(v) for v in vertices)
    m = len(verts)
    sub = c[np.ix_(verts, verts)]
    removed = np.zeros((m, m), dtype=bool)
    rng = _rng(seed)
    mean = D / (c0 * math.log(max(m, 2)))
    p_geo = 1.0 / (1.0 + mean)
    cap = D // 2
    outward = bool(rng.integers(2))
    stack = [np.arange(m)]
    while stack:
        rest = stack.pop()
        while rest.size > 1 and sub[np.ix_(rest, rest)].max() > D:
            center = rest[rng.integers(rest.size)]
            radius = min(int(rng.geometric(p_geo)) - 1, cap)
            ball = None
            for direction in (outward, not outward):
                dist = sub[center, rest] if direction else sub[rest, center]
                inside = dist <= radius
                if not inside.all():
                    ball, used = rest[inside], direction
                    break
            outward = not outward
            if ball is None:  # unreachable: both balls full would force diameter <= 2r <= D
                break
            other = rest[~np.isin(rest, ball)]
            if used:
                removed[np.ix_(ball, other)] = True
            else:
                removed[np.ix_(other, ball)] = True
            stack.append(ball)
            rest = other
    return LddCut(verts, removed, int(D))


def scc_order(cut: LddCut, cost=None) -> list[list[int]]:
    """SCCs of the complete digraph minus F, in a topological order (smallest vertex first on ties)."""
    m = len(cut.vertices)
    if m == 1:
        return [list(cut.vertices)]
    keep = ~cut.removed
    np.fill_diagonal(keep, False)
    ncomp, labels = connected_components(csr_matrix(keep), directed=True, connection="strong")
    comps = [[] for _ in range(ncomp)]
    for i, lab in enumerate(labels):
        comps[lab].append(cut.vertices[i])
    dag = nx.DiGraph()
    dag.add_nodes_from(range(ncomp))
    src, dst = np.nonzero(keep)
    for a, b in set(zip(labels[src].tolist(), labels[dst].tolist())):
        if a != b:
            dag.add_edge(a, b)
    order = nx.lexicographical_topological_sort(dag, key=lambda lab: min(comps[lab]))
    return [sorted(comps[lab]) for lab in order]


def scc_max_cost(cut: LddCut, cost) -> int:
    """Largest intra-component edge cost after removal."""
    c = np.asarray(cost)
    worst = 0
    for comp in scc_order(cut):
        if len(comp) > 1:
            worst = max(worst, c[np.ix_(comp, comp)].max().item())
    return worst


def ldd_alpha(cost, D: int, seeds, vertices=None, c0: float = DEFAULT_C0) -> float:
    """Max over positive-cost edges of cut frequency * D / c(e)."""
    c = np.asarray(cost)
    verts = tuple(range(c.shape[0])) if vertices is None else tuple(vertices)
    sub = c[np.ix_(verts, verts)].astype(float)
    freq = np.zeros(sub.shape)
    seeds = list(seeds)
    for s in seeds:
        freq += ldd(c, D, s, verts, c0).removed
    freq /= len(seeds)
    if np.any(freq[sub == 0] > 0):
        raise AssertionError("a zero-cost edge was cut")
    pos = sub > 0
    return float((freq[pos] * D / sub[pos]).max()) if pos.any() else 0.0


def halving_sequence(diam: int) -> tuple[int, ...]:
    seq = [int(diam)]
    while seq[-1] > 0:
        seq.append(seq[-1] // 2)
    return tuple(seq)


@dataclass(frozen=True, eq=False)
class HierInstance:
    base: HopInstance
    order: tuple[int, ...]
    boundaries: tuple[tuple[int, ...], ...]  # boundaries[l-1] for level l
    D: tuple[int, ...]  # D[l-1] = D_l
    seed: int | None = None
    validate_on_init: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        object.__setattr__(self, "boundaries", tuple(tuple(int(b) for b in bs) for bs in self.boundaries))
        object.__setattr__(self, "D", tuple(int(d) for d in self.D))
        if self.validate_on_init:
            self.validate(triangle=False)

    def __eq__(self, other) -> bool:
        return (isinstance(other, HierInstance) and self.base == other.base
                and (self.order, self.boundaries, self.D, self.seed)
                == (other.order, other.boundaries, other.D, other.seed))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def L(self) -> int:
        return len(self.D)

    @property
    def cost(self) -> np.ndarray:
        return self.base.cost

    @cached_property
    def pos(self) -> np.ndarray:
        p = np.empty(self.n, dtype=np.int64)
        p[list(self.order)] = np.arange(self.n)
        return p

    @cached_property
    def cell_index(self) -> np.ndarray:
        """cell_index[l-1, x]: index of the level-l cell holding position x."""
        out = np.empty((self.L, self.n), dtype=np.int64)
        xs = np.arange(self.n)
        for lvl, bs in enumerate(self.boundaries):
            out[lvl] = np.searchsorted(np.asarray(bs), xs, side="right") - 1
        return out

    @cached_property
    def level_matrix(self) -> np.ndarray:
        """level(x, y) for vertices x, y: deepest level whose cell holds both."""
        ci = self.cell_index[:, self.pos]
        return (ci[:, :, None] == ci[:, None, :]).sum(axis=0)

    @cached_property
    def tilde(self) -> np.ndarray:
        c = self.base.cost
        D = np.asarray(self.D, dtype=c.dtype)
        back = D[self.level_matrix - 1]
        forward = self.pos[:, None] < self.pos[None, :]
        t = np.where(forward, c, back)
        np.fill_diagonal(t, 0)
        t.setflags(write=False)
        return t

    def level(self, x: int, y: int) -> int:
        return int(self.level_matrix[x, y])

    def cell_span(self, v: int, level: int) -> tuple[int, int]:
        """Half-open position interval of H_level(v)."""
        bs = self.boundaries[level - 1]
        i = int(self.cell_index[level - 1, self.pos[v]])
        return bs[i], bs[i + 1]

    def cell_of(self, v: int, level: int) -> tuple[int, ...]:
        a, b = self.cell_span(v, level)
        return self.order[a:b]

    def cells(self, level: int) -> list[tuple[int, ...]]:
        bs = self.boundaries[level - 1]
        return [self.order[bs[i]:bs[i + 1]] for i in range(len(bs) - 1)]

    def validate(self, triangle: bool = True) -> None:
        n, L = self.n, self.L
        if sorted(self.order) != list(range(n)):
            raise ValidationError("order must be a permutation of the vertices")
        if L < 1 or len(self.boundaries) != L:
            raise ValidationError("need one boundary list per level")
        if self.boundaries[0] != (0, n):
            raise ValidationError("level 1 must be the single cell V")
        if self.boundaries[-1] != tuple(range(n + 1)):
            raise ValidationError("level L must consist of singletons")
        for lo, hi in zip(self.boundaries, self.boundaries[1:]):
            if not set(lo) <= set(hi):
                raise ValidationError("partitions must refine level by level")
        for bs in self.boundaries:
            if list(bs) != sorted(set(bs)) or bs[0] != 0 or bs[-1] != n:
                raise ValidationError("boundaries must be strictly increasing from 0 to n")
        if self.D[-1] != 0:
            raise ValidationError("D_L must be 0")
        for a, b in zip(self.D, self.D[1:]):
            if a < 2 * b:
                raise ValidationError("D_l must be at least 2 D_(l+1)")
        forward = self.pos[:, None] < self.pos[None, :]
        lim = np.asarray(self.D)[self.level_matrix - 1]
        if np.any(forward & (self.base.cost > lim)):
            raise ValidationError("a forward edge exceeds the diameter of its level")
        if triangle:
            bad = triangle_violation(self.tilde)
            if bad is not None:
                raise ValidationError(f"derived cost violates the triangle inequality at {bad}")

    def restrict_shift(self, cell: tuple[int, ...]) -> tuple["HierInstance", tuple[int, ...]]:
        """Subinstance on a level-2 cell with level 1 dropped; returns it with the local-to-global map."""
        a, b = self.cell_span(cell[0], 2)
        verts = self.order[a:b]
        local = {v: i for i, v in enumerate(verts)}
        sub_cost = self.base.cost[np.ix_(verts, verts)]
        base = HopInstance(sub_cost, self.k, well_scaled=False, check_metric=False)
        bounds = [tuple(x - a for x in bs if a <= x <= b) for bs in self.boundaries[1:]]
        order = tuple(local[v] for v in verts)
        return HierInstance(base, order, tuple(bounds), self.D[1:], self.seed), verts


def build_hierarchy(inst: HopInstance, seed: int, c0: float = DEFAULT_C0) -> HierInstance:
    """Halve the diameter level by level; split every cell into the SCCs left by an LDD."""
    if not inst.well_scaled:
        raise ValidationError("build_hierarchy needs a well-scaled instance")
    n = inst.n
    diam = int(inst.cost.max())
    if diam == 0:
        raise ValidationError("zero-diameter instance has no hierarchy")
    D = halving_sequence(diam)
    L = len(D)
    cells: list[list[int]] = [list(range(n))]
    sizes = [[n]]
    for lvl in range(2, L):
        Dl = D[lvl - 1]
        nxt: list[list[int]] = []
        for ci, H in enumerate(cells):
            if len(H) == 1 or inst.cost[np.ix_(H, H)].max() <= Dl:
                nxt.append(H)
                continue
            cut = ldd(inst.cost, Dl, np.random.SeedSequence([seed, lvl, ci]), H, c0)
            nxt.extend(scc_order(cut))
        cells = nxt
        sizes.append([len(H) for H in cells])
    order = tuple(v for H in cells for v in sorted(H))
    bounds = [tuple(np.concatenate([[0], np.cumsum(s)]).tolist()) for s in sizes]
    bounds.append(tuple(range(n + 1)))
    return HierInstance(inst, order, tuple(bounds), D, seed)


def dump_hierarchy(h: HierInstance) -> str:
    lines = ["# hierarchy v1", f"n {h.n}", f"k {h.k}", f"L {h.L}",
             "seed " + ("none" if h.seed is None else str(h.seed)),
             "D " + " ".join(map(str, h.D)),
             "order " + " ".join(map(str, h.order))]
    for lvl, bs in enumerate(h.boundaries, start=1):
        lines.append(f"level {lvl} " + " ".join(map(str, bs)))
    lines.append("cost")
    for row in np.asarray(h.base.cost):
        lines.append(" ".join(str(int(x)) for x in row))
    return "\n".join(lines) + "\n"


def load_hierarchy(text: str) -> HierInstance:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        head = {}
        i = 0
        levels = []
        while rows[i] != "cost":
            key, _, rest = rows[i].partition(" ")
            if key == "level":
                levels.append(tuple(int(x) for x in rest.split()[1:]))
            else:
                head[key] = rest
            i += 1
        n = int(head["n"])
        cost = np.array([[int(x) for x in r.split()] for r in rows[i + 1:i + 1 + n]], dtype=np.int64)
        seed = None if head["seed"] == "none" else int(head["seed"])
        base = HopInstance(cost, int(head["k"]), well_scaled=True)
        D = tuple(int(x) for x in head["D"].split())
        order = tuple(int(x) for x in head["order"].split())
    except (KeyError, IndexError, ValueError) as exc:
        raise ValidationError(f"malformed hierarchy file: {exc}") from exc
    if len(D) != int(head["L"]) or cost.shape != (n, n):
        raise ValidationError("hierarchy header does not match its body")
    return HierInstance(base, order, tuple(levels), D, seed)
