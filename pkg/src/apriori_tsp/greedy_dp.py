"""Greedy set cover over path-level pairs with a dynamic-programming ratio oracle.

All DP work happens on local positions of one guessed cell H* at level l*, padded
with k' dummy vertices on each side. Dummies have zero forward cost, are already
covered at every level, and form singleton cells below l*.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .core import Tour, khop_cost
from .errors import MemoCapExceeded
from .hierarchy import HierInstance
from .path_cover import (PathLevelPair, cover_to_tour, covered_elements, full_universe,
                         newly_covered, pair_weight, reduce_degenerate)
from .core import shortcut_to_hamiltonian

DEFAULT_MEMO_CAP = 5_000_000


def hop_padding(k: int) -> tuple[int, int]:
    """Smallest k' = 2^G - 1 with k <= k' <= 2k, returned as (k', G)."""
    g = 1
    while (1 << g) - 1 < k:
        g += 1
    return (1 << g) - 1, g


def height(j: int, gamma: int) -> int:
    if j == 0:
        return gamma
    j = abs(j)
    return min((j & -j).bit_length() - 1, gamma)


def width(j: int, gamma: int) -> int:
    return (1 << height(j, gamma)) - 1


def weight_bound_seq(cost, seq: Sequence[int], q: int, gamma: int, base: int) -> int:
    """base + sum_i 2^height(i+q) * sum_{d <= width(i+q)} (c(v_{i-d}, v_i) + c(v_i, v_{i+d}))."""
    r = len(seq)
    total = base
    for i, v in enumerate(seq):
        h = height(i + q, gamma)
        s = 0
        for d in range(1, (1 << h)):
            if i - d >= 0:
                s += cost[seq[i - d]][v]
            if i + d < r:
                s += cost[v][seq[i + d]]
        total += (1 << h) * s
    return int(total)


def weight_bound(path: Sequence[int], q: int, inst: HierInstance, level: int) -> int:
    kp, gamma = hop_padding(inst.k)
    return weight_bound_seq(inst.tilde, list(path), q, gamma, inst.k**2 * inst.D[level - 1])


def cost_k_prime(path: Sequence[int], inst: HierInstance) -> int:
    kp, _ = hop_padding(inst.k)
    return khop_cost(inst.tilde, Tour(tuple(path), closed=False), kp)


class TreeSolution(NamedTuple):
    cost: int
    vertices: tuple[int, ...]  # in-order traversal, which is the order along the path


@dataclass
class DpContext:
    """Everything the oracle needs for one guess (l*, H*)."""

    inst: HierInstance
    uncovered: np.ndarray
    lstar: int
    cell: tuple[int, ...]
    memo_cap: int = DEFAULT_MEMO_CAP
    pad: bool = True
    memo_entries: int = field(default=0, init=False)  # stored profiles plus merge work

    def __post_init__(self):
        inst = self.inst
        self.k = inst.k
        self.kp, self.gamma = hop_padding(inst.k)
        self.cell = tuple(sorted(self.cell, key=lambda v: inst.pos[v]))
        pad = self.kp if self.pad else 0
        self.offset = pad
        self.verts = [-1] * pad + list(self.cell) + [-1] * pad
        m = self.m = len(self.verts)
        self.levels = list(range(self.lstar, inst.L))  # l with cells at level l+1
        real = [i for i, v in enumerate(self.verts) if v >= 0]
        # interval of the level-(l+1) cell holding each local position, inclusive
        self.lo, self.hi = [], []
        for lvl in self.levels:
            lo, hi = list(range(m)), list(range(m))
            for i in real:
                a, b = inst.cell_span(self.verts[i], lvl + 1)
                lo[i] = a - int(inst.pos[self.cell[0]]) + pad
                hi[i] = b - 1 - int(inst.pos[self.cell[0]]) + pad
            self.lo.append(lo)
            self.hi.append(hi)
        # not_s[l - lstar][i]: (v, l) still uncovered, for l = lstar..L
        self.not_s, self.pre = [], []
        for lvl in range(self.lstar, inst.L + 1):
            row = [bool(v >= 0 and self.uncovered[v, lvl - 1]) for v in self.verts]
            self.not_s.append(row)
            self.pre.append(np.concatenate([[0], np.cumsum(row)]).astype(int).tolist())
        big = inst.D[self.lstar - 1]
        t = inst.tilde
        cc = [[0] * m for _ in range(m)]
        for i, u in enumerate(self.verts):
            for j, w in enumerate(self.verts):
                if i == j:
                    continue
                if u >= 0 and w >= 0:
                    cc[i][j] = int(t[u, w])
                else:
                    cc[i][j] = 0 if i < j else int(big)
        self.cost = cc
        self.base = inst.k**2 * inst.D[self.lstar - 1]
        self._singles = {}
        self._blocks = {}

    def count(self, j: int, a: int, b: int) -> int:
        """Uncovered positions at level lstar+j within [a, b]."""
        if a > b:
            return 0
        a = max(a, 0)
        b = min(b, self.m - 1)
        pre = self.pre[j]
        return pre[b + 1] - pre[a] if a <= b else 0

    # profiles are (a_min, a_max, f_min, f_max, g_min, g_max, gamma)
    def single(self, v: int):
        got = self._singles.get(v)
        if got is None:
            nl = len(self.levels)
            gam = sum(row[v] for row in self.not_s)
            got = (v, v, (1,) * nl, (1,) * nl, (0,) * nl, (0,) * nl, gam)
            self._singles[v] = got
        return got

    def profile_of(self, path: Sequence[int]):
        """Profile computed straight from the definition, for a sorted local-position path."""
        if not path:
            raise ValueError("profile of an empty path")
        p = sorted(path)
        ps = set(p)
        amin, amax = p[0], p[-1]
        fmin, fmax, gmin, gmax = [], [], [], []
        gam = sum(row[v] for row in self.not_s for v in p)
        for j, lvl in enumerate(self.levels):
            lo, hi, ns = self.lo[j], self.hi[j], self.not_s[j]
            for a, fs, gs in ((amin, fmin, gmin), (amax, fmax, gmax)):
                fs.append(sum(lo[a] <= v <= hi[a] for v in p))
                gs.append(sum(1 for i in range(max(lo[a], amin), min(hi[a], amax) + 1)
                              if ns[i] and i not in ps))
            i = amin + 1
            while i < amax:
                if lo[i] == i and lo[i] > amin and hi[i] < amax:
                    inside = sum(lo[i] <= v <= hi[i] for v in p)
                    if inside >= self.k:
                        gam += sum(1 for t in range(lo[i], hi[i] + 1) if ns[t] and t not in ps)
                    i = hi[i] + 1
                else:
                    i += 1
        return (amin, amax, tuple(fmin), tuple(fmax), tuple(gmin), tuple(gmax), gam)

    def xi(self, phi) -> int:
        amin, amax, fmin, fmax, gmin, gmax, gam = phi
        total = gam
        for j in range(len(self.levels)):
            lo, hi = self.lo[j], self.hi[j]
            same = lo[amin] == lo[amax]
            sides = ((amin, fmin, gmin),) if same else ((amin, fmin, gmin), (amax, fmax, gmax))
            for a, f, g in sides:
                if f[j] >= self.k:
                    outside = self.count(j, lo[a], amin - 1) + self.count(j, amax + 1, hi[a])
                    total += g[j] + outside
        return total

    def combine(self, phi, psi):
        a1, b1, fmin1, fmax1, gmin1, gmax1, g1 = phi
        a2, b2, fmin2, fmax2, gmin2, gmax2, g2 = psi
        if not b1 < a2:
            raise ValueError("combine needs the left profile strictly before the right one")
        k = self.k
        fmin, fmax, gmin, gmax = [], [], [], []
        gam = g1 + g2
        for j in range(len(self.levels)):
            lo, hi = self.lo[j], self.hi[j]
            same_min = lo[a1] == lo[a2]
            same_max = lo[b1] == lo[b2]
            fmin.append(fmin1[j] + (fmin2[j] if same_min else 0))
            fmax.append(fmax2[j] + (fmax1[j] if same_max else 0))
            gmin.append(gmin1[j] + self.count(j, max(lo[a1], b1 + 1), min(hi[a1], a2 - 1))
                        + (gmin2[j] if same_min else 0))
            gmax.append(gmax2[j] + self.count(j, max(lo[b2], b1 + 1), min(hi[b2], a2 - 1))
                        + (gmax1[j] if same_max else 0))
            l1, h1, l2, h2 = lo[b1], hi[b1], lo[a2], hi[a2]
            if l1 != l2:
                if l1 > a1 and h1 < b2 and fmax1[j] >= k:
                    gam += gmax1[j] + self.count(j, l1, a1 - 1) + self.count(j, b1 + 1, h1)
                if l2 > a1 and h2 < b2 and fmin2[j] >= k:
                    gam += gmin2[j] + self.count(j, l2, a2 - 1) + self.count(j, b2 + 1, h2)
            elif l1 > a1 and h1 < b2 and fmax1[j] + fmin2[j] >= k:
                gam += (gmax1[j] + gmin2[j] + self.count(j, l1, a1 - 1)
                        + self.count(j, b1 + 1, a2 - 1) + self.count(j, b2 + 1, h1))
        return (a1, b2, tuple(fmin), tuple(fmax), tuple(gmin), tuple(gmax), gam)

    def min_cost(self, a: int, b: int) -> int:
        return min(self.cost[a][b], self.cost[b][a])

    def block_dp(self, x: int, y: int) -> dict:
        """Best tree solution of height Gamma strictly between x and y, per realized profile."""
        key = (x, y)
        if key in self._blocks:
            return self._blocks[key]
        G = self.gamma
        cc = self.cost
        top = 1 << G
        memo: dict = {}

        def ext(r: int, pi: tuple[int, ...], h: int) -> int:
            # pi[t] holds the ancestor at height h+1+t
            s = top * (cc[x][r] + cc[r][y])
            for t, a in enumerate(pi):
                s += (1 << (h + t)) * self.min_cost(r, a)
            return s

        def rec(h: int, lo: int, hi: int, pi: tuple[int, ...]) -> dict:
            mk = (h, lo, hi, pi)
            got = memo.get(mk)
            if got is not None:
                return got
            out: dict = {}
            if h == 1:
                for v in range(lo + 1, hi):
                    out[self.single(v)] = TreeSolution(ext(v, pi, 1), (v,))
            else:
                half = (1 << (h - 1)) - 1
                for r in range(lo + half + 1, hi - half):
                    pi2 = (r,) + pi
                    left = rec(h - 1, lo, r, pi2)
                    right = rec(h - 1, r, hi, pi2)
                    if not left or not right:
                        continue
                    root = ext(r, pi, h)
                    sr = self.single(r)
                    self.memo_entries += len(left) * len(right)
                    if self.memo_entries > self.memo_cap:
                        raise MemoCapExceeded(f"memo work passed {self.memo_cap}")
                    for p1, s1 in left.items():
                        p1r = self.combine(p1, sr)
                        for p2, s2 in right.items():
                            phi = self.combine(p1r, p2)
                            cand = TreeSolution(s1.cost + s2.cost + root, s1.vertices + (r,) + s2.vertices)
                            old = out.get(phi)
                            if old is None or (cand.cost, cand.vertices) < (old.cost, old.vertices):
                                out[phi] = cand
            memo[mk] = out
            self.memo_entries += len(out) + 1
            if self.memo_entries > self.memo_cap:
                raise MemoCapExceeded(f"memo table passed {self.memo_cap} entries")
            return out

        res = rec(G, x, y, ()) if y - x - 1 >= self.kp else {}
        self._blocks[key] = res
        return res

    def brute_block(self, x: int, y: int) -> dict:
        """Oracle for block_dp: every k'-subset strictly between x and y."""
        from itertools import combinations

        out: dict = {}
        for sub in combinations(range(x + 1, y), self.kp):
            phi = self.profile_of(sub)
            cost = weight_bound_seq(self.cost, (x,) + sub + (y,), 0, self.gamma, 0)
            old = out.get(phi)
            if old is None or (cost, sub) < (old.cost, old.vertices):
                out[phi] = TreeSolution(cost, sub)
        return out

    def best_paths(self) -> dict[int, tuple[int, tuple[int, ...]]]:
        """For each newly-covered count g >= 1, the padded local path of least w^0 with xi = g."""
        m, kp = self.m, self.kp
        dist: list[dict] = [dict() for _ in range(m)]
        for v in range(m):
            dist[v][self.single(v)] = (0, (v,))
        for x in range(m):
            for phi_x, (wx, sx) in list(dist[x].items()):
                for y in range(x + kp + 1, m):
                    sy = self.single(y)
                    for phi_b, sol in self.block_dp(x, y).items():
                        phi_y = self.combine(self.combine(phi_x, phi_b), sy)
                        cand = (wx + sol.cost, sx + sol.vertices + (y,))
                        old = dist[y].get(phi_y)
                        if old is None or cand < old:
                            dist[y][phi_y] = cand
        best: dict[int, tuple[int, tuple[int, ...]]] = {}
        for nodes in dist:
            for phi, (w, seq) in nodes.items():
                g = self.xi(phi)
                if g <= 0:
                    continue
                cand = (w + self.base, seq)
                if g not in best or cand < best[g]:
                    best[g] = cand
        return best

    def strip(self, seq: Sequence[int]) -> tuple[tuple[int, ...], int]:
        """Real vertices of a padded path and the number of left dummies it used."""
        q = sum(1 for i in seq if i < self.offset)
        return tuple(self.verts[i] for i in seq if self.verts[i] >= 0), q


@dataclass
class GuessStats:
    guesses: int = 0
    pruned: int = 0
    aborted: int = 0
    memo_max: int = 0


def _key(inst: HierInstance, path: tuple[int, ...], level: int, w: int, gain: int):
    return (Fraction(w, gain), w, tuple(int(inst.pos[v]) for v in path), level)


def best_ratio_path(inst: HierInstance, uncovered: np.ndarray, memo_cap: int = DEFAULT_MEMO_CAP,
                    stats: GuessStats | None = None, check: bool = True):
    """Approximately the pair minimizing weight / newly covered elements; returns (pair, ratio)."""
    if not uncovered.any():
        raise ValueError("nothing left to cover")
    stats = stats if stats is not None else GuessStats()
    k2 = inst.k**2
    guesses = []
    for lstar in range(1, inst.L + 1):
        for cell in inst.cells(lstar):
            gain_cap = int(uncovered[list(cell), lstar - 1:].sum())
            if gain_cap:
                guesses.append((Fraction(k2 * inst.D[lstar - 1], gain_cap), lstar, cell))
    # best-first order only changes how much gets pruned, never the winner
    guesses.sort(key=lambda g: (g[0], g[1], inst.pos[g[2][0]]))
    best = None
    for lb, lstar, cell in guesses:
        if best is not None and lb > best[0]:
            stats.pruned += 1
            continue
        stats.guesses += 1
        if len(cell) == 1:
            found = [((cell[0],), 0)]
        else:
            ctx = DpContext(inst, uncovered, lstar, cell, memo_cap)
            try:
                paths = ctx.best_paths()
            except MemoCapExceeded:
                stats.aborted += 1
                continue
            stats.memo_max = max(stats.memo_max, ctx.memo_entries)
            found = []
            for g, (w0, seq) in sorted(paths.items()):
                real, q = ctx.strip(seq)
                if check:
                    got = newly_covered((real, lstar), inst, uncovered)
                    if got != g:
                        raise AssertionError(f"dummy stripping changed the gain: {got} != {g}")
                    if weight_bound(real, q, inst, lstar) != w0:
                        raise AssertionError("dummy stripping changed the weight bound")
                found.append((real, q))
        for real, _ in found:
            gain = newly_covered((real, lstar), inst, uncovered)
            if gain == 0:
                continue
            w = pair_weight((real, lstar), inst)
            key = _key(inst, real, lstar, w, gain)
            if best is None or key < best:
                best = key
                best_pair = PathLevelPair(real, lstar)
    if best is None:
        # every useful guess was aborted: fall back to the best singleton
        for v in range(inst.n):
            for lvl in range(1, inst.L + 1):
                gain = newly_covered(((v,), lvl), inst, uncovered)
                if gain:
                    w = pair_weight(((v,), lvl), inst)
                    key = _key(inst, (v,), lvl, w, gain)
                    if best is None or key < best:
                        best, best_pair = key, PathLevelPair((v,), lvl)
    return best_pair, best[0]


def greedy_cover(inst: HierInstance, memo_cap: int = DEFAULT_MEMO_CAP, trace: list | None = None):
    """Standard greedy: repeatedly add the best-ratio pair until every element is covered."""
    uncovered = full_universe(inst)
    cover: list[PathLevelPair] = []
    while uncovered.any():
        stats = GuessStats()
        pair, ratio = best_ratio_path(inst, uncovered, memo_cap, stats)
        gained = covered_elements(pair, inst) & uncovered
        uncovered = uncovered & ~gained
        cover.append(pair)
        if trace is not None:
            trace.append({"iteration": len(cover), "level": pair.level, "size": len(pair.path),
                          "ratio": float(ratio), "gain": int(gained.sum()),
                          "guesses": stats.guesses, "pruned": stats.pruned,
                          "aborted": stats.aborted, "memo": stats.memo_max})
    return cover


def solve_hierarchical(inst: HierInstance, memo_cap: int = DEFAULT_MEMO_CAP,
                       trace: list | None = None) -> Tour:
    """Greedy cover turned into a tour, with degenerate instances peeled first."""

    def solver(sub: HierInstance) -> Tour:
        cover = greedy_cover(sub, memo_cap, trace)
        return shortcut_to_hamiltonian(sub.tilde, cover_to_tour(cover, sub))

    tour = reduce_degenerate(inst, solver)
    return shortcut_to_hamiltonian(inst.tilde, tour)
