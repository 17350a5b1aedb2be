"""Instances, tours and the two objectives: a priori expected cost and k-hop cost."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ValidationError

MC_CHUNK = 20000


def _as_cost(cost) -> np.ndarray:
    arr = np.asarray(cost)
    if arr.dtype.kind in "iu":
        arr = arr.astype(np.int64)
    else:
        arr = arr.astype(float)
    if arr.ndim == 1:
        m = int(round(np.sqrt(arr.size)))
        if m * m != arr.size:
            raise ValidationError("flat cost array is not square")
        arr = arr.reshape(m, m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError("cost matrix must be square")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValidationError("cost matrix contains NaN or infinity")
    if np.any(arr < 0):
        raise ValidationError("negative cost")
    if np.any(np.diag(arr) != 0):
        raise ValidationError("cost diagonal must be zero")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def triangle_violation(cost: np.ndarray, tol: float = 1e-9) -> tuple[int, int, int] | None:
    """Return an ordered triple (i, j, k) with c(i,k) > c(i,j) + c(j,k), or None."""
    c = np.asarray(cost)
    scale = tol * max(1.0, float(np.max(c))) if c.dtype.kind == "f" else 0
    for j in range(c.shape[0]):
        via = c[:, j, None] + c[None, j, :]
        bad = c > via + scale
        if bad.any():
            i, k = map(int, np.argwhere(bad)[0])
            return i, j, k
    return None


def _matrix(obj) -> np.ndarray:
    return obj.cost if hasattr(obj, "cost") else np.asarray(obj)


@dataclass(frozen=True, eq=False)
class AprioriInstance:
    cost: np.ndarray
    prob: np.ndarray
    metric: bool = False

    def __post_init__(self):
        cost = _as_cost(self.cost)
        prob = np.asarray(self.prob, dtype=float).copy()
        if prob.ndim != 1 or prob.size != cost.shape[0]:
            raise ValidationError("prob length must equal n")
        if not np.all(np.isfinite(prob)) or np.any(prob < 0) or np.any(prob > 1):
            raise ValidationError("probabilities must lie in [0, 1]")
        prob.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "prob", prob)
        if self.metric:
            bad = triangle_violation(cost)
            if bad is not None:
                raise ValidationError(f"triangle inequality fails on {bad}")

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    def with_prob(self, prob) -> "AprioriInstance":
        return AprioriInstance(self.cost, prob, self.metric)

    def __eq__(self, other) -> bool:
        return (isinstance(other, AprioriInstance) and np.array_equal(self.cost, other.cost)
                and np.array_equal(self.prob, other.prob) and self.metric == other.metric)


@dataclass(frozen=True, eq=False)
class HopInstance:
    cost: np.ndarray
    k: int
    well_scaled: bool = False
    check_metric: bool = field(default=True, compare=False)

    def __post_init__(self):
        cost = _as_cost(self.cost)
        n = cost.shape[0]
        if not (1 <= self.k < n):
            raise ValidationError(f"hop distance k={self.k} must satisfy 1 <= k < n={n}")
        if self.well_scaled:
            if not np.all(cost == np.round(cost)) or cost.max() > 2 * n**3:
                raise ValidationError("well-scaled costs must be integers in [0, 2n^3]")
            cost = cost.astype(np.int64)
            cost.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        if self.check_metric:
            bad = triangle_violation(cost)
            if bad is not None:
                raise ValidationError(f"triangle inequality fails on {bad}")

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    def __eq__(self, other) -> bool:
        return (isinstance(other, HopInstance) and self.k == other.k
                and np.array_equal(self.cost, other.cost))


@dataclass(frozen=True)
class Tour:
    visits: tuple[int, ...]
    closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "visits", tuple(int(v) for v in self.visits))

    def __len__(self) -> int:
        return len(self.visits)

    def validate(self, n: int) -> "Tour":
        for v in self.visits:
            if not 0 <= v < n:
                raise ValidationError(f"vertex index {v} out of range [0, {n})")
        return self

    def covers(self, vertices: Iterable[int]) -> bool:
        return set(vertices) <= set(self.visits)

    def is_hamiltonian(self, n: int) -> bool:
        return len(self.visits) == n and set(self.visits) == set(range(n))


class ActiveSet:
    """Subset of vertex indices stored as an integer bit mask."""

    __slots__ = ("mask",)

    def __init__(self, members: Iterable[int] = (), mask: int | None = None):
        if mask is None:
            mask = 0
            for v in members:
                if v < 0:
                    raise ValidationError("negative vertex index")
                mask |= 1 << int(v)
        self.mask = int(mask)

    def __contains__(self, v) -> bool:
        return v >= 0 and (self.mask >> int(v)) & 1 == 1

    def __iter__(self):
        m, v = self.mask, 0
        while m:
            if m & 1:
                yield v
            m >>= 1
            v += 1

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __eq__(self, other) -> bool:
        return isinstance(other, ActiveSet) and other.mask == self.mask

    def __hash__(self) -> int:
        return hash(self.mask)

    def __repr__(self) -> str:
        return f"ActiveSet({sorted(self)})"


def shortcut(tour: Tour, active) -> Tour:
    """Keep only the visits of active vertices."""
    return Tour(tuple(v for v in tour.visits if v in active), tour.closed)


def tour_cost(cost, tour: Tour):
    c = _matrix(cost)
    tour.validate(c.shape[0])
    if len(tour) <= 1:
        return c.dtype.type(0).item()
    idx = np.asarray(tour.visits)
    edges = c[idx[:-1], idx[1:]].sum()
    if tour.closed:
        edges = edges + c[idx[-1], idx[0]]
    return edges.item()


def khop_cost(inst, tour: Tour, k: int | None = None):
    """Sum of c(v_i, v_{i+d}) for d = 1..k; wraps for closed tours, truncates for open walks."""
    c = _matrix(inst)
    if k is None:
        k = inst.k
    tour.validate(c.shape[0])
    r = len(tour)
    if r <= 1:
        return c.dtype.type(0).item()
    idx = np.asarray(tour.visits)
    total = c.dtype.type(0)
    for d in range(1, k + 1):
        if tour.closed:
            total = total + c[idx, np.roll(idx, -d)].sum()
        elif d < r:
            total = total + c[idx[:-d], idx[d:]].sum()
        else:
            break
    return total.item()


def _expected_hamiltonian(c: np.ndarray, p: np.ndarray, idx: np.ndarray) -> float:
    m = idx.size
    pv = p[idx]
    q = 1.0 - pv
    carry = np.ones(m)
    total = 0.0
    for d in range(1, m):
        j = np.roll(np.arange(m), -d)
        total += float(np.sum(c[idx, idx[j]] * pv * pv[j] * carry))
        carry = carry * q[j]
    return total


def expected_cost_exact(inst: AprioriInstance, tour: Tour) -> float:
    """Exact E[c(T[A])] for a closed walk; handles repeated visits."""
    tour.validate(inst.n)
    w = tour.visits
    m = len(w)
    if m <= 1:
        return 0.0
    c, p = inst.cost, inst.prob
    if len(set(w)) == m:
        return _expected_hamiltonian(c.astype(float), p, np.asarray(w))
    total = 0.0
    for i in range(m):
        a = w[i]
        between: set[int] = set()
        prod = 1.0
        for d in range(1, m):
            b = w[(i + d) % m]
            if b == a:
                break
            if b not in between:
                total += float(c[a, b]) * p[a] * p[b] * prod
                between.add(b)
                prod *= 1.0 - p[b]
            if prod == 0.0:
                break
    return total


def sample_tour_costs(cost, prob, tour: Tour, rng: np.random.Generator, samples: int) -> np.ndarray:
    """Cost of the shortcut tour for `samples` independent activation draws."""
    act = rng.random((samples, np.shape(cost)[0])) < np.asarray(prob)
    return shortcut_costs(cost, act, tour)


def shortcut_costs(cost, act: np.ndarray, tour: Tour) -> np.ndarray:
    """Row-wise cost of the tour shortcut to each row of a boolean activation matrix."""
    c = np.asarray(cost, dtype=float)
    idx = np.asarray(tour.visits, dtype=np.int64)
    samples = act.shape[0]
    if idx.size <= 1:
        return np.zeros(samples)
    rows, cols = np.nonzero(act[:, idx])
    if rows.size == 0:
        return np.zeros(samples)
    verts = idx[cols]
    nxt = np.empty_like(verts)
    nxt[:-1] = verts[1:]
    starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    ends = np.r_[starts[1:] - 1, rows.size - 1]
    nxt[ends] = verts[starts] if tour.closed else verts[ends]
    return np.bincount(rows, weights=c[verts, nxt], minlength=samples)


def chunked_samples(fn, samples: int, seed: int, threads: int = 1, chunk: int = MC_CHUNK) -> np.ndarray:
    """Run fn(rng, size) on fixed-size chunks with spawned seeds; concatenate in chunk order.

    The result depends only on (samples, seed, chunk), never on the thread count.
    """
    sizes = [min(chunk, samples - s) for s in range(0, samples, chunk)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), size) for s, size in zip(seqs, sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    return np.concatenate(parts) if parts else np.zeros(0)


def mean_stderr(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return 0.0, 0.0
    mean = float(values.mean())
    if values.size == 1:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / np.sqrt(values.size))


def expected_cost_mc(inst: AprioriInstance, tour: Tour, samples: int, seed: int,
                     threads: int = 1) -> tuple[float, float]:
    """Monte-Carlo estimate of the expected cost with its standard error."""
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    tour.validate(inst.n)
    vals = chunked_samples(
        lambda rng, size: sample_tour_costs(inst.cost, inst.prob, tour, rng, size),
        samples, seed, threads)
    return mean_stderr(vals)


def shortcut_to_hamiltonian(inst, tour: Tour) -> Tour:
    """Drop every repeated visit, keeping first occurrences; k-hop cost never increases."""
    c = _matrix(inst)
    n = c.shape[0]
    if not tour.covers(range(n)):
        raise ValidationError("tour does not visit every vertex")
    seen: set[int] = set()
    out = []
    for v in tour.visits:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return Tour(tuple(out), True)


def metric_closure(cost) -> np.ndarray:
    """All-pairs shortest paths (vectorized Floyd-Warshall); keeps integer dtype."""
    d = np.array(cost, copy=True)
    if d.dtype.kind not in "iu":
        d = d.astype(float)
    for j in range(d.shape[0]):
        np.minimum(d, d[:, j, None] + d[None, j, :], out=d)
    return d


def random_hamiltonian(n: int, rng: np.random.Generator) -> Tour:
    return Tour(tuple(int(v) for v in rng.permutation(n)), True)
