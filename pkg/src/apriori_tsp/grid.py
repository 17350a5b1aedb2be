"""Asymmetric k x k grid instances, their a posteriori optimum, and the block tour."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AprioriInstance, Tour, chunked_samples, mean_stderr, shortcut_costs
from .errors import ValidationError


@dataclass(frozen=True)
class GridInstance:
    k: int
    inst: AprioriInstance

    @property
    def n(self) -> int:
        return self.k * self.k

    def vertex(self, row: int, col: int) -> int:
        return row * self.k + col

    def column(self, v: int) -> int:
        return v % self.k


def grid_costs(k: int) -> np.ndarray:
    col = np.tile(np.arange(k), k)
    diff = (col[None, :] - col[:, None]) % k
    cost = np.where(diff == 0, k, diff).astype(np.int64)
    np.fill_diagonal(cost, 0)
    return cost


def build_grid(k: int, prob: float | None = None) -> GridInstance:
    """Vertices v = row*k + col; a step to the next column (cyclically) costs 1."""
    if k < 2:
        raise ValidationError("grid side k must be >= 2")
    p = 1.0 / k if prob is None else prob
    return GridInstance(k, AprioriInstance(grid_costs(k), np.full(k * k, p), metric=False))


def grid_posteriori_opt(g: GridInstance, active) -> int:
    members = list(active)
    if len(members) <= 1:
        return 0
    counts = np.bincount([g.column(v) for v in members], minlength=g.k)
    return g.k * int(counts.max())


def _posteriori_batch(k: int, act: np.ndarray) -> np.ndarray:
    counts = act.reshape(act.shape[0], k, k).sum(axis=1)
    vals = k * counts.max(axis=1)
    return np.where(act.sum(axis=1) >= 2, vals, 0).astype(float)


def block_tour(g: GridInstance) -> Tour:
    """Rows grouped into blocks of floor(sqrt k); each block swept column by column."""
    k = g.k
    b = max(1, math.isqrt(k))
    visits = []
    for start in range(0, k, b):
        rows = range(start, min(start + b, k))
        for col in range(k):
            visits.extend(g.vertex(r, col) for r in rows)
    return Tour(tuple(visits))


def gap_experiment(k: int, samples: int, seed: int, threads: int = 1, prob: float | None = None) -> dict:
    """MC estimates of the block-tour cost and of E[TSP(A)] on the same activation draws."""
    if k < 3:
        raise ValidationError("gap experiment needs k >= 3")
    g = build_grid(k, prob)
    tour = block_tour(g)
    p = g.inst.prob

    def chunk(rng, size):
        act = rng.random((size, g.n)) < p
        return np.stack([shortcut_costs(g.inst.cost, act, tour), _posteriori_batch(k, act)], axis=1)

    vals = chunked_samples(chunk, samples, seed, threads)
    e_block, se_block = mean_stderr(vals[:, 0])
    e_post, se_post = mean_stderr(vals[:, 1])
    if e_post > 0:
        ratio = e_block / e_post
        # linearized ratio estimator; keeps the covariance of the paired draws
        _, se_ratio = mean_stderr((vals[:, 0] - ratio * vals[:, 1]) / e_post)
    else:
        ratio = se_ratio = float("nan")
    return {"k": k, "n": g.n, "E_block": e_block, "stderr_block": se_block,
            "E_post": e_post, "stderr_post": se_post, "ratio": ratio, "stderr_ratio": se_ratio}
