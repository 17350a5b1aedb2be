"""Seeded inequality batteries behind `verify --suite`. Each check returns (name, trials, failures)."""

from __future__ import annotations

import itertools

import numpy as np

from .core import expected_cost_exact, khop_cost, random_hamiltonian
from .generators import random_apriori, random_feasible_cover, random_monotone_path, random_small_hier
from .greedy_dp import DpContext, cost_k_prime, hop_padding, weight_bound
from .oracles import expected_cost_enum
from .path_cover import cover_to_tour, cover_weight, newly_covered, pair_weight, path_khop


def _weights(rng, trials: int):
    fails = {"weight_lower": 0, "weight_upper": 0, "k_prime": 0}
    for _ in range(trials):
        k = int(rng.integers(1, 5))
        inst = random_small_hier(int(rng.integers(k + 2, 12)), k, rng)
        lvl = int(rng.integers(1, inst.L + 1))
        path = random_monotone_path(inst, lvl, rng, 10)
        kp, gamma = hop_padding(k)
        w = pair_weight((path, lvl), inst)
        ws = [weight_bound(path, q, inst, lvl) for q in range(kp + 1)]
        fails["weight_lower"] += any(w > x for x in ws)
        fails["weight_upper"] += min(ws) > 4 * (gamma + 2) * w
        fails["k_prime"] += cost_k_prime(path, inst) > 4 * path_khop(inst, path)
    return [(name, trials, f) for name, f in fails.items()]


def _dp(rng, trials: int):
    fails = {"xi": 0, "combine": 0, "block": 0}
    counts = dict.fromkeys(fails, 0)
    for _ in range(trials):
        k = int(rng.choice([1, 3]))
        inst = random_small_hier(int(rng.integers(k + 2, 8)), k, rng)
        U = rng.random((inst.n, inst.L)) < 0.7
        for lstar in range(1, inst.L + 1):
            for cell in inst.cells(lstar):
                if not 2 <= len(cell) <= 6:
                    continue
                ctx = DpContext(inst, U, lstar, cell)
                real = [i for i, v in enumerate(ctx.verts) if v >= 0]
                for r in range(1, len(real) + 1):
                    for sub in itertools.combinations(real, r):
                        phi = ctx.profile_of(sub)
                        path = tuple(ctx.verts[i] for i in sub)
                        counts["xi"] += 1
                        fails["xi"] += ctx.xi(phi) != newly_covered((path, lstar), inst, U)
                        if r > 1:
                            counts["combine"] += 1
                            fails["combine"] += ctx.combine(ctx.profile_of(sub[:1]), ctx.profile_of(sub[1:])) != phi
                x, y = 0, ctx.m - 1
                got = {p: s.cost for p, s in ctx.block_dp(x, y).items()}
                want = {p: s.cost for p, s in ctx.brute_block(x, y).items()}
                counts["block"] += 1
                fails["block"] += got != want
    return [(name, counts[name], fails[name]) for name in fails]


def _cover(rng, trials: int):
    fails = 0
    for _ in range(trials):
        k = int(rng.integers(1, 4))
        inst = random_small_hier(int(rng.integers(k + 2, 12)), k, rng)
        cover = random_feasible_cover(inst, rng)
        tour = cover_to_tour(cover, inst)
        fails += not tour.covers(range(inst.n)) or khop_cost(inst.tilde, tour, k) > 2 * cover_weight(cover, inst)
    return [("cover_to_tour", trials, fails)]


def _evaluator(rng, trials: int):
    fails = {"exact_vs_enum": 0, "monotone": 0, "beta_squared": 0}
    for _ in range(trials):
        n = int(rng.integers(2, 8))
        inst = random_apriori(n, rng)
        tour = random_hamiltonian(n, rng)
        e = expected_cost_exact(inst, tour)
        ref = expected_cost_enum(inst, tour)
        fails["exact_vs_enum"] += abs(e - ref) > 1e-9 * max(1.0, abs(ref))
        beta = float(rng.uniform(0.05, 1.0))
        lower = inst.with_prob(inst.prob * rng.uniform(0, 1, n))
        fails["monotone"] += expected_cost_exact(lower, tour) > e * (1 + 1e-12) + 1e-12
        scaled = expected_cost_exact(inst.with_prob(beta * inst.prob), tour)
        fails["beta_squared"] += scaled < beta**2 * e * (1 - 1e-12) - 1e-12
    return [(name, trials, f) for name, f in fails.items()]


SUITES = {"weights": (_weights, 200), "dp": (_dp, 6), "cover": (_cover, 60), "evaluator": (_evaluator, 100)}


def run_suite(name: str, seed: int, trials: int | None = None) -> list[tuple[str, int, int]]:
    names = sorted(SUITES) if name == "all" else [name]
    rows = []
    for nm in names:
        fn, default = SUITES[nm]
        rng = np.random.default_rng([seed, sorted(SUITES).index(nm)])
        rows.extend((f"{nm}.{check}", t, f) for check, t, f in fn(rng, trials or default))
    return rows
