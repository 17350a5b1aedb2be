"""Command-line driver: one subcommand per pipeline stage, CSV on stdout or in --out."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .baseline import evaluate, sqrt_approx
from .core import khop_cost, shortcut_to_hamiltonian
from .errors import BudgetError, ValidationError
from .greedy_dp import DEFAULT_MEMO_CAP, greedy_cover, solve_hierarchical
from .grid import gap_experiment
from .hierarchy import build_hierarchy, load_hierarchy
from .hop_reduction import atsp_hop_solver, reduce_and_solve, well_scale
from .oracles import brute_apriori_opt, brute_hop_opt, brute_tsp
from .path_cover import cover_to_tour, cover_weight, is_feasible

EXIT_ASSERT, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_BUDGET = 1, 2, 3, 4, 5
SEEDED = {"grid", "sqrt-approx", "reduce", "build-hier", "verify"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    instance: str | None = None
    seed: int | None = None
    samples: int | None = None
    threads: int = 1
    memo_cap: int = DEFAULT_MEMO_CAP
    out: str | None = None
    force: bool = False
    extra: dict = field(default_factory=dict)


@dataclass
class Result:
    csv: str
    artifacts: dict[str, str] = field(default_factory=dict)
    ok: bool = True


def _need_instance(cfg: RunConfig) -> str:
    if not cfg.instance:
        raise UsageError(f"{cfg.command} needs --instance")
    return cfg.instance


def cmd_grid(cfg: RunConfig) -> Result:
    k = cfg.extra["k"]
    if k is None or k < 1:
        raise UsageError("grid needs --k >= 1")
    row = gap_experiment(k, cfg.samples or 100_000, cfg.seed, cfg.threads)
    header = ["k", "n", "E_block", "stderr_block", "E_post", "stderr_post", "ratio", "stderr_ratio"]
    return Result(io.csv_text(header, [row]))


def cmd_sqrt(cfg: RunConfig) -> Result:
    inst = io.load_instance(_need_instance(cfg))
    tour = sqrt_approx(inst, cfg.seed)
    val = evaluate(inst, tour, cfg.seed)
    row = {"n": inst.n, "expected": val, "oracle": "", "ratio": ""}
    if inst.n <= 9:
        opt = brute_apriori_opt(inst)[0]
        row.update(oracle=opt, ratio=val / opt if opt > 0 else 1.0)
    return Result(io.csv_text(["n", "expected", "oracle", "ratio"], [row]), {"tour.json": io.dumps_tour(tour)})


def hier_hop_solver(seed: int, memo_cap: int = DEFAULT_MEMO_CAP):
    """Hop solver that builds a hierarchy and runs the greedy cover on it."""

    def solve(hop):
        return solve_hierarchical(build_hierarchy(hop, seed), memo_cap)

    return solve


def brute_hop_solver(hop):
    return brute_hop_opt(hop)[1]


def cmd_reduce(cfg: RunConfig) -> Result:
    inst = io.load_instance(_need_instance(cfg))
    solver = {"sqrt": atsp_hop_solver, "hier": hier_hop_solver(cfg.seed, cfg.memo_cap),
              "brute": brute_hop_solver}[cfg.extra["solver"]]
    tour, trace = reduce_and_solve(inst, solver, cfg.seed, return_trace=True)
    header = ["depot", "heavy", "light", "stage", "copies", "delta", "k", "K"]
    return Result(io.csv_text(header, trace), {"tour.json": io.dumps_tour(tour)})


def cmd_build_hier(cfg: RunConfig) -> Result:
    data = io.read_json(_need_instance(cfg))
    hop = io.hop_from_dict(data, cfg.extra.get("k"))
    if not hop.well_scaled:
        hop, _ = well_scale(hop)
    h = build_hierarchy(hop, cfg.seed)
    h.validate()
    rows = [{"level": lvl, "cells": len(h.boundaries[lvl - 1]) - 1, "D": h.D[lvl - 1],
             "max_cell": int(np.max(np.diff(h.boundaries[lvl - 1])))} for lvl in range(1, h.L + 1)]
    return Result(io.csv_text(["level", "cells", "D", "max_cell"], rows), {"hier.txt": io.dumps_hier(h)})


def cmd_solve_hier(cfg: RunConfig) -> Result:
    h = io.load_hier(_need_instance(cfg))
    trace: list[dict] = []
    cover = greedy_cover(h, cfg.memo_cap, trace)
    tour = shortcut_to_hamiltonian(h.tilde, cover_to_tour(cover, h))
    header = ["iteration", "level", "size", "ratio", "gain", "guesses", "pruned", "aborted", "memo", "khop_cost"]
    rows = trace + [{"iteration": "total", "size": len(cover), "gain": int(h.n * h.L),
                     "khop_cost": int(khop_cost(h.tilde, tour, h.k))}]
    return Result(io.csv_text(header, rows), {"cover.json": io.dumps_cover(cover), "tour.json": io.dumps_tour(tour)})


def cmd_check_cover(cfg: RunConfig) -> Result:
    h = io.load_hier(_need_instance(cfg))
    path = cfg.extra.get("cover")
    if not path:
        raise UsageError("check-cover needs --cover")
    cover = io.loads_cover(Path(path).read_text(encoding="utf-8"))
    ok = is_feasible(cover, h)
    row = {"pairs": len(cover), "weight": cover_weight(cover, h), "feasible": int(ok)}
    return Result(io.csv_text(["pairs", "weight", "feasible"], [row]), ok=ok)


def cmd_oracle(cfg: RunConfig) -> Result:
    kind = cfg.extra["kind"]
    path = _need_instance(cfg)
    if kind == "apriori":
        inst = io.load_instance(path)
        val, tour = brute_apriori_opt(inst)
        n = inst.n
    elif kind == "tsp":
        inst = io.load_instance(path)
        val, tour = brute_tsp(inst.cost)
        n = inst.n
    elif kind == "hop":
        text = Path(path).read_text(encoding="utf-8")
        if text.startswith("# hierarchy"):
            target = load_hierarchy(text)
        else:
            target = io.hop_from_dict(io.loads_json(text), cfg.extra.get("k"))
        val, tour = brute_hop_opt(target)
        n = target.n
    else:
        raise UsageError(f"unknown oracle kind {kind!r}")
    row = {"kind": kind, "n": n, "value": val}
    return Result(io.csv_text(["kind", "n", "value"], [row]), {"tour.json": io.dumps_tour(tour)})


def cmd_verify(cfg: RunConfig) -> Result:
    from .verify import SUITES, run_suite

    suite = cfg.extra["suite"]
    if suite != "all" and suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(sorted(SUITES))} or all")
    rows = [{"check": name, "trials": t, "failures": f} for name, t, f in run_suite(suite, cfg.seed, cfg.samples)]
    return Result(io.csv_text(["check", "trials", "failures"], rows), ok=all(r["failures"] == 0 for r in rows))


COMMANDS = {"grid": cmd_grid, "sqrt-approx": cmd_sqrt, "reduce": cmd_reduce, "build-hier": cmd_build_hier,
            "solve-hier": cmd_solve_hier, "check-cover": cmd_check_cover, "oracle": cmd_oracle,
            "verify": cmd_verify}


def run(cfg: RunConfig) -> Result:
    if cfg.command in SEEDED and cfg.seed is None:
        raise UsageError(f"{cfg.command} needs --seed or APRIORI_SEED")
    return COMMANDS[cfg.command](cfg)


def _write_outputs(cfg: RunConfig, res: Result) -> None:
    if cfg.out is None:
        sys.stdout.write(res.csv)
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {f"{cfg.command}.csv": res.csv, **res.artifacts}
    if not cfg.force:
        clash = [name for name in files if (out / name).exists()]
        if clash:
            raise FileExistsError(f"{out / clash[0]} exists; pass --force to overwrite")
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--memo-cap", type=int, default=DEFAULT_MEMO_CAP)
    common.add_argument("--out")
    common.add_argument("--force", action="store_true")
    p = argparse.ArgumentParser(prog="apriori-tsp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("grid", parents=[common], help="grid lower-bound gap experiment")
    g.add_argument("--k", type=int, required=True)
    sub.add_parser("sqrt-approx", parents=[common], help="O(sqrt n) baseline tour")
    r = sub.add_parser("reduce", parents=[common], help="threshold split plus Hop-ATSP reduction")
    r.add_argument("--solver", choices=["sqrt", "hier", "brute"], default="sqrt")
    b = sub.add_parser("build-hier", parents=[common], help="hierarchy from a hop instance")
    b.add_argument("--k", type=int)
    sub.add_parser("solve-hier", parents=[common], help="greedy cover and tour on a hierarchy file")
    c = sub.add_parser("check-cover", parents=[common], help="feasibility of a cover file")
    c.add_argument("--cover")
    o = sub.add_parser("oracle", parents=[common], help="brute-force optimum")
    o.add_argument("kind", choices=["apriori", "tsp", "hop"])
    o.add_argument("--k", type=int)
    v = sub.add_parser("verify", parents=[common], help="seeded inequality battery")
    v.add_argument("--suite", default="all")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    seed = ns.seed
    if seed is None and os.environ.get("APRIORI_SEED", "").strip():
        try:
            seed = int(os.environ["APRIORI_SEED"])
        except ValueError as exc:
            raise UsageError("APRIORI_SEED must be an integer") from exc
    base = {"command", "instance", "seed", "samples", "threads", "memo_cap", "out", "force"}
    extra = {k: v for k, v in vars(ns).items() if k not in base}
    return RunConfig(ns.command, ns.instance, seed, ns.samples, max(1, ns.threads), ns.memo_cap,
                     ns.out, ns.force, extra)


def _fail(code: int, kind: str, msg) -> int:
    reason = " ".join(str(msg).split())
    sys.stderr.write(f"error: {kind}: {reason}\n")
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        res = run(cfg)
        _write_outputs(cfg, res)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except BudgetError as exc:
        return _fail(EXIT_BUDGET, "budget", exc)
    except (ValidationError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    except AssertionError as exc:
        return _fail(EXIT_ASSERT, "assertion", exc)
    if not res.ok:
        return _fail(EXIT_ASSERT, "assertion", f"{cfg.command} checks failed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
