"""Command-line entry point: ``memgdro solve|sweep|evaluate|bench|gen-data``.

Every command writes plot-ready JSON/CSV into ``--out``.  The solver backend
follows the ``MEMGDRO_SOLVER`` environment variable (``highs`` or ``scipy``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ambiguity import AmbiguitySet
from .baselines import run_basic_ccg, run_benders_dual, solve_ro, solve_saa
from .ccg import CcgOptions, SolveReport, extensive_oracle, run_ccg_dro_cg
from .evaluation import evaluate_out_of_sample, held_out_samples
from .formulation import compile_model
from .instance import (Instance, InstanceError, build_default_instance, load_instance, load_samples_csv,
                       save_instance, save_samples_csv, synthesize_samples)
from .solver import SolverError
from .wcep import CgOptions

ALGORITHMS = ("ccg-cg", "basic-ccg", "benders", "saa", "ro", "extensive")

log = logging.getLogger("memgdro")


@dataclass(frozen=True)
class RunConfig:
    instance: str = "default"
    algorithm: str = "ccg-cg"
    radius: float = 0.8
    samples: int | None = None
    sample_file: str | None = None
    gap: float = 0.005
    time_budget: float = 7200.0
    parallelism: int = 1
    seed: int = 0
    out: str = "results"
    slots: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        if self.samples is not None and self.sample_file is not None:
            raise ValueError("--samples and --sample-file are mutually exclusive")

    def options(self) -> CcgOptions:
        return CcgOptions(eps=self.gap, time_budget=self.time_budget, parallelism=self.parallelism,
                          cg=CgOptions(parallelism=self.parallelism))


def parse_grid(text: str) -> list[float]:
    """``start:step:stop`` (stop included) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid {text!r} is not start:step:stop")
        a, h, b = (float(p) for p in parts)
        if h <= 0 or b < a:
            raise argparse.ArgumentTypeError(f"grid {text!r} is empty")
        n = int(np.floor((b - a) / h + 1e-9)) + 1
        vals = [round(a + i * h, 12) for i in range(n)]
    else:
        vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError(f"grid {text!r} must hold non-negative values")
    return vals


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


# -- instance assembly -------------------------------------------------------------------


def build_instance(cfg: RunConfig, sample_count: int | None = None) -> Instance:
    count = sample_count if sample_count is not None else cfg.samples
    if cfg.instance in ("default", "memg_default") and cfg.slots is not None:
        inst = build_default_instance(cfg.slots, count or 10, cfg.seed)
    else:
        inst = load_instance(cfg.instance)
        if count is not None:
            inst = inst.with_samples(synthesize_samples(inst, count, cfg.seed))
    if cfg.sample_file:
        inst = inst.with_samples(load_samples_csv(cfg.sample_file))
    return inst


def run_algorithm(algorithm: str, inst: Instance, radius: float, opts: CcgOptions, model=None,
                  warm=None) -> SolveReport:
    model = model or compile_model(inst)
    amb = AmbiguitySet(inst.samples, radius, inst.box)
    if algorithm == "ccg-cg":
        return run_ccg_dro_cg(model, amb, opts, warm=warm)
    if algorithm == "basic-ccg":
        return run_basic_ccg(model, amb, opts)
    if algorithm == "benders":
        return run_benders_dual(model, amb, opts)
    if algorithm == "saa":
        return solve_saa(model, inst.samples, time_limit=opts.time_budget)
    if algorithm == "ro":
        return solve_ro(model, inst.box, opts)
    if algorithm == "extensive":
        return extensive_oracle(model, amb, time_limit=opts.time_budget)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def write_schedule(rep: SolveReport, out: Path) -> None:
    with open(out / "schedule.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        sched = rep.schedule or {}
        names = sorted(sched)
        T = max((len(v) for v in sched.values()), default=0)
        w.writerow(["slot"] + names)
        for t in range(T):
            w.writerow([t] + [repr(float(sched[k][t])) if t < len(sched[k]) else "" for k in names])
    (out / "schedule.json").write_text(json.dumps({"x": [float(v) for v in rep.x]}))


def _write_rows(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# -- commands ------------------------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = build_instance(cfg)
    rep = run_algorithm(cfg.algorithm, inst, cfg.radius, cfg.options())
    rep.to_json(out / "report.json")
    if rep.x is not None:
        write_schedule(rep, out)
    if rep.distribution is not None:
        rep.distribution.to_csv(out / "distribution.csv")
    print(f"{rep.algorithm}: status={rep.status} ub={rep.ub:.6f} lb={rep.lb:.6f} gap={rep.gap:.3g} "
          f"iterations={rep.iterations} time={rep.time:.1f}s")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = build_instance(cfg)
    model = compile_model(inst)
    test = held_out_samples(inst, args.test_count, cfg.seed)
    rows = []
    pool = None
    for r in args.radii:
        rep = run_algorithm(cfg.algorithm, inst, r, cfg.options(), model, warm=pool)
        pool = rep.extra.get("pool")
        oos = evaluate_out_of_sample(model, rep.x, test, cfg.parallelism)
        rows.append([r, rep.ub, rep.lb, rep.gap, oos.oosc, oos.pels, oos.eeens, rep.iterations])
        print(f"r={r:g} w={rep.ub:.6f} oosc={oos.oosc:.6f}")
    _write_rows(out / "sweep.csv", ["radius", "w", "lb", "gap", "oosc", "pels", "eeens", "iterations"], rows)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = build_instance(cfg)
    model = compile_model(inst)
    x = np.asarray(json.loads(Path(args.schedule).read_text())["x"], float)
    if x.shape != (model.first.n,):
        raise ValueError(f"schedule has {x.size} entries, the instance needs {model.first.n}")
    if args.test_file:
        test = load_samples_csv(args.test_file)
    else:
        test = held_out_samples(inst, args.test_count, cfg.seed)
    rep = evaluate_out_of_sample(model, x, test, cfg.parallelism)
    rep.to_json(out / "oos.json")
    rep.to_csv(out / "oos_detail.csv")
    print(" ".join(f"{k}={v:.6g}" for k, v in rep.indices().items()))
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for S in args.sample_counts:
        inst = build_instance(cfg, S)
        model = compile_model(inst)
        for r in args.radii:
            for alg in args.algorithms:
                rep = run_algorithm(alg, inst, r, cfg.options(), model)
                cuts = rep.extra.get("cuts", rep.scenarios)
                rows.append([r, S, alg, rep.status, rep.ub, rep.lb, rep.gap, rep.iterations, cuts, rep.time])
                print(f"S={S} r={r:g} {alg}: ub={rep.ub:.6f} lb={rep.lb:.6f} it={rep.iterations} "
                      f"time={rep.time:.1f}s")
    _write_rows(out / "bench.csv", ["radius", "samples", "algorithm", "status", "ub", "lb", "gap", "iterations",
                                    "scenarios_or_cuts", "time_s"], rows)
    return 0


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = build_default_instance(args.slots, args.samples, args.seed)
    save_instance(inst, out / "instance.json")
    save_samples_csv(inst.samples, out / "samples.csv")
    if args.test_count:
        save_samples_csv(held_out_samples(inst, args.test_count, args.seed), out / "test_samples.csv")
    print(f"wrote {out / 'instance.json'} (T={inst.T}, S={inst.samples.S})")
    return 0


# -- parser --------------------------------------------------------------------------------


def _config(args) -> RunConfig:
    return RunConfig(instance=args.instance, algorithm=getattr(args, "algorithm", "ccg-cg"),
                     radius=getattr(args, "radius", 0.8), samples=args.samples, sample_file=args.sample_file,
                     gap=args.gap, time_budget=args.time_budget, parallelism=args.parallelism, seed=args.seed,
                     out=args.out, slots=args.slots)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", default="default", help="instance JSON or 'default'")
    p.add_argument("--slots", type=_positive_int, help="slot count for the synthetic default instance")
    p.add_argument("--samples", type=_positive_int, help="number of synthesized training samples")
    p.add_argument("--sample-file", help="training samples CSV (overrides the instance samples)")
    p.add_argument("--gap", type=_nonneg, default=0.005, help="relative termination gap")
    p.add_argument("--time-budget", type=_nonneg, default=7200.0, help="seconds per run")
    p.add_argument("--parallelism", type=_positive_int, default=1, help="concurrent pricing workers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results", help="output directory")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memgdro", description="Distributionally robust microgrid dispatch.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    _common(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="ccg-cg")
    p.add_argument("--radius", type=_nonneg, default=0.8)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="objective and out-of-sample cost over a radius grid")
    _common(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="ccg-cg")
    p.add_argument("--radii", type=parse_grid, default=parse_grid("0:0.5:10"))
    p.add_argument("--test-count", type=_positive_int, default=1000)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="out-of-sample indices of a saved schedule")
    _common(p)
    p.add_argument("--schedule", required=True, help="schedule.json written by 'solve'")
    p.add_argument("--test-file", help="test scenarios CSV (default: synthesized)")
    p.add_argument("--test-count", type=_positive_int, default=1000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="algorithms over a radius x sample-count grid")
    _common(p)
    p.add_argument("--radii", type=parse_grid, default=parse_grid("0.5,1,5"))
    p.add_argument("--sample-counts", type=_int_list, default=[3, 5, 20])
    p.add_argument("--algorithms", type=lambda s: s.split(","), default=["ccg-cg", "basic-ccg", "benders"])
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-data", help="write the synthetic instance and sample files")
    p.add_argument("--slots", type=_positive_int, default=48)
    p.add_argument("--samples", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-count", type=int, default=0, help="also write this many test scenarios")
    p.add_argument("--out", default="data")
    p.set_defaults(func=cmd_gen_data)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(message)s")
    if getattr(args, "algorithms", None):
        bad = [a for a in args.algorithms if a not in ALGORITHMS]
        if bad:
            ap.error(f"unknown algorithm(s): {', '.join(bad)}")
    try:
        return int(args.func(args) or 0)
    except (InstanceError, SolverError, ValueError, FileNotFoundError) as exc:
        print(f"memgdro: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
