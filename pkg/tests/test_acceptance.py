"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line, and the
terminal summary repeats them. Recorded numbers (timings, sweep values,
benchmark table) land in ``results/`` at the repository root.
"""
import csv
import json
import os
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from memgdro.ambiguity import DiscreteDistribution, AmbiguitySet, discrete_wasserstein
from memgdro.baselines import run_basic_ccg, run_benders_dual, solve_ro, solve_saa
from memgdro.ccg import CcgOptions, extensive_oracle, run_ccg_dro_cg
from memgdro.evaluation import LOSS_THRESHOLD, evaluate_out_of_sample, held_out_samples
from memgdro.formulation import compile_model, random_first_stage_points
from memgdro.instance import build_default_instance
from memgdro.wcep import TOL_P, RecourseOracle, brute_force_wcep, run_cg

pytestmark = pytest.mark.acceptance

RESULTS = Path(__file__).resolve().parents[1] / "results"
LINES: list[str] = []
REPORTS: list = []  # (report, eps) for every decomposition run, for the bound-discipline check
TRACES: list = []  # CG value traces
EXACT = CcgOptions(eps=0.0)
RADII = (0.0, 0.3, 1.0)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    LINES.append(line)
    print("\n" + line)


def write_json(name: str, payload) -> None:
    RESULTS.mkdir(exist_ok=True)
    (RESULTS / name).write_text(json.dumps(payload, indent=1, sort_keys=True, default=float))


def rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-12)


@pytest.fixture(scope="module")
def tiny():
    out = {}
    for S in (2, 3):
        inst = build_default_instance(2, S, seed=0)
        out[S] = (inst, compile_model(inst))
    return out


@pytest.fixture(scope="module")
def mid():
    inst = build_default_instance(12, 5, seed=0)
    return inst, compile_model(inst)


@pytest.fixture(scope="module")
def day():
    inst = build_default_instance(48, 10, seed=0)
    return inst, compile_model(inst)


def ambiguity(inst, r):
    return AmbiguitySet(inst.samples, r, inst.box)


def keep(rep, eps: float = 0.0):
    REPORTS.append((rep, eps))
    return rep


# -- 1 ------------------------------------------------------------------------------------


def test_1_wcep_matches_enumeration(tiny):
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for S, (inst, model) in tiny.items():
        oracle = RecourseOracle(model.tpl)
        for x in random_first_stage_points(model, 20, seed=100 + S):
            cache = {}
            for r in RADII:
                amb = ambiguity(inst, r)
                ref = brute_force_wcep(model, amb, x, oracle=oracle, cache=cache)
                sol = run_cg(model, amb, x)
                TRACES.append(sol.trace)
                worst = max(worst, rel(sol.value, ref))
                cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5
    record(1, ok, f"{cases} cases, max rel err {worst:.2e} (tol 1e-5), {elapsed:.0f}s (expected <= 120s)")
    write_json("criterion1.json", {"cases": cases, "max_rel_err": worst, "seconds": elapsed})
    assert ok


# -- 2 ------------------------------------------------------------------------------------


def test_2_full_problem_matches_extensive_form(tiny):
    t0 = time.perf_counter()
    rows, ok = [], True
    for S, (inst, model) in tiny.items():
        for r in RADII:
            amb = ambiguity(inst, r)
            ta = time.perf_counter()
            ref = extensive_oracle(model, amb)
            t_oracle = time.perf_counter() - ta
            errs = {
                "ccg-cg": rel(keep(run_ccg_dro_cg(model, amb, EXACT)).ub, ref.ub),
                "basic-ccg": rel(keep(run_basic_ccg(model, amb, EXACT)).ub, ref.ub),
                "benders": rel(keep(run_benders_dual(model, amb, EXACT)).ub, ref.ub),
            }
            good = errs["ccg-cg"] <= 1e-5 and errs["basic-ccg"] <= 1e-5 and errs["benders"] <= 1e-4
            ok &= good
            rows.append({"S": S, "r": r, "oracle": ref.ub, "oracle_seconds": t_oracle, **errs})
    elapsed = time.perf_counter() - t0
    within_time = elapsed <= 600
    worst = {k: max(row[k] for row in rows) for k in ("ccg-cg", "basic-ccg", "benders")}
    write_json("criterion2.json", {"rows": rows, "seconds": elapsed})
    record(2, ok and within_time,
           f"max rel err ccg-cg {worst['ccg-cg']:.1e}, basic {worst['basic-ccg']:.1e} (tol 1e-5), "
           f"benders {worst['benders']:.1e} (tol 1e-4); {elapsed:.0f}s of 600s")
    assert ok, rows
    assert within_time, f"took {elapsed:.0f}s"


# -- 3 ------------------------------------------------------------------------------------


def test_3_limit_cases(tiny, mid):
    rows, ok = [], True
    for label, (inst, model) in [("T2S2", tiny[2]), ("T2S3", tiny[3]), ("T12S5", mid)]:
        saa = solve_saa(model).ub
        ro = solve_ro(model, opts=EXACT).ub
        low = keep(run_ccg_dro_cg(model, ambiguity(inst, 0.0), EXACT)).ub
        high = keep(run_ccg_dro_cg(model, ambiguity(inst, 1e6), EXACT)).ub
        e0, e1 = rel(low, saa), rel(high, ro)
        ok &= e0 <= 1e-6 and e1 <= 1e-6
        rows.append({"instance": label, "saa": saa, "w0": low, "ro": ro, "w_big": high, "err0": e0, "err_big": e1})
    write_json("criterion3.json", rows)
    worst = max(max(r["err0"], r["err_big"]) for r in rows)
    record(3, ok, f"r=0 vs SAA and r=1e6 vs RO on 3 instances, max rel err {worst:.1e} (tol 1e-6)")
    assert ok, rows


# -- 4 ------------------------------------------------------------------------------------


def test_4_radius_monotone(mid):
    inst, model = mid
    radii = [0.25 * k for k in range(21)]
    values, pool = [], None
    t0 = time.perf_counter()
    for r in radii:
        rep = keep(run_ccg_dro_cg(model, ambiguity(inst, r), EXACT, warm=pool))
        pool = rep.extra["pool"]
        values.append(rep.ub)
    drops = [a - b for a, b in zip(values, values[1:])]
    ok = max(drops) <= 1e-6
    write_json("criterion4.json", {"radius": radii, "w": values, "seconds": time.perf_counter() - t0})
    record(4, ok, f"w(r) over {len(radii)} radii from {values[0]:.4f} to {values[-1]:.4f}, "
                  f"smallest step between neighbours {-max(drops):.2e} (must be >= -1e-6)")
    assert ok, list(zip(radii, values))


# -- 5 ------------------------------------------------------------------------------------


def bound_violations(rep, eps: float) -> list[str]:
    lbs = [r.lb for r in rep.log]
    ubs = [r.ub for r in rep.log]
    out = []
    if any(b < a for a, b in zip(lbs, lbs[1:])):
        out.append("lb decreased")
    if any(b > a for a, b in zip(ubs, ubs[1:])):
        out.append("ub increased")
    if any(r.ub < r.lb - 1e-6 * abs(r.lb) for r in rep.log):
        out.append("ub below lb")
    # an exact run stops at the master's MIP tolerance, not at a literal zero gap
    if rep.gap > eps + 1e-6:
        out.append(f"terminal gap {rep.gap:.2e}")
    return out


def test_5_bound_discipline(tiny, mid):
    # standalone runs so the check does not depend on the others having run first
    for inst, model in (tiny[2], tiny[3]):
        for eps in (0.0, 0.005):
            amb = ambiguity(inst, 0.3)
            opts = CcgOptions(eps=eps)
            keep(run_ccg_dro_cg(model, amb, opts), eps)
            keep(run_basic_ccg(model, amb, opts), eps)
            keep(run_benders_dual(model, amb, opts), eps)
    keep(solve_ro(mid[1], opts=EXACT))
    inst, model = mid
    x = random_first_stage_points(model, 1, seed=5)[0]
    TRACES.append(run_cg(model, ambiguity(inst, 1.0), x).trace)
    bad = []
    for rep, eps in REPORTS:
        for v in bound_violations(rep, eps):
            bad.append(f"{rep.algorithm}: {v}")
    trace_bad = sum(any(b < a - 1e-9 * max(1.0, abs(a)) for a, b in zip(t, t[1:])) for t in TRACES)
    ok = not bad and trace_bad == 0
    record(5, ok, f"{len(REPORTS)} runs, {len(bad)} bound violations; {len(TRACES)} CG traces, "
                  f"{trace_bad} decreasing")
    assert ok, bad


# -- 6 ------------------------------------------------------------------------------------


def test_6_structural_properties(tiny, mid):
    checked, off_lattice, too_big, budget_err = 0, 0, 0, 0.0
    for inst, model in (tiny[2], tiny[3], mid):
        for r in (0.3, 1.0):
            amb = ambiguity(inst, r)
            rep = keep(run_ccg_dro_cg(model, amb, EXACT))
            lats = amb.lattices()
            for s, codes in enumerate(rep.extra["pool"]):
                for c in codes:
                    off_lattice += not lats[s].valid(np.asarray(c))
            dist = rep.distribution
            for s, (pts, cds) in enumerate(zip(dist.points, dist.codes)):
                for p, c in zip(np.atleast_2d(pts), cds):
                    off_lattice += not (lats[s].valid(c) and np.array_equal(lats[s].scenario(c), p))
            too_big += dist.support_size(TOL_P) > inst.samples.S + 1
            w = discrete_wasserstein(dist, DiscreteDistribution.empirical(inst.samples))
            budget_err = max(budget_err, w - r)
            checked += 1

    inst, model = mid
    rng = np.random.default_rng(2024)
    oracle = RecourseOracle(model.tpl)
    xs = random_first_stage_points(model, 50, seed=77)
    lo, hi = inst.box.lower, inst.box.upper
    failures = 0
    for k in range(1000):
        x = xs[k % len(xs)]
        if k % 2:
            xi = np.where(rng.random(len(lo)) < 0.5, lo, hi)  # box vertex
        else:
            xi = rng.uniform(lo, hi)
        try:
            res = oracle.evaluate(x, xi)
            failures += not np.isfinite(res.objective)
        except Exception:  # noqa: BLE001
            failures += 1
    ok = off_lattice == 0 and too_big == 0 and budget_err <= 1e-6 and failures == 0
    record(6, ok, f"{checked} runs: {off_lattice} off-lattice points, {too_big} supports above S+1, "
                  f"max budget excess {budget_err:.1e} (tol 1e-6); recourse failures {failures}/1000")
    assert ok


# -- 7 ------------------------------------------------------------------------------------

BENCH_RADII = (0.5, 1.0, 5.0)
BENCH_SAMPLES = (3, 5, 20)
PROTOCOL = CcgOptions(eps=0.005, time_budget=7200.0)
_day_run: dict = {}


def day_run(day):
    if "rep" not in _day_run:
        inst, model = day
        _day_run["rep"] = keep(run_ccg_dro_cg(model, ambiguity(inst, 0.8), PROTOCOL), PROTOCOL.eps)
    return _day_run["rep"]


def test_7_protocol_run(day):
    rep = day_run(day)
    bad = bound_violations(rep, PROTOCOL.eps)
    ok = rep.status in ("optimal", "converged") and rep.iterations <= 5 and rep.time <= 7200 and not bad
    write_json("criterion7.json", {"status": rep.status, "objective": rep.ub, "lower_bound": rep.lb,
                                   "gap": rep.gap, "iterations": rep.iterations, "seconds": rep.time,
                                   "log": [[r.iteration, r.lb, r.ub, r.scenarios, r.master_time, r.inner_time]
                                           for r in rep.log]})
    record(7, ok, f"T=48 S=10 r=0.8: {rep.status} in {rep.iterations} iterations (max 5), {rep.time:.0f}s "
                  f"(budget 7200), gap {rep.gap:.2e} (eps 5e-3)")
    assert ok, bad


def test_7_bench_grid():
    # 18 runs of up to 7200 s each; opt in with MEMGDRO_BENCH=1
    if not os.environ.get("MEMGDRO_BENCH"):
        LINES.append("ACCEPTANCE 7 NOT RUN: bench grid (set MEMGDRO_BENCH=1)")
        pytest.skip("bench grid needs MEMGDRO_BENCH=1")
    rows, agree = [], True
    for S in BENCH_SAMPLES:
        inst = build_default_instance(48, S, seed=0)
        model = compile_model(inst)
        for r in BENCH_RADII:
            amb = ambiguity(inst, r)
            a = run_ccg_dro_cg(model, amb, PROTOCOL)
            b = run_basic_ccg(model, amb, PROTOCOL)
            # both are certified to within eps of the optimum, so their objectives are too
            same = rel(a.ub, b.ub) <= PROTOCOL.eps
            agree &= same
            rows.append([S, r, a.ub, a.gap, a.iterations, round(a.time, 2),
                         b.ub, b.gap, b.iterations, round(b.time, 2), int(a.time <= b.time)])
    RESULTS.mkdir(exist_ok=True)
    with open(RESULTS / "bench_T48.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["S", "radius", "ccg_cg_obj", "ccg_cg_gap", "ccg_cg_iter", "ccg_cg_s",
                    "basic_obj", "basic_gap", "basic_iter", "basic_s", "ccg_cg_faster"])
        w.writerows(rows)
    faster = sum(r[-1] for r in rows)
    record(7, agree, f"bench agreement within eps {'ok' if agree else 'BROKEN'}; "
                     f"ccg-cg faster in {faster}/9 cells (recorded, target 7)")
    assert agree, rows


# -- 8 ------------------------------------------------------------------------------------


def test_8_evaluation_consistency(tiny, mid):
    worst, incons = 0.0, 0
    for inst, model in (tiny[2], tiny[3], mid):
        saa = solve_saa(model)
        oos = evaluate_out_of_sample(model, saa.x, inst.samples)
        worst = max(worst, rel(oos.oosc, saa.ub))
    inst, model = mid
    test = held_out_samples(inst, 1000, seed=0)
    schedules = [solve_saa(model).x, keep(run_ccg_dro_cg(model, ambiguity(inst, 1.0), EXACT)).x]
    for x in schedules:
        oos = evaluate_out_of_sample(model, x, test)
        incons += (oos.pels == 0) != (oos.eeens <= LOSS_THRESHOLD)
        incons += (oos.phls == 0) != (oos.ehens <= LOSS_THRESHOLD)
    ok = worst <= 1e-8 and incons == 0
    record(8, ok, f"SAA reproduced to rel {worst:.1e} (tol 1e-8); {incons} PELS/EEENS inconsistencies")
    assert ok


# -- 9 ------------------------------------------------------------------------------------


def test_9_parallel_pricing(day):
    inst, model = day
    serial = day_run(day)
    workers = max(4, os.cpu_count() or 1)
    par = keep(run_ccg_dro_cg(model, ambiguity(inst, 0.8), replace(PROTOCOL, parallelism=workers)), PROTOCOL.eps)
    diff = rel(par.ub, serial.ub)
    speedup = serial.time / par.time
    ok = diff <= 1e-9
    write_json("criterion9.json", {"workers": workers, "cpus": os.cpu_count(), "serial_s": serial.time,
                                   "parallel_s": par.time, "speedup": speedup, "rel_diff": diff})
    record(9, ok, f"{workers} workers on {os.cpu_count()} cpu(s): objective rel diff {diff:.1e} (tol 1e-9); "
                  f"speedup {speedup:.2f}x recorded (target 1.5x)")
    assert ok
