"""Reference algorithms: sample average, box-robust, basic C&CG and Benders on the dual reformulation.

All of them return the same :class:`~memgdro.ccg.SolveReport` as the main
algorithm so results can be tabulated side by side.
"""
from __future__ import annotations

import logging
import time
from dataclasses import replace

import numpy as np
import scipy.sparse as sp

from .ambiguity import AmbiguitySet, DiscreteDistribution, code_key
from .ccg import (CcgOptions, IterationRecord, MasterProblem, MasterResult, SolveReport, _decode,
                  _mip_start, relative_gap)
from .formulation import CompiledModel, _clean_binaries, solve_first_stage_only
from .instance import SampleSet, UncertaintyBox
from .solver import LIMIT, Limits, MathProgram, SolverError, solve
from .wcep import WcepSolver

log = logging.getLogger("memgdro.baselines")


# -- sample average --------------------------------------------------------------------


def saa_program(model: CompiledModel, samples: SampleSet) -> MathProgram:
    """``min c.x + sum_s pi_s (d.y_s + dx.x)`` with one re-dispatch copy per sample."""
    first, tpl = model.first, model.tpl
    S, nx, ny = samples.S, first.n, tpl.n_y
    pi = samples.probabilities
    A = sp.bmat([[first.A, None]] + [[tpl.G, sp.hstack([sp.csr_matrix((tpl.n_rows, s * ny)), tpl.F,
                                                         sp.csr_matrix((tpl.n_rows, (S - s - 1) * ny))])]
                                     for s in range(S)], format="csr")
    c = np.concatenate([first.c + tpl.dx * pi.sum()] + [p * tpl.d for p in pi])
    b = np.concatenate([first.b] + [tpl.h - tpl.K @ xi for xi in samples.samples])
    senses = np.concatenate([first.senses] + [tpl.senses] * S)
    lb = np.concatenate([first.lb, np.tile(tpl.lb, S)])
    ub = np.concatenate([first.ub, np.full(S * ny, np.inf)])
    integ = np.concatenate([first.integrality, np.zeros(S * ny, bool)])
    return MathProgram(c, A, senses, b, lb, ub, integ)


def solve_saa(model: CompiledModel, samples: SampleSet | None = None, gap: float = 1e-9,
              time_limit: float | None = None) -> SolveReport:
    t0 = time.perf_counter()
    samples = samples if samples is not None else model.inst.samples
    sol = solve(saa_program(model, samples), Limits(time_limit=time_limit, gap=gap))
    if not sol.has_point:
        raise SolverError(f"sample-average MILP {sol.status}")
    x = _clean_binaries(model.first, sol.x[:model.first.n])
    bound = sol.dual_bound if np.isfinite(sol.dual_bound) else sol.objective
    return SolveReport("saa", "optimal" if sol.ok else sol.status, float(sol.objective), float(bound),
                       relative_gap(sol.objective, bound), 1, samples.S, time.perf_counter() - t0, x,
                       _decode(model, x), DiscreteDistribution.empirical(samples))


# -- box-robust -------------------------------------------------------------------------


def solve_ro(model: CompiledModel, box: UncertaintyBox | None = None, opts: CcgOptions | None = None,
             name: str = "ro") -> SolveReport:
    """Min-max over the box by classical C&CG; scenarios are box vertices found by the lattice MILP.

    The vertex set is a lattice anchored at the lower corner, searched with
    zero transport price, so the pricing MILP returns ``max_vertex Q(x, xi)``.
    """
    opts = opts or CcgOptions()
    box = box if box is not None else model.inst.box
    t0 = time.perf_counter()
    anchor = AmbiguitySet(SampleSet(np.asarray(box.lower, float)[None, :], np.ones(1)), 0.0, box)
    inner = WcepSolver(model, anchor, opts.cg)
    lattice = inner.lattices[0]
    master = MasterProblem(model, np.ones(1), 0.0, use_beta=False)
    zero = np.zeros(box.dim, np.int8)
    master.add(0, lattice.scenario(zero), 0.0, code_key(zero))
    lb, ub, best_x, best_xi = -np.inf, np.inf, None, None
    records, status, start, it = [], "limit", None, 0
    while True:
        it += 1
        remaining = opts.time_budget - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        m = master.solve(opts.master_gap(), remaining, start if opts.mip_start else None)
        lb = max(lb, m.bound)
        ti = time.perf_counter()
        res = inner.price(m.x, 0, 0.0, 0.0)
        inner_time = time.perf_counter() - ti
        value = float(model.first.c @ m.x) + res.q
        if value < ub:
            ub, best_x, best_xi = value, m.x, lattice.scenario(res.codes)
        gap = relative_gap(ub, lb)
        added = int(master.add(0, lattice.scenario(res.codes), 0.0, code_key(res.codes)))
        records.append(IterationRecord(it, lb, ub, gap, len(master), value, m.time, inner_time, 1, added))
        log.info("ro it=%d lb=%.8g ub=%.8g gap=%.3g vertices=%d", it, lb, ub, gap, len(master))
        if m.status == LIMIT:
            break
        if gap <= opts.eps:
            status = "optimal"
            break
        if not added:
            status = "converged"
            break
        if opts.max_iter and it >= opts.max_iter:
            break
        start = _mip_start(master, inner.oracle, m.x, 0.0)
    dist = None
    if best_xi is not None:
        dist = DiscreteDistribution(np.ones(1), [best_xi[None, :]], [np.ones(1)])
    return SolveReport(name, status, ub, lb, relative_gap(ub, lb), it, len(master), time.perf_counter() - t0,
                       best_x, _decode(model, best_x) if best_x is not None else None, dist, records,
                       {"big_m": inner.big_m})


# -- basic C&CG ------------------------------------------------------------------------


def run_basic_ccg(model: CompiledModel, amb: AmbiguitySet, opts: CcgOptions | None = None,
                  name: str = "basic-ccg") -> SolveReport:
    """C&CG on the dual reformulation: one lattice search per sample at the master's (alpha, beta).

    With ``beta`` fixed at the master value and ``alpha_s`` raised to the
    searched maximum, the inner dual is feasible, so
    ``c.x + r beta + sum_s max_xi pi_s (Q - beta dist)`` is an upper bound.
    """
    opts = opts or CcgOptions()
    t0 = time.perf_counter()
    inner = WcepSolver(model, amb, replace(opts.cg, parallelism=opts.parallelism))
    lattices = inner.lattices
    master = MasterProblem(model, amb.probs, amb.radius)
    zero = np.zeros(amb.box.dim, np.int8)
    for s in range(amb.S):
        master.add(s, lattices[s].sample, 0.0, code_key(zero))
    lb, ub, best_x = -np.inf, np.inf, None
    records, status, start, it = [], "limit", None, 0
    while True:
        it += 1
        remaining = opts.time_budget - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        m = master.solve(opts.master_gap(), remaining, start if opts.mip_start else None)
        lb = max(lb, m.bound)
        ti = time.perf_counter()
        res = inner.price_all(m.x, m.alpha, m.beta)
        inner_time = time.perf_counter() - ti
        worst = [r.reduced_cost + m.alpha[s] for s, r in enumerate(res)]
        value = float(model.first.c @ m.x) + amb.radius * m.beta + float(np.sum(worst))
        if value < ub:
            ub, best_x = value, m.x
        gap = relative_gap(ub, lb)
        tol = opts.cg.tol_rc * max(1.0, abs(value))
        added = 0
        for s, r in enumerate(res):
            if r.reduced_cost > tol:
                lat = lattices[s]
                added += master.add(s, lat.scenario(r.codes), r.distance, code_key(r.codes))
        records.append(IterationRecord(it, lb, ub, gap, len(master), value, m.time, inner_time, 1, added))
        log.info("basic it=%d lb=%.8g ub=%.8g gap=%.3g scenarios=%d", it, lb, ub, gap, len(master))
        if m.status == LIMIT:
            break
        if gap <= opts.eps:
            status = "optimal"
            break
        if not added:
            status = "converged"
            break
        if opts.max_iter and it >= opts.max_iter:
            break
        start = _mip_start(master, inner.oracle, m.x, m.beta)
    dist = inner.run(best_x).distribution if best_x is not None else None
    return SolveReport(name, status, ub, lb, relative_gap(ub, lb), it, len(master), time.perf_counter() - t0,
                       best_x, _decode(model, best_x) if best_x is not None else None, dist, records,
                       {"big_m": inner.big_m})


# -- Benders on the dual reformulation ---------------------------------------------------


class BendersMaster:
    """``min c.x + sum_s alpha_s + r beta`` over first-stage rows and dual cuts.

    A cut for sample ``s``, scenario ``xi`` at distance ``dist`` and a
    re-dispatch dual vertex ``lam`` reads::

        pi_s ((dx + G^T lam).x + (K xi - h).lam - dist beta) - alpha_s <= 0

    Weak duality makes the bracket a lower bound on ``Q(x, xi)`` for every
    ``x``, so each cut is valid; it is tight at the schedule that produced ``lam``.
    """

    def __init__(self, model: CompiledModel, sample_probs, radius: float):
        self.model = model
        self.pi = np.asarray(sample_probs, float)
        self.S = len(self.pi)
        self.radius = float(radius)
        self.rows: list[np.ndarray] = []
        self.rhs: list[float] = []
        self._keys: set = set()

    def __len__(self):
        return len(self.rows)

    def add_cut(self, s: int, xi, dist: float, lam) -> bool:
        tpl, nx = self.model.tpl, self.model.first.n
        lam = np.asarray(lam, float)
        key = (s, np.asarray(xi, float).tobytes(), np.round(lam, 9).tobytes())
        if key in self._keys:
            return False
        self._keys.add(key)
        p = self.pi[s]
        row = np.zeros(nx + self.S + 1)
        row[:nx] = p * (tpl.dx + tpl.G.T @ lam)
        row[nx + s] = -1.0
        row[nx + self.S] = -p * dist
        self.rows.append(row)
        self.rhs.append(-p * float((tpl.K @ np.asarray(xi, float) - tpl.h) @ lam))
        return True

    def solve(self, gap: float, time_limit: float | None) -> MasterResult:
        first = self.model.first
        nx, S = first.n, self.S
        A = sp.vstack([sp.hstack([first.A, sp.csr_matrix((first.A.shape[0], S + 1))]),
                       sp.csr_matrix(np.array(self.rows))], format="csr")
        c = np.concatenate([first.c, np.ones(S), [self.radius]])
        senses = np.concatenate([first.senses, ["<"] * len(self.rows)])
        b = np.concatenate([first.b, self.rhs])
        lb = np.concatenate([first.lb, np.full(S, -np.inf), [0.0]])
        ub = np.concatenate([first.ub, np.full(S + 1, np.inf)])
        integ = np.concatenate([first.integrality, np.zeros(S + 1, bool)])
        sol = solve(MathProgram(c, A, senses, b, lb, ub, integ), Limits(time_limit=time_limit, gap=gap))
        if not sol.has_point:
            raise SolverError(f"Benders master {sol.status}")
        x = _clean_binaries(first, sol.x[:nx])
        bound = sol.dual_bound if np.isfinite(sol.dual_bound) else sol.objective
        return MasterResult(x, sol.x[nx:nx + S].copy(), max(0.0, float(sol.x[nx + S])), float(sol.objective),
                            float(bound), sol.status, sol.time)

    def cut_slack(self, k: int, m: MasterResult) -> float:
        """``rhs - lhs`` of cut ``k`` at a master point; negative means the point violates it."""
        z = np.concatenate([m.x, m.alpha, [m.beta]])
        return float(self.rhs[k] - self.rows[k] @ z)


def run_benders_dual(model: CompiledModel, amb: AmbiguitySet, opts: CcgOptions | None = None,
                     name: str = "benders") -> SolveReport:
    """Benders decomposition of the dual reformulation.

    Each iteration solves the worst-case expectation at the master schedule by
    column generation and adds one cut per support scenario of the worst-case
    distribution, using the dual vertex of that scenario's re-dispatch LP.
    The first cuts come from the samples at the day-ahead-only schedule.
    """
    opts = opts or CcgOptions()
    t0 = time.perf_counter()
    inner = WcepSolver(model, amb, replace(opts.cg, parallelism=opts.parallelism))
    master = BendersMaster(model, amb.probs, amb.radius)
    x0 = solve_first_stage_only(model)
    for s, lat in enumerate(inner.lattices):
        master.add_cut(s, lat.sample, 0.0, inner.oracle.evaluate(x0, lat.sample).duals)
    lb, ub, best_x, best_dist = -np.inf, np.inf, None, None
    records, status, it = [], "limit", 0
    slack, excess = [], []
    warm = None
    while True:
        it += 1
        remaining = opts.time_budget - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        m = master.solve(opts.master_gap(), remaining)
        x, mstatus, mtime = m.x, m.status, m.time
        lb = max(lb, m.bound)
        ti = time.perf_counter()
        wc = inner.run(x, warm=warm)
        inner_time = time.perf_counter() - ti
        value = float(model.first.c @ x) + wc.value
        if value < ub:
            ub, best_x, best_dist = value, x, wc.distribution
        gap = relative_gap(ub, lb)
        added = 0
        for s, sup in enumerate(wc.supports):
            for p in sup:
                lam = inner.oracle.evaluate(x, p.xi).duals
                added += master.add_cut(s, p.xi, p.distance, lam)
        # separation check: the incumbent violates a new cut unless it already prices v(x) exactly
        slack.append(min((master.cut_slack(k, m) for k in range(len(master) - added, len(master))),
                         default=np.inf))
        excess.append(value - m.objective)
        warm = wc.pools
        records.append(IterationRecord(it, lb, ub, gap, len(master), value, mtime, inner_time, wc.rounds, added))
        log.info("benders it=%d lb=%.8g ub=%.8g gap=%.3g cuts=%d", it, lb, ub, gap, len(master))
        if mstatus == LIMIT:
            break
        if gap <= opts.eps:
            status = "optimal"
            break
        if not added:
            status = "converged"
            break
        if opts.max_iter and it >= opts.max_iter:
            break
    return SolveReport(name, status, ub, lb, relative_gap(ub, lb), it, len(master), time.perf_counter() - t0,
                       best_x, _decode(model, best_x) if best_x is not None else None, best_dist, records,
                       {"cuts": len(master), "big_m": inner.big_m, "new_cut_slack": slack,
                        "value_over_master": excess})
