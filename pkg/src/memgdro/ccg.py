"""Outer column-and-constraint generation for the distributionally robust dispatch.

The master problem is the day-ahead MILP plus, for every scenario generated so
far, a copy of the re-dispatch variables and one epigraph row::

    min  c.x + sum_s alpha_s + r beta
    s.t. first-stage rows
         F y_k + G x + K xi_k (senses) h                      for every block k
         pi_s (d.y_k + dx.x) - alpha_s - pi_s dist_k beta <= 0   (block k belongs to sample s)
         beta >= 0

Its optimum is a lower bound; ``c.x + (worst-case expectation at x)`` from the
inner column generation is an upper bound.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .ambiguity import AmbiguitySet, DiscreteDistribution, code_key, lattice_guard
from .formulation import CompiledModel, _clean_binaries
from .solver import LIMIT, Limits, MathProgram, SolverError, solve
from .wcep import TOL_P, CgOptions, WcepSolution, WcepSolver

log = logging.getLogger("memgdro.ccg")


@dataclass
class CcgOptions:
    eps: float = 0.005
    time_budget: float = 7200.0
    parallelism: int = 1
    mmp_gap: float | None = None  # None: eps/10, or 1e-7 when eps is 0
    tol_p: float = TOL_P
    max_iter: int | None = None
    cg: CgOptions = field(default_factory=CgOptions)
    mip_start: bool = True
    # skip exact pricing while ascent still feeds the master new scenarios
    lazy_certify: bool = True

    def master_gap(self) -> float:
        # LB is the master's dual bound, so any gap below eps keeps the bounds valid
        if self.mmp_gap is not None:
            return self.mmp_gap
        return self.eps / 10 if self.eps > 0 else 1e-7


@dataclass
class IterationRecord:
    iteration: int
    lb: float
    ub: float
    gap: float
    scenarios: int
    value: float  # c.x + inner value at this schedule (a lower estimate when not certified)
    master_time: float
    inner_time: float
    inner_rounds: int = 0
    added: int = 0


@dataclass
class SolveReport:
    algorithm: str
    status: str  # "optimal", "converged" (no new scenarios), "limit"
    ub: float
    lb: float
    gap: float
    iterations: int
    scenarios: int
    time: float
    x: np.ndarray | None = None
    schedule: dict | None = None
    distribution: DiscreteDistribution | None = None
    log: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.ub

    def to_dict(self, timing: bool = True) -> dict:
        out = {"algorithm": self.algorithm, "status": self.status, "ub": self.ub, "lb": self.lb,
               "gap": self.gap, "iterations": self.iterations, "scenarios": self.scenarios,
               "log": [asdict(r) for r in self.log], "extra": _jsonable(self.extra)}
        if timing:
            out["time"] = self.time
        else:
            for r in out["log"]:
                r.pop("master_time", None)
                r.pop("inner_time", None)
        return out

    def to_json(self, path, timing: bool = True) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(timing), fh, indent=1, sort_keys=True)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def relative_gap(ub: float, lb: float) -> float:
    if not (np.isfinite(ub) and np.isfinite(lb)):
        return np.inf
    diff = max(0.0, ub - lb)
    return diff / abs(lb) if lb != 0 else diff


# -- master problem --------------------------------------------------------------------


@dataclass
class MasterResult:
    x: np.ndarray
    alpha: np.ndarray
    beta: float
    objective: float
    bound: float
    status: str
    time: float


class MasterProblem:
    """First stage plus scenario blocks; blocks are compiled once and kept."""

    def __init__(self, model: CompiledModel, sample_probs, radius: float, use_beta: bool = True):
        self.model = model
        self.pi = np.asarray(sample_probs, float)
        self.S = len(self.pi)
        self.radius = float(radius)
        self.use_beta = use_beta
        self.blocks: list[tuple[int, np.ndarray, float]] = []  # (sample, xi, distance)
        self._keys: set = set()
        tpl = model.tpl
        self._F = tpl.F.tocoo()
        self._G = tpl.G.tocoo()
        self._d_nz = np.flatnonzero(tpl.d)
        self._dx_nz = np.flatnonzero(tpl.dx)

    @property
    def n_x(self) -> int:
        return self.model.first.n

    @property
    def n_head(self) -> int:
        return self.n_x + self.S + (1 if self.use_beta else 0)

    def __len__(self):
        return len(self.blocks)

    def add(self, s: int, xi: np.ndarray, distance: float, key=None) -> bool:
        key = (s, key if key is not None else np.asarray(xi, float).tobytes())
        if key in self._keys:
            return False
        self._keys.add(key)
        self.blocks.append((s, np.asarray(xi, float), float(distance)))
        return True

    def has(self, s: int, key) -> bool:
        return (s, key) in self._keys

    def program(self) -> MathProgram:
        first, tpl = self.model.first, self.model.tpl
        nx, S, nh, ny, R = self.n_x, self.S, self.n_head, tpl.n_y, tpl.n_rows
        nb = len(self.blocks)
        A0 = first.A.tocoo()
        rows, cols, vals = [A0.row], [A0.col], [A0.data]
        r0 = first.A.shape[0]
        rhs = [first.b]
        senses = [first.senses]
        F, G = self._F, self._G
        for k, (s, xi, dist) in enumerate(self.blocks):
            base = r0 + k * (R + 1)
            yoff = nh + k * ny
            rows += [F.row + base, G.row + base]
            cols += [F.col + yoff, G.col]
            vals += [F.data, G.data]
            rhs.append(tpl.h - tpl.K @ xi)
            senses.append(tpl.senses)
            cut = base + R
            p = self.pi[s]
            cr = [self._d_nz + yoff, self._dx_nz, [nx + s]]
            cv = [p * tpl.d[self._d_nz], p * tpl.dx[self._dx_nz], [-1.0]]
            if self.use_beta and dist != 0:
                cr.append([nx + S])
                cv.append([-p * dist])
            cc = np.concatenate([np.asarray(a, int) for a in cr])
            rows.append(np.full(len(cc), cut))
            cols.append(cc)
            vals.append(np.concatenate([np.asarray(a, float) for a in cv]))
            rhs.append([0.0])
            senses.append(["<"])
        m = r0 + nb * (R + 1)
        n = nh + nb * ny
        A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, n))
        c = np.zeros(n)
        c[:nx] = first.c
        c[nx:nx + S] = 1.0
        lb = np.concatenate([first.lb, np.full(S, -np.inf), [0.0] if self.use_beta else [],
                             np.tile(tpl.lb, nb)])
        ub = np.concatenate([first.ub, np.full(S, np.inf), [np.inf] if self.use_beta else [],
                             np.full(nb * ny, np.inf)])
        if self.use_beta:
            c[nx + S] = self.radius
        integ = np.zeros(n, bool)
        integ[:nx] = first.integrality
        return MathProgram(c, A, np.concatenate([np.asarray(v) for v in senses]),
                           np.concatenate([np.asarray(v, float) for v in rhs]), lb, ub, integ)

    def start_vector(self, x: np.ndarray, ys: list, alpha: np.ndarray, beta: float) -> np.ndarray:
        parts = [x, alpha] + ([[beta]] if self.use_beta else []) + list(ys)
        return np.concatenate([np.asarray(p, float) for p in parts])

    def solve(self, gap: float = 1e-7, time_limit: float | None = None, start=None,
              options: dict | None = None) -> MasterResult:
        prog = self.program()
        sol = solve(prog, Limits(time_limit=time_limit, gap=gap, extra=dict(options or {})), start=start)
        if not sol.has_point:
            raise SolverError(f"master problem {sol.status}")
        nx, S = self.n_x, self.S
        x = _clean_binaries(self.model.first, sol.x[:nx])
        beta = float(sol.x[nx + S]) if self.use_beta else 0.0
        bound = sol.dual_bound if np.isfinite(sol.dual_bound) else sol.objective
        return MasterResult(x, sol.x[nx:nx + S].copy(), max(0.0, beta), float(sol.objective), float(bound),
                            sol.status, sol.time)


def _decode(model: CompiledModel, x: np.ndarray) -> dict:
    return {k: v.tolist() for k, v in model.xmap.decode(x).items()}


# -- C&CG with inner column generation -------------------------------------------------


def run_ccg_dro_cg(model: CompiledModel, amb: AmbiguitySet, opts: CcgOptions | None = None,
                   name: str = "ccg-cg", warm: list | None = None) -> SolveReport:
    """C&CG with column-generation pricing of the worst-case distribution.

    ``warm`` holds per-sample lattice code vectors (``extra["pool"]`` of an
    earlier run on the same samples and box); they seed both the master and
    the pricing pool. The lattice does not depend on the radius, so a sweep
    can pass each run's pool to the next.
    """
    opts = opts or CcgOptions()
    cg_opts = replace(opts.cg, parallelism=opts.parallelism)
    t0 = time.perf_counter()
    inner = WcepSolver(model, amb, cg_opts)
    master = MasterProblem(model, amb.probs, amb.radius)
    lattices = inner.lattices
    upsilon: list[list[np.ndarray]] = [[] for _ in range(amb.S)]
    zero = np.zeros(amb.box.dim, np.int8)
    for s in range(amb.S):
        master.add(s, lattices[s].sample, 0.0, code_key(zero))
        upsilon[s].append(zero)
        for codes in (warm[s] if warm else []):
            codes = np.asarray(codes, np.int8)
            if not lattices[s].valid(codes):
                raise ValueError(f"warm code vector for sample {s} is off the lattice")
            if master.add(s, lattices[s].scenario(codes), lattices[s].distance(codes), code_key(codes)):
                upsilon[s].append(codes)
    lb, ub = -np.inf, np.inf
    best_x, best_dist = None, None
    records: list[IterationRecord] = []
    status = "limit"
    start = None
    it = 0

    def left() -> float:
        return max(0.0, opts.time_budget - (time.perf_counter() - t0))

    while True:
        it += 1
        remaining = opts.time_budget - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        m = master.solve(opts.master_gap(), remaining, start if opts.mip_start else None)
        lb = max(lb, m.bound)
        ti = time.perf_counter()
        lazy = opts.lazy_certify and cg_opts.heuristic
        wc = inner.run(m.x, warm=upsilon, exact=not lazy, time_limit=left())
        added = _absorb(master, upsilon, wc, opts.tol_p)
        if not wc.certified and added == 0 and left() > 0:
            wc = inner.run(m.x, warm=upsilon, exact=True, time_limit=left())
            added = _absorb(master, upsilon, wc, opts.tol_p)
        inner_time = time.perf_counter() - ti
        value = float(model.first.c @ m.x) + wc.value
        if wc.certified and value < ub:
            ub, best_x, best_dist = value, m.x, wc.distribution
        gap = relative_gap(ub, lb)
        records.append(IterationRecord(it, lb, ub, gap, len(master), value, m.time, inner_time, wc.rounds, added))
        log.info("ccg it=%d lb=%.8g ub=%.8g gap=%.3g scenarios=%d added=%d", it, lb, ub, gap, len(master), added)
        if m.status == LIMIT:
            break
        if gap <= opts.eps:
            status = "optimal"
            break
        if added == 0 and wc.certified:
            # every support scenario already sits in the master, so the master
            # value at x equals c.x + inner value and the bounds must meet
            status = "converged"
            tol = max(1e-6, 10 * opts.master_gap()) * max(1.0, abs(lb))
            if ub - lb > tol:
                log.warning("no new scenarios but gap %.3g remains (master tolerance?)", ub - lb)
            break
        if opts.max_iter and it >= opts.max_iter:
            break
        if opts.mip_start:
            start = _mip_start(master, inner.oracle, m.x, wc.beta)
    return SolveReport(name, status, ub, lb, relative_gap(ub, lb), it, len(master), time.perf_counter() - t0,
                       best_x, _decode(model, best_x) if best_x is not None else None, best_dist, records,
                       {"cg_rounds": [r.inner_rounds for r in records], "big_m": inner.big_m,
                        "pool": [[c.tolist() for c in u] for u in upsilon]})


def _absorb(master: MasterProblem, upsilon: list, wc: WcepSolution, tol_p: float) -> int:
    added = 0
    for s, sup in enumerate(wc.supports):
        for p in sup:
            if p.prob > tol_p and master.add(s, p.xi, p.distance, code_key(p.codes)):
                upsilon[s].append(p.codes)
                added += 1
    return added


def _mip_start(master: MasterProblem, oracle, x, beta: float) -> np.ndarray | None:
    """Feasible master point at the current schedule: recourse solutions plus the given beta."""
    tpl = master.model.tpl
    try:
        ys = [oracle.evaluate(x, xi).y for (_, xi, _) in master.blocks]
    except Exception:  # noqa: BLE001 - a start is optional
        return None
    qs = [float(tpl.d @ y + tpl.dx @ x) for y in ys]
    alpha = np.full(master.S, -np.inf)
    for (s, _, dist), q in zip(master.blocks, qs):
        alpha[s] = max(alpha[s], master.pi[s] * (q - beta * dist))
    return master.start_vector(x, ys, alpha, beta)


# -- extensive-form oracle ---------------------------------------------------------------


# The full-lattice model is mostly LP work over a few binaries; primal heuristics,
# sub-MIPs and restarts each re-solve that LP and cost more than they save.
ORACLE_OPTIONS = {"mip_heuristic_effort": 0.0, "mip_heuristic_run_rens": False,
                  "mip_heuristic_run_rins": False, "mip_allow_restart": False}


def extensive_oracle(model: CompiledModel, amb: AmbiguitySet, reduce: bool = True, guard: int = 100_000,
                     gap: float = 1e-7, time_limit: float | None = None) -> SolveReport:
    """Master problem with every lattice point of every sample, solved once."""
    t0 = time.perf_counter()
    master = MasterProblem(model, amb.probs, amb.radius)
    for s, lat in enumerate(amb.lattices(reduce)):
        lattice_guard(lat, guard)
        for codes in lat.enumerate():
            master.add(s, lat.scenario(codes), lat.distance(codes), code_key(codes))
    m = master.solve(gap, time_limit, options=ORACLE_OPTIONS)
    return SolveReport("extensive", "optimal" if m.status == "optimal" else m.status, m.objective, m.bound,
                       relative_gap(m.objective, m.bound), 1, len(master), time.perf_counter() - t0, m.x,
                       _decode(model, m.x))
