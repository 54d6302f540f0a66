"""Backend-neutral LP/MILP layer.

Every algorithm in the package talks to a solver through :class:`MathProgram`
and :func:`solve` (one-shot) or :class:`LPSession` (repeated right-hand-side
changes on a fixed LP).  Two backends exist:

``highs``
    HiGHS through ``highspy`` (default).
``scipy``
    HiGHS through ``scipy.optimize.linprog``/``milp``.  No persistent session
    reuse and no LP export, but no extra dependency.

The backend is picked with the ``MEMGDRO_SOLVER`` environment variable or the
``backend`` argument.

Dual convention: ``Solution.duals[i]`` is the marginal of the objective with
respect to ``rhs[i]``, for both minimization and maximization programs.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

FEAS_TOL = 1e-6
INF = np.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"
ERROR = "error"


class SolverError(RuntimeError):
    """Backend missing or a numerical failure the caller must not ignore."""


@dataclass(frozen=True, eq=False)
class MathProgram:
    """``opt c.x + offset  s.t.  A x (senses) rhs,  lb <= x <= ub``.

    ``senses`` holds one of ``'<'``, ``'>'``, ``'='`` per row.  A program is a
    MILP iff ``integrality`` has any true entry.
    """

    c: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray | None = None
    sense: str = "min"
    offset: float = 0.0

    def __post_init__(self):
        n = len(self.c)
        m = len(self.rhs)
        if self.A.shape != (m, n):
            raise ValueError(f"A has shape {self.A.shape}, expected {(m, n)}")
        if len(self.senses) != m:
            raise ValueError("senses and rhs lengths differ")
        if len(self.lb) != n or len(self.ub) != n:
            raise ValueError("bounds do not match the number of columns")
        if self.integrality is not None and len(self.integrality) != n:
            raise ValueError("integrality mask does not match the number of columns")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown objective sense {self.sense!r}")
        bad = set(np.unique(self.senses)) - {"<", ">", "="}
        if bad:
            raise ValueError(f"unknown row senses {sorted(bad)}")

    @property
    def kind(self) -> str:
        if self.integrality is not None and np.any(self.integrality):
            return "MILP"
        return "LP"

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def row_bounds(self, rhs: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        rhs = self.rhs if rhs is None else rhs
        lo = np.where(self.senses == "<", -INF, rhs)
        hi = np.where(self.senses == ">", INF, rhs)
        return lo.astype(float), hi.astype(float)


@dataclass
class Solution:
    status: str
    objective: float = np.nan
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    basic: bool = False
    time: float = 0.0
    dual_bound: float = np.nan
    mip_gap: float = np.nan
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    @property
    def has_point(self) -> bool:
        return self.x is not None


@dataclass
class Limits:
    time_limit: float | None = None
    gap: float = 0.0
    threads: int = 1
    extra: dict = field(default_factory=dict)


def default_backend() -> str:
    return os.environ.get("MEMGDRO_SOLVER", "highs").lower()


def _have_highspy() -> bool:
    try:
        import highspy  # noqa: F401
    except ImportError:
        return False
    return True


def solve(p: MathProgram, limits: Limits | None = None, backend: str | None = None,
          start: np.ndarray | None = None) -> Solution:
    """Solve ``p`` once.

    LP optima are vertex solutions (simplex, no interior point without
    crossover) and carry row duals.  MILP solutions carry no duals.
    ``start`` is an optional feasible point handed to the MILP search (HiGHS only).
    """
    limits = limits or Limits()
    backend = backend or default_backend()
    if backend == "highs":
        if not _have_highspy():
            raise SolverError("backend 'highs' requested but highspy is not installed")
        runner = _HighsRunner(p, limits)
        if start is not None and p.kind == "MILP":
            runner.set_start(start)
        return runner.run()
    if backend == "scipy":
        return _solve_scipy(p, limits)
    raise SolverError(f"unknown solver backend {backend!r}")


class LPSession:
    """Persistent LP whose right-hand side changes between solves.

    Not thread safe; create one session per worker.
    """

    def __init__(self, p: MathProgram, backend: str | None = None):
        if p.kind != "LP":
            raise ValueError("LPSession only handles LPs")
        self.program = p
        self.backend = backend or default_backend()
        self._runner = _HighsRunner(p, Limits()) if self.backend == "highs" else None

    def solve(self, rhs: np.ndarray) -> Solution:
        if self._runner is None:
            q = MathProgram(self.program.c, self.program.A, self.program.senses, np.asarray(rhs, float),
                            self.program.lb, self.program.ub, None, self.program.sense, self.program.offset)
            return _solve_scipy(q, Limits())
        return self._runner.resolve(rhs)


# -- HiGHS through highspy -------------------------------------------------------------


class _HighsRunner:
    def __init__(self, p: MathProgram, limits: Limits):
        import highspy

        self._hs = highspy
        self.p = p
        self.limits = limits
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", int(limits.threads))
        h.setOptionValue("random_seed", 0)
        if p.kind == "LP":
            h.setOptionValue("solver", "simplex")
        else:
            h.setOptionValue("mip_rel_gap", float(limits.gap))
            h.setOptionValue("mip_abs_gap", 0.0 if limits.gap == 0 else 1e-9)
            h.setOptionValue("mip_feasibility_tolerance", 1e-7)
        if limits.time_limit is not None:
            h.setOptionValue("time_limit", float(limits.time_limit))
        for k, v in limits.extra.items():
            h.setOptionValue(k, v)
        h.passModel(self._lp(p))
        self.h = h

    def _lp(self, p: MathProgram):
        hs = self._hs
        lp = hs.HighsLp()
        m, n = p.A.shape
        csc = sp.csc_matrix(p.A)
        csc.sort_indices()
        lp.num_col_ = n
        lp.num_row_ = m
        lp.col_cost_ = np.asarray(p.c, float)
        lp.col_lower_ = np.where(np.isfinite(p.lb), p.lb, -hs.kHighsInf).astype(float)
        lp.col_upper_ = np.where(np.isfinite(p.ub), p.ub, hs.kHighsInf).astype(float)
        lo, hi = p.row_bounds()
        lp.row_lower_ = np.where(np.isfinite(lo), lo, -hs.kHighsInf)
        lp.row_upper_ = np.where(np.isfinite(hi), hi, hs.kHighsInf)
        lp.a_matrix_.format_ = hs.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr.astype(np.int32)
        lp.a_matrix_.index_ = csc.indices.astype(np.int32)
        lp.a_matrix_.value_ = csc.data.astype(float)
        lp.offset_ = float(p.offset)
        lp.sense_ = hs.ObjSense.kMaximize if p.sense == "max" else hs.ObjSense.kMinimize
        if p.kind == "MILP":
            lp.integrality_ = [hs.HighsVarType.kInteger if b else hs.HighsVarType.kContinuous
                               for b in p.integrality]
        return lp

    def set_start(self, x: np.ndarray) -> None:
        sol = self._hs.HighsSolution()
        sol.col_value = np.asarray(x, float)
        sol.value_valid = True
        self.h.setSolution(sol)

    def resolve(self, rhs: np.ndarray) -> Solution:
        lo, hi = self.p.row_bounds(np.asarray(rhs, float))
        inf = self._hs.kHighsInf
        idx = np.arange(len(lo), dtype=np.int32)
        self.h.changeRowsBounds(len(lo), idx, np.where(np.isfinite(lo), lo, -inf),
                                np.where(np.isfinite(hi), hi, inf))
        return self.run()

    def run(self) -> Solution:
        hs = self._hs
        h = self.h
        t0 = time.perf_counter()
        h.run()
        elapsed = time.perf_counter() - t0
        ms = h.getModelStatus()
        info = h.getInfo()
        if ms == hs.HighsModelStatus.kOptimal:
            status = OPTIMAL
        elif ms == hs.HighsModelStatus.kInfeasible:
            status = INFEASIBLE
        elif ms in (hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kUnboundedOrInfeasible):
            status = UNBOUNDED
        elif ms in (hs.HighsModelStatus.kTimeLimit, hs.HighsModelStatus.kIterationLimit,
                    hs.HighsModelStatus.kSolutionLimit, hs.HighsModelStatus.kInterrupt):
            status = LIMIT
        else:
            status = ERROR
        sol = Solution(status=status, time=elapsed, message=h.modelStatusToString(ms))
        has_primal = info.primal_solution_status == hs.kSolutionStatusFeasible
        if status == OPTIMAL or (status == LIMIT and has_primal):
            s = h.getSolution()
            sol.x = np.array(s.col_value)
            sol.objective = float(info.objective_function_value)
            if self.p.kind == "LP":
                sol.duals = np.array(s.row_dual)
                sol.reduced_costs = np.array(s.col_dual)
                sol.basic = bool(info.basis_validity == hs.kBasisValidityValid)
            else:
                sol.dual_bound = float(info.mip_dual_bound)
                sol.mip_gap = float(info.mip_gap)
        if status == ERROR:
            raise SolverError(f"HiGHS failed: {sol.message}")
        return sol


# -- scipy fallback -------------------------------------------------------------------


def _split_rows(p: MathProgram, rhs: np.ndarray):
    A = sp.csr_matrix(p.A)
    le = p.senses == "<"
    ge = p.senses == ">"
    eq = p.senses == "="
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
    b_ub = np.concatenate([rhs[le], -rhs[ge]])
    return A_ub, b_ub, A[eq], rhs[eq], le, ge, eq


def _solve_scipy(p: MathProgram, limits: Limits) -> Solution:
    from scipy.optimize import Bounds, LinearConstraint, linprog, milp

    sign = -1.0 if p.sense == "max" else 1.0
    c = sign * np.asarray(p.c, float)
    t0 = time.perf_counter()
    if p.kind == "LP":
        A_ub, b_ub, A_eq, b_eq, le, ge, eq = _split_rows(p, np.asarray(p.rhs, float))
        res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                      A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                      bounds=np.column_stack([np.where(np.isfinite(p.lb), p.lb, -np.inf),
                                              np.where(np.isfinite(p.ub), p.ub, np.inf)]),
                      method="highs-ds",
                      options={} if limits.time_limit is None else {"time_limit": limits.time_limit})
        elapsed = time.perf_counter() - t0
        status = {0: OPTIMAL, 1: LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ERROR)
        sol = Solution(status=status, time=elapsed, message=res.message)
        if status == ERROR:
            raise SolverError(f"scipy linprog failed: {res.message}")
        if status == OPTIMAL:
            sol.x = res.x
            sol.objective = sign * res.fun + p.offset
            duals = np.zeros(len(p.rhs))
            n_le = int(le.sum())
            ineq = res.ineqlin.marginals if A_ub.shape[0] else np.zeros(0)
            duals[le] = ineq[:n_le]
            duals[ge] = -ineq[n_le:]
            if A_eq.shape[0]:
                duals[eq] = res.eqlin.marginals
            sol.duals = sign * duals
            rc = res.lower.marginals + res.upper.marginals
            sol.reduced_costs = sign * rc
            sol.basic = True
        return sol
    lo, hi = p.row_bounds()
    res = milp(c, constraints=LinearConstraint(p.A, lo, hi),
               integrality=np.asarray(p.integrality, int),
               bounds=Bounds(p.lb, p.ub),
               options={"mip_rel_gap": limits.gap,
                        **({} if limits.time_limit is None else {"time_limit": limits.time_limit})})
    elapsed = time.perf_counter() - t0
    status = {0: OPTIMAL, 1: LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ERROR)
    sol = Solution(status=status, time=elapsed, message=res.message)
    if status == ERROR:
        raise SolverError(f"scipy milp failed: {res.message}")
    if res.x is not None:
        sol.x = res.x
        sol.objective = sign * res.fun + p.offset
        bound = getattr(res, "mip_dual_bound", np.nan)
        sol.dual_bound = sign * bound + p.offset if bound is not None else np.nan
        sol.mip_gap = getattr(res, "mip_gap", np.nan)
    return sol


def write_lp(p: MathProgram, path: str) -> None:
    """Export ``p`` in CPLEX LP text format (needs highspy)."""
    if not _have_highspy():
        raise SolverError("LP export needs highspy")
    runner = _HighsRunner(p, Limits())
    runner.h.writeModel(str(path))
