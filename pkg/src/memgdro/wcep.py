"""Worst-case expectation over the Wasserstein ball, by column generation.

For a fixed schedule ``x`` the worst-case expected re-dispatch cost is an LP
over probabilities on scenario pools (one pool per sample).  The master LP
prices pooled scenarios; one MILP per sample searches the candidate lattice
for a scenario with positive reduced cost.  The search MILPs of one round are
independent and run on a thread pool.
"""
from __future__ import annotations

import logging
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .ambiguity import AmbiguitySet, CandidateLattice, DiscreteDistribution, code_key, lattice_guard
from .formulation import CompiledModel, RecourseSession, SecondStageTemplate
from .solver import Limits, MathProgram, SolverError, solve

log = logging.getLogger("memgdro.cg")

TOL_P = 1e-9


class BigMWarning(UserWarning):
    pass


class BigMError(SolverError):
    pass


class CgInternalError(RuntimeError):
    """Column generation broke a property that holds in exact arithmetic."""


@dataclass
class CgOptions:
    tol_rc: float = 1e-6  # relative to max(1, |value|)
    parallelism: int = 1
    big_m: float = 1e4
    big_m_cap: float = 1e8
    strict_big_m: bool = False
    reduce: bool = True
    max_rounds: int | None = None  # None: the number of lattice points
    single_round: bool = False
    time_limit: float | None = None
    heuristic: bool = True  # try local ascent before the pricing MILP
    ascent_starts: int = 4  # best pooled scenarios used as ascent starts, plus the lower corner


# -- recourse values -------------------------------------------------------------------


class RecourseOracle:
    """Q(x, xi) with one solver session per thread and a per-schedule cache."""

    def __init__(self, tpl: SecondStageTemplate, backend: str | None = None):
        self.tpl = tpl
        self.backend = backend
        self._local = threading.local()
        self.evaluations = 0

    def session(self) -> RecourseSession:
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = RecourseSession(self.tpl, self.backend)
        return s

    def evaluate(self, x, xi):
        self.evaluations += 1
        return self.session().evaluate(x, xi)

    def evaluate_many(self, x, scenarios, parallelism: int = 1):
        if parallelism <= 1 or len(scenarios) < 2:
            return [self.evaluate(x, xi) for xi in scenarios]
        with ThreadPoolExecutor(parallelism) as ex:
            return list(ex.map(lambda xi: self.evaluate(x, xi), scenarios))


# -- pools ----------------------------------------------------------------------------


@dataclass
class PoolEntry:
    codes: np.ndarray
    xi: np.ndarray
    distance: float
    q: float = np.nan
    duals: np.ndarray | None = None


class ScenarioPool:
    """Scenarios pooled for one sample; keyed by lattice code vector."""

    def __init__(self, lattice: CandidateLattice):
        self.lattice = lattice
        self.entries: list[PoolEntry] = []
        self._index: dict[bytes, int] = {}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, codes) -> bool:
        return code_key(codes) in self._index

    def add(self, codes) -> PoolEntry | None:
        codes = np.asarray(codes, np.int8)
        key = code_key(codes)
        if key in self._index:
            return None
        if not self.lattice.valid(codes):
            raise CgInternalError("scenario is not a lattice point")
        e = PoolEntry(codes, self.lattice.scenario(codes), self.lattice.distance(codes))
        self._index[key] = len(self.entries)
        self.entries.append(e)
        return e

    def codes(self) -> list[np.ndarray]:
        return [e.codes for e in self.entries]


# -- pricing master --------------------------------------------------------------------


@dataclass
class PmpResult:
    value: float
    probs: list  # per sample
    alpha: np.ndarray
    beta: float


def solve_pmp(q: list, dist: list, sample_probs, radius: float) -> PmpResult:
    """``max sum_s pi_s sum_n p_sn q_sn`` s.t. each group sums to one and the transport budget holds.

    ``alpha`` are the duals of the group rows, ``beta >= 0`` the dual of the budget row.
    """
    pi = np.asarray(sample_probs, float)
    S = len(q)
    if any(len(v) == 0 for v in q):
        raise CgInternalError("empty scenario pool")
    sizes = [len(v) for v in q]
    n = sum(sizes)
    grp = np.repeat(np.arange(S), sizes)
    qq = np.concatenate([np.asarray(v, float) for v in q])
    dd = np.concatenate([np.asarray(v, float) for v in dist])
    c = pi[grp] * qq
    rows = sp.vstack([sp.csr_matrix((np.ones(n), (grp, np.arange(n))), shape=(S, n)),
                      sp.csr_matrix(pi[grp] * dd)]).tocsr()
    prog = MathProgram(c, rows, np.array(["="] * S + ["<"]), np.concatenate([np.ones(S), [radius]]),
                       np.zeros(n), np.full(n, np.inf), sense="max")
    sol = solve(prog)
    if not sol.ok:
        raise CgInternalError(f"pricing master {sol.status}")
    if not sol.basic:
        raise CgInternalError("pricing master returned a non-vertex solution")
    p = np.clip(sol.x, 0.0, None)
    probs = np.split(p, np.cumsum(sizes)[:-1])
    return PmpResult(float(sol.objective), probs, sol.duals[:S].copy(), max(0.0, float(sol.duals[S])))


# -- pricing subproblem -----------------------------------------------------------------


@dataclass
class PspResult:
    codes: np.ndarray
    reduced_cost: float  # recomputed from the re-dispatch LP at the returned scenario
    milp_value: float
    q: float
    distance: float
    duals: np.ndarray
    big_m: float
    time: float


class PricingSubproblem:
    """Lattice search ``max_xi pi (Q(x, xi) - beta |xi - sample|_1) - alpha`` as a MILP.

    Q is replaced by its LP dual; scenario coordinates are ``sample + up*u_up - down*u_dn``
    with binary selectors; products of ``sigma = K^T lam`` with selectors are
    linearised with a big-M, which also bounds ``|lam|`` and ``|sigma|``.
    """

    def __init__(self, tpl: SecondStageTemplate):
        self.tpl = tpl
        self._cache: dict[float, sp.csr_matrix] = {}
        self._lock = threading.Lock()

    def _matrix(self, M: float):
        with self._lock:
            if M in self._cache:
                return self._cache[M]
            tpl = self.tpl
            R, m = tpl.n_rows, tpl.m_xi
            Kt = tpl.K.T.tocsr()
            I = sp.identity(m, format="csr")
            Z = sp.csr_matrix((m, m))
            zR = sp.csr_matrix((m, R))
            blocks = [
                [-tpl.F.T.tocsr(), sp.csr_matrix((tpl.n_y, m)), sp.csr_matrix((tpl.n_y, m)),
                 sp.csr_matrix((tpl.n_y, m)), sp.csr_matrix((tpl.n_y, m))],
                # columns: lam, u_up, u_dn, w_up, w_dn
                [-Kt, M * I, Z, I, Z],
                [Kt, M * I, Z, -I, Z],
                [zR, -M * I, Z, I, Z],
                [zR, -M * I, Z, -I, Z],
                [-Kt, Z, M * I, Z, I],
                [Kt, Z, M * I, Z, -I],
                [zR, Z, -M * I, Z, I],
                [zR, Z, -M * I, Z, -I],
                [zR, I, I, Z, Z],
            ]
            A = sp.bmat(blocks, format="csr")
            self._cache[M] = A
            return A

    def solve(self, x: np.ndarray, lattice: CandidateLattice, pi: float, alpha: float, beta: float,
              oracle: RecourseOracle, big_m: float) -> PspResult:
        t0 = time.perf_counter()
        lam, sigma, codes, val = self._solve_once(x, lattice, pi, alpha, beta, big_m)
        rs = oracle.evaluate(x, lattice.scenario(codes))
        d = lattice.distance(codes)
        mu = pi * (rs.objective - beta * d) - alpha
        if mu < val - 1e-6 * max(1.0, abs(val), pi * abs(rs.objective)):
            raise CgInternalError(f"pricing MILP value {val:.10g} exceeds the recomputed reduced cost {mu:.10g}")
        return PspResult(codes, float(mu), float(val), rs.objective, d, rs.duals, big_m, time.perf_counter() - t0)

    def ascend(self, x: np.ndarray, lattice: CandidateLattice, pi: float, alpha: float, beta: float,
               oracle: RecourseOracle, codes: np.ndarray, max_steps: int = 25) -> PspResult:
        """Local ascent on the reduced cost from ``codes``.

        At a fixed dual vertex Q is linear in xi with gradient ``K^T lam``, so the best
        lattice point for that vertex is chosen component by component. Q is convex in
        xi, hence each step cannot lower the reduced cost. Returns the last point.
        """
        t0 = time.perf_counter()
        K = self.tpl.K
        up, dn = lattice.up, lattice.down
        no_up = ~lattice.has_upper
        no_dn = ~lattice.has_lower
        codes = np.asarray(codes, np.int8)
        rs = oracle.evaluate(x, lattice.scenario(codes))
        d = lattice.distance(codes)
        mu = pi * (rs.objective - beta * d) - alpha
        for _ in range(max_steps):
            sigma = K.T @ rs.duals
            gain_up = np.where(no_up, -np.inf, (sigma - beta) * up)
            gain_dn = np.where(no_dn, -np.inf, (-sigma - beta) * dn)
            nxt = np.zeros_like(codes)
            nxt[(gain_dn > 0) & (gain_dn >= gain_up)] = 1
            nxt[(gain_up > 0) & (gain_up > gain_dn)] = 2
            if np.array_equal(nxt, codes):
                break
            r2 = oracle.evaluate(x, lattice.scenario(nxt))
            d2 = lattice.distance(nxt)
            mu2 = pi * (r2.objective - beta * d2) - alpha
            if mu2 <= mu + 1e-12 * max(1.0, abs(mu)):
                break
            codes, rs, d, mu = nxt, r2, d2, mu2
        return PspResult(codes, float(mu), float(mu), rs.objective, d, rs.duals, np.nan, time.perf_counter() - t0)

    def _solve_once(self, x, lattice: CandidateLattice, pi, alpha, beta, M):
        tpl = self.tpl
        R, m, ny = tpl.n_rows, tpl.m_xi, tpl.n_y
        A = self._matrix(M)
        up, dn = lattice.up, lattice.down
        c = np.concatenate([pi * (tpl.G @ x + tpl.K @ lattice.sample - tpl.h), -pi * beta * up, -pi * beta * dn,
                            pi * up, -pi * dn])
        offset = pi * float(tpl.dx @ x) - alpha
        eq = tpl.eq_rows
        lam_lb = np.where(eq, -M, 0.0)
        lb = np.concatenate([lam_lb, np.zeros(2 * m), np.full(2 * m, -M)])
        ub = np.concatenate([np.full(R, M), lattice.has_upper.astype(float), lattice.has_lower.astype(float),
                             np.full(2 * m, M)])
        hu, hl = lattice.has_upper, lattice.has_lower
        on_u = np.where(hu, M, np.inf)
        on_l = np.where(hl, M, np.inf)
        rhs = np.concatenate([tpl.d, on_u, on_u, np.zeros(m), np.zeros(m), on_l, on_l, np.zeros(m), np.zeros(m),
                              np.ones(m)])
        senses = np.array(list(np.where(tpl.free, "=", "<")) + ["<"] * (9 * m))
        integ = np.zeros(R + 4 * m, bool)
        integ[R:R + 2 * m] = True
        prog = MathProgram(c, A, senses, rhs, lb, ub, integ, sense="max", offset=offset)
        sol = solve(prog, Limits(gap=0.0))
        if not sol.has_point:
            raise SolverError(f"pricing MILP {sol.status}")
        z = sol.x
        lam = z[:R]
        uu = z[R:R + m] > 0.5
        ud = z[R + m:R + 2 * m] > 0.5
        codes = np.zeros(m, np.int8)
        codes[ud & hl] = 1
        codes[uu & hu] = 2
        return lam, tpl.K.T @ lam, codes, sol.objective


def solve_psp(model: CompiledModel, x: np.ndarray, lattice: CandidateLattice, pi: float, alpha: float,
              beta: float, big_m: float = 1e5, oracle: RecourseOracle | None = None) -> PspResult:
    """One lattice search with a fixed big-M (no escalation)."""
    return PricingSubproblem(model.tpl).solve(np.asarray(x, float), lattice, pi, alpha, beta,
                                              oracle or RecourseOracle(model.tpl), big_m)


# -- column generation -----------------------------------------------------------------


@dataclass
class SupportPoint:
    codes: np.ndarray
    xi: np.ndarray
    prob: float
    q: float
    distance: float


@dataclass
class WcepSolution:
    value: float
    distribution: DiscreteDistribution
    alpha: np.ndarray
    beta: float
    supports: list  # per sample: list[SupportPoint] with prob > TOL_P
    pools: list  # per sample: list of code vectors ever pooled
    rounds: int
    trace: list = field(default_factory=list)  # master value per round
    max_reduced_cost: list = field(default_factory=list)
    added: int = 0
    psp_solves: int = 0
    heuristic_columns: int = 0
    time: float = 0.0
    final_reduced_costs: np.ndarray | None = None
    certified: bool = True  # False when the last round was not an exact pricing round

    def budget_used(self, amb: AmbiguitySet) -> float:
        return float(sum(amb.probs[s] * sum(p.prob * p.distance for p in sup)
                         for s, sup in enumerate(self.supports)))

    def support_size(self) -> int:
        return sum(len(s) for s in self.supports)


class WcepSolver:
    """Reusable column-generation engine for one model and ambiguity set."""

    def __init__(self, model: CompiledModel, amb: AmbiguitySet, opts: CgOptions | None = None,
                 backend: str | None = None):
        self.model = model
        self.amb = amb
        self.opts = opts or CgOptions()
        self.lattices = amb.lattices(self.opts.reduce)
        self.oracle = RecourseOracle(model.tpl, backend)
        self.psp = PricingSubproblem(model.tpl)
        self.big_m = self.opts.big_m
        self._m_lock = threading.Lock()

    def observe(self, duals: np.ndarray) -> None:
        """Keep big-M an order of magnitude above every dual vertex seen so far.

        The dual feasible region does not depend on the scenario, and the
        re-dispatch LPs return its vertices, so their magnitudes are the
        evidence available for a safe big-M.
        """
        mag = max(np.abs(duals).max(initial=0.0), np.abs(self.model.tpl.K.T @ duals).max(initial=0.0))
        if 10 * mag <= self.big_m:
            return
        o = self.opts
        new = 10.0 ** np.ceil(np.log10(10 * mag))
        msg = f"dual magnitude {mag:.4g} is within a factor 10 of big-M {self.big_m:.4g}"
        if o.strict_big_m:
            raise BigMError(msg)
        if new > o.big_m_cap:
            raise BigMError(msg + f"; raising it would exceed the cap {o.big_m_cap:.4g}")
        with self._m_lock:
            if new > self.big_m:
                warnings.warn(msg + f"; raising it to {new:.4g}", BigMWarning, stacklevel=3)
                self.big_m = new

    def price(self, x, s: int, alpha: float, beta: float) -> PspResult:
        while True:
            M = self.big_m
            res = self.psp.solve(x, self.lattices[s], float(self.amb.probs[s]), alpha, beta, self.oracle, M)
            self.observe(res.duals)
            if self.big_m == M:
                return res

    def climb(self, x, s: int, alpha: float, beta: float, start: np.ndarray) -> PspResult:
        res = self.psp.ascend(x, self.lattices[s], float(self.amb.probs[s]), alpha, beta, self.oracle, start)
        self.observe(res.duals)
        return res

    def _map(self, fn, idx):
        par = max(1, int(self.opts.parallelism))
        if par == 1 or len(idx) == 1:
            return [fn(s) for s in idx]
        with ThreadPoolExecutor(min(par, len(idx))) as ex:
            return list(ex.map(fn, idx))

    def price_all(self, x, alpha, beta, samples=None) -> list[PspResult]:
        idx = list(range(self.amb.S)) if samples is None else list(samples)
        return self._map(lambda s: self.price(x, s, alpha[s], beta), idx)

    def run(self, x: np.ndarray, warm: list | None = None, exact: bool = True,
            time_limit: float | None = None) -> WcepSolution:
        """Column generation at schedule ``x``.

        With ``exact=False`` (and ascent enabled) the MILP pricing round is
        skipped: the loop stops once ascent finds no column, and the returned
        value is only a lower bound on the worst-case expectation
        (``certified`` is False). ``time_limit`` overrides the option of that name.
        """
        t0 = time.perf_counter()
        o, amb = self.opts, self.amb
        x = np.asarray(x, float)
        S = amb.S
        pools = [ScenarioPool(lat) for lat in self.lattices]
        for s in range(S):
            pools[s].add(np.zeros(amb.box.dim, np.int8))
            for codes in (warm[s] if warm else []):
                pools[s].add(codes)
        self._fill(x, pools)
        limit = o.max_rounds or sum(lat.size for lat in self.lattices)
        limit_s = o.time_limit if time_limit is None else time_limit
        trace, rc_trace = [], []
        rounds = added = solves = heuristic_cols = 0
        final_rc = None
        fresh = []
        while True:
            rounds += 1
            pmp = solve_pmp([[e.q for e in p.entries] for p in pools],
                            [[e.distance for e in p.entries] for p in pools], amb.probs, amb.radius)
            if trace and pmp.value < trace[-1] - 1e-7 * max(1.0, abs(trace[-1])):
                raise CgInternalError("pricing master value decreased")
            trace.append(pmp.value)
            if amb.radius == 0:
                final_rc = np.zeros(S)
                fresh = []
                log.info("cg round=%d value=%.8g radius=0", rounds, pmp.value)
                break
            tol = o.tol_rc * max(1.0, abs(pmp.value))
            fresh = []
            if o.heuristic and not o.single_round:
                # cheap columns first; the MILP runs only when ascent finds none anywhere
                res = self._map(lambda s: self._ascend_sample(x, s, pools[s], pmp.alpha[s], pmp.beta),
                                list(range(S)))
                best_rc = -np.inf
                for s, found in enumerate(res):
                    for r in found:
                        best_rc = max(best_rc, r.reduced_cost)
                        if r.reduced_cost > tol:
                            e = pools[s].add(r.codes)
                            if e is not None:
                                e.q, e.duals = r.q, r.duals
                                fresh.append(e)
                if fresh:
                    heuristic_cols += len(fresh)
                    rc_trace.append(float(best_rc))
                    log.info("cg round=%d value=%.8g ascent columns=%d", rounds, pmp.value, len(fresh))
            if not fresh and not exact and o.heuristic and not o.single_round:
                break
            if not fresh:
                res = self.price_all(x, pmp.alpha, pmp.beta)
                solves += len(res)
                rc = np.array([r.reduced_cost for r in res])
                final_rc = rc
                rc_trace.append(float(rc.max()))
                log.info("cg round=%d value=%.8g max_rc=%.3g pools=%s", rounds, pmp.value, rc.max(),
                         [len(p) for p in pools])
                for s, r in enumerate(res):
                    if r.reduced_cost > tol:
                        e = pools[s].add(r.codes)
                        if e is None:
                            raise CgInternalError(f"sample {s}: priced scenario already pooled "
                                                  f"(reduced cost {r.reduced_cost:.3g})")
                        e.q, e.duals = r.q, r.duals
                        fresh.append(e)
            added += len(fresh)
            if not fresh or o.single_round:
                break
            if rounds >= limit:
                raise CgInternalError("round limit exceeded")
            if limit_s is not None and time.perf_counter() - t0 > limit_s:
                log.warning("cg stopped on time limit")
                break
        if fresh:  # stopped early with columns the master has not seen yet
            pmp = solve_pmp([[e.q for e in p.entries] for p in pools],
                            [[e.distance for e in p.entries] for p in pools], amb.probs, amb.radius)
        supports, pts, prs, cds = [], [], [], []
        for s, p in enumerate(pools):
            sup = [SupportPoint(e.codes, e.xi, float(pr), e.q, e.distance)
                   for e, pr in zip(p.entries, pmp.probs[s]) if pr > TOL_P]
            supports.append(sup)
            w = np.array([sp_.prob for sp_ in sup])
            pts.append(np.array([sp_.xi for sp_ in sup]))
            prs.append(w / w.sum())
            cds.append(np.array([sp_.codes for sp_ in sup], np.int8))
        dist = DiscreteDistribution(np.array(amb.probs), pts, prs, cds)
        return WcepSolution(value=pmp.value, distribution=dist, alpha=pmp.alpha, beta=pmp.beta,
                            supports=supports, pools=[p.codes() for p in pools], rounds=rounds, trace=trace,
                            max_reduced_cost=rc_trace, added=added, psp_solves=solves,
                            heuristic_columns=heuristic_cols,
                            time=time.perf_counter() - t0, final_reduced_costs=final_rc,
                            certified=final_rc is not None and not fresh)

    def _ascend_sample(self, x, s: int, pool: ScenarioPool, alpha: float, beta: float) -> list[PspResult]:
        ranked = sorted(pool.entries, key=lambda e: e.q - beta * e.distance, reverse=True)
        starts = [e.codes for e in ranked[:self.opts.ascent_starts]]
        lat = self.lattices[s]
        starts.append(np.where(lat.has_lower, 1, 0).astype(np.int8))
        out, seen = [], set()
        for c in starts:
            r = self.climb(x, s, alpha, beta, c)
            k = code_key(r.codes)
            if k not in seen:
                seen.add(k)
                out.append(r)
        return out

    def _fill(self, x, pools):
        todo = [e for p in pools for e in p.entries if np.isnan(e.q)]
        sols = self.oracle.evaluate_many(x, [e.xi for e in todo], self.opts.parallelism)
        for e, r in zip(todo, sols):
            e.q, e.duals = r.objective, r.duals
            self.observe(r.duals)


def run_cg(model: CompiledModel, amb: AmbiguitySet, x: np.ndarray, warm: list | None = None,
           opts: CgOptions | None = None) -> WcepSolution:
    return WcepSolver(model, amb, opts).run(x, warm)


def brute_force_wcep(model: CompiledModel, amb: AmbiguitySet, x: np.ndarray, reduce: bool = True,
                     guard: int = 100_000, oracle: RecourseOracle | None = None,
                     cache: dict | None = None) -> float:
    """Exact worst-case expectation: evaluate Q on every lattice point and solve one master LP.

    ``cache`` (optional) maps ``(sample bytes, code bytes)`` to Q for this ``x``.
    """
    x = np.asarray(x, float)
    oracle = oracle or RecourseOracle(model.tpl)
    q_all, d_all = [], []
    for lat in amb.lattices(reduce):
        lattice_guard(lat, guard)
        skey = lat.sample.tobytes()
        qs, ds = [], []
        for codes in lat.enumerate():
            key = (skey, code_key(codes))
            if cache is not None and key in cache:
                q = cache[key]
            else:
                q = oracle.evaluate(x, lat.scenario(codes)).objective
                if cache is not None:
                    cache[key] = q
            qs.append(q)
            ds.append(lat.distance(codes))
        q_all.append(qs)
        d_all.append(ds)
    return solve_pmp(q_all, d_all, amb.probs, amb.radius).value
