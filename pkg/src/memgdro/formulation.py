"""Compile an instance into the compact two-stage model.

First stage (day-ahead schedule)::

    min c.x   s.t.  A x (senses) b,  lb <= x <= ub,  some x binary

Second stage (intra-day re-dispatch under scenario xi)::

    Q(x, xi) = dx.x + min { d.y :  F y + G x + K xi (senses) h,  y >= 0 except free columns }

Every row is either ``<=`` or ``=``.  Deviation variables are substituted
out, so the constant part of the deviation cost lands in ``dx``.  Constant
variable caps are written as rows, which keeps the column bounds of ``y`` at
``[0, inf)`` or free; that makes the dual of the re-dispatch LP easy to state:
multipliers ``lam >= 0`` on ``<=`` rows, free on ``=`` rows, and
``d + F^T lam >= 0`` (``= 0`` on free columns), with
``Q = dx.x + (G x + K xi - h).lam``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .instance import Instance
from .solver import INFEASIBLE, OPTIMAL, LPSession, MathProgram, SolverError, solve, Limits


class FormulationError(RuntimeError):
    """The re-dispatch LP misbehaved (infeasible or unbounded); indicates a model bug."""


@dataclass(frozen=True)
class VariableMap:
    """Named blocks of column indices."""

    blocks: dict
    size: int

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def __contains__(self, name: str) -> bool:
        return name in self.blocks

    def names(self):
        return list(self.blocks)

    def decode(self, vec: np.ndarray) -> dict:
        return {k: np.asarray(vec)[idx] for k, idx in self.blocks.items()}


class _Columns:
    def __init__(self):
        self.blocks = {}
        self.lb, self.ub, self.integer = [], [], []
        self.n = 0

    def add(self, name, count, lb=0.0, ub=np.inf, integer=False):
        idx = np.arange(self.n, self.n + count)
        self.blocks[name] = idx
        self.n += count
        self.lb += [lb] * count
        self.ub += [ub] * count
        self.integer += [integer] * count
        return idx

    def vmap(self):
        return VariableMap(dict(self.blocks), self.n)


class _Rows:
    """Sparse row accumulator for up to three coefficient matrices."""

    def __init__(self, parts=("y",)):
        self.parts = parts
        self.data = {p: ([], [], []) for p in parts}
        self.senses, self.rhs, self.tags = [], [], []

    def add(self, sense, rhs, tag, **terms):
        r = len(self.rhs)
        for part, items in terms.items():
            rows, cols, vals = self.data[part]
            for col, val in items:
                if val != 0:
                    rows.append(r)
                    cols.append(int(col))
                    vals.append(float(val))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.tags.append(tag)

    def matrix(self, part, ncols):
        rows, cols, vals = self.data[part]
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(self.rhs), ncols))


@dataclass(frozen=True, eq=False)
class CompactFirstStage:
    c: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    row_tags: tuple = ()

    @property
    def n(self) -> int:
        return len(self.c)

    def program(self, c=None) -> MathProgram:
        return MathProgram(self.c if c is None else np.asarray(c, float), self.A, self.senses, self.b,
                           self.lb, self.ub, self.integrality)

    def is_feasible(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        x = np.asarray(x, float)
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        if np.any(np.abs(x[self.integrality] - np.round(x[self.integrality])) > tol):
            return False
        ax = self.A @ x
        le = self.senses == "<"
        ge = self.senses == ">"
        eq = self.senses == "="
        return bool(np.all(ax[le] <= self.b[le] + tol) and np.all(ax[ge] >= self.b[ge] - tol)
                    and np.all(np.abs(ax[eq] - self.b[eq]) <= tol))


@dataclass(frozen=True, eq=False)
class SecondStageTemplate:
    d: np.ndarray
    F: sp.csr_matrix
    G: sp.csr_matrix
    K: sp.csr_matrix
    h: np.ndarray
    senses: np.ndarray
    free: np.ndarray
    dx: np.ndarray
    ymap: VariableMap
    row_tags: tuple = ()
    dt: float = 1.0

    @property
    def n_y(self) -> int:
        return len(self.d)

    @property
    def n_rows(self) -> int:
        return len(self.h)

    @property
    def m_xi(self) -> int:
        return self.K.shape[1]

    @property
    def lb(self) -> np.ndarray:
        return np.where(self.free, -np.inf, 0.0)

    @property
    def eq_rows(self) -> np.ndarray:
        return self.senses == "="

    def rhs(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return self.h - self.G @ x - self.K @ xi

    def program(self, x: np.ndarray, xi: np.ndarray) -> MathProgram:
        return MathProgram(self.d, self.F, self.senses, self.rhs(x, xi), self.lb,
                           np.full(self.n_y, np.inf), offset=float(self.dx @ x))

    def session(self, backend: str | None = None) -> "RecourseSession":
        return RecourseSession(self, backend)

    def dual_value(self, lam: np.ndarray, x: np.ndarray, xi: np.ndarray) -> float:
        return float(self.dx @ x + (self.G @ x + self.K @ xi - self.h) @ lam)

    def dual_slack(self, lam: np.ndarray) -> np.ndarray:
        return self.d + self.F.T @ lam


@dataclass
class RecourseSolution:
    objective: float
    y: np.ndarray
    duals: np.ndarray  # lam: >= 0 on <= rows, free on = rows
    time: float = 0.0


class RecourseSession:
    """Re-dispatch LP kept alive across scenarios; one per worker thread."""

    def __init__(self, tpl: SecondStageTemplate, backend: str | None = None):
        self.tpl = tpl
        base = MathProgram(tpl.d, tpl.F, tpl.senses, tpl.h.copy(), tpl.lb, np.full(tpl.n_y, np.inf))
        self._lp = LPSession(base, backend)

    def evaluate(self, x: np.ndarray, xi: np.ndarray) -> RecourseSolution:
        tpl = self.tpl
        sol = self._lp.solve(tpl.rhs(x, xi))
        if sol.status != OPTIMAL:
            raise FormulationError(f"re-dispatch LP {sol.status}: complete recourse violated")
        return RecourseSolution(sol.objective + float(tpl.dx @ x), sol.x, -sol.duals, sol.time)


def evaluate_recourse(tpl: SecondStageTemplate, x: np.ndarray, xi: np.ndarray,
                      backend: str | None = None) -> RecourseSolution:
    """Solve the re-dispatch LP for one scenario (fresh solver each call)."""
    sol = solve(tpl.program(np.asarray(x, float), np.asarray(xi, float)), backend=backend)
    if sol.status == INFEASIBLE:
        raise FormulationError("re-dispatch LP infeasible: complete recourse violated")
    if sol.status != OPTIMAL:
        raise SolverError(f"re-dispatch LP {sol.status}")
    return RecourseSolution(sol.objective, sol.x, -sol.duals, sol.time)


# -- first stage -----------------------------------------------------------------------


def compile_first_stage(inst: Instance) -> tuple[CompactFirstStage, VariableMap]:
    T, dt, dev, ini = inst.T, inst.dt, inst.devices, inst.init
    L = inst.cold_lag
    fc = inst.forecasts
    cols = _Columns()
    add = cols.add
    p_buy, p_sell, h_buy = add("p_buy", T), add("p_sell", T), add("h_buy", T)
    p_c, p_d = add("p_bss_c", T), add("p_bss_d", T)
    e = add("e_bss", T, dev.e_bss_min, dev.e_bss_max)  # level at the end of slot t
    u_bss, u_eb, u_gb = add("u_bss", T, 0, 1, True), add("u_e_buy", T, 0, 1, True), add("u_g_buy", T, 0, 1, True)
    u_p, u_s, u_i = add("u_elz_p", T, 0, 1, True), add("u_elz_s", T, 0, 1, True), add("u_elz_i", T, 0, 1, True)
    y_c, z_c = add("y_cold", T, 0, 1, True), add("z_cold", T, 0, 1, True)
    y_w, z_w = add("y_warm", T, 0, 1, True), add("z_warm", T, 0, 1, True)
    pe_p, pe_s, pe = add("p_elz_p", T), add("p_elz_s", T), add("p_elz", T)
    g_e, m_e = add("g_elz", T), add("m_elz", T)
    u_f = add("u_fc", T, 0, 1, True)
    y_f, z_f = add("y_fc", T, 0, 1), add("z_fc", T, 0, 1)
    p_f, g_f, m_f = add("p_fc", T), add("g_fc", T), add("m_fc", T)
    h_ht = add("h_ht", T, 0, dev.h_ht_max)
    n_hwt = add("n_hwt", T, 0, dev.n_hwt_max)
    m_hwt = add("m_hwt", T, -np.inf, np.inf)
    p_wt = add("p_wt", T)
    p_pv = add("p_pv", T)
    lb = np.array(cols.lb, float)
    ub = np.array(cols.ub, float)
    lb[p_wt] = ub[p_wt] = fc.wt * dev.p_wt_max
    lb[p_pv] = ub[p_pv] = fc.pv * dev.p_pv_max

    c = np.zeros(cols.n)
    pr = inst.prices
    c[p_buy] = pr.buy * dt
    c[p_sell] = -pr.sell * dt
    c[h_buy] = pr.hydrogen_buy
    c[p_c] = c[p_d] = 0.5 * dev.c_bss_deg * dt
    c[pe] = dev.c_elz_om * dt
    c[p_f] = dev.c_fc_om * dt
    c[y_c], c[z_c] = dev.c_elz_cold_su, dev.c_elz_cold_sd
    c[y_w], c[z_w] = dev.c_elz_warm_su, dev.c_elz_warm_sd
    c[y_f], c[z_f] = dev.c_fc_su, dev.c_fc_sd

    R = _Rows()
    row = R.add
    chg, dis = dev.eta_bss_c * dt, dt / dev.eta_bss_d
    fc_heat = dev.eta_fc_r * (1 - dev.eta_fc) / dev.eta_fc
    for t in range(T):
        row("<", 0, "bss_charge_cap", y=[(p_c[t], 1), (u_bss[t], -dev.p_bss_max)])
        row("<", dev.p_bss_max, "bss_discharge_cap", y=[(p_d[t], 1), (u_bss[t], dev.p_bss_max)])
        prev = [(e[t - 1], -1)] if t else []
        row("=", ini.e_bss if t == 0 else 0, "bss_dynamics", y=[(e[t], 1), (p_c[t], -chg), (p_d[t], dis)] + prev)
        row("<", 0, "buy_cap", y=[(p_buy[t], 1), (u_eb[t], -dev.p_sub_max)])
        row("<", dev.p_sub_max, "sell_cap", y=[(p_sell[t], 1), (u_eb[t], dev.p_sub_max)])
        # ELZ states and transitions
        row("=", 0, "elz_states", y=[(u_p[t], 1), (u_s[t], 1), (u_i[t], -1)])
        hist = ini.y_cold_before(t - L) if t - L < 0 else 0
        delayed = [(y_c[t - L], -1)] if t - L >= 0 else []
        prev_i = [(u_i[t - 1], -1)] if t else []
        row("=", (ini.u_elz_i if t == 0 else 0) + hist, "elz_cold",
            y=[(u_i[t], 1), (z_c[t], 1)] + prev_i + delayed)
        row("<", 1 - hist, "elz_cold_excl", y=[(z_c[t], 1)] + [(v, -k) for v, k in delayed])
        s_prev = [(u_s[t - 1], 1)] if t else []
        p_prev = [(u_p[t - 1], 1)] if t else []
        s0 = ini.u_elz_s if t == 0 else 0
        p0 = ini.u_elz_p if t == 0 else 0
        row("<", 1 - s0, "warm_start_lo", y=[(y_w[t], -1), (u_p[t], 1)] + s_prev)
        row("<", s0, "warm_start_hi1", y=[(y_w[t], 1)] + [(v, -1) for v, _ in s_prev])
        row("<", 0, "warm_start_hi2", y=[(y_w[t], 1), (u_p[t], -1)])
        row("<", 1 - p0, "warm_stop_lo", y=[(z_w[t], -1), (u_s[t], 1)] + p_prev)
        row("<", 0, "warm_stop_hi1", y=[(z_w[t], 1), (u_s[t], -1)])
        row("<", p0, "warm_stop_hi2", y=[(z_w[t], 1)] + [(v, -1) for v, _ in p_prev])
        # ELZ power, hydrogen and heat
        row("=", 0, "elz_power", y=[(pe[t], 1), (pe_p[t], -1), (pe_s[t], -1)])
        row("<", 0, "elz_min", y=[(pe_p[t], -1), (u_p[t], dev.p_elz_min)])
        row("<", 0, "elz_max", y=[(pe_p[t], 1), (u_p[t], -dev.p_elz_max)])
        row("=", 0, "elz_standby", y=[(pe_s[t], 1), (u_s[t], -dev.p_elz_standby)])
        row("=", 0, "elz_h2", y=[(g_e[t], 1), (pe_p[t], -dev.eta_elz / dev.lhv_h2)])
        row("=", 0, "elz_heat", y=[(m_e[t], 1), (pe_p[t], -dev.eta_elz_r * (1 - dev.eta_elz))])
        # hydrogen tank and purchases
        hprev = [(h_ht[t - 1], -(1 - dev.nu_ht))] if t else []
        row("=", (1 - dev.nu_ht) * ini.h_ht if t == 0 else 0, "ht_dynamics",
            y=[(h_ht[t], 1), (g_e[t], -dt), (g_f[t], dt), (h_buy[t], -1)] + hprev)
        row("<", 0, "h2_buy_cap", y=[(h_buy[t], 1), (u_gb[t], -dev.h_buy_max)])
        # fuel cell
        row("=", 0, "fc_h2", y=[(p_f[t], 1), (g_f[t], -dev.eta_fc * dev.lhv_h2)])
        row("<", 0, "fc_min", y=[(p_f[t], -1), (u_f[t], dev.p_fc_min)])
        row("<", 0, "fc_max", y=[(p_f[t], 1), (u_f[t], -dev.p_fc_max)])
        row("=", 0, "fc_heat", y=[(m_f[t], 1), (p_f[t], -fc_heat)])
        f0 = ini.u_fc if t == 0 else 0
        fprev = [(u_f[t - 1], 1)] if t else []
        row("<", f0, "fc_startup", y=[(y_f[t], -1), (u_f[t], 1)] + [(v, -1) for v, _ in fprev])
        row("<", -f0, "fc_shutdown", y=[(z_f[t], -1), (u_f[t], -1)] + fprev)
        # hot water tank
        nprev = [(n_hwt[t - 1], -(1 - dev.nu_hwt))] if t else []
        row("=", (1 - dev.nu_hwt) * ini.n_hwt if t == 0 else 0, "hwt_dynamics",
            y=[(n_hwt[t], 1), (m_hwt[t], -dt)] + nprev)
        # balances at forecast factors
        row("=", fc.hd[t] * dev.m_d, "heat_balance", y=[(m_e[t], 1), (m_f[t], 1), (m_hwt[t], -1)])
        row("=", fc.ed[t] * dev.p_d, "power_balance",
            y=[(p_wt[t], 1), (p_pv[t], 1), (p_d[t], 1), (p_c[t], -1), (p_f[t], 1), (p_buy[t], 1),
               (p_sell[t], -1), (pe[t], -1)])
    row("=", 0, "bss_daily_cycle", y=[(v, chg) for v in p_c] + [(v, -dis) for v in p_d])
    row("<", dev.u_g_buy_max, "h2_buy_count", y=[(v, 1) for v in u_gb])
    fs = CompactFirstStage(c=c, A=R.matrix("y", cols.n), senses=np.array(R.senses), b=np.array(R.rhs),
                           lb=lb, ub=ub, integrality=np.array(cols.integer, bool), row_tags=tuple(R.tags))
    return fs, cols.vmap()


# -- second stage ----------------------------------------------------------------------


def compile_second_stage_template(inst: Instance, xmap: VariableMap | None = None) -> SecondStageTemplate:
    T, dt, dev, ini = inst.T, inst.dt, inst.devices, inst.init
    if xmap is None:
        xmap = compile_first_stage(inst)[1]
    X = xmap
    cols = _Columns()
    add = cols.add
    pw, pp = add("p_wt", T), add("p_pv", T)
    pc, pd = add("p_bss_c", T), add("p_bss_d", T)
    e = add("e_bss", T)
    pb, ps = add("p_buy", T), add("p_sell", T)
    pep = add("p_elz_p", T)
    hh = add("h_ht", T)
    pf = add("p_fc", T)
    nn = add("n_hwt", T)
    mh = add("m_hwt", T)
    ml, pl = add("m_loss", T), add("p_loss", T)
    free = np.zeros(cols.n, bool)
    free[mh] = True

    # xi layout: [wt | pv | ed | hd], T components each
    i_wt, i_pv, i_ed, i_hd = (np.arange(T) + k * T for k in range(4))

    pr = inst.prices
    d = np.zeros(cols.n)
    d[pb] = pr.buy * dt
    d[ps] = -pr.sell * dt
    d[pc] = d[pd] = 0.5 * dev.c_bss_deg * dt
    d[pep] = dev.c_elz_om * dt
    d[pf] = dev.c_fc_om * dt
    d[pl] = dev.iota_e * dt
    d[ml] = dev.iota_h * dt
    dx = np.zeros(X.size)
    dx[X["p_buy"]] = -pr.buy * dt
    dx[X["p_sell"]] = pr.sell * dt
    dx[X["p_bss_c"]] = dx[X["p_bss_d"]] = -0.5 * dev.c_bss_deg * dt
    dx[X["p_elz"]] = -dev.c_elz_om * dt
    dx[X["u_elz_s"]] = dev.c_elz_om * dev.p_elz_standby * dt  # standby draw is fixed by u_elz_s
    dx[X["p_fc"]] = -dev.c_fc_om * dt

    R = _Rows(("y", "x", "k"))
    row = R.add
    chg, dis = dev.eta_bss_c * dt, dt / dev.eta_bss_d
    h2_elz = dev.eta_elz / dev.lhv_h2
    heat_elz = dev.eta_elz_r * (1 - dev.eta_elz)
    h2_fc = 1.0 / (dev.eta_fc * dev.lhv_h2)
    heat_fc = dev.eta_fc_r * (1 - dev.eta_fc) / dev.eta_fc
    db, dsl = dev.delta_buy, dev.delta_sell
    for t in range(T):
        row("<", 0, "wt_avail", y=[(pw[t], 1)], k=[(i_wt[t], -dev.p_wt_max)])
        row("<", 0, "pv_avail", y=[(pp[t], 1)], k=[(i_pv[t], -dev.p_pv_max)])
        row("<", dev.p_bss_max, "bss_charge_cap", y=[(pc[t], 1)])
        row("<", dev.p_bss_max, "bss_discharge_cap", y=[(pd[t], 1)])
        prev = [(e[t - 1], -1)] if t else []
        row("=", ini.e_bss if t == 0 else 0, "bss_dynamics", y=[(e[t], 1), (pc[t], -chg), (pd[t], dis)] + prev)
        row("<", -dev.e_bss_min, "bss_min", y=[(e[t], -1)])
        row("<", dev.e_bss_max, "bss_max", y=[(e[t], 1)])
        row("<", 0, "buy_band_lo", y=[(pb[t], -1)], x=[(X["p_buy"][t], 1 - db)])
        row("<", 0, "buy_band_hi", y=[(pb[t], 1)], x=[(X["p_buy"][t], -(1 + db))])
        row("<", dev.p_sub_max, "buy_cap", y=[(pb[t], 1)])
        row("<", 0, "sell_band_lo", y=[(ps[t], -1)], x=[(X["p_sell"][t], 1 - dsl)])
        row("<", 0, "sell_band_hi", y=[(ps[t], 1)], x=[(X["p_sell"][t], -(1 + dsl))])
        row("<", dev.p_sub_max, "sell_cap", y=[(ps[t], 1)])
        row("<", 0, "elz_min", y=[(pep[t], -1)], x=[(X["u_elz_p"][t], dev.p_elz_min)])
        row("<", 0, "elz_max", y=[(pep[t], 1)], x=[(X["u_elz_p"][t], -dev.p_elz_max)])
        hprev = [(hh[t - 1], -(1 - dev.nu_ht))] if t else []
        row("=", (1 - dev.nu_ht) * ini.h_ht if t == 0 else 0, "ht_dynamics",
            y=[(hh[t], 1), (pep[t], -h2_elz * dt), (pf[t], h2_fc * dt)] + hprev, x=[(X["h_buy"][t], -1)])
        row("<", dev.h_ht_max, "ht_max", y=[(hh[t], 1)])
        row("<", 0, "fc_min", y=[(pf[t], -1)], x=[(X["u_fc"][t], dev.p_fc_min)])
        row("<", 0, "fc_max", y=[(pf[t], 1)], x=[(X["u_fc"][t], -dev.p_fc_max)])
        nprev = [(nn[t - 1], -(1 - dev.nu_hwt))] if t else []
        row("=", (1 - dev.nu_hwt) * ini.n_hwt if t == 0 else 0, "hwt_dynamics",
            y=[(nn[t], 1), (mh[t], -dt)] + nprev)
        row("<", dev.n_hwt_max, "hwt_max", y=[(nn[t], 1)])
        row("=", 0, "heat_balance", y=[(pep[t], heat_elz), (pf[t], heat_fc), (ml[t], 1), (mh[t], -1)],
            k=[(i_hd[t], -dev.m_d)])
        row("<", 0, "heat_loss_cap", y=[(ml[t], 1)], k=[(i_hd[t], -dev.m_d)])
        row("=", 0, "power_balance",
            y=[(pw[t], 1), (pp[t], 1), (pd[t], 1), (pc[t], -1), (pf[t], 1), (pb[t], 1), (ps[t], -1),
               (pep[t], -1), (pl[t], 1)],
            x=[(X["u_elz_s"][t], -dev.p_elz_standby)], k=[(i_ed[t], -dev.p_d)])
        row("<", 0, "power_loss_cap", y=[(pl[t], 1)], k=[(i_ed[t], -dev.p_d)])
    row("=", 0, "bss_daily_cycle", y=[(v, chg) for v in pc] + [(v, -dis) for v in pd])
    return SecondStageTemplate(d=d, F=R.matrix("y", cols.n), G=R.matrix("x", X.size), K=R.matrix("k", 4 * T),
                               h=np.array(R.rhs), senses=np.array(R.senses), free=free, dx=dx,
                               ymap=cols.vmap(), row_tags=tuple(R.tags), dt=dt)


@dataclass(frozen=True, eq=False)
class CompiledModel:
    """Everything the algorithms need, compiled once per instance."""

    inst: Instance
    first: CompactFirstStage
    xmap: VariableMap
    tpl: SecondStageTemplate
    extras: dict = field(default_factory=dict)


def compile_model(inst: Instance) -> CompiledModel:
    first, xmap = compile_first_stage(inst)
    return CompiledModel(inst, first, xmap, compile_second_stage_template(inst, xmap))


def solve_first_stage_only(model: CompiledModel, cost=None, limits: Limits | None = None) -> np.ndarray:
    """Optimal day-ahead schedule ignoring the re-dispatch stage (optionally with other costs)."""
    sol = solve(model.first.program(cost), limits)
    if not sol.has_point:
        raise SolverError(f"first-stage MILP {sol.status}")
    return _clean_binaries(model.first, sol.x)


def _clean_binaries(first: CompactFirstStage, x: np.ndarray) -> np.ndarray:
    x = np.array(x, float)
    x[first.integrality] = np.round(x[first.integrality])
    return x


def random_first_stage_points(model: CompiledModel, count: int, seed: int, scale: float = 1.0) -> list:
    """Distinct-ish feasible schedules from the first-stage MILP under randomly perturbed costs."""
    rng = np.random.default_rng(seed)
    base = model.first.c
    mag = np.maximum(np.abs(base), 1e-2 * model.inst.dt)
    out = []
    for _ in range(count):
        cost = base + scale * mag * rng.normal(size=len(base))
        out.append(solve_first_stage_only(model, cost))
    return out


def balance_residuals(inst: Instance, xmap: VariableMap, x: np.ndarray) -> dict:
    """Per-slot first-stage power and heat balance residuals (kW)."""
    v = xmap.decode(x)
    dev, fc = inst.devices, inst.forecasts
    power = (v["p_wt"] + v["p_pv"] + v["p_bss_d"] - v["p_bss_c"] + v["p_fc"] + v["p_buy"] - v["p_sell"]
             - v["p_elz"] - fc.ed * dev.p_d)
    heat = v["m_elz"] + v["m_fc"] - fc.hd * dev.m_d - v["m_hwt"]
    return {"power": power, "heat": heat}
