"""MEMG instance data: parameters, forecasts, uncertainty box, samples.

Instances are immutable.  They are read from and written to a JSON document
(``schema_version`` 1, see ``docs/instance_schema.md``); fields left out of a
file fall back to the default equipment parameters and prices.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
KINDS = ("wt", "pv", "ed", "hd")
DEFAULT_NAME = "memg_default"

# hour-of-day breakpoints (end hour, buy $/kWh, sell $/kWh)
_PRICE_TABLE = [
    (8, 0.0431, 0.0345),
    (10, 0.1135, 0.0908),
    (14, 0.1875, 0.1500),
    (17, 0.1135, 0.0908),
    (18, 0.1875, 0.1500),
    (22, 0.2058, 0.1646),
    (23, 0.1875, 0.1500),
    (24, 0.1140, 0.0912),
]
HYDROGEN_PRICE = 5.724


class InstanceError(ValueError):
    pass


class InstanceParseError(InstanceError):
    """The file is not valid JSON."""


class SchemaError(InstanceError):
    """A mandatory field is missing or an invariant does not hold."""


class UnitError(InstanceError):
    """A physical quantity has an impossible value (e.g. negative capacity)."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    slot_count: int
    slot_hours: float

    @property
    def T(self) -> int:
        return self.slot_count

    @property
    def dt(self) -> float:
        return self.slot_hours


@dataclass(frozen=True, eq=False)
class PriceSeries:
    buy: np.ndarray
    sell: np.ndarray
    hydrogen_buy: float = HYDROGEN_PRICE

    def __post_init__(self):
        object.__setattr__(self, "buy", _frozen(self.buy))
        object.__setattr__(self, "sell", _frozen(self.sell))


@dataclass(frozen=True)
class DeviceParams:
    """Equipment and market parameters; defaults describe the bundled case study."""

    # renewables (kW)
    p_wt_max: float = 3000.0
    p_pv_max: float = 4000.0
    # battery
    p_bss_max: float = 2000.0
    e_bss_max: float = 4000.0
    e_bss_min: float = 3400.0
    eta_bss_c: float = 0.90
    eta_bss_d: float = 0.90
    c_bss_deg: float = 0.001
    # electrolyzer
    p_elz_max: float = 1500.0
    p_elz_min: float = 225.0
    p_elz_standby: float = 22.5
    tau_cold: float = 1.0
    eta_elz: float = 0.7566
    eta_elz_r: float = 0.9203
    lhv_h2: float = 33.33
    c_elz_cold_su: float = 10.0
    c_elz_cold_sd: float = 10.0
    c_elz_warm_su: float = 0.2
    c_elz_warm_sd: float = 0.2
    c_elz_om: float = 0.001
    # fuel cell
    p_fc_max: float = 1000.0
    p_fc_min: float = 50.0
    eta_fc: float = 0.2727
    eta_fc_r: float = 0.8214
    c_fc_su: float = 10.0
    c_fc_sd: float = 10.0
    c_fc_om: float = 0.001
    # tanks
    h_ht_max: float = 300.0
    nu_ht: float = 0.02
    n_hwt_max: float = 700.0
    nu_hwt: float = 0.02
    # grid and hydrogen market
    p_sub_max: float = 1500.0
    h_buy_max: float = 200.0
    u_g_buy_max: int = 2
    # nominal demands (kW)
    p_d: float = 3000.0
    m_d: float = 700.0
    # unmet-demand compensation ($/kWh)
    iota_e: float = 0.20
    iota_h: float = 0.23
    # intra-day deviation bands
    delta_buy: float = 0.10
    delta_sell: float = 0.10

    def cold_lag(self, slot_hours: float) -> int:
        """Cold-startup delay in slots; raises if not a whole number."""
        ratio = self.tau_cold / slot_hours
        lag = int(round(ratio))
        if abs(ratio - lag) > 1e-9:
            raise SchemaError(f"tau_cold={self.tau_cold} h is not a multiple of the slot length {slot_hours} h")
        return lag


@dataclass(frozen=True, eq=False)
class ForecastProfiles:
    wt: np.ndarray
    pv: np.ndarray
    ed: np.ndarray
    hd: np.ndarray

    def __post_init__(self):
        for k in KINDS:
            object.__setattr__(self, k, _frozen(getattr(self, k)))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.wt, self.pv, self.ed, self.hd])


@dataclass(frozen=True, eq=False)
class UncertaintyBox:
    """Box ``lower <= xi <= upper``; component ``k*T + t`` is factor ``KINDS[k]`` at slot ``t``."""

    lower: np.ndarray
    upper: np.ndarray
    slot_count: int

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen(self.lower))
        object.__setattr__(self, "upper", _frozen(self.upper))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def kinds(self) -> np.ndarray:
        return np.repeat(np.array(KINDS), self.slot_count)

    @property
    def slots(self) -> np.ndarray:
        return np.tile(np.arange(self.slot_count), len(KINDS))

    @property
    def renewable_mask(self) -> np.ndarray:
        return np.isin(self.kinds, ("wt", "pv"))

    def contains(self, xi: np.ndarray, tol: float = 1e-9) -> bool:
        xi = np.asarray(xi, float)
        return bool(np.all(xi >= self.lower - tol) and np.all(xi <= self.upper + tol))


@dataclass(frozen=True, eq=False)
class SampleSet:
    samples: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(np.atleast_2d(self.samples)))
        object.__setattr__(self, "probabilities", _frozen(self.probabilities))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def S(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other):
        return (isinstance(other, SampleSet) and np.array_equal(self.samples, other.samples)
                and np.array_equal(self.probabilities, other.probabilities))

    __hash__ = None

    def subset(self, idx) -> "SampleSet":
        p = self.probabilities[idx]
        return SampleSet(self.samples[idx], p / p.sum())


@dataclass(frozen=True)
class InitialState:
    e_bss: float
    h_ht: float
    n_hwt: float
    u_fc: int = 0
    u_elz_p: int = 0
    u_elz_s: int = 0
    u_elz_i: int = 0
    # cold-startup decisions for the last L slots of the previous day (oldest first)
    y_cold_history: tuple = ()

    @classmethod
    def default(cls, dev: DeviceParams, lag: int) -> "InitialState":
        return cls(e_bss=dev.e_bss_min + 0.5 * (dev.e_bss_max - dev.e_bss_min),
                   h_ht=0.5 * dev.h_ht_max, n_hwt=0.5 * dev.n_hwt_max,
                   y_cold_history=(0,) * lag)

    def y_cold_before(self, k: int) -> int:
        """Cold-startup flag of the prior-day slot ``k`` (``-L <= k <= -1``, 0-based day slots)."""
        hist = self.y_cold_history
        pos = k + len(hist)
        if k < 0 and 0 <= pos < len(hist):
            return int(hist[pos])
        return 0


@dataclass(frozen=True, eq=False)
class Instance:
    grid: TimeGrid
    prices: PriceSeries
    devices: DeviceParams
    forecasts: ForecastProfiles
    box: UncertaintyBox
    samples: SampleSet
    init: InitialState
    name: str = ""

    @property
    def T(self) -> int:
        return self.grid.slot_count

    @property
    def dt(self) -> float:
        return self.grid.slot_hours

    @property
    def m_xi(self) -> int:
        return self.box.dim

    @property
    def cold_lag(self) -> int:
        return self.devices.cold_lag(self.dt)

    def forecast_vector(self) -> np.ndarray:
        return self.forecasts.vector()

    def with_samples(self, samples: SampleSet) -> "Instance":
        return replace(self, samples=samples)

    def to_dict(self) -> dict:
        return _to_dict(self)

    def __eq__(self, other):
        return isinstance(other, Instance) and self.to_dict() == other.to_dict()

    __hash__ = None


# -- validation ------------------------------------------------------------------------


@dataclass
class Violation:
    path: str
    message: str
    kind: str = "schema"  # "schema" or "unit"

    def __str__(self):
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)


def validate_instance(inst: Instance) -> ValidationReport:
    """Collect every violated invariant; never raises."""
    rep = ValidationReport()
    bad = rep.violations.append
    T, dt = inst.grid.slot_count, inst.grid.slot_hours
    if T < 1:
        bad(Violation("grid.slot_count", "must be >= 1"))
    if not dt > 0:
        bad(Violation("grid.slot_hours", "must be > 0", "unit"))
    elif abs(T * dt - 24.0) > 1e-9:
        bad(Violation("grid", f"slot_count*slot_hours = {T * dt} h, expected 24 h"))

    pr = inst.prices
    for name in ("buy", "sell"):
        arr = getattr(pr, name)
        if len(arr) != T:
            bad(Violation(f"prices.{name}", f"length {len(arr)} != {T}"))
        if np.any(arr < 0):
            bad(Violation(f"prices.{name}", "negative price", "unit"))
    if pr.hydrogen_buy < 0:
        bad(Violation("prices.hydrogen_buy", "negative price", "unit"))
    if len(pr.buy) == len(pr.sell) and np.any(pr.sell > pr.buy):
        rep.warnings.append("prices: selling price above buying price in some slots")

    dev = inst.devices
    for f in fields(dev):
        v = getattr(dev, f.name)
        if v < 0:
            bad(Violation(f"devices.{f.name}", f"negative value {v}", "unit"))
    for lo, hi in (("p_elz_min", "p_elz_max"), ("p_fc_min", "p_fc_max"), ("e_bss_min", "e_bss_max")):
        if getattr(dev, lo) > getattr(dev, hi):
            bad(Violation(f"devices.{lo}", f"{lo} > {hi}"))
    for name in ("eta_bss_c", "eta_bss_d", "eta_elz", "eta_elz_r", "eta_fc", "eta_fc_r"):
        v = getattr(dev, name)
        if not 0 < v <= 1:
            bad(Violation(f"devices.{name}", f"efficiency {v} outside (0, 1]"))
    for name in ("nu_ht", "nu_hwt"):
        v = getattr(dev, name)
        if not 0 <= v < 1:
            bad(Violation(f"devices.{name}", f"dissipation {v} outside [0, 1)"))
    for name in ("delta_buy", "delta_sell"):
        v = getattr(dev, name)
        if not 0 <= v <= 1:
            bad(Violation(f"devices.{name}", f"band {v} outside [0, 1]"))
    lag = None
    if dt > 0:
        try:
            lag = dev.cold_lag(dt)
        except SchemaError as exc:
            bad(Violation("devices.tau_cold", str(exc)))

    fc = inst.forecasts
    for k in KINDS:
        arr = getattr(fc, k)
        if len(arr) != T:
            bad(Violation(f"forecasts.{k}", f"length {len(arr)} != {T}"))
        if np.any(arr < 0):
            bad(Violation(f"forecasts.{k}", "negative factor"))
        if k in ("wt", "pv") and np.any(arr > 1):
            bad(Violation(f"forecasts.{k}", "factor above 1"))

    box = inst.box
    if box.dim != 4 * T or len(box.upper) != box.dim or box.slot_count != T:
        bad(Violation("box", f"dimension {box.dim} != 4*T = {4 * T}"))
    else:
        for i in np.flatnonzero(box.lower > box.upper):
            bad(Violation(f"box[{i}]", "lower bound above upper bound"))
        f = fc.vector() if all(len(getattr(fc, k)) == T for k in KINDS) else None
        if f is not None:
            kinds, slots = box.kinds, box.slots
            for i in np.flatnonzero((f < box.lower - 1e-12) | (f > box.upper + 1e-12)):
                bad(Violation(f"forecasts.{kinds[i]}[{slots[i]}]", "forecast outside the uncertainty box"))
            rep.warnings.extend(recourse_warnings(inst))

    smp = inst.samples
    if smp.S:
        if smp.samples.shape[1] != box.dim:
            bad(Violation("samples", f"sample width {smp.samples.shape[1]} != {box.dim}"))
        elif box.dim == 4 * T:
            for s in range(smp.S):
                if not box.contains(smp.samples[s]):
                    bad(Violation(f"samples[{s}]", "sample outside the uncertainty box"))
        if len(smp.probabilities) != smp.S:
            bad(Violation("samples.probabilities", "length mismatch"))
        else:
            if np.any(smp.probabilities <= 0):
                bad(Violation("samples.probabilities", "probabilities must be > 0"))
            if abs(smp.probabilities.sum() - 1) > 1e-9:
                bad(Violation("samples.probabilities", f"sum {smp.probabilities.sum()} != 1"))

    ini = inst.init
    if not dev.e_bss_min <= ini.e_bss <= dev.e_bss_max:
        bad(Violation("init.e_bss", "outside battery bounds"))
    if not 0 <= ini.h_ht <= dev.h_ht_max:
        bad(Violation("init.h_ht", "outside tank bounds"))
    if not 0 <= ini.n_hwt <= dev.n_hwt_max:
        bad(Violation("init.n_hwt", "outside tank bounds"))
    flags = (ini.u_fc, ini.u_elz_p, ini.u_elz_s, ini.u_elz_i, *ini.y_cold_history)
    if any(v not in (0, 1) for v in flags):
        bad(Violation("init", "status flags must be 0 or 1"))
    if ini.u_elz_p + ini.u_elz_s != ini.u_elz_i:
        bad(Violation("init", "u_elz_p + u_elz_s must equal u_elz_i"))
    if lag is not None and len(ini.y_cold_history) != lag:
        bad(Violation("init.y_cold_history", f"expected {lag} entries, got {len(ini.y_cold_history)}"))
    return rep


def recourse_warnings(inst: Instance) -> list[str]:
    """Check data conditions under which every re-dispatch LP is feasible.

    Keeping every pre-dispatch device setting and adjusting only renewables and
    load losses is a feasible re-dispatch whenever, per slot, the renewable
    shortfall stays below the forecast electric demand, the electric demand
    drop stays below the forecast renewable output, and heat demand never
    falls below its forecast (surplus heat has nowhere to go).
    """
    out = []
    dev, fc, box, T = inst.devices, inst.forecasts, inst.box, inst.T
    lo = {k: box.lower[i * T:(i + 1) * T] for i, k in enumerate(KINDS)}
    shortfall = (fc.wt - lo["wt"]) * dev.p_wt_max + (fc.pv - lo["pv"]) * dev.p_pv_max
    if np.any(shortfall > fc.ed * dev.p_d + 1e-9):
        out.append("box: renewable shortfall can exceed forecast electric demand; re-dispatch may be infeasible")
    drop = (fc.ed - lo["ed"]) * dev.p_d
    if np.any(drop > fc.wt * dev.p_wt_max + fc.pv * dev.p_pv_max + 1e-9):
        out.append("box: electric demand drop can exceed forecast renewable output; re-dispatch may be infeasible")
    if np.any(lo["hd"] < fc.hd - 1e-12):
        out.append("box: heat demand can fall below forecast; re-dispatch may be infeasible")
    return out


def _raise_on(rep: ValidationReport):
    if rep.violations:
        msg = "; ".join(str(v) for v in rep.violations)
        if any(v.kind == "unit" for v in rep.violations):
            raise UnitError(msg)
        raise SchemaError(msg)


# -- default data ----------------------------------------------------------------------


def hourly_prices() -> tuple[np.ndarray, np.ndarray]:
    buy, sell = np.empty(24), np.empty(24)
    start = 0
    for end, b, s in _PRICE_TABLE:
        buy[start:end] = b
        sell[start:end] = s
        start = end
    return buy, sell


def slot_prices(slot_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Time-weighted average of the hourly tariff over each slot."""
    buy_h, sell_h = hourly_prices()
    dt = 24.0 / slot_count
    buy, sell = np.empty(slot_count), np.empty(slot_count)
    for t in range(slot_count):
        a, b = t * dt, (t + 1) * dt
        w = np.array([max(0.0, min(b, h + 1) - max(a, h)) for h in range(24)])
        buy[t] = w @ buy_h / dt
        sell[t] = w @ sell_h / dt
    return buy, sell


def _profile(kind: str, hours: np.ndarray) -> np.ndarray:
    h = hours
    if kind == "wt":
        return 0.5 + 0.22 * np.cos(2 * np.pi * (h - 3.0) / 24.0)
    if kind == "pv":
        s = np.clip(np.sin(np.pi * (h - 6.0) / 13.0), 0.0, None)
        return np.where((h > 6.0) & (h < 19.0), 0.78 * s ** 1.3, 0.0)
    if kind == "ed":
        return (0.5 + 0.3 * np.exp(-((h - 11.0) / 3.5) ** 2)
                + 0.2 * np.exp(-((h - 19.5) / 2.2) ** 2))
    if kind == "hd":
        return 0.55 + 0.15 * np.cos(2 * np.pi * (h - 5.0) / 24.0)
    raise KeyError(kind)


def synthetic_forecasts(slot_count: int) -> ForecastProfiles:
    """Smooth diurnal shapes averaged over each slot (not measured data)."""
    dt = 24.0 / slot_count
    out = {}
    for k in KINDS:
        vals = np.empty(slot_count)
        for t in range(slot_count):
            hrs = t * dt + (np.arange(24) + 0.5) * dt / 24
            vals[t] = _profile(k, hrs).mean()
        out[k] = np.round(vals, 6)
    return ForecastProfiles(**out)


# relative half-widths of the synthetic box around the forecast
_BOX_SHAPE = {"wt": (0.4, 0.3), "pv": (0.4, 0.3), "ed": (0.15, 0.15), "hd": (0.0, 0.25)}


def synthetic_box(fc: ForecastProfiles) -> UncertaintyBox:
    lo, hi = [], []
    for k in KINDS:
        f = getattr(fc, k)
        down, up = _BOX_SHAPE[k]
        lo.append(np.round(f * (1 - down), 6))
        h = np.round(f * (1 + up), 6)
        if k in ("wt", "pv"):
            h = np.minimum(h, 1.0)
        hi.append(h)
    return UncertaintyBox(np.concatenate(lo), np.concatenate(hi), len(fc.wt))


def build_default_instance(slot_count: int = 48, sample_count: int = 10, seed: int = 0,
                           spread: float = 0.3, devices: DeviceParams | None = None) -> Instance:
    """Case-study parameters on a ``slot_count`` grid with synthetic forecasts and samples.

    When the slot length does not divide the 1 h cold-startup delay, the delay
    is rounded to a whole number of slots (at least one).
    """
    dt = 24.0 / slot_count
    dev = devices or DeviceParams()
    lag = dev.tau_cold / dt
    if abs(lag - round(lag)) > 1e-9 or round(lag) == 0:
        dev = replace(dev, tau_cold=max(1, round(lag)) * dt)
    buy, sell = slot_prices(slot_count)
    fc = synthetic_forecasts(slot_count)
    box = synthetic_box(fc)
    lag = dev.cold_lag(dt)
    base = Instance(grid=TimeGrid(slot_count, dt), prices=PriceSeries(buy, sell), devices=dev,
                    forecasts=fc, box=box, samples=SampleSet(np.zeros((0, box.dim)), np.zeros(0)),
                    init=InitialState.default(dev, lag), name=f"synthetic-T{slot_count}")
    if sample_count:
        base = base.with_samples(synthesize_samples(base, sample_count, seed, spread))
    return base


def synthesize_samples(inst: Instance, count: int, seed: int, spread: float = 0.3) -> SampleSet:
    """Independent uniform draws per component around the forecast, clipped to the box."""
    if not 0 <= spread <= 1:
        raise ValueError(f"spread must lie in [0, 1], got {spread}")
    if count < 1:
        raise ValueError("count must be positive")
    box = inst.box
    f = inst.forecast_vector()
    w = box.width
    a = np.maximum(box.lower, f - spread * w)
    b = np.minimum(box.upper, f + spread * w)
    rng = np.random.default_rng(seed)
    u = rng.random((count, box.dim))
    xs = a + u * (b - a)
    return SampleSet(xs, np.full(count, 1.0 / count))


# -- (de)serialization -----------------------------------------------------------------


def _to_dict(inst: Instance) -> dict:
    T = inst.T
    box = inst.box
    return {
        "schema_version": SCHEMA_VERSION,
        "name": inst.name,
        "grid": {"slot_count": inst.grid.slot_count, "slot_hours": inst.grid.slot_hours},
        "prices": {"buy": inst.prices.buy.tolist(), "sell": inst.prices.sell.tolist(),
                   "hydrogen_buy": inst.prices.hydrogen_buy},
        "devices": asdict(inst.devices),
        "forecasts": {k: getattr(inst.forecasts, k).tolist() for k in KINDS},
        "box": {
            "lower": {k: box.lower[i * T:(i + 1) * T].tolist() for i, k in enumerate(KINDS)},
            "upper": {k: box.upper[i * T:(i + 1) * T].tolist() for i, k in enumerate(KINDS)},
        },
        "samples": {"values": inst.samples.samples.tolist(),
                    "probabilities": inst.samples.probabilities.tolist()},
        "initial_state": {**asdict(inst.init), "y_cold_history": list(inst.init.y_cold_history)},
    }


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise SchemaError(f"missing mandatory field {path}{key}")
    return d[key]


def instance_from_dict(d: dict) -> Instance:
    """Build and validate an instance; omitted optional sections take defaults."""
    if not isinstance(d, dict):
        raise SchemaError("instance document must be a JSON object")
    version = _need(d, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}")
    g = _need(d, "grid", "")
    T = int(_need(g, "slot_count", "grid."))
    dt = float(g.get("slot_hours", 24.0 / T if T else 0.0))
    grid = TimeGrid(T, dt)

    dev_d = d.get("devices", {})
    known = {f.name for f in fields(DeviceParams)}
    unknown = set(dev_d) - known
    if unknown:
        raise SchemaError(f"unknown device fields {sorted(unknown)}")
    dev = DeviceParams(**dev_d)

    if "prices" in d:
        p = d["prices"]
        prices = PriceSeries(_need(p, "buy", "prices."), _need(p, "sell", "prices."),
                             float(p.get("hydrogen_buy", HYDROGEN_PRICE)))
    else:
        prices = PriceSeries(*slot_prices(T))

    fd = _need(d, "forecasts", "")
    fc = ForecastProfiles(**{k: _need(fd, k, "forecasts.") for k in KINDS})
    bd = _need(d, "box", "")
    lo, hi = _need(bd, "lower", "box."), _need(bd, "upper", "box.")
    box = UncertaintyBox(np.concatenate([np.asarray(_need(lo, k, "box.lower."), float) for k in KINDS]),
                         np.concatenate([np.asarray(_need(hi, k, "box.upper."), float) for k in KINDS]), T)

    if dt <= 0:
        raise UnitError("grid.slot_hours must be positive")
    try:
        lag = dev.cold_lag(dt)
    except SchemaError:
        lag = max(0, int(round(dev.tau_cold / dt)))
    if "initial_state" in d:
        ini_d = dict(d["initial_state"])
        base = InitialState.default(dev, lag)
        ini_d["y_cold_history"] = tuple(int(v) for v in ini_d.get("y_cold_history", base.y_cold_history))
        for k in ("u_fc", "u_elz_p", "u_elz_s", "u_elz_i"):
            if k in ini_d:
                ini_d[k] = int(ini_d[k])
        ini = replace(base, **ini_d)
    else:
        ini = InitialState.default(dev, lag)

    inst = Instance(grid=grid, prices=prices, devices=dev, forecasts=fc, box=box,
                    samples=SampleSet(np.zeros((0, box.dim)), np.zeros(0)), init=ini,
                    name=d.get("name", ""))
    smp = d.get("samples")
    if smp and len(smp.get("values", [])):
        vals = np.asarray(smp["values"], float)
        probs = np.asarray(smp.get("probabilities", np.full(len(vals), 1.0 / len(vals))), float)
        inst = inst.with_samples(SampleSet(vals, probs))
    _raise_on(validate_instance(inst))
    if not inst.samples.S:
        inst = inst.with_samples(synthesize_samples(inst, 10, 0))
    for w in validate_instance(inst).warnings:
        warnings.warn(w, stacklevel=2)
    return inst


def default_instance_path() -> Path:
    return Path(str(resources.files("memgdro") / "data" / f"{DEFAULT_NAME}.json"))


def load_instance(path) -> Instance:
    """Read an instance file; ``"default"`` or ``"memg_default"`` selects the bundled one."""
    if str(path) in ("default", DEFAULT_NAME):
        path = default_instance_path()
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}: {exc}") from exc
    return instance_from_dict(doc)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=1))


def save_samples_csv(samples: SampleSet, path) -> None:
    m = samples.samples.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"xi_{i}" for i in range(m)] + ["probability"])
        for row, p in zip(samples.samples, samples.probabilities):
            w.writerow([repr(float(v)) for v in row] + [repr(float(p))])


def load_samples_csv(path) -> SampleSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "probability":
        raise SchemaError(f"{path}: expected a header ending with 'probability'")
    data = np.array([[float(v) for v in r] for r in rows[1:]], float).reshape(-1, len(rows[0]))
    return SampleSet(data[:, :-1], data[:, -1])


def cold_lag_hours_note(inst: Instance) -> str:
    return f"tau_cold={inst.devices.tau_cold} h = {inst.cold_lag} slot(s) of {inst.dt} h"


def slot_hours_label(t: int, dt: float) -> str:
    h0 = t * dt
    return f"{int(h0):02d}:{int(round(60 * (h0 - math.floor(h0)))):02d}"
