"""Out-of-sample evaluation of a day-ahead schedule.

Each test scenario is re-dispatched by the recourse LP; the report carries
the cost, shedding and emission indices plus one detail row per scenario.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .formulation import CompiledModel
from .instance import Instance, SampleSet, synthesize_samples
from .wcep import RecourseOracle

CO2_PER_KWH = 0.5856  # kg CO2 per kWh imported from the grid
LOSS_THRESHOLD = 1e-6  # kWh; smaller losses are solver noise
TEST_STREAM = 0x7E57  # keeps test draws apart from training draws with the same seed


def held_out_samples(inst: Instance, count: int = 1000, seed: int = 0, spread: float = 0.3) -> SampleSet:
    """Held-out scenarios from the sampling scheme used for training, on a separate random stream."""
    return synthesize_samples(inst, count, np.random.SeedSequence([int(seed), TEST_STREAM]), spread)


@dataclass
class ScenarioOutcome:
    cost: float
    power_shed: float  # kWh
    heat_shed: float  # kWh
    emission: float  # kg


@dataclass
class OosReport:
    oosc: float
    pels: float
    phls: float
    eeens: float
    ehens: float
    ence: float
    first_stage_cost: float
    weights: np.ndarray
    outcomes: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.outcomes)

    def indices(self) -> dict:
        return {"OOSC": self.oosc, "PELS": self.pels, "PHLS": self.phls, "EEENS": self.eeens,
                "EHENS": self.ehens, "ENCE": self.ence}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({**self.indices(), "scenarios": self.count, "first_stage_cost": self.first_stage_cost},
                      fh, indent=1, sort_keys=True)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "weight", "cost", "power_shed_kwh", "heat_shed_kwh", "emission_kg"])
            for i, (p, o) in enumerate(zip(self.weights, self.outcomes)):
                w.writerow([i, repr(float(p)), repr(o.cost), repr(o.power_shed), repr(o.heat_shed),
                            repr(o.emission)])


def evaluate_out_of_sample(model: CompiledModel, x: np.ndarray, test: SampleSet,
                           parallelism: int = 1) -> OosReport:
    x = np.asarray(x, float)
    tpl, ym = model.tpl, model.tpl.ymap
    dt = tpl.dt
    oracle = RecourseOracle(tpl)

    def one(xi):
        r = oracle.evaluate(x, xi)
        y = r.y
        net = y[ym["p_buy"]] - y[ym["p_sell"]]
        return ScenarioOutcome(float(r.objective), float(y[ym["p_loss"]].sum() * dt),
                               float(y[ym["m_loss"]].sum() * dt), float(CO2_PER_KWH * net.sum() * dt))

    if parallelism > 1 and test.S > 1:
        with ThreadPoolExecutor(parallelism) as ex:
            outcomes = list(ex.map(one, test.samples))
    else:
        outcomes = [one(xi) for xi in test.samples]
    w = np.asarray(test.probabilities, float)
    w = w / w.sum()
    cost = np.array([o.cost for o in outcomes])
    # sub-threshold losses count as zero in both the probability and the expectation
    pshed = _denoise([o.power_shed for o in outcomes])
    hshed = _denoise([o.heat_shed for o in outcomes])
    emis = np.array([o.emission for o in outcomes])
    c1 = float(model.first.c @ x)
    return OosReport(
        oosc=c1 + float(w @ cost),
        pels=float(w @ (pshed > 0)),
        phls=float(w @ (hshed > 0)),
        eeens=float(w @ pshed),
        ehens=float(w @ hshed),
        ence=float(w @ emis),
        first_stage_cost=c1,
        weights=w,
        outcomes=outcomes,
    )


def _denoise(v) -> np.ndarray:
    v = np.asarray(v, float)
    return np.where(v > LOSS_THRESHOLD, v, 0.0)
