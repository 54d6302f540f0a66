import numpy as np
import pytest

from memgdro.baselines import solve_saa
from memgdro.evaluation import CO2_PER_KWH, evaluate_out_of_sample, held_out_samples as held_out
from memgdro.formulation import evaluate_recourse, solve_first_stage_only
from memgdro.instance import SampleSet


def test_training_set_reproduces_saa_objective(tiny3):
    inst, model = tiny3
    saa = solve_saa(model)
    rep = evaluate_out_of_sample(model, saa.x, inst.samples)
    assert rep.oosc == pytest.approx(saa.ub, rel=1e-8)


def test_two_path_consistency_and_order_invariance(tiny3):
    inst, model = tiny3
    x = solve_first_stage_only(model)
    test = held_out(inst, 40, seed=5)
    rep = evaluate_out_of_sample(model, x, test)
    direct = float(model.first.c @ x) + np.mean([evaluate_recourse(model.tpl, x, xi).objective
                                                 for xi in test.samples])
    assert rep.oosc == pytest.approx(direct, abs=1e-8 * max(1.0, abs(direct)))
    perm = np.random.default_rng(0).permutation(test.S)
    shuffled = evaluate_out_of_sample(model, x, SampleSet(test.samples[perm], test.probabilities[perm]))
    for k, v in rep.indices().items():
        assert shuffled.indices()[k] == pytest.approx(v, rel=1e-12, abs=1e-12)


def test_indices_are_consistent(tiny3):
    inst, model = tiny3
    rep = evaluate_out_of_sample(model, solve_saa(model).x, held_out(inst, 60, seed=1), parallelism=2)
    assert 0 <= rep.pels <= 1 and 0 <= rep.phls <= 1
    assert rep.eeens >= 0 and rep.ehens >= 0
    assert (rep.pels == 0) == (rep.eeens <= 1e-6)
    assert (rep.phls == 0) == (rep.ehens <= 1e-6)


def test_no_losses_gives_zero_indices(tiny3):
    inst, model = tiny3
    x = solve_first_stage_only(model)
    f = inst.forecast_vector()
    rep = evaluate_out_of_sample(model, x, SampleSet(np.vstack([f, f]), np.full(2, 0.5)))
    assert rep.pels == rep.phls == 0
    assert rep.eeens == rep.ehens == 0


def test_emission_sums_net_import_over_slots(tiny3):
    inst, model = tiny3
    x = solve_first_stage_only(model)
    xi = inst.samples.samples[0]
    rep = evaluate_out_of_sample(model, x, SampleSet(xi[None, :], np.ones(1)))
    y = evaluate_recourse(model.tpl, x, xi).y
    ym = model.tpl.ymap
    expect = CO2_PER_KWH * inst.dt * float((y[ym["p_buy"]] - y[ym["p_sell"]]).sum())
    assert rep.ence == pytest.approx(expect, rel=1e-6, abs=1e-6)


def test_held_out_draws_differ_from_training(tiny3):
    inst, _ = tiny3
    t = held_out(inst, inst.samples.S, seed=0)
    assert not np.array_equal(t.samples, inst.samples.samples)
    assert held_out(inst, 5, seed=0) == held_out(inst, 5, seed=0)


def test_report_files(tiny3, tmp_path):
    inst, model = tiny3
    rep = evaluate_out_of_sample(model, solve_first_stage_only(model), inst.samples)
    rep.to_json(tmp_path / "o.json")
    rep.to_csv(tmp_path / "o.csv")
    assert len((tmp_path / "o.csv").read_text().splitlines()) == inst.samples.S + 1
