import numpy as np
import pytest

from memgdro.ambiguity import max_lattice_distance
from memgdro.baselines import run_basic_ccg, run_benders_dual, solve_ro, solve_saa
from memgdro.ccg import CcgOptions, extensive_oracle, run_ccg_dro_cg
from memgdro.formulation import evaluate_recourse
from memgdro.instance import SampleSet

from conftest import ball

EXACT = CcgOptions(eps=0.0)


def test_saa_single_forecast_sample(tiny2):
    inst, model = tiny2
    f = inst.forecast_vector()
    rep = solve_saa(model, SampleSet(f[None, :], np.ones(1)))
    q = evaluate_recourse(model.tpl, rep.x, f).objective
    assert rep.ub == pytest.approx(float(model.first.c @ rep.x) + q, rel=1e-7)


def test_ordering_saa_dro_ro(tiny3):
    inst, model = tiny3
    saa = solve_saa(model).ub
    ro = solve_ro(model, opts=EXACT).ub
    for r in (0.1, 1.0):
        dro = run_ccg_dro_cg(model, ball(inst, r), EXACT).ub
        assert saa <= dro + 1e-6 and dro <= ro + 1e-6


def test_basic_ccg_zero_radius_is_saa(tiny2):
    inst, model = tiny2
    assert run_basic_ccg(model, ball(inst, 0.0), EXACT).ub == pytest.approx(solve_saa(model).ub, rel=1e-6)


def test_basic_ccg_agrees_with_cg_variant(tiny3):
    inst, model = tiny3
    amb = ball(inst, 0.3)
    a = run_ccg_dro_cg(model, amb, EXACT).ub
    b = run_basic_ccg(model, amb, EXACT).ub
    assert abs(a - b) <= 1e-5 * abs(a)


def test_benders_cuts_separate_and_accumulate(tiny2):
    inst, model = tiny2
    rep = run_benders_dual(model, ball(inst, 0.3), EXACT)
    counts = [r.scenarios for r in rep.log]
    assert all(r.added > 0 for r in rep.log[:-1])
    assert all(b == a + r.added for a, b, r in zip(counts, counts[1:], rep.log[1:]))
    for slack, excess in zip(rep.extra["new_cut_slack"], rep.extra["value_over_master"]):
        if excess > 1e-6 * max(1.0, abs(rep.ub)):
            assert slack < 0


def test_large_radius_matches_box_robust(tiny2):
    inst, model = tiny2
    amb = ball(inst, 1e6)
    ro = solve_ro(model, opts=EXACT).ub
    assert run_ccg_dro_cg(model, amb, EXACT).ub == pytest.approx(ro, rel=1e-6)


@pytest.mark.slow
def test_oracle_with_slack_budget_is_box_robust(tiny2):
    inst, model = tiny2
    amb = ball(inst, 0.0)
    r = float(sum(p * max_lattice_distance(lat) for p, lat in zip(amb.probs, amb.lattices()))) + 0.1
    ref = extensive_oracle(model, ball(inst, r))
    assert ref.ub == pytest.approx(solve_ro(model, opts=EXACT).ub, rel=1e-6)
