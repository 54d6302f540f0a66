import json

import numpy as np
import pytest

from memgdro.ambiguity import code_key
from memgdro.baselines import solve_saa
from memgdro.ccg import CcgOptions, MasterProblem, extensive_oracle, relative_gap, run_ccg_dro_cg

from conftest import ball

EXACT = CcgOptions(eps=0.0)


def check_bounds(rep, eps):
    lbs = [r.lb for r in rep.log]
    ubs = [r.ub for r in rep.log]
    assert all(b >= a for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a for a, b in zip(ubs, ubs[1:]))
    for r in rep.log:
        assert r.ub >= r.lb - 1e-6 * abs(r.lb)
    assert rep.gap <= max(eps, 1e-6)


def test_zero_radius_one_iteration_equals_saa(tiny2):
    inst, model = tiny2
    rep = run_ccg_dro_cg(model, ball(inst, 0.0), EXACT)
    saa = solve_saa(model)
    assert rep.iterations == 1
    assert rep.ub == pytest.approx(saa.ub, rel=1e-6)


def test_initial_master_is_sample_average(tiny2):
    inst, model = tiny2
    amb = ball(inst, 0.0)
    master = MasterProblem(model, amb.probs, 0.0)
    for s, xi in enumerate(inst.samples.samples):
        master.add(s, xi, 0.0)
    assert master.solve(1e-9).objective == pytest.approx(solve_saa(model).ub, rel=1e-7)


def test_master_dedups_blocks(tiny2):
    inst, model = tiny2
    master = MasterProblem(model, inst.samples.probabilities, 0.3)
    z = np.zeros(inst.m_xi, np.int8)
    assert master.add(0, inst.samples.samples[0], 0.0, code_key(z))
    assert not master.add(0, inst.samples.samples[0], 0.0, code_key(z))
    assert len(master) == 1


def test_matches_extensive_form(tiny2):
    inst, model = tiny2
    amb = ball(inst, 0.3)
    rep = run_ccg_dro_cg(model, amb, EXACT)
    ref = extensive_oracle(model, amb)
    assert abs(rep.ub - ref.ub) <= 1e-5 * abs(ref.ub)
    check_bounds(rep, 0.0)


def test_radius_sweep_is_monotone(tiny2):
    inst, model = tiny2
    vals = [run_ccg_dro_cg(model, ball(inst, r), EXACT).ub for r in (0, 0.5, 1, 5)]
    assert all(b >= a - 1e-6 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("radius", [0.3, 1.0])
def test_lazy_certification_keeps_objective(tiny3, radius):
    inst, model = tiny3
    amb = ball(inst, radius)
    eager = run_ccg_dro_cg(model, amb, CcgOptions(eps=0.0, lazy_certify=False))
    lazy = run_ccg_dro_cg(model, amb, EXACT)
    assert lazy.ub == pytest.approx(eager.ub, rel=1e-6)
    check_bounds(lazy, 0.0)


def test_upper_bound_only_from_certified_values(tiny3):
    inst, model = tiny3
    rep = run_ccg_dro_cg(model, ball(inst, 1.0), EXACT)
    # any finite upper bound must be reached by some record's own value
    for i, r in enumerate(rep.log):
        if np.isfinite(r.ub):
            assert any(abs(q.value - r.ub) <= 1e-9 * max(1.0, abs(r.ub)) for q in rep.log[:i + 1])
    assert np.isfinite(rep.ub)


def test_warm_pool_from_other_radius_keeps_objective(tiny2):
    inst, model = tiny2
    first = run_ccg_dro_cg(model, ball(inst, 0.3), EXACT)
    cold = run_ccg_dro_cg(model, ball(inst, 1.0), EXACT)
    warm = run_ccg_dro_cg(model, ball(inst, 1.0), EXACT, warm=first.extra["pool"])
    assert warm.ub == pytest.approx(cold.ub, rel=1e-7)
    assert warm.scenarios >= len(sum(first.extra["pool"], []))


def test_warm_pool_rejects_off_lattice_codes(tiny2):
    inst, model = tiny2
    bad = [[[2] * 8], []]  # upper candidate on wind, absent from the reduced lattice
    with pytest.raises(ValueError, match="off the lattice"):
        run_ccg_dro_cg(model, ball(inst, 1.0), EXACT, warm=bad)


def test_only_support_scenarios_enter_master(tiny3):
    inst, model = tiny3
    rep = run_ccg_dro_cg(model, ball(inst, 0.3), EXACT)
    added = [r.added for r in rep.log]
    assert rep.scenarios == inst.samples.S + sum(added)
    assert all(a <= inst.samples.S + 1 for a in added)
    check_bounds(rep, 0.0)


def test_report_json_is_reproducible(tiny2, tmp_path):
    inst, model = tiny2
    a = run_ccg_dro_cg(model, ball(inst, 0.3), EXACT)
    b = run_ccg_dro_cg(model, ball(inst, 0.3), EXACT)
    a.to_json(tmp_path / "a.json", timing=False)
    b.to_json(tmp_path / "b.json", timing=False)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["gap"] == pytest.approx(relative_gap(doc["ub"], doc["lb"]))


def test_relative_gap():
    assert relative_gap(110.0, 100.0) == pytest.approx(0.1)
    assert relative_gap(-90.0, -100.0) == pytest.approx(0.1)
    assert relative_gap(1.0, 0.0) == 1.0
    assert relative_gap(np.inf, 0.0) == np.inf


def test_exhausted_budget_reports_limit(tiny3):
    inst, model = tiny3
    rep = run_ccg_dro_cg(model, ball(inst, 1.0), CcgOptions(eps=0.0, time_budget=0.0))
    assert rep.status == "limit"
    assert not np.isfinite(rep.ub)
    assert rep.x is None
