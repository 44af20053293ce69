import json
import math

import numpy as np
import pytest

import icepath


def test_generate_is_reproducible():
    a = icepath.generate_trial("r-first", n=300, seed=4)
    b = icepath.generate_trial("r-first", n=300, seed=4)
    assert set(a) == {"l0", "a", "l1", "d1", "r1", "l2", "d2", "r2", "y"}
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])
    assert set(np.unique(a["a"])) <= {0.0, 1.0}


def test_estimators_run_on_generated_data():
    data = icepath.generate_trial("d-first", n=1500, seed=2)
    for name in icepath.estimator_names():
        if name == "crossworld":
            continue
        out = icepath.estimate(data, name, m=3, seed=1)
        assert math.isfinite(out["point"])
    mi = icepath.estimate(data, "mi-d-first", m=3, seed=1)
    assert mi["variance"] > 0


def test_naive_equals_treatment_policy_without_rescue():
    data = icepath.generate_trial("independent", n=800, seed=3)
    data["r1"][:] = 0
    data["r2"][:] = 0
    naive = icepath.estimate(data, "naive")["point"]
    tp = icepath.estimate(data, "treatment-policy")["point"]
    assert naive == tp


def test_crossworld_on_single_period_data():
    data = icepath.generate_single_period(n=4000, seed=5)
    out = icepath.estimate(data, "crossworld")
    assert math.isfinite(out["point"])
    with pytest.raises(icepath.ValidationError):
        icepath.estimate(data, "naive")


def test_closed_form_truth():
    r = icepath.true_effect("d-first", fix="r", oracle_n=100000, seed=9, gamma=0.0)
    assert abs(r["tau"] - 0.390625) <= 3 * r["mc_se"]


def test_graph_helpers():
    plan = icepath.adjustment_plan("d-first")
    assert set(plan["per_period"][1]["r_model_covariates"]) == {"A", "L0", "L1", "L2", "D1", "D2"}
    assert icepath.check_exchangeability("r-first")
    assert "D1 -> R1" in icepath.scenario_graph("d-first")
    edges = [("X", "C"), ("Y", "C")]
    assert icepath.d_separated(edges, "X", "Y")
    assert not icepath.d_separated(edges, "X", "Y", {"C"})


def test_rubins_pool_hand_case():
    p = icepath.rubins_pool([1.0, 2.0], [0.5, 0.5])
    assert p["point"] == 1.5 and p["total"] == 1.25


def test_small_study():
    cfg = {"scenarios": ["independent"], "n": 300, "reps": 4, "oracle_n": 5000, "master_seed": 1,
           "estimators": ["naive", "ipw-independent"]}
    rows, csv = icepath.run_study(json.dumps(cfg))
    assert [r["estimator"] for r in rows] == ["naive", "ipw-independent"]
    assert csv.splitlines()[0] == "scenario,estimator,rep,estimate,failed,reason"
    assert len(csv.splitlines()) == 9


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        icepath.generate_trial("sideways")
    data = icepath.generate_trial("independent", n=50, seed=1)
    data["r1"][data["a"] == 1] = 1
    with pytest.raises(icepath.NumericalError):
        icepath.estimate(data, "naive")
