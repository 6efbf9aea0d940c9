import json
import math
from pathlib import Path

import pytest

import lrq

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def uniform_chain(vocab):
    return lrq.MarkovModel(1, vocab, [1.0 / vocab] * (vocab * vocab))


def test_uniform_hit_at_three():
    model = uniform_chain(3)
    query = lrq.Query("hit_at", 3, a=[0], k=3)
    assert lrq.markov_query_exact(model, query) == pytest.approx(4 / 27, abs=1e-15)
    assert lrq.exact_enumerate(model, query) == pytest.approx(4 / 27, abs=1e-15)
    est = lrq.importance_estimate(model, query, 2000, seed=3)
    assert est.mean == pytest.approx(4 / 27, abs=1e-12)
    assert est.var < 1e-24


def test_sampling_estimators_agree_with_exact():
    model = lrq.MarkovModel.random(2, 4, seed=5)
    query = lrq.Query("count", 4, a=[0, 1], k=5, n=2)
    exact = lrq.markov_query_exact(model, query, [3])
    for est in (
        lrq.importance_estimate(model, query, 20000, seed=1, history=[3]),
        lrq.naive_estimate(model, query, 20000, seed=2, history=[3]),
        lrq.hybrid_estimate(model, query, 20000, cap=256, seed=3, history=[3]),
    ):
        assert abs(est.mean - exact) <= 4 * est.se + 1e-12


def test_beam_bounds_bracket_truth():
    model = lrq.MarkovModel.random(1, 4, seed=9)
    query = lrq.Query("hit_before", 4, a=[0], b=[1], k=6)
    truth = lrq.markov_query_exact(model, query)
    b = lrq.coverage_beam_bounds(model, query, 0.8)
    assert b["lower"] <= truth + 1e-12
    assert truth - b["lower"] <= b["gap"] + 1e-12


def test_model_json_round_trip():
    model = lrq.MarkovModel.random(1, 3, seed=2)
    again = lrq.MarkovModel.from_json(model.to_json())
    assert again.table == model.table


def test_poisson_hitting_cdf_is_exact():
    model = lrq.mtpp_model({"family": "poisson", "rates": [0.5, 1.5]})
    out = lrq.hitting_cdf(model, [0], [1.0, 2.0], 100, seed=4)
    for est, t in zip(out, [1.0, 2.0]):
        assert est.mean == pytest.approx(-math.expm1(-0.5 * t), abs=1e-12)
        assert est.var == 0.0


def test_hawkes_sampling_and_likelihood():
    model = lrq.MtppModel.random_hawkes(3, seed=1)
    events = lrq.sample_sequence(model, 5.0, seed=2)
    assert all(0 < t <= 5.0 and 0 <= m < 3 for t, m in events)
    assert math.isfinite(lrq.log_likelihood(model, events, 5.0))
    r = lrq.censored_likelihood(model, [2], 0.0, 5.0, [e for e in events if e[1] != 2], 5.0, samples=16, points=128)
    assert r["log_ratio"] == pytest.approx(r["censored"] - r["baseline"])


def test_jump_process_estimators():
    process = lrq.jump_process({"family": "process", "name": "poisson", "params": {"rate0": 1.0, "rate1": 0.5}})
    first = lrq.hitting_time(process, {"hit": {"at_least": 1, "axis": 0}})
    curves = lrq.cdf_estimate(first, [0.5, 1.0], 500, exact=True, seed=1)
    assert set(curves) == {"NE", "TR", "IS", "ISP"}
    assert curves["IS"][1].mean == pytest.approx(-math.expm1(-1.0), abs=1e-12)
    second = lrq.hitting_time(process, {"hit": {"at_least": 1, "axis": 1}})
    joint = lrq.joint_estimate([first, second], [1.0, 2.0], 2000, variant="ordered", exact=True, seed=2)
    truth = -math.expm1(-1.0) * -math.expm1(-1.0)
    assert abs(joint.mean - truth) <= 4 * joint.se


def test_config_errors_raise_value_error():
    with pytest.raises(ValueError):
        lrq.mtpp_model({"family": "hawkes", "mu": [0.1]})
    with pytest.raises(ValueError):
        lrq.Query("nope", 3)


def test_harness_run_and_determinism(tmp_path):
    rows = lrq.run("query-discrete", CONFIGS / "u3_hit3.json")
    exact = [r for r in rows if r["method"] == "exact"]
    assert exact[0]["mean"] == pytest.approx(4 / 27, abs=1e-15)
    assert exact[0]["wall_ms"] is None
    a = lrq.run("hit-cdf", CONFIGS / "poisson_hit_cdf.json", workers=1)
    b = lrq.run("hit-cdf", CONFIGS / "poisson_hit_cdf.json", workers=4)
    assert a == b
    assert set(lrq.commands()) >= {"query-discrete", "hit-est", "gen-model"}


def test_harness_errors(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"schema": "lrq-experiment/1", "model": "missing.json"}))
    with pytest.raises(lrq.HarnessError) as info:
        lrq.run("query-discrete", cfg)
    assert info.value.exit_code == 2
    assert info.value.record["kind"] == "config"
