import json
from dataclasses import replace

import numpy as np
import pytest

from oracles import brute_force, linear_moments
from propduty import montecarlo as mc
from propduty.duty import NO_BASELINE, BaselineHumility, Exponential, Linear, Logistic, evaluate

LINEAR0 = mc.SimulationConfig(100_000, 42, Linear(), NO_BASELINE)


@pytest.fixture(scope="module")
def linear0():
    return mc.run(LINEAR0)


def test_oracles_agree_with_each_other():
    mean, var, r = linear_moments(0)
    bf_mean, bf_var, bf_r = brute_force()
    assert mean == 0.375
    assert r == pytest.approx(0.862, abs=5e-4)
    assert bf_mean == pytest.approx(mean, abs=2e-3)
    assert bf_var == pytest.approx(var, abs=1e-3)
    assert bf_r == pytest.approx(r, abs=3e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        mc.SimulationConfig(0)
    with pytest.raises(ValueError):
        mc.SimulationConfig(10, seed=-1)


def test_sample_trials_is_deterministic():
    cfg = mc.SimulationConfig(5, 1234)
    assert list(mc.sample_trials(cfg)) == list(mc.sample_trials(cfg))
    assert len(list(mc.sample_trials(cfg))) == 5


def test_trial_regenerates_in_isolation():
    cfg = mc.SimulationConfig(20_000, 7, Logistic(), BaselineHumility(0.05))
    stream = list(mc.sample_trials(cfg, chunk_size=999))
    for i in (0, 998, 999, 12_345, 19_999):
        assert mc.trial(cfg, i) == stream[i]
    with pytest.raises(IndexError):
        mc.trial(cfg, 20_000)


def test_records_match_scalar_evaluation():
    cfg = mc.SimulationConfig(2_000, 3, Exponential(2.0), BaselineHumility(0.05))
    for rec in mc.sample_trials(cfg):
        assert rec.breakdown == evaluate(rec.inputs, cfg.signal_function, cfg.baseline)


def test_samples_in_range_with_centred_means(linear0):
    trials, _ = linear0
    for col in (trials.k, trials.hi, trials.c_signal):
        assert col.min() >= 0.0 and col.max() <= 1.0
        assert 0.497 <= col.mean() <= 0.503


def test_linear_summary(linear0):
    _, s = linear0
    assert s.n == 100_000
    assert s.mean_total == pytest.approx(0.375, abs=0.005)
    assert s.max_conservation_residual < 1e-9
    assert sum(s.zone_counts.values()) == s.n
    assert s.pearson_k_total == pytest.approx(0.862, abs=0.01)
    assert s.var_total >= 0


def test_summary_of_single_trial():
    s = mc.summarize(mc.sample_trials(mc.SimulationConfig(1, 5)))
    assert s.var_total == 0.0
    assert s.pearson_k_total is None


def test_summarize_empty_is_error():
    with pytest.raises(ValueError):
        mc.summarize([])


def test_summary_same_from_records_or_arrays():
    cfg = mc.SimulationConfig(3_000, 11)
    assert mc.summarize(mc.sample_trials(cfg)) == mc.summarize(mc.simulate(cfg))


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_worker_count_does_not_change_results(workers):
    cfg = mc.SimulationConfig(50_001, 9, Logistic(), BaselineHumility(0.05))
    one = mc.run(cfg, workers=1)
    many = mc.run(cfg, workers=workers)
    assert one[1] == many[1]
    assert np.array_equal(one[0].total, many[0].total)


def test_summary_json_keys(linear0):
    _, s = linear0
    d = s.to_dict(LINEAR0)
    for key in ("n", "seed", "g_form", "lambda", "mean_total", "var_total", "mean_action",
                "mean_repair", "pearson_k_total", "max_conservation_residual", "zone_counts"):
        assert key in d
    assert json.loads(json.dumps(d)) == d


def test_trials_csv_round_trip(tmp_path):
    cfg = mc.SimulationConfig(500, 21, Exponential(5.0), BaselineHumility(0.05))
    trials = mc.simulate(cfg)
    path = mc.write_trials_csv(tmp_path / "t.csv", trials)
    raw = path.read_bytes()
    assert raw.startswith(b"trial,k,hi,c_signal,d_action,d_repair,d_total\n")
    assert b"\r" not in raw
    back = mc.read_trials_csv(path)
    for name in ("index", "k", "hi", "c_signal", "action", "repair", "total"):
        assert np.array_equal(getattr(back, name), getattr(trials, name))
    assert list(back.records()) == list(mc.sample_trials(cfg))


def test_stability_identical_configs_ratio_one():
    cfg = mc.SimulationConfig(10_000, 4)
    rep = mc.stability_comparison(cfg, cfg)
    assert rep.ratio == 1.0
    assert rep.variance_definition


def test_stability_requires_matching_configs():
    with pytest.raises(ValueError):
        mc.stability_comparison(mc.SimulationConfig(100, 1), mc.SimulationConfig(100, 2, baseline=NO_BASELINE))


def test_stability_direction_matches_oracle():
    on = mc.SimulationConfig(100_000, 42, Linear(), BaselineHumility(0.05))
    rep = mc.stability_comparison(on, replace(on, baseline=NO_BASELINE))
    _, var_on, _ = linear_moments(0.05)
    _, var_off, _ = linear_moments(0)
    assert var_on < var_off  # exact values agree on direction
    assert rep.ratio <= 1.0
    bf_on = brute_force(lam=0.05)[1]
    bf_off = brute_force(lam=0.0)[1]
    assert bf_on <= bf_off


def test_mean_ordering_follows_pointwise_signal_order():
    # exp(x - 1) >= x on [0, 1]
    a = mc.run(mc.SimulationConfig(100_000, 8, Linear()))[1].mean_total
    b = mc.run(mc.SimulationConfig(100_000, 8, Exponential(1.0)))[1].mean_total
    assert a <= b


def test_protocol_requires_three_forms():
    cfgs = mc.protocol_configs(n_trials=100)
    with pytest.raises(ValueError):
        mc.run_protocol(cfgs[:2])
    with pytest.raises(ValueError):
        mc.run_protocol([cfgs[0], cfgs[0], cfgs[2]])


def test_protocol_report_and_files(tmp_path):
    report = mc.run_protocol(mc.protocol_configs(seed=1, n_trials=5_000), out_dir=tmp_path)
    assert report.max_conservation_residual < 1e-9
    names = {p.name for p in tmp_path.iterdir()}
    assert {"trials_linear.csv", "trials_exponential.csv", "trials_logistic.csv",
            "summary_linear.json", "protocol_report.json"} <= names
    claims = [d.claim for d in report.divergences]
    assert any("pearson" in c for c in claims)
    assert any("exponential" in c for c in claims)
    text = mc.format_protocol_report(report)
    assert "published" in text and "measured" in text
    data = json.loads((tmp_path / "protocol_report.json").read_text())
    assert len(data["summaries"]) == 3


def test_protocol_write_failure_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        mc.run_protocol(mc.protocol_configs(n_trials=10), out_dir=blocker / "sub")
