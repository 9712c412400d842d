import numpy as np
import pytest

from cfran import ConfigError, ScenarioConfig
from cfran.fbl import q_inv, sum_moments
from cfran.scenario import config_from_dict
from cfran.harness import (ExperimentSpec, ResultTable, fbl_rates, load_preset, mean_se,
                           preset_names, quantile_se, run_experiment, simulate_trial)

SMALL = dict(num_rrus=12, antennas_per_rru=2, num_ues=4, num_pilots=4, num_edus=2, trials=12)


def spec(kind="se_sweep", sweep=(), metrics=("se_mean",), **base):
    return ExperimentSpec(config_from_dict({**SMALL, **base}), list(sweep), metrics, kind, "t")


def test_points_and_derived_axes():
    s = spec(sweep=[("num_edus", [1, 2]), ("rrus_per_edu", [3, 5])])
    assert len(s.points()) == 4
    assert s.config_at({"num_edus": 2, "rrus_per_edu": 5}).num_rrus == 10
    s2 = spec(sweep=[("total_antennas", [8, 16])])
    assert [s2.config_at(p).num_rrus for p in s2.points()] == [4, 8]
    with pytest.raises(ConfigError):
        spec(sweep=[("total_antennas", [7])])
    with pytest.raises(ConfigError):
        spec(sweep=[("nonsense", [1])])
    with pytest.raises(ConfigError):
        spec(sweep=[("coloring.tenure", [0])])
    assert spec(sweep=[("coloring.tenure", [3])]).config_at({"coloring.tenure": 3}).coloring.tenure == 3


def test_spec_dict_round_trip():
    s = spec(sweep=[("num_edus", [1, 2])], metrics=("se_cdf",))
    again = ExperimentSpec.from_dict(s.to_dict())
    assert again.to_dict() == s.to_dict() and again.digest() == s.digest()
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"kind": "se_sweep", "extra": 1})
    with pytest.raises(ConfigError):
        spec(kind="nope")


def test_determinism_across_workers():
    s = spec(sweep=[("num_edus", [1, 2])])
    a = run_experiment(s, workers=1).to_csv()
    b = run_experiment(s, workers=2).to_csv()
    assert a == b


def test_trial_streams_independent_of_grid():
    cfg = ScenarioConfig(**SMALL)
    alone = simulate_trial(cfg, 3)
    s = spec(sweep=[("num_edus", [2, 3])])
    table = run_experiment(s)
    se_alone = fbl_rates(alone.gammas["graph_coloring"], cfg.block_length, cfg.error_prob).mean()
    row = [r for r in table.select("se", trial=3, num_edus=2)]
    assert row[0][-2] == se_alone


def test_fbl_axes_reuse_physical_trials():
    s = spec(sweep=[("block_length", [10, 100])])
    t = run_experiment(s)
    cap = [t.value("capacity", block_length=n)[0] for n in (10, 100)]
    assert cap[0] == cap[1]
    assert t.value("se", block_length=10)[0] < t.value("se", block_length=100)[0]


def test_skip_accounting():
    s = spec(kind="bound_validation", num_rrus=4, antennas_per_rru=1, num_ues=6, num_pilots=6,
             csi_mode="perfect", combiner="zf", correlation={"model": "iid"}, trials=11)
    t = run_experiment(s)
    assert t.value("trials_used")[0] == 0
    assert t.value("trials_skipped")[0] == 11
    assert not t.select("se")


def test_aggregates_need_ten_trials():
    t = run_experiment(spec(trials=5))
    assert not t.select("se")
    assert len(t.trial_values("se", 0)) == 5
    t = run_experiment(spec(trials=10))
    assert len(t.select("se")) == 1


def test_shannon_limit_at_half():
    cfg = ScenarioConfig(**SMALL)
    gam = simulate_trial(cfg, 0).gammas["graph_coloring"]
    assert q_inv(0.5) == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(fbl_rates(gam, 50, 0.5), sum_moments(gam)[0])


def test_csv_round_trip(tmp_path):
    t = run_experiment(spec(sweep=[("num_edus", [1, 2])], metrics=("se_cdf",)))
    text = t.to_csv(tmp_path / "r.csv")
    assert text.startswith("# axes: num_edus\n")
    back = ResultTable.from_csv(text)
    for a, b in zip(back.rows, t.rows):
        assert a[:-1] == b[:-1]
        assert a[-1] == b[-1] or (np.isnan(a[-1]) and np.isnan(b[-1]))
    assert back.to_csv() == text
    assert '"rows"' in t.to_json()


def test_quantiles_reported():
    t = run_experiment(spec(metrics=("se_cdf",)))
    assert len(t.select("se_q0.5")) == 1


def test_error_sweep_and_comparison_shapes():
    t = run_experiment(spec(kind="error_sweep", target_se_per_ue=1.0))
    eps, _ = t.value("eps")
    assert 0 <= eps < 0.5 and t.value("unachievable")[0] == 0
    t = run_experiment(spec(kind="error_sweep", target_se_per_ue=1e3))
    assert np.isnan(t.value("eps")[0]) and t.value("unachievable")[0] == 1
    t = run_experiment(spec(kind="association_comparison", antennas_per_rru=1))
    d, _ = t.value("se_diff")
    a, _ = t.value("se_graph_coloring")
    b, _ = t.value("se_kmeans_pp")
    assert d == pytest.approx(a - b)


def test_bound_validation_requires_single_antenna():
    from cfran.errors import UnsupportedConfigurationError
    with pytest.raises(UnsupportedConfigurationError):
        run_experiment(spec(kind="bound_validation", csi_mode="perfect", combiner="zf"))


def test_statistics_helpers():
    m, se = mean_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(4000)
    q, qse = quantile_se(x, 0.5)
    assert abs(q) < 4 * qse and qse == pytest.approx(np.sqrt(np.pi / 2 / 4000), rel=0.25)


@pytest.mark.parametrize("name", preset_names())
def test_presets_load(name):
    s = load_preset(name)
    assert s.name == name and s.points()
