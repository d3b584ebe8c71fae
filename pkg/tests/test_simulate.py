import math

import numpy as np
import pytest

from crowdpareto import load_dataset
from crowdpareto.attribution import compute_alpha_records
from crowdpareto.errors import ConfigInvalid
from crowdpareto.models import MonteCarloConfig
from crowdpareto.simulate import (
    GbmParams,
    SimConfig,
    agent_type_of,
    generate_dataset,
    simulate_price_path,
    simulate_round,
)


def sim_config(**overrides):
    base = dict(
        n_agents=40,
        agent_mix={"social-gaussian": 0.5, "price-gaussian": 0.5},
        gbm=GbmParams(100.0, drift=0.006, volatility=0.01),
        round_days=21,
        history_days=60,
        prior_noise_std=0.005,
        update_noise_std=0.0005,
        seed=11,
        n_rate_paths=800,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestPricePath:
    def test_flat_path(self):
        path = simulate_price_path(GbmParams(100.0, 0.0, 0.0), 30, seed=0)
        assert path.shape == (31,)
        assert np.all(path == 100.0)

    def test_pure_drift(self):
        mu = 0.01
        path = simulate_price_path(GbmParams(100.0, mu, 0.0), 20, seed=0)
        np.testing.assert_allclose(path[1:] / path[:-1], math.exp(mu), rtol=1e-12)

    def test_terminal_log_moment(self):
        mu, sigma, n = 0.002, 0.03, 40
        gbm = GbmParams(100.0, mu, sigma)
        terminals = np.array([simulate_price_path(gbm, n, seed=s)[-1]
                              for s in range(10_000)])
        expected = math.log(100.0) + (mu - sigma**2 / 2.0) * n
        se = sigma * math.sqrt(n) / math.sqrt(terminals.size)
        assert abs(np.log(terminals).mean() - expected) <= 3 * se

    def test_deterministic(self):
        gbm = GbmParams(50.0, 0.001, 0.02)
        np.testing.assert_array_equal(simulate_price_path(gbm, 10, 3),
                                      simulate_price_path(gbm, 10, 3))


class TestSimulateRound:
    def test_first_social_agent_keeps_prior(self):
        cfg = sim_config(agent_mix={"social-gaussian": 1.0}, update_noise_std=0.0)
        round_ = simulate_round(cfg, "sim-1")
        first = round_.prediction_sets[0]
        assert first.social_histogram == ()
        assert first.b_post == first.b_pre

    def test_price_agents_on_flat_path(self):
        cfg = sim_config(agent_mix={"price-gaussian": 1.0},
                         gbm=GbmParams(100.0, 0.0, 0.0),
                         prior_noise_std=0.0, update_noise_std=0.0)
        round_ = simulate_round(cfg, "sim-1")
        assert round_.ground_truth == 100.0
        for pset in round_.prediction_sets:
            assert pset.b_post == 100.0

    def test_causality_histogram_is_prefix_of_posts(self):
        round_ = simulate_round(sim_config(), "sim-1")
        posts = [p.b_post for p in round_.prediction_sets]
        for i, pset in enumerate(round_.prediction_sets):
            assert list(pset.social_histogram) == posts[:i]
            assert len(pset.price_history) == 60

    def test_all_sets_inside_analysis_window(self):
        round_ = simulate_round(sim_config(), "sim-1")
        assert len(round_.analysis_sets) == len(round_.prediction_sets) == 40

    def test_agent_mix_allocation(self):
        cfg = sim_config(n_agents=10,
                         agent_mix={"social-gaussian": 0.65, "degroot": 0.25,
                                    "random-noise": 0.10})
        round_ = simulate_round(cfg, "sim-1")
        counts = {}
        for pset in round_.prediction_sets:
            t = agent_type_of(pset.id)
            counts[t] = counts.get(t, 0) + 1
        assert counts == {"social-gaussian": 7, "degroot": 2, "random-noise": 1}

    def test_config_validation(self):
        with pytest.raises(ConfigInvalid):
            sim_config(agent_mix={"social-gaussian": 0.7})
        with pytest.raises(ConfigInvalid):
            sim_config(round_days=7)
        with pytest.raises(ConfigInvalid):
            sim_config(agent_mix={"martian": 1.0})
        with pytest.raises(ConfigInvalid):
            GbmParams(0.0)


class TestGenerateDataset:
    def test_round_count_and_roundtrip(self, tmp_path):
        configs = [sim_config(seed=s) for s in (1, 2, 3)]
        out = generate_dataset(configs, tmp_path / "data")
        rounds = load_dataset(out)
        assert len(rounds) == 3
        assert all(len(r.prediction_sets) == 40 for r in rounds)

    def test_byte_identical_under_same_seed(self, tmp_path):
        configs = [sim_config(seed=9)]
        generate_dataset(configs, tmp_path / "a")
        generate_dataset(configs, tmp_path / "b")
        for name in ("rounds.jsonl", "predictions.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        generate_dataset([sim_config(seed=1)], tmp_path / "a")
        generate_dataset([sim_config(seed=2)], tmp_path / "b")
        assert ((tmp_path / "a" / "predictions.jsonl").read_bytes()
                != (tmp_path / "b" / "predictions.jsonl").read_bytes())


class TestLabelRecovery:
    def test_small_mixed_crowd(self):
        cfg = sim_config(n_agents=120, seed=5,
                         gbm=GbmParams(100.0, 0.008, 0.008), n_rate_paths=2_000)
        round_ = simulate_round(cfg, "sim-1")
        records, skipped = compute_alpha_records(
            [round_], mc=MonteCarloConfig(n_paths=2_000, n_samples=100, seed=99))
        assert skipped <= 1
        acc = {}
        for t, want in (("social-gaussian", 1), ("price-gaussian", -1)):
            recs = [r for r in records if agent_type_of(r.prediction_set_id) == t]
            acc[t] = np.mean([np.sign(r.alpha_scaled) == want for r in recs])
        assert acc["social-gaussian"] >= 0.9
        assert acc["price-gaussian"] >= 0.9
