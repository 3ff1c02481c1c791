import math

import numpy as np
import pytest
from scipy.stats import chisquare, kstest

from cpirt.estimation import FitConfig
from cpirt.model import ChangePointSupport, StructuralParameters
from cpirt.simulation import (
    ScenarioConfig,
    child_seeds,
    compute_mae_tau,
    compute_theta_metrics,
    generate_item_parameters,
    generate_persons,
    generate_responses,
    run_scenario,
    simulate_dataset,
)
from cpirt.structural import tau_pmf


class TestGenerators:
    def test_item_parameter_ranges(self):
        rng = np.random.default_rng(0)
        items = generate_item_parameters(J=30, c=20, rng=rng)
        assert np.all((items.d > -1) & (items.d < 1))
        assert np.all((items.a > 0.5) & (items.a < 1.5))
        assert np.all(items.gamma[:20] == 0.0)
        assert np.all((items.gamma[20:] > -2) & (items.gamma[20:] < -1))

    def test_persons_support_and_distribution(self):
        structural = StructuralParameters(alpha=0.2, beta=-0.1)
        support = ChangePointSupport(c=20, J=30)
        rng = np.random.default_rng(1)
        theta, tau = generate_persons(20000, structural, support, rng)
        assert np.all(np.isin(tau, support.values))
        # theta is standard normal
        assert kstest(theta, "norm").pvalue > 0.01
        # tau frequencies match the generating pmf
        dist = tau_pmf(structural, support)
        counts = np.array([(tau == j).sum() for j in support.values])
        assert chisquare(counts, 20000 * dist.pmf).pvalue > 0.01

    def test_persons_rejects_empty(self):
        with pytest.raises(ValueError):
            generate_persons(
                0,
                StructuralParameters(0.0, 0.0),
                ChangePointSupport(c=2, J=4),
                np.random.default_rng(0),
            )

    def test_response_rates_match_irf(self):
        # single ability/change-point profile: column means estimate the IRF
        rng = np.random.default_rng(2)
        items = generate_item_parameters(J=10, c=5, rng=rng)
        support = ChangePointSupport(c=5, J=10)
        N = 40000
        theta = np.full(N, 0.3)
        tau = np.full(N, 7)
        resp = generate_responses(items, theta, tau, support, rng)
        post = np.arange(1, 11) > 7
        z = items.d + items.a * 0.3 + post * items.gamma
        p = 1.0 / (1.0 + np.exp(-z))
        assert np.all(np.abs(resp.entries.mean(axis=0) - p) < 4 * np.sqrt(p * (1 - p) / N))

    def test_degraded_items_get_fewer_correct(self):
        rng = np.random.default_rng(3)
        items = generate_item_parameters(J=2, c=1, rng=rng)
        support = ChangePointSupport(c=1, J=2)
        theta = np.zeros(50000)
        changed = generate_responses(items, theta, np.full(50000, 1), support, rng)
        intact = generate_responses(items, theta, np.full(50000, 2), support, rng)
        assert changed.entries[:, 1].mean() < intact.entries[:, 1].mean() - 0.05

    def test_simulate_dataset_deterministic(self):
        cfg = ScenarioConfig(scenario=2, n_persons=50, n_items=6, c=3, seed=0)
        a = simulate_dataset(cfg, 123)
        b = simulate_dataset(cfg, 123)
        other = simulate_dataset(cfg, 124)
        assert np.array_equal(a.responses.entries, b.responses.entries)
        assert np.array_equal(a.theta_true, b.theta_true)
        assert np.array_equal(a.items_true.d, b.items_true.d)
        assert not np.array_equal(a.responses.entries, other.responses.entries)

    def test_shared_items_across_replications(self):
        cfg = ScenarioConfig(scenario=2, n_persons=20, n_items=6, c=3, seed=0)
        items = generate_item_parameters(6, 3, np.random.default_rng(0))
        a = simulate_dataset(cfg, 1, items=items)
        b = simulate_dataset(cfg, 2, items=items)
        assert a.items_true is items and b.items_true is items
        assert not np.array_equal(a.responses.entries, b.responses.entries)

    def test_child_seeds(self):
        s1 = child_seeds(42, 10)
        s2 = child_seeds(42, 10)
        assert s1 == s2
        assert len(set(s1)) == 10
        assert child_seeds(43, 10) != s1


class TestMetrics:
    def test_mae_tau_toy(self):
        assert compute_mae_tau([np.array([5, 5])], [np.array([5, 7])]) == 1.0
        # mean over replications of per-replication means
        assert (
            compute_mae_tau(
                [np.array([5, 5]), np.array([5])], [np.array([5, 7]), np.array([8])]
            )
            == 2.0
        )

    def test_theta_metrics_match_direct_loops(self):
        rng = np.random.default_rng(4)
        R, N = 3, 40
        truth = [rng.standard_normal(N) for _ in range(R)]
        before = [t + rng.normal(0, 0.3, N) for t in truth]
        after = [t + rng.normal(0, 0.2, N) for t in truth]
        speeded = [rng.random(N) < 0.4 for _ in range(R)]
        out = compute_theta_metrics(truth, before, after, speeded)

        eb = [b - t for b, t in zip(before, truth)]
        ea = [a - t for a, t in zip(after, truth)]
        assert out["theta_bias_before_all"] == pytest.approx(
            np.mean(np.concatenate(eb)), abs=1e-12
        )
        assert out["theta_rmse_before_all"] == pytest.approx(
            np.mean([math.sqrt(np.mean(e**2)) for e in eb]), abs=1e-12
        )
        pooled = np.concatenate(ea)
        assert out["theta_bias_after_all"] == pytest.approx(np.mean(pooled), abs=1e-12)
        assert out["theta_rmse_after_all"] == pytest.approx(
            math.sqrt(np.mean(pooled**2)), abs=1e-12
        )
        spb = np.concatenate([e[s] for e, s in zip(eb, speeded)])
        spa = np.concatenate([e[s] for e, s in zip(ea, speeded)])
        assert out["theta_bias_before_speeded"] == pytest.approx(np.mean(spb), abs=1e-12)
        assert out["theta_rmse_after_speeded"] == pytest.approx(
            math.sqrt(np.mean(spa**2)), abs=1e-12
        )

    def test_theta_metrics_no_speeded_is_nan(self):
        t = [np.zeros(5)]
        out = compute_theta_metrics(t, t, t, [np.zeros(5, dtype=bool)])
        assert math.isnan(out["theta_bias_before_speeded"])
        assert math.isnan(out["theta_rmse_after_speeded"])
        assert out["theta_bias_before_all"] == 0.0


class TestRunScenario:
    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            ScenarioConfig(scenario=3)
        with pytest.raises(ValueError):
            ScenarioConfig(replications=0)

    def test_known_baseline_cell(self):
        cfg = ScenarioConfig(
            scenario=1,
            n_persons=300,
            n_items=10,
            c=5,
            beta=-0.85,
            replications=2,
            seed=9,
            fit_config=FitConfig(quadrature_nodes=21),
        )
        table = run_scenario(cfg)
        assert table.per_item == {}
        assert table.scalars["mae_tau"] >= 0.0
        # re-scoring on the pre-change prefix removes most of the downward
        # bias that degraded answers put on the plain ability estimate
        assert table.scalars["theta_bias_before_speeded"] < -0.05
        assert abs(table.scalars["theta_bias_after_speeded"]) < abs(
            table.scalars["theta_bias_before_speeded"]
        )

    def test_all_unknown_cell(self):
        cfg = ScenarioConfig(
            scenario=2,
            n_persons=200,
            n_items=6,
            c=3,
            replications=1,
            seed=2,
            fit_config=FitConfig(quadrature_nodes=15, gradient_tolerance=1e-2, ridge_penalty=1.0),
        )
        table = run_scenario(cfg)
        for key in ("alpha_bias", "beta_bias", "mae_tau", "alpha_rmse", "beta_rmse"):
            assert math.isfinite(table.scalars[key])
        assert table.per_item["d_bias"].shape == (6,)
        assert np.all(np.isnan(table.per_item["gamma_bias"][:3]))
        assert np.all(np.isfinite(table.per_item["gamma_bias"][3:]))
        assert np.all(table.per_item["d_rmse"] >= np.abs(table.per_item["d_bias"]) - 1e-12)
        assert table.n_failed_replications == 0

    def test_run_scenario_deterministic(self):
        cfg = ScenarioConfig(
            scenario=1,
            n_persons=100,
            n_items=8,
            c=4,
            replications=2,
            seed=5,
            fit_config=FitConfig(quadrature_nodes=15),
        )
        t1 = run_scenario(cfg)
        t2 = run_scenario(cfg)
        assert t1.scalars == t2.scalars
