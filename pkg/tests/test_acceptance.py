"""Acceptance suite: full-scale replication studies plus end-to-end checks.

The first five tests rerun the shipped simulation studies at full size
(N = 1000, J = 30, 25 replications) and take on the order of an hour on one
CPU; the rest run in seconds. Deselect the slow ones with
`pytest -m "not acceptance"` during development.

Each test asserts the published recovery targets as stated. Known failures
(the structural parameters are weakly identified when the change window is
short, and prefix-only rescoring trades a little RMSE for its bias
reduction) are left to fail with the realized numbers in the message rather
than being loosened to pass.
"""
import filecmp
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import minimize
from scipy.special import expit

from cpirt.cli import EXIT_OK, main
from cpirt.estimation import FitConfig, fit
from cpirt.likelihood import ModelSpec, marginal_loglik, marginal_loglik_gradient
from cpirt.model import (
    ChangePointSupport,
    ItemParameters,
    ResponseMatrix,
    StructuralParameters,
)
from cpirt.selection import select_c
from cpirt.simulation import ScenarioConfig, run_scenario, simulate_dataset
from cpirt.structural import gauss_hermite_standard_normal, tau_pmf

pytestmark = pytest.mark.acceptance

SEED = 42
R = 25
N, J = 1000, 30
STUDY_FIT = FitConfig(gradient_tolerance=1e-4, ridge_penalty=1.0)


# ---------------------------------------------------------------------------
# shared study runs (slow; computed once per session)


@pytest.fixture(scope="session")
def scenario2_cells():
    """Scenario 2 (everything estimated) at c = 15, 20, 25."""
    cells = {}
    for c in (15, 20, 25):
        cfg = ScenarioConfig(scenario=2, n_persons=N, n_items=J, c=c,
                             replications=R, seed=SEED, fit_config=STUDY_FIT)
        cells[c] = run_scenario(cfg)
    return cells


@pytest.fixture(scope="session")
def scenario1_cells():
    """Scenario 1 (scoring at the generating parameters) over (c, beta)."""
    cells = {}
    for c in (20, 25):
        for beta in (-0.1, -0.85, -1.73):
            cfg = ScenarioConfig(scenario=1, n_persons=N, n_items=J, c=c,
                                 beta=beta, replications=R, seed=SEED,
                                 fit_config=STUDY_FIT)
            cells[(c, beta)] = run_scenario(cfg).scalars
    return cells


@pytest.fixture(scope="session")
def selection_runs():
    """BIC selection on 20 datasets generated at c_true = 20.

    The grid {16..24} brackets the generating value with margin; a looser
    gradient tolerance keeps the 20 x 10-fit study tractable without
    changing any BIC comparison at the ~40-loglik-unit scale involved.
    """
    fit_cfg = FitConfig(gradient_tolerance=1e-3, ridge_penalty=1.0)
    base_cfg = ScenarioConfig(scenario=2, n_persons=N, n_items=J, c=20,
                              seed=SEED, fit_config=fit_cfg)
    runs = []
    for rep in range(20):
        ds = simulate_dataset(base_cfg, SEED + 1000 + rep)
        report = select_c(ds.responses, list(range(16, 25)), fit_cfg)
        baseline = next(x for x in report.candidates if x.label == "baseline")
        change = [x for x in report.candidates
                  if x.label != "baseline" and x.error is None]
        best_change = min(change, key=lambda x: x.criterion)
        runs.append({
            "chosen": report.chosen.label,
            "best_change_criterion": best_change.criterion,
            "baseline_criterion": baseline.criterion,
        })
    return runs


# ---------------------------------------------------------------------------
# quantitative recovery


def test_change_point_mae_recovery(scenario2_cells):
    targets = {15: 2.095, 20: 1.694, 25: 1.126}
    mae = {c: scenario2_cells[c].scalars["mae_tau"] for c in targets}
    lines = [f"c={c}: MAE(tau)={mae[c]:.4f} target {targets[c]} +/- 0.5"
             for c in targets]
    ok_band = all(abs(mae[c] - targets[c]) <= 0.5 for c in targets)
    ok_order = mae[15] > mae[20] > mae[25]
    assert ok_band and ok_order, (
        "change-point MAE recovery:\n  " + "\n  ".join(lines)
        + f"\n  monotone ordering MAE(15) > MAE(20) > MAE(25): {ok_order}")


def test_structural_parameter_recovery(scenario2_cells):
    lines, ok = [], True
    for c, table in scenario2_cells.items():
        ab = table.scalars["alpha_bias"]
        bb = table.scalars["beta_bias"]
        cell_ok = abs(ab) <= 0.15 and abs(bb) <= 0.2
        ok = ok and cell_ok
        lines.append(f"c={c}: bias(alpha)={ab:+.4f} (|.|<=0.15), "
                     f"bias(beta)={bb:+.4f} (|.|<=0.2) -> "
                     f"{'ok' if cell_ok else 'FAIL'}")
    assert ok, "structural parameter recovery:\n  " + "\n  ".join(lines)


def test_item_parameter_recovery(scenario2_cells):
    lines, ok = [], True
    for c, table in scenario2_cells.items():
        d_bias = table.per_item["d_bias"]
        a_bias = table.per_item["a_bias"]
        frac = float(np.mean((np.abs(d_bias) < 0.15) & (np.abs(a_bias) < 0.15)))
        med_d = float(np.median(table.per_item["d_rmse"]))
        med_a = float(np.median(table.per_item["a_rmse"]))
        cell_ok = frac >= 0.90 and med_d < 0.15 and med_a < 0.15
        ok = ok and cell_ok
        lines.append(f"c={c}: {frac:.0%} of items with |bias| < 0.15, "
                     f"median RMSE(d)={med_d:.4f}, median RMSE(a)={med_a:.4f}"
                     f" -> {'ok' if cell_ok else 'FAIL'}")
    assert ok, "item parameter recovery:\n  " + "\n  ".join(lines)


def test_cleansing_effect(scenario1_cells):
    lines, ok = [], True
    for (c, beta), s in scenario1_cells.items():
        before = s["theta_bias_before_speeded"]
        after = s["theta_bias_after_speeded"]
        r_before = s["theta_rmse_before_all"]
        r_after = s["theta_rmse_after_all"]
        cell_ok = (before > 0.1 and abs(after) < 0.08 and r_after < r_before)
        ok = ok and cell_ok
        lines.append(
            f"c={c}, beta={beta}: speeded bias before={before:+.4f} "
            f"(want > 0.1), after={after:+.4f} (want |.| < 0.08), "
            f"RMSE all before={r_before:.4f} after={r_after:.4f} "
            f"(want after < before) -> {'ok' if cell_ok else 'FAIL'}")
    assert ok, "cleansing effect:\n  " + "\n  ".join(lines)


def test_model_selection_accuracy(selection_runs):
    in_window = sum(r["chosen"] in {"19", "20", "21"} for r in selection_runs)
    bic_wins = sum(r["best_change_criterion"] < r["baseline_criterion"]
                   for r in selection_runs)
    n = len(selection_runs)
    detail = ", ".join(
        f"{r['chosen']}({r['best_change_criterion'] - r['baseline_criterion']:+.1f})"
        for r in selection_runs)
    assert in_window >= 0.80 * n and bic_wins >= 0.95 * n, (
        f"model selection over {n} replications at c_true = 20: "
        f"chose c in {{19,20,21}} {in_window}/{n} (want >= 80%), "
        f"change-model BIC beat baseline {bic_wins}/{n} (want >= 95%).\n"
        f"  chosen (BIC margin vs baseline): {detail}")


# ---------------------------------------------------------------------------
# fast property checks


def _random_instance(rng, max_n, max_j):
    n = int(rng.integers(1, max_n + 1))
    j = int(rng.integers(2, max_j + 1))
    c = int(rng.integers(1, j + 1))
    support = ChangePointSupport(c=c, J=j)
    gamma = np.where(np.arange(j) >= c, rng.uniform(-2.0, -0.1, j), 0.0)
    items = ItemParameters(d=rng.uniform(-1.5, 1.5, j),
                           a=rng.uniform(0.5, 1.5, j), gamma=gamma)
    structural = StructuralParameters(alpha=rng.uniform(-1, 1),
                                      beta=rng.uniform(-1.5, 1.5))
    Y = ResponseMatrix(rng.integers(0, 2, (n, j)))
    return Y, items, structural, support


def _riemann_oracle(Y, items, structural, support):
    """Exhaustive-tau, dense-grid marginal log-likelihood, from scratch."""
    grid = np.linspace(-8.0, 8.0, 20001)
    wts = np.exp(-0.5 * grid**2) / np.sqrt(2.0 * np.pi) * (grid[1] - grid[0])
    c, j = support.c, support.J
    if c == j:
        pmf = np.array([1.0])
    else:
        p_j = expit(structural.beta)
        tilt = np.exp(structural.alpha * np.arange(j - c))
        pmf = np.append((1.0 - p_j) * tilt / tilt.sum(), p_j)
    total = 0.0
    for y in Y.entries:
        like = 0.0
        for t, tau in enumerate(range(c, j + 1)):
            shift = (np.arange(1, j + 1) > tau) * items.gamma
            p = expit(items.d[None, :] + np.outer(grid, items.a) + shift)
            mass = np.where(y == 1, p, 1.0 - p).prod(axis=1)
            like += pmf[t] * float(mass @ wts)
        total += np.log(like)
    return total


def test_marginal_likelihood_matches_grid_oracle():
    rng = np.random.default_rng(2024)
    quad = gauss_hermite_standard_normal(49)
    for _ in range(50):
        Y, items, structural, support = _random_instance(rng, max_n=3, max_j=4)
        spec = ModelSpec(items=items, structural=structural,
                         support=support, quadrature=quad)
        got = marginal_loglik(Y, spec).loglik
        want = _riemann_oracle(Y, items, structural, support)
        assert got == pytest.approx(want, abs=1e-6)


def test_analytic_gradients_match_finite_differences():
    rng = np.random.default_rng(77)
    quad = gauss_hermite_standard_normal(21)
    h = 1e-5
    for _ in range(100):
        Y, items, structural, support = _random_instance(rng, max_n=6, max_j=5)
        j, c = support.J, support.c
        base = np.concatenate([items.d, items.a, items.gamma[c:],
                               [structural.alpha, structural.beta]])

        def loglik_at(vec):
            it = ItemParameters(
                d=vec[:j], a=vec[j:2 * j],
                gamma=np.concatenate([np.zeros(c), vec[2 * j:2 * j + j - c]]))
            st = StructuralParameters(alpha=vec[-2], beta=vec[-1])
            spec = ModelSpec(items=it, structural=st,
                             support=support, quadrature=quad)
            return marginal_loglik(Y, spec).loglik

        spec = ModelSpec(items=items, structural=structural,
                         support=support, quadrature=quad)
        grad = marginal_loglik_gradient(Y, spec)
        fd = np.empty_like(base)
        for k in range(base.size):
            up, dn = base.copy(), base.copy()
            up[k] += h
            dn[k] -= h
            fd[k] = (loglik_at(up) - loglik_at(dn)) / (2 * h)
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-7)


def test_distributional_identities():
    rng = np.random.default_rng(5)
    for _ in range(25):
        j = int(rng.integers(2, 31))
        c = int(rng.integers(1, j))
        st = StructuralParameters(alpha=rng.uniform(-2, 2),
                                  beta=rng.uniform(-3, 3))
        dist = tau_pmf(st, ChangePointSupport(c=c, J=j))
        assert dist.pmf.sum() == pytest.approx(1.0, abs=1e-12)
        assert dist.pmf[-1] == expit(st.beta)

    flat = tau_pmf(StructuralParameters(alpha=0.0, beta=-0.4),
                   ChangePointSupport(c=3, J=10))
    assert np.ptp(flat.pmf[:-1]) < 1e-15

    quad = gauss_hermite_standard_normal(49)
    assert quad.weights.sum() == pytest.approx(1.0, abs=1e-10)
    assert quad.nodes @ quad.weights == pytest.approx(0.0, abs=1e-8)
    assert quad.nodes**2 @ quad.weights == pytest.approx(1.0, abs=1e-6)


def _oracle_2pl(Y, n_nodes=49):
    """Independently coded plain 2-PL marginal maximum likelihood fit."""
    z, w = hermgauss(n_nodes)
    nodes = np.sqrt(2.0) * z
    weights = w / np.sqrt(np.pi)
    n, j = Y.shape

    def negloglik(psi):
        d, a = psi[:j], psi[j:]
        p = expit(d[None, None, :] + a[None, None, :] * nodes[None, :, None])
        mass = np.where(Y[:, None, :] == 1, p, 1 - p).prod(axis=2)
        return -np.log(mass @ weights).sum()

    psi0 = np.concatenate([np.zeros(j), np.ones(j)])
    res = minimize(negloglik, psi0, method="L-BFGS-B",
                   options={"gtol": 1e-9, "ftol": 1e-15, "maxiter": 2000})
    return res.x[:j], res.x[j:], -res.fun


def test_baseline_reductions():
    rng = np.random.default_rng(31)
    n, j = 300, 5
    theta = rng.standard_normal(n)
    d_true = rng.uniform(-1, 1, j)
    a_true = rng.uniform(0.5, 1.5, j)
    Y = ResponseMatrix(
        (rng.random((n, j)) < expit(d_true + np.outer(theta, a_true))).astype(int))

    # c = J reproduces an independent plain 2-PL fit
    d_o, a_o, ll_o = _oracle_2pl(Y.entries)
    res = fit(Y, j, FitConfig(gradient_tolerance=1e-7))
    assert res.loglik == pytest.approx(ll_o, abs=1e-6)
    assert res.items.d == pytest.approx(d_o, abs=1e-4)
    assert res.items.a == pytest.approx(a_o, abs=1e-4)

    # gamma pinned to zero makes the change likelihood tau-free: it must
    # equal the baseline likelihood at the same (d, a) for any c
    quad = gauss_hermite_standard_normal(49)
    items0 = ItemParameters(d=res.items.d, a=res.items.a, gamma=np.zeros(j))
    for c in (1, 3):
        spec = ModelSpec(items=items0,
                         structural=StructuralParameters(0.7, -0.2),
                         support=ChangePointSupport(c=c, J=j),
                         quadrature=quad)
        assert marginal_loglik(Y, spec).loglik == pytest.approx(res.loglik, abs=1e-6)


def test_cli_determinism(tmp_path):
    def run_all(root: Path) -> list[Path]:
        sim = root / "sim"
        assert main(["simulate", "--n", "150", "--j", "8", "--c", "4",
                     "--seed", "11", "--out-dir", str(sim)]) == EXIT_OK
        responses = sim / "responses.csv"
        fit_doc = root / "fit.json"
        assert main(["fit", "--responses", str(responses), "--c", "4",
                     "--nodes", "21", "--tol", "1e-3", "--ridge", "1.0",
                     "--out", str(fit_doc)]) == EXIT_OK
        scores = root / "scores.csv"
        assert main(["score", "--responses", str(responses),
                     "--fit", str(fit_doc), "--nodes", "21",
                     "--out", str(scores)]) == EXIT_OK
        sel = root / "sel.json"
        assert main(["select", "--responses", str(responses),
                     "--c-grid", "4,5", "--nodes", "21", "--tol", "1e-3",
                     "--ridge", "1.0", "--out", str(sel)]) == EXIT_OK
        study = root / "study"
        assert main(["study", "--scenario", "1", "--n", "80", "--j", "6",
                     "--c", "3", "--replications", "2", "--seed", "5",
                     "--nodes", "21", "--out", str(study)]) == EXIT_OK
        return [responses, sim / "theta_true.csv", sim / "tau_true.csv",
                fit_doc, scores, sel, sel.with_suffix(".fit.json"),
                study.with_suffix(".csv"), study.with_suffix(".json")]

    first = run_all(tmp_path / "a")
    second = run_all(tmp_path / "b")
    for f1, f2 in zip(first, second):
        assert filecmp.cmp(f1, f2, shallow=False), f"{f1.name} differs between runs"
