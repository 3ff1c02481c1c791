"""Per-person posterior change-point distributions and EAP ability scores.

The cleansed ability estimate re-scores each respondent under the baseline
(no-shift) model using only the items up to the posterior-mode change-point,
since pre-change behavior is by construction the baseline process.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .estimation import FitConfig, FitResult
from .likelihood import ModelSpec, marginal_posterior_weights
from .model import ResponseMatrix, log_sigmoid
from .structural import gauss_hermite_standard_normal

__all__ = [
    "PersonPosterior",
    "posterior_tau",
    "prob_change",
    "eap_theta",
    "score_persons",
]


@dataclass(frozen=True)
class PersonPosterior:
    """Posterior change-point distribution and ability estimates for one person."""

    tau_pmf: np.ndarray  # over support {c, ..., J}
    tau_mode: int  # 1-based item index; ties broken toward the smallest
    prob_change: float  # P(tau < J | Y)
    theta_eap: float  # EAP under the joint (theta, tau) posterior, all items
    theta_cleansed: float  # baseline-model EAP on items 1..tau_mode

    def __post_init__(self):
        arr = np.ascontiguousarray(self.tau_pmf, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "tau_pmf", arr)


def _spec_from_fit(fit: FitResult, config: FitConfig) -> ModelSpec:
    return ModelSpec(
        items=fit.items,
        structural=fit.structural,
        support=fit.support,
        quadrature=gauss_hermite_standard_normal(config.quadrature_nodes),
    )


def _as_matrix(responses: np.ndarray, J: int) -> ResponseMatrix:
    y = np.asarray(responses)
    if y.shape != (J,):
        raise ValueError(f"responses must have length J={J}")
    return ResponseMatrix(entries=y[None, :])


def posterior_tau(
    responses: np.ndarray, fit: FitResult, config: FitConfig | None = None
) -> np.ndarray:
    """Posterior probability of each change-point position in {c, ..., J}."""
    config = config or FitConfig()
    spec = _spec_from_fit(fit, config)
    w, _ = marginal_posterior_weights(_as_matrix(responses, fit.support.J), spec)
    return w[0].sum(axis=0)


def prob_change(
    responses: np.ndarray, fit: FitResult, config: FitConfig | None = None
) -> float:
    """Posterior probability that a change occurred before the last item."""
    pmf = posterior_tau(responses, fit, config)
    return float(pmf[:-1].sum())


def _baseline_prefix_eap(Y: np.ndarray, prefix: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """EAP of theta under the baseline model using items 1..prefix[i] per person.

    Persons sharing a prefix length are scored together; responses beyond the
    prefix do not enter the posterior.
    """
    d, a = spec.items.d, spec.items.a
    x, wq = spec.quadrature.nodes, spec.quadrature.weights
    z0 = d[None, :] + np.outer(x, a)  # (K, J)
    logp0 = log_sigmoid(z0)
    log1mp0 = log_sigmoid(-z0)
    Yf = Y.astype(float)
    out = np.empty(Y.shape[0])
    logw = np.log(wq)
    for m in np.unique(prefix):
        rows = np.flatnonzero(prefix == m)
        ll = Yf[rows, :m] @ logp0[:, :m].T + (1.0 - Yf[rows, :m]) @ log1mp0[:, :m].T
        post = ll + logw[None, :]
        post -= logsumexp(post, axis=1, keepdims=True)
        out[rows] = np.exp(post) @ x
    return out


def eap_theta(
    responses: np.ndarray,
    fit: FitResult,
    config: FitConfig | None = None,
    item_subset: int | None = None,
) -> float:
    """EAP ability estimate.

    Without a subset: posterior mean of theta under the joint (theta, tau)
    posterior given all items. With item_subset = m: posterior mean under the
    baseline (no-shift) model using only items 1..m.
    """
    config = config or FitConfig()
    J = fit.support.J
    spec = _spec_from_fit(fit, config)
    if item_subset is None:
        w, _ = marginal_posterior_weights(_as_matrix(responses, J), spec)
        return float(w[0].sum(axis=1) @ spec.quadrature.nodes)
    if not 1 <= item_subset <= J:
        raise ValueError(f"item_subset must lie in 1..{J}")
    y = np.asarray(responses)
    if y.shape != (J,):
        raise ValueError(f"responses must have length J={J}")
    return float(
        _baseline_prefix_eap(y[None, :], np.array([item_subset]), spec)[0]
    )


def score_persons(
    data: ResponseMatrix, fit: FitResult, config: FitConfig | None = None
) -> list[PersonPosterior]:
    """Posterior change-point summary and ability estimates for every person."""
    config = config or FitConfig()
    spec = _spec_from_fit(fit, config)
    w, _ = marginal_posterior_weights(data, spec)
    tau_post = w.sum(axis=1)  # (N, T)
    support = fit.support.values
    mode_idx = np.argmax(tau_post, axis=1)  # argmax takes the first maximum
    tau_mode = support[mode_idx]
    p_change = tau_post[:, :-1].sum(axis=1) if fit.support.size > 1 else np.zeros(data.n_persons)
    theta_eap = np.einsum("nkt,k->n", w, spec.quadrature.nodes)
    theta_cleansed = _baseline_prefix_eap(data.entries, tau_mode, spec)
    return [
        PersonPosterior(
            tau_pmf=tau_post[i],
            tau_mode=int(tau_mode[i]),
            prob_change=float(p_change[i]),
            theta_eap=float(theta_eap[i]),
            theta_cleansed=float(theta_cleansed[i]),
        )
        for i in range(data.n_persons)
    ]
