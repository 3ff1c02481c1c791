"""Marginal log-likelihood of the change-point model and its analytic gradient.

The marginal likelihood sums the conditional response likelihood over the
change-point support and integrates the latent trait by Gauss-Hermite
quadrature, with one log-sum-exp per respondent over the (tau, node) grid.
Conditional log-likelihoods of the no-change prefix are computed once per
node and shared across tau values, so the cost per respondent and node is
O(J + |support|) rather than O(J * |support|).

Gradients use Fisher's identity: the derivative of the marginal log-likelihood
in each parameter is the posterior expectation, over (theta, tau), of the
conditional score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import (
    ChangePointSupport,
    ItemParameters,
    ResponseMatrix,
    StructuralParameters,
    log_sigmoid,
)
from .structural import QuadratureRule, log_tau_pmf_and_grad

__all__ = [
    "ModelSpec",
    "LikelihoodValue",
    "conditional_loglik_person",
    "marginal_loglik",
    "marginal_loglik_gradient",
]


@dataclass(frozen=True)
class ModelSpec:
    """Item parameters, structural parameters, support, and quadrature rule."""

    items: ItemParameters
    structural: StructuralParameters
    support: ChangePointSupport
    quadrature: QuadratureRule

    def __post_init__(self):
        self.items.validate_support(self.support)


@dataclass(frozen=True)
class LikelihoodValue:
    """Total marginal log-likelihood with per-respondent contributions."""

    loglik: float
    per_person: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.per_person, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "per_person", arr)


def conditional_loglik_person(
    responses: np.ndarray, theta: float, tau: int, spec: ModelSpec
) -> float:
    """Log-likelihood of one response vector given (theta, tau)."""
    y = np.asarray(responses, dtype=float)
    J = spec.support.J
    if y.shape != (J,):
        raise ValueError(f"responses must have length J={J}")
    if not spec.support.c <= tau <= J:
        raise ValueError(f"tau={tau} outside support {{{spec.support.c},...,{J}}}")
    post = np.arange(1, J + 1) > tau
    z = spec.items.d + spec.items.a * theta + np.where(post, spec.items.gamma, 0.0)
    return float(np.sum(y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z)))


def _grid_logliks(Y: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Conditional log-likelihoods on the (node, tau) grid.

    Returns cond of shape (N, K, T) where cond[i, k, t] is the log-likelihood
    of respondent i's responses given theta = node_k and tau = support[t].
    """
    d, a, gamma = spec.items.d, spec.items.a, spec.items.gamma
    c, J = spec.support.c, spec.support.J
    x = spec.quadrature.nodes
    Yf = Y.astype(float, copy=False)

    z0 = d[None, :] + np.outer(x, a)  # (K, J)
    logp0 = log_sigmoid(z0)
    log1mp0 = log_sigmoid(-z0)
    # log-likelihood under the all-baseline model (tau = J)
    base = Yf @ logp0.T + (1.0 - Yf) @ log1mp0.T  # (N, K)
    if c == J:
        return base[:, :, None]

    z1 = z0[:, c:] + gamma[None, c:]  # post-change logits, items c+1..J
    d1 = log_sigmoid(z1) - logp0[:, c:]  # delta log-mass when y = 1
    d0 = log_sigmoid(-z1) - log1mp0[:, c:]  # delta log-mass when y = 0
    Yp = Yf[:, c:]
    # delta[i, k, m] for item j = c + 1 + m being post-change
    delta = Yp[:, None, :] * d1[None, :, :] + (1.0 - Yp)[:, None, :] * d0[None, :, :]
    # suffix[i, k, s] = sum over items j > support[s] of delta
    suffix = np.flip(np.cumsum(np.flip(delta, axis=2), axis=2), axis=2)
    cond = np.empty((Y.shape[0], x.shape[0], J - c + 1))
    cond[:, :, :-1] = base[:, :, None] + suffix
    cond[:, :, -1] = base
    return cond


def _check_dims(data: ResponseMatrix, spec: ModelSpec) -> None:
    if data.n_items != spec.support.J:
        raise ValueError(
            f"data has {data.n_items} items but the model expects J={spec.support.J}"
        )


def _log_prior_grid(spec: ModelSpec):
    """log(pmf(tau)) + log(w_k) on the (node, tau) grid, plus pmf derivatives."""
    log_p, d_alpha, d_beta = log_tau_pmf_and_grad(spec.structural, spec.support)
    prior = np.log(spec.quadrature.weights)[:, None] + log_p[None, :]  # (K, T)
    return prior, d_alpha, d_beta


def marginal_loglik(data: ResponseMatrix, spec: ModelSpec) -> LikelihoodValue:
    """Marginal log-likelihood, latent trait and change-point integrated out."""
    _check_dims(data, spec)
    cond = _grid_logliks(data.entries, spec)
    prior, _, _ = _log_prior_grid(spec)
    per_person = logsumexp(cond + prior[None, :, :], axis=(1, 2))
    return LikelihoodValue(loglik=float(per_person.sum()), per_person=per_person)


def marginal_posterior_weights(data: ResponseMatrix, spec: ModelSpec):
    """Per-person posterior over the (node, tau) grid and the log-likelihood.

    Returns (w, per_person) with w of shape (N, K, T) summing to 1 over (K, T)
    for each respondent.
    """
    _check_dims(data, spec)
    cond = _grid_logliks(data.entries, spec)
    prior, _, _ = _log_prior_grid(spec)
    joint = cond + prior[None, :, :]
    per_person = logsumexp(joint, axis=(1, 2))
    w = np.exp(joint - per_person[:, None, None])
    return w, per_person


def marginal_loglik_gradient(data: ResponseMatrix, spec: ModelSpec) -> np.ndarray:
    """Gradient of the marginal log-likelihood.

    Ordered as (d_1..d_J, a_1..a_J, gamma_{c+1}..gamma_J, alpha, beta); the
    gamma block is empty when c = J, in which case the alpha and beta
    components are exactly zero.
    """
    _, grad = marginal_loglik_and_gradient(data, spec)
    return grad


def marginal_loglik_and_gradient(data: ResponseMatrix, spec: ModelSpec):
    """Marginal log-likelihood and its gradient in one pass over the grid."""
    _check_dims(data, spec)
    d, a, gamma = spec.items.d, spec.items.a, spec.items.gamma
    c, J = spec.support.c, spec.support.J
    x = spec.quadrature.nodes
    Yf = data.entries.astype(float)

    cond = _grid_logliks(data.entries, spec)
    prior, dlp_alpha, dlp_beta = _log_prior_grid(spec)
    joint = cond + prior[None, :, :]
    per_person = logsumexp(joint, axis=(1, 2))
    w = np.exp(joint - per_person[:, None, None])  # (N, K, T)

    z0 = d[None, :] + np.outer(x, a)
    p0 = np.exp(log_sigmoid(z0))  # (K, J)
    w_node = w.sum(axis=2)  # (N, K): posterior node weights
    node_tot = w_node.sum(axis=0)  # (K,)
    yw = Yf.T @ w_node  # (J, K): sum_i y_ij * w_node[i, k]

    grad_d = np.empty(J)
    grad_a = np.empty(J)
    if c == J:
        # single tau value: every item is pre-change
        resid = yw - p0.T * node_tot[None, :]  # (J, K)
        grad_d[:] = resid.sum(axis=1)
        grad_a[:] = resid @ x
        return float(per_person.sum()), np.concatenate([grad_d, grad_a, [0.0, 0.0]])

    p1 = np.exp(log_sigmoid(z0[:, c:] + gamma[None, c:]))  # (K, J-c)
    # u_post[i, k, m]: posterior mass of {tau < c + 1 + m}, i.e. item c+1+m post-change
    u_post = np.cumsum(w, axis=2)[:, :, : J - c]
    s_post = u_post.sum(axis=0)  # (K, J-c)
    s_post_y = np.einsum("ikm,im->km", u_post, Yf[:, c:])  # (K, J-c)

    # pre-change items: all tau values leave them on the baseline curve
    resid_pre = yw[:c, :] - p0.T[:c, :] * node_tot[None, :]
    grad_d[:c] = resid_pre.sum(axis=1)
    grad_a[:c] = resid_pre @ x

    # post-change-capable items: split posterior mass between the two curves
    resid_mix = yw[c:, :] - (p0[:, c:] * (node_tot[:, None] - s_post) + p1 * s_post).T
    grad_d[c:] = resid_mix.sum(axis=1)
    grad_a[c:] = resid_mix @ x
    grad_gamma = (s_post_y - p1 * s_post).sum(axis=0)  # (J-c,)

    post_tau = w.sum(axis=(0, 1))  # (T,)
    grad_alpha = float(post_tau @ dlp_alpha)
    grad_beta = float(post_tau @ dlp_beta)

    grad = np.concatenate([grad_d, grad_a, grad_gamma, [grad_alpha, grad_beta]])
    return float(per_person.sum()), grad
