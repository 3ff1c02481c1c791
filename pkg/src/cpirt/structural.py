"""Marginal change-point distribution and the standard-normal quadrature rule.

The change-point tau follows a discrete-time hazard model on {c, ..., J}:
consecutive pre-J probabilities have constant log-odds ratio alpha, and the
no-change probability P(tau = J) equals logistic(beta). The residual mass
1 - logistic(beta) is spread geometrically over {c, ..., J-1}; this pins the
otherwise-free base probability so the normalizer is exactly 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import expit, logsumexp

from .model import ChangePointSupport, StructuralParameters, log_sigmoid

__all__ = ["TauDistribution", "QuadratureRule", "tau_pmf", "gauss_hermite_standard_normal"]


@dataclass(frozen=True)
class TauDistribution:
    """Probability mass function of tau over support {c, ..., J}."""

    support: np.ndarray  # 1-based item indices c..J
    pmf: np.ndarray
    q: float  # exp(alpha), hazard ratio between consecutive positions
    p_J: float  # logistic(beta), probability of no change
    p_c: float  # unnormalized base probability implied by S = 1
    S: float  # normalizer; 1 by construction

    def __post_init__(self):
        for name in ("support", "pmf"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights integrating against the standard normal density."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("nodes", "weights"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]


def tau_pmf(params: StructuralParameters, support: ChangePointSupport) -> TauDistribution:
    """Marginal distribution of the change-point.

    P(tau = J) = logistic(beta); for c <= j < J the mass is proportional to
    exp(alpha)^(j - c). With c = J the distribution is the point mass at J and
    alpha, beta are inert.
    """
    log_p, extras = _log_tau_pmf(params, support)
    pmf = np.exp(log_p)
    if not support.is_degenerate:
        pmf[-1] = extras["p_J"]  # logistic(beta) exactly, not exp(log(...))
    return TauDistribution(support=support.values, pmf=pmf, **extras)


def _log_tau_pmf(params: StructuralParameters, support: ChangePointSupport):
    """Log-pmf of tau plus the derived quantities recorded on TauDistribution."""
    c, J = support.c, support.J
    q = float(np.exp(params.alpha))
    p_J = float(expit(params.beta))
    if c == J:
        return np.zeros(1), {"q": q, "p_J": p_J, "p_c": 0.0, "S": 1.0}
    # log weights alpha*(j - c) for j = c..J-1, normalized in log space
    m = np.arange(J - c, dtype=float)
    log_w = params.alpha * m
    log_G = logsumexp(log_w)
    log_no_change = log_sigmoid(params.beta)  # log p_J
    log_change = log_sigmoid(-params.beta)  # log(1 - p_J)
    log_p = np.empty(J - c + 1)
    log_p[:-1] = log_change + log_w - log_G
    log_p[-1] = log_no_change
    p_c = float(np.exp(log_change - log_G))
    return log_p, {"q": q, "p_J": p_J, "p_c": p_c, "S": 1.0}


def log_tau_pmf_and_grad(params: StructuralParameters, support: ChangePointSupport):
    """Log-pmf of tau with its derivatives in (alpha, beta).

    Returns (log_p, dlog_dalpha, dlog_dbeta), each of length J - c + 1.
    """
    c, J = support.c, support.J
    n = J - c + 1
    log_p, _ = _log_tau_pmf(params, support)
    d_alpha = np.zeros(n)
    d_beta = np.zeros(n)
    if c == J:
        return log_p, d_alpha, d_beta
    p_J = float(np.exp(log_sigmoid(params.beta)))
    m = np.arange(J - c, dtype=float)
    # softmax(alpha*m) gives d(log G)/d(alpha) = E[m] without overflow
    log_w = params.alpha * m
    sm = np.exp(log_w - logsumexp(log_w))
    d_alpha[:-1] = m - float(sm @ m)
    d_beta[:-1] = -p_J
    d_beta[-1] = 1.0 - p_J
    return log_p, d_alpha, d_beta


def gauss_hermite_standard_normal(n_nodes: int) -> QuadratureRule:
    """Gauss-Hermite rule transformed to the standard normal weight.

    Nodes are sqrt(2) times the Hermite abscissae and weights are the Hermite
    weights divided by sqrt(pi), so the rule integrates f(theta) phi(theta).
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    z, w = hermgauss(n_nodes)
    return QuadratureRule(nodes=np.sqrt(2.0) * z, weights=w / np.sqrt(np.pi))
