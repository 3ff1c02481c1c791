"""Marginal maximum likelihood fitting by quasi-Newton optimization.

The free parameters are optimized in an unconstrained space
psi = (d_1..d_J, a_1..a_J, g_{c+1}..g_J, alpha, beta) where, by default,
g_j = log(-gamma_j) so that gamma_j = -exp(g_j) stays strictly negative.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .likelihood import ModelSpec, marginal_loglik, marginal_loglik_and_gradient
from .model import (
    ChangePointSupport,
    ItemParameters,
    ResponseMatrix,
    StructuralParameters,
)
from .structural import gauss_hermite_standard_normal

__all__ = [
    "FitConfig",
    "FitResult",
    "InitializationError",
    "DegenerateInformationError",
    "pack_parameters",
    "unpack_parameters",
    "fit",
    "numerical_hessian_se",
]

GAMMA_FLOOR = 1e-8  # substituted for gamma = 0 under the log-negated transform


class InitializationError(RuntimeError):
    """The log-likelihood is not finite at the starting point."""


class DegenerateInformationError(RuntimeError):
    """The observed information matrix is singular or not positive definite."""

    def __init__(self, message: str, coordinates: tuple[str, ...] = ()):
        super().__init__(message)
        self.coordinates = coordinates


@dataclass(frozen=True)
class FitConfig:
    """Optimizer and quadrature settings for a single fit."""

    quadrature_nodes: int = 49
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    constrain_gamma: bool = True
    ridge_penalty: float = 0.0
    seed: int | None = None  # jitters the starting point when set
    n_starts: int = 1  # extra starts use larger seeded jitter; best objective wins

    def __post_init__(self):
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.ridge_penalty < 0:
            raise ValueError("ridge_penalty must be >= 0")
        if self.quadrature_nodes < 1:
            raise ValueError("quadrature_nodes must be >= 1")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")


@dataclass(frozen=True)
class FitResult:
    """Converged estimates with log-likelihood, BIC and optimizer diagnostics."""

    items: ItemParameters
    structural: StructuralParameters
    support: ChangePointSupport
    loglik: float
    bic: float
    n_free_parameters: int
    converged: bool
    iterations: int
    gradient_norm: float
    warnings: tuple[str, ...] = ()


def n_free_parameters(support: ChangePointSupport) -> int:
    """2J item parameters, one gamma per item past c, plus alpha and beta."""
    J, c = support.J, support.c
    return 2 * J if c == J else 2 * J + (J - c) + 2


def pack_parameters(
    items: ItemParameters,
    structural: StructuralParameters,
    support: ChangePointSupport,
    config: FitConfig,
) -> np.ndarray:
    """Flatten parameters into the unconstrained optimization vector."""
    items.validate_support(support)
    c, J = support.c, support.J
    gamma_free = items.gamma[c:]
    if config.constrain_gamma:
        if np.any(gamma_free == 0.0):
            warnings.warn(
                "gamma = 0 for a post-change item; flooring at "
                f"-{GAMMA_FLOOR} under the log-negated transform"
            )
            gamma_free = np.where(gamma_free == 0.0, -GAMMA_FLOOR, gamma_free)
        g = np.log(-gamma_free)
    else:
        g = gamma_free
    return np.concatenate([items.d, items.a, g, [structural.alpha, structural.beta]])


def unpack_parameters(
    psi: np.ndarray, support: ChangePointSupport, config: FitConfig
) -> tuple[ItemParameters, StructuralParameters]:
    """Inverse of pack_parameters."""
    c, J = support.c, support.J
    n_gamma = J - c
    expected = 2 * J + n_gamma + 2
    if psi.shape != (expected,):
        raise ValueError(f"expected parameter vector of length {expected}")
    d = psi[:J]
    a = psi[J : 2 * J]
    g = psi[2 * J : 2 * J + n_gamma]
    gamma = np.zeros(J)
    gamma[c:] = -np.exp(g) if config.constrain_gamma else g
    if not config.constrain_gamma and (gamma > 0).any():
        gamma = np.minimum(gamma, 0.0)
    items = ItemParameters(d=d, a=a, gamma=gamma)
    structural = StructuralParameters(alpha=float(psi[-2]), beta=float(psi[-1]))
    return items, structural


def _chain_to_packed(grad: np.ndarray, psi: np.ndarray, support: ChangePointSupport, config: FitConfig) -> np.ndarray:
    """Map the gradient in (d, a, gamma, alpha, beta) to the packed space."""
    if not config.constrain_gamma:
        return grad
    c, J = support.c, support.J
    out = grad.copy()
    g = psi[2 * J : 2 * J + (J - c)]
    # gamma = -exp(g) so d(gamma)/d(g) = gamma
    out[2 * J : 2 * J + (J - c)] = grad[2 * J : 2 * J + (J - c)] * (-np.exp(g))
    return out


def _initial_psi(data: ResponseMatrix, support: ChangePointSupport, config: FitConfig) -> np.ndarray:
    """Column-mean logits for d, unit slopes, gamma = -1, alpha = 0, beta = 1."""
    means = data.entries.mean(axis=0)
    with np.errstate(divide="ignore"):
        d0 = np.clip(np.log(means) - np.log1p(-means), -3.0, 3.0)
    d0 = np.nan_to_num(d0, nan=0.0, posinf=3.0, neginf=-3.0)
    a0 = np.ones(support.J)
    g0 = np.zeros(support.J - support.c)  # gamma = -1 under the log-negated transform
    if not config.constrain_gamma:
        g0 = -np.ones(support.J - support.c)
    psi = np.concatenate([d0, a0, g0, [0.0, 1.0]])
    if config.seed is not None:
        psi = psi + np.random.default_rng(config.seed).normal(0.0, 0.01, psi.shape)
    return psi


def _ridge_mask(support: ChangePointSupport) -> np.ndarray:
    """Unit weights on item-parameter coordinates, zero on alpha and beta."""
    n = 2 * support.J + (support.J - support.c)
    return np.concatenate([np.ones(n), np.zeros(2)])


def fit(
    data: ResponseMatrix,
    c: int,
    config: FitConfig | None = None,
    start: tuple[ItemParameters, StructuralParameters] | None = None,
) -> FitResult:
    """Fit the change-point model with earliest change-point c by L-BFGS.

    c = J fits the baseline 2-PL; alpha and beta then stay at their starting
    values and do not count as free parameters. `start` overrides the default
    initialization (used for warm starts across a c grid).
    """
    config = config or FitConfig()
    support = ChangePointSupport(c=c, J=data.n_items)
    quad = gauss_hermite_standard_normal(config.quadrature_nodes)

    fit_warnings: list[str] = []
    col_means = data.entries.mean(axis=0)
    constant = np.flatnonzero((col_means == 0.0) | (col_means == 1.0))
    if constant.size:
        items_1b = ", ".join(str(j + 1) for j in constant)
        fit_warnings.append(
            f"constant response column(s) at item(s) {items_1b}; the easiness "
            "estimate may diverge (consider ridge_penalty > 0)"
        )

    ridge = config.ridge_penalty * _ridge_mask(support)

    def objective(psi: np.ndarray):
        items, structural = unpack_parameters(psi, support, config)
        spec = ModelSpec(items=items, structural=structural, support=support, quadrature=quad)
        ll, grad = marginal_loglik_and_gradient(data, spec)
        grad = _chain_to_packed(grad, psi, support, config)
        pen = 0.5 * float(ridge @ (psi * psi))
        return -ll + pen, -grad + ridge * psi

    if start is None:
        psi0 = _initial_psi(data, support, config)
    else:
        psi0 = pack_parameters(start[0], start[1], support, config)
    f0, _ = objective(psi0)
    if not np.isfinite(f0):
        raise InitializationError("log-likelihood is not finite at the starting point")

    starts = [psi0]
    if config.n_starts > 1:
        rng = np.random.default_rng(0 if config.seed is None else config.seed)
        for _ in range(config.n_starts - 1):
            trial = psi0 + rng.normal(0.0, 0.25, psi0.shape)
            if np.isfinite(objective(trial)[0]):
                starts.append(trial)

    def run(p0: np.ndarray):
        return minimize(
            objective,
            p0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": config.max_iterations,
                "maxfun": 50 * config.max_iterations,
                "gtol": config.gradient_tolerance,
                "ftol": 1e-14,
                "maxcor": 25,
            },
        )

    res = min((run(p0) for p0 in starts), key=lambda r: r.fun)
    psi_hat = res.x
    items, structural = unpack_parameters(psi_hat, support, config)
    spec = ModelSpec(items=items, structural=structural, support=support, quadrature=quad)
    loglik, grad = marginal_loglik_and_gradient(data, spec)
    grad = _chain_to_packed(grad, psi_hat, support, config)
    grad_obj = -grad + ridge * psi_hat
    if support.is_degenerate:
        grad_obj = grad_obj[:-2]  # alpha, beta inert for the baseline model
    gnorm = float(np.max(np.abs(grad_obj))) if grad_obj.size else 0.0

    if (items.a < 0).any():
        neg = np.flatnonzero(items.a < 0)
        fit_warnings.append(
            "negative discrimination estimate(s) at item(s) "
            + ", ".join(str(j + 1) for j in neg)
        )

    k = n_free_parameters(support)
    bic = -2.0 * loglik + k * np.log(data.n_persons)
    return FitResult(
        items=items,
        structural=structural,
        support=support,
        loglik=float(loglik),
        bic=float(bic),
        n_free_parameters=k,
        converged=bool(gnorm < config.gradient_tolerance),
        iterations=int(res.nit),
        gradient_norm=gnorm,
        warnings=tuple(fit_warnings),
    )


def parameter_names(support: ChangePointSupport) -> list[str]:
    """Human-readable names for the packed coordinates."""
    J, c = support.J, support.c
    names = [f"d_{j}" for j in range(1, J + 1)]
    names += [f"a_{j}" for j in range(1, J + 1)]
    names += [f"gamma_{j}" for j in range(c + 1, J + 1)]
    names += ["alpha", "beta"]
    return names


def numerical_hessian_se(
    data: ResponseMatrix, fit_result: FitResult, config: FitConfig | None = None
) -> np.ndarray:
    """Standard errors from a central-difference Hessian at the estimate.

    Differentiates the analytic gradient of the marginal log-likelihood in the
    packed space (step 1e-4 scaled by 1 + |psi|) and returns the square roots
    of the diagonal of the negative inverse. For the baseline model (c = J)
    the inert alpha and beta coordinates are excluded.
    """
    config = config or FitConfig()
    if not fit_result.converged:
        raise ValueError("standard errors require a converged fit")
    support = fit_result.support
    quad = gauss_hermite_standard_normal(config.quadrature_nodes)
    psi = pack_parameters(fit_result.items, fit_result.structural, support, config)
    names = parameter_names(support)
    active = np.arange(psi.size - 2) if support.is_degenerate else np.arange(psi.size)

    def grad_at(p: np.ndarray) -> np.ndarray:
        items, structural = unpack_parameters(p, support, config)
        spec = ModelSpec(items=items, structural=structural, support=support, quadrature=quad)
        _, g = marginal_loglik_and_gradient(data, spec)
        return _chain_to_packed(g, p, support, config)[active]

    n = active.size
    H = np.empty((n, n))
    for idx, coord in enumerate(active):
        h = 1e-4 * (1.0 + abs(psi[coord]))
        up, dn = psi.copy(), psi.copy()
        up[coord] += h
        dn[coord] -= h
        H[idx] = (grad_at(up) - grad_at(dn)) / (2.0 * h)
    H = 0.5 * (H + H.T)

    info = -H
    eigvals, eigvecs = np.linalg.eigh(info)
    if eigvals.min() <= 0:
        bad = np.flatnonzero(eigvals <= 0)
        coords = tuple(
            names[active[int(np.argmax(np.abs(eigvecs[:, b])))]] for b in bad
        )
        raise DegenerateInformationError(
            "observed information is not positive definite; flat or degenerate "
            f"directions involve: {', '.join(sorted(set(coords)))}",
            coordinates=coords,
        )
    cov = eigvecs @ np.diag(1.0 / eigvals) @ eigvecs.T
    return np.sqrt(np.diag(cov))
