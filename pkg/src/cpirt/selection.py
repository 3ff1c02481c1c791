"""Data-driven choice of the earliest change-point c by information criterion.

Fits the change model over a grid of c values plus the no-change baseline
2-PL, and picks the candidate minimizing BIC (or AIC). Fits walk the grid
from large c downward, warm-starting each candidate from its predecessor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .estimation import FitConfig, FitResult, fit
from .model import ItemParameters, ResponseMatrix, StructuralParameters

__all__ = ["Candidate", "SelectionReport", "SelectionError", "select_c", "default_c_grid"]

BASELINE = "baseline"


class SelectionError(RuntimeError):
    """Every candidate fit failed."""


@dataclass(frozen=True)
class Candidate:
    """One fitted model on the c grid (or the no-change baseline)."""

    label: str  # str(c) for change models, "baseline" for c = J
    c: int  # c value actually fitted (J for the baseline)
    loglik: float
    n_free_parameters: int
    criterion: float
    converged: bool
    fit: FitResult | None
    error: str | None = None


@dataclass(frozen=True)
class SelectionReport:
    """All candidates plus the criterion-minimizing choice."""

    criterion_name: str  # "bic" or "aic"
    candidates: tuple[Candidate, ...]
    chosen: Candidate


def default_c_grid(J: int) -> list[int]:
    """ceil(J/2) .. J-1; the baseline is always added separately."""
    return list(range(math.ceil(J / 2), J))


def _criterion_value(loglik: float, k: int, n: int, name: str) -> float:
    if name == "bic":
        return -2.0 * loglik + k * math.log(n)
    if name == "aic":
        return -2.0 * loglik + 2.0 * k
    raise ValueError(f"unknown criterion {name!r}")


def _warm_start_fit(
    data: ResponseMatrix, c: int, config: FitConfig, previous: FitResult | None
) -> FitResult:
    """Fit candidate c from both the default start and the previous
    (larger-c) estimates, keeping whichever reaches the higher loglik.

    The cold fit is kept as a safeguard: a degenerate optimum early in the
    grid walk (e.g. a runaway no-change solution) would otherwise seed every
    later candidate and stall the whole chain there.
    """
    cold = fit(data, c, config)
    if previous is None:
        return cold
    J = data.n_items
    prev_items = previous.items
    gamma = np.array(prev_items.gamma)
    # items past the previous c keep their estimates; the newly freed
    # gamma coordinates start at -1 (midpoint of the generating range)
    gamma[c : previous.support.c] = -1.0
    gamma[:c] = 0.0
    items0 = ItemParameters(d=prev_items.d, a=prev_items.a, gamma=gamma)
    structural0 = previous.structural if previous.support.c < J else StructuralParameters(0.0, 1.0)
    warm = fit(data, c, config, start=(items0, structural0))
    return warm if warm.loglik >= cold.loglik else cold


def select_c(
    data: ResponseMatrix,
    c_grid: list[int] | None = None,
    config: FitConfig | None = None,
    criterion: str = "bic",
) -> SelectionReport:
    """Fit the baseline and every c candidate; choose the criterion minimizer.

    Failed fits are recorded per candidate and excluded from the minimization;
    ties break toward larger c (the more parsimonious change structure), with
    the baseline counting as the largest.
    """
    config = config or FitConfig()
    J = data.n_items
    if c_grid is None:
        c_grid = default_c_grid(J)
    if any(not 1 <= c <= J - 1 for c in c_grid):
        raise ValueError("every c in the grid must lie in 1..J-1")
    c_grid = sorted(set(c_grid), reverse=True)

    candidates: list[Candidate] = []

    def run(label: str, c: int, previous: FitResult | None) -> FitResult | None:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                result = _warm_start_fit(data, c, config, previous)
        except Exception as exc:  # recorded, not fatal
            candidates.append(
                Candidate(
                    label=label,
                    c=c,
                    loglik=math.nan,
                    n_free_parameters=0,
                    criterion=math.nan,
                    converged=False,
                    fit=None,
                    error=str(exc),
                )
            )
            return None
        candidates.append(
            Candidate(
                label=label,
                c=c,
                loglik=result.loglik,
                n_free_parameters=result.n_free_parameters,
                criterion=_criterion_value(
                    result.loglik, result.n_free_parameters, data.n_persons, criterion
                ),
                converged=result.converged,
                fit=result,
            )
        )
        return result

    run(BASELINE, J, None)
    previous: FitResult | None = None
    for c in c_grid:
        result = run(str(c), c, previous)
        if result is not None:
            previous = result

    usable = [cand for cand in candidates if cand.fit is not None and cand.converged]
    if not usable:
        # fall back to non-converged fits before giving up entirely
        usable = [cand for cand in candidates if cand.fit is not None]
    if not usable:
        raise SelectionError("all candidate fits failed")
    chosen = min(usable, key=lambda cand: (cand.criterion, -cand.c))
    return SelectionReport(
        criterion_name=criterion, candidates=tuple(candidates), chosen=chosen
    )
