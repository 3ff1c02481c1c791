"""Core domain types and the change-point item response function.

Items are indexed 1..J in every public interface. A respondent's
change-point tau is the last item answered under normal behavior; items
j > tau receive the nonpositive intercept shift gamma_j.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ResponseMatrix",
    "ItemParameters",
    "StructuralParameters",
    "ChangePointSupport",
    "irf",
    "response_logmass",
    "log_sigmoid",
]


def log_sigmoid(x):
    """log(logistic(x)), stable for large |x|."""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ResponseMatrix:
    """N x J binary response matrix; 1 = correct, 0 = incorrect."""

    entries: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.entries)
        if y.ndim != 2:
            raise ValueError("response matrix must be two-dimensional")
        if y.shape[0] < 1 or y.shape[1] < 2:
            raise ValueError("need at least 1 respondent and 2 items")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("entries must all be 0 or 1; missing values not supported")
        object.__setattr__(self, "entries", np.ascontiguousarray(y, dtype=np.int8))
        self.entries.setflags(write=False)

    @property
    def n_persons(self) -> int:
        return self.entries.shape[0]

    @property
    def n_items(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class ItemParameters:
    """Per-item easiness d, discrimination a, and change effect gamma <= 0.

    gamma[j] is stored for items 1..J (0-based array index j-1) and must be
    exactly 0 for items at or before the earliest change-point c.
    """

    d: np.ndarray
    a: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        a = np.asarray(self.a, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        if not (d.shape == a.shape == g.shape) or d.ndim != 1:
            raise ValueError("d, a, gamma must be 1-d arrays of equal length")
        if not (np.isfinite(d).all() and np.isfinite(a).all() and np.isfinite(g).all()):
            raise ValueError("item parameters must be finite")
        if (g > 0).any():
            raise ValueError("gamma must be nonpositive")
        for name, arr in (("d", d), ("a", a), ("gamma", g)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_items(self) -> int:
        return self.d.shape[0]

    def validate_support(self, support: "ChangePointSupport") -> None:
        if self.n_items != support.J:
            raise ValueError("item parameter length does not match J")
        if np.any(self.gamma[: support.c] != 0.0):
            raise ValueError("gamma must be 0 for items j <= c")


@dataclass(frozen=True)
class StructuralParameters:
    """Change-point hazard log-odds alpha and no-change logit beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")


@dataclass(frozen=True)
class ChangePointSupport:
    """Support {c, ..., J} of the change-point. c = J means no change."""

    c: int
    J: int

    def __post_init__(self):
        if not (1 <= self.c <= self.J):
            raise ValueError(f"require 1 <= c <= J, got c={self.c}, J={self.J}")

    @property
    def values(self) -> np.ndarray:
        """Possible tau values, 1-based item indices c..J."""
        return np.arange(self.c, self.J + 1)

    @property
    def size(self) -> int:
        return self.J - self.c + 1

    @property
    def is_degenerate(self) -> bool:
        return self.c == self.J


def irf(d: float, a: float, gamma: float, theta: float, post_change: bool) -> float:
    """Probability of a correct response.

    logistic(d + a*theta + gamma) after the change-point, logistic(d + a*theta)
    before it. Strictly inside (0, 1).
    """
    vals = (d, a, gamma, theta)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError("irf arguments must be finite")
    if gamma > 0:
        raise ValueError("gamma must be nonpositive")
    z = d + a * theta + (gamma if post_change else 0.0)
    return float(np.exp(log_sigmoid(z)))


def response_logmass(prob: float, y: int) -> float:
    """Bernoulli log-mass: log(prob) if y = 1, log(1 - prob) if y = 0."""
    if not 0.0 < prob < 1.0:
        raise ValueError(f"prob must lie strictly in (0, 1), got {prob}")
    if y not in (0, 1):
        raise ValueError(f"y must be 0 or 1, got {y}")
    return float(np.log(prob) if y == 1 else np.log1p(-prob))
