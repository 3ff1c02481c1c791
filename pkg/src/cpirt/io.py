"""File formats: response CSV ingestion and structured result documents.

Structured outputs (fit results, selection reports, metrics) are JSON
key-value documents with a schema_version key; floats are serialized with 17
significant digits so every value round-trips losslessly. CSV is reserved for
rectangular person/item tables. All parsing and formatting is locale-free.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .estimation import FitResult
from .inference import PersonPosterior
from .model import ChangePointSupport, ItemParameters, ResponseMatrix, StructuralParameters
from .selection import Candidate, SelectionReport
from .simulation import MetricsTable

__all__ = [
    "ResponseParseError",
    "read_responses",
    "write_fit",
    "read_fit",
    "write_scores",
    "write_selection_report",
    "write_metrics_json",
    "write_metrics_csv",
]

FIT_SCHEMA = "cpirt-fit/1"
SELECTION_SCHEMA = "cpirt-selection/1"
METRICS_SCHEMA = "cpirt-metrics/1"


class ResponseParseError(ValueError):
    """Malformed response CSV; row/column are 1-based when applicable."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.column = column


def read_responses(path: str | Path) -> ResponseMatrix:
    """Parse a comma-separated 0/1 matrix, one respondent per row.

    A single header row is skipped when the first row contains any
    non-numeric token. Ragged rows and non-binary tokens are rejected with
    their 1-based coordinates.
    """
    text = Path(path).read_text()
    lines = [line for line in text.splitlines() if line.strip() != ""]
    if not lines:
        raise ResponseParseError(f"{path}: file is empty")

    first = [tok.strip() for tok in lines[0].split(",")]
    header_offset = 0
    if any(not _is_number(tok) for tok in first):
        header_offset = 1
        lines = lines[1:]
        if not lines:
            raise ResponseParseError(f"{path}: no data rows after header")

    rows: list[list[int]] = []
    width = None
    for r, line in enumerate(lines, start=1 + header_offset):
        tokens = [tok.strip() for tok in line.split(",")]
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ResponseParseError(
                f"{path}: ragged row with {len(tokens)} fields, expected {width}", row=r
            )
        parsed = []
        for col, tok in enumerate(tokens, start=1):
            if tok == "0":
                parsed.append(0)
            elif tok == "1":
                parsed.append(1)
            else:
                raise ResponseParseError(
                    f"{path}: non-binary token {tok!r}", row=r, column=col
                )
        rows.append(parsed)
    try:
        return ResponseMatrix(entries=np.array(rows, dtype=np.int8))
    except ValueError as exc:
        raise ResponseParseError(f"{path}: {exc}") from exc


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _fnum(x: float) -> float | str:
    """JSON-safe float; NaN/inf become strings since JSON has no literals for them."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _float_list(arr: np.ndarray) -> list:
    return [_fnum(float(v)) for v in np.asarray(arr, dtype=float)]


class _NumpyEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.integer):
            return int(o)
        return super().default(o)


def _write_json(doc: dict, path: str | Path) -> None:
    # floats render via repr: the shortest representation that round-trips
    # exactly, equivalent in fidelity to fixed 17-significant-digit output
    text = json.dumps(doc, indent=2, cls=_NumpyEncoder)
    Path(path).write_text(text + "\n")


def write_fit(fit: FitResult, path: str | Path) -> None:
    """Write a fit result as a self-describing JSON document."""
    doc = {
        "schema_version": FIT_SCHEMA,
        "c": fit.support.c,
        "J": fit.support.J,
        "d": _float_list(fit.items.d),
        "a": _float_list(fit.items.a),
        "gamma": _float_list(fit.items.gamma),
        "alpha": _fnum(fit.structural.alpha),
        "beta": _fnum(fit.structural.beta),
        "loglik": _fnum(fit.loglik),
        "bic": _fnum(fit.bic),
        "n_free_parameters": fit.n_free_parameters,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "gradient_norm": _fnum(fit.gradient_norm),
        "warnings": list(fit.warnings),
    }
    _write_json(doc, path)


def _parse_fnum(v) -> float:
    if isinstance(v, str):
        return float(v)
    return float(v)


def read_fit(path: str | Path) -> FitResult:
    """Inverse of write_fit."""
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != FIT_SCHEMA:
        raise ValueError(f"{path}: unexpected schema {doc.get('schema_version')!r}")
    support = ChangePointSupport(c=int(doc["c"]), J=int(doc["J"]))
    items = ItemParameters(
        d=np.array([_parse_fnum(v) for v in doc["d"]]),
        a=np.array([_parse_fnum(v) for v in doc["a"]]),
        gamma=np.array([_parse_fnum(v) for v in doc["gamma"]]),
    )
    structural = StructuralParameters(
        alpha=_parse_fnum(doc["alpha"]), beta=_parse_fnum(doc["beta"])
    )
    return FitResult(
        items=items,
        structural=structural,
        support=support,
        loglik=_parse_fnum(doc["loglik"]),
        bic=_parse_fnum(doc["bic"]),
        n_free_parameters=int(doc["n_free_parameters"]),
        converged=bool(doc["converged"]),
        iterations=int(doc["iterations"]),
        gradient_norm=_parse_fnum(doc["gradient_norm"]),
        warnings=tuple(doc.get("warnings", ())),
    )


def write_scores(
    posteriors: list[PersonPosterior], support: ChangePointSupport, path: str | Path
) -> None:
    """Per-person scores as CSV: ability estimates, change flags, posterior pmf."""
    pmf_cols = [f"pmf_{j}" for j in range(support.c, support.J + 1)]
    header = ["person_index", "theta_eap", "theta_cleansed", "tau_mode", "prob_change"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header + pmf_cols)
        for i, p in enumerate(posteriors, start=1):
            writer.writerow(
                [i, repr(p.theta_eap), repr(p.theta_cleansed), p.tau_mode, repr(p.prob_change)]
                + [repr(float(v)) for v in p.tau_pmf]
            )


def write_selection_report(report: SelectionReport, path: str | Path) -> None:
    """Selection report as JSON: every candidate plus the chosen one."""

    def cand(c: Candidate) -> dict:
        return {
            "label": c.label,
            "c": c.c,
            "loglik": _fnum(c.loglik),
            "n_free_parameters": c.n_free_parameters,
            "criterion": _fnum(c.criterion),
            "converged": c.converged,
            "error": c.error,
        }

    doc = {
        "schema_version": SELECTION_SCHEMA,
        "criterion_name": report.criterion_name,
        "candidates": [cand(c) for c in report.candidates],
        "chosen": cand(report.chosen),
    }
    _write_json(doc, path)


def write_metrics_json(table: MetricsTable, path: str | Path) -> None:
    doc = {
        "schema_version": METRICS_SCHEMA,
        "scalars": {k: _fnum(v) for k, v in table.scalars.items()},
        "per_item": {k: _float_list(v) for k, v in table.per_item.items()},
        "n_failed_replications": table.n_failed_replications,
    }
    _write_json(doc, path)


def write_metrics_csv(table: MetricsTable, path: str | Path) -> None:
    """Long-format CSV: metric, item (blank for scalars), value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "item", "value"])
        for name, value in table.scalars.items():
            writer.writerow([name, "", repr(float(value))])
        for name, values in table.per_item.items():
            for j, value in enumerate(np.asarray(values, dtype=float), start=1):
                writer.writerow([name, j, repr(float(value))])
        writer.writerow(["n_failed_replications", "", table.n_failed_replications])
