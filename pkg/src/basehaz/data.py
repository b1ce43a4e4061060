"""Observed-data model for right-censored survival samples.

The whole package works on triplets (X_i, delta_i, Z_i): an observed time,
a 0/1 event indicator and a covariate row, together with an end-of-study
horizon tau that restricts every integral to [0, tau].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: quantile of the observed times used when tau is not given explicitly
DEFAULT_TAU_QUANTILE = 0.9


class DataError(ValueError):
    """Invalid input data; ``line`` is the 1-based file line when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SurvivalSample:
    """Right-censored observations with the at-risk convention Y_i(t) = 1{X_i >= t}.

    The convention is closed on the left: a subject observed at exactly t is
    still at risk at t, so risk sets at observed times are never empty. Ties
    between event times are permitted; downstream estimators share the risk-set
    denominator across tied events.

    Attributes
    ----------
    times : ndarray of shape (n,)
        Observed times X_i = min(T_i, C_i), non-negative and finite.
    events : ndarray of shape (n,)
        Indicators delta_i, 1 for an observed event, 0 for censoring.
    covariates : ndarray of shape (n, p)
        Covariate rows Z_i.
    tau : float
        End-of-study horizon; all analysis is restricted to [0, tau].
    names : tuple of str, optional
        Covariate column names, kept for reporting only.
    """

    times: np.ndarray
    events: np.ndarray
    covariates: np.ndarray
    tau: float
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        events = np.asarray(self.events)
        covariates = np.asarray(self.covariates, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a non-empty 1-d array")
        if events.shape != times.shape:
            raise ValueError("events and times must have equal length")
        if covariates.ndim != 2 or covariates.shape[0] != times.size:
            raise ValueError("covariates must be a matrix with one row per subject")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise ValueError("times must be finite and non-negative")
        if not np.all(np.isin(events, (0, 1))):
            raise ValueError("events must contain only 0 and 1")
        if not np.all(np.isfinite(covariates)):
            raise ValueError("covariates must be finite")
        tau = float(self.tau)
        if not np.isfinite(tau) or tau <= 0:
            raise ValueError("tau must be a positive real")
        if self.names is not None and len(self.names) != covariates.shape[1]:
            raise ValueError("names must match the number of covariate columns")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "events", _frozen(events.astype(np.int64)))
        object.__setattr__(self, "covariates", _frozen(covariates))
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def risk_index(self) -> "RiskSetIndex":
        return RiskSetIndex.from_sample(self)

    def subset(self, indices) -> "SurvivalSample":
        """Sample restricted to the given subject indices; tau is kept."""
        idx = np.asarray(indices)
        return SurvivalSample(
            self.times[idx], self.events[idx], self.covariates[idx], self.tau, self.names
        )


@dataclass(frozen=True)
class RiskSetIndex:
    """Sorted-time structure that speeds up risk-set sums.

    ``order`` sorts the sample times ascending; ``at_risk_counts[k]`` is the
    number of subjects with X_j >= distinct_times[k].
    """

    order: np.ndarray
    distinct_times: np.ndarray
    at_risk_counts: np.ndarray

    @classmethod
    def from_sample(cls, sample: SurvivalSample) -> "RiskSetIndex":
        order = np.argsort(sample.times, kind="stable")
        sorted_times = sample.times[order]
        distinct, first = np.unique(sorted_times, return_index=True)
        counts = sample.n - first
        return cls(_frozen(order), _frozen(distinct), _frozen(counts))

    def at_risk(self, t):
        """Number of subjects at risk, #{j : X_j >= t}, for scalar or array t."""
        padded = np.concatenate([self.at_risk_counts, [0]])
        pos = np.searchsorted(self.distinct_times, t, side="left")
        out = padded[pos]
        return int(out) if np.ndim(t) == 0 else out


def risk_weighted_sums(times, weights, query):
    """Sums of ``weights`` over the risk set {j : times[j] >= q}, per query point.

    ``weights`` may be shaped (n,) or (n, k); the result is (m,) or (m, k) for
    m query points (a scalar query gives a 0-d or (k,) result). Weight order
    follows ``times``.
    """
    times = np.asarray(times, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    w = weights[order].reshape(times.size, -1)
    prefix = np.vstack([np.zeros((1, w.shape[1])), np.cumsum(w, axis=0)])
    idx = np.searchsorted(sorted_times, query, side="left")
    out = prefix[-1] - prefix[idx]
    if weights.ndim == 1:
        out = out[..., 0]
    return out


def s_n(sample: SurvivalSample, beta, t):
    """Normalized at-risk exponential sum (1/n) sum_i e^{beta.Z_i} 1{X_i >= t}.

    Non-increasing right-continuous step function of t; with beta = 0 it
    reduces to :func:`bar_y`. Accepts scalar or array t.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (sample.p,):
        raise ValueError(f"beta must have length {sample.p}, got shape {beta.shape}")
    eta = sample.covariates @ beta
    out = risk_weighted_sums(sample.times, np.exp(eta), t) / sample.n
    return float(out) if np.ndim(t) == 0 else out


def bar_y(sample: SurvivalSample, t):
    """At-risk proportion (1/n) sum_i 1{X_i >= t} for scalar or array t.

    The unnormalized count n * bar_y is what the cross-validation criterion
    consumes; everything else uses this normalized form.
    """
    out = risk_weighted_sums(sample.times, np.ones(sample.n), t) / sample.n
    return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class ColumnSchema:
    """Column mapping for CSV ingestion.

    ``covariates`` may be None, in which case every column other than the
    time and status columns is used, in header order.
    """

    time: str = "time"
    status: str = "status"
    covariates: tuple[str, ...] | None = None


def _parse_float(text: str, column: str, line: int) -> float:
    text = text.strip()
    if not text:
        raise DataError(f"missing value in column {column!r}", line)
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"malformed number {text!r} in column {column!r}", line) from None
    if not np.isfinite(value):
        raise DataError(f"non-finite value in column {column!r}", line)
    return value


def load_csv(path, schema: ColumnSchema | None = None, tau: float | None = None) -> SurvivalSample:
    """Read a survival dataset from a headed CSV file.

    Rows with missing values, negative times or a status outside {0, 1} are
    rejected with the offending file line; incomplete records are never
    imputed. When ``tau`` is not given it defaults to the 90% empirical
    quantile of the observed times (linear interpolation between order
    statistics).
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: a header row is required") from None
        header = [name.strip() for name in header]
        for required in (schema.time, schema.status):
            if required not in header:
                raise DataError(f"column {required!r} not found in header {header}")
        if schema.covariates is None:
            cov_names = tuple(c for c in header if c not in (schema.time, schema.status))
        else:
            cov_names = tuple(schema.covariates)
            for name in cov_names:
                if name not in header:
                    raise DataError(f"covariate column {name!r} not found in header")
        if not cov_names:
            raise DataError("at least one covariate column is required")
        col = {name: header.index(name) for name in header}

        times, events, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"expected {len(header)} fields, got {len(row)}", line_no
                )
            t = _parse_float(row[col[schema.time]], schema.time, line_no)
            if t < 0:
                raise DataError(f"negative time {t!r}", line_no)
            status = _parse_float(row[col[schema.status]], schema.status, line_no)
            if status not in (0.0, 1.0):
                raise DataError(f"status must be 0 or 1, got {row[col[schema.status]]!r}", line_no)
            times.append(t)
            events.append(int(status))
            rows.append([_parse_float(row[col[c]], c, line_no) for c in cov_names])

    if not times:
        raise DataError("file contains no data rows")
    times = np.asarray(times)
    if tau is None:
        tau = float(np.quantile(times, DEFAULT_TAU_QUANTILE))
        if tau <= 0:
            raise DataError("default tau (90% quantile of times) is not positive; pass tau explicitly")
    return SurvivalSample(times, np.asarray(events), np.asarray(rows), float(tau), cov_names)


def write_csv(sample: SurvivalSample, path) -> None:
    """Write a sample back to CSV with shortest round-trip float formatting."""
    names = sample.names or tuple(f"z{j + 1}" for j in range(sample.p))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "status", *names])
        for i in range(sample.n):
            writer.writerow(
                [repr(float(sample.times[i])), int(sample.events[i])]
                + [repr(float(v)) for v in sample.covariates[i]]
            )
