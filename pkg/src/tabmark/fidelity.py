"""Distortion measures between an original table and its watermarked release.

The element-wise bound is exact: embedding never moves a normalized value by
more than 1/m. The one-dimensional Wasserstein-1 distance is computed exactly
via sorted pairing; the multivariate distance is upper-bounded through the
identity row pairing rather than solving optimal transport.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import NumericTable, WatermarkKey
from .errors import DomainError, SchemaError

__all__ = [
    "FidelityReport",
    "linf_distance",
    "wasserstein1_column",
    "row_paired_wasserstein",
    "correlation_drift",
    "fidelity_report",
]


@dataclass(frozen=True)
class FidelityReport:
    linf: float
    per_column_w1: tuple[tuple[str, float], ...]
    multivariate_w1_bound: float
    max_corr_diff: float | None


def _check_same_shape(a: NumericTable, b: NumericTable) -> None:
    if a.column_names != b.column_names or a.values.shape != b.values.shape:
        raise SchemaError(
            f"tables differ in shape or columns: {a!r} vs {b!r}"
        )


def linf_distance(a: NumericTable, b: NumericTable, key: WatermarkKey) -> float:
    """Max |a - b| over keyed entries, in each column's normalized units."""
    _check_same_shape(a, b)
    worst = 0.0
    for entry in key.columns:
        idx = a.column_index(entry.name)
        diff = np.abs(a.values[:, idx] - b.values[:, idx])
        if diff.size == 0:
            continue
        scale = entry.normalizer.std if entry.normalizer is not None else 1.0
        worst = max(worst, float(diff.max()) / scale)
    return worst


def wasserstein1_column(a, b) -> float:
    """Exact W1 between two equal-size empirical distributions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise SchemaError(f"need equal-length 1-D samples, got {a.shape} and {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.abs(np.sort(a) - np.sort(b)).mean())


def row_paired_wasserstein(a: NumericTable, b: NumericTable, key: WatermarkKey, k: int = 1) -> float:
    """Upper bound on the multivariate W_k via the identity row pairing.

    Rows are compared in normalized units over the keyed columns only.
    """
    _check_same_shape(a, b)
    if not key.columns:
        return 0.0
    idx = [a.column_index(e.name) for e in key.columns]
    stds = np.array([e.normalizer.std if e.normalizer else 1.0 for e in key.columns])
    diff = (a.values[:, idx] - b.values[:, idx]) / stds
    row_norms = np.sqrt((diff * diff).sum(axis=1))
    return float(np.mean(row_norms**k) ** (1.0 / k))


def correlation_drift(a: NumericTable, b: NumericTable) -> float:
    """Max absolute entry-wise difference of the Pearson correlation matrices."""
    _check_same_shape(a, b)
    for t in (a, b):
        stds = t.values.std(axis=0)
        if (stds < 1e-300).any():
            name = t.column_names[int(np.argmin(stds))]
            raise DomainError(f"constant column {name!r} has no correlation")
    ca = np.corrcoef(a.values, rowvar=False)
    cb = np.corrcoef(b.values, rowvar=False)
    ca = np.atleast_2d(ca)
    cb = np.atleast_2d(cb)
    return float(np.abs(ca - cb).max())


def fidelity_report(
    a: NumericTable,
    b: NumericTable,
    key: WatermarkKey,
    include_correlation: bool = True,
) -> FidelityReport:
    """Full distortion summary of a watermarked release against its original."""
    _check_same_shape(a, b)
    per_col = []
    inv_m_max = 0.0
    for entry in key.columns:
        idx = a.column_index(entry.name)
        scale = entry.normalizer.std if entry.normalizer is not None else 1.0
        w1 = wasserstein1_column(a.values[:, idx] / scale, b.values[:, idx] / scale)
        per_col.append((entry.name, w1))
        inv_m_max = max(inv_m_max, 1.0 / entry.m)
    bound = float(np.sqrt(len(key.columns)) * inv_m_max)
    corr = correlation_drift(a, b) if include_correlation else None
    return FidelityReport(
        linf=linf_distance(a, b, key),
        per_column_w1=tuple(per_col),
        multivariate_w1_bound=bound,
        max_corr_diff=corr,
    )
