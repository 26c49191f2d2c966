"""Hypothesis tests for the watermark.

Per keyed column: the green count T, the normalized deviation
z = 2*sqrt(n)*(T/n - 1/2), and the exact one-sided binomial tail
P(B(n, 1/2) >= T). Across columns: the aggregate statistic sum(z^2), compared
against chi-square with one degree of freedom per keyed column. Detection
always normalizes with the key's stored (mean, std), never with statistics of
the presented data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import binning
from .embedding import ColumnKey, NumericTable, WatermarkKey
from .errors import DomainError, SchemaError

__all__ = [
    "ColumnResult",
    "DetectionReport",
    "green_count",
    "binomial_p_value",
    "chi_square_statistic",
    "chi_square_sf",
    "chi_square_quantile",
    "detect",
]


@dataclass(frozen=True)
class ColumnResult:
    column_name: str
    n: int
    green_count: int
    z: float
    binomial_p_value: float


@dataclass(frozen=True)
class DetectionReport:
    per_column: tuple[ColumnResult, ...]
    chi_square_stat: float
    degrees: int
    global_p_value: float
    alpha: float

    @property
    def watermarked(self) -> bool:
        return self.global_p_value < self.alpha

    @property
    def decision(self) -> str:
        return "watermarked" if self.watermarked else "not-watermarked"


def _normalized_fracs(col: np.ndarray, entry: ColumnKey) -> np.ndarray:
    y = entry.normalizer.forward(col) if entry.normalizer is not None else col
    _, frac = binning.split_fractional(y)
    return frac

def green_count(col, entry: ColumnKey) -> int:
    """Number of elements whose (normalized) fractional part is green."""
    col = np.asarray(col, dtype=np.float64)
    if col.size == 0:
        return 0
    frac = _normalized_fracs(col, entry)
    return int(binning.in_green_mask(frac, entry.green).sum())


def binomial_p_value(t: int, n: int, approx_threshold: int | None = None) -> float:
    """Exact upper tail P(B(n, 1/2) >= t).

    With approx_threshold set and n above it, switches to the
    continuity-corrected normal approximation; exact mode is the default.
    """
    t, n = int(t), int(n)
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if not 0 <= t <= n:
        raise DomainError(f"count {t} outside [0, {n}]")
    if approx_threshold is not None and n > approx_threshold:
        return float(special.ndtr(-(t - 0.5 - 0.5 * n) / math.sqrt(0.25 * n)))
    if t == 0:
        return 1.0
    return float(special.bdtrc(t - 1, n, 0.5))


def chi_square_statistic(counts) -> float:
    """sum_j [2*sqrt(n_j) * (T_j/n_j - 1/2)]^2 over (T_j, n_j) pairs."""
    counts = list(counts)
    if not counts:
        raise DomainError("need at least one (count, n) pair")
    total = 0.0
    for t, n in counts:
        if not 0 <= t <= n:
            raise DomainError(f"count {t} outside [0, {n}]")
        z = 2.0 * math.sqrt(n) * (t / n - 0.5)
        total += z * z
    return total


def chi_square_sf(x: float, p: int) -> float:
    """Upper tail of chi-square with p degrees of freedom: Q(p/2, x/2)."""
    if x < 0:
        raise DomainError(f"chi-square statistic must be >= 0, got {x}")
    if p < 1:
        raise DomainError(f"need p >= 1 degrees of freedom, got {p}")
    return float(special.chdtrc(p, x))


def chi_square_quantile(q: float, p: int) -> float:
    """x such that the lower tail of chi-square_p at x equals q."""
    if not (0.0 < q < 1.0):
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    if p < 1:
        raise DomainError(f"need p >= 1 degrees of freedom, got {p}")
    return float(special.chdtri(p, 1.0 - q))


def green_counts_table(table: NumericTable, key: WatermarkKey) -> list[int]:
    """Green count per keyed column, matrix-vectorized per m-group."""
    counts = [0] * len(key.columns)
    by_m: dict[int, list[int]] = {}
    for ki, entry in enumerate(key.columns):
        by_m.setdefault(entry.m, []).append(ki)
    for m, kis in by_m.items():
        idx = [table.column_index(key.columns[ki].name) for ki in kis]
        means = np.array(
            [key.columns[ki].normalizer.mean if key.columns[ki].normalizer else 0.0 for ki in kis]
        )
        stds = np.array(
            [key.columns[ki].normalizer.std if key.columns[ki].normalizer else 1.0 for ki in kis]
        )
        bits = np.column_stack([key.columns[ki].green.bits for ki in kis])
        y = (table.values[:, idx] - means) / stds
        _, frac = binning.split_fractional(y)
        per_col = binning.in_green_mask_matrix(frac, bits).sum(axis=0)
        for ci, ki in enumerate(kis):
            counts[ki] = int(per_col[ci])
    return counts


def detect(table: NumericTable, key: WatermarkKey, alpha: float | None = None) -> DetectionReport:
    """Run the watermark hypothesis test on the key's columns.

    Columns named in the key but absent from the table are an error, never a
    silent skip. The chi-square aggregate drives the decision; per-column
    binomial tails are reported alongside for single-column use.
    """
    if alpha is None:
        alpha = key.alpha_default
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not key.columns:
        raise SchemaError("key has no columns to test")
    table_names = set(table.column_names)
    missing = [c.name for c in key.columns if c.name not in table_names]
    if missing:
        raise SchemaError(f"key columns missing from table: {missing}")
    if table.n == 0:
        raise DomainError("empty table: nothing to detect")

    n = table.n
    counts = green_counts_table(table, key)
    tail = special.bdtrc(np.asarray(counts) - 1, n, 0.5)
    tail = np.where(np.asarray(counts) == 0, 1.0, tail)
    per_column = []
    stat = 0.0
    for entry, t, pv in zip(key.columns, counts, tail):
        z = 2.0 * math.sqrt(n) * (t / n - 0.5)
        stat += z * z
        per_column.append(ColumnResult(entry.name, n, t, z, float(pv)))
    degrees = len(key.columns)
    global_p = chi_square_sf(stat, degrees)
    return DetectionReport(tuple(per_column), stat, degrees, global_p, float(alpha))
