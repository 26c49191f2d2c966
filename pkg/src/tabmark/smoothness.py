"""Column-selection heuristic for distribution smoothness.

A column qualifies for watermarking when its empirical green frequency stays
near 1/2 across a sweep of interval counts. Each (m, repeat) experiment draws
a fresh random green list; a column whose frequency leaves [1/2 - delta,
1/2 + delta] in strictly more than reject_fraction of the experiments is
discarded as non-smooth (spiky densities break the 1/2 limit at finite m).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import binning
from .embedding import MIN_NORMALIZER_STD, NumericTable
from .errors import SchemaError

__all__ = [
    "SmoothnessConfig",
    "ColumnChoice",
    "ColumnSelection",
    "green_frequency",
    "select_columns",
]


@dataclass(frozen=True)
class SmoothnessConfig:
    delta: float = 0.01
    m_grid: tuple[int, ...] = tuple(range(1000, 5001, 500))
    repeats: int = 5
    reject_fraction: float = 0.10

    def __post_init__(self) -> None:
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if self.delta <= 0:
            raise SchemaError(f"delta must be positive, got {self.delta}")
        if not self.m_grid or any(m < 1 for m in self.m_grid):
            raise SchemaError("m_grid must be a non-empty list of positive integers")
        if list(self.m_grid) != sorted(set(self.m_grid)):
            raise SchemaError("m_grid must be strictly increasing")
        if self.repeats < 1:
            raise SchemaError(f"repeats must be >= 1, got {self.repeats}")
        if not (0.0 < self.reject_fraction < 1.0):
            raise SchemaError(
                f"reject_fraction must lie in (0, 1), got {self.reject_fraction}"
            )

    @property
    def total_experiments(self) -> int:
        return self.repeats * len(self.m_grid)


@dataclass(frozen=True)
class ColumnChoice:
    name: str
    chosen_m: int
    in_range_count: int


@dataclass(frozen=True)
class ColumnSelection:
    kept: tuple[ColumnChoice, ...]
    rejected: tuple[tuple[str, int], ...]  # (name, out-of-range count)


def green_frequency(col, m: int, seed) -> float:
    """Fraction of fractions landing green under a fresh random green list.

    The column is expected to be normalized (zero mean, unit variance)
    beforehand; select_columns takes care of that.
    """
    col = np.asarray(col, dtype=np.float64)
    gl = binning.random_green_list(m, seed)
    if col.size == 0:
        return 0.0
    _, frac = binning.split_fractional(col)
    return float(binning.in_green_mask(frac, gl).mean())


def select_columns(
    table: NumericTable, cfg: SmoothnessConfig | None = None, seed: int = 0
) -> ColumnSelection:
    """Partition the table's columns into keepers (with a chosen m) and rejects.

    For keepers, chosen_m is the grid value with the most in-range frequency
    experiments; ties go to the smallest m. Deterministic in (table, cfg, seed).
    """
    if cfg is None:
        cfg = SmoothnessConfig()
    lo = 0.5 - cfg.delta
    hi = 0.5 + cfg.delta
    total = cfg.total_experiments
    kept = []
    rejected = []
    for ci, name in enumerate(table.column_names):
        col = table.column(name)
        std = col.std()
        if std >= MIN_NORMALIZER_STD:
            col = (col - col.mean()) / std
        in_per_m = []
        for mi, m in enumerate(cfg.m_grid):
            hits = 0
            for rep in range(cfg.repeats):
                child = np.random.SeedSequence(entropy=seed, spawn_key=(ci, mi, rep))
                f_hat = green_frequency(col, m, child)
                if lo <= f_hat <= hi:
                    hits += 1
            in_per_m.append(hits)
        out_count = total - sum(in_per_m)
        if out_count > cfg.reject_fraction * total:
            rejected.append((name, out_count))
        else:
            best = int(np.argmax(in_per_m))  # first max -> smallest m
            kept.append(ColumnChoice(name, cfg.m_grid[best], in_per_m[best]))
    return ColumnSelection(tuple(kept), tuple(rejected))
