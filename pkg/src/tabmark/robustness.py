"""Attack simulators and analytical robustness thresholds.

Two adversaries: an additive-Gaussian attacker perturbing a fraction of the
released entries, and an idealized targeted-flip attacker that moves exactly
k green elements per column into the red half of their pair. The bound
calculators give the minimum total flips an evasion needs and the attack
budget below which evasion fails with high probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import binning
from .detection import chi_square_quantile, green_counts_table
from .embedding import NumericTable, WatermarkKey, _resample_red
from .errors import DomainError, SchemaError

__all__ = [
    "AttackSpec",
    "RobustnessBound",
    "additive_noise_attack",
    "attack_success_frequency",
    "min_flips_for_evasion",
    "thm6_threshold",
    "robustness_bounds",
    "targeted_flip_attack",
]


@dataclass(frozen=True)
class AttackSpec:
    """Parameters of an attack run.

    noise_std is in raw data units unless relative=True, in which case it
    scales per column by the attacked table's standard deviation. proportion
    selects entries by independent Bernoulli draws; fixed_count=True instead
    perturbs exactly round(proportion * n * p) entries, for counted sweeps.
    """

    kind: str = "additive-gaussian"
    noise_std: float = 0.0
    proportion: float = 1.0
    relative: bool = False
    flip_counts: Mapping[str, int] | None = None
    seed: int = 0
    fixed_count: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("additive-gaussian", "targeted-flip"):
            raise SchemaError(f"unknown attack kind {self.kind!r}")
        if not (0.0 <= self.proportion <= 1.0):
            raise SchemaError(f"proportion must lie in [0, 1], got {self.proportion}")
        if self.noise_std < 0.0:
            raise SchemaError(f"noise_std must be >= 0, got {self.noise_std}")


@dataclass(frozen=True)
class RobustnessBound:
    n: int
    p: int
    alpha: float
    min_flips: float
    max_attacked: float
    failure_prob_lb: float


def _noise_attack_with_mask(table, spec, rng):
    if spec.kind != "additive-gaussian":
        raise SchemaError(f"additive_noise_attack requires kind additive-gaussian, got {spec.kind!r}")
    values = table.values
    if spec.fixed_count:
        count = int(round(spec.proportion * values.size))
        flat = rng.choice(values.size, size=count, replace=False)
        mask = np.zeros(values.size, dtype=bool)
        mask[flat] = True
        mask = mask.reshape(values.shape)
    else:
        mask = rng.random(values.shape) < spec.proportion
    if spec.noise_std == 0.0 or not mask.any():
        return table, mask
    scale = spec.noise_std
    if spec.relative:
        scale = scale * values.std(axis=0, keepdims=True)
    noise = rng.normal(0.0, 1.0, size=values.shape) * scale
    out = np.where(mask, values + noise, values)
    return NumericTable(table.column_names, out), mask


def additive_noise_attack(
    table: NumericTable, spec: AttackSpec, rng: np.random.Generator | None = None
) -> NumericTable:
    """Perturb a Bernoulli-chosen fraction of entries with Gaussian noise."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    attacked, _ = _noise_attack_with_mask(table, spec, rng)
    return attacked


def _assert_fully_green(table: NumericTable, key: WatermarkKey) -> None:
    counts = green_counts_table(table, key)
    if any(c != table.n for c in counts):
        raise DomainError("table is not fully green under the key before the attack")


def attack_success_frequency(
    table: NumericTable,
    spec: AttackSpec,
    key: WatermarkKey,
    rng: np.random.Generator | None = None,
) -> float:
    """Fraction of attacked keyed elements whose post-attack fraction is red.

    Empirical estimator of the asymptotic per-element attack success rate,
    which approaches 1/2 as m grows. Requires a fully watermarked input.
    """
    _assert_fully_green(table, key)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    attacked, mask = _noise_attack_with_mask(table, spec, rng)
    keyed_idx = [table.column_index(e.name) for e in key.columns]
    total = 0
    red = 0
    for entry, idx in zip(key.columns, keyed_idx):
        col_mask = mask[:, idx]
        if not col_mask.any():
            continue
        col = attacked.values[col_mask, idx]
        y = entry.normalizer.forward(col) if entry.normalizer is not None else col
        _, frac = binning.split_fractional(y)
        green = binning.in_green_mask(frac, entry.green)
        total += green.size
        red += int((~green).sum())
    return red / total if total else 0.0


def min_flips_for_evasion(n: int, p: int, alpha: float) -> float:
    """Lower bound on the total green-to-red flips an evasion needs."""
    _check_np_alpha(n, p, alpha)
    np_ = n * p
    return 0.5 * np_ - 0.5 * math.sqrt(np_) * math.sqrt(chi_square_quantile(1.0 - alpha, p))


def thm6_threshold(n: int, p: int, alpha: float) -> tuple[float, float]:
    """Attack-budget threshold and the matching failure-probability guarantee.

    Assumes every element starts green and each attacked element flips with
    probability at most 1/2. Returns (max total attacked elements, lower bound
    on the probability the attack still fails).
    """
    _check_np_alpha(n, p, alpha)
    np_ = n * p
    root_q = math.sqrt(chi_square_quantile(1.0 - alpha, p))
    max_attacked = (np_ - math.sqrt(np_) * root_q) / (1.0 + np_ ** -0.25)
    exponent = -0.5 * (math.sqrt(np_) - root_q)
    failure_lb = max(0.0, 1.0 - math.exp(exponent)) if exponent < 0 else 0.0
    return max_attacked, failure_lb


def robustness_bounds(n: int, p: int, alpha: float) -> RobustnessBound:
    """Bundle of the analytical thresholds for an n x p fully keyed table."""
    max_attacked, failure_lb = thm6_threshold(n, p, alpha)
    return RobustnessBound(
        n=int(n),
        p=int(p),
        alpha=float(alpha),
        min_flips=min_flips_for_evasion(n, p, alpha),
        max_attacked=max_attacked,
        failure_prob_lb=failure_lb,
    )


def targeted_flip_attack(
    table: NumericTable,
    key: WatermarkKey,
    flip_counts,
    seed: int = 0,
) -> NumericTable:
    """Move exactly k green elements per keyed column into their pair's red bin.

    flip_counts is a mapping column name -> k, or a sequence aligned with the
    key's column order. The input must be fully green under the key; after the
    attack the chi-square statistic equals sum_j 4n(1/2 - k_j/n)^2 exactly.
    """
    _assert_fully_green(table, key)
    if isinstance(flip_counts, Mapping):
        counts = [int(flip_counts.get(e.name, 0)) for e in key.columns]
    else:
        counts = [int(k) for k in flip_counts]
        if len(counts) != len(key.columns):
            raise SchemaError(
                f"{len(counts)} flip counts for {len(key.columns)} keyed columns"
            )
    n = table.n
    for entry, k in zip(key.columns, counts):
        if not 0 <= k <= n:
            raise DomainError(f"flip count {k} for column {entry.name!r} outside [0, {n}]")

    out = table.values.copy()
    rng = np.random.default_rng(seed)
    for entry, k in zip(key.columns, counts):
        if k == 0:
            continue
        idx = table.column_index(entry.name)
        rows = rng.choice(n, size=k, replace=False)
        col = out[rows, idx]
        y = entry.normalizer.forward(col) if entry.normalizer is not None else col
        ipart, frac = binning.split_fractional(y)
        pair = binning.bin_indices(frac, entry.m) >> 1
        red_bin = 2 * pair + (1 - entry.green.bits[pair])
        y_red = _resample_red(ipart, red_bin, 2 * entry.m, rng)
        out[rows, idx] = (
            entry.normalizer.inverse(y_red) if entry.normalizer is not None else y_red
        )
    return NumericTable(table.column_names, out)


def _check_np_alpha(n: int, p: int, alpha: float) -> None:
    if n < 1 or p < 1:
        raise DomainError(f"need n, p >= 1, got n={n}, p={p}")
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
