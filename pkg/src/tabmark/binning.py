"""Interval geometry of the green-list watermark.

The unit interval [0, 1) is split into 2m equal bins grouped into m
consecutive pairs; one bin of each pair is the green member. Membership is
half-open [lo, hi), so every fractional part lands in exactly one bin and
``green`` / ``red`` partition [0, 1).

Bin edges are always computed as ``j / (2 * m)`` in float arithmetic, and the
index math below realigns against those same edges, so membership agrees
exactly with the Interval endpoints handed out by this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SchemaError

__all__ = [
    "Interval",
    "GreenList",
    "green_list_from_bits",
    "random_green_list",
    "fractional_part",
    "nearest_green",
    "in_green",
]


@dataclass(frozen=True)
class Interval:
    """Half-open subinterval [lo, hi) of [0, 1]."""

    lo: float
    hi: float

    def __contains__(self, value: float) -> bool:
        return self.lo <= value < self.hi

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo


class GreenList:
    """Green half of each of m interval pairs on [0, 1).

    Bit k = False selects the lower bin [2k/(2m), (2k+1)/(2m)) of pair k as
    green, bit k = True the upper one. Immutable after construction.
    """

    __slots__ = ("m", "bits")

    def __init__(self, m: int, bits) -> None:
        m = int(m)
        if m < 1:
            raise SchemaError("green list needs at least one interval pair (m >= 1)")
        arr = np.array(bits, dtype=bool)
        if arr.shape != (m,):
            raise SchemaError(
                f"expected {m} selection bits, got {arr.size if arr.ndim == 1 else arr.shape}"
            )
        arr.setflags(write=False)
        self.m = m
        self.bits = arr

    def __eq__(self, other) -> bool:
        if not isinstance(other, GreenList):
            return NotImplemented
        return self.m == other.m and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((self.m, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"GreenList(m={self.m})"

    def green_bin(self, k: int) -> int:
        """Index (0..2m-1) of the green bin of pair k."""
        return 2 * k + int(self.bits[k])

    def green_interval(self, k: int) -> Interval:
        b = self.green_bin(k)
        two_m = 2 * self.m
        return Interval(b / two_m, (b + 1) / two_m)

    def green_intervals(self) -> list[Interval]:
        return [self.green_interval(k) for k in range(self.m)]

    def green_centers(self) -> np.ndarray:
        """Centers of all m green intervals, in pair order."""
        return (2 * np.arange(self.m) + self.bits + 0.5) / (2 * self.m)


def green_list_from_bits(m: int, bits) -> GreenList:
    """Build a green list from explicit per-pair selection bits."""
    return GreenList(m, bits)


def random_green_list(m: int, seed) -> GreenList:
    """Uniformly random green list, a deterministic function of (m, seed).

    Keys persist the resulting bits, never the seed, so the generator here is
    an internal detail.
    """
    if int(m) < 1:
        raise SchemaError("green list needs at least one interval pair (m >= 1)")
    rng = np.random.default_rng(seed)
    return GreenList(m, rng.random(int(m)) < 0.5)


def fractional_part(x: float) -> tuple[int, float]:
    """Split x into (floor(x), x - floor(x)) with the fraction in [0, 1).

    Floor semantics also for negatives: -1.25 -> (-2, 0.75). A fraction that
    rounds up to 1.0 (tiny negative x) is carried into the integer part.
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"non-finite value {x!r} has no fractional part")
    i = math.floor(x)
    f = x - i
    if f >= 1.0:
        i += 1
        f = 0.0
    return i, f


def split_fractional(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fractional_part: returns (integer_parts, fracs) arrays."""
    values = np.asarray(values, dtype=np.float64)
    ipart = np.floor(values)
    frac = values - ipart
    rolled = frac >= 1.0
    if rolled.any():
        ipart = ipart + rolled
        frac = np.where(rolled, 0.0, frac)
    return ipart, frac


def bin_indices(frac: np.ndarray, m: int) -> np.ndarray:
    """Index in 0..2m-1 of the bin containing each fraction.

    floor(frac * 2m) can land one bin off when frac sits on (or within one
    rounding of) an edge j/(2m); the two correction steps realign against the
    exact float edges.
    """
    two_m = 2 * m
    # frac >= 0, so int truncation is floor
    k = (frac * two_m).astype(np.int64)
    np.clip(k, 0, two_m - 1, out=k)
    k[frac >= (k + 1) / two_m] += 1
    k[frac < k / two_m] -= 1
    np.clip(k, 0, two_m - 1, out=k)
    return k


def in_green_mask(frac: np.ndarray, gl: GreenList) -> np.ndarray:
    """Vectorized green membership for fractions in [0, 1)."""
    k = bin_indices(np.asarray(frac, dtype=np.float64), gl.m)
    return (k & 1) == gl.bits[k >> 1]


def in_green(frac: float, gl: GreenList) -> bool:
    """True iff frac lies in some green interval (half-open membership)."""
    _check_unit_fraction(frac)
    return bool(in_green_mask(np.asarray([frac]), gl)[0])


def in_green_mask_matrix(frac: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Green membership for an (n, p) fraction matrix.

    ``bits`` is an (m, p) boolean matrix, column j holding the green list of
    table column j (all columns share the same m).
    """
    m = bits.shape[0]
    k = bin_indices(frac, m)
    cols = np.arange(frac.shape[1])
    return (k & 1) == bits[k >> 1, cols]


def nearest_green_bins(frac: np.ndarray, gl: GreenList) -> np.ndarray:
    """Bin index (0..2m-1) of the nearest green interval per fraction.

    Checks only the containing pair and two neighbors on each side (clamped),
    which always includes the global minimizer; ties go to the lower-indexed
    pair because candidates are scanned in ascending order.
    """
    frac = np.asarray(frac, dtype=np.float64)
    m = gl.m
    pair = bin_indices(frac, m) >> 1
    cand = np.clip(pair[..., None] + np.arange(-2, 3), 0, m - 1)
    centers = (2 * cand + gl.bits[cand] + 0.5) / (2 * m)
    pick = np.argmin(np.abs(frac[..., None] - centers), axis=-1)
    best = np.take_along_axis(cand, pick[..., None], axis=-1)[..., 0]
    return 2 * best + gl.bits[best]


def nearest_green(frac: float, gl: GreenList) -> Interval:
    """Green interval whose center is closest to frac; O(1) per call."""
    _check_unit_fraction(frac)
    b = int(nearest_green_bins(np.asarray([frac]), gl)[0])
    two_m = 2 * gl.m
    return Interval(b / two_m, (b + 1) / two_m)


def _check_unit_fraction(frac: float) -> None:
    if not (0.0 <= frac < 1.0):
        raise DomainError(f"fraction {frac!r} outside [0, 1)")
