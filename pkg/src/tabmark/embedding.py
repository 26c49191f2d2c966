"""Element-wise watermark embedding, applied column-wise under a key.

Each keyed column is optionally mapped to zero mean / unit variance with the
affine parameters stored in the key, every element whose fractional part is
red is resampled uniformly from its nearest green interval, and the affine
map is inverted before release. Elements already green are left bit-identical,
which makes re-embedding a no-op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import binning
from .binning import GreenList
from .errors import DomainError, SchemaError

__all__ = [
    "Normalizer",
    "ColumnKey",
    "WatermarkKey",
    "NumericTable",
    "embed_value",
    "embed_column",
    "embed_table",
    "build_key",
]

KEY_FORMAT_VERSION = 1
DEFAULT_ALPHA = 0.005
DEFAULT_M = 1000

# Columns whose spread is below this are embedded in raw units: dividing by a
# near-zero std would blow up the values.
MIN_NORMALIZER_STD = 1e-12


@dataclass(frozen=True)
class Normalizer:
    """Per-column affine map to zero mean / unit variance, stored in the key."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not (self.std > 0.0):
            raise SchemaError(f"normalizer std must be positive, got {self.std}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse(self, y: np.ndarray) -> np.ndarray:
        return y * self.std + self.mean


@dataclass(frozen=True)
class ColumnKey:
    name: str
    green: GreenList
    normalizer: Normalizer | None = None

    @property
    def m(self) -> int:
        return self.green.m


@dataclass(frozen=True)
class WatermarkKey:
    """Portable watermark secret: per-column green lists plus normalization."""

    columns: tuple[ColumnKey, ...]
    alpha_default: float = DEFAULT_ALPHA
    version: int = KEY_FORMAT_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("key column names must be unique")
        if not (0.0 < self.alpha_default < 1.0):
            raise SchemaError(f"alpha_default must lie in (0, 1), got {self.alpha_default}")

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> ColumnKey:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"key has no column {name!r}")


class NumericTable:
    """Rectangular matrix of finite reals with unique column names.

    The container itself tolerates n = 0 (a header-only CSV parses to an empty
    table); embedding and detection reject empty input explicitly.
    """

    __slots__ = ("column_names", "values", "_index")

    def __init__(self, column_names, values) -> None:
        names = tuple(str(c) for c in column_names)
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 2:
            raise SchemaError(f"table values must be 2-D, got ndim={vals.ndim}")
        if vals.shape[1] != len(names):
            raise SchemaError(
                f"{len(names)} column names for {vals.shape[1]} value columns"
            )
        if len(set(names)) != len(names):
            raise SchemaError("table column names must be unique")
        if not np.isfinite(vals).all():
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise DomainError(
                f"non-finite value at row {bad[0]}, column {names[bad[1]]!r}"
            )
        self.column_names = names
        self.values = vals
        self._index = {name: i for i, name in enumerate(names)}
        vals.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"table has no column {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, NumericTable):
            return NotImplemented
        return self.column_names == other.column_names and bool(
            np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"NumericTable(n={self.n}, p={self.p})"


def _column_rng(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-column substream; id = column index in the key."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _place_in_bin(ipart, green_bin, two_m, u):
    """Map uniforms u in [0, 1) onto the half-open bin, recombined with ipart.

    Guards two floating-point edge cases: the draw rounding up onto the open
    endpoint, and ipart + r rounding across a bin edge for large magnitudes
    (those are snapped to the interval midpoint).
    """
    lo = green_bin / two_m
    hi = (green_bin + 1) / two_m
    r = lo + u * (hi - lo)
    r = np.where(r >= hi, np.nextafter(hi, lo), r)
    out = ipart + r
    _, f2 = binning.split_fractional(out)
    k2 = binning.bin_indices(f2, two_m // 2)
    bad = k2 != green_bin
    if bad.any():
        out = np.where(bad, ipart + 0.5 * (lo + hi), out)
        _, f3 = binning.split_fractional(out)
        still = binning.bin_indices(f3, two_m // 2) != green_bin
        if still.any():
            raise DomainError(
                "value magnitude too large to carry a watermark at this m"
            )
    return out


def _resample_red(ipart, green_bin, two_m, rng):
    """Uniform draw from the half-open green bin, recombined with ipart."""
    return _place_in_bin(ipart, green_bin, two_m, rng.random(green_bin.shape))


def embed_value(x: float, gl: GreenList, rng: np.random.Generator) -> float:
    """Watermark a single value; |result - x| <= 1/m always."""
    ipart, frac = binning.fractional_part(x)
    if binning.in_green(frac, gl):
        return float(x)
    b = binning.nearest_green_bins(np.asarray([frac]), gl)
    return float(_resample_red(np.asarray([float(ipart)]), b, 2 * gl.m, rng)[0])


def _embed_array(values: np.ndarray, gl: GreenList, rng: np.random.Generator) -> np.ndarray:
    ipart, frac = binning.split_fractional(values)
    green = binning.in_green_mask(frac, gl)
    out = values.astype(np.float64, copy=True)
    if not green.all():
        red = ~green
        bins = binning.nearest_green_bins(frac[red], gl)
        out[red] = _resample_red(ipart[red], bins, 2 * gl.m, rng)
    return out


def embed_column(col, entry: ColumnKey, rng: np.random.Generator) -> np.ndarray:
    """Embed one column; normalization (if keyed) wraps the element-wise step."""
    col = np.asarray(col, dtype=np.float64)
    if not np.isfinite(col).all():
        row = int(np.argwhere(~np.isfinite(col))[0][0])
        raise DomainError(f"non-finite value at row {row} in column {entry.name!r}")
    if entry.normalizer is None:
        return _embed_array(col, entry.green, rng)
    y = entry.normalizer.forward(col)
    z = _embed_array(y, entry.green, rng)
    # Only resampled entries go back through the inverse map; green entries
    # keep the original bits (the affine round trip is not exact).
    out = col.copy()
    changed = z != y
    out[changed] = entry.normalizer.inverse(z[changed])
    return out


def embed_table(table: NumericTable, key: WatermarkKey, seed: int) -> NumericTable:
    """Embed every keyed column of the table; unkeyed columns pass through.

    O(np) total work. Columns use independent derived substreams, so the
    result does not depend on processing order.
    """
    table_names = set(table.column_names)
    missing = [c.name for c in key.columns if c.name not in table_names]
    if missing:
        raise SchemaError(f"key columns missing from table: {missing}")
    if not key.columns:
        return table
    if table.n == 0:
        raise DomainError("empty table: nothing to embed")

    out = table.values.copy()
    # Group same-m key columns so the heavy index math runs matrix-at-once;
    # the per-column rng draws stay separate streams regardless.
    by_m: dict[int, list[tuple[int, ColumnKey]]] = {}
    for ki, entry in enumerate(key.columns):
        by_m.setdefault(entry.m, []).append((ki, entry))
    for m, group in by_m.items():
        idx = np.array([table.column_index(e.name) for _, e in group])
        means = np.array(
            [e.normalizer.mean if e.normalizer else 0.0 for _, e in group]
        )
        stds = np.array(
            [e.normalizer.std if e.normalizer else 1.0 for _, e in group]
        )
        bits = np.column_stack([e.green.bits for _, e in group])
        y = (out[:, idx] - means) / stds
        ipart, frac = binning.split_fractional(y)
        red = ~binning.in_green_mask_matrix(frac, bits)
        if not red.any():
            continue
        # Flat arrays over red entries, sorted by group column so each
        # column's uniforms form one contiguous slice.
        cc, rr = np.nonzero(red.T)
        frac_red = frac[rr, cc]
        pair = binning.bin_indices(frac_red, m) >> 1
        cand = np.clip(pair[:, None] + np.arange(-2, 3), 0, m - 1)
        cand_bits = bits[cand, cc[:, None]]
        centers = (2 * cand + cand_bits + 0.5) / (2 * m)
        pick = np.argmin(np.abs(frac_red[:, None] - centers), axis=1)
        flat = np.arange(pick.size)
        bins_red = 2 * cand[flat, pick] + cand_bits[flat, pick]
        counts = red.sum(axis=0)
        u = np.empty(rr.size)
        start = 0
        for ci, (ki, entry) in enumerate(group):
            if counts[ci]:
                stop = start + counts[ci]
                u[start:stop] = _column_rng(seed, ki).random(counts[ci])
                start = stop
        resampled = _place_in_bin(ipart[rr, cc], bins_red, 2 * m, u)
        # Green entries keep their original bits: only resampled values take
        # the inverse affine map.
        out[rr, idx[cc]] = resampled * stds[cc] + means[cc]
    return NumericTable(table.column_names, out)


def build_key(
    table: NumericTable,
    column_names=None,
    m: int | dict[str, int] = DEFAULT_M,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    normalize: bool = True,
) -> WatermarkKey:
    """Construct a key for the given columns (default: all numeric columns).

    Normalizer stats come from the input table (population std); near-constant
    columns get no normalizer. All green-list bits derive from one seeded
    stream, so the same (table schema, m, seed) reproduces the same key.
    """
    if column_names is None:
        column_names = list(table.column_names)
    if not column_names:
        raise SchemaError("key needs at least one column")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sizes = [m[name] if isinstance(m, dict) else int(m) for name in column_names]
    all_bits = rng.random(sum(sizes)) < 0.5
    entries = []
    offset = 0
    for name, col_m in zip(column_names, sizes):
        col = table.column(name)
        gl = GreenList(col_m, all_bits[offset : offset + col_m])
        offset += col_m
        normalizer = None
        if normalize and table.n > 0:
            mean = float(col.mean())
            std = float(col.std())
            if std >= MIN_NORMALIZER_STD:
                normalizer = Normalizer(mean, std)
        entries.append(ColumnKey(name, gl, normalizer))
    return WatermarkKey(tuple(entries), alpha_default=alpha)
