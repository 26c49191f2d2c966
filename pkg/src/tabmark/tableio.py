"""File formats: CSV tables, JSON key documents, reports and selections.

Numeric cells are re-emitted with shortest round-trip decimal formatting, so
a write/read cycle reproduces the identical binary values. This matters: the
watermark lives in the fractional digits, and fixed-precision printing would
quietly destroy it. Key files store the green-list bits explicitly (base64,
bit-packed little-endian within bytes) rather than a generator seed, keeping
keys portable across implementations.
"""

from __future__ import annotations

import base64
import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .binning import GreenList
from .embedding import ColumnKey, Normalizer, NumericTable, WatermarkKey, KEY_FORMAT_VERSION
from .detection import ColumnResult, DetectionReport
from .smoothness import ColumnChoice, ColumnSelection
from .errors import DomainError, KeyFormatError, TableFormatError

__all__ = [
    "TableFile",
    "read_table",
    "write_table",
    "read_key",
    "write_key",
    "key_to_dict",
    "key_from_dict",
    "report_to_dict",
    "report_from_dict",
    "selection_to_dict",
    "selection_from_dict",
]


# ---------------------------------------------------------------------------
# CSV tables


@dataclass
class TableFile:
    """A parsed CSV: numeric columns plus verbatim passthrough columns."""

    table: NumericTable
    passthrough: dict[str, list[str]]
    column_order: tuple[str, ...]


def read_table(path) -> TableFile:
    """Parse a CSV into numeric and passthrough columns.

    A column is numeric iff every cell parses as a float; parsed values carry
    the full binary precision of the decimal text. NaN/inf literals in an
    otherwise numeric column are rejected. Passthrough cells are preserved
    byte-exactly for re-emission.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableFormatError(f"{path}: empty file, expected a header row") from None
        if len(set(header)) != len(header):
            raise TableFormatError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise TableFormatError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            rows.append(row)

    numeric_cols: dict[str, np.ndarray] = {}
    passthrough: dict[str, list[str]] = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        parsed = np.empty(len(cells))
        ok = True
        for i, cell in enumerate(cells):
            try:
                parsed[i] = float(cell)
            except ValueError:
                ok = False
                break
        if not ok:
            passthrough[name] = cells
            continue
        bad = [i for i, v in enumerate(parsed) if not math.isfinite(v)]
        if bad:
            raise DomainError(
                f"{path}: non-finite value in column {name!r}, row {bad[0] + 2}"
            )
        numeric_cols[name] = parsed

    numeric_names = [c for c in header if c in numeric_cols]
    values = (
        np.column_stack([numeric_cols[c] for c in numeric_names])
        if numeric_names
        else np.empty((len(rows), 0))
    )
    table = NumericTable(numeric_names, values)
    return TableFile(table, passthrough, tuple(header))


def write_table(
    table: NumericTable,
    path,
    passthrough: dict[str, list[str]] | None = None,
    column_order=None,
) -> None:
    """Inverse of read_table; numeric cells use shortest round-trip formatting."""
    passthrough = passthrough or {}
    if column_order is None:
        column_order = list(table.column_names) + [
            c for c in passthrough if c not in table.column_names
        ]
    n = table.n
    if table.p == 0 and n == 0 and passthrough:
        n = len(next(iter(passthrough.values())))
    columns: dict[str, list[str]] = {}
    for name in column_order:
        if name in table.column_names:
            columns[name] = [repr(float(v)) for v in table.column(name)]
        elif name in passthrough:
            columns[name] = list(passthrough[name])
        else:
            raise TableFormatError(f"column {name!r} in output order but not in data")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(column_order))
            for i in range(n):
                writer.writerow([columns[name][i] for name in column_order])
    except OSError as exc:
        raise TableFormatError(f"cannot write table to {path}: {exc}") from exc


def write_table_file(tf: TableFile, path) -> None:
    write_table(tf.table, path, tf.passthrough, tf.column_order)


# ---------------------------------------------------------------------------
# Key documents


def _pack_bits(bits: np.ndarray) -> str:
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")
    return base64.b64encode(packed.tobytes()).decode("ascii")


def _unpack_bits(encoded: str, m: int) -> np.ndarray:
    try:
        raw = base64.b64decode(encoded.encode("ascii"), validate=True)
    except Exception as exc:
        raise KeyFormatError(f"bits: invalid base64 ({exc})") from exc
    expected = (m + 7) // 8
    if len(raw) != expected:
        raise KeyFormatError(
            f"bits: packed length {len(raw)} bytes, expected {expected} for m={m}"
        )
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    if bits[m:].any():
        raise KeyFormatError("bits: nonzero padding past m entries")
    return bits[:m].astype(bool)


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise KeyFormatError(f"{where}: unknown fields {sorted(unknown)}")


def key_to_dict(key: WatermarkKey) -> dict:
    columns = []
    for c in key.columns:
        entry: dict = {"name": c.name, "m": c.m, "bits": _pack_bits(c.green.bits)}
        if c.normalizer is not None:
            entry["normalizer"] = {"mean": c.normalizer.mean, "std": c.normalizer.std}
        columns.append(entry)
    return {
        "version": key.version,
        "alpha_default": key.alpha_default,
        "columns": columns,
    }


def key_from_dict(doc: dict) -> WatermarkKey:
    """Strict parse of a key document; unknown fields are an error."""
    if not isinstance(doc, dict):
        raise KeyFormatError("key document must be a JSON object")
    _reject_unknown(doc, {"version", "alpha_default", "columns"}, "key")
    for fieldname in ("version", "alpha_default", "columns"):
        if fieldname not in doc:
            raise KeyFormatError(f"key: missing field {fieldname!r}")
    version = doc["version"]
    if version != KEY_FORMAT_VERSION:
        raise KeyFormatError(f"unsupported key version {version}")
    columns = []
    for i, entry in enumerate(doc["columns"]):
        where = f"columns[{i}]"
        if not isinstance(entry, dict):
            raise KeyFormatError(f"{where}: must be an object")
        _reject_unknown(entry, {"name", "m", "bits", "normalizer"}, where)
        for fieldname in ("name", "m", "bits"):
            if fieldname not in entry:
                raise KeyFormatError(f"{where}: missing field {fieldname!r}")
        m = entry["m"]
        if not isinstance(m, int) or m < 1:
            raise KeyFormatError(f"{where}.m: must be a positive integer, got {m!r}")
        bits = _unpack_bits(entry["bits"], m)
        normalizer = None
        if "normalizer" in entry and entry["normalizer"] is not None:
            norm = entry["normalizer"]
            _reject_unknown(norm, {"mean", "std"}, f"{where}.normalizer")
            if "mean" not in norm or "std" not in norm:
                raise KeyFormatError(f"{where}.normalizer: needs mean and std")
            if not (isinstance(norm["std"], (int, float)) and norm["std"] > 0):
                raise KeyFormatError(f"{where}.normalizer.std: must be > 0, got {norm['std']!r}")
            normalizer = Normalizer(float(norm["mean"]), float(norm["std"]))
        columns.append(ColumnKey(str(entry["name"]), GreenList(m, bits), normalizer))
    alpha = doc["alpha_default"]
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0):
        raise KeyFormatError(f"alpha_default: must lie in (0, 1), got {alpha!r}")
    return WatermarkKey(tuple(columns), alpha_default=float(alpha), version=int(version))


def write_key(key: WatermarkKey, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(key_to_dict(key), fh, indent=2)
        fh.write("\n")


def read_key(path) -> WatermarkKey:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise KeyFormatError(f"{path}: not valid JSON ({exc})") from exc
    return key_from_dict(doc)


# ---------------------------------------------------------------------------
# Reports and selections


def report_to_dict(report: DetectionReport) -> dict:
    return {
        "version": 1,
        "per_column": [
            {
                "column_name": c.column_name,
                "n": c.n,
                "green_count": c.green_count,
                "z": c.z,
                "binomial_p_value": c.binomial_p_value,
            }
            for c in report.per_column
        ],
        "chi_square_stat": report.chi_square_stat,
        "degrees": report.degrees,
        "global_p_value": report.global_p_value,
        "alpha": report.alpha,
        "decision": report.decision,
    }


def report_from_dict(doc: dict) -> DetectionReport:
    per_column = tuple(
        ColumnResult(
            c["column_name"], c["n"], c["green_count"], c["z"], c["binomial_p_value"]
        )
        for c in doc["per_column"]
    )
    return DetectionReport(
        per_column,
        doc["chi_square_stat"],
        doc["degrees"],
        doc["global_p_value"],
        doc["alpha"],
    )


def selection_to_dict(sel: ColumnSelection) -> dict:
    return {
        "version": 1,
        "kept": [
            {"name": c.name, "chosen_m": c.chosen_m, "in_range_count": c.in_range_count}
            for c in sel.kept
        ],
        "rejected": [
            {"name": name, "out_of_range_count": count} for name, count in sel.rejected
        ],
    }


def selection_from_dict(doc: dict) -> ColumnSelection:
    kept = tuple(
        ColumnChoice(c["name"], c["chosen_m"], c["in_range_count"]) for c in doc["kept"]
    )
    rejected = tuple((c["name"], c["out_of_range_count"]) for c in doc["rejected"])
    return ColumnSelection(kept, rejected)
