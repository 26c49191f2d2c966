"""Command-line surface binding the toolkit into file-based workflows.

Exit codes: 0 success, 1 operational failure (I/O, schema), 2 usage error,
and 3 from `detect` when the verdict is not-watermarked, so shell pipelines
can branch on the verdict without conflating it with breakage.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys

import numpy as np

from . import harness, robustness, smoothness, tableio
from .detection import detect
from .embedding import (
    DEFAULT_ALPHA,
    DEFAULT_M,
    WatermarkKey,
    build_key,
    embed_table,
)
from .errors import TabmarkError
from .fidelity import fidelity_report

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NOT_WATERMARKED = 3


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _resolve_seed(seed: int | None) -> int:
    """Explicit seeds pass through; otherwise draw one and announce it on
    stderr so the run stays reproducible after the fact."""
    if seed is not None:
        return seed
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabmark",
        description="Green-list watermarking for numeric tabular data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="build a watermark key from a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--columns", default=None,
                   help="comma-separated column names, or 'auto' for the smoothness filter")
    p.add_argument("--m", default=str(DEFAULT_M),
                   help="interval pairs per column, or 'auto' (requires --columns auto)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", help="watermark a CSV under a key")
    p.add_argument("--input", required=True)
    p.add_argument("--key", default=None)
    p.add_argument("--key-from-selection", default=None,
                   help="build the key from a `filter` selection document instead of --key")
    p.add_argument("--key-out", default=None,
                   help="where to save the generated key (with --key-from-selection)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("detect", help="test a CSV for the watermark")
    p.add_argument("--input", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("attack", help="perturb a CSV with additive Gaussian noise")
    p.add_argument("--input", required=True)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--proportion", type=float, default=1.0)
    p.add_argument("--relative", action="store_true",
                   help="scale noise by each column's standard deviation")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fidelity", help="distortion report between two CSVs")
    p.add_argument("--original", required=True)
    p.add_argument("--watermarked", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--skip-correlation", action="store_true")
    p.add_argument("--per-column-csv", default=None,
                   help="also write per-column W1 values as flat CSV")

    p = sub.add_parser("filter", help="smoothness-based column selection")
    p.add_argument("--input", required=True)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--m-grid", default=None,
                   help="comma-separated interval counts (default 1000..5000 step 500)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bounds", help="analytical robustness thresholds")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--p", type=_positive_int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("simulate", help="run a Monte-Carlo sweep, emit CSV")
    p.add_argument("--scenario", required=True,
                   choices=("single-column", "all-columns", "attack-grid", "high-dim"))
    p.add_argument("--scale", choices=("paper", "ci"), default="paper")
    p.add_argument("--trials", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    return parser


def _parse_columns(arg: str | None, table) -> list[str] | None:
    if arg is None or arg == "auto":
        return None if arg is None else "auto"
    return [c.strip() for c in arg.split(",") if c.strip()]


def _cmd_keygen(args) -> int:
    tf = tableio.read_table(args.input)
    if tf.table.p == 0:
        print("error: no numeric columns in input", file=sys.stderr)
        return EXIT_FAILURE
    seed = _resolve_seed(args.seed)
    auto = args.columns == "auto"
    if args.m == "auto" and not auto:
        print("error: --m auto requires --columns auto", file=sys.stderr)
        return EXIT_USAGE
    if auto:
        sel = smoothness.select_columns(tf.table, seed=seed)
        if not sel.kept:
            print("error: smoothness filter rejected every column", file=sys.stderr)
            return EXIT_FAILURE
        columns = [c.name for c in sel.kept]
        m = {c.name: c.chosen_m for c in sel.kept} if args.m == "auto" else int(args.m)
    else:
        columns = _parse_columns(args.columns, tf.table) or list(tf.table.column_names)
        try:
            m = int(args.m)
        except ValueError:
            m = 0
        if m < 1:
            print("error: --m must be a positive integer or 'auto'", file=sys.stderr)
            return EXIT_USAGE
    key = build_key(tf.table, columns, m=m, seed=seed, alpha=args.alpha)
    tableio.write_key(key, args.out)
    print(f"wrote key for {len(key.columns)} column(s) to {args.out}")
    return EXIT_OK


def _key_from_selection(args, table) -> WatermarkKey:
    with open(args.key_from_selection, encoding="utf-8") as fh:
        sel = tableio.selection_from_dict(json.load(fh))
    seed = _resolve_seed(args.seed)
    columns = [c.name for c in sel.kept]
    m = {c.name: c.chosen_m for c in sel.kept}
    return build_key(table, columns, m=m, seed=seed)


def _cmd_embed(args) -> int:
    tf = tableio.read_table(args.input)
    if (args.key is None) == (args.key_from_selection is None):
        print("error: exactly one of --key / --key-from-selection required", file=sys.stderr)
        return EXIT_USAGE
    if args.key_from_selection is not None:
        key = _key_from_selection(args, tf.table)
        if args.key_out:
            tableio.write_key(key, args.key_out)
    else:
        key = tableio.read_key(args.key)
    seed = _resolve_seed(args.seed)
    wm = embed_table(tf.table, key, seed)
    tableio.write_table(wm, args.out, tf.passthrough, tf.column_order)
    if key.columns:
        rep = fidelity_report(tf.table, wm, key, include_correlation=False)
        print(f"linf (normalized units): {rep.linf:.6g}")
        for name, w1 in rep.per_column_w1:
            print(f"w1[{name}]: {w1:.6g}")
    print(f"wrote watermarked table to {args.out}")
    return EXIT_OK


def _cmd_detect(args) -> int:
    tf = tableio.read_table(args.input)
    key = tableio.read_key(args.key)
    report = detect(tf.table, key, args.alpha)
    if args.format == "json":
        print(json.dumps(tableio.report_to_dict(report), indent=2))
    else:
        print(f"chi-square statistic: {report.chi_square_stat:.6g} "
              f"({report.degrees} degrees of freedom)")
        print(f"global p-value: {report.global_p_value:.6g}  alpha: {report.alpha}")
        for c in report.per_column:
            print(f"  {c.column_name}: green {c.green_count}/{c.n}  "
                  f"z={c.z:.3f}  binomial p={c.binomial_p_value:.6g}")
        print(f"decision: {report.decision}")
    return EXIT_OK if report.watermarked else EXIT_NOT_WATERMARKED


def _cmd_attack(args) -> int:
    tf = tableio.read_table(args.input)
    seed = _resolve_seed(args.seed)
    spec = robustness.AttackSpec(
        noise_std=args.noise_std,
        proportion=args.proportion,
        relative=args.relative,
        seed=seed,
    )
    attacked = robustness.additive_noise_attack(tf.table, spec)
    tableio.write_table(attacked, args.out, tf.passthrough, tf.column_order)
    print(f"wrote attacked table to {args.out}")
    return EXIT_OK


def _cmd_fidelity(args) -> int:
    a = tableio.read_table(args.original).table
    b = tableio.read_table(args.watermarked).table
    key = tableio.read_key(args.key)
    rep = fidelity_report(a, b, key, include_correlation=not args.skip_correlation)
    doc = {
        "linf": rep.linf,
        "per_column_w1": [{"name": n, "w1": w} for n, w in rep.per_column_w1],
        "multivariate_w1_bound": rep.multivariate_w1_bound,
        "max_corr_diff": rep.max_corr_diff,
    }
    print(json.dumps(doc, indent=2))
    if args.per_column_csv:
        import csv as _csv
        with open(args.per_column_csv, "w", newline="", encoding="utf-8") as fh:
            w = _csv.writer(fh)
            w.writerow(["column", "w1"])
            w.writerows(rep.per_column_w1)
    return EXIT_OK


def _cmd_filter(args) -> int:
    tf = tableio.read_table(args.input)
    seed = _resolve_seed(args.seed)
    kwargs = {"delta": args.delta, "repeats": args.repeats}
    if args.m_grid:
        kwargs["m_grid"] = tuple(int(m) for m in args.m_grid.split(","))
    cfg = smoothness.SmoothnessConfig(**kwargs)
    sel = smoothness.select_columns(tf.table, cfg, seed=seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(tableio.selection_to_dict(sel), fh, indent=2)
        fh.write("\n")
    print(f"kept {len(sel.kept)} column(s), rejected {len(sel.rejected)}")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    bound = robustness.robustness_bounds(args.n, args.p, args.alpha)
    print(json.dumps({
        "n": bound.n,
        "p": bound.p,
        "alpha": bound.alpha,
        "min_flips": bound.min_flips,
        "max_attacked": bound.max_attacked,
        "failure_prob_lb": bound.failure_prob_lb,
    }, indent=2))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    cfg = harness.default_config(args.scenario, scale=args.scale, seed=seed)
    if args.trials is not None:
        from dataclasses import replace
        cfg = replace(cfg, trials=args.trials)
    if args.scenario == "attack-grid":
        rows = harness.attack_sweep(cfg)
    elif args.scenario == "high-dim":
        rows = harness.high_dim_sweep(cfg)
    else:
        rows = harness.detection_rate_sweep(cfg)
    harness.write_results_csv(rows, args.out)
    print(f"wrote {len(rows)} result row(s) to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "keygen": _cmd_keygen,
    "embed": _cmd_embed,
    "detect": _cmd_detect,
    "attack": _cmd_attack,
    "fidelity": _cmd_fidelity,
    "filter": _cmd_filter,
    "bounds": _cmd_bounds,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (TabmarkError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
