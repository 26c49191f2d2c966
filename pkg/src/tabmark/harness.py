"""Monte-Carlo experiment harness: synthetic generators and detection sweeps.

Every sweep is a deterministic function of its config and seed: trial i uses
the substream spawned at index i, and results are aggregated by trial index.
Output is one flat row per grid cell, ready to dump as CSV.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from .detection import detect
from .embedding import DEFAULT_ALPHA, NumericTable, WatermarkKey, build_key, embed_table
from .errors import SchemaError
from .robustness import AttackSpec, additive_noise_attack

__all__ = [
    "ExperimentConfig",
    "SweepRow",
    "gen_gaussian_table",
    "gen_correlated_table",
    "gen_mixture_table",
    "roc_auc",
    "detection_rate_sweep",
    "attack_sweep",
    "high_dim_sweep",
    "write_results_csv",
    "default_config",
]

SCENARIOS = ("single-column", "all-columns", "attack-grid", "high-dim", "independence")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "all-columns"
    n_grid: tuple[int, ...] = (10, 100, 1000)
    p_grid: tuple[int, ...] = (10, 100, 1000)
    m: int = 1000
    trials: int = 1000
    alpha: float = DEFAULT_ALPHA
    noise_grid: tuple[float, ...] = (0.001, 0.01, 0.1, 1.0, 10.0)  # variances
    proportion_grid: tuple[float, ...] = (0.50, 0.75, 0.90, 0.95)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise SchemaError(f"unknown scenario {self.scenario!r}")
        for name in ("n_grid", "p_grid", "noise_grid", "proportion_grid"):
            grid = getattr(self, name)
            object.__setattr__(self, name, tuple(grid))
            if not getattr(self, name):
                raise SchemaError(f"{name} must be non-empty")
        if self.trials < 1:
            raise SchemaError(f"trials must be >= 1, got {self.trials}")


def default_config(scenario: str, scale: str = "paper", seed: int = 0) -> ExperimentConfig:
    """Stock configs: full experiment scale, or a reduced grid for CI runs."""
    cfg = ExperimentConfig(scenario=scenario, seed=seed)
    if scenario == "attack-grid":
        cfg = replace(cfg, n_grid=(5000,), p_grid=(100,))
    elif scenario == "high-dim":
        cfg = replace(cfg, n_grid=(100,), p_grid=(100, 1000, 10000), trials=100)
    if scale == "ci":
        if scenario == "attack-grid":
            cfg = replace(cfg, n_grid=(500,), p_grid=(20,), trials=100)
        elif scenario == "high-dim":
            cfg = replace(cfg, trials=50, p_grid=(100, 1000))
        else:
            cfg = replace(cfg, trials=100)
    elif scale != "paper":
        raise SchemaError(f"unknown scale {scale!r}")
    return cfg


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    n: int
    p: int
    m: int
    noise_var: float
    proportion: float
    trial_count: int
    tpr: float
    tnr: float
    auc: float
    mean_runtime_ms: float


def _names(p: int) -> list[str]:
    return [f"c{j}" for j in range(p)]


def gen_gaussian_table(n: int, p: int, seed) -> NumericTable:
    """i.i.d. standard normal entries."""
    rng = np.random.default_rng(seed)
    return NumericTable(_names(p), rng.standard_normal((n, p)))


def gen_correlated_table(n: int, p: int, seed) -> NumericTable:
    """First column standard normal; each next column is an affine carry-over
    of the previous one plus fresh unit noise, alternating gain 1.1 and 1/1.1.
    Adjacent-column correlation comes out near 0.74."""
    rng = np.random.default_rng(seed)
    cols = np.empty((n, p))
    cols[:, 0] = rng.standard_normal(n)
    for j in range(1, p):
        eps = rng.standard_normal(n)
        if j % 2 == 1:  # previous column index j (1-based) is odd
            cols[:, j] = 1.1 * cols[:, j - 1] + eps
        else:
            cols[:, j] = cols[:, j - 1] / 1.1 + eps
    return NumericTable(_names(p), cols)


def gen_mixture_table(n: int, p: int, components: int = 5, seed=0) -> NumericTable:
    """Columns i.i.d. from randomly parameterized Gaussian mixtures
    (means in [-3, 3], stds in [0.2, 1], Dirichlet-uniform weights)."""
    rng = np.random.default_rng(seed)
    cols = np.empty((n, p))
    for j in range(p):
        means = rng.uniform(-3.0, 3.0, components)
        stds = rng.uniform(0.2, 1.0, components)
        weights = rng.dirichlet(np.ones(components))
        comp = rng.choice(components, size=n, p=weights)
        cols[:, j] = rng.standard_normal(n) * stds[comp] + means[comp]
    return NumericTable(_names(p), cols)


def roc_auc(p_watermarked, p_unwatermarked) -> float:
    """Rank-based probability that a watermarked table's p-value is below an
    unwatermarked one's; ties count one half."""
    a = np.asarray(p_watermarked, dtype=np.float64)
    b = np.asarray(p_unwatermarked, dtype=np.float64)
    ranks = rankdata(np.concatenate([a, b]))
    u_b = ranks[a.size :].sum() - b.size * (b.size + 1) / 2.0
    return float(u_b / (a.size * b.size))


def _trial_seed(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def _watermark_trial(n, p, m, scenario, alpha, ss, attack: AttackSpec | None):
    """One watermarked + one unwatermarked p-value; key always spans all
    columns (the detector tests every column uniformly), while single-column
    scenarios embed only the first."""
    s_gen, s_key, s_embed, s_null, s_attack = (int(s.generate_state(1)[0]) for s in ss.spawn(5))
    table = gen_gaussian_table(n, p, s_gen)
    key = build_key(table, m=m, seed=s_key)
    embed_key = key if scenario != "single-column" else WatermarkKey(key.columns[:1], key.alpha_default)
    wm = embed_table(table, embed_key, s_embed)
    null_table = gen_gaussian_table(n, p, s_null)
    null_key = build_key(null_table, m=m, seed=s_key)
    if attack is not None:
        rng = np.random.default_rng(s_attack)
        wm = additive_noise_attack(wm, attack, rng)
        null_table = additive_noise_attack(null_table, attack, rng)
    p_wm = detect(wm, key, alpha).global_p_value
    p_null = detect(null_table, null_key, alpha).global_p_value
    return p_wm, p_null


def _sweep_cell(cfg, n, p, noise_var, proportion, cell_index, attack):
    t0 = time.perf_counter()
    p_wm = np.empty(cfg.trials)
    p_null = np.empty(cfg.trials)
    for i in range(cfg.trials):
        ss = _trial_seed(cfg.seed, cell_index, i)
        p_wm[i], p_null[i] = _watermark_trial(
            n, p, cfg.m, cfg.scenario, cfg.alpha, ss, attack
        )
    elapsed_ms = (time.perf_counter() - t0) * 1000.0 / cfg.trials
    return SweepRow(
        scenario=cfg.scenario,
        n=n,
        p=p,
        m=cfg.m,
        noise_var=noise_var,
        proportion=proportion,
        trial_count=cfg.trials,
        tpr=float((p_wm < cfg.alpha).mean()),
        tnr=float((p_null >= cfg.alpha).mean()),
        auc=roc_auc(p_wm, p_null),
        mean_runtime_ms=elapsed_ms,
    )


def detection_rate_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """TPR / TNR / AUC over the (n, p) grid, no attack."""
    if cfg.scenario not in ("single-column", "all-columns"):
        raise SchemaError(f"detection_rate_sweep got scenario {cfg.scenario!r}")
    rows = []
    cell = 0
    for n in cfg.n_grid:
        for p in cfg.p_grid:
            rows.append(_sweep_cell(cfg, n, p, 0.0, 0.0, cell, None))
            cell += 1
    return rows


def attack_sweep(cfg: ExperimentConfig, scenario_embed: str = "all-columns") -> list[SweepRow]:
    """Grid over (noise variance, perturbed proportion) at fixed table size."""
    n, p = cfg.n_grid[0], cfg.p_grid[0]
    base = replace(cfg, scenario=scenario_embed)
    rows = []
    cell = 0
    for var in cfg.noise_grid:
        for prop in cfg.proportion_grid:
            attack = AttackSpec(noise_std=float(np.sqrt(var)), proportion=prop)
            row = _sweep_cell(base, n, p, var, prop, cell, attack)
            rows.append(replace(row, scenario=f"attack-{scenario_embed}"))
            cell += 1
    return rows


def high_dim_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """All-columns detection with p far exceeding n."""
    base = replace(cfg, scenario="all-columns")
    rows = []
    cell = 0
    for n in cfg.n_grid:
        for p in cfg.p_grid:
            row = _sweep_cell(base, n, p, 0.0, 0.0, cell, None)
            rows.append(replace(row, scenario="high-dim"))
            cell += 1
    return rows


def write_results_csv(rows, path) -> None:
    fields = [
        "scenario", "n", "p", "m", "noise_var", "proportion",
        "trial_count", "tpr", "tnr", "auc", "mean_runtime_ms",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([getattr(row, f) for f in fields])
