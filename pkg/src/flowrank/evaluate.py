"""Monte Carlo ROC evaluation of the detection pipelines on synthetic data.

Each run generates a fresh dataset with one injected change and reduces
it, per method, to one p-value per key (keys a method can never alarm
get a sentinel above 1). Sweeping a decision threshold over a fixed
grid then yields false-alarm and detection rates, averaged over runs.
Runs are seeded individually (data with base+run, hash coefficients
with base+offset+run), so results are reproducible and independent of
execution order or worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import NamedTuple, Sequence

import numpy as np

from .hashrank import build_sketch, cell_outcomes, sample_coefficients
from .model import Alarm, DetectionMethod, WindowBatch, WindowConfig
from .ranktest import statistic, statistic_uncensored
from .synth import SynthConfig, generate, to_window_batch
from .toprank import candidates_budget, censor, top_filter

# p-value sentinel for keys a method never tests; larger than any threshold
NEVER_TESTED = 2.0

# 30 log-spaced thresholds spanning 1e-12..1 plus the zero endpoint
DEFAULT_THRESHOLDS: tuple[float, ...] = (0.0, *(float(t) for t in np.logspace(-12.0, 0.0, 30)))


class RocPoint(NamedTuple):
    threshold: float
    fa_rate: float
    det_rate: float


def comprehensive(batch: WindowBatch, level_alpha: float) -> list[Alarm]:
    """Baseline without any reduction: rank-test every key's raw series."""
    if not 0.0 < level_alpha < 1.0:
        raise ValueError("level_alpha must be in (0, 1)")
    alarms = []
    for key in sorted(batch.series):
        out = statistic_uncensored(batch.series[key].values)
        if not out.degenerate and out.p_value < level_alpha:
            alarms.append(
                Alarm(
                    key=key,
                    window_index=batch.window_index,
                    change_bin=out.change_bin,
                    p_value=out.p_value,
                    statistic=out.w_stat,
                    method=DetectionMethod.COMPREHENSIVE,
                )
            )
    alarms.sort(key=lambda a: (a.p_value, a.key))
    return alarms


def _comprehensive_pvalues(batch: WindowBatch) -> dict[int, float]:
    return {
        key: statistic_uncensored(batch.series[key].values).p_value
        for key in batch.series
    }


def _toprank_pvalues(batch: WindowBatch, top_m: int, budget: int) -> dict[int, float]:
    # metric/alpha are irrelevant here: the batch is already binned and
    # we extract raw p-values rather than alarms
    cfg = WindowConfig(bins_per_window=batch.bins, top_m=top_m, keep_mprime=1)
    tops = top_filter(batch, cfg)
    pvals = {key: NEVER_TESTED for key in batch.series}
    for key in candidates_budget(tops, budget):
        pvals[key] = statistic(censor(batch, tops, key)).p_value
    return pvals


def _hashrank_pvalues(batch: WindowBatch, coeff_seed: int, l_rows: int, k_buckets: int) -> dict[int, float]:
    coeffs = sample_coefficients(coeff_seed, l_rows, k_buckets)
    table = build_sketch(batch, coeffs)
    outcomes = cell_outcomes(table)
    # a key is alarmed at threshold tau iff every one of its cells has
    # p < tau, i.e. iff the max over its rows' cell p-values is < tau
    pvals = {key: 0.0 for key in batch.series}
    for row, row_cells in enumerate(table.cell_keys, start=1):
        for bucket, keys in enumerate(row_cells, start=1):
            p = outcomes[(row, bucket)].p_value
            for key in keys:
                if p > pvals[key]:
                    pvals[key] = p
    return pvals


def roc(
    cfg: SynthConfig,
    method: DetectionMethod,
    runs: int,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    *,
    budget: int = 136,
    top_m: int = 50,
    l_rows: int = 8,
    k_buckets: int = 17,
    hash_seed_offset: int = 1_000_000,
    threads: int = 1,
) -> list[RocPoint]:
    """ROC curve of one method over fresh Monte Carlo datasets.

    The record-filtering method runs budget-matched: it tests exactly
    `budget` candidate series per window (the sketch method's cell
    count), using `top_m` as the filtering depth.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if cfg.dim < 1:
        raise ValueError("the protocol needs at least one key")
    thr = [float(t) for t in thresholds]
    if thr != sorted(thr):
        raise ValueError("thresholds must be sorted ascending")
    thr_arr = np.asarray(thr)
    anomaly_key = cfg.change_rank

    def one_run(r: int) -> tuple[np.ndarray, np.ndarray]:
        ds = generate(replace(cfg, seed=cfg.seed + r))
        batch = to_window_batch(ds)
        if method is DetectionMethod.TOPRANK:
            pvals = _toprank_pvalues(batch, top_m, budget)
        elif method is DetectionMethod.HASHRANK:
            pvals = _hashrank_pvalues(
                batch, cfg.seed + hash_seed_offset + r, l_rows, k_buckets
            )
        elif method is DetectionMethod.COMPREHENSIVE:
            pvals = _comprehensive_pvalues(batch)
        else:
            raise ValueError(f"unknown method {method!r}")
        det = (pvals[anomaly_key] < thr_arr).astype(np.float64)
        others = np.array(
            [p for key, p in sorted(pvals.items()) if key != anomaly_key]
        )
        if others.size:
            fa = (others[:, None] < thr_arr[None, :]).mean(axis=0)
        else:
            fa = np.zeros_like(thr_arr)
        return fa, det

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_run, range(runs)))
    else:
        results = [one_run(r) for r in range(runs)]
    fa_mean = np.mean([fa for fa, _ in results], axis=0)
    det_mean = np.mean([det for _, det in results], axis=0)
    return [
        RocPoint(threshold=t, fa_rate=float(fa), det_rate=float(det))
        for t, fa, det in zip(thr, fa_mean, det_mean)
    ]
