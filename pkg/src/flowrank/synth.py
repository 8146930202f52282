"""Synthetic traffic generator with one injected change-point.

Per-key intensities are drawn from a heavy-tailed Pareto law (most keys
see little traffic, a few see a lot), each key's bin counts are i.i.d.
Poisson at its intensity, and exactly one key switches to a multiple of
its intensity after a chosen bin. Keys are the 1-based ranks of the
intensities sorted in decreasing order, so the changed key's rank
directly controls detection difficulty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Optional, Union

import numpy as np

from .model import BinSeries, WindowBatch

DENSE_HEADER = "key,bin,count"


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic window.

    `change_rank` addresses the sorted intensity vector (rank 1 is the
    busiest key); the change multiplies that key's rate by `factor`
    after bin `change_bin`.
    """

    dim: int = 1000
    bins: int = 60
    pareto_shape: float = 2.5
    pareto_scale: float = 0.72
    change_rank: int = 500
    change_bin: int = 35
    factor: float = 7.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 0:
            raise ValueError("dim must be nonnegative")
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if self.pareto_shape <= 1:
            raise ValueError("pareto_shape must exceed 1 (finite mean)")
        if self.pareto_scale <= 0:
            raise ValueError("pareto_scale must be positive")
        if self.dim > 0 and not 1 <= self.change_rank <= self.dim:
            raise ValueError("change_rank must be in 1..dim")
        if not 1 <= self.change_bin < self.bins:
            raise ValueError("change_bin must be in 1..bins-1")
        if self.factor <= 0:
            raise ValueError("factor must be positive")


@dataclass(frozen=True)
class SyntheticDataset:
    """A dim x bins count matrix with its ground truth.

    Row i (0-based) belongs to key i+1 and was generated at intensity
    `intensities[i]`, the i+1-th largest draw. `truth` is the
    (changed key, last pre-change bin, factor) triple.
    """

    y: np.ndarray
    intensities: np.ndarray
    truth: tuple[int, int, float]

    def __post_init__(self) -> None:
        if self.y.ndim != 2:
            raise ValueError("y must be a dim x bins matrix")
        if self.intensities.shape != (self.y.shape[0],):
            raise ValueError("one intensity per row required")
        if np.any(self.intensities[:-1] < self.intensities[1:]):
            raise ValueError("intensities must be nonincreasing")
        self.y.setflags(write=False)
        self.intensities.setflags(write=False)


def sample_pareto(
    u: Union[float, np.ndarray], shape: float, scale: float
) -> Union[float, np.ndarray]:
    """Inverse-CDF transform of uniform draws to Pareto intensities.

    The density is scale*shape / (1 + scale*x)^(1+shape) for x > 0;
    inverting its CDF gives ((1-u)^(-1/shape) - 1) / scale.
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0) or np.any(u >= 1):
        raise ValueError("u must lie in [0, 1)")
    out = ((1.0 - u) ** (-1.0 / shape) - 1.0) / scale
    return float(out) if out.ndim == 0 else out


def generate(cfg: SynthConfig) -> SyntheticDataset:
    """Draw one synthetic dataset, deterministic in the seed.

    Rows use per-row RNG substreams (spawned from the seed), so row
    generation order never matters and rows could be drawn in parallel.
    """
    master = np.random.SeedSequence(cfg.seed)
    children = master.spawn(cfg.dim + 1)
    rng = np.random.default_rng(children[0])
    theta = np.sort(
        np.asarray(sample_pareto(rng.random(cfg.dim), cfg.pareto_shape, cfg.pareto_scale))
    )[::-1].copy()
    y = np.zeros((cfg.dim, cfg.bins), dtype=np.int64)
    for i in range(cfg.dim):
        row_rng = np.random.default_rng(children[i + 1])
        rate = theta[i]
        if i + 1 == cfg.change_rank:
            before = row_rng.poisson(rate, cfg.change_bin)
            after = row_rng.poisson(cfg.factor * rate, cfg.bins - cfg.change_bin)
            y[i] = np.concatenate([before, after])
        else:
            y[i] = row_rng.poisson(rate, cfg.bins)
    return SyntheticDataset(
        y=y,
        intensities=theta,
        truth=(cfg.change_rank, cfg.change_bin, cfg.factor),
    )


def to_window_batch(ds: SyntheticDataset) -> WindowBatch:
    """Wrap the count matrix as a window batch with key = row rank.

    Unlike ingested batches, all-zero rows are kept: the dataset's
    dimension is part of the experiment.
    """
    dim, bins = ds.y.shape
    series = {i + 1: BinSeries(key=i + 1, values=ds.y[i]) for i in range(dim)}
    return WindowBatch(window_index=0, start_time=0.0, bins=bins, series=series)


def write_dense_csv(ds: SyntheticDataset, target: Union[str, IO[str]]) -> None:
    """Write the dataset as key,bin,count rows plus a truth comment line."""
    if isinstance(target, str):
        with open(target, "w", encoding="utf-8") as fh:
            write_dense_csv(ds, fh)
        return
    i0, j0, eta = ds.truth
    target.write(f"# truth:i0={i0},j0={j0},eta={eta:g}\n")
    target.write(DENSE_HEADER + "\n")
    rows, cols = np.nonzero(ds.y)
    for r, c in zip(rows, cols):
        target.write(f"{r + 1},{c + 1},{ds.y[r, c]}\n")


def read_dense_csv(
    source: Union[str, IO[str]],
    bins: Optional[int] = None,
) -> tuple[WindowBatch, Optional[dict[str, float]]]:
    """Read a dense key,bin,count CSV back into a window batch.

    Returns the batch and the truth annotation when present. Keys with
    only zero counts in the file are dropped (they should not appear in
    a dense file anyway). With `bins` unset the bin count is inferred
    from the largest bin index.
    """
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            return read_dense_csv(fh, bins=bins)
    truth: Optional[dict[str, float]] = None
    cells: list[tuple[int, int, int]] = []
    header_seen = False
    for line_no, line in enumerate(source, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            if text.startswith("# truth:"):
                parts = dict(kv.split("=") for kv in text[len("# truth:"):].split(","))
                truth = {
                    "i0": int(parts["i0"]),
                    "j0": int(parts["j0"]),
                    "eta": float(parts["eta"]),
                }
            continue
        if not header_seen:
            if text != DENSE_HEADER:
                raise ValueError(f"line {line_no}: bad header, expected {DENSE_HEADER!r}")
            header_seen = True
            continue
        fields = text.split(",")
        if len(fields) != 3:
            raise ValueError(f"line {line_no}: expected key,bin,count")
        key, bin_index, count = (int(f) for f in fields)
        if bin_index < 1 or count < 0:
            raise ValueError(f"line {line_no}: bin must be >= 1 and count >= 0")
        cells.append((key, bin_index, count))
    if not header_seen:
        raise ValueError("missing header")
    max_bin = max((b for _, b, _ in cells), default=2)
    n_bins = bins if bins is not None else max(max_bin, 2)
    if max_bin > n_bins:
        raise ValueError(f"bin index {max_bin} exceeds configured {n_bins} bins")
    values: dict[int, np.ndarray] = {}
    for key, bin_index, count in cells:
        arr = values.get(key)
        if arr is None:
            arr = values[key] = np.zeros(n_bins, dtype=np.int64)
        arr[bin_index - 1] += count
    series = {
        key: BinSeries(key=key, values=arr)
        for key, arr in sorted(values.items())
        if arr.any()
    }
    batch = WindowBatch(window_index=0, start_time=0.0, bins=n_bins, series=series)
    return batch, truth
