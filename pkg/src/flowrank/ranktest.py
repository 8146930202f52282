"""Rank-based change-point test for censored count series.

A window of P bins yields pairs (x(t), observed(t)) where a set flag
means the true count was retained and a cleared flag means x(t) is only
an upper bound. Every ordered bin pair is scored with a censoring-aware
sign comparison; the per-bin score sums are accumulated into a
normalized partial-sum path whose maximum absolute value is the test
statistic. When the bins are i.i.d. the statistic converges (as P grows)
in distribution to the supremum of the absolute value of a Brownian
bridge, whose tail provides the asymptotic p-value.

Because only pairwise order comparisons enter the statistic, any
strictly increasing transform of the values leaves every output
bit-identical, and no distributional assumptions on the counts are
needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Alarm, DetectionMethod

# Truncation tolerance for the alternating tail series.
_TERM_TOL = 1e-12
# Below this statistic the tail probability is 1 within _TERM_TOL while
# the alternating series would need O(1/b) terms; short-circuit to 1.
_SMALL_STAT = 0.2
_MAX_TERMS = 100


@dataclass(frozen=True)
class CensoredSeries:
    """Per-key series (x(t), observed(t)).

    A cleared `observed` flag marks a bin whose value is censored from
    above: x(t) is then an upper bound for the true count.
    """

    key: int
    x: np.ndarray
    observed: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.float64)
        obs = np.asarray(self.observed, dtype=bool)
        if x.ndim != 1 or obs.shape != x.shape:
            raise ValueError("x and observed must be 1-d sequences of equal length")
        if x.size and x.min() < 0:
            raise ValueError("values must be nonnegative")
        x.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "observed", obs)


@dataclass(frozen=True)
class TestOutcome:
    """Result of the change-point test on one series.

    `u_scores` holds the per-bin score sums (integers); `s_path` is
    their normalized partial-sum path, whose last entry is exactly
    zero. `change_bin` is the 1-based bin attaining the maximum
    absolute path value, smallest such bin under ties. A degenerate
    outcome means every pairwise score was zero (e.g. a constant
    series), in which case no alarm is possible.
    """

    w_stat: float
    p_value: float
    change_bin: int
    s_path: np.ndarray
    u_scores: np.ndarray
    degenerate: bool = False


def score_pair(x_s: float, s_observed: bool, x_t: float, t_observed: bool) -> int:
    """Censoring-aware sign comparison of two bins.

    +1 when the first value is strictly larger and actually observed,
    -1 when it is strictly smaller and the second value is observed,
    0 otherwise. A censored value is only an upper bound, so it can
    never witness being the larger one.
    """
    if s_observed and x_s > x_t:
        return 1
    if t_observed and x_s < x_t:
        return -1
    return 0


def pvalue(b: float) -> float:
    """Tail probability of the supremum of |Brownian bridge| beyond b.

    Evaluated by the alternating exponential series, truncated once a
    term drops below 1e-12; the result is clamped to [0, 1]. For b
    below 0.2 the tail is 1 within that tolerance and 1.0 is returned
    directly (this also covers the b = 0 convention).
    """
    if b < 0:
        raise ValueError("statistic must be nonnegative")
    if b < _SMALL_STAT:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, _MAX_TERMS + 1):
        term = math.exp(-2.0 * j * j * b * b)
        total += sign * term
        if term < _TERM_TOL:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def _outcome(x: np.ndarray, observed: np.ndarray) -> TestOutcome:
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two bins")
    xs = x[:, None]
    xt = x[None, :]
    above = ((xs > xt) & observed[:, None]).astype(np.int64)
    below = ((xs < xt) & observed[None, :]).astype(np.int64)
    u = (above - below).sum(axis=1)
    u.setflags(write=False)
    denom = int((u * u).sum())
    if denom == 0:
        path = np.zeros(n)
        path.setflags(write=False)
        return TestOutcome(0.0, 1.0, 1, path, u, degenerate=True)
    path = np.cumsum(u) / math.sqrt(denom)
    path.setflags(write=False)
    abs_path = np.abs(path)
    idx = int(abs_path.argmax())  # argmax returns the first maximum
    w = float(abs_path[idx])
    return TestOutcome(w, pvalue(w), idx + 1, path, u)


def statistic(series: CensoredSeries) -> TestOutcome:
    """Run the censored rank test on one series."""
    return _outcome(series.x, series.observed)


def statistic_uncensored(values: Sequence[float] | np.ndarray) -> TestOutcome:
    """Run the rank test with every bin treated as observed.

    Identical to `statistic` on a series whose flags are all set; the
    pairwise score reduces to a plain sign comparison.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("values must be one-dimensional")
    return _outcome(x, np.ones(x.shape[0], dtype=bool))


def detect(
    series: CensoredSeries,
    level_alpha: float,
    *,
    window_index: int = 0,
    method: DetectionMethod = DetectionMethod.TOPRANK,
) -> Optional[Alarm]:
    """Alarm when the series' p-value falls below the decision level."""
    if not 0.0 < level_alpha < 1.0:
        raise ValueError("level_alpha must be in (0, 1)")
    out = statistic(series)
    if out.degenerate or not out.p_value < level_alpha:
        return None
    return Alarm(
        key=series.key,
        window_index=window_index,
        change_bin=out.change_bin,
        p_value=out.p_value,
        statistic=out.w_stat,
        method=method,
    )
