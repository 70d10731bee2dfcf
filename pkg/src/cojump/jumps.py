"""Intraday jump localization by thresholding first-scale wavelet coefficients.

A day is processed per instrument: the aligned level-1 coefficients of
the return series are compared against a universal threshold estimated
from that same day's coefficients, flagged returns are taken as jump
sizes, and the jump-adjusted series keeps the diffusive part only.
"""

from __future__ import annotations

import datetime as dt
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

MAD_NORMAL = 0.6745  # median absolute deviation of a standard normal


@dataclass
class JumpSeries:
    """Detected jumps of one instrument on one day.

    jump_sizes is a length-N vector in log-return units, zero where no
    jump was flagged; jump_indices is the sorted index set; degenerate
    marks days whose threshold collapsed to zero (detection skipped).
    """

    n: int
    jump_indices: np.ndarray
    jump_sizes: np.ndarray
    threshold: float
    degenerate: bool = False
    date: object = None
    instrument: str = ""

    def __post_init__(self):
        self.jump_indices = np.asarray(self.jump_indices, dtype=int)
        self.jump_sizes = np.asarray(self.jump_sizes, dtype=float)
        if self.jump_sizes.shape != (self.n,):
            raise ValueError("jump_sizes must have length n")
        flagged = set(self.jump_indices.tolist())
        nonzero = set(np.flatnonzero(self.jump_sizes).tolist())
        if flagged != nonzero:
            raise ValueError("jump_sizes must be nonzero exactly on jump_indices")

    @property
    def count(self) -> int:
        return int(self.jump_indices.size)


def universal_threshold(w1: np.ndarray) -> float:
    """Universal threshold xi = sqrt(2) median|W1| sqrt(2 ln N) / 0.6745.

    The median runs over all N coefficients of the day; the natural
    logarithm is used. An all-zero coefficient vector gives xi = 0,
    which callers must treat as a degenerate day.
    """
    w1 = np.asarray(w1, dtype=float)
    n = w1.size
    if n < 2:
        raise ValueError("need at least 2 coefficients")
    return math.sqrt(2.0) * float(np.median(np.abs(w1))) * math.sqrt(2.0 * math.log(n)) / MAD_NORMAL


def detect_jumps(
    returns: np.ndarray,
    w1: np.ndarray,
    threshold: float,
    date=None,
    instrument: str = "",
) -> JumpSeries:
    """Flag index i as a jump iff |w1[i]| > threshold (strict).

    The jump size at a flagged index is the raw return there. A zero
    threshold marks the day degenerate and no index is flagged.
    """
    returns = np.asarray(returns, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    if returns.shape != w1.shape:
        raise ValueError("returns and coefficients must have the same length")
    n = returns.size
    sizes = np.zeros(n)
    if threshold == 0.0:
        return JumpSeries(
            n=n,
            jump_indices=np.empty(0, dtype=int),
            jump_sizes=sizes,
            threshold=0.0,
            degenerate=True,
            date=date,
            instrument=instrument,
        )
    idx = np.flatnonzero(np.abs(w1) > threshold)
    # An exactly zero return carries no jump size even if its coefficient
    # clears the threshold (possible for filters wider than Haar).
    idx = idx[returns[idx] != 0.0]
    sizes[idx] = returns[idx]
    return JumpSeries(
        n=n,
        jump_indices=idx,
        jump_sizes=sizes,
        threshold=float(threshold),
        degenerate=False,
        date=date,
        instrument=instrument,
    )


def adjust_returns(returns: np.ndarray, jumps: JumpSeries) -> np.ndarray:
    """Jump-adjusted series: flagged positions become exactly zero."""
    returns = np.asarray(returns, dtype=float)
    if returns.size != jumps.n:
        raise ValueError("returns length does not match the jump series")
    adjusted = returns.copy()
    adjusted[jumps.jump_indices] = 0.0
    return adjusted


def cojump_variation(jumps_1: JumpSeries, jumps_2: JumpSeries):
    """Co-jump variation of a pair and the shared jump indices.

    CJ is the sum over the intersection of the two index sets of the
    signed size products; disjoint jumps contribute exactly zero.
    """
    if jumps_1.n != jumps_2.n:
        raise ValueError("jump series live on different grids")
    common = np.intersect1d(jumps_1.jump_indices, jumps_2.jump_indices)
    cj = float((jumps_1.jump_sizes[common] * jumps_2.jump_sizes[common]).sum())
    return cj, common


def realized_covariance(returns_1: np.ndarray, returns_2: np.ndarray) -> float:
    """Realized covariance sum_i r1_i r2_i over one day."""
    r1 = np.asarray(returns_1, dtype=float)
    r2 = np.asarray(returns_2, dtype=float)
    if r1.shape != r2.shape:
        raise ValueError("return series lengths differ")
    return float(np.dot(r1, r2))


@dataclass
class CoJumpMatrix:
    """Symmetric co-jump variation across a set of instruments on one day.

    ``values[a, b]`` is the signed size-product sum over indices where both
    series jump; the diagonal is each series' summed squared jump sizes.
    ``shared[(a, b)]`` (a < b) holds the common grid indices for that pair.
    """

    instruments: tuple[str, ...]
    values: np.ndarray
    shared: dict[tuple[int, int], np.ndarray]
    date: dt.date | None = None

    def __post_init__(self) -> None:
        d = len(self.instruments)
        if self.values.shape != (d, d):
            raise ValueError("co-jump matrix shape does not match instruments")
        if not np.array_equal(self.values, self.values.T):
            raise ValueError("co-jump matrix must be symmetric")

    def pair(self, name_1: str, name_2: str) -> float:
        a = self.instruments.index(name_1)
        b = self.instruments.index(name_2)
        return float(self.values[a, b])

    def common_indices(self, name_1: str, name_2: str) -> np.ndarray:
        a = self.instruments.index(name_1)
        b = self.instruments.index(name_2)
        if a == b:
            raise ValueError("common indices are defined for distinct instruments")
        return self.shared[(min(a, b), max(a, b))]


def cojump_matrix(jump_series: Sequence[JumpSeries]) -> CoJumpMatrix:
    """Assemble the pairwise co-jump variation matrix for one day."""
    if not jump_series:
        raise ValueError("at least one jump series is required")
    n = jump_series[0].n
    dates = {js.date for js in jump_series}
    if len(dates) != 1:
        raise ValueError("jump series must come from a single day")
    d = len(jump_series)
    values = np.zeros((d, d))
    shared: dict[tuple[int, int], np.ndarray] = {}
    for a, js in enumerate(jump_series):
        if js.n != n:
            raise ValueError("jump series live on different grids")
        values[a, a] = float((js.jump_sizes**2).sum())
        for b in range(a + 1, d):
            cj, common = cojump_variation(js, jump_series[b])
            values[a, b] = values[b, a] = cj
            shared[(a, b)] = common
    names = tuple(js.instrument for js in jump_series)
    return CoJumpMatrix(instruments=names, values=values, shared=shared, date=dates.pop())
