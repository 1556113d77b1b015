"""Summary statistics over per-cause accuracy rates.

Conventions are pinned here because names alone do not determine them:
quartiles use inclusive linear interpolation over the order statistics
(h = (n-1)q), the median is the middle order statistic (mean of the two
middles for even n, which the same interpolation yields at q = 0.5), and the
standard deviation is the population form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..errors import EmptyInput


@dataclass(frozen=True)
class StatsSummary:
    mean: float
    median: float
    iqr: float
    sd: float

    def to_json(self) -> dict:
        return {"mean": self.mean, "median": self.median, "iqr": self.iqr, "sd": self.sd}


def quantile_inclusive(sorted_values: Sequence[float], q: float) -> float:
    n = len(sorted_values)
    if n == 1:
        return sorted_values[0]
    h = (n - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    frac = h - lo
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo])


def compute_stats(values: Sequence[float]) -> StatsSummary:
    if not values:
        raise EmptyInput("cannot summarize an empty sequence")
    xs = sorted(values)
    n = len(xs)
    mean = sum(xs) / n
    median = quantile_inclusive(xs, 0.5)
    iqr = quantile_inclusive(xs, 0.75) - quantile_inclusive(xs, 0.25)
    sd = math.sqrt(sum((x - mean) ** 2 for x in xs) / n)
    return StatsSummary(mean=mean, median=median, iqr=iqr, sd=sd)
