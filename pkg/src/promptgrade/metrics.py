"""Agreement and correlation measures.

Quadratic weighted kappa for score agreement, Pearson correlation,
Krippendorff's alpha at interval level for multi-annotator reliability with
missing judgments, and mean/std aggregation for report columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class MetricError(ValueError):
    """Raised when a metric's preconditions are violated."""


class UndefinedCorrelationError(MetricError):
    """Pearson correlation is undefined (an input has zero variance)."""


@dataclass(frozen=True)
class RatingVector:
    """Integer category labels with an explicit declared category range.

    The declared range, not the observed labels, defines the contingency
    categories: unobserved categories get zero marginals.
    """

    values: tuple[int, ...]
    category_min: int
    category_max: int

    def __post_init__(self) -> None:
        if self.category_min > self.category_max:
            raise MetricError(
                f"category range inverted: {self.category_min}..{self.category_max}"
            )
        for v in self.values:
            if not self.category_min <= v <= self.category_max:
                raise MetricError(
                    f"value {v} outside category range "
                    f"{self.category_min}..{self.category_max}"
                )

    @property
    def n_categories(self) -> int:
        return self.category_max - self.category_min + 1


@dataclass(frozen=True)
class ReliabilityMatrix:
    """Annotator-by-item judgments; None marks a missing cell."""

    cells: tuple[tuple[float | None, ...], ...]

    def __post_init__(self) -> None:
        if len(self.cells) < 2:
            raise MetricError("reliability matrix needs at least 2 annotators")
        widths = {len(row) for row in self.cells}
        if len(widths) != 1:
            raise MetricError("reliability matrix rows have unequal lengths")
        if not self._pairable_columns():
            raise MetricError("reliability matrix needs an item with >= 2 judgments")

    def _pairable_columns(self) -> list[list[float]]:
        n_items = len(self.cells[0])
        columns = []
        for j in range(n_items):
            values = [row[j] for row in self.cells if row[j] is not None]
            if len(values) >= 2:
                columns.append(values)
        return columns


def qwk(a: RatingVector, b: RatingVector) -> float:
    """Quadratic weighted kappa between two rating vectors.

    kappa = 1 - sum(w * O) / sum(w * E), with w_ij = (i - j)^2 / (K - 1)^2,
    O the observed contingency matrix over the declared categories, and E the
    outer product of O's marginals normalized to O's total. Two constant,
    equal vectors have zero expected disagreement and score 1.0 by convention.
    """
    if len(a.values) != len(b.values):
        raise MetricError(f"length mismatch: {len(a.values)} vs {len(b.values)}")
    if len(a.values) < 2:
        raise MetricError("qwk needs at least 2 ratings")
    if (a.category_min, a.category_max) != (b.category_min, b.category_max):
        raise MetricError("qwk requires a shared category range")

    k = a.n_categories
    if k == 1:
        return 1.0

    observed = np.zeros((k, k), dtype=np.float64)
    lo = a.category_min
    for va, vb in zip(a.values, b.values):
        observed[va - lo, vb - lo] += 1.0

    idx = np.arange(k, dtype=np.float64)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (k - 1) ** 2

    total = observed.sum()
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / total

    # Summing the symmetrized matrices makes qwk(a, b) == qwk(b, a) bit-exact
    # (swapping arguments transposes O and E); the factor 2 cancels.
    expected_disagreement = float((weights * (expected + expected.T)).sum())
    if expected_disagreement == 0.0:
        return 1.0
    observed_disagreement = float((weights * (observed + observed.T)).sum())
    return 1.0 - observed_disagreement / expected_disagreement


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation; raises if either input has zero variance."""
    if len(x) != len(y):
        raise MetricError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise MetricError("pearson needs at least 2 points")
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance input")
    return float(dx @ dy) / math.sqrt(sxx * syy)


def krippendorff_alpha_interval(m: ReliabilityMatrix) -> float:
    """Krippendorff's alpha with interval distance delta(v, w) = (v - w)^2.

    alpha = 1 - D_o / D_e over pairable values (items judged by >= 2
    annotators). D_o averages within-item pair distances; D_e averages pair
    distances over all pairable values pooled. Returns 1.0 when every
    pairable value is identical (zero expected disagreement).
    """
    columns = m._pairable_columns()
    n = sum(len(values) for values in columns)

    observed = 0.0
    for values in columns:
        arr = np.asarray(values, dtype=np.float64)
        diffs = arr[:, None] - arr[None, :]
        observed += float((diffs**2).sum()) / (len(values) - 1)
    observed /= n

    pooled = np.asarray([v for values in columns for v in values], dtype=np.float64)
    diffs = pooled[:, None] - pooled[None, :]
    expected = float((diffs**2).sum()) / (n * (n - 1))

    if expected == 0.0:
        return 1.0
    return 1.0 - observed / expected


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and population (n-denominator) standard deviation.

    Population std because the aggregated groups are fully enumerated
    strategy grids, not samples.
    """
    if not values:
        raise MetricError("mean_std of empty sequence")
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    return mean, float(np.sqrt(((arr - mean) ** 2).mean()))
