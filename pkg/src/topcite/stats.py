"""Two-proportion z-tests and the equivalent 2x2 chi-square."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import DataError

Z_CRITICAL_05 = 1.96


@dataclass(frozen=True)
class ZTestResult:
    z: float
    x1: float
    n1: float
    x2: float | None = None
    n2: float | None = None
    left: str = ""
    right: str = ""

    @property
    def significant_05(self) -> bool:
        return abs(self.z) > Z_CRITICAL_05

    @property
    def p_value(self) -> float:
        """Two-sided normal tail probability."""
        return math.erfc(abs(self.z) / math.sqrt(2.0))


@dataclass(frozen=True)
class ChiSquareResult:
    chi2: float
    degrees_of_freedom: int = 1

    @property
    def p_value(self) -> float:
        # chi-square with one degree of freedom is a squared standard normal
        return math.erfc(math.sqrt(self.chi2 / 2.0))


def _check_counts(x, n, name):
    if n < 1:
        raise DataError(f"{name}: sample size must be at least 1")
    if not 0 <= x <= n:
        raise DataError(f"{name}: count {x} outside [0, {n}]")


def z_two_proportions(x1, n1, x2, n2, left: str = "", right: str = "") -> ZTestResult:
    """Pooled-variance z for the difference ``x1/n1 - x2/n2`` (no continuity correction)."""
    _check_counts(x1, n1, "first sample")
    _check_counts(x2, n2, "second sample")
    pooled = (x1 + x2) / (n1 + n2)
    if pooled <= 0 or pooled >= 1:
        raise DataError("degenerate pooled proportion")
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    return ZTestResult((x1 / n1 - x2 / n2) / se, x1, n1, x2, n2, left, right)


def z_one_sample(x, n, p0=0.01, label: str = "") -> ZTestResult:
    """z for an observed proportion ``x/n`` against an expected proportion ``p0``."""
    _check_counts(x, n, "sample")
    if not 0 < p0 < 1:
        raise DataError(f"expected proportion must lie in (0, 1), got {p0}")
    z = (x / n - p0) / math.sqrt(p0 * (1 - p0) / n)
    return ZTestResult(z, x, n, left=label, right="expected")


def chi_square_2x2(x1, n1, x2, n2) -> ChiSquareResult:
    """Pearson chi-square of (in top, not in top) x (set 1, set 2)."""
    _check_counts(x1, n1, "first sample")
    _check_counts(x2, n2, "second sample")
    observed = ((x1, n1 - x1), (x2, n2 - x2))
    total = n1 + n2
    col = (x1 + x2, total - x1 - x2)
    if col[0] == 0 or col[1] == 0:
        raise DataError("zero margin in 2x2 table")
    chi2 = 0.0
    for row_obs, row_n in zip(observed, (n1, n2)):
        for o, c in zip(row_obs, col):
            e = row_n * c / total
            chi2 += (o - e) ** 2 / e
    return ChiSquareResult(chi2)


def null_rejection_rate(
    n1: int, n2: int, p: float, draws: int = 1000, seed: int = 0
) -> float:
    """Share of z-tests rejecting at 5% when both samples share proportion ``p``.

    Draws whose pooled proportion is degenerate are redrawn.
    """
    rng = np.random.default_rng(seed)
    rejected = done = 0
    while done < draws:
        x1 = int(rng.binomial(n1, p))
        x2 = int(rng.binomial(n2, p))
        if x1 + x2 in (0, n1 + n2):
            continue
        done += 1
        rejected += z_two_proportions(x1, n1, x2, n2).significant_05
    return rejected / draws
