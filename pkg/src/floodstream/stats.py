"""Statistics helpers for benchmark reports."""

from __future__ import annotations

import math
from typing import Sequence

from scipy.stats import t as student_t


class StatsError(ValueError):
    pass


def _mean_var(sample: Sequence[float]) -> tuple[float, float]:
    n = len(sample)
    mean = sum(sample) / n
    var = sum((x - mean) ** 2 for x in sample) / (n - 1)
    return mean, var


def welch_t_test(
    sample_a: Sequence[float], sample_b: Sequence[float]
) -> tuple[float, float]:
    """Welch's unequal-variance t-test, two-sided.

    Returns ``(t, p)`` with the p-value taken from the Student-t survival
    function at the Welch-Satterthwaite degrees of freedom.  Each sample
    needs at least two values and nonzero variance; identical samples give
    ``t = 0, p = 1``.
    """
    na, nb = len(sample_a), len(sample_b)
    if na < 2 or nb < 2:
        raise StatsError("each sample needs at least two values")
    mean_a, var_a = _mean_var(sample_a)
    mean_b, var_b = _mean_var(sample_b)
    if var_a == 0.0 or var_b == 0.0:
        raise StatsError("degenerate variance: sample has no spread")

    se_a = var_a / na
    se_b = var_b / nb
    se = math.sqrt(se_a + se_b)
    t_stat = (mean_a - mean_b) / se
    dof = (se_a + se_b) ** 2 / (
        se_a**2 / (na - 1) + se_b**2 / (nb - 1)
    )
    p = 2.0 * float(student_t.sf(abs(t_stat), dof))
    return t_stat, min(p, 1.0)
