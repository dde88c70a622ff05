"""Sample-coverage species estimation (Good-Turing coverage, Chao92).

Given the multiplicity histogram of an integrated sample, estimate how many
distinct items the underlying population holds that were never observed.
"""
from __future__ import annotations

from dataclasses import dataclass

from .dataset import FrequencyProfile
from .errors import EmptyInputError, InsufficientDataError

#: floor applied to the coverage estimate when every observation is a singleton
MIN_COVERAGE = 0.01


@dataclass(frozen=True)
class SpeciesEstimate:
    c: int
    n: int
    f1: int
    coverage_hat: float
    cv_squared: float
    d_chao92: float
    unknown_count: int
    low_coverage: bool = False

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "n": self.n,
            "f1": self.f1,
            "coverage_hat": self.coverage_hat,
            "cv_squared": self.cv_squared,
            "d_chao92": self.d_chao92,
            "unknown_count": self.unknown_count,
            "low_coverage": self.low_coverage,
        }


def raw_coverage(profile: FrequencyProfile) -> float:
    """Unclamped Good-Turing coverage ``1 - f1/n``; 0 for an empty profile."""
    if profile.n == 0:
        return 0.0
    return 1.0 - profile.f1 / profile.n


def good_turing_coverage(profile: FrequencyProfile) -> float:
    """Good-Turing sample coverage ``1 - f1/n``, floored at ``MIN_COVERAGE``."""
    if profile.n < 1:
        raise EmptyInputError("coverage of an empty profile is undefined")
    return max(raw_coverage(profile), MIN_COVERAGE)


def is_low_coverage(profile: FrequencyProfile) -> bool:
    return profile.n >= 1 and raw_coverage(profile) < MIN_COVERAGE


def chao92(profile: FrequencyProfile) -> SpeciesEstimate:
    r"""Chao92 estimate of the total number of distinct items.

    .. math::

       \hat D = \frac{c}{\hat C} + \frac{f_1 \hat\gamma^2}{\hat C}, \qquad
       \hat\gamma^2 = \max\Big(\frac{c}{\hat C}
           \frac{\sum_i i(i-1) f_i}{n(n-1)} - 1,\ 0\Big)

    ``unknown_count`` is ``round(D) - c`` (half-to-even), floored at zero.
    """
    n, c, f1 = profile.n, profile.c, profile.f1
    if n < 2:
        raise InsufficientDataError(f"chao92 needs at least 2 observations, got {n}")
    coverage = good_turing_coverage(profile)
    base = c / coverage
    pair_sum = sum(i * (i - 1) * fi for i, fi in profile.f.items())
    cv2 = max(base * pair_sum / (n * (n - 1)) - 1.0, 0.0)
    d_hat = base + f1 * cv2 / coverage
    unknown = max(0, int(round(d_hat)) - c)
    return SpeciesEstimate(
        c=c,
        n=n,
        f1=f1,
        coverage_hat=coverage,
        cv_squared=cv2,
        d_chao92=d_hat,
        unknown_count=unknown,
        low_coverage=is_low_coverage(profile),
    )
