"""Axis selection and greedy coverage-driven bucketization."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import IntegratedSample, NUMERIC, frequency_profile
from .errors import ConfigError, EmptyInputError, NoEligibleAxisError, SchemaError
from .species import SpeciesEstimate

AXIS_STRATEGIES = ("correlation", "variance", "entropy")


@dataclass(frozen=True)
class BucketizeConfig:
    theta: float = 0.5
    axis_strategy: object = "correlation"  # one of AXIS_STRATEGIES or a feature index

    def __post_init__(self):
        validate_theta(self.theta)
        s = self.axis_strategy
        if not (s in AXIS_STRATEGIES or (isinstance(s, int) and not isinstance(s, bool))):
            raise ConfigError(f"unknown axis strategy {s!r}")


def validate_theta(theta) -> float:
    try:
        theta = float(theta)
    except (TypeError, ValueError):
        raise ConfigError(f"theta must be a number, got {theta!r}") from None
    if not 0.0 < theta <= 1.0:
        raise ConfigError(f"theta must lie in (0, 1], got {theta}")
    return theta


@dataclass(frozen=True)
class Bucket:
    records: tuple
    lo: float
    hi: float
    coverage: float
    low_coverage: bool = False
    estimate: SpeciesEstimate | None = None
    profile: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.profile is None and self.records:
            object.__setattr__(self, "profile", frequency_profile(self.records))

    def __len__(self):
        return len(self.records)

    def with_estimate(self, estimate: SpeciesEstimate | None) -> "Bucket":
        return replace(self, estimate=estimate)

    @property
    def unknown_count(self) -> int:
        return 0 if self.estimate is None else self.estimate.unknown_count

    def to_dict(self) -> dict:
        p = self.profile
        d = {
            "lo": self.lo,
            "hi": self.hi,
            "size": len(self.records),
            "c": p.c,
            "n": p.n,
            "f1": p.f1,
            "coverage": self.coverage,
            "low_coverage": self.low_coverage,
        }
        if self.estimate is not None:
            e = self.estimate
            d.update(
                coverage_hat=e.coverage_hat,
                cv_squared=e.cv_squared,
                d_chao92=e.d_chao92,
                unknown_count=e.unknown_count,
            )
        else:
            d.update(coverage_hat=None, cv_squared=None, d_chao92=None, unknown_count=0)
        return d


@dataclass(frozen=True)
class BucketSet:
    axis: int
    theta: float
    buckets: tuple

    def __len__(self):
        return len(self.buckets)

    def __iter__(self):
        return iter(self.buckets)

    def __getitem__(self, i):
        return self.buckets[i]

    def unknown_counts(self) -> list:
        return [b.unknown_count for b in self.buckets]

    def to_dict(self, axis_name: str | None = None) -> dict:
        return {
            "axis": self.axis,
            "axis_name": axis_name,
            "theta": self.theta,
            "buckets": [b.to_dict() for b in self.buckets],
        }


def _pearson_abs(a: np.ndarray, b: np.ndarray) -> float | None:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    if den == 0.0:
        return None
    return abs(float(a @ b) / den)


def _entropy(values: np.ndarray) -> float:
    _, counts = np.unique(values, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def axis_scores(sample: IntegratedSample, strategy="correlation", target_class=None) -> dict:
    """Score every eligible (numeric, non-constant) feature under ``strategy``.

    For a classification sample the correlation target is the indicator of
    ``target_class``; with ``target_class=None`` the best class is used.
    """
    schema = sample.schema
    numeric = schema.numeric_indices
    if not numeric:
        raise NoEligibleAxisError("no numeric feature to bucketize on")
    X = sample.feature_matrix(numeric)
    scores = {}
    if strategy == "correlation":
        y = sample.labels()
        if schema.is_classification:
            classes = sorted(set(y)) if target_class is None else [target_class]
            targets = [(y == c).astype(float) for c in classes]
        else:
            targets = [y]
        for col, idx in enumerate(numeric):
            x = X[:, col]
            if np.ptp(x) == 0:
                continue
            rs = [_pearson_abs(x, t) for t in targets]
            rs = [r for r in rs if r is not None]
            scores[idx] = max(rs) if rs else 0.0
    elif strategy == "variance":
        for col, idx in enumerate(numeric):
            v = float(X[:, col].var())
            if v > 0:
                scores[idx] = v
    elif strategy == "entropy":
        for col, idx in enumerate(numeric):
            if np.ptp(X[:, col]) > 0:
                scores[idx] = _entropy(X[:, col])
    else:
        raise ConfigError(f"unknown axis strategy {strategy!r}")
    return scores


def select_axis(sample: IntegratedSample, strategy="correlation", target_class=None) -> int:
    """Pick the bucketization feature; ties go to the lowest index.

    An integer ``strategy`` pins the axis. When every numeric feature is
    constant there is nothing to rank and the first numeric feature is used.
    """
    schema = sample.schema
    if isinstance(strategy, int) and not isinstance(strategy, bool):
        if not 0 <= strategy < schema.d or schema.feature_kinds[strategy] != NUMERIC:
            raise NoEligibleAxisError(f"feature {strategy} is not a numeric feature")
        return strategy
    if not sample.records:
        raise EmptyInputError("cannot select an axis on an empty sample")
    scores = axis_scores(sample, strategy, target_class)
    if not scores:
        return schema.numeric_indices[0]
    best = max(scores.values())
    return min(i for i, s in scores.items() if s == best)


def dynamic_buckets(sample: IntegratedSample, v: int, theta: float) -> BucketSet:
    """Greedy ascending scan that closes a bucket once its coverage reaches theta.

    The coverage test runs *before* the popped record is placed: a bucket
    with coverage >= theta is closed and the record opens the next one. An
    empty bucket has coverage 0. The trailing bucket is kept if it reached
    theta, otherwise folded into the previous bucket.
    """
    theta = validate_theta(theta)
    if not sample.records:
        raise EmptyInputError("cannot bucketize an empty sample")
    if not 0 <= v < sample.schema.d or sample.schema.feature_kinds[v] != NUMERIC:
        raise SchemaError(f"axis {v} is not a numeric feature")

    order = sorted(range(len(sample.records)), key=lambda i: sample.records[i].features[v])
    groups = []
    current = []
    counts = Counter()
    singletons = 0

    def coverage():
        return 1.0 - singletons / len(current) if current else 0.0

    for i in order:
        rec = sample.records[i]
        if coverage() >= theta:
            groups.append((current, coverage()))
            current, counts, singletons = [], Counter(), 0
        current.append(rec)
        k = rec.dedup_key
        counts[k] += 1
        if counts[k] == 1:
            singletons += 1
        elif counts[k] == 2:
            singletons -= 1

    tail_cov = coverage()
    if tail_cov >= theta or not groups:
        groups.append((current, tail_cov))
    else:
        prev, _ = groups.pop()
        merged = prev + current
        profile = frequency_profile(merged)
        groups.append((merged, 1.0 - profile.f1 / profile.n))

    buckets = []
    for members, cov in groups:
        axis_values = [r.features[v] for r in members]
        buckets.append(
            Bucket(
                records=tuple(members),
                lo=float(min(axis_values)),
                hi=float(max(axis_values)),
                coverage=cov,
                low_coverage=cov < theta,
            )
        )
    return BucketSet(axis=v, theta=theta, buckets=tuple(buckets))
