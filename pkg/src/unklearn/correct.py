"""Training-set correction from per-bucket unknown counts.

Three modes: ``weight`` (every record in a bucket gets the bucket's share of
the total unknown count), ``kde`` (sample synthetic records from a Gaussian
kernel density fitted to each bucket), and ``smote`` (interpolate between a
record and one of its nearest neighbours inside the bucket).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .bucketize import BucketSet, BucketizeConfig, dynamic_buckets, select_axis
from .dataset import IntegratedSample, Record, deduplicate, unique_records
from .errors import ConfigError, EmptyInputError, InsufficientDataError, SynthesisSkipped
from .species import chao92

log = logging.getLogger(__name__)

MODES = ("weight", "kde", "smote")


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    seed: int = 0
    # draw an independent interpolation factor per dimension instead of one per record
    per_dimension: bool = False

    def __post_init__(self):
        if int(self.k) < 1:
            raise ConfigError(f"SMOTE k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class KdeConfig:
    bandwidth: object = "silverman"  # "silverman", a float, or one float per dimension
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "silverman":
                raise ConfigError(f"unknown bandwidth rule {self.bandwidth!r}")
        elif np.any(np.asarray(self.bandwidth, dtype=float) < 0):
            raise ConfigError("fixed bandwidths must be >= 0")


@dataclass
class CorrectionOutput:
    mode: str
    records: tuple
    synthetic: np.ndarray
    weights: np.ndarray | None = None
    bucket_sets: list = field(default_factory=list)
    bucket_weights: list = field(default_factory=list)
    synth_counts: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    uniform_fallback: bool = False

    def sample(self, schema) -> IntegratedSample:
        return IntegratedSample(self.records, schema)

    @property
    def n_synthetic(self) -> int:
        return int(self.synthetic.sum())


# ---------------------------------------------------------------- estimation


def estimate_bucket_set(buckets: BucketSet) -> BucketSet:
    """Attach a Chao92 estimate to every bucket with at least two records."""
    out = []
    for b in buckets:
        try:
            est = chao92(b.profile)
        except InsufficientDataError:
            est = None
        out.append(b.with_estimate(est))
    return replace(buckets, buckets=tuple(out))


def estimate_buckets(sample: IntegratedSample, config: BucketizeConfig) -> list:
    """Axis selection, bucketization and estimation; one entry per partition.

    Regression samples give a single ``(None, BucketSet)`` entry. For
    classification every class is processed on its own, with the axis chosen
    by correlation against that class's indicator over the whole sample.
    """
    if not sample.records:
        raise EmptyInputError("cannot estimate on an empty sample")
    schema = sample.schema
    if not schema.is_classification:
        v = select_axis(sample, config.axis_strategy)
        return [(None, estimate_bucket_set(dynamic_buckets(sample, v, config.theta)))]
    out = []
    for cls in sorted({r.label for r in sample.records}):
        part = sample.replace_records(r for r in sample.records if r.label == cls)
        v = select_axis(sample, config.axis_strategy, target_class=cls)
        out.append((cls, estimate_bucket_set(dynamic_buckets(part, v, config.theta))))
    return out


# ----------------------------------------------------------------- weighting


def bucket_weights(unknown_counts) -> tuple[list, bool]:
    """Normalized bucket weights and whether the uniform fallback fired."""
    counts = [int(u) for u in unknown_counts]
    if not counts:
        raise EmptyInputError("no buckets to weight")
    total = sum(counts)
    if total == 0:
        return [1.0 / len(counts)] * len(counts), True
    return [u / total for u in counts], False


def weight_by_unknown_count(bucket_sets) -> CorrectionOutput:
    """Weight every distinct bucket member by its bucket's unknown share.

    ``bucket_sets`` is a BucketSet or a list of them (one per class); the
    normalization runs over all buckets together so the bucket weights sum
    to one.
    """
    if isinstance(bucket_sets, BucketSet):
        bucket_sets = [bucket_sets]
    flat = [b for bs in bucket_sets for b in bs]
    weights_per_bucket, fallback = bucket_weights([b.unknown_count for b in flat])
    records, weights, seen = [], [], set()
    for b, w in zip(flat, weights_per_bucket):
        # duplicates split across a bucket boundary keep their first bucket
        for r in unique_records(b.records):
            if r.dedup_key not in seen:
                seen.add(r.dedup_key)
                records.append(r)
                weights.append(w)
    if fallback:
        log.warning("all unknown counts are zero; using uniform bucket weights")
    return CorrectionOutput(
        mode="weight",
        records=tuple(records),
        synthetic=np.zeros(len(records), dtype=bool),
        weights=np.array(weights, dtype=float),
        bucket_sets=list(bucket_sets),
        bucket_weights=weights_per_bucket,
        uniform_fallback=fallback,
    )


# ----------------------------------------------------------------- synthesis


def _numeric_layout(record: Record):
    """Indices of numeric features and whether the label is numeric."""
    idx = [i for i, v in enumerate(record.features) if not isinstance(v, str)]
    return idx, not isinstance(record.label, str)


def _joint_matrix(records, idx, numeric_label):
    rows = []
    for r in records:
        row = [r.features[i] for i in idx]
        if numeric_label:
            row.append(r.label)
        rows.append(row)
    return np.array(rows, dtype=float).reshape(len(records), len(idx) + numeric_label)


def _rebuild(template: Record, idx, numeric_label, values) -> Record:
    feats = list(template.features)
    for i, v in zip(idx, values):
        feats[i] = float(v)
    label = float(values[len(idx)]) if numeric_label else template.label
    return Record(tuple(feats), label)


def silverman_bandwidth(data: np.ndarray) -> np.ndarray:
    """Per-dimension normal-reference bandwidth for a Gaussian product kernel."""
    m, d = data.shape
    sigma = data.std(axis=0, ddof=1) if m > 1 else np.zeros(d)
    factor = (4.0 / (d + 2)) ** (1.0 / (d + 4)) * m ** (-1.0 / (d + 4))
    return sigma * factor


def kde_synthesize(records, l_b: int, cfg: KdeConfig = KdeConfig()) -> list:
    """Draw ``l_b`` records from a Gaussian KDE over the distinct records.

    The density is fitted jointly over numeric features and a numeric label.
    Categorical fields are copied from the kernel centre that was picked.
    """
    if l_b < 0:
        raise ConfigError(f"synthesis count must be >= 0, got {l_b}")
    if l_b == 0:
        return []
    distinct = unique_records(records)
    if len(distinct) < 2:
        raise SynthesisSkipped(f"KDE needs >= 2 distinct records, got {len(distinct)}")
    idx, numeric_label = _numeric_layout(distinct[0])
    data = _joint_matrix(distinct, idx, numeric_label)
    if isinstance(cfg.bandwidth, str):
        h = silverman_bandwidth(data)
    else:
        h = np.broadcast_to(np.asarray(cfg.bandwidth, dtype=float), (data.shape[1],))

    rng = np.random.default_rng(cfg.seed)
    centres = rng.integers(0, len(distinct), size=l_b)
    noise = rng.standard_normal((l_b, data.shape[1])) * h
    values = data[centres] + noise
    return [_rebuild(distinct[c], idx, numeric_label, v) for c, v in zip(centres, values)]


class _NeighbourIndex:
    """Brute-force kNN over z-scored numeric features, computed lazily per row."""

    def __init__(self, features: np.ndarray, k: int):
        mu = features.mean(axis=0)
        sd = features.std(axis=0)
        sd[sd == 0] = 1.0
        self.z = (features - mu) / sd
        self.k = k
        self._cache = {}

    def neighbours(self, i: int) -> np.ndarray:
        if i not in self._cache:
            dist = np.sum((self.z - self.z[i]) ** 2, axis=1)
            dist[i] = np.inf
            self._cache[i] = np.argsort(dist, kind="stable")[: self.k]
        return self._cache[i]


def smote_synthesize(records, l: int, cfg: SmoteConfig = SmoteConfig()) -> list:
    """Generate ``l`` records by interpolating towards a random near neighbour.

    Each synthetic record is ``x_i + g * (x_j - x_i)`` with ``x_i`` a uniformly
    drawn distinct record, ``x_j`` one of its ``k`` nearest neighbours and
    ``g ~ U(0, 1)``. A numeric label is interpolated with the same ``g``;
    categorical fields come from ``x_i``.
    """
    if l < 0:
        raise ConfigError(f"synthesis count must be >= 0, got {l}")
    if l == 0:
        return []
    distinct = unique_records(records)
    m = len(distinct)
    if m < 2:
        raise SynthesisSkipped(f"SMOTE needs >= 2 distinct records, got {m}")
    if cfg.k >= m:
        raise ConfigError(f"SMOTE k={cfg.k} must be smaller than the {m} distinct records")
    idx, numeric_label = _numeric_layout(distinct[0])
    data = _joint_matrix(distinct, idx, numeric_label)
    index = _NeighbourIndex(data[:, : len(idx)], cfg.k)

    rng = np.random.default_rng(cfg.seed)
    dims = data.shape[1]
    out = []
    for _ in range(l):
        i = int(rng.integers(m))
        j = int(rng.choice(index.neighbours(i)))
        g = rng.random(dims) if cfg.per_dimension else rng.random()
        u = data[i] + g * (data[j] - data[i])
        out.append(_rebuild(distinct[i], idx, numeric_label, u))
    return out


# ------------------------------------------------------------- orchestration


def apply_correction(
    sample: IntegratedSample,
    mode: str,
    bucketize: BucketizeConfig = BucketizeConfig(),
    kde: KdeConfig = KdeConfig(),
    smote: SmoteConfig = SmoteConfig(),
    bucket_sets=None,
) -> CorrectionOutput:
    """Run estimation (unless ``bucket_sets`` is given) and the chosen correction.

    Synthesis mode output is the deduplicated sample followed by the
    synthetic records. Bucket ``b`` (counted across all classes) draws from
    its own RNG stream seeded with ``seed + b``. A SMOTE ``k`` too large for a
    bucket is reduced to the bucket's distinct count minus one.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown correction mode {mode!r}")
    if bucket_sets is None:
        bucket_sets = [bs for _, bs in estimate_buckets(sample, bucketize)]
    if mode == "weight":
        return weight_by_unknown_count(bucket_sets)

    base = deduplicate(sample).records
    synthetic, counts, skipped = [], [], []
    b_index = 0
    for bs in bucket_sets:
        for b in bs:
            l_b = b.unknown_count
            members = unique_records(b.records)
            try:
                if mode == "kde":
                    new = kde_synthesize(members, l_b, replace(kde, seed=kde.seed + b_index))
                else:
                    k = min(smote.k, max(len(members) - 1, 1))
                    cfg = replace(smote, k=k, seed=smote.seed + b_index)
                    new = smote_synthesize(members, l_b, cfg)
            except SynthesisSkipped:
                log.info("bucket %d skipped: %d distinct records", b_index, len(members))
                skipped.append(b_index)
                new = []
            synthetic.extend(new)
            counts.append(len(new))
            b_index += 1

    records = tuple(base) + tuple(synthetic)
    flags = np.zeros(len(records), dtype=bool)
    flags[len(base):] = True
    return CorrectionOutput(
        mode=mode,
        records=records,
        synthetic=flags,
        bucket_sets=list(bucket_sets),
        synth_counts=counts,
        skipped=skipped,
    )
