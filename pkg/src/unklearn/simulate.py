"""Biased multi-source sampling from a base population.

Each source samples without replacement, with inclusion probability
proportional to a bias weight; the sources are concatenated with their
cross-source duplicates kept. A uniform hold-out plays the role of the
hidden test set.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import IntegratedSample
from .errors import ConfigError, EmptyInputError, SchemaError

BIAS_KINDS = ("uniform", "logistic", "threshold")


@dataclass(frozen=True)
class BiasModel:
    kind: str = "uniform"
    column: str | None = None  # feature name, or the label column
    strength: float = 1.0  # logistic slope on the z-scored column
    cutoff: float = 0.0  # threshold: values below this ...
    ratio: float = 0.0  # ... get this relative inclusion weight

    def __post_init__(self):
        if self.kind not in BIAS_KINDS:
            raise ConfigError(f"unknown bias model {self.kind!r}")
        if self.kind != "uniform" and not self.column:
            raise ConfigError(f"{self.kind} bias needs a column")
        if self.ratio < 0:
            raise ConfigError("threshold ratio must be >= 0")


@dataclass(frozen=True)
class SimulationConfig:
    sources: int = 10
    source_size: object = 50  # int, or one int per source
    bias: BiasModel = field(default_factory=BiasModel)
    test_fraction: float = 0.3
    seed: int = 0
    # draw the sources from the test side (S subset of T) instead of the rest of the base
    subset_of_test: bool = False

    def __post_init__(self):
        if self.sources < 1:
            raise ConfigError("need at least one source")
        sizes = self.sizes()
        if any(s < 1 for s in sizes):
            raise ConfigError("source sizes must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")

    def sizes(self) -> list:
        if isinstance(self.source_size, (list, tuple)):
            if len(self.source_size) != self.sources:
                raise ConfigError("one source size per source required")
            return [int(s) for s in self.source_size]
        return [int(self.source_size)] * self.sources

    def to_dict(self) -> dict:
        return asdict(self)


def inclusion_weights(sample: IntegratedSample, bias: BiasModel) -> np.ndarray:
    """Unnormalized per-record inclusion weights under ``bias``."""
    n = len(sample)
    if bias.kind == "uniform":
        return np.ones(n)
    idx = sample.schema.column_index(bias.column)
    kind = sample.schema.label_kind if idx == -1 else sample.schema.feature_kinds[idx]
    if kind != "numeric":
        raise SchemaError(f"bias column {bias.column!r} must be numeric")
    x = sample.column(idx).astype(float)
    if bias.kind == "logistic":
        sd = x.std()
        z = (x - x.mean()) / sd if sd > 0 else np.zeros(n)
        return 1.0 / (1.0 + np.exp(-bias.strength * z))
    return np.where(x < bias.cutoff, bias.ratio, 1.0)


def split_population(base: IntegratedSample, test_fraction: float, seed: int):
    """Uniform random split into ``(population, test)``."""
    n = len(base)
    if n == 0:
        raise EmptyInputError("base dataset is empty")
    n_test = int(round(test_fraction * n))
    if not 0 < n_test < n:
        raise ConfigError(f"test_fraction {test_fraction} leaves an empty side of {n} rows")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx = np.sort(perm[:n_test])
    pop_idx = np.sort(perm[n_test:])
    recs = base.records
    return (
        base.replace_records(recs[i] for i in pop_idx),
        base.replace_records(recs[i] for i in test_idx),
    )


def draw_sources(population: IntegratedSample, cfg: SimulationConfig) -> IntegratedSample:
    """Integrate ``cfg.sources`` weighted without-replacement samples.

    Each source gets its own generator spawned from ``cfg.seed``; sources are
    concatenated in index order.
    """
    n = len(population)
    if n == 0:
        raise EmptyInputError("population is empty")
    sizes = cfg.sizes()
    if max(sizes) > n:
        raise ConfigError(f"source size {max(sizes)} exceeds population size {n}")
    w = inclusion_weights(population, cfg.bias)
    positive = int(np.count_nonzero(w))
    if max(sizes) > positive:
        raise ConfigError(
            f"source size {max(sizes)} exceeds the {positive} records with nonzero inclusion weight"
        )
    p = w / w.sum()
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.sources)
    records = []
    for size, ss in zip(sizes, streams):
        rng = np.random.default_rng(ss)
        picked = rng.choice(n, size=size, replace=False, p=p)
        records.extend(population.records[i] for i in picked)
    return population.replace_records(records)


def simulate(base: IntegratedSample, cfg: SimulationConfig):
    """Split ``base`` and draw the integrated training sample: ``(S, T)``."""
    population, test = split_population(base, cfg.test_fraction, cfg.seed)
    source_pool = test if cfg.subset_of_test else population
    return draw_sources(source_pool, cfg), test
