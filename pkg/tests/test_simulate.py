import numpy as np
import pytest

from unklearn.dataset import deduplicate, frequency_profile, sample_from_arrays
from unklearn.errors import ConfigError
from unklearn.simulate import BiasModel, SimulationConfig, draw_sources, split_population


def base(n=100, seed=0):
    rng = np.random.default_rng(seed)
    x = np.arange(n, dtype=float)
    return sample_from_arrays(np.column_stack([x, rng.normal(size=n)]), 2 * x)


def test_split_half():
    b = base()
    pop, test = split_population(b, 0.5, 3)
    assert len(pop) == len(test) == 50
    assert not set(pop.keys()) & set(test.keys())
    assert sorted(pop.keys() + test.keys()) == sorted(b.keys())
    again = split_population(b, 0.5, 3)
    assert again[0].keys() == pop.keys()


def test_split_empty_side():
    with pytest.raises(ConfigError):
        split_population(base(10), 0.01, 0)
    with pytest.raises(ConfigError):
        SimulationConfig(test_fraction=1.0)


def test_single_source_has_no_duplicates():
    S = draw_sources(base(), SimulationConfig(sources=1, source_size=60, seed=9))
    assert len(S) == 60
    assert len(deduplicate(S)) == 60


def test_sources_keep_cross_duplicates_and_come_from_population():
    pop = base()
    S = draw_sources(pop, SimulationConfig(sources=6, source_size=40, seed=1))
    assert len(S) == 240
    assert set(S.keys()) <= set(pop.keys())
    prof = frequency_profile(S)
    assert prof.c < 240
    for j in range(6):
        chunk = S.keys()[40 * j: 40 * (j + 1)]
        assert len(set(chunk)) == 40


def test_threshold_ratio_zero_excludes_low_values():
    bias = BiasModel("threshold", "x1", cutoff=30.0, ratio=0.0)
    S = draw_sources(base(), SimulationConfig(sources=5, source_size=50, bias=bias, seed=2))
    assert min(r.features[0] for r in S) >= 30.0


def test_threshold_too_few_eligible():
    bias = BiasModel("threshold", "x1", cutoff=90.0, ratio=0.0)
    with pytest.raises(ConfigError):
        draw_sources(base(), SimulationConfig(sources=1, source_size=20, bias=bias))


def test_logistic_bias_prefers_high_values():
    bias = BiasModel("logistic", "x1", strength=3.0)
    S = draw_sources(base(200), SimulationConfig(sources=20, source_size=20, bias=bias, seed=4))
    assert np.mean([r.features[0] for r in S]) > 120


def test_bias_on_label_column():
    bias = BiasModel("threshold", "y", cutoff=100.0, ratio=0.0)
    S = draw_sources(base(), SimulationConfig(sources=2, source_size=30, bias=bias, seed=5))
    assert min(r.label for r in S) >= 100.0


def test_uniform_inclusion_within_binomial_bounds():
    pop = base(20)
    counts = np.zeros(20)
    keys = pop.keys()
    reps, size = 100, 5
    for seed in range(reps):
        S = draw_sources(pop, SimulationConfig(sources=1, source_size=size, seed=seed))
        for k in S.keys():
            counts[keys.index(k)] += 1
    p = size / 20
    sigma = np.sqrt(reps * p * (1 - p))
    assert np.all(np.abs(counts - reps * p) <= 3 * sigma)


def test_source_larger_than_population():
    with pytest.raises(ConfigError):
        draw_sources(base(10), SimulationConfig(sources=1, source_size=11))


def test_deterministic():
    cfg = SimulationConfig(sources=4, source_size=10, seed=42,
                           bias=BiasModel("logistic", "x2", strength=1.0))
    assert draw_sources(base(), cfg).keys() == draw_sources(base(), cfg).keys()
