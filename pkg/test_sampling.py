#!/usr/bin/env python3
"""
Tests for Distinct, Tree and Grid frequency sampling
"""

import logging
import math
import os
import sys

import numpy as np
import pytest

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from vqcfourier.backend.operators import HamiltonianSpec
from vqcfourier.backend.sampling import (
    SamplingConfig,
    Strategy,
    default_omega_max,
    draw,
    empirical_law,
    grid_nodes,
    sample_distinct,
    sample_grid,
    sample_tree,
)
from vqcfourier.backend.spectrum import EncodingLayout, build_spectrum
from vqcfourier.shared.errors import ConfigError, InsufficientPopulation


def _within(observed, expected, n, sigmas=4.5):
    sd = np.sqrt(np.asarray(expected) * (1 - np.asarray(expected)) / n)
    return np.all(np.abs(np.asarray(observed) - expected) <= sigmas * sd)


def test_distinct_exhaustive_draw():
    spectrum = build_spectrum(EncodingLayout.pauli(2))
    sample = sample_distinct(spectrum, SamplingConfig("distinct", D=3, seed=5, replacement=False))
    assert sorted(sample.vectors[:, 0].tolist()) == [0.0, 1.0, 2.0]


def test_distinct_without_replacement_population():
    spectrum = build_spectrum(EncodingLayout.pauli(2))
    with pytest.raises(InsufficientPopulation):
        sample_distinct(spectrum, SamplingConfig("distinct", D=4, replacement=False))


def test_distinct_falls_back_to_replacement_when_unset():
    spectrum = build_spectrum(EncodingLayout.pauli(2))
    sample = sample_distinct(spectrum, SamplingConfig("distinct", D=40, seed=1))
    assert sample.D == 40
    assert set(sample.vectors[:, 0].tolist()) <= {-2.0, -1.0, 0.0, 1.0, 2.0}


def test_replacement_fallback_is_logged(caplog):
    spectrum = build_spectrum(EncodingLayout.pauli(2))
    with caplog.at_level(logging.WARNING, logger="vqcfourier.backend.sampling"):
        sample_distinct(spectrum, SamplingConfig("distinct", D=40, seed=1))
    assert any("with replacement" in r.getMessage() for r in caplog.records)

    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="vqcfourier.backend.sampling"):
        sample_distinct(spectrum, SamplingConfig("distinct", D=3, seed=1))
    assert not caplog.records


def test_distinct_with_replacement_is_uniform():
    spectrum = build_spectrum(EncodingLayout.pauli(5))
    sample = sample_distinct(spectrum, SamplingConfig("distinct", D=1000, seed=2024, replacement=True))
    law = empirical_law(sample.vectors, np.arange(-5, 6))
    assert law.sum() == pytest.approx(1.0)
    assert _within(law, np.full(11, 1 / 11), 1000)


def test_distinct_marginals_in_two_dimensions():
    spectrum = build_spectrum(EncodingLayout.pauli(1, 2))
    n = 100_000
    sample = sample_distinct(spectrum, SamplingConfig("distinct", D=n, seed=9, replacement=True))
    for k in range(2):
        law = empirical_law(sample.vectors[:, k], [-1.0, 0.0, 1.0])
        assert _within(law, np.full(3, 1 / 3), n)


def test_distinct_samples_are_nested_across_D():
    spectrum = build_spectrum(EncodingLayout.pauli(4, 2))
    small = sample_distinct(spectrum, SamplingConfig("distinct", D=5, seed=17, replacement=False))
    large = sample_distinct(spectrum, SamplingConfig("distinct", D=20, seed=17, replacement=False))
    assert np.array_equal(small.vectors, large.vectors[:5])
    assert len({tuple(v) for v in large.vectors.tolist()}) == 20


def test_tree_single_gate_law():
    layout = EncodingLayout.pauli(1)
    n = 100_000
    sample = sample_tree(layout, SamplingConfig("tree", D=n, seed=3))
    law = empirical_law(sample.vectors, [-1.0, 0.0, 1.0])
    assert law.sum() == pytest.approx(1.0)
    assert _within(law, [0.25, 0.5, 0.25], n)


def test_tree_zero_frequency_probability():
    n = 100_000
    sample = sample_tree(EncodingLayout.pauli(3), SamplingConfig("tree", D=n, seed=4))
    law = empirical_law(sample.vectors, [0.0])
    assert _within(law, [20 / 64], n)


def test_tree_matches_redundancy_law():
    layout = EncodingLayout.pauli(2)
    dim = build_spectrum(layout).dims[0]
    n = 100_000
    sample = sample_tree(layout, SamplingConfig("tree", D=n, seed=8))
    law = empirical_law(sample.vectors, dim.frequencies)
    assert _within(law, dim.probabilities, n)


def test_tree_degenerate_gate():
    layout = EncodingLayout(((HamiltonianSpec.from_matrix(np.zeros((2, 2))),),))
    sample = sample_tree(layout, SamplingConfig("tree", D=50, seed=1))
    assert np.all(sample.vectors == 0)


def test_tree_all_pairs():
    sample = sample_tree(EncodingLayout.pauli(3, 2), SamplingConfig("tree", D=10, seed=2, all_pairs=True))
    assert sample.D == math.comb(10, 2) + 1
    assert np.all(sample.vectors[0] == 0)


def test_samples_lie_in_spectrum():
    layout = EncodingLayout.exponential(2)
    support = build_spectrum(layout).dims[0].frequencies
    for config in (SamplingConfig("tree", D=500, seed=6), SamplingConfig("distinct", D=500, seed=6)):
        sample = draw(config, spectrum=build_spectrum(layout), layout=layout)
        assert empirical_law(sample.vectors, support).sum() == pytest.approx(1.0)


def test_grid_nodes():
    nodes = grid_nodes(10.0, 0.5)
    assert len(nodes) == 20
    assert nodes[0] == 0.0 and nodes[-1] == pytest.approx(9.5)
    assert np.array_equal(grid_nodes(2.0, 2.0), [0.0])


def test_grid_sampling_is_uniform_over_nodes():
    n = 10_000
    sample = sample_grid(SamplingConfig("grid", D=n, seed=12, omega_max=1.0, step=0.5), d=2)
    codes = (sample.vectors / 0.5).round().astype(int) @ np.array([1, 2])
    law = np.bincount(codes, minlength=4) / n
    assert _within(law, np.full(4, 0.25), n)
    assert np.all(np.isin(sample.vectors, [0.0, 0.5]))


def test_grid_config_validation():
    with pytest.raises(ConfigError):
        SamplingConfig("grid", D=4, omega_max=1.0, step=2.0)
    with pytest.raises(ConfigError):
        SamplingConfig("grid", D=4)
    with pytest.raises(ConfigError):
        SamplingConfig("distinct", D=0)


def test_grid_omega_max_must_match_dimension():
    config = SamplingConfig("grid", D=4, omega_max=(2.0, 3.0, 4.0), step=1.0)
    with pytest.raises(ConfigError):
        sample_grid(config, d=2)
    assert sample_grid(config, d=3).vectors.shape == (4, 3)
    assert sample_grid(SamplingConfig("grid", D=4, omega_max=(2.0,), step=1.0), d=2).vectors.shape == (4, 2)


def test_sampling_is_deterministic():
    layout = EncodingLayout.pauli(3, 2)
    spectrum = build_spectrum(layout)
    for strategy in ("distinct", "tree"):
        a = draw(SamplingConfig(strategy, D=64, seed=99), spectrum=spectrum, layout=layout)
        b = draw(SamplingConfig(strategy, D=64, seed=99), spectrum=spectrum, layout=layout)
        assert np.array_equal(a.vectors, b.vectors)
    a = draw(SamplingConfig("grid", D=64, seed=99, omega_max=3.0, step=1.0), d=2)
    b = draw(SamplingConfig("grid", D=64, seed=99, omega_max=3.0, step=1.0), d=2)
    assert np.array_equal(a.vectors, b.vectors)


def test_config_from_dict():
    config = SamplingConfig.from_dict({"strategy": "Grid", "D": 8, "seed": 3, "omega_max": [2, 4], "step": 0.5})
    assert config.strategy is Strategy.GRID
    assert config.omega_max == (2.0, 4.0)
    assert SamplingConfig.from_dict(config.to_dict()) == config
    with pytest.raises(ConfigError):
        SamplingConfig.from_dict({"strategy": "distinct"})


def test_default_omega_max():
    assert default_omega_max(100, 2 * math.pi) == pytest.approx(50.0)
    assert default_omega_max(2, 2 * math.pi) == pytest.approx(1.0)
    assert default_omega_max(400, math.pi) == pytest.approx(400.0)
    with pytest.raises(ConfigError):
        default_omega_max(1, 1.0)


def test_sample_csv(tmp_path):
    sample = sample_grid(SamplingConfig("grid", D=3, omega_max=2.0, step=1.0), d=2)
    sample.to_csv(tmp_path / "frequencies.csv")
    lines = (tmp_path / "frequencies.csv").read_text().splitlines()
    assert lines[0] == "w1,w2"
    assert len(lines) == 4
