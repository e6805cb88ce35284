#!/usr/bin/env python3
"""
Tests for empirical Fourier spectra, rank correlation, packets, bounds and the grid shift
"""

import math
import os
import sys

import numpy as np
import pytest

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from vqcfourier.backend.analysis import (
    BoundInputs,
    FourierSeries,
    averaged_fourier,
    bound_rff_kernel,
    bound_samples_grid,
    bound_samples_krr,
    bound_samples_pauli,
    detect_packets,
    empirical_fourier,
    failure_probability,
    grid_shift_construction,
    nearest_node,
    omega_effective,
    rank_correlation,
    redundancy_correlation,
    spectrum_residual,
)
from vqcfourier.backend.spectrum import EncodingLayout, build_spectrum
from vqcfourier.backend.vqc_sim import GeneratorConfig, complex_encoding_pool, evaluate_batch, random_instance
from vqcfourier.shared.errors import ConfigError, InsufficientData, ShannonViolation, StepTooCoarse

TWO_PI = 2 * math.pi


def _circuit_evaluator(config):
    circuit, theta = random_instance(config)
    return circuit, (lambda X: evaluate_batch(circuit, theta, X))


def test_cosine_dft():
    empirical = empirical_fourier(lambda X: np.cos(3 * X[:, 0]), TWO_PI, 64)
    axis = empirical.axes[0]
    peaks = np.isclose(np.abs(axis), 3.0)
    assert np.allclose(empirical.magnitudes[peaks], 0.5)
    assert np.all(empirical.magnitudes[~peaks] < 1e-10)


def test_constant_dft():
    empirical = empirical_fourier(lambda X: np.full(X.shape[0], 2.0), TWO_PI, 16)
    zero = np.isclose(empirical.axes[0], 0.0)
    assert empirical.magnitudes[zero][0] == pytest.approx(2.0)
    assert np.all(empirical.magnitudes[~zero] < 1e-12)


def test_parseval():
    rng = np.random.default_rng(0)
    freqs, a = rng.integers(0, 10, size=6), rng.normal(size=6)
    series = FourierSeries(freqs.astype(float), a, rng.normal(size=6))
    empirical = empirical_fourier(series, TWO_PI, 32)
    values = series(np.arange(32) * TWO_PI / 32)
    assert np.sum(empirical.magnitudes ** 2) == pytest.approx(np.mean(values ** 2), abs=1e-8)


def test_grid_checks():
    with pytest.raises(ConfigError):
        empirical_fourier(lambda X: X[:, 0], TWO_PI, 15)
    with pytest.raises(ConfigError):
        empirical_fourier(lambda X: X[:, 0], TWO_PI, 8, d=3)
    with pytest.raises(ShannonViolation):
        empirical_fourier(lambda X: X[:, 0], TWO_PI, 8, omega_max=5.0)


@pytest.mark.parametrize("seed", range(20))
def test_pauli_circuit_support(seed):
    _, evaluator = _circuit_evaluator(GeneratorConfig(n_qubits=3, L=3, d=1, seed=seed))
    empirical = empirical_fourier(evaluator, TWO_PI, 16)
    outside = np.abs(empirical.axes[0]) > 3.5
    assert np.all(empirical.magnitudes[outside] < 1e-8 * np.max(empirical.magnitudes))


def test_two_dimensional_pauli_support():
    _, evaluator = _circuit_evaluator(GeneratorConfig(n_qubits=2, L=1, d=2, seed=3))
    empirical = empirical_fourier(evaluator, TWO_PI, 8, d=2)
    axis = np.abs(empirical.axes[0])
    outside = (axis[:, None] > 1.5) | (axis[None, :] > 1.5)
    assert np.all(empirical.magnitudes[outside] < 1e-8 * np.max(empirical.magnitudes))
    assert len(empirical.to_frame()) == 64


@pytest.mark.parametrize("seed", range(20))
def test_rich_encoding_lies_in_spectrum_span(seed):
    config = GeneratorConfig(n_qubits=4, pool=complex_encoding_pool(), L=2, pool_order="sequential", seed=seed)
    circuit, evaluator = _circuit_evaluator(config)
    X = np.random.default_rng(seed).uniform(0, TWO_PI, size=(600, 1))
    assert spectrum_residual(evaluator, build_spectrum(circuit.layout()), X) < 1e-8


def test_averaged_fourier_is_thread_independent():
    def factory(seed):
        return _circuit_evaluator(GeneratorConfig(n_qubits=2, L=2, seed=seed))[1]

    serial = averaged_fourier(factory, [0, 1, 2, 3], TWO_PI, 8)
    threaded = averaged_fourier(factory, [0, 1, 2, 3], TWO_PI, 8, threads=3)
    assert serial.n_average == 4
    assert np.array_equal(serial.magnitudes, threaded.magnitudes)
    with pytest.raises(ConfigError):
        averaged_fourier(factory, [], TWO_PI, 8)


def test_rank_correlation_extremes():
    assert rank_correlation([1, 2, 3, 4], [0.1, 0.2, 0.3, 0.4]) == pytest.approx(1.0)
    assert rank_correlation([1, 2, 3, 4], [0.4, 0.3, 0.2, 0.1]) == pytest.approx(-1.0)
    with pytest.raises(InsufficientData):
        rank_correlation([1, 2], [1, 2])
    with pytest.raises(InsufficientData):
        rank_correlation([1, 1, 1], [0.1, 0.5, 0.2])


def test_redundancy_correlation_on_planted_magnitudes():
    spectrum = build_spectrum(EncodingLayout.pauli(3))
    dim = spectrum.dims[0]
    # Magnitude at ±k equals the redundancy of k.
    positive = {int(f): r for f, r in zip(dim.frequencies, dim.redundancies) if f >= 0}
    series = FourierSeries(np.array(sorted(positive), dtype=float),
                           [positive[0]] + [2 * positive[k] for k in sorted(positive) if k > 0],
                           np.zeros(len(positive)))
    empirical = empirical_fourier(series, TWO_PI, 16)
    assert redundancy_correlation(empirical, spectrum) > 0.95


def test_detect_packets():
    packets = detect_packets([9.0, 0.0, 0.1, 5.3, 0.2, 5.0], [1, 2, 2, 1, 1, 3])
    assert [(p.low, p.high, p.count) for p in packets] == [(0.0, 0.2, 3), (5.0, 5.3, 2), (9.0, 9.0, 1)]
    assert [p.redundancy for p in packets] == [5, 4, 1]
    assert detect_packets([]) == []


def test_omega_effective():
    empirical = empirical_fourier(lambda X: np.cos(3 * X[:, 0]) + 1e-3 * np.cos(5 * X[:, 0]), TWO_PI, 16)
    assert omega_effective(empirical) == pytest.approx(3.0)
    assert omega_effective(empirical, threshold=1e-4) == pytest.approx(5.0)


def test_empirical_csv(tmp_path):
    empirical_fourier(lambda X: np.cos(X[:, 0]), TWO_PI, 4).to_csv(tmp_path / "fourier.csv")
    lines = (tmp_path / "fourier.csv").read_text().splitlines()
    assert lines[0] == "frequency,magnitude"
    assert len(lines) == 5


def test_kernel_bound_plug_in():
    inputs = BoundInputs(d=1, epsilon=1.0, delta=0.1, sigma_p=1.0, diameter=1.0)
    assert bound_rff_kernel(inputs, 0) == pytest.approx(66.0)
    assert failure_probability(inputs, 0) == 1.0
    assert bound_rff_kernel(inputs, 1e6) == pytest.approx(0.0, abs=1e-300)

    base = bound_rff_kernel(inputs, 0)
    once = bound_rff_kernel(inputs, 40) / base
    twice = bound_rff_kernel(inputs, 80) / base
    assert twice == pytest.approx(once ** 2)


def test_pauli_bound_is_monotone():
    def samples(**kw):
        params = {"d": 2, "epsilon": 0.1, "delta": 0.1, "lambda0": 0.5, "L": 10, **kw}
        return bound_samples_pauli(BoundInputs(**params)).samples

    assert samples(epsilon=0.2) < samples(epsilon=0.1)
    assert samples(delta=0.2) < samples(delta=0.1)
    assert samples(L=100) > samples(L=10)


def test_pauli_bound_grows_with_log_of_second_moment():
    small = bound_samples_pauli(BoundInputs(d=2, epsilon=0.1, delta=0.1, lambda0=0.5, L=10))
    large = bound_samples_pauli(BoundInputs(d=2, epsilon=0.1, delta=0.1, lambda0=0.5, L=100))
    assert small.prefactor == pytest.approx(large.prefactor)
    expected = small.prefactor * math.log((100 * 101) / (10 * 11))
    assert large.samples - small.samples == pytest.approx(expected)


def test_pauli_bound_matches_kernel_ridge_form():
    inputs = BoundInputs(d=3, epsilon=0.2, delta=0.05, lambda0=0.1, L=4)
    direct = bound_samples_krr(BoundInputs(d=3, epsilon=0.2, delta=0.05, lambda0=0.1, sigma_p=3 * 4 * 5 / 3))
    assert bound_samples_pauli(inputs).samples == pytest.approx(direct.samples)
    assert bound_samples_pauli(inputs).to_dict()["D_bound"] == pytest.approx(direct.samples)


def test_bound_in_the_experimental_regime_is_astronomical():
    report = bound_samples_pauli(BoundInputs(d=16, epsilon=0.05, delta=0.05, lambda0=1e-6, L=200))
    assert report.samples > 1e20


def test_grid_bound():
    base = {"d": 1, "epsilon": 0.5, "delta": 0.1, "lambda0": 0.5, "omega_max": 60.0, "diameter": 1.0}
    with pytest.raises(StepTooCoarse):
        bound_samples_grid(BoundInputs(**base, step=0.5, f_inf=1.0))
    assert bound_samples_grid(BoundInputs(**base, step=0.25, f_inf=1.0)).samples > 0

    coarse = bound_samples_grid(BoundInputs(**base, step=0.2, f_inf=0.0))
    fine = bound_samples_grid(BoundInputs(**base, step=0.1, f_inf=0.0))
    assert fine.bracket - coarse.bracket == pytest.approx(math.log(2))
    assert fine.samples > coarse.samples


def test_bound_inputs_validation():
    with pytest.raises(ConfigError):
        BoundInputs(d=1, epsilon=0.0, delta=0.1)
    with pytest.raises(ConfigError):
        BoundInputs(d=1, epsilon=0.1, delta=1.0)
    with pytest.raises(ConfigError):
        BoundInputs.from_dict({"d": 1, "epsilon": 0.1, "delta": 0.1, "colour": "red"})
    with pytest.raises(ConfigError):
        bound_samples_krr(BoundInputs(d=1, epsilon=0.1, delta=0.1))


def test_nearest_node_ties_toward_zero():
    assert np.allclose(nearest_node(np.array([0.5, -0.5, 1.5, 1.3, -2.7]), 1.0), [0.0, 0.0, 1.0, 1.0, -3.0])


def test_grid_shift_on_grid_is_identity():
    series = FourierSeries(np.array([0.0, 2.0, 3.0]), [1.0, -0.5, 0.2], [0.0, 0.3, 0.1])
    shifted, _ = grid_shift_construction(series, 1.0, TWO_PI)
    x = np.linspace(0, TWO_PI, 1000)
    assert np.max(np.abs(shifted(x) - series(x))) < 1e-12


def test_grid_shift_cosine():
    series = FourierSeries(np.array([1.3]), [1.0], [0.0])
    shifted, bound = grid_shift_construction(series, 1.0, TWO_PI)
    assert np.allclose(shifted.frequencies, [[1.0]])
    x = np.linspace(0, TWO_PI, 10_000)
    assert np.max(np.abs(shifted(x) - series(x))) <= 0.3 * TWO_PI
    assert bound >= 0.3 * TWO_PI

    doubled, doubled_bound = grid_shift_construction(FourierSeries(np.array([1.3]), [2.0], [0.0]), 1.0, TWO_PI)
    assert doubled_bound == pytest.approx(2 * bound)


@pytest.mark.parametrize("d", [1, 2])
def test_grid_shift_bound_holds_for_random_series(d):
    rng = np.random.default_rng(100 + d)
    # Domain [0, 1]^d has |x| <= sqrt(d), used as its diameter.
    diameter = math.sqrt(d)
    points = rng.uniform(0, 1, size=(10_000, d))
    for _ in range(50):
        k = int(rng.integers(1, 6))
        series = FourierSeries(rng.uniform(-20, 20, size=(k, d)), rng.normal(size=k), rng.normal(size=k))
        step = float(rng.uniform(0.05, 1.0))
        shifted, bound = grid_shift_construction(series, step, diameter)
        assert np.max(np.abs(shifted(points) - series(points))) <= bound
