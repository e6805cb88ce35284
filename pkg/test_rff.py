#!/usr/bin/env python3
"""
Tests for the RFF feature map, closed-form and Adam solvers and kernel ridge
"""

import math
import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from vqcfourier.backend.rff import (
    Adam,
    AdamConfig,
    Dataset,
    FeatureMap,
    RFFModel,
    approx_kernel,
    exact_kernel,
    features,
    fit_closed_form,
    fit_krr_dual,
    fit_sgd,
    mse,
    predict,
)
from vqcfourier.backend.sampling import SamplingConfig, sample_distinct
from vqcfourier.backend.spectrum import EncodingLayout, build_spectrum, positive_half
from vqcfourier.shared.errors import ConfigError, DivergedTraining, ShapeError, SingularSystem


def _span_dataset(M=50, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 2 * math.pi, size=M)
    y = 0.3 * np.cos(x) + 0.7 * np.sin(2 * x)
    return Dataset(x, y)


def test_feature_layout_is_interleaved():
    fmap = FeatureMap(np.array([[1.0], [2.0]]))
    phi = features(fmap, np.array([0.5]))
    expected = np.array([math.cos(0.5), math.sin(0.5), math.cos(1.0), math.sin(1.0)]) / math.sqrt(2)
    assert np.allclose(phi, expected)
    assert fmap.transform(np.zeros((3, 1))).shape == (3, 4)


def test_feature_map_dimension_mismatch():
    fmap = FeatureMap(np.ones((4, 2)))
    with pytest.raises(ShapeError):
        fmap.transform(np.ones((5, 3)))


def test_approx_kernel_equals_exact_kernel_on_same_set():
    freqs = np.array([[0.0, 1.0], [2.0, -1.0], [3.0, 0.5]])
    x, y = np.array([0.2, -0.4]), np.array([1.1, 0.3])
    assert approx_kernel(FeatureMap(freqs), x, y) == pytest.approx(exact_kernel(freqs, x, y))
    assert approx_kernel(FeatureMap(freqs), x, x) == pytest.approx(1.0)


def test_monte_carlo_kernel_converges():
    spectrum = build_spectrum(EncodingLayout.pauli(3, 2))
    sample = sample_distinct(spectrum, SamplingConfig("distinct", D=20_000, seed=1, replacement=True))
    grids = np.meshgrid(spectrum.dims[0].frequencies, spectrum.dims[1].frequencies, indexing="ij")
    omega = np.stack([g.reshape(-1) for g in grids], axis=1)
    x, y = np.array([0.4, 1.3]), np.array([-0.7, 0.2])
    assert abs(approx_kernel(FeatureMap.from_sample(sample), x, y) - exact_kernel(omega, x, y)) < 0.05


def _pauli_lattice(spectrum):
    grids = np.meshgrid(*[dim.frequencies for dim in spectrum.dims], indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def test_exhaustive_distinct_sample_reproduces_kernel():
    spectrum = build_spectrum(EncodingLayout.pauli(3, 2))
    omega_plus, _ = positive_half(spectrum)
    sample = sample_distinct(spectrum, SamplingConfig("distinct", D=len(omega_plus), seed=4, replacement=False))
    fmap = FeatureMap.from_sample(sample)
    pairs = np.random.default_rng(8).uniform(0, 2 * math.pi, size=(100, 2, 2))
    for x, y in pairs:
        assert abs(approx_kernel(fmap, x, y) - exact_kernel(omega_plus, x, y)) < 1e-12


def test_monte_carlo_sup_error_shrinks_with_D():
    spectrum = build_spectrum(EncodingLayout.pauli(3, 2))
    omega = _pauli_lattice(spectrum)
    pairs = np.random.default_rng(9).uniform(0, 2 * math.pi, size=(50, 2, 2))
    exact = np.array([exact_kernel(omega, x, y) for x, y in pairs])
    mean_errors = []
    for D in (16, 64, 256):
        errors = []
        for seed in range(10):
            sample = sample_distinct(spectrum, SamplingConfig("distinct", D=D, seed=seed, replacement=True))
            fmap = FeatureMap.from_sample(sample)
            approx = np.array([approx_kernel(fmap, x, y) for x, y in pairs])
            errors.append(np.max(np.abs(approx - exact)))
        mean_errors.append(np.mean(errors))
    assert mean_errors[0] >= mean_errors[1] >= mean_errors[2]



def test_closed_form_recovers_target_in_span():
    data = _span_dataset()
    model = fit_closed_form(FeatureMap(np.array([[1.0], [2.0]])), data, lambda0=0.0)
    assert model.metadata["system"] == "primal"
    assert mse(predict(model, data.inputs), data.targets) < 1e-10


def test_primal_matches_explicit_dual():
    data = _span_dataset(M=40, seed=2)
    fmap = FeatureMap(np.array([[0.5], [1.0], [1.5], [3.0]]))
    lambda0 = 1e-3
    model = fit_closed_form(fmap, data, lambda0)
    Phi = fmap.transform(data.inputs)
    dual = Phi.T @ np.linalg.solve(Phi @ Phi.T + data.M * lambda0 * np.eye(data.M), data.targets)
    assert np.allclose(model.weights, dual, atol=1e-8)


def test_dual_matches_explicit_primal():
    data = _span_dataset(M=10, seed=3)
    fmap = FeatureMap(np.arange(8, dtype=float)[:, None] * 0.7)
    lambda0 = 1e-4
    model = fit_closed_form(fmap, data, lambda0)
    assert model.metadata["system"] == "dual"
    Phi = fmap.transform(data.inputs)
    primal = np.linalg.solve(Phi.T @ Phi + data.M * lambda0 * np.eye(16), Phi.T @ data.targets)
    assert np.allclose(model.weights, primal, atol=1e-8)


def test_unregularized_singular_system():
    data = _span_dataset(M=20)
    with pytest.raises(SingularSystem):
        fit_closed_form(FeatureMap(np.array([[0.0]])), data, lambda0=0.0)


def test_negative_regularization_rejected():
    with pytest.raises(ConfigError):
        fit_closed_form(FeatureMap(np.array([[1.0]])), _span_dataset(), lambda0=-1.0)


def test_adam_reduces_loss():
    data = _span_dataset()
    fmap = FeatureMap(np.array([[1.0], [2.0]]))
    model = fit_sgd(fmap, data, lambda0=0.0, opt=AdamConfig(lr=0.02, epochs=1000))
    initial = mse(np.zeros(data.M), data.targets)
    assert model.metadata["solver"] == "adam"
    assert model.metadata["final_loss"] < 0.05 * initial


def test_adam_minibatches_are_seeded():
    data = _span_dataset()
    fmap = FeatureMap(np.array([[1.0], [2.0]]))
    opt = AdamConfig(lr=0.01, epochs=20, batch_size=8, seed=4)
    a = fit_sgd(fmap, data, 1e-6, opt)
    b = fit_sgd(fmap, data, 1e-6, opt)
    assert np.array_equal(a.weights, b.weights)


def test_adam_divergence_is_reported():
    data = _span_dataset()
    with pytest.raises(DivergedTraining):
        fit_sgd(FeatureMap(np.array([[1.0]])), data, 0.0, AdamConfig(lr=float("inf"), epochs=3))


def test_adam_step_moves_against_gradient():
    params = np.array([1.0, -1.0])
    Adam(lr=0.1).step(params, np.array([2.0, -3.0]))
    assert np.allclose(params, [0.9, -0.9])


def test_kernel_ridge_dual_matches_rff_model():
    data = _span_dataset(M=30, seed=5)
    fmap = FeatureMap(np.array([[1.0], [2.0], [2.5]]))
    krr = fit_krr_dual(fmap, data, 1e-3)
    model = fit_closed_form(fmap, data, 1e-3)
    grid = np.linspace(0, 2 * math.pi, 17)
    assert np.allclose(krr.predict(grid), predict(model, grid), atol=1e-8)


def test_primal_and_dual_agree_on_random_instances():
    rng = np.random.default_rng(2025)
    for _ in range(50):
        M, D, d = int(rng.integers(5, 101)), int(rng.integers(1, 101)), int(rng.integers(1, 4))
        fmap = FeatureMap(rng.uniform(-3, 3, size=(D, d)))
        data = Dataset(rng.uniform(0, 2 * math.pi, size=(M, d)), rng.normal(size=M))
        model = fit_closed_form(fmap, data, 1e-3)
        krr = fit_krr_dual(fmap, data, 1e-3)
        X_new = rng.uniform(0, 2 * math.pi, size=(20, d))
        assert np.allclose(predict(model, X_new), krr.predict(X_new), rtol=0, atol=1e-8)



def test_kernel_ridge_with_frequency_set():
    data = _span_dataset(M=25, seed=6)
    krr = fit_krr_dual(np.array([[0.0], [1.0], [2.0]]), data, 1e-8)
    assert mse(krr.predict(data.inputs), data.targets) < 1e-4


def test_model_save_and_load(tmp_path):
    data = _span_dataset()
    model = fit_closed_form(FeatureMap(np.array([[1.0], [2.0]])), data, 1e-6)
    model.save(tmp_path / "model.json")
    loaded = RFFModel.load(tmp_path / "model.json")
    assert np.allclose(predict(loaded, data.inputs), predict(model, data.inputs))
    assert loaded.metadata["system"] == "primal"


def test_dataset_validation():
    with pytest.raises(ShapeError):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ConfigError):
        Dataset(np.array([0.0, np.nan]), np.zeros(2))
    frame = pd.DataFrame({"a": [0.0, 1.0], "b": [2.0, 3.0], "y": [1.0, -1.0]})
    data = Dataset.from_frame(frame)
    assert data.d == 2 and data.M == 2
    assert list(data.to_frame().columns) == ["x1", "x2", "y"]
