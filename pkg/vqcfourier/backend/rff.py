"""
Random Fourier Feature models.

Feature layout is interleaved per frequency: [cos(ω_1ᵀx), sin(ω_1ᵀx),
cos(ω_2ᵀx), ...] / √D. Regularization is passed as λ₀ and applied as
λ = M λ₀ in the normal equations.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
import pandas as pd
from scipy import linalg

from ..shared.config import get_settings
from ..shared.errors import ConfigError, DivergedTraining, ShapeError, SingularSystem
from ..shared.utils import make_rng, to_jsonable
from .sampling import FrequencySample

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if inputs.ndim != 2 or inputs.shape[0] != targets.shape[0]:
            raise ShapeError(f"{inputs.shape[0]} input rows for {targets.shape[0]} targets")
        if inputs.shape[0] < 1:
            raise ShapeError("a dataset needs at least one row")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ConfigError("dataset contains non-finite entries")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def M(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, target: Optional[str] = None) -> "Dataset":
        """Numeric frame to dataset; the target defaults to the last column"""
        if frame.shape[1] < 2:
            raise ShapeError("a dataset table needs at least one feature column and a target column")
        target = frame.columns[-1] if target is None else target
        if target not in frame.columns:
            raise ConfigError(f"target column {target!r} not found")
        features = frame.drop(columns=[target])
        return cls(features.to_numpy(dtype=float), frame[target].to_numpy(dtype=float))

    def subset(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.inputs[rows], self.targets[rows])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.inputs, columns=[f"x{k + 1}" for k in range(self.d)])
        frame["y"] = self.targets
        return frame

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    frequencies: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        if freqs.ndim == 1:
            freqs = freqs[:, None]
        if freqs.ndim != 2 or freqs.shape[0] < 1:
            raise ShapeError(f"frequencies must be a non-empty (D, d) array, got shape {freqs.shape}")
        object.__setattr__(self, "frequencies", freqs)

    @classmethod
    def from_sample(cls, sample: FrequencySample) -> "FeatureMap":
        return cls(sample.vectors)

    @property
    def D(self) -> int:
        return self.frequencies.shape[0]

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Feature matrix, shape (M, 2D)"""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.d == 1 else X[None, :]
        if X.shape[1] != self.d:
            raise ShapeError(f"inputs have {X.shape[1]} dimensions, feature map expects {self.d}")
        phase = X @ self.frequencies.T
        out = np.empty((X.shape[0], 2 * self.D))
        out[:, 0::2] = np.cos(phase)
        out[:, 1::2] = np.sin(phase)
        return out / math.sqrt(self.D)


def features(feature_map: FeatureMap, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != feature_map.d:
        raise ShapeError(f"input has {x.shape[0]} dimensions, feature map expects {feature_map.d}")
    return feature_map.transform(x[None, :])[0]


def approx_kernel(feature_map: FeatureMap, x: np.ndarray, y: np.ndarray) -> float:
    return float(features(feature_map, y) @ features(feature_map, x))


def exact_kernel(frequencies: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """(1/|F|) Σ_{ω∈F} cos(ωᵀ(x − y)) over an explicit frequency set F"""
    frequencies = np.atleast_2d(np.asarray(frequencies, dtype=float))
    delta = np.asarray(x, dtype=float).reshape(-1) - np.asarray(y, dtype=float).reshape(-1)
    if delta.shape[0] != frequencies.shape[1]:
        raise ShapeError(f"inputs have {delta.shape[0]} dimensions, frequencies have {frequencies.shape[1]}")
    return float(np.mean(np.cos(frequencies @ delta)))


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    epochs: int = 200
    batch_size: Optional[int] = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AdamConfig":
        known = {k: data[k] for k in ("lr", "epochs", "batch_size", "seed", "beta1", "beta2", "epsilon") if k in data}
        return cls(**known)


class Adam:
    """Adam with bias-corrected moments; updates the parameter array in place"""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    @classmethod
    def from_config(cls, config: AdamConfig) -> "Adam":
        return cls(config.lr, config.beta1, config.beta2, config.epsilon)

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        self.t += 1
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t

        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grads
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grads * grads)

        denom = np.sqrt(self.v / bc2) + self.epsilon
        params -= (self.lr / bc1) * self.m / denom


@dataclass(frozen=True, eq=False)
class RFFModel:
    feature_map: FeatureMap
    weights: np.ndarray
    lambda0: float
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != 2 * self.feature_map.D:
            raise ShapeError(f"{weights.shape[0]} weights for {self.feature_map.D} frequencies")
        if not np.all(np.isfinite(weights)):
            raise DivergedTraining("model weights are not finite")
        object.__setattr__(self, "weights", weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frequencies": self.feature_map.frequencies.tolist(),
            "weights": self.weights.tolist(),
            "lambda0": self.lambda0,
            "metadata": to_jsonable(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RFFModel":
        return cls(FeatureMap(np.asarray(data["frequencies"], dtype=float)),
                   np.asarray(data["weights"], dtype=float),
                   float(data["lambda0"]),
                   dict(data.get("metadata", {})))

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RFFModel":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def predict(model: RFFModel, inputs: np.ndarray) -> np.ndarray:
    return model.feature_map.transform(inputs) @ model.weights


def mse(predictions: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean((np.asarray(predictions) - np.asarray(targets)) ** 2))


def _spd_solve(A: np.ndarray, b: np.ndarray, allow_jitter: bool, metadata: Dict[str, Any]) -> np.ndarray:
    """Cholesky solve; one retry with 1e-12 * trace jitter when allowed"""
    try:
        return linalg.cho_solve(linalg.cho_factor(A, lower=True), b)
    except linalg.LinAlgError as e:
        if not allow_jitter:
            raise SingularSystem(f"normal equations are singular: {e}") from e
    jitter = 1e-12 * float(np.trace(A))
    logger.warning("Cholesky failed, retrying with jitter %.3e", jitter)
    metadata["jitter"] = jitter
    try:
        return linalg.cho_solve(linalg.cho_factor(A + jitter * np.eye(A.shape[0]), lower=True), b)
    except linalg.LinAlgError as e:
        raise SingularSystem(f"normal equations are singular even with jitter: {e}") from e


def fit_closed_form(feature_map: FeatureMap, data: Dataset, lambda0: float) -> RFFModel:
    """
    Ridge solution w = (ΦᵀΦ + Mλ₀I)⁻¹Φᵀy.

    Solves the 2D x 2D primal system when 2D < M and the M x M dual otherwise.
    """
    if lambda0 < 0:
        raise ConfigError(f"lambda0 must be non-negative, got {lambda0}")
    cap = get_settings().dense_cap
    n_features = 2 * feature_map.D
    if min(n_features, data.M) > cap:
        raise ConfigError(f"dense system of size {min(n_features, data.M)} exceeds the cap of {cap}")
    Phi = feature_map.transform(data.inputs)
    lam = data.M * lambda0
    metadata: Dict[str, Any] = {"solver": "closed_form", "lambda0": lambda0, "lambda": lam}
    if n_features < data.M:
        metadata["system"] = "primal"
        A = Phi.T @ Phi + lam * np.eye(n_features)
        weights = _spd_solve(A, Phi.T @ data.targets, lambda0 > 0, metadata)
    else:
        metadata["system"] = "dual"
        K = Phi @ Phi.T + lam * np.eye(data.M)
        weights = Phi.T @ _spd_solve(K, data.targets, lambda0 > 0, metadata)
    metadata["final_loss"] = mse(Phi @ weights, data.targets) + lambda0 * float(weights @ weights)
    return RFFModel(feature_map, weights, lambda0, metadata)


def fit_sgd(feature_map: FeatureMap, data: Dataset, lambda0: float, opt: Optional[AdamConfig] = None) -> RFFModel:
    """Adam on (1/M)‖Φw − y‖² + λ₀‖w‖², starting from w = 0"""
    opt = opt or AdamConfig()
    Phi = feature_map.transform(data.inputs)
    y = data.targets
    weights = np.zeros(Phi.shape[1])
    optimizer = Adam.from_config(opt)
    rng = make_rng(opt.seed)
    batch = data.M if not opt.batch_size else min(opt.batch_size, data.M)

    def objective(w: np.ndarray) -> float:
        return mse(Phi @ w, y) + lambda0 * float(w @ w)

    loss = objective(weights)
    for epoch in range(opt.epochs):
        order = rng.permutation(data.M) if batch < data.M else np.arange(data.M)
        for start in range(0, data.M, batch):
            rows = order[start:start + batch]
            residual = Phi[rows] @ weights - y[rows]
            grads = (2.0 / len(rows)) * (Phi[rows].T @ residual) + 2.0 * lambda0 * weights
            optimizer.step(weights, grads)
        loss = objective(weights)
        if not math.isfinite(loss):
            raise DivergedTraining(f"loss became {loss} at epoch {epoch}")
    metadata = {
        "solver": "adam", "lambda0": lambda0, "lambda": data.M * lambda0,
        "lr": opt.lr, "epochs": opt.epochs, "batch_size": batch, "seed": opt.seed,
        "final_loss": loss,
    }
    return RFFModel(feature_map, weights, lambda0, metadata)


@dataclass(frozen=True, eq=False)
class KernelRidgeModel:
    """Dual predictor f(x) = Σ α_i k(x_i, x)"""

    alpha: np.ndarray
    train_inputs: np.ndarray
    kernel_matrix: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lambda0: float

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        X = np.asarray(inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return self.kernel_matrix(X, self.train_inputs) @ self.alpha


def _feature_kernel(feature_map: FeatureMap) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def kernel(A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return feature_map.transform(A) @ feature_map.transform(B).T
    return kernel


def fit_krr_dual(kernel: Union[FeatureMap, np.ndarray], data: Dataset, lambda0: float) -> KernelRidgeModel:
    """
    α = (K + Mλ₀I)⁻¹ y.

    `kernel` is a FeatureMap (its approximate kernel) or an array of
    frequency vectors (the exact kernel over that set).
    """
    cap = get_settings().dense_cap
    if data.M > cap:
        raise ConfigError(f"{data.M} data points exceed the dense cap of {cap}")
    feature_map = kernel if isinstance(kernel, FeatureMap) else FeatureMap(np.asarray(kernel, dtype=float))
    kernel_matrix = _feature_kernel(feature_map)
    K = kernel_matrix(data.inputs, data.inputs)
    alpha = _spd_solve(K + data.M * lambda0 * np.eye(data.M), data.targets, lambda0 > 0, {})
    return KernelRidgeModel(alpha, data.inputs, kernel_matrix, lambda0)
