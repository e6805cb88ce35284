"""
Fourier analysis of models and RFF sample-complexity bounds.

Empirical spectra come from a DFT of model samples on a half-open lattice
over [0, x_max)^d: the coefficient at integer mode m estimates the Fourier
coefficient at angular frequency 2πm / x_max. Bound calculators evaluate the
closed-form expressions as written and never clamp, except the kernel
failure probability when it is reported.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import fft, linalg, stats

from ..shared.errors import ConfigError, InsufficientData, ShannonViolation, ShapeError, StepTooCoarse
from .spectrum import Spectrum, pauli_sigma_p, positive_half
from .vqc_sim import grid_inputs

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class EmpiricalSpectrum:
    """Centered DFT magnitudes; axes[k] holds the angular frequencies of dimension k"""

    axes: Tuple[np.ndarray, ...]
    magnitudes: np.ndarray
    n_average: int = 1

    @property
    def d(self) -> int:
        return len(self.axes)

    def frequency_vectors(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def to_frame(self) -> pd.DataFrame:
        vectors = self.frequency_vectors()
        if self.d == 1:
            frame = pd.DataFrame({"frequency": vectors[:, 0]})
        else:
            frame = pd.DataFrame(vectors, columns=[f"w{k + 1}" for k in range(self.d)])
        frame["magnitude"] = self.magnitudes.reshape(-1)
        return frame

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def _check_grid(x_max: float, n_points: int, d: int, omega_max: Optional[float]) -> None:
    if d not in (1, 2):
        raise ConfigError(f"empirical spectra are computed for d = 1 or 2, got d={d}")
    if n_points < 2 or n_points % 2:
        raise ConfigError(f"grid size must be even and at least 2, got {n_points}")
    if x_max <= 0:
        raise ConfigError(f"x_max must be positive, got {x_max}")
    if omega_max is not None and n_points < 2 * omega_max * x_max / math.pi:
        raise ShannonViolation(
            f"{n_points} points per dimension cannot resolve frequency {omega_max} over [0, {x_max})"
        )


def _centered_magnitudes(evaluator: Evaluator, x_max: float, n_points: int, d: int) -> np.ndarray:
    X = grid_inputs(x_max, n_points, d)
    values = np.asarray(evaluator(X), dtype=float).reshape((n_points,) * d)
    coefficients = fft.fftn(values) / n_points ** d
    return np.abs(fft.fftshift(coefficients))


def _angular_axis(x_max: float, n_points: int) -> np.ndarray:
    return 2 * math.pi * fft.fftshift(fft.fftfreq(n_points, d=x_max / n_points))


def empirical_fourier(
    evaluator: Evaluator,
    x_max: float,
    n_points: int,
    d: int = 1,
    omega_max: Optional[float] = None,
) -> EmpiricalSpectrum:
    """
    DFT magnitudes of evaluator samples on the lattice over [0, x_max)^d.

    `evaluator` maps an (M, d) input array to M outputs. When `omega_max` is
    given, the lattice must satisfy N >= 2 omega_max x_max / π.
    """
    _check_grid(x_max, n_points, d, omega_max)
    magnitudes = _centered_magnitudes(evaluator, x_max, n_points, d)
    axis = _angular_axis(x_max, n_points)
    return EmpiricalSpectrum(tuple(axis for _ in range(d)), magnitudes)


def averaged_fourier(
    factory: Callable[[int], Evaluator],
    seeds: Sequence[int],
    x_max: float,
    n_points: int,
    d: int = 1,
    omega_max: Optional[float] = None,
    threads: int = 1,
) -> EmpiricalSpectrum:
    """Magnitudes averaged over fresh models, factory(seed) building one per seed"""
    if not seeds:
        raise ConfigError("averaging needs at least one seed")
    _check_grid(x_max, n_points, d, omega_max)

    def one(seed: int) -> np.ndarray:
        return _centered_magnitudes(factory(seed), x_max, n_points, d)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        stack = list(pool.map(one, seeds))
    axis = _angular_axis(x_max, n_points)
    return EmpiricalSpectrum(tuple(axis for _ in range(d)), np.mean(stack, axis=0), len(seeds))


def rank_correlation(redundancies: Sequence[float], magnitudes: Sequence[float]) -> float:
    """Spearman correlation; needs at least 3 points with some spread"""
    redundancies = np.asarray(redundancies, dtype=float)
    magnitudes = np.asarray(magnitudes, dtype=float)
    if redundancies.shape != magnitudes.shape:
        raise ShapeError(f"{redundancies.shape[0]} redundancies for {magnitudes.shape[0]} magnitudes")
    if redundancies.shape[0] < 3:
        raise InsufficientData(f"rank correlation needs at least 3 frequencies, got {redundancies.shape[0]}")
    rho = stats.spearmanr(redundancies, magnitudes).statistic
    if not math.isfinite(rho):
        raise InsufficientData("rank correlation is undefined for constant inputs")
    return float(rho)


def redundancy_correlation(empirical: EmpiricalSpectrum, spectrum: Spectrum, tol: float = 1e-6) -> float:
    """Rank correlation between redundancy and averaged magnitude over shared frequencies"""
    if spectrum.d != empirical.d:
        raise ShapeError(f"{spectrum.d}-dimensional spectrum against a {empirical.d}-dimensional DFT")
    # Per-dimension index of each theoretical frequency on the DFT axis, -1 when absent.
    positions = []
    for axis, dim in zip(empirical.axes, spectrum.dims):
        gaps = np.abs(dim.frequencies[:, None] - axis[None, :])
        nearest = np.argmin(gaps, axis=1)
        positions.append(np.where(gaps[np.arange(len(nearest)), nearest] <= tol, nearest, -1))
    grids = np.meshgrid(*[np.arange(dim.distinct_count) for dim in spectrum.dims], indexing="ij")
    index = np.stack([g.reshape(-1) for g in grids], axis=1)
    redundancies, magnitudes = [], []
    for row in index:
        cell = tuple(int(positions[k][i]) for k, i in enumerate(row))
        if min(cell) < 0:
            continue
        redundancies.append(math.prod(spectrum.dims[k].redundancies[i] for k, i in enumerate(row)))
        magnitudes.append(float(empirical.magnitudes[cell]))
    return rank_correlation(redundancies, magnitudes)


@dataclass(frozen=True)
class Packet:
    low: float
    high: float
    count: int
    redundancy: int


def detect_packets(
    frequencies: Sequence[float],
    redundancies: Optional[Sequence[int]] = None,
    gap: float = 0.5,
) -> List[Packet]:
    """Split sorted 1-d frequencies wherever consecutive values are more than `gap` apart"""
    values = np.asarray(frequencies, dtype=float)
    if values.size == 0:
        return []
    weights = np.ones(values.shape[0], dtype=int) if redundancies is None else np.asarray(redundancies)
    order = np.argsort(values, kind="stable")
    values, weights = values[order], weights[order]
    cuts = np.flatnonzero(np.diff(values) > gap) + 1
    packets = []
    for chunk, w in zip(np.split(values, cuts), np.split(weights, cuts)):
        packets.append(Packet(float(chunk[0]), float(chunk[-1]), int(chunk.size), int(np.sum(w))))
    return packets


def omega_effective(empirical: EmpiricalSpectrum, threshold: float = 0.01) -> float:
    """Largest frequency norm whose magnitude exceeds threshold x the maximum magnitude"""
    magnitudes = empirical.magnitudes.reshape(-1)
    peak = float(np.max(magnitudes))
    if peak == 0:
        return 0.0
    norms = np.linalg.norm(empirical.frequency_vectors(), axis=1)
    return float(np.max(norms[magnitudes > threshold * peak]))


@dataclass(frozen=True)
class BoundInputs:
    d: int
    epsilon: float
    delta: float
    lambda0: float = 1.0
    sigma_y: float = 1.0
    diameter: float = 2 * math.pi
    L: Optional[int] = None
    omega_max: Optional[float] = None
    step: Optional[float] = None
    sigma_p: Optional[float] = None
    f_inf: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError(f"d must be positive, got {self.d}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.lambda0 > 0:
            raise ConfigError(f"lambda0 must be positive, got {self.lambda0}")
        if self.sigma_y < 0 or self.diameter <= 0:
            raise ConfigError("sigma_y must be non-negative and the domain diameter positive")
        if self.step is not None and not self.step > 0:
            raise ConfigError(f"grid step must be positive, got {self.step}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoundInputs":
        names = set(cls.__dataclass_fields__)
        unknown = set(data) - names - {"kind", "D"}
        if unknown:
            raise ConfigError(f"unknown bound inputs {sorted(unknown)}")
        try:
            return cls(**{k: v for k, v in data.items() if k in names})
        except TypeError as e:
            raise ConfigError(f"invalid bound inputs: {e}") from e

    def resolved_sigma_p(self) -> float:
        if self.sigma_p is not None:
            return self.sigma_p
        if self.L is not None:
            return pauli_sigma_p(self.L, self.d)
        raise ConfigError("bound needs sigma_p or the Pauli depth L")


@dataclass(frozen=True)
class BoundReport:
    samples: float
    prefactor: float
    bracket: float
    sigma_p: Optional[float]
    formula: str
    notes: str = ""
    inputs: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {**self.inputs, "D_bound": self.samples, "prefactor": self.prefactor,
                "bracket": self.bracket, "sigma_p": self.sigma_p, "formula": self.formula, "notes": self.notes}


def bound_rff_kernel(inputs: BoundInputs, D: float) -> float:
    """66 (σ_p|X|/ε)² exp(−D ε² / (4(d+2))), unclamped"""
    ratio = inputs.resolved_sigma_p() * inputs.diameter / inputs.epsilon
    return 66.0 * ratio ** 2 * math.exp(-D * inputs.epsilon ** 2 / (4 * (inputs.d + 2)))


def failure_probability(inputs: BoundInputs, D: float) -> float:
    return min(1.0, max(0.0, bound_rff_kernel(inputs, D)))


def _gain(inputs: BoundInputs) -> float:
    return (inputs.lambda0 + 1) * inputs.sigma_y / inputs.lambda0 ** 2


def bound_samples_krr(inputs: BoundInputs) -> BoundReport:
    """Samples for |f − f̃| ≤ ε with probability 1 − δ between exact and RFF kernel ridge"""
    sigma_p = inputs.resolved_sigma_p()
    ratio = _gain(inputs) / inputs.epsilon
    prefactor = inputs.d * ratio ** 2
    bracket = math.log(sigma_p * inputs.diameter) + math.log(ratio) - math.log(inputs.delta)
    return BoundReport(prefactor * bracket, prefactor, bracket, sigma_p,
                       "d g^2/eps^2 [log(sigma_p |X|) + log(g/eps) - log(delta)], g=(lambda0+1) sigma_y/lambda0^2",
                       inputs=asdict(inputs))


def bound_samples_pauli(inputs: BoundInputs) -> BoundReport:
    """Kernel-ridge bound with the Pauli second moment σ_p = dL(L+1)/3"""
    if inputs.L is None:
        raise ConfigError("Pauli bound needs L")
    pauli_inputs = BoundInputs(**{**asdict(inputs), "sigma_p": pauli_sigma_p(inputs.L, inputs.d)})
    report = bound_samples_krr(pauli_inputs)
    notes = "C1=g^2 and C2=g taken from the kernel-ridge bound; sigma_p=dL(L+1)/3"
    return BoundReport(report.samples, report.prefactor, report.bracket, report.sigma_p,
                       report.formula, notes, asdict(inputs))


def bound_samples_grid(inputs: BoundInputs) -> BoundReport:
    """
    Grid-sampling bound with effective tolerance e = ε − sC, C = |X| |f|_∞:
    d (g/e)² [log(ω_max/s) + log(g/e) − log δ].
    """
    if inputs.omega_max is None or inputs.step is None:
        raise ConfigError("grid bound needs omega_max and step")
    if inputs.f_inf is None:
        raise ConfigError("grid bound needs f_inf (estimate it as max |y|)")
    C = inputs.diameter * inputs.f_inf
    if C > 0 and inputs.step >= inputs.epsilon / C:
        raise StepTooCoarse(f"grid step {inputs.step} must be below epsilon / C = {inputs.epsilon / C}")
    effective = inputs.epsilon - inputs.step * C
    ratio = _gain(inputs) / effective
    prefactor = inputs.d * ratio ** 2
    bracket = math.log(inputs.omega_max / inputs.step) + math.log(ratio) - math.log(inputs.delta)
    return BoundReport(prefactor * bracket, prefactor, bracket, None,
                       "d (g/e)^2 [log(omega_max/s) + log(g/e) - log(delta)], e=eps - s |X| |f|_inf",
                       f"C={C}", asdict(inputs))


@dataclass(frozen=True, eq=False)
class FourierSeries:
    """Σ a_ω cos(ωᵀx) + b_ω sin(ωᵀx)"""

    frequencies: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        if freqs.ndim == 1:
            freqs = freqs[:, None]
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if not freqs.shape[0] == a.shape[0] == b.shape[0]:
            raise ShapeError(f"{freqs.shape[0]} frequencies with {a.shape[0]} cosine and {b.shape[0]} sine terms")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    @property
    def coefficient_mass(self) -> float:
        return float(np.sum(np.abs(self.a)) + np.sum(np.abs(self.b)))

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.d == 1 else X[None, :]
        phase = X @ self.frequencies.T
        return np.cos(phase) @ self.a + np.sin(phase) @ self.b

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.evaluate(X)


def nearest_node(frequencies: np.ndarray, step: float) -> np.ndarray:
    """Component-wise nearest multiple of step, ties toward zero"""
    u = np.asarray(frequencies, dtype=float) / step
    return step * np.sign(u) * np.ceil(np.abs(u) - 0.5)


def grid_shift_construction(series: FourierSeries, step: float, diameter: float) -> Tuple[FourierSeries, float]:
    """
    Move every frequency onto the lattice s·Z^d, keeping its coefficients.

    Returns the shifted series and the certified sup-error bound
    s·max(1, √d/2)·|X|·Σ(|a| + |b|).
    """
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    shifted = FourierSeries(nearest_node(series.frequencies, step), series.a, series.b)
    bound = step * max(1.0, math.sqrt(series.d) / 2) * diameter * series.coefficient_mass
    return shifted, bound


def spectrum_residual(evaluator: Evaluator, spectrum, X: np.ndarray) -> float:
    """Relative least-squares residual of evaluator samples against the Ω₊ cos/sin span"""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    vectors, _ = positive_half(spectrum)
    if vectors.shape[1] != X.shape[1]:
        raise ShapeError(f"{vectors.shape[1]}-dimensional spectrum for {X.shape[1]}-dimensional inputs")
    phase = X @ vectors.T
    basis = np.hstack([np.cos(phase), np.sin(phase)])
    y = np.asarray(evaluator(X), dtype=float)
    coefficients, *_ = linalg.lstsq(basis, y)
    norm = float(np.linalg.norm(y))
    residual = float(np.linalg.norm(y - basis @ coefficients))
    return residual / norm if norm > 0 else residual
