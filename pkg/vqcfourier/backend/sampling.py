"""Distinct, Tree and Grid frequency sampling."""

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..shared.config import get_settings
from ..shared.errors import ConfigError, InsufficientPopulation
from ..shared.utils import RNG_ALGORITHM, make_rng
from .spectrum import EncodingLayout, Spectrum, positive_half

logger = logging.getLogger(__name__)


class Strategy(str, Enum):
    DISTINCT = "distinct"
    TREE = "tree"
    GRID = "grid"


@dataclass(frozen=True)
class SamplingConfig:
    strategy: Strategy
    D: int
    seed: int = 0
    omega_max: Union[float, Tuple[float, ...], None] = None
    step: Optional[float] = None
    replacement: Optional[bool] = None
    all_pairs: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.D < 1:
            raise ConfigError(f"D must be at least 1, got {self.D}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.strategy is Strategy.GRID:
            if self.omega_max is None or self.step is None:
                raise ConfigError("grid sampling needs omega_max and step")
            if self.step <= 0:
                raise ConfigError(f"grid step must be positive, got {self.step}")
            for w in np.atleast_1d(self.omega_max):
                if w <= 0:
                    raise ConfigError(f"omega_max must be positive, got {w}")
                if self.step > w:
                    raise ConfigError(f"grid step {self.step} exceeds omega_max {w}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SamplingConfig":
        try:
            omega_max = data.get("omega_max")
            if isinstance(omega_max, (list, tuple)):
                omega_max = tuple(float(w) for w in omega_max)
            elif omega_max is not None:
                omega_max = float(omega_max)
            return cls(
                strategy=Strategy(str(data["strategy"]).lower()),
                D=int(data["D"]),
                seed=int(data.get("seed", 0)),
                omega_max=omega_max,
                step=None if data.get("step") is None else float(data["step"]),
                replacement=data.get("replacement"),
                all_pairs=bool(data.get("all_pairs", False)),
            )
        except KeyError as e:
            raise ConfigError(f"sampling config missing {e}") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid sampling config: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["strategy"] = self.strategy.value
        return out


@dataclass(frozen=True, eq=False)
class FrequencySample:
    vectors: np.ndarray
    strategy: Strategy
    seed: int
    rng: str = RNG_ALGORITHM

    @property
    def D(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.vectors, columns=[f"w{k + 1}" for k in range(self.d)])

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def _enumerable(spectrum: Spectrum) -> bool:
    return math.prod(spectrum.distinct_counts) <= get_settings().enum_cap


def sample_distinct(spectrum: Spectrum, config: SamplingConfig) -> FrequencySample:
    """
    Uniform over distinct frequencies, redundancy ignored.

    Without replacement draws from Ω₊. With replacement draws each component
    independently from its dimension's distinct values. When replacement is
    unset it is used only if Ω₊ cannot be enumerated or is smaller than D.
    """
    rng = make_rng(config.seed)
    replacement = config.replacement
    if replacement is None:
        replacement = True
        if not _enumerable(spectrum):
            logger.info("Spectrum too large to enumerate; drawing distinct frequencies with replacement")
        elif config.D > (math.prod(spectrum.distinct_counts) - 1) // 2 + 1:
            logger.warning("D=%d exceeds |omega_plus|=%d; drawing distinct frequencies with replacement",
                           config.D, (math.prod(spectrum.distinct_counts) - 1) // 2 + 1)
        else:
            replacement = False
    if not replacement:
        population, _ = positive_half(spectrum, tol=spectrum.tol)
        if config.D > len(population):
            raise InsufficientPopulation(
                f"cannot draw {config.D} distinct frequencies from {len(population)} without replacement"
            )
        # Permutation prefix: samples of growing D under one seed are nested.
        picks = rng.permutation(len(population))[: config.D]
        vectors = population[picks]
    else:
        # Lazy Cartesian draw: one distinct value per dimension, independently.
        vectors = np.stack(
            [dim.frequencies[rng.integers(0, dim.distinct_count, size=config.D)] for dim in spectrum.dims],
            axis=1,
        )
    return FrequencySample(np.asarray(vectors, dtype=float), Strategy.DISTINCT, config.seed)


def _tree_paths(layout: EncodingLayout, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalue sums of n_paths random root-to-leaf paths, shape (n_paths, d)"""
    sums = np.zeros((n_paths, layout.dims))
    for k in range(layout.dims):
        for eigs, beta in zip(layout.eigenvalues[k], layout.scalings[k]):
            picks = rng.integers(0, len(eigs), size=n_paths)
            sums[:, k] += beta * eigs[picks]
    return sums


def sample_tree(layout: EncodingLayout, config: SamplingConfig) -> FrequencySample:
    """
    Redundancy-weighted sampling through the eigenvalue tree.

    By default 2D paths are drawn and paired disjointly (2k with 2k+1), giving
    D i.i.d. frequencies. With all_pairs, D paths give every difference of a
    pair i < j plus the zero vector, C(D, 2) + 1 frequencies.
    """
    rng = make_rng(config.seed)
    if config.all_pairs:
        paths = _tree_paths(layout, config.D, rng)
        i, j = np.triu_indices(config.D, k=1)
        vectors = np.vstack([np.zeros((1, layout.dims)), paths[i] - paths[j]])
    else:
        paths = _tree_paths(layout, 2 * config.D, rng)
        vectors = paths[0::2] - paths[1::2]
    return FrequencySample(vectors, Strategy.TREE, config.seed)


def grid_nodes(omega_max: float, step: float) -> np.ndarray:
    """Half-open grid {j s : j = 0 .. ceil(omega_max / s) - 1}"""
    count = max(1, math.ceil(round(omega_max / step, 9)))
    return step * np.arange(count, dtype=float)


def sample_grid(config: SamplingConfig, d: int) -> FrequencySample:
    rng = make_rng(config.seed)
    omega_max = np.atleast_1d(np.asarray(config.omega_max, dtype=float))
    if omega_max.shape not in ((1,), (d,)):
        raise ConfigError(f"omega_max needs 1 or {d} entries, got shape {omega_max.shape}")
    omega_max = np.broadcast_to(omega_max, (d,))
    columns = []
    for k in range(d):
        nodes = grid_nodes(float(omega_max[k]), config.step)
        columns.append(nodes[rng.integers(0, len(nodes), size=config.D)])
    return FrequencySample(np.stack(columns, axis=1), Strategy.GRID, config.seed)


def default_omega_max(M: int, x_range: float) -> float:
    """Largest frequency the Shannon criterion resolves with M points over x_range"""
    if M < 2:
        raise ConfigError(f"need at least two data points, got {M}")
    if x_range <= 0:
        raise ConfigError(f"input range must be positive, got {x_range}")
    return math.pi * M / x_range


def draw(
    config: SamplingConfig,
    spectrum: Optional[Spectrum] = None,
    layout: Optional[EncodingLayout] = None,
    d: Optional[int] = None,
) -> FrequencySample:
    if config.strategy is Strategy.DISTINCT:
        if spectrum is None:
            raise ConfigError("distinct sampling needs a spectrum")
        return sample_distinct(spectrum, config)
    if config.strategy is Strategy.TREE:
        if layout is None:
            raise ConfigError("tree sampling needs an encoding layout")
        return sample_tree(layout, config)
    if d is None:
        d = spectrum.d if spectrum is not None else layout.dims if layout is not None else None
    if d is None:
        raise ConfigError("grid sampling needs the input dimension")
    return sample_grid(config, d)


def empirical_law(vectors: np.ndarray, support: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Fraction of sampled 1-d frequencies at each support value"""
    values = np.asarray(vectors, dtype=float).reshape(-1)
    hits = np.abs(values[:, None] - np.asarray(support, dtype=float)[None, :]) <= tol
    return hits.sum(axis=0) / len(values)
