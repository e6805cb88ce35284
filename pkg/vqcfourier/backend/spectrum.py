"""
Frequency spectrum of a variational circuit from its encoding eigenvalues.

For each input dimension the accessible frequencies are all differences
Λ_i - Λ_j of eigenvalue sums Λ_i = β_1 λ_1^{i_1} + ... + β_L λ_L^{i_L}; the
redundancy of a frequency is the number of (i, j) pairs producing it. The
Cartesian product over dimensions is never materialized unless asked for.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..shared.config import get_settings
from ..shared.errors import InvalidSpec, SpectrumTooLarge
from .operators import HamiltonianSpec, build_matrix, eigendecompose, pauli_encoding

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EncodingLayout:
    """Encoding gates per input dimension, with their scaling factors"""

    gates: Tuple[Tuple[HamiltonianSpec, ...], ...]
    scalings: Tuple[Tuple[float, ...], ...] = ()

    def __post_init__(self):
        if not self.gates:
            raise InvalidSpec("layout needs at least one input dimension")
        scalings = self.scalings or tuple((1.0,) * len(g) for g in self.gates)
        if len(scalings) != len(self.gates):
            raise InvalidSpec("one scaling list per dimension is required")
        for k, (gates, betas) in enumerate(zip(self.gates, scalings)):
            if not gates:
                raise InvalidSpec(f"dimension {k} has no encoding gate")
            if len(betas) != len(gates):
                raise InvalidSpec(f"dimension {k}: {len(gates)} gates but {len(betas)} scalings")
            for beta in betas:
                if not math.isfinite(beta) or beta == 0:
                    raise InvalidSpec(f"dimension {k}: scaling factors must be finite and nonzero, got {beta}")
        object.__setattr__(self, "scalings", tuple(tuple(float(b) for b in s) for s in scalings))

    @property
    def dims(self) -> int:
        return len(self.gates)

    @cached_property
    def eigenvalues(self) -> Tuple[Tuple[np.ndarray, ...], ...]:
        """Unscaled eigenvalues of every encoding gate"""
        cache: Dict[int, np.ndarray] = {}
        out = []
        for gates in self.gates:
            row = []
            for spec in gates:
                if id(spec) not in cache:
                    cache[id(spec)] = eigendecompose(build_matrix(spec)).eigenvalues
                row.append(cache[id(spec)])
            out.append(tuple(row))
        return tuple(out)

    @classmethod
    def pauli(cls, L: int, d: int = 1, scalings: Optional[Sequence[float]] = None) -> "EncodingLayout":
        if L < 1 or d < 1:
            raise InvalidSpec(f"Pauli layout needs L >= 1 and d >= 1, got L={L}, d={d}")
        gate = pauli_encoding("Z")
        betas = tuple(float(b) for b in scalings) if scalings is not None else (1.0,) * L
        return cls(tuple((gate,) * L for _ in range(d)), tuple(betas for _ in range(d)))

    @classmethod
    def exponential(cls, L: int, d: int = 1) -> "EncodingLayout":
        """Pauli gates scaled by 3^(l-1): 3^L distinct frequencies per dimension"""
        return cls.pauli(L, d, scalings=[3.0 ** l for l in range(L)])


def layout_from_dict(data: Dict[str, Any]) -> EncodingLayout:
    if "pauli" in data:
        p = data["pauli"]
        return EncodingLayout.pauli(int(p["L"]), int(p.get("d", 1)), p.get("scalings"))
    if "exponential" in data:
        p = data["exponential"]
        return EncodingLayout.exponential(int(p["L"]), int(p.get("d", 1)))
    if "dims" in data:
        gates, scalings = [], []
        for k, dim in enumerate(data["dims"]):
            specs = tuple(HamiltonianSpec.from_dict(h) for h in dim.get("gates", []))
            gates.append(specs)
            scalings.append(tuple(dim.get("scalings", [1.0] * len(specs))))
        return EncodingLayout(tuple(gates), tuple(scalings))
    raise InvalidSpec("layout needs one of 'pauli', 'exponential' or 'dims'")


@dataclass(frozen=True, eq=False)
class DimensionSpectrum:
    frequencies: np.ndarray
    redundancies: Tuple[int, ...]

    @property
    def distinct_count(self) -> int:
        return len(self.redundancies)

    @property
    def total_pairs(self) -> int:
        return sum(self.redundancies)

    @property
    def probabilities(self) -> np.ndarray:
        total = self.total_pairs
        return np.array([r / total for r in self.redundancies], dtype=float)

    @property
    def max_frequency(self) -> float:
        return float(np.max(np.abs(self.frequencies)))


@dataclass(frozen=True, eq=False)
class Spectrum:
    dims: Tuple[DimensionSpectrum, ...]
    tol: float = 1e-9

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def distinct_counts(self) -> Tuple[int, ...]:
        return tuple(dim.distinct_count for dim in self.dims)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for k, dim in enumerate(self.dims):
            for freq, red in zip(dim.frequencies, dim.redundancies):
                rows.append({"dim": k, "frequency": float(freq), "redundancy": red})
        return pd.DataFrame(rows, columns=["dim", "frequency", "redundancy"])

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class SpectrumSize:
    distinct_per_dim: Tuple[int, ...]
    total: int
    positive: int


def _collapse(values: np.ndarray, counts: Sequence[int], tol: float) -> Tuple[np.ndarray, List[int]]:
    """Merge values closer than tol (chained); representative is the count-weighted mean"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values, []
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    sorted_counts = np.asarray(counts, dtype=np.int64)[order]
    starts = np.flatnonzero(np.concatenate(([True], np.diff(sorted_values) > tol)))
    group_counts = np.add.reduceat(sorted_counts, starts)
    weighted = np.add.reduceat(sorted_values * sorted_counts, starts)
    return weighted / group_counts, [int(c) for c in group_counts]


def lambda_sums(
    eigenvalue_lists: Sequence[np.ndarray],
    scalings: Optional[Sequence[float]] = None,
    tol: Optional[float] = None,
    cap: Optional[int] = None,
) -> Tuple[np.ndarray, List[int]]:
    """All eigenvalue sums, one per multi-index, as (value, multiplicity) pairs"""
    settings = get_settings()
    tol = settings.freq_tol if tol is None else tol
    cap = settings.enum_cap if cap is None else cap
    scalings = [1.0] * len(eigenvalue_lists) if scalings is None else list(scalings)
    product = 1
    for eigs in eigenvalue_lists:
        if len(eigs) == 0:
            raise InvalidSpec("every encoding gate needs at least one eigenvalue")
        product *= len(eigs)
    if product > cap:
        raise SpectrumTooLarge(f"{product} eigenvalue paths exceed the enumeration cap of {cap}")

    values, counts = np.zeros(1), [1]
    for eigs, beta in zip(eigenvalue_lists, scalings):
        gate_values, gate_counts = _collapse(beta * np.asarray(eigs, dtype=float), [1] * len(eigs), tol)
        values = (values[:, None] + gate_values[None, :]).reshape(-1)
        counts = [c * g for c in counts for g in gate_counts]
        values, counts = _collapse(values, counts, tol)
    return values, counts


def _two_level(eigs: np.ndarray, tol: float) -> Optional[Tuple[float, int]]:
    """(c, m) when the eigenvalues are ±c each with multiplicity m"""
    values, counts = _collapse(eigs, [1] * len(eigs), tol)
    if len(values) != 2 or counts[0] != counts[1] or abs(values[0] + values[1]) > tol:
        return None
    return float(values[1]), counts[0]


def _pauli_fast_path(layout: EncodingLayout, k: int, tol: float) -> Optional[DimensionSpectrum]:
    """Closed form when every gate is two-level ±c with the same scaled spread"""
    spreads, multiplicity = [], 1
    for eigs, beta in zip(layout.eigenvalues[k], layout.scalings[k]):
        level = _two_level(eigs, tol)
        if level is None:
            return None
        c, m = level
        spreads.append(abs(beta) * c)
        multiplicity *= m * m
    if max(spreads) - min(spreads) > tol:
        return None
    L, step = len(spreads), 2 * spreads[0]
    ks = np.arange(-L, L + 1)
    # Vandermonde: pairs with (#plus_i - #plus_j) = k number C(2L, L + k).
    redundancies = tuple(math.comb(2 * L, L + int(j)) * multiplicity for j in ks)
    return DimensionSpectrum(step * ks.astype(float), redundancies)


def _symmetrize(frequencies: np.ndarray) -> np.ndarray:
    return (frequencies - frequencies[::-1]) / 2


def build_dimension_spectrum(
    layout: EncodingLayout, k: int, tol: Optional[float] = None, cap: Optional[int] = None
) -> DimensionSpectrum:
    settings = get_settings()
    tol = settings.freq_tol if tol is None else tol
    cap = settings.enum_cap if cap is None else cap
    if not 0 <= k < layout.dims:
        raise InvalidSpec(f"dimension {k} out of range for a {layout.dims}-dimensional layout")
    fast = _pauli_fast_path(layout, k, tol)
    if fast is not None:
        return fast
    values, counts = lambda_sums(layout.eigenvalues[k], layout.scalings[k], tol, cap)
    if len(values) ** 2 > cap:
        raise SpectrumTooLarge(f"{len(values) ** 2} eigenvalue-sum pairs exceed the enumeration cap of {cap}")
    diffs = (values[:, None] - values[None, :]).reshape(-1)
    pair_counts = [a * b for a in counts for b in counts]
    frequencies, redundancies = _collapse(diffs, pair_counts, tol)
    return DimensionSpectrum(_symmetrize(frequencies), tuple(redundancies))


def build_spectrum(layout: EncodingLayout, tol: Optional[float] = None, cap: Optional[int] = None) -> Spectrum:
    tol = get_settings().freq_tol if tol is None else tol
    dims = tuple(build_dimension_spectrum(layout, k, tol, cap) for k in range(layout.dims))
    return Spectrum(dims, tol)


def max_frequency(layout: EncodingLayout, k: int) -> float:
    """Largest frequency of dimension k without enumerating: sum of scaled eigenvalue spreads"""
    return float(sum(abs(beta) * (float(np.max(e)) - float(np.min(e)))
                     for e, beta in zip(layout.eigenvalues[k], layout.scalings[k])))


def _frequency_lists(spectrum) -> List[np.ndarray]:
    if isinstance(spectrum, Spectrum):
        return [dim.frequencies for dim in spectrum.dims]
    return [np.asarray(f, dtype=float) for f in spectrum]


def positive_half(spectrum, tol: Optional[float] = None, cap: Optional[int] = None) -> Tuple[np.ndarray, List[int]]:
    """
    One representative per ±ω pair plus the zero vector.

    Takes a Spectrum (redundancies are the products of per-dimension
    redundancies) or plain per-dimension frequency lists (redundancy 1).
    The kept representative has its first nonzero component positive.
    """
    settings = get_settings()
    tol = settings.freq_tol if tol is None else tol
    cap = settings.enum_cap if cap is None else cap
    lists = _frequency_lists(spectrum)
    total = math.prod(len(f) for f in lists)
    if total > cap:
        raise SpectrumTooLarge(f"{total} frequency vectors exceed the enumeration cap of {cap}")
    grids = np.meshgrid(*[np.arange(len(f)) for f in lists], indexing="ij")
    index = np.stack([g.reshape(-1) for g in grids], axis=1)
    vectors = np.stack([lists[k][index[:, k]] for k in range(len(lists))], axis=1)

    nonzero = np.abs(vectors) > tol
    has_nonzero = nonzero.any(axis=1)
    first = np.argmax(nonzero, axis=1)
    lead = vectors[np.arange(len(vectors)), first]
    keep = (~has_nonzero) | (lead > 0)
    if isinstance(spectrum, Spectrum):
        per_dim = [dim.redundancies for dim in spectrum.dims]
        redundancies = [math.prod(per_dim[k][i] for k, i in enumerate(row)) for row in index[keep]]
    else:
        redundancies = [1] * int(keep.sum())
    return vectors[keep], redundancies


def spectrum_size(layout: EncodingLayout, tol: Optional[float] = None) -> SpectrumSize:
    distinct = tuple(build_dimension_spectrum(layout, k, tol).distinct_count for k in range(layout.dims))
    total = math.prod(distinct)
    return SpectrumSize(distinct, total, (total - 1) // 2 + 1)


def pauli_sigma_p(L: int, d: int) -> float:
    """Closed form of the uniform second moment over [-L, L]^d"""
    return d * L * (L + 1) / 3


def variance_sigma_p(
    spectrum: Optional[Spectrum] = None,
    pauli: Optional[Tuple[int, int]] = None,
    weighted: bool = False,
) -> float:
    """
    Second moment E[ω^T ω] of the frequency law.

    Uniform over distinct frequency vectors by default; redundancy-weighted
    (the law Tree sampling draws from) when weighted=True. Both factor over
    dimensions. Pass pauli=(L, d) for the closed form instead.
    """
    if pauli is not None:
        return pauli_sigma_p(*pauli)
    if spectrum is None:
        raise InvalidSpec("variance_sigma_p needs a spectrum or pauli=(L, d)")
    total = 0.0
    for dim in spectrum.dims:
        squares = dim.frequencies ** 2
        if weighted:
            total += float(np.dot(dim.probabilities, squares))
        else:
            total += float(np.mean(squares))
    return total
