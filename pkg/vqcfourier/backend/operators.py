"""
Dense complex linear algebra for encoding Hamiltonians.

Qubit ordering is little-endian everywhere: qubit 0 is the least-significant
tensor slot, so an operator on qubits (p-1, ..., 0) is A_{p-1} ⊗ ... ⊗ A_0 and
basis index i has bit q equal to the state of qubit q.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..shared.config import get_settings
from ..shared.errors import InvalidSpec, NotHermitian, ShapeError

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Control is gate qubit 0, target is gate qubit 1 (little-endian gate basis).
CNOT = np.array(
    [[1, 0, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0],
     [0, 1, 0, 0]],
    dtype=complex,
)


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    factors: Tuple[Tuple[int, str], ...]

    def __post_init__(self):
        if not math.isfinite(self.coefficient):
            raise InvalidSpec(f"Pauli coefficient must be finite, got {self.coefficient}")
        seen = set()
        for qubit, axis in self.factors:
            if axis not in ("X", "Y", "Z"):
                raise InvalidSpec(f"unknown Pauli axis {axis!r}")
            if qubit < 0:
                raise InvalidSpec(f"negative qubit index {qubit}")
            if qubit in seen:
                raise InvalidSpec(f"qubit {qubit} appears twice in one Pauli term")
            seen.add(qubit)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PauliTerm":
        try:
            ops = tuple((int(q), str(a).upper()) for q, a in data.get("ops", []))
            return cls(float(data["coeff"]), ops)
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidSpec(f"malformed Pauli term {data!r}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {"coeff": self.coefficient, "ops": [[q, a] for q, a in self.factors]}


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Encoding generator: a Pauli sum or an explicit Hermitian matrix"""

    num_qubits: int
    pauli_terms: Optional[Tuple[PauliTerm, ...]] = None
    matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        settings = get_settings()
        if self.num_qubits < 1:
            raise InvalidSpec(f"num_qubits must be positive, got {self.num_qubits}")
        if self.num_qubits > settings.max_qubits:
            raise InvalidSpec(
                f"{self.num_qubits} qubits exceeds the configured maximum of {settings.max_qubits}"
            )
        if (self.pauli_terms is None) == (self.matrix is None):
            raise InvalidSpec("HamiltonianSpec needs exactly one of pauli_terms or matrix")
        if self.pauli_terms is not None:
            for term in self.pauli_terms:
                for qubit, _ in term.factors:
                    if qubit >= self.num_qubits:
                        raise InvalidSpec(f"qubit index {qubit} out of range for {self.num_qubits} qubits")
        else:
            dim = 2 ** self.num_qubits
            matrix = np.asarray(self.matrix, dtype=complex)
            if matrix.shape != (dim, dim):
                raise ShapeError(f"matrix shape {matrix.shape} does not match {self.num_qubits} qubits")
            check_hermitian(matrix)
            matrix.setflags(write=False)
            object.__setattr__(self, "matrix", matrix)

    @classmethod
    def pauli(cls, num_qubits: int, terms: Iterable[Tuple[float, Sequence[Tuple[int, str]]]]) -> "HamiltonianSpec":
        return cls(num_qubits, tuple(PauliTerm(float(c), tuple((int(q), a) for q, a in ops)) for c, ops in terms))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "HamiltonianSpec":
        matrix = np.asarray(matrix, dtype=complex)
        num_qubits = int(round(math.log2(matrix.shape[0]))) if matrix.ndim == 2 and matrix.shape[0] > 0 else 0
        if matrix.ndim != 2 or matrix.shape[0] != 2 ** num_qubits:
            raise ShapeError(f"matrix of shape {matrix.shape} is not 2^p x 2^p")
        return cls(num_qubits, matrix=matrix)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HamiltonianSpec":
        if "pauli_terms" in data:
            if "qubits" not in data:
                raise InvalidSpec("Pauli-sum Hamiltonian needs 'qubits'")
            terms = tuple(PauliTerm.from_dict(t) for t in data["pauli_terms"])
            return cls(int(data["qubits"]), terms)
        if "matrix" in data:
            entries = np.asarray(data["matrix"], dtype=float)
            if entries.shape[-1] != 2:
                raise ShapeError("matrix entries must be [re, im] pairs")
            values = entries[..., 0] + 1j * entries[..., 1]
            size = values.size
            dim = int(round(math.sqrt(size)))
            if dim * dim != size:
                raise ShapeError(f"{size} matrix entries do not form a square matrix")
            spec = cls.from_matrix(values.reshape(dim, dim))
            if "qubits" in data and int(data["qubits"]) != spec.num_qubits:
                raise ShapeError(f"'qubits'={data['qubits']} disagrees with a {dim}x{dim} matrix")
            return spec
        raise InvalidSpec("Hamiltonian needs 'pauli_terms' or 'matrix'")

    def to_dict(self) -> Dict[str, Any]:
        if self.pauli_terms is not None:
            return {"qubits": self.num_qubits, "pauli_terms": [t.to_dict() for t in self.pauli_terms]}
        flat = self.matrix.reshape(-1)
        return {"qubits": self.num_qubits, "matrix": [[float(v.real), float(v.imag)] for v in flat]}


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


def check_hermitian(H: np.ndarray, tol: Optional[float] = None) -> None:
    tol = get_settings().hermitian_tol if tol is None else tol
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {H.shape}")
    error = float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0
    if error > tol:
        raise NotHermitian(f"matrix is not Hermitian: max |H - H^dagger| = {error:.3e} > {tol:.0e}")


def pauli_string(factors: Sequence[Tuple[int, str]], num_qubits: int) -> np.ndarray:
    """Tensor product of factors with identity on untouched qubits"""
    slots = ["I"] * num_qubits
    for qubit, axis in factors:
        if qubit >= num_qubits:
            raise InvalidSpec(f"qubit index {qubit} out of range for {num_qubits} qubits")
        slots[qubit] = axis
    out = np.ones((1, 1), dtype=complex)
    for qubit in reversed(range(num_qubits)):
        out = np.kron(out, PAULI[slots[qubit]])
    return out


def build_matrix(spec: HamiltonianSpec) -> np.ndarray:
    if spec.matrix is not None:
        return np.array(spec.matrix)
    dim = 2 ** spec.num_qubits
    H = np.zeros((dim, dim), dtype=complex)
    for term in spec.pauli_terms:
        H += term.coefficient * pauli_string(term.factors, spec.num_qubits)
    return H


def eigendecompose(H: np.ndarray) -> EigenDecomposition:
    H = np.asarray(H, dtype=complex)
    check_hermitian(H)
    # Symmetrize away the sub-tolerance anti-Hermitian part before eigh.
    eigenvalues, eigenvectors = linalg.eigh((H + H.conj().T) / 2)
    return EigenDecomposition(eigenvalues, eigenvectors)


def evolution(eig: EigenDecomposition, x: float) -> np.ndarray:
    """exp(-i x H) from its eigendecomposition"""
    phases = np.exp(-1j * x * eig.eigenvalues)
    return (eig.eigenvectors * phases) @ eig.eigenvectors.conj().T


def evolution_batch(eig: EigenDecomposition, xs: np.ndarray) -> np.ndarray:
    """exp(-i x H) for every x in xs, shape (len(xs), 2^p, 2^p)"""
    phases = np.exp(-1j * np.outer(np.asarray(xs, dtype=float), eig.eigenvalues))
    V = eig.eigenvectors
    return np.einsum("ak,mk,bk->mab", V, phases, V.conj(), optimize=True)


def _check_targets(targets: Sequence[int], n: int, p: int) -> None:
    if len(set(targets)) != len(targets):
        raise InvalidSpec(f"duplicate target qubits {list(targets)}")
    if len(targets) != p:
        raise ShapeError(f"gate acts on {p} qubits but {len(targets)} targets were given")
    for q in targets:
        if not 0 <= q < n:
            raise InvalidSpec(f"target qubit {q} out of range for {n} qubits")


def apply_gate(state: np.ndarray, gate: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """
    Apply a gate on `targets` to a state of shape (2^n,) or a batch (2^n, M).

    `gate` is either one (2^p, 2^p) matrix or a stack (M, 2^p, 2^p), one per
    batch column. Gate qubit k acts on qubit targets[k].
    """
    p = int(round(math.log2(gate.shape[-1])))
    _check_targets(targets, n, p)
    batch = state.shape[1:]
    psi = state.reshape((2,) * n + batch)
    # Tensor axis 0 is the most significant qubit (n-1); gate axes run from gate qubit p-1 down.
    axes = [n - 1 - targets[k] for k in reversed(range(p))]
    psi = np.moveaxis(psi, axes, list(range(p)))
    moved_shape = psi.shape
    psi = psi.reshape((2 ** p, -1) + batch)
    if gate.ndim == 2:
        out = np.tensordot(gate, psi, axes=(1, 0))
    else:
        if not batch or gate.shape[0] != batch[0]:
            raise ShapeError(f"{gate.shape[0]} per-sample gates for a batch of shape {batch}")
        out = np.einsum("mab,brm->arm", gate, psi, optimize=True)
    out = np.moveaxis(out.reshape(moved_shape), list(range(p)), axes)
    return out.reshape(state.shape)


def embed(gate: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n operator acting as `gate` on `targets`, identity elsewhere"""
    gate = np.asarray(gate, dtype=complex)
    return apply_gate(np.eye(2 ** n, dtype=complex), gate, list(targets), n)


def rotation(axis: str, theta: float) -> np.ndarray:
    """exp(-i theta sigma / 2)"""
    return math.cos(theta / 2) * PAULI["I"] - 1j * math.sin(theta / 2) * PAULI[axis]


def pauli_encoding(axis: str = "Z") -> HamiltonianSpec:
    """Single-qubit sigma/2 generator, eigenvalues ±1/2"""
    return HamiltonianSpec.pauli(1, [(0.5, [(0, axis)])])


def h_xyz(
    num_qubits: int,
    couplings: Dict[Tuple[int, int], Tuple[float, float, float]],
    fields: Optional[Dict[int, Tuple[str, float]]] = None,
) -> HamiltonianSpec:
    """Two-body interaction Hamiltonian: sum alpha XX + beta YY + gamma ZZ + sum delta P"""
    terms: List[Tuple[float, List[Tuple[int, str]]]] = []
    for (i, j), (alpha, beta, gamma) in couplings.items():
        for coeff, axis in ((alpha, "X"), (beta, "Y"), (gamma, "Z")):
            if coeff:
                terms.append((coeff, [(i, axis), (j, axis)]))
    for i, (axis, delta) in (fields or {}).items():
        if delta:
            terms.append((delta, [(i, axis)]))
    return HamiltonianSpec.pauli(num_qubits, terms)


def footnote_h_xyz() -> HamiltonianSpec:
    """3-qubit H_XYZ used for the rich-spectrum random circuits"""
    return HamiltonianSpec.pauli(3, [
        (7.0, [(0, "X"), (1, "X")]),
        (7.0, [(1, "X"), (0, "X")]),
        (0.11, [(0, "X"), (2, "X")]),
        (0.1, [(2, "X"), (0, "X")]),
        (8.0, [(1, "Y"), (2, "Y")]),
        (8.0, [(2, "Y"), (1, "Y")]),
        (8.0, [(0, "Z"), (2, "Z")]),
        (8.0, [(2, "Z"), (0, "Z")]),
    ])
