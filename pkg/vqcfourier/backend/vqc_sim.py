"""
Statevector simulation of variational circuits.

A circuit is an ordered list of encoding blocks (exp(-i β x_κ H) on a few
target qubits) and ansatz blocks (single-qubit rotations followed by an
optional CNOT ladder). Every evaluation is batched over inputs: the state is
a (2^n, M) array, one column per data point.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..shared.errors import DivergedTraining, InvalidSpec, NumericalError, ShannonViolation, ShapeError
from ..shared.utils import make_rng
from .operators import (
    CNOT,
    EigenDecomposition,
    HamiltonianSpec,
    apply_gate,
    build_matrix,
    eigendecompose,
    evolution_batch,
    footnote_h_xyz,
    pauli_encoding,
    rotation,
)
from .rff import Adam, AdamConfig, Dataset, mse
from .spectrum import EncodingLayout, max_frequency

logger = logging.getLogger(__name__)

AXES = ("X", "Y", "Z")

# Scaled Pauli factors paired with H_XYZ in the complex-encoding circuits.
COMPLEX_POOL_SCALINGS = (26.4309, 34.4309, 22.4309, 0.4309)


@dataclass(frozen=True)
class Rotation:
    axis: str
    qubit: int
    param: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidSpec(f"rotation axis must be one of {AXES}, got {self.axis!r}")


@dataclass(frozen=True, eq=False)
class EncodingBlock:
    dim: int
    hamiltonian: HamiltonianSpec
    targets: Tuple[int, ...]
    scaling: float = 1.0


@dataclass(frozen=True)
class AnsatzBlock:
    rotations: Tuple[Rotation, ...]
    cnot_ladder: bool = True
    repetitions: int = 1


Block = Union[EncodingBlock, AnsatzBlock]


@dataclass(frozen=True, eq=False)
class CircuitDescription:
    n_qubits: int
    blocks: Tuple[Block, ...]
    observable: Optional[HamiltonianSpec] = None
    n_params: Optional[int] = None

    def __post_init__(self):
        n = self.n_qubits
        if n < 1:
            raise InvalidSpec(f"a circuit needs at least one qubit, got {n}")
        used = set()
        dims = set()
        for block in self.blocks:
            if isinstance(block, EncodingBlock):
                if block.hamiltonian.num_qubits != len(block.targets):
                    raise ShapeError(
                        f"{block.hamiltonian.num_qubits}-qubit Hamiltonian on {len(block.targets)} targets"
                    )
                if len(set(block.targets)) != len(block.targets):
                    raise InvalidSpec(f"duplicate encoding targets {block.targets}")
                if any(not 0 <= q < n for q in block.targets):
                    raise InvalidSpec(f"encoding targets {block.targets} out of range for {n} qubits")
                if block.dim < 0:
                    raise InvalidSpec(f"negative input dimension {block.dim}")
                if not math.isfinite(block.scaling) or block.scaling == 0:
                    raise InvalidSpec(f"encoding scaling must be finite and nonzero, got {block.scaling}")
                dims.add(block.dim)
            else:
                if block.repetitions < 1:
                    raise InvalidSpec(f"ansatz repetitions must be positive, got {block.repetitions}")
                for rot in block.rotations:
                    if not 0 <= rot.qubit < n:
                        raise InvalidSpec(f"rotation qubit {rot.qubit} out of range for {n} qubits")
                    if rot.param < 0:
                        raise InvalidSpec(f"negative parameter index {rot.param}")
                    used.add(rot.param)
        if dims and dims != set(range(max(dims) + 1)):
            raise InvalidSpec(f"input dimensions {sorted(dims)} are not contiguous from 0")
        n_params = len(used) if self.n_params is None else self.n_params
        if used != set(range(n_params)):
            raise InvalidSpec(f"parameter indices {sorted(used)} must cover 0..{n_params - 1} exactly")
        object.__setattr__(self, "n_params", n_params)
        observable = self.observable or HamiltonianSpec.pauli(n, [(1.0, [(0, "Z")])])
        if observable.num_qubits != n:
            raise ShapeError(f"observable acts on {observable.num_qubits} qubits, circuit has {n}")
        object.__setattr__(self, "observable", observable)

    @property
    def d(self) -> int:
        dims = [b.dim for b in self.blocks if isinstance(b, EncodingBlock)]
        return max(dims) + 1 if dims else 0

    @cached_property
    def eigs(self) -> Dict[int, EigenDecomposition]:
        """Eigendecomposition per distinct encoding Hamiltonian, keyed by id"""
        out: Dict[int, EigenDecomposition] = {}
        for block in self.blocks:
            if isinstance(block, EncodingBlock) and id(block.hamiltonian) not in out:
                out[id(block.hamiltonian)] = eigendecompose(build_matrix(block.hamiltonian))
        return out

    @cached_property
    def observable_matrix(self) -> np.ndarray:
        return build_matrix(self.observable)

    def layout(self) -> EncodingLayout:
        """Encoding gates grouped by input dimension, in circuit order"""
        if self.d == 0:
            raise InvalidSpec("circuit has no encoding gate")
        gates: List[List[HamiltonianSpec]] = [[] for _ in range(self.d)]
        scalings: List[List[float]] = [[] for _ in range(self.d)]
        for block in self.blocks:
            if isinstance(block, EncodingBlock):
                gates[block.dim].append(block.hamiltonian)
                scalings[block.dim].append(block.scaling)
        return EncodingLayout(tuple(tuple(g) for g in gates), tuple(tuple(s) for s in scalings))


def _check_inputs(circuit: CircuitDescription, theta: np.ndarray, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != circuit.n_params:
        raise ShapeError(f"{theta.shape[0]} parameters for a circuit with {circuit.n_params}")
    if not np.all(np.isfinite(theta)):
        raise InvalidSpec("parameters must be finite")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if circuit.d and X.shape[1] != circuit.d:
        raise ShapeError(f"inputs have {X.shape[1]} dimensions, circuit encodes {circuit.d}")
    return theta, X


def statevectors(
    circuit: CircuitDescription,
    theta: np.ndarray,
    X: np.ndarray,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> np.ndarray:
    """Final states for every input row, shape (2^n, M); callback(block_index, states) after each block"""
    theta, X = _check_inputs(circuit, theta, X)
    n = circuit.n_qubits
    state = np.zeros((2 ** n, X.shape[0]), dtype=complex)
    state[0, :] = 1.0
    for index, block in enumerate(circuit.blocks):
        if isinstance(block, EncodingBlock):
            gates = evolution_batch(circuit.eigs[id(block.hamiltonian)], block.scaling * X[:, block.dim])
            state = apply_gate(state, gates, list(block.targets), n)
        else:
            for _ in range(block.repetitions):
                for rot in block.rotations:
                    state = apply_gate(state, rotation(rot.axis, theta[rot.param]), [rot.qubit], n)
                if block.cnot_ladder:
                    for q in range(n - 1):
                        state = apply_gate(state, CNOT, [q, q + 1], n)
        if callback is not None:
            callback(index, state)
    return state


def evaluate_batch(circuit: CircuitDescription, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """⟨ψ(x)|O|ψ(x)⟩ for every row of X"""
    state = statevectors(circuit, theta, X)
    values = np.einsum("am,am->m", state.conj(), circuit.observable_matrix @ state)
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > 1e-10:
        raise NumericalError(f"expectation has imaginary residue {residue:.3e}")
    return values.real


def evaluate(circuit: CircuitDescription, theta: np.ndarray, x: Union[float, Sequence[float]]) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if circuit.d and x.shape[0] != circuit.d:
        raise ShapeError(f"input has {x.shape[0]} dimensions, circuit encodes {circuit.d}")
    return float(evaluate_batch(circuit, theta, x[None, :])[0])


@dataclass(frozen=True, eq=False)
class PoolEntry:
    hamiltonian: HamiltonianSpec
    scaling: float = 1.0


def complex_encoding_pool() -> Tuple[PoolEntry, ...]:
    """H_XYZ followed by four scaled single-qubit Paulis"""
    pauli = pauli_encoding("Z")
    return (PoolEntry(footnote_h_xyz()),) + tuple(PoolEntry(pauli, s) for s in COMPLEX_POOL_SCALINGS)


def _default_pool() -> Tuple[PoolEntry, ...]:
    return (PoolEntry(pauli_encoding("Z")),)


@dataclass(frozen=True, eq=False)
class GeneratorConfig:
    n_qubits: int = 5
    pool: Tuple[PoolEntry, ...] = field(default_factory=_default_pool)
    L: int = 1
    d: int = 1
    ansatz_depth: int = 1
    seed: int = 0
    scalings: Optional[Tuple[float, ...]] = None
    exponential: bool = False
    pool_order: str = "random"
    observable: Optional[HamiltonianSpec] = None

    def __post_init__(self):
        if self.L < 1 or self.d < 1:
            raise InvalidSpec(f"generator needs L >= 1 and d >= 1, got L={self.L}, d={self.d}")
        if self.ansatz_depth < 1:
            raise InvalidSpec(f"ansatz depth must be positive, got {self.ansatz_depth}")
        if not self.pool:
            raise InvalidSpec("Hamiltonian pool is empty")
        if self.pool_order not in ("random", "sequential"):
            raise InvalidSpec(f"pool_order must be 'random' or 'sequential', got {self.pool_order!r}")
        if self.scalings is not None and len(self.scalings) != self.L:
            raise InvalidSpec(f"{len(self.scalings)} scalings for L={self.L}")
        for entry in self.pool:
            if entry.hamiltonian.num_qubits > self.n_qubits:
                raise InvalidSpec(
                    f"pool Hamiltonian on {entry.hamiltonian.num_qubits} qubits does not fit {self.n_qubits}"
                )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GeneratorConfig":
        pool_data = data.get("pool", "pauli")
        if pool_data == "pauli":
            pool = _default_pool()
        elif pool_data == "complex":
            pool = complex_encoding_pool()
        else:
            pool = tuple(
                PoolEntry(HamiltonianSpec.from_dict(entry["hamiltonian"]), float(entry.get("scaling", 1.0)))
                for entry in pool_data
            )
        observable = data.get("observable")
        scalings = data.get("scalings")
        try:
            return cls(
                n_qubits=int(data.get("n_qubits", 5)),
                pool=pool,
                L=int(data.get("L", 1)),
                d=int(data.get("d", 1)),
                ansatz_depth=int(data.get("ansatz_depth", 1)),
                seed=int(data.get("seed", 0)),
                scalings=None if scalings is None else tuple(float(s) for s in scalings),
                exponential=bool(data.get("exponential", False)),
                pool_order=str(data.get("pool_order", "random")),
                observable=None if observable is None else HamiltonianSpec.from_dict(observable),
            )
        except (TypeError, ValueError) as e:
            raise InvalidSpec(f"invalid circuit generator config: {e}") from e


def _ansatz_block(n: int, first_param: int, depth: int, rng: np.random.Generator) -> AnsatzBlock:
    axes = rng.integers(0, len(AXES), size=n)
    rotations = tuple(Rotation(AXES[a], q, first_param + q) for q, a in enumerate(axes))
    return AnsatzBlock(rotations, cnot_ladder=True, repetitions=depth)


def random_instance(config: GeneratorConfig) -> Tuple[CircuitDescription, np.ndarray]:
    """
    Random circuit: an ansatz block, then for every layer and input dimension
    an encoding gate from the pool followed by another ansatz block.

    Encoding targets are a contiguous run of qubits at a random offset.
    """
    rng = make_rng(config.seed)
    n = config.n_qubits
    blocks: List[Block] = [_ansatz_block(n, 0, config.ansatz_depth, rng)]
    n_params = n
    slot = 0
    for layer in range(config.L):
        beta = 1.0
        if config.scalings is not None:
            beta = config.scalings[layer]
        elif config.exponential:
            beta = 3.0 ** layer
        for dim in range(config.d):
            if config.pool_order == "sequential":
                entry = config.pool[slot % len(config.pool)]
            else:
                entry = config.pool[int(rng.integers(0, len(config.pool)))]
            slot += 1
            width = entry.hamiltonian.num_qubits
            start = int(rng.integers(0, n - width + 1))
            targets = tuple(range(start, start + width))
            blocks.append(EncodingBlock(dim, entry.hamiltonian, targets, entry.scaling * beta))
            blocks.append(_ansatz_block(n, n_params, config.ansatz_depth, rng))
            n_params += n
    circuit = CircuitDescription(n, tuple(blocks), config.observable, n_params)
    theta = rng.uniform(0.0, 2 * math.pi, size=n_params)
    return circuit, theta


def finite_difference_gradient(loss: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences, one parameter at a time"""
    grads = np.zeros_like(theta)
    shifted = theta.copy()
    for j in range(theta.shape[0]):
        shifted[j] = theta[j] + h
        up = loss(shifted)
        shifted[j] = theta[j] - h
        down = loss(shifted)
        shifted[j] = theta[j]
        grads[j] = (up - down) / (2 * h)
    return grads


def train(
    circuit: CircuitDescription,
    theta0: np.ndarray,
    data: Dataset,
    opt: Optional[AdamConfig] = None,
    h: float = 1e-4,
) -> np.ndarray:
    """Adam on the training MSE; returns the best parameters seen"""
    opt = opt or AdamConfig()
    theta = np.array(theta0, dtype=float)
    _check_inputs(circuit, theta, data.inputs)
    optimizer = Adam.from_config(opt)
    rng = make_rng(opt.seed)
    batch = data.M if not opt.batch_size else min(opt.batch_size, data.M)

    def loss_on(rows: np.ndarray) -> Callable[[np.ndarray], float]:
        X, y = data.inputs[rows], data.targets[rows]
        return lambda t: mse(evaluate_batch(circuit, t, X), y)

    full = loss_on(np.arange(data.M))
    best_theta, best_loss = theta.copy(), full(theta)
    if circuit.n_params == 0:
        return best_theta
    for epoch in range(opt.epochs):
        order = rng.permutation(data.M) if batch < data.M else np.arange(data.M)
        for start in range(0, data.M, batch):
            grads = finite_difference_gradient(loss_on(order[start:start + batch]), theta, h)
            optimizer.step(theta, grads)
        current = full(theta)
        if not math.isfinite(current):
            raise DivergedTraining(f"circuit loss became {current} at epoch {epoch}")
        if current < best_loss:
            best_theta, best_loss = theta.copy(), current
    logger.info("Circuit training finished: best MSE %.3e after %d epochs", best_loss, opt.epochs)
    return best_theta


def minimum_points(layout: EncodingLayout, x_max: Union[float, Sequence[float]]) -> Tuple[int, ...]:
    """Smallest lattice size per dimension meeting N > x_max ω_max / π"""
    x_max = np.broadcast_to(np.atleast_1d(np.asarray(x_max, dtype=float)), (layout.dims,))
    return tuple(int(math.floor(x_max[k] * max_frequency(layout, k) / math.pi)) + 1 for k in range(layout.dims))


def grid_inputs(x_max: Union[float, Sequence[float]], n_points: Union[int, Sequence[int]], d: int) -> np.ndarray:
    """Half-open lattice over Π[0, x_max_k), lexicographic with the last dimension fastest"""
    x_max = np.broadcast_to(np.atleast_1d(np.asarray(x_max, dtype=float)), (d,))
    n_points = np.broadcast_to(np.atleast_1d(np.asarray(n_points, dtype=int)), (d,))
    axes = [np.arange(n_points[k]) * x_max[k] / n_points[k] for k in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def sample_grid_dataset(
    circuit: CircuitDescription,
    theta: np.ndarray,
    x_max: Union[float, Sequence[float]],
    n_points: Union[int, Sequence[int]],
    force: bool = False,
) -> Dataset:
    d = circuit.d
    required = minimum_points(circuit.layout(), x_max)
    counts = np.broadcast_to(np.atleast_1d(np.asarray(n_points, dtype=int)), (d,))
    short = [k for k in range(d) if counts[k] < required[k]]
    if short:
        message = f"lattice sizes {counts.tolist()} below the Shannon minimum {list(required)}"
        if not force:
            raise ShannonViolation(message)
        logger.warning("%s; continuing because force is set", message)
    X = grid_inputs(x_max, counts, d)
    return Dataset(X, evaluate_batch(circuit, theta, X))
