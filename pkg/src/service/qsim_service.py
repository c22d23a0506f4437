"""Dense statevector simulation for small brickwork circuits.

Convention: p_C(z) = |<z|C|0^n>|^2, qubit 0 is the most significant bit of z.
Honest sampling and verifier scoring both go through ``output_probabilities``.
"""
import logging
from math import cos, pi, sin, sqrt
from typing import Optional

import numpy as np

from src.config.settings import settings
from src.models.circuit import AnsatzConfig, Circuit, Gate, SampleSet, StateVector
from src.models.errors import DimensionMismatch, SeedTooShort, SimulationPanic, TooManyQubits
from src.service.oracle_service import derive_seed

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-10

_FIXED_1Q = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / sqrt(2),
}


def _u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ], dtype=complex)


def _gate_matrix(gate: Gate) -> np.ndarray:
    if gate.kind in _FIXED_1Q:
        return _FIXED_1Q[gate.kind]
    if gate.kind == "u3":
        return _u3(*gate.params)
    raise ValueError(f"unknown single-qubit gate {gate.kind!r}")


def _apply_single_qubit(state: np.ndarray, matrix: np.ndarray, qubit: int) -> np.ndarray:
    # state has shape [2]*n
    moved = np.moveaxis(state, qubit, 0)
    updated = np.tensordot(matrix, moved, axes=([1], [0]))
    return np.moveaxis(updated, 0, qubit)


def _apply_cz(state: np.ndarray, q0: int, q1: int, n: int) -> np.ndarray:
    new = state.copy()
    idx = [slice(None)] * n
    idx[q0], idx[q1] = 1, 1
    new[tuple(idx)] *= -1
    return new


def _brickwork_pairs(n: int, layer: int):
    start = layer % 2
    return [(q, q + 1) for q in range(start, n - 1, 2)]


def build_circuit(ch: str, ansatz: AnsatzConfig) -> Circuit:
    """Expand a challenge into a brickwork circuit.

    Each single-qubit gate is Haar-random on SU(2) up to phase: |U00|^2 is uniform on
    [0, 1] and both phases are uniform, drawn from a generator keyed by ch.
    """
    if len(ch) < ansatz.seed_bits:
        raise SeedTooShort(f"challenge has {len(ch)} bits, ansatz needs {ansatz.seed_bits}")
    rng = np.random.default_rng(derive_seed(ch.encode("ascii"), "ansatz", ansatz.n_qubits, ansatz.depth))
    gates = []
    for layer in range(ansatz.depth):
        for q in range(ansatz.n_qubits):
            u = rng.random()
            theta = 2.0 * float(np.arccos(sqrt(u)))
            phi, lam = (float(a) for a in rng.uniform(0.0, 2.0 * pi, size=2))
            gates.append(Gate(kind="u3", qubits=(q,), params=(theta, phi, lam)))
        for q0, q1 in _brickwork_pairs(ansatz.n_qubits, layer):
            gates.append(Gate(kind="cz", qubits=(q0, q1)))
    return Circuit(n_qubits=ansatz.n_qubits, depth=ansatz.depth, gates=tuple(gates), seed=ch)


def apply_circuit(c: Circuit, amplitudes: np.ndarray) -> np.ndarray:
    """Apply ``c`` to an arbitrary state of matching dimension."""
    n = c.n_qubits
    if amplitudes.shape != (2 ** n,):
        raise DimensionMismatch(f"state of shape {amplitudes.shape} does not fit {n} qubits")
    state = amplitudes.astype(complex).reshape([2] * n)
    norm0 = np.linalg.norm(state)
    for gate in c.gates:
        if gate.kind == "cz":
            state = _apply_cz(state, gate.qubits[0], gate.qubits[1], n)
        else:
            state = _apply_single_qubit(state, _gate_matrix(gate), gate.qubits[0])
        if abs(np.linalg.norm(state) - norm0) > NORM_TOLERANCE:
            raise SimulationPanic(f"norm drifted after {gate.to_text()}")
    return state.reshape(-1)


def simulate(c: Circuit, max_qubits: Optional[int] = None) -> StateVector:
    """C|0^n>."""
    limit = max_qubits if max_qubits is not None else settings.max_qubits
    if c.n_qubits > limit:
        raise TooManyQubits(f"{c.n_qubits} qubits exceeds the limit of {limit}")
    initial = np.zeros(2 ** c.n_qubits, dtype=complex)
    initial[0] = 1.0
    return StateVector(n_qubits=c.n_qubits, amplitudes=apply_circuit(c, initial))


def output_probabilities(c: Circuit) -> np.ndarray:
    return simulate(c).probabilities()


def index_to_bits(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def sample(sv: StateVector, k: int, rng: np.random.Generator) -> SampleSet:
    """k i.i.d. draws from |<z|psi>|^2."""
    probs = sv.probabilities()
    probs = probs / probs.sum()
    draws = rng.choice(len(probs), size=k, p=probs) if k else []
    return SampleSet(n_qubits=sv.n_qubits, bitstrings=tuple(index_to_bits(int(i), sv.n_qubits) for i in draws))


def uniform_samples(n: int, k: int, rng: np.random.Generator) -> SampleSet:
    draws = rng.integers(0, 2 ** n, size=k) if k else []
    return SampleSet(n_qubits=n, bitstrings=tuple(index_to_bits(int(i), n) for i in draws))


def score_from_probabilities(probs: np.ndarray, samples: SampleSet) -> float:
    n = int(np.log2(len(probs)))
    if samples.n_qubits != n or any(len(z) != n for z in samples.bitstrings):
        raise DimensionMismatch(f"samples over {samples.n_qubits} qubits do not match a {n}-qubit circuit")
    if not samples.bitstrings:
        return 0.0
    values = [float(probs[int(z, 2)]) for z in samples.bitstrings]
    return float(np.mean(values))


def xhog_score(c: Circuit, samples: SampleSet) -> float:
    """(1/k) sum_j p_C(z_j)."""
    if samples.n_qubits != c.n_qubits:
        raise DimensionMismatch(f"samples over {samples.n_qubits} qubits, circuit has {c.n_qubits}")
    return score_from_probabilities(output_probabilities(c), samples)


def collision_probability(sv: StateVector) -> float:
    """Exact sum_z p(z)^2, the expected score of an ideal sampler."""
    probs = sv.probabilities()
    return float(np.sum(probs ** 2))


def porter_thomas_collision(dimension: int) -> float:
    """N * E[sum_z p(z)^2] for Haar-random states: 2N/(N+1)."""
    return 2.0 * dimension / (dimension + 1)
