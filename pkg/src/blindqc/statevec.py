"""Minimal dense state-vector simulator.

Everything else in the package runs on top of this: exact gate application,
computational / rotated-X-basis measurement, partial traces, and the
|+_theta> preparations used by the delegation protocol.  Angles are carried
as exact eighths of a turn (Angle8); floating point appears only inside gate
matrices.

Conventions (fixed package-wide):
  - qubit q is axis q of amps.reshape([2] * n); basis index of |b0 b1 .. >
    puts qubit 0 in the most significant bit.
  - measurement outcome 0 corresponds to the first basis vector
    (|0> or |+_delta>).
  - global phase is never tracked; comparisons go through
    fidelity_up_to_phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_QUBITS = 16
BRANCH_TOL = 1e-12
_NORM_GUARD = 1e-8

_SQ2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Angle8:
    """Angle k*pi/4 for k in Z_8; all angle arithmetic is closed mod 8."""

    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", int(self.k) % 8)

    def __add__(self, other: "Angle8") -> "Angle8":
        return Angle8(self.k + other.k)

    def __sub__(self, other: "Angle8") -> "Angle8":
        return Angle8(self.k - other.k)

    def __neg__(self) -> "Angle8":
        return Angle8(-self.k)

    def plus_pi(self) -> "Angle8":
        return Angle8(self.k + 4)

    def negated_if(self, bit: int) -> "Angle8":
        return -self if bit & 1 else self

    @property
    def radians(self) -> float:
        return self.k * math.pi / 4.0

    @property
    def phase(self) -> complex:
        """e^{i k pi/4}."""
        return complex(np.exp(1j * self.radians))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Angle8":
        return cls(int(rng.integers(0, 8)))

    def __repr__(self) -> str:
        return f"Angle8({self.k})"


@dataclass(frozen=True)
class MeasurementBasis:
    """Single-qubit basis: computational {|0>,|1>} or {|+_delta>,|-_delta>}."""

    kind: str
    delta: Angle8 | None = None

    @classmethod
    def computational(cls) -> "MeasurementBasis":
        return cls("computational")

    @classmethod
    def rotated_x(cls, delta: Angle8) -> "MeasurementBasis":
        return cls("rotated_x", delta)

    def vectors(self) -> np.ndarray:
        """Rows are the two basis vectors; outcome 0 is row 0."""
        if self.kind == "computational":
            return np.eye(2, dtype=complex)
        if self.kind == "rotated_x":
            ph = self.delta.phase
            return np.array([[_SQ2, _SQ2 * ph], [_SQ2, -_SQ2 * ph]], dtype=complex)
        raise ValueError(f"unknown basis kind {self.kind!r}")


class StateVector:
    """Normalized amplitudes of an n-qubit register (n <= 16).

    Instances are treated as exclusive, single-owner values: operations
    return fresh StateVectors and never mutate their input.
    """

    __slots__ = ("amps", "num_qubits")

    def __init__(self, amps: Sequence[complex] | np.ndarray, *, _trusted: bool = False):
        a = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(a.size).bit_length() - 1
        if 2**n != a.size:
            raise ValueError(f"amplitude count {a.size} is not a power of two")
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit capacity")
        if not _trusted:
            norm = np.linalg.norm(a)
            if abs(norm - 1.0) > _NORM_GUARD:
                raise ValueError(f"state norm {norm} is not 1")
            a = a.copy()
        self.amps = a
        self.num_qubits = n

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy(), _trusted=True)

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"


# --- preparations -----------------------------------------------------------

def zero_state(num_qubits: int) -> StateVector:
    if num_qubits < 1:
        raise ValueError("need at least one qubit")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps, _trusted=True)


def basis_state(bits: Sequence[int]) -> StateVector:
    idx = 0
    for b in bits:
        idx = (idx << 1) | (int(b) & 1)
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[idx] = 1.0
    return StateVector(amps, _trusted=True)


def prepare_plus_theta(theta: Angle8) -> StateVector:
    """|+_theta> = (|0> + e^{i theta}|1>)/sqrt(2)."""
    return StateVector(np.array([_SQ2, _SQ2 * theta.phase]), _trusted=True)


def random_state(num_qubits: int, rng: np.random.Generator) -> StateVector:
    a = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return StateVector(a / np.linalg.norm(a), _trusted=True)


# --- gates ------------------------------------------------------------------

_GATES_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
}
_CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)

TWO_QUBIT_GATES = ("CX", "CZ")
SINGLE_QUBIT_GATES = ("H", "X", "Z", "S", "T", "RZ")


def gate_matrix(gate: str, angle: Angle8 | None = None) -> np.ndarray:
    """Unitary for a named gate; RZ takes an Angle8, CX is (control, target)."""
    if gate in _GATES_1Q:
        return _GATES_1Q[gate]
    if gate == "RZ":
        if angle is None:
            raise ValueError("RZ needs an Angle8")
        return np.array([[1, 0], [0, angle.phase]], dtype=complex)
    if gate == "CX":
        return _CX
    if gate == "CZ":
        return _CZ
    raise ValueError(f"unsupported gate {gate!r}")


def _apply_matrix(amps: np.ndarray, n: int, mat: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    k = len(targets)
    psi = amps.reshape([2] * n)
    psi = np.moveaxis(psi, targets, range(k))
    psi = np.tensordot(mat.reshape([2] * (2 * k)), psi, axes=(tuple(range(k, 2 * k)), tuple(range(k))))
    return np.moveaxis(psi, range(k), targets).reshape(-1)


def apply_gate(
    state: StateVector,
    gate: str,
    targets: Sequence[int],
    angle: Angle8 | None = None,
) -> StateVector:
    """Apply a named gate to the given qubits, returning the new state.

    CX targets are ordered (control, target); CZ is symmetric.
    """
    targets = list(targets)
    for q in targets:
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    mat = gate_matrix(gate, angle)
    expected = 2 if gate in TWO_QUBIT_GATES else 1
    if len(targets) != expected:
        raise ValueError(f"{gate} takes {expected} target(s), got {len(targets)}")
    if expected == 2 and targets[0] == targets[1]:
        raise ValueError("two-qubit gate targets must be distinct")
    return StateVector(_apply_matrix(state.amps, state.num_qubits, mat, targets), _trusted=True)


# --- measurement ------------------------------------------------------------

def _branch(amps: np.ndarray, n: int, qubit: int, bvec: np.ndarray) -> tuple[float, np.ndarray]:
    """Probability and unnormalized post-branch amplitudes for one outcome.

    The measured qubit is left in the basis vector `bvec`.
    """
    psi = np.moveaxis(amps.reshape([2] * n), qubit, 0)
    rest = np.tensordot(bvec.conj(), psi, axes=([0], [0]))
    prob = float(np.sum(np.abs(rest) ** 2))
    collapsed = np.tensordot(bvec, rest, axes=0)
    return prob, np.moveaxis(collapsed, 0, qubit).reshape(-1)


def measure_forced(
    state: StateVector, qubit: int, basis: MeasurementBasis, outcome: int
) -> tuple[float, StateVector]:
    """Collapse onto a chosen outcome, returning (branch probability, state).

    Raises if the branch probability is below BRANCH_TOL (numerically
    degenerate branch).
    """
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit index {qubit} out of range")
    vecs = basis.vectors()
    prob, collapsed = _branch(state.amps, state.num_qubits, qubit, vecs[outcome & 1])
    if prob < BRANCH_TOL:
        raise ValueError(f"measurement branch has probability {prob} < {BRANCH_TOL}")
    return prob, StateVector(collapsed / math.sqrt(prob), _trusted=True)


def measure(
    state: StateVector, qubit: int, basis: MeasurementBasis, rng: np.random.Generator
) -> tuple[int, StateVector]:
    """Sample a measurement outcome from the Born rule and collapse."""
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit index {qubit} out of range")
    vecs = basis.vectors()
    p0, _ = _branch(state.amps, state.num_qubits, qubit, vecs[0])
    outcome = 0 if rng.random() < p0 else 1
    if outcome == 0 and p0 < BRANCH_TOL:
        outcome = 1
    _, collapsed = measure_forced(state, qubit, basis, outcome)
    return outcome, collapsed


def reset(state: StateVector, qubit: int, rng: np.random.Generator) -> StateVector:
    """Measure computationally and flip to |0> if needed; qubit ends disentangled."""
    outcome, collapsed = measure(state, qubit, MeasurementBasis.computational(), rng)
    if outcome == 1:
        collapsed = apply_gate(collapsed, "X", [qubit])
    return collapsed


# --- comparison and subsystem utilities -------------------------------------

def fidelity_up_to_phase(s1: StateVector, s2: StateVector) -> float:
    """|<s1|s2>|^2 — 1 iff the states agree up to global phase."""
    if s1.num_qubits != s2.num_qubits:
        raise ValueError("qubit counts differ")
    return float(abs(np.vdot(s1.amps, s2.amps)) ** 2)


def reduced_density_matrix(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Partial trace onto `qubits` (in the given order)."""
    keep = list(qubits)
    if not keep:
        raise ValueError("qubit set must be nonempty")
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate qubit in partial trace")
    n = state.num_qubits
    for q in keep:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range")
    other = [q for q in range(n) if q not in keep]
    psi = np.moveaxis(state.amps.reshape([2] * n), keep + other, range(n))
    psi = psi.reshape(2 ** len(keep), -1)
    return psi @ psi.conj().T


def tensor(a: StateVector, b: StateVector) -> StateVector:
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise ValueError(f"combined register exceeds {MAX_QUBITS} qubits")
    return StateVector(np.kron(a.amps, b.amps), _trusted=True)


def extract_qubits(state: StateVector, qubits: Sequence[int], tol: float = 1e-9) -> StateVector:
    """Pure state of a subsystem that is unentangled with the rest.

    Raises if the reduced state is not pure within `tol`; the returned
    state's global phase is arbitrary.
    """
    rho = reduced_density_matrix(state, qubits)
    purity = float(np.real(np.trace(rho @ rho)))
    if purity < 1.0 - tol:
        raise ValueError(f"subsystem is entangled with its complement (purity {purity})")
    vals, vecs = np.linalg.eigh(rho)
    top = vecs[:, int(np.argmax(vals))]
    return StateVector(top / np.linalg.norm(top), _trusted=True)


def delete_qubit(state: StateVector, qubit: int) -> StateVector:
    """Drop a qubit that is exactly |0> and disentangled from the rest."""
    psi = np.moveaxis(state.amps.reshape([2] * state.num_qubits), qubit, 0)
    if float(np.sum(np.abs(psi[1]) ** 2)) > BRANCH_TOL:
        raise ValueError("qubit is not in |0>; cannot delete")
    rest = psi[0].reshape(-1)
    return StateVector(rest / np.linalg.norm(rest), _trusted=True)


def permute_qubits(state: StateVector, order: Sequence[int]) -> StateVector:
    """Relabel wires: new axis i holds old axis order[i]."""
    if sorted(order) != list(range(state.num_qubits)):
        raise ValueError("order must be a permutation of all qubits")
    psi = state.amps.reshape([2] * state.num_qubits).transpose(order)
    return StateVector(psi.reshape(-1), _trusted=True)


def sample_counts(state: StateVector, shots: int, rng: np.random.Generator) -> dict[str, int]:
    """Sample computational-basis outcomes; keys are bitstrings, qubit 0 first."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = state.probabilities()
    probs = probs / probs.sum()
    draws = rng.choice(len(probs), size=shots, p=probs)
    values, counts = np.unique(draws, return_counts=True)
    width = state.num_qubits
    return {format(int(v), f"0{width}b"): int(c) for v, c in zip(values, counts)}
