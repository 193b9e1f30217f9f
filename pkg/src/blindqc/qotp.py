"""Quantum one-time pad: encryption, decryption, and classical key evolution.

A qubit is encrypted as X^a Z^b |psi> with secret bits (a, b).  Clifford
gates act directly on the ciphertext while the client rewrites the keys;
the non-Clifford T gate needs one auxiliary qubit S^y Z^d |+>, one
measurement, and one classical round (the gadget below).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevec import StateVector, apply_gate, measure, measure_forced, reset
from .statevec import MeasurementBasis, prepare_plus_theta, tensor, Angle8

# Test-only fault injection hook for the verification harness; never set in
# production code paths.
_FAULT: str | None = None


@dataclass(frozen=True)
class PadKey:
    """One-time-pad key bits: a flips in X, b flips in Z; (0,0) is plaintext."""

    a: int
    b: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", int(self.a) & 1)
        object.__setattr__(self, "b", int(self.b) & 1)

    @classmethod
    def zero(cls) -> "PadKey":
        return cls(0, 0)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "PadKey":
        return cls(int(rng.integers(2)), int(rng.integers(2)))


@dataclass(frozen=True)
class AuxKey:
    """Keys of the gadget's auxiliary state S^y Z^d |+>."""

    y: int
    d: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", int(self.y) & 1)
        object.__setattr__(self, "d", int(self.d) & 1)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "AuxKey":
        return cls(int(rng.integers(2)), int(rng.integers(2)))


@dataclass(frozen=True)
class GadgetTranscript:
    """Classical round of one T-gadget: client control bit x, server result c."""

    x: int
    c: int


def encrypt(state: StateVector, qubit: int, key: PadKey) -> StateVector:
    """Apply Z^b then X^a so the result is literally X^a Z^b |psi>."""
    if key.b:
        state = apply_gate(state, "Z", [qubit])
    if key.a:
        state = apply_gate(state, "X", [qubit])
    return state


def decrypt(state: StateVector, qubit: int, key: PadKey) -> StateVector:
    """Inverse of encrypt up to global phase."""
    if key.a:
        state = apply_gate(state, "X", [qubit])
    if key.b:
        state = apply_gate(state, "Z", [qubit])
    return state


def update_clifford(gate: str, *keys: PadKey) -> PadKey | tuple[PadKey, PadKey]:
    """Key rewrite under a Clifford gate applied to the ciphertext.

    X, Z leave keys unchanged; H swaps (a,b); S maps to (a, a^b);
    CX takes the (control, target) pair to (a1, b1^b2), (a1^a2, b2).
    T is rejected: it must go through eval_t_gadget.
    """
    if gate in ("X", "Z"):
        (k,) = keys
        return k
    if gate == "H":
        (k,) = keys
        if _FAULT == "table1_h":
            return PadKey(k.a, k.b)
        return PadKey(k.b, k.a)
    if gate == "S":
        (k,) = keys
        return PadKey(k.a, k.a ^ k.b)
    if gate == "CX":
        k1, k2 = keys
        return PadKey(k1.a, k1.b ^ k2.b), PadKey(k1.a ^ k2.a, k2.b)
    raise ValueError(f"no Clifford key update for {gate!r} (T goes through the gadget)")


def prepare_aux(aux_key: AuxKey) -> StateVector:
    """Auxiliary gadget qubit S^y Z^d |+>."""
    aux = prepare_plus_theta(Angle8(0))
    if aux_key.d:
        aux = apply_gate(aux, "Z", [0])
    if aux_key.y:
        aux = apply_gate(aux, "S", [0])
    return aux


def eval_t_gadget(
    register: StateVector,
    data_qubit: int,
    key: PadKey,
    aux_key: AuxKey,
    rng: np.random.Generator,
    forced_c: int | None = None,
) -> tuple[StateVector, PadKey, GadgetTranscript]:
    """Evaluate T on ciphertext qubit `data_qubit`.

    A fresh auxiliary S^y Z^d |+> is appended to the register (it becomes the
    last wire and carries the result).  Server steps: T on the data qubit,
    CX with the auxiliary as control and the data qubit as target,
    computational measurement of the data qubit giving c, then S^x on the
    auxiliary with the client-supplied x = a xor y.  The measured data qubit
    is reset to |0>.  The returned key (a xor c, a(c^y^1) ^ b ^ d ^ y)
    decrypts the auxiliary wire to T|psi>.
    """
    aux = prepare_aux(aux_key)
    reg = tensor(register, aux)
    aux_idx = register.num_qubits

    reg = apply_gate(reg, "T", [data_qubit])
    reg = apply_gate(reg, "CX", [aux_idx, data_qubit])
    if forced_c is None:
        c, reg = measure(reg, data_qubit, MeasurementBasis.computational(), rng)
    else:
        _, reg = measure_forced(reg, data_qubit, MeasurementBasis.computational(), forced_c)
        c = forced_c & 1

    x = key.a ^ aux_key.y
    if x:
        reg = apply_gate(reg, "S", [aux_idx])
    reg = reset(reg, data_qubit, rng)

    new_key = PadKey(
        key.a ^ c,
        (key.a & (c ^ aux_key.y ^ 1)) ^ key.b ^ aux_key.d ^ aux_key.y,
    )
    return reg, new_key, GadgetTranscript(x=x, c=c)
