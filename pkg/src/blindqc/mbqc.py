"""Cluster graphs and measurement patterns for gate sequences.

A pattern lives on a grid of nodes (column x, row y).  Column 0 receives the
(possibly encrypted) input qubits, columns 1..n-1 are auxiliary qubits
measured in rotated-X bases, and column n is the output.  Measuring an
auxiliary node at angle phi teleports the wire state one column to the right
while applying J(-phi) = H Rz(-phi); a CZ cross-link between two rows at
column c applies a CZ between the wire states residing there.

The flow rule is the standard one for linear clusters: a node's X-dependency
is its immediate predecessor, its Z-dependencies are the predecessor's
predecessor plus the predecessors of cross-linked neighbours.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qotp import PadKey, decrypt
from .statevec import (
    Angle8,
    MeasurementBasis,
    StateVector,
    apply_gate,
    extract_qubits,
    measure,
    measure_forced,
    prepare_plus_theta,
    tensor,
)

Node = tuple[int, int]

IDENTITY_PAIR = (Angle8(0), Angle8(0))
# J(pi/2)^3 = (H S)^3 is the identity up to phase; used when an odd number of
# filler nodes is needed to align rows.
IDENTITY_TRIPLE = (Angle8(2), Angle8(2), Angle8(2))


@dataclass(frozen=True)
class JChain:
    """Angles a1..ak meaning apply J(a1) first, so the product is J(ak)..J(a1)."""

    angles: tuple[Angle8, ...]

    def __post_init__(self) -> None:
        if not self.angles:
            raise ValueError("J-chain must be nonempty")

    def __len__(self) -> int:
        return len(self.angles)


@dataclass(frozen=True)
class ClusterGraph:
    """Grid nodes plus tagged edges (cz, or the column-0/1 injection cx)."""

    nodes: frozenset[Node]
    cz_edges: frozenset[tuple[Node, Node]]
    cx_edges: frozenset[tuple[Node, Node]]

    def __post_init__(self) -> None:
        for u, v in list(self.cz_edges) + list(self.cx_edges):
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge ({u},{v}) references a missing node")
        for u, v in self.cx_edges:
            (x0, y0), (x1, y1) = sorted((u, v))
            if not (x0 == 0 and x1 == 1 and y0 == y1):
                raise ValueError("cx edges must join columns 0 and 1 on the same row")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class PatternNode:
    node: Node
    angle: Angle8
    x_deps: frozenset[Node]
    z_deps: frozenset[Node]


@dataclass(frozen=True)
class OutputNode:
    node: Node
    x_deps: frozenset[Node]
    z_deps: frozenset[Node]


@dataclass(frozen=True)
class MeasurementPattern:
    """Angles and dependency sets; measurement order is column-major."""

    num_rows: int
    last_column: int
    input_nodes: tuple[Node, ...]
    measured: tuple[PatternNode, ...]
    outputs: tuple[OutputNode, ...]

    def __post_init__(self) -> None:
        seen: set[Node] = set(self.input_nodes)
        for pn in self.measured:
            for dep in pn.x_deps | pn.z_deps:
                if dep not in seen:
                    raise ValueError(f"dependency {dep} of {pn.node} not measured earlier")
            seen.add(pn.node)
        for out in self.outputs:
            for dep in out.x_deps | out.z_deps:
                if dep not in seen:
                    raise ValueError(f"dependency {dep} of output {out.node} not measured")

    @property
    def measurement_layers(self) -> int:
        """Sequential measurement rounds: the measured columns 0..n-1."""
        return self.last_column

    @property
    def num_nodes(self) -> int:
        return len(self.input_nodes) + len(self.measured) + len(self.outputs)


# --- J-chain decomposition ---------------------------------------------------

def decompose_to_j_chain(gate: str, angle: Angle8 | None = None) -> JChain:
    """Chain whose product equals the gate up to global phase (J(t) = H Rz(t))."""
    if gate == "I":
        return JChain(IDENTITY_PAIR)
    if gate == "H":
        return JChain((Angle8(0),))
    if gate == "X":
        return JChain((Angle8(0), Angle8(4)))
    if gate == "Z":
        return JChain((Angle8(4), Angle8(0)))
    if gate == "RZ":
        if angle is None:
            raise ValueError("RZ decomposition needs an Angle8")
        return JChain((angle, Angle8(0)))
    raise ValueError(f"no J-chain decomposition for {gate!r}")


def corrected_angle(phi: Angle8, sx_parity: int, sz_parity: int) -> Angle8:
    """phi' = (-1)^sx phi + sz*pi, exactly in Z_8."""
    out = phi.negated_if(sx_parity)
    if sz_parity & 1:
        out = out.plus_pi()
    return out


# --- pattern construction ----------------------------------------------------

def build_wire_patterns(
    wires: Sequence[JChain],
    cross_links: Sequence[tuple[int, int, int]] = (),
) -> tuple[ClusterGraph, MeasurementPattern]:
    """Linear CZ chain per row realizing its J-chain, plus CZ cross-links.

    `cross_links` entries are (column, rowA, rowB): the CZ acts on the wire
    states residing at that column, i.e. after column-1 .. column-(c-1)
    measurements.  All rows must have equal chain length.
    """
    if not wires:
        raise ValueError("need at least one wire")
    m = len(wires)
    lengths = {len(w) for w in wires}
    if len(lengths) != 1:
        raise ValueError(f"unequal row lengths after padding: {sorted(lengths)}")
    chain_len = lengths.pop()
    n = chain_len + 1  # output column index

    links_at: dict[int, dict[int, set[int]]] = {}
    seen_links: set[tuple[int, int, int]] = set()
    for col, ya, yb in cross_links:
        if ya == yb or not (0 <= ya < m and 0 <= yb < m):
            raise ValueError(f"dangling cross link ({col},{ya},{yb})")
        if not 1 <= col <= n:
            raise ValueError(f"cross link column {col} outside 1..{n}")
        key = (col, min(ya, yb), max(ya, yb))
        if key in seen_links:
            raise ValueError(f"duplicate cross link {key}")
        seen_links.add(key)
        links_at.setdefault(col, {}).setdefault(ya, set()).add(yb)
        links_at.setdefault(col, {}).setdefault(yb, set()).add(ya)

    nodes = frozenset((x, y) for x in range(n + 1) for y in range(m))
    cx_edges = frozenset(((0, y), (1, y)) for y in range(m))
    cz = {((x, y), (x + 1, y)) for x in range(1, n) for y in range(m)}
    cz |= {((c, min(ya, yb)), (c, max(ya, yb))) for c, ya, yb in cross_links}
    graph = ClusterGraph(nodes=nodes, cz_edges=frozenset(cz), cx_edges=cx_edges)

    def deps(x: int, y: int) -> tuple[frozenset[Node], frozenset[Node]]:
        xd = frozenset({(x - 1, y)})
        zd = set()
        if x >= 2:
            zd.add((x - 2, y))
        for y2 in links_at.get(x, {}).get(y, ()):
            zd.add((x - 1, y2))
        return xd, frozenset(zd)

    measured = []
    for x in range(1, n):
        for y in range(m):
            xd, zd = deps(x, y)
            measured.append(PatternNode((x, y), -wires[y].angles[x - 1], xd, zd))
    outputs = []
    for y in range(m):
        xd, zd = deps(n, y)
        outputs.append(OutputNode((n, y), xd, zd))

    pattern = MeasurementPattern(
        num_rows=m,
        last_column=n,
        input_nodes=tuple((0, y) for y in range(m)),
        measured=tuple(measured),
        outputs=tuple(outputs),
    )
    return graph, pattern


def _pad(chain: list[Angle8], deficit: int) -> None:
    if deficit == 0:
        return
    if deficit == 1:
        raise ValueError("cannot pad a single node; caller must bump the target length")
    if deficit % 2:
        chain.extend(IDENTITY_TRIPLE)
        deficit -= 3
    chain.extend(IDENTITY_PAIR * (deficit // 2))


def _aligned_length(lengths: Iterable[int]) -> int:
    lengths = list(lengths)
    target = max(lengths)
    if any(target - l == 1 for l in lengths):
        target += 2
    return target


def compile_circuit(
    gates: Sequence[tuple[str, Sequence[int], Angle8 | None]],
    num_rows: int,
) -> tuple[ClusterGraph, MeasurementPattern]:
    """Compile a gate list onto one wire per row with CZ cross-links.

    Single-qubit gates extend the row's J-chain (S and T are phase gates,
    handled as Rz); CZ pins both rows to a common column and records a
    cross-link there; CX is rewritten as H-CZ-H on the target.
    """
    chains: list[list[Angle8]] = [[] for _ in range(num_rows)]
    links: list[tuple[int, int, int]] = []

    def add_single(row: int, name: str, angle: Angle8 | None) -> None:
        mapped = {"S": ("RZ", Angle8(2)), "T": ("RZ", Angle8(1))}.get(name)
        if mapped:
            name, angle = mapped
        chains[row].extend(decompose_to_j_chain(name, angle).angles)

    def add_cz(ya: int, yb: int) -> None:
        target = _aligned_length([len(chains[ya]), len(chains[yb])])
        _pad(chains[ya], target - len(chains[ya]))
        _pad(chains[yb], target - len(chains[yb]))
        links.append((target + 1, ya, yb))

    for name, targets, angle in gates:
        targets = list(targets)
        for q in targets:
            if not 0 <= q < num_rows:
                raise ValueError(f"gate target {q} out of range for {num_rows} rows")
        if name == "CZ":
            add_cz(*targets)
        elif name == "CX":
            add_single(targets[1], "H", None)
            add_cz(targets[0], targets[1])
            add_single(targets[1], "H", None)
        else:
            (q,) = targets
            add_single(q, name, angle)

    target = _aligned_length(len(c) for c in chains)
    if target == 0:
        target = 2
    for c in chains:
        _pad(c, target - len(c))
    return build_wire_patterns([JChain(tuple(c)) for c in chains], links)


def build_grover_oracle_pattern() -> tuple[ClusterGraph, MeasurementPattern]:
    """Two-row, 12-node pattern for the |11>-marking search oracle.

    Each row carries a depth-3 phase oracle (Z, CZ, Z) as four J-nodes with
    one cross-link between them; the realized unitary is CZ.  Five
    measurement layers: the input column plus four auxiliary columns.
    """
    gates = [
        ("Z", [0], None),
        ("Z", [1], None),
        ("CZ", [0, 1], None),
        ("Z", [0], None),
        ("Z", [1], None),
    ]
    return compile_circuit(gates, 2)


def build_brickwork(n: int, m: int) -> ClusterGraph:
    """Brickwork layout: row chains plus brick rungs, for resource accounting.

    Rungs sit at columns c = 3 (mod 8) joining rows (0,1),(2,3),.. and at
    c = 7 (mod 8) joining rows (1,2),(3,4),..; column 0/1 edges carry the
    injection tag like every other graph here.
    """
    if n < 1 or m < 1:
        raise ValueError("brickwork needs n >= 1 columns and m >= 1 rows")
    nodes = frozenset((x, y) for x in range(n) for y in range(m))
    cx_edges = frozenset(((0, y), (1, y)) for y in range(m)) if n > 1 else frozenset()
    cz = {((x, y), (x + 1, y)) for x in range(1, n - 1) for y in range(m)}
    for x in range(n):
        if x % 8 == 3:
            first_rows = range(0, m - 1, 2)
        elif x % 8 == 7:
            first_rows = range(1, m - 1, 2)
        else:
            continue
        for y in first_rows:
            cz.add(((x, y), (x, y + 1)))
    return ClusterGraph(nodes=nodes, cz_edges=frozenset(cz), cx_edges=cx_edges)


# --- reference executor -------------------------------------------------------

@dataclass
class PatternRun:
    output: StateVector
    outcomes: dict[Node, int]
    x_parities: tuple[int, ...]
    z_parities: tuple[int, ...]
    probability: float


def node_qubit_index(num_rows: int, node: Node) -> int:
    """Register wire of a node: inputs first, then columns 1..n column-major."""
    x, y = node
    return y if x == 0 else num_rows + (x - 1) * num_rows + y


def entangle(
    graph: ClusterGraph, pattern: MeasurementPattern, register: StateVector
) -> StateVector:
    """Apply the injection CX edges (column-1 node controls) then all CZ edges."""
    for u, v in sorted(graph.cx_edges):
        col0, col1 = (u, v) if u[0] == 0 else (v, u)
        register = apply_gate(
            register,
            "CX",
            [node_qubit_index(pattern.num_rows, col1), node_qubit_index(pattern.num_rows, col0)],
        )
    for u, v in sorted(graph.cz_edges):
        register = apply_gate(
            register, "CZ", [node_qubit_index(pattern.num_rows, u), node_qubit_index(pattern.num_rows, v)]
        )
    return register


def simulate_pattern(
    graph: ClusterGraph,
    pattern: MeasurementPattern,
    input_state: StateVector,
    rng: np.random.Generator | None = None,
    forced: dict[Node, int] | None = None,
) -> PatternRun:
    """Run a pattern on a plaintext input with no blinding (reference semantics).

    Auxiliary and output qubits start as |+>; column 0 is measured
    computationally, later columns at the flow-corrected angles; the final
    byproducts are undone before returning the output rows.
    """
    m = pattern.num_rows
    n = pattern.last_column
    if input_state.num_qubits != m:
        raise ValueError(f"input has {input_state.num_qubits} qubits, pattern has {m} rows")

    register = input_state
    for _ in range(n * m):
        register = tensor(register, prepare_plus_theta(Angle8(0)))
    register = entangle(graph, pattern, register)

    ledger: dict[Node, int] = {}
    probability = 1.0

    def measure_node(node: Node, basis: MeasurementBasis) -> int:
        nonlocal register, probability
        q = node_qubit_index(pattern.num_rows, node)
        if forced is not None:
            prob, register = measure_forced(register, q, basis, forced[node])
            probability *= prob
            return forced[node]
        outcome, register = measure(register, q, basis, rng)
        return outcome

    for node in pattern.input_nodes:
        ledger[node] = measure_node(node, MeasurementBasis.computational())
    for pn in pattern.measured:
        sx = _parity(ledger, pn.x_deps)
        sz = _parity(ledger, pn.z_deps)
        phi = corrected_angle(pn.angle, sx, sz)
        ledger[pn.node] = measure_node(pn.node, MeasurementBasis.rotated_x(phi))

    out_qubits = [node_qubit_index(pattern.num_rows, out.node) for out in pattern.outputs]
    output = extract_qubits(register, out_qubits)
    x_par = tuple(_parity(ledger, out.x_deps) for out in pattern.outputs)
    z_par = tuple(_parity(ledger, out.z_deps) for out in pattern.outputs)
    for y, (a, b) in enumerate(zip(x_par, z_par)):
        output = decrypt(output, y, PadKey(a, b))
    return PatternRun(
        output=output,
        outcomes=ledger,
        x_parities=x_par,
        z_parities=z_par,
        probability=probability,
    )


def _parity(ledger: dict[Node, int], deps: frozenset[Node]) -> int:
    p = 0
    for d in deps:
        p ^= ledger[d]
    return p


# --- export -------------------------------------------------------------------

def pattern_to_text(graph: ClusterGraph, pattern: MeasurementPattern) -> str:
    """Deterministic human-readable listing of nodes, angles, and dependencies."""

    def fmt_deps(deps: frozenset[Node]) -> str:
        return ";".join(f"{x},{y}" for x, y in sorted(deps)) or "-"

    lines = [f"rows={pattern.num_rows} columns={pattern.last_column + 1}"]
    for node in pattern.input_nodes:
        lines.append(f"node={node[0]},{node[1]} kind=input basis=computational")
    for pn in pattern.measured:
        lines.append(
            f"node={pn.node[0]},{pn.node[1]} kind=measured angle={pn.angle.k}"
            f" xdeps={fmt_deps(pn.x_deps)} zdeps={fmt_deps(pn.z_deps)}"
        )
    for out in pattern.outputs:
        lines.append(
            f"node={out.node[0]},{out.node[1]} kind=output"
            f" xdeps={fmt_deps(out.x_deps)} zdeps={fmt_deps(out.z_deps)}"
        )
    for u, v in sorted(graph.cx_edges):
        lines.append(f"edge={u[0]},{u[1]}-{v[0]},{v[1]} kind=cx")
    for u, v in sorted(graph.cz_edges):
        lines.append(f"edge={u[0]},{u[1]}-{v[0]},{v[1]} kind=cz")
    return "\n".join(lines) + "\n"
