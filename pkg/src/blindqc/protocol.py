"""Two-party blind delegation of a measurement pattern.

Alice (client) knows the pattern angles, the one-time-pad keys of the input
column, and per-node secrets theta (blinding phase of each auxiliary qubit)
and r (outcome mask).  Bob (server) holds the quantum register, entangles it
into the cluster, and measures at the angles Alice transmits.

Round structure:
  1. Alice sends auxiliary qubits |+_theta| for columns 1..n-1.
  2. Alice sends the encrypted input column and |+> output column.
  3. Bob entangles: CX onto column 0 (column-1 qubits controlling), CZ on
     every other edge.
  4. Bob measures column 0 computationally and reports; for each later
     column Alice sends delta = phi' + theta + pi*r and Bob reports the
     rotated-X outcome.  Alice's ledger stores outcomes with her masks
     removed (r flips; column-0 entries absorb the input X-pad).
  5. Bob transfers the output column; Alice reads the output pad keys off
     the dependency parities.

Messages are recorded in order in a Transcript; rerunning both machines on
the same seeds regenerates it byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .mbqc import ClusterGraph, MeasurementPattern, Node, corrected_angle, node_qubit_index
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


class ProtocolViolation(RuntimeError):
    """Message arrived out of protocol order or repeated."""


# --- messages ----------------------------------------------------------------


@dataclass(frozen=True)
class QubitTransfer:
    """Single prepared qubit moving client -> server (auxiliary or output prep)."""

    node: Node
    state: StateVector
    origin: str = "client"


@dataclass(frozen=True)
class InputTransfer:
    """Joint (possibly entangled) encrypted input column, client -> server."""

    nodes: tuple[Node, ...]
    state: StateVector
    origin: str = "client"


@dataclass(frozen=True)
class Delta:
    node: Node
    delta: Angle8
    origin: str = "client"


@dataclass(frozen=True)
class Outcome:
    node: Node
    s: int
    origin: str = "server"


@dataclass(frozen=True)
class OutputTransfer:
    nodes: tuple[Node, ...]
    state: StateVector
    origin: str = "server"


Message = QubitTransfer | InputTransfer | Delta | Outcome | OutputTransfer


def _fmt_amps(state: StateVector) -> str:
    return ";".join(f"{z.real:.12e}{z.imag:+.12e}j" for z in state.amps)


def _fmt_node(node: Node) -> str:
    return f"{node[0]},{node[1]}"


def message_to_line(msg: Message) -> str:
    """One deterministic record: type, node(s), payload, origin."""
    if isinstance(msg, QubitTransfer):
        return f"type=qubit node={_fmt_node(msg.node)} payload={_fmt_amps(msg.state)} origin={msg.origin}"
    if isinstance(msg, InputTransfer):
        nodes = ";".join(_fmt_node(n) for n in msg.nodes)
        return f"type=input nodes={nodes} payload={_fmt_amps(msg.state)} origin={msg.origin}"
    if isinstance(msg, Delta):
        return f"type=delta node={_fmt_node(msg.node)} payload={msg.delta.k} origin={msg.origin}"
    if isinstance(msg, Outcome):
        return f"type=outcome node={_fmt_node(msg.node)} payload={msg.s} origin={msg.origin}"
    if isinstance(msg, OutputTransfer):
        nodes = ";".join(_fmt_node(n) for n in msg.nodes)
        return f"type=output nodes={nodes} payload={_fmt_amps(msg.state)} origin={msg.origin}"
    raise TypeError(f"unknown message {msg!r}")


@dataclass
class Transcript:
    """Ordered protocol messages plus the leaked dimensions (n, m)."""

    last_column: int
    num_rows: int
    messages: list[Message] = field(default_factory=list)

    def append(self, msg: Message) -> None:
        self.messages.append(msg)

    def delta_values(self) -> dict[Node, int]:
        return {m.node: m.delta.k for m in self.messages if isinstance(m, Delta)}

    def serialize(self) -> str:
        lines = [f"dims n={self.last_column} m={self.num_rows}"]
        lines += [message_to_line(m) for m in self.messages]
        return "\n".join(lines) + "\n"


# --- party state ---------------------------------------------------------------


@dataclass
class ClientState:
    """Alice's secrets and ledger; never shipped to the server."""

    pattern: MeasurementPattern
    input_keys: tuple[PadKey, ...]
    thetas: dict[Node, Angle8]
    rs: dict[Node, int]
    ledger: dict[Node, int] = field(default_factory=dict)
    output_keys: tuple[PadKey, ...] | None = None

    def secret_tokens(self) -> list[str]:
        """Named secret records, used by the boundary-hygiene check."""
        toks = [f"theta[{_fmt_node(n)}]={a.k}" for n, a in sorted(self.thetas.items())]
        toks += [f"r[{_fmt_node(n)}]={b}" for n, b in sorted(self.rs.items())]
        toks += [
            f"key[{y}]=({k.a},{k.b})" for y, k in enumerate(self.input_keys)
        ]
        toks += [
            f"phi[{_fmt_node(pn.node)}]={pn.angle.k}" for pn in self.pattern.measured
        ]
        return toks


@dataclass
class ServerState:
    """Bob's view: the public graph, his register, and what he was sent.

    Holds no blinding phases, no outcome masks, no pattern angles, and no
    pad keys.
    """

    graph: ClusterGraph
    num_rows: int
    last_column: int
    pending: dict[Node, StateVector] = field(default_factory=dict)
    input_state: StateVector | None = None
    register: StateVector | None = None
    entangled: bool = False
    outcomes: dict[Node, int] = field(default_factory=dict)
    deltas: dict[Node, Angle8] = field(default_factory=dict)
    columns_done: int = -1

    def serialize_view(self) -> str:
        """Deterministic dump of Bob's classical records (no amplitudes)."""
        lines = [f"dims n={self.last_column} m={self.num_rows}"]
        lines += [f"cx-edge {_fmt_node(u)}-{_fmt_node(v)}" for u, v in sorted(self.graph.cx_edges)]
        lines += [f"cz-edge {_fmt_node(u)}-{_fmt_node(v)}" for u, v in sorted(self.graph.cz_edges)]
        lines += [f"delta[{_fmt_node(n)}]={a.k}" for n, a in sorted(self.deltas.items())]
        lines += [f"outcome[{_fmt_node(n)}]={s}" for n, s in sorted(self.outcomes.items())]
        return "\n".join(lines) + "\n"


def _graph_dims(graph: ClusterGraph) -> tuple[int, int]:
    n = max(x for x, _ in graph.nodes)
    m = max(y for _, y in graph.nodes) + 1
    return n, m


# --- protocol steps --------------------------------------------------------------


def client_prepare(
    pattern: MeasurementPattern,
    input_state: StateVector,
    input_keys: Sequence[PadKey],
    rng: np.random.Generator,
    theta_overrides: Mapping[Node, Angle8] | None = None,
    r_overrides: Mapping[Node, int] | None = None,
) -> tuple[ClientState, list[Message]]:
    """Steps 1-2: sample secrets, emit auxiliary, input, and output transfers.

    `input_state` is the already-encrypted first column X^a Z^b |psi> (joint
    over rows); the matching keys must be supplied so later corrections can
    fold them in.  The override mappings exist for exact-enumeration tests.
    """
    m, n = pattern.num_rows, pattern.last_column
    if input_state.num_qubits != m:
        raise ValueError(f"input has {input_state.num_qubits} rows, pattern needs {m}")
    if len(input_keys) != m:
        raise ValueError("one input key per row required")

    aux_nodes = [pn.node for pn in pattern.measured]
    thetas = {node: Angle8.random(rng) for node in aux_nodes}
    rs = {node: int(rng.integers(2)) for node in aux_nodes}
    for node, a in (theta_overrides or {}).items():
        thetas[node] = a
    for node, b in (r_overrides or {}).items():
        rs[node] = int(b) & 1

    messages: list[Message] = [
        QubitTransfer(node, prepare_plus_theta(thetas[node])) for node in aux_nodes
    ]
    messages.append(InputTransfer(pattern.input_nodes, input_state))
    messages += [
        QubitTransfer(out.node, prepare_plus_theta(Angle8(0)))
        for out in pattern.outputs
    ]
    client = ClientState(
        pattern=pattern,
        input_keys=tuple(input_keys),
        thetas=thetas,
        rs=rs,
    )
    return client, messages


def server_receive(graph: ClusterGraph, messages: Sequence[Message]) -> ServerState:
    """Bob ingests the preparation messages and assembles his register."""
    n, m = _graph_dims(graph)
    server = ServerState(graph=graph, num_rows=m, last_column=n)
    for msg in messages:
        if isinstance(msg, QubitTransfer):
            if msg.node in server.pending:
                raise ProtocolViolation(f"qubit {msg.node} transferred twice")
            server.pending[msg.node] = msg.state
        elif isinstance(msg, InputTransfer):
            if server.input_state is not None:
                raise ProtocolViolation("input column transferred twice")
            server.input_state = msg.state
        else:
            raise ProtocolViolation(f"unexpected message during preparation: {msg}")
    expected = {(x, y) for x in range(1, n + 1) for y in range(m)}
    if server.input_state is None or set(server.pending) != expected:
        raise ProtocolViolation("missing qubits; cannot assemble register")
    register = server.input_state
    for x in range(1, n + 1):
        for y in range(m):
            register = tensor(register, server.pending[(x, y)])
    server.register = register
    server.pending.clear()
    return server


def server_entangle(server: ServerState) -> ServerState:
    """Step 3: CX onto the input column (column-1 controls), CZ elsewhere."""
    if server.register is None:
        raise ProtocolViolation("missing qubits")
    if server.entangled:
        raise ProtocolViolation("already entangled")
    m = server.num_rows
    reg = server.register
    for u, v in sorted(server.graph.cx_edges):
        col0, col1 = (u, v) if u[0] == 0 else (v, u)
        reg = apply_gate(reg, "CX", [node_qubit_index(m, col1), node_qubit_index(m, col0)])
    for u, v in sorted(server.graph.cz_edges):
        reg = apply_gate(reg, "CZ", [node_qubit_index(m, u), node_qubit_index(m, v)])
    server.register = reg
    server.entangled = True
    return server


def _server_measure(
    server: ServerState,
    node: Node,
    basis: MeasurementBasis,
    rng: np.random.Generator,
    forced: Mapping[Node, int] | None,
) -> tuple[int, float]:
    if not server.entangled:
        raise ProtocolViolation("measurement before entanglement")
    if node in server.outcomes:
        raise ProtocolViolation(f"node {node} measured twice")
    x = node[0]
    if x > server.columns_done + 1:
        raise ProtocolViolation(f"column {x} measured before column {x - 1} finished")
    q = node_qubit_index(server.num_rows, node)
    if forced is not None:
        prob, server.register = measure_forced(server.register, q, basis, forced[node])
        outcome = forced[node] & 1
    else:
        outcome, server.register = measure(server.register, q, basis, rng)
        prob = 1.0
    server.outcomes[node] = outcome
    done_in_col = sum(1 for (cx, _) in server.outcomes if cx == x)
    if done_in_col == server.num_rows:
        server.columns_done = x
    return outcome, prob


def run_interaction(
    client: ClientState,
    server: ServerState,
    server_rng: np.random.Generator,
    transcript: Transcript | None = None,
    forced_outcomes: Mapping[Node, int] | None = None,
) -> tuple[ClientState, ServerState, Transcript, float]:
    """Step 4: the full measurement dialogue.

    Returns the branch probability as well (1.0 for sampled runs); with
    `forced_outcomes` every measurement branch is pinned and the joint
    probability of that transcript is accumulated.
    """
    if transcript is None:
        transcript = Transcript(client.pattern.last_column, client.pattern.num_rows)
    probability = 1.0
    pattern = client.pattern

    for y, node in enumerate(pattern.input_nodes):
        s, p = _server_measure(
            server, node, MeasurementBasis.computational(), server_rng, forced_outcomes
        )
        probability *= p
        transcript.append(Outcome(node, s))
        # fold the input X-pad in once; every later parity over this node is
        # then correct without re-consulting the key
        client.ledger[node] = s ^ client.input_keys[y].a

    for pn in pattern.measured:
        x, y = pn.node
        sx = _parity(client.ledger, pn.x_deps)
        sz = _parity(client.ledger, pn.z_deps)
        if x == 1:
            sz ^= client.input_keys[y].b
        phi_prime = corrected_angle(pn.angle, sx, sz)
        delta = phi_prime + client.thetas[pn.node] + Angle8(4 * client.rs[pn.node])
        transcript.append(Delta(pn.node, delta))
        server.deltas[pn.node] = delta
        s, p = _server_measure(
            server, pn.node, MeasurementBasis.rotated_x(delta), server_rng, forced_outcomes
        )
        probability *= p
        transcript.append(Outcome(pn.node, s))
        client.ledger[pn.node] = s ^ client.rs[pn.node]

    return client, server, transcript, probability


def finalize_output(
    client: ClientState,
    server: ServerState,
    transcript: Transcript | None = None,
) -> tuple[StateVector, tuple[PadKey, ...]]:
    """Step 5: output column travels back; pad keys come from the parities."""
    pattern = client.pattern
    needed = len(pattern.input_nodes) + len(pattern.measured)
    if len(server.outcomes) != needed:
        raise ProtocolViolation("interaction incomplete; outputs not ready")
    out_nodes = tuple(out.node for out in pattern.outputs)
    out_qubits = [node_qubit_index(server.num_rows, node) for node in out_nodes]
    output_state = extract_qubits(server.register, out_qubits)
    if transcript is not None:
        transcript.append(OutputTransfer(out_nodes, output_state))

    keys = []
    for out in pattern.outputs:
        a = _parity(client.ledger, out.x_deps)
        b = _parity(client.ledger, out.z_deps)
        if out.node[0] == 1:
            b ^= client.input_keys[out.node[1]].b
        keys.append(PadKey(a, b))
    client.output_keys = tuple(keys)
    return output_state, client.output_keys


def _parity(ledger: Mapping[Node, int], deps: frozenset[Node]) -> int:
    p = 0
    for d in deps:
        p ^= ledger[d]
    return p


# --- one-shot orchestration --------------------------------------------------------


@dataclass
class ProtocolResult:
    output: StateVector
    output_keys: tuple[PadKey, ...]
    transcript: Transcript
    client: ClientState
    server: ServerState
    probability: float

    def decrypted_output(self) -> StateVector:
        out = self.output
        for y, key in enumerate(self.output_keys):
            out = decrypt(out, y, key)
        return out


def run_protocol(
    graph: ClusterGraph,
    pattern: MeasurementPattern,
    input_state: StateVector,
    input_keys: Sequence[PadKey],
    client_rng: np.random.Generator,
    server_rng: np.random.Generator,
    forced_outcomes: Mapping[Node, int] | None = None,
    theta_overrides: Mapping[Node, Angle8] | None = None,
    r_overrides: Mapping[Node, int] | None = None,
) -> ProtocolResult:
    """Run the whole delegation once and collect everything a test could want."""
    client, prep = client_prepare(
        pattern, input_state, input_keys, client_rng, theta_overrides, r_overrides
    )
    transcript = Transcript(pattern.last_column, pattern.num_rows)
    for msg in prep:
        transcript.append(msg)
    server = server_receive(graph, prep)
    server_entangle(server)
    client, server, transcript, probability = run_interaction(
        client, server, server_rng, transcript, forced_outcomes
    )
    output, keys = finalize_output(client, server, transcript)
    return ProtocolResult(
        output=output,
        output_keys=keys,
        transcript=transcript,
        client=client,
        server=server,
        probability=probability,
    )
