"""Pattern construction and execution tests.

The independent oracle throughout is direct matrix algebra: J(t) = H Rz(t)
as explicit 2x2 matrices, kron'd across rows, with CZ matrices inserted at
cross-link columns.  Pattern executions must reproduce those products.
"""
import itertools
import math

import numpy as np
import pytest

from blindqc.mbqc import (
    ClusterGraph,
    JChain,
    MeasurementPattern,
    build_brickwork,
    build_grover_oracle_pattern,
    build_wire_patterns,
    compile_circuit,
    corrected_angle,
    decompose_to_j_chain,
    pattern_to_text,
    simulate_pattern,
)
from blindqc.statevec import (
    Angle8,
    StateVector,
    basis_state,
    fidelity_up_to_phase,
    random_state,
    zero_state,
)

SQ2 = 1 / math.sqrt(2)
H = np.array([[1, 1], [1, -1]], dtype=complex) * SQ2
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
I2 = np.eye(2, dtype=complex)
CZ4 = np.diag([1, 1, 1, -1]).astype(complex)


def rz(k):
    return np.diag([1, np.exp(1j * k * np.pi / 4)]).astype(complex)


def jmat(k):
    return H @ rz(k)


def chain_product(angles):
    u = I2
    for a in angles:
        u = jmat(a.k) @ u
    return u


def equal_up_to_phase(u, v, tol=1e-12):
    k = np.argmax(np.abs(v))
    idx = np.unravel_index(k, v.shape)
    phase = u[idx] / v[idx]
    return np.allclose(u, phase * v, atol=math.sqrt(tol))


def multi_wire_oracle(chains, links, m):
    """Kron/matmul oracle for a wire pattern with cross-links."""
    def cz_at(col):
        u = np.eye(2**m, dtype=complex)
        for c, ya, yb in links:
            if c == col:
                full = np.eye(2**m, dtype=complex)
                for idx in range(2**m):
                    bits = [(idx >> (m - 1 - q)) & 1 for q in range(m)]
                    if bits[ya] and bits[yb]:
                        full[idx, idx] = -1
                u = full @ u
        return u

    length = len(chains[0])
    u = np.eye(2**m, dtype=complex)
    for x in range(1, length + 1):
        u = cz_at(x) @ u
        col = chains[0][x - 1 : x]
        layer = np.array([[1]], dtype=complex)
        for y in range(m):
            layer = np.kron(layer, jmat(chains[y][x - 1].k))
        u = layer @ u
    u = cz_at(length + 1) @ u
    return u


# --- J-chain decomposition -----------------------------------------------------

def test_h_chain_is_single_j0():
    chain = decompose_to_j_chain("H")
    assert [a.k for a in chain.angles] == [0]
    assert equal_up_to_phase(chain_product(chain.angles), H)


@pytest.mark.parametrize(
    "gate,mat", [("I", I2), ("H", H), ("X", X), ("Z", Z)]
)
def test_named_chains_match_matrix_oracle(gate, mat):
    chain = decompose_to_j_chain(gate)
    assert equal_up_to_phase(chain_product(chain.angles), mat)


def test_rz_chains_all_angles():
    for k in range(8):
        chain = decompose_to_j_chain("RZ", Angle8(k))
        assert equal_up_to_phase(chain_product(chain.angles), rz(k))


def test_identity_triple():
    # (H S)^3 is the identity up to phase
    assert equal_up_to_phase(chain_product([Angle8(2)] * 3), I2)


def test_unsupported_chain_rejected():
    with pytest.raises(ValueError):
        decompose_to_j_chain("CX")
    with pytest.raises(ValueError):
        JChain(())


# --- corrected angle -------------------------------------------------------------

def test_corrected_angle_identity_case():
    for k in range(8):
        assert corrected_angle(Angle8(k), 0, 0).k == k


def test_corrected_angle_negation():
    assert corrected_angle(Angle8(1), 1, 0).k == 7


def test_corrected_angle_pi_shift():
    assert corrected_angle(Angle8(1), 0, 1).k == 5


# --- wire patterns ----------------------------------------------------------------

def run_pattern_deterministic(graph, pattern, state, seed=0):
    return simulate_pattern(graph, pattern, state, np.random.default_rng(seed))


def test_single_wire_j0_is_hadamard():
    graph, pattern = build_wire_patterns([JChain((Angle8(0),))])
    rng = np.random.default_rng(1)
    for seed in range(6):
        psi = random_state(1, rng)
        run = run_pattern_deterministic(graph, pattern, psi, seed)
        assert fidelity_up_to_phase(run.output, StateVector(H @ psi.amps)) > 1 - 1e-9


def test_single_wire_x_chain_flips_zero():
    chain = decompose_to_j_chain("X")
    graph, pattern = build_wire_patterns([chain])
    for seed in range(6):
        run = run_pattern_deterministic(graph, pattern, zero_state(1), seed)
        assert fidelity_up_to_phase(run.output, basis_state([1])) > 1 - 1e-9


def test_two_wires_cross_link_realizes_cz():
    chains = [JChain((Angle8(0), Angle8(0))), JChain((Angle8(0), Angle8(0)))]
    graph, pattern = build_wire_patterns(chains, [(3, 0, 1)])
    plus_plus = StateVector(np.full(4, 0.5, dtype=complex))
    for seed in range(8):
        run = run_pattern_deterministic(graph, pattern, plus_plus, seed)
        # wire chains realize I per row, so the pattern is exactly CZ
        expected = StateVector(CZ4 @ plus_plus.amps)
        assert fidelity_up_to_phase(run.output, expected) > 1 - 1e-9


def test_x_sandwich_pattern_marks_00():
    """X-chains around a cross link simulate to (XxX) CZ (XxX)."""
    xc = decompose_to_j_chain("X").angles
    chains = [JChain(xc + xc), JChain(xc + xc)]
    graph, pattern = build_wire_patterns(chains, [(3, 0, 1)])
    oracle = np.kron(X, X) @ CZ4 @ np.kron(X, X)
    rng = np.random.default_rng(2)
    for seed in range(6):
        psi = random_state(2, rng)
        run = run_pattern_deterministic(graph, pattern, psi, seed)
        assert fidelity_up_to_phase(run.output, StateVector(oracle @ psi.amps)) > 1 - 1e-9


def test_build_wire_patterns_errors():
    with pytest.raises(ValueError):
        build_wire_patterns([JChain((Angle8(0),)), JChain((Angle8(0), Angle8(0)))])
    with pytest.raises(ValueError):
        build_wire_patterns([JChain((Angle8(0),))], [(1, 0, 1)])
    with pytest.raises(ValueError):
        build_wire_patterns(
            [JChain((Angle8(0),)), JChain((Angle8(0),))], [(5, 0, 1)]
        )
    with pytest.raises(ValueError):
        build_wire_patterns(
            [JChain((Angle8(0),)), JChain((Angle8(0),))], [(1, 0, 1), (1, 1, 0)]
        )


# --- pattern soundness (randomized) ---------------------------------------------

def test_pattern_soundness_random_wire_sets():
    """<=3 rows, <=6 columns: execution equals the kron/matmul oracle."""
    rng = np.random.default_rng(3)
    for trial in range(12):
        m = int(rng.integers(1, 4))
        # keep (length + 2) * m within the 16-qubit register cap
        length = int(rng.integers(1, 4 if m == 3 else 6))
        chains = [
            [Angle8.random(rng) for _ in range(length)] for _ in range(m)
        ]
        links = []
        if m >= 2:
            for col in range(1, length + 2):
                if rng.random() < 0.3:
                    ya, yb = rng.choice(m, size=2, replace=False)
                    links.append((col, int(ya), int(yb)))
        graph, pattern = build_wire_patterns(
            [JChain(tuple(c)) for c in chains], links
        )
        oracle = multi_wire_oracle(chains, links, m)
        for _ in range(4):
            psi = random_state(m, rng)
            run = simulate_pattern(graph, pattern, psi, rng)
            expected = StateVector(oracle @ psi.amps)
            assert fidelity_up_to_phase(run.output, expected) >= 1 - 1e-9


def test_forced_branches_all_agree():
    """Every forced outcome assignment yields the same corrected output."""
    graph, pattern = build_wire_patterns([JChain((Angle8(3), Angle8(6)))])
    psi = random_state(1, np.random.default_rng(4))
    oracle = chain_product([Angle8(3), Angle8(6)]) @ psi.amps
    nodes = [pattern.input_nodes[0]] + [pn.node for pn in pattern.measured]
    total_prob = 0.0
    for bits in itertools.product((0, 1), repeat=len(nodes)):
        run = simulate_pattern(graph, pattern, psi, forced=dict(zip(nodes, bits)))
        total_prob += run.probability
        assert fidelity_up_to_phase(run.output, StateVector(oracle)) > 1 - 1e-9
    assert np.isclose(total_prob, 1.0, atol=1e-10)


# --- flow causality ----------------------------------------------------------------

def test_flow_causality_structural():
    graph, pattern = build_grover_oracle_pattern()
    order = {node: i for i, node in enumerate(pattern.input_nodes)}
    for pn in pattern.measured:
        order[pn.node] = len(order)
    for pn in pattern.measured:
        for dep in pn.x_deps | pn.z_deps:
            assert order[dep] < order[pn.node]
    for out in pattern.outputs:
        for dep in out.x_deps | out.z_deps:
            assert dep in order


def test_pattern_rejects_acausal_deps():
    with pytest.raises(ValueError):
        MeasurementPattern(
            num_rows=1,
            last_column=2,
            input_nodes=((0, 0),),
            measured=(
                __import__("blindqc.mbqc", fromlist=["PatternNode"]).PatternNode(
                    (1, 0), Angle8(0), frozenset({(2, 0)}), frozenset()
                ),
            ),
            outputs=(),
        )


# --- Grover oracle pattern ------------------------------------------------------

def test_grover_oracle_counts():
    graph, pattern = build_grover_oracle_pattern()
    assert graph.num_nodes == 12
    assert pattern.measurement_layers == 5
    assert pattern.num_rows == 2


def test_grover_oracle_simulates_to_cz():
    """The oracle rows realize Z,CZ,Z whose product is the |11>-marking CZ."""
    graph, pattern = build_grover_oracle_pattern()
    oracle = np.kron(Z, Z) @ CZ4 @ np.kron(Z, Z)
    assert np.allclose(oracle, CZ4, atol=1e-12)
    plus_plus = StateVector(np.full(4, 0.5, dtype=complex))
    expected = StateVector(CZ4 @ plus_plus.amps)
    for seed in range(10):
        run = run_pattern_deterministic(graph, pattern, plus_plus, seed)
        assert fidelity_up_to_phase(run.output, expected) > 1 - 1e-9


# --- brickwork -------------------------------------------------------------------

def test_brickwork_degenerate_and_counts():
    g = build_brickwork(1, 2)
    assert g.num_nodes == 2
    assert not g.cz_edges and not g.cx_edges
    for n, m in [(5, 2), (9, 2), (9, 4)]:
        assert build_brickwork(n, m).num_nodes == n * m
    with pytest.raises(ValueError):
        build_brickwork(0, 2)


def test_brickwork_5x2_matches_wire_pattern_with_rung():
    bw = build_brickwork(5, 2)
    graph, _ = build_wire_patterns(
        [JChain((Angle8(0),) * 3), JChain((Angle8(0),) * 3)], [(3, 0, 1)]
    )
    assert bw.nodes == graph.nodes
    assert bw.cz_edges == graph.cz_edges
    assert bw.cx_edges == graph.cx_edges


def test_brickwork_5x2_h_tensor_i_on_00():
    """Rows [J0,J0,J0] and [J2,J2,J2] across the rung give (HxI)|00>."""
    _, pattern = build_wire_patterns(
        [JChain((Angle8(0),) * 3), JChain((Angle8(2),) * 3)], [(3, 0, 1)]
    )
    bw = build_brickwork(5, 2)
    expected = StateVector(np.kron(H, I2) @ basis_state([0, 0]).amps)
    for seed in range(8):
        run = simulate_pattern(bw, pattern, zero_state(2), np.random.default_rng(seed))
        assert fidelity_up_to_phase(run.output, expected) > 1 - 1e-9


# --- compiler ---------------------------------------------------------------------

def test_compile_single_h_minimal():
    graph, pattern = compile_circuit([("H", [0], None)], 1)
    assert pattern.last_column == 2
    assert graph.num_nodes == 3


def test_compile_odd_alignment_uses_identity_triple():
    """[H 0, CZ 0 1] forces a 1-vs-0 length clash resolved by triple padding."""
    graph, pattern = compile_circuit([("H", [0], None), ("CZ", [0, 1], None)], 2)
    rng = np.random.default_rng(5)
    oracle = CZ4 @ np.kron(H, I2)
    for _ in range(6):
        psi = random_state(2, rng)
        run = simulate_pattern(graph, pattern, psi, rng)
        assert fidelity_up_to_phase(run.output, StateVector(oracle @ psi.amps)) > 1 - 1e-9


def test_compile_cz_only_segment():
    graph, pattern = compile_circuit([("CZ", [0, 1], None)], 2)
    plus_plus = StateVector(np.full(4, 0.5, dtype=complex))
    run = run_pattern_deterministic(graph, pattern, plus_plus, 0)
    assert fidelity_up_to_phase(run.output, StateVector(CZ4 @ plus_plus.amps)) > 1 - 1e-9


def test_compile_cx_via_h_cz_h():
    graph, pattern = compile_circuit([("CX", [0, 1], None)], 2)
    cx = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], complex)
    rng = np.random.default_rng(6)
    for _ in range(5):
        psi = random_state(2, rng)
        run = simulate_pattern(graph, pattern, psi, rng)
        assert fidelity_up_to_phase(run.output, StateVector(cx @ psi.amps)) > 1 - 1e-9


def test_compile_s_t_gates_as_phases():
    graph, pattern = compile_circuit([("S", [0], None), ("T", [0], None)], 1)
    rng = np.random.default_rng(7)
    oracle = rz(1) @ rz(2)
    psi = random_state(1, rng)
    run = simulate_pattern(graph, pattern, psi, rng)
    assert fidelity_up_to_phase(run.output, StateVector(oracle @ psi.amps)) > 1 - 1e-9


def test_compile_rejects_bad_targets():
    with pytest.raises(ValueError):
        compile_circuit([("H", [2], None)], 2)


# --- export -----------------------------------------------------------------------

def test_pattern_export_deterministic():
    graph, pattern = build_grover_oracle_pattern()
    text = pattern_to_text(graph, pattern)
    assert text == pattern_to_text(*build_grover_oracle_pattern())
    assert "kind=input" in text and "kind=output" in text
    assert "angle=4" in text  # the Z chain's J(pi) node
