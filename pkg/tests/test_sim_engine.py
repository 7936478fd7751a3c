import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lchsemu.sim_engine import (
    MAX_MATRIX_QUBITS,
    Circuit,
    CircuitBuilder,
    GateKind,
    RegisterLayout,
    StateVector,
    StmcGate,
    apply,
    apply_to_array,
    circuit_to_matrix,
    count_stmc,
    extract_block,
    postselect_zero,
)


def gate_oracle(g: StmcGate, n: int) -> np.ndarray:
    """Dense matrix of one gate by basis-state enumeration."""
    U = np.zeros((1 << n, 1 << n), dtype=complex)
    m = g.matrix()
    for i in range(1 << n):
        if all(((i >> q) & 1) == p for q, p in g.controls):
            bit = (i >> g.target) & 1
            for out in (0, 1):
                j = (i & ~(1 << g.target)) | (out << g.target)
                U[j, i] += m[out, bit]
        else:
            U[i, i] = 1.0
    return U


def circuit_oracle(c: Circuit) -> np.ndarray:
    n = c.layout.n_qubits
    U = np.eye(1 << n, dtype=complex)
    for g in c.gates:
        U = gate_oracle(g, n) @ U
    return U


@st.composite
def circuits(draw, max_qubits=10, max_gates=40):
    n = draw(st.integers(1, max_qubits))
    layout = RegisterLayout.of(("q", n))
    gates = []
    for _ in range(draw(st.integers(0, max_gates))):
        kind = draw(st.sampled_from(list(GateKind)))
        target = draw(st.integers(0, n - 1))
        others = [q for q in range(n) if q != target]
        ctrl_q = draw(st.lists(st.sampled_from(others), unique=True, max_size=min(3, len(others)))) if others else []
        controls = tuple((q, draw(st.integers(0, 1))) for q in ctrl_q)
        angle = draw(st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False))
        gates.append(StmcGate(kind, target, angle, controls))
    return Circuit(layout, tuple(gates))


def random_state(rng, n):
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return v / np.linalg.norm(v)


# --- layout -------------------------------------------------------------------


def test_layout_little_endian():
    lay = RegisterLayout.of(("a", 2), ("b", 3), ("c", 1))
    assert lay.n_qubits == 6
    assert lay.qubits("b") == (2, 3, 4)
    assert lay.qubit("c") == 5
    assert lay.index(a=1, b=2) == 1 + (2 << 2)
    s = StateVector.product(lay, {"a": 3, "b": 5, "c": 1})
    assert np.argmax(np.abs(s.amplitudes)) == lay.index(a=3, b=5, c=1)
    view = s.register_view(["a", "b", "c"])
    assert view[3, 5, 1] == 1
    assert "b" in lay and "z" not in lay
    assert lay.without([0, 2, 3, 4]).registers == (("a", 1), ("c", 1))
    with pytest.raises(ValueError):
        lay.index(a=4)


def test_layout_validation():
    with pytest.raises(ValueError):
        RegisterLayout.of(("a", 1), ("a", 2))
    with pytest.raises(ValueError):
        RegisterLayout.of(("a", 0))


def test_gate_validation():
    with pytest.raises(ValueError):
        StmcGate(GateKind.X, 0, 0.0, ((0, 1),))
    with pytest.raises(ValueError):
        StmcGate(GateKind.X, 0, 0.0, ((1, 1), (1, 0)))
    with pytest.raises(ValueError):
        StmcGate(GateKind.RY, 0, float("nan"))
    lay = RegisterLayout.of(("q", 2))
    with pytest.raises(ValueError):
        Circuit(lay, (StmcGate(GateKind.X, 2),))


# --- trivial examples ---------------------------------------------------------


def test_x_and_hh():
    lay = RegisterLayout.of(("q", 1))
    s = apply(CircuitBuilder(lay).x(0).build(), StateVector.zero(lay))
    np.testing.assert_allclose(s.amplitudes, [0, 1])
    s = apply(CircuitBuilder(lay).h(0).h(0).build(), StateVector.zero(lay))
    np.testing.assert_allclose(s.amplitudes, [1, 0], atol=1e-15)


def test_matrix_examples():
    lay = RegisterLayout.of(("q", 1))
    np.testing.assert_array_equal(circuit_to_matrix(Circuit(lay)), np.eye(2))
    th = 0.77
    np.testing.assert_allclose(
        circuit_to_matrix(CircuitBuilder(lay).ry(0, th).build()),
        [[math.cos(th / 2), -math.sin(th / 2)], [math.sin(th / 2), math.cos(th / 2)]],
        atol=1e-15,
    )
    # X on qubit 0 controlled on qubit 1 being 0
    lay2 = RegisterLayout.of(("q", 2))
    U = circuit_to_matrix(CircuitBuilder(lay2).x(0, ((1, 0),)).build())
    X = np.array([[0, 1], [1, 0]])
    P0, P1 = np.diag([1, 0]), np.diag([0, 1])
    # qubit 1 is the more significant tensor factor
    np.testing.assert_allclose(U, np.kron(P0, X) + np.kron(P1, np.eye(2)), atol=0)


def test_random_circuit_3q_vs_dense(rng):
    lay = RegisterLayout.of(("q", 3))
    b = CircuitBuilder(lay)
    kinds = list(GateKind)
    for _ in range(50):
        t = int(rng.integers(3))
        ctrl = tuple((q, int(rng.integers(2))) for q in range(3) if q != t and rng.random() < 0.4)
        b.add(kinds[int(rng.integers(len(kinds)))], t, float(rng.uniform(-4, 4)), ctrl)
    c = b.build()
    np.testing.assert_allclose(circuit_to_matrix(c), circuit_oracle(c), atol=1e-12)


def test_global_phase_helper():
    lay = RegisterLayout.of(("q", 2))
    c = CircuitBuilder(lay).global_phase(0, 0.3, ((1, 1),)).build()
    np.testing.assert_allclose(circuit_to_matrix(c), np.diag([1, 1, np.exp(0.3j), np.exp(0.3j)]), atol=1e-15)


def test_batch_and_shape_checks(rng):
    lay = RegisterLayout.of(("q", 3))
    c = CircuitBuilder(lay).h(0).x(2, ((0, 1),)).ry(1, 0.3).build()
    M = rng.standard_normal((8, 4)) + 0j
    out = apply_to_array(c, M)
    np.testing.assert_allclose(out, circuit_to_matrix(c) @ M, atol=1e-14)
    with pytest.raises(ValueError):
        apply_to_array(c, np.ones(4))
    big = RegisterLayout.of(("q", MAX_MATRIX_QUBITS + 1))
    with pytest.raises(ValueError):
        circuit_to_matrix(Circuit(big))
    with pytest.raises(ValueError):
        apply(c, StateVector.zero(RegisterLayout.of(("p", 3))))


# --- post-selection -----------------------------------------------------------


def test_postselect_bell():
    lay = RegisterLayout.of(("q", 2))
    s = StateVector(np.array([1, 0, 0, 1]) / math.sqrt(2), lay)
    r, p = postselect_zero(s, [1])
    assert p == pytest.approx(0.5)
    np.testing.assert_allclose(r.amplitudes, [1, 0], atol=1e-15)
    r, p = postselect_zero(s, [1], renormalize=False)
    assert r.norm == pytest.approx(math.sqrt(0.5))


def test_postselect_product(rng):
    lay = RegisterLayout.of(("sys", 2), ("anc", 1))
    psi = random_state(rng, 2)
    r, p = postselect_zero(StateVector.product(lay, {"sys": psi}), lay.qubits("anc"))
    assert p == pytest.approx(1.0)
    np.testing.assert_allclose(r.amplitudes, psi, atol=1e-15)
    with pytest.raises(ValueError):
        postselect_zero(StateVector.product(lay, {"anc": 1}), lay.qubits("anc"))


def test_postselect_two_term_lcu(rng):
    # (U0 + U1)/2 through H, ctrl0 U0, ctrl1 U1, H
    lay = RegisterLayout.of(("sys", 2), ("anc", 1))
    a = lay.qubit("anc")
    b = CircuitBuilder(lay).h(a)
    b.ry(0, 0.4, ((a, 0),)).x(1, ((a, 0), (0, 1)))
    b.h(1, ((a, 1),)).rz(0, 1.1, ((a, 1),))
    b.h(a)
    c = b.build()
    sub = RegisterLayout.of(("q", 2))
    U0 = circuit_to_matrix(CircuitBuilder(sub).ry(0, 0.4).x(1, ((0, 1),)).build())
    U1 = circuit_to_matrix(CircuitBuilder(sub).h(1).rz(0, 1.1).build())
    psi = random_state(rng, 2)
    out = apply(c, StateVector.product(lay, {"sys": psi}))
    r, p = postselect_zero(out, [a], renormalize=False)
    ref = (U0 + U1) @ psi / 2
    np.testing.assert_allclose(r.amplitudes, ref, atol=1e-14)
    assert p == pytest.approx(np.vdot(ref, ref).real, abs=1e-14)
    np.testing.assert_allclose(extract_block(c, [a]), (U0 + U1) / 2, atol=1e-14)


# --- counting and serialization -----------------------------------------------


def test_count_stmc():
    lay = RegisterLayout.of(("q", 2))
    assert count_stmc(Circuit(lay))["total"] == 0
    c = CircuitBuilder(lay).x(0).x(1).x(0, ((1, 1),)).h(0).h(1).build()
    cnt = count_stmc(c)
    assert cnt["X"] == 3 and cnt["H"] == 2 and cnt["total"] == 5


def test_dump_roundtrip():
    lay = RegisterLayout.of(("a", 2), ("b", 1))
    c = CircuitBuilder(lay).h(0).ry(2, 0.123456789012345678, ((0, 1), (1, 0))).phase(1, -2.5).build()
    c2 = Circuit.load(c.dump())
    assert c2.gates == c.gates and c2.layout == c.layout
    with pytest.raises(ValueError):
        Circuit.load("X 0 0")


def test_composition_helpers():
    lay = RegisterLayout.of(("q", 2))
    c1 = CircuitBuilder(lay).h(0).build()
    c2 = CircuitBuilder(lay).x(1, ((0, 1),)).build()
    np.testing.assert_allclose(circuit_to_matrix(c1 + c2), circuit_to_matrix(c2) @ circuit_to_matrix(c1), atol=1e-15)
    cc = CircuitBuilder(RegisterLayout.of(("q", 3))).ry(0, 0.5).build().controlled(((2, 1),))
    assert cc.gates[0].controls == ((2, 1),)
    with pytest.raises(ValueError):
        c1.then(Circuit(RegisterLayout.of(("p", 2))))


# --- invariants ---------------------------------------------------------------


@given(circuits(max_qubits=5, max_gates=25))
@settings(max_examples=60, deadline=None)
def test_matrix_vs_kron_oracle(c):
    np.testing.assert_allclose(circuit_to_matrix(c), circuit_oracle(c), atol=1e-12)


@given(circuits(), st.integers(0, 2**31 - 1))
@settings(max_examples=100, deadline=None)
def test_unitarity_adjoint_composition(c, seed):
    rng = np.random.default_rng(seed)
    n = c.layout.n_qubits
    s = StateVector(random_state(rng, n), c.layout)
    out = apply(c, s)
    assert abs(out.norm - 1) <= 1e-12
    back = apply(c.adjoint(), out)
    np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-11)
    half = len(c.gates) // 2
    c1 = Circuit(c.layout, c.gates[:half])
    c2 = Circuit(c.layout, c.gates[half:])
    np.testing.assert_allclose(apply(c2, apply(c1, s)).amplitudes, apply(c1 + c2, s).amplitudes, atol=1e-13)
    if n <= 8:
        np.testing.assert_allclose(circuit_to_matrix(c) @ s.amplitudes, out.amplitudes, atol=1e-12)
