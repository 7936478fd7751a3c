import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lchsemu.block_encoding import (
    BandedSpec,
    assemble_U_C,
    be_banded_hermitian,
    build_U_C,
    dense_c_blocks,
    incrementer,
    needs_magnitude_qubit,
    sine_circuit,
    uc_layout,
    zeta_angles,
)
from lchsemu.lchs_core import theta_grid
from lchsemu.linalg import AdeParams, build_ade_matrix, hermitian_split
from lchsemu.sim_engine import CircuitBuilder, RegisterLayout, circuit_to_matrix


def ade_parts(n_x, v=1.0, D=0.01):
    return hermitian_split(build_ade_matrix(AdeParams(n_x, v, D)))


def test_incrementer_is_cyclic_shift():
    lay = RegisterLayout.of(("r", 3))
    for dec in (False, True):
        b = CircuitBuilder(lay)
        incrementer(b, lay.qubits("r"), decrement=dec)
        U = circuit_to_matrix(b.build())
        for i in range(8):
            j = (i - 1) % 8 if dec else (i + 1) % 8
            assert abs(U[j, i]) == pytest.approx(1.0)


def test_sine_endpoints_and_table():
    for n_k in (1, 2, 4):
        s = sine_circuit(n_k)
        diag = np.diag(s.block())
        thetas, _ = theta_grid(n_k)
        np.testing.assert_allclose(diag, np.sin(thetas), atol=1e-13)
        assert diag[0] == pytest.approx(-1.0, abs=1e-13)
        assert diag[-1] == pytest.approx(1.0, abs=1e-13)
        B = s.block()
        np.testing.assert_allclose(B, np.diag(diag), atol=1e-13)
    # whole oracle is Hermitian
    U = circuit_to_matrix(sine_circuit(3).circuit)
    np.testing.assert_allclose(U, U.conj().T, atol=1e-13)


def test_banded_zero_matrix():
    be = be_banded_hermitian(BandedSpec({}), 2)
    assert be.zero
    np.testing.assert_allclose(be.block(), 0, atol=1e-15)


@pytest.mark.parametrize("n_x", [2, 3])
def test_banded_ade_parts(n_x):
    A_L, A_H = ade_parts(n_x)
    for M in (A_H, A_L):
        be = be_banded_hermitian(BandedSpec.from_dense(M), n_x)
        np.testing.assert_allclose(be.block() * be.alpha, M, atol=1e-12)
        U = circuit_to_matrix(be.circuit)
        np.testing.assert_allclose(U, U.conj().T, atol=1e-12)


@given(
    st.floats(-2, 2),
    st.floats(0.01, 2),
    st.floats(-math.pi, math.pi),
    # acos is steep near 1, so keep slack either exact or clearly above it
    st.one_of(st.just(1.0), st.floats(1.001, 2.0)),
)
@settings(max_examples=25, deadline=None)
def test_banded_random_hermitian(d, mag, phase, slack):
    m = mag * complex(math.cos(phase), math.sin(phase))
    spec = BandedSpec({0: d, 1: m, -1: m.conjugate()})
    ang = zeta_angles(spec, abs(d) * slack, abs(m) * slack)
    be = be_banded_hermitian(spec, 2, ang)
    assert needs_magnitude_qubit(ang) == (slack > 1.0)
    np.testing.assert_allclose(be.block() * be.alpha, spec.to_dense(2), atol=1e-12)


def test_banded_spec_validation():
    with pytest.raises(ValueError):
        BandedSpec({2: 1.0})
    with pytest.raises(ValueError):
        BandedSpec({0: 1.0}, periodic=False)
    with pytest.raises(ValueError):
        be_banded_hermitian(BandedSpec({1: 1.0}), 2)
    with pytest.raises(ValueError):
        zeta_angles(BandedSpec({0: 2.0}), eta_diag=1.0)
    with pytest.raises(ValueError):
        BandedSpec.from_dense(np.ones((4, 4)))


def test_uc_all_blocks_ade_n2():
    A = build_ade_matrix(AdeParams(2))
    uc = build_U_C(A, 3, 10.0)
    C = dense_c_blocks(A, 3, 10.0)
    assert uc.alpha == pytest.approx(3.0 + 10 * 0.36)
    for j in range(8):
        B = uc.block_j(j)
        np.testing.assert_allclose(B * uc.alpha, C[j], atol=1e-11)
        np.testing.assert_allclose(B, B.conj().T, atol=1e-12)
        assert np.linalg.norm(B, 2) <= 1 + 1e-12
    # blocks between different j vanish
    full = uc.block()
    np.testing.assert_allclose(full[:4, 4:8], 0, atol=1e-13)


@pytest.mark.parametrize("n_x,n_k", [(2, 2), (3, 2), (2, 4), (3, 3)])
def test_uc_alpha_consistency(n_x, n_k):
    A = build_ade_matrix(AdeParams(n_x))
    uc = build_U_C(A, n_k, 7.0)
    C = dense_c_blocks(A, n_k, 7.0)
    for j in range(1 << n_k):
        np.testing.assert_allclose(uc.alpha * uc.block_j(j), C[j], atol=1e-11)


def test_uc_without_dissipation():
    # D = 0 and v = 0 on the A_L side: use a purely anti-Hermitian generator
    A_L, A_H = ade_parts(2)
    A = 1j * A_H
    uc = build_U_C(A, 2, 10.0)
    for j in range(4):
        np.testing.assert_allclose(uc.alpha * uc.block_j(j), A_H, atol=1e-12)


def test_uc_theta_zero_block():
    # even grids never hit theta = 0, so check the sin(theta) offset for every j
    A = build_ade_matrix(AdeParams(2))
    A_L, A_H = ade_parts(2)
    uc = build_U_C(A, 2, 10.0)
    thetas, _ = theta_grid(2)
    for j, th in enumerate(thetas):
        np.testing.assert_allclose(uc.alpha * uc.block_j(j) - A_H, 10 * math.sin(th) * A_L, atol=1e-11)


def test_assemble_requires_shared_layout():
    A_L, A_H = ade_parts(2)
    lay = uc_layout(2, 2)
    be_H = be_banded_hermitian(BandedSpec.from_dense(A_H), 2, layout=lay)
    be_L = be_banded_hermitian(BandedSpec.from_dense(A_L), 2)
    with pytest.raises(ValueError):
        assemble_U_C(be_H, be_L, sine_circuit(2, lay), 10.0)
    with pytest.raises(ValueError):
        assemble_U_C(be_H, be_banded_hermitian(BandedSpec.from_dense(A_L), 2, layout=lay), sine_circuit(2, lay), 0.0)
