import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lchsemu.linalg import (
    AdeParams,
    build_ade_matrix,
    error_norms,
    expm,
    expm_hermitian_batch,
    gaussian_initial_state,
    hermitian_split,
    is_hermitian,
    spectral_norm,
)

from conftest import power_iteration_norm, random_matrix, taylor_expm


def test_split_hermitian_and_antihermitian(rng):
    M = random_matrix(rng, 5)
    H = M + M.conj().T
    A_L, A_H = hermitian_split(H)
    np.testing.assert_allclose(A_L, H, atol=1e-15)
    np.testing.assert_allclose(A_H, 0, atol=1e-15)

    K = M - M.conj().T
    A_L, A_H = hermitian_split(K)
    np.testing.assert_allclose(A_L, 0, atol=1e-15)
    np.testing.assert_allclose(A_H, K / 1j, atol=1e-15)


def test_split_ade_n2():
    A = build_ade_matrix(AdeParams(2))
    A_L, A_H = hermitian_split(A)
    np.testing.assert_allclose(np.diag(A_L), 0.18, atol=1e-14)
    for i in range(4):
        assert A_L[i, (i + 1) % 4] == pytest.approx(-0.09, abs=1e-14)
        assert A_H[i, (i + 1) % 4] == pytest.approx(-1.5j, abs=1e-14)
        assert A_H[(i + 1) % 4, i] == pytest.approx(1.5j, abs=1e-14)


@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_split_reconstructs(n, seed):
    A = random_matrix(np.random.default_rng(seed), n)
    A_L, A_H = hermitian_split(A)
    assert is_hermitian(A_L) and is_hermitian(A_H)
    assert np.max(np.abs(A - (A_L + 1j * A_H))) <= 4 * np.finfo(float).eps * np.max(np.abs(A))


def test_expm_trivial():
    np.testing.assert_allclose(expm(np.zeros((3, 3))), np.eye(3), atol=0)
    np.testing.assert_allclose(expm(np.diag([1j * np.pi, 0])), np.diag([-1, 1]), atol=1e-15)


def test_expm_vs_taylor(rng):
    for _ in range(5):
        M = random_matrix(rng, 4, 0.5)
        np.testing.assert_allclose(expm(M), taylor_expm(M), atol=1e-12)


def test_expm_hermitian_paths(rng):
    M = random_matrix(rng, 6)
    H = (M + M.conj().T) / 2
    np.testing.assert_allclose(expm(-1j * H), taylor_expm(-1j * H), atol=1e-12)
    np.testing.assert_allclose(expm(0.3 * H), taylor_expm(0.3 * H), atol=1e-11)
    batch = expm_hermitian_batch(np.stack([H, 2 * H]), 0.7)
    np.testing.assert_allclose(batch[1], expm(-1.4j * H), atol=1e-12)


@given(st.integers(1, 5), st.floats(0.1, 10.0), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_expm_group_property(n, scale, seed):
    M = random_matrix(np.random.default_rng(seed), n)
    M *= scale / np.linalg.norm(M, 2)
    np.testing.assert_allclose(expm(M) @ expm(-M), np.eye(n), atol=1e-10)


def test_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        expm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        expm(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        expm(1e6 * np.eye(2))


def test_spectral_norm():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0)
    assert spectral_norm(np.diag([3, -4j])) == pytest.approx(4.0)


def test_spectral_norm_cmax_vs_power_iteration():
    A_L, A_H = hermitian_split(build_ade_matrix(AdeParams(2)))
    C = A_H + 10 * A_L
    assert spectral_norm(C) == pytest.approx(power_iteration_norm(C), rel=1e-10)


def test_ade_stencil_n2():
    p = AdeParams(2, v=1.0, D=0.01)
    assert p.dx == pytest.approx(1 / 3)
    c0, cp, cm = p.stencil()
    assert (c0, cp, cm) == pytest.approx((-0.18, -1.41, 1.59))
    A = build_ade_matrix(p)
    np.testing.assert_allclose(np.diag(A), 0.18)
    # periodic corners
    assert A[3, 0] == pytest.approx(1.41)
    assert A[0, 3] == pytest.approx(-1.59)


def test_ade_zero_coefficients():
    np.testing.assert_array_equal(build_ade_matrix(AdeParams(3, v=0.0, D=0.0)), 0)


@pytest.mark.parametrize("n_x", [2, 3, 4, 6])
def test_ade_properties(n_x):
    A = build_ade_matrix(AdeParams(n_x))
    np.testing.assert_allclose(A.sum(axis=1), 0, atol=1e-12)
    A_L, _ = hermitian_split(A)
    assert np.linalg.eigvalsh(A_L).min() >= -1e-12


def test_ade_params_validation():
    with pytest.raises(ValueError):
        AdeParams(1)
    with pytest.raises(ValueError):
        AdeParams(3, D=-1)


def test_gaussian_state():
    psi = gaussian_initial_state(2, 0.5, 0.05)
    x = np.arange(4) / 3
    ref = np.exp(-((x - 0.5) ** 2) / (2 * 0.05**2))
    np.testing.assert_allclose(psi, ref / np.linalg.norm(ref), atol=1e-15)
    for n_x in (3, 5, 6):
        psi = gaussian_initial_state(n_x, 0.5, 0.1)
        assert np.linalg.norm(psi) == pytest.approx(1, abs=1e-14)
        np.testing.assert_allclose(psi, psi[::-1], atol=1e-14)
    with pytest.raises(ValueError):
        gaussian_initial_state(3, width=0)


def test_error_norms():
    l2, linf = error_norms([1, 2, 3], [1, 0, 0])
    assert l2 == pytest.approx(np.sqrt(13))
    assert linf == 3
