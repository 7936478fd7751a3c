import numpy as np
import pytest

from lchsemu.assembler import (
    build_layout,
    build_lchs_circuit,
    end_to_end_block,
    qubit_budget,
    run,
    state_prep_circuit,
)
from lchsemu.lchs_core import LchsConfig, c_matrices, compute_weights
from lchsemu.linalg import AdeParams, build_ade_matrix, expm, gaussian_initial_state
from lchsemu.sim_engine import RegisterLayout, StateVector, apply


def test_qubit_budget_n6_n12():
    b = qubit_budget(6, 12)
    assert (b.n_be, b.n_w, b.n_init, b.n_qsp) == (5, 3, 2, 2)
    assert b.total == 30


def test_layout_modes():
    c = build_layout(4, 6, "compact")
    f = build_layout(4, 6, "full")
    assert c.n_qubits == 4 + 6 + 2 + 1 + 1 + 1 + 1
    assert f.n_qubits == c.n_qubits + 1 + 1 + 2
    assert build_layout(4, 6, split_flags=True).n_qubits == c.n_qubits + 1
    with pytest.raises(ValueError):
        build_layout(12, 12)
    with pytest.raises(ValueError):
        build_layout(2, 2, "sparse")


def test_state_prep_circuit(rng):
    lay = RegisterLayout.of(("r_in", 3), ("x", 1))
    for psi in (gaussian_initial_state(3), rng.standard_normal(8) + 1j * rng.standard_normal(8)):
        psi = psi / np.linalg.norm(psi)
        out = apply(state_prep_circuit(lay, psi), StateVector.zero(lay))
        np.testing.assert_allclose(out.amplitudes[:8], psi, atol=1e-13)
    sparse = np.zeros(8, complex)
    sparse[5] = 1j
    out = apply(state_prep_circuit(lay, sparse), StateVector.zero(lay))
    np.testing.assert_allclose(out.amplitudes[:8], sparse, atol=1e-13)
    with pytest.raises(ValueError):
        state_prep_circuit(lay, np.ones(4))


@pytest.mark.parametrize("layout_mode", ["compact", "full"])
@pytest.mark.parametrize("aa", [None, 0, 2])
def test_end_to_end_block_n2(layout_mode, aa):
    cfg = LchsConfig(n_k=2, k_max=10, t=0.4, aa_rounds=aa)
    prob = AdeParams(2)
    lc = build_lchs_circuit(cfg, prob, layout_mode=layout_mode)
    B = end_to_end_block(lc) / lc.kappa
    A = build_ade_matrix(prob)
    w = compute_weights(cfg).weights
    ref = sum(wj * expm(-1j * C * cfg.t) for wj, C in zip(w, c_matrices(A, cfg)))
    np.testing.assert_allclose(B, ref, atol=1e-8)


def test_t0_block_is_weight_sum():
    cfg = LchsConfig(n_k=3, k_max=10, t=0.0)
    lc = build_lchs_circuit(cfg, AdeParams(2))
    s = np.sum(compute_weights(cfg).weights)
    np.testing.assert_allclose(end_to_end_block(lc) / lc.kappa, s * np.eye(4), atol=1e-12)


def test_run_t0():
    cfg = LchsConfig(n_k=4, k_max=10, t=0.0)
    psi0 = gaussian_initial_state(3)
    res = run(cfg, AdeParams(3), psi0)
    eps = res.weight_sum_error
    assert res.err_vs_expm[0] <= eps * (1 + 1e-9) + 1e-12
    np.testing.assert_allclose(res.psi_out, psi0, atol=eps + 1e-12)
    assert res.success_probability > 0.5 * res.success_probability_model


@pytest.mark.parametrize("n_x,n_k,t", [(2, 2, 0.4), (3, 3, 0.2), (3, 4, 0.8)])
def test_run_matches_discrete_sum(n_x, n_k, t):
    cfg = LchsConfig(n_k=n_k, k_max=10, t=t)
    res = run(cfg, AdeParams(n_x))
    assert res.err_vs_discrete_sum[0] <= 10 * (cfg.eps_qsp * cfg.n_grid + 1e-10)
    assert res.success_probability == pytest.approx(res.success_probability_model, abs=1e-9)
    row = res.row()
    assert row["n_gates"] == row["n_gates_selector"] + row["n_gates_weights"]
    assert row["n_queries"] == 2 * row["n_o"]


def test_init_circuit_mode():
    cfg = LchsConfig(n_k=2, k_max=10, t=0.4)
    res = run(cfg, AdeParams(2), init_mode="circuit")
    assert res.err_vs_discrete_sum[0] <= 1e-7
    assert res.n_gates["init"]["total"] > 0
    lc = build_lchs_circuit(cfg, AdeParams(2), init_mode="circuit")
    with pytest.raises(ValueError):
        end_to_end_block(lc)
    with pytest.raises(ValueError):
        build_lchs_circuit(cfg, AdeParams(2), init_mode="oracle")


def test_success_probability_decreases_with_t():
    probs, decay = [], []
    psi0 = gaussian_initial_state(3)
    A = build_ade_matrix(AdeParams(3))
    for t in (0.2, 0.4, 0.8):
        res = run(LchsConfig(n_k=3, k_max=10, t=t), AdeParams(3), psi0)
        probs.append(res.success_probability)
        decay.append(np.linalg.norm(expm(-A * t) @ psi0) ** 2)
    assert probs[0] > probs[1] > probs[2]
    assert decay[0] > decay[1] > decay[2]


def test_run_rejects_unnormalized():
    with pytest.raises(ValueError):
        run(LchsConfig(n_k=2), AdeParams(2), np.ones(4))
