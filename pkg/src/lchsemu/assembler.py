"""Full LCU circuit: weights, selector, inverse weights, post-selection.

Order of operations on ``|0>_anc |0>_{r_k} |psi0>_{r_in}``:

1. ``O_L``: amplified preparation of ``sum_j sqrt(w_j / S) |j>``
2. selector: ``exp(-i C_j t)`` on ``r_in`` for every ``r_k = j``
3. ``O_R``: adjoint of the amplified preparation of ``conj(sqrt(w_j / S))``
4. post-select ``r_k`` and every ancilla on zero

The surviving ``r_in`` amplitudes equal ``kappa * sum_j w_j exp(-i C_j t) psi0``
with ``kappa`` tracked by :class:`LchsCircuit`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .block_encoding import (
    BandedSpec,
    assemble_U_C,
    be_banded_hermitian,
    needs_magnitude_qubit,
    sine_circuit,
    zeta_angles,
)
from .lchs_core import LchsConfig, WeightSet, classical_lchs_apply, compute_weights
from .linalg import AdeParams, build_ade_matrix, error_norms, expm, gaussian_initial_state, hermitian_split
from .qsp_selector import PhaseCache, Selector, build_selector
from .sim_engine import (
    MAX_QUBITS,
    Circuit,
    CircuitBuilder,
    RegisterLayout,
    StateVector,
    apply,
    count_stmc,
    extract_block,
    postselect_zero,
)
from .weight_prep import PreparedWeights, exact_aa_plan, left_oracle, right_oracle

# ancillas of the initial-state preparation; counted in the budget only
N_INIT = 2


@dataclass(frozen=True)
class QubitBudget:
    n_x: int
    n_k: int
    n_be: int
    n_qsp: int
    n_w: int
    n_init: int

    @property
    def total(self) -> int:
        return self.n_x + self.n_k + self.n_be + self.n_qsp + self.n_w + self.n_init


def build_layout(n_x: int, n_k: int, mode: str = "compact", magnitude_qubit: bool = False, split_flags: bool = False) -> RegisterLayout:
    """Register layout of the LCHS circuit.

    ``compact`` keeps only the qubits the gates touch. ``full`` adds the
    magnitude qubit, a reflection flag in ``a_qsp`` and the two
    amplitude-amplification ancillas.
    """
    if mode not in ("compact", "full"):
        raise ValueError(f"unknown layout mode {mode!r}")
    full = mode == "full"
    regs = [("r_in", n_x), ("r_k", n_k), ("a_x", 2)]
    if full or magnitude_qubit:
        regs.append(("a_e", 1))
    regs += [("a_lcu", 1), ("a_sin", 1), ("a_qsp", 2 if full else 1), ("a_w", 1)]
    if split_flags:
        regs.append(("a_w_r", 1))
    if full:
        regs += [("a_aa0", 1), ("a_aa1", 1)]
    width = sum(w for _, w in regs)
    if width > MAX_QUBITS:
        raise ValueError(f"circuit needs {width} qubits, engine limit is {MAX_QUBITS}")
    return RegisterLayout(tuple(regs))


def qubit_budget(n_x: int, n_k: int) -> QubitBudget:
    """Qubit count of the full layout plus the initial-state ancillas."""
    regs = dict(
        [("r_in", n_x), ("r_k", n_k), ("a_x", 2), ("a_e", 1), ("a_lcu", 1), ("a_sin", 1), ("a_qsp", 2), ("a_w", 1), ("a_aa0", 1), ("a_aa1", 1)]
    )
    n_be = regs["a_x"] + regs["a_e"] + regs["a_lcu"] + regs["a_sin"]
    n_w = regs["a_w"] + regs["a_aa0"] + regs["a_aa1"]
    return QubitBudget(n_x, n_k, n_be, regs["a_qsp"], n_w, N_INIT)


def state_prep_circuit(layout: RegisterLayout, psi: np.ndarray, register: str = "r_in") -> Circuit:
    """Exact preparation of ``psi`` from ``|0>`` with multiplexed Ry and Rz.

    Magnitudes are split from the most significant qubit down; each split is
    an Ry controlled on the already-fixed higher qubits. The last level also
    attaches the phases.
    """
    psi = np.asarray(psi, dtype=complex)
    qs = layout.qubits(register)
    n = len(qs)
    if psi.shape != (1 << n,):
        raise ValueError("state size does not match register")
    psi = psi / np.linalg.norm(psi)
    b = CircuitBuilder(layout, "init")
    mags = np.abs(psi)
    phases = np.angle(psi)
    for lvl in range(n - 1, -1, -1):
        block = 1 << lvl
        for v in range(1 << (n - 1 - lvl)):
            # indices with higher bits = v are v*2^(lvl+1) + [0, 2^(lvl+1))
            base = v << (lvl + 1)
            lo = np.linalg.norm(mags[base : base + block])
            hi = np.linalg.norm(mags[base + block : base + 2 * block])
            ctrl = tuple((qs[lvl + 1 + i], (v >> i) & 1) for i in range(n - 1 - lvl))
            theta = 2 * math.atan2(hi, lo)
            if theta:
                b.ry(qs[lvl], theta, ctrl)
            if lvl == 0:
                p0, p1 = phases[base], phases[base + 1]
                if lo == 0:
                    p0 = p1
                if hi == 0:
                    p1 = p0
                if p1 - p0:
                    b.rz(qs[0], p1 - p0, ctrl)
                b.global_phase(qs[0], (p0 + p1) / 2, ctrl)
    return b.build()


@dataclass(frozen=True)
class LchsCircuit:
    """Assembled circuit with the bookkeeping needed to read out ``psi(t)``.

    Attributes:
        circuit: All gates in order.
        layout: Register layout.
        selector: The QSP selector.
        left: Left weight oracle.
        right: Right weight oracle.
        weights: The LCHS weights.
        kappa: Surviving amplitudes are ``kappa * U_LCHS psi0``.
        postselect: Qubits projected onto zero (all but ``r_in``).
        gate_counts: STMC counts per section and in total.
        exact_aa: True when amplitude amplification is exact.
    """

    circuit: Circuit
    layout: RegisterLayout
    selector: Selector
    left: PreparedWeights
    right: PreparedWeights
    weights: WeightSet
    kappa: float
    postselect: tuple[int, ...]
    gate_counts: dict = field(default_factory=dict)
    exact_aa: bool = True
    init: Circuit | None = None

    @property
    def n_gates(self) -> int:
        return self.gate_counts["total"]["total"]


def _aa_plan(cfg: LchsConfig, p0: float) -> tuple[int, float, bool]:
    if cfg.aa_rounds is None:
        n, dil = exact_aa_plan(p0)
        return n, dil, True
    n = cfg.aa_rounds
    n_min, _ = exact_aa_plan(p0)
    if n >= n_min:
        target = math.sin(math.pi / (2 * (2 * n + 1))) ** 2
        return n, p0 / target, True
    return n, 1.0, False


def build_lchs_circuit(
    cfg: LchsConfig,
    problem: AdeParams,
    *,
    layout_mode: str = "compact",
    init_mode: str = "inject",
    psi0: np.ndarray | None = None,
    cache: PhaseCache | None = None,
) -> LchsCircuit:
    """Build the LCHS circuit for the ADE generator of ``problem``.

    Args:
        cfg: Method configuration.
        problem: ADE parameters.
        layout_mode: ``"compact"`` or ``"full"``.
        init_mode: ``"inject"`` writes ``psi0`` straight into the state;
            ``"circuit"`` prepends an exact preparation circuit.
        psi0: Initial state for ``init_mode="circuit"``; Gaussian if omitted.
        cache: Optional phase cache.

    Raises:
        ValueError: if the layout exceeds the engine limit.
    """
    if init_mode not in ("inject", "circuit"):
        raise ValueError(f"unknown init_mode {init_mode!r}")
    n_x, n_k = problem.n_x, cfg.n_k
    A = build_ade_matrix(problem)
    A_L, A_H = hermitian_split(A)
    s_H, s_L = BandedSpec.from_dense(A_H), BandedSpec.from_dense(A_L)
    ang_H, ang_L = zeta_angles(s_H), zeta_angles(s_L)

    w = compute_weights(cfg)
    p0 = 1.0 / cfg.n_grid
    n_aa, dil, exact = _aa_plan(cfg, p0)

    layout = build_layout(
        n_x, n_k, layout_mode, needs_magnitude_qubit(ang_H) or needs_magnitude_qubit(ang_L), split_flags=not exact
    )
    full = layout_mode == "full"
    U_C = assemble_U_C(
        be_banded_hermitian(s_H, n_x, ang_H, layout),
        be_banded_hermitian(s_L, n_x, ang_L, layout),
        sine_circuit(n_k, layout),
        cfg.k_max,
    )
    sel = build_selector(U_C, cfg.t, cfg.eps_qsp, cache=cache)

    aa0 = layout.qubit("a_aa0") if full else None
    aa1 = layout.qubit("a_aa1") if full else None
    left = left_oracle(w, layout, n_aa, dil, aa0)
    right = right_oracle(w, layout, n_aa, dil, aa1, flag_name="a_w" if exact else "a_w_r")

    init = None
    if init_mode == "circuit":
        psi = gaussian_initial_state(n_x) if psi0 is None else psi0
        init = state_prep_circuit(layout, psi)

    b = CircuitBuilder(layout, "lchs")
    if init is not None:
        b.extend(init)
    b.extend(left.circuit).extend(sel.circuit).extend(right.circuit)
    circuit = b.build()

    S = w.abs_sum
    if exact:
        kappa = sel.scale / S
    else:
        # each oracle carries G sqrt(w_j / (S N_k)) with G = amp / sqrt(p0)
        G2 = left.success_amplitude**2 / left.raw_probability
        kappa = sel.scale * G2 / (S * cfg.n_grid)

    counts = {
        "weights": _merge(count_stmc(left.circuit), count_stmc(right.circuit)),
        "selector": count_stmc(sel.circuit),
        "init": count_stmc(init) if init is not None else count_stmc(Circuit(layout)),
        "total": count_stmc(circuit),
    }
    post = tuple(q for q in range(layout.n_qubits) if q not in set(layout.qubits("r_in")))
    return LchsCircuit(circuit, layout, sel, left, right, w, kappa, post, counts, exact, init)


def _merge(a: dict, b: dict) -> dict:
    return {k: a[k] + b[k] for k in a}


@dataclass(frozen=True)
class LchsRunResult:
    """Outcome of one emulated LCHS run.

    ``psi_out`` is the physical estimate of ``exp(-A t) psi0`` (raw
    post-selected amplitudes divided by ``kappa``). Error pairs are
    ``(l2, linf)``; the ``*_normalized`` variants compare unit vectors.
    """

    psi_out: np.ndarray
    success_probability: float
    success_probability_model: float
    success_probability_no_aa: float
    n_gates: dict
    err_vs_expm: tuple[float, float]
    err_vs_discrete_sum: tuple[float, float]
    err_vs_expm_normalized: tuple[float, float]
    err_vs_discrete_sum_normalized: tuple[float, float]
    n_qubits: int
    n_o: int
    n_aa: int
    alpha_c: float
    weight_sum_error: float
    config: dict

    def row(self) -> dict:
        """Flat record for CSV output."""
        cfg = dict(self.config)
        return {
            **cfg,
            "n_qubits": self.n_qubits,
            "alpha_c": self.alpha_c,
            "n_o": self.n_o,
            "n_queries": 2 * self.n_o,
            "n_aa": self.n_aa,
            "n_gates": self.n_gates["total"]["total"],
            "n_gates_selector": self.n_gates["selector"]["total"],
            "n_gates_weights": self.n_gates["weights"]["total"],
            "n_gates_core": self.n_gates["total"]["total"] - self.n_gates["weights"]["total"],
            "success_probability": self.success_probability,
            "success_probability_model": self.success_probability_model,
            "success_probability_no_aa": self.success_probability_no_aa,
            "err_expm_l2": self.err_vs_expm[0],
            "err_expm_linf": self.err_vs_expm[1],
            "err_sum_l2": self.err_vs_discrete_sum[0],
            "err_sum_linf": self.err_vs_discrete_sum[1],
            "err_expm_l2_normalized": self.err_vs_expm_normalized[0],
            "err_sum_l2_normalized": self.err_vs_discrete_sum_normalized[0],
            "weight_sum_error": self.weight_sum_error,
        }


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def run(
    cfg: LchsConfig,
    problem: AdeParams,
    psi0: np.ndarray | None = None,
    *,
    layout_mode: str = "compact",
    init_mode: str = "inject",
    cache: PhaseCache | None = None,
    lc: LchsCircuit | None = None,
) -> LchsRunResult:
    """Simulate the LCHS circuit and compare with the classical oracles.

    Raises:
        ValueError: if ``psi0`` is not unit norm or post-selection fails.
    """
    psi0 = gaussian_initial_state(problem.n_x) if psi0 is None else np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("psi0 must have unit norm")
    if lc is None:
        lc = build_lchs_circuit(cfg, problem, layout_mode=layout_mode, init_mode=init_mode, psi0=psi0, cache=cache)
    layout = lc.layout
    if lc.init is None:
        state = StateVector.product(layout, {"r_in": psi0})
    else:
        state = StateVector.zero(layout)
    out = apply(lc.circuit, state)
    sub, p = postselect_zero(out, lc.postselect, renormalize=False)
    raw = sub.amplitudes
    psi_out = raw / lc.kappa

    A = build_ade_matrix(problem)
    classical = classical_lchs_apply(A, psi0, cfg, lc.weights)
    exact = expm(-A * cfg.t) @ psi0
    S = lc.weights.abs_sum
    p_model = float(lc.kappa**2 * np.vdot(classical, classical).real)
    p_no_aa = float((lc.selector.scale / (S * cfg.n_grid)) ** 2 * np.vdot(classical, classical).real)
    cfg_echo = {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(cfg).items()}
    cfg_echo.update({"n_x": problem.n_x, "v": problem.v, "D": problem.D})
    return LchsRunResult(
        psi_out=psi_out,
        success_probability=p,
        success_probability_model=p_model,
        success_probability_no_aa=p_no_aa,
        n_gates=lc.gate_counts,
        err_vs_expm=error_norms(psi_out, exact),
        err_vs_discrete_sum=error_norms(psi_out, classical),
        err_vs_expm_normalized=error_norms(_unit(psi_out), _unit(exact)),
        err_vs_discrete_sum_normalized=error_norms(_unit(psi_out), _unit(classical)),
        n_qubits=layout.n_qubits,
        n_o=lc.selector.n_o,
        n_aa=lc.left.n_aa,
        alpha_c=lc.selector.alpha,
        weight_sum_error=float(abs(np.sum(lc.weights.weights) - 1)),
        config=cfg_echo,
    )


def end_to_end_block(lc: LchsCircuit) -> np.ndarray:
    """Post-selected block of the whole circuit over ``r_in`` (small instances)."""
    if lc.init is not None:
        raise ValueError("block extraction needs init_mode='inject'")
    return extract_block(lc.circuit, lc.postselect)
