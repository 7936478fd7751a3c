"""Preparation of sqrt(w_j) on the r_k register and amplitude amplification.

``U_sqrt_w`` applies an H-ladder on ``r_k`` and then, for every j, a rotation
``Ry(phi_y,j) Rz(phi_z,j)`` on the flag ``a_w`` controlled on ``r_k = j``, so
the ``a_w = 0`` branch holds ``sqrt(w_j / S) / sqrt(N_k)`` with
``S = sum |w_j|`` (times an optional dilution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lchs_core import WeightSet
from .sim_engine import Circuit, CircuitBuilder, RegisterLayout


@dataclass(frozen=True)
class PreparedWeights:
    """Weight oracle and its bookkeeping.

    Attributes:
        circuit: ``U_sqrt_w`` or its amplified version.
        success_amplitude: Norm of the ``a_w = 0`` branch.
        n_aa: Grover rounds applied.
        scale: Weights were divided by this before taking square roots.
        raw_probability: ``a_w = 0`` probability of the bare ladder.
        flag: Qubit id of ``a_w``.
        index_qubits: Qubit ids of ``r_k``.
        aa_ancilla: Optional qubit used by the zero-state reflection.
    """

    circuit: Circuit
    success_amplitude: float
    n_aa: int
    scale: float
    raw_probability: float
    flag: int
    index_qubits: tuple[int, ...]
    aa_ancilla: int | None = None


def weight_angles(w: np.ndarray, scale: float, conjugate: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """``phi_y = 2 arccos|sqrt(w/scale)|`` and ``phi_z = -2 arg sqrt(w/scale)``."""
    r = np.sqrt(np.asarray(w, dtype=complex) / scale)  # principal branch
    phi_y = 2 * np.arccos(np.clip(np.abs(r), 0.0, 1.0))
    phi_z = -2 * np.angle(r)
    if conjugate:
        phi_z = -phi_z
    return phi_y, phi_z


def build_u_sqrt_w(
    w: WeightSet,
    layout: RegisterLayout | None = None,
    *,
    conjugate: bool = False,
    dilution: float = 1.0,
    flag_name: str = "a_w",
) -> PreparedWeights:
    """Brute-force ladder preparing ``sqrt(w_j)`` (or its conjugate) on the ``a_w = 0`` branch.

    Args:
        w: Weights; they are divided by ``sum |w_j| * dilution``.
        layout: Layout with ``r_k`` and the flag register; minimal if omitted.
        conjugate: Prepare ``conj(sqrt(w_j))`` instead.
        dilution: Extra factor ``>= 1`` shrinking every amplitude, used to
            make amplitude amplification exact.
        flag_name: Register holding the flag qubit.
    """
    n = len(w)
    n_k = int(round(math.log2(n)))
    if 1 << n_k != n:
        raise ValueError("number of weights must be a power of two")
    if dilution < 1.0:
        raise ValueError("dilution must be >= 1")
    if layout is None:
        layout = RegisterLayout.of(("r_k", n_k), (flag_name, 1))
    rk = layout.qubits("r_k")
    q = layout.qubit(flag_name)
    S = w.abs_sum * dilution
    if S == 0:
        raise ValueError("all weights vanish")
    phi_y, phi_z = weight_angles(w.weights, S, conjugate)

    b = CircuitBuilder(layout, "U_sqrt_w")
    for qk in rk:
        b.h(qk)
    for j in range(n):
        ctrl = tuple((qk, (j >> i) & 1) for i, qk in enumerate(rk))
        if abs(phi_z[j]) > 1e-15:
            b.rz(q, phi_z[j], ctrl)
        if abs(phi_y[j]) > 1e-15:
            b.ry(q, phi_y[j], ctrl)
    p0 = w.abs_sum / (S * n)
    return PreparedWeights(b.build(), math.sqrt(p0), 0, S, p0, q, rk)


def aa_rounds(p0: float) -> int:
    """Grover rounds maximizing ``sin^2((2N+1) a)``, ``a = arcsin sqrt(p0)``.

    Candidates are the floor and ceiling of ``pi/(4a) - 1/2``; a candidate
    whose probability falls below ``p0`` is discarded.
    """
    if not 0 < p0 <= 1:
        raise ValueError("p0 must lie in (0, 1]")
    a = math.asin(math.sqrt(p0))
    x = math.pi / (4 * a) - 0.5
    best, best_p = 0, p0
    for n in {max(0, math.floor(x)), max(0, math.ceil(x))}:
        p = math.sin((2 * n + 1) * a) ** 2
        if p > best_p + 1e-15 or (abs(p - best_p) <= 1e-15 and n < best):
            best, best_p = n, p
    return best


def exact_aa_plan(p0: float) -> tuple[int, float]:
    """Rounds and dilution so that amplified success is exactly 1.

    With ``N = ceil(pi/(4a) - 1/2)`` the amplitude ``sqrt(p0)`` is reduced to
    ``sin(pi / (2(2N+1)))``; ``dilution = p0 / sin^2(...)`` is returned.
    """
    if not 0 < p0 <= 1:
        raise ValueError("p0 must lie in (0, 1]")
    a = math.asin(math.sqrt(p0))
    n = max(0, math.ceil(math.pi / (4 * a) - 0.5 - 1e-12))
    target = math.sin(math.pi / (2 * (2 * n + 1))) ** 2
    return n, max(1.0, p0 / target)


def _reflect_zero(b: CircuitBuilder, qubits, aa_ancilla: int | None) -> None:
    """``I - 2|0><0|`` on ``qubits``."""
    zeros = tuple((q, 0) for q in qubits)
    if aa_ancilla is not None:
        b.x(aa_ancilla, zeros)
        b.phase(aa_ancilla, math.pi)
        b.x(aa_ancilla, zeros)
        return
    q0 = qubits[0]
    b.x(q0)
    b.phase(q0, math.pi, zeros[1:])
    b.x(q0)


def wrap_amplitude_amplification(u: PreparedWeights, n_aa: int, aa_ancilla: int | None = None) -> PreparedWeights:
    """``U`` followed by ``n_aa`` Grover iterates ``-U S_0 U^dag S_good``.

    ``S_good`` flips the sign of the ``a_w = 0`` branch and ``S_0`` that of
    the all-zero state of ``(r_k, a_w)``; an optional ``aa_ancilla`` turns
    ``S_0`` into a flag kick-back.

    Raises:
        ValueError: if the amplified probability would fall below the raw one.
    """
    if n_aa < 0:
        raise ValueError("n_aa must be >= 0")
    if n_aa == 0:
        return u
    a = math.asin(u.success_amplitude)
    amp = math.sin((2 * n_aa + 1) * a)
    if amp**2 < u.success_amplitude**2 - 1e-12:
        raise ValueError(f"{n_aa} rounds overshoot: probability {amp**2:.3g} < raw {u.success_amplitude**2:.3g}")
    U, Ud = u.circuit, u.circuit.adjoint()
    b = CircuitBuilder(U.layout, "U_sqrt_w^AA")
    b.extend(U)
    for _ in range(n_aa):
        # S_good: -1 on a_w = 0
        b.x(u.flag)
        b.phase(u.flag, math.pi)
        b.x(u.flag)
        b.extend(Ud)
        _reflect_zero(b, (u.flag,) + u.index_qubits, aa_ancilla)
        b.extend(U)
        b.rz(u.flag, 2 * math.pi)  # global -1
    return PreparedWeights(
        b.build(), abs(amp), n_aa, u.scale, u.raw_probability, u.flag, u.index_qubits, aa_ancilla
    )


def left_oracle(w: WeightSet, layout: RegisterLayout, n_aa: int, dilution: float = 1.0, aa_ancilla=None, flag_name="a_w"):
    """Amplified preparation of ``sqrt(w_j)``."""
    u = build_u_sqrt_w(w, layout, dilution=dilution, flag_name=flag_name)
    return wrap_amplitude_amplification(u, n_aa, aa_ancilla)


def right_oracle(w: WeightSet, layout: RegisterLayout, n_aa: int, dilution: float = 1.0, aa_ancilla=None, flag_name="a_w"):
    """Adjoint of the amplified preparation of ``conj(sqrt(w_j))``.

    Its row ``<0| O_R |j, 0_w>`` carries ``sqrt(w_j)`` so that together with
    the left oracle the selected branch is weighted by ``w_j``.
    """
    u = build_u_sqrt_w(w, layout, conjugate=True, dilution=dilution, flag_name=flag_name)
    pw = wrap_amplitude_amplification(u, n_aa, aa_ancilla)
    return PreparedWeights(
        pw.circuit.adjoint().relabel("O_R"),
        pw.success_amplitude,
        pw.n_aa,
        pw.scale,
        pw.raw_probability,
        pw.flag,
        pw.index_qubits,
        aa_ancilla,
    )
