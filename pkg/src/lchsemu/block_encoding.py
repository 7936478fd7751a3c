"""Block-encoding circuits for periodic tridiagonal Hermitian matrices.

Every oracle built here is Hermitian as a unitary (``U = U^dag``), so it is
its own inverse and can be qubitized with a plain reflection.

Register names used by the builders:

``r_in``   spatial register, ``n_x`` qubits
``r_k``    LCHS index register, ``n_k`` qubits
``a_x``    two qubits: ``a_x[0]`` selects the +/- shift, ``a_x[1]`` selects
           the diagonal or the off-diagonal branch
``a_e``    magnitude qubit, only needed when an entry is smaller than its
           normalization
``a_lcu``  mixes the A_H and B_m branches of U_C
``a_sin``  carries sin(theta_j)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lchs_core import theta_grid
from .linalg import hermitian_split
from .sim_engine import Circuit, CircuitBuilder, RegisterLayout, extract_block

_TOL = 1e-14


@dataclass(frozen=True)
class BandedSpec:
    """Constant-diagonal periodic tridiagonal matrix, keyed by offset.

    ``diagonals[+1]`` holds the entries ``M[i, i+1]``.
    """

    diagonals: dict
    periodic: bool = True

    def __post_init__(self):
        diags = {int(k): complex(v) for k, v in dict(self.diagonals).items()}
        if any(k not in (-1, 0, 1) for k in diags):
            raise ValueError("only offsets -1, 0, +1 are supported")
        if not self.periodic:
            raise ValueError("only periodic boundaries are supported")
        object.__setattr__(self, "diagonals", diags)

    def get(self, off: int) -> complex:
        return self.diagonals.get(off, 0j)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        d, up, lo = self.get(0), self.get(1), self.get(-1)
        return abs(d.imag) <= tol and abs(up - lo.conjugate()) <= tol

    def to_dense(self, n_x: int) -> np.ndarray:
        N = 1 << n_x
        M = np.zeros((N, N), dtype=complex)
        i = np.arange(N)
        for off, val in self.diagonals.items():
            M[i, (i + off) % N] += val
        return M

    @classmethod
    def from_dense(cls, M, tol: float = 1e-12) -> "BandedSpec":
        """Read the constant diagonals of a periodic tridiagonal matrix."""
        M = np.asarray(M, dtype=complex)
        N = M.shape[0]
        if N < 4:
            raise ValueError("need at least 4 grid points")
        diags = {off: M[0, off % N] for off in (-1, 0, 1)}
        spec = cls({k: v for k, v in diags.items() if abs(v) > tol})
        if np.max(np.abs(spec.to_dense(int(math.log2(N))) - M), initial=0.0) > tol * max(1.0, np.abs(M).max()):
            raise ValueError("matrix is not constant-diagonal periodic tridiagonal")
        return spec


@dataclass(frozen=True)
class BandedAngles:
    """Normalizations and rotation angles for :func:`be_banded_hermitian`.

    Attributes:
        eta_diag: Normalization of the diagonal, ``>= |d|``.
        eta_side: Normalization of each off-diagonal, ``>= |m_{+1}|``.
        zeta_diag: Ry angle encoding ``d / eta_diag``.
        zeta_y: Ry angle encoding ``|m| / eta_side``.
        zeta_z: Rz angle encoding the phase of ``m_{+1}``.
    """

    eta_diag: float
    eta_side: float
    zeta_diag: float
    zeta_y: float
    zeta_z: float

    @property
    def alpha(self) -> float:
        return self.eta_diag + 2 * self.eta_side


def zeta_angles(spec: BandedSpec, eta_diag: float | None = None, eta_side: float | None = None) -> BandedAngles:
    """Angles for a Hermitian banded spec; ``eta`` defaults to the entry modulus.

    Raises:
        ValueError: if an entry exceeds its normalization.
    """
    d = spec.get(0).real
    m = spec.get(1)
    e0 = abs(d) if eta_diag is None else float(eta_diag)
    e1 = abs(m) if eta_side is None else float(eta_side)
    if abs(d) > e0 * (1 + _TOL) or abs(m) > e1 * (1 + _TOL):
        raise ValueError("matrix element exceeds its normalization eta")
    z0 = 2 * math.acos(max(-1.0, min(1.0, d / e0))) if e0 > 0 else 0.0
    zy = 2 * math.acos(min(1.0, abs(m) / e1)) if e1 > 0 else 0.0
    zz = 2 * math.atan2(m.imag, m.real) if e1 > 0 else 0.0
    return BandedAngles(e0, e1, z0, zy, zz)


def needs_magnitude_qubit(angles: BandedAngles) -> bool:
    diag = angles.eta_diag > 0 and abs(angles.zeta_diag) > _TOL and abs(abs(angles.zeta_diag) - 2 * math.pi) > _TOL
    return diag or (angles.eta_side > 0 and abs(angles.zeta_y) > _TOL)


@dataclass(frozen=True)
class BlockEncoding:
    """A unitary whose ancilla-zero block is ``encoded / alpha``.

    Attributes:
        circuit: The oracle.
        ancillas: Qubit ids that must start and end in |0>.
        system: Names of the system registers.
        alpha: Sub-normalization factor.
        zero: True if the encoded matrix is identically zero.
    """

    circuit: Circuit
    ancillas: tuple[int, ...]
    system: tuple[str, ...]
    alpha: float
    zero: bool = False

    @property
    def layout(self) -> RegisterLayout:
        return self.circuit.layout

    def block(self) -> np.ndarray:
        """``<0|_anc U |0>_anc`` over the non-ancilla qubits (dense, small sizes only)."""
        return extract_block(self.circuit, self.ancillas)


def incrementer(b: CircuitBuilder, qubits: Sequence[int], controls=(), decrement: bool = False) -> None:
    """Cyclic +1 (or -1) on ``qubits`` (LSB first) as a cascade of multi-controlled X."""
    pol = 0 if decrement else 1
    for i in reversed(range(len(qubits))):
        ctrl = tuple(controls) + tuple((q, pol) for q in qubits[:i])
        b.x(qubits[i], ctrl)


def banded_layout(n_x: int, magnitude_qubit: bool = False) -> RegisterLayout:
    regs = [("r_in", n_x), ("a_x", 2)]
    if magnitude_qubit:
        regs.append(("a_e", 1))
    return RegisterLayout(tuple(regs))


def _banded_gates(b: CircuitBuilder, layout: RegisterLayout, spec: BandedSpec, ang: BandedAngles, controls=()):
    """Emit the banded oracle into ``b``; returns ``alpha``."""
    r = layout.qubits("r_in")
    q_pm = layout.qubit("a_x", 0)
    q_br = layout.qubit("a_x", 1)
    q_e = layout.qubit("a_e") if "a_e" in layout else None
    ctrl = tuple(controls)
    has_d = ang.eta_diag > 0
    has_s = ang.eta_side > 0

    if not has_d and not has_s:
        # zero matrix: kick the ancilla out of |0>
        b.x(q_br, ctrl)
        return 1.0

    alpha = ang.alpha
    both = has_d and has_s
    prep = 2 * math.atan2(math.sqrt(2 * ang.eta_side), math.sqrt(ang.eta_diag)) if both else 0.0
    if both:
        b.ry(q_br, prep, ctrl)

    if has_d:
        dctrl = ctrl + (((q_br, 0),) if both else ())
        z = ang.zeta_diag
        if abs(z) <= _TOL:
            pass
        elif abs(abs(z) - 2 * math.pi) <= _TOL:
            # value -1: global sign on this branch
            b.rz(q_pm, 2 * math.pi, dctrl)
        else:
            if q_e is None:
                raise ValueError("diagonal magnitude needs the a_e qubit")
            b.phase(q_e, math.pi, dctrl)
            b.ry(q_e, z, dctrl)

    if has_s:
        sctrl = ctrl + (((q_br, 1),) if both else ())
        b.h(q_pm, sctrl)
        incrementer(b, r, sctrl + ((q_pm, 0),), decrement=True)
        incrementer(b, r, sctrl + ((q_pm, 1),))
        b.x(q_pm, sctrl)
        if abs(ang.zeta_z) > _TOL:
            b.rz(q_pm, ang.zeta_z, sctrl)
        b.h(q_pm, sctrl)
        if abs(ang.zeta_y) > _TOL:
            if q_e is None:
                raise ValueError("off-diagonal magnitude needs the a_e qubit")
            b.phase(q_e, math.pi, sctrl)
            b.ry(q_e, ang.zeta_y, sctrl)

    if both:
        b.ry(q_br, -prep, ctrl)
    return alpha


def be_banded_hermitian(
    spec: BandedSpec,
    n_x: int,
    angle_table: BandedAngles | None = None,
    layout: RegisterLayout | None = None,
) -> BlockEncoding:
    """Block-encode a periodic Hermitian tridiagonal matrix.

    The diagonal and off-diagonal parts are mixed by an LCU on ``a_x[1]``.
    The off-diagonal branch uses ``a_x[0]`` to select the cyclic decrement
    (offset +1) or increment (offset -1) on ``r_in`` and an Rz to attach
    the phase of ``m_{+1}``.

    Args:
        spec: Hermitian banded matrix.
        n_x: Width of ``r_in``.
        angle_table: Precomputed angles; :func:`zeta_angles` by default.
        layout: Layout containing ``r_in`` and ``a_x`` (and ``a_e`` if
            needed). A minimal layout is created if omitted.

    Returns:
        BlockEncoding with ``alpha = eta_diag + 2 eta_side``.
    """
    if not spec.is_hermitian():
        raise ValueError("banded spec is not Hermitian")
    ang = zeta_angles(spec) if angle_table is None else angle_table
    if layout is None:
        layout = banded_layout(n_x, needs_magnitude_qubit(ang))
    if layout.width("r_in") != n_x:
        raise ValueError("layout r_in width differs from n_x")
    b = CircuitBuilder(layout, "U_banded")
    alpha = _banded_gates(b, layout, spec, ang)
    anc = layout.qubits(*[n for n in ("a_x", "a_e") if n in layout])
    zero = ang.eta_diag == 0 and ang.eta_side == 0
    return BlockEncoding(b.build(), anc, ("r_in",), alpha, zero)


def sine_angles(n_k: int) -> tuple[float, list[float]]:
    """Base angle and per-qubit angles (LSB first) of the sine subcircuit."""
    N = 1 << n_k
    alpha0 = -math.pi / 2
    alpha1 = abs(alpha0) * N / (N - 1)
    # qubit with weight 2^b gets 2 alpha1 / 2^l with l = n_k - 1 - b
    return 2 * alpha0, [2 * alpha1 / 2 ** (n_k - 1 - b) for b in range(n_k)]


def _sine_gates(b: CircuitBuilder, layout: RegisterLayout, controls=()):
    rk = layout.qubits("r_k")
    q = layout.qubit("a_sin")
    ctrl = tuple(controls)
    base, per = sine_angles(len(rk))
    b.ry(q, base, ctrl)
    for qk, a in zip(rk, per):
        b.ry(q, a, ctrl + ((qk, 1),))
    # X Ry(2 theta) = [[sin, cos], [cos, -sin]] is Hermitian
    b.x(q, ctrl)


def sine_circuit(n_k: int, layout: RegisterLayout | None = None) -> BlockEncoding:
    """Oracle with ``<0|_{a_sin} U |j>|0> = sin(theta_j) |j>`` for every j."""
    if n_k < 1:
        raise ValueError("n_k must be >= 1")
    if layout is None:
        layout = RegisterLayout.of(("r_k", n_k), ("a_sin", 1))
    b = CircuitBuilder(layout, "U_sin")
    _sine_gates(b, layout)
    return BlockEncoding(b.build(), (layout.qubit("a_sin"),), ("r_k",), 1.0)


@dataclass(frozen=True)
class UCEncoding(BlockEncoding):
    """U_C with its branch normalizations."""

    alpha_H: float = 0.0
    alpha_L: float = 0.0
    k_max: float = 0.0

    def block_j(self, j: int) -> np.ndarray:
        """Block for r_k = j, assuming ``r_in`` precedes ``r_k`` in the layout."""
        B = self.block()
        N = 1 << self.layout.width("r_in")
        return B[j * N : (j + 1) * N, j * N : (j + 1) * N]


def uc_layout(n_x: int, n_k: int, magnitude_qubit: bool = False) -> RegisterLayout:
    regs = [("r_in", n_x), ("r_k", n_k), ("a_x", 2)]
    if magnitude_qubit:
        regs.append(("a_e", 1))
    regs += [("a_lcu", 1), ("a_sin", 1)]
    return RegisterLayout(tuple(regs))


A_BE = ("a_x", "a_e", "a_lcu", "a_sin")


def be_ancillas(layout: RegisterLayout) -> tuple[int, ...]:
    return layout.qubits(*[n for n in A_BE if n in layout])


def assemble_U_C(be_AH: BlockEncoding, be_AL: BlockEncoding, sine: BlockEncoding, k_max: float) -> UCEncoding:
    """Block-encode ``C_j / alpha_C`` with ``C_j = A_H + sin(theta_j) k_max A_L`` for all j.

    ``U_C = P^dag [|0><0| (x) U_AH + |1><1| (x) U_sin U_AL] P`` where ``P`` is
    an Ry on ``a_lcu`` with branch amplitudes ``sqrt(alpha_H/alpha_C)`` and
    ``sqrt(k_max alpha_L/alpha_C)``. All three inputs must live on one
    layout that also has ``a_lcu``; the A_H and A_L oracles share ``a_x``
    and ``a_e``.
    """
    layout = be_AH.layout
    if be_AL.layout != layout or sine.layout != layout:
        raise ValueError("sub-encodings must share one layout")
    if k_max <= 0:
        raise ValueError("k_max must be positive")
    w_H = 0.0 if be_AH.zero else be_AH.alpha
    w_L = 0.0 if be_AL.zero else k_max * be_AL.alpha * sine.alpha
    alpha_C = w_H + w_L
    if alpha_C <= 0:
        raise ValueError("C_j is identically zero")
    amp = np.array([math.sqrt(w_H / alpha_C), math.sqrt(w_L / alpha_C)])
    if abs(amp @ amp - 1.0) > 1e-12:
        raise ValueError("branch weights do not sum to alpha_C")

    lcu = layout.qubit("a_lcu")
    prep = 2 * math.atan2(amp[1], amp[0])
    b = CircuitBuilder(layout, "U_C")
    if prep:
        b.ry(lcu, prep)
    if w_H > 0:
        b.extend(be_AH.circuit.controlled(((lcu, 0),)))
    if w_L > 0:
        b.extend(sine.circuit.controlled(((lcu, 1),)))
        b.extend(be_AL.circuit.controlled(((lcu, 1),)))
    if prep:
        b.ry(lcu, -prep)
    return UCEncoding(
        b.build(),
        be_ancillas(layout),
        ("r_in", "r_k"),
        alpha_C,
        alpha_H=w_H,
        alpha_L=0.0 if be_AL.zero else be_AL.alpha,
        k_max=k_max,
    )


def build_U_C(A, n_k: int, k_max: float, layout: RegisterLayout | None = None) -> UCEncoding:
    """U_C for a periodic tridiagonal generator ``A``.

    Splits ``A`` into Hermitian parts, builds both banded oracles and the
    sine subcircuit on a common layout and combines them.
    """
    A = np.asarray(A, dtype=complex)
    n_x = int(round(math.log2(A.shape[0])))
    A_L, A_H = hermitian_split(A)
    s_H, s_L = BandedSpec.from_dense(A_H), BandedSpec.from_dense(A_L)
    ang_H, ang_L = zeta_angles(s_H), zeta_angles(s_L)
    if layout is None:
        layout = uc_layout(n_x, n_k, needs_magnitude_qubit(ang_H) or needs_magnitude_qubit(ang_L))
    be_H = be_banded_hermitian(s_H, n_x, ang_H, layout)
    be_L = be_banded_hermitian(s_L, n_x, ang_L, layout)
    return assemble_U_C(be_H, be_L, sine_circuit(n_k, layout), k_max)


def dense_c_blocks(A, n_k: int, k_max: float) -> np.ndarray:
    """Dense ``C_j`` for all j, for comparison with extracted blocks."""
    A_L, A_H = hermitian_split(A)
    thetas, _ = theta_grid(n_k)
    return A_H[None] + (k_max * np.sin(thetas))[:, None, None] * A_L[None]
