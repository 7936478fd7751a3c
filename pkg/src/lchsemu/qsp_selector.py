"""Quantum signal processing: polynomial targets, phase solving, the selector.

Two phase conventions live here.

``wx``
    Standard single-qubit QSP with signal ``W(x) = exp(i arccos(x) X)`` and
    phases ``exp(i phi_k Z)``. :func:`solve_phases` finds symmetric phases
    with ``Re <0|U|0> = f(x)`` for real polynomials of definite parity.

``laurent``
    Generalized QSP on the qubitization iterate ``Q``. The signal operator
    is ``A = |0><0| (x) Q + |1><1| (x) I`` (and its partner with ``Q^dag``
    on ``|1>``) interleaved with arbitrary SU(2) rotations. Because ``Q`` has
    eigenvalues ``z = exp(+-i arccos(lambda))`` on each 2D subspace, the
    a_qsp = 0 block equals ``P(z)`` averaged over ``z`` and ``1/z``. With a
    Laurent target ``L(z) = sum_m (-i)^|m| J_|m|(tau) z^m`` this gives
    ``exp(-i tau lambda)`` for every eigenvalue at once, with one phase
    qubit and no amplitude loss beyond the safety scale.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy import optimize, special

from .block_encoding import BlockEncoding
from .sim_engine import Circuit, CircuitBuilder, RegisterLayout

MAX_ORDER = 20000


class PhaseSolverError(RuntimeError):
    """Phase finding failed; ``residual`` holds the achieved error."""

    def __init__(self, msg: str, residual: float = float("nan")):
        super().__init__(f"{msg} (residual {residual:.3g})")
        self.residual = residual


@dataclass(frozen=True)
class ChebyshevExpansion:
    """Polynomial ``sum_m c_m T_m(x)`` of definite parity."""

    parity: str
    coefficients: np.ndarray
    truncation_error: float = 0.0

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError("parity must be 'even' or 'odd'")
        c = np.asarray(self.coefficients, dtype=float)
        off = 1 if self.parity == "even" else 0
        if np.any(c[off::2] != 0):
            raise ValueError(f"{self.parity} expansion has coefficients of the wrong parity")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coefficients)[0]
        return int(nz[-1]) if len(nz) else 0

    def __call__(self, x):
        if len(self.coefficients) == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return npcheb.chebval(x, self.coefficients)


def _bessel_order(tau: float, eps: float, max_order: int) -> tuple[int, np.ndarray]:
    """Smallest ``N`` with ``2 sum_{m>N} |J_m(tau)| <= eps`` and the ``J_m`` up to a safe cap."""
    cap = int(min(max_order + 64, math.ceil(2 * tau + 80 + 4 * math.log10(1 / eps))))
    J = special.jv(np.arange(cap + 1), tau)
    tail = 2 * np.cumsum(np.abs(J[::-1]))[::-1]  # tail[m] = 2 sum_{k>=m} |J_k|
    tail = np.append(tail, 0.0)
    for N in range(min(cap, max_order) + 1):
        if tail[N + 1] <= eps:
            return N, J
    raise ValueError(f"eps={eps:g} not reachable below order {max_order} at tau={tau:g}")


def jacobi_anger(tau: float, eps: float, max_order: int = MAX_ORDER) -> tuple[ChebyshevExpansion, ChebyshevExpansion]:
    """Chebyshev expansions of ``cos(tau x)`` and ``sin(tau x)`` on [-1, 1].

    Uses ``cos(tau x) = J_0 + 2 sum (-1)^m J_2m T_2m`` and
    ``sin(tau x) = 2 sum (-1)^m J_{2m+1} T_{2m+1}``, truncated at the first
    order whose Bessel tail is below ``eps``.

    Raises:
        ValueError: if ``eps`` cannot be met below ``max_order``.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    N, J = _bessel_order(tau, eps, max_order)
    m = np.arange(N + 1)
    sign = np.where((m // 2) % 2 == 0, 1.0, -1.0)
    full = np.where(m == 0, 1.0, 2.0) * sign * J[: N + 1]
    even = np.where(m % 2 == 0, full, 0.0)
    odd = np.where(m % 2 == 1, full, 0.0)
    err = float(2 * np.sum(np.abs(J[N + 1 :])))
    even = np.trim_zeros(even, "b")
    odd = np.trim_zeros(odd, "b")
    return ChebyshevExpansion("even", even, err), ChebyshevExpansion("odd", odd, err)


def laurent_coefficients(tau: float, eps: float) -> np.ndarray:
    """Coefficients of ``z^-K .. z^K`` approximating ``exp(-i tau (z + 1/z)/2)``."""
    cos_e, sin_e = jacobi_anger(tau, eps)
    K = max(len(cos_e.coefficients), len(sin_e.coefficients)) - 1
    c = np.zeros(K + 1, dtype=complex)
    c[: len(cos_e.coefficients)] += cos_e.coefficients
    c[: len(sin_e.coefficients)] -= 1j * sin_e.coefficients
    L = np.empty(2 * K + 1, dtype=complex)
    L[K] = c[0]
    L[K + 1 :] = c[1:] / 2
    L[:K] = c[1:][::-1] / 2
    return L


@dataclass(frozen=True)
class QspPhaseSequence:
    """Phases of a QSP circuit.

    Attributes:
        phases: ``(d+1,)`` angles for ``wx``; ``(d+1, 3)`` ZYZ angles
            ``(a, b, c)`` of each rotation ``Rz(a) Ry(b) Rz(c)`` for
            ``laurent``.
        convention: ``"wx"`` or ``"laurent"``.
        target: ``"cos"``, ``"sin"``, ``"exp"`` or ``"poly"``.
        tau: Effective time ``alpha * t``, if any.
        scale: Factor applied to the target before solving.
        global_phase: Extra phase of the product (``laurent`` only).
    """

    phases: np.ndarray
    convention: str
    target: str = "poly"
    tau: float | None = None
    scale: float = 1.0
    global_phase: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.phases) - 1

    def to_text(self) -> str:
        flat = np.asarray(self.phases, dtype=float).ravel()
        head = [
            f"# convention={self.convention}",
            f"# target={self.target}",
            f"# tau={'' if self.tau is None else format(self.tau, '.17g')}",
            f"# scale={self.scale:.17g}",
            f"# global_phase={self.global_phase:.17g}",
            f"# shape={','.join(str(s) for s in np.shape(self.phases))}",
        ]
        return "\n".join(head + [format(v, ".17g") for v in flat]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QspPhaseSequence":
        meta, vals = {}, []
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("#"):
                k, _, v = ln[1:].strip().partition("=")
                meta[k] = v
            else:
                vals.append(float(ln))
        shape = tuple(int(s) for s in meta["shape"].split(",") if s)
        return cls(
            phases=np.array(vals, dtype=float).reshape(shape),
            convention=meta["convention"],
            target=meta.get("target", "poly"),
            tau=float(meta["tau"]) if meta.get("tau") else None,
            scale=float(meta["scale"]),
            global_phase=float(meta.get("global_phase", 0.0)),
        )


# --- Wx convention -----------------------------------------------------------


def _wx_unitaries(phases: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1 - x**2, 0, None))
    W = np.empty((len(x), 2, 2), dtype=complex)
    W[:, 0, 0] = W[:, 1, 1] = x
    W[:, 0, 1] = W[:, 1, 0] = 1j * s
    U = np.broadcast_to(np.diag(np.exp([1j * phases[0], -1j * phases[0]])), (len(x), 2, 2)).copy()
    for ph in phases[1:]:
        U = U @ W
        U[:, :, 0] *= np.exp(1j * ph)
        U[:, :, 1] *= np.exp(-1j * ph)
    return U


def wx_response(phases, x) -> np.ndarray:
    """``<0|U_Phi(x)|0>`` in the Wx convention."""
    return _wx_unitaries(np.asarray(phases, dtype=float), np.atleast_1d(x))[:, 0, 0]


def _symmetric(red: np.ndarray, d: int) -> np.ndarray:
    if d % 2:
        return np.concatenate([red, red[::-1]])
    return np.concatenate([red, red[-2::-1]])


def _solve_wx_scaled(coef: np.ndarray, d: int, scale: float, grid: np.ndarray) -> tuple[np.ndarray, float]:
    """Phases for ``scale * chebval(x, coef)`` and their max error divided by ``scale``."""
    f = lambda x: scale * npcheb.chebval(x, coef)  # noqa: E731
    if scale == 1.0 and coef[d] == 1.0 and not np.any(coef[:d]):
        # T_d itself: the all-zero sequence, a degenerate root for the solver
        phases = np.zeros(d + 1)
    elif d == 0:
        phases = np.array([math.acos(max(-1.0, min(1.0, scale * coef[0])))])
    else:
        dt = (d + 2) // 2
        nodes = np.cos((2 * np.arange(1, dt + 1) - 1) * np.pi / (4 * dt))
        target = f(nodes)

        def resid(red):
            return wx_response(_symmetric(red, d), nodes).real - target

        x0 = np.zeros(dt)
        x0[0] = np.pi / 4
        sol = optimize.least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        phases = _symmetric(sol.x, d)
    res = float(np.max(np.abs(wx_response(phases, grid).real - f(grid)))) / scale
    return phases, res


def solve_phases(e: ChebyshevExpansion, eps: float = 1e-10, n_check: int = 1000) -> QspPhaseSequence:
    """Symmetric Wx phases with ``Re <0|U|0> = scale * e(x)``.

    The reduced phases are found by a least-squares solve of the target
    at the positive Chebyshev nodes, started from ``(pi/4, 0, ..., 0, pi/4)``
    where the Jacobian is well conditioned. If the bare target does not
    converge it is retried scaled by 1/2; the scale is kept in the sequence.

    Raises:
        PhaseSolverError: if the realized polynomial misses the target by
            more than ``eps`` on an ``n_check``-point grid.
    """
    coef = np.asarray(e.coefficients, dtype=float)
    d = e.degree if len(coef) else 0
    coef = coef[: d + 1] if len(coef) else np.zeros(1)
    grid = np.cos(np.linspace(0, np.pi, n_check))
    sup = float(np.max(np.abs(npcheb.chebval(grid, coef))))
    if sup >= 2:
        raise PhaseSolverError("target exceeds 2 on [-1, 1]", sup)
    # try the bare target first, then the halved one
    best = None
    for scale in (1.0, 0.5) if sup <= 1 else (0.5,):
        phases, res = _solve_wx_scaled(coef, d, scale, grid)
        if best is None or res < best[2]:
            best = (phases, scale, res)
        if res <= eps:
            break
    phases, scale, res = best
    if not res <= eps:
        raise PhaseSolverError("Wx phase solve did not converge", res)
    kind = "cos" if e.parity == "even" else "sin"
    return QspPhaseSequence(phases, "wx", target=kind, scale=scale)


# --- Laurent (generalized) convention ---------------------------------------


def complementary_polynomial(p: np.ndarray, nfft: int | None = None) -> np.ndarray:
    """``q`` of the same degree with ``|p|^2 + |q|^2 = 1`` on the unit circle.

    Computed as the minimum-phase spectral factor of ``1 - |p|^2`` through
    the FFT of its logarithm.
    """
    p = np.asarray(p, dtype=complex)
    d = len(p) - 1
    if nfft is None:
        nfft = 1 << int(math.ceil(math.log2(16 * (d + 1))))
    P = np.fft.fft(p, nfft)
    g = 1 - np.abs(P) ** 2
    if np.min(g) <= 0:
        raise PhaseSolverError("target exceeds 1 on the unit circle", float(-np.min(g)))
    c = np.fft.ifft(np.log(g))
    h = np.zeros(nfft, dtype=complex)
    h[0] = c[0] / 2
    h[1 : nfft // 2] = c[1 : nfft // 2]
    return np.fft.ifft(np.exp(np.fft.fft(h)))[: d + 1]


def strip_layers(p: np.ndarray, q: np.ndarray) -> list[np.ndarray]:
    """Rotations ``G_0..G_d`` with ``[[P, .], [Q, .]] = G_d A ... A G_0``, ``A = diag(z, 1)``.

    Each step picks the row of ``G_k^dag`` that annihilates the lowest or the
    highest coefficient (whichever is numerically larger), lowers the degree
    by one and recurses.
    """
    P = np.array(p, dtype=complex)
    Q = np.array(q, dtype=complex)
    d = len(P) - 1
    Gs = []
    for _ in range(d, 0, -1):
        r1 = np.array([Q[0], -P[0]])
        r2 = np.array([Q[-1], -P[-1]])
        n1, n2 = np.linalg.norm(r1), np.linalg.norm(r2)
        if n1 >= n2:
            r1 = r1 / n1
            r2 = np.array([-np.conj(r1[1]), np.conj(r1[0])])
        else:
            r2 = r2 / n2
            r1 = np.array([np.conj(r2[1]), -np.conj(r2[0])])
        Gd = np.array([r1, r2])
        Pn = Gd[0, 0] * P + Gd[0, 1] * Q
        Qn = Gd[1, 0] * P + Gd[1, 1] * Q
        P, Q = Pn[1:], Qn[:-1]
        Gs.append(Gd.conj().T)
    Gs.append(np.array([[P[0], -np.conj(Q[0])], [Q[0], np.conj(P[0])]]))
    return Gs[::-1]


def zyz(G: np.ndarray) -> tuple[float, float, float, float]:
    """``(gamma, a, b, c)`` with ``G = e^{i gamma} Rz(a) Ry(b) Rz(c)``."""
    det = np.linalg.det(G)
    gamma = float(np.angle(det)) / 2
    V = G * np.exp(-1j * gamma)
    al, be = V[0, 0], V[1, 0]
    b = 2 * math.atan2(abs(be), abs(al))
    pa, pb = float(np.angle(al)), float(np.angle(be))
    a = pb - pa
    c = -pa - pb
    return gamma, a, b, c


def _zyz_matrix(a: float, b: float, c: float) -> np.ndarray:
    rz = lambda t: np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])  # noqa: E731
    cb, sb = math.cos(b / 2), math.sin(b / 2)
    return rz(a) @ np.array([[cb, -sb], [sb, cb]]) @ rz(c)


def solve_laurent_phases(L: np.ndarray, scale: float, tau: float | None = None, check: float | None = None) -> QspPhaseSequence:
    """Generalized-QSP rotations realizing ``scale * L(z)`` on the phase qubit.

    Args:
        L: Coefficients of ``z^-K .. z^K``.
        scale: Safety factor ``< 1`` so that ``|scale L| < 1`` on the circle.
        tau: Recorded in the sequence.
        check: If given, raise when the realized Laurent polynomial misses
            ``scale * L`` by more than this on a dense grid.
    """
    p = scale * np.asarray(L, dtype=complex)
    d = len(p) - 1
    if d == 0:
        if abs(abs(p[0]) - 1) > 1e-14:
            q = np.array([math.sqrt(max(0.0, 1 - abs(p[0]) ** 2))], dtype=complex)
        else:
            q = np.zeros(1, dtype=complex)
    else:
        q = complementary_polynomial(p)
    Gs = strip_layers(p, q)
    angles = np.empty((len(Gs), 3))
    gtot = 0.0
    for k, G in enumerate(Gs):
        g, a, b, c = zyz(G)
        angles[k] = (a, b, c)
        gtot += g
    seq = QspPhaseSequence(angles, "laurent", "exp", tau, scale, math.remainder(gtot, 2 * math.pi))
    if check is not None:
        res = laurent_residual(seq, L)
        if not res <= check:
            raise PhaseSolverError("Laurent phase solve lost accuracy", res)
    return seq


def laurent_response(seq: QspPhaseSequence, omega) -> np.ndarray:
    """``z^{-d/2} <0|G_d A ... A G_0|0>`` at ``z = e^{i omega}``, with the global phase."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    Gs = [_zyz_matrix(*row) for row in seq.phases]
    z = np.exp(1j * omega)
    v = np.zeros((len(omega), 2), dtype=complex)
    v[:, 0] = 1.0
    v = v @ Gs[0].T
    for G in Gs[1:]:
        v[:, 0] *= z
        v = v @ G.T
    K = (len(Gs) - 1) / 2
    return v[:, 0] * np.exp(1j * seq.global_phase) * z ** (-K)


def laurent_residual(seq: QspPhaseSequence, L: np.ndarray, n: int = 2048) -> float:
    omega = np.linspace(0, 2 * np.pi, n, endpoint=False)
    K = (len(L) - 1) // 2
    z = np.exp(1j * omega)
    target = sum(c * z ** (m - K) for m, c in enumerate(L))
    return float(np.max(np.abs(laurent_response(seq, omega) - seq.scale * target)))


def exp_phases(tau: float, eps: float, cache: "PhaseCache | None" = None) -> QspPhaseSequence:
    """Laurent rotations for ``exp(-i tau lambda)`` with overall error below ``eps``.

    The Bessel tail is cut at ``eps/4`` and the target is scaled by
    ``1 - eps/2``, which leaves room for the complementary polynomial.
    """
    if cache is not None:
        hit = cache.get(tau, eps)
        if hit is not None:
            return hit
    L = laurent_coefficients(tau, eps / 4)
    scale = 1.0 if len(L) == 1 else 1.0 - eps / 2
    seq = solve_laurent_phases(L, scale, tau, check=eps / 4)
    if cache is not None:
        cache.put(tau, eps, seq)
    return seq


@dataclass
class PhaseCache:
    """Directory of phase sequences keyed by a hash of ``(tau, eps)``."""

    root: Path

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, tau: float, eps: float) -> Path:
        key = hashlib.sha256(f"{tau!r}|{eps!r}".encode()).hexdigest()[:24]
        return self.root / f"phases_{key}.txt"

    def get(self, tau: float, eps: float) -> QspPhaseSequence | None:
        path = self._path(tau, eps)
        if not path.exists():
            return None
        return QspPhaseSequence.from_text(path.read_text())

    def put(self, tau: float, eps: float, seq: QspPhaseSequence) -> None:
        path = self._path(tau, eps)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(seq.to_text())
        tmp.replace(path)


# --- circuits -----------------------------------------------------------------


def _reflection(b: CircuitBuilder, anc: Sequence[int], flag: int | None, controls=()) -> None:
    """``2|0><0| - I`` on ``anc``; only the phase-carrying gates get ``controls``."""
    ctrl = tuple(controls)
    zeros = tuple((q, 0) for q in anc)
    if flag is not None:
        b.x(flag, zeros)
        b.x(flag)
        b.phase(flag, math.pi, ctrl)
        b.x(flag)
        b.x(flag, zeros)
        return
    q0, rest = anc[0], tuple((q, 0) for q in anc[1:])
    b.rz(q0, 2 * math.pi, ctrl)  # -I
    b.x(q0)
    b.phase(q0, math.pi, ctrl + rest)
    b.x(q0)


def reflection_circuit(layout: RegisterLayout, anc: Sequence[int], flag: int | None = None) -> Circuit:
    b = CircuitBuilder(layout, "R_be")
    _reflection(b, anc, flag)
    return b.build()


def _iterate_gates(U_C: BlockEncoding, flag: int | None, controls=()) -> CircuitBuilder:
    b = CircuitBuilder(U_C.layout, "Q")
    b.extend(U_C.circuit.controlled(controls) if controls else U_C.circuit)
    _reflection(b, U_C.ancillas, flag, controls)
    return b


def iterate_Q(U_C: BlockEncoding, flag: int | None = None) -> Circuit:
    """Qubitization iterate ``Q = R_be U_C`` with the reflection on the block ancillas only.

    ``U_C`` must be Hermitian as a unitary. On the 2D subspace spanned by
    ``|0>_be|v>`` and ``U_C|0>_be|v>`` for an eigenvector ``v`` of the block
    with eigenvalue ``lambda``, ``Q`` rotates by ``arccos(lambda)``.
    """
    return _iterate_gates(U_C, flag).build()


@dataclass(frozen=True)
class Selector:
    """Selector circuit and its bookkeeping.

    Attributes:
        circuit: Gates on the full layout.
        sequence: Laurent rotations.
        n_o: Number of ``O`` operators; ``U_C`` is queried ``2 n_o`` times.
        scale: Block equals ``scale * exp(-i C_j t)`` up to ``eps_qsp``.
        alpha: Normalization ``alpha_C`` of the block encoding.
        tau: ``alpha * t``.
        ancillas: Qubits that must be post-selected on zero.
    """

    circuit: Circuit
    sequence: QspPhaseSequence
    n_o: int
    scale: float
    alpha: float
    tau: float
    ancillas: tuple[int, ...] = field(default=())

    @property
    def n_queries(self) -> int:
        return 2 * self.n_o


def build_selector(
    U_C: BlockEncoding,
    t: float,
    eps_qsp: float,
    phase_qubit: int | None = None,
    flag: int | None = None,
    cache: PhaseCache | None = None,
) -> Selector:
    """One QSP circuit applying ``exp(-i C_j t)`` for every ``r_k = j``.

    The sequence is ``G_0, c0-Q, G_1, c1-Q^dag, G_2, ...`` on the phase qubit
    (``a_qsp[0]`` by default), with ``K`` forward and ``K`` inverse queries.

    Args:
        U_C: Hermitian block encoding of ``C_j / alpha``.
        t: Time.
        eps_qsp: Target block error.
        phase_qubit: GQSP control qubit; defaults to ``a_qsp[0]``.
        flag: Optional flag qubit for the reflection; defaults to
            ``a_qsp[1]`` when that register has two qubits.
        cache: Optional on-disk phase cache.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    layout = U_C.layout
    if phase_qubit is None:
        phase_qubit = layout.qubit("a_qsp", 0)
    if flag is None and "a_qsp" in layout and layout.width("a_qsp") > 1:
        flag = layout.qubit("a_qsp", 1)
    tau = U_C.alpha * t
    seq = exp_phases(tau, eps_qsp, cache)
    d = seq.degree

    fwd = _iterate_gates(U_C, flag, ((phase_qubit, 0),)).build()
    inv = _iterate_gates(U_C, flag, ((phase_qubit, 1),)).build().adjoint()

    b = CircuitBuilder(layout, "selector")
    if d > 0 or abs(seq.scale - 1.0) > 0:
        for k, (a, beta, c) in enumerate(seq.phases):
            if k > 0:
                b.extend(fwd if k % 2 else inv)
            # G_k = e^{i g} Rz(a) Ry(beta) Rz(c), applied right to left
            if c:
                b.rz(phase_qubit, c)
            if beta:
                b.ry(phase_qubit, beta)
            if a:
                b.rz(phase_qubit, a)
        b.global_phase(phase_qubit, seq.global_phase)
    anc = tuple(U_C.ancillas) + ((phase_qubit,) if flag is None else (phase_qubit, flag))
    return Selector(b.build(), seq, d // 2, seq.scale, U_C.alpha, tau, anc)
