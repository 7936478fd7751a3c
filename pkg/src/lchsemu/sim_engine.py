"""Statevector emulator with single-target multi-controlled (STMC) gates.

Qubit ordering is little-endian: the first register in a layout occupies the
least significant bits of the amplitude index, and within a register qubit 0
is its least significant bit. Qubit ``q`` therefore contributes ``2**q`` to
the index.

Gates are applied by viewing the amplitude array as a ``[2] * n`` tensor
(plus an optional trailing batch axis). Controls fix their axis to the
required polarity and the 2x2 gate acts on the two slices of the target axis,
so a gate costs one pass over the selected sub-array and never builds index
masks.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 26
MAX_MATRIX_QUBITS = 14


class GateKind(str, Enum):
    X = "X"
    H = "H"
    RY = "RY"
    RZ = "RZ"
    PHASE = "PHASE"


_ROTATIONS = (GateKind.RY, GateKind.RZ, GateKind.PHASE)


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers. See the module docstring for bit order."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(w)) for n, w in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise ValueError(f"register names must be unique: {names}")
        if any(w < 1 for _, w in regs):
            raise ValueError("register widths must be positive")
        if self.n_qubits > MAX_QUBITS:
            raise ValueError(f"layout needs {self.n_qubits} qubits, engine limit is {MAX_QUBITS}")

    @classmethod
    def of(cls, *registers: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple(registers))

    @property
    def n_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def offset(self, name: str) -> int:
        off = 0
        for n, w in self.registers:
            if n == name:
                return off
            off += w
        raise KeyError(f"no register named {name!r}")

    def width(self, name: str) -> int:
        for n, w in self.registers:
            if n == name:
                return w
        raise KeyError(f"no register named {name!r}")

    def qubits(self, *names: str) -> tuple[int, ...]:
        """Global qubit ids of the named registers, concatenated, LSB first."""
        out: list[int] = []
        for name in names:
            off = self.offset(name)
            out.extend(range(off, off + self.width(name)))
        return tuple(out)

    def qubit(self, name: str, i: int = 0) -> int:
        w = self.width(name)
        if not 0 <= i < w:
            raise IndexError(f"qubit {i} out of range for register {name!r} of width {w}")
        return self.offset(name) + i

    def index(self, **values: int) -> int:
        """Basis index with the given register values (others zero)."""
        idx = 0
        for name, val in values.items():
            w = self.width(name)
            if not 0 <= val < (1 << w):
                raise ValueError(f"value {val} does not fit register {name!r}")
            idx |= val << self.offset(name)
        return idx

    def without(self, qubits: Iterable[int]) -> "RegisterLayout":
        """Layout with the given qubits removed (empty registers dropped)."""
        drop = set(qubits)
        regs = []
        for name in self.names:
            keep = sum(1 for q in self.qubits(name) if q not in drop)
            if keep:
                regs.append((name, keep))
        return RegisterLayout(tuple(regs))


@dataclass(frozen=True)
class StmcGate:
    """Single-target gate with any number of (qubit, polarity) controls."""

    kind: GateKind
    target: int
    angle: float = 0.0
    controls: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        ctrl = tuple((int(q), int(p)) for q, p in self.controls)
        object.__setattr__(self, "controls", ctrl)
        if any(q == self.target for q, _ in ctrl):
            raise ValueError("target qubit is also a control")
        if len({q for q, _ in ctrl}) != len(ctrl):
            raise ValueError("duplicate control qubit")
        if any(p not in (0, 1) for _, p in ctrl):
            raise ValueError("control polarity must be 0 or 1")
        if not math.isfinite(self.angle):
            raise ValueError("gate angle must be finite")

    def adjoint(self) -> "StmcGate":
        if self.kind in _ROTATIONS:
            return StmcGate(self.kind, self.target, -self.angle, self.controls)
        return self

    def with_controls(self, extra: Sequence[tuple[int, int]]) -> "StmcGate":
        return StmcGate(self.kind, self.target, self.angle, tuple(extra) + self.controls)

    def matrix(self) -> np.ndarray:
        """2x2 matrix of the target action."""
        a = self.angle
        if self.kind is GateKind.X:
            return np.array([[0, 1], [1, 0]], dtype=complex)
        if self.kind is GateKind.H:
            return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        if self.kind is GateKind.RY:
            c, s = math.cos(a / 2), math.sin(a / 2)
            return np.array([[c, -s], [s, c]], dtype=complex)
        if self.kind is GateKind.RZ:
            return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
        return np.diag([1.0, np.exp(1j * a)])

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) + tuple(q for q, _ in self.controls)

    def to_line(self) -> str:
        ctrl = " ".join(f"c{q}{'+' if p else '-'}" for q, p in self.controls)
        return f"{self.kind.value} {self.angle!r} {self.target} {ctrl}".rstrip()

    @classmethod
    def from_line(cls, line: str) -> "StmcGate":
        parts = line.split()
        kind, angle, target = parts[0], float(parts[1]), int(parts[2])
        controls = tuple((int(c[1:-1]), 1 if c[-1] == "+" else 0) for c in parts[3:])
        return cls(GateKind(kind), target, angle, controls)


@dataclass(frozen=True)
class Circuit:
    layout: RegisterLayout
    gates: tuple[StmcGate, ...] = ()
    label: str = ""

    def __post_init__(self):
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        n = self.layout.n_qubits
        for g in gates:
            if any(not 0 <= q < n for q in g.qubits()):
                raise ValueError(f"gate {g.to_line()!r} addresses a qubit outside the layout")

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        return self.then(other)

    def then(self, other: "Circuit", label: str | None = None) -> "Circuit":
        """Sequential composition: ``self`` first, then ``other``."""
        if other.layout != self.layout:
            raise ValueError("cannot compose circuits with different layouts")
        return Circuit(self.layout, self.gates + other.gates, self.label if label is None else label)

    def adjoint(self) -> "Circuit":
        return Circuit(self.layout, tuple(g.adjoint() for g in reversed(self.gates)), self.label + "^dag")

    def controlled(self, controls: Sequence[tuple[int, int]]) -> "Circuit":
        return Circuit(self.layout, tuple(g.with_controls(controls) for g in self.gates), self.label)

    def relabel(self, label: str) -> "Circuit":
        return Circuit(self.layout, self.gates, label)

    def dump(self) -> str:
        """Line-oriented text: ``KIND angle target c<q>+ c<q>-``."""
        head = "# layout " + " ".join(f"{n}:{w}" for n, w in self.layout.registers)
        return "\n".join([head] + [g.to_line() for g in self.gates]) + "\n"

    @classmethod
    def load(cls, text: str, label: str = "") -> "Circuit":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# layout"):
            raise ValueError("missing layout header")
        regs = tuple((p.split(":")[0], int(p.split(":")[1])) for p in lines[0].split()[2:])
        gates = tuple(StmcGate.from_line(ln) for ln in lines[1:] if not ln.startswith("#"))
        return cls(RegisterLayout(regs), gates, label)


@dataclass
class CircuitBuilder:
    """Mutable gate list that freezes into a :class:`Circuit`."""

    layout: RegisterLayout
    label: str = ""
    gates: list[StmcGate] = field(default_factory=list)

    def add(self, kind, target: int, angle: float = 0.0, controls=()) -> "CircuitBuilder":
        self.gates.append(StmcGate(kind, target, float(angle), tuple(controls)))
        return self

    def x(self, q, controls=()):
        return self.add(GateKind.X, q, 0.0, controls)

    def h(self, q, controls=()):
        return self.add(GateKind.H, q, 0.0, controls)

    def ry(self, q, angle, controls=()):
        return self.add(GateKind.RY, q, angle, controls)

    def rz(self, q, angle, controls=()):
        return self.add(GateKind.RZ, q, angle, controls)

    def phase(self, q, angle, controls=()):
        return self.add(GateKind.PHASE, q, angle, controls)

    def extend(self, circuit: Circuit | Iterable[StmcGate]) -> "CircuitBuilder":
        gates = circuit.gates if isinstance(circuit, Circuit) else circuit
        self.gates.extend(gates)
        return self

    def global_phase(self, q: int, gamma: float, controls=()) -> "CircuitBuilder":
        """Multiply by ``e^{i gamma}`` using ``Phase(2 gamma) Rz(-2 gamma)`` on ``q``."""
        if gamma != 0.0:
            self.rz(q, -2 * gamma, controls)
            self.phase(q, 2 * gamma, controls)
        return self

    def build(self) -> Circuit:
        return Circuit(self.layout, tuple(self.gates), self.label)


@dataclass(frozen=True)
class StateVector:
    """Amplitudes plus layout. States may be sub-normalized."""

    amplitudes: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (1 << self.layout.n_qubits,):
            raise ValueError(f"amplitude shape {amp.shape} does not match {self.layout.n_qubits} qubits")
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def zero(cls, layout: RegisterLayout) -> "StateVector":
        amp = np.zeros(1 << layout.n_qubits, dtype=complex)
        amp[0] = 1.0
        return cls(amp, layout)

    @classmethod
    def basis(cls, layout: RegisterLayout, index: int) -> "StateVector":
        amp = np.zeros(1 << layout.n_qubits, dtype=complex)
        amp[index] = 1.0
        return cls(amp, layout)

    @classmethod
    def product(cls, layout: RegisterLayout, parts: dict[str, np.ndarray | int]) -> "StateVector":
        """Tensor product of per-register vectors; unlisted registers are |0>."""
        amp = np.ones(1, dtype=complex)
        for name, w in layout.registers:
            v = parts.get(name, 0)
            if isinstance(v, (int, np.integer)):
                vec = np.zeros(1 << w, dtype=complex)
                vec[int(v)] = 1.0
            else:
                vec = np.asarray(v, dtype=complex)
                if vec.shape != (1 << w,):
                    raise ValueError(f"vector for {name!r} has shape {vec.shape}")
            # later registers are more significant
            amp = np.kron(vec, amp)
        return cls(amp, layout)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def register_view(self, names: Sequence[str]) -> np.ndarray:
        """Amplitudes reshaped so axis i is the value of ``names[i]``.

        ``names`` must cover every register of the layout.
        """
        if sorted(names) != sorted(self.layout.names):
            raise ValueError("names must list every register")
        shape = tuple(1 << w for _, w in reversed(self.layout.registers))
        t = self.amplitudes.reshape(shape)
        order = list(reversed(self.layout.names))
        return np.transpose(t, [order.index(n) for n in names])


_S0, _S1 = slice(0, 1), slice(1, 2)


def _apply_gates(t: np.ndarray, n: int, gates: Sequence[StmcGate]) -> None:
    """Apply gates in place to a tensor of shape ``[2]*n (+ [batch])``."""
    rank = t.ndim
    full = [slice(None)] * rank
    for g in gates:
        # length-1 slices keep every selection a view, even with no free axis
        idx = list(full)
        for q, p in g.controls:
            idx[n - 1 - q] = _S1 if p else _S0
        ax = n - 1 - g.target
        idx[ax] = _S0
        a = t[tuple(idx)]
        idx[ax] = _S1
        b = t[tuple(idx)]
        kind = g.kind
        if kind is GateKind.X:
            tmp = a.copy()
            a[...] = b
            b[...] = tmp
        elif kind is GateKind.H:
            tmp = a.copy()
            a += b
            a *= 1 / math.sqrt(2)
            b *= -1.0
            b += tmp
            b *= 1 / math.sqrt(2)
        elif kind is GateKind.RY:
            c, s = math.cos(g.angle / 2), math.sin(g.angle / 2)
            tmp = a.copy()
            a *= c
            a -= s * b
            b *= c
            b += s * tmp
        elif kind is GateKind.RZ:
            a *= complex(math.cos(g.angle / 2), -math.sin(g.angle / 2))
            b *= complex(math.cos(g.angle / 2), math.sin(g.angle / 2))
        else:
            b *= complex(math.cos(g.angle), math.sin(g.angle))


def apply_to_array(c: Circuit, amps: np.ndarray) -> np.ndarray:
    """Apply ``c`` to an array of shape ``(2**n,)`` or ``(2**n, batch)``; returns a copy."""
    n = c.layout.n_qubits
    out = np.array(amps, dtype=complex, copy=True)
    if out.shape[0] != 1 << n or out.ndim not in (1, 2):
        raise ValueError(f"array shape {out.shape} does not match {n} qubits")
    shape = [2] * n + ([out.shape[1]] if out.ndim == 2 else [])
    t = out.reshape(shape)
    _apply_gates(t, n, c.gates)
    return out


def apply(c: Circuit, s: StateVector) -> StateVector:
    """Apply the gates of ``c`` in order to ``s``."""
    if c.layout != s.layout:
        raise ValueError("circuit and state layouts differ")
    return StateVector(apply_to_array(c, s.amplitudes), s.layout)


def circuit_to_matrix(c: Circuit, chunk: int = 1024) -> np.ndarray:
    """Full unitary of ``c``, built column block by column block."""
    n = c.layout.n_qubits
    if n > MAX_MATRIX_QUBITS:
        raise ValueError(f"circuit_to_matrix supports at most {MAX_MATRIX_QUBITS} qubits, got {n}")
    dim = 1 << n
    out = np.empty((dim, dim), dtype=complex)
    for lo in range(0, dim, chunk):
        hi = min(dim, lo + chunk)
        cols = np.zeros((dim, hi - lo), dtype=complex)
        cols[np.arange(lo, hi), np.arange(hi - lo)] = 1.0
        out[:, lo:hi] = apply_to_array(c, cols)
    return out


def _zero_mask_indices(n: int, qubits: Sequence[int]) -> np.ndarray:
    """Indices with all given qubits 0, in increasing order."""
    keep = [q for q in range(n) if q not in set(qubits)]
    idx = np.zeros(1, dtype=np.int64)
    for q in keep:
        idx = np.concatenate([idx, idx + (1 << q)])
    return np.sort(idx)


def extract_block(c: Circuit, ancillas: Sequence[int]) -> np.ndarray:
    """Block ``<0|_anc U |0>_anc`` as a matrix over the remaining qubits.

    Rows and columns are indexed by the remaining qubits in increasing order,
    which for whole registers equals the reduced layout's little-endian index.
    """
    n = c.layout.n_qubits
    sub = _zero_mask_indices(n, ancillas)
    cols = np.zeros((1 << n, len(sub)), dtype=complex)
    cols[sub, np.arange(len(sub))] = 1.0
    out = apply_to_array(c, cols)
    return out[sub, :]


def postselect_zero(s: StateVector, qubits: Iterable[int], renormalize: bool = True) -> tuple[StateVector, float]:
    """Project onto ``|0...0>`` of ``qubits``.

    Returns:
        The state on the remaining qubits (renormalized unless asked not to)
        and the squared norm of the projection.

    Raises:
        ValueError: if the projection vanishes.
    """
    qubits = sorted(set(qubits))
    n = s.layout.n_qubits
    if any(not 0 <= q < n for q in qubits):
        raise ValueError("qubit outside layout")
    sub = _zero_mask_indices(n, qubits)
    amp = s.amplitudes[sub]
    p = float(np.vdot(amp, amp).real)
    if p == 0.0:
        raise ValueError("post-selection has zero probability")
    if renormalize:
        amp = amp / math.sqrt(p)
    return StateVector(amp, s.layout.without(qubits)), p


def count_stmc(c: Circuit) -> dict[str, int]:
    """Tally of gates by kind plus ``total``."""
    cnt = Counter(g.kind.value for g in c.gates)
    out = {k.value: cnt.get(k.value, 0) for k in GateKind}
    out["total"] = len(c.gates)
    return out
