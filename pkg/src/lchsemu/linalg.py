"""Dense complex linear algebra and classical reference oracles.

Everything here works on plain ``numpy`` arrays of complex dtype. The
functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Inputs with a larger spectral norm are rejected by ``expm``.
EXPM_NORM_BOUND = 1.0e4


@dataclass(frozen=True)
class AdeParams:
    """Periodic 1D advection-diffusion problem on ``2**n_x`` grid points.

    Attributes:
        n_x: Number of qubits of the spatial register.
        v: Advection velocity.
        D: Diffusivity, must be non-negative.
    """

    n_x: int
    v: float = 1.0
    D: float = 0.01

    def __post_init__(self):
        if self.n_x < 2:
            raise ValueError(f"n_x must be >= 2, got {self.n_x}")
        if self.D < 0:
            raise ValueError(f"diffusivity must be >= 0, got {self.D}")

    @property
    def n_points(self) -> int:
        return 1 << self.n_x

    @property
    def dx(self) -> float:
        # grid spacing 1/(N_x - 1) even though the domain is periodic
        return 1.0 / (self.n_points - 1)

    def stencil(self) -> tuple[float, float, float]:
        """Return ``(c_0, c_{+1}, c_{-1})``."""
        dx = self.dx
        c0 = -2.0 * self.D / dx**2
        cp = self.D / dx**2 - self.v / (2 * dx)
        cm = self.D / dx**2 + self.v / (2 * dx)
        return c0, cp, cm


def as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def hermitian_split(A) -> tuple[np.ndarray, np.ndarray]:
    """Split ``A`` into Hermitian parts with ``A = A_L + 1j * A_H``.

    Args:
        A: Square complex matrix.

    Returns:
        Tuple ``(A_L, A_H)`` with ``A_L = (A + A^dag)/2`` and
        ``A_H = (A - A^dag)/(2i)``.
    """
    A = as_square(A)
    Ad = A.conj().T
    A_L = (A + Ad) / 2
    A_H = (A - Ad) / 2j
    return A_L, A_H


def is_hermitian(M, atol: float = 1e-12) -> bool:
    M = as_square(M)
    return bool(np.allclose(M, M.conj().T, atol=atol, rtol=0))


def expm(M, *, norm_bound: float = EXPM_NORM_BOUND) -> np.ndarray:
    """Matrix exponential ``e^M``.

    Anti-Hermitian and Hermitian inputs go through an eigendecomposition of
    the Hermitian generator, which is accurate to machine precision. Other
    inputs use scipy's scaling-and-squaring Pade algorithm.

    Raises:
        ValueError: if the matrix is not square, not finite, or its norm
            exceeds ``norm_bound``.
    """
    M = as_square(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    nrm = np.linalg.norm(M, 2) if M.size else 0.0
    if nrm > norm_bound:
        raise ValueError(f"norm {nrm:.3g} exceeds expm bound {norm_bound:.3g}")
    if M.shape[0] == 0:
        return M.copy()
    # anti-Hermitian: M = -iH with H Hermitian
    H = 1j * M
    if np.allclose(H, H.conj().T, atol=1e-14 * max(nrm, 1.0), rtol=0):
        e, V = np.linalg.eigh((H + H.conj().T) / 2)
        return (V * np.exp(-1j * e)) @ V.conj().T
    if np.allclose(M, M.conj().T, atol=1e-14 * max(nrm, 1.0), rtol=0):
        e, V = np.linalg.eigh((M + M.conj().T) / 2)
        return (V * np.exp(e)) @ V.conj().T
    return scipy.linalg.expm(M)


def expm_hermitian_batch(H: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H_b t)`` for a stack of Hermitian matrices ``H[b]``."""
    e, V = np.linalg.eigh(H)
    return np.einsum("bij,bj,bkj->bik", V, np.exp(-1j * e * t), V.conj())


def spectral_norm(M) -> float:
    """Largest singular value of ``M``."""
    M = as_square(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def build_ade_matrix(p: AdeParams) -> np.ndarray:
    """Periodic central-difference ADE generator ``A`` with ``dpsi/dt = -A psi``.

    The rows hold ``-c_{-1}, -c_0, -c_{+1}`` around the diagonal and wrap
    periodically at both corners.
    """
    N = p.n_points
    c0, cp, cm = p.stencil()
    A = np.zeros((N, N), dtype=complex)
    idx = np.arange(N)
    A[idx, idx] = -c0
    A[idx, (idx + 1) % N] = -cp
    A[idx, (idx - 1) % N] = -cm
    return A


def gaussian_initial_state(n_x: int, center: float = 0.5, width: float = 0.05) -> np.ndarray:
    """Unit-norm Gaussian on the grid ``x_i = i * dx`` with ``dx = 1/(N_x - 1)``."""
    if width <= 0:
        raise ValueError("width must be positive")
    N = 1 << n_x
    x = np.arange(N) / (N - 1)
    psi = np.exp(-((x - center) ** 2) / (2 * width**2)).astype(complex)
    return psi / np.linalg.norm(psi)


def error_norms(a, b) -> tuple[float, float]:
    """Return ``(l2, linf)`` norms of ``a - b``."""
    d = np.asarray(a) - np.asarray(b)
    return float(np.linalg.norm(d)), float(np.max(np.abs(d))) if d.size else 0.0
