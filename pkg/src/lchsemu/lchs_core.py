"""LCHS kernels, the theta grid, complex weights and the classical oracle.

The dissipative propagator is approximated by a finite sum

    exp(-A t) psi0  ~  sum_j w_j exp(-i C_j t) psi0,
    C_j = A_H + sin(theta_j) * k_max * A_L,

with ``theta_j`` on a uniform grid over [-pi/2, pi/2] and ``k_j = k_max sin
theta_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .linalg import as_square, hermitian_split

# eigendecompositions are batched in chunks of this many matrices
_CHUNK = 256


class Kernel(str, Enum):
    SPECIAL = "special"
    IMPROVED = "improved"


@dataclass(frozen=True)
class LchsConfig:
    """Method parameters.

    Attributes:
        kernel: ``"special"`` or ``"improved"``.
        beta: Exponent of the improved kernel, in (0, 1).
        k_max: Fourier cutoff.
        n_k: Qubits of the k register, ``N_k = 2**n_k`` grid points.
        t: Simulated time.
        eps_qsp: Target error of the QSP selector.
        aa_rounds: ``None`` for automatic choice, or a fixed count.
        eps_lchs: Target truncation error, used only by ``suggest_nk``.
    """

    kernel: Kernel = Kernel.IMPROVED
    beta: float = 0.7
    k_max: float = 10.0
    n_k: int = 6
    t: float = 0.4
    eps_qsp: float = 1e-8
    aa_rounds: int | None = None
    eps_lchs: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        if self.kernel is Kernel.IMPROVED and not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.k_max > 0:
            raise ValueError(f"k_max must be positive, got {self.k_max}")
        if self.n_k < 1:
            raise ValueError(f"n_k must be >= 1, got {self.n_k}")
        if self.t < 0:
            raise ValueError(f"t must be >= 0, got {self.t}")
        if not 0.0 < self.eps_qsp < 1.0:
            raise ValueError(f"eps_qsp must lie in (0, 1), got {self.eps_qsp}")
        if self.aa_rounds is not None and self.aa_rounds < 0:
            raise ValueError("aa_rounds must be >= 0")

    @property
    def n_grid(self) -> int:
        return 1 << self.n_k

    @property
    def dk(self) -> float:
        """Spacing of k near theta = 0, i.e. ``k_max * dtheta``."""
        return self.k_max * math.pi / (self.n_grid - 1)

    def with_(self, **kw) -> "LchsConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class WeightSet:
    weights: np.ndarray
    thetas: np.ndarray
    ks: np.ndarray

    def __post_init__(self):
        n = len(self.weights)
        if len(self.thetas) != n or len(self.ks) != n:
            raise ValueError("weights, thetas and ks must have equal length")

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def abs_sum(self) -> float:
        return float(np.sum(np.abs(self.weights)))


def kernel_special(k):
    """Cauchy-type kernel ``1/(pi (1 + ik))``."""
    k = np.asarray(k, dtype=float)
    return 1.0 / (np.pi * (1.0 + 1j * k))


def kernel_improved(k, beta: float):
    """Improved kernel ``1/(2 pi e^{-2^beta} exp((1+ik)^beta))``.

    The complex power uses the principal branch, which is continuous on the
    line ``1 + ik``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    k = np.asarray(k, dtype=float)
    z = np.power(1.0 + 1j * k, beta)
    return np.exp(2.0**beta - z) / (2 * np.pi)


def kernel_value(cfg: LchsConfig, k):
    if cfg.kernel is Kernel.SPECIAL:
        return kernel_special(k)
    return kernel_improved(k, cfg.beta)


def theta_grid(n_k: int, k_max: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Uniform angles over [-pi/2, pi/2] and ``k_j = k_max sin theta_j``."""
    if n_k < 1:
        raise ValueError("n_k must be >= 1")
    N = 1 << n_k
    j = np.arange(N)
    thetas = -np.pi / 2 + j * (np.pi / (N - 1))
    thetas[-1] = np.pi / 2
    return thetas, k_max * np.sin(thetas)


def compute_weights(cfg: LchsConfig) -> WeightSet:
    """Complex LCU weights ``w_j = k_max cos(theta_j) dtheta xi(k_j) / (1 - i k_j)``."""
    thetas, ks = theta_grid(cfg.n_k, cfg.k_max)
    dth = np.pi / (cfg.n_grid - 1)
    cos = np.cos(thetas)
    cos[[0, -1]] = 0.0
    w = cfg.k_max * cos * dth * kernel_value(cfg, ks) / (1.0 - 1j * ks)
    if cfg.kernel is Kernel.SPECIAL:
        # xi_sp(k)/(1-ik) = 1/(pi(1+k^2)) is real
        w = w.real.astype(complex)
    return WeightSet(weights=w, thetas=thetas, ks=ks)


def c_matrices(A, cfg: LchsConfig, thetas: np.ndarray | None = None) -> np.ndarray:
    """Stack of ``C_j = A_H + sin(theta_j) k_max A_L``, shape ``(N_k, N, N)``."""
    A_L, A_H = hermitian_split(A)
    if thetas is None:
        thetas, _ = theta_grid(cfg.n_k)
    s = np.sin(thetas) * cfg.k_max
    return A_H[None, :, :] + s[:, None, None] * A_L[None, :, :]


def lchs_terms(A, psi0, cfg: LchsConfig) -> np.ndarray:
    """Vectors ``exp(-i C_j t) psi0`` for every j, shape ``(N_k, N)``."""
    A = as_square(A)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (A.shape[0],):
        raise ValueError(f"psi0 has shape {psi0.shape}, expected ({A.shape[0]},)")
    if cfg.t == 0:
        # every V_j is the identity
        return np.tile(psi0, (cfg.n_grid, 1))
    A_L, A_H = hermitian_split(A)
    thetas, _ = theta_grid(cfg.n_k)
    s = np.sin(thetas) * cfg.k_max
    out = np.empty((len(s), len(psi0)), dtype=complex)
    for lo in range(0, len(s), _CHUNK):
        sl = s[lo : lo + _CHUNK]
        C = A_H[None] + sl[:, None, None] * A_L[None]
        e, V = np.linalg.eigh(C)
        coef = np.einsum("bji,j->bi", V.conj(), psi0) * np.exp(-1j * e * cfg.t)
        out[lo : lo + _CHUNK] = np.einsum("bij,bj->bi", V, coef)
    return out


def classical_lchs_apply(A, psi0, cfg: LchsConfig, weights: WeightSet | None = None) -> np.ndarray:
    """Brute-force discretized LCHS ``sum_j w_j exp(-i C_j t) psi0``.

    Args:
        A: Generator with ``dpsi/dt = -A psi``.
        psi0: Initial vector.
        cfg: Method configuration.
        weights: Precomputed weights; computed from ``cfg`` if omitted.

    Returns:
        The (unnormalized) approximation of ``exp(-A t) psi0``.
    """
    w = compute_weights(cfg) if weights is None else weights
    if cfg.t == 0:
        # V_j = I, so skip the (N_k, N) stack of copies
        as_square(A)
        return np.sum(w.weights) * np.asarray(psi0, dtype=complex)
    terms = lchs_terms(A, psi0, cfg)
    # ordered reduction so the result does not depend on chunking
    return np.sum(w.weights[:, None] * terms, axis=0)


def suggest_nk(cfg: LchsConfig, norm_AL: float, c: float = 1.0, eps: float | None = None) -> int:
    """Smallest ``n_k`` with ``2**n_k >= c eps^{-1/2} k_max^{3/2} ||A_L|| t``."""
    eps = cfg.eps_lchs if eps is None else eps
    if eps is None or eps <= 0:
        raise ValueError("a positive target eps_lchs is required")
    bound = nk_bound(cfg.k_max, norm_AL, cfg.t, eps, c)
    n = 1
    while (1 << n) < bound:
        n += 1
    return n


def nk_bound(k_max: float, norm_AL: float, t: float, eps: float, c: float = 1.0) -> float:
    return c * eps**-0.5 * k_max**1.5 * norm_AL * t


def nk_for_dk(k_max: float, dk: float) -> int:
    """Smallest ``n_k`` whose grid spacing near theta = 0 is at most ``dk``."""
    n = 1
    while k_max * math.pi / ((1 << n) - 1) > dk:
        n += 1
    return n
