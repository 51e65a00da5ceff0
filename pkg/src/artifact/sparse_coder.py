"""Semantic-aware sparse coding by proximal gradient with backtracking.

Minimises

    E(a) = 1/2 ||f - B a||^2 + beta ||a||_1 + gamma/2 a^T Lam a

over the coefficient vector ``a``. Reconstruction and majorisation norms
are squared L2 throughout.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """Solver produced a non-finite energy."""


class RetrievalError(ValueError):
    """No database image received a positive coefficient."""


@dataclass(frozen=True)
class CoderConfig:
    beta: float = 0.1
    gamma: float = 0.2
    sigma: float = 1e-5
    max_iters: int = 1000
    L0: float = 1.0
    L_growth: float = 2.0
    nu: float = 1.0
    init: str = "zero"  # or "random"
    seed: int = 0

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be nonnegative")
        if self.sigma <= 0 or self.L0 <= 0:
            raise ValueError("sigma and L0 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.L_growth <= 1:
            raise ValueError("L_growth must exceed 1")
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        if self.init not in ("zero", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class SemanticCode:
    alpha: np.ndarray
    energy_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    lipschitz: float = 0.0


@dataclass(frozen=True)
class ReferenceSet:
    indices: tuple
    weights: tuple
    alpha_masked: np.ndarray

    def __len__(self):
        return len(self.indices)


def prox_l1(v, t):
    """Soft thresholding: sign(v) * max(|v| - t, 0)."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _matrix(B):
    return getattr(B, "matrix", B)


def energy_alpha(alpha, F_t, B, Lam, config):
    alpha = np.asarray(alpha, dtype=np.float64)
    B = np.asarray(_matrix(B), dtype=np.float64)
    F_t = np.asarray(F_t, dtype=np.float64)
    Lam = np.asarray(Lam, dtype=np.float64)
    if B.shape != (F_t.shape[0], alpha.shape[0]) or Lam.shape != (alpha.shape[0],) * 2:
        raise ValueError(f"dimension mismatch: B {B.shape}, F {F_t.shape}, alpha {alpha.shape}, Lam {Lam.shape}")
    r = F_t - B @ alpha
    return 0.5 * r @ r + config.beta * np.abs(alpha).sum() + 0.5 * config.gamma * alpha @ Lam @ alpha


def solve_code(F_t, B, Lam, config=CoderConfig(), alpha0=None):
    """Run the backtracking proximal-gradient iteration from ``alpha0``.

    Without ``alpha0`` the start is zero, or a seeded Gaussian draw when
    ``config.init == "random"``.
    """
    B = np.asarray(_matrix(B), dtype=np.float64)
    F_t = np.asarray(F_t, dtype=np.float64)
    Lam = np.asarray(Lam, dtype=np.float64)
    m, n = B.shape
    if F_t.shape != (m,) or Lam.shape != (n, n):
        raise ValueError(f"dimension mismatch: B {B.shape}, F {F_t.shape}, Lam {Lam.shape}")

    # g(a) = 1/2 a^T G a - c^T a + f0 and grad g(a) = G a - c
    G = B.T @ B + config.gamma * Lam
    c = B.T @ F_t
    f0 = 0.5 * F_t @ F_t
    beta = config.beta

    if alpha0 is not None:
        alpha = np.array(alpha0, dtype=np.float64)
    elif config.init == "random":
        alpha = np.random.default_rng(config.seed).normal(scale=1.0 / np.sqrt(n), size=n)
    else:
        alpha = np.zeros(n)

    Ga = G @ alpha
    g = 0.5 * alpha @ Ga - c @ alpha + f0
    energy = g + beta * np.abs(alpha).sum()
    if not np.isfinite(energy):
        raise NumericalError("non-finite initial energy")
    trace = [float(energy)]
    L = config.L0
    converged = False
    it = 0
    while it < config.max_iters:
        it += 1
        grad = Ga - c
        for _ in range(200):
            z = prox_l1(alpha - grad / L, beta / L)
            d = z - alpha
            Gz = G @ z
            g_z = 0.5 * z @ Gz - c @ z + f0
            bound = g + grad @ d + 0.5 * L * (d @ d)
            if g_z <= bound + 1e-12 * max(1.0, abs(g)):
                break
            L *= config.L_growth
        else:
            raise NumericalError("backtracking failed to find a valid step size")

        if config.nu == 1.0:
            new, G_new, g_new = z, Gz, g_z
        else:
            new = alpha + config.nu * d
            G_new = G @ new
            g_new = 0.5 * new @ G_new - c @ new + f0
        energy = g_new + beta * np.abs(new).sum()
        if not np.isfinite(energy):
            raise NumericalError("non-finite energy; check feature and constraint scaling")
        step = np.linalg.norm(new - alpha)
        alpha, Ga, g = new, G_new, g_new
        trace.append(float(energy))
        if step <= config.sigma:
            converged = True
            break
    if not converged:
        log.warning("sparse coding stopped at max_iters=%d without converging", config.max_iters)
    return SemanticCode(alpha, trace, it, converged, L)


def select_references(code, p=10, threshold=0.0, exclude=()):
    """Top-``p`` coefficients above ``threshold``, largest first.

    Indices in ``exclude`` are never selected. Ties keep the lower index.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    alpha = np.asarray(getattr(code, "alpha", code), dtype=np.float64)
    eligible = alpha > threshold
    for k in exclude:
        eligible[k] = False
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        raise RetrievalError("no references retrieved")
    idx = idx[np.argsort(-alpha[idx], kind="stable")][:p]
    masked = np.zeros_like(alpha)
    masked[idx] = alpha[idx]
    return ReferenceSet(tuple(int(i) for i in idx), tuple(float(alpha[i]) for i in idx), masked)
