"""Spectral scaled Student prior ``pi(M) ~ det(tau^2 I_m + M M^T)^{-(p+m+2)/2}``.

All densities are unnormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual norm {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class PriorConfig:
    tau: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def _exponent(M: np.ndarray) -> float:
    m, p = M.shape
    return (p + m + 2) / 2.0


def _gram(M: np.ndarray, tau: float) -> np.ndarray:
    G = M @ M.T
    G[np.diag_indices_from(G)] += tau * tau
    return G


def log_prior_logdet(M: np.ndarray, cfg: PriorConfig) -> float:
    """``-(p+m+2)/2 * log det(tau^2 I + M M^T)`` via a Cholesky factor."""
    M = np.asarray(M, dtype=np.float64)
    try:
        c, _ = linalg.cho_factor(_gram(M, cfg.tau), lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise FloatingPointError(f"log-prior is not finite: {exc}") from exc
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    if not np.isfinite(logdet):
        raise FloatingPointError("log-prior is not finite")
    return float(-_exponent(M) * logdet)


def log_prior_singular(M: np.ndarray, cfg: PriorConfig) -> float:
    """Same density as :func:`log_prior_logdet`, summed over singular values.

    When m > p the spectrum is padded with m - p zeros so that the sum runs
    over the m eigenvalues of ``tau^2 I_m + M M^T``.
    """
    M = np.asarray(M, dtype=np.float64)
    m = M.shape[0]
    s = np.linalg.svd(M, compute_uv=False)
    s = np.concatenate([s, np.zeros(m - s.size)])
    val = -_exponent(M) * np.sum(np.log(cfg.tau**2 + s * s))
    if not np.isfinite(val):
        raise FloatingPointError("log-prior is not finite")
    return float(val)


def resolvent_direct(M: np.ndarray, tau: float) -> np.ndarray:
    """``(tau^2 I + M M^T)^{-1} M`` by an SPD solve."""
    M = np.asarray(M, dtype=np.float64)
    return linalg.solve(_gram(M, tau), M, assume_a="pos", check_finite=False)


def ridge_resolvent(M: np.ndarray, cfg: PriorConfig, tol: float = 1e-13,
                    max_iter: int | None = None) -> np.ndarray:
    """Solve ``min_B ||I_p - M^T B||_F^2 + tau^2 ||B||_F^2`` without forming an inverse.

    The minimizer is ``(tau^2 I + M M^T)^{-1} M``. Its normal equations are
    solved by conjugate gradients run independently on every column of B,
    using only products with M and M^T.
    """
    M = np.asarray(M, dtype=np.float64)
    m, p = M.shape
    tau2 = cfg.tau**2
    if max_iter is None:
        max_iter = 20 * m + 100

    def apply(X):
        return M @ (M.T @ X) + tau2 * X

    B = np.zeros_like(M)
    R = M.copy()
    rhs_norm = np.linalg.norm(M, axis=0)
    if not np.any(rhs_norm):
        return B
    P = R.copy()
    rs = np.sum(R * R, axis=0)
    thresh = (tol * np.maximum(rhs_norm, 1e-300)) ** 2
    for _ in range(max_iter):
        active = rs > thresh
        if not np.any(active):
            return B
        AP = apply(P)
        pap = np.sum(P * AP, axis=0)
        step = np.where(active, rs / np.where(active, pap, 1.0), 0.0)
        B += step * P
        R -= step * AP
        rs_new = np.sum(R * R, axis=0)
        beta = np.where(active, rs_new / np.where(active, rs, 1.0), 0.0)
        P = R + beta * P
        rs = rs_new
    residual = float(np.linalg.norm(apply(B) - M))
    if np.all(rs <= thresh):
        return B
    raise ConvergenceError(f"ridge resolvent did not converge in {max_iter} iterations", residual)


def grad_log_prior(M: np.ndarray, cfg: PriorConfig, iterative: bool = False) -> np.ndarray:
    """``-(p+m+2) (tau^2 I + M M^T)^{-1} M``.

    ``iterative=True`` swaps the SPD solve for :func:`ridge_resolvent`.
    """
    M = np.asarray(M, dtype=np.float64)
    m, p = M.shape
    try:
        B = ridge_resolvent(M, cfg) if iterative else resolvent_direct(M, cfg.tau)
    except linalg.LinAlgError as exc:
        raise FloatingPointError(f"prior gradient solve failed: {exc}") from exc
    return -(p + m + 2) * B
