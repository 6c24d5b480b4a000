"""Pseudo-posterior ``rho_lambda(M) ~ exp(-lambda * r(M)) * pi(M)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import Dataset, empirical_risk
from .prior import PriorConfig, grad_log_prior, log_prior_logdet


@dataclass(frozen=True)
class PosteriorSpec:
    data: Dataset
    prior: PriorConfig
    lam: float
    iterative_resolvent: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape.as_tuple()


def log_posterior_unnorm(spec: PosteriorSpec, M: np.ndarray) -> float:
    return -spec.lam * empirical_risk(M, spec.data) + log_prior_logdet(M, spec.prior)


def _data_grad(spec: PosteriorSpec, M: np.ndarray) -> np.ndarray:
    mask = spec.data.mask
    g = np.zeros_like(M)
    g[mask.rows, mask.cols] = spec.data.y - M[mask.rows, mask.cols]
    g *= 2.0 * spec.lam / spec.data.n
    return g


def grad_log_posterior(spec: PosteriorSpec, M: np.ndarray) -> np.ndarray:
    """Ascent direction ``(2 lambda / n) P_Omega(Y - M) + grad log pi(M)``."""
    M = np.asarray(M, dtype=np.float64)
    if M.shape != spec.shape:
        raise ValueError(f"matrix has shape {M.shape}, expected {spec.shape}")
    return _data_grad(spec, M) + grad_log_prior(M, spec.prior, iterative=spec.iterative_resolvent)


def value_and_grad(spec: PosteriorSpec, M: np.ndarray) -> tuple[float, np.ndarray]:
    """Log-density and gradient sharing one Cholesky factorization.

    Used by the samplers; returns ``-inf`` and a NaN gradient when the state
    is not finite.
    """
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        return -np.inf, np.full_like(M, np.nan)
    m, p = M.shape
    G = M @ M.T
    G[np.diag_indices_from(G)] += spec.prior.tau**2
    try:
        c = linalg.cho_factor(G, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return -np.inf, np.full_like(M, np.nan)
    logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
    mask = spec.data.mask
    resid = spec.data.y - M[mask.rows, mask.cols]
    logp = -spec.lam * float(resid @ resid) / spec.data.n - 0.5 * (p + m + 2) * logdet
    if spec.iterative_resolvent:
        grad = grad_log_prior(M, spec.prior, iterative=True)
    else:
        grad = -(p + m + 2) * linalg.cho_solve(c, M, check_finite=False)
    grad[mask.rows, mask.cols] += (2.0 * spec.lam / spec.data.n) * resid
    return float(logp), grad


def finite_diff_grad_check(spec: PosteriorSpec, M: np.ndarray, eps: float = 1e-5) -> float:
    """Max over entries of ``|analytic - central difference| / (1 + |analytic|)``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    M = np.array(M, dtype=np.float64)
    analytic = grad_log_posterior(spec, M)
    numeric = np.empty_like(M)
    for idx in np.ndindex(*M.shape):
        orig = M[idx]
        M[idx] = orig + eps
        up = log_posterior_unnorm(spec, M)
        M[idx] = orig - eps
        down = log_posterior_unnorm(spec, M)
        M[idx] = orig
        numeric[idx] = (up - down) / (2.0 * eps)
    return float(np.max(np.abs(analytic - numeric) / (1.0 + np.abs(analytic))))
