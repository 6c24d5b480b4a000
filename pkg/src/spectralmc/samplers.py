"""MCMC kernels: unadjusted Langevin (LMC), Metropolis-adjusted Langevin (MALA)
and a Gibbs sampler for a low-rank factorization baseline.

Langevin kernels use the ascent convention

    M_{k+1} = M_k + h * grad log rho(M_k) + sqrt(2h) * W_k

and the posterior mean is the average of the iterates kept after burn-in.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset
from .posterior import PosteriorSpec, grad_log_posterior, log_posterior_unnorm, value_and_grad

logger = logging.getLogger(__name__)

DIVERGENCE_GUARD = 1e8


class GibbsError(RuntimeError):
    pass


@dataclass(frozen=True)
class LmcConfig:
    h: float
    T: int = 200
    burnin: int = 100
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step size must be positive, got {self.h}")
        if not 0 <= self.burnin < self.T:
            raise ValueError(f"need 0 <= burnin < T, got burnin={self.burnin}, T={self.T}")


@dataclass(frozen=True)
class GibbsConfig:
    K: int = 10
    a: float = 1.0
    b: float = 0.01
    T: int = 200
    burnin: int = 100
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be positive")
        if not 0 <= self.burnin < self.T:
            raise ValueError(f"need 0 <= burnin < T, got burnin={self.burnin}, T={self.T}")


@dataclass
class ChainResult:
    mean: np.ndarray
    accept_rate: float
    diverged: bool
    iterates_kept: int
    iterates: Optional[list] = None
    steps_run: int = 0


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    # Separate streams for Gaussian noise and MH uniforms, so LMC and MALA
    # with the same seed share their noise sequence.
    noise_ss, unif_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(noise_ss), np.random.default_rng(unif_ss)


def _out_of_bounds(M: np.ndarray) -> bool:
    return not np.all(np.isfinite(M)) or np.max(np.abs(M)) > DIVERGENCE_GUARD


def lmc_step(spec: PosteriorSpec, M_k: np.ndarray, h: float, noise: np.ndarray) -> np.ndarray:
    return M_k + h * grad_log_posterior(spec, M_k) + np.sqrt(2.0 * h) * noise


def mala_propose(spec: PosteriorSpec, M_k: np.ndarray, h: float, noise: np.ndarray) -> np.ndarray:
    return lmc_step(spec, M_k, h, noise)


def _log_q(to, frm, grad_frm, h) -> float:
    d = to - frm - h * grad_frm
    return -float(np.sum(d * d)) / (4.0 * h)


def mala_log_q(spec: PosteriorSpec, to: np.ndarray, frm: np.ndarray, h: float) -> float:
    """Unnormalized log transition density of the Langevin proposal ``frm -> to``."""
    if not h > 0:
        raise ValueError("step size must be positive")
    return _log_q(to, frm, grad_log_posterior(spec, frm), h)


def _accept_prob(logp_cur, logp_prop, log_q_back, log_q_fwd) -> float:
    if not (np.isfinite(logp_prop) and np.isfinite(log_q_back)):
        return 0.0
    log_ratio = logp_prop + log_q_back - logp_cur - log_q_fwd
    if np.isnan(log_ratio):
        return 0.0
    return float(np.exp(min(0.0, log_ratio)))


def mala_accept_prob(spec: PosteriorSpec, current: np.ndarray, proposal: np.ndarray,
                     h: float) -> float:
    try:
        logp_prop = log_posterior_unnorm(spec, proposal)
        log_q_back = mala_log_q(spec, current, proposal, h)
    except (FloatingPointError, ValueError):
        return 0.0
    return _accept_prob(log_posterior_unnorm(spec, current), logp_prop, log_q_back,
                        mala_log_q(spec, proposal, current, h))


class _Averager:
    def __init__(self, shape, burnin, keep):
        self.total = np.zeros(shape)
        self.count = 0
        self.burnin = burnin
        self.iterates = [] if keep else None

    def push(self, k, M):
        if k > self.burnin:
            self.total += M
            self.count += 1
            if self.iterates is not None:
                self.iterates.append(M.copy())

    def mean(self):
        if self.count == 0:
            return np.full_like(self.total, np.nan)
        return self.total / self.count


def run_lmc(spec: PosteriorSpec, cfg: LmcConfig, init: np.ndarray) -> ChainResult:
    """Unadjusted Langevin chain; iterates ``k = burnin+1 .. T`` are averaged."""
    M = np.array(init, dtype=np.float64)
    if M.shape != spec.shape:
        raise ValueError(f"init has shape {M.shape}, expected {spec.shape}")
    noise_rng, _ = _streams(cfg.seed)
    avg = _Averager(M.shape, cfg.burnin, cfg.keep_iterates)
    scale = np.sqrt(2.0 * cfg.h)
    diverged = False
    k = 0
    for k in range(1, cfg.T + 1):
        W = noise_rng.standard_normal(M.shape)
        _, g = value_and_grad(spec, M)
        M = M + cfg.h * g + scale * W
        if _out_of_bounds(M):
            diverged = True
            logger.warning("LMC diverged at iteration %d (h=%g); try a smaller step", k, cfg.h)
            break
        avg.push(k, M)
    return ChainResult(avg.mean(), 1.0, diverged, avg.count, avg.iterates, k)


def run_mala(spec: PosteriorSpec, cfg: LmcConfig, init: np.ndarray) -> ChainResult:
    """Metropolis-adjusted Langevin chain; acceptance is counted after burn-in."""
    M = np.array(init, dtype=np.float64)
    if M.shape != spec.shape:
        raise ValueError(f"init has shape {M.shape}, expected {spec.shape}")
    noise_rng, unif_rng = _streams(cfg.seed)
    avg = _Averager(M.shape, cfg.burnin, cfg.keep_iterates)
    h = cfg.h
    scale = np.sqrt(2.0 * h)
    logp, g = value_and_grad(spec, M)
    if not np.isfinite(logp):
        raise ValueError("initial state has non-finite posterior density")
    accepted = 0
    diverged = False
    k = 0
    for k in range(1, cfg.T + 1):
        W = noise_rng.standard_normal(M.shape)
        u = unif_rng.random()
        prop = M + h * g + scale * W
        if _out_of_bounds(prop):
            alpha = 0.0
        else:
            logp_prop, g_prop = value_and_grad(spec, prop)
            alpha = _accept_prob(logp, logp_prop, _log_q(M, prop, g_prop, h),
                                 _log_q(prop, M, g, h))
        if u < alpha:
            M, logp, g = prop, logp_prop, g_prop
            if k > cfg.burnin:
                accepted += 1
        avg.push(k, M)
    rate = accepted / max(avg.count, 1)
    return ChainResult(avg.mean(), rate, diverged, avg.count, avg.iterates, k)


def _sample_rows(obs, Y, F, inv_gamma, inv_sigma2, rng):
    """Draw every row of one factor from its Gaussian full conditional.

    ``obs`` is the (rows x others) boolean observation pattern and ``F`` the
    other factor.  Precision of row i is diag(1/gamma) + sum_j obs_ij F_j F_j^T / sigma2.
    """
    K = F.shape[1]
    outer = (F[:, :, None] * F[:, None, :]).reshape(F.shape[0], K * K)
    prec = (obs @ outer).reshape(-1, K, K) * inv_sigma2
    prec[:, np.arange(K), np.arange(K)] += inv_gamma
    rhs = (Y @ F) * inv_sigma2
    L = np.linalg.cholesky(prec)
    mu = np.linalg.solve(prec, rhs[:, :, None])[:, :, 0]
    z = rng.standard_normal(rhs.shape)
    dev = np.linalg.solve(np.swapaxes(L, 1, 2), z[:, :, None])[:, :, 0]
    return mu + dev


def gibbs_default_init(data: Dataset, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank-K factors from the SVD of the rescaled zero-filled observations."""
    m, p = data.shape.as_tuple()
    Y = data.y_full * (m * p / data.n)
    u, s, vt = np.linalg.svd(Y, full_matrices=False)
    root = np.sqrt(s[:K])
    return u[:, :K] * root, vt[:K].T * root


def run_gibbs(data: Dataset, cfg: GibbsConfig, sigma2: float,
              init: Optional[tuple[np.ndarray, np.ndarray]] = None) -> ChainResult:
    """Gibbs sampler for ``M = U V^T`` with column variances ``gamma_k ~ InvGamma(a, b)``.

    Observations are modelled as ``Y_ij ~ N((U V^T)_ij, sigma2)`` on the mask;
    the columns ``U_k`` and ``V_k`` share the prior ``N(0, gamma_k I)``.
    """
    m, p = data.shape.as_tuple()
    K = cfg.K
    if K > min(m, p):
        raise ValueError(f"K={K} exceeds min(m, p)={min(m, p)}")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    rng = np.random.default_rng(cfg.seed)
    U, V = init if init is not None else gibbs_default_init(data, K)
    U = np.array(U, dtype=np.float64)
    V = np.array(V, dtype=np.float64)
    if U.shape != (m, K) or V.shape != (p, K):
        raise ValueError("initial factors have the wrong shape")
    obs = data.mask.to_bool().astype(np.float64)
    Y = data.y_full
    inv_sigma2 = 1.0 / sigma2
    gamma = np.ones(K)
    shape_post = cfg.a + 0.5 * (m + p)
    avg = _Averager((m, p), cfg.burnin, cfg.keep_iterates)
    diverged = False
    t = 0
    for t in range(1, cfg.T + 1):
        try:
            U = _sample_rows(obs, Y, V, 1.0 / gamma, inv_sigma2, rng)
            V = _sample_rows(obs.T, Y.T, U, 1.0 / gamma, inv_sigma2, rng)
        except np.linalg.LinAlgError as exc:
            raise GibbsError(f"row-conditional solve failed at iteration {t}: {exc}") from exc
        scale_post = cfg.b + 0.5 * (np.sum(U * U, axis=0) + np.sum(V * V, axis=0))
        gamma = scale_post / rng.gamma(shape_post, size=K)
        M = U @ V.T
        if _out_of_bounds(M):
            diverged = True
            break
        avg.push(t, M)
    return ChainResult(avg.mean(), 1.0, diverged, avg.count, avg.iterates, t)
