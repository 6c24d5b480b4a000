"""Synthetic benchmarks, uniform masking, noise, and chain initializers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, Mask, Shape


@dataclass(frozen=True)
class SynthConfig:
    m: int
    p: int
    r: int
    upsilon: float
    noise_sd: float = 1.0
    setting: int = 1
    seed: int = 0

    def __post_init__(self):
        Shape(self.m, self.p)
        if not 1 <= self.r <= min(self.m, self.p):
            raise ValueError(f"rank {self.r} must lie in [1, min(m, p)]")
        if not 0.0 <= self.upsilon < 1.0:
            raise ValueError("missing rate must lie in [0, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if self.setting not in (1, 2):
            raise ValueError("setting must be 1 or 2")


def _seed_streams(seed) -> list[np.random.SeedSequence]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(3)


def gen_setting1(cfg: SynthConfig, seed=None):
    """Exact rank-r truth ``U V^T`` with i.i.d. N(0, 1) factors.

    Returns ``(truth, (U, V))``.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    U = rng.standard_normal((cfg.m, cfg.r))
    V = rng.standard_normal((cfg.p, cfg.r))
    return U @ V.T, (U, V)


def gen_setting2(cfg: SynthConfig, seed=None, weight: float = 0.1, width: int = 50) -> np.ndarray:
    """Approximately rank-r truth ``U V^T + weight * A B^T`` with A: m x width, B: p x width."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    U = rng.standard_normal((cfg.m, cfg.r))
    V = rng.standard_normal((cfg.p, cfg.r))
    A = rng.standard_normal((cfg.m, width))
    B = rng.standard_normal((cfg.p, width))
    return U @ V.T + weight * (A @ B.T)


def gen_mask_uniform(shape: Shape, upsilon: float, seed) -> Mask:
    """Exactly ``round((1 - upsilon) m p)`` distinct entries, uniformly without replacement."""
    if not 0.0 <= upsilon < 1.0:
        raise ValueError("missing rate must lie in [0, 1)")
    total = shape.size
    n = int(round((1.0 - upsilon) * total))
    if n < 1:
        raise ValueError(f"missing rate {upsilon} leaves no observed entries")
    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(total, size=n, replace=False))
    return Mask(shape, flat // shape.p, flat % shape.p)


def add_noise(truth: np.ndarray, mask: Mask, noise_sd: float, seed) -> Dataset:
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(mask.n)
    y = truth[mask.rows, mask.cols] + noise_sd * z
    return Dataset(mask, y, truth=truth)


def make_dataset(cfg: SynthConfig) -> Dataset:
    """Truth, mask and noisy observations, each from its own child stream of ``cfg.seed``."""
    s_truth, s_mask, s_noise = _seed_streams(cfg.seed)
    if cfg.setting == 1:
        truth, _ = gen_setting1(cfg, seed=s_truth)
    else:
        truth = gen_setting2(cfg, seed=s_truth)
    mask = gen_mask_uniform(Shape(cfg.m, cfg.p), cfg.upsilon, s_mask)
    return add_noise(truth, mask, cfg.noise_sd, s_noise)


def svt(X: np.ndarray, shrink: float) -> np.ndarray:
    """Soft-threshold the singular values of X by ``shrink``."""
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    s = np.maximum(s - shrink, 0.0)
    keep = s > 0
    return (u[:, keep] * s[keep]) @ vt[keep]


def soft_impute_objective(Z: np.ndarray, data: Dataset, shrink: float) -> float:
    resid = data.y - Z[data.mask.rows, data.mask.cols]
    nuc = np.sum(np.linalg.svd(Z, compute_uv=False))
    return 0.5 * float(resid @ resid) + shrink * float(nuc)


def default_shrink(shape: Shape, sigma: float) -> float:
    return 2.5 * sigma * np.sqrt(max(shape.m, shape.p))


def soft_impute_init(data: Dataset, shrink: Optional[float] = None, iters: int = 100,
                     tol: float = 1e-4, sigma: float = 1.0, trace: Optional[list] = None) -> np.ndarray:
    """SoftImpute: ``Z <- SVT(P_Omega(Y) + P_Omega_bar(Z))`` from ``Z = 0``.

    Stops after ``iters`` sweeps or once successive iterates differ by less
    than ``tol`` in relative Frobenius norm.  When ``trace`` is a list, the
    objective value after each sweep is appended to it.
    """
    if shrink is None:
        shrink = default_shrink(data.shape, sigma)
    if shrink < 0:
        raise ValueError("shrink must be nonnegative")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    rows, cols = data.mask.rows, data.mask.cols
    Z = np.zeros(data.shape.as_tuple())
    for _ in range(iters):
        filled = Z.copy()
        filled[rows, cols] = data.y
        try:
            Z_new = svt(filled, shrink)
        except np.linalg.LinAlgError as exc:
            raise FloatingPointError(f"SVD failed inside SoftImpute: {exc}") from exc
        if trace is not None:
            trace.append(soft_impute_objective(Z_new, data, shrink))
        denom = max(np.linalg.norm(Z), 1e-300)
        delta = np.linalg.norm(Z_new - Z) / denom
        Z = Z_new
        if delta < tol:
            break
    return Z


def column_mean_fill(data: Dataset) -> np.ndarray:
    """Fill each unobserved entry with its column's observed mean (global mean if none)."""
    m, p = data.shape.as_tuple()
    obs = data.mask.to_bool()
    counts = obs.sum(axis=0)
    sums = data.y_full.sum(axis=0)
    global_mean = float(data.y.mean())
    col_means = np.where(counts > 0, sums / np.maximum(counts, 1), global_mean)
    out = np.tile(col_means, (m, 1))
    out[obs] = data.y_full[obs]
    return out


def smooth_image(size: int = 128) -> np.ndarray:
    """Deterministic smooth grayscale test image with values in [0, 255]."""
    t = np.linspace(0.0, 1.0, size)
    x, y = t[None, :], t[:, None]
    img = (
        70.0
        + 60.0 * x
        + 40.0 * np.sin(2.0 * np.pi * y) * np.cos(np.pi * x)
        + 90.0 * np.exp(-((x - 0.3) ** 2 + (y - 0.35) ** 2) / 0.02)
        + 60.0 * np.exp(-((x - 0.7) ** 2) / 0.01 - ((y - 0.7) ** 2) / 0.04)
    )
    return np.clip(img, 0.0, 255.0)
