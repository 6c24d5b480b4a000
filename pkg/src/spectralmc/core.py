"""Observation model, masked projection, norms and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when a metric has an empty support (e.g. Pred on a full mask)."""


@dataclass(frozen=True)
class Shape:
    m: int
    p: int

    def __post_init__(self):
        if int(self.m) < 1 or int(self.p) < 1:
            raise ValueError(f"shape must be positive, got {self.m}x{self.p}")

    @property
    def size(self) -> int:
        return self.m * self.p

    def as_tuple(self) -> tuple[int, int]:
        return (self.m, self.p)


@dataclass(frozen=True)
class Mask:
    """Set of observed (i, j) positions, 0-based, in a fixed order."""

    shape: Shape
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise ValueError("rows and cols must have equal length")
        if rows.size == 0:
            raise ValueError("mask must contain at least one entry")
        m, p = self.shape.m, self.shape.p
        if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= p:
            raise ValueError(f"mask index out of range for shape {m}x{p}")
        flat = rows * p + cols
        if np.unique(flat).size != flat.size:
            raise ValueError("mask contains duplicate entries")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def from_bool(cls, observed: np.ndarray) -> "Mask":
        observed = np.asarray(observed, dtype=bool)
        rows, cols = np.nonzero(observed)
        return cls(Shape(*observed.shape), rows, cols)

    @classmethod
    def full(cls, shape: Shape) -> "Mask":
        return cls.from_bool(np.ones(shape.as_tuple(), dtype=bool))

    @property
    def n(self) -> int:
        return int(self.rows.size)

    def to_bool(self) -> np.ndarray:
        out = np.zeros(self.shape.as_tuple(), dtype=bool)
        out[self.rows, self.cols] = True
        return out


@dataclass(frozen=True)
class Dataset:
    """Noisy observations ``y`` on ``mask``, with optional truth and sampling weights."""

    mask: Mask
    y: np.ndarray
    truth: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    _y_full: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if y.size != self.mask.n:
            raise ValueError(f"expected {self.mask.n} observations, got {y.size}")
        object.__setattr__(self, "y", y)
        shape = self.mask.shape.as_tuple()
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=np.float64)
            if truth.shape != shape:
                raise ValueError(f"truth has shape {truth.shape}, expected {shape}")
            object.__setattr__(self, "truth", truth)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != shape:
                raise ValueError(f"weights have shape {w.shape}, expected {shape}")
            if np.any(w < 0):
                raise ValueError("sampling weights must be nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"sampling weights must sum to 1, got {w.sum()!r}")
            object.__setattr__(self, "weights", w)
        y_full = np.zeros(shape)
        y_full[self.mask.rows, self.mask.cols] = y
        y_full.setflags(write=False)
        object.__setattr__(self, "_y_full", y_full)

    @property
    def shape(self) -> Shape:
        return self.mask.shape

    @property
    def n(self) -> int:
        return self.mask.n

    @property
    def y_full(self) -> np.ndarray:
        """Observations zero-filled to the full m x p grid."""
        return self._y_full


@dataclass
class EvalReport:
    mse: float
    nmse: float
    pred: Optional[float]
    est_rank: int
    runtime_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "mse": self.mse,
            "nmse": self.nmse,
            "pred": self.pred,
            "est_rank": self.est_rank,
            "runtime_seconds": self.runtime_seconds,
        }


def _check_shape(M: np.ndarray, shape: Shape) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.shape != shape.as_tuple():
        raise ValueError(f"matrix has shape {M.shape}, expected {shape.as_tuple()}")
    return M


def project_omega(M: np.ndarray, mask: Mask) -> np.ndarray:
    """Keep the entries of ``M`` on the mask and zero the rest."""
    M = _check_shape(M, mask.shape)
    out = np.zeros_like(M)
    out[mask.rows, mask.cols] = M[mask.rows, mask.cols]
    return out


def empirical_risk(M: np.ndarray, data: Dataset) -> float:
    """Mean squared residual over the observed entries."""
    M = _check_shape(M, data.shape)
    resid = data.y - M[data.mask.rows, data.mask.cols]
    return float(resid @ resid) / data.n


def weighted_frobenius_sq(A: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    """Sum of ``A_ij**2 * Pi_ij``; uniform weights when ``weights`` is None."""
    A = np.asarray(A, dtype=np.float64)
    if weights is None:
        return float(np.sum(A * A)) / A.size
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != A.shape:
        raise ValueError(f"weights shape {weights.shape} does not match {A.shape}")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    return float(np.sum(A * A * weights))


def _same_shape(est, truth):
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    return est, truth


def metric_mse(est: np.ndarray, truth: np.ndarray) -> float:
    est, truth = _same_shape(est, truth)
    d = est - truth
    return float(np.sum(d * d)) / d.size


def metric_nmse(est: np.ndarray, truth: np.ndarray) -> float:
    est, truth = _same_shape(est, truth)
    denom = float(np.sum(truth * truth))
    if denom == 0.0:
        raise ValueError("NMSE undefined for an all-zero truth matrix")
    d = est - truth
    return float(np.sum(d * d)) / denom


def metric_pred(est: np.ndarray, truth: np.ndarray, mask: Mask) -> float:
    """Mean squared error over the unobserved entries."""
    est, truth = _same_shape(est, truth)
    _check_shape(est, mask.shape)
    n_missing = mask.shape.size - mask.n
    if n_missing == 0:
        raise UndefinedMetricError("Pred undefined: every entry is observed")
    d = est - truth
    d[mask.rows, mask.cols] = 0.0
    return float(np.sum(d * d)) / n_missing


def estimate_rank(M: np.ndarray, rel_tol: float = 1e-2) -> int:
    """Number of singular values above ``rel_tol`` times the largest one."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    s = np.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def evaluate(est: np.ndarray, data: Dataset, runtime_seconds: float = 0.0,
             rel_tol: float = 1e-2) -> EvalReport:
    if data.truth is None:
        raise ValueError("dataset carries no ground truth to evaluate against")
    try:
        pred = metric_pred(est, data.truth, data.mask)
    except UndefinedMetricError:
        pred = None
    return EvalReport(
        mse=metric_mse(est, data.truth),
        nmse=metric_nmse(est, data.truth),
        pred=pred,
        est_rank=estimate_rank(est, rel_tol),
        runtime_seconds=runtime_seconds,
    )
