"""Closed-form quantities of the PAC-Bayes oracle inequality.

With noise constants (sigma, xi) and sup-norm bound L:

    C1 = 2 (4 sigma^2 + 9 L^2),   C2 = 12 L (2 xi + 3 L),   C > C2 + 1.5 C1,
    lambda* = n / C,
    alpha, beta = lambda -/+ lambda^2 C1 / (2 n (1 - C2 lambda / n)).

The bound for a rank-r comparison matrix is

    (beta/alpha) (err + m p tau^2)
      + (4/alpha) r (m+p+2) log(1 + sqrt(m p) / (tau sqrt(2 r)))
      + (2/alpha) log(2/eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


class OutOfRegimeError(ValueError):
    """Raised when ``C2 * lambda / n >= 1`` so alpha and beta are undefined."""


@dataclass(frozen=True)
class NoiseBounds:
    sigma: float
    xi: float
    L: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.xi > 0 and self.L > 0):
            raise ValueError("sigma, xi and L must all be positive")


@dataclass(frozen=True)
class TheoryConstants:
    c1: float
    c2: float
    c: float
    margin: float

    @property
    def threshold(self) -> float:
        return self.c2 + 1.5 * self.c1

    @property
    def final_constant(self) -> float:
        """Reported constant of the final rate, taken as ``6 C + margin``."""
        return 6.0 * self.c + self.margin


def compute_constants(nb: NoiseBounds, c_margin: float = 1.0) -> TheoryConstants:
    if not c_margin > 0:
        raise ValueError("c_margin must be positive")
    c1 = 2.0 * (4.0 * nb.sigma**2 + 9.0 * nb.L**2)
    c2 = 12.0 * nb.L * (2.0 * nb.xi + 3.0 * nb.L)
    return TheoryConstants(c1=c1, c2=c2, c=c2 + 1.5 * c1 + c_margin, margin=c_margin)


def lambda_star(n: int, tc: TheoryConstants) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    return n / tc.c


def alpha_beta(lam: float, n: int, tc: TheoryConstants) -> tuple[float, float]:
    ratio = tc.c2 * lam / n
    if ratio >= 1.0:
        raise OutOfRegimeError(f"C2 * lambda / n = {ratio:.4g} >= 1; lambda is too large")
    dev = lam * lam * tc.c1 / (2.0 * n * (1.0 - ratio))
    return lam - dev, lam + dev


def delta(lam: float, n: int, tc: TheoryConstants) -> float:
    """``beta / alpha - 1``."""
    a, b = alpha_beta(lam, n, tc)
    return b / a - 1.0


def kl_translation_bound(r: int, m: int, p: int, frob_mbar: float, tau: float) -> float:
    if r < 1 or tau <= 0 or frob_mbar < 0:
        raise ValueError("need r >= 1, tau > 0 and frob_mbar >= 0")
    return 2.0 * r * (m + p + 2) * math.log1p(frob_mbar / (tau * math.sqrt(2.0 * r)))


def recommended_tau(r: int, m: int, p: int, n: int) -> float:
    if min(r, m, p, n) <= 0:
        raise ValueError("r, m, p and n must be positive")
    return math.sqrt(r * (m + p) / (m * p * n))


@dataclass
class BoundTerms:
    leading: float
    complexity: float
    confidence: float

    @property
    def total(self) -> float:
        return self.leading + self.complexity + self.confidence


def oracle_bound_terms(approx_err: float, r: int, m: int, p: int, n: int, eps: float,
                       nb: NoiseBounds, tc: Optional[TheoryConstants] = None,
                       tau: Optional[float] = None) -> BoundTerms:
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if approx_err < 0:
        raise ValueError("approx_err must be nonnegative")
    if tc is None:
        tc = compute_constants(nb)
    if tau is None:
        tau = recommended_tau(r, m, p, n)
    a, b = alpha_beta(lambda_star(n, tc), n, tc)
    if a <= 0:
        raise OutOfRegimeError(f"alpha = {a:.4g} is not positive")
    return BoundTerms(
        leading=(b / a) * (approx_err + m * p * tau * tau),
        complexity=(4.0 / a) * r * (m + p + 2) * math.log1p(math.sqrt(m * p) / (tau * math.sqrt(2.0 * r))),
        confidence=(2.0 / a) * math.log(2.0 / eps),
    )


def oracle_bound_rhs(approx_err: float, r: int, m: int, p: int, n: int, eps: float,
                     nb: NoiseBounds, tc: Optional[TheoryConstants] = None,
                     tau: Optional[float] = None) -> float:
    """Right-hand side of the oracle inequality at ``lambda = lambda*``.

    ``approx_err`` is the weighted squared distance between the rank-r
    comparison matrix and the truth; ``tau`` defaults to :func:`recommended_tau`.
    """
    return oracle_bound_terms(approx_err, r, m, p, n, eps, nb, tc, tau).total
