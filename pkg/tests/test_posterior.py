import numpy as np
import pytest

from spectralmc.core import Dataset, Mask, Shape, empirical_risk
from spectralmc.posterior import (
    PosteriorSpec,
    finite_diff_grad_check,
    grad_log_posterior,
    log_posterior_unnorm,
    value_and_grad,
)
from spectralmc.prior import PriorConfig, log_prior_logdet

from conftest import random_spec


def scalar_spec(y, lam, tau=1.0):
    return PosteriorSpec(Dataset(Mask(Shape(1, 1), [0], [0]), [y]), PriorConfig(tau), lam)


def test_lambda_must_be_positive():
    with pytest.raises(ValueError):
        scalar_spec(0.0, 0.0)


def test_log_posterior_scalar_values():
    assert log_posterior_unnorm(scalar_spec(0.0, 3.0), np.zeros((1, 1))) == 0.0
    assert log_posterior_unnorm(scalar_spec(1.0, 2.0), np.zeros((1, 1))) == -2.0


def test_log_posterior_is_sum_of_terms(rng):
    spec = random_spec(rng, 5, 6, 0.5, tau=0.7, lam=3.5)
    M = rng.standard_normal((5, 6))
    expected = -3.5 * empirical_risk(M, spec.data) + log_prior_logdet(M, spec.prior)
    assert abs(log_posterior_unnorm(spec, M) - expected) < 1e-12


def test_gradient_scalar_and_stationary():
    g = grad_log_posterior(scalar_spec(2.0, 1.0), np.zeros((1, 1)))
    np.testing.assert_allclose(g, [[4.0]])
    spec = PosteriorSpec(Dataset(Mask(Shape(2, 3), [0, 1], [1, 2]), [0.0, 0.0]), PriorConfig(1.0), 5.0)
    np.testing.assert_array_equal(grad_log_posterior(spec, np.zeros((2, 3))), 0.0)
    assert finite_diff_grad_check(spec, np.zeros((2, 3))) == 0.0


def test_gradient_matches_finite_differences(rng):
    spec = random_spec(rng, 6, 5, 0.4)
    M = rng.standard_normal((6, 5))
    assert finite_diff_grad_check(spec, M, 1e-5) < 1e-5


def test_quadratic_limit_is_exact(rng):
    # a huge tau flattens the prior, leaving the quadratic data term
    spec = random_spec(rng, 4, 4, 0.6, tau=1e6, lam=2.0)
    M = rng.standard_normal((4, 4))
    assert finite_diff_grad_check(spec, M, 1e-3) < 1e-8


def test_value_and_grad_consistent(rng):
    spec = random_spec(rng, 5, 7, 0.5, tau=0.4)
    M = rng.standard_normal((5, 7))
    val, g = value_and_grad(spec, M)
    assert val == pytest.approx(log_posterior_unnorm(spec, M), rel=1e-12)
    np.testing.assert_allclose(g, grad_log_posterior(spec, M), atol=1e-10)
    val, g = value_and_grad(spec, np.full((5, 7), np.nan))
    assert val == -np.inf


def test_data_term_ignores_unobserved_slots(rng):
    from spectralmc.prior import grad_log_prior

    spec = random_spec(rng, 5, 5, 0.4)
    observed = spec.data.mask.to_bool()
    M = rng.standard_normal((5, 5))
    M2 = M.copy()
    M2[~observed] += rng.standard_normal(np.count_nonzero(~observed))

    def data_part(X):
        return grad_log_posterior(spec, X) - grad_log_prior(X, spec.prior)

    np.testing.assert_allclose(data_part(M2), data_part(M), atol=1e-12)
    assert np.all(data_part(M)[~observed] == 0.0)


def test_gradient_linear_in_lambda(rng):
    spec = random_spec(rng, 4, 6, 0.5, lam=1.0)
    M = rng.standard_normal((4, 6))
    prior_only = grad_log_posterior(PosteriorSpec(spec.data, spec.prior, 1e-300), M)
    parts = [grad_log_posterior(PosteriorSpec(spec.data, spec.prior, lam), M) - prior_only
             for lam in (1.0, 2.0, 5.0)]
    np.testing.assert_allclose(parts[1], 2 * parts[0], atol=1e-12)
    np.testing.assert_allclose(parts[2], 5 * parts[0], atol=1e-12)


def test_data_term_concave_along_lines(rng):
    spec = random_spec(rng, 4, 5, 0.5, lam=3.0)
    for _ in range(10):
        A, D = rng.standard_normal((2, 4, 5))
        f = [-spec.lam * empirical_risk(A + t * D, spec.data) for t in (-1.0, 0.0, 1.0)]
        assert f[0] - 2 * f[1] + f[2] <= 1e-12
