import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from scipy.special import expit

from mnarlogit import glm
from mnarlogit.exceptions import (
    InputError,
    NonConvergenceError,
    SeparationError,
    SingularDesignError,
)
from mnarlogit.glm import LogitIRLS
from mnarlogit.oracle import direct_search_mle


def _random_instance(rng, n, p):
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    beta = rng.normal(0, 0.8, p + 1)
    y = (rng.random(n) < expit(X @ beta)).astype(float)
    return X, y


def test_intercept_only_balanced():
    f = glm.fit(np.ones((2, 1)), [0, 1])
    assert f.coef[0] == pytest.approx(0.0, abs=1e-12)


def test_intercept_only_bernoulli_mean():
    f = glm.fit(np.ones((4, 1)), [1, 1, 1, 0])
    assert f.coef[0] == pytest.approx(np.log(3.0), abs=1e-10)
    assert f.converged and f.max_abs_score <= glm.SCORE_TOL


def test_all_ones_response_separates():
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    with pytest.raises(SeparationError):
        glm.fit(X, np.ones(6))


def test_complete_separation():
    X = np.column_stack([np.ones(8), np.arange(8.0)])
    with pytest.raises(SeparationError):
        glm.fit(X, [0, 0, 0, 0, 1, 1, 1, 1])


def test_rank_deficient_design():
    X = np.column_stack([np.ones(5), np.arange(5.0), 2 * np.arange(5.0)])
    with pytest.raises(SingularDesignError):
        glm.fit(X, [0, 1, 0, 1, 1])


def test_non_convergence_carries_last_iterate():
    rng = np.random.default_rng(0)
    X, y = _random_instance(rng, 50, 1)
    with pytest.raises(NonConvergenceError) as info:
        glm.fit(X, y, max_iter=1)
    assert info.value.last_fit is not None
    assert info.value.last_fit.n_iter == 1


def test_matches_direct_search_on_twenty_rows():
    rng = np.random.default_rng(20)
    X, y = _random_instance(rng, 20, 2)
    f = glm.fit(X, y)
    ds = direct_search_mle(X, y)
    assert ds.converged
    np.testing.assert_allclose(f.coef, ds.coef, atol=1e-6)


def test_score_equations_with_weights_and_offset():
    rng = np.random.default_rng(3)
    X, y = _random_instance(rng, 200, 2)
    off = rng.normal(size=200)
    w = rng.uniform(0.2, 3.0, 200)
    f = glm.fit(X, y, offset=off, weights=w)
    score = X.T @ (w * (y - expit(off + X @ f.coef)))
    assert np.max(np.abs(score)) <= glm.SCORE_TOL
    ds = direct_search_mle(X, y, off, w)
    np.testing.assert_allclose(f.coef, ds.coef, atol=1e-6)


def test_covariance_is_inverse_information():
    rng = np.random.default_rng(4)
    X, y = _random_instance(rng, 300, 2)
    f = glm.fit(X, y)
    mu = expit(X @ f.coef)
    info = (X * (mu * (1 - mu))[:, None]).T @ X
    np.testing.assert_allclose(f.cov, np.linalg.inv(info), rtol=1e-8)
    np.testing.assert_allclose(f.cov, f.cov.T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(f.cov) > 0)
    assert np.all(np.diag(f.cov) > 0)


def test_offset_in_column_space_shifts_coefficients():
    rng = np.random.default_rng(5)
    X, y = _random_instance(rng, 120, 2)
    v = np.array([0.3, -0.7, 0.2])
    base = glm.fit(X, y)
    shifted = glm.fit(X, y, offset=X @ v)
    np.testing.assert_allclose(shifted.coef, base.coef - v, atol=1e-8)


def test_predict_prob():
    f = glm.LogisticFit(np.zeros(2), np.eye(2), 0.0, 1, True, 0.0)
    np.testing.assert_array_equal(glm.predict_prob(f, np.ones((3, 2))), 0.5)
    f1 = glm.LogisticFit(np.array([-1.7]), np.eye(1), 0.0, 1, True, 0.0)
    assert glm.predict_prob(f1, np.ones((1, 1)))[0] == pytest.approx(0.154465, abs=5e-7)
    with pytest.raises(InputError):
        glm.predict_prob(f1, np.ones((1, 1)), offset=[np.inf])
    with pytest.raises(InputError):
        glm.predict_prob(f1, np.ones((1, 2)))


def test_input_contracts():
    with pytest.raises(InputError):
        glm.fit(np.ones((3, 1)), [0, 1, 2])
    with pytest.raises(InputError):
        glm.fit(np.ones((3, 1)), [0, 1])
    with pytest.raises(InputError):
        glm.fit(np.ones((3, 1)), [0, 1, 1], weights=[1, -1, 1])


def test_deterministic():
    rng = np.random.default_rng(6)
    X, y = _random_instance(rng, 80, 2)
    a, b = glm.fit(X, y), glm.fit(X, y)
    assert a.coef.tobytes() == b.coef.tobytes()


def test_estimator_api():
    from sklearn.base import clone
    rng = np.random.default_rng(8)
    X, y = _random_instance(rng, 100, 2)
    m = LogitIRLS().fit(X[:, 1:], y)
    np.testing.assert_allclose(np.r_[m.intercept_, m.coef_], glm.fit(X, y).coef)
    assert m.predict_proba(X[:, 1:]).shape == (100, 2)
    assert set(m.predict(X[:, 1:])) <= {0, 1}
    assert clone(m).get_params() == {"fit_intercept": True, "max_iter": 100, "tol": 1e-8}


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(n=st.integers(4, 12), p=st.integers(0, 2), seed=st.integers(0, 2 ** 32 - 1))
def test_agrees_with_direct_search_small(n, p, seed):
    X, y = _random_instance(np.random.default_rng(seed), n, p)
    try:
        f = glm.fit(X, y)
    except (SeparationError, SingularDesignError):
        assume(False)
    ds = direct_search_mle(X, y)
    assume(ds.converged and not ds.unbounded)
    np.testing.assert_allclose(f.coef, ds.coef, atol=1e-5)
