"""Logistic regression with offsets and weights, fitted by IRLS.

The Newton step is solved through a QR factorisation of the
square-root-weighted design (stacked on a penalty root, when given), so the
cross-product matrix ``X'WX`` is never formed explicitly.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_binary, check_matrix, check_vector, check_weights
from .data import DesignMatrix
from .exceptions import (
    InputError,
    NonConvergenceError,
    SeparationError,
    SingularDesignError,
)

SCORE_TOL = 1e-8
LOGLIK_RTOL = 1e-10
MAX_ITER = 100
DIVERGENCE_BOUND = 30.0


@dataclass
class LogisticFit:
    """Result of one logistic fit.

    ``cov`` is the inverse of the observed information (plus the penalty
    matrix for penalized fits). ``edf`` is the trace of the hat matrix and
    equals the number of coefficients for unpenalized fits.
    """

    coef: np.ndarray
    cov: np.ndarray
    log_lik: float
    n_iter: int
    converged: bool
    max_abs_score: float
    edf: float = float("nan")
    labels: tuple = field(default=())

    @property
    def se(self):
        return np.sqrt(np.diag(self.cov))

    @property
    def deviance(self):
        return -2.0 * self.log_lik


def _values(design):
    if isinstance(design, DesignMatrix):
        return design.values, design.labels
    values = check_matrix(design, "design")
    return values, tuple(f"c{j}" for j in range(values.shape[1]))


def log_likelihood(eta, y, w):
    """Weighted Bernoulli log-likelihood at linear predictor ``eta``."""
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def _factor(X, sw, penalty_root):
    A = X * sw[:, None]
    if penalty_root is not None:
        A = np.vstack([A, penalty_root])
    R = qr(A, mode="r", check_finite=False)[0][: X.shape[1]]
    return R


def _solve_normal(R, rhs):
    # (R'R)^{-1} rhs via two triangular solves
    return solve_triangular(R, solve_triangular(R, rhs, trans="T"), check_finite=False)


def _check_rank(X, w, penalty_root):
    A = X[w > 0]
    if penalty_root is not None:
        A = np.vstack([A, penalty_root])
    k = X.shape[1]
    if A.shape[0] < k or np.linalg.matrix_rank(A) < k:
        raise SingularDesignError(f"design is rank deficient ({k} columns)")


def irls(X, y, offset=None, weights=None, penalty_root=None, *, max_iter=MAX_ITER,
         score_tol=SCORE_TOL, loglik_rtol=LOGLIK_RTOL,
         divergence_bound=DIVERGENCE_BOUND, labels=()):
    """Penalized-or-plain IRLS on raw arrays.

    Maximizes ``sum w*(y*eta - log(1+exp(eta))) - 0.5*||penalty_root @ b||^2``
    with ``eta = offset + X @ b``, starting from ``b = 0``. ``y`` may be
    fractional in ``[0, 1]``.
    """
    n, k = X.shape
    offset = np.zeros(n) if offset is None else offset
    w = np.ones(n) if weights is None else weights
    P = None if penalty_root is None else penalty_root.T @ penalty_root
    _check_rank(X, w, penalty_root)
    # |coef_j| * max|X_j| bounds column j's share of the logit
    col_scale = np.max(np.abs(X[w > 0]), axis=0)

    def objective(b):
        ll = log_likelihood(offset + X @ b, y, w)
        pen = 0.0 if P is None else 0.5 * float(b @ P @ b)
        return ll, ll - pen

    b = np.zeros(k)
    ll, obj = objective(b)
    converged = False
    it = 0
    score = np.full(k, np.inf)
    R = None
    for it in range(1, max_iter + 1):
        mu = expit(offset + X @ b)
        sw = np.sqrt(w * mu * (1.0 - mu))
        score = X.T @ (w * (y - mu))
        if P is not None:
            score = score - P @ b
        R = _factor(X, sw, penalty_root)
        if np.any(np.abs(np.diag(R)) <= 1e-13 * max(1.0, np.abs(R).max())):
            raise SeparationError("weighted design lost rank: fitted probabilities saturated",
                                  coef=b)
        step = _solve_normal(R, score)
        # step halving guards against overshoot
        for _ in range(40):
            b_new = b + step
            ll_new, obj_new = objective(b_new)
            if obj_new >= obj - 1e-12 * max(1.0, abs(obj)):
                break
            step = step / 2.0
        rel = abs(obj_new - obj) / max(abs(obj), 1e-300)
        b, ll, obj = b_new, ll_new, obj_new
        if np.max(np.abs(b) * col_scale) > divergence_bound:
            raise SeparationError(
                f"a coefficient's contribution to the logit exceeded {divergence_bound:g}: "
                "separation suspected", coef=b)
        mu = expit(offset + X @ b)
        score = X.T @ (w * (y - mu))
        if P is not None:
            score = score - P @ b
        tol = score_tol
        if P is not None:
            # the penalty gradient cannot be resolved below its rounding error
            tol = max(tol, 64 * np.finfo(float).eps * float(np.max(np.abs(P) @ np.abs(b))))
        if np.max(np.abs(score)) <= tol and rel <= loglik_rtol:
            converged = True
            break
    mu = expit(offset + X @ b)
    sw = np.sqrt(w * mu * (1.0 - mu))
    R = _factor(X, sw, penalty_root)
    Rinv = solve_triangular(R, np.eye(k), check_finite=False)
    cov = Rinv @ Rinv.T
    edf = float(np.sum(((X * sw[:, None]) @ Rinv) ** 2)) if penalty_root is not None else float(k)
    fit = LogisticFit(coef=b, cov=cov, log_lik=ll, n_iter=it, converged=converged,
                      max_abs_score=float(np.max(np.abs(score))), edf=edf,
                      labels=tuple(labels))
    if not converged:
        raise NonConvergenceError(f"IRLS did not converge in {max_iter} iterations",
                                  last_fit=fit)
    return fit


def fit(design, response, offset=None, weights=None, **kwargs):
    """Maximum-likelihood logistic regression of ``response`` on ``design``.

    Parameters
    ----------
    design : DesignMatrix or array of shape (n, k)
        Model matrix; include the intercept column yourself when passing an array.
    response : array of shape (n,)
        0/1 outcomes.
    offset : array of shape (n,), optional
        Fixed term added to the linear predictor.
    weights : array of shape (n,), optional
        Nonnegative case weights.

    Returns
    -------
    LogisticFit

    Raises
    ------
    SingularDesignError, SeparationError, NonConvergenceError
    """
    X, labels = _values(design)
    n = X.shape[0]
    y = check_binary(response, n, "response")
    offset = check_vector(offset, n, "offset", default=0.0)
    w = check_weights(weights, n)
    return irls(X, y, offset, w, labels=labels, **kwargs)


def predict_prob(fit_result, design, offset=None):
    X, _ = _values(design)
    if X.shape[1] != fit_result.coef.shape[0]:
        raise InputError(
            f"design has {X.shape[1]} columns, fit has {fit_result.coef.shape[0]} coefficients")
    offset = check_vector(offset, X.shape[0], "offset", default=0.0)
    return expit(offset + X @ fit_result.coef)


class LogitIRLS(ClassifierMixin, BaseEstimator):
    """Unpenalized logistic regression with offset support.

    Parameters
    ----------
    fit_intercept : bool, default=True
    max_iter : int, default=100
    tol : float, default=1e-8
        Bound on the largest absolute score component at convergence.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    fit_ : LogisticFit
    """

    def __init__(self, fit_intercept=True, max_iter=MAX_ITER, tol=SCORE_TOL):
        self.fit_intercept = fit_intercept
        self.max_iter = max_iter
        self.tol = tol

    def _design(self, X):
        X = check_matrix(X)
        if self.fit_intercept:
            X = np.hstack([np.ones((X.shape[0], 1)), X])
        return X

    def fit(self, X, y, offset=None, sample_weight=None):
        D = self._design(X)
        self.fit_ = fit(D, y, offset, sample_weight, max_iter=self.max_iter,
                        score_tol=self.tol)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = D.shape[1] - int(self.fit_intercept)
        coef = self.fit_.coef
        self.intercept_ = float(coef[0]) if self.fit_intercept else 0.0
        self.coef_ = coef[1:] if self.fit_intercept else coef
        return self

    def decision_function(self, X, offset=None):
        D = self._design(X)
        return check_vector(offset, D.shape[0], "offset", default=0.0) + D @ self.fit_.coef

    def predict_proba(self, X, offset=None):
        p = expit(self.decision_function(X, offset))
        return np.column_stack([1.0 - p, p])

    def predict(self, X, offset=None):
        return (self.decision_function(X, offset) > 0).astype(int)
