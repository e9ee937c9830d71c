"""scikit-learn style front end for the two-stage correction."""

import warnings

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_matrix
from .correction import AUTO, fit_corrected
from .data import Dataset
from .smoother import SPLINE_GAM


class SelectionWarning(UserWarning):
    """Diagnostic raised by :class:`HeckmanLogit` (approximation quality, etc.)."""


class HeckmanLogit(ClassifierMixin, BaseEstimator):
    """Logistic regression corrected for outcome-dependent missingness.

    ``fit(X, y)`` takes the full covariate matrix and an outcome vector with
    ``nan`` for missing entries; ``predict_proba`` then returns probabilities
    under the corrected population outcome model.

    Parameters
    ----------
    smoother : {"spline-gam", "parametric-logit", "oracle-truth"}, default="spline-gam"
        Estimator of P(Y=1 | S=1, x).
    branch : {"auto", "rare", "frequent"}, default="auto"
    bootstrap_reps : int, default=0
    random_state : int, default=0
        Base seed of the bootstrap streams.
    n_jobs : int, optional
        Workers for the bootstrap.
    truth : TruthSpec, optional
        Only for ``smoother="oracle-truth"``.

    Attributes
    ----------
    coef_, intercept_ : corrected outcome-model coefficients
    naive_coef_, naive_intercept_ : complete-case coefficients
    delta_ : DeltaEstimate or None
    result_ : CorrectedEstimate
    """

    def __init__(self, smoother=SPLINE_GAM, branch=AUTO, bootstrap_reps=0, random_state=0,
                 n_jobs=None, truth=None):
        self.smoother = smoother
        self.branch = branch
        self.bootstrap_reps = bootstrap_reps
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.truth = truth

    def fit(self, X, y, s=None):
        X = check_matrix(X)
        d = Dataset.from_arrays(X, y, s)
        res = fit_corrected(d, self.smoother, self.branch, self.bootstrap_reps,
                            seed=self.random_state, truth=self.truth, n_jobs=self.n_jobs)
        for w in res.warnings:
            if w.code != "plugin_se":
                warnings.warn(w.message, SelectionWarning, stacklevel=2)
        self.result_ = res
        self.intercept_ = float(res.beta[0])
        self.coef_ = res.beta[1:].copy()
        self.naive_intercept_ = float(res.naive_beta[0])
        self.naive_coef_ = res.naive_beta[1:].copy()
        self.delta_ = res.delta
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = check_matrix(X)
        return self.intercept_ + X @ self.coef_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)
