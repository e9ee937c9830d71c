"""Estimates of P(Y=1 | S=1, x) on the observed subsample.

The default is an additive logistic P-spline model: each continuous covariate
gets a cubic B-spline basis (interior knots at empirical quantiles) with a
second-order difference penalty, binary covariates enter linearly, and the
penalty weights are chosen by AIC over a log-spaced grid.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from . import glm, oracle
from ._validation import check_binary, check_matrix
from .data import BINARY, infer_kinds, observed_subsample
from .exceptions import (
    DegenerateDataError,
    InputError,
    MnarLogitError,
    SingularDesignError,
)

SPLINE_GAM = "spline-gam"
PARAMETRIC_LOGIT = "parametric-logit"
ORACLE_TRUTH = "oracle-truth"
SMOOTHER_KINDS = (SPLINE_GAM, PARAMETRIC_LOGIT, ORACLE_TRUTH)

CLIP_EPS = 1e-6
N_INTERIOR_KNOTS = 10
DEGREE = 3
LAMBDA_GRID = tuple(10.0 ** k for k in range(-3, 4))


@dataclass
class PiHat:
    """Per-unit estimate of P(Y=1 | S=1, x), evaluated at all n units."""

    values: np.ndarray
    clip_count: int
    smoother_kind: str
    effective_dof: float
    lambdas: tuple = ()
    aic: float = float("nan")

    def summary(self):
        v = self.values
        return {"min": float(v.min()), "median": float(np.median(v)), "max": float(v.max()),
                "clip_count": int(self.clip_count), "kind": self.smoother_kind,
                "effective_dof": float(self.effective_dof),
                "lambdas": [float(l) for l in self.lambdas]}


def clip_probabilities(p, eps=CLIP_EPS):
    p = np.asarray(p, dtype=float)
    clipped = np.clip(p, eps, 1.0 - eps)
    return clipped, int(np.count_nonzero(clipped != p))


@dataclass
class _SplineTerm:
    column: int
    lo: float
    hi: float
    knots: np.ndarray
    # maps the raw B-spline coefficients onto the sum-to-zero subspace
    constraint: np.ndarray
    col_means: np.ndarray
    penalty_root: np.ndarray

    @property
    def n_coef(self):
        return self.constraint.shape[1]

    def raw_basis(self, x):
        xc = np.clip(x, self.lo, self.hi)
        return BSpline.design_matrix(xc, self.knots, DEGREE).toarray()

    def basis(self, x):
        return (self.raw_basis(x) - self.col_means) @ self.constraint


def _second_difference(knots, m):
    """Second differences of the coefficients, divided by Greville-abscissa spacings.

    With quantile knots the plain index-based difference does not vanish on
    linear functions; dividing by the local spacing makes the null space
    exactly {constant, linear in x}. Scaled by the mean spacing so it
    reduces to the ordinary second difference on uniform knots.
    """
    g = np.array([knots[i + 1:i + DEGREE + 1].mean() for i in range(m)])
    h = np.diff(g)
    first = np.diff(np.eye(m), axis=0) / h[:, None]
    return np.diff(first, axis=0) * h.mean()


def _make_term(j, x, n_interior):
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise SingularDesignError(f"covariate {j} is constant on the observed subsample")
    probs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    inner = np.unique(np.quantile(x, probs))
    inner = inner[(inner > lo) & (inner < hi)]
    knots = np.r_[[lo] * (DEGREE + 1), inner, [hi] * (DEGREE + 1)]
    term = _SplineTerm(j, lo, hi, knots, None, None, None)
    B = term.raw_basis(x)
    m = B.shape[1]
    col_means = B.mean(axis=0)
    # null space of the column-mean constraint: removes the constant direction
    q, _ = np.linalg.qr(col_means.reshape(-1, 1), mode="complete")
    Z = q[:, 1:]
    D = _second_difference(knots, m)
    term.constraint = Z
    term.col_means = col_means
    term.penalty_root = D @ Z
    return term


class PSplineLogit(ClassifierMixin, BaseEstimator):
    """Additive logistic P-spline classifier.

    Parameters
    ----------
    n_knots : int, default=10
        Interior knots per continuous covariate (fewer when quantiles tie).
    lambdas : sequence of float, default=10**(-3..3)
        Penalty grid searched by AIC. A one-element grid fixes the penalty.
    binary_features : "auto" or sequence of bool
        Which columns enter linearly. ``"auto"`` treats 0/1 columns as binary.

    Attributes
    ----------
    lambda_ : tuple of float
        Selected per-covariate penalty weights (one per continuous covariate).
    fit_ : LogisticFit
        Penalized fit at the selected penalty.
    aic_ : float
        ``deviance + 2 * edf`` at the selected penalty.
    """

    def __init__(self, n_knots=N_INTERIOR_KNOTS, lambdas=LAMBDA_GRID, binary_features="auto"):
        self.n_knots = n_knots
        self.lambdas = lambdas
        self.binary_features = binary_features

    def _design(self, X):
        n = X.shape[0]
        blocks = [np.ones((n, 1))]
        blocks += [X[:, [j]] for j in self.linear_columns_]
        blocks += [t.basis(X[:, t.column]) for t in self.terms_]
        return np.hstack(blocks)

    def _penalty_root(self, lambdas):
        k0 = 1 + len(self.linear_columns_)
        total = k0 + sum(t.n_coef for t in self.terms_)
        rows = []
        offset = k0
        for lam, t in zip(lambdas, self.terms_):
            block = np.zeros((t.penalty_root.shape[0], total))
            block[:, offset:offset + t.n_coef] = np.sqrt(lam) * t.penalty_root
            rows.append(block)
            offset += t.n_coef
        return np.vstack(rows) if rows else None

    def _fit_at(self, D, y, lambdas):
        f = glm.irls(D, y, penalty_root=self._penalty_root(lambdas),
                     divergence_bound=np.inf)
        return f, f.deviance + 2.0 * f.edf

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_binary(y, X.shape[0])
        if y.min() == y.max():
            raise DegenerateDataError("outcome has a single class in the observed subsample")
        if isinstance(self.binary_features, str):
            if self.binary_features != "auto":
                raise InputError(f"binary_features must be 'auto' or a mask, got "
                                 f"{self.binary_features!r}")
            is_binary = [k == BINARY for k in infer_kinds(X)]
        else:
            is_binary = [bool(b) for b in self.binary_features]
            if len(is_binary) != X.shape[1]:
                raise InputError("binary_features mask has the wrong length")
        self.linear_columns_ = [j for j, b in enumerate(is_binary) if b]
        self.terms_ = [_make_term(j, X[:, j], self.n_knots)
                       for j, b in enumerate(is_binary) if not b]
        D = self._design(X)
        grid = tuple(float(l) for l in self.lambdas)
        q = len(self.terms_)
        if q == 0:
            best = (*self._fit_at(D, y, ()), ())
        else:
            best = self._search(D, y, grid, q)
        self.fit_, self.aic_, self.lambda_ = best
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def _search(self, D, y, grid, q):
        # shared penalty first, then one coordinate pass per covariate when q > 1
        failures = []

        def attempt(lams):
            try:
                f, aic = self._fit_at(D, y, lams)
            except MnarLogitError as exc:
                failures.append(exc)
                return None
            return f, aic, lams

        best = None
        for lam in grid:
            r = attempt((lam,) * q)
            if r is not None and (best is None or r[1] < best[1]):
                best = r
        if best is None:
            raise failures[-1]
        if q > 1:
            for j in range(q):
                for lam in grid:
                    lams = best[2][:j] + (lam,) + best[2][j + 1:]
                    if lams == best[2]:
                        continue
                    r = attempt(lams)
                    if r is not None and r[1] < best[1]:
                        best = r
        return best

    def decision_function(self, X):
        X = check_matrix(X)
        return self._design(X) @ self.fit_.coef

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)


def fit_pi_hat(d, kind=SPLINE_GAM, truth=None, **smoother_params):
    """Estimate P(Y=1 | S=1, x) from the ``s == 1`` rows, evaluated at every row of ``d``.

    ``kind="oracle-truth"`` bypasses estimation and uses the exact
    conditional law implied by ``truth`` (testing only).
    """
    if kind not in SMOOTHER_KINDS:
        raise InputError(f"unknown smoother kind {kind!r}; expected one of {SMOOTHER_KINDS}")
    if kind == ORACLE_TRUTH:
        if truth is None:
            raise InputError("oracle-truth smoother needs a TruthSpec")
        values, clips = clip_probabilities(oracle.pi_true(truth, d.x))
        return PiHat(values, clips, kind, float("nan"))
    obs = observed_subsample(d)
    if obs.y.min() == obs.y.max():
        raise DegenerateDataError("observed outcomes are all "
                                  f"{int(obs.y[0])}: P(Y=1|S=1,x) is not estimable")
    if kind == PARAMETRIC_LOGIT:
        model = glm.LogitIRLS().fit(obs.x, obs.y)
        values, clips = clip_probabilities(model.predict_proba(d.x)[:, 1])
        return PiHat(values, clips, kind, float(model.fit_.coef.size),
                     aic=model.fit_.deviance + 2.0 * model.fit_.coef.size)
    binary = [k == BINARY for k in d.column_kinds]
    model = PSplineLogit(binary_features=binary, **smoother_params).fit(obs.x, obs.y)
    values, clips = clip_probabilities(model.predict_proba(d.x)[:, 1])
    return PiHat(values, clips, kind, model.fit_.edf, tuple(model.lambda_), model.aic_)
