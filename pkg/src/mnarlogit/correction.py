"""Two-stage relative-risk correction for outcome-dependent missingness.

Outcome model (population)::

    logit P(Y=1 | x) = beta0 + x'beta_x

Selection model::

    logit P(S=1 | x, y) = delta0 + x'delta_x + delta_y * y

On the observed rows the outcome logit is shifted by the log relative risk
``log P(S=1|Y=1,x) / P(S=1|Y=0,x)``, which is a known function of ``delta``.
``delta`` itself is recovered from the marginal selection model, where the
unknown ``log RR_{Y|S}`` term is approximated to first order in
``pi(x) = P(Y=1 | S=1, x)`` (rare outcome) or in ``1 - pi(x)`` (frequent
outcome), turning it into a regressor with coefficient ``gamma``:

==========  ===================  ====================================
branch      extra regressor      inversion
==========  ===================  ====================================
rare        ``pi``               ``delta_y = -log(1 - gamma)``
frequent    ``1 - pi``           ``delta_y = log(1 - gamma)``, and the
                                 fitted intercept is ``delta0 + delta_y``
==========  ===================  ====================================
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import glm
from ._parallel import pmap
from ._validation import check_finite_scalar
from .data import make_design, observed_subsample
from .exceptions import (
    BootstrapFailureError,
    DegenerateDataError,
    IdentificationError,
    InputError,
    MnarLogitError,
    NumericalError,
)
from .oracle import TruthSpec
from .rng import stream
from .smoother import PARAMETRIC_LOGIT, SPLINE_GAM, fit_pi_hat

RARE = "rare"
FREQUENT = "frequent"
AUTO = "auto"
BRANCHES = (RARE, FREQUENT, AUTO)

APPROX_QUALITY_THRESHOLD = 0.2
BOOTSTRAP_MAX_FAILURE_RATE = 0.2
PI_COLUMN = "pi_hat"


@dataclass(frozen=True)
class FitWarning:
    code: str
    message: str

    def to_dict(self):
        return {"code": self.code, "message": self.message}


@dataclass
class DeltaEstimate:
    """Selection-model parameters recovered from the marginal selection fit."""

    delta0: float
    delta_x: np.ndarray
    delta_y: float
    branch: str
    gamma_hat: float = float("nan")
    gamma_se: float = float("nan")
    marginal_fit: glm.LogisticFit = None

    @classmethod
    def from_truth(cls, truth):
        """Wrap known selection parameters (no estimation)."""
        return cls(truth.delta0, np.asarray(truth.delta_x, dtype=float), truth.delta_y,
                   branch="truth")

    @property
    def vector(self):
        return np.array([self.delta0, *self.delta_x, self.delta_y])

    def to_dict(self):
        return {"delta0": float(self.delta0), "delta_x": [float(v) for v in self.delta_x],
                "delta_y": float(self.delta_y), "branch": self.branch,
                "gamma_hat": float(self.gamma_hat), "gamma_se": float(self.gamma_se)}


@dataclass
class BootstrapSummary:
    reps: int
    successes: int
    failures: dict
    beta_se: np.ndarray
    delta_y_se: float

    def to_dict(self):
        return {"reps": self.reps, "successes": self.successes, "failures": dict(self.failures),
                "beta_se": [float(v) for v in self.beta_se],
                "delta_y_se": float(self.delta_y_se)}


@dataclass
class CorrectedEstimate:
    """Output of :func:`fit_corrected`.

    ``beta`` is the corrected outcome-model coefficient vector (intercept
    first); ``naive_beta`` is the complete-case fit of the same model without
    the offset. ``beta_se`` are plug-in standard errors from the final fit and
    ignore the uncertainty of the first two steps; prefer ``bootstrap_se``.
    """

    beta: np.ndarray
    delta: DeltaEstimate
    offset: np.ndarray
    approx_quality: float
    naive_beta: np.ndarray
    beta_se: np.ndarray = None
    naive_se: np.ndarray = None
    bootstrap_se: np.ndarray = None
    bootstrap: BootstrapSummary = None
    warnings: list = field(default_factory=list)
    pi_hat: object = None
    outcome_fit: glm.LogisticFit = None
    naive_fit: glm.LogisticFit = None
    labels: tuple = ()

    def warning_codes(self):
        return [w.code for w in self.warnings]


# ------------------------------------------------------------------ log-RR terms


def _delta_parts(delta):
    if isinstance(delta, (DeltaEstimate, TruthSpec)):
        return float(delta.delta0), np.asarray(delta.delta_x, dtype=float), float(delta.delta_y)
    d0, dx, dy = delta
    return float(d0), np.atleast_1d(np.asarray(dx, dtype=float)), float(dy)


def _log_expit(z):
    return -np.logaddexp(0.0, -z)


def selection_offset(delta, X):
    """``log RR_{S=1|Y,x}`` for every row of ``X`` (the step-three offset).

    Exactly zero wherever ``delta_y == 0``.
    """
    d0, dx, dy = _delta_parts(delta)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, dx.shape[0]) if dx.shape[0] else X.reshape(-1, 0)
    if X.shape[1] != dx.shape[0]:
        raise InputError(f"x has {X.shape[1]} columns, delta_x has {dx.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.isfinite(d0) and np.isfinite(dy)
            and np.all(np.isfinite(dx))):
        raise InputError("selection parameters and covariates must be finite")
    eta = d0 + X @ dx
    return _log_expit(eta + dy) - _log_expit(eta)


def log_rr_s_given_y(delta, x_row):
    """``log[P(S=1|Y=1,x) / P(S=1|Y=0,x)]`` at a single covariate row."""
    x_row = np.atleast_1d(np.asarray(x_row, dtype=float)).reshape(1, -1)
    return float(selection_offset(delta, x_row)[0])


def _which(which):
    if which in (1, "1", "Y=1", "y1"):
        return 1
    if which in (0, "0", "Y=0", "y0"):
        return 0
    raise InputError(f"which must be 'Y=1' or 'Y=0', got {which!r}")


def _check_prob(prob):
    prob = np.asarray(prob, dtype=float)
    if not np.all(np.isfinite(prob)) or np.any((prob < 0) | (prob > 1)):
        raise InputError("probabilities must lie in [0, 1]")
    return prob


def log_rr_y_given_s_exact(delta_y, prob, which):
    """Exact ``log RR_{Y=y|S,x}`` from the observed-subsample conditional.

    ``which="Y=1"``: ``log[1 + (exp(delta_y) - 1) * P(Y=0|S=1,x)]``, pass
    ``prob = P(Y=0|S=1,x)``. ``which="Y=0"``:
    ``log[1 + (exp(-delta_y) - 1) * P(Y=1|S=1,x)]``, pass
    ``prob = P(Y=1|S=1,x)``. Vectorized over ``prob``.
    """
    delta_y = check_finite_scalar(delta_y, "delta_y")
    prob = _check_prob(prob)
    u = np.expm1(delta_y if _which(which) == 1 else -delta_y) * prob
    if np.any(u <= -1.0):
        raise NumericalError("log argument is non-positive")
    out = np.log1p(u)
    return float(out) if out.ndim == 0 else out


def log_rr_y_given_s_approx(delta_y, prob, which):
    """First-order version of :func:`log_rr_y_given_s_exact` (``log(1+u) ~ u``)."""
    delta_y = check_finite_scalar(delta_y, "delta_y")
    prob = _check_prob(prob)
    out = np.expm1(delta_y if _which(which) == 1 else -delta_y) * prob
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ the three steps


def resolve_branch(branch, pi_values, s):
    if branch not in BRANCHES:
        raise InputError(f"branch must be one of {BRANCHES}, got {branch!r}")
    if branch != AUTO:
        return branch
    return RARE if float(np.mean(pi_values[s == 1])) <= 0.5 else FREQUENT


def delta_y_from_gamma(gamma, branch):
    """Invert ``gamma = 1 - exp(-delta_y)`` (rare) or ``gamma = 1 - exp(delta_y)`` (frequent)."""
    gamma = float(gamma)
    if not gamma < 1.0:
        raise IdentificationError(f"gamma = {gamma:.4g} >= 1: delta_y has no finite solution",
                                  gamma_hat=gamma)
    if branch == RARE:
        return float(-np.log1p(-gamma))
    if branch == FREQUENT:
        return float(np.log1p(-gamma))
    raise InputError(f"branch must be 'rare' or 'frequent', got {branch!r}")


def fit_marginal_selection(d, pi, branch=AUTO):
    """Recover ``delta`` from the logistic fit of S on ``[1, x, pi]`` (or ``1 - pi``).

    Uses every unit, since S is always observed. ``pi`` is entered exactly
    as given.

    Raises
    ------
    IdentificationError
        If the coefficient on the probability regressor is ``>= 1``.
    """
    values = np.asarray(getattr(pi, "values", pi), dtype=float)
    if values.shape != (d.n,):
        raise InputError(f"pi has shape {values.shape}, expected ({d.n},)")
    if d.s.min() == d.s.max():
        raise DegenerateDataError("selection indicator is constant: delta is not estimable")
    branch = resolve_branch(branch, values, d.s)
    z = values if branch == RARE else 1.0 - values
    label = PI_COLUMN if branch == RARE else "1-" + PI_COLUMN
    design = make_design(d.x, d.column_names, z, [label])
    mfit = glm.fit(design, d.s)
    gamma = float(mfit.coef[-1])
    gamma_se = float(mfit.se[-1])
    if not gamma < 1.0:
        raise IdentificationError(
            f"gamma_hat = {gamma:.4g} (se {gamma_se:.3g}) >= 1 on the {branch} branch: "
            "delta_y has no finite solution", gamma_hat=gamma, gamma_se=gamma_se)
    delta_y = delta_y_from_gamma(gamma, branch)
    delta0 = float(mfit.coef[0]) - (delta_y if branch == FREQUENT else 0.0)
    return DeltaEstimate(delta0, np.array(mfit.coef[1:-1]), delta_y, branch,
                         gamma, gamma_se, mfit)


def _tag(exc, step):
    if isinstance(exc, MnarLogitError) and exc.step is None:
        exc.step = step
    return exc


def fit_corrected(d, smoother_kind=SPLINE_GAM, branch=AUTO, bootstrap_reps=0, seed=0, *,
                  truth=None, delta=None, n_jobs=None, smoother_params=None):
    """Run the three-step correction on ``d``.

    1. estimate ``pi(x) = P(Y=1|S=1,x)`` with the chosen smoother;
    2. fit the marginal selection model with ``pi`` as a regressor and invert
       its coefficient to get ``delta`` (skipped when ``delta`` is given);
    3. fit the outcome model on the observed rows with offset
       ``log RR_{S=1|Y,x}(delta)``.

    Parameters
    ----------
    d : Dataset
    smoother_kind : {"spline-gam", "parametric-logit", "oracle-truth"}
    branch : {"auto", "rare", "frequent"}
    bootstrap_reps : int
        Nonparametric bootstrap replicates over units, each re-running all
        three steps. Failed replicates are counted; more than 20% failing
        raises :class:`BootstrapFailureError`.
    seed : int
        Base seed; replicate ``r`` draws from the stream ``(seed, r)``.
    truth : TruthSpec, optional
        Needed by the ``oracle-truth`` smoother.
    delta : DeltaEstimate or TruthSpec, optional
        Known selection parameters to plug in instead of step two.
    """
    obs = observed_subsample(d)
    if obs.y.min() == obs.y.max():
        raise DegenerateDataError("only one outcome class is observed")
    warnings = []
    design_obs = make_design(obs.x, d.column_names)
    labels = design_obs.labels
    try:
        naive = glm.fit(design_obs, obs.y)
    except MnarLogitError as exc:
        raise _tag(exc, 3)

    if delta is None and d.s.min() == 1:
        warnings.append(FitWarning("no_missingness",
                                   "no missingness detected: corrected fit equals naive fit"))
        return CorrectedEstimate(
            beta=naive.coef.copy(), delta=None, offset=np.zeros(obs.n),
            approx_quality=float("nan"), naive_beta=naive.coef.copy(), beta_se=naive.se,
            naive_se=naive.se, warnings=warnings, outcome_fit=naive, naive_fit=naive,
            labels=labels)

    try:
        pi = fit_pi_hat(d, smoother_kind, truth=truth, **(smoother_params or {}))
    except MnarLogitError as exc:
        raise _tag(exc, 1)

    if delta is None:
        try:
            delta_est = fit_marginal_selection(d, pi, branch)
        except MnarLogitError as exc:
            raise _tag(exc, 2)
        used_branch = delta_est.branch
    else:
        delta_est = delta if isinstance(delta, DeltaEstimate) else DeltaEstimate.from_truth(delta)
        used_branch = resolve_branch(branch, pi.values, d.s)

    try:
        offset = selection_offset(delta_est, obs.x)
        outcome = glm.fit(design_obs, obs.y, offset=offset)
    except MnarLogitError as exc:
        raise _tag(exc, 3)

    pi_obs = pi.values[d.s == 1]
    approx_quality = float(np.max(pi_obs if used_branch == RARE else 1.0 - pi_obs))
    if approx_quality > APPROX_QUALITY_THRESHOLD:
        target = "P(Y=1|S=1,x)" if used_branch == RARE else "P(Y=0|S=1,x)"
        warnings.append(FitWarning(
            "approx_quality",
            f"max {target} over observed rows is {approx_quality:.3f} > "
            f"{APPROX_QUALITY_THRESHOLD}: the first-order log-RR approximation of the "
            f"{used_branch} branch may be poor"))
    if smoother_kind == PARAMETRIC_LOGIT:
        warnings.append(FitWarning(
            "smoother_misspecification",
            "parametric logit smoother for P(Y=1|S=1,x) is incompatible with a logistic "
            "outcome model (non-collapsibility of odds ratios); misspecification risk"))
    if pi.clip_count:
        warnings.append(FitWarning("pi_clipped",
                                   f"{pi.clip_count} fitted probabilities clipped"))
    warnings.append(FitWarning(
        "plugin_se", "plug-in standard errors ignore uncertainty from steps 1-2; "
                     "use the bootstrap for inference"))

    est = CorrectedEstimate(
        beta=outcome.coef.copy(), delta=delta_est, offset=offset,
        approx_quality=approx_quality, naive_beta=naive.coef.copy(), beta_se=outcome.se,
        naive_se=naive.se, warnings=warnings, pi_hat=pi, outcome_fit=outcome,
        naive_fit=naive, labels=labels)

    if bootstrap_reps > 0:
        est.bootstrap = bootstrap(d, bootstrap_reps, seed, smoother_kind=smoother_kind,
                                  branch=branch, truth=truth, delta=delta, n_jobs=n_jobs,
                                  smoother_params=smoother_params)
        est.bootstrap_se = est.bootstrap.beta_se
    return est


def _bootstrap_replicate(args):
    d, seed, r, kwargs = args
    idx = stream(seed, r).integers(0, d.n, size=d.n)
    try:
        est = fit_corrected(d.take(idx), **kwargs)
    except MnarLogitError as exc:
        return r, None, None, type(exc).__name__
    dy = est.delta.delta_y if est.delta is not None else float("nan")
    return r, est.beta, dy, None


def bootstrap(d, reps, seed=0, *, n_jobs=None, **fit_kwargs):
    """Nonparametric bootstrap of the full three-step estimator."""
    kwargs = dict(fit_kwargs, bootstrap_reps=0)
    out = pmap(_bootstrap_replicate, [(d, seed, r, kwargs) for r in range(reps)], n_jobs)
    out.sort(key=lambda t: t[0])
    betas = np.array([b for _, b, _, err in out if err is None])
    dys = np.array([dy for _, _, dy, err in out if err is None])
    failures = dict(sorted(Counter(err for *_, err in out if err is not None).items()))
    n_fail = sum(failures.values())
    if n_fail > BOOTSTRAP_MAX_FAILURE_RATE * reps:
        raise BootstrapFailureError(
            f"{n_fail} of {reps} bootstrap replicates failed: {failures}", failures=failures)
    ddof = 1 if len(betas) > 1 else 0
    beta_se = betas.std(axis=0, ddof=ddof)
    dy_se = float(np.std(dys, ddof=ddof))
    return BootstrapSummary(reps, len(betas), failures, beta_se, dy_se)
