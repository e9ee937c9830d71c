"""Exact enumeration of the (Y, S) law given covariates, plus test-only MLE checks.

Nothing here calls the IRLS engine or the correction code: these functions
are the independent ground truth that the estimation path is checked against.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import expit, ndtri

from .exceptions import ConfigError, DegenerateConditionError, InputError

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class CovariateLaw:
    """Marginal law of one covariate: ``standard-normal``, ``bernoulli`` or ``uniform``."""

    kind: str = "standard-normal"
    q: float = 0.5
    a: float = 0.0
    b: float = 1.0

    KINDS = ("standard-normal", "bernoulli", "uniform")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown covariate law {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "bernoulli" and not 0.0 <= self.q <= 1.0:
            raise ConfigError(f"bernoulli q must lie in [0, 1], got {self.q}")
        if self.kind == "uniform" and not self.a < self.b:
            raise ConfigError(f"uniform law needs a < b, got ({self.a}, {self.b})")

    @property
    def is_binary(self):
        return self.kind == "bernoulli"

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "standard-normal":
            return ndtri(u)
        if self.kind == "bernoulli":
            return (u < self.q).astype(float)
        return self.a + (self.b - self.a) * u

    @classmethod
    def parse(cls, text):
        """``normal`` | ``bernoulli:q`` | ``uniform:a:b``."""
        parts = text.strip().lower().split(":")
        try:
            if parts[0] in ("normal", "standard-normal", "n"):
                return cls("standard-normal")
            if parts[0] == "bernoulli":
                return cls("bernoulli", q=float(parts[1]) if len(parts) > 1 else 0.5)
            if parts[0] == "uniform":
                return cls("uniform", a=float(parts[1]), b=float(parts[2]))
        except (IndexError, ValueError):
            pass
        raise ConfigError(f"cannot parse covariate law {text!r}")

    def to_dict(self):
        if self.kind == "bernoulli":
            return {"kind": self.kind, "q": self.q}
        if self.kind == "uniform":
            return {"kind": self.kind, "a": self.a, "b": self.b}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls.parse(d)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad covariate law {d!r}: {exc}") from None


@dataclass(frozen=True)
class TruthSpec:
    """True outcome and selection parameters plus covariate laws."""

    beta0: float
    beta_x: tuple
    delta0: float
    delta_x: tuple
    delta_y: float
    covariate_laws: tuple = None

    def __post_init__(self):
        bx = tuple(float(v) for v in np.atleast_1d(self.beta_x))
        dx = tuple(float(v) for v in np.atleast_1d(self.delta_x))
        laws = self.covariate_laws
        if laws is None:
            laws = tuple(CovariateLaw() for _ in bx)
        laws = tuple(law if isinstance(law, CovariateLaw) else CovariateLaw.from_dict(law)
                     for law in laws)
        if not len(bx) == len(dx) == len(laws):
            raise ConfigError(
                f"beta_x ({len(bx)}), delta_x ({len(dx)}) and covariate_laws ({len(laws)}) "
                "must have equal length")
        vals = [self.beta0, self.delta0, self.delta_y, *bx, *dx]
        if not np.all(np.isfinite(vals)):
            raise ConfigError("truth parameters must be finite")
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "delta0", float(self.delta0))
        object.__setattr__(self, "delta_y", float(self.delta_y))
        object.__setattr__(self, "beta_x", bx)
        object.__setattr__(self, "delta_x", dx)
        object.__setattr__(self, "covariate_laws", laws)

    @property
    def p(self):
        return len(self.beta_x)

    @property
    def beta(self):
        return np.array([self.beta0, *self.beta_x])

    @property
    def delta(self):
        return np.array([self.delta0, *self.delta_x, self.delta_y])

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "beta0": self.beta0,
            "beta_x": list(self.beta_x),
            "delta0": self.delta0,
            "delta_x": list(self.delta_x),
            "delta_y": self.delta_y,
            "covariate_laws": [law.to_dict() for law in self.covariate_laws],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["beta0"], tuple(d["beta_x"]), d["delta0"], tuple(d["delta_x"]),
                       d["delta_y"], tuple(d.get("covariate_laws") or ()) or None)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad truth specification: {exc!r}") from None


DEFAULT_TRUTH = TruthSpec(beta0=-3.0, beta_x=(1.0,), delta0=1.0, delta_x=(-0.5,), delta_y=-2.0)


def _rows(t, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1) if x.shape[0] == t.p else x.reshape(-1, 1)
    if x.shape[1] != t.p:
        raise InputError(f"covariate rows have {x.shape[1]} columns, truth has {t.p}")
    if not np.all(np.isfinite(x)):
        raise InputError("covariates must be finite")
    return x


def joint_law(t, x):
    """Vectorized cell probabilities of (Y, S) given each row of ``x``.

    Returns a dict with ``p_y1`` = P(Y=1|x), ``a`` = P(S=1|Y=1,x),
    ``b`` = P(S=1|Y=0,x) and the four joint cells ``p11, p10, p01, p00``
    indexed as ``p{y}{s}``.
    """
    x = _rows(t, x)
    eta_y = t.beta0 + x @ np.asarray(t.beta_x)
    eta_s = t.delta0 + x @ np.asarray(t.delta_x)
    p1 = expit(eta_y)
    p0 = expit(-eta_y)
    a = expit(eta_s + t.delta_y)
    b = expit(eta_s)
    return {
        "p_y1": p1, "a": a, "b": b,
        "p11": p1 * a, "p10": p1 * expit(-(eta_s + t.delta_y)),
        "p01": p0 * b, "p00": p0 * expit(-eta_s),
    }


def pi_true(t, x):
    """P(Y=1 | S=1, x) for each row of ``x``."""
    j = joint_law(t, x)
    return j["p11"] / (j["p11"] + j["p01"])


def selection_prob(t, x):
    """P(S=1 | x) for each row of ``x``."""
    j = joint_law(t, x)
    return j["p11"] + j["p01"]


@dataclass(frozen=True)
class ConditionalTable:
    p_y1: float
    p_s1_y1: float
    p_s1_y0: float
    p_s1: float
    p_y1_s1: float
    p_y1_s0: float
    log_rr_s1_given_y: float
    log_rr_y1_given_s: float
    log_rr_y0_given_s: float

    @property
    def p_y0_s1(self):
        return 1.0 - self.p_y1_s1

    def logit(self, name):
        v = getattr(self, name)
        return float(np.log(v) - np.log1p(-v))


def conditional_table(t, x_row):
    """All marginal, conditional and relative-risk quantities at one covariate value."""
    j = {k: float(v[0]) for k, v in joint_law(t, _rows(t, x_row)[:1]).items()}
    p_s1 = j["p11"] + j["p01"]
    p_s0 = j["p10"] + j["p00"]
    if p_s1 < DEGENERACY_TOL or p_s0 < DEGENERACY_TOL:
        raise DegenerateConditionError(
            f"P(S=1|x)={p_s1:.3g}, P(S=0|x)={p_s0:.3g}: conditioning event degenerate")
    p_y1_s1 = j["p11"] / p_s1
    p_y1_s0 = j["p10"] / p_s0
    p_y0_s1 = j["p01"] / p_s1
    p_y0_s0 = j["p00"] / p_s0
    return ConditionalTable(
        p_y1=j["p_y1"],
        p_s1_y1=j["a"],
        p_s1_y0=j["b"],
        p_s1=p_s1,
        p_y1_s1=p_y1_s1,
        p_y1_s0=p_y1_s0,
        log_rr_s1_given_y=float(np.log(j["a"]) - np.log(j["b"])),
        log_rr_y1_given_s=float(np.log(p_y1_s1) - np.log(p_y1_s0)),
        log_rr_y0_given_s=float(np.log(p_y0_s1) - np.log(p_y0_s0)),
    )


def default_grid():
    """Parameter/covariate grid for the identity checks, one dict per point."""
    points = []
    for beta0 in (-2.0, 0.0, 2.0):
        for delta0 in (-2.0, 0.0, 2.0):
            for beta_x in (-1.0, 0.0, 1.0):
                for delta_x in (-1.0, 0.0, 1.0):
                    for delta_y in (-2.0, -0.5, 0.0, 0.5, 2.0):
                        for x in (-2.0, 0.0, 2.0):
                            points.append(dict(beta0=beta0, beta_x=beta_x, delta0=delta0,
                                               delta_x=delta_x, delta_y=delta_y, x=x))
    return points


# ---------------------------------------------------------------- test-only MLEs


@dataclass
class DirectSearchResult:
    coef: np.ndarray
    log_lik: float
    converged: bool
    unbounded: bool
    n_evals: int


def _neg_loglik(b, X, y, offset, w):
    eta = offset + X @ b
    return -float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def direct_search_mle(design, response, offset=None, weights=None, bound=30.0):
    """Derivative-free Nelder-Mead maximization of the logistic log-likelihood.

    Restarts the simplex from its own optimum until two consecutive rounds
    agree, which guards against the premature collapse Nelder-Mead is known
    for. ``unbounded`` flags separated data (coefficients run past ``bound``
    while the objective keeps improving).
    """
    X = np.asarray(getattr(design, "values", design), dtype=float)
    n, k = X.shape
    if k > 4 or n > 200:
        raise InputError("direct search is limited to k <= 4 coefficients and n <= 200 rows")
    y = np.asarray(response, dtype=float)
    offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    b = np.zeros(k)
    evals = 0
    converged = False
    for _ in range(20):
        res = optimize.minimize(
            _neg_loglik, b, args=(X, y, offset, w), method="Nelder-Mead",
            options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 40000, "maxfev": 40000,
                     "adaptive": True, "initial_simplex": b + np.vstack(
                         [np.zeros(k), 0.5 * np.eye(k)])})
        evals += res.nfev
        if np.max(np.abs(res.x)) > bound:
            return DirectSearchResult(res.x, -res.fun, False, True, evals)
        moved = np.max(np.abs(res.x - b))
        b = res.x
        if moved < 1e-10:
            converged = True
            break
    return DirectSearchResult(b, -_neg_loglik(b, X, y, offset, w), converged, False, evals)


def expected_loglik_mle(X, mean_response, weights):
    """Maximize ``sum w*(m*eta - log(1+exp(eta)))`` for fractional ``m``.

    Used to compute population (infinite-sample) limits of logistic fits on
    a large covariate sample, via scipy's trust-region Newton rather than IRLS.
    """
    X = np.asarray(X, dtype=float)
    m = np.asarray(mean_response, dtype=float)
    w = np.asarray(weights, dtype=float)
    scale = 1.0 / np.sum(w)

    def f(b):
        eta = X @ b
        mu = expit(eta)
        val = -scale * np.sum(w * (m * eta - np.logaddexp(0.0, eta)))
        grad = -scale * X.T @ (w * (m - mu))
        return val, grad

    def hess(b):
        mu = expit(X @ b)
        return scale * (X * (w * mu * (1 - mu))[:, None]).T @ X

    res = optimize.minimize(f, np.zeros(X.shape[1]), jac=True, hess=hess,
                            method="trust-exact", options={"gtol": 1e-12, "maxiter": 500})
    return res.x


def draw_covariates(t, n, seed=0):
    u = np.random.default_rng(seed).random((n, t.p))
    cols = [law.inverse_cdf(u[:, j]) for j, law in enumerate(t.covariate_laws)]
    return np.column_stack(cols) if cols else np.empty((n, 0))


def complete_case_limit(t, n_draws=400_000, seed=12345):
    """Large-sample limit of the naive complete-case logistic fit of Y on [1, x].

    Integrates Y and S out exactly given each drawn covariate row, so the only
    approximation is the Monte Carlo average over covariates.
    """
    x = draw_covariates(t, n_draws, seed)
    X = np.column_stack([np.ones(n_draws), x])
    return expected_loglik_mle(X, pi_true(t, x), selection_prob(t, x))


def marginal_selection_limit(t, branch="rare", n_draws=400_000, seed=12345):
    """Large-sample limit of the step-two marginal selection fit with true P(Y=1|S=1,x).

    Returns ``(coef, implied_delta_y)`` where ``coef`` is ordered
    ``[intercept, x..., gamma]``.
    """
    x = draw_covariates(t, n_draws, seed)
    pi = pi_true(t, x)
    z = pi if branch == "rare" else 1.0 - pi
    X = np.column_stack([np.ones(n_draws), x, z])
    coef = expected_loglik_mle(X, selection_prob(t, x), np.ones(n_draws))
    g = coef[-1]
    dy = -np.log1p(-g) if branch == "rare" else np.log1p(-g)
    return coef, float(dy)
