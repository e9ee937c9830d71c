"""Data generation and the Monte Carlo comparison of full-data, naive and corrected fits."""

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import glm
from ._jsonutil import dumps
from ._parallel import pmap
from .correction import AUTO, BRANCHES, fit_corrected
from .data import BINARY, CONTINUOUS, Dataset, make_design
from .exceptions import ConfigError, McFailureError, MnarLogitError
from .oracle import DEFAULT_TRUTH, TruthSpec
from .rng import derived_seed, stream
from .smoother import SMOOTHER_KINDS, SPLINE_GAM

ESTIMATORS = ("full_data", "naive", "corrected")
MAX_CORRECTED_FAILURE_RATE = 0.5


@dataclass(frozen=True)
class SimConfig:
    truth: TruthSpec = DEFAULT_TRUTH
    n: int = 5000
    replications: int = 500
    seed: int = 20241014
    smoother_kind: str = SPLINE_GAM
    branch: str = AUTO
    bootstrap_reps: int = 0

    def __post_init__(self):
        if not isinstance(self.truth, TruthSpec):
            raise ConfigError("truth must be a TruthSpec")
        for name in ("n", "replications", "seed", "bootstrap_reps"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.n < 50:
            raise ConfigError(f"n must be >= 50, got {self.n}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.bootstrap_reps < 0:
            raise ConfigError("bootstrap_reps must be >= 0")
        if self.smoother_kind not in SMOOTHER_KINDS:
            raise ConfigError(f"smoother must be one of {SMOOTHER_KINDS}")
        if self.branch not in BRANCHES:
            raise ConfigError(f"branch must be one of {BRANCHES}")

    def to_dict(self):
        return {"truth": self.truth.to_dict(), "n": self.n, "replications": self.replications,
                "seed": self.seed, "smoother": self.smoother_kind, "branch": self.branch,
                "bootstrap_reps": self.bootstrap_reps}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        known = {"truth", "n", "replications", "seed", "smoother", "branch", "bootstrap_reps"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        truth = TruthSpec.from_dict(d["truth"]) if "truth" in d else DEFAULT_TRUTH
        kw = {k: d[k] for k in ("n", "replications", "seed", "branch", "bootstrap_reps")
              if k in d}
        if "smoother" in d:
            kw["smoother_kind"] = d["smoother"]
        return cls(truth=truth, **kw)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw)


def generate_dataset(truth, n, seed):
    """Draw ``n`` units from the outcome and selection models.

    All randomness comes from uniforms consumed in a fixed order: one block
    of ``n`` per covariate (mapped through the law's inverse CDF), then ``n``
    for Y, then ``n`` for S; Bernoulli draws are ``u < p``.

    Returns
    -------
    (Dataset, full_y)
        The dataset has ``y`` masked where ``s == 0``; ``full_y`` keeps every outcome.
    """
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    cols = [law.inverse_cdf(rng.random(n)) for law in truth.covariate_laws]
    x = np.column_stack(cols) if cols else np.empty((n, 0))
    y = (rng.random(n) < expit(truth.beta0 + x @ np.asarray(truth.beta_x))).astype(float)
    eta_s = truth.delta0 + x @ np.asarray(truth.delta_x) + truth.delta_y * y
    s = (rng.random(n) < expit(eta_s)).astype(float)
    kinds = tuple(BINARY if law.is_binary else CONTINUOUS for law in truth.covariate_laws)
    names = tuple(f"x{j + 1}" for j in range(truth.p))
    return Dataset.from_arrays(x, y, s, column_names=names, column_kinds=kinds), y


def _replicate(args):
    cfg, i = args
    d, full_y = generate_dataset(cfg.truth, cfg.n, stream(cfg.seed, i))
    out = {"index": i, "observed_fraction": float(d.s.mean()), "estimates": {},
           "errors": {}, "warnings": [], "approx_quality": None, "delta_y": None}
    design = make_design(d.x, d.column_names)
    try:
        out["estimates"]["full_data"] = glm.fit(design, full_y).coef
    except MnarLogitError as exc:
        out["errors"]["full_data"] = type(exc).__name__
    try:
        obs = d.s == 1
        out["estimates"]["naive"] = glm.fit(design.values[obs], full_y[obs]).coef
    except MnarLogitError as exc:
        out["errors"]["naive"] = type(exc).__name__
    try:
        est = fit_corrected(d, cfg.smoother_kind, cfg.branch, cfg.bootstrap_reps,
                            seed=derived_seed(cfg.seed, i), truth=cfg.truth)
    except MnarLogitError as exc:
        out["errors"]["corrected"] = type(exc).__name__
    else:
        out["estimates"]["corrected"] = est.beta
        out["warnings"] = est.warning_codes()
        out["approx_quality"] = est.approx_quality
        if est.delta is not None:
            out["delta_y"] = est.delta.delta_y
    return out


def _summary(values, truth):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    sd = float(values.std())
    bias = mean - truth
    return {"mean": mean, "bias": bias, "sd": sd,
            "rmse": float(np.sqrt(np.mean((values - truth) ** 2))),
            "mc_se": sd / np.sqrt(values.size)}


@dataclass
class McReport:
    """Aggregated Monte Carlo results; ``to_dict`` is the machine-readable form."""

    config: dict
    labels: tuple
    truth_beta: np.ndarray
    estimators: dict
    mean_observed_fraction: float
    mean_approx_quality: float
    failures: dict
    warning_counts: dict
    delta_y: dict
    replicates: list

    def stat(self, estimator, coef, key):
        return self.estimators[estimator]["coefficients"][coef][key]

    def warning_rate(self, code):
        ok = self.estimators["corrected"]["n_ok"]
        return self.warning_counts.get(code, 0) / ok if ok else 0.0

    def to_dict(self):
        return {
            "config": self.config,
            "labels": list(self.labels),
            "truth_beta": [float(v) for v in self.truth_beta],
            "estimators": self.estimators,
            "mean_observed_fraction": self.mean_observed_fraction,
            "mean_approx_quality": self.mean_approx_quality,
            "failures": self.failures,
            "warning_counts": self.warning_counts,
            "delta_y": self.delta_y,
            "replicates": self.replicates,
        }

    def to_json(self):
        return dumps(self.to_dict())

    def render_table(self):
        lines = [f"Monte Carlo: R={self.config['replications']} n={self.config['n']} "
                 f"seed={self.config['seed']} smoother={self.config['smoother']} "
                 f"branch={self.config['branch']}",
                 f"{'estimator':<10} {'coef':<10} {'truth':>8} {'mean':>9} {'bias':>9} "
                 f"{'sd':>8} {'rmse':>8} {'ok':>5}"]
        for name in ESTIMATORS:
            e = self.estimators[name]
            for j, lab in enumerate(self.labels):
                c = e["coefficients"].get(lab)
                if c is None:
                    lines.append(f"{name:<10} {lab:<10} {self.truth_beta[j]:>8.3f}  (no successes)")
                    continue
                lines.append(f"{name:<10} {lab:<10} {self.truth_beta[j]:>8.3f} {c['mean']:>9.4f} "
                             f"{c['bias']:>9.4f} {c['sd']:>8.4f} {c['rmse']:>8.4f} "
                             f"{e['n_ok']:>5}")
        lines.append(f"mean observed fraction: {self.mean_observed_fraction:.4f}")
        lines.append(f"mean approx_quality:    {self.mean_approx_quality:.4f}")
        if self.delta_y:
            lines.append(f"delta_y estimate: mean {self.delta_y['mean']:.4f}, "
                         f"median {self.delta_y['median']:.4f} (truth {self.delta_y['truth']})")
        for name, counts in self.failures.items():
            if counts:
                lines.append(f"failures[{name}]: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
        for code, count in self.warning_counts.items():
            lines.append(f"warning {code}: {count}")
        return "\n".join(lines)


def aggregate(cfg, results):
    results = sorted(results, key=lambda r: r["index"])
    labels = ("intercept",) + tuple(f"x{j + 1}" for j in range(cfg.truth.p))
    truth_beta = cfg.truth.beta
    estimators, failures = {}, {}
    for name in ESTIMATORS:
        est = np.array([r["estimates"][name] for r in results if name in r["estimates"]])
        failures[name] = dict(sorted(Counter(
            r["errors"][name] for r in results if name in r["errors"]).items()))
        coefs = {}
        if est.size:
            for j, lab in enumerate(labels):
                coefs[lab] = _summary(est[:, j], truth_beta[j])
        estimators[name] = {"n_ok": int(est.shape[0]) if est.size else 0, "coefficients": coefs}
    aq = [r["approx_quality"] for r in results if r["approx_quality"] is not None]
    dy = np.array([r["delta_y"] for r in results if r["delta_y"] is not None])
    warning_counts = dict(sorted(Counter(c for r in results for c in r["warnings"]).items()))
    replicates = [{
        "index": r["index"],
        "observed_fraction": r["observed_fraction"],
        "estimates": {k: [float(v) for v in r["estimates"][k]] for k in ESTIMATORS
                      if k in r["estimates"]},
        "errors": r["errors"],
        "delta_y": r["delta_y"],
        "approx_quality": r["approx_quality"],
    } for r in results]
    return McReport(
        config=cfg.to_dict(), labels=labels, truth_beta=truth_beta, estimators=estimators,
        mean_observed_fraction=float(np.mean([r["observed_fraction"] for r in results])),
        mean_approx_quality=float(np.mean(aq)) if aq else float("nan"),
        failures=failures, warning_counts=warning_counts,
        delta_y=({"mean": float(dy.mean()), "median": float(np.median(dy)),
                  "sd": float(dy.std()), "truth": cfg.truth.delta_y} if dy.size else {}),
        replicates=replicates)


def run_monte_carlo(cfg, n_jobs=None):
    """Run ``cfg.replications`` independent replications and aggregate them.

    Replicate ``i`` draws from the stream ``(cfg.seed, i)``; aggregation is in
    replicate-index order, so the report does not depend on ``n_jobs``.

    Raises
    ------
    McFailureError
        If more than half of the corrected fits fail; the partial report is
        attached as ``report``.
    """
    results = pmap(_replicate, [(cfg, i) for i in range(cfg.replications)], n_jobs)
    report = aggregate(cfg, results)
    n_fail = sum(report.failures["corrected"].values())
    if n_fail > MAX_CORRECTED_FAILURE_RATE * cfg.replications:
        raise McFailureError(
            f"{n_fail} of {cfg.replications} corrected fits failed: "
            f"{report.failures['corrected']}", failures=report.failures["corrected"],
            report=report)
    return report
