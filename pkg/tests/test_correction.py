import numpy as np
import pytest
from scipy.special import expit

from mnarlogit import correction
from mnarlogit.correction import (
    DeltaEstimate,
    delta_y_from_gamma,
    fit_corrected,
    fit_marginal_selection,
    log_rr_s_given_y,
    log_rr_y_given_s_approx,
    log_rr_y_given_s_exact,
    selection_offset,
)
from mnarlogit.data import Dataset
from mnarlogit.exceptions import (
    BootstrapFailureError,
    DegenerateDataError,
    IdentificationError,
    InputError,
    SeparationError,
)
from mnarlogit.oracle import DEFAULT_TRUTH, TruthSpec, conditional_table, marginal_selection_limit
from mnarlogit.simulation import generate_dataset
from mnarlogit.smoother import fit_pi_hat


def test_log_rr_s_given_y_examples():
    delta = (0.5, [1.0], 1.5)
    assert log_rr_s_given_y(delta, [-0.3]) == pytest.approx(np.log(0.845535 / 0.549834), abs=1e-6)
    assert log_rr_s_given_y(delta, [-0.3]) == pytest.approx(0.43035, abs=5e-6)
    assert log_rr_s_given_y((0.5, [1.0], 0.0), [3.7]) == 0.0
    with pytest.raises(InputError):
        log_rr_s_given_y((0.5, [1.0], -np.inf), [0.0])
    with pytest.raises(InputError):
        log_rr_s_given_y(delta, [np.nan])


def test_selection_offset_stable_in_tails():
    off = selection_offset((0.0, [1.0], -2.0), np.array([[-800.0], [800.0]]))
    assert np.all(np.isfinite(off))
    assert off[0] == pytest.approx(-2.0)
    assert off[1] == pytest.approx(0.0, abs=1e-300)


def test_log_rr_y_given_s_exact_examples():
    assert log_rr_y_given_s_exact(1.0, 0.9, "Y=1") == pytest.approx(np.log(2.54645), abs=1e-5)
    assert log_rr_y_given_s_exact(1.0, 0.9, "Y=1") == pytest.approx(0.93470, abs=5e-6)
    assert log_rr_y_given_s_exact(1.0, 0.0, "Y=0") == 0.0
    for which in ("Y=1", "Y=0"):
        assert log_rr_y_given_s_exact(0.0, 0.37, which) == 0.0
    with pytest.raises(InputError):
        log_rr_y_given_s_exact(1.0, 1.2, "Y=1")


def test_exact_identity_on_engineered_truth():
    # no covariates, beta0 and delta0 chosen so that P(Y=0|S=1) = 0.9 with delta_y = 1
    b = 0.3
    p1 = 0.1 * b / (0.1 * b + 0.9 * expit(np.log(b / (1 - b)) + 1.0))
    t = TruthSpec(np.log(p1 / (1 - p1)), (), np.log(b / (1 - b)), (), 1.0)
    ct = conditional_table(t, [])
    assert ct.p_y0_s1 == pytest.approx(0.9, abs=1e-12)
    assert ct.log_rr_y1_given_s == pytest.approx(log_rr_y_given_s_exact(1.0, 0.9, "Y=1"),
                                                 abs=1e-12)


def test_log_rr_approx_examples():
    approx = log_rr_y_given_s_approx(0.5, 0.05, "Y=1")
    exact = log_rr_y_given_s_exact(0.5, 0.05, "Y=1")
    assert approx == pytest.approx(0.032436, abs=5e-7)
    assert exact == pytest.approx(np.log1p(np.expm1(0.5) * 0.05), rel=1e-14)
    assert exact == pytest.approx(0.031922, abs=1e-6)
    assert abs(exact - approx) <= approx ** 2 / 2
    assert log_rr_y_given_s_approx(1.7, 0.0, "Y=0") == 0.0
    assert log_rr_y_given_s_approx(0.0, 0.4, "Y=1") == 0.0


def test_approximation_gap_bound():
    dy = np.linspace(-3, 3, 61)
    prob = np.linspace(0, 1, 41)
    for which in ("Y=1", "Y=0"):
        for d in dy:
            u = log_rr_y_given_s_approx(d, prob, which)
            gap = log_rr_y_given_s_exact(d, prob, which) - u
            # log(1+u) <= u always; bounded by u^2/2 on the nonnegative side
            assert np.all(gap <= 1e-15)
            pos = u >= 0
            assert np.all(-gap[pos] <= u[pos] ** 2 / 2 + 1e-15)


def test_gamma_inversion():
    assert delta_y_from_gamma(0.3, "rare") == pytest.approx(0.35667, abs=5e-6)
    assert delta_y_from_gamma(0.3, "frequent") == pytest.approx(-0.35667, abs=5e-6)
    with pytest.raises(IdentificationError):
        delta_y_from_gamma(1.2, "rare")
    with pytest.raises(IdentificationError):
        delta_y_from_gamma(1.0, "frequent")


def test_marginal_fit_raises_when_gamma_exceeds_one():
    rng = np.random.default_rng(7)
    n = 4000
    x = rng.normal(size=(n, 1))
    pi = rng.uniform(0.05, 0.45, n)
    s = (rng.random(n) < expit(-1.0 + 6.0 * pi)).astype(float)
    y = np.where(s == 1, (rng.random(n) < 0.3).astype(float), np.nan)
    d = Dataset.from_arrays(x, y, s)
    with pytest.raises(IdentificationError) as info:
        fit_marginal_selection(d, pi, "rare")
    assert info.value.gamma_hat > 1
    assert info.value.gamma_se > 0


def test_delta_y_recovery_with_oracle_pi():
    # single-sample SD of delta_y_hat is ~0.4 at this n, so judge the Monte Carlo median;
    # the tolerance carries the first-order approximation bias computed by the oracle
    _, limit = marginal_selection_limit(DEFAULT_TRUTH, "rare")
    approx_bias = abs(limit - DEFAULT_TRUTH.delta_y)
    est = []
    for i in range(60):
        d = generate_dataset(DEFAULT_TRUTH, 20000, 1000 + i)[0]
        pi = fit_pi_hat(d, "oracle-truth", truth=DEFAULT_TRUTH)
        est.append(fit_marginal_selection(d, pi, "rare").delta_y)
    med = float(np.median(est))
    assert abs(med - limit) <= 0.15
    assert abs(med - DEFAULT_TRUTH.delta_y) <= 0.15 + approx_bias


def test_branch_symmetry():
    t = DEFAULT_TRUTH
    d, full_y = generate_dataset(t, 20000, 0)
    flipped = TruthSpec(-t.beta0, (-t.beta_x[0],), t.delta0 + t.delta_y, t.delta_x, -t.delta_y)
    y_flip = np.where(d.s == 1, 1.0 - full_y, np.nan)
    d_flip = Dataset.from_arrays(d.x, y_flip, d.s)
    rare = fit_marginal_selection(d, fit_pi_hat(d, "oracle-truth", truth=t), "rare")
    freq = fit_marginal_selection(d_flip, fit_pi_hat(d_flip, "oracle-truth", truth=flipped),
                                  "frequent")
    assert rare.branch == "rare" and freq.branch == "frequent"
    assert freq.delta_y == pytest.approx(-rare.delta_y, abs=1e-8)
    assert freq.delta0 == pytest.approx(rare.delta0 + rare.delta_y, abs=1e-8)
    np.testing.assert_allclose(freq.delta_x, rare.delta_x, atol=1e-8)


def test_frequent_branch_invariants():
    t = TruthSpec(2.5, (1.0,), 0.5, (-0.5,), 1.5)
    d = generate_dataset(t, 5000, 2)[0]
    est = fit_corrected(d)
    de = est.delta
    assert de.branch == "frequent"
    assert de.gamma_hat < 1
    assert de.delta_y == pytest.approx(np.log(1 - de.gamma_hat), rel=1e-14)
    assert de.delta0 == pytest.approx(de.marginal_fit.coef[0] - de.delta_y, rel=1e-14)


def test_zero_delta_y_collapse_is_exact():
    t = DEFAULT_TRUTH.replace(delta_y=0.0)
    d = generate_dataset(t, 3000, 5)[0]
    est = fit_corrected(d, "oracle-truth", truth=t, delta=t)
    assert np.all(est.offset == 0.0)
    np.testing.assert_array_equal(est.beta, est.naive_beta)


def test_empty_subsample_rejected():
    d = Dataset.from_arrays(np.arange(5.0), [np.nan] * 5, np.zeros(5))
    with pytest.raises(DegenerateDataError):
        fit_corrected(d)


def test_no_missingness_returns_naive():
    t = DEFAULT_TRUTH.replace(delta0=30.0, delta_x=(0.0,))
    d = generate_dataset(t, 2000, 2)[0]
    est = fit_corrected(d)
    assert est.delta is None
    np.testing.assert_array_equal(est.beta, est.naive_beta)
    assert "no_missingness" in est.warning_codes()


def test_warnings(mnar_data):
    est = fit_corrected(mnar_data)
    codes = est.warning_codes()
    assert "plugin_se" in codes and "approx_quality" not in codes
    assert est.approx_quality <= 0.2
    est = fit_corrected(mnar_data, "parametric-logit")
    assert "smoother_misspecification" in est.warning_codes()
    t = DEFAULT_TRUTH.replace(beta0=0.0)
    common = generate_dataset(t, 3000, 9)[0]
    est = fit_corrected(common, "oracle-truth", "rare", truth=t, delta=t)
    assert est.approx_quality > 0.2
    assert "approx_quality" in est.warning_codes()


def test_step_tagging_on_failure():
    t = TruthSpec(-1.0, (1.0,), 0.0, (0.5,), 0.0)
    d = generate_dataset(t, 500, 3)[0]
    with pytest.raises(InputError):
        fit_corrected(d, "oracle-truth")
    try:
        fit_corrected(d, "oracle-truth")
    except InputError as exc:
        assert exc.step == 1


def test_bootstrap_deterministic(mnar_data):
    d = mnar_data.take(np.arange(1500))
    a = fit_corrected(d, "parametric-logit", bootstrap_reps=12, seed=3)
    b = fit_corrected(d, "parametric-logit", bootstrap_reps=12, seed=3)
    c = fit_corrected(d, "parametric-logit", bootstrap_reps=12, seed=3, n_jobs=2)
    np.testing.assert_array_equal(a.bootstrap_se, b.bootstrap_se)
    np.testing.assert_array_equal(a.bootstrap_se, c.bootstrap_se)
    assert a.bootstrap.successes + sum(a.bootstrap.failures.values()) == 12
    assert np.all(a.bootstrap_se > 0)


def test_bootstrap_failure_threshold(monkeypatch, mnar_data):
    real = correction.fit_corrected
    calls = {"n": 0}

    def flaky(d, **kw):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise SeparationError("forced")
        return real(d, **kw)

    monkeypatch.setattr(correction, "fit_corrected", flaky)
    d = mnar_data.take(np.arange(1000))
    # known delta keeps step 2 (and its identification failures) out of the way
    kw = dict(smoother_kind="parametric-logit", truth=DEFAULT_TRUTH, delta=DEFAULT_TRUTH)
    with pytest.raises(BootstrapFailureError) as info:
        correction.bootstrap(d, 10, **kw)
    assert info.value.failures == {"SeparationError": 3}
    calls["n"] = 0

    def rare_fail(d, **kw):
        calls["n"] += 1
        if calls["n"] in (4, 9):
            raise SeparationError("forced")
        return real(d, **kw)

    monkeypatch.setattr(correction, "fit_corrected", rare_fail)
    summary = correction.bootstrap(d, 10, **kw)
    assert summary.successes == 8 and summary.failures == {"SeparationError": 2}


def test_delta_estimate_round_trip():
    de = DeltaEstimate.from_truth(DEFAULT_TRUTH)
    np.testing.assert_array_equal(de.vector, [1.0, -0.5, -2.0])
    assert de.to_dict()["delta_y"] == -2.0
