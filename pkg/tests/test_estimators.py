import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit, ndtr

from oracles import grid_loglik, normal_equations_oracle

from netab.errors import (
    EmptyExposureClassError,
    SeparationWarning,
    SingleClassResponseError,
    SingularDesignError,
    ValidationError,
)
from netab.estimators import (
    ExposureClasses,
    build_design_linear,
    build_design_tau,
    classify_exposure,
    estimate_ate_linear,
    logit_mle,
    ols_fit,
    probit_mle,
    sutva_diff_in_means,
    tau_diff_in_means,
    tau_ols,
    _logit_terms,
    _probit_terms,
)
from netab.graph import parse_edge_list, treated_fraction
from netab.models import ModelParams, generate_from_exposure, true_ate


def loglik(x, y, beta, link):
    return (_probit_terms if link == "probit" else _logit_terms)(x, y, beta)[0]


def random_instance(rng, n, beta=(0.2, 0.8, -0.6), link="logit"):
    z = rng.integers(0, 2, n)
    g = rng.random(n)
    x = build_design_linear(z, g)
    s = x @ np.array(beta)
    p = expit(s) if link == "logit" else ndtr(s)
    y = (rng.random(n) < p).astype(float)
    return x, y


# -- designs and classes -------------------------------------------------------


def test_design_linear():
    np.testing.assert_array_equal(build_design_linear([1, 0], [0.5, 0]), [[1, 1, 0.5], [1, 0, 0]])


def test_design_linear_degenerate_is_rank_one():
    x = build_design_linear(np.zeros(5), np.zeros(5))
    assert np.linalg.matrix_rank(x) == 1


def test_design_linear_from_path_graph():
    g = parse_edge_list("0 1\n1 2")
    z = [1, 0, 1]
    np.testing.assert_array_equal(
        build_design_linear(z, treated_fraction(g, z)), [[1, 1, 0], [1, 0, 1], [1, 1, 0]]
    )


def test_design_length_mismatch():
    with pytest.raises(ValidationError):
        build_design_linear([1, 0], [0.5])


def test_classify_clear_margins():
    c = classify_exposure([0, 1], [0.1, 0.9], 0.85)
    assert c.c0.tolist() == [0] and c.c1.tolist() == [1]
    assert c.c0_bar.size == 0 and c.c1_bar.size == 0


def test_classify_tie_rules():
    # 1 - 0.85 in floating point is 0.15000000000000002; use the exact computed boundary
    lo = 1.0 - 0.85
    c = classify_exposure([0], [lo], 0.85)
    assert c.c0.tolist() == [0]
    c = classify_exposure([1], [0.85], 0.85)
    assert c.c1.tolist() == [0]
    assert classify_exposure([0], [0.15], 0.85).c0.tolist() == [0]


def test_classify_rejects_bad_tau():
    with pytest.raises(ValidationError):
        classify_exposure([0], [0.1], 0.3)


@settings(max_examples=100)
@given(
    st.lists(st.tuples(st.integers(0, 1), st.sampled_from([0, 0.1, 0.15, 0.2, 0.5, 0.8, 0.85, 0.9, 1.0])),
             min_size=1, max_size=40),
    st.sampled_from([0.5, 0.7, 0.85, 1.0]),
)
def test_classify_matches_predicates(pairs, tau):
    z = np.array([p[0] for p in pairs])
    g = np.array([p[1] for p in pairs], dtype=float)
    c = classify_exposure(z, g, tau)
    expected = {"c0": [], "c0_bar": [], "c1": [], "c1_bar": []}
    for i, (zi, gi) in enumerate(pairs):
        if zi == 0 and gi <= 1 - tau:
            expected["c0"].append(i)
        elif zi == 0:
            expected["c0_bar"].append(i)
        elif gi >= tau:
            expected["c1"].append(i)
        else:
            expected["c1_bar"].append(i)
    for name, idx in expected.items():
        assert getattr(c, name).tolist() == idx
    assert sum(c.sizes().values()) == len(pairs)


def test_design_tau_rows():
    x = build_design_tau([0, 1, 0, 1], [0.1, 0.5, 0.2, 0.95], 0.85)
    np.testing.assert_allclose(
        x, [[1, 0, 0], [1, 1, -0.35], [1, 0, 0.05], [1, 1, 0]], atol=1e-15
    )


# -- OLS -----------------------------------------------------------------------


def test_ols_interpolates_exact_data(rng):
    x = build_design_linear(rng.integers(0, 2, 20), rng.random(20))
    res = ols_fit(x, x @ np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(res.beta_hat, [1, 2, 3], atol=1e-10)
    assert res.sigma2_hat == pytest.approx(0, abs=1e-20)


def test_ols_singular_design_names_column():
    x = build_design_linear(np.ones(10), np.full(10, 0.3))
    with pytest.raises(SingularDesignError) as exc:
        ols_fit(x, np.arange(10.0))
    assert exc.value.column == "treatment"
    x = build_design_linear([0, 1, 0, 1], np.zeros(4))
    with pytest.raises(SingularDesignError, match="exposure"):
        ols_fit(x, np.arange(4.0))


def test_ols_matches_normal_equations(rng):
    for _ in range(5):
        x = build_design_linear(rng.integers(0, 2, 50), rng.random(50))
        y = x @ np.array([0.3, 1.0, -0.5]) + rng.normal(size=50)
        res = ols_fit(x, y)
        np.testing.assert_allclose(res.beta_hat, normal_equations_oracle(x, y), atol=1e-8)
        resid = y - x @ normal_equations_oracle(x, y)
        assert res.sigma2_hat == pytest.approx(resid @ resid / 47, rel=1e-10)


def test_linear_ate_noiseless():
    rng = np.random.default_rng(3)
    z, g = rng.integers(0, 2, 30), rng.random(30)
    x = build_design_linear(z, g)
    assert estimate_ate_linear(x, x @ np.array([0, 1, 0.5])).ate_hat == pytest.approx(1.5, abs=1e-12)
    assert estimate_ate_linear(x, np.full(30, 4.0)).ate_hat == pytest.approx(0, abs=1e-12)


def test_linear_ate_matches_oracle(rng):
    x = build_design_linear(rng.integers(0, 2, 80), rng.random(80))
    y = x @ np.array([0.0, 1.0, 1.0]) + rng.normal(size=80)
    b = normal_equations_oracle(x, y)
    assert estimate_ate_linear(x, y).ate_hat == pytest.approx(b[1] + b[2], abs=1e-8)


def test_ols_unbiased_over_replications():
    rng = np.random.default_rng(8)
    n, reps = 300, 600
    z, g = rng.integers(0, 2, n), rng.random(n)
    x = build_design_linear(z, g)
    params = ModelParams(0, 1, 1)
    est = np.array([
        estimate_ate_linear(x, generate_from_exposure("linear", params, z, g, rng).y).ate_hat
        for _ in range(reps)
    ])
    se = est.std(ddof=1) / np.sqrt(reps)
    assert abs(est.mean() - true_ate("linear", params)) < 3 * se


# -- tau estimators ------------------------------------------------------------


def tau_instance(rng, n=400, tau=0.85):
    z = rng.integers(0, 2, n)
    # mix of saturated and unsaturated exposure values
    g = np.where(rng.random(n) < 0.4, np.where(z == 1, 1.0, 0.0), rng.random(n))
    return z, g, tau


def test_tau_ols_noiseless():
    rng = np.random.default_rng(4)
    z, g, tau = tau_instance(rng)
    p = ModelParams(0, 1, 1, sigma=1e-12, tau=tau)
    y = generate_from_exposure("tau", p, z, g, rng).y
    res = tau_ols(z, g, tau, y)
    assert res.ate_hat == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(res.beta_hat, [0, 1, 1], atol=1e-9)


def test_tau_ols_all_saturated_is_singular():
    z = np.array([0, 0, 1, 1, 0, 1])
    g = np.where(z == 1, 1.0, 0.0)
    with pytest.raises(SingularDesignError, match="exposure"):
        tau_ols(z, g, 0.85, np.arange(6.0))
    # the difference in means still works on the same data
    assert tau_diff_in_means(np.arange(6.0), classify_exposure(z, g, 0.85)).ate_hat == pytest.approx(
        np.mean([2, 3, 5]) - np.mean([0, 1, 4])
    )


def test_tau_ols_matches_oracle(rng):
    z, g, tau = tau_instance(rng, n=120)
    y = generate_from_exposure("tau", ModelParams(0, 1, 0.5), z, g, rng).y
    b = normal_equations_oracle(build_design_tau(z, g, tau), y)
    assert tau_ols(z, g, tau, y).ate_hat == pytest.approx(b[1], abs=1e-8)


def test_tau_diff_in_means_hand_value():
    c = ExposureClasses(c0=np.array([2, 3]), c0_bar=np.array([], int), c1=np.array([0, 1]),
                        c1_bar=np.array([], int))
    assert tau_diff_in_means([1.0, 2, 3, 4], c).ate_hat == -2.0


def test_tau_diff_in_means_empty_class():
    c = classify_exposure([1, 1, 0], [0.1, 0.2, 0.9], 0.85)
    with pytest.raises(EmptyExposureClassError) as exc:
        tau_diff_in_means([1.0, 2.0, 3.0], c)
    assert (exc.value.n_c1, exc.value.n_c0) == (0, 0)
    assert "|C1|=0" in str(exc.value) and "|C0|=0" in str(exc.value)


def test_tau_diff_in_means_matches_summation(rng):
    z, g, tau = tau_instance(rng)
    y = rng.normal(size=z.size)
    c = classify_exposure(z, g, tau)
    s1 = s0 = 0.0
    n1 = n0 = 0
    for i in range(z.size):
        if z[i] == 1 and g[i] >= tau:
            s1 += y[i]
            n1 += 1
        elif z[i] == 0 and g[i] <= 1 - tau:
            s0 += y[i]
            n0 += 1
    assert tau_diff_in_means(y, c).ate_hat == pytest.approx(s1 / n1 - s0 / n0, abs=1e-12)


def test_tau_diff_in_means_mse_matches_closed_form():
    rng = np.random.default_rng(21)
    z, g, tau = tau_instance(rng, n=300)
    params = ModelParams(0, 1, 1, sigma=1.0, tau=tau)
    c = classify_exposure(z, g, tau)
    est = np.array([
        tau_diff_in_means(generate_from_exposure("tau", params, z, g, rng).y, c).ate_hat
        for _ in range(1000)
    ])
    mse = np.mean((est - 1.0) ** 2)
    closed = 1.0 / c.c1.size + 1.0 / c.c0.size
    assert abs(mse / closed - 1) < 0.15
    assert abs(est.mean() - 1.0) < 3 * est.std(ddof=1) / np.sqrt(est.size)


def test_sutva_examples():
    assert sutva_diff_in_means([1.0, 2, 3, 4], [1, 1, 0, 0]).ate_hat == -2.0
    z = np.array([1, 0, 1, 1, 0])
    assert sutva_diff_in_means(z.astype(float), z).ate_hat == 1.0


def test_sutva_one_arm_empty():
    with pytest.raises(EmptyExposureClassError, match="treatment arm"):
        sutva_diff_in_means([1.0, 2.0], [1, 1])


@given(st.lists(st.tuples(st.integers(0, 1), st.floats(-1e3, 1e3)), min_size=2, max_size=50))
def test_sutva_is_diff_in_means_on_arms(pairs):
    z = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if z.min() == z.max():
        return
    arms = ExposureClasses(c0=np.flatnonzero(z == 0), c0_bar=np.array([], int),
                           c1=np.flatnonzero(z == 1), c1_bar=np.array([], int))
    assert sutva_diff_in_means(y, z).ate_hat == tau_diff_in_means(y, arms).ate_hat


# -- MLE -----------------------------------------------------------------------


@pytest.mark.parametrize("link,fit", [("probit", probit_mle), ("logit", logit_mle)])
def test_mle_dominates_grid(link, fit):
    rng = np.random.default_rng(17 if link == "probit" else 18)
    for _ in range(3):
        x, y = random_instance(rng, 30, link=link)
        res = fit(x, y)
        assert res.converged
        best_grid = grid_loglik(x, y, link).max()
        assert loglik(x, y, res.beta_hat, link) >= best_grid - 1e-9


@pytest.mark.parametrize("fit,terms", [(probit_mle, _probit_terms), (logit_mle, _logit_terms)])
def test_mle_score_is_zero_at_convergence(fit, terms, rng):
    x, y = random_instance(rng, 500)
    res = fit(x, y)
    assert res.converged
    assert np.max(np.abs(terms(x, y, res.beta_hat)[1])) < 1e-8
    assert 0 < res.iterations <= 100


def test_probit_null_model():
    rng = np.random.default_rng(2)
    n = 20_000
    z, g = rng.integers(0, 2, n), rng.random(n)
    y = generate_from_exposure("probit", ModelParams(0, 0, 0), z, g, rng).y
    res = probit_mle(build_design_linear(z, g), y)
    # null-model ATE has sd about sqrt(2 * 0.25 / (n/2)) * 2 from the g extrapolation; 3 SE is generous
    assert abs(res.ate_hat) < 3 * 0.03
    assert np.all(np.abs(res.beta_hat) < 0.1)


def test_logit_ate_formula():
    from netab.models import logistic_ate

    assert logistic_ate([0, 0, 0]) == 0.0
    assert logistic_ate([0, 1, 1]) == pytest.approx(0.3808, abs=5e-5)


@pytest.mark.parametrize("fit", [probit_mle, logit_mle])
def test_mle_single_class_rejected(fit):
    x = build_design_linear([0, 1, 0, 1], [0.1, 0.2, 0.3, 0.4])
    with pytest.raises(SingleClassResponseError):
        fit(x, np.ones(4))


@pytest.mark.parametrize("fit", [probit_mle, logit_mle])
def test_mle_non_binary_rejected(fit):
    x = build_design_linear([0, 1, 0, 1], [0.1, 0.2, 0.3, 0.4])
    with pytest.raises(ValidationError):
        fit(x, np.array([0, 1, 2, 1.0]))


@pytest.mark.parametrize("fit", [probit_mle, logit_mle])
def test_mle_separation_flagged(fit):
    z = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    g = np.array([0.1, 0.3, 0.2, 0.4, 0.6, 0.5, 0.7, 0.9])
    y = z.astype(float)  # treatment perfectly separates the classes
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fit(build_design_linear(z, g), y)
    assert not res.converged
    assert res.warning
    assert any(issubclass(w.category, SeparationWarning) for w in caught)
    assert np.isfinite(res.ate_hat)


@pytest.mark.slow
@pytest.mark.parametrize("fit,kind", [(probit_mle, "probit"), (logit_mle, "logistic")])
def test_mle_consistency(fit, kind):
    params = ModelParams(0, 1, 1)
    truth = true_ate(kind, params)
    rng = np.random.default_rng(5)
    mae = []
    for n, reps in [(500, 30), (5000, 30), (50000, 10)]:
        errs = []
        for _ in range(reps):
            z, g = rng.integers(0, 2, n), rng.random(n)
            y = generate_from_exposure(kind, params, z, g, rng).y
            errs.append(abs(fit(build_design_linear(z, g), y).ate_hat - truth))
        mae.append(np.mean(errs))
    assert mae[0] > mae[1] > mae[2]
