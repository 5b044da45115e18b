"""Acceptance criteria, one PASS/FAIL line each.

The lines are collected in ``ACCEPTANCE_RESULTS`` and printed in the pytest
terminal summary (see conftest.py). Run just this module with
``pytest tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from oracles import expected_neg_hessian, grid_loglik, normal_equations_oracle

from netab.bounds import fim_logit, fim_probit, logit_ate_gradient, probit_ate_gradient
from netab.cli import main
from netab.estimators import _logit_terms, _probit_terms, build_design_linear, logit_mle, ols_fit, probit_mle
from netab.experiment import CORRECT_ESTIMATORS, DEFAULT_SEED, PAPER_GRID, ExperimentConfig, run_study, welch_test
from netab.graph import erdos_renyi
from netab.models import ModelKind, ModelParams, logistic_ate, probit_ate, true_ate

pytestmark = pytest.mark.filterwarnings("ignore::netab.errors.RealismWarning")

ACCEPTANCE_RESULTS = {}


def record(key, ok, detail):
    ACCEPTANCE_RESULTS[key] = f"{key}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, ACCEPTANCE_RESULTS[key]


@pytest.fixture(scope="module")
def er2000():
    return erdos_renyi(2000, 12, seed=DEFAULT_SEED)


TABLE_ATES = {
    ModelKind.LOGISTIC: (0.23, 0.32, 0.23, 0.38, 0.45),
    ModelKind.PROBIT: (0.34, 0.43, 0.34, 0.48, 0.50),
    ModelKind.TAU_EXPOSURE_BINARY: (0.00, 0.34, 0.34, 0.34, 0.34),
    ModelKind.LINEAR: (1.00, 1.50, 1.00, 2.00, 3.00),
    ModelKind.TAU_EXPOSURE: (0.00, 1.00, 1.00, 1.00, 1.00),
}


def test_criterion_1_table_header_ates():
    worst = 0.0
    for kind, expected in TABLE_ATES.items():
        for beta, want in zip(PAPER_GRID, expected):
            worst = max(worst, abs(true_ate(kind, ModelParams(*beta)) - want))
    record("criterion 1 (table ATEs)", worst <= 0.005, f"max |diff| = {worst:.4f} (tol 0.005)")


def test_criterion_2_bound_attainment(er2000):
    t0 = time.perf_counter()
    lin = run_study(ExperimentConfig(model="linear", betas=((0, 1, 1),), reps=1000,
                                     estimators=("linear",)), er2000).cells[0].summary("linear")
    tau = run_study(ExperimentConfig(model="tau", betas=((0, 1, 1),), reps=1000,
                                     estimators=("tau_dim",)), er2000).cells[0].summary("tau_dim")
    elapsed = time.perf_counter() - t0
    in_ci = lin.ci_low <= lin.crlb <= lin.ci_high
    rel = abs(tau.mse / tau.closed_form_mse - 1)
    ok = in_ci and rel <= 0.15 and elapsed < 120
    record(
        "criterion 2 (bound attainment)", ok,
        f"OLS MSE {lin.mse:.5f} CI [{lin.ci_low:.5f}, {lin.ci_high:.5f}] vs CRLB {lin.crlb:.5f}; "
        f"tau diff-in-means MSE {tau.mse:.5f} vs closed form {tau.closed_form_mse:.5f} "
        f"({100 * rel:.1f}% off, tol 15%); {elapsed:.1f}s",
    )


def test_criterion_3_probit_sampling_distribution(er2000):
    cfg = ExperimentConfig(model="probit", betas=((0, 1, 1),), reps=1000, estimators=("probit",))
    est = np.array(run_study(cfg, er2000).cells[0].raw["probit"], dtype=float)
    est = est[np.isfinite(est)]
    se = est.std(ddof=1) / math.sqrt(est.size)
    dev = abs(est.mean() - 0.4772)
    skew = float(stats.skew(est))
    ok = est.size == 1000 and dev <= 3 * se and abs(skew) < 0.3
    record("criterion 3 (probit distribution)", ok,
           f"mean {est.mean():.4f} (|diff| {dev:.4f}, 3 SE = {3 * se:.4f}); skewness {skew:+.3f} (tol 0.3)")


@pytest.fixture(scope="module")
def ordering_studies(er2000):
    return {
        kind: run_study(ExperimentConfig(model=kind, reps=200), er2000)
        for kind in ModelKind
    }


def test_criterion_4a_sutva_best_without_spillover(ordering_studies):
    col = PAPER_GRID.index((0.0, 1.0, 0.0))
    winners = {k.value: ordering_studies[k].cells[col].summaries for k in ModelKind}
    winners = {k: next(s.estimator for s in v if s.best) for k, v in winners.items()}
    ok = all(w == "sutva" for w in winners.values())
    record("criterion 4a (SUTVA best at beta2=0)", ok, f"column winners {winners}")


def test_criterion_4b_sutva_penalty_with_spillover(ordering_studies):
    ratios = {}
    for kind, rep in ordering_studies.items():
        for cell in rep.cells:
            if cell.beta[2] < 1:
                continue
            correct = min(cell.summary(e).mse for e in CORRECT_ESTIMATORS[kind])
            ratios[f"{kind.value}{tuple(cell.beta)}"] = cell.summary("sutva").mse / correct
    short = {k: round(v, 1) for k, v in ratios.items() if v < 10}
    record("criterion 4b (SUTVA >= 10x worse at beta2>=1)", not short,
           f"min ratio {min(ratios.values()):.1f}; below 10x: {short or 'none'}")


def test_criterion_4c_probit_logistic_indistinguishable(ordering_studies):
    rep = ordering_studies[ModelKind.LOGISTIC]
    pvals = []
    for cell in rep.cells:
        # the stored p-value is against the column winner; compare the two MLEs directly
        a = (np.array(cell.raw["probit"], dtype=float) - cell.true_ate) ** 2
        b = (np.array(cell.raw["logistic"], dtype=float) - cell.true_ate) ** 2
        pvals.append(welch_test(a[np.isfinite(a)], b[np.isfinite(b)]))
    n_ok = sum(p > 0.05 for p in pvals)
    record("criterion 4c (probit ~ logistic on logistic data)", n_ok >= 3,
           f"{n_ok}/5 columns with Welch p > 0.05; p = {[round(p, 3) for p in pvals]}")


def test_criterion_5_oracle_equivalences():
    rng = np.random.default_rng(55)
    worst = {"mle_grid": math.inf, "fim": 0.0, "ols": 0.0, "grad": 0.0}
    for _ in range(3):
        z, g = rng.integers(0, 2, 30), rng.random(30)
        x = build_design_linear(z, g)
        for link, fit, terms, sampler in [("probit", probit_mle, _probit_terms, stats.norm.cdf),
                                          ("logit", logit_mle, _logit_terms, lambda s: 1 / (1 + np.exp(-s)))]:
            y = (rng.random(30) < sampler(x @ np.array([0.2, 0.8, -0.6]))).astype(float)
            res = fit(x, y)
            margin = terms(x, y, res.beta_hat)[0] - grid_loglik(x, y, link).max()
            worst["mle_grid"] = min(worst["mle_grid"], margin)
        x = build_design_linear(rng.integers(0, 2, 50), rng.random(50))
        beta = rng.uniform(-1, 1, 3)
        for link, fim in [("probit", fim_probit), ("logit", fim_logit)]:
            ref = expected_neg_hessian(x, beta, link)
            worst["fim"] = max(worst["fim"], float(np.max(np.abs(fim(x, beta).matrix - ref) / np.abs(ref))))
        y = x @ np.array([0.3, 1.0, -0.5]) + rng.normal(size=50)
        worst["ols"] = max(worst["ols"], float(np.max(np.abs(ols_fit(x, y).beta_hat - normal_equations_oracle(x, y)))))
        for ate, grad in [(logistic_ate, logit_ate_gradient), (probit_ate, probit_ate_gradient)]:
            h = 1e-5
            fd = [(ate(beta + h * e) - ate(beta - h * e)) / (2 * h) for e in np.eye(3)]
            worst["grad"] = max(worst["grad"], float(np.max(np.abs(grad(beta) - fd))))
    ok = (worst["mle_grid"] >= -1e-9 and worst["fim"] <= 1e-4 and worst["ols"] <= 1e-8 and worst["grad"] <= 1e-6)
    record("criterion 5 (oracle equivalences)", ok,
           f"MLE - grid max loglik >= {worst['mle_grid']:.3g}; FIM rel err {worst['fim']:.2g}; "
           f"OLS abs err {worst['ols']:.2g}; gradient abs err {worst['grad']:.2g}")


def test_criterion_6_study_determinism(tmp_path):
    args = ["study", "--er-nodes", "500", "--model", "logistic", "--reps", "30", "--seed", "9"]
    outs = []
    for i, threads in enumerate(["1", "1", "4"]):
        d = tmp_path / str(i)
        assert main(args + ["--threads", threads, "--out", str(d), "--format", "json,csv,markdown"]) == 0
        outs.append(tuple((d / f).read_bytes() for f in ("report.json", "report.csv", "report.md")))
    ok = outs[0] == outs[1] == outs[2]
    record("criterion 6 (determinism)", ok, "json/csv/markdown identical across 2 runs and threads 1 vs 4")
