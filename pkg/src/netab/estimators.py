"""ATE estimators: OLS (linear and tau-exposure designs), probit/logit MLE,
and difference-in-means over exposure classes or treatment arms."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, log_ndtr

from .errors import (
    EmptyExposureClassError,
    SeparationWarning,
    SingleClassResponseError,
    SingularDesignError,
    ValidationError,
)
from .models import logistic_ate, probit_ate

COLUMN_NAMES = ("intercept", "treatment", "exposure")

GRAD_TOL = 1e-8
MAX_ITER = 100
SEPARATION_NORM = 50.0
SATURATION_LL = 1e-6  # per-row log-likelihood closer to 0 than this: perfect fit
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class EstimationResult:
    ate_hat: float
    beta_hat: Optional[np.ndarray] = None
    sigma2_hat: Optional[float] = None
    converged: bool = True
    iterations: int = 0
    warning: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "ate_hat": float(self.ate_hat),
            "beta_hat": None if self.beta_hat is None else [float(b) for b in self.beta_hat],
            "sigma2_hat": None if self.sigma2_hat is None else float(self.sigma2_hat),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "warning": self.warning,
        }


@dataclass(frozen=True, eq=False)
class ExposureClasses:
    """Node indices split by own treatment and saturation (see ``classify_exposure``)."""

    c0: np.ndarray
    c0_bar: np.ndarray
    c1: np.ndarray
    c1_bar: np.ndarray

    def sizes(self) -> dict:
        return {
            "c0": int(self.c0.size),
            "c0_bar": int(self.c0_bar.size),
            "c1": int(self.c1.size),
            "c1_bar": int(self.c1_bar.size),
        }


def _paired(z, g):
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if z.ndim != 1 or z.shape != g.shape:
        raise ValidationError(f"z and g must be 1-d of equal length, got {z.shape} and {g.shape}")
    return z, g


def build_design_linear(z, g) -> np.ndarray:
    """Rows ``(1, z_i, g_i)``."""
    z, g = _paired(z, g)
    return np.column_stack([np.ones_like(z), z, g])


def classify_exposure(z, g, tau: float) -> ExposureClasses:
    """Partition nodes into C0, C0-bar, C1, C1-bar.

    Control nodes with ``g <= 1 - tau`` and treated nodes with ``g >= tau`` are
    saturated (C0 and C1); the rest fall in the barred classes.
    """
    if not 0.5 <= tau <= 1.0:
        raise ValidationError(f"tau must lie in [0.5, 1], got {tau}")
    z, g = _paired(z, g)
    control = z == 0
    low = g <= 1.0 - tau
    high = g >= tau
    return ExposureClasses(
        c0=np.flatnonzero(control & low),
        c0_bar=np.flatnonzero(control & ~low),
        c1=np.flatnonzero(~control & high),
        c1_bar=np.flatnonzero(~control & ~high),
    )


def build_design_tau(z, g, tau: float) -> np.ndarray:
    """Tau-exposure regression design.

    The exposure column is 0 on the saturated classes, ``g - (1 - tau)`` on
    C0-bar and ``g - tau`` on C1-bar, matching the generating model's slopes.
    """
    z, g = _paired(z, g)
    classes = classify_exposure(z, g, tau)
    x = np.column_stack([np.ones_like(z), z, np.zeros_like(g)])
    x[classes.c0_bar, 2] = g[classes.c0_bar] - (1.0 - tau)
    x[classes.c1_bar, 2] = g[classes.c1_bar] - tau
    return x


def check_rank(x: np.ndarray, rtol: float = 1e-10) -> None:
    """Raise SingularDesignError naming the first column spanned by earlier ones."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("design matrix must be two-dimensional")
    for j in range(x.shape[1]):
        col = x[:, j]
        scale = max(np.linalg.norm(col), 1.0)
        if j == 0:
            resid = col
        else:
            prev = x[:, :j]
            coef, *_ = np.linalg.lstsq(prev, col, rcond=None)
            resid = col - prev @ coef
        if np.linalg.norm(resid) <= rtol * scale:
            name = COLUMN_NAMES[j] if j < len(COLUMN_NAMES) else f"column {j}"
            raise SingularDesignError(
                f"design matrix is rank deficient: {name} column is collinear with earlier columns",
                column=name,
            )


def ols_fit(x, y) -> EstimationResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(getattr(y, "y", y), dtype=np.float64)
    n, k = x.shape
    if y.shape != (n,):
        raise ValidationError(f"response length {y.size} does not match design rows {n}")
    if n < k:
        raise SingularDesignError(f"need at least {k} observations, got {n}")
    check_rank(x)
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    sigma2 = float(resid @ resid / (n - k)) if n > k else float("nan")
    return EstimationResult(ate_hat=float("nan"), beta_hat=beta, sigma2_hat=sigma2)


def estimate_ate_linear(x, y) -> EstimationResult:
    res = ols_fit(x, y)
    res.ate_hat = float(res.beta_hat[1] + res.beta_hat[2])
    return res


def tau_ols(z, g, tau: float, y) -> EstimationResult:
    res = ols_fit(build_design_tau(z, g, tau), y)
    res.ate_hat = float(res.beta_hat[1])
    return res


# -- maximum likelihood --------------------------------------------------------


def probit_loglik(x, y, beta) -> float:
    q = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    return float(np.sum(log_ndtr(q * (np.asarray(x) @ beta))))


def logit_loglik(x, y, beta) -> float:
    s = np.asarray(x) @ beta
    return float(np.sum(np.asarray(y) * s - np.logaddexp(0.0, s)))


def _probit_terms(x, y, beta):
    q = 2.0 * y - 1.0
    t = q * (x @ beta)
    log_cdf = log_ndtr(t)
    # inverse Mills ratio phi(t)/Phi(t), evaluated in log space
    lam = np.exp(-0.5 * t * t - _LOG_SQRT_2PI - log_cdf)
    grad = x.T @ (q * lam)
    w = lam * (t + lam)
    hess = -(x.T * w) @ x
    return float(log_cdf.sum()), grad, hess


def _logit_terms(x, y, beta):
    s = x @ beta
    p = expit(s)
    grad = x.T @ (y - p)
    hess = -(x.T * (p * (1.0 - p))) @ x
    return float(np.sum(y * s - np.logaddexp(0.0, s))), grad, hess


def _newton(terms: Callable, x, y, max_iter: int = MAX_ITER, tol: float = GRAD_TOL):
    beta = np.zeros(x.shape[1])
    ll, grad, hess = terms(x, y, beta)
    it = 0
    warning = None
    while np.max(np.abs(grad)) >= tol and it < max_iter:
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            raise SingularDesignError("information matrix is singular") from None
        t = 1.0
        slack = 1e-12 * max(1.0, abs(ll))
        for _ in range(60):
            cand = beta + t * step
            cand_terms = terms(x, y, cand)
            if cand_terms[0] >= ll - slack:
                break
            t *= 0.5
        else:
            warning = "line search failed to improve the likelihood"
            break
        beta = cand
        ll, grad, hess = cand_terms
        it += 1
        if np.linalg.norm(beta) > SEPARATION_NORM:
            warning = "coefficients diverging; data look (quasi-)completely separated"
            warnings.warn(warning, SeparationWarning, stacklevel=3)
            break
    if warning is None and ll > -SATURATION_LL * x.shape[0]:
        # perfect fit: the score underflows before the coefficients diverge
        warning = "likelihood is saturated; data look completely separated"
        warnings.warn(warning, SeparationWarning, stacklevel=3)
    converged = bool(np.max(np.abs(grad)) < tol) and warning is None
    if warning is None and not converged:
        warning = f"no convergence after {max_iter} iterations"
    return beta, converged, it, warning


def _binary_inputs(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(getattr(y, "y", y), dtype=np.float64)
    if y.shape != (x.shape[0],):
        raise ValidationError(f"response length {y.size} does not match design rows {x.shape[0]}")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("binary estimator needs a 0/1 response")
    if y.min() == y.max():
        raise SingleClassResponseError(f"all responses equal {int(y[0])}; likelihood has no maximum")
    check_rank(x)
    return x, y


def probit_mle(x, y) -> EstimationResult:
    """Probit MLE by damped Newton; ATE = Phi(b0+b1+b2) - Phi(b0) with sigma = 1."""
    x, y = _binary_inputs(x, y)
    beta, converged, it, warning = _newton(_probit_terms, x, y)
    return EstimationResult(probit_ate(beta), beta, None, converged, it, warning)


def logit_mle(x, y) -> EstimationResult:
    """Logistic MLE by damped Newton (IRLS)."""
    x, y = _binary_inputs(x, y)
    beta, converged, it, warning = _newton(_logit_terms, x, y)
    return EstimationResult(logistic_ate(beta), beta, None, converged, it, warning)


# -- difference in means -------------------------------------------------------


def _diff_in_means(y: np.ndarray, c1: np.ndarray, c0: np.ndarray) -> float:
    return float(np.mean(y[c1]) - np.mean(y[c0]))


def tau_diff_in_means(y, classes: ExposureClasses) -> EstimationResult:
    y = np.asarray(getattr(y, "y", y), dtype=np.float64)
    if classes.c1.size == 0 or classes.c0.size == 0:
        raise EmptyExposureClassError(classes.c1.size, classes.c0.size)
    return EstimationResult(_diff_in_means(y, classes.c1, classes.c0))


def sutva_diff_in_means(y, z) -> EstimationResult:
    y = np.asarray(getattr(y, "y", y), dtype=np.float64)
    z = np.asarray(z)
    if y.shape != z.shape:
        raise ValidationError("y and z must have the same length")
    treated = np.flatnonzero(z == 1)
    control = np.flatnonzero(z == 0)
    if treated.size == 0 or control.size == 0:
        raise EmptyExposureClassError(
            treated.size,
            control.size,
            f"empty treatment arm: {treated.size} treated, {control.size} control",
        )
    return EstimationResult(_diff_in_means(y, treated, control))
