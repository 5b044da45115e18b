"""Fisher information, Cramer-Rao lower bounds for the ATE, and closed-form
MSEs of the difference-in-means estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import log_ndtr, ndtr

from .errors import SingularDesignError, ValidationError
from .models import ModelKind, ModelParams

MAX_CONDITION = 1e12
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

ATE_LINEAR = np.array([0.0, 1.0, 1.0])
ATE_BETA1 = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True, eq=False)
class FisherInfo:
    matrix: np.ndarray
    model: ModelKind
    evaluated_at: ModelParams

    def __post_init__(self):
        m = self.matrix
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-12):
            raise ValidationError("Fisher information must be symmetric")


@dataclass(frozen=True)
class BoundResult:
    crlb: float
    gradient: np.ndarray
    asymptotic: bool

    def to_dict(self) -> dict:
        return {
            "crlb": self.crlb,
            "gradient": [float(v) for v in self.gradient],
            "asymptotic": self.asymptotic,
        }


@dataclass(frozen=True)
class TauBoundResult(BoundResult):
    """Bound for the tau design under two functionals.

    ``crlb`` targets beta1 alone (the tau-exposure ATE); ``crlb_sum`` uses the
    beta1 + beta2 functional, i.e. the same vector as the linear-model bound.
    """

    crlb_sum: float = float("nan")

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["crlb_sum"] = self.crlb_sum
        return out


def _inverse(matrix: np.ndarray, what: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularDesignError(f"{what} is singular or ill-conditioned (cond={cond:.3g})")
    try:
        factor = scipy.linalg.cho_factor(matrix)
    except np.linalg.LinAlgError:
        raise SingularDesignError(f"{what} is not positive definite") from None
    inv = scipy.linalg.cho_solve(factor, np.eye(matrix.shape[0]))
    return 0.5 * (inv + inv.T)


def delta_method(gradient, covariance) -> float:
    """First-order variance of a smooth function: ``grad' * cov * grad``."""
    gradient = np.asarray(gradient, dtype=np.float64)
    covariance = np.asarray(covariance, dtype=np.float64)
    if covariance.shape != (gradient.size, gradient.size):
        raise ValidationError(f"covariance shape {covariance.shape} does not match gradient")
    if not np.allclose(covariance, covariance.T, rtol=1e-10, atol=1e-14):
        raise ValidationError("covariance matrix must be symmetric")
    return float(gradient @ covariance @ gradient)


def _gram(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x.T @ x


def crlb_linear(x, sigma2: float) -> BoundResult:
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    cov = sigma2 * _inverse(_gram(x), "X'X")
    return BoundResult(max(delta_method(ATE_LINEAR, cov), 0.0), ATE_LINEAR.copy(), False)


def crlb_tau(x_tau, sigma2: float) -> TauBoundResult:
    """Bound for unbiased estimators of beta1 on the tau-exposure design.

    Also reports the bound for beta1 + beta2 in ``crlb_sum``.
    """
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    cov = sigma2 * _inverse(_gram(x_tau), "X'X")
    return TauBoundResult(
        crlb=max(delta_method(ATE_BETA1, cov), 0.0),
        gradient=ATE_BETA1.copy(),
        asymptotic=False,
        crlb_sum=max(delta_method(ATE_LINEAR, cov), 0.0),
    )


def _params_at(beta) -> ModelParams:
    b = np.asarray(beta, dtype=np.float64)
    return ModelParams(float(b[0]), float(b[1]), float(b[2]))


def probit_weights(s) -> np.ndarray:
    """phi(s)^2 / (Phi(s) (1 - Phi(s))), computed in log space so the tails go to 0, not NaN."""
    s = np.asarray(s, dtype=np.float64)
    log_w = 2.0 * (-0.5 * s * s - _LOG_SQRT_2PI) - log_ndtr(s) - log_ndtr(-s)
    return np.exp(log_w)


def logit_weights(s) -> np.ndarray:
    """e^s / (1 + e^s)^2 written as e^{-|s|} / (1 + e^{-|s|})^2 to avoid overflow."""
    e = np.exp(-np.abs(np.asarray(s, dtype=np.float64)))
    return e / (1.0 + e) ** 2


def _weighted_gram(x, w) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    m = (x.T * w) @ x
    return 0.5 * (m + m.T)


def fim_probit(x, beta) -> FisherInfo:
    x = np.asarray(x, dtype=np.float64)
    w = probit_weights(x @ np.asarray(beta, dtype=np.float64))
    return FisherInfo(_weighted_gram(x, w), ModelKind.PROBIT, _params_at(beta))


def fim_logit(x, beta) -> FisherInfo:
    x = np.asarray(x, dtype=np.float64)
    w = logit_weights(x @ np.asarray(beta, dtype=np.float64))
    return FisherInfo(_weighted_gram(x, w), ModelKind.LOGISTIC, _params_at(beta))


def _std_normal_pdf(s):
    return np.exp(-0.5 * s * s - _LOG_SQRT_2PI)


def probit_ate_gradient(beta) -> np.ndarray:
    b0 = float(beta[0])
    total = float(np.sum(beta))
    d = _std_normal_pdf(total)
    return np.array([d - _std_normal_pdf(b0), d, d])


def logit_ate_gradient(beta) -> np.ndarray:
    b0 = float(beta[0])
    total = float(np.sum(beta))
    d_total = float(logit_weights(total))
    # 1/(e^S+1) - 1/(e^S+1)^2 equals the logistic density at S
    return np.array([d_total - float(logit_weights(b0)), d_total, d_total])


def crlb_probit(x, beta) -> BoundResult:
    info = fim_probit(x, beta)
    grad = probit_ate_gradient(beta)
    return BoundResult(max(delta_method(grad, _inverse(info.matrix, "probit FIM")), 0.0), grad, True)


def crlb_logit(x, beta) -> BoundResult:
    info = fim_logit(x, beta)
    grad = logit_ate_gradient(beta)
    return BoundResult(max(delta_method(grad, _inverse(info.matrix, "logit FIM")), 0.0), grad, True)


def _check_counts(n_c1, n_c0):
    if n_c1 < 1 or n_c0 < 1:
        raise ValidationError(f"exposure class counts must be >= 1, got |C1|={n_c1}, |C0|={n_c0}")


def mse_tau_closed(sigma2: float, n_c1: int, n_c0: int) -> float:
    _check_counts(n_c1, n_c0)
    return sigma2 / n_c1 + sigma2 / n_c0


def mse_taubin_closed(beta, n_c1: int, n_c0: int, sigma: float = 1.0) -> float:
    _check_counts(n_c1, n_c0)
    p1 = float(ndtr((beta[0] + beta[1]) / sigma))
    p0 = float(ndtr(beta[0] / sigma))
    return p1 * (1.0 - p1) / n_c1 + p0 * (1.0 - p0) / n_c0
