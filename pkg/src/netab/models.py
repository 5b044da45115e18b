"""Response models under network interference and their closed-form ATEs."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .errors import RealismWarning, ValidationError
from .graph import Graph, as_treatment, treated_fraction


class ModelKind(str, enum.Enum):
    LINEAR = "linear"
    PROBIT = "probit"
    LOGISTIC = "logistic"
    TAU_EXPOSURE = "tau"
    TAU_EXPOSURE_BINARY = "tau_binary"

    @property
    def binary(self) -> bool:
        return self in _BINARY_KINDS

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValidationError(f"unknown model {value!r} (choose from {choices})") from None


_BINARY_KINDS = frozenset({ModelKind.PROBIT, ModelKind.LOGISTIC, ModelKind.TAU_EXPOSURE_BINARY})
_ALIASES = {
    "logit": "logistic",
    "tau_exposure": "tau",
    "tau_exposure_binary": "tau_binary",
    "taubin": "tau_binary",
    "tau_bin": "tau_binary",
}


@dataclass(frozen=True)
class ModelParams:
    beta0: float
    beta1: float
    beta2: float
    sigma: float = 1.0
    tau: float = 0.85

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not 0.5 <= self.tau <= 1.0:
            raise ValidationError(f"tau must lie in [0.5, 1], got {self.tau}")

    @property
    def beta(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.beta2], dtype=np.float64)

    def realism_violations(self) -> list[str]:
        """Conditions under which the tau-exposure curves stop being plausible."""
        out = []
        if not self.beta1 * self.beta2 > 0:
            out.append("beta1*beta2 <= 0: own and neighbor effects differ in sign")
        if abs(self.beta2 * self.tau) > abs(self.beta1):
            out.append("|beta2*tau| > |beta1|: treated and control mean curves cross")
        return out


@dataclass(frozen=True, eq=False)
class ResponseVector:
    y: np.ndarray
    kind: ModelKind

    def __post_init__(self):
        if self.kind.binary and not np.all((self.y == 0) | (self.y == 1)):
            raise ValidationError("binary response vector contains values other than 0/1")


def mean_response(kind, params: ModelParams, z, g):
    """Noiseless mean (Linear, tau-exposure) or latent index (Probit, Logistic).

    For the binary tau-exposure model this is the mean of the underlying
    real-valued tau-exposure response. Works elementwise on arrays.
    """
    kind = ModelKind.parse(kind)
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    b0, b1, b2 = params.beta0, params.beta1, params.beta2
    if kind in (ModelKind.TAU_EXPOSURE, ModelKind.TAU_EXPOSURE_BINARY):
        tau = params.tau
        control = np.where(g <= 1.0 - tau, b0, b0 + b2 * (g - (1.0 - tau)))
        treated = np.where(g >= tau, b0 + b1, b0 + b1 + b2 * (g - tau))
        out = np.where(z == 1, treated, control)
    else:
        out = b0 + b1 * z + b2 * g
    return out[()] if out.ndim == 0 else out


def success_probability(kind, params: ModelParams, z, g):
    """P(Y=1 | z, g) for the binary models."""
    kind = ModelKind.parse(kind)
    if not kind.binary:
        raise ValidationError(f"{kind.value} responses are not binary")
    s = mean_response(kind, params, z, g)
    if kind is ModelKind.LOGISTIC:
        return expit(s)
    return ndtr(np.asarray(s) / params.sigma)


def generate(kind, params: ModelParams, graph: Graph, z, rng: np.random.Generator) -> ResponseVector:
    """Draw one response vector for treatment ``z`` on ``graph``."""
    z = as_treatment(z, graph.n_nodes)
    warn_if_unrealistic(kind, params)
    return generate_from_exposure(kind, params, z, treated_fraction(graph, z), rng)


def generate_from_exposure(kind, params: ModelParams, z, g, rng: np.random.Generator) -> ResponseVector:
    kind = ModelKind.parse(kind)
    z = np.asarray(z)
    g = np.asarray(g, dtype=np.float64)
    if z.shape != g.shape:
        raise ValidationError("z and g must have the same length")
    mu = np.asarray(mean_response(kind, params, z, g), dtype=np.float64)
    n = mu.size
    if kind is ModelKind.LOGISTIC:
        y = (rng.random(n) < expit(mu)).astype(np.float64)
    else:
        latent = mu + rng.normal(0.0, params.sigma, size=n)
        if kind.binary:
            # latent-threshold sampling: P(Y=1) = Phi(mu / sigma)
            y = (latent > 0).astype(np.float64)
        else:
            y = latent
    return ResponseVector(y, kind)


def true_ate(kind, params: ModelParams) -> float:
    """Population ATE: E[Y | Z=1] - E[Y | Z=0] with g = 1 and g = 0 respectively."""
    kind = ModelKind.parse(kind)
    b0, b1, b2, sigma = params.beta0, params.beta1, params.beta2, params.sigma
    if kind is ModelKind.LINEAR:
        return b1 + b2
    if kind is ModelKind.TAU_EXPOSURE:
        return b1
    if kind is ModelKind.PROBIT:
        return float(ndtr((b0 + b1 + b2) / sigma) - ndtr(b0 / sigma))
    if kind is ModelKind.TAU_EXPOSURE_BINARY:
        return float(ndtr((b0 + b1) / sigma) - ndtr(b0 / sigma))
    return logistic_ate(params.beta)


def logistic_ate(beta) -> float:
    b0, b1, b2 = beta
    return float(expit(b0 + b1 + b2) - expit(b0))


def probit_ate(beta) -> float:
    b0, b1, b2 = beta
    return float(ndtr(b0 + b1 + b2) - ndtr(b0))


def warn_if_unrealistic(kind, params: ModelParams) -> list[str]:
    kind = ModelKind.parse(kind)
    if kind not in (ModelKind.TAU_EXPOSURE, ModelKind.TAU_EXPOSURE_BINARY):
        return []
    issues = params.realism_violations()
    for msg in issues:
        warnings.warn(msg, RealismWarning, stacklevel=2)
    return issues
