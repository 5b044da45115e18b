"""Replicated misspecification studies.

For every coefficient vector in the grid one treatment vector is drawn; R
response vectors are then generated from the configured model and every
applicable estimator is applied to each. Per-replication random streams are
keyed on (master seed, grid index, replication index), so results do not
depend on how replications are scheduled across worker threads.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import bounds
from .errors import ConfigError, EstimationError, SeparationWarning
from .estimators import (
    build_design_linear,
    build_design_tau,
    classify_exposure,
    estimate_ate_linear,
    logit_mle,
    probit_mle,
    sutva_diff_in_means,
    tau_diff_in_means,
    tau_ols,
)
from .graph import Graph, treated_fraction
from .models import ModelKind, ModelParams, generate_from_exposure, true_ate, warn_if_unrealistic

log = logging.getLogger(__name__)

DEFAULT_SEED = 20180719
PAPER_GRID = ((0.0, 0.0, 1.0), (0.0, 1.0, 0.5), (0.0, 1.0, 0.0), (0.0, 1.0, 1.0), (0.0, 1.0, 2.0))

ESTIMATOR_LABELS = {
    "sutva": "SUTVA",
    "linear": "Linear",
    "logistic": "Logistic",
    "probit": "Probit",
    "tau_dim": "τ-Exposure",
    "tau_ols": "τ-Exposure OLS",
}
REAL_ESTIMATORS = ("sutva", "linear", "tau_dim", "tau_ols")
BINARY_ESTIMATORS = ("sutva", "logistic", "probit", "tau_dim")

# estimator whose model matches the generating model
CORRECT_ESTIMATORS = {
    ModelKind.LINEAR: ("linear",),
    ModelKind.PROBIT: ("probit",),
    ModelKind.LOGISTIC: ("logistic",),
    ModelKind.TAU_EXPOSURE: ("tau_ols", "tau_dim"),
    ModelKind.TAU_EXPOSURE_BINARY: ("tau_dim",),
}


def applicable_estimators(kind: ModelKind) -> tuple[str, ...]:
    return BINARY_ESTIMATORS if ModelKind.parse(kind).binary else REAL_ESTIMATORS


@dataclass
class ExperimentConfig:
    model: ModelKind = ModelKind.LINEAR
    betas: tuple = PAPER_GRID
    sigma: float = 1.0
    tau: float = 0.85
    reps: int = 1000
    p: float = 0.5
    seed: int = DEFAULT_SEED
    estimators: Optional[tuple] = None
    alpha: float = 0.05
    rerandomize: bool = False
    graph: Optional[str] = None
    er_nodes: Optional[int] = None
    er_mean_degree: float = 12.0
    er_seed: int = DEFAULT_SEED
    threads: int = 1

    def __post_init__(self):
        self.model = ModelKind.parse(self.model)
        self.betas = tuple(tuple(float(v) for v in b) for b in self.betas)
        if self.estimators is not None:
            self.estimators = tuple(self.estimators)
        self.validate()

    def validate(self) -> None:
        if not self.betas:
            raise ConfigError("beta grid is empty")
        for b in self.betas:
            if len(b) != 3:
                raise ConfigError(f"each beta needs three coefficients, got {b}")
        if self.reps < 2:
            raise ConfigError(f"reps must be >= 2, got {self.reps}")
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"treatment probability must lie in (0, 1), got {self.p}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not 0.5 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [0.5, 1], got {self.tau}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.estimators is not None:
            allowed = applicable_estimators(self.model)
            bad = [e for e in self.estimators if e not in allowed]
            if bad:
                raise ConfigError(
                    f"estimators {bad} do not apply to {self.model.value} responses "
                    f"(applicable: {', '.join(allowed)})"
                )
            if not self.estimators:
                raise ConfigError("estimator list is empty")

    @property
    def estimator_list(self) -> tuple[str, ...]:
        return self.estimators if self.estimators is not None else applicable_estimators(self.model)

    def to_dict(self) -> dict:
        """Settings that determine the report (worker count excluded)."""
        d = asdict(self)
        d.pop("threads")
        d["model"] = self.model.value
        d["betas"] = [list(b) for b in self.betas]
        d["estimators"] = list(self.estimator_list)
        return d


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def assign_treatment(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. Bernoulli(p) treatment vector."""
    if not 0.0 < p < 1.0:
        raise ConfigError(f"treatment probability must lie in (0, 1), got {p}")
    return (rng.random(n) < p).astype(np.int8)


def welch_test(errors_a, errors_b) -> float:
    """Two-sided Welch t-test p-value (Welch-Satterthwaite degrees of freedom)."""
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("Welch test needs at least two observations per sample")
    if np.var(a) == 0 and np.var(b) == 0:
        return 1.0
    return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


# -- per-cell work -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Design:
    z: np.ndarray
    g: np.ndarray
    x_linear: np.ndarray
    x_tau: np.ndarray
    classes: object

    @classmethod
    def build(cls, graph: Graph, z: np.ndarray, tau: float) -> "_Design":
        g = treated_fraction(graph, z)
        return cls(
            z, g, build_design_linear(z, g), build_design_tau(z, g, tau), classify_exposure(z, g, tau)
        )


def _apply(name: str, d: _Design, y: np.ndarray, tau: float) -> float:
    if name == "sutva":
        return sutva_diff_in_means(y, d.z).ate_hat
    if name == "tau_dim":
        return tau_diff_in_means(y, d.classes).ate_hat
    if name == "linear":
        return estimate_ate_linear(d.x_linear, y).ate_hat
    if name == "tau_ols":
        return tau_ols(d.z, d.g, tau, y).ate_hat
    fit = probit_mle if name == "probit" else logit_mle
    res = fit(d.x_linear, y)
    if not res.converged:
        raise EstimationError(res.warning or "MLE did not converge")
    return res.ate_hat


def _replicate(config: ExperimentConfig, graph: Graph, params: ModelParams, b_idx: int,
               design: _Design, r: int) -> dict:
    rng = _rng(config.seed, b_idx, r + 1)
    if config.rerandomize:
        design = _Design.build(graph, assign_treatment(graph.n_nodes, config.p, rng), config.tau)
    y = generate_from_exposure(config.model, params, design.z, design.g, rng).y
    out = {}
    for name in config.estimator_list:
        try:
            out[name] = _apply(name, design, y, config.tau)
        except (EstimationError, np.linalg.LinAlgError) as exc:
            out[name] = f"{type(exc).__name__}: {exc}"
    return out


# -- report types --------------------------------------------------------------


@dataclass
class EstimatorSummary:
    estimator: str
    mse: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    mean_estimate: Optional[float]
    n_ok: int
    n_failed: int
    failures: dict = field(default_factory=dict)
    crlb: Optional[float] = None
    closed_form_mse: Optional[float] = None
    welch_p: Optional[float] = None
    best: bool = False
    significant: bool = False


@dataclass
class CellReport:
    beta: list
    true_ate: float
    n_treated: int
    class_sizes: dict
    summaries: list
    raw: dict
    notes: list = field(default_factory=list)

    def summary(self, estimator: str) -> EstimatorSummary:
        for s in self.summaries:
            if s.estimator == estimator:
                return s
        raise KeyError(estimator)


@dataclass
class StudyReport:
    config: dict
    graph: dict
    cells: list

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StudyReport":
        cells = []
        for c in d["cells"]:
            c = dict(c)
            c["summaries"] = [EstimatorSummary(**s) for s in c["summaries"]]
            cells.append(CellReport(**c))
        return cls(config=d["config"], graph=d["graph"], cells=cells)

    def __eq__(self, other):
        if not isinstance(other, StudyReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _summarize(name: str, values: list, ate: float) -> tuple[EstimatorSummary, np.ndarray]:
    ok = np.array([v for v in values if isinstance(v, float)], dtype=np.float64)
    failures: dict = {}
    for v in values:
        if not isinstance(v, float):
            failures[v] = failures.get(v, 0) + 1
    sq = (ok - ate) ** 2
    if ok.size == 0:
        return EstimatorSummary(name, None, None, None, None, 0, len(values), failures), sq
    mse = float(np.mean(sq))
    if ok.size >= 2:
        half = 1.959963984540054 * float(np.std(sq, ddof=1)) / math.sqrt(ok.size)
        ci = (max(0.0, mse - half), mse + half)
    else:
        ci = (None, None)
    summary = EstimatorSummary(
        name, mse, ci[0], ci[1], float(np.mean(ok)), int(ok.size), len(values) - int(ok.size), failures
    )
    return summary, sq


def _reference_values(config: ExperimentConfig, params: ModelParams, design: _Design) -> tuple[dict, list]:
    """CRLBs and closed-form MSEs at the true coefficients and realized design."""
    crlb, closed, notes = {}, {}, []
    kind = config.model
    beta = params.beta
    sigma2 = params.sigma ** 2
    n_c1, n_c0 = design.classes.c1.size, design.classes.c0.size
    try:
        if kind is ModelKind.LINEAR:
            crlb["linear"] = bounds.crlb_linear(design.x_linear, sigma2).crlb
        elif kind is ModelKind.PROBIT:
            crlb["probit"] = bounds.crlb_probit(design.x_linear, beta / params.sigma).crlb
        elif kind is ModelKind.LOGISTIC:
            crlb["logistic"] = bounds.crlb_logit(design.x_linear, beta).crlb
        elif kind is ModelKind.TAU_EXPOSURE:
            crlb["tau_ols"] = bounds.crlb_tau(design.x_tau, sigma2).crlb
    except EstimationError as exc:
        notes.append(f"CRLB unavailable: {exc}")
    if n_c1 >= 1 and n_c0 >= 1:
        if kind is ModelKind.TAU_EXPOSURE:
            closed["tau_dim"] = bounds.mse_tau_closed(sigma2, n_c1, n_c0)
        elif kind is ModelKind.TAU_EXPOSURE_BINARY:
            closed["tau_dim"] = bounds.mse_taubin_closed(beta, n_c1, n_c0, params.sigma)
    return {"crlb": crlb, "closed": closed}, notes


def run_cell(config: ExperimentConfig, graph: Graph, b_idx: int,
             executor: Optional[ThreadPoolExecutor] = None) -> CellReport:
    beta = config.betas[b_idx]
    params = ModelParams(*beta, sigma=config.sigma, tau=config.tau)
    warn_if_unrealistic(config.model, params)
    ate = true_ate(config.model, params)
    z = assign_treatment(graph.n_nodes, config.p, _rng(config.seed, b_idx, 0))
    design = _Design.build(graph, z, config.tau)

    def work(r):
        return _replicate(config, graph, params, b_idx, design, r)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeparationWarning)
        if executor is None:
            results = [work(r) for r in range(config.reps)]
        else:
            results = list(executor.map(work, range(config.reps)))

    refs, notes = _reference_values(config, params, design)
    summaries, sq_errors = [], {}
    raw = {}
    for name in config.estimator_list:
        values = [res[name] for res in results]
        s, sq = _summarize(name, values, ate)
        s.crlb = refs["crlb"].get(name)
        s.closed_form_mse = refs["closed"].get(name)
        summaries.append(s)
        sq_errors[name] = sq
        raw[name] = [v if isinstance(v, float) else None for v in values]
        if s.n_failed:
            for msg, count in sorted(s.failures.items()):
                notes.append(f"{name}: {count} of {config.reps} replications failed ({msg})")

    valid = [s for s in summaries if s.mse is not None]
    if valid:
        best = min(valid, key=lambda s: s.mse)
        best.best = True
        for s in valid:
            if s is best:
                continue
            a, b = sq_errors[s.estimator], sq_errors[best.estimator]
            if a.size >= 2 and b.size >= 2:
                s.welch_p = welch_test(a, b)
                s.significant = s.welch_p < config.alpha

    return CellReport(
        beta=list(beta),
        true_ate=ate,
        n_treated=int(design.z.sum()),
        class_sizes=design.classes.sizes(),
        summaries=summaries,
        raw=raw,
        notes=notes,
    )


def run_study(config: ExperimentConfig, graph: Graph,
              progress: Optional[Callable[[int, int], None]] = None) -> StudyReport:
    """Run every grid cell; output is independent of ``config.threads``."""
    cells = []
    executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for b_idx in range(len(config.betas)):
            log.info("cell %d/%d beta=%s", b_idx + 1, len(config.betas), config.betas[b_idx])
            cells.append(run_cell(config, graph, b_idx, executor))
            if progress is not None:
                progress(b_idx + 1, len(config.betas))
    finally:
        if executor is not None:
            executor.shutdown()
    graph_info = {"n_nodes": graph.n_nodes, "n_edges": graph.n_edges}
    return StudyReport(config=config.to_dict(), graph=graph_info, cells=cells)
