"""Command-line front end.

Exit codes: 0 success, 1 estimator failure, 2 I/O or parse error,
3 configuration / validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import bounds
from .config import load_config, parse_beta, parse_betas
from .errors import ConfigError, EstimationError, GraphParseError, ValidationError
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
from .experiment import DEFAULT_SEED, ExperimentConfig, assign_treatment, run_study
from .graph import Graph, as_treatment, erdos_renyi, load_edge_list, treated_fraction
from .models import ModelKind, ModelParams, generate, true_ate
from .report import FORMATS, export_report, from_json, write_reports

EXIT_OK, EXIT_ESTIMATOR, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3
ESTIMATORS = ("sutva", "tau_dim", "tau_ols", "linear", "probit", "logistic")
RESPONSE_HEADER = ("node_id", "z", "g", "y")

log = logging.getLogger("netab")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get("NETAB_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"NETAB_SEED must be an integer, got {env!r}", EXIT_CONFIG) from None
    return DEFAULT_SEED


def _open_graph(args) -> Graph:
    if args.graph:
        try:
            return load_edge_list(args.graph)
        except FileNotFoundError:
            raise CliError(f"graph file not found: {args.graph}", EXIT_IO) from None
        except OSError as exc:
            raise CliError(f"cannot read graph file {args.graph}: {exc}", EXIT_IO) from None
        except GraphParseError as exc:
            raise CliError(f"{args.graph}: {exc}", EXIT_IO) from None
    if args.er_nodes:
        return erdos_renyi(args.er_nodes, args.er_degree, resolve_seed(args.er_seed))
    raise CliError("no graph given: pass --graph FILE or --er-nodes N", EXIT_CONFIG)


def _params(args) -> ModelParams:
    beta = parse_beta(args.beta)
    return ModelParams(*beta, sigma=args.sigma, tau=args.tau)


def _treatment(args, graph: Graph, seed: int) -> np.ndarray:
    if args.z:
        try:
            z = [int(v) for v in args.z.split(",")]
        except ValueError:
            raise CliError(f"--z must be comma-separated 0/1 values, got {args.z!r}", EXIT_CONFIG) from None
        return as_treatment(z, graph.n_nodes)
    return assign_treatment(graph.n_nodes, args.p, np.random.default_rng(np.random.SeedSequence([seed, 0])))


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from None


def read_responses(path):
    """Read a node_id,z,g,y response CSV into arrays."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise CliError(f"response file not found: {path}", EXIT_IO) from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RESPONSE_HEADER:
            raise CliError(f"{path}: header must be {','.join(RESPONSE_HEADER)}", EXIT_IO)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[1]), float(row[2]), float(row[3])))
            except (ValueError, IndexError):
                raise CliError(f"{path}: line {lineno}: malformed row {row!r}", EXIT_IO) from None
    if not rows:
        raise CliError(f"{path}: no data rows", EXIT_IO)
    z, g, y = (np.array(col) for col in zip(*rows))
    return z.astype(np.int8), g, y


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    graph = _open_graph(args)
    kind = ModelKind.parse(args.model)
    params = _params(args)
    seed = resolve_seed(args.seed)
    z = _treatment(args, graph, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    y = generate(kind, params, graph, z, rng).y
    g = treated_fraction(graph, z)
    ids = graph.node_ids if graph.node_ids is not None else np.arange(graph.n_nodes)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESPONSE_HEADER)
    for i in range(graph.n_nodes):
        yi = str(int(y[i])) if kind.binary else repr(float(y[i]))
        w.writerow([int(ids[i]), int(z[i]), repr(float(g[i])), yi])
    _emit(buf.getvalue(), args.out)
    msg = f"true ATE ({kind.value}): {true_ate(kind, params)!r}\n"
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(msg)
    return EXIT_OK


def _run_estimator(name, z, g, y, tau):
    if name == "sutva":
        return sutva_diff_in_means(y, z)
    if name == "tau_dim":
        return tau_diff_in_means(y, classify_exposure(z, g, tau))
    if name == "tau_ols":
        return tau_ols(z, g, tau, y)
    x = build_design_linear(z, g)
    if name == "linear":
        return estimate_ate_linear(x, y)
    return (probit_mle if name == "probit" else logit_mle)(x, y)


def cmd_estimate(args) -> int:
    z, g, y = read_responses(args.responses)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = _run_estimator(args.estimator, z, g, y, args.tau)
    d = {"estimator": args.estimator, **res.to_dict()}
    if args.json:
        print(json.dumps(d, sort_keys=True))
    else:
        print(f"estimator:  {args.estimator}")
        print(f"ate_hat:    {res.ate_hat!r}")
        if res.beta_hat is not None:
            print("beta_hat:   " + ", ".join(repr(float(b)) for b in res.beta_hat))
        if res.sigma2_hat is not None:
            print(f"sigma2_hat: {res.sigma2_hat!r}")
        print(f"converged:  {res.converged} ({res.iterations} iterations)")
        if res.warning:
            print(f"warning:    {res.warning}")
    return EXIT_OK if res.converged else EXIT_ESTIMATOR


def cmd_bounds(args) -> int:
    kind = ModelKind.parse(args.model)
    params = _params(args)
    if args.responses:
        z, g, _ = read_responses(args.responses)
    else:
        graph = _open_graph(args)
        z = _treatment(args, graph, resolve_seed(args.seed))
        g = treated_fraction(graph, z)
    sigma2 = params.sigma ** 2
    x = build_design_linear(z, g)
    classes = classify_exposure(z, g, params.tau)
    out = {"model": kind.value, "beta": params.beta.tolist(), "true_ate": true_ate(kind, params),
           "class_sizes": classes.sizes()}
    if kind is ModelKind.LINEAR:
        out["crlb"] = bounds.crlb_linear(x, sigma2).to_dict()
    elif kind is ModelKind.PROBIT:
        out["crlb"] = bounds.crlb_probit(x, params.beta / params.sigma).to_dict()
    elif kind is ModelKind.LOGISTIC:
        out["crlb"] = bounds.crlb_logit(x, params.beta).to_dict()
    elif kind is ModelKind.TAU_EXPOSURE:
        out["crlb"] = bounds.crlb_tau(build_design_tau(z, g, params.tau), sigma2).to_dict()
    n1, n0 = classes.c1.size, classes.c0.size
    if n1 and n0:
        if kind is ModelKind.TAU_EXPOSURE:
            out["mse_tau_dim"] = bounds.mse_tau_closed(sigma2, n1, n0)
        elif kind is ModelKind.TAU_EXPOSURE_BINARY:
            out["mse_tau_dim"] = bounds.mse_taubin_closed(params.beta, n1, n0, params.sigma)
    if args.json:
        print(json.dumps(out, sort_keys=True))
    else:
        for k, v in out.items():
            print(f"{k}: {v}")
    return EXIT_OK


def build_study_config(args) -> ExperimentConfig:
    kw = load_config(args.config) if args.config else {}
    overrides = {
        "model": args.model,
        "sigma": args.sigma,
        "tau": args.tau,
        "reps": args.reps,
        "p": args.p,
        "alpha": args.alpha,
        "graph": args.graph,
        "er_nodes": args.er_nodes,
        "er_mean_degree": args.er_degree,
        "er_seed": args.er_seed,
        "threads": args.threads,
    }
    kw.update({k: v for k, v in overrides.items() if v is not None})
    if args.beta:
        kw["betas"] = tuple(b for text in args.beta for b in parse_betas(text))
    if args.estimators:
        kw["estimators"] = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    if args.rerandomize:
        kw["rerandomize"] = True
    if args.seed is not None:
        kw["seed"] = args.seed
    elif "seed" not in kw:
        kw["seed"] = resolve_seed(None)
    if "er_seed" not in kw:
        kw["er_seed"] = kw["seed"]
    return ExperimentConfig(**kw)


def _formats(text):
    fmts = [f.strip() for f in (text or ",".join(FORMATS)).split(",") if f.strip()]
    bad = [f for f in fmts if f not in FORMATS]
    if bad:
        raise CliError(f"unknown format(s) {bad}; choose from {', '.join(FORMATS)}", EXIT_CONFIG)
    return fmts


def cmd_study(args) -> int:
    config = build_study_config(args)
    fmts = _formats(args.format)
    if config.graph:
        graph = _open_graph(argparse.Namespace(graph=config.graph, er_nodes=None))
    elif config.er_nodes:
        graph = erdos_renyi(config.er_nodes, config.er_mean_degree, config.er_seed)
    else:
        raise CliError("config names no graph: set graph or er_nodes", EXIT_CONFIG)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = run_study(config, graph)
    try:
        paths = write_reports(report, args.out, fmts)
    except OSError as exc:
        raise CliError(f"cannot write reports to {args.out}: {exc}", EXIT_IO) from None
    sys.stdout.write(export_report(report, "markdown").decode())
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.input, "rb") as fh:
            report = from_json(fh.read())
    except FileNotFoundError:
        raise CliError(f"report file not found: {args.input}", EXIT_IO) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{args.input}: not a study report ({exc})", EXIT_IO) from None
    data = export_report(report, args.format)
    if args.out in (None, "-"):
        sys.stdout.write(data.decode())
    else:
        try:
            with open(args.out, "wb") as fh:
                fh.write(data)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from None
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _graph_opts(p, er_degree=12.0):
    p.add_argument("--graph", help="SNAP-style edge list file")
    p.add_argument("--er-nodes", type=int, help="use a seeded Erdos-Renyi graph with this many nodes")
    p.add_argument("--er-degree", type=float, default=er_degree, help="mean degree of the ER graph (default 12)")
    p.add_argument("--er-seed", type=int, help="seed for the ER graph (default: --seed)")


def _model_opts(p, single_beta=True):
    p.add_argument("--model", default=None if not single_beta else "linear",
                   help="linear | probit | logistic | tau | tau_binary")
    if single_beta:
        p.add_argument("--beta", default="0,1,1", help="b0,b1,b2 (default 0,1,1)")
    else:
        p.add_argument("--beta", action="append", help="b0,b1,b2; repeat or separate with ';'")
    p.add_argument("--sigma", type=float, default=1.0 if single_beta else None)
    p.add_argument("--tau", type=float, default=0.85 if single_beta else None)
    p.add_argument("--p", type=float, default=0.5 if single_beta else None, help="treatment probability")
    p.add_argument("--seed", type=int, help=f"master seed (fallback: $NETAB_SEED, then {DEFAULT_SEED})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw Z and one response vector; write node_id,z,g,y CSV")
    _graph_opts(p)
    _model_opts(p)
    p.add_argument("--z", help="explicit treatment vector, comma-separated 0/1")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate the ATE from a response CSV")
    p.add_argument("responses", help="CSV with header node_id,z,g,y")
    p.add_argument("--estimator", choices=ESTIMATORS, default="sutva")
    p.add_argument("--tau", type=float, default=0.85)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bounds", help="Cramer-Rao bounds and closed-form MSEs for a design")
    _graph_opts(p)
    _model_opts(p)
    p.add_argument("--z", help="explicit treatment vector, comma-separated 0/1")
    p.add_argument("--responses", help="take z and g from a response CSV instead of a graph")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("study", help="replicated misspecification study")
    p.add_argument("--config", help="INI file with a [study] section")
    _graph_opts(p, er_degree=None)
    _model_opts(p, single_beta=False)
    p.add_argument("--reps", type=int)
    p.add_argument("--estimators", help="comma-separated estimator names")
    p.add_argument("--alpha", type=float, help="significance level for the Welch stars (default 0.05)")
    p.add_argument("--rerandomize", action="store_true", help="redraw Z for every replication")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--out", default="study_out", help="output directory")
    p.add_argument("--format", help=f"comma-separated subset of {','.join(FORMATS)} (default all)")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("report", help="re-export a JSON study report")
    p.add_argument("input", help="report.json written by the study command")
    p.add_argument("--format", choices=FORMATS, default="markdown")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"netab: error: {exc}", file=sys.stderr)
        return exc.code
    except EstimationError as exc:
        print(f"netab: estimator failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (ConfigError, ValidationError) as exc:
        print(f"netab: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"netab: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
