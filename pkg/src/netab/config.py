"""Study configuration files.

A config file is INI-style text with a single ``[study]`` section of flat
``key = value`` pairs::

    [study]
    model = logistic          ; linear | probit | logistic | tau | tau_binary
    betas = 0,0,1; 0,1,0.5; 0,1,0; 0,1,1; 0,1,2
    sigma = 1
    tau = 0.85
    reps = 1000
    p = 0.5
    seed = 20180719
    estimators = sutva, logistic, probit, tau_dim   ; optional, default: all applicable
    alpha = 0.05
    rerandomize = false
    graph = data/soc-sign-bitcoinotc.csv             ; relative to the config file
    er_nodes = 2000                                  ; used when graph is absent
    er_mean_degree = 12
    er_seed = 20180719
    threads = 4

Every key is optional.
"""

from __future__ import annotations

import configparser
import os
from typing import Optional

from .errors import ConfigError

SECTION = "study"
_INT_KEYS = {"reps", "seed", "er_nodes", "er_seed", "threads"}
_FLOAT_KEYS = {"sigma", "tau", "p", "alpha", "er_mean_degree"}
_BOOL_KEYS = {"rerandomize"}
_STR_KEYS = {"model", "graph"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS | {"betas", "estimators"}


def parse_beta(text: str) -> tuple:
    parts = [p for p in text.replace("(", "").replace(")", "").split(",")]
    try:
        beta = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"cannot parse beta {text!r}; expected b0,b1,b2") from None
    if len(beta) != 3:
        raise ConfigError(f"beta {text!r} must have three coefficients")
    return beta


def parse_betas(text: str) -> tuple:
    return tuple(parse_beta(chunk) for chunk in text.split(";") if chunk.strip())


def load_config(path) -> dict:
    """Read a config file into a dict of ExperimentConfig keyword arguments."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not cp.has_section(SECTION):
        raise ConfigError(f"{path}: missing [{SECTION}] section")
    sec = cp[SECTION]
    unknown = sorted(set(sec) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")

    out: dict = {}
    for key, raw in sec.items():
        try:
            if key in _INT_KEYS:
                out[key] = int(raw)
            elif key in _FLOAT_KEYS:
                out[key] = float(raw)
            elif key in _BOOL_KEYS:
                out[key] = sec.getboolean(key)
            elif key == "betas":
                out[key] = parse_betas(raw)
            elif key == "estimators":
                out[key] = tuple(e.strip() for e in raw.split(",") if e.strip())
            else:
                out[key] = raw.strip()
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {exc}") from None

    graph: Optional[str] = out.get("graph")
    if graph and not os.path.isabs(graph):
        out["graph"] = os.path.join(os.path.dirname(os.path.abspath(path)), graph)
    return out
