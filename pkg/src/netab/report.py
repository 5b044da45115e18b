"""Serialize study reports as JSON, CSV (summary + raw rows) or a Markdown table."""

from __future__ import annotations

import csv
import io
import json
import os
from typing import Iterable

from .experiment import ESTIMATOR_LABELS, StudyReport

FORMATS = ("json", "csv", "markdown")
EXTENSIONS = {"json": "json", "csv": "csv", "markdown": "md"}

CSV_COLUMNS = (
    "row_type", "beta", "estimator", "replication", "estimate", "true_ate",
    "mse", "ci_low", "ci_high", "mean_estimate", "crlb", "closed_form_mse",
    "welch_p", "best", "significant", "n_ok", "n_failed",
)


def beta_label(beta) -> str:
    return "(" + ",".join(f"{b:g}" for b in beta) + ")"


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def to_json(report: StudyReport) -> bytes:
    return (json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n").encode()


def from_json(data) -> StudyReport:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode()
    return StudyReport.from_dict(json.loads(data))


def to_csv(report: StudyReport) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for cell in report.cells:
        label = beta_label(cell.beta)
        for s in cell.summaries:
            w.writerow([
                "summary", label, s.estimator, "", "", _num(cell.true_ate),
                _num(s.mse), _num(s.ci_low), _num(s.ci_high), _num(s.mean_estimate),
                _num(s.crlb), _num(s.closed_form_mse), _num(s.welch_p),
                int(s.best), int(s.significant), s.n_ok, s.n_failed,
            ])
    for cell in report.cells:
        label = beta_label(cell.beta)
        for s in cell.summaries:
            for r, est in enumerate(cell.raw[s.estimator]):
                w.writerow(["raw", label, s.estimator, r, _num(est), _num(cell.true_ate)]
                           + [""] * (len(CSV_COLUMNS) - 6))
    return buf.getvalue().encode()


def _mse_cell(s) -> str:
    if s.mse is None:
        return "n/a"
    text = f"{s.mse:.5f}"
    if s.best:
        text = f"**{text}**"
    if s.significant:
        text += "\\*"
    return text


def to_markdown(report: StudyReport) -> bytes:
    cfg = report.config
    cells = report.cells
    estimators = [s.estimator for s in cells[0].summaries] if cells else []
    lines = [
        f"MSE of the estimated ATE, {cfg['model']} response model "
        f"(N={report.graph['n_nodes']}, R={cfg['reps']}, tau={cfg['tau']:g}, sigma={cfg['sigma']:g})",
        "",
        "| Estimator | " + " | ".join(beta_label(c.beta) for c in cells) + " |",
        "|---|" + "---|" * len(cells),
        "| ATE | " + " | ".join(f"{c.true_ate:.2f}" for c in cells) + " |",
    ]
    for name in estimators:
        row = [_mse_cell(c.summary(name)) for c in cells]
        lines.append(f"| {ESTIMATOR_LABELS.get(name, name)} | " + " | ".join(row) + " |")
    lines += [
        "",
        f"Bold: smallest MSE in the column. \\*: Welch test against the bold estimator, "
        f"p < {cfg['alpha']:g}.",
    ]

    refs = []
    for name in estimators:
        for c in cells:
            s = c.summary(name)
            if s.crlb is not None:
                refs.append((name, c, "CRLB", s.crlb, s))
            if s.closed_form_mse is not None:
                refs.append((name, c, "closed-form MSE", s.closed_form_mse, s))
    if refs:
        lines += ["", "| Estimator | beta | reference | value | empirical MSE (95% CI) |", "|---|---|---|---|---|"]
        for name, c, kind, value, s in refs:
            ci = "" if s.mse is None else f"{s.mse:.5f} ({s.ci_low:.5f}, {s.ci_high:.5f})"
            lines.append(f"| {ESTIMATOR_LABELS.get(name, name)} | {beta_label(c.beta)} | {kind} | {value:.5f} | {ci} |")

    notes = [(c, n) for c in cells for n in c.notes]
    if notes:
        lines += ["", "Notes:", ""]
        for i, (c, n) in enumerate(notes, start=1):
            lines.append(f"{i}. beta={beta_label(c.beta)}: {n}")
    return ("\n".join(lines) + "\n").encode()


_WRITERS = {"json": to_json, "csv": to_csv, "markdown": to_markdown}


def export_report(report: StudyReport, fmt: str) -> bytes:
    try:
        return _WRITERS[fmt](report)
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r} (choose from {', '.join(FORMATS)})") from None


def write_reports(report: StudyReport, out_dir, formats: Iterable[str] = FORMATS, stem: str = "report") -> list:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for fmt in formats:
        path = os.path.join(out_dir, f"{stem}.{EXTENSIONS[fmt]}")
        with open(path, "wb") as fh:
            fh.write(export_report(report, fmt))
        paths.append(path)
    return paths
