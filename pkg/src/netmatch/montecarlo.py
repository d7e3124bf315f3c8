"""Monte Carlo bias study across sample sizes and estimators.

Every (n, replication) cell draws from its own Philox stream keyed by
``(master_seed, n, rep_index)``, so results do not depend on execution
order, worker count, or which other sample sizes are in the design.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .distance import KernelSpec
from .errors import ConfigError, DegenerateMatchingError, NetmatchError
from .estimators import (
    EstimatorConfig,
    baseline_infeasible,
    baseline_naive,
    baseline_with_controls,
    estimate_beta,
)
from .model import LinkFunction, TrueParameters, lambda_true, simulate_sample

ESTIMATORS = ("matched", "naive", "infeasible", "with_controls")
LABELS = {
    "matched": "Matched",
    "naive": "Naive Logit",
    "infeasible": "Infeasible Logit",
    "with_controls": "Logit with controls",
}
DEFAULT_SIZES = (50, 100, 150, 200, 250, 500)


@dataclass(frozen=True)
class StudyDesign:
    link: LinkFunction = field(default_factory=LinkFunction.blockmodel)
    sample_sizes: tuple = DEFAULT_SIZES
    replications: int = 100
    params: TrueParameters = field(default_factory=lambda: TrueParameters([1.0], lambda_true))
    estimators: tuple = ESTIMATORS
    master_seed: int = 20240101
    config: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.sample_sizes or min(self.sample_sizes) < 10:
            raise ConfigError("sample sizes must be at least 10")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ConfigError(f"estimators must be a non-empty subset of {', '.join(ESTIMATORS)}")

    def echo(self) -> dict:
        return {
            "link": self.link.variant,
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "beta": [float(b) for b in self.params.beta],
            "lambda": getattr(self.params.lam, "__name__", repr(self.params.lam)),
            "estimators": list(self.estimators),
            "master_seed": self.master_seed,
            "bandwidth": self.config.kernel.bandwidth,
            "kernel": self.config.kernel.kernel,
        }


@dataclass
class ReplicationRecord:
    n: int
    rep_index: int
    bias: dict  # estimator -> float, or None when the fit failed
    reasons: dict = field(default_factory=dict)


def _fit_one(name: str, sample, design: StudyDesign) -> np.ndarray:
    if name == "matched":
        res = estimate_beta(sample, design.config)
        if not res.converged:
            raise _Failure("nonconvergence: " + "; ".join(res.notes))
        return res.beta_hat
    fit = {
        "naive": baseline_naive,
        "infeasible": lambda s: baseline_infeasible(s, design.params.lam),
        "with_controls": baseline_with_controls,
    }[name](sample)
    if fit.separated:
        raise _Failure("separation: " + "; ".join(fit.notes))
    if not fit.converged:
        raise _Failure("nonconvergence: " + "; ".join(fit.notes))
    return fit.slopes[: sample.k]


class _Failure(Exception):
    pass


def run_replication(design: StudyDesign, n: int, rep_index: int) -> ReplicationRecord:
    """Simulate one sample and record ``beta_hat - beta`` (first slope) per estimator."""
    sample = simulate_sample(n, design.link, design.params, (design.master_seed, n, rep_index))
    rec = ReplicationRecord(n, rep_index, {})
    for name in design.estimators:
        try:
            est = _fit_one(name, sample, design)
            rec.bias[name] = float(est[0] - design.params.beta[0])
        except DegenerateMatchingError as exc:
            rec.bias[name] = None
            rec.reasons[name] = f"degenerate matching: {exc}"
        except _Failure as exc:
            rec.bias[name] = None
            rec.reasons[name] = str(exc)
        except NetmatchError as exc:
            rec.bias[name] = None
            rec.reasons[name] = f"{type(exc).__name__}: {exc}"
    return rec


@dataclass
class CellStats:
    mean_bias: Optional[float]
    mean_absolute_error: Optional[float]
    std_dev: Optional[float]
    used_replications: int
    failed_replications: int

    @classmethod
    def from_biases(cls, values, total: int) -> "CellStats":
        v = np.array([x for x in values if x is not None], dtype=float)
        if v.size == 0:
            return cls(None, None, None, 0, total)
        std = float(np.std(v, ddof=1)) if v.size > 1 else None
        return cls(float(np.mean(v)), float(np.mean(np.abs(v))), std, int(v.size), total - int(v.size))


@dataclass
class StudyReport:
    design: dict
    sample_sizes: list
    estimators: list
    cells: dict  # (n, estimator) -> CellStats
    failures: list = field(default_factory=list)

    def cell(self, n: int, estimator: str) -> CellStats:
        return self.cells[(n, estimator)]


def _cell_job(args):
    design, n, rep = args
    return run_replication(design, n, rep)


def default_jobs() -> int:
    env = os.environ.get("NETMATCH_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NETMATCH_JOBS must be an integer, got {env!r}") from None
    return 1


def run_study(design: StudyDesign, jobs: Optional[int] = None,
              progress: Optional[Callable[[ReplicationRecord], None]] = None) -> StudyReport:
    """Run every (n, replication) cell and aggregate per (n, estimator).

    ``jobs > 1`` spreads cells over a process pool; results are keyed by
    cell so the report is identical for any ``jobs``.
    """
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    tasks = [(design, n, r) for n in design.sample_sizes for r in range(design.replications)]
    records = {}
    if jobs == 1:
        for t in tasks:
            rec = _cell_job(t)
            records[(rec.n, rec.rep_index)] = rec
            if progress:
                progress(rec)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_cell_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))):
                records[(rec.n, rec.rep_index)] = rec
                if progress:
                    progress(rec)
    cells, failures = {}, []
    for n in design.sample_sizes:
        recs = [records[(n, r)] for r in range(design.replications)]
        for name in design.estimators:
            cells[(n, name)] = CellStats.from_biases([r.bias[name] for r in recs], design.replications)
        for r in recs:
            for name, why in sorted(r.reasons.items()):
                failures.append({"n": n, "rep_index": r.rep_index, "estimator": name, "reason": why})
    return StudyReport(design.echo(), list(design.sample_sizes), list(design.estimators), cells, failures)


# --------------------------------------------------------------------------
# report rendering
# --------------------------------------------------------------------------

CSV_FIELDS = ("n", "estimator", "mean_bias", "mean_absolute_error", "std_dev",
              "used_replications", "failed_replications")


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def report_to_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for n in report.sample_sizes:
        for name in report.estimators:
            c = report.cells[(n, name)]
            w.writerow([n, name, _num(c.mean_bias), _num(c.mean_absolute_error), _num(c.std_dev),
                        c.used_replications, c.failed_replications])
    return buf.getvalue()


def parse_report_csv(text: str) -> dict:
    """Inverse of :func:`report_to_csv`; returns ``{(n, estimator): CellStats}``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    opt = lambda s: None if s == "" else float(s)  # noqa: E731
    return {
        (int(r["n"]), r["estimator"]): CellStats(
            opt(r["mean_bias"]), opt(r["mean_absolute_error"]), opt(r["std_dev"]),
            int(r["used_replications"]), int(r["failed_replications"]),
        )
        for r in rows
    }


def report_to_json(report: StudyReport) -> str:
    doc = {
        "design": report.design,
        "cells": [
            {"n": n, "estimator": name, **report.cells[(n, name)].__dict__}
            for n in report.sample_sizes
            for name in report.estimators
        ],
        "failures": report.failures,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_to_markdown(report: StudyReport) -> str:
    """Table of mean bias with one row per ``n`` and one column per estimator."""
    head = "| n | " + " | ".join(LABELS[e] for e in report.estimators) + " |"
    rule = "|---:|" + "---:|" * len(report.estimators)
    lines = [head, rule]
    for n in report.sample_sizes:
        vals = []
        for name in report.estimators:
            c = report.cells[(n, name)]
            v = "n/a" if c.mean_bias is None else f"{c.mean_bias:.4f}"
            if c.failed_replications:
                v += f" ({c.failed_replications} failed)"
            vals.append(v)
        lines.append(f"| {n} | " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"


def emit_report(report: StudyReport, format: str) -> str:
    renderers = {"csv": report_to_csv, "json": report_to_json, "markdown": report_to_markdown}
    if format not in renderers:
        raise ConfigError(f"unknown report format {format!r}; choose one of {', '.join(renderers)}")
    return renderers[format](report)


# --------------------------------------------------------------------------
# design files
# --------------------------------------------------------------------------

DESIGN_KEYS = ("sample_sizes", "replications", "link", "seed", "estimators", "bandwidth", "grid")


def _split_list(value: str) -> list:
    return [t for t in value.replace(",", " ").split() if t]


def parse_design(text: str, source: str = "<design>", grid_loader=None) -> StudyDesign:
    """Parse a ``key = value`` design file.

    Recognised keys: sample_sizes, replications, link, seed, estimators,
    bandwidth, grid (path to a CSV table, required when ``link = grid``).
    """
    cp = configparser.ConfigParser(delimiters=("=", ":"), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string("[design]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    raw = dict(cp["design"])
    bad = sorted(set(raw) - set(DESIGN_KEYS))
    if bad:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(bad)}; valid keys are {', '.join(DESIGN_KEYS)}")
    kw = {}
    try:
        if "sample_sizes" in raw:
            kw["sample_sizes"] = tuple(int(t) for t in _split_list(raw["sample_sizes"]))
        if "replications" in raw:
            kw["replications"] = int(raw["replications"])
        if "seed" in raw:
            kw["master_seed"] = int(raw["seed"])
        if "estimators" in raw:
            kw["estimators"] = tuple(_split_list(raw["estimators"]))
        if "bandwidth" in raw and raw["bandwidth"].strip().lower() not in ("", "default"):
            kw["config"] = EstimatorConfig(kernel=KernelSpec(bandwidth=float(raw["bandwidth"])))
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    link = raw.get("link", "blockmodel").strip()
    if link == "grid":
        if "grid" not in raw or grid_loader is None:
            raise ConfigError(f"{source}: link = grid needs a 'grid' key naming a CSV table")
        kw["link"] = LinkFunction.from_grid(grid_loader(raw["grid"]))
    else:
        try:
            kw["link"] = LinkFunction.by_name(link)
        except ValueError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    return StudyDesign(**kw)


def format_design(design: StudyDesign) -> str:
    lines = [
        f"sample_sizes = {', '.join(str(n) for n in design.sample_sizes)}",
        f"replications = {design.replications}",
        f"link = {design.link.variant}",
        f"seed = {design.master_seed}",
        f"estimators = {', '.join(design.estimators)}",
    ]
    if design.config.kernel.bandwidth is not None:
        lines.append(f"bandwidth = {design.config.kernel.bandwidth!r}")
    return "\n".join(lines) + "\n"
