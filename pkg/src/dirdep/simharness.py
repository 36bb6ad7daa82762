"""Monte Carlo study of the checkerboard estimator.

Every ``(model, n, replication)`` triple is an independent task whose random
stream is derived by hashing the master seed with the task key, so results
do not depend on the number of workers or on execution order.  One sample
and one empirical checkerboard per task are shared by all convex functions.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import re
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .checkerboard import ecbc, resolution
from .ingest import BivariateSample, to_pseudo
from .measures import lambda_phi
from .models import CopulaModel, parse_model, true_lambda
from .phi import ConvexFunction, parse_phi

__all__ = [
    "ConfigError",
    "SimulationError",
    "ExperimentConfig",
    "ResultRecord",
    "SummaryRow",
    "load_config",
    "stable_hash",
    "run",
    "compute_truths",
    "summarize",
    "emit",
    "canonical_bytes",
    "RECORDS_HEADER",
]

log = logging.getLogger(__name__)

RECORDS_HEADER = ["model", "phi", "n", "rep", "N", "estimate", "wall_time_ms"]
SUMMARY_HEADER = ["model", "phi", "n", "count", "mean", "sd", "q25", "median", "q75",
                  "min", "max", "true_value", "median_abs_error"]


class ConfigError(ValueError):
    pass


class SimulationError(RuntimeError):
    def __init__(self, failures):
        self.failures = failures
        lines = [f"{key}: {msg}" for key, msg in failures]
        super().__init__(f"{len(failures)} task(s) failed:\n" + "\n".join(lines))


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple
    phis: tuple
    sample_sizes: tuple
    replications: int = 100
    s: float = 0.5
    master_seed: int = 0
    workers: int = 1
    # resolution of the reference values; the generic O(N^3) path gets a smaller one
    truth_resolution: int = 2048
    truth_resolution_generic: int = 256

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "phis", tuple(self.phis))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if not self.models or not self.phis:
            raise ConfigError("need at least one model and one convex function")
        if not self.sample_sizes or min(self.sample_sizes) < 2:
            raise ConfigError("sample_sizes must be non-empty with every n >= 2")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not 0 < self.s <= 1:
            raise ConfigError("s must lie in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        descs = [p.descriptor for p in self.phis]
        if len(set(descs)) != len(descs):
            raise ConfigError("duplicate convex function descriptors")


@dataclass(frozen=True, order=True)
class ResultRecord:
    model: str
    phi: str
    n: int
    rep: int
    N: int
    estimate: float
    wall_time: float = field(default=0.0, compare=False)  # milliseconds


@dataclass(frozen=True)
class SummaryRow:
    model: str
    phi: str
    n: int
    count: int
    mean: float
    sd: float
    q25: float
    median: float
    q75: float
    min: float
    max: float
    true_value: float | None = None
    median_abs_error: float | None = None


# ---------------------------------------------------------------------- #
# configuration

def _split_list(value: str) -> list[str]:
    """Split a comma list whose items may carry comma-separated numeric arguments.

    ``"mo:0.2,0.7,fgm:0.6"`` gives ``["mo:0.2,0.7", "fgm:0.6"]``: a token that
    does not start with a letter continues the previous item.
    """
    items: list[str] = []
    for tok in (t.strip() for t in re.split(r"[,;]", value)):
        if not tok:
            continue
        if items and not tok[0].isalpha():
            items[-1] += "," + tok
        else:
            items.append(tok)
    return items


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a flat ``key = value`` file (``#`` starts a comment).

    Keys: ``models``, ``phis``, ``sample_sizes``, ``replications``, ``s``,
    ``master_seed``, ``workers``, ``truth_resolution``,
    ``truth_resolution_generic``.
    """
    raw = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        raw[key.strip()] = value.strip()
    known = {"models", "phis", "sample_sizes", "replications", "s", "master_seed",
             "workers", "truth_resolution", "truth_resolution_generic"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        kw = dict(
            models=[parse_model(m) for m in _split_list(raw.get("models", ""))],
            phis=[parse_phi(p) for p in _split_list(raw.get("phis", ""))],
            sample_sizes=[int(n) for n in re.split(r"[,;\s]+", raw.get("sample_sizes", "")) if n],
        )
        for key, conv in [("replications", int), ("s", float), ("master_seed", int),
                          ("workers", int), ("truth_resolution", int),
                          ("truth_resolution_generic", int)]:
            if key in raw:
                kw[key] = conv(raw[key])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


# ---------------------------------------------------------------------- #
# execution

def stable_hash(*parts) -> int:
    """64-bit seed from a tuple of values, stable across processes and platforms."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def _run_task(task):
    model, phis, n, rep, s, master_seed = task
    key = (model.descriptor, n, rep)
    try:
        t0 = time.perf_counter()
        xs, ys = model.sample(n, stable_hash(master_seed, model.descriptor, n, rep))
        pseudo = to_pseudo(BivariateSample(xs, ys),
                           seed=stable_hash(master_seed, model.descriptor, n, rep, "ties"))
        cb = ecbc(pseudo, resolution(n, s))
        shared = time.perf_counter() - t0
        out = []
        for f in phis:
            t1 = time.perf_counter()
            est = lambda_phi(cb, f).value
            ms = 1e3 * (shared + time.perf_counter() - t1)
            if not -1e-9 <= est <= 1 + 1e-9:
                raise ArithmeticError(f"estimate {est!r} for {f.descriptor} outside [0, 1]")
            out.append(ResultRecord(model.descriptor, f.descriptor, n, rep, cb.N, est, ms))
        return key, out, None
    except Exception as exc:  # contained; reported with the task key
        return key, None, f"{type(exc).__name__}: {exc}"


def run(config: ExperimentConfig) -> list[ResultRecord]:
    """Run every ``(model, n, replication)`` task and return sorted records."""
    tasks = [
        (model, config.phis, n, rep, config.s, config.master_seed)
        for model in config.models
        for n in config.sample_sizes
        for rep in range(config.replications)
    ]
    log.info("running %d tasks on %d worker(s)", len(tasks), config.workers)
    if config.workers == 1:
        results = map(_run_task, tasks)
        collected = list(results)
    else:
        chunk = max(1, len(tasks) // (4 * config.workers))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            collected = list(pool.map(_run_task, tasks, chunksize=chunk))
    failures = [(key, err) for key, _, err in collected if err is not None]
    if failures:
        raise SimulationError(failures)
    records = [r for _, recs, _ in collected for r in recs]
    records.sort()
    return records


def compute_truths(config: ExperimentConfig) -> dict:
    """Reference ``Lambda_phi`` value for each ``(model, phi)`` pair."""
    truths = {}
    for model in config.models:
        for f in config.phis:
            fast = f.kind == "abs^p" and f.param in (1.0, 2.0)
            N = config.truth_resolution if fast else config.truth_resolution_generic
            tv = true_lambda(model, f, N)
            if not tv.converged:
                log.warning("reference value for %s / %s not converged (change %.3g)",
                            model, f, tv.error_bound)
            truths[(model.descriptor, f.descriptor)] = tv.value
    return truths


def summarize(records, truths: Mapping | None = None) -> list[SummaryRow]:
    """Per ``(model, phi, n)`` statistics of the estimates."""
    if not records:
        raise ValueError("no records to summarise")
    truths = truths or {}
    groups: dict = {}
    for r in records:
        groups.setdefault((r.model, r.phi, r.n), []).append(r.estimate)
    rows = []
    for (model, phi, n), vals in sorted(groups.items()):
        x = np.asarray(vals)
        q25, med, q75 = np.quantile(x, [0.25, 0.5, 0.75])
        truth = truths.get((model, phi))
        mae = None if truth is None else float(np.median(np.abs(x - truth)))
        rows.append(SummaryRow(
            # statistics works in exact arithmetic: identical estimates give sd 0
            model, phi, n, x.size, float(statistics.mean(vals)),
            statistics.stdev(vals) if x.size > 1 else 0.0,
            float(q25), float(med), float(q75), float(x.min()), float(x.max()),
            truth, mae,
        ))
    return rows


# ---------------------------------------------------------------------- #
# output

def _fmt(x) -> str:
    return "" if x is None else repr(x)


def _record_rows(records, timing=True):
    for r in records:
        yield [r.model, r.phi, r.n, r.rep, r.N, repr(r.estimate),
               f"{r.wall_time:.3f}" if timing else ""]


def canonical_bytes(records) -> bytes:
    """Records as CSV without the timing column, in canonical order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORDS_HEADER[:-1])
    for row in _record_rows(sorted(records), timing=False):
        w.writerow(row[:-1])
    return buf.getvalue().encode()


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", text).strip("_")


def emit(records, summaries, out_dir) -> list[Path]:
    """Write ``records.csv``, ``summary.csv`` and one SVG boxplot per (model, phi)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "records.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORDS_HEADER)
        w.writerows(_record_rows(records))
    written.append(path)

    path = out / "summary.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow([s.model, s.phi, s.n, s.count, repr(s.mean), repr(s.sd), repr(s.q25),
                        repr(s.median), repr(s.q75), repr(s.min), repr(s.max),
                        _fmt(s.true_value), _fmt(s.median_abs_error)])
    written.append(path)

    by_panel: dict = {}
    for r in records:
        by_panel.setdefault((r.model, r.phi), {}).setdefault(r.n, []).append(r.estimate)
    truth_of = {(s.model, s.phi): s.true_value for s in summaries}
    for (model, phi), groups in sorted(by_panel.items()):
        path = out / f"{_slug(model)}__{_slug(phi)}.svg"
        path.write_text(boxplot_svg(groups, truth_of.get((model, phi)),
                                    title=f"{model}  {phi}"), encoding="utf-8")
        written.append(path)
    return written


def boxplot_svg(groups: Mapping[int, list], truth: float | None = None, title: str = "",
                width: int = 640, height: int = 400) -> str:
    """Minimal SVG boxplot: one box per sample size, Tukey whiskers, dashed truth line."""
    left, right, top, bottom = 60, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    ns = sorted(groups)
    lo = min(0.0, min(min(v) for v in groups.values()))
    hi = max(1.0, max(max(v) for v in groups.values()))

    def y(val):
        return top + ph * (hi - val) / (hi - lo)

    slot = pw / len(ns)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{_escape(title)}</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
    ]
    for tick in np.linspace(lo, hi, 6):
        parts.append(f'<text x="{left - 6}" y="{y(tick) + 4:.1f}" text-anchor="end">{tick:.2f}</text>')
    for k, n in enumerate(ns):
        vals = np.sort(np.asarray(groups[n], dtype=float))
        q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
        iqr = q3 - q1
        inside = vals[(vals >= q1 - 1.5 * iqr) & (vals <= q3 + 1.5 * iqr)]
        wlo, whi = inside.min(), inside.max()
        cx = left + slot * (k + 0.5)
        bw = min(40.0, slot * 0.6)
        g = [f'<g class="box" data-n="{n}">',
             f'<line x1="{cx:.1f}" y1="{y(whi):.1f}" x2="{cx:.1f}" y2="{y(q3):.1f}" stroke="black"/>',
             f'<line x1="{cx:.1f}" y1="{y(q1):.1f}" x2="{cx:.1f}" y2="{y(wlo):.1f}" stroke="black"/>',
             f'<rect x="{cx - bw / 2:.1f}" y="{y(q3):.1f}" width="{bw:.1f}" '
             f'height="{max(y(q1) - y(q3), 0.5):.1f}" fill="#cfe0f3" stroke="black"/>',
             f'<line x1="{cx - bw / 2:.1f}" y1="{y(med):.1f}" x2="{cx + bw / 2:.1f}" '
             f'y2="{y(med):.1f}" stroke="black" stroke-width="2"/>']
        for o in vals[(vals < wlo) | (vals > whi)]:
            g.append(f'<circle cx="{cx:.1f}" cy="{y(o):.1f}" r="2" fill="none" stroke="black"/>')
        g.append(f'<text x="{cx:.1f}" y="{top + ph + 18}" text-anchor="middle">{n}</text>')
        g.append("</g>")
        parts.extend(g)
    if truth is not None:
        parts.append(f'<line class="truth" x1="{left}" y1="{y(truth):.1f}" x2="{left + pw}" '
                     f'y2="{y(truth):.1f}" stroke="red" stroke-dasharray="6,4"/>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">n</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
