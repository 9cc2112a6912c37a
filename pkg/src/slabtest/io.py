"""Run configuration parsing and CSV/JSON serialisation."""

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from slabtest import __version__
from slabtest.exceptions import ConfigError, DomainError
from slabtest.priors import parse_prior
from slabtest.procedures import PROCEDURES, TestOutcome
from slabtest.simulation import SCENARIOS, W_POLICIES, ProcedureSpec, SimulationCell

METRICS_COLUMNS = (
    "procedure", "prior", "n", "s", "mu", "scenario", "t", "reps",
    "fdr", "fdr_se", "fnr", "fnr_se", "mean_rejections",
)
DEFAULT_REPS = 2000

_CELL_KEYS = {
    "n", "s", "mu", "scenario", "prior", "prior_id", "procedures", "reps", "seed",
    "w_policy", "w", "lower",
}
_TOP_KEYS = {"cells", "seed", "workers"}
_PROC_KEYS = {"id", "procedure", "t", "L"}


@dataclass
class RunConfig:
    mode: str
    cells: List[SimulationCell] = field(default_factory=list)
    prior: Optional[str] = None
    procedures: List[ProcedureSpec] = field(default_factory=list)
    input: Optional[str] = None
    output: Optional[str] = None
    seed: int = 0
    workers: int = 1


def default_workers():
    raw = os.environ.get("SLABTEST_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError("invalid-workers", f"SLABTEST_WORKERS={raw!r} is not an integer") from None
    if workers < 1:
        raise ConfigError("invalid-workers", f"SLABTEST_WORKERS must be >= 1, got {workers}")
    return workers


def _reject_unknown(obj, allowed, where):
    for key in obj:
        if key not in allowed:
            raise ConfigError("unknown-key", f"unknown key {key!r} in {where}")


def _number(obj, key, where, kind=float, default=None):
    if key not in obj:
        if default is None:
            raise ConfigError("missing-key", f"{where}.{key} is required")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("invalid-type", f"{where}.{key} must be a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError("invalid-type", f"{where}.{key} must be an integer, got {value!r}")
    return kind(value)


def _parse_procedure(raw, where):
    if isinstance(raw, str):
        raise ConfigError("missing-key", f"{where} must be an object with 'id' and 't'")
    if not isinstance(raw, dict):
        raise ConfigError("invalid-type", f"{where} must be an object")
    _reject_unknown(raw, _PROC_KEYS, where)
    pid = raw.get("id", raw.get("procedure"))
    if pid not in PROCEDURES:
        raise ConfigError(
            "unknown-procedure", f"{where}.id = {pid!r}; known: {', '.join(PROCEDURES)}"
        )
    t = _number(raw, "t", where)
    if not (0 < t < 1):
        raise ConfigError("invalid-t", f"{where}.t = {t!r} is not in (0, 1)")
    if pid == "mci" and t >= 0.5:
        raise ConfigError("invalid-t", f"{where}.t = {t!r}: mci needs t < 1/2")
    L = raw.get("L")
    if L is not None:
        L = _number(raw, "L", where)
        if not L > 0:
            raise ConfigError("invalid-L", f"{where}.L must be positive")
    return ProcedureSpec(pid, t, L)


def _parse_cell(raw, where, seed):
    if not isinstance(raw, dict):
        raise ConfigError("invalid-type", f"{where} must be an object")
    _reject_unknown(raw, _CELL_KEYS, where)
    n = _number(raw, "n", where, int)
    s = _number(raw, "s", where, int, default=0)
    if n < 1:
        raise ConfigError("invalid-n", f"{where}.n must be >= 1")
    if not (0 <= s <= n):
        raise ConfigError("invalid-sparsity", f"{where}.s = {s} must satisfy 0 <= s <= n = {n}")
    prior = raw.get("prior", raw.get("prior_id", "quasi-cauchy"))
    try:
        prior = parse_prior(prior).id
    except DomainError as exc:
        raise ConfigError("unknown-prior", str(exc)) from None
    scenario = raw.get("scenario", "constant")
    if scenario not in SCENARIOS:
        raise ConfigError("unknown-scenario", f"{where}.scenario = {scenario!r}; known: {', '.join(SCENARIOS)}")
    w_policy = raw.get("w_policy", "mmle")
    if w_policy not in W_POLICIES:
        raise ConfigError("unknown-w-policy", f"{where}.w_policy = {w_policy!r}; known: {', '.join(W_POLICIES)}")
    procs = raw.get("procedures", [])
    if not isinstance(procs, list):
        raise ConfigError("invalid-type", f"{where}.procedures must be a list")
    procedures = tuple(_parse_procedure(p, f"{where}.procedures[{i}]") for i, p in enumerate(procs))
    reps = _number(raw, "reps", where, int, default=DEFAULT_REPS)
    try:
        return SimulationCell(
            n=n, s=s, mu=_number(raw, "mu", where, default=0.0), scenario=scenario,
            prior=prior, procedures=procedures, reps=reps,
            seed=_number(raw, "seed", where, int, default=seed), w_policy=w_policy,
            w=raw.get("w"), lower=raw.get("lower"),
        )
    except DomainError as exc:
        raise ConfigError("invalid-cell", f"{where}: {exc}") from None


def parse_config(source):
    """Parse a JSON simulation config into a :class:`RunConfig`.

    The document is either a single cell object or ``{"cells": [...]}`` with
    optional top-level ``seed`` and ``workers``.  Unknown keys are rejected.
    """
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError("malformed-json", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("invalid-type", "config must be a JSON object")
    if "cells" in doc:
        _reject_unknown(doc, _TOP_KEYS, "config")
        raw_cells = doc["cells"]
        if not isinstance(raw_cells, list) or not raw_cells:
            raise ConfigError("invalid-type", "config.cells must be a nonempty list")
        top = doc
    else:
        raw_cells, top = [doc], {}
    seed = _number(top, "seed", "config", int, default=0)
    if not (0 <= seed < 2**64):
        raise ConfigError("invalid-seed", "seed must be a 64-bit unsigned integer")
    workers = _number(top, "workers", "config", int, default=default_workers())
    if workers < 1:
        raise ConfigError("invalid-workers", f"workers must be >= 1, got {workers}")
    where = "config.cells[{}]" if "cells" in doc else "config{}"
    cells = [_parse_cell(c, where.format(i if "cells" in doc else ""), seed) for i, c in enumerate(raw_cells)]
    return RunConfig(mode="simulate", cells=cells, seed=seed, workers=workers)


def format_float(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def header_comment():
    return f"# slabtest {__version__}"


def write_csv(path, columns, rows):
    """CSV with a version comment line, then a header, then ``rows`` (sequences)."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(header_comment() + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([v if isinstance(v, str) else format_float(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_metrics_csv(path, results):
    write_csv(path, METRICS_COLUMNS, ([getattr(r, c) for c in METRICS_COLUMNS] for r in results))


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_observations(path):
    """One real number per line; an optional first line ``x`` is a header."""
    values = []
    try:
        fh = open(path)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if lineno == 1 and text == "x":
                continue
            try:
                value = float(text)
            except ValueError:
                raise DomainError(f"{path}:{lineno}: not a number: {text!r}") from None
            if not math.isfinite(value):
                raise DomainError(f"{path}:{lineno}: non-finite value {text!r}")
            values.append(value)
    if not values:
        raise DomainError(f"{path}: no observations")
    return np.array(values)


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def outcome_to_dict(outcome, prior=None, n=None):
    """Stable-ordered, JSON-ready view of a :class:`TestOutcome`."""
    est = outcome.estimate
    return {
        "version": __version__,
        "procedure": outcome.procedure_id,
        "prior": prior,
        "t": outcome.t,
        "n": int(n if n is not None else outcome.reject.size),
        "w_hat": _json_float(outcome.w_used),
        "at_lower_boundary": bool(est.at_lower_boundary) if est else None,
        "at_upper_boundary": bool(est.at_upper_boundary) if est else None,
        "omega_n": _json_float(outcome.omega_n),
        "bonferroni_fallback": bool(outcome.fallback),
        "degenerate": bool(outcome.degenerate),
        "effective_abs_threshold": _json_float(outcome.effective_abs_threshold),
        "rejections": outcome.rejections,
        "values": [float(v) for v in outcome.values],
        "reject": [bool(r) for r in outcome.reject],
    }


def outcome_from_dict(doc):
    def num(v):
        return None if v is None else float(v)

    return TestOutcome(
        procedure_id=doc["procedure"],
        t=doc["t"],
        reject=np.array(doc["reject"], dtype=bool),
        values=np.array(doc["values"], dtype=float),
        w_used=num(doc["w_hat"]),
        effective_abs_threshold=num(doc["effective_abs_threshold"]),
        omega_n=num(doc["omega_n"]),
        fallback=doc["bonferroni_fallback"],
        degenerate=doc["degenerate"],
    )


def write_json(path, doc):
    text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if path in (None, "-"):
        print(text, end="")
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit(results, fmt, path):
    """Write simulation rows as CSV or a single analysis document as JSON."""
    if fmt == "csv":
        write_metrics_csv(path, results)
    elif fmt == "json":
        write_json(path, results)
    else:
        raise ValueError(f"unknown format {fmt!r}")
