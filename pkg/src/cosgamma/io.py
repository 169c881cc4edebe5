"""Text file formats.

Score file
    One float per line, optionally followed by an integer level label.
    Blank lines and lines starting with ``#`` are ignored.  Written with
    17 significant digits so values round-trip exactly.

Model file
    JSON object::

        {"format_version": 1,
         "n_states": 2,
         "states": [{"tau": ..., "alpha": ..., "c": ..., "lambda": ...}, ...],
         "log_likelihood": ..., "n_samples": ..., "mass_outside": ...,
         "fit": {"iterations": ..., "converged": ..., "seed": ..., "config": {...}}}

    States are stored in ascending-mean order.  Only ``format_version``,
    ``n_states`` and ``states`` are required; unknown keys are rejected.

Embedding file
    One vector per line, comma-separated floats, uniform width.

Matrix file
    Similarity matrix as CSV, one query per row.
"""

import json
import math
from dataclasses import asdict

import numpy as np

from .distributions import GammaMixture, component_pdfs, mass_outside, mix_pdf
from .errors import DomainError, InputError

FORMAT_VERSION = 1
_TOP_KEYS = {"format_version", "n_states", "states", "log_likelihood",
             "n_samples", "mass_outside", "fit"}
_STATE_KEYS = {"tau", "alpha", "c", "lambda"}
_FIT_KEYS = {"iterations", "converged", "seed", "config", "warm_switch_iter", "elapsed_s"}


def format_float(v):
    return format(float(v), ".17g")


# --- scores -----------------------------------------------------------------

def parse_scores(text, source="<scores>"):
    """Parse score-file text into ``(values, levels)``; ``levels`` may be None."""
    values, levels = [], []
    n_cols = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if n_cols is None:
            n_cols = len(parts)
        if len(parts) != n_cols or len(parts) > 2:
            raise InputError(f"{source}:{lineno}: expected {n_cols or 1} column(s), got {len(parts)}")
        try:
            v = float(parts[0])
            lv = int(parts[1]) if len(parts) == 2 else None
        except ValueError as exc:
            raise InputError(f"{source}:{lineno}: {exc}") from None
        if not math.isfinite(v):
            raise InputError(f"{source}:{lineno}: non-finite value")
        values.append(v)
        if lv is not None:
            levels.append(lv)
    vals = np.array(values, dtype=float)
    lv = np.array(levels, dtype=np.int64) if n_cols == 2 else None
    return vals, lv


def read_scores(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scores(fh.read(), str(path))


def format_scores(values, levels=None, header=None):
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    if levels is None:
        lines.extend(format_float(v) for v in values)
    else:
        if len(levels) != len(values):
            raise InputError("levels and values differ in length")
        lines.extend(f"{format_float(v)} {int(l)}" for v, l in zip(values, levels))
    return "\n".join(lines) + ("\n" if lines else "")


def write_scores(path, values, levels=None, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_scores(values, levels, header))


# --- models -----------------------------------------------------------------

def model_to_dict(model, report=None):
    doc = {
        "format_version": FORMAT_VERSION,
        "n_states": model.n_states,
        "states": [{"tau": w, "alpha": p.alpha, "c": p.c, "lambda": p.lam}
                   for w, p in zip(model.weights, model.components)],
        "mass_outside": mass_outside(model),
    }
    if report is not None:
        doc["log_likelihood"] = report.log_likelihood
        doc["n_samples"] = report.n_samples
        doc["fit"] = {
            "iterations": report.iterations_run,
            "converged": report.converged,
            "seed": report.config.seed,
            "warm_switch_iter": report.warm_switch_iter,
            "config": asdict(report.config),
        }
    return doc


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise InputError(f"{where}: unknown field(s) {sorted(extra)}")


def model_from_dict(doc):
    """Validate a model document and return ``(GammaMixture, doc)``."""
    _reject_unknown(doc, _TOP_KEYS, "model")
    for key in ("format_version", "n_states", "states"):
        if key not in doc:
            raise InputError(f"model: missing field {key!r}")
    if doc["format_version"] != FORMAT_VERSION:
        raise InputError(f"model: unsupported format_version {doc['format_version']!r}")
    states = doc["states"]
    if not isinstance(states, list) or len(states) != doc["n_states"]:
        raise InputError("model: n_states does not match the states list")
    for k, st in enumerate(states):
        _reject_unknown(st, _STATE_KEYS, f"model.states[{k}]")
        missing = _STATE_KEYS - set(st)
        if missing:
            raise InputError(f"model.states[{k}]: missing {sorted(missing)}")
    if "fit" in doc and doc["fit"] is not None:
        _reject_unknown(doc["fit"], _FIT_KEYS, "model.fit")
    try:
        model = GammaMixture.from_arrays(
            [float(st["tau"]) for st in states],
            [float(st["alpha"]) for st in states],
            [float(st["c"]) for st in states],
            [float(st["lambda"]) for st in states],
        )
    except (DomainError, TypeError, ValueError) as exc:
        raise InputError(f"model: {exc}") from None
    return model, doc


def format_model(model, report=None):
    return json.dumps(model_to_dict(model, report), indent=2) + "\n"


def write_model(path, model, report=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_model(model, report))


def read_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    return model_from_dict(doc)


# --- embeddings and matrices -------------------------------------------------

def _read_csv_rows(path, what):
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InputError(f"{path}:{lineno}: {what} width {len(row)} != {width}")
            rows.append(row)
    if not rows:
        raise InputError(f"{path}: no {what} rows")
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: non-finite entries")
    return arr


def read_embeddings(path):
    return _read_csv_rows(path, "embedding")


def read_matrix(path):
    return _read_csv_rows(path, "matrix")


def write_matrix(path, matrix):
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(format_float(v) for v in row) + "\n")


def cosine_similarities(query, docs):
    """``u . v / (|u| |v|)`` for each doc row, clipped to [-1, 1]."""
    q = np.asarray(query, dtype=float).ravel()
    D = np.atleast_2d(np.asarray(docs, dtype=float))
    if D.shape[1] != q.size:
        raise InputError(f"query has dimension {q.size}, docs have {D.shape[1]}")
    qn = np.linalg.norm(q)
    if qn == 0:
        raise InputError("query vector has zero norm")
    dn = np.linalg.norm(D, axis=1)
    zero = np.flatnonzero(dn == 0)
    if zero.size:
        raise InputError(f"document row {int(zero[0])} has zero norm")
    return np.clip(D @ q / (dn * qn), -1.0, 1.0)


# --- density export ------------------------------------------------------------

def density_table(model, values, bins=100, pad=0.02):
    """Histogram and fitted densities on the histogram bin centres.

    Returns ``(header, rows)``: columns are ``x``, ``empirical_density``,
    ``fitted_density`` and ``state_<i>`` (weighted per-state densities).
    """
    x = np.asarray(values, dtype=float)
    lo, hi = x.min() - pad, x.max() + pad
    hist, edges = np.histogram(x, bins=bins, range=(lo, hi), density=True)
    centres = 0.5 * (edges[:-1] + edges[1:])
    fitted = np.atleast_1d(mix_pdf(model, centres))
    per_state = component_pdfs(model, centres)
    header = ["x", "empirical_density", "fitted_density"] + [
        f"state_{i + 1}" for i in range(model.n_states)]
    rows = np.column_stack([centres, hist, fitted, per_state.T])
    return header, rows


def write_density_csv(path, model, values, bins=100):
    header, rows = density_table(model, values, bins)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(format_float(v) for v in r) + "\n")
