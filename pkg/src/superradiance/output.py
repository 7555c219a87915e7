"""Deterministic CSV tables.

Every file starts with one ``#`` metadata line (config hash, version,
column units) followed by the column-name row.  Floats are written with
``repr`` so that identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import math

import numpy as np

from .analysis import witness
from .model import single_emitter_rate

TIMESERIES_COLUMNS = ("t_g", "sz", "n", "re_c0", "im_c0", "czz", "gamma_se", "gamma_ste",
                      "gamma_ce", "gamma_tot", "witness", "purity", "dicke_overlap")

UNITS = {
    "t_g": "1/g", "n": "photons",
    "gamma_se": "g", "gamma_ste": "g", "gamma_ce": "g", "gamma_tot": "g",
}


class SchemaError(ValueError):
    """Two tables cannot be compared column by column."""


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_table(path, columns, rows, meta):
    """Write ``rows`` (sequences aligned with ``columns``) under a metadata line."""
    units = " ".join(f"{c}[{UNITS.get(c, '1')}]" for c in columns)
    head = " ".join(f"{k}={meta[k]}" for k in sorted(meta))
    with open(path, "w", newline="") as fh:
        fh.write(f"# {head} units: {units}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_table(path):
    """Return ``(meta, columns, data)``; empty cells become NaN, non-numeric cells stay strings."""
    with open(path, newline="") as fh:
        first = fh.readline()
        meta = {}
        if first.startswith("#"):
            body = first[1:].split(" units:")[0]
            for token in body.split():
                key, _, value = token.partition("=")
                meta[key] = value
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [row for row in reader]

    def convert(cell):
        if cell == "":
            return float("nan")
        try:
            return float(cell)
        except ValueError:
            return cell

    data = [[convert(c) for c in row] for row in rows]
    return meta, columns, data


def numeric_columns(columns, data):
    """Columns whose every cell is numeric, as ``{name: array}``."""
    out = {}
    for j, name in enumerate(columns):
        cells = [row[j] for row in data]
        if all(isinstance(c, float) for c in cells):
            out[name] = np.array(cells, dtype=float)
    return out


def cluster_rows(run):
    rows = []
    for t, s, r in zip(run.times, run.states, run.rates):
        rows.append((t, s.s_z, s.n, s.c0.real, s.c0.imag, s.c_zz, r.gamma_se, r.gamma_ste,
                     r.gamma_ce, r.gamma_tot, witness(s.c0, s.c_zz), None, None))
    return rows


def exact_rows(run):
    """Rows for an exact trajectory; the rate columns apply the cluster rate formulas to exact moments."""
    params = run.params
    N = params.n_emitters
    try:
        i0 = single_emitter_rate(params)
    except ValueError:
        i0 = float("nan")
    rows = []
    for rec in run.records:
        se = i0 * N / 2 * (1 + rec.sz)
        ste = i0 * N * rec.n * rec.sz
        ce = i0 * N * (N - 1) * rec.c0.real if N > 1 else 0.0
        w = witness(rec.c0, rec.czz) if N > 1 else float("nan")
        rows.append((rec.time, rec.sz, rec.n, rec.c0.real, rec.c0.imag, rec.czz, se, ste, ce,
                     se + ste + ce, w, rec.purity, rec.dicke_overlap))
    return rows


def _peak_rel(a, b):
    if np.all(np.isnan(a)) or np.all(np.isnan(b)):
        return float("nan")
    pa, pb = np.nanmax(np.abs(a)), np.nanmax(np.abs(b))
    scale = max(pa, pb)
    return float(abs(pa - pb) / scale) if scale > 0 else 0.0


def compare_tables(path_a, path_b):
    """Per-column differences between two tables with the same schema.

    Returns ``{column: {"max_abs", "rms", "peak_rel"}}`` for every numeric
    column; ``peak_rel`` compares the peak magnitudes relative to the larger.
    Columns that are empty in both tables report zeros.
    """
    _, cols_a, data_a = read_table(path_a)
    _, cols_b, data_b = read_table(path_b)
    if cols_a != cols_b:
        raise SchemaError(f"column mismatch: {cols_a} vs {cols_b}")
    if len(data_a) != len(data_b):
        raise SchemaError(f"row count mismatch: {len(data_a)} vs {len(data_b)}")
    num_a, num_b = numeric_columns(cols_a, data_a), numeric_columns(cols_b, data_b)
    report = {}
    for name in cols_a:
        if name not in num_a or name not in num_b:
            continue
        a, b = num_a[name], num_b[name]
        if not len(a) or (np.all(np.isnan(a)) and np.all(np.isnan(b))):
            report[name] = {"max_abs": 0.0, "rms": 0.0, "peak_rel": 0.0}
            continue
        both_nan = np.isnan(a) & np.isnan(b)
        diff = np.where(both_nan, 0.0, np.abs(a - b))
        report[name] = {"max_abs": float(np.max(diff)),
                        "rms": float(np.sqrt(np.mean(diff ** 2))),
                        "peak_rel": _peak_rel(a, b)}
    return report
