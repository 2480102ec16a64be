"""Delimited-table reading and deterministic writing."""

import csv
import io
import math
import os

import numpy as np

from .errors import InputError

# significant digits for derived quantities; enough for every estimate we
# report while absorbing last-ulp differences between BLAS/libm builds
DIGITS = 12


def delimiter_for(path):
    ext = os.path.splitext(str(path))[1].lower()
    return "\t" if ext in (".tsv", ".tab") else ","


def read_table(path, required, optional=()):
    """Read a header-row table and return ``(header, rows)``.

    ``rows`` is a list of ``(line_number, dict)`` with surrounding whitespace
    stripped from every field.  Missing required columns raise ``InputError``.
    """
    if not os.path.isfile(path):
        raise InputError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        return _parse(csv.reader(fh, delimiter=delimiter_for(path)), path, required, optional)


def parse_table(text, required, optional=(), source="<text>"):
    """:func:`read_table` for comma-separated text already in memory."""
    return _parse(csv.reader(io.StringIO(text)), source, required, optional)


def _parse(reader, path, required, optional):
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError(f"{path}: empty file") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise InputError(f"{path}: missing columns {', '.join(missing)}")
    known = set(required) | set(optional)
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        rows.append((lineno, {h: f.strip() for h, f in zip(header, fields) if h in known}))
    return header, rows


def parse_int(text, what, where, allow_empty=False):
    if text == "":
        if allow_empty:
            return None
        raise InputError(f"{where}: missing {what}")
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{where}: {what} is not a number: {text!r}") from None
    if not value.is_integer():
        raise InputError(f"{where}: {what} must be an integer: {text!r}")
    return int(value)


def parse_float(text, what, where, allow_empty=False):
    if text == "":
        if allow_empty:
            return None
        raise InputError(f"{where}: missing {what}")
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{where}: {what} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise InputError(f"{where}: {what} must be finite: {text!r}")
    return value


def fmt(value, digits=DIGITS):
    """Format one cell; NaN/None become empty strings."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0.0:
            return "0"
        return f"{v:.{digits}g}"
    return str(value)


def render_rows(header, rows, digits=DIGITS):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v, digits) for v in row])
    return buf.getvalue()


def render_matrix(row_labels, col_labels, matrix, corner="", digits=DIGITS):
    matrix = np.asarray(matrix)
    rows = [[r, *matrix[k].tolist()] for k, r in enumerate(row_labels)]
    return render_rows([corner, *col_labels], rows, digits)


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
