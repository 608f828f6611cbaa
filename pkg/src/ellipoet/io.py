"""Reading observation files and writing matrices as delimited text."""

import csv

import numpy as np


class DataFormatError(ValueError):
    pass


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_data(path):
    """Load an ``(n, p)`` observation matrix.

    The delimiter (comma, tab or semicolon) is sniffed from the first
    lines; files without any of them are split on runs of whitespace. A first line containing a non-numeric field is treated as
    a header. Lines starting with ``#`` are ignored.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataFormatError(f"{path}: no data")
    sample = "\n".join(lines[:20])
    if not any(c in sample for c in ",;\t"):
        rows = [ln.split() for ln in lines]
    else:
        try:
            delimiter = csv.Sniffer().sniff(sample, delimiters=",\t;").delimiter
        except csv.Error:
            delimiter = ","
        rows = list(csv.reader(lines, delimiter=delimiter, skipinitialspace=True))
    if rows and not all(_is_number(tok) for tok in rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: header only")
    width = len(rows[0])
    for k, row in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(f"{path}: row {k + 1} has {len(row)} fields, expected {width}")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(data)):
        raise DataFormatError(f"{path}: non-finite values")
    return data


def write_matrix(path, M):
    """Write ``M`` comma-separated under a ``# rows=.. cols=..`` comment."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# rows={M.shape[0]} cols={M.shape[1]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        for row in M:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix(path):
    return read_data(path)
