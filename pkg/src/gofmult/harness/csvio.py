"""Numeric CSV input: comma separated, '.' decimal, optional header row."""

from __future__ import annotations

import csv

import numpy as np


class CsvParseError(ValueError):
    def __init__(self, path, row, column, message):
        super().__init__(f"{path}: row {row}, column {column}: {message}")
        self.path = path
        self.row = row
        self.column = column


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv(path):
    """Read a numeric CSV into an (n, d) float array.

    A first row that contains any non-numeric field is taken as a header.
    Rows and columns in error messages are 1-based and count the header.
    Blank lines are skipped.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not f.strip() for f in record):
                continue
            fields = [f.strip() for f in record]
            if lineno == 1 and not all(_is_number(f) for f in fields):
                width = len(fields)
                continue
            if width is None:
                width = len(fields)
            if len(fields) != width:
                raise CsvParseError(path, lineno, min(len(fields), width) + 1,
                                    f"expected {width} fields, found {len(fields)}")
            values = []
            for col, text in enumerate(fields, start=1):
                try:
                    v = float(text)
                except ValueError:
                    raise CsvParseError(path, lineno, col, f"not a number: {text!r}") from None
                if not np.isfinite(v):
                    raise CsvParseError(path, lineno, col, f"non-finite value {text!r}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise CsvParseError(path, 1, 1, "no data rows")
    return np.array(rows, dtype=float)
