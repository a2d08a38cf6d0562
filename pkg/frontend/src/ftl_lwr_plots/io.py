"""CSV ingestion with schema validation for the upstream artifact files."""

import csv
import os

import numpy as np

GRID_COLUMNS = ("n", "t", "i", "x_left", "z_i")
DENSITY_COLUMNS = ("t", "z_left", "z_right", "rho")


class InputError(ValueError):
    """A missing, empty, or schema-breaking input file."""


def read_table(path: str, columns) -> dict:
    """Load a CSV into {column: float ndarray}, insisting on the exact header.

    Every documented schema is all-numeric, so one float parse covers both
    files; integer columns (n, i) come back as float arrays.
    """
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: file is empty") from None
        if tuple(header) != tuple(columns):
            raise InputError(
                f"{path}: header {header} does not match the "
                f"documented schema {list(columns)}"
            )
        rows = list(reader)
    if not rows:
        raise InputError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric cell ({exc})") from exc
    if data.shape[1] != len(columns):
        raise InputError(f"{path}: ragged rows")
    return {name: data[:, k] for k, name in enumerate(columns)}
