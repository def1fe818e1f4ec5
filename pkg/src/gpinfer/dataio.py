"""CSV ingestion and plot-ready output files.

Input files are comma-separated with an optional header row, which is
auto-detected: if any selected cell in the first row fails to parse as a
number, the row is treated as a header.  Numeric columns are read as
64-bit floats; boolean responses additionally accept true/false.  Output
files serialize floats with 17 significant digits so a write/read round
trip is exact to within one ulp.
"""

import csv

import numpy as np

from .errors import DataError

_BOOL = {"true": 1.0, "false": 0.0, "True": 1.0, "False": 0.0,
         "TRUE": 1.0, "FALSE": 0.0}


def _parse_cell(cell, row_no, col_name):
    cell = cell.strip()
    if cell in _BOOL:
        return _BOOL[cell]
    try:
        return float(cell)
    except ValueError:
        raise DataError(
            f"non-numeric cell {cell!r} at row {row_no}, column {col_name!r}") from None


def _looks_numeric(cell):
    cell = cell.strip()
    if cell in _BOOL:
        return True
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_table(path):
    """Read a CSV file into (header or None, list of rows of strings)."""
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: file is empty")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
    header = None
    if not all(_looks_numeric(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows after the header")
    return header, rows


def _resolve_column(spec, header, width, what):
    spec = str(spec).strip()
    if header is not None and spec in header:
        return header.index(spec), spec
    try:
        idx = int(spec)
    except ValueError:
        named = f" (columns: {', '.join(header)})" if header else ""
        raise DataError(f"no column named {spec!r} for {what}{named}") from None
    if not (0 <= idx < width):
        raise DataError(f"{what} column index {idx} out of range (width {width})")
    return idx, header[idx] if header else str(idx)


def load_csv(path, x_cols=None, y_col=None):
    """Load training data from a CSV file.

    `x_cols` is a comma-separated list of column names (header files) or
    0-based indices; `y_col` a single column.  Defaults: every column but
    the last as inputs, the last as the response.  Returns (X, y) with X
    of shape (d, n), one observation per column.
    """
    header, rows = read_table(path)
    width = len(rows[0])
    offset = 2 if header is not None else 1  # 1-based file row of first data row

    if x_cols is None and y_col is None:
        if width < 2:
            raise DataError(f"{path}: need at least two columns, got {width}")
        xs = list(range(width - 1))
        x_names = [header[i] if header else str(i) for i in xs]
        yi, y_name = width - 1, (header[-1] if header else str(width - 1))
    else:
        if x_cols is None or y_col is None:
            raise DataError("provide both x columns and the y column, or neither")
        specs = [s for s in str(x_cols).split(",") if s.strip()]
        resolved = [_resolve_column(s, header, width, "input") for s in specs]
        xs = [i for i, _ in resolved]
        x_names = [n for _, n in resolved]
        yi, y_name = _resolve_column(y_col, header, width, "response")

    n = len(rows)
    X = np.empty((len(xs), n))
    y = np.empty(n)
    for r, row in enumerate(rows):
        for d, ci in enumerate(xs):
            X[d, r] = _parse_cell(row[ci], r + offset, x_names[d])
        y[r] = _parse_cell(row[yi], r + offset, y_name)
    return X, y


def load_matrix(path):
    """Read a whole numeric CSV (no column selection) as (d, n) inputs."""
    header, rows = read_table(path)
    offset = 2 if header is not None else 1
    names = header or [str(i) for i in range(len(rows[0]))]
    out = np.empty((len(rows), len(rows[0])))
    for r, row in enumerate(rows):
        for c, cell in enumerate(row):
            out[r, c] = _parse_cell(cell, r + offset, names[c])
    return out.T


def format_float(v):
    """17-significant-digit decimal serialization (round-trip exact)."""
    return format(float(v), ".17g")


def write_csv(path, columns, names):
    """Write named columns of floats."""
    columns = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in range(columns[0].size):
            w.writerow([format_float(c[r]) for c in columns])


#: central 95% band half-width in standard deviations
Z95 = 1.95996


def write_predictions(path, Xs, mean, var):
    """Ribbon-ready prediction table: inputs, mean, variance, 95% band."""
    sd = np.sqrt(np.maximum(var, 0.0))
    cols = [Xs[d] for d in range(Xs.shape[0])]
    names = [f"x{d + 1}" for d in range(Xs.shape[0])]
    cols += [mean, var, mean - Z95 * sd, mean + Z95 * sd]
    names += ["mean", "variance", "lower95", "upper95"]
    write_csv(path, cols, names)


def write_key_values(path, pairs):
    with open(path, "w") as fh:
        for key, value in pairs:
            if isinstance(value, float):
                value = format_float(value)
            fh.write(f"{key} = {value}\n")
