"""Tabular numeric data: strict CSV loading and index-based resample views.

The CSV dialect is deliberately narrow so parsing is deterministic:
comma-separated, first row is the header, cells are plain decimal numbers
('.' separator, optional exponent), no quoting, no missing values.
Anything else is an error.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")


class CsvError(Exception):
    """A file violates the strict CSV dialect (bad header, bad cell, ragged row)."""


class UnknownColumn(LookupError):
    """A requested column name does not exist in the dataset."""

    def __init__(self, name, available):
        self.name = name
        self.available = tuple(available)
        super().__init__(
            f"unknown column {name!r}; available columns: {', '.join(self.available)}"
        )


@dataclass(frozen=True)
class Dataset:
    """Immutable table of named numeric columns, all of length ``n_rows``.

    Column vectors are float64 arrays marked read-only, so a Dataset can be
    shared freely between workers. Every cell is finite; NaN and infinities
    are rejected at load time.
    """

    columns: dict[str, np.ndarray]
    n_rows: int

    @classmethod
    def from_columns(cls, columns) -> "Dataset":
        clean: dict[str, np.ndarray] = {}
        n_rows = None
        for name, values in columns.items():
            if not isinstance(name, str) or not name:
                raise ValueError("column names must be non-empty strings")
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"column {name!r} is not a 1-d vector")
            if n_rows is None:
                n_rows = arr.shape[0]
            elif arr.shape[0] != n_rows:
                raise ValueError(
                    f"column {name!r} has length {arr.shape[0]}, expected {n_rows}"
                )
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise ValueError(f"column {name!r} has a non-finite value at row {bad + 1}")
            arr = arr.copy()
            arr.flags.writeable = False
            clean[name] = arr
        if not clean or n_rows == 0:
            raise ValueError("dataset must have at least one column and one row")
        return cls(columns=clean, n_rows=int(n_rows))

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def column(self, name: str) -> np.ndarray:
        """Return the stored vector for ``name`` unmodified."""
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownColumn(name, self.columns) from None

    def column_means(self, names) -> np.ndarray:
        """Arithmetic mean of each named column, in the given order."""
        return np.array([float(self.column(n).mean()) for n in names], dtype=np.float64)


@dataclass(frozen=True)
class IndexView:
    """A resample of a Dataset expressed as row indices, without copying rows.

    A view always has exactly ``base.n_rows`` indices: resamples keep the
    original sample size. Reading a column gathers the indexed rows.
    """

    base: Dataset
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 1 or idx.shape[0] != self.base.n_rows:
            raise ValueError(
                f"index view needs exactly {self.base.n_rows} indices, got {idx.shape}"
            )
        if idx.size and (idx.min() < 0 or idx.max() >= self.base.n_rows):
            raise ValueError("index out of range for base dataset")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    @property
    def n_rows(self) -> int:
        return self.base.n_rows

    @property
    def column_names(self) -> tuple[str, ...]:
        return self.base.column_names

    def column(self, name: str) -> np.ndarray:
        return self.base.column(name)[self.indices]

    def column_means(self, names) -> np.ndarray:
        return np.array([float(self.column(n).mean()) for n in names], dtype=np.float64)


def identity_view(ds: Dataset) -> IndexView:
    """View with indices 0..n-1; reproduces the base dataset column-for-column."""
    return IndexView(ds, np.arange(ds.n_rows, dtype=np.intp))


def _parse_cell(token: str, row: int, name: str) -> float:
    token = token.strip()
    if not token:
        raise CsvError(f"empty cell at row {row}, column {name!r}")
    if not _NUMBER_RE.match(token):
        raise CsvError(f"cell {token!r} at row {row}, column {name!r} is not a plain number")
    value = float(token)
    if not math.isfinite(value):
        raise CsvError(f"cell {token!r} at row {row}, column {name!r} is not finite")
    return value


def loads_csv(text: str) -> Dataset:
    """Parse CSV text into a Dataset. See module docstring for the dialect."""
    lines = text.split("\n")
    while lines and lines[-1].strip() == "":
        lines.pop()
    if not lines:
        raise CsvError("empty input: no header row")
    header = [h.strip() for h in lines[0].split(",")]
    if any(not h for h in header):
        raise CsvError("header has an empty column name")
    seen = set()
    for h in header:
        if h in seen:
            raise CsvError(f"duplicate column name {h!r} in header")
        seen.add(h)
    if len(lines) == 1:
        raise CsvError("no data rows")
    data = [[] for _ in header]
    for row_number, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvError(
                f"row {row_number} has {len(cells)} cells, expected {len(header)}"
            )
        for j, cell in enumerate(cells):
            data[j].append(_parse_cell(cell, row_number, header[j]))
    return Dataset.from_columns({h: col for h, col in zip(header, data)})


def load_csv(path) -> Dataset:
    """Load a Dataset from a CSV file at ``path``."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return loads_csv(text)


def format_number(value: float) -> str:
    """Shortest decimal form that round-trips to the same float."""
    value = float(value)
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def dumps_csv(ds) -> str:
    """Serialize a Dataset (or IndexView) to CSV text that ``loads_csv`` re-reads exactly."""
    names = ds.column_names
    for name in names:
        if "," in name or "\n" in name:
            raise ValueError(f"column name {name!r} cannot be written to CSV")
    cols = [ds.column(n) for n in names]
    lines = [",".join(names)]
    for i in range(ds.n_rows):
        lines.append(",".join(format_number(col[i]) for col in cols))
    return "\n".join(lines) + "\n"


def write_csv(ds, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_csv(ds))
