"""Contingency tables: cell indexing, margins and CSV input.

Cells are stored in lexicographic order with the last variable varying
fastest, so the baseline cell ``(0, ..., 0)`` is always cell 0.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ParseError

__all__ = [
    "Table",
    "lexicographic_index",
    "cell_from_index",
    "marginal_count",
    "load_table",
    "uniform_table",
]


def lexicographic_index(cell: Sequence[int], levels: Sequence[int]) -> int:
    """Position of ``cell`` in the flat table (last variable fastest)."""
    if len(cell) != len(levels):
        raise DomainError(f"cell has {len(cell)} coordinates, expected {len(levels)}")
    index = 0
    for coord, arity in zip(cell, levels):
        if not 0 <= coord < arity:
            raise DomainError(f"coordinate {coord} out of range [0, {arity})")
        index = index * arity + int(coord)
    return index


def cell_from_index(index: int, levels: Sequence[int]) -> tuple[int, ...]:
    total = int(np.prod(levels))
    if not 0 <= index < total:
        raise DomainError(f"cell index {index} out of range [0, {total})")
    return tuple(int(c) for c in np.unravel_index(index, tuple(levels)))


@dataclass(frozen=True)
class Table:
    """Immutable multi-way table of counts.

    ``counts`` is a flat vector of length ``prod(levels)``. Integer tables
    hold observed data; real-valued tables are used as fictive prior tables.
    """

    levels: tuple[int, ...]
    counts: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        levels = tuple(int(k) for k in self.levels)
        if any(k < 2 for k in levels):
            raise DomainError("every variable needs at least two levels")
        names = tuple(self.names) or default_names(len(levels))
        if len(names) != len(levels):
            raise DomainError("one name per variable is required")
        if len(set(names)) != len(names):
            raise DomainError("variable names must be distinct")
        counts = np.asarray(self.counts)
        if counts.dtype.kind in "iub":
            counts = counts.astype(np.int64)
        else:
            counts = counts.astype(np.float64)
        counts = counts.reshape(-1).copy()
        if counts.size != int(np.prod(levels)):
            raise DomainError(
                f"expected {int(np.prod(levels))} cells, got {counts.size}")
        if np.any(counts < 0):
            raise DomainError("counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "counts", counts)

    @property
    def nvars(self) -> int:
        return len(self.levels)

    @property
    def ncells(self) -> int:
        return self.counts.size

    @property
    def total(self):
        return self.counts.sum()

    def array(self) -> np.ndarray:
        """Counts reshaped to one axis per variable."""
        return self.counts.reshape(self.levels)

    def margin(self, subset: Iterable[int]) -> np.ndarray:
        """Marginal table over the variable indices in ``subset`` (sorted)."""
        keep = sorted(set(subset))
        for v in keep:
            if not 0 <= v < self.nvars:
                raise DomainError(f"unknown variable index {v}")
        drop = tuple(v for v in range(self.nvars) if v not in keep)
        return self.array().sum(axis=drop)

    def var_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DomainError(f"unknown variable {name!r}") from None

    def with_counts(self, counts) -> "Table":
        return Table(self.levels, counts, self.names)


def default_names(n: int) -> tuple[str, ...]:
    if n <= 26:
        return tuple(chr(ord("a") + k) for k in range(n))
    return tuple(f"x{k}" for k in range(n))


def marginal_count(table: Table, subset: Sequence[int], margin_cell: Sequence[int]):
    """Sum of the counts of all cells agreeing with ``margin_cell`` on ``subset``.

    ``subset`` lists variable indices; ``margin_cell`` gives one level per
    entry of ``subset`` in the same order. The empty subset returns N.
    """
    subset = list(subset)
    if len(set(subset)) != len(subset):
        raise DomainError("repeated variable in subset")
    if len(margin_cell) != len(subset):
        raise DomainError("margin cell does not match subset")
    index = [slice(None)] * table.nvars
    for v, level in zip(subset, margin_cell):
        if not 0 <= v < table.nvars:
            raise DomainError(f"unknown variable index {v}")
        if not 0 <= level < table.levels[v]:
            raise DomainError(f"level {level} out of range for variable {v}")
        index[v] = level
    return table.array()[tuple(index)].sum()


def uniform_table(levels: Sequence[int], total: float, names=()) -> Table:
    """Fictive table with every cell equal to ``total / ncells``."""
    ncells = int(np.prod(levels))
    return Table(tuple(levels), np.full(ncells, total / ncells, dtype=float), names)


def _parse_header(header: list[str]):
    if not header or header[-1].strip() != "count":
        raise ParseError("header must end with a column named 'count'", row=0)
    names, fixed = [], []
    for col in header[:-1]:
        col = col.strip()
        name, _, arity = col.partition(":")
        if not name:
            raise ParseError("empty variable name in header", row=0)
        if arity:
            try:
                k = int(arity)
            except ValueError:
                raise ParseError(f"bad arity annotation {col!r}", row=0) from None
            if k < 2:
                raise ParseError(f"arity must be at least 2 in {col!r}", row=0)
            fixed.append(k)
        else:
            fixed.append(None)
        names.append(name)
    if not names:
        raise ParseError("no variable columns", row=0)
    if len(set(names)) != len(names):
        raise ParseError("duplicate variable names in header", row=0)
    return names, fixed


def load_table(stream, real: bool = False) -> Table:
    """Read a table from CSV text (a path-like, file object or string stream).

    Cells not listed get count 0. With ``real=True`` counts may be
    nonnegative reals (fictive prior tables).
    """
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, newline="") as fh:
            return load_table(fh, real=real)
    reader = csv.reader(stream)
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty input")
    names, fixed = _parse_header(rows[0])
    body = rows[1:]
    if not body:
        raise ParseError("no data rows")
    cells, values = [], []
    seen = set()
    for rownum, row in enumerate(body, start=1):
        if len(row) != len(names) + 1:
            raise ParseError(f"expected {len(names) + 1} fields, got {len(row)}", row=rownum)
        try:
            cell = tuple(int(x) for x in row[:-1])
        except ValueError:
            raise ParseError("levels must be integers", row=rownum) from None
        if any(c < 0 for c in cell):
            raise ParseError("levels must be nonnegative", row=rownum)
        raw = row[-1].strip()
        try:
            value = float(raw) if real else int(raw)
        except ValueError:
            kind = "a number" if real else "an integer"
            raise ParseError(f"count must be {kind}", row=rownum) from None
        if value < 0 or not np.isfinite(value):
            raise ParseError("count must be nonnegative", row=rownum)
        if cell in seen:
            raise ParseError(f"duplicate cell {cell}", row=rownum)
        seen.add(cell)
        cells.append(cell)
        values.append(value)
    observed = np.max(np.array(cells), axis=0) + 1
    levels = []
    for v, (k, obs) in enumerate(zip(fixed, observed)):
        if k is None:
            levels.append(max(int(obs), 2))
        elif obs > k:
            bad = next(i for i, c in enumerate(cells, start=1) if c[v] >= k)
            raise ParseError(f"level exceeds declared arity {k} of {names[v]!r}", row=bad)
        else:
            levels.append(k)
    counts = np.zeros(int(np.prod(levels)), dtype=float if real else np.int64)
    for cell, value in zip(cells, values):
        counts[lexicographic_index(cell, levels)] = value
    return Table(tuple(levels), counts, tuple(names))


def loads_table(text: str, real: bool = False) -> Table:
    return load_table(io.StringIO(text), real=real)


def dump_table(table: Table, stream, skip_zeros: bool = False) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow([f"{n}:{k}" for n, k in zip(table.names, table.levels)] + ["count"])
    for index, value in enumerate(table.counts):
        if skip_zeros and value == 0:
            continue
        writer.writerow(list(cell_from_index(index, table.levels)) + [value])
