"""Sparse polynomial expansion of binary feature vectors.

A binary row of length ``d`` is mapped to the vector of all monomials of
degree <= ``degree`` over its entries.  Column 0 is the empty monomial
(the bias, always 1).  Columns are ordered lexicographically by
(monomial size, sorted variable indices), so weight vectors are portable
across runs.

Two modes:

* ``multiset`` counts monomials with repeated variables (x1*x1*x2 is a
  column of its own).  On binary inputs x**2 == x, so these columns
  duplicate values of lower-degree ones; the mode exists because the
  expanded dimension then equals C(d+degree, degree).
* ``dedup`` keeps only square-free monomials; dimension is
  sum_{k<=degree} C(d, k).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

MULTISET = "multiset"
DEDUP = "dedup"
_MODES = (MULTISET, DEDUP)

# Hard cap on the expanded dimension so a typo'd degree fails loudly
# instead of allocating forever.
MAX_EXPANDED_DIM = 200_000_000


class ExpansionError(ValueError):
    """Bad dimensions, out-of-range indices, or non-canonical monomials."""


def expanded_dimension(d: int, degree: int, mode: str = MULTISET) -> int:
    """Number of monomials of degree <= degree over d binary variables.

    multiset mode: C(d+degree, degree); dedup mode: sum_{k=0..degree} C(d,k).
    """
    if d < 1 or degree < 1:
        raise ExpansionError(f"need d >= 1 and degree >= 1, got d={d}, degree={degree}")
    if mode == MULTISET:
        total = math.comb(d + degree, degree)
    elif mode == DEDUP:
        total = sum(math.comb(d, k) for k in range(degree + 1))
    else:
        raise ExpansionError(f"unknown mode {mode!r}, expected one of {_MODES}")
    if total > MAX_EXPANDED_DIM:
        raise ExpansionError(
            f"expanded dimension {total} exceeds supported maximum {MAX_EXPANDED_DIM}"
        )
    return total


def _size_counts(d: int, degree: int, mode: str) -> list[int]:
    """Monomial count per size class 0..degree."""
    if mode == MULTISET:
        # multisets of size k over d variables
        return [math.comb(d + k - 1, k) for k in range(degree + 1)]
    return [math.comb(d, k) for k in range(degree + 1)]


def _combination_rank(combo: tuple[int, ...], n: int) -> int:
    """Lexicographic rank of a strictly increasing k-tuple over 0..n-1."""
    rank = 0
    prev = -1
    k = len(combo)
    for i, c in enumerate(combo):
        for v in range(prev + 1, c):
            rank += math.comb(n - 1 - v, k - 1 - i)
        prev = c
    return rank


def _combination_unrank(rank: int, n: int, k: int) -> tuple[int, ...]:
    """Inverse of _combination_rank."""
    combo = []
    v = 0
    for i in range(k):
        while True:
            block = math.comb(n - 1 - v, k - 1 - i)
            if rank < block:
                break
            rank -= block
            v += 1
        combo.append(v)
        v += 1
    return tuple(combo)


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse vector; for binary inputs every stored value is 1."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape:
            raise ExpansionError("indices and values length mismatch")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dim):
            raise ExpansionError("indices must be strictly increasing and within [0, dim)")
        if np.any(val == 0):
            raise ExpansionError("stored values must be nonzero")
        idx.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def dot(self, dense: np.ndarray) -> float:
        return float(dense[self.indices] @ self.values)


@dataclass(frozen=True)
class MonomialIndex:
    """Bijection between expanded column indices and monomials.

    Immutable and safe to share across threads; the variable table used
    by expand() is built lazily on first use.
    """

    base_dim: int
    degree: int
    mode: str = MULTISET
    _var_table: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        expanded_dimension(self.base_dim, self.degree, self.mode)  # validates

    @property
    def total(self) -> int:
        return expanded_dimension(self.base_dim, self.degree, self.mode)

    @property
    def size_offsets(self) -> tuple[int, ...]:
        counts = _size_counts(self.base_dim, self.degree, self.mode)
        offsets = [0]
        for c in counts:
            offsets.append(offsets[-1] + c)
        return tuple(offsets)

    def monomial_of(self, index: int) -> tuple[int, ...]:
        """Variable indices (sorted, repeats allowed in multiset mode) of a column."""
        if not 0 <= index < self.total:
            raise ExpansionError(f"index {index} out of range [0, {self.total})")
        offsets = self.size_offsets
        size = 0
        while offsets[size + 1] <= index:
            size += 1
        local = index - offsets[size]
        if size == 0:
            return ()
        if self.mode == DEDUP:
            return _combination_unrank(local, self.base_dim, size)
        staircase = _combination_unrank(local, self.base_dim + size - 1, size)
        return tuple(v - i for i, v in enumerate(staircase))

    def index_of(self, monomial: tuple[int, ...]) -> int:
        """Column index of a monomial given as a sorted tuple of variables."""
        mono = tuple(monomial)
        size = len(mono)
        if size > self.degree:
            raise ExpansionError(f"monomial of size {size} exceeds degree {self.degree}")
        if any(not 0 <= v < self.base_dim for v in mono):
            raise ExpansionError(f"variable out of range in {mono}")
        if any(mono[i] > mono[i + 1] for i in range(size - 1)):
            raise ExpansionError(f"monomial {mono} is not sorted")
        offsets = self.size_offsets
        if size == 0:
            return 0
        if self.mode == DEDUP:
            if any(mono[i] == mono[i + 1] for i in range(size - 1)):
                raise ExpansionError(f"monomial {mono} is not canonical in dedup mode")
            return offsets[size] + _combination_rank(mono, self.base_dim)
        staircase = tuple(v + i for i, v in enumerate(mono))
        return offsets[size] + _combination_rank(staircase, self.base_dim + size - 1)

    def column_name(self, index: int) -> str:
        """Human-readable monomial name, e.g. 'bias' or 'x3*x7*x40'."""
        mono = self.monomial_of(index)
        if not mono:
            return "bias"
        return "*".join(f"x{v}" for v in mono)

    def _variable_table(self) -> list[np.ndarray]:
        """Per size class k, an array (count_k, k) of variable indices, in column order."""
        key = "vars"
        if key not in self._var_table:
            tables = []
            for k in range(self.degree + 1):
                if self.mode == DEDUP:
                    combos = itertools.combinations(range(self.base_dim), k)
                else:
                    combos = itertools.combinations_with_replacement(range(self.base_dim), k)
                tables.append(np.fromiter(
                    itertools.chain.from_iterable(combos), dtype=np.int32,
                ).reshape(-1, k) if k else np.empty((1, 0), dtype=np.int32))
            self._var_table[key] = tables
        return self._var_table[key]

    def expand(self, row: np.ndarray) -> SparseVector:
        """Expanded sparse vector of one binary row; bias column is always set."""
        row = np.asarray(row)
        if row.ndim != 1 or row.shape[0] != self.base_dim:
            raise ExpansionError(
                f"row has dimension {row.shape}, expected ({self.base_dim},)"
            )
        if not np.isin(row, (0, 1)).all():
            raise ExpansionError("row entries must be 0 or 1")
        indices = self._expand_many(row.reshape(1, -1))[0]
        return SparseVector(indices=indices, values=np.ones(len(indices)), dim=self.total)

    def expand_rows(self, matrix: np.ndarray, chunk: int = 256):
        """Yield one SparseVector per row, without materializing a dense expansion."""
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[1] != self.base_dim:
            raise ExpansionError(
                f"matrix has shape {matrix.shape}, expected (n, {self.base_dim})"
            )
        total = self.total
        for start in range(0, matrix.shape[0], chunk):
            for indices in self._expand_many(matrix[start:start + chunk]):
                yield SparseVector(indices=indices, values=np.ones(len(indices)), dim=total)

    def _expand_many(self, rows: np.ndarray) -> list[np.ndarray]:
        """Nonzero expanded column indices for each row of a 0/1 block."""
        rows = rows.astype(bool)
        offsets = self.size_offsets
        tables = self._variable_table()
        per_row: list[list[np.ndarray]] = [[] for _ in range(rows.shape[0])]
        for k in range(self.degree + 1):
            if k == 0:
                active = np.ones((rows.shape[0], 1), dtype=bool)
            else:
                active = rows[:, tables[k]].all(axis=2)
            base = offsets[k]
            for r in range(rows.shape[0]):
                per_row[r].append(np.flatnonzero(active[r]).astype(np.int64) + base)
        return [np.concatenate(parts) for parts in per_row]


def weight_column_names(index: MonomialIndex) -> list[str]:
    """Names for every expanded column, in column order."""
    names = ["bias"]
    tables = index._variable_table()
    for k in range(1, index.degree + 1):
        for mono in tables[k]:
            names.append("*".join(f"x{v}" for v in mono))
    return names
