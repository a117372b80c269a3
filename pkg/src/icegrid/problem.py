"""Shared MILP container: a sparse matrix with two-sided rows, column bounds,
integrality flags, and a symbolic column index.

Rows encode row_lower <= A x <= row_upper (equalities have equal sides);
columns encode col_lower <= x <= col_upper with +-inf where unbounded. The
objective is minimised, plus a constant offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Hashable, Iterator

import numpy as np
import scipy.sparse as sp

__all__ = ["VariableIndex", "MilpProblem"]


class VariableIndex:
    """Maps symbolic (block name, key) pairs to flat column positions.

    Blocks are registered in column order; every column belongs to exactly
    one block. Keys are arbitrary hashables (tuples of scenario, step, and
    component ids in practice).
    """

    def __init__(self) -> None:
        self._blocks: dict[str, tuple[int, int]] = {}
        self._cols: dict[str, dict[Hashable, int]] = {}
        self._names: list[tuple[str, Hashable]] = []

    @property
    def n_cols(self) -> int:
        return len(self._names)

    def add_block(self, name: str, keys: list[Hashable]) -> tuple[int, int]:
        """Register a block of consecutive columns, one per key."""
        if name in self._blocks:
            raise ValueError(f"block {name!r} already registered")
        start = len(self._names)
        table: dict[Hashable, int] = {}
        for key in keys:
            if key in table:
                raise ValueError(f"duplicate key {key!r} in block {name!r}")
            table[key] = len(self._names)
            self._names.append((name, key))
        self._blocks[name] = (start, len(self._names))
        self._cols[name] = table
        return self._blocks[name]

    def block(self, name: str) -> tuple[int, int]:
        return self._blocks[name]

    def has_block(self, name: str) -> bool:
        return name in self._blocks

    def col(self, name: str, key: Hashable) -> int:
        return self._cols[name][key]

    def block_items(self, name: str) -> Iterator[tuple[Hashable, int]]:
        return iter(self._cols[name].items())

    def describe(self, col: int) -> str:
        name, key = self._names[col]
        if isinstance(key, tuple):
            inner = ",".join(str(k) for k in key)
            return f"{name}[{inner}]"
        return f"{name}[{key}]"


@dataclass
class MilpProblem:
    """min c @ x + offset  s.t.  row_lower <= A x <= row_upper,
    col_lower <= x <= col_upper, x[integer] integral."""

    c: np.ndarray
    a_matrix: sp.csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    col_lower: np.ndarray
    col_upper: np.ndarray
    integer: np.ndarray
    offset: float = 0.0
    index: VariableIndex | None = None
    row_tags: list[Any] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.row_lower = np.asarray(self.row_lower, dtype=float)
        self.row_upper = np.asarray(self.row_upper, dtype=float)
        self.col_lower = np.asarray(self.col_lower, dtype=float)
        self.col_upper = np.asarray(self.col_upper, dtype=float)
        self.integer = np.asarray(self.integer, dtype=bool)
        if not sp.issparse(self.a_matrix):
            self.a_matrix = sp.csr_matrix(np.atleast_2d(np.asarray(self.a_matrix, dtype=float)))
        self.a_matrix = self.a_matrix.tocsr()
        m, n = self.a_matrix.shape
        if self.c.shape != (n,) or self.col_lower.shape != (n,) or \
                self.col_upper.shape != (n,) or self.integer.shape != (n,):
            raise ValueError("column arrays disagree with the matrix width")
        if self.row_lower.shape != (m,) or self.row_upper.shape != (m,):
            raise ValueError("row arrays disagree with the matrix height")

    @property
    def n_cols(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def n_rows(self) -> int:
        return self.a_matrix.shape[0]

    def with_col_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "MilpProblem":
        """Copy sharing the matrix but with replaced column bounds."""
        return replace(self, col_lower=lower.copy(), col_upper=upper.copy())
