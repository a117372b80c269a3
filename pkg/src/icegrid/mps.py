"""MPS writer/reader for solver interoperability.

Fixed-format layout with synthetic 8-character names (C0000001, R0000001),
INTORG/INTEND markers around integer columns, RANGES for two-sided rows, and
the objective constant carried on the RHS of the objective row (negated, per
MPS convention). Values are written with repr, so every double survives a
round trip bit-for-bit.

Each column appears in COLUMNS with an explicit objective entry (even when
zero) and gets explicit BOUNDS lines, which pins column order and spares the
reader from MPS bound defaults.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .problem import MilpProblem

__all__ = ["export_mps", "parse_mps", "read_column_values", "col_name", "row_name"]

_OBJ = "COST"


def col_name(j: int) -> str:
    return f"C{j + 1:07d}"


def row_name(i: int) -> str:
    return f"R{i + 1:07d}"


def _field(name: str, width: int = 10) -> str:
    return name.ljust(width)


def _encode_range(lo: float, hi: float) -> tuple[str, float]:
    """Pick the RANGES encoding whose reconstruction is bit-exact.

    A G row stores lo and recovers hi = lo + span; an L row stores hi and
    recovers lo = hi - span. One addition may round, so probe the neighbour
    doubles of hi - lo for a span that lands exactly.
    """
    d = hi - lo
    candidates = (d, np.nextafter(d, -np.inf), np.nextafter(d, np.inf))
    for s in candidates:
        if lo + s == hi:
            return "G", float(s)
    for s in candidates:
        if hi - s == lo:
            return "L", float(s)
    return "G", float(d)


def _entry(indent: str, name: str, pairs: list[tuple[str, float]]) -> str:
    parts = [indent + _field(name)]
    for ref, val in pairs:
        parts.append(_field(ref) + repr(float(val)).ljust(15))
    return "  ".join(parts).rstrip()


def export_mps(problem: MilpProblem, destination: str | Path | None = None) -> str:
    """Serialize and, when a destination is given, write it."""
    m, n = problem.n_rows, problem.n_cols
    lines = [f"NAME          {problem.meta.get('name', 'ICEGRID')}"]

    lines.append("ROWS")
    lines.append(f" N  {_OBJ}")
    row_kind: list[str] = []
    row_span: dict[int, float] = {}
    for i in range(m):
        lo, hi = problem.row_lower[i], problem.row_upper[i]
        if lo == hi:
            kind = "E"
        elif np.isfinite(hi) and np.isfinite(lo):
            kind, row_span[i] = _encode_range(lo, hi)
        elif np.isfinite(hi):
            kind = "L"
        elif np.isfinite(lo):
            kind = "G"
        else:
            kind = "N"
        row_kind.append(kind)
        lines.append(f" {kind}  {row_name(i)}")

    lines.append("COLUMNS")
    a_csc = problem.a_matrix.tocsc()
    in_int = False
    marker = 0
    for j in range(n):
        if bool(problem.integer[j]) != in_int:
            tag = "INTORG" if not in_int else "INTEND"
            lines.append(f"    M{marker:07d}   'MARKER'                 '{tag}'")
            marker += 1
            in_int = not in_int
        pairs = [(_OBJ, problem.c[j])]
        start, stop = a_csc.indptr[j], a_csc.indptr[j + 1]
        for pos in range(start, stop):
            pairs.append((row_name(a_csc.indices[pos]), a_csc.data[pos]))
        for k in range(0, len(pairs), 2):
            lines.append(_entry("    ", col_name(j), pairs[k:k + 2]))
    if in_int:
        lines.append(f"    M{marker:07d}   'MARKER'                 'INTEND'")

    lines.append("RHS")
    rhs_pairs: list[tuple[str, float]] = []
    if problem.offset != 0.0:
        rhs_pairs.append((_OBJ, -problem.offset))
    for i in range(m):
        kind = row_kind[i]
        if kind == "E" or kind == "G":
            val = problem.row_lower[i]
        elif kind == "L":
            val = problem.row_upper[i]
        else:
            continue
        if val != 0.0:
            rhs_pairs.append((row_name(i), val))
    for pair in rhs_pairs:
        lines.append(_entry("    ", "RHS1", [pair]))

    if row_span:
        lines.append("RANGES")
        for i, span in row_span.items():
            lines.append(_entry("    ", "RNG1", [(row_name(i), span)]))

    lines.append("BOUNDS")
    for j in range(n):
        lo, hi = problem.col_lower[j], problem.col_upper[j]
        name = col_name(j)
        if lo == hi:
            lines.append(_entry(" FX ", "BND1", [(name, lo)]))
            continue
        if np.isfinite(lo):
            lines.append(_entry(" LO ", "BND1", [(name, lo)]))
        else:
            lines.append(f" MI {_field('BND1')}  {name}")
        if np.isfinite(hi):
            lines.append(_entry(" UP ", "BND1", [(name, hi)]))
        else:
            lines.append(f" PL {_field('BND1')}  {name}")
    lines.append("ENDATA")
    text = "\n".join(lines) + "\n"

    if destination is not None:
        Path(destination).write_text(text)
    return text


def parse_mps(source: str | Path) -> MilpProblem:
    """Read MPS text (or a path to it) back into a problem."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and source.endswith(".mps")):
        text = Path(source).read_text()
    else:
        text = str(source)

    section = None
    name = "PARSED"
    row_kind: dict[str, str] = {}
    row_order: list[str] = []
    obj_row: str | None = None
    col_order: list[str] = []
    col_pos: dict[str, int] = {}
    integer_cols: set[str] = set()
    in_int = False
    c_entries: dict[str, float] = {}
    coo: list[tuple[str, str, float]] = []
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    bound_lines: list[tuple[str, str, float]] = []

    for raw in text.splitlines():
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        if raw[0] not in " \t":
            tokens = raw.split()
            section = tokens[0]
            if section == "NAME" and len(tokens) > 1:
                name = tokens[1]
            if section == "ENDATA":
                break
            continue
        tokens = raw.split()
        if section == "ROWS":
            kind, rname = tokens[0], tokens[1]
            if kind == "N" and obj_row is None:
                obj_row = rname
                continue
            row_kind[rname] = kind
            row_order.append(rname)
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                in_int = tokens[2] == "'INTORG'"
                continue
            cname = tokens[0]
            if cname not in col_pos:
                col_pos[cname] = len(col_order)
                col_order.append(cname)
                if in_int:
                    integer_cols.add(cname)
            for k in range(1, len(tokens) - 1, 2):
                rname, val = tokens[k], float(tokens[k + 1])
                if rname == obj_row:
                    c_entries[cname] = c_entries.get(cname, 0.0) + val
                else:
                    coo.append((rname, cname, val))
        elif section == "RHS":
            for k in range(1, len(tokens) - 1, 2):
                rhs[tokens[k]] = float(tokens[k + 1])
        elif section == "RANGES":
            for k in range(1, len(tokens) - 1, 2):
                ranges[tokens[k]] = float(tokens[k + 1])
        elif section == "BOUNDS":
            kind, cname = tokens[0], tokens[2]
            val = float(tokens[3]) if len(tokens) > 3 else 0.0
            bound_lines.append((kind, cname, val))

    n = len(col_order)
    m = len(row_order)
    row_pos = {rname: i for i, rname in enumerate(row_order)}
    c = np.zeros(n)
    for cname, val in c_entries.items():
        c[col_pos[cname]] = val
    data, ii, jj = [], [], []
    for rname, cname, val in coo:
        ii.append(row_pos[rname])
        jj.append(col_pos[cname])
        data.append(val)
    a = sp.coo_matrix((data, (ii, jj)), shape=(m, n)).tocsr()

    row_lower = np.full(m, -np.inf)
    row_upper = np.full(m, np.inf)
    for rname in row_order:
        i = row_pos[rname]
        kind = row_kind[rname]
        b = rhs.get(rname, 0.0)
        if kind == "E":
            row_lower[i] = row_upper[i] = b
        elif kind == "L":
            row_upper[i] = b
        elif kind == "G":
            row_lower[i] = b
        if rname in ranges:
            r = ranges[rname]
            if kind == "L":
                row_lower[i] = row_upper[i] - abs(r)
            elif kind == "G":
                row_upper[i] = row_lower[i] + abs(r)
            elif kind == "E":
                if r >= 0:
                    row_upper[i] = b + r
                else:
                    row_lower[i] = b + r

    col_lower = np.zeros(n)
    col_upper = np.full(n, np.inf)
    integer = np.zeros(n, dtype=bool)
    for cname in integer_cols:
        integer[col_pos[cname]] = True
    for kind, cname, val in bound_lines:
        j = col_pos[cname]
        if kind == "UP":
            col_upper[j] = val
        elif kind == "LO":
            col_lower[j] = val
        elif kind == "FX":
            col_lower[j] = col_upper[j] = val
        elif kind == "MI":
            col_lower[j] = -np.inf
        elif kind == "PL":
            col_upper[j] = np.inf
        elif kind == "BV":
            col_lower[j], col_upper[j] = 0.0, 1.0
            integer[j] = True

    return MilpProblem(
        c=c,
        a_matrix=a,
        row_lower=row_lower,
        row_upper=row_upper,
        col_lower=col_lower,
        col_upper=col_upper,
        integer=integer,
        offset=-rhs.get(obj_row, 0.0) if obj_row else 0.0,
        meta={"name": name, "col_names": col_order, "row_names": row_order},
    )


def read_column_values(source: str | Path, problem: MilpProblem) -> np.ndarray:
    """Load a plain-text `column value` solution file produced by an external
    solver against an exported model; unlisted columns default to zero."""
    text = Path(source).read_text() if isinstance(source, Path) or \
        (isinstance(source, str) and "\n" not in source) else str(source)
    x = np.zeros(problem.n_cols)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("*", "#")):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"line {line_no}: expected 'column value', got {raw!r}")
        name, val = parts[0], parts[1]
        if not name.startswith("C"):
            continue  # objective rows or status lines from verbose backends
        try:
            j = int(name[1:]) - 1
        except ValueError as exc:
            raise ValueError(f"line {line_no}: unrecognized column {name!r}") from exc
        if not 0 <= j < problem.n_cols:
            raise ValueError(f"line {line_no}: column {name!r} out of range")
        x[j] = float(val)
    return x
