"""Free-format MPS export and import.

Rows with two finite sides are written as ``G`` rows with a RANGES entry;
binary columns sit between INTORG/INTEND markers with bounds [0, 1].  Numbers
use ``repr`` so a write/read cycle reproduces the data exactly, except the upper
side of a ranged row, which comes back as ``lo + (hi - lo)`` (one rounding).
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .lp import BoundedLp

INF = np.inf


class MpsError(ValueError):
    pass


@dataclass
class MpsProblem:
    name: str
    lp: BoundedLp
    row_names: list[str]
    col_names: list[str]
    integer: np.ndarray
    objective_offset: float = 0.0


def _num(v: float) -> str:
    return repr(float(v))


def write_mps(out: TextIO, lp: BoundedLp, row_names: list[str], col_names: list[str],
              integer: np.ndarray | None = None, name: str = "MODEL") -> None:
    m, n = lp.shape
    if len(row_names) != m or len(col_names) != n:
        raise MpsError("name lists do not match the matrix shape")
    for nm in list(row_names) + list(col_names):
        if not nm or any(ch.isspace() for ch in nm):
            raise MpsError(f"name {nm!r} is empty or contains whitespace")
    if len(set(row_names)) != m or len(set(col_names)) != n:
        raise MpsError("duplicate row or column names")
    integer = np.zeros(n, dtype=bool) if integer is None else np.asarray(integer, dtype=bool)
    w = out.write
    w(f"NAME {name}\nROWS\n N obj\n")
    kinds = []
    for i in range(m):
        lo, hi = lp.row_lo[i], lp.row_hi[i]
        if lo == hi:
            k = "E"
        elif np.isinf(lo) and np.isinf(hi):
            k = "N"
        elif np.isinf(lo):
            k = "L"
        else:
            k = "G"
        if k == "N":
            raise MpsError(f"row {row_names[i]} is free on both sides")
        kinds.append(k)
        w(f" {k} {row_names[i]}\n")
    w("COLUMNS\n")
    A = sp.csc_matrix(lp.A)
    in_int = False
    for j in range(n):
        if integer[j] and not in_int:
            w(" MARKER 'MARKER' 'INTORG'\n")
            in_int = True
        elif not integer[j] and in_int:
            w(" MARKER 'MARKER' 'INTEND'\n")
            in_int = False
        cn = col_names[j]
        if lp.c[j] != 0:
            w(f" {cn} obj {_num(lp.c[j])}\n")
        for p in range(A.indptr[j], A.indptr[j + 1]):
            w(f" {cn} {row_names[A.indices[p]]} {_num(A.data[p])}\n")
        if lp.c[j] == 0 and A.indptr[j] == A.indptr[j + 1]:
            w(f" {cn} obj 0.0\n")
    if in_int:
        w(" MARKER 'MARKER' 'INTEND'\n")
    w("RHS\n")
    for i in range(m):
        k = kinds[i]
        rhs = lp.row_hi[i] if k == "L" else lp.row_lo[i]
        if rhs != 0:
            w(f" rhs {row_names[i]} {_num(rhs)}\n")
    ranges = [(i, lp.row_hi[i] - lp.row_lo[i]) for i in range(m)
              if kinds[i] == "G" and np.isfinite(lp.row_hi[i])]
    if ranges:
        w("RANGES\n")
        for i, r in ranges:
            w(f" rng {row_names[i]} {_num(r)}\n")
    w("BOUNDS\n")
    for j in range(n):
        lo, hi, cn = lp.col_lo[j], lp.col_hi[j], col_names[j]
        if lo == hi:
            w(f" FX bnd {cn} {_num(lo)}\n")
            continue
        if np.isinf(lo) and np.isinf(hi):
            w(f" FR bnd {cn}\n")
            continue
        if np.isinf(lo):
            w(f" MI bnd {cn}\n")
        elif lo != 0 or integer[j]:
            w(f" LO bnd {cn} {_num(lo)}\n")
        if np.isfinite(hi):
            w(f" UP bnd {cn} {_num(hi)}\n")
        elif integer[j]:
            w(f" PL bnd {cn}\n")
    w("ENDATA\n")


def write_model_mps(model, path, name: str = "DSOMARKET") -> Path:
    """Export an assembled model with its ``kind_owner_t[_w]`` columns and tagged rows."""
    path = Path(path)
    with path.open("w") as fh:
        write_mps(fh, model.to_lp(), [t.name for t in model.tags], model.col_names,
                  model.is_binary, name)
    return path


def read_mps(src: TextIO | str) -> MpsProblem:
    """Parse free-format MPS (single N row, optional RANGES and BOUNDS)."""
    if isinstance(src, str):
        src = io.StringIO(src)
    name = ""
    section = None
    obj_row = None
    row_kind: dict[str, str] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_index: dict[str, int] = {}
    entries: list[tuple[str, int, float]] = []
    cost: dict[int, float] = {}
    rhs: dict[str, float] = {}
    rng: dict[str, float] = {}
    bounds: list[tuple[str, str, float | None]] = []
    integer: list[bool] = []
    in_int = False
    offset = 0.0
    for lineno, raw in enumerate(src, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        tok = line.split()
        if not line[0].isspace():
            section = tok[0].upper()
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else ""
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                raise MpsError(f"line {lineno}: unknown section {tok[0]}")
            continue
        try:
            if section == "ROWS":
                k, rn = tok[0].upper(), tok[1]
                if k == "N":
                    if obj_row is None:
                        obj_row = rn
                    continue
                if k not in ("E", "L", "G"):
                    raise MpsError(f"line {lineno}: bad row type {tok[0]}")
                if rn in row_kind:
                    raise MpsError(f"line {lineno}: duplicate row {rn}")
                row_kind[rn] = k
                row_order.append(rn)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                cn = tok[0]
                if cn not in col_index:
                    col_index[cn] = len(col_order)
                    col_order.append(cn)
                    integer.append(in_int)
                j = col_index[cn]
                for rn, val in zip(tok[1::2], tok[2::2]):
                    v = float(val)
                    if rn == obj_row:
                        cost[j] = cost.get(j, 0.0) + v
                    elif rn in row_kind:
                        entries.append((rn, j, v))
                    else:
                        raise MpsError(f"line {lineno}: unknown row {rn}")
            elif section in ("RHS", "RANGES"):
                target = rhs if section == "RHS" else rng
                for rn, val in zip(tok[1::2], tok[2::2]):
                    if rn == obj_row and section == "RHS":
                        offset = -float(val)
                    elif rn in row_kind:
                        target[rn] = float(val)
                    else:
                        raise MpsError(f"line {lineno}: unknown row {rn}")
            elif section == "BOUNDS":
                kind, cn = tok[0].upper(), tok[2]
                if cn not in col_index:
                    raise MpsError(f"line {lineno}: unknown column {cn}")
                bounds.append((kind, cn, float(tok[3]) if len(tok) > 3 else None))
            else:
                raise MpsError(f"line {lineno}: data outside a section")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, MpsError):
                raise
            raise MpsError(f"line {lineno}: cannot parse {line.strip()!r}") from None
    m, n = len(row_order), len(col_order)
    rpos = {rn: i for i, rn in enumerate(row_order)}
    A = sp.csr_matrix((np.array([v for _, _, v in entries], dtype=float),
                       (np.array([rpos[r] for r, _, _ in entries], dtype=np.int64),
                        np.array([j for _, j, _ in entries], dtype=np.int64))), shape=(m, n))
    row_lo = np.empty(m)
    row_hi = np.empty(m)
    for i, rn in enumerate(row_order):
        b = rhs.get(rn, 0.0)
        k = row_kind[rn]
        r = rng.get(rn)
        if k == "E":
            row_lo[i] = row_hi[i] = b
            if r is not None:
                if r >= 0:
                    row_hi[i] = b + r
                else:
                    row_lo[i] = b + r
        elif k == "L":
            row_lo[i], row_hi[i] = (-INF if r is None else b - abs(r)), b
        else:
            row_lo[i], row_hi[i] = b, (INF if r is None else b + abs(r))
    integ = np.array(integer, dtype=bool)
    col_lo = np.zeros(n)
    col_hi = np.where(integ, 1.0, INF)  # MPS convention: integer columns default to [0, 1]
    for kind, cn, v in bounds:
        j = col_index[cn]
        if kind == "UP":
            col_hi[j] = v
            if v < 0 and col_lo[j] == 0:
                col_lo[j] = -INF
        elif kind == "LO":
            col_lo[j] = v
            if integ[j] and col_hi[j] == 1.0:
                col_hi[j] = INF
        elif kind == "FX":
            col_lo[j] = col_hi[j] = v
        elif kind == "FR":
            col_lo[j], col_hi[j] = -INF, INF
        elif kind == "MI":
            col_lo[j] = -INF
        elif kind == "PL":
            col_hi[j] = INF
        elif kind == "BV":
            col_lo[j], col_hi[j] = 0.0, 1.0
            integ[j] = True
        else:
            raise MpsError(f"unsupported bound type {kind}")
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    lp = BoundedLp(A, row_lo, row_hi, col_lo, col_hi, c, list(row_order))
    return MpsProblem(name, lp, row_order, col_order, integ, offset)
