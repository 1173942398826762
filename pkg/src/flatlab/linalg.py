"""Exact rank computations by fraction-free (Bareiss) elimination."""
from fractions import Fraction
from math import lcm

from .expr import as_expr


def _integer_rows(rows):
    out = []
    for row in rows:
        row = [Fraction(v) for v in row]
        m = lcm(*(v.denominator for v in row)) if row else 1
        out.append([int(v * m) for v in row])
    return out


def _bareiss_rank(m, is_zero, exact_div):
    """Rank of the row list ``m`` (modified in place)."""
    if not m:
        return 0
    nrows, ncols = len(m), len(m[0])
    rank = 0
    prev = None
    for col in range(ncols):
        pivot = next((r for r in range(rank, nrows) if not is_zero(m[r][col])), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        p = m[rank][col]
        for r in range(rank + 1, nrows):
            a = m[r][col]
            row = m[r]
            prow = m[rank]
            for c in range(col + 1, ncols):
                v = p * row[c] - a * prow[c]
                row[c] = v if prev is None else exact_div(v, prev)
            row[col] = 0 * a
        prev = p
        rank += 1
        if rank == nrows:
            break
    return rank


def exact_rank(rows):
    """Rank of a matrix of rationals (list of rows)."""
    m = _integer_rows(rows)
    return _bareiss_rank(m, lambda v: v == 0, lambda a, b: a // b)


def symbolic_rank(rows):
    """Rank over the field of rational functions of a matrix of Exprs."""
    m = [[as_expr(v) for v in row] for row in rows]
    return _bareiss_rank(m, lambda v: v.is_zero(), lambda a, b: a / b)

