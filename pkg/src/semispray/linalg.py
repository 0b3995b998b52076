"""Dense symbolic matrices, small enough for cofactor expansion."""

from __future__ import annotations

from typing import List, Sequence

from . import expr as ex

Matrix = List[List[ex.Expr]]


def identity(n: int) -> Matrix:
    return [[ex.ONE if i == j else ex.ZERO for j in range(n)] for i in range(n)]


def zeros(rows: int, cols: int) -> Matrix:
    return [[ex.ZERO for _ in range(cols)] for _ in range(rows)]


def transpose(m: Matrix) -> Matrix:
    return [list(row) for row in zip(*m)]


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    rows, inner, cols = len(a), len(b), len(b[0])
    assert len(a[0]) == inner
    return [[ex.eadd(*(ex.emul(a[i][k], b[k][j]) for k in range(inner)))
             for j in range(cols)] for i in range(rows)]


def mat_vec(a: Matrix, v: Sequence[ex.Expr]) -> List[ex.Expr]:
    return [ex.eadd(*(ex.emul(a[i][k], v[k]) for k in range(len(v)))) for i in range(len(a))]


def _minor(m: Matrix, row: int, col: int) -> Matrix:
    return [[m[i][j] for j in range(len(m)) if j != col]
            for i in range(len(m)) if i != row]


def det(m: Matrix) -> ex.Expr:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return ex.eadd(ex.emul(m[0][0], m[1][1]), ex.eneg(ex.emul(m[0][1], m[1][0])))
    pieces = []
    for i in range(n):
        entry = m[i][0]
        if ex.is_zero_literal(entry):
            continue
        cof = det(_minor(m, i, 0))
        term = ex.emul(entry, cof)
        pieces.append(term if i % 2 == 0 else ex.eneg(term))
    return ex.eadd(*pieces)


def adjugate(m: Matrix) -> Matrix:
    n = len(m)
    if n == 1:
        return [[ex.ONE]]
    cof = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor_det = det(_minor(m, i, j))
            cof[i][j] = minor_det if (i + j) % 2 == 0 else ex.eneg(minor_det)
    return transpose(cof)


def eval_matrix(m: Matrix, env: dict) -> List[List[float]]:
    return [[ex.evaluate(entry, env) for entry in row] for row in m]


def solve_numeric(a: List[List[float]], b: List[float]) -> List[float]:
    """Gaussian elimination with partial pivoting for small systems."""
    n = len(a)
    aug = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(aug[r][col]))
        if abs(aug[pivot][col]) < 1e-14:
            raise ValueError("numerically singular system")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        for r in range(col + 1, n):
            factor = aug[r][col] / aug[col][col]
            for c in range(col, n + 1):
                aug[r][c] -= factor * aug[col][c]
    out = [0.0] * n
    for r in range(n - 1, -1, -1):
        acc = aug[r][n] - sum(aug[r][c] * out[c] for c in range(r + 1, n))
        out[r] = acc / aug[r][r]
    return out
