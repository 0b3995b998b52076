"""The bracket family on the total space and its dynamical predicates.

The bracket coefficients are, in adapted coordinates,

    {x^i, x^j} = 0
    {x^i, y^k} = -rho^i_r M^{rk}
    {y^k, y^l} = -M^{kr} N_{rs} M^{sl}

and the Hamiltonian vector field convention is ``X_G(h) = {G, h}``, which is
the convention reproducing the known semispray displays on the tangent
fixtures (pinned by the acceptance suite).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List

from . import expr as ex
from . import linalg
from .algebroid import AlgebroidChart
from .errors import SingularHessian
from .lagrangian import LagrangianData
from .report import ValidationReport
from .twoform import NMatrix


@dataclass
class VectorFieldOnA:
    """Vector field on the total space in adapted components."""

    chart: AlgebroidChart
    vx: List[ex.Expr]
    vy: List[ex.Expr]

    def components(self) -> List[ex.Expr]:
        return list(self.vx) + list(self.vy)


class PoissonBivector:
    """Coefficient matrices of the bracket in adapted coordinates; the
    base-base block is identically zero."""

    def __init__(self, chart: AlgebroidChart, pxy: linalg.Matrix, pyy: linalg.Matrix):
        self.chart = chart
        self.pxy = pxy  # n x r, entries {x^i, y^k}
        self.pyy = pyy  # r x r, entries {y^k, y^l}

    def coordinate_names(self) -> List[str]:
        return list(self.chart.coords) + list(self.chart.fibers)

    def coefficient(self, a: int, b: int) -> ex.Expr:
        """Bracket of the a-th and b-th coordinate in the combined ordering
        (base coordinates first)."""
        n = self.chart.n
        if a < n and b < n:
            return ex.ZERO
        if a < n <= b:
            return self.pxy[a][b - n]
        if b < n <= a:
            return ex.eneg(self.pxy[b][a - n])
        return self.pyy[a - n][b - n]


def build_bracket(chart: AlgebroidChart, data: LagrangianData, n_matrix: NMatrix) -> PoissonBivector:
    """Assemble the bracket coefficient matrices from the Hessian inverse and
    the twisted skew matrix."""
    if data.Minv is None:
        if not data.regular:
            raise SingularHessian(data.singular_witness)
        raise ValueError("building the bracket symbolically needs the exact Hessian inverse")
    minv = data.Minv
    r, n = chart.r, chart.n
    pxy = [[ex.eneg(ex.eadd(*(ex.emul(chart.rho[i][s], minv[s][k]) for s in range(r))))
            for k in range(r)] for i in range(n)]
    nm = n_matrix.matrix()
    mn = linalg.mat_mul(minv, nm)
    mnm = linalg.mat_mul(mn, minv)
    pyy = [[ex.eneg(mnm[k][l]) for l in range(r)] for k in range(r)]
    return PoissonBivector(chart, pxy, pyy)


def bracket(p: PoissonBivector, f: ex.Expr, g: ex.Expr) -> ex.Expr:
    """Bilinear Leibniz extension ``sum P^{ab} da(F) db(G)`` over all
    coordinate pairs."""
    names = p.coordinate_names()
    df = [ex.diff(f, nm) for nm in names]
    dg = [ex.diff(g, nm) for nm in names]
    pieces = []
    for a in range(len(names)):
        if ex.is_zero_literal(df[a]):
            continue
        for b in range(len(names)):
            if a == b or ex.is_zero_literal(dg[b]):
                continue
            coeff = p.coefficient(a, b)
            if ex.is_zero_literal(coeff):
                continue
            pieces.append(ex.emul(coeff, df[a], dg[b]))
    return ex.eadd(*pieces)


def check_jacobi(p: PoissonBivector, box: ex.Box = None, trials: int = 64,
                 tol: float = 1e-9, seed: int = 0) -> ValidationReport:
    """Tag the Jacobiator of every coordinate triple."""
    names = p.coordinate_names()
    variables = [ex.Var(nm) for nm in names]
    report = ValidationReport(check="jacobi", seed=seed)
    for a, b, c in itertools.combinations(range(len(names)), 3):
        va, vb, vc = variables[a], variables[b], variables[c]
        residual = ex.eadd(bracket(p, va, bracket(p, vb, vc)),
                           bracket(p, vb, bracket(p, vc, va)),
                           bracket(p, vc, bracket(p, va, vb)))
        report.add(f"({names[a]},{names[b]},{names[c]})",
                   ex.is_zero(residual, box=box, trials=trials, tol=tol, seed=seed))
    return report


def hamiltonian_field(p: PoissonBivector, g: ex.Expr) -> VectorFieldOnA:
    """Hamiltonian vector field of ``g``: component a is ``{g, coordinate_a}``."""
    chart = p.chart
    vx = [bracket(p, g, ex.Var(nm)) for nm in chart.coords]
    vy = [bracket(p, g, ex.Var(nm)) for nm in chart.fibers]
    return VectorFieldOnA(chart, vx, vy)


def is_semispray(chart: AlgebroidChart, field: VectorFieldOnA, box: ex.Box = None,
                 trials: int = 64, tol: float = 1e-9, seed: int = 0) -> ValidationReport:
    """Residuals ``Vx^i - y^j rho^i_j`` of the base-projection condition."""
    report = ValidationReport(check="semispray", seed=seed)
    y = [ex.Var(nm) for nm in chart.fibers]
    for i in range(chart.n):
        expected = ex.eadd(*(ex.emul(y[j], chart.rho[i][j]) for j in range(chart.r)))
        residual = ex.eadd(field.vx[i], ex.eneg(expected))
        report.add(f"d/d{chart.coords[i]}",
                   ex.is_zero(residual, box=box, trials=trials, tol=tol, seed=seed))
    return report


def is_spray(field: VectorFieldOnA, box: ex.Box = None, trials: int = 64,
             tol: float = 1e-9, seed: int = 0) -> ValidationReport:
    """Residuals of ``[E, V] - V`` against the fiber dilation field
    ``E = y^k d/dy^k``: base components must be fiberwise homogeneous of
    degree 1 and fiber components of degree 2."""
    chart = field.chart
    y = chart.fibers
    report = ValidationReport(check="spray", seed=seed)

    def euler_degree(component: ex.Expr, degree: int) -> ex.Expr:
        radial = ex.eadd(*(ex.emul(ex.Var(nm), ex.diff(component, nm)) for nm in y))
        return ex.eadd(radial, ex.emul(ex.Const(-degree), component))

    for i, component in enumerate(field.vx):
        report.add(f"d/d{chart.coords[i]}",
                   ex.is_zero(euler_degree(component, 1), box=box, trials=trials, tol=tol, seed=seed))
    for k, component in enumerate(field.vy):
        report.add(f"d/d{chart.fibers[k]}",
                   ex.is_zero(euler_degree(component, 2), box=box, trials=trials, tol=tol, seed=seed))
    return report
