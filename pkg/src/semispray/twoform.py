"""Closed 2-sections and the skew coefficient matrix they twist.

The closed 2-section is the free parameter of the bracket family; it is
always user-supplied (or read off a catalog fixture) and checked, never
synthesized.
"""

from __future__ import annotations

import itertools
from typing import Dict, Mapping, Optional, Tuple

from . import expr as ex
from .algebroid import AForm, AlgebroidChart
from .lagrangian import LagrangianData
from .report import ValidationReport


class ThetaSection:
    """A degree-2 form on the chart, skew by storage, meant to be closed."""

    def __init__(self, form: AForm):
        if form.degree != 2:
            raise ValueError("a closed 2-section must have degree 2")
        self.form = form
        self.chart = form.chart

    @classmethod
    def zero(cls, chart: AlgebroidChart) -> "ThetaSection":
        return cls(AForm(chart, 2, {}))

    @classmethod
    def from_components(cls, chart: AlgebroidChart,
                        components: Mapping[Tuple[int, int], ex.Expr]) -> "ThetaSection":
        return cls(AForm(chart, 2, components))

    def coefficient(self, i: int, j: int) -> ex.Expr:
        return self.form.get((i, j))

    def closedness_residuals(self):
        """Yield ``(label, residual)`` per index triple ``i < j < k``:
        ``sum_cyc(i,j,k) rho^r_k dTheta_{ij}/dx^r - C^r_{jk} Theta_{ri}``."""
        chart = self.chart
        for i, j, k in itertools.combinations(range(chart.r), 3):
            pieces = []
            for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
                pieces.append(chart.anchor_derivative(c, self.coefficient(a, b)))
                pieces.append(ex.eneg(ex.eadd(*(ex.emul(chart.c(r, b, c), self.coefficient(r, a))
                                                for r in range(chart.r)))))
            yield f"(i,j,k)=({i + 1},{j + 1},{k + 1})", ex.eadd(*pieces)

    def check_closed(self, box: ex.Box = None, trials: int = 64,
                     tol: float = 1e-9, seed: int = 0) -> ValidationReport:
        """Tag every cyclic closedness residual with the zero test."""
        report = ValidationReport(check="theta-closed", seed=seed)
        for label, residual in self.closedness_residuals():
            report.add(label, ex.is_zero(residual, box=box, trials=trials, tol=tol, seed=seed))
        return report


class NMatrix:
    """Skew matrix of bracket-twisting coefficients on the total space."""

    def __init__(self, chart: AlgebroidChart, upper: Dict[Tuple[int, int], ex.Expr]):
        self.chart = chart
        self._upper = upper  # keys (i, j) with i < j

    def entry(self, i: int, j: int) -> ex.Expr:
        if i == j:
            return ex.ZERO
        if i < j:
            return self._upper.get((i, j), ex.ZERO)
        return ex.eneg(self._upper.get((j, i), ex.ZERO))

    def matrix(self):
        r = self.chart.r
        return [[self.entry(i, j) for j in range(r)] for i in range(r)]


def assemble_N(data: LagrangianData, chart: AlgebroidChart,
               theta: Optional[ThetaSection] = None) -> NMatrix:
    """Assemble
    ``N_{ij} = rho_i^k d2L/dx^k dy^j - rho_j^k d2L/dx^k dy^i
    - dL/dy^k C^k_{ij} + Theta_{ij}``
    for ``i < j``; the full matrix is recovered by skewness."""
    if data.chart is not chart:
        raise ValueError("Lagrangian data belongs to a different chart")
    upper: Dict[Tuple[int, int], ex.Expr] = {}
    for i in range(chart.r):
        for j in range(i + 1, chart.r):
            pieces = [chart.anchor_derivative(i, data.thetaL[j]),
                      ex.eneg(chart.anchor_derivative(j, data.thetaL[i]))]
            pieces.append(ex.eneg(ex.eadd(*(ex.emul(data.thetaL[k], chart.c(k, i, j))
                                            for k in range(chart.r)))))
            if theta is not None:
                pieces.append(theta.coefficient(i, j))
            value = ex.eadd(*pieces)
            if not ex.is_zero_literal(value):
                upper[(i, j)] = value
    return NMatrix(chart, upper)
