import random

import pytest

from semispray import expr as ex
from semispray import lagrangian, poisson, twoform
from semispray.report import ZeroStatus

from helpers import assert_proven_zero, random_polynomial


def bracket_bundle(fixture, theta=None, data=None):
    data = data or lagrangian.build(fixture.lagrangian, fixture.chart)
    section = twoform.ThetaSection(theta) if theta is not None else None
    n = twoform.assemble_N(data, fixture.chart, section)
    return data, poisson.build_bracket(fixture.chart, data, n)


class TestBuildBracket:
    def test_tangent_line(self, tangent1):
        _, p = bracket_bundle(tangent1)
        assert p.pxy == [[ex.MINUS_ONE]]
        assert p.pyy == [[ex.ZERO]]

    def test_cotangent_constant(self, cotangent):
        # With a unit Hessian the mixed block reproduces the bivector matrix
        # and the fiber block is its negative.
        _, p = bracket_bundle(cotangent, theta=cotangent.theta)
        pi = [[ex.ZERO, ex.ONE], [ex.MINUS_ONE, ex.ZERO]]
        for i in range(2):
            for k in range(2):
                assert p.pxy[i][k] == pi[i][k]
                assert p.pyy[i][k] == ex.eneg(cotangent.theta.get((i, k)))

    def test_so3_fiber_block_linear_in_fibers(self, so3):
        _, p = bracket_bundle(so3)
        for row in p.pyy:
            for entry in row:
                for u in so3.chart.fibers:
                    for v in so3.chart.fibers:
                        assert_proven_zero(ex.diff(ex.diff(entry, u), v))

    def test_base_block_is_zero(self, so3):
        _, p = bracket_bundle(so3)
        for a in range(so3.chart.n):
            for b in range(so3.chart.n):
                assert p.coefficient(a, b) == ex.ZERO


class TestBracketOperation:
    def test_coordinate_pair(self, tangent1):
        _, p = bracket_bundle(tangent1)
        value = poisson.bracket(p, ex.Var("x1"), ex.Var("y1"))
        assert value == ex.MINUS_ONE

    @pytest.mark.parametrize("seed", range(6))
    def test_self_bracket_vanishes(self, so3, seed):
        _, p = bracket_bundle(so3, theta=so3.theta)
        rng = random.Random(400 + seed)
        f = random_polynomial(rng, so3.chart.alphabet)
        assert_proven_zero(poisson.bracket(p, f, f))

    @pytest.mark.parametrize("seed", range(6))
    def test_antisymmetry(self, so3, seed):
        _, p = bracket_bundle(so3, theta=so3.theta)
        rng = random.Random(500 + seed)
        f = random_polynomial(rng, so3.chart.alphabet)
        g = random_polynomial(rng, so3.chart.alphabet)
        assert_proven_zero(ex.eadd(poisson.bracket(p, f, g), poisson.bracket(p, g, f)))

    @pytest.mark.parametrize("seed", range(4))
    def test_leibniz(self, cotangent, seed):
        _, p = bracket_bundle(cotangent, theta=cotangent.theta)
        rng = random.Random(600 + seed)
        names = cotangent.chart.alphabet
        f, g, h = (random_polynomial(rng, names, max_degree=2, terms=2) for _ in range(3))
        lhs = poisson.bracket(p, f, ex.emul(g, h))
        rhs = ex.eadd(ex.emul(poisson.bracket(p, f, g), h),
                      ex.emul(g, poisson.bracket(p, f, h)))
        assert_proven_zero(ex.eadd(lhs, ex.eneg(rhs)))


class TestJacobi:
    def test_tangent_line_proven(self, tangent1):
        _, p = bracket_bundle(tangent1)
        report = poisson.check_jacobi(p)
        assert report.passed and report.all_proven

    def test_cotangent_with_twist(self, cotangent):
        _, p = bracket_bundle(cotangent, theta=cotangent.theta)
        report = poisson.check_jacobi(p, tol=1e-9)
        assert report.passed and report.max_residual < 1e-9

    def test_position_dependent_structure_functions(self, curved_cotangent, lagrangian_data):
        # x-dependent anchor AND bracket coefficients at once: the Jacobi
        # identity still cancels exactly, and the field stays a semispray.
        fixture = curved_cotangent
        data = lagrangian_data(fixture)
        _, p = bracket_bundle(fixture, theta=fixture.theta, data=data)
        report = poisson.check_jacobi(p)
        assert report.passed and report.all_proven
        field = poisson.hamiltonian_field(p, data.EL)
        assert poisson.is_semispray(fixture.chart, field, tol=1e-10).passed

    def test_non_closed_twist_detected(self, so3, lagrangian_data):
        # The Jacobi checker doubles as a detector for invalid twists: a
        # non-closed 2-section breaks the identity.
        data = lagrangian_data(so3)
        chart = so3.chart
        open_theta = twoform.ThetaSection.from_components(
            chart, {(0, 1): ex.parse("x1^2", chart.alphabet)})
        assert not open_theta.check_closed().passed
        n = twoform.assemble_N(data, chart, open_theta)
        bivector = poisson.build_bracket(chart, data, n)
        assert not poisson.check_jacobi(bivector).passed

    def test_corrupted_bivector_fails_with_witness(self, so3):
        _, p = bracket_bundle(so3, theta=so3.theta)
        p.pyy[0][1] = ex.eadd(p.pyy[0][1], ex.Var("x1"))
        p.pyy[1][0] = ex.eneg(p.pyy[0][1])
        report = poisson.check_jacobi(p)
        assert not report.passed
        failure = report.first_failure
        assert failure is not None and failure.result.witness is not None


class TestHamiltonianField:
    def test_free_motion_on_line(self, tangent1):
        data, p = bracket_bundle(tangent1)
        field = poisson.hamiltonian_field(p, data.EL)
        assert field.vx == [ex.Var("y1")]
        assert field.vy == [ex.ZERO]

    def test_constant_force(self, tangent1):
        data, p = bracket_bundle(tangent1)
        field = poisson.hamiltonian_field(p, ex.eadd(data.EL, ex.Var("x1")))
        assert field.vx == [ex.Var("y1")]
        assert field.vy == [ex.MINUS_ONE]

    def test_cotangent_base_velocity_from_bivector(self, cotangent):
        # Base components contract the momenta with the bivector.
        data, p = bracket_bundle(cotangent, theta=cotangent.theta)
        field = poisson.hamiltonian_field(p, data.EL)
        pi = {(0, 1): 1, (1, 0): -1}
        fibers = [ex.Var(nm) for nm in cotangent.chart.fibers]
        for i in range(2):
            expected = ex.eadd(*(ex.emul(fibers[j], ex.Const(pi.get((j, i), 0)))
                                 for j in range(2)))
            assert field.vx[i] == expected


class TestSemisprayPredicate:
    def test_energy_fields_are_semisprays_on_fixtures(self, catalog_fixtures, lagrangian_data):
        for fixture in catalog_fixtures:
            data = lagrangian_data(fixture)
            for theta in (None, fixture.theta):
                _, p = bracket_bundle(fixture, theta=theta, data=data)
                field = poisson.hamiltonian_field(p, data.EL)
                report = poisson.is_semispray(fixture.chart, field, tol=1e-10)
                assert report.passed, f"{fixture.label} theta={theta is not None}"

    def test_wrong_base_component(self, tangent1):
        bad = poisson.VectorFieldOnA(tangent1.chart, [ex.parse("y1^2", ("y1",))], [ex.ZERO])
        report = poisson.is_semispray(tangent1.chart, bad)
        assert not report.passed


class TestSprayPredicate:
    def test_metric_flow_is_spray(self, so3, curved_metric):
        for fixture in (so3, curved_metric):
            data, p = bracket_bundle(fixture)
            field = poisson.hamiltonian_field(p, data.EL)
            assert poisson.is_spray(field).passed

    def test_potential_breaks_homogeneity(self, tangent1):
        data, p = bracket_bundle(tangent1)
        field = poisson.hamiltonian_field(p, ex.eadd(data.EL, ex.Var("x1")))
        report = poisson.is_spray(field)
        assert not report.passed
        # The fiber residual of the dilation bracket is the constant 2.
        fiber_item = report.items[-1]
        assert fiber_item.result.status is ZeroStatus.NONZERO
        assert fiber_item.result.max_residual == pytest.approx(2.0)

    def test_quadratic_fiber_coefficient(self, tangent1):
        field = poisson.VectorFieldOnA(tangent1.chart, [ex.Var("y1")],
                                       [ex.parse("y1^2", ("y1",))])
        assert poisson.is_spray(field).passed
