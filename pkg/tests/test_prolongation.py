import random

import pytest

from semispray import algebroid as alg
from semispray import expr as ex
from semispray import homotopy as ho
from semispray import lagrangian, poisson, prolongation as pr, twoform
from semispray.errors import DegenerateForm, DegreeError, NotVerticalVanishing

from helpers import assert_certified_zero, assert_proven_zero, random_polynomial


def zero_section(chart):
    return pr.ProlongSection(chart, [ex.ZERO] * chart.r, [ex.ZERO] * chart.r)


def random_section(rng, chart, vertical=False):
    a = [ex.ZERO if vertical else random_polynomial(rng, chart.alphabet, 2, 2)
         for _ in range(chart.r)]
    b = [random_polynomial(rng, chart.alphabet, 2, 2) for _ in range(chart.r)]
    return pr.ProlongSection(chart, a, b)


def assert_sections_equal(s1, s2):
    for lhs, rhs in zip(s1.coefficients(), s2.coefficients()):
        assert_proven_zero(ex.eadd(lhs, ex.eneg(rhs)))


class TestAnchor:
    def test_liouville_projects_to_dilation(self, so3):
        field = pr.anchor(pr.liouville(so3.chart))
        assert field.vx == [ex.ZERO] * 3
        assert field.vy == [ex.Var(nm) for nm in so3.chart.fibers]

    def test_fiber_weighted_frame_sections(self, tangent1):
        chart = tangent1.chart
        section = pr.ProlongSection(chart, [ex.Var("y1")], [ex.ZERO])
        field = pr.anchor(section)
        assert field.vx == [ex.Var("y1")] and field.vy == [ex.ZERO]

    def test_energy_section_on_line(self, tangent1):
        data = lagrangian.build("1/2*y1^2", tangent1.chart)
        _, omega = pr.cartan_sections(data)
        sigma = pr.hamiltonian_section(omega, data.EL)
        field = pr.anchor(sigma)
        assert field.vx == [ex.Var("y1")] and field.vy == [ex.ZERO]


class TestLieBracket:
    def test_frame_relations_on_rotations(self, so3):
        chart = so3.chart
        e = [pr.ProlongSection(chart, [ex.ONE if i == j else ex.ZERO for i in range(3)],
                               [ex.ZERO] * 3) for j in range(3)]
        got = pr.lie_bracket(e[0], e[1])
        assert_sections_equal(got, e[2])

    def test_vertical_frame_sections_commute(self, so3):
        chart = so3.chart
        u1 = pr.ProlongSection(chart, [ex.ZERO] * 3, [ex.ONE, ex.ZERO, ex.ZERO])
        u2 = pr.ProlongSection(chart, [ex.ZERO] * 3, [ex.ZERO, ex.ONE, ex.ZERO])
        assert_sections_equal(pr.lie_bracket(u1, u2), zero_section(chart))

    def test_liouville_rescales_vertical_frame(self, so3):
        chart = so3.chart
        u1 = pr.ProlongSection(chart, [ex.ZERO] * 3, [ex.ONE, ex.ZERO, ex.ZERO])
        got = pr.lie_bracket(pr.liouville(chart), u1)
        expected = pr.ProlongSection(chart, [ex.ZERO] * 3,
                                     [ex.MINUS_ONE, ex.ZERO, ex.ZERO])
        assert_sections_equal(got, expected)

    @pytest.mark.parametrize("seed", range(4))
    def test_vertical_sections_form_a_subalgebra(self, so3, seed):
        rng = random.Random(700 + seed)
        v1 = random_section(rng, so3.chart, vertical=True)
        v2 = random_section(rng, so3.chart, vertical=True)
        bracket = pr.lie_bracket(v1, v2)
        assert bracket.is_vertical


class TestDifferential:
    def test_energy_differential_display(self, catalog_fixtures, lagrangian_data):
        # dE_L = M_ia y^a U^i + rho^k_j dE_L/dx^k E^j, per frame leg.
        for fixture in catalog_fixtures:
            chart = fixture.chart
            data = lagrangian_data(fixture)
            d_el = pr.d(pr.ProlongForm.function(chart, data.EL))
            y = [ex.Var(nm) for nm in chart.fibers]
            for j in range(chart.r):
                expected_e = chart.anchor_derivative(j, data.EL)
                assert_proven_zero(ex.eadd(d_el.value((j,)), ex.eneg(expected_e)))
                expected_u = ex.eadd(*(ex.emul(data.M[j][a], y[a]) for a in range(chart.r)))
                assert_proven_zero(ex.eadd(d_el.value((chart.r + j,)), ex.eneg(expected_u)))

    def test_fundamental_two_section_blocks(self, catalog_fixtures, lagrangian_data):
        for fixture in catalog_fixtures:
            chart = fixture.chart
            data = lagrangian_data(fixture)
            _, omega = pr.cartan_sections(data)
            n_plain = twoform.assemble_N(data, chart, None)
            for i in range(chart.r):
                for j in range(chart.r):
                    assert omega.ue(i, j) == data.M[i][j]
                    assert omega.ee(i, j) == n_plain.entry(i, j)
                    assert omega.uu(i, j) == ex.ZERO

    @pytest.mark.parametrize("seed", range(4))
    def test_d_squared_vanishes(self, so3, seed):
        chart = so3.chart
        rng = random.Random(800 + seed)
        f = pr.ProlongForm.function(chart, random_polynomial(rng, chart.alphabet))
        for value in pr.d(pr.d(f)).form.coeffs.values():
            assert_certified_zero(value, seed=seed)
        one = pr.ProlongForm.one_form(
            chart,
            [random_polynomial(rng, chart.alphabet) for _ in range(3)],
            [random_polynomial(rng, chart.alphabet) for _ in range(3)])
        for value in pr.d(pr.d(one)).form.coeffs.values():
            assert_certified_zero(value, seed=seed)

    def test_degree_cap(self, tangent2):
        form = pr.ProlongForm.from_coeffs(tangent2.chart, 3, {(0, 1, 2): ex.ONE})
        with pytest.raises(DegreeError):
            pr.d(form)


class TestVerticalEndomorphism:
    def test_second_order_sections_map_to_liouville(self, so3):
        chart = so3.chart
        rng = random.Random(5)
        sode = pr.ProlongSection(chart, [ex.Var(nm) for nm in chart.fibers],
                                 [random_polynomial(rng, chart.alphabet) for _ in range(3)])
        assert_sections_equal(pr.vertical_endomorphism(sode), pr.liouville(chart))

    @pytest.mark.parametrize("seed", range(4))
    def test_squares_to_zero_with_matching_kernel_and_image(self, so3, seed):
        rng = random.Random(900 + seed)
        section = random_section(rng, so3.chart)
        once = pr.vertical_endomorphism(section)
        assert once.is_vertical  # image inside the vertical subbundle
        twice = pr.vertical_endomorphism(once)
        assert_sections_equal(twice, zero_section(so3.chart))

    def test_dual_annihilates_fundamental_section(self, catalog_fixtures, lagrangian_data):
        for fixture in catalog_fixtures:
            data = lagrangian_data(fixture)
            _, omega = pr.cartan_sections(data)
            assert pr.j_dual(omega).is_structurally_zero()

    def test_dual_on_coframe(self, tangent1):
        chart = tangent1.chart
        e_cov = pr.ProlongForm.one_form(chart, [ex.ONE], [ex.ZERO])
        u_cov = pr.ProlongForm.one_form(chart, [ex.ZERO], [ex.ONE])
        assert pr.j_dual(e_cov).is_structurally_zero()
        got = pr.j_dual(u_cov)
        assert got.value((0,)) == ex.MINUS_ONE and got.value((1,)) == ex.ZERO


class TestCartanSections:
    def test_line_kinetic_energy(self, tangent1):
        data = lagrangian.build("1/2*y1^2", tangent1.chart)
        theta, omega = pr.cartan_sections(data)
        assert theta.value((0,)) == ex.Var("y1")
        assert theta.value((1,)) == ex.ZERO
        assert omega.ue(0, 0) == ex.ONE
        assert omega.ee(0, 0) == ex.ZERO

    def test_vertical_pairs_vanish_even_for_transcendental_lagrangians(self, tangent2):
        chart = tangent2.chart
        data = lagrangian.build("1/2*exp(x1)*y1^2 + 1/2*y2^2 + cos(x2)*y1",
                                chart, box=ex.Box(default=(0.1, 1.0)))
        _, omega = pr.cartan_sections(data)
        for i in range(2):
            for j in range(2):
                assert omega.uu(i, j) == ex.ZERO


class TestHamiltonianSection:
    def test_line_energy(self, tangent1):
        data = lagrangian.build("1/2*y1^2", tangent1.chart)
        _, omega = pr.cartan_sections(data)
        sigma = pr.hamiltonian_section(omega, data.EL)
        assert sigma.a == [ex.Var("y1")] and sigma.b == [ex.ZERO]

    def test_line_energy_with_potential(self, tangent1):
        data = lagrangian.build("1/2*y1^2", tangent1.chart)
        _, omega = pr.cartan_sections(data)
        sigma = pr.hamiltonian_section(omega, ex.eadd(data.EL, ex.Var("x1")))
        assert sigma.a == [ex.Var("y1")] and sigma.b == [ex.MINUS_ONE]

    def test_degenerate_form_rejected(self, tangent1):
        chart = tangent1.chart
        omega = pr.ProlongForm.from_blocks(chart, ue=[[ex.ZERO]])
        with pytest.raises(DegenerateForm):
            pr.hamiltonian_section(omega, ex.Var("x1"))

    def test_full_solve_with_vertical_block(self, tangent1):
        # A vertical-vertical block forces the full coefficient-matrix solve.
        chart = tangent1.chart
        data = lagrangian.build("1/2*y1^2", chart)
        _, omega = pr.cartan_sections(data)
        sigma_block = pr.hamiltonian_section(omega, data.EL)
        omega_dict = dict(omega.form.coeffs)
        full = pr.ProlongForm(chart, alg.AForm(pr.prolong_chart(chart), 2, omega_dict))
        sigma_full = pr.hamiltonian_section(full, data.EL)
        assert_sections_equal(sigma_block, sigma_full)

    def test_pointwise_solver_matches_symbolic(self, so3, lagrangian_data):
        data = lagrangian_data(so3)
        _, omega = pr.cartan_sections(data)
        sigma = pr.hamiltonian_section(omega, data.EL)
        point = ex.ChartPoint((0.2, -0.4, 0.6), (0.5, 0.1, -0.3))
        a, b = pr.hamiltonian_section_at(omega, data.EL, point)
        env = point.env(so3.chart.coords, so3.chart.fibers)
        assert a == pytest.approx([ex.evaluate(v, env) for v in sigma.a], abs=1e-10)
        assert b == pytest.approx([ex.evaluate(v, env) for v in sigma.b], abs=1e-10)

    def test_closed_form_coefficients(self, curved_metric):
        # sigma = y^a E_a - M^{rl} (rho^b_l dE_L/dx^b + N_sl y^s) U_r, checked
        # on a chart with an x-dependent Hessian.
        chart = curved_metric.chart
        data = lagrangian.build(curved_metric.lagrangian, chart)
        _, omega = pr.cartan_sections(data)
        sigma = pr.hamiltonian_section(omega, data.EL)
        n_plain = twoform.assemble_N(data, chart, None)
        y = [ex.Var(nm) for nm in chart.fibers]
        for r_ in range(chart.r):
            assert_certified_zero(ex.eadd(sigma.a[r_], ex.eneg(y[r_])), tol=1e-10)
            pieces = []
            for l in range(chart.r):
                inner = ex.eadd(chart.anchor_derivative(l, data.EL),
                                ex.eadd(*(ex.emul(n_plain.entry(s, l), y[s])
                                          for s in range(chart.r))))
                pieces.append(ex.emul(data.Minv[r_][l], inner))
            expected = ex.eneg(ex.eadd(*pieces))
            assert_certified_zero(ex.eadd(sigma.b[r_], ex.eneg(expected)), tol=1e-10)

    def test_energy_section_is_second_order_everywhere(self, catalog_fixtures, lagrangian_data):
        for fixture in catalog_fixtures:
            data = lagrangian_data(fixture)
            _, omega = pr.cartan_sections(data)
            sigma = pr.hamiltonian_section(omega, data.EL, check=False)
            assert pr.is_sode(sigma).passed, fixture.label

    def test_liouville_is_not_second_order(self, so3):
        report = pr.is_sode(pr.liouville(so3.chart))
        assert not report.passed

    def test_second_order_modulo_vertical(self, so3):
        chart = so3.chart
        rng = random.Random(6)
        section = pr.ProlongSection(chart, [ex.Var(nm) for nm in chart.fibers],
                                    [random_polynomial(rng, chart.alphabet) for _ in range(3)])
        assert pr.is_sode(section).passed


class TestBigrading:
    def test_vertical_derivative_block_at_zero_connection(self, tangent2):
        chart = tangent2.chart
        rng = random.Random(7)
        zeta = [random_polynomial(rng, chart.alphabet) for _ in range(2)]
        form = pr.ProlongForm.one_form(chart, zeta, [ex.ZERO, ex.ZERO])
        _, dsec, _ = pr.d_split(form)
        for i in range(2):
            for j in range(2):
                assert dsec.ue(i, j) == ex.diff(zeta[j], chart.fibers[i])

    @pytest.mark.parametrize("seed", range(3))
    def test_split_reassembles_differential(self, so3, seed):
        chart = so3.chart
        rng = random.Random(1000 + seed)
        gamma = [[random_polynomial(rng, chart.alphabet, 2, 2) for _ in range(3)]
                 for _ in range(3)]
        conn = pr.EhresmannConn(chart, gamma)
        form = pr.ProlongForm.one_form(
            chart,
            [random_polynomial(rng, chart.alphabet, 2, 2) for _ in range(3)],
            [random_polynomial(rng, chart.alphabet, 2, 2) for _ in range(3)])
        dp, dsec, dl = pr.d_split(form, conn)
        total = dp + dsec + dl - pr.d(form)
        assert total.is_structurally_zero()

    @pytest.mark.parametrize("seed", range(3))
    def test_vertical_part_squares_to_zero(self, so3, seed):
        chart = so3.chart
        rng = random.Random(1100 + seed)
        gamma = [[random_polynomial(rng, chart.alphabet, 2, 1) for _ in range(3)]
                 for _ in range(3)]
        conn = pr.EhresmannConn(chart, gamma)
        form = pr.ProlongForm.one_form(
            chart,
            [random_polynomial(rng, chart.alphabet, 2, 2) for _ in range(3)],
            [random_polynomial(rng, chart.alphabet, 2, 2) for _ in range(3)])
        _, dsec, _ = pr.d_split(form, conn)
        _, dsec2, _ = pr.d_split(dsec, conn)
        for value in dsec2.form.coeffs.values():
            assert_certified_zero(value, seed=seed)

    def test_bigrade_roundtrip(self, so3):
        chart = so3.chart
        rng = random.Random(12)
        gamma = [[random_polynomial(rng, chart.alphabet, 2, 1) for _ in range(3)]
                 for _ in range(3)]
        conn = pr.EhresmannConn(chart, gamma)
        data = lagrangian.build(so3.lagrangian, chart)
        _, omega = pr.cartan_sections(data)
        rebuilt = pr.ProlongForm.zero(chart, 2)
        for block in pr.bigrade(omega, conn).values():
            rebuilt += pr.block_to_form(block, conn)
        assert (rebuilt - omega).is_structurally_zero()


class TestDecomposition:
    def test_line_kinetic_energy_splits_exactly(self, tangent1):
        data = lagrangian.build("1/2*y1^2", tangent1.chart)
        theta_l, omega = pr.cartan_sections(data)
        horizontal, exact_part = pr.decompose_symplectic(omega)
        assert horizontal.is_structurally_zero()
        assert (exact_part - theta_l).is_structurally_zero()

    def test_twisted_section_recovers_horizontal_part(self, so3, lagrangian_data):
        data = lagrangian_data(so3)
        _, omega = pr.cartan_sections(data)
        pulled = pr.pullback_horizontal(so3.theta)
        total = omega + pulled
        horizontal, exact_part = pr.decompose_symplectic(total)
        for i in range(3):
            for j in range(3):
                assert horizontal.uu(i, j) == ex.ZERO
                assert horizontal.ue(i, j) == ex.ZERO
        reassembled = horizontal + pr.d(exact_part) - total
        assert reassembled.is_structurally_zero()

    def test_curved_chart_roundtrip(self, curved_cotangent, lagrangian_data):
        data = lagrangian_data(curved_cotangent)
        _, omega = pr.cartan_sections(data)
        total = omega + pr.pullback_horizontal(curved_cotangent.theta)
        horizontal, exact_part = pr.decompose_symplectic(total)
        residual = horizontal + pr.d(exact_part) - total
        assert residual.is_structurally_zero()

    def test_vertical_block_rejected(self, tangent2):
        chart = tangent2.chart
        bad = pr.ProlongForm.from_blocks(
            chart, ue=[[ex.ONE, ex.ZERO], [ex.ZERO, ex.ONE]],
            uu=[[ex.ZERO, ex.ONE], [ex.MINUS_ONE, ex.ZERO]])
        with pytest.raises(NotVerticalVanishing):
            pr.decompose_symplectic(bad)

    def test_exact_part_has_full_rank_pointwise(self, so3, lagrangian_data):
        data = lagrangian_data(so3)
        _, omega = pr.cartan_sections(data)
        _, exact_part = pr.decompose_symplectic(omega)
        point = ex.ChartPoint((0.3, -0.2, 0.5), (0.7, 0.4, -0.6))
        assert pr.coefficient_rank_at(pr.d(exact_part), point) == 2 * so3.chart.r


class TestPullback:
    def test_zero(self, so3):
        assert pr.pullback_horizontal(alg.AForm(so3.chart, 2, {})).is_structurally_zero()

    def test_cotangent_bivector_coefficients(self, cotangent):
        pulled = pr.pullback_horizontal(cotangent.theta)
        assert pulled.ee(0, 1) == ex.ONE
        for i in range(2):
            for j in range(2):
                assert pulled.ue(i, j) == ex.ZERO
                assert pulled.uu(i, j) == ex.ZERO

    def test_commutes_with_differentials_on_closed_sections(self, so3):
        pulled = pr.pullback_horizontal(so3.theta)
        for value in pr.d(pulled).form.coeffs.values():
            assert_certified_zero(value)


class TestVerticalCorrection:
    def test_trivial_inputs_give_zero(self, tangent1):
        data = lagrangian.build("1/2*y1^2", tangent1.chart)
        z = pr.vertical_correction(data, None, None)
        assert_sections_equal(z, zero_section(tangent1.chart))

    def test_line_with_potential(self, tangent1):
        data = lagrangian.build("1/2*y1^2", tangent1.chart)
        z = pr.vertical_correction(data, None, ex.Var("x1"))
        assert z.a == [ex.ZERO] and z.b == [ex.MINUS_ONE]

    def test_matches_bracket_side_field(self, cotangent, lagrangian_data):
        data = lagrangian_data(cotangent)
        pulled = pr.pullback_horizontal(cotangent.theta)
        z = pr.vertical_correction(data, pulled, None)
        _, omega = pr.cartan_sections(data)
        sigma = pr.hamiltonian_section(omega, data.EL)
        via_sections = pr.anchor(sigma + z)
        n = twoform.assemble_N(data, cotangent.chart, twoform.ThetaSection(cotangent.theta))
        bivector = poisson.build_bracket(cotangent.chart, data, n)
        via_bracket = poisson.hamiltonian_field(bivector, data.EL)
        for lhs, rhs in zip(via_sections.components(), via_bracket.components()):
            assert_proven_zero(ex.eadd(lhs, ex.eneg(rhs)))


class TestInducedBracket:
    @pytest.mark.parametrize("fixture_name", ["tangent2", "cotangent"])
    def test_two_section_of_hamiltonian_sections_reproduces_bracket(
            self, fixture_name, request, lagrangian_data):
        # Pairing the twisted 2-section on Hamiltonian sections of coordinate
        # functions reproduces the bracket coefficient matrices.
        fixture = request.getfixturevalue(fixture_name)
        data = lagrangian_data(fixture)
        chart = fixture.chart
        _, omega_l = pr.cartan_sections(data)
        omega = omega_l + pr.pullback_horizontal(fixture.theta)
        n = twoform.assemble_N(data, chart, twoform.ThetaSection(fixture.theta))
        bivector = poisson.build_bracket(chart, data, n)
        names = list(chart.coords) + list(chart.fibers)
        sections = {nm: pr.hamiltonian_section(omega, ex.Var(nm), check=False)
                    for nm in names}
        for a, na in enumerate(names):
            for b, nb in enumerate(names):
                paired = pr.insert_section(pr.insert_section(omega, sections[na]),
                                           sections[nb])
                expected = bivector.coefficient(a, b)
                assert_certified_zero(
                    ex.eadd(paired.value(()), ex.eneg(expected)), tol=1e-9)
