import pytest

from semispray import algebroid, catalog, expr as ex, lagrangian


@pytest.fixture(scope="session")
def tangent1():
    return catalog("tangent", n=1)


@pytest.fixture(scope="session")
def tangent2():
    return catalog("tangent", n=2)


@pytest.fixture(scope="session")
def tangent3():
    return catalog("tangent", n=3)


@pytest.fixture(scope="session")
def so3():
    return catalog("action_so3")


@pytest.fixture(scope="session")
def cotangent():
    return catalog("cotangent_poisson")


@pytest.fixture(scope="session")
def curved_metric():
    """Kinetic Lagrangian of the metric diag(1, 1 + x1^2) on tangent(2):
    genuinely curved, so numeric flows show honest energy drift."""
    fx = catalog("tangent", n=2)
    L = ex.parse("1/2*(y1^2 + (1 + x1^2)*y2^2)", fx.chart.alphabet)
    return algebroid.Fixture("curved_metric", fx.chart, L, None)


@pytest.fixture(scope="session")
def curved_cotangent():
    """Cotangent chart of the position-dependent plane bivector
    (1 + x1^2) d1 ^ d2: nonzero, x-dependent structure functions."""
    x1 = ex.Var("x1")
    entry = ex.eadd(ex.ONE, ex.emul(x1, x1))
    pi = [[ex.ZERO, entry], [ex.eneg(entry), ex.ZERO]]
    return algebroid.cotangent_poisson(pi, [[ex.ONE, ex.ZERO], [ex.ZERO, ex.ONE]])


@pytest.fixture(scope="session")
def catalog_fixtures(tangent1, tangent2, tangent3, so3, cotangent):
    return [tangent1, tangent2, tangent3, so3, cotangent]


def build_data(fixture, **kwargs):
    return lagrangian.build(fixture.lagrangian, fixture.chart, **kwargs)


@pytest.fixture(scope="session")
def lagrangian_data():
    cache = {}

    def get(fixture):
        key = id(fixture)
        if key not in cache:
            cache[key] = build_data(fixture)
        return cache[key]

    return get
