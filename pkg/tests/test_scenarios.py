import numpy as np
import pytest

from baysize.design import EquivalenceInterval
from baysize.scenarios import (
    H0SamplingPrior,
    ScenarioSpec,
    default_scenarios,
    draw_h0,
    draw_h1,
    scenario_p1,
)

EI = EquivalenceInterval(0.3, 0.1, 0.1)


def test_point_mass_lower_edge():
    p = draw_h0(H0SamplingPrior.POINT_MASS_LOWER_EDGE, 5, EI, np.random.default_rng(0))
    np.testing.assert_allclose(p, [0.2] * 5)


def test_single_dose_order_statistic():
    p = draw_h0(H0SamplingPrior.ORDER_STATISTICS_UNIFORM, 1, EI, np.random.default_rng(0))
    assert p.shape == (1,) and 0 <= p[0] <= 0.2


@pytest.mark.parametrize("kind", list(H0SamplingPrior))
def test_h0_support_and_sortedness(kind):
    p = draw_h0(kind, 5, EI, np.random.default_rng(1), size=10_000)
    assert p.shape == (10_000, 5)
    assert np.all(p >= 0) and np.all(p <= EI.lower)
    assert np.all(np.diff(p, axis=1) >= 0)


def test_order_statistic_mean_of_top_dose():
    p = draw_h0(H0SamplingPrior.ORDER_STATISTICS_UNIFORM, 5, EI, np.random.default_rng(2),
                size=10_000)
    assert p.max() < 0.2
    assert abs(p[:, -1].mean() - 5 / 6 * 0.2) < 0.005


def test_h0_string_kind_accepted():
    p = draw_h0("monotone_uniform", 3, EI, np.random.default_rng(0))
    assert p.shape == (3,)


def test_mtd_in_middle():
    p = scenario_p1(ScenarioSpec(d_star=3, lambda1=0.1), EI, 5)
    np.testing.assert_allclose(p, [0.1, 0.2, 0.3, 0.4, 0.5], atol=1e-12)


def test_mtd_at_first_dose():
    p = scenario_p1(ScenarioSpec.mtd_at(1, EI), EI, 5)
    assert EI.contains(p[0])
    assert np.all(p[1:] >= EI.upper - 1e-12)
    np.testing.assert_allclose(p, [0.3, 0.4, 0.5, 0.6, 0.7], atol=1e-12)


@pytest.mark.parametrize("p_star", [(0.01, 0.05, 0.1, 0.2, 0.3),
                                    (0.05, 0.09, 0.12, 0.19, 0.25)])
def test_explicit_vectors_pass_through(p_star):
    sc = ScenarioSpec(p_star=p_star)
    np.testing.assert_array_equal(scenario_p1(sc, EI, 5), p_star)
    np.testing.assert_array_equal(draw_h1(sc, EI, 5), draw_h1(sc, EI, 5))
    inside = [d + 1 for d, v in enumerate(p_star) if EI.contains_open(v)]
    assert inside == [5]


@pytest.mark.parametrize("D", [1, 2, 5, 8])
def test_default_scenarios_one_dose_in_ei(D):
    for ei in (EI, EquivalenceInterval(0.2, 0.05, 0.05), EquivalenceInterval(0.3, 0.2, 0.2)):
        for d, sc in enumerate(default_scenarios(ei, D), start=1):
            p = scenario_p1(sc, ei, D)
            assert np.all(np.diff(p) > 0) and np.all((p > 0) & (p < 1))
            assert [k + 1 for k, v in enumerate(p) if ei.contains(v)][0] <= d
            assert ei.contains(p[d - 1])
            assert sum(ei.contains_open(v) for v in p) <= 1


def test_parametric_gaps():
    p = scenario_p1(ScenarioSpec(d_star=2, lambda1=0.05, rho1=0.05, rho2=0.1), EI, 5)
    assert p[0] == pytest.approx(0.15)
    assert p[1] == pytest.approx(0.25)
    assert p[2] == pytest.approx(0.5)
    assert np.all(np.diff(p) > 0) and p[-1] < 1


@pytest.mark.parametrize("spec", [
    ScenarioSpec(d_star=3, lambda1=0.1, rho1=0.2),   # rho1 >= p_T - eps1
    ScenarioSpec(d_star=3, lambda1=0.1, rho2=0.6),   # pushes a dose to 1
    ScenarioSpec(d_star=6, lambda1=0.1),
    ScenarioSpec(d_star=3, lambda1=0.3),
    ScenarioSpec(p_star=(0.1, 0.25, 0.3, 0.5, 0.6)),  # two doses in the EI
    ScenarioSpec(p_star=(0.1, 0.12, 0.15, 0.5, 0.6)),  # none in the EI
    ScenarioSpec(p_star=(0.1, 0.3, 0.25, 0.5, 0.6)),   # not increasing
])
def test_infeasible_scenarios_rejected(spec):
    with pytest.raises(ValueError):
        scenario_p1(spec, EI, 5)


def test_spec_requires_one_form():
    with pytest.raises(ValueError):
        ScenarioSpec(p_star=(0.3,), d_star=1, lambda1=0.1)
    with pytest.raises(ValueError):
        ScenarioSpec(d_star=1)
