import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from renyi_elbo.divergence import renyi_divergence_gaussian
from renyi_elbo.errors import InfeasibleOrderError, InvalidDistributionError
from renyi_elbo.gm_landscape import (
    BivariateParams,
    GmGrid,
    PriorParams,
    conditional,
    departing_slices,
    evaluate_point,
    feasibility,
    ibar_closed,
    ibar_oracle,
    ibar_rho1,
    summarize,
    sweep,
)

# nested adaptive quadrature at 20 digits, computed once offline
IBAR_A05_RHO09_R05 = 0.10524837983988499135
IBAR_A05_RHO09_R2 = 0.081346877618748031637
IBAR_A10_RHO05_R15_GAP05 = 1.1027186163861817615

orders = st.floats(0.05, 0.95)
rho_sqs = st.floats(0.0, 0.98)
ratios = st.floats(0.25, 4.0)
gaps = st.floats(-3.0, 3.0)


def setup(rho_sq, ratio, gap, **base):
    params = BivariateParams(rho=math.sqrt(rho_sq), **base)
    return params, PriorParams.from_ratio(params, ratio, gap)


class TestParameters:
    def test_conditional_example(self):
        c = conditional(BivariateParams(rho=0.5), 2.0)
        assert c.mean == pytest.approx(1.0, abs=1e-15)
        assert c.variance == pytest.approx(0.75, abs=1e-15)

    def test_conditional_general(self):
        p = BivariateParams(mu_x=1.0, sigma_x=2.0, mu_y=-1.0, sigma_y=3.0, rho=0.4)
        c = conditional(p, 3.0)
        assert c.mean == pytest.approx(-1.0 + 0.4 * 1.5 * 2.0)
        assert c.variance == pytest.approx(0.84 * 9.0)

    def test_validation(self):
        with pytest.raises(InvalidDistributionError):
            BivariateParams(rho=1.0)
        with pytest.raises(InvalidDistributionError):
            BivariateParams(sigma_x=0.0)
        with pytest.raises(InvalidDistributionError):
            PriorParams(0.0, -1.0)

    def test_from_ratio(self):
        p = BivariateParams(mu_y=2.0, sigma_y=3.0)
        q = PriorParams.from_ratio(p, 4.0, 0.5)
        assert (q.mu_yq, q.sigma_yq) == (1.5, 1.5)


class TestFeasibility:
    def test_unit_orders_always_feasible(self):
        p, q = setup(0.99, 0.25, 1.0)
        assert all(feasibility(a, p, q) for a in (0.01, 0.5, 0.99))

    def test_examples_above_one(self):
        # (1-a)(1-rho^2) + a sigma_q^2 with sigma_y = 1
        p, q = setup(0.5, 4.0, 0.0)  # 0.5 * (-9) + 10 * 0.25 < 0
        assert not feasibility(10.0, p, q)
        p, q = setup(0.5, 0.25, 0.0)  # -4.5 + 40 > 0
        assert feasibility(10.0, p, q)
        p, q = setup(0.0, 1.0, 0.0)  # (1-a) + a = 1
        assert feasibility(10.0, p, q)

    def test_infeasible_raises(self):
        p, q = setup(0.5, 4.0, 0.0)
        with pytest.raises(InfeasibleOrderError):
            ibar_closed(10.0, p, q)
        with pytest.raises(InfeasibleOrderError):
            ibar_oracle(10.0, p, q)


class TestClosedForm:
    @pytest.mark.parametrize(
        "a, rho_sq, ratio, gap, expected",
        [
            (0.5, 0.9, 0.5, 0.0, IBAR_A05_RHO09_R05),
            (0.5, 0.9, 2.0, 0.0, IBAR_A05_RHO09_R2),
            (10.0, 0.5, 1.5, 0.5, IBAR_A10_RHO05_R15_GAP05),
        ],
    )
    def test_frozen(self, a, rho_sq, ratio, gap, expected):
        p, q = setup(rho_sq, ratio, gap)
        assert ibar_closed(a, p, q) == pytest.approx(expected, abs=1e-12)

    @given(orders, rho_sqs)
    def test_zero_at_truth(self, a, rho_sq):
        p, q = setup(rho_sq, 1.0, 0.0)
        assert abs(ibar_closed(a, p, q)) <= 1e-12

    @given(orders, ratios, gaps)
    def test_independent_is_plain_divergence(self, a, ratio, gap):
        p, q = setup(0.0, ratio, gap)
        expected = renyi_divergence_gaussian(p.marginal_y(), q.as_gaussian(), a)
        assert ibar_closed(a, p, q) == pytest.approx(expected, rel=1e-10, abs=1e-12)

    @given(orders, rho_sqs, ratios, gaps)
    def test_matches_quadrature(self, a, rho_sq, ratio, gap):
        p, q = setup(rho_sq, ratio, gap)
        assert ibar_closed(a, p, q) == pytest.approx(ibar_oracle(a, p, q).value, abs=1e-7)

    @given(orders, ratios, gaps)
    def test_rho1_limit(self, a, ratio, gap):
        p, q = setup(1 - 1e-8, ratio, gap)
        assert ibar_closed(a, p, q) == pytest.approx(ibar_rho1(p, q), abs=1e-4)

    @given(st.floats(0.05, 0.95), rho_sqs, st.floats(0.25, 1.0), gaps)
    def test_nonnegative_for_narrow_ratio_below_one(self, a, rho_sq, ratio, gap):
        # prior at least as wide as p_y never beats it for orders below one
        p, q = setup(rho_sq, ratio, gap)
        assert ibar_closed(a, p, q) >= -1e-12

    def test_general_baseline(self):
        p, q = setup(0.6, 0.7, 1.2, mu_x=2.0, sigma_x=0.5, mu_y=-1.0, sigma_y=2.0)
        for a in (0.3, 0.8, 1.5):
            assert ibar_closed(a, p, q) == pytest.approx(ibar_oracle(a, p, q).value, abs=1e-9)


class TestOracle:
    def test_node_doubling(self):
        p, q = setup(0.75, 0.5, 1.0)
        r64 = ibar_oracle(0.5, p, q, budget=64)
        r128 = ibar_oracle(0.5, p, q, budget=128)
        assert abs(r64.value - r128.value) <= 1e-9
        assert r64.error <= 1e-9


@pytest.fixture(scope="module")
def small():
    grid = GmGrid(alphas=(0.5, 10.0), rho_sqs=(0.0, 0.5), var_ratios=(0.5, 1.0, 4.0), mean_gaps=(0.0, 1.0))
    return grid, sweep(grid)


class TestSweep:
    def test_size_and_order(self, small):
        grid, pts = small
        assert len(pts) == grid.size() == 24
        assert (pts[0].alpha, pts[0].rho_sq, pts[0].var_ratio, pts[0].mean_gap) == (0.5, 0.0, 0.5, 0.0)
        assert pts[1].mean_gap == 1.0

    def test_infeasible_cells_blank(self, small):
        _, pts = small
        bad = [pt for pt in pts if not pt.feasible]
        assert bad and all(pt.value is None and pt.abs_diff is None for pt in bad)

    def test_oracle_agreement(self, small):
        _, pts = small
        assert max(pt.abs_diff for pt in pts if pt.feasible) <= 1e-7

    def test_mapper_does_not_change_result(self, small):
        from concurrent.futures import ThreadPoolExecutor

        grid, pts = small
        with ThreadPoolExecutor(4) as ex:
            assert sweep(grid, mapper=ex.map) == pts

    def test_summary_counts(self, small):
        grid, pts = small
        rows = summarize(pts)
        assert len(rows) == 4
        assert sum(r["feasible"] + r["infeasible"] for r in rows) == grid.size()

    def test_departing_slices_keys(self, small):
        _, pts = small
        assert len(departing_slices(pts)) == 8

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            GmGrid(rho_sqs=(1.0,))
        with pytest.raises(ValueError):
            GmGrid(var_ratios=())
        with pytest.raises(ValueError):
            GmGrid.from_dict({"var_ratios": [0.0]})

    def test_from_dict(self):
        g = GmGrid.from_dict({"alphas": [0.5], "baseline": {"sigma_y": 2.0}})
        assert g.alphas == (0.5,) and g.baseline.sigma_y == 2.0


def test_negative_region_shrinks_with_gap():
    pts = sweep(with_oracle=False)
    grid = GmGrid()
    for a in grid.alphas:
        for rho_sq in grid.rho_sqs:
            counts = [
                sum(
                    1 for pt in pts
                    if (pt.alpha, pt.rho_sq, pt.mean_gap) == (a, rho_sq, g) and pt.var_ratio < 1 and pt.negative
                )
                for g in grid.mean_gaps
            ]
            assert all(np.diff(counts) <= 0), (a, rho_sq, counts)


def test_evaluate_point_without_oracle():
    pt = evaluate_point(0.5, 0.25, 2.0, 0.5, BivariateParams(), with_oracle=False)
    assert pt.feasible and pt.oracle_value is None and pt.value is not None
