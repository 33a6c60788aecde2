"""Cost assembly, paging partition, and the joint optimization."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamopt.config import default_mobility
from lamopt.costs import (
    CostParams,
    build_paging_plan,
    cost_breakdown,
    joint_optimize,
    paging_breakdown_at,
    paging_cost,
    region_areas,
    saving_ratio,
    update_cost,
    wedge_indices,
)
from lamopt.errors import DomainError, GeometryError
from lamopt.mobility import DiffusionParams, compute_diffusion
from lamopt.pde import DiscGrid, ScalarField, solve_mean_interval

COSTS = CostParams(lam=2.0, U=20.0, V=1.0)


class TestUpdateCost:
    def test_unit(self):
        assert update_cost(20.0, 20.0) == 1.0

    def test_rejects_nonpositive_interval(self):
        with pytest.raises(DomainError):
            update_cost(0.0, 20.0)


class TestPagingPlan:
    def test_specific_assignment(self):
        plan = build_paging_plan(4, 0.5)
        rest = (math.pi - 0.5) / 3
        assert plan.angles == pytest.approx((0.5, rest, rest, rest))

    def test_wide_spread_clamps_to_half_turn(self):
        # uniform directions have angle variance pi^2/3 > pi
        plan = build_paging_plan(3, math.pi**2 / 3)
        assert plan.angles == pytest.approx((math.pi, 0.0, 0.0))

    def test_single_round_ignores_spread(self):
        assert build_paging_plan(1, 2.7).angles == (math.pi,)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=1, max_value=12),
           st.floats(min_value=0.0, max_value=12.0))
    def test_angles_always_telescope(self, m, var_theta):
        plan = build_paging_plan(m, var_theta)
        assert sum(plan.angles) == pytest.approx(math.pi, abs=1e-12)
        assert all(a >= 0.0 for a in plan.angles)

    def test_validation(self):
        with pytest.raises(DomainError):
            build_paging_plan(0, 1.0)
        with pytest.raises(DomainError):
            build_paging_plan(2, -0.1)


class TestRegionGeometry:
    def test_areas_tile_disc(self):
        for anchor in (0.0, -0.5, 0.4):
            plan = build_paging_plan(4, 0.8, anchor_x=anchor)
            areas = region_areas(plan, 1.0)
            assert areas.sum() == pytest.approx(math.pi, rel=1e-9)
            assert np.all(areas > 0.0)

    def test_centered_single_wedge_pair(self):
        # centered anchor: areas proportional to angles
        plan = build_paging_plan(2, 1.0, anchor_x=0.0)
        areas = region_areas(plan, 1.0)
        assert areas[0] == pytest.approx(1.0, rel=1e-9)  # angle/pi * pi R^2
        assert areas[1] == pytest.approx(math.pi - 1.0, rel=1e-9)

    def test_anchor_outside_rejected(self):
        plan = build_paging_plan(2, 1.0, anchor_x=1.5)
        with pytest.raises(GeometryError):
            region_areas(plan, 1.0)

    def test_wedge_classification(self):
        plan = build_paging_plan(3, 1.0, anchor_x=-0.2)
        idx = wedge_indices(plan, [0.5, -0.2, -0.9], [0.0, 0.7, 0.01])
        assert idx[0] == 0      # straight ahead
        assert idx[1] == 1      # overhead of the anchor: angle pi/2
        assert idx[2] == 2      # almost straight behind


@pytest.fixture(scope="module")
def uniform_density():
    grid = DiscGrid(1.0, 1.0 / 64)
    return ScalarField(grid, np.full(grid.n_nodes, 1.0 / math.pi))


class TestPagingCost:
    def test_single_round_whole_disc(self, uniform_density):
        plan = build_paging_plan(1, 0.3)
        c_p, p_i, a_i = paging_cost(plan, uniform_density, 2.0, 1.0, "paper")
        assert c_p == pytest.approx(2.0 * math.pi)
        assert a_i == (pytest.approx(math.pi),)
        c_pc, _, _ = paging_cost(plan, uniform_density, 2.0, 1.0, "cumulative")
        assert c_pc == c_p

    def test_uniform_density_identity(self, uniform_density):
        # with uniform mass the staged cost is lam V sum A_i^2 / (pi R^2),
        # always at most the whole-disc cost
        plan = build_paging_plan(4, 0.8)
        c_p, p_i, a_i = paging_cost(plan, uniform_density, 2.0, 1.0, "paper")
        ident = 2.0 * sum(a * a for a in a_i) / math.pi
        assert c_p == pytest.approx(ident, rel=2e-3)
        assert c_p <= 2.0 * math.pi

    def test_cumulative_at_least_paper_mode(self, uniform_density):
        plan = build_paging_plan(4, 0.8)
        c_paper, _, _ = paging_cost(plan, uniform_density, 2.0, 1.0, "paper")
        c_cum, _, _ = paging_cost(plan, uniform_density, 2.0, 1.0, "cumulative")
        assert c_cum >= c_paper  # cumulative polling re-pages earlier wedges

    def test_masses_do_not_exceed_survival(self):
        mob = default_mobility(0.5)
        breakdown = paging_breakdown_at(mob, CostParams(lam=2.0, U=20.0, V=1.0, m=3),
                                        x=-0.2, R=1.0, grid_nodes=48)
        assert sum(breakdown.P_i) <= 1.0 + 1e-9
        assert breakdown.C_t == pytest.approx(breakdown.C_u + breakdown.C_p)

    def test_mode_validation(self, uniform_density):
        with pytest.raises(DomainError):
            paging_cost(build_paging_plan(2, 0.4), uniform_density, 1.0, 1.0,
                        "sideways")


class TestJointOptimize:
    def test_asymptotic_weak_default(self):
        r = joint_optimize(default_mobility(0.0), COSTS, "asymptotic")
        assert r.r_opt == pytest.approx(1.0346, rel=1e-3)

    def test_asymptotic_strong_default(self):
        r = joint_optimize(default_mobility(1e6), COSTS, "asymptotic")
        assert r.r_opt == pytest.approx(1.9276, rel=1e-3)
        assert r.x_opt < -0.9 * r.r_opt

    def test_offset_never_beats_center(self):
        for provider in ("galerkin", "asymptotic"):
            for k in (0.1, 2.0, 1e6):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    opt = joint_optimize(default_mobility(k), COSTS, provider)
                    ctr = joint_optimize(default_mobility(k), COSTS, provider,
                                         baseline="center")
                assert opt.c_min <= ctr.c_min * (1 + 1e-9)

    def test_perturbing_radius_increases_cost(self):
        mob = default_mobility(0.5)
        from lamopt.approx import galerkin_interval, optimal_offset

        def cost_at(R, centered):
            sol = galerkin_interval(mob, R, COSTS.lam)
            x = 0.0 if centered else optimal_offset(sol.a, R)
            t = float(sol.interval(x, 0.0))
            return COSTS.U / t + COSTS.lam * math.pi * R * R * COSTS.V

        for baseline, centered in (("offset", False), ("center", True)):
            opt = joint_optimize(mob, COSTS, "galerkin", baseline=baseline)
            assert cost_at(opt.r_opt * 1.05, centered) > opt.c_min
            assert cost_at(opt.r_opt * 0.95, centered) > opt.c_min

    def test_pde_provider_runs(self):
        r = joint_optimize(default_mobility(0.5), COSTS, "pde",
                           r_bounds=(0.3, 4.0), scan_points=9, pde_nodes=32)
        assert 0.3 < r.r_opt < 4.0
        assert r.x_opt < 0.0
        assert r.c_min > 0.0

    def test_validation(self):
        with pytest.raises(DomainError):
            joint_optimize(default_mobility(0.5), COSTS, "magic")
        with pytest.raises(DomainError):
            joint_optimize(default_mobility(0.5),
                           CostParams(lam=0.0, U=20.0, V=1.0), "galerkin")


class TestSavingRatio:
    def test_vanishes_without_drift(self):
        s = saving_ratio(default_mobility(1e-4), COSTS, "galerkin")
        assert abs(s) < 1e-3

    def test_asymptotic_strong_limit(self):
        s = saving_ratio(default_mobility(1e6),
                         CostParams(lam=0.01, U=20.0, V=1.0), "asymptotic")
        assert s == pytest.approx(1.0 - 4.0 ** (-1 / 3), abs=1e-3)

    def test_bounded_and_reaches_moderate_levels(self):
        vals = {}
        for k in (0.1, 2.0, 20.0, 100.0):
            vals[k] = saving_ratio(default_mobility(k), COSTS, "galerkin")
        assert all(-1e-9 <= v <= 0.37 + 0.01 for v in vals.values())
        assert max(vals.values()) >= 0.25
        # the 37% ceiling also holds at low call rates, for both providers
        low = CostParams(lam=0.2, U=20.0, V=1.0)
        for k in (2.0, 20.0, 1e6):
            for provider in ("galerkin", "asymptotic"):
                s = saving_ratio(default_mobility(k), low, provider)
                assert -1e-9 <= s <= 0.37 + 0.01

    def test_update_cost_grows_with_call_rate(self):
        mob = default_mobility(0.5)
        c_us = []
        for lam in (0.2, 1.0, 3.0):
            opt = joint_optimize(mob, CostParams(lam=lam, U=20.0, V=1.0),
                                 "galerkin")
            c_us.append(COSTS.U / opt.t_opt)
        assert c_us[0] < c_us[1] < c_us[2]


class TestCostBreakdown:
    def test_assembly(self):
        grid = DiscGrid(1.0, 1.0 / 32)
        density = ScalarField(grid, np.full(grid.n_nodes, 0.9 / math.pi))
        plan = build_paging_plan(2, 0.5)
        b = cost_breakdown(0.4, CostParams(lam=1.0, U=10.0, V=2.0, m=2),
                           plan, density)
        assert b.C_u == pytest.approx(25.0)
        assert b.C_t == b.C_u + b.C_p
        assert len(b.P_i) == len(b.A_i) == 2
