from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import boundhit.fd as fd
from boundhit.fd import (ConvergenceError, FieldGrid, Grid, SchemeConfig,
                         assemble, filtered_correction, gamma_num, lambda_term,
                         relax_row, solve, solve_from, solve_linear_direct,
                         third_order_diffs)
from boundhit.model import BoundarySpec, ModelParams, OmegaSpec, boundary_f, rho

NOMINAL = ModelParams(eta=0.1)
LINEAR = OmegaSpec("linear")
TANH = OmegaSpec("tanh", 0.5)
F1 = BoundarySpec("f1")
F2 = BoundarySpec("f2")
F3 = BoundarySpec("f3")


def rng_field(N: int, seed: int, lo: float = 0.0, hi: float = 1.0) -> FieldGrid:
    g = np.random.default_rng(seed)
    return FieldGrid(N, g.uniform(lo, hi, (N + 1, N + 1)))


class TestGridTypes:
    def test_grid_geometry(self):
        g = Grid(4)
        assert g.h == 0.25
        assert g.x(2) == 0.5
        assert g.z(4) == 1.0

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            Grid(3)

    def test_field_validation(self):
        with pytest.raises(ValueError):
            FieldGrid(4, np.zeros((4, 5)))
        bad = np.zeros((5, 5))
        bad[2, 2] = np.inf
        with pytest.raises(ValueError):
            FieldGrid(4, bad)

    def test_field_ghost_accessor(self):
        f = rng_field(4, 0)
        assert f.at(2, 3) == f.values[2, 3]
        assert f.at(-1, 2) == 0.0
        assert f.at(2, 5) == 0.0

    def test_scheme_config_validation(self):
        with pytest.raises(ValueError):
            SchemeConfig(scheme="fancy")
        with pytest.raises(ValueError):
            SchemeConfig(w=1.0)
        with pytest.raises(ValueError):
            SchemeConfig(tol=0.0)
        with pytest.raises(ValueError):
            SchemeConfig(check_every=0)


class TestGammaNum:
    def test_nominal_n100(self):
        nodes = gamma_num(NOMINAL, Grid(100))
        js = sorted(j for _, j in nodes)
        assert all(i == 100 for i, _ in nodes)
        assert js[0] == 43 and js[-1] == 100 and len(js) == 58

    def test_threshold_node_excluded(self):
        # z = 0.42 lands on a node at N=50; strict comparison leaves it out
        nodes = gamma_num(NOMINAL, Grid(50))
        js = {j for _, j in nodes}
        assert 21 not in js and 22 in js


class TestAssemble:
    def test_reference_values(self):
        co = assemble(2, 4, FieldGrid.zeros(4), NOMINAL, LINEAR, F1, Grid(4))
        assert co.A == pytest.approx(0.32, abs=1e-12)
        assert co.B == pytest.approx(4.32, abs=1e-12)
        assert co.C == pytest.approx(2.4, abs=1e-12)
        assert co.D == 0.0 and co.E == 0.0

    def test_edges_degenerate(self):
        g = Grid(4)
        V = FieldGrid.zeros(4)
        co0 = assemble(0, 1, V, NOMINAL, LINEAR, F1, g)
        # x=0: diffusion gone, drift positive, so only the forward link
        assert co0.A == 0.0 and co0.B > 0.0
        coN = assemble(4, 1, V, NOMINAL, LINEAR, F1, g)
        assert coN.B == 0.0 and coN.A > 0.0

    def test_bottom_row_no_drive_link(self):
        co = assemble(2, 0, FieldGrid.zeros(4), NOMINAL, LINEAR, F1, Grid(4))
        assert co.C == 0.0

    def test_dirichlet_row(self):
        g = Grid(4)
        co = assemble(4, 4, FieldGrid.zeros(4), NOMINAL, LINEAR, F2, g)
        assert (co.A, co.B, co.C) == (0.0, 0.0, 0.0)
        assert co.D == 1.0
        assert co.E == boundary_f(F2, 1.0, NOMINAL)

    @given(st.integers(0, 8), st.integers(0, 8), st.integers(0, 3))
    @settings(max_examples=200, deadline=None)
    def test_coefficients_nonnegative(self, i, j, seed):
        V = rng_field(8, seed)
        co = assemble(i, j, V, NOMINAL, TANH, F2, Grid(8))
        assert co.A >= 0.0 and co.B >= 0.0 and co.C >= 0.0

    def test_index_validation(self):
        with pytest.raises(IndexError):
            assemble(5, 0, FieldGrid.zeros(4), NOMINAL, LINEAR, F1, Grid(4))


class TestLambdaTerm:
    def test_reference_value(self):
        lam = lambda_term(2, 4, 0.5, 0.25, ModelParams(), TANH, Grid(4))
        assert lam == pytest.approx(0.52848, abs=5e-6)

    def test_linear_shape(self):
        lam = lambda_term(2, 4, 0.8, 0.5, ModelParams(), LINEAR, Grid(4))
        assert lam == pytest.approx(0.72, abs=1e-12)

    def test_trivial_zeros(self):
        assert lambda_term(2, 4, 0.7, 0.7, ModelParams(), TANH, Grid(4)) == 0.0
        assert lambda_term(2, 0, 0.7, 0.2, ModelParams(), TANH, Grid(4)) == 0.0

    def test_degenerate_ellipticity_signs(self):
        # centered differences in each argument keep the monotone signs
        rng = np.random.default_rng(11)
        g = Grid(20)
        h = 1e-6
        for _ in range(300):
            vc, vb = rng.uniform(-0.5, 1.5, 2)
            j = int(rng.integers(0, 21))
            d_c = (lambda_term(5, j, vc + h, vb, ModelParams(), TANH, g)
                   - lambda_term(5, j, vc - h, vb, ModelParams(), TANH, g)) / (2 * h)
            d_b = (lambda_term(5, j, vc, vb + h, ModelParams(), TANH, g)
                   - lambda_term(5, j, vc, vb - h, ModelParams(), TANH, g)) / (2 * h)
            assert d_c >= -1e-8
            assert d_b <= 1e-8

    def test_matches_coefficient_form(self):
        # Lambda = C(v_center, v_below) * (v_center - v_below)/h with the
        # larger-argument evaluation inside C
        from boundhit.model import omega_bar
        p = ModelParams()
        g = Grid(10)
        for vc, vb, j in ((0.8, 0.2, 7), (0.1, 0.9, 4), (0.55, 0.55, 9)):
            z = g.z(j)
            czr = 2 * p.delta * p.R * (p.beta * z + 1.0) * z
            expected = czr * omega_bar(TANH, vc, vb) * (vc - vb) / g.h
            assert lambda_term(3, j, vc, vb, p, TANH, g) == pytest.approx(
                expected, abs=1e-12)


class TestThirdOrderDiffs:
    def test_exact_on_cubics(self):
        N = 20
        g = Grid(N)
        xs = np.linspace(0.0, 1.0, N + 1)
        vals = np.add.outer(xs ** 3, 0.5 * xs ** 3)
        V = FieldGrid(N, vals)
        for i, j in ((5, 10), (10, 5), (15, 17)):
            x, z = g.x(i), g.z(j)
            d2x_f, d2z = third_order_diffs(i, j, V, 1.0)
            assert d2x_f == pytest.approx(3 * x * x, abs=1e-9)
            assert d2z == pytest.approx(1.5 * z * z, abs=1e-9)
            d2x_b, _ = third_order_diffs(i, j, V, -1.0)
            assert d2x_b == pytest.approx(3 * x * x, abs=1e-9)

    def test_stencil_range(self):
        V = FieldGrid.zeros(10)
        with pytest.raises(IndexError):
            third_order_diffs(2, 5, V, 1.0)
        with pytest.raises(IndexError):
            third_order_diffs(8, 5, V, 1.0)
        with pytest.raises(IndexError):
            third_order_diffs(5, 2, V, 1.0)


class TestFilteredCorrection:
    def test_vanishes_on_affine_fields(self):
        N = 20
        xs = np.linspace(0.0, 1.0, N + 1)
        V = FieldGrid(N, np.add.outer(0.3 * xs, 0.5 * xs) + 0.1)
        worst = max(abs(filtered_correction(i, j, V, NOMINAL, LINEAR, Grid(N)))
                    for i in range(N + 1) for j in range(N + 1))
        assert worst <= 1e-12

    @given(st.integers(0, 12), st.integers(0, 12), st.integers(0, 5))
    @settings(max_examples=150, deadline=None)
    def test_bounded_by_filter_scale(self, i, j, seed):
        # the filter clamps each component to [-sqrt(h), sqrt(h)]
        V = rng_field(12, seed, -1.0, 2.0)
        g = Grid(12)
        corr = filtered_correction(i, j, V, NOMINAL, TANH, g)
        assert abs(corr) <= 2.0 * math.sqrt(g.h) + 1e-15

    def test_rough_field_filtered_out(self):
        # a +-1 checkerboard drives the high-order deviation far past the
        # filter window, so the correction collapses to zero
        N = 12
        vals = np.indices((N + 1, N + 1)).sum(axis=0) % 2 * 2.0 - 1.0
        V = FieldGrid(N, vals.astype(float))
        g = Grid(N)
        assert filtered_correction(6, 6, V, NOMINAL, LINEAR, g) == 0.0


class TestRelaxRow:
    def test_converges_and_reports(self):
        V = FieldGrid.zeros(20)
        iters, change = relax_row(0, V, NOMINAL, LINEAR, F1, Grid(20),
                                  SchemeConfig())
        assert iters >= 1
        assert change <= 1e-12

    def test_raises_on_iteration_cap(self):
        V = FieldGrid.zeros(50)
        p = ModelParams(eta=0.0)
        cfg = SchemeConfig(check_every=10, max_iters=20)
        with pytest.raises(ConvergenceError):
            for j in range(51):
                relax_row(j, V, p, LINEAR, F1, Grid(50), cfg)

    def test_row_mismatch(self):
        with pytest.raises(ValueError):
            relax_row(0, FieldGrid.zeros(10), NOMINAL, LINEAR, F1, Grid(20),
                      SchemeConfig())


class TestSolve:
    def test_against_direct_elimination(self):
        g = Grid(20)
        V, _ = solve(NOMINAL, LINEAR, F1, g, SchemeConfig())
        Vd = solve_linear_direct(NOMINAL, F1, g)
        assert np.abs(V.values - Vd.values).max() <= 1e-11

    def test_sub_threshold_rows_exactly_zero(self):
        g = Grid(50)
        V, _ = solve(NOMINAL, LINEAR, F1, g, SchemeConfig())
        r = rho(NOMINAL)
        for j in range(51):
            if j / 50 <= r:
                assert np.all(V.values[:, j] == 0.0)

    def test_boundary_nodes_carry_payoff_exactly(self):
        g = Grid(20)
        V, _ = solve(NOMINAL, LINEAR, F2, g, SchemeConfig())
        for i, j in gamma_num(NOMINAL, g):
            assert V.values[i, j] == boundary_f(F2, g.z(j), NOMINAL)

    def test_bounded_by_payoff_range(self):
        V, _ = solve(NOMINAL, LINEAR, F1, Grid(40), SchemeConfig())
        assert V.values.min() >= 0.0
        assert V.values.max() <= 1.0

    def test_deterministic(self):
        a, _ = solve(NOMINAL, LINEAR, F3, Grid(30), SchemeConfig())
        b, _ = solve(NOMINAL, LINEAR, F3, Grid(30), SchemeConfig())
        assert np.array_equal(a.values, b.values)

    def test_initial_guess_irrelevant(self):
        g = Grid(50)
        cfg = SchemeConfig(check_every=1000)
        V0, _ = solve(NOMINAL, LINEAR, F1, g, cfg)
        ones = FieldGrid(50, np.ones((51, 51)))
        V1, _ = solve_from(ones, NOMINAL, LINEAR, F1, g, cfg)
        assert np.abs(V0.values - V1.values).max() <= 1e-9

    def test_report_contents(self):
        V, rep = solve(NOMINAL, LINEAR, F1, Grid(20), SchemeConfig())
        assert rep.total_iterations == int(np.sum(rep.iterations))
        assert rep.wall_time > 0.0
        assert np.all(np.asarray(rep.residuals) <= 1e-12)

    def test_nonlinear_feedback_lowers_value(self):
        # omega <= 1 slows the drive decay less ... the tanh feedback keeps
        # omega below 1 where V is small, weakening decay and raising V
        g = Grid(40)
        lin, _ = solve(NOMINAL, LINEAR, F2, g, SchemeConfig())
        non, _ = solve(NOMINAL, TANH, F2, g, SchemeConfig())
        assert not np.array_equal(lin.values, non.values)
        assert non.values.min() >= -1e-12

    def test_filtered_zero_matches_monotone_bitwise(self):
        g = Grid(50)
        Vm, _ = solve(NOMINAL, LINEAR, F1, g, SchemeConfig(scheme="monotone"))
        Vz, _ = solve(NOMINAL, LINEAR, F1, g,
                      SchemeConfig(scheme="filtered", filter_zero=True))
        assert np.array_equal(Vm.values, Vz.values)

    def test_filtered_differs_from_monotone(self):
        g = Grid(50)
        Vm, _ = solve(NOMINAL, LINEAR, F3, g, SchemeConfig(scheme="monotone"))
        Vf, _ = solve(NOMINAL, LINEAR, F3, g, SchemeConfig(scheme="filtered"))
        assert not np.array_equal(Vm.values, Vf.values)

    def test_non_convergence_raises_with_row(self):
        with pytest.raises(ConvergenceError) as exc:
            solve(ModelParams(eta=0.0), LINEAR, F1, Grid(50),
                  SchemeConfig(check_every=100, max_iters=200))
        assert exc.value.row >= 0


class TestDirect:
    def test_needs_positive_discount(self):
        with pytest.raises(ValueError):
            solve_linear_direct(ModelParams(eta=0.0), F1, Grid(10))

    def test_discount_override(self):
        g = Grid(20)
        a = solve_linear_direct(ModelParams(eta=0.0), F1, g, eta=0.1)
        b = solve_linear_direct(NOMINAL, F1, g)
        assert np.array_equal(a.values, b.values)

    def test_discount_damps_value(self):
        g = Grid(20)
        lo = solve_linear_direct(ModelParams(eta=0.5), F1, g)
        hi = solve_linear_direct(ModelParams(eta=0.05), F1, g)
        interior = np.s_[1:-1, 1:-1]
        assert np.all(lo.values[interior] <= hi.values[interior] + 1e-14)
