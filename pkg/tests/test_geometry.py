import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab.errors import ResolutionError
from shearlab.geometry import (ChessboardSpec, InitialDatumSpec, SetDescriptor,
                               chessboard_value, level_sets, measure,
                               membership, sample_initial_datum)
from shearlab.rng import uniform_points


class TestChessboard:
    def test_base_board_values(self):
        # side 1/2: +1 when both coordinates share a half, else -1
        spec = ChessboardSpec(1, "even")
        assert chessboard_value(spec, (0.25, 0.25)) == 1
        assert chessboard_value(spec, (0.25, 0.75)) == -1
        assert chessboard_value(spec, (0.75, 0.75)) == 1
        assert chessboard_value(spec, (F(0), F(0))) == 1  # half-open cells

    def test_odd_parity_negates(self):
        even = ChessboardSpec(2, "even")
        odd = ChessboardSpec(2, "odd")
        pts = uniform_points(1, np.arange(500), 0)
        assert np.array_equal(even.value(pts[:, 0], pts[:, 1]),
                              -odd.value(pts[:, 0], pts[:, 1]))

    def test_mean_over_period_zero(self):
        spec = ChessboardSpec(4)
        n = 64
        y = (np.arange(n) + 0.5) / n
        v = spec.value(y[None, :], y[:, None])
        assert v.mean() == 0.0

    @given(st.integers(1, 16), st.floats(0, 0.999), st.floats(0, 0.999))
    @settings(max_examples=200, deadline=None)
    def test_shift_by_side_swaps_color(self, lam, x1, x2):
        spec = ChessboardSpec(lam)
        side = 1.0 / (2 * lam)
        assert spec.value(x1 + side, x2) == -spec.value(x1, x2)


class TestSets:
    def test_half_torus_at_zero_restriction(self):
        A = SetDescriptor(2, "A", F(0))
        assert measure(A) == F(1, 2)

    def test_closed_form_vs_cell_counting(self):
        A = SetDescriptor(2, "A", F(1, 32))
        assert measure(A) == 2 * F(2) ** 2 * (F(1, 4) - F(1, 16)) ** 2

    def test_paper_area_lower_bounds(self, flow):
        # measure(A_q) >= 1/2 - 10 eps-analog/side-ish; exact closed form here
        _, sched = flow
        for q in range(sched.q_max + 1):
            sets = level_sets(sched, q)
            mA, mB = measure(sets["A"]), measure(sets["B"])
            assert mA == mB
            eps_frac = sched.restriction[q] / sched.a[q]
            assert mA >= F(1, 2) * (1 - 2 * eps_frac) ** 2

    def test_empty_when_restriction_reaches_half_side(self):
        A = SetDescriptor(2, "A", F(1, 8))
        assert measure(A) == 0
        assert not membership(A, 0.05, 0.05)

    def test_A_and_B_disjoint(self):
        pts = uniform_points(7, np.arange(20000), 0)
        for eps in (0.0, 0.01):
            A = SetDescriptor(4, "A", eps)
            B = SetDescriptor(4, "B", eps)
            both = membership(A, pts[:, 0], pts[:, 1]) & membership(B, pts[:, 0], pts[:, 1])
            assert not both.any()

    @given(st.floats(0, 0.05), st.floats(0, 0.05))
    @settings(max_examples=60, deadline=None)
    def test_membership_monotone_in_restriction(self, e1, e2):
        lo, hi = min(e1, e2), max(e1, e2)
        pts = uniform_points(11, np.arange(2000), 0)
        inner = membership(SetDescriptor(2, "A", hi), pts[:, 0], pts[:, 1])
        outer = membership(SetDescriptor(2, "A", lo), pts[:, 0], pts[:, 1])
        assert not (inner & ~outer).any()

    def test_measure_matches_monte_carlo(self):
        desc = SetDescriptor(4, "A", F(1, 64))
        pts = uniform_points(13, np.arange(10**6), 0)
        frac = membership(desc, pts[:, 0], pts[:, 1]).mean()
        m = float(measure(desc))
        sigma = math.sqrt(m * (1 - m) / 10**6)
        assert abs(frac - m) <= 3 * sigma


class TestInitialDatum:
    def test_plateau_values_exact(self):
        ds = InitialDatumSpec(1, 1 / 32)
        # far from cell boundaries the datum is exactly +-1
        assert ds.value(0.25, 0.25) == 1.0
        assert ds.value(0.25, 0.75) == -1.0

    def test_sampled_field_invariants(self):
        ds = InitialDatumSpec(1, 1 / 32)
        th = sample_initial_datum(ds, 512)
        assert abs(th.mean()) < 1e-12
        assert np.abs(th).max() <= 1.0
        assert (th**2).mean() >= 0.75

    def test_l2_matches_1d_quadrature_oracle(self):
        ds = InitialDatumSpec(1, 1 / 32)
        th = sample_initial_datum(ds, 1024)
        # separable oracle: (int f^2)^2 with f the 1D mollified profile,
        # by composite Simpson on a fine grid
        m = 2**17
        y = np.arange(m) / m
        f2 = ds.profile(y) ** 2
        one_d = float(f2.mean())
        assert abs((th**2).mean() - one_d**2) / one_d**2 < 1e-8

    def test_under_resolved_grid_refused(self):
        ds = InitialDatumSpec(2, 1 / 64)
        with pytest.raises(ResolutionError):
            sample_initial_datum(ds, 128)
