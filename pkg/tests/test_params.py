from fractions import Fraction as F

import pytest

from shearlab.errors import ScheduleError, ValidationError
from shearlab.params import (CascadeSchedule, DeskSpec, ParameterSet, PowerValue,
                             derive_schedule, diffusivity_sequences,
                             gamma_formula, goal_inequalities,
                             make_strict_parameters, search_exponents,
                             strict_dissipative_exponent_checks,
                             validate_constraints)


def beta0_strict(delta=F(1, 4)):
    return make_strict_parameters(alpha=0, beta=0, p=None, p_circ=2,
                                  epsilon=delta**3 / 50, delta=delta)


class TestValidation:
    def test_beta0_example_all_pass(self):
        # alpha=0, beta=0, p=inf, p_circ=2, delta=1/4, eps=delta^3/50, gamma=delta/8
        ps = beta0_strict()
        assert ps.gamma == ps.delta / 8
        rep = validate_constraints(ps)
        assert rep.passed

    def test_supercritical_boundary_fails(self):
        ps = beta0_strict()
        ps.alpha, ps.beta = F(1), F(1, 2)
        rep = validate_constraints(ps)
        assert not rep["supercritical"].satisfied
        assert not rep.passed

    def test_field_range_errors_name_the_field(self):
        ps = beta0_strict()
        ps.p_circ = F(5)
        with pytest.raises(ValidationError, match="p_circ"):
            validate_constraints(ps)
        ps = beta0_strict()
        ps.epsilon = F(0)
        with pytest.raises(ValidationError, match="epsilon"):
            validate_constraints(ps)

    def test_search_finds_exponents(self):
        for alpha, beta, pc in [(F(1, 3), F(1, 5), F(3)), (F(0), F(0), F(2)),
                                (F(1, 2), F(1, 5), F(3))]:
            ps, rep = search_exponents(alpha, beta, p_circ=pc)
            assert rep.passed
            assert ps.epsilon <= ps.delta**3 / 50

    def test_search_proves_infeasibility(self):
        with pytest.raises(ValidationError, match="fails for every choice"):
            search_exponents(1, F(1, 2))

    def test_exact_arithmetic_reproducible(self):
        ps = beta0_strict()
        r1 = validate_constraints(ps)
        r2 = validate_constraints(ps)
        assert [e.margin for e in r1.entries] == [e.margin for e in r2.entries]

    def test_desk_reports_relaxed(self, small_schedule):
        ps, _ = small_schedule
        rep = validate_constraints(ps)
        assert rep.passed  # structural only
        assert "eps_cube_7c" in rep.relaxed()


class TestStrictSchedule:
    def test_superexponential_scales(self):
        ps = beta0_strict()
        s = derive_schedule(ps, 2)
        # a_1 = a_0^(1+delta) = a_0^(5/4) for delta = 1/4
        assert s.a[1] == ps.a0_power(F(5, 4)).materialize()
        assert s.T[0] < 1
        assert s.tiling_defect() == 0
        # intervals: |I_{q,2}| = t_q exactly, window length tbar
        for q in range(2):
            b = s.stage_breaks(q)
            assert b[3] - b[2] == s.t[q]
            assert b[1] - b[0] == s.tbar[q]

    def test_tail_superexponentially_small(self):
        ps = beta0_strict()
        s = derive_schedule(ps, 2)
        assert s.tail_bound < F(1, 10**9) * s.T[1]

    def test_diffusivity_exponent_checks(self):
        ps = beta0_strict()
        checks = strict_dissipative_exponent_checks(ps, 3)
        assert checks["ad_first"][0] and checks["ad_first"][1] >= 0
        assert checks["ad_second"][0] and checks["ad_second"][1] >= 0

    def test_strict_dissipate_group_lower_bound(self):
        # kappa_tilde_q lam_q^2 tbar_q = (1/4) a_q^x with x <= -eps e_q,
        # i.e. dissipate >= a_q^(-eps)/4, via exact exponent arithmetic
        ps = beta0_strict()
        opd = 1 + ps.delta
        ek = 2 - ps.gamma / opd + 4 * ps.epsilon
        for q in [0, ps.m]:
            x = ek * opd**q - 2 * opd**q + (ps.gamma - ps.gamma * ps.delta) * opd**q
            assert x <= -ps.epsilon * opd**q

    def test_kappa_sequences_are_powers(self):
        ps = beta0_strict()
        s = derive_schedule(ps, 1)
        seqs = diffusivity_sequences(ps, s)
        assert isinstance(seqs.kappa_tilde[0], PowerValue)
        # strictly decreasing in the exponent domain (larger exponent = smaller)
        assert seqs.kappa_tilde[1].le(seqs.kappa_tilde[0])
        assert seqs.kappa[1].le(seqs.kappa[0])
        assert seqs.sigma[1].le(seqs.sigma[0])


class TestDeskSchedule:
    def test_ratio_must_be_multiple_of_four(self):
        spec = DeskSpec(a0=F(1, 4), ratios=[6], t=[F(1, 8)], tbar=[F(1, 8)],
                        moll_scale=[F(1, 32), F(1, 64)])
        ps = ParameterSet(p=None, p_circ=F(2), alpha=F(0), beta=F(0),
                          epsilon=F(1, 64), delta=F(1, 8), gamma=F(1, 2), m=1,
                          a0=F(1, 4), mode="desk", desk=spec)
        with pytest.raises(ScheduleError, match="multiple of 4"):
            derive_schedule(ps, 1)

    def test_does_not_fit_before_one(self):
        spec = DeskSpec(a0=F(1, 4), ratios=[4], t=[F(1, 4)], tbar=[F(1, 2)],
                        moll_scale=[F(1, 32), F(1, 64)])
        ps = ParameterSet(p=None, p_circ=F(2), alpha=F(0), beta=F(0),
                          epsilon=F(1, 64), delta=F(1, 8), gamma=F(1, 2), m=1,
                          a0=F(1, 4), mode="desk", desk=spec)
        with pytest.raises(ScheduleError, match="does not fit"):
            derive_schedule(ps, 1)

    def test_dyadic_endpoints_and_tiling(self, spectral):
        _, sched = spectral
        assert sched.tiling_defect() == 0
        for q in range(sched.q_max):
            for b in sched.stage_breaks(q):
                assert (b.denominator & (b.denominator - 1)) == 0  # dyadic

    def test_interval_reflection(self, spectral):
        _, sched = spectral
        lo, hi = sched.interval_I(0, 2)
        jlo, jhi = sched.interval_J(0, 2)
        assert jlo == 2 - hi and jhi == 2 - lo

    def test_window_lattice(self):
        spec = DeskSpec(a0=F(1, 4), ratios=[4, 4], t=[F(1, 8), F(1, 16)],
                        tbar=[F(1, 8), F(1, 16)],
                        moll_scale=[F(1, 32), F(1, 64), F(1, 128)])
        ps = ParameterSet(p=None, p_circ=F(2), alpha=F(0), beta=F(0),
                          epsilon=F(1, 64), delta=F(1, 8), gamma=F(1, 2), m=2,
                          a0=F(1, 4), mode="desk", desk=spec)
        with pytest.raises(ScheduleError, match="off the m-lattice"):
            derive_schedule(ps, 2)  # tbar_1 > 0 but 1 not a multiple of 2


class TestGoalGroups:
    def test_zero_kappa_gives_zero_groups(self, spectral):
        _, sched = spectral
        g = goal_inequalities(sched, 0.0, 1)
        assert g.close_flows == g.dissipate == g.ito_tanaka == g.survive == 0.0

    def test_desk_dissipate_solves_to_target(self, spectral):
        ps, sched = spectral
        seqs = diffusivity_sequences(ps, sched, dissipate_target=5.0)
        for q in range(sched.q_max):
            if sched.has_window(q):
                g = goal_inequalities(sched, seqs.kappa_tilde[q], q)
                assert abs(g.dissipate - 5.0) < 1e-9

    def test_q_range_enforced(self, spectral):
        _, sched = spectral
        with pytest.raises(ValidationError):
            goal_inequalities(sched, 1.0, sched.q_max)

    def test_monotone_sequences(self, spectral):
        ps, sched = spectral
        seqs = diffusivity_sequences(ps, sched)
        for xs in (seqs.kappa_tilde, seqs.kappa, seqs.sigma):
            assert all(b < a for a, b in zip(xs, xs[1:]))
