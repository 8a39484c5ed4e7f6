import numpy as np

from shearlab.kernels import (FlatTopBump, MollifierSpec, bump_cdf,
                              mollifier_cdf, mollifier_cdf_direct,
                              mollifier_fourier, mollifier_invariants,
                              mollify_lattice_profile, smoothstep7)


def test_mollifier_paper_stated_properties():
    inv = mollifier_invariants()
    assert abs(inv["mass"] - 1.0) < 1e-10
    assert inv["sup"] <= 1.0
    assert inv["lipschitz"] <= 1.0
    z = np.array([-2.0, -2.1, 2.0, 2.5])
    from shearlab.kernels import mollifier_value
    assert np.all(mollifier_value(z) == 0.0)


def test_cdf_table_matches_direct_quadrature():
    z = np.linspace(-2.2, 2.2, 4001)
    assert np.abs(mollifier_cdf(z) - mollifier_cdf_direct(z)).max() < 1e-13


def test_fourier_at_zero_is_mass():
    assert abs(mollifier_fourier(np.array([0.0]))[0] - 1.0) < 1e-12
    # transform of a self-convolution is nonnegative
    om = np.linspace(0, 60, 200)
    assert mollifier_fourier(om).min() >= -1e-15


def test_scaled_kernel_mass_and_support():
    spec = MollifierSpec(1 / 64)
    x = np.linspace(-0.05, 0.05, 20001)
    mass = np.trapezoid(spec.value(x), x)
    assert abs(mass - 1.0) < 1e-8
    assert spec.support_radius == 2 / 64
    assert spec.value(np.array([0.04]))[0] == 0.0


def test_lattice_profile_plateaus_exact():
    spec = MollifierSpec(1 / 256)

    def raw(y):
        return np.where(np.floor(np.asarray(y) * 8) % 2 == 0, 3.0, -3.0)

    y = np.array([1 / 16, 3 / 16, 0.5 + 1 / 16])  # plateau midpoints
    out = mollify_lattice_profile(y, 1 / 8, raw, spec)
    assert np.array_equal(out, raw(y))
    # collar value sits strictly between the plateaus
    mid = mollify_lattice_profile(np.array([1 / 8]), 1 / 8, raw, spec)[0]
    assert -3.0 < mid < 3.0
    assert abs(mid) < 1e-10  # jump midpoint = average of the sides


def test_smoothstep_symmetry():
    u = np.linspace(0, 1, 101)
    assert np.abs(smoothstep7(u) + smoothstep7(1 - u) - 1.0).max() < 1e-12


def test_flat_top_bump_mass_and_ck():
    b = FlatTopBump(center=0.5, half_width=1 / 3, mass=0.5)
    t = np.linspace(0.5 - 1 / 3, 0.5 + 1 / 3, 400001)
    assert abs(np.trapezoid(b(t), t) - 0.5) < 1e-10
    assert b.amplitude <= 1.0
    assert abs(b.measure_ck(1) - b.derivative_bound()) / b.derivative_bound() < 1e-4


def test_flat_top_ck_budgets_for_short_slots():
    # mixing-slot budget (1/t)^2k at k = 1, 2 holds once t is small
    t_q = 1 / 64
    b = FlatTopBump(center=0.0, half_width=t_q / 3, mass=t_q / 2)
    assert b(np.array([0.0]))[0] <= 1.0
    assert b.measure_ck(1) <= (1 / t_q) ** 2
    assert b.measure_ck(2, n=400001) <= (1 / t_q) ** 4


def test_bump_cdf_range():
    z = np.linspace(-1.5, 1.5, 1001)
    c = bump_cdf(z)
    assert c.min() >= 0.0 and c.max() <= 1.0
    assert np.all(np.diff(c) >= -1e-15)
