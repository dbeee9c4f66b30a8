import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmt_uncertainty import (
    DimensionMismatch,
    GaussianChirp,
    Grid,
    NyquistViolated,
    SampledSignal,
    TooLarge,
    fmt_apply,
    fmt_direct,
    fmt_gradient,
    inverse,
    lp_norm,
    normalize,
    plan_fmt,
    random_free,
    sample_gaussian_chirp,
    sigma_via_wigner,
    special_matrix,
    wigner,
    wigner_moments,
)
from fmt_uncertainty.transform import band_edge_fraction, natural_out_grid

from helpers import STRICT_BAND, fitted_signal, phase_aligned_residual, rel_l2, sublattice


def _unit_gaussian(n: int, samples: int = 64, half: float = 4.0):
    """``2^{N/4} e^{-π|x|²}`` on a box; it is its own Fourier transform."""
    grid = Grid.box([samples] * n, half)
    x = grid.coords()
    return SampledSignal(grid, 2 ** (n / 4) * np.exp(-math.pi * (x**2).sum(axis=0)))


@pytest.mark.parametrize("n", [1, 2])
def test_fourier_of_unit_gaussian(n):
    f = _unit_gaussian(n)
    out = fmt_apply(plan_fmt(special_matrix("fourier", n), f.grid), f)
    u = out.grid.coords()
    expected = 2 ** (n / 4) * np.exp(-math.pi * (u**2).sum(axis=0))
    assert np.max(np.abs(np.abs(out.values) - expected)) < 1e-6
    # the phase constant is 1/i^{N/2}
    assert np.allclose(out.values, np.exp(-1j * math.pi * n / 4) * expected, atol=1e-12)


def test_direct_fourier_keeps_phase():
    f = _unit_gaussian(1, 48, 3.0)
    out = fmt_direct(special_matrix("fourier", 1), f)
    u = out.grid.coords()[0]
    assert np.allclose(out.values, np.exp(-1j * math.pi / 4) * 2**0.25 * np.exp(-math.pi * u**2), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_fresnel_then_inverse(n):
    m = special_matrix("fresnel", n, 1.0)
    f, _ = fitted_signal(m, 64 if n == 1 else 48)
    out = fmt_apply(plan_fmt(m, f.grid), f)
    back = fmt_apply(plan_fmt(inverse(m), out.grid, out_grid=f.grid), out)
    assert phase_aligned_residual(back.values, f.values) < 1e-5


@given(st.integers(0, 500))
def test_fast_matches_direct_1d(seed):
    m = random_free(1, seed)
    f, _ = fitted_signal(m, 64)
    fast = fmt_apply(plan_fmt(m, f.grid), f)
    assert rel_l2(fast.values, fmt_direct(m, f).values) <= 1e-6
    assert abs(lp_norm(fast) - 1) <= 1e-6


@given(st.integers(0, 500))
def test_fast_matches_direct_2d(seed):
    m = random_free(2, seed)
    f, _ = fitted_signal(m, 48)  # 48 per axis holds every seed in range with >= 7 std margins
    fast = fmt_apply(plan_fmt(m, f.grid), f)
    assert rel_l2(fast.values, fmt_direct(m, f).values) <= 1e-5
    assert abs(lp_norm(fast) - 1) <= 1e-6


@given(st.integers(0, 500))
def test_inverse_round_trip(seed):
    m = random_free(2, seed)
    f, _ = fitted_signal(m, 48)
    out = fmt_apply(plan_fmt(m, f.grid), f)
    back = fmt_apply(plan_fmt(inverse(m), out.grid, out_grid=f.grid), out)
    assert phase_aligned_residual(back.values, f.values) <= 1e-4


def test_dense_path_matches_direct_on_arbitrary_points():
    m = random_free(2, 4)
    f, _ = fitted_signal(m, 24)
    target = Grid([10, 7], [[0.21, 0.05], [-0.03, 0.33]], origin=[0.1, -0.2])
    plan = plan_fmt(m, f.grid, out_grid=target)
    assert plan.path == "direct_dft"
    dense, direct = fmt_apply(plan, f).values, fmt_direct(m, f, out_grid=target).values
    # frequencies B⁻¹u outside the resolvable cell are set to zero, not aliased
    nu = target.points() @ m.b_inverse.T @ f.grid.basis
    inside = np.all(np.abs(nu) <= 0.5, axis=1).reshape(target.shape)
    assert inside.any() and not inside.all()
    assert rel_l2(dense[inside], direct[inside]) < 1e-12
    assert np.all(dense[~inside] == 0)


@pytest.mark.parametrize("origin", [(0.0, 0.0), (0.3, -0.2)])
def test_reversed_natural_lattice_uses_fft(origin):
    m = random_free(2, 5)
    f, _ = fitted_signal(m, 24)
    f = SampledSignal(f.grid.with_origin(origin), f.values)
    natural = natural_out_grid(m, f.grid)
    target = Grid(natural.shape, natural.basis * np.array([-1.0, 1.0]))
    plan = plan_fmt(m, f.grid, out_grid=target)
    assert plan.path == "fft" and plan.flipped_axes == (0,)
    assert rel_l2(fmt_apply(plan, f).values, fmt_direct(m, f, out_grid=target).values) < 1e-12
    # same points reindexed, except the boundary row, which wraps to +n/2 (a different point)
    g_nat = fmt_gradient(plan_fmt(m, f.grid), f)
    g_rev = fmt_gradient(plan, f)
    expected = np.roll(np.flip(g_nat, axis=1), 1, axis=1)
    assert np.allclose(g_rev[:, 1:], expected[:, 1:], rtol=0, atol=1e-12 * np.abs(g_nat).max())


def test_inverse_onto_input_grid_uses_fft():
    m = special_matrix("frft", 2, 0.6)
    f, _ = fitted_signal(m, 48)
    out = fmt_apply(plan_fmt(m, f.grid), f)
    plan = plan_fmt(inverse(m), out.grid, out_grid=f.grid)
    assert plan.path == "fft"
    assert phase_aligned_residual(fmt_apply(plan, out).values, f.values) < 1e-6


def test_oversampling_refines_the_output_lattice():
    m = special_matrix("frft", 1, 0.6)
    f, _ = fitted_signal(m, 64)
    coarse = fmt_apply(plan_fmt(m, f.grid), f)
    fine = fmt_apply(plan_fmt(m, f.grid, oversample=3), f)
    assert np.allclose(fine.grid.basis * 3, coarse.grid.basis)
    # every third fine point is a coarse point (both lattices contain u = 0)
    c0, f0 = coarse.grid.shape[0] // 2, fine.grid.shape[0] // 2
    assert np.allclose(fine.values[f0 - 3 * c0 :: 3][: coarse.grid.shape[0]], coarse.values, atol=1e-13)


def test_nonzero_grid_origin():
    m = random_free(1, 2)
    f, _ = fitted_signal(m, 64)
    shifted = SampledSignal(f.grid.with_origin([0.37]), f.values)
    fast = fmt_apply(plan_fmt(m, shifted.grid), shifted)
    assert rel_l2(fast.values, fmt_direct(m, shifted).values) < 1e-12


def test_nyquist_guard_reports_axis():
    f = normalize(sample_gaussian_chirp(GaussianChirp((1.0, 1.0)), Grid.box([32, 32], 6.0)))
    m = special_matrix("fresnel", 2, (10.0, 0.1))  # strong chirp B⁻¹A on axis 1 only
    with pytest.raises(NyquistViolated) as info:
        fmt_apply(plan_fmt(m, f.grid), f)
    assert info.value.axis == 1
    with pytest.raises(NyquistViolated):
        fmt_direct(m, f)


def test_band_edge_fraction_of_resolved_and_flat_spectra():
    spec = np.exp(-np.linspace(-8, 8, 64) ** 2)
    assert band_edge_fraction(spec)[0] < 1e-20
    assert band_edge_fraction(np.ones((8, 8)))[1] == pytest.approx(0.5)


def test_plan_guards():
    f = normalize(sample_gaussian_chirp(GaussianChirp((1.0,)), Grid.box(64, 6.0)))
    with pytest.raises(DimensionMismatch):
        plan_fmt(special_matrix("fourier", 2), f.grid)
    plan = plan_fmt(special_matrix("fourier", 1), f.grid)
    with pytest.raises(DimensionMismatch):
        fmt_apply(plan, SampledSignal(Grid.box(32, 6.0), np.ones(32)))
    with pytest.raises(ValueError):
        plan_fmt(special_matrix("fourier", 1), f.grid, oversample=0)
    big = SampledSignal(Grid.box([128, 128], 6.0), np.ones((128, 128)))
    with pytest.raises(TooLarge):
        fmt_direct(special_matrix("fourier", 2), big, out_grid=Grid.box([72, 72], 6.0))


def test_plan_uses_natural_lattice():
    m = random_free(2, 1)
    g = Grid.box([16, 12], [2.0, 3.0])
    plan = plan_fmt(m, g)
    assert plan.path == "fft"
    assert plan.out_grid.same_as(natural_out_grid(m, g))
    assert np.allclose(plan.out_grid.basis, m.B @ g.conjugate().basis)


@pytest.mark.parametrize("n", [1, 2])
def test_exact_gradient_matches_finite_differences(n):
    m = random_free(n, 7)
    f, _ = fitted_signal(m, 48 if n == 1 else 24)
    plan = plan_fmt(m, f.grid)
    grad = fmt_gradient(plan, f)
    sub, _ = sublattice(fmt_apply(plan, f), 6)
    # the first lattice row sits on the cell boundary; shifting it leaves the band
    idx = tuple(slice(1, None) for _ in range(n))
    delta = 1e-5
    for j in range(n):
        e = np.zeros(n)
        e[j] = delta
        plus = fmt_apply(plan_fmt(m, f.grid, out_grid=Grid(sub.shape, sub.basis, sub.origin + e)), f)
        minus = fmt_apply(plan_fmt(m, f.grid, out_grid=Grid(sub.shape, sub.basis, sub.origin - e)), f)
        fd = (plus.values - minus.values) / (2 * delta)
        # analytic gradient sampled on the same sub-lattice
        g_full = SampledSignal(plan.out_grid, grad[j])
        _, g_sub = sublattice(g_full, 6)
        assert rel_l2(g_sub[idx], fd[idx]) < 1e-7


def test_strict_band_accuracy_against_closed_form():
    # every fractional Fourier transform maps the unit Gaussian to itself
    f = _unit_gaussian(1, 256, 5.0)
    for theta in (0.3, 0.9, 1.4):
        m = special_matrix("frft", 1, theta)
        out = fmt_apply(plan_fmt(m, f.grid, nyquist_tol=STRICT_BAND), f)
        u = out.grid.coords()[0]
        assert np.max(np.abs(np.abs(out.values) - 2**0.25 * np.exp(-math.pi * u**2))) < 1e-10


# ---------------------------------------------------------------- Wigner function


def _wigner_oracle(x, w, zeta=1 / (2 * math.pi)):
    """Brute-force lag integral for the unit Gaussian."""
    y = np.linspace(-12, 12, 24001)
    f = lambda t: 2**0.25 * np.exp(-t**2 / (2 * zeta))  # noqa: E731
    vals = f(x + y / 2) * f(x - y / 2) * np.exp(-2j * math.pi * w * y)
    return float(np.real(np.sum(vals) * (y[1] - y[0])))


def test_wigner_of_unit_gaussian_against_quadrature():
    f = _unit_gaussian(1, 32, 2.5)
    wr = wigner(f)
    assert wr.imag_residue <= 1e-10
    xs = wr.x_grid.coords()[0]
    ws = wr.w_grid.coords()[0]
    picks = [(16, 32), (16, 40), (12, 32), (20, 25), (10, 44), (22, 36), (16, 20), (18, 30), (14, 34)]
    for i, k in picks:
        oracle = _wigner_oracle(xs[i], ws[k])
        assert abs(wr.values[i, k] - oracle) < 1e-9
        assert abs(oracle - 2 * math.exp(-2 * math.pi * (xs[i] ** 2 + ws[k] ** 2))) < 1e-9


def test_wigner_custom_grid_matches_natural_grid():
    f = normalize(sample_gaussian_chirp(GaussianChirp((0.4,), 2.0), Grid.box(32, 3.0)))
    full = wigner(f)
    sub, _ = sublattice(SampledSignal(full.w_grid, full.values[0]), 8)
    dense = wigner(f, w_grid=sub)
    _, ref = sublattice(SampledSignal(full.w_grid, full.values[5]), 8)
    assert np.allclose(dense.values[5], ref, atol=1e-12)


def test_wigner_moment_totals():
    g = GaussianChirp((0.5, 1.0), 2.0)
    f = normalize(sample_gaussian_chirp(g, Grid.box([32, 32], 7 * np.sqrt(np.asarray(g.zeta) / 2))))
    wm = wigner_moments(f)
    assert wm.imag_residue <= 1e-10
    assert abs(wm.total - 1) < 1e-10
    sigma = wm.sigma / wm.total
    assert abs(wm.weighted_total - (1 + np.trace(sigma))) < 1e-10
    assert np.allclose(sigma, sigma.T)


def test_sigma_of_unit_gaussian():
    f = _unit_gaussian(2, 40, 3.5)
    assert np.allclose(sigma_via_wigner(f), np.eye(4) / (4 * math.pi), atol=1e-10)


def test_wigner_dimension_guard():
    f = SampledSignal(Grid.box([8, 8, 8], 2.0), np.ones((8, 8, 8)))
    with pytest.raises(TooLarge):
        wigner(f)
    with pytest.raises(TooLarge):
        wigner(_unit_gaussian(2, 64, 4.0), max_elems=1000)
