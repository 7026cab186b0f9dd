import math

import numpy as np
import pytest

import oracles
from conftest import SWEEP
from nhtlab.errors import (
    ConstructionError,
    CoverageError,
    NearSingularError,
)
from nhtlab.gridquant import SemiclassicalGrid, make_grid
from nhtlab.model1d import (
    A_FREQ,
    A_SPACE,
    CHI1,
    ChiProfile,
    build_absorbers,
    build_operator_P,
    build_u0_f0,
    build_u2,
    certified_lower_bound,
    compute_psi,
    compute_psi_pm,
    norm_asymptote,
    psi_pm_xside,
    psi_values,
    q0,
    u0_norm_on_unit_interval,
)


class TestChiProfile:
    def test_bump_support_and_sign(self, chi_profile):
        xi = np.linspace(0.0, 1.5, 3001)
        v = chi_profile.chi_hat(xi)
        assert v.min() >= 0
        assert np.all(v[(xi <= 0.55) | (xi >= 0.95)] == 0)
        assert 0.5 < chi_profile.lo and chi_profile.hi < 1.0

    def test_bad_support(self):
        with pytest.raises(ConstructionError):
            ChiProfile(lo=0.3)

    def test_chi_against_oracle(self, chi_profile):
        for y in (0.0, 7.5, -40.0, 100.0):
            assert abs(complex(chi_profile.chi(np.array(y))) - oracles.chi(y)) <= 1e-12

    def test_polynomial_decay(self, chi_profile):
        # C_k are twice the sup of |chi|(1+|y|)^k measured on |y| <= 100
        C = (0.077, 0.62, 9.1, 514, 4.7e4, 4.3e6, 3.95e8)
        y = np.linspace(-100, 100, 20001)
        c = np.abs(chi_profile.chi(y))
        for k, Ck in enumerate(C):
            assert np.all(c <= Ck * (1 + np.abs(y)) ** (-k))


class TestPsi:
    def test_value_at_zero(self, chi_profile):
        # the |x|^-1/2 prefactor makes psi(0) = 2 chi(0), not 0
        v = compute_psi(chi_profile, 0.0)
        assert abs(v - 2 * oracles.chi(0.0)) <= 1e-12
        assert abs(v - oracles.psi(0.0)) <= 1e-12

    def test_against_oracle(self, chi_profile):
        x = 3.7
        assert abs(compute_psi(chi_profile, x) - oracles.psi(x)) <= 1e-10
        assert abs(psi_values(chi_profile, np.array([x]))[0] - oracles.psi(x)) <= 1e-10

    def test_vectorized_matches_quadrature(self, chi_profile):
        xs = np.array([-250.0, -12.0, -0.3, 0.0, 0.4, 9.0, 600.0])
        direct = np.array([compute_psi(chi_profile, x) for x in xs])
        assert np.max(np.abs(psi_values(chi_profile, xs) - direct)) <= 1e-10

    @pytest.mark.parametrize("x", [0.5, -0.5, 2.0, -2.0])
    def test_transport_equation(self, chi_profile, x):
        # (x d/dx + 1/2) psi = chi
        e = 1e-3
        d = (compute_psi(chi_profile, x + e) - compute_psi(chi_profile, x - e)) / (2 * e)
        lhs = x * d + 0.5 * compute_psi(chi_profile, x)
        assert abs(lhs - complex(chi_profile.chi(np.array(x)))) <= 1e-6

    def test_smooth_across_zero(self, chi_profile):
        d2 = [
            abs(compute_psi(chi_profile, e) - 2 * compute_psi(chi_profile, 0.0) + compute_psi(chi_profile, -e)) / e**2
            for e in (1e-1, 3e-2)
        ]
        assert max(d2) <= 1.0
        assert abs(d2[0] - d2[1]) <= 0.05

    def test_asymptote_at_1e3(self, chi_profile):
        pp, _ = chi_profile.psi_pm
        assert abs(compute_psi(chi_profile, 1e3) - pp * 10**-1.5) <= 1e-8

    def test_tail_beyond_crossover(self, chi_profile):
        far = ChiProfile(t0=1e7)
        pp, pm = chi_profile.psi_pm
        for x in (chi_profile.t0, -chi_profile.t0, 2 * chi_profile.t0):
            exact = compute_psi(far, x)
            asym = (pp if x > 0 else pm) / math.sqrt(abs(x))
            assert abs(exact - asym) <= 1e-8
            assert compute_psi(chi_profile, x) == asym


class TestPsiPm:
    def test_phase(self, chi_profile):
        pp, pm = compute_psi_pm(chi_profile)
        assert abs(np.angle(pp) - math.pi / 4) <= 1e-8
        assert abs(pm / pp - np.exp(-0.5j * math.pi)) <= 1e-8

    def test_modulus(self, chi_profile):
        pp, pm = chi_profile.psi_pm
        ref = oracles.psi_pm_modulus()
        assert abs(abs(pp) - ref) <= 1e-10 and abs(abs(pm) - ref) <= 1e-10
        assert abs(pp) > 1e-3

    def test_cross_check(self, chi_profile):
        xp, xm = psi_pm_xside(chi_profile)
        pp, pm = chi_profile.psi_pm
        assert max(abs(xp - pp), abs(xm - pm)) <= 1e-8


class TestU0F0:
    def test_center_value(self, chi_profile):
        grid = make_grid(0.05)
        u0, _ = build_u0_f0(grid, chi_profile)
        j = int(np.argmin(np.abs(grid.x)))
        assert grid.x[j] == 0.0
        assert abs(u0[j] - 2 * oracles.chi(0.0) / math.sqrt(grid.h)) <= 1e-10

    def test_f0_order_h(self, chi_profile):
        for h in SWEEP:
            _, f0 = build_u0_f0(make_grid(h), chi_profile)
            assert make_grid(h).norm(f0) <= 0.2 * h

    def test_norm_asymptote(self, chi_profile):
        dev = {h: abs(u0_norm_on_unit_interval(chi_profile, h) - norm_asymptote(chi_profile, h)) for h in (1e-2, 1e-3)}
        assert dev[1e-3] <= 2 * dev[1e-2]

    def test_quadrature_matches_grid(self, chi_profile):
        grid = make_grid(0.02)
        u0, _ = build_u0_f0(grid, chi_profile)
        inside = np.abs(grid.x) < 1.0
        on_grid = math.sqrt(grid.dx * np.sum(np.abs(u0[inside]) ** 2))
        assert abs(on_grid - u0_norm_on_unit_interval(chi_profile, 0.02)) <= 0.01 * on_grid

    @pytest.mark.xfail(strict=True, reason="finite-h leakage of u0 outside the band is about 3e-3 at h=0.02")
    def test_fourier_band(self, chi_profile):
        grid = make_grid(0.02)
        u0, _ = build_u0_f0(grid, chi_profile)
        U = np.abs(grid.fft(u0)) ** 2
        out = (grid.xi < -0.05) | (grid.xi > 1.05)
        assert U[out].sum() / U.sum() <= 1e-6


@pytest.fixture(scope="module")
def setup():
    grid = make_grid(0.02)
    return grid, build_operator_P(grid)


@pytest.fixture(scope="module")
def absorbers():
    grid = make_grid(0.05)
    return grid, build_absorbers(grid)


class TestOperatorP:
    def test_self_adjoint(self, setup):
        _, P = setup
        assert np.max(np.abs(P.matrix - P.matrix.conj().T)) <= 1e-12

    def test_constant(self):
        # the spatial cutoff's Fourier tail beyond the frequency cutoff sets the
        # error: about 2e-4, 2e-7, 3e-10 at h = 0.05, 0.02, 0.01
        errs = []
        for h in (0.05, 0.02, 0.01):
            grid = make_grid(h)
            v = build_operator_P(grid) @ np.ones(grid.N, dtype=complex)
            sel = np.abs(grid.x) <= 2
            errs.append(np.max(np.abs(v[sel] - grid.h / 2j)))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] <= 1e-8

    def test_coherent_state(self, setup):
        grid, P = setup
        h = grid.h
        x0, xi0 = 1.0, 0.5
        s = math.sqrt(h)
        d = grid.x - x0
        g = np.exp(-(d**2) / (2 * s**2) + 1j * xi0 * d / h)
        dg = (-d / s**2 + 1j * xi0 / h) * g
        exact = grid.x * (h / 1j) * dg + h / 2j * g
        assert grid.norm(P @ g - exact) <= 1e-6 * grid.norm(g)

    def test_high_frequency(self, setup):
        grid, P = setup
        k = int(round(2.95 * 6 / (2 * math.pi * grid.h)))
        w = grid.plane_wave(k)
        assert grid.norm(P @ w) <= 1e-6 * grid.norm(w)

    def test_coverage(self):
        with pytest.raises(CoverageError):
            build_operator_P(SemiclassicalGrid(h=0.05, N=64))


class TestAbsorbers:
    def test_plateaus(self):
        assert q0(np.array(0.0)) == 0.0 and q0(np.array(2.0)) == 1.0
        x = np.linspace(-3, 3, 6001)
        assert np.all(q0(x) >= 0)

    def test_q1_annihilates(self, absorbers):
        grid, (_, Q1, _) = absorbers
        k = int(round(1.0 * 6 / (2 * math.pi * grid.h)))
        assert np.max(np.abs(Q1 @ grid.plane_wave(k))) <= 1e-12

    def test_numerical_range(self, absorbers):
        grid, (_, _, Q) = absorbers
        assert np.max(np.abs(Q.matrix - Q.matrix.conj().T)) <= 1e-12
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)
            q = grid.inner(Q @ v, v)
            assert q.real >= -1e-12 * grid.norm(v) ** 2
            assert q.real <= 2 * grid.norm(v) ** 2

    def test_cutoff_breakpoints(self):
        assert CHI1(np.array([1.5, -1.5])).tolist() == [1.0, 1.0]
        assert CHI1(np.array([2.0, -2.0])).tolist() == [0.0, 0.0]
        assert A_FREQ(np.array([0.5, 1.0])).tolist() == [1.0, 1.0]
        assert A_FREQ(np.array([0.4, 1.1])).tolist() == [0.0, 0.0]
        assert A_SPACE(np.array(0.0)) == 1.0


class TestU2:
    def test_zero_forcing(self):
        grid = make_grid(0.05)
        assert not np.any(build_u2(grid, np.zeros(grid.N, dtype=complex)))

    @pytest.mark.parametrize("h,margin", [(0.02, 2.0), (0.01, 1.0)])
    def test_manufactured(self, h, margin):
        # spacing 6/2048 resolves the bump; the default h=0.02 grid gives 1e-5
        grid = make_grid(h, margin)
        x = grid.x
        a, b = 1.25, 1.75
        inside = (x > a) & (x < b)
        v = np.zeros(grid.N)
        dv = np.zeros(grid.N)
        z = x[inside]
        den = (z - a) * (b - z)
        v[inside] = np.exp(1 - 0.0625 / den)
        dv[inside] = v[inside] * 0.0625 * (a + b - 2 * z) / den**2
        f1 = -(h / 1j) * (x * dv + v / 2 + q0(x) / h * v)
        u2 = build_u2(grid, f1)
        assert np.max(np.abs(u2 - v)) <= 1e-6

    def test_rejects_inner_forcing(self):
        grid = make_grid(0.05)
        f1 = np.exp(-(grid.x**2) / 0.01).astype(complex)
        with pytest.raises(ConstructionError):
            build_u2(grid, f1)

    def test_vanishes_on_unit_interval(self, get_bundle):
        b = get_bundle(0.02)
        assert np.all(b.u2[np.abs(b.grid.x) <= 1.0] == 0)

    def test_witness_decays_beyond(self, get_bundle):
        # the damped quasimode u = u1 + u2 is negligible past |x| = 15/8
        for h in (0.02, 0.01):
            b = get_bundle(h)
            far = np.abs(b.grid.x) >= 15 / 8
            assert np.abs(b.u[far]).max() <= 1e-5 * np.abs(b.u).max()

    @pytest.mark.xfail(strict=True, reason="u2 cancels u1 on 7/4 < |x| < 2, so it is about 5% of its peak there")
    def test_u2_decays_beyond(self, get_bundle):
        b = get_bundle(0.02)
        far = np.abs(b.grid.x) >= 15 / 8
        assert np.abs(b.u2[far]).max() <= 1e-8 * np.abs(b.u2).max()

    @pytest.mark.xfail(strict=True, reason="the damping layer gives u2 an O(h) share of mass at |h xi| > 0.2")
    def test_u2_frequency_localized(self, get_bundle):
        b = get_bundle(0.02)
        U = np.abs(b.grid.fft(b.u2)) ** 2
        assert U[np.abs(b.grid.xi) > 0.2].sum() / U.sum() <= 1e-4


class TestWitness:
    def test_self_adjoint_parts(self, get_bundle):
        b = get_bundle(0.05)
        assert np.max(np.abs(b.P.matrix - b.P.matrix.conj().T)) <= 1e-12
        assert np.max(np.abs(b.Q.matrix - b.Q.matrix.conj().T)) <= 1e-12
        assert np.linalg.eigvalsh(b.Q.matrix).min() >= -1e-12

    def test_metadata(self, get_bundle):
        b = get_bundle(0.05)
        assert b.gamma_plus == "xi = 0, |x| < 2"
        assert b.gamma_minus == "x = 0, |xi| < 2"
        assert b.trapped_set == "(x, xi) = (0, 0)"

    def test_residual_small(self, get_bundle):
        b = get_bundle(0.02)
        assert b.norm(b.residual) <= 0.1 * b.norm(b.forcing)

    def test_residual_order_h2(self, get_bundle):
        for h in SWEEP:
            b = get_bundle(h)
            assert b.norm(b.residual) <= 5 * h**2

    def test_norm_lower_bound(self, get_bundle, chi_profile):
        for h in SWEEP:
            b = get_bundle(h)
            assert b.norm(b.u) >= 0.5 * norm_asymptote(chi_profile, h)

    def test_cutoff_on_forcing_h01(self, get_bundle):
        b = get_bundle(0.01)
        g = b.forcing
        assert b.norm(b.A @ g - g) <= 1e-4 * b.norm(g)

    @pytest.mark.xfail(strict=True, reason="A - I leaks about 1.2e-3 of the forcing at h=0.02")
    def test_cutoff_on_forcing(self, get_bundle):
        b = get_bundle(0.02)
        g = b.forcing
        assert b.norm(b.A @ g - g) <= 1e-4 * b.norm(g)


class TestCertifiedBound:
    def test_zero_witness(self, get_bundle):
        from dataclasses import replace

        b = get_bundle(0.05)
        z = np.zeros(b.grid.N, dtype=complex)
        assert certified_lower_bound(replace(b, u1=z, u2=z), resolvent_norm=10.0) == 0.0

    def test_singular(self, get_bundle):
        b = get_bundle(0.05)
        with pytest.raises(NearSingularError):
            certified_lower_bound(b, sigma_min=1e-15)
        with pytest.raises(NearSingularError):
            certified_lower_bound(b, resolvent_norm=math.inf)

    def test_nonnegative(self, get_bundle):
        b = get_bundle(0.05)
        assert certified_lower_bound(b, resolvent_norm=1e9) == 0.0
