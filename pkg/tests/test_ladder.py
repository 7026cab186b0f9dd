import math

import numpy as np
import pytest

from nhtlab.dynamics import FlowChart, make_chart
from nhtlab.errors import DomainError, ParameterRangeError, ProbeError
from nhtlab.gridquant import make_grid
from nhtlab.ladder import (
    build_theta,
    build_window_B,
    check_probe,
    default_probes,
    descend,
    intertwine_residual,
    microlocal_correlation,
    transport_solve,
)
from nhtlab.model1d import CHI1


@pytest.fixture(scope="module")
def setup(get_bundle):
    b = get_bundle(0.02)
    return b, build_theta(b.grid)


class TestTheta:
    def test_constant(self, setup):
        b, Th = setup
        assert np.max(np.abs(Th @ np.ones(b.grid.N, dtype=complex))) <= 1e-12

    def test_plane_wave(self, setup):
        b, Th = setup
        g = b.grid
        k = int(round(0.7 * 6 / (2 * math.pi * g.h)))
        w = g.plane_wave(k)
        xi0 = g.h * 2 * math.pi * k / 6
        assert np.max(np.abs(Th @ w - xi0 * w)) <= 1e-10 * np.max(np.abs(w))

    @pytest.mark.parametrize("m", [0, 1, 2, 3])
    def test_differentiates_polynomials(self, m):
        # on |x| <= 1, where chi1 is flat; the frequency-cutoff error lives at the
        # edge of supp chi1 (about 2e-6 there at h = 0.01)
        grid = make_grid(0.01)
        h, x = grid.h, grid.x
        e = 1e-6
        c = CHI1(x)
        dc = (CHI1(x + e) - CHI1(x - e)) / (2 * e)
        v = x**m * c
        exact = (h / 1j) * ((m * x ** (m - 1) * c if m else 0) + x**m * dc)
        diff = np.abs(build_theta(grid) @ v - exact)
        assert diff[np.abs(x) <= 1].max() <= 1e-8

    def test_fourier_diagonal(self, setup):
        _, Th = setup
        assert Th.fourier_diagonal and Th.self_adjoint


class TestIntertwine:
    def test_probe_at_point(self, setup):
        b, Th = setup
        probe = [b.grid.coherent_state(0.5, 0.2)]
        for m in (0, 3):
            assert intertwine_residual(b.grid, b.P, Th, m, probe) <= 1e-8

    def test_all_levels(self, setup):
        b, Th = setup
        probes = default_probes(b.grid, 12)
        assert len(probes) >= 10
        for m in range(5):
            assert intertwine_residual(b.grid, b.P, Th, m, probes) <= 1e-8

    def test_wrong_shift_detected(self, setup):
        # the identity needs the shift m -> m + 1; with no shift the residual is h
        b, Th = setup
        g = b.grid
        v = g.coherent_state(0.5, 0.2)
        bad = Th @ (b.P @ v) - b.P @ (Th @ v)
        assert g.norm(bad) / g.norm(v) > 0.1 * g.h * 0.2

    def test_probe_in_transition(self, setup):
        b, Th = setup
        g = b.grid
        k = int(round(2.8 * 6 / (2 * math.pi * g.h)))
        with pytest.raises(ProbeError):
            intertwine_residual(g, b.P, Th, 0, [g.plane_wave(k)])

    def test_probe_far_in_space(self, setup):
        b, _ = setup
        with pytest.raises(ProbeError):
            check_probe(b.grid, b.grid.coherent_state(2.5, 0.0))

    def test_zero_probe(self, setup):
        b, _ = setup
        with pytest.raises(ProbeError):
            check_probe(b.grid, np.zeros(b.grid.N, dtype=complex))


class TestDescend:
    def test_constant(self, setup):
        b, Th = setup
        seq = descend(b.grid, Th, np.ones(b.grid.N), 2)
        assert len(seq.vectors) == 3
        assert np.max(np.abs(seq.vectors[1])) <= 1e-12 and np.max(np.abs(seq.vectors[2])) <= 1e-12
        assert seq.micro_norms[0] > 0

    def test_negative_depth(self, setup):
        b, Th = setup
        with pytest.raises(ParameterRangeError):
            descend(b.grid, Th, np.ones(b.grid.N), -1)

    def test_band_lowering(self, setup, get_report):
        b, Th = setup
        rep = get_report(0.02)
        v0 = rep.vectors[:, rep.band_member(0)]
        v1 = rep.vectors[:, rep.band_member(1)]
        B = build_window_B(b.grid)
        seq = descend(b.grid, Th, v1, 1, B)
        assert microlocal_correlation(b.grid, B, seq.vectors[1], v0) >= 0.9

    def test_ground_band_annihilated(self, setup, get_report):
        b, Th = setup
        rep = get_report(0.02)
        v0 = rep.vectors[:, rep.band_member(0)]
        seq = descend(b.grid, Th, v0, 1)
        assert seq.micro_norms[1] / seq.micro_norms[0] <= 0.2

    def test_correlation_degenerate(self, setup):
        b, _ = setup
        B = build_window_B(b.grid)
        z = np.zeros(b.grid.N, dtype=complex)
        assert microlocal_correlation(b.grid, B, z, np.ones(b.grid.N)) == 0.0


def _inverted_chart():
    # p = -x xi: backward trajectories on {xi = 0} are expelled from U_delta
    return FlowChart(
        "inverted",
        2,
        lambda z: -z[..., 0] * z[..., 1],
        phi_plus=lambda z: z[..., 1],
        phi_minus=lambda z: z[..., 0],
        k_sampler=lambda n, rng: np.zeros((n, 2)),
        delta=0.5,
        c_plus_exact=lambda z: np.ones(np.shape(z)[:-1]),
    )


class TestTransport:
    pts = np.column_stack([np.linspace(-0.4, 0.4, 5), np.zeros(5)])

    def test_constant(self):
        res = transport_solve(make_chart("model"), lambda z: np.ones(len(z)), self.pts, 1.0, 1.0)
        assert np.max(np.abs(res.values - 1)) <= 1e-6

    def test_linear(self):
        res = transport_solve(make_chart("model"), lambda z: z[..., 0], self.pts, 1.0, 1.0)
        assert np.max(np.abs(res.values - self.pts[:, 0] / 2)) <= 1e-6

    def test_horizon(self):
        res = transport_solve(make_chart("model"), lambda z: np.ones(len(z)), self.pts[:1], 1.0, 1.0)
        assert math.exp(-0.9 * res.T_max) <= 1e-10 * (1 + 1e-9)
        assert res.dt <= 0.01

    @pytest.mark.parametrize("name", ["model", "twisted"])
    def test_manufactured(self, name):
        chart = make_chart(name)
        base = chart.k_sampler(5, np.random.default_rng(0))
        base[:, 0] = np.linspace(-0.45, 0.45, 5)
        c = chart.c_plus_exact

        def f(z):
            x = z[..., 0]
            return c(z) * np.cos(x) - c(z) * x * np.sin(x)

        nu = (1.0, 1.0) if name == "model" else (1.0, 3.0)
        res = transport_solve(chart, f, base, *nu)
        assert np.max(np.abs(res.values - np.cos(base[:, 0]))) <= 1e-6

    def test_linearity(self):
        chart = make_chart("model")
        f1 = lambda z: np.sin(3 * z[..., 0]) + 1  # noqa: E731
        f2 = lambda z: z[..., 0] ** 2  # noqa: E731
        a = transport_solve(chart, lambda z: f1(z) + 2 * f2(z), self.pts, 1.0, 1.0).values
        b = transport_solve(chart, f1, self.pts, 1.0, 1.0).values
        c = transport_solve(chart, f2, self.pts, 1.0, 1.0).values
        assert np.max(np.abs(a - b - 2 * c)) <= 1e-10

    def test_uniqueness_probe(self):
        # the backward trajectory from x0 = 0.3 stays in [0, 0.3]
        chart = make_chart("model")
        z = np.array([[0.3, 0.0]])
        f = lambda s: np.cos(s[..., 0])  # noqa: E731
        bump = lambda s: np.where(s[..., 0] < -0.1, np.exp(-1 / np.maximum(-0.1 - s[..., 0], 1e-300)), 0.0)  # noqa: E731
        u1 = transport_solve(chart, f, z, 1.0, 1.0).values
        u2 = transport_solve(chart, lambda s: f(s) + bump(s), z, 1.0, 1.0).values
        assert abs(u1[0] - u2[0]) <= 1e-12

    def test_escape(self):
        with pytest.raises(DomainError) as err:
            transport_solve(_inverted_chart(), lambda z: np.ones(len(z)), np.array([[0.1, 0.0]]), 1.0, 1.0)
        assert err.value.exit_time == pytest.approx(math.log(5), abs=0.05)

    def test_base_outside(self):
        with pytest.raises(DomainError):
            transport_solve(make_chart("model"), lambda z: np.ones(len(z)), np.array([[0.7, 0.0]]), 1.0, 1.0)
