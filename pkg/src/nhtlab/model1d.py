"""The one-dimensional trapping model x hD_x + h/2i on the circle R/6Z.

Builds the quasimode ``u = u1 + u2`` solving ``(P - iQ) u = chi1 f0`` up to
small errors, the absorbers ``Q0, Q1``, the compactified operator ``P`` and
the microlocal cutoff ``A`` used for the cutoff resolvent lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import fresnel

from .errors import (
    AccuracyError,
    ConsistencyError,
    ConstructionError,
    CoverageError,
    DampingError,
    NearSingularError,
)
from .gridquant import (
    OperatorMatrix,
    SemiclassicalGrid,
    SmoothCutoff,
    quantize_multiplier,
    quantize_position,
    quantize_symbol,
    smooth_step,
    symmetrize,
)

# Cutoff placements.  Plateau / support pairs, all even.
P_SPACE_CUTOFF = SmoothCutoff.symmetric(2.5, 2.9)
P_FREQ_CUTOFF = SmoothCutoff.symmetric(2.2, 3.0)
Q0_PLATEAU = SmoothCutoff.symmetric(1.0, 1.5)  # q0 = 1 - this
CHI1 = SmoothCutoff.symmetric(1.5, 2.0)
Q1_START, Q1_RAMP = 1.5, 1.5
A_SPACE = SmoothCutoff.symmetric(2.0, 2.4)
A_FREQ = SmoothCutoff(0.4, 0.5, 1.0, 1.1)

GAMMA_PLUS = "xi = 0, |x| < 2"
GAMMA_MINUS = "x = 0, |xi| < 2"
TRAPPED_SET = "(x, xi) = (0, 0)"


def q0(x) -> np.ndarray:
    """Spatial absorber: 0 on [-1, 1], 1 outside [-3/2, 3/2]."""
    return 1.0 - Q0_PLATEAU(x)


def q1_symbol(xi) -> np.ndarray:
    """Frequency absorber: 0 for |xi| <= 3/2, positive beyond, 1 for |xi| >= 3."""
    return smooth_step((np.abs(xi) - Q1_START) / Q1_RAMP)


def a_symbol(x, xi) -> np.ndarray:
    """Symbol of A: 1 near {x = 0, 1/2 <= xi <= 1}, vanishing near xi = 0."""
    return A_SPACE(x) * A_FREQ(xi)


@dataclass(frozen=True)
class ChiProfile:
    """Frequency bump chi_hat on (lo, hi) and its inverse Fourier transform chi.

    chi_hat(xi) = exp(1 - w^2 / ((xi - lo)(hi - xi))), w = (hi - lo) / 2, so the
    peak value is 1.  chi(y) = (2 pi)^-1 int chi_hat(xi) exp(i y xi) dxi is
    evaluated by Gauss-Legendre quadrature on (lo, hi).
    """

    lo: float = 0.55
    hi: float = 0.95
    nodes: int = 2400
    t0: float = 1500.0
    xi_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    xi_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0.5 <= self.lo < self.hi <= 1.0:
            raise ConstructionError("chi_hat must be supported inside (1/2, 1)")
        t, w = np.polynomial.legendre.leggauss(self.nodes)
        half = 0.5 * (self.hi - self.lo)
        object.__setattr__(self, "xi_nodes", self.lo + half * (t + 1))
        object.__setattr__(self, "xi_weights", half * w * self.chi_hat(self.lo + half * (t + 1)))

    def chi_hat(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = np.zeros_like(xi)
        inside = (xi > self.lo) & (xi < self.hi)
        w2 = (0.5 * (self.hi - self.lo)) ** 2
        z = xi[inside]
        out[inside] = np.exp(1.0 - w2 / ((z - self.lo) * (self.hi - z)))
        return out

    def chi(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        out = np.empty(flat.shape, dtype=complex)
        for s in range(0, flat.size, 4096):
            block = flat[s : s + 4096]
            out[s : s + 4096] = np.exp(1j * np.outer(block, self.xi_nodes)) @ self.xi_weights
        return (out / (2 * np.pi)).reshape(y.shape)

    @cached_property
    def psi_pm(self) -> tuple[complex, complex]:
        return compute_psi_pm(self)


def _unit_fresnel(a: np.ndarray) -> np.ndarray:
    """E(a) = int_0^1 exp(i a t^2) dt, elementwise."""
    a = np.asarray(a, dtype=float)
    out = np.ones(a.shape, dtype=complex)
    nz = a != 0
    aa = np.abs(a[nz])
    z = np.sqrt(2 * aa / np.pi)
    S, C = fresnel(z)
    out[nz] = np.sqrt(np.pi / (2 * aa)) * (C + 1j * np.sign(a[nz]) * S)
    return out


def psi_values(profile: ChiProfile, x) -> np.ndarray:
    """Vectorized psi(x).

    Uses psi(x) = 2 int_0^1 chi(x t^2) dt = pi^-1 int chi_hat(xi) E(x xi) dxi,
    with the t-integral E done in closed form (Fresnel integrals).  For
    |x| >= t0 the asymptotic psi_pm |x|^-1/2 is returned; the dropped tail is
    below 1e-12 there (checked in the test suite).
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty(flat.shape, dtype=complex)
    far = np.abs(flat) >= profile.t0
    pp, pm = profile.psi_pm
    out[far] = np.where(flat[far] > 0, pp, pm) / np.sqrt(np.abs(flat[far]))
    idx = np.flatnonzero(~far)
    for s in range(0, idx.size, 2048):
        sel = idx[s : s + 2048]
        E = _unit_fresnel(np.outer(flat[sel], profile.xi_nodes))
        out[sel] = E @ profile.xi_weights / np.pi
    return out.reshape(x.shape)


def _composite_gauss(f, a: float, b: float, panels: int, order: int = 16) -> complex:
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return complex(np.sum(ws * f(s)))


def compute_psi(profile: ChiProfile, x: float, tol: float = 1e-10) -> complex:
    """psi(x) = sgn x int_0^x |x|^-1/2 |y|^-1/2 chi(y) dy.

    Substituting y = sgn(x) s^2 removes the endpoint singularity:
    psi(x) = 2 |x|^-1/2 int_0^sqrt|x| chi(sgn(x) s^2) ds.  The integral is
    evaluated twice (n and 2n panels); disagreement above ``tol`` raises
    AccuracyError.  Beyond ``profile.t0`` the asymptotic form is used.
    The limit at x = 0 is 2 chi(0), not 0: the |x|^-1/2 prefactor cancels
    the vanishing interval.
    """
    x = float(x)
    if x == 0.0:
        return complex(2.0 * profile.chi(np.array(0.0)))
    ax, sg = abs(x), math.copysign(1.0, x)
    if ax >= profile.t0:
        pp, pm = profile.psi_pm
        return (pp if sg > 0 else pm) / math.sqrt(ax)
    S = math.sqrt(ax)
    panels = 4 + int(ax / 8)

    def integrand(s):
        return profile.chi(sg * s * s)

    coarse = _composite_gauss(integrand, 0.0, S, panels)
    fine = _composite_gauss(integrand, 0.0, S, 2 * panels)
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise AccuracyError(f"psi({x}) quadrature unresolved: {abs(fine - coarse):.2e}")
    return 2.0 * fine / S


def psi_pm_xside(profile: ChiProfile) -> tuple[complex, complex]:
    """psi_pm = +-int_0^{+-inf} |y|^-1/2 chi(y) dy = 2 int_0^inf chi(+-s^2) ds, by direct quadrature."""
    S = math.sqrt(2.0 * profile.t0)
    panels = 4 + int(S * S / 8)
    vals = []
    for sg in (1.0, -1.0):
        vals.append(2.0 * _composite_gauss(lambda s, sg=sg: profile.chi(sg * s * s), 0.0, S, panels))
    return vals[0], vals[1]


def compute_psi_pm(profile: ChiProfile, tol: float = 1e-8) -> tuple[complex, complex]:
    """psi_pm from the frequency-side formula, cross-checked against the x-side integrals.

    psi_pm = exp(+-i pi/4) / (2 sqrt(pi)) int_0^inf xi^-1/2 chi_hat(xi) dxi.
    """
    moment = float(np.sum(profile.xi_weights / np.sqrt(profile.xi_nodes)))
    base = moment / (2 * math.sqrt(math.pi))
    plus = base * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    minus = base * complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
    xp, xm = psi_pm_xside(profile)
    gap = max(abs(xp - plus), abs(xm - minus))
    if gap > tol:
        raise ConsistencyError(f"x-side and xi-side psi_pm disagree by {gap:.2e}")
    return plus, minus


def u0_norm_on_unit_interval(profile: ChiProfile, h: float, step: float = 0.05) -> float:
    """||u0||_{L^2(-1,1)} by quadrature, u0(x) = h^-1/2 psi(x/h).

    Equals (int_{-1/h}^{1/h} |psi(y)|^2 dy)^1/2; the part with |y| >= t0 is
    integrated exactly from the asymptotic form.
    """
    Y = 1.0 / h
    inner = min(Y, profile.t0)
    n = int(math.ceil(2 * inner / step))
    n += n % 2
    y = np.linspace(-inner, inner, n + 1)
    vals = np.abs(psi_values(profile, y)) ** 2
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    total = float(np.sum(w * vals) * (2 * inner / n) / 3.0)
    if Y > profile.t0:
        pp, pm = profile.psi_pm
        total += (abs(pp) ** 2 + abs(pm) ** 2) * math.log(Y / profile.t0)
    return math.sqrt(total)


def norm_asymptote(profile: ChiProfile, h: float) -> float:
    """sqrt(|psi_+|^2 + |psi_-|^2) sqrt(log(1/h))."""
    pp, pm = profile.psi_pm
    return math.sqrt(abs(pp) ** 2 + abs(pm) ** 2) * math.sqrt(math.log(1.0 / h))


def build_u0_f0(grid: SemiclassicalGrid, profile: ChiProfile) -> tuple[np.ndarray, np.ndarray]:
    """Grid samples of u0 = h^-1/2 psi(x/h) and f0 = -i h^1/2 chi(x/h)."""
    h = grid.h
    y = grid.x / h
    u0 = psi_values(profile, y) / math.sqrt(h)
    f0 = -1j * math.sqrt(h) * profile.chi(y)
    return u0, f0


def build_operator_P(grid: SemiclassicalGrid) -> OperatorMatrix:
    """Self-adjoint compactly microlocalized P equal to x hD + h/2i on {|x| <= 2, |xi| <= 2}.

    P = F(hD) Sym(w(x) x hD) F(hD).
    """
    if grid.xi_max < P_FREQ_CUTOFF.d:
        raise CoverageError(f"xi_max={grid.xi_max:.3f} below frequency cutoff support {P_FREQ_CUTOFF.d}")
    F = quantize_multiplier(grid, P_FREQ_CUTOFF)
    hD = quantize_multiplier(grid, lambda xi: xi)
    wx = quantize_position(grid, lambda x: P_SPACE_CUTOFF(x) * x)
    core = symmetrize(wx @ hD)
    M = F.matrix @ core.matrix @ F.matrix
    M = 0.5 * (M + M.conj().T)
    return OperatorMatrix(grid, M, self_adjoint=True)


def build_absorbers(grid: SemiclassicalGrid) -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """(Q0, Q1, Q): multiplication by q0, the multiplier q1(hD), and their sum."""
    Q0 = quantize_position(grid, q0)
    Q1 = quantize_multiplier(grid, q1_symbol)
    return Q0, Q1, Q0 + Q1


def _refine(grid: SemiclassicalGrid, v: np.ndarray, factor: int) -> np.ndarray:
    """Trigonometric interpolation of grid samples onto a grid `factor` times finer."""
    N = grid.N
    c = np.fft.fft(v)
    M = N * factor
    padded = np.zeros(M, dtype=complex)
    half = N // 2
    padded[:half] = c[:half]
    padded[-half:] = c[-half:]
    # split the Nyquist coefficient symmetrically
    padded[half] = 0.5 * c[half]
    padded[-half] = 0.5 * c[half]
    return np.fft.ifft(padded) * factor


def _half_line_solve(xs: np.ndarray, g: np.ndarray, qv: np.ndarray, h: float) -> np.ndarray:
    """Solve (x d/dx + 1/2 + q/h) u = g on an increasing |x| axis starting at |x| = xs[0], u(xs[0]) = 0.

    xs holds |x| values (positive, increasing); g and qv are sampled at xs.
    """
    phase = 0.5 * np.log(xs / xs[0]) + cumulative_simpson(qv / (h * xs), x=xs, initial=0.0)
    shift = phase.max()
    weight = np.exp(phase - shift)
    integrand = weight * g / xs
    integral = cumulative_simpson(integrand.real, x=xs, initial=0.0) + 1j * cumulative_simpson(
        integrand.imag, x=xs, initial=0.0
    )
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(shift - phase) * integral


def build_u2(
    grid: SemiclassicalGrid,
    f1: np.ndarray,
    refine: int = 16,
    inner_tol: float | None = 1e-6,
    seam_tol: float = 1e-8,
) -> np.ndarray:
    """Solve (P0 - i q0) u2 = -f1 on |x| > 1 with u2 = 0 on [-1, 1].

    In h-free form (x d/dx + 1/2 + q0/h) u2 = -(i/h) f1, integrated outward
    from x = +-1 with the integrating factor exp(int_1^x (1/2 + q0/h)/s ds).
    f1 is interpolated trigonometrically onto a finer grid for the
    quadrature and the result is sampled back.
    """
    h = grid.h
    if not np.any(f1):
        return np.zeros(grid.N, dtype=complex)
    inside = np.abs(grid.x) <= 1.0
    leak = np.linalg.norm(f1[inside])
    if inner_tol is not None and leak > inner_tol * np.linalg.norm(f1):
        raise ConstructionError(f"f1 not negligible on [-1, 1]: relative mass {leak / np.linalg.norm(f1):.2e}")
    M = grid.N * refine
    xf = -grid.L / 2 + np.arange(M) * grid.L / M
    gf = -(1j / h) * _refine(grid, f1, refine)
    qf = q0(xf)
    uf = np.zeros(M, dtype=complex)
    for sign in (1.0, -1.0):
        sel = np.flatnonzero(sign * xf >= 1.0)
        start = np.flatnonzero(np.abs(xf) <= 1.0)
        # begin at the last fine point inside [-1, 1] on this side
        anchor = start[np.argmax(sign * xf[start])]
        order = np.concatenate([[anchor], sel[np.argsort(sign * xf[sel])]])
        xs = sign * xf[order]
        uf[order] = _half_line_solve(xs, gf[order], qf[order], h)
    uf[np.abs(xf) <= 1.0] = 0.0
    u2 = uf[::refine].copy()
    u2[inside] = 0.0
    peak = np.abs(u2).max()
    seam = max(abs(u2[0]), abs(u2[-1]))
    if peak > 0 and seam > seam_tol * peak:
        raise DampingError(f"u2 seam value {seam / peak:.2e} of its peak; h={h} too large")
    return u2


@dataclass(frozen=True)
class ModelBundle:
    grid: SemiclassicalGrid
    profile: ChiProfile
    P: OperatorMatrix
    Q0: OperatorMatrix
    Q1: OperatorMatrix
    Q: OperatorMatrix
    A: OperatorMatrix
    chi1: np.ndarray
    u0: np.ndarray
    f0: np.ndarray
    u1: np.ndarray
    f1: np.ndarray
    u2: np.ndarray
    gamma_plus: str = GAMMA_PLUS
    gamma_minus: str = GAMMA_MINUS
    trapped_set: str = TRAPPED_SET

    @property
    def h(self) -> float:
        return self.grid.h

    @cached_property
    def T(self) -> np.ndarray:
        """Dense matrix of P - iQ."""
        return self.P.matrix - 1j * self.Q.matrix

    @property
    def u(self) -> np.ndarray:
        return self.u1 + self.u2

    @property
    def forcing(self) -> np.ndarray:
        """chi1 f0."""
        return self.chi1 * self.f0

    @cached_property
    def residual(self) -> np.ndarray:
        """(P - iQ) u - chi1 f0."""
        return self.T @ self.u - self.forcing

    def norm(self, v: np.ndarray) -> float:
        return self.grid.norm(v)


def build_cutoff_A(grid: SemiclassicalGrid) -> OperatorMatrix:
    """Symmetrized quantization of a_symbol; equal to 1 microlocally near {x = 0, 1/2 < xi < 1}."""
    return symmetrize(quantize_symbol(grid, a_symbol))


def assemble_witness(
    grid: SemiclassicalGrid,
    profile: ChiProfile | None = None,
    leak_tol: float = 1e-3,
    seam_tol: float = 1e-5,
) -> ModelBundle:
    """Build every model object at the grid's h.

    ``leak_tol`` bounds the relative mass of f1 on [-1, 1]; cutoff tails make
    it about 1e-4 at h = 0.05 and below 1e-6 for h <= 0.02.  ``seam_tol``
    bounds |u2| at x = +-3 relative to its peak (about 1e-6 at h = 0.05).
    """
    profile = profile or ChiProfile()
    P = build_operator_P(grid)
    Q0, Q1, Q = build_absorbers(grid)
    u0, f0 = build_u0_f0(grid, profile)
    chi1 = CHI1(grid.x)
    u1 = chi1 * u0
    f1 = P.matrix @ u1 - 1j * (Q0.matrix @ u1) - chi1 * f0
    u2 = build_u2(grid, f1, inner_tol=leak_tol, seam_tol=seam_tol)
    A = build_cutoff_A(grid)
    return ModelBundle(grid, profile, P, Q0, Q1, Q, A, chi1, u0, f0, u1, f1, u2)


def certified_lower_bound(bundle: ModelBundle, resolvent_norm: float | None = None, sigma_min: float | None = None) -> float:
    """Lower bound for ||R(0) A|| from the quasimode.

    R(0) A chi1 f0 = u - R(0) r - R(0)(I - A) chi1 f0, hence
    ||R(0) A|| >= (||u|| - ||R(0)|| (||r|| + ||(I - A) chi1 f0||)) / ||chi1 f0||.
    ``resolvent_norm`` (= 1/sigma_min of P - iQ) is computed if not given.
    """
    if resolvent_norm is None:
        if sigma_min is None:
            sigma_min = float(np.linalg.svd(bundle.T, compute_uv=False)[-1])
        if sigma_min <= 1e-14:
            raise NearSingularError(f"sigma_min(P - iQ) = {sigma_min:.2e}")
        resolvent_norm = 1.0 / sigma_min
    elif not np.isfinite(resolvent_norm) or resolvent_norm >= 1e14:
        raise NearSingularError("P - iQ is numerically singular at lambda = 0")
    u_norm = bundle.norm(bundle.u)
    if u_norm == 0.0:
        return 0.0
    g = bundle.forcing
    g_norm = bundle.norm(g)
    leak = bundle.norm(g - bundle.A.matrix @ g)
    correction = resolvent_norm * (bundle.norm(bundle.residual) + leak)
    if correction >= u_norm or g_norm == 0.0:
        return 0.0
    return (u_norm - correction) / g_norm
