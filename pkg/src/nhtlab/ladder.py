"""Ladder operator Theta and transport along the outgoing manifold.

Theta quantizes the defining function phi_+ = xi of the outgoing manifold.
For the model it intertwines consecutive resonance bands:
Theta (P - i h m) = (P - i h (m + 1)) Theta microlocally near the trapped set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, solve_ivp

from .errors import DomainError, ParameterRangeError, ProbeError
from .gridquant import (
    OperatorMatrix,
    SemiclassicalGrid,
    SmoothCutoff,
    fourier_mass_outside,
    quantize_multiplier,
    quantize_symbol,
    symmetrize,
)
from .model1d import P_FREQ_CUTOFF

PROBE_X = 1.5
PROBE_XI = 1.5
PROBE_TOL = 1e-4
WINDOW_B = SmoothCutoff.symmetric(0.5, 0.75)


def build_theta(grid: SemiclassicalGrid) -> OperatorMatrix:
    """F(hD) hD F(hD), a Fourier multiplier with symbol F(xi)^2 xi."""
    return quantize_multiplier(grid, lambda xi: P_FREQ_CUTOFF(xi) ** 2 * xi)


def build_window_B(grid: SemiclassicalGrid) -> OperatorMatrix:
    """Microlocal cutoff equal to 1 on {|x| <= 1/2, |xi| <= 1/2}."""
    return symmetrize(quantize_symbol(grid, lambda x, xi: WINDOW_B(x) * WINDOW_B(xi)))


def check_probe(grid: SemiclassicalGrid, v: np.ndarray, tol: float = PROBE_TOL) -> None:
    """Raise ProbeError unless v is concentrated in {|x| <= 1.5, |xi| <= 1.5}."""
    total = grid.norm(v) ** 2
    if total == 0:
        raise ProbeError("zero probe")
    fmass = fourier_mass_outside(grid, v, -PROBE_XI, PROBE_XI)
    xmass = grid.dx * float(np.sum(np.abs(v[np.abs(grid.x) > PROBE_X]) ** 2)) / total
    if fmass > tol or xmass > tol:
        raise ProbeError(f"probe mass outside window: frequency {fmass:.1e}, position {xmass:.1e}")


def intertwine_residual(
    grid: SemiclassicalGrid, P: OperatorMatrix, Theta: OperatorMatrix, m: int, probes: list[np.ndarray]
) -> float:
    """max over probes of ||[Theta (P - i h m) - (P - i h (m + 1)) Theta] v|| / ||v||."""
    h = grid.h
    worst = 0.0
    for v in probes:
        check_probe(grid, v)
        Pv = P @ v
        Tv = Theta @ v
        lhs = Theta @ (Pv - 1j * h * m * v)
        rhs = P @ Tv - 1j * h * (m + 1) * Tv
        worst = max(worst, grid.norm(lhs - rhs) / grid.norm(v))
    return worst


def default_probes(grid: SemiclassicalGrid, count: int = 12, seed: int = 0) -> list[np.ndarray]:
    """Coherent states at seeded random centres in [-1, 1] x [-1, 1]."""
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-1.0, 1.0, size=(count, 2))
    return [grid.coherent_state(x0, xi0) for x0, xi0 in centres]


@dataclass(frozen=True)
class DescentSequence:
    vectors: list[np.ndarray]
    micro_norms: np.ndarray


def descend(grid: SemiclassicalGrid, Theta: OperatorMatrix, u: np.ndarray, depth: int, B: OperatorMatrix | None = None) -> DescentSequence:
    """Apply Theta repeatedly; record ||B Theta^k u|| for k = 0..depth."""
    if depth < 0:
        raise ParameterRangeError("depth must be non-negative")
    B = B if B is not None else build_window_B(grid)
    vecs = [np.asarray(u, dtype=complex)]
    for _ in range(depth):
        vecs.append(Theta @ vecs[-1])
    norms = np.array([grid.norm(B @ v) for v in vecs])
    return DescentSequence(vecs, norms)


def microlocal_correlation(grid: SemiclassicalGrid, B: OperatorMatrix, u: np.ndarray, v: np.ndarray) -> float:
    """|<Bu, Bv>| / (||Bu|| ||Bv||)."""
    bu = B @ u
    bv = B @ v
    den = grid.norm(bu) * grid.norm(bv)
    return abs(grid.inner(bu, bv)) / den if den > 0 else 0.0


@dataclass(frozen=True)
class TransportResult:
    values: np.ndarray
    T_max: float
    dt: float


def transport_solve(
    chart,
    f: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    nu_min: float,
    nu_max: float,
    eps: float | None = None,
    T_max: float | None = None,
    dt: float | None = None,
    rtol: float = 1e-12,
) -> TransportResult:
    """Solve (H_p + c_+) u = f on the outgoing manifold inside U_delta.

    u(rho) = int_0^T exp(-int_0^tau c_+(e^{-s H_p} rho) ds) f(e^{-tau H_p} rho) dtau
    along numerically integrated backward trajectories; T is chosen so that
    exp(-(nu_min - eps) T) <= 1e-10.  The tau integral uses composite
    Simpson on a grid with dt <= 0.01 / nu_max.  A trajectory leaving U_delta
    raises DomainError.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    eps = 0.1 * nu_min if eps is None else eps
    if T_max is None:
        T_max = np.log(1e10) / (nu_min - eps)
    if dt is None:
        dt = 0.01 / nu_max
    n = int(np.ceil(T_max / dt))
    n += n % 2
    taus = np.linspace(0.0, T_max, n + 1)
    out = np.empty(len(pts))
    for i, z in enumerate(pts):
        if not chart.in_U(z):
            raise DomainError(f"base point {z} outside U_delta", exit_time=0.0)
        sol = solve_ivp(
            lambda t, y: -chart.hamilton(y), (0.0, T_max), z, method="DOP853", t_eval=taus, rtol=rtol, atol=rtol * 1e-2
        )
        traj = sol.y.T
        inside = np.array([chart.in_U(y) for y in traj])
        if not inside.all():
            k = int(np.argmin(inside))
            raise DomainError(f"backward trajectory from {z} left U_delta", exit_time=float(taus[k]))
        c = chart.c_plus(traj)
        damping = cumulative_simpson(c, x=taus, initial=0.0)
        out[i] = simpson(np.exp(-damping) * f(traj), x=taus)
    return TransportResult(out, float(T_max), float(taus[1] - taus[0]))
