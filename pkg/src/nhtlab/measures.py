"""Discrete phase-space diagnostics standing in for semiclassical defect measures.

Densities use the Husimi (coherent state) transform, which is nonnegative;
pairings use the symmetrized Kohn-Nirenberg quantization, which satisfies the
commutator identities exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterRangeError
from .gridquant import OperatorMatrix, SemiclassicalGrid, SmoothCutoff, quantize_symbol, symmetrize

Symbol = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ResolutionWarning(UserWarning):
    """A requested scale is below the coherent-state resolution 3 sqrt(h)."""


@dataclass(frozen=True)
class PhaseSpaceDensity:
    """Husimi mass on cells centred at (x_centers[i], xi_centers[k]); xi is the semiclassical frequency."""

    h: float
    N: int
    x_centers: np.ndarray
    xi_centers: np.ndarray
    mass: np.ndarray
    width: float

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def mass_where(self, mask_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        """Total mass of cells whose centre satisfies mask_fn(x, xi)."""
        X, XI = np.meshgrid(self.x_centers, self.xi_centers, indexing="ij")
        return float(self.mass[mask_fn(X, XI)].sum())

    def normalized(self) -> "PhaseSpaceDensity":
        t = self.total
        return PhaseSpaceDensity(self.h, self.N, self.x_centers, self.xi_centers, self.mass / t, self.width)


def _window(grid: SemiclassicalGrid, width: float) -> np.ndarray:
    """Periodized Gaussian exp(-x^2 / (2 width^2)) centred at x = 0 on the grid."""
    d = grid.x[:, None] + grid.L * np.arange(-2, 3)[None, :]
    return np.exp(-(d**2) / (2 * width**2)).sum(axis=1)


def husimi(grid: SemiclassicalGrid, u: np.ndarray, width: float | None = None, chunk: int = 256) -> PhaseSpaceDensity:
    """Coherent-state density of u with window width sqrt(h) (default).

    Window centres sit on every grid point, so sum_a |g(x_j - x_a)|^2 is the
    same for every j and the total mass equals ||u||^2 up to rounding.
    """
    u = np.asarray(u, dtype=complex)
    if grid.norm(u) == 0:
        raise ParameterRangeError("husimi needs a nonzero vector")
    width = math.sqrt(grid.h) if width is None else width
    N = grid.N
    g = _window(grid, width)
    zero = int(np.argmin(np.abs(grid.x)))
    g = np.roll(g, -zero)
    S = float(np.sum(np.abs(g) ** 2))
    order = np.argsort(grid.xi)
    mass = np.empty((N, N))
    idx = np.arange(N)
    for start in range(0, N, chunk):
        a = np.arange(start, min(start + chunk, N))
        W = g[(idx[None, :] - a[:, None]) % N]
        F = np.fft.fft(W * u[None, :], axis=1, norm="ortho")
        mass[a] = (np.abs(F) ** 2)[:, order]
    mass *= grid.dx / S
    return PhaseSpaceDensity(grid.h, N, grid.x.copy(), grid.xi[order].copy(), mass, width)


def density_to_csv(density: PhaseSpaceDensity, path: str | Path, stride: int = 1) -> None:
    """Write (x_center, xi_center, mass) rows; ``stride`` subsamples both axes."""
    with open(path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "N", "x_center", "xi_center", "mass"])
        for i in range(0, len(density.x_centers), stride):
            for k in range(0, len(density.xi_centers), stride):
                w.writerow(
                    [
                        repr(density.h),
                        density.N,
                        f"{density.x_centers[i]:.10g}",
                        f"{density.xi_centers[k]:.10g}",
                        f"{density.mass[i, k]:.10e}",
                    ]
                )


def quantize_pairing_symbol(grid: SemiclassicalGrid, a: Symbol) -> OperatorMatrix:
    return symmetrize(quantize_symbol(grid, a))


def pair_with_symbol(grid: SemiclassicalGrid, u: np.ndarray, a: Symbol | OperatorMatrix) -> complex:
    """<Op(a) u, u> with the symmetrized quantization of a."""
    A = a if isinstance(a, OperatorMatrix) else quantize_pairing_symbol(grid, a)
    return grid.inner(A @ u, u)


def propagation_defect(
    grid: SemiclassicalGrid,
    u: np.ndarray,
    P: OperatorMatrix,
    W: OperatorMatrix | None,
    lam: complex,
    a: Symbol | OperatorMatrix,
) -> float:
    """|<((ih)^-1 [A, P] - (AW + WA)) u, u> - 2 (Im lam / h) <A u, u>|.

    For self-adjoint P, W and (P - ihW) u = lam u this vanishes identically,
    so on a computed eigenvector it measures the eigenpair residual plus
    whatever part of W the caller dropped.
    """
    A = a if isinstance(a, OperatorMatrix) else quantize_pairing_symbol(grid, a)
    h = grid.h
    Au = A @ u
    PAu = P @ Au
    APu = A @ (P @ u)
    term = (APu - PAu) / (1j * h)
    if W is not None:
        term = term - (A @ (W @ u) + W @ Au)
    value = grid.inner(term, u) - 2 * (lam.imag / h) * grid.inner(Au, u)
    return float(abs(value))


@dataclass(frozen=True)
class LipschitzRow:
    delta0: float
    mass: float
    ratio: float
    resolved: bool


def transverse_lipschitz(
    density: PhaseSpaceDensity,
    delta0s: Sequence[float],
    delta: float | None = None,
    phi_minus: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> list[LipschitzRow]:
    """mu(U_delta and {|phi_-| < delta0}) / delta0 for each delta0.

    phi_- defaults to x (the model chart).  With ``delta`` the cells are also
    restricted to U_delta = {|xi| < delta, |x| < delta, |x xi| < delta}.
    Scales below 3 sqrt(h) trigger a ResolutionWarning but are still returned.
    """
    d = density.normalized()
    phi = phi_minus or (lambda x, xi: x)
    res = 3 * math.sqrt(d.h)
    rows = []
    for d0 in delta0s:
        if d0 <= 0:
            raise ParameterRangeError("delta0 must be positive")
        resolved = d0 >= res
        if not resolved:
            warnings.warn(f"delta0={d0} below resolution 3 sqrt(h)={res:.3g}", ResolutionWarning, stacklevel=2)

        def mask(x, xi, d0=d0):
            m = np.abs(phi(x, xi)) < d0
            if delta is not None:
                m &= (np.abs(xi) < delta) & (np.abs(x) < delta) & (np.abs(x * xi) < delta)
            return m

        mass = d.mass_where(mask)
        rows.append(LipschitzRow(float(d0), mass, mass / d0, resolved))
    return rows


def lipschitz_spread(rows: Sequence[LipschitzRow]) -> float:
    """max ratio / min ratio over a table."""
    r = np.array([row.ratio for row in rows])
    return float(r.max() / r.min()) if r.min() > 0 else math.inf


def wavefront_mass_outside(density: PhaseSpaceDensity, nbhd: float = 0.1) -> float:
    """Normalized mass outside the nbhd-neighbourhood of {xi = 0} and {x = 0, 0 <= xi <= 1}."""
    d = density.normalized()

    def near(x, xi):
        horizontal = np.abs(xi) <= nbhd
        vertical = (np.abs(x) <= nbhd) & (xi >= -nbhd) & (xi <= 1 + nbhd)
        return horizontal | vertical

    return 1.0 - d.mass_where(near)


def elliptic_mass(density: PhaseSpaceDensity, level: float = 0.2, delta: float = 0.5) -> float:
    """Normalized mass on {|x xi| > level} inside the box |x|, |xi| < delta."""
    d = density.normalized()
    return d.mass_where(lambda x, xi: (np.abs(x * xi) > level) & (np.abs(x) < delta) & (np.abs(xi) < delta))


def flowed_box_mass(grid: SemiclassicalGrid, u: np.ndarray, delta: float, t: float) -> float:
    """<Op(b_t) u, u> / ||u||^2 for a smooth indicator b_t of e^{-t H_p}(U_delta), p = x xi.

    The backward flow of p = x xi maps (x, xi) to (x e^-t, xi e^t), so the
    image of the box is {|x| < delta e^-t, |xi| < delta e^t}.
    """
    bx = SmoothCutoff.symmetric(0.8 * delta * math.exp(-t), delta * math.exp(-t))
    bxi = SmoothCutoff.symmetric(0.8 * delta * math.exp(t), delta * math.exp(t))
    val = pair_with_symbol(grid, u, lambda x, xi: bx(x) * bxi(xi))
    return float(val.real) / grid.norm(u) ** 2
