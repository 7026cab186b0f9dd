"""Discrete semiclassical quantization on the circle R/6Z.

Functions on the circle are sampled at ``x_j = -3 + j L / N`` and the
semiclassical frequencies are ``xi_k = h 2 pi k / L``, stored in FFT order
(``numpy.fft.fftfreq``).  Operators are dense ``N x N`` complex matrices
wrapped in :class:`OperatorMatrix`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridMismatchError, ParameterRangeError, SeamError

CIRCUMFERENCE = 6.0
H_MAX = 0.2

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SemiclassicalGrid:
    h: float
    N: int
    L: float = CIRCUMFERENCE
    x: np.ndarray = field(init=False, repr=False, compare=False)
    xi: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ParameterRangeError(f"N={self.N} is not a power of two")
        if not 0 < self.h <= H_MAX:
            raise ParameterRangeError(f"h={self.h} outside (0, {H_MAX}]")
        x = -self.L / 2 + np.arange(self.N) * self.L / self.N
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        xi = self.h * 2 * np.pi * k / self.L
        x.flags.writeable = False
        xi.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def xi_max(self) -> float:
        return self.h * math.pi * self.N / self.L

    @property
    def modes(self) -> np.ndarray:
        """Integer wavenumbers k in FFT order."""
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(int)

    def fft(self, u: np.ndarray) -> np.ndarray:
        """Unitary discrete Fourier map Phi."""
        return np.fft.fft(u, axis=0, norm="ortho")

    def ifft(self, c: np.ndarray) -> np.ndarray:
        return np.fft.ifft(c, axis=0, norm="ortho")

    def plane_wave(self, k: int) -> np.ndarray:
        """Samples of exp(2 pi i k x / L); an eigenvector of hD with eigenvalue h 2 pi k / L."""
        return np.exp(2j * np.pi * k * self.x / self.L)

    def mode_for(self, xi0: float) -> int:
        """Nearest integer wavenumber to the semiclassical frequency xi0."""
        return int(round(xi0 * self.L / (2 * np.pi * self.h)))

    def norm(self, u: np.ndarray) -> float:
        """Discrete L^2(X) norm, sqrt(dx * sum |u|^2)."""
        return float(np.sqrt(self.dx) * np.linalg.norm(u))

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Discrete L^2 pairing <u, v>, linear in u."""
        return complex(self.dx * np.vdot(v, u))

    def coherent_state(self, x0: float, xi0: float, width: float | None = None) -> np.ndarray:
        """Periodized Gaussian wave packet centred at (x0, xi0) with spatial width sqrt(h)."""
        s = math.sqrt(self.h) if width is None else width
        d = (self.x - x0 + self.L / 2) % self.L - self.L / 2
        g = np.exp(-(d**2) / (2 * s**2) + 1j * xi0 * d / self.h)
        return g / self.norm(g)


def make_grid(h: float, margin: float = 1.0) -> SemiclassicalGrid:
    """Grid on R/6Z with N the smallest power of two >= margin * 16 / h."""
    if not 0 < h <= H_MAX:
        raise ParameterRangeError(f"h={h} outside (0, {H_MAX}]")
    if margin < 1:
        raise ParameterRangeError(f"margin={margin} must be >= 1")
    N = 1 << max(1, math.ceil(math.log2(margin * 16.0 / h - 1e-9)))
    grid = SemiclassicalGrid(h=h, N=N)
    assert grid.xi_max >= 4.0
    return grid


def _smooth_zero(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = _smooth_zero(t)
    b = _smooth_zero(1.0 - t)
    return a / (a + b)


@dataclass(frozen=True)
class SmoothCutoff:
    """Plateau function: 0 outside (a, d), 1 on [b, c], C-infinity in between.

    ``a`` may be ``-inf`` and ``d`` may be ``+inf`` for one-sided cutoffs.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a < self.b <= self.c < self.d):
            raise ParameterRangeError(f"breakpoints must satisfy a < b <= c < d, got {self}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left = np.ones_like(x) if math.isinf(self.a) else smooth_step((x - self.a) / (self.b - self.a))
        right = np.ones_like(x) if math.isinf(self.d) else smooth_step((self.d - x) / (self.d - self.c))
        return left * right

    @classmethod
    def symmetric(cls, inner: float, outer: float) -> "SmoothCutoff":
        """Even cutoff equal to 1 on [-inner, inner], supported in (-outer, outer)."""
        return cls(-outer, -inner, inner, outer)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix of a quantized operator together with structural flags.

    Flags are metadata asserted by the constructor that produced the
    matrix; :meth:`check_flags` verifies them numerically.
    """

    grid: SemiclassicalGrid
    matrix: np.ndarray
    self_adjoint: bool = False
    fourier_diagonal: bool = False
    x_diagonal: bool = False

    def __post_init__(self):
        n = self.grid.N
        if self.matrix.shape != (n, n):
            raise GridMismatchError(f"matrix shape {self.matrix.shape} does not match N={n}")

    @property
    def N(self) -> int:
        return self.grid.N

    def _same_grid(self, other: "OperatorMatrix"):
        if other.grid.N != self.grid.N or other.grid.h != self.grid.h:
            raise GridMismatchError("operators live on different grids")

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            self._same_grid(other)
            return OperatorMatrix(
                self.grid,
                self.matrix @ other.matrix,
                fourier_diagonal=self.fourier_diagonal and other.fourier_diagonal,
                x_diagonal=self.x_diagonal and other.x_diagonal,
            )
        return self.matrix @ other

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._same_grid(other)
        return OperatorMatrix(
            self.grid,
            self.matrix + other.matrix,
            self_adjoint=self.self_adjoint and other.self_adjoint,
            fourier_diagonal=self.fourier_diagonal and other.fourier_diagonal,
            x_diagonal=self.x_diagonal and other.x_diagonal,
        )

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "OperatorMatrix":
        real = np.isreal(c)
        return OperatorMatrix(
            self.grid,
            c * self.matrix,
            self_adjoint=self.self_adjoint and bool(real),
            fourier_diagonal=self.fourier_diagonal,
            x_diagonal=self.x_diagonal,
        )

    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(
            self.grid,
            self.matrix.conj().T,
            self_adjoint=self.self_adjoint,
            fourier_diagonal=self.fourier_diagonal,
            x_diagonal=self.x_diagonal,
        )

    def norm(self) -> float:
        """Operator 2-norm."""
        return float(np.linalg.norm(self.matrix, 2))

    def check_flags(self, rng: np.random.Generator | None = None) -> None:
        """Raise AssertionError if a structural flag does not hold numerically."""
        T = self.matrix
        scale = max(np.abs(T).max(), 1e-300)
        if self.self_adjoint:
            assert np.abs(T - T.conj().T).max() <= 1e-12 * scale, "not self-adjoint"
        if self.x_diagonal:
            assert np.abs(T - np.diag(np.diag(T))).max() <= 1e-12 * scale, "not x-diagonal"
        if self.fourier_diagonal:
            rng = rng or np.random.default_rng(0)
            Phi = self.grid.fft(np.eye(self.N, dtype=complex))
            diag = np.einsum("ij,jk,ik->i", Phi, T, Phi.conj())
            v = rng.standard_normal(self.N) + 1j * rng.standard_normal(self.N)
            lhs = T @ v
            rhs = self.grid.ifft(diag * self.grid.fft(v))
            assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(lhs), 1e-300), "not Fourier-diagonal"


def identity(grid: SemiclassicalGrid) -> OperatorMatrix:
    return OperatorMatrix(grid, np.eye(grid.N, dtype=complex), True, True, True)


def _fourier_conjugate(grid: SemiclassicalGrid, g: np.ndarray) -> np.ndarray:
    # Phi^dagger diag(g) Phi, built column by column
    eye = np.eye(grid.N, dtype=complex)
    return grid.ifft(g[:, None] * grid.fft(eye))


def quantize_multiplier(grid: SemiclassicalGrid, g: ArrayFn) -> OperatorMatrix:
    """Fourier multiplier g(hD)."""
    vals = np.asarray(g(grid.xi), dtype=complex)
    if vals.shape != (grid.N,):
        vals = np.broadcast_to(vals, (grid.N,)).astype(complex)
    real = bool(np.all(vals.imag == 0))
    return OperatorMatrix(grid, _fourier_conjugate(grid, vals), self_adjoint=real, fourier_diagonal=True)


def quantize_position(grid: SemiclassicalGrid, m: ArrayFn, seam_tol: float = 1e-12) -> OperatorMatrix:
    """Multiplication by m(x); m must take equal values at x = -3 and x = 3."""
    left = complex(np.asarray(m(np.array([-grid.L / 2])))[0])
    right = complex(np.asarray(m(np.array([grid.L / 2])))[0])
    if abs(left - right) > seam_tol:
        raise SeamError(f"m(-3)={left} differs from m(3)={right}")
    vals = np.asarray(m(grid.x), dtype=complex)
    if vals.shape != (grid.N,):
        vals = np.broadcast_to(vals, (grid.N,)).astype(complex)
    real = bool(np.all(vals.imag == 0))
    return OperatorMatrix(grid, np.diag(vals), self_adjoint=real, x_diagonal=True)


def symbol_table(grid: SemiclassicalGrid, a: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """a(x_j, xi_k) as an N x N array (rows: x, columns: FFT-ordered xi)."""
    vals = np.asarray(a(grid.x[:, None], grid.xi[None, :]), dtype=complex)
    return np.broadcast_to(vals, (grid.N, grid.N))


def quantize_symbol(grid: SemiclassicalGrid, a: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> OperatorMatrix:
    """Kohn-Nirenberg quantization: symbol evaluated at the output point.

    (Op(a) u)(x_j) = N^-1 sum_k sum_l a(x_j, xi_k) exp(2 pi i k (j - l) / N) u(x_l)
    """
    N = grid.N
    table = symbol_table(grid, a)
    j = np.arange(N)
    E = np.exp(2j * np.pi * np.outer(j, grid.modes) / N)
    M = (table * E) @ E.conj().T / N
    return OperatorMatrix(grid, M)


def symmetrize(T: OperatorMatrix) -> OperatorMatrix:
    """Hermitian part (T + T^dagger) / 2."""
    M = 0.5 * (T.matrix + T.matrix.conj().T)
    return OperatorMatrix(T.grid, M, self_adjoint=True, fourier_diagonal=T.fourier_diagonal, x_diagonal=T.x_diagonal)


def commutator_scaled(A: OperatorMatrix, B: OperatorMatrix, h: float | None = None) -> OperatorMatrix:
    """(ih)^-1 [A, B]; its symbol is the Poisson bracket -i{a, b} up to O(h)."""
    A._same_grid(B)
    h = A.grid.h if h is None else h
    M = (A.matrix @ B.matrix - B.matrix @ A.matrix) / (1j * h)
    return OperatorMatrix(A.grid, M)


def fourier_mass_outside(grid: SemiclassicalGrid, u: np.ndarray, lo: float, hi: float) -> float:
    """Fraction of ||u||^2 carried by frequencies xi_k outside [lo, hi]."""
    c = np.abs(grid.fft(u)) ** 2
    outside = (grid.xi < lo) | (grid.xi > hi)
    total = c.sum()
    return float(c[outside].sum() / total) if total > 0 else 0.0
