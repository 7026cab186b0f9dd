"""Dense non-self-adjoint spectral computations for P - iQ.

Resonances of the model are eigenvalues of the matrix P - iQ.  Resolvent
norms are 1/sigma_min(P - iQ - lambda), computed by block inverse iteration
on (T - lambda)^dagger (T - lambda) with a single LU factorization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import InsufficientDataError, ParameterRangeError, SolverError
from .gridquant import OperatorMatrix
from .model1d import ModelBundle

POLE_THRESHOLD = 1e-14
RESIDUAL_TOL = 1e-8
MAX_DENSE = 4096


def _as_array(T) -> np.ndarray:
    if isinstance(T, OperatorMatrix):
        return T.matrix
    if isinstance(T, ModelBundle):
        return T.T
    return np.asarray(T)


def spectral_norm_estimate(T: np.ndarray, iters: int = 40, seed: int = 0) -> float:
    """Power iteration estimate of ||T||_2 (from below, typically to 1e-6 relative)."""
    n = T.shape[0]
    if n <= 64:
        return float(np.linalg.norm(T, 2))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(iters):
        w = T.conj().T @ (T @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        s = math.sqrt(nw)
    return s


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    matrix_norm: float

    def __iter__(self) -> Iterator[tuple[complex, np.ndarray]]:
        for i in range(self.values.size):
            yield complex(self.values[i]), self.vectors[:, i]

    def __len__(self) -> int:
        return self.values.size


def eig_dense(T, residual_tol: float = RESIDUAL_TOL) -> EigenDecomposition:
    """All eigenpairs of a dense matrix via LAPACK zgeev (Hessenberg reduction + shifted QR).

    Every pair is checked: ||(T - lambda) v|| / ||T|| <= residual_tol with
    ||v|| = 1; a failing pair raises SolverError carrying its index.
    """
    M = np.asarray(_as_array(T), dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ParameterRangeError(f"matrix must be square, got {M.shape}")
    if n > MAX_DENSE:
        raise ParameterRangeError(f"N={n} exceeds dense limit {MAX_DENSE}")
    try:
        w, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigenvalue iteration did not converge: {exc}") from exc
    V = V / np.linalg.norm(V, axis=0)
    scale = spectral_norm_estimate(M) or 1.0
    res = np.linalg.norm(M @ V - V * w, axis=0) / scale
    bad = np.flatnonzero(~(res <= residual_tol))
    if bad.size:
        raise SolverError(f"eigenpair residual {res[bad[0]]:.2e} above {residual_tol}", index=int(bad[0]))
    return EigenDecomposition(w, V, res, scale)


def bundle_spectrum(bundle: ModelBundle) -> EigenDecomposition:
    """Eigen-decomposition of P - iQ, cached on the bundle instance."""
    cache = bundle.__dict__
    if "_spectrum" not in cache:
        cache["_spectrum"] = eig_dense(bundle.T)
    return cache["_spectrum"]


@dataclass(frozen=True)
class ResonanceReport:
    h: float
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    matrix_norm: float
    window: tuple[float, float, float] = (1.0, 4.0, 0.5)

    @property
    def ladder(self) -> np.ndarray:
        """(Re lambda / h, Im lambda / h) per eigenvalue."""
        return np.column_stack([self.eigenvalues.real / self.h, self.eigenvalues.imag / self.h])

    @property
    def bands(self) -> np.ndarray:
        """Nearest integer to -Im lambda/h - 1/2 for |Re lambda| <= h, else -1."""
        m = np.rint(-self.eigenvalues.imag / self.h - 0.5).astype(int)
        m[np.abs(self.eigenvalues.real) > self.h] = -1
        return m

    def closest_to(self, target_over_h: complex) -> int:
        """Index of the eigenvalue nearest to h * target_over_h."""
        d = np.abs(self.eigenvalues / self.h - target_over_h)
        return int(np.argmin(d))

    def band_member(self, m: int, re_tol: float = 0.2, im_tol: float = 0.15) -> int | None:
        """Index of the eigenvalue best matching -(m + 1/2) i h within the tolerances, or None."""
        z = self.eigenvalues / self.h
        ok = (np.abs(z.real) <= re_tol) & (np.abs(z.imag + m + 0.5) <= im_tol)
        if not ok.any():
            return None
        idx = np.flatnonzero(ok)
        return int(idx[np.argmin(np.abs(z[idx] + 1j * (m + 0.5)))])

    def with_extra(self, eigenvalue: complex) -> "ResonanceReport":
        """Copy with one more eigenvalue (no eigenvector); for exercising the gap logic."""
        vec = np.zeros((self.vectors.shape[0], 1), dtype=complex)
        return ResonanceReport(
            self.h,
            np.append(self.eigenvalues, eigenvalue),
            np.hstack([self.vectors, vec]),
            np.append(self.residuals, 0.0),
            self.matrix_norm,
            self.window,
        )


def resonance_ladder(
    bundle: ModelBundle, rho: float = 1.0, M: float = 4.0, top: float = 0.5, spectrum: EigenDecomposition | None = None
) -> ResonanceReport:
    """Eigenvalues of P - iQ in {|Re lambda| <= rho h, -M <= Im lambda / h <= top}.

    Raises SolverError if any eigenvalue of the full matrix has
    Im lambda > 1e-10 ||T|| (Q >= 0 forbids it).
    """
    spec = spectrum or bundle_spectrum(bundle)
    h = bundle.h
    w = spec.values
    if np.any(w.imag > 1e-10 * spec.matrix_norm):
        i = int(np.argmax(w.imag))
        raise SolverError(f"eigenvalue {w[i]} in the upper half-plane", index=i)
    keep = (np.abs(w.real) <= rho * h) & (w.imag / h >= -M) & (w.imag / h <= top)
    order = np.argsort(-w.imag[keep])
    idx = np.flatnonzero(keep)[order]
    return ResonanceReport(h, w[idx], spec.vectors[:, idx], spec.residuals[idx], spec.matrix_norm, (rho, M, top))


@dataclass(frozen=True)
class StripVerdict:
    m: int
    lo: float
    hi: float
    predicted: bool
    empty: bool | None
    closest_im_over_h: float | None


def strip_bounds(m: int, nu_min: float, nu_max: float, eps: float) -> tuple[float, float]:
    """Bounds on Im lambda / h for the m-th predicted resonance-free strip."""
    if m == 0:
        return -(nu_min - eps) / 2.0, 0.0
    return -(m + 0.5) * nu_min + eps, -(m - 0.5) * nu_max - eps


def gap_scan(report: ResonanceReport, nu_min: float, nu_max: float, eps: float, m_max: int) -> list[StripVerdict]:
    """Check each strip for eigenvalues with |Re lambda| <= h/2.

    Strip 0 is (-(nu_min - eps)/2, 0]; strip m >= 1 is
    [-(m + 1/2) nu_min + eps, -(m - 1/2) nu_max - eps].  An inverted interval
    (pinching fails) is reported with predicted=False.
    """
    if nu_min > nu_max:
        raise ParameterRangeError("nu_min must not exceed nu_max")
    if not 0 < eps < nu_min / 4:
        raise ParameterRangeError(f"eps={eps} outside (0, nu_min/4)")
    z = report.eigenvalues / report.h
    central = z[np.abs(z.real) <= 0.5]
    out = []
    for m in range(m_max + 1):
        lo, hi = strip_bounds(m, nu_min, nu_max, eps)
        if lo > hi:
            out.append(StripVerdict(m, lo, hi, False, None, None))
            continue
        if m == 0:
            inside = (central.imag > lo) & (central.imag <= hi)
        else:
            inside = (central.imag >= lo) & (central.imag <= hi)
        closest = None
        if central.size:
            dist = np.where(inside, 0.0, np.minimum(np.abs(central.imag - lo), np.abs(central.imag - hi)))
            closest = float(central.imag[np.argmin(dist)])
        out.append(StripVerdict(m, lo, hi, True, not bool(inside.any()), closest))
    return out


@dataclass(frozen=True)
class ResolventSample:
    lam: complex
    sigma_min: float
    cutoff_norm: float | None = None

    @property
    def at_pole(self) -> bool:
        return self.sigma_min <= POLE_THRESHOLD

    @property
    def norm(self) -> float:
        return math.inf if self.at_pole else 1.0 / self.sigma_min


def _shifted(T: np.ndarray, lam: complex) -> np.ndarray:
    M = T.astype(complex, copy=True)
    M[np.diag_indices_from(M)] -= lam
    return M


def _lu(M: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return sla.lu_factor(M, check_finite=False)


def _lu_has_zero_pivot(lu) -> bool:
    d = np.abs(np.diag(lu[0]))
    return bool(d.min() <= POLE_THRESHOLD * max(d.max(), 1.0) * 1e-2)


def _block_top_eig(apply, n: int, k: int, tol: float, max_iter: int, seed: int) -> float:
    """Largest eigenvalue of a Hermitian positive operator via block power iteration with Rayleigh-Ritz.

    ``apply(X)`` must return (W, Y) with W^H W = X^H H X and Y = H X, i.e. a
    factored application of H = B^H B with W = B X.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    X, _ = np.linalg.qr(X)
    prev = None
    for _ in range(max_iter):
        W, Y = apply(X)
        G = W.conj().T @ W
        theta = float(np.linalg.eigvalsh(0.5 * (G + G.conj().T))[-1])
        if not np.isfinite(theta):
            return math.inf
        if prev is not None and abs(theta - prev) <= tol * theta:
            return theta
        prev = theta
        X, _ = np.linalg.qr(Y)
    raise SolverError(f"block power iteration did not converge in {max_iter} steps")


def smallest_singular(T, lam: complex, tol: float = 1e-8, block: int = 4, max_iter: int = 500) -> ResolventSample:
    """sigma_min(T - lam) by inverse iteration on (T - lam)^dagger (T - lam).

    One LU factorization of T - lam; each step applies (T - lam)^-dagger then
    (T - lam)^-1.  Converges when the Rayleigh quotient for sigma_min^-2
    changes by less than tol relative.  sigma_min <= 1e-14 marks a pole.
    """
    A = _as_array(T)
    n = A.shape[0]
    if n <= 8:
        s = float(np.linalg.svd(_shifted(A, lam), compute_uv=False)[-1])
        return ResolventSample(complex(lam), s)
    lu = _lu(_shifted(A, lam))
    if _lu_has_zero_pivot(lu):
        return ResolventSample(complex(lam), 0.0)

    def apply(X):
        W = sla.lu_solve(lu, X, trans=2, check_finite=False)
        return W, sla.lu_solve(lu, W, check_finite=False)

    theta = _block_top_eig(apply, n, min(block, n), 2 * tol, max_iter, seed=1)
    sigma = 0.0 if not np.isfinite(theta) or theta <= 0 else 1.0 / math.sqrt(theta)
    return ResolventSample(complex(lam), sigma)


def resolvent_operator_norm(T, lam: complex) -> float:
    """||R(lam)|| = 1/sigma_min(T - lam); inf at a pole."""
    return smallest_singular(T, lam).norm


def cutoff_resolvent_norm(
    bundle_or_T, lam: complex, A=None, tol: float = 1e-6, block: int = 4, max_iter: int = 500
) -> float:
    """Largest singular value of R(lam) A via block power iteration on A^dagger R^dagger R A."""
    if A is None:
        if not isinstance(bundle_or_T, ModelBundle):
            raise ParameterRangeError("A must be given when no bundle is supplied")
        A = bundle_or_T.A
    Amat = _as_array(A)
    T = _as_array(bundle_or_T)
    if not np.any(Amat):
        return 0.0
    n = T.shape[0]
    lu = _lu(_shifted(T, lam))
    if _lu_has_zero_pivot(lu):
        return math.inf

    def apply(X):
        W = sla.lu_solve(lu, Amat @ X, check_finite=False)
        Y = Amat.conj().T @ sla.lu_solve(lu, W, trans=2, check_finite=False)
        return W, Y

    theta = _block_top_eig(apply, n, min(block, n), tol, max_iter, seed=2)
    return math.sqrt(theta) if np.isfinite(theta) else math.inf


@dataclass(frozen=True)
class StripSup:
    sup: float
    argmax: complex
    samples: list[ResolventSample] = field(repr=False)
    gap_violation: bool = False


def resolvent_strip_sup(
    bundle_or_T,
    h: float,
    re_range: tuple[float, float],
    im_range: tuple[float, float],
    counts: tuple[int, int] = (11, 5),
    refine: bool = True,
    predicted_empty: bool = True,
) -> StripSup:
    """Max of ||R(lambda)|| over a grid of lambda / h in re_range x im_range.

    With ``refine`` the grid is doubled once in a cell around the argmax.
    Any sample at a pole inside a strip predicted empty sets gap_violation.
    """
    T = _as_array(bundle_or_T)
    n_re, n_im = counts
    re = np.linspace(*re_range, n_re) if n_re > 1 else np.array([re_range[0]])
    im = np.linspace(*im_range, n_im) if n_im > 1 else np.array([im_range[0]])
    pts = [complex(a, b) for b in im for a in re]
    samples = [smallest_singular(T, h * z) for z in pts]
    if refine and n_re > 1 and n_im > 1:
        best = max(range(len(samples)), key=lambda i: samples[i].norm)
        z0 = pts[best]
        dre = (re[1] - re[0]) / 2
        dim = (im[1] - im[0]) / 2
        extra = []
        for a in (-dre, 0.0, dre):
            for b in (-dim, 0.0, dim):
                z = z0 + complex(a, b)
                if (a or b) and re_range[0] <= z.real <= re_range[1] and im_range[0] <= z.imag <= im_range[1]:
                    extra.append(z)
        samples += [smallest_singular(T, h * z) for z in extra]
    best = max(samples, key=lambda s: s.norm)
    violation = predicted_empty and any(s.at_pole for s in samples)
    return StripSup(best.norm, best.lam, samples, violation)


@dataclass(frozen=True)
class ScalingFit:
    a: float
    b: float
    residual: float


def scaling_fit(hs: Sequence[float], values: Sequence[float], model: str = "powerlog", fixed_a: float | None = None) -> ScalingFit:
    """Least squares fit of values ~ C h^a log(1/h)^b in log coordinates.

    ``model`` is "power" (b = 0) or "powerlog".  With ``fixed_a`` only C and b
    (or only C) are fitted.  The residual is the RMS misfit in log(value).
    """
    hs = np.asarray(hs, dtype=float)
    v = np.asarray(values, dtype=float)
    if hs.size < 3 or hs.size != v.size:
        raise InsufficientDataError("scaling_fit needs at least 3 (h, value) pairs")
    if model not in ("power", "powerlog"):
        raise ParameterRangeError(f"unknown model {model!r}")
    y = np.log(v)
    logh = np.log(hs)
    loglog = np.log(np.log(1.0 / hs))
    cols = [np.ones_like(hs)]
    if fixed_a is None:
        cols.append(logh)
    else:
        y = y - fixed_a * logh
    if model == "powerlog":
        cols.append(loglog)
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    a = float(coef[1]) if fixed_a is None else float(fixed_a)
    b = float(coef[-1]) if model == "powerlog" else 0.0
    return ScalingFit(a, b, resid)


def real_axis_sup(bundle_or_T, h: float, span: float = 1.0, count: int = 11) -> StripSup:
    """sup of ||R(lambda)|| over real lambda in [-span h, span h]."""
    return resolvent_strip_sup(bundle_or_T, h, (-span, span), (0.0, 0.0), (count, 1), refine=False, predicted_empty=True)
