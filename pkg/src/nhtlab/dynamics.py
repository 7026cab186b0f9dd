"""Hamiltonian flows on small model phase spaces and their expansion rates.

Phase points are ordered as (x_1, xi_1, ..., x_n, xi_n), so Hamilton's
equations read dx/dt = dp/dxi, dxi/dt = -dp/dx in each pair and
H_p f = grad f . Omega grad p.  The outgoing manifold is {phi_+ = 0}, the
incoming one {phi_- = 0}, and the trapped set K is their intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import null_space

from .errors import (
    AccuracyError,
    ChartError,
    ConfigError,
    DomainError,
    ExtractionError,
    HorizonError,
    ParameterRangeError,
    StiffnessError,
)

Fn = Callable[[np.ndarray], np.ndarray]


def omega(dim: int) -> np.ndarray:
    """Standard symplectic matrix for the (x, xi) pair ordering."""
    return np.kron(np.eye(dim // 2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _fd_gradient(f: Fn, z: np.ndarray, step: float = 1e-6) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    g = np.empty(z.shape)
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        g[..., i] = (f(z + e) - f(z - e)) / (2 * step)
    return g


@dataclass(frozen=True)
class FlowChart:
    """A phase-space chart with Hamiltonian p and defining functions phi_+-.

    Callables act on arrays of shape (..., dim).  ``grad`` and ``hess`` may be
    None, in which case central differences are used.  ``k_sampler(n, rng)``
    returns n points of K.  Construction samples U_delta and checks that H_p
    is tangent to {phi_+ = 0} and {phi_- = 0} and that {phi_+, phi_-} > 0.
    """

    name: str
    dim: int
    p: Fn
    phi_plus: Fn
    phi_minus: Fn
    k_sampler: Callable[[int, np.random.Generator], np.ndarray]
    delta: float
    grad: Fn | None = None
    hess: Fn | None = None
    grad_phi_plus: Fn | None = None
    grad_phi_minus: Fn | None = None
    c_plus_exact: Fn | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    validate: bool = True

    def __post_init__(self):
        if self.dim not in (2, 4):
            raise ChartError(f"dimension must be 2 or 4, got {self.dim}")
        if self.delta <= 0:
            raise ChartError("delta must be positive")
        if self.validate:
            self.check_invariants()

    def gradient(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.grad(z) if self.grad is not None else _fd_gradient(self.p, z)

    def hessian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.hess is not None:
            return self.hess(z)
        step = 1e-5
        d = self.dim
        H = np.empty((d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = step
            H[:, i] = (self.gradient(z + e) - self.gradient(z - e)) / (2 * step)
        return 0.5 * (H + H.T)

    def d_phi_plus(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.grad_phi_plus(z) if self.grad_phi_plus is not None else _fd_gradient(self.phi_plus, z)

    def d_phi_minus(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.grad_phi_minus(z) if self.grad_phi_minus is not None else _fd_gradient(self.phi_minus, z)

    def hamilton(self, z) -> np.ndarray:
        """The Hamiltonian vector field H_p at z."""
        return self.gradient(z) @ omega(self.dim).T

    def apply_Hp(self, dfun: Callable[[np.ndarray], np.ndarray], z) -> np.ndarray:
        """H_p f = grad f . H_p for f with gradient function ``dfun``."""
        return np.sum(dfun(z) * self.hamilton(z), axis=-1)

    def bracket_plus_minus(self, z) -> np.ndarray:
        """{phi_+, phi_-} = H_{phi_+} phi_-."""
        hplus = self.d_phi_plus(z) @ omega(self.dim).T
        return np.sum(self.d_phi_minus(z) * hplus, axis=-1)

    def in_U(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        d = self.delta
        return (np.abs(self.phi_plus(z)) < d) & (np.abs(self.phi_minus(z)) < d) & (np.abs(self.p(z)) < d)

    def c_plus(self, z) -> np.ndarray:
        """c_+ on points of the outgoing manifold (exact form if supplied, else extracted)."""
        z = np.asarray(z, dtype=float)
        if self.c_plus_exact is not None:
            return self.c_plus_exact(z)
        return c_plus_extract(self, z)

    def sample_U(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Points of U_delta near K: K samples plus a box perturbation, filtered to U_delta."""
        base = self.k_sampler(n, rng)
        pts = base + rng.uniform(-0.5, 0.5, size=base.shape) * self.delta
        keep = self.in_U(pts)
        return pts[keep]

    def project_to(self, fun: Fn, dfun: Fn, z: np.ndarray, iters: int = 30) -> np.ndarray:
        """Newton projection of points onto {fun = 0} along the gradient."""
        z = np.array(z, dtype=float)
        for _ in range(iters):
            g = dfun(z)
            v = fun(z)
            z = z - (v / np.maximum(np.sum(g * g, axis=-1), 1e-300))[..., None] * g
        return z

    def check_invariants(self, n: int = 64, tol: float = 1e-8, seed: int = 12345) -> None:
        rng = np.random.default_rng(seed)
        pts = self.sample_U(n, rng)
        if len(pts) == 0:
            raise ChartError("no sample points fall inside U_delta")
        br = self.bracket_plus_minus(pts)
        if np.any(br <= 0):
            raise ChartError(f"{{phi_+, phi_-}} not positive on U_delta (min {br.min():.3g})")
        for label, fun, dfun in (("phi_+", self.phi_plus, self.d_phi_plus), ("phi_-", self.phi_minus, self.d_phi_minus)):
            on = self.project_to(fun, dfun, pts)
            dphi = np.linalg.norm(dfun(on), axis=-1)
            hp = np.abs(self.apply_Hp(dfun, on))
            scale = np.linalg.norm(self.hamilton(on), axis=-1) * dphi + 1.0
            if np.any(hp > tol * scale):
                raise ChartError(f"H_p is not tangent to {{{label} = 0}} (|H_p {label}| = {hp.max():.3g})")


def _model_chart(delta: float = 0.5) -> FlowChart:
    def p(z):
        return z[..., 0] * z[..., 1]

    def grad(z):
        return np.stack([z[..., 1], z[..., 0]], axis=-1)

    def hess(z):
        return np.array([[0.0, 1.0], [1.0, 0.0]])

    def k(n, rng):
        return np.zeros((n, 2))

    return FlowChart(
        "model",
        2,
        p,
        phi_plus=lambda z: z[..., 1],
        phi_minus=lambda z: z[..., 0],
        k_sampler=k,
        delta=delta,
        grad=grad,
        hess=hess,
        grad_phi_plus=lambda z: np.broadcast_to(np.array([0.0, 1.0]), np.shape(z)).copy(),
        grad_phi_minus=lambda z: np.broadcast_to(np.array([1.0, 0.0]), np.shape(z)).copy(),
        c_plus_exact=lambda z: np.ones(np.shape(z)[:-1]),
    )


def _twisted_chart(a: float = 1.0, delta: float = 0.5) -> FlowChart:
    """p = x xi (2 + a cos y) on R^2 x T*S^1, coordinates (x, xi, y, eta)."""
    if not 0 <= a < 2:
        raise ChartError(f"twist amplitude a={a} must lie in [0, 2)")

    def g(z):
        return 2.0 + a * np.cos(z[..., 2])

    def p(z):
        return z[..., 0] * z[..., 1] * g(z)

    def grad(z):
        x, xi, y = z[..., 0], z[..., 1], z[..., 2]
        return np.stack([xi * g(z), x * g(z), -a * x * xi * np.sin(y), np.zeros_like(x)], axis=-1)

    def hess(z):
        x, xi, y = z[0], z[1], z[2]
        s = -a * np.sin(y)
        H = np.zeros((4, 4))
        H[0, 1] = H[1, 0] = 2.0 + a * np.cos(y)
        H[0, 2] = H[2, 0] = s * xi
        H[1, 2] = H[2, 1] = s * x
        H[2, 2] = -a * x * xi * np.cos(y)
        return H

    def k(n, rng):
        y = 2 * np.pi * np.arange(n) / n
        eta = rng.uniform(-1.0, 1.0, size=n)
        z = np.zeros((n, 4))
        z[:, 2] = y
        z[:, 3] = eta
        return z

    e_xi = np.array([0.0, 1.0, 0.0, 0.0])
    e_x = np.array([1.0, 0.0, 0.0, 0.0])
    return FlowChart(
        "twisted",
        4,
        p,
        phi_plus=lambda z: z[..., 1],
        phi_minus=lambda z: z[..., 0],
        k_sampler=k,
        delta=delta,
        grad=grad,
        hess=hess,
        grad_phi_plus=lambda z: np.broadcast_to(e_xi, np.shape(z)).copy(),
        grad_phi_minus=lambda z: np.broadcast_to(e_x, np.shape(z)).copy(),
        c_plus_exact=g,
        params={"a": a},
    )


CHARTS: dict[str, Callable[..., FlowChart]] = {"model": _model_chart, "twisted": _twisted_chart}


def make_chart(name: str, **params: float) -> FlowChart:
    """Registered chart by name: "model" (p = x xi) or "twisted" (p = x xi (2 + a cos y))."""
    if name not in CHARTS:
        raise ConfigError(f"unknown chart {name!r}; registered: {sorted(CHARTS)}")
    try:
        return CHARTS[name](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for chart {name!r}: {exc}") from exc


def chart_from_config(cfg: Mapping[str, str]) -> FlowChart:
    """Build a chart from ``chart = name`` plus ``chart.<param> = value`` entries."""
    name = cfg.get("chart", "model").strip()
    params = {}
    for key, value in cfg.items():
        if key.startswith("chart."):
            try:
                params[key[6:]] = float(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: expected a number, got {value!r}") from exc
    return make_chart(name, **params)


@dataclass(frozen=True)
class FlowResult:
    point: np.ndarray
    t: float
    energy_drift: float


def _solve(fun, t: float, y0: np.ndarray, tol: float, events=None):
    sol = solve_ivp(fun, (0.0, t), y0, method="DOP853", rtol=tol, atol=tol * 1e-2, events=events)
    if sol.status == -1:
        raise StiffnessError(f"flow integration failed: {sol.message}")
    return sol


def _exit_event(chart: FlowChart, radius: float):
    def ev(t, y):
        return radius - np.max(np.abs(y[: chart.dim]))

    ev.terminal = True
    return ev


def integrate_flow(chart: FlowChart, point, t: float, tol: float = 1e-10, radius: float = 1e3) -> FlowResult:
    """e^{t H_p}(point) with DOP853; t may be negative.

    Leaving the box max|z_i| < radius raises DomainError with the exit time;
    an energy drift above tol raises AccuracyError.
    """
    z0 = np.asarray(point, dtype=float)
    if z0.shape != (chart.dim,):
        raise ParameterRangeError(f"point must have shape ({chart.dim},)")
    if t == 0:
        return FlowResult(z0.copy(), 0.0, 0.0)
    sol = _solve(lambda s, y: chart.hamilton(y), t, z0, tol * 1e-2, events=_exit_event(chart, radius))
    if sol.status == 1:
        raise DomainError("trajectory left the chart", exit_time=float(sol.t_events[0][0]))
    z1 = sol.y[:, -1]
    drift = abs(float(chart.p(z1) - chart.p(z0)))
    if drift > tol * max(1.0, abs(float(chart.p(z0)))):
        raise AccuracyError(f"energy drift {drift:.2e} above {tol}")
    return FlowResult(z1, float(t), drift)


def tangent_flow(chart: FlowChart, point, t: float, tol: float = 1e-10, radius: float = 1e3, check: bool = True):
    """(e^{t H_p}(point), d e^{t H_p}(point)) from the variational equations.

    Raises AccuracyError if |J^T Omega J - Omega| > 1e-6.
    """
    d = chart.dim
    z0 = np.asarray(point, dtype=float)
    Om = omega(d)
    if t == 0:
        return z0.copy(), np.eye(d)

    def rhs(s, y):
        z = y[:d]
        J = y[d:].reshape(d, d)
        return np.concatenate([chart.hamilton(z), (Om @ chart.hessian(z) @ J).ravel()])

    y0 = np.concatenate([z0, np.eye(d).ravel()])
    sol = _solve(rhs, t, y0, tol * 1e-2, events=_exit_event(chart, radius))
    if sol.status == 1:
        raise DomainError("trajectory left the chart", exit_time=float(sol.t_events[0][0]))
    z1 = sol.y[:d, -1]
    J = sol.y[d:, -1].reshape(d, d)
    if check:
        defect = float(np.max(np.abs(J.T @ Om @ J - Om)))
        if defect > 1e-6:
            raise AccuracyError(f"tangent flow not symplectic: defect {defect:.2e}")
    return z1, J


@dataclass(frozen=True)
class ExpansionRates:
    nu_min: float
    nu_max: float
    mu_max: float = 0.0
    T: float | None = None
    tolerance: float = 0.0
    raw_T: np.ndarray | None = field(default=None, repr=False)
    raw_2T: np.ndarray | None = field(default=None, repr=False)
    note: str = ""

    def __post_init__(self):
        if not (0 < self.nu_min <= self.nu_max):
            raise ParameterRangeError(f"need 0 < nu_min <= nu_max, got {self.nu_min}, {self.nu_max}")
        if self.mu_max < 0:
            raise ParameterRangeError("mu_max must be non-negative")


def _frame_rates(chart: FlowChart, rho: np.ndarray, T: float, sign: int, segment: float, tol: float):
    """Log growth of the TK block and the transverse direction along e^{sign t H_p}, recorded at T and 2T.

    The frame is [basis of TK | H_{phi}(rho)] with phi = phi_+ for the
    backward flow (sign = -1) and phi = phi_- for the forward flow; QR
    re-orthonormalization after every segment keeps TK first, so the last
    diagonal entry of R measures the component transverse to TK.
    """
    d = chart.dim
    Om = omega(d)
    dphi = chart.d_phi_plus(rho) if sign < 0 else chart.d_phi_minus(rho)
    grads = np.vstack([chart.d_phi_plus(rho), chart.d_phi_minus(rho)])
    TK = null_space(grads)
    v = Om @ dphi
    frame = np.column_stack([TK, v / np.linalg.norm(v)])
    k = TK.shape[1]
    n_seg = max(2, int(math.ceil(2 * T / segment)))
    n_seg += n_seg % 2
    dt = 2 * T / n_seg
    logs = np.zeros(k + 1)
    at_T = None
    z = rho.copy()
    for i in range(n_seg):
        z, J = tangent_flow(chart, z, sign * dt, tol=tol, check=False)
        Q, R = np.linalg.qr(J @ frame)
        s = np.sign(np.diag(R))
        s[s == 0] = 1.0
        frame = Q * s
        logs += np.log(np.abs(np.diag(R)))
        if i + 1 == n_seg // 2:
            at_T = logs.copy()
    return at_T / T, logs / (2 * T)


def expansion_rates(
    chart: FlowChart, T: float, samples: int = 16, seed: int = 0, segment: float = 1.0, tol: float = 1e-10
) -> ExpansionRates:
    """Transverse expansion rates nu_min, nu_max and the tangential rate mu_max over K samples.

    For each sample the transverse direction of T_K Gamma_+ is pushed by the
    backward flow and that of T_K Gamma_- by the forward flow, each over T
    and 2T.  Per-sample rates are extrapolated as 2 nu(2T) - nu(T); a shift
    above 5% between T and 2T raises HorizonError.
    """
    if samples < 1:
        raise ParameterRangeError("samples must be positive")
    rng = np.random.default_rng(seed)
    pts = chart.k_sampler(samples, rng)
    raw_T, raw_2T, mu = [], [], 0.0
    for rho in pts:
        for sign in (-1, 1):
            rT, r2T = _frame_rates(chart, rho, T, sign, segment, tol)
            raw_T.append(-rT[-1])
            raw_2T.append(-r2T[-1])
            if rT.size > 1:
                mu = max(mu, float(np.max(np.abs(r2T[:-1]))))
    raw_T = np.array(raw_T)
    raw_2T = np.array(raw_2T)
    if np.any(raw_2T <= 0):
        raise HorizonError("non-positive transverse rate; K samples are not hyperbolic")
    if T * float(raw_2T.min()) < 10 - 1e-6:
        raise HorizonError(f"horizon T={T} gives T * nu_min = {T * raw_2T.min():.2f} < 10")
    shift = np.abs(raw_2T - raw_T)
    if np.any(shift > 0.05 * raw_2T):
        raise HorizonError(f"rates shift by {np.max(shift / raw_2T):.1%} between T and 2T")
    extrap = 2 * raw_2T - raw_T
    tolerance = float(np.max(np.abs(extrap - raw_2T))) + 1e-6
    note = f"max over {samples} K samples; frame (grad phi_+, grad phi_-); true extremes may lie between samples"
    return ExpansionRates(
        float(extrap.min()), float(extrap.max()), mu, float(T), tolerance, raw_T, raw_2T, note
    )


@dataclass(frozen=True)
class PinchingVerdict:
    ok: bool
    margin: float

    def __bool__(self) -> bool:
        return self.ok


def pinching_check(rates: ExpansionRates, m: int, tol: float | None = None) -> PinchingVerdict:
    """(m + 1/2) nu_min > (m - 1/2) nu_max, strictly beyond the rates' own tolerance."""
    margin = (m + 0.5) * rates.nu_min - (m - 0.5) * rates.nu_max
    tol = rates.tolerance * (2 * m + 1) if tol is None else tol
    return PinchingVerdict(bool(margin > tol), float(margin))


def r_normal_check(rates: ExpansionRates, r: int) -> bool:
    """nu_min > r mu_max."""
    return bool(rates.nu_min > r * rates.mu_max)


def c_plus_extract(
    chart: FlowChart, points, rates: ExpansionRates | None = None, eps: float = 0.05, step: float = 1e-5
) -> np.ndarray:
    """c_+ = -H_p phi_+ / phi_+, with the removable limit on {phi_+ = 0}.

    On the outgoing manifold the quotient is replaced by the ratio of
    derivatives along grad phi_+ (central differences of size ``step``).
    With ``rates`` the values are checked against [nu_min - eps, nu_max + eps].
    """
    z = np.atleast_2d(np.asarray(points, dtype=float))

    def hp_phi(w):
        return chart.apply_Hp(chart.d_phi_plus, w)

    phi = chart.phi_plus(z)
    hp = hp_phi(z)
    out = np.empty(len(z))
    off = np.abs(phi) > 1e-10
    out[off] = -hp[off] / phi[off]
    for i in np.flatnonzero(~off):
        g = chart.d_phi_plus(z[i])
        n = g / np.linalg.norm(g)
        dphi = (chart.phi_plus(z[i] + step * n) - chart.phi_plus(z[i] - step * n)) / (2 * step)
        dhp = (hp_phi(z[i] + step * n) - hp_phi(z[i] - step * n)) / (2 * step)
        if abs(dphi) < 1e-8 or (abs(hp[i]) > 1e-10):
            raise ExtractionError(f"c_+ quotient unstable at {z[i]}")
        out[i] = -dhp / dphi
    if rates is not None:
        lo, hi = rates.nu_min - eps, rates.nu_max + eps
        if np.any(out < lo) or np.any(out > hi):
            raise ExtractionError(f"c_+ outside [{lo:.3g}, {hi:.3g}]: range [{out.min():.3g}, {out.max():.3g}]")
    return out


@dataclass(frozen=True)
class ContractionRow:
    t: float
    max_phi_minus: float
    bound: float
    ok: bool
    exits: int = 0


def _boundary_samples(chart: FlowChart, delta: float, n: int, seed: int) -> np.ndarray:
    """Points of Gamma_+ with |phi_-| = delta near K (phi_+ = 0 by projection)."""
    rng = np.random.default_rng(seed)
    base = chart.k_sampler(n, rng)
    Om = omega(chart.dim)
    out = []
    for rho in base:
        v = Om @ chart.d_phi_plus(rho)
        v = v / chart.bracket_plus_minus(rho)
        for s in (-1.0, 1.0):
            z = rho + s * delta * v
            z = chart.project_to(chart.phi_plus, chart.d_phi_plus, z)
            out.append(z)
    return np.array(out)


def udelta_contraction(
    chart: FlowChart,
    delta: float,
    times,
    nu_min: float,
    eps: float | None = None,
    samples: int = 16,
    seed: int = 0,
    slack: float = 1e-6,
) -> list[ContractionRow]:
    """max |phi_-| on e^{-t H_p}(boundary of U_delta on Gamma_+) against e^{-(nu_min - eps) t} delta."""
    eps = 0.05 * nu_min if eps is None else eps
    pts = _boundary_samples(chart, delta, samples, seed)
    rows = []
    for t in times:
        vals, exits = [], 0
        for z in pts:
            try:
                w = integrate_flow(chart, z, -float(t)).point
            except DomainError:
                exits += 1
                continue
            vals.append(abs(float(chart.phi_minus(w))))
        m = max(vals) if vals else math.nan
        bound = math.exp(-(nu_min - eps) * float(t)) * delta
        rows.append(ContractionRow(float(t), m, bound, bool(m <= bound + slack) and exits == 0, exits))
    return rows
