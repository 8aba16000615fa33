"""Painleve V route to the extremal-path distribution functions.

In the square variable the kernel K0 is integrable,
K0(x, y) = (phi(x) psi(y) - psi(x) phi(y)) / (x - y).  For J = (0, s) (bottom)
or J = (s, inf) (top) the quantities

    q = Q(s), p = P(s),  Q = (I - K0 chi_J)^{-1} phi,  P = (I - K0 chi_J)^{-1} psi,
    u = (Q, phi)_J,  v = (Q, psi)_J,  w = (P, psi)_J,

satisfy a closed five-dimensional system, and r(s) = s R(s, s) is an explicit
quadratic form in them.  The gap probabilities follow from

    P(X_1 >= s sigma) = exp(-int_0^{s^2} r(t)/t dt),
    P(X_n <= s sigma) = exp(-int_{s^2}^inf r(t)/t dt).

The system is integrated with an explicit embedded Runge--Kutta pair; the
second-order sigma-form equation is used only as a residual check.  Initial
data come from a Nystrom solve of the defining integral equations at the
starting point, and the small-s piece of the bottom integral from a Puiseux
series generated from the sigma form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from scipy.integrate import solve_ivp

from .fredholm import (
    DEFAULT_QUAD_ORDER,
    be_truncation,
    fredholm_det_scalar,
    k0_kernel,
    window_rule,
)
from .kernels import k0_phi_psi, kernel_k0

__all__ = [
    "PainleveState",
    "SigmaSolution",
    "r0",
    "series_coefficients",
    "series_r",
    "series_log_integral",
    "prob_series_bottom",
    "nystrom_state",
    "first_integrals",
    "first_integral_scales",
    "sigma_residual",
    "sigma_scale",
    "integrate_bottom",
    "integrate_top",
    "prob_bottom",
    "prob_top",
    "default_top_start",
    "SERIES_MAX_S",
    "SERIES_TAIL_TOL",
    "LOG_FLOOR",
]

SERIES_MAX_S = 0.3
DEFAULT_S0 = 1e-3
DEFAULT_TOL = 1e-12
LOG_FLOOR = 12.2  # exp(-12.2) ~ 5e-6
MAX_TOP_NFEV = 400_000
REL_FI_ABORT = 1e-10
N_SERIES_TERMS = 60
# the series is trusted only while its last terms are this small relative to the sum
SERIES_TAIL_TOL = 1e-9


def _sign(kind: str) -> float:
    if kind == "bottom":
        return 1.0
    if kind == "top":
        return -1.0
    raise ValueError("kind must be 'bottom' or 'top'")


@dataclass(frozen=True)
class PainleveState:
    """Point on a trajectory of the five-variable system (K0 coordinates)."""

    s: float
    q: float
    p: float
    u: float
    v: float
    w: float
    n: int
    kind: str = "bottom"

    @property
    def r(self) -> float:
        return _r_of(self.n, self.s, self.q, self.p, self.u, self.v, self.w)

    @property
    def r_prime(self) -> float:
        return -self.q * self.p + np.sqrt(self.n) * self.p ** 2

    def first_integrals(self) -> tuple[float, float]:
        return first_integrals(self.n, self.s, self.q, self.p, self.u, self.v, self.w,
                               self.kind)


@dataclass
class SigmaSolution:
    """Trajectory of r(s) on a grid, with the accumulated log integral.

    ``log_integral[i]`` is int_0^{grid[i]} r/t dt for bottom windows and
    int_{grid[i]}^inf r/t dt for top windows.  For top windows ``cutoff`` is
    the point below which integration stopped because the probability fell
    under exp(-LOG_FLOOR); grid points below it are absent and their
    probabilities are bounded by ``cutoff_probability``.

    ``first_integral_scales`` holds the sum of absolute values of the terms
    of each first integral, so ``relative_first_integral_residuals`` measures
    the residual against the floating-point floor of its own cancellation.
    """

    grid: np.ndarray
    r_values: np.ndarray
    log_integral: np.ndarray
    window_kind: str
    n: int
    states: np.ndarray = field(repr=False)
    r_prime: np.ndarray = field(repr=False)
    r_second: np.ndarray = field(repr=False)
    r_prime_check: np.ndarray = field(repr=False)
    first_integral_residuals: np.ndarray = field(repr=False)
    first_integral_scales: np.ndarray = field(repr=False)
    sigma_residuals: np.ndarray = field(repr=False)
    sigma_scales: np.ndarray = field(repr=False)
    start: float = 0.0
    cutoff: float | None = None
    cutoff_probability: float | None = None

    def probability(self) -> np.ndarray:
        return np.exp(-self.log_integral)

    @property
    def relative_first_integral_residuals(self) -> np.ndarray:
        return self.first_integral_residuals / np.maximum(self.first_integral_scales, 1e-300)

    def first_integral_gate(self, tol: float = 1e-8) -> np.ndarray:
        """Pointwise truth of max |first integral| <= tol (1 + s)."""
        return np.all(self.first_integral_residuals <= tol * (1.0 + self.grid), axis=0)

    def sigma_gate(self, tol: float = 1e-6) -> np.ndarray:
        """Pointwise truth of |sigma-form residual| <= tol (1 + s^4)."""
        return np.abs(self.sigma_residuals) <= tol * (1.0 + self.grid ** 4)

    @property
    def relative_sigma_residuals(self) -> np.ndarray:
        return np.abs(self.sigma_residuals) / np.maximum(self.sigma_scales, 1e-300)


# ---------------------------------------------------------------------------
# series at s = 0


def r0(n: int) -> float:
    """Leading coefficient of r(s) ~ r0 s^{3/2} at s = 0."""
    return comb(2 * n, n) / 4.0 ** n * 4 * n * (2 * n + 1) / 3.0 / np.sqrt(np.pi)


def _sigma_form_coeff(a: np.ndarray, n: int, sign: float) -> np.ndarray:
    """Coefficients in z = sqrt(s) of s^2 r''^2 - RHS for r = sum a_k z^k."""
    k = np.arange(len(a), dtype=float)
    h = k / 2.0
    # arrays indexed by power of z
    A = np.zeros(len(a) + 2)
    B = np.zeros(len(a) + 2)
    C = np.zeros(len(a) + 2)
    for kk in range(3, len(a)):
        A[kk - 2] += a[kk] * h[kk] * (h[kk] - 1)  # s r''
        B[kk - 2] += a[kk] * h[kk]                # r'
        C[kk] += a[kk] * (h[kk] - 1)              # s r' - r
    size = 3 * len(A)

    def mul(*ps):
        out = np.array([1.0])
        for q in ps:
            out = np.polynomial.polynomial.polymul(out, q)
        return np.pad(out, (0, size - len(out)))

    rhs = (sign * 4 * mul(B, B, C) + mul(C, C) - (4 * n + 1) * mul(C, B)
           + 0.25 * mul(B, B))
    return mul(A, A) - rhs


@lru_cache(maxsize=64)
def series_coefficients(n: int, terms: int = N_SERIES_TERMS) -> np.ndarray:
    """Coefficients a_k of r(s) = sum_{k>=3} a_k s^{k/2} for the bottom window.

    a_3 = r0; each later a_k is fixed by the z^{k-1} coefficient of the sigma
    form, in which it appears linearly with factor (3/2) r0 (k/2)(k/2 - 3/2).
    """
    a = np.zeros(terms + 3)
    a[3] = r0(n)
    for k in range(4, terms + 3):
        f0 = _sigma_form_coeff(a[:k + 1], n, 1.0)[k - 1]
        ck = 1.5 * a[3] * (k / 2) * (k / 2 - 1.5)
        a[k] = -f0 / ck
    a.setflags(write=False)
    return a


def _check_series_s(s: float) -> None:
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s > SERIES_MAX_S:
        raise ValueError(f"series is used only for s <= {SERIES_MAX_S}")


def _series_sum(coeffs: np.ndarray, s: float) -> float:
    """Evaluate sum_k coeffs_k s^{k/2} and refuse when the tail is not negligible.

    The radius of convergence shrinks as n grows, so a fixed cap on s is not
    enough; the magnitude of the last few terms serves as the truncation
    estimate.
    """
    z = np.sqrt(s)
    terms = coeffs * z ** np.arange(len(coeffs))
    total = float(np.sum(terms[::-1]))
    tail = float(np.max(np.abs(terms[-6:])))
    if tail > SERIES_TAIL_TOL * max(abs(total), 1e-300):
        raise ValueError(f"s = {s:g} lies outside the series convergence region")
    return total


def series_r(n: int, s: float) -> float:
    """r(s) from the Puiseux series (valid for s <= 0.3 inside its convergence region)."""
    _check_series_s(s)
    if s == 0:
        return 0.0
    return _series_sum(series_coefficients(n), s)


def series_log_integral(n: int, s: float) -> float:
    """int_0^s r(t)/t dt from the series."""
    _check_series_s(s)
    if s == 0:
        return 0.0
    a = series_coefficients(n)
    k = np.arange(len(a))
    terms = np.zeros(len(a))
    terms[3:] = a[3:] / (k[3:] / 2.0)
    return _series_sum(terms, s)


def prob_series_bottom(n: int, s: float) -> float:
    """Truncated small-s expansion of P(X_1(tau) >= s sigma) (terms through s^10)."""
    _check_series_s(s)
    c = r0(n)
    return (1 - 2 / 3 * c * s ** 3 + 2 / 25 * (4 * n + 1) * c * s ** 5
            - (64 * n * n + 32 * n + 9) / 735 * c * s ** 7
            + (4 * n + 1) * (32 * n * n + 16 * n + 15) / 8505 * c * s ** 9
            + 128 * (2 * n + 3) * (n - 1) / 275625 * c * c * s ** 10)


# ---------------------------------------------------------------------------
# the system


def _r_of(n, s, q, p, u, v, w):
    rn = np.sqrt(n)
    return ((w + rn) * q * q + (0.5 - s - 2 * rn * w) * q * p
            + (-u + rn * s + 2 * rn * v) * p * p)


def _qp_prime(n, s, q, p, u, v, w):
    rn = np.sqrt(n)
    a = 0.25 - 0.5 * s - rn * w
    dq = (a * q + (-u + 2 * rn * v + rn * s) * p) / s
    dp = (-(w + rn) * q - a * p) / s
    return dq, dp


def _rhs(s, y, n, sign):
    q, p, u, v, w, _ = y
    dq, dp = _qp_prime(n, s, q, p, u, v, w)
    r = _r_of(n, s, q, p, u, v, w)
    return [dq, dp, sign * q * q, sign * p * q, sign * p * p, r / s]


def first_integrals(n, s, q, p, u, v, w, kind: str = "bottom"):
    """The two conserved quantities of the system (both vanish on solutions)."""
    sg = _sign(kind)
    rn = np.sqrt(n)
    i1 = (sg * s * p * (q - rn * p) + rn * (u + 0.5 * w) - (1 + 2 * n) * v
          + w * (u - 2 * rn * v + n * w))
    i2 = ((rn * s - u + 2 * rn * v) * p * p + (rn + w) * q * q
          + (0.5 - s - 2 * rn * w) * p * q + sg * (v - rn * w))
    return i1, i2


def first_integral_scales(n, s, q, p, u, v, w):
    """Sums of absolute term values of the two first integrals.

    Rounding alone leaves residuals of order machine epsilon times these.
    """
    rn = np.sqrt(n)
    a = [s * p * q, rn * s * p * p, rn * u, 0.5 * rn * w, (1 + 2 * n) * v, w * u,
         2 * rn * w * v, n * w * w]
    b = [rn * s * p * p, u * p * p, 2 * rn * v * p * p, rn * q * q, w * q * q,
         0.5 * p * q, s * p * q, 2 * rn * w * p * q, v, rn * w]
    return sum(np.abs(t) for t in a), sum(np.abs(t) for t in b)


def _r_derivatives(n, s, q, p, u, v, w, sign):
    """r' from the explicit chain rule and r'' from the compact form.

    Returns ``(r1_chain, r1_compact, r2)`` with r1_compact = -qp + sqrt(n) p^2,
    which holds for both window kinds (only u', v', w' change sign).
    """
    rn = np.sqrt(n)
    dq, dp = _qp_prime(n, s, q, p, u, v, w)
    du, dv, dw = sign * q * q, sign * p * q, sign * p * p
    r1_chain = (dw * q * q + 2 * (w + rn) * q * dq + (-1 - 2 * rn * dw) * q * p
                + (0.5 - s - 2 * rn * w) * (dq * p + q * dp)
                + (-du + rn + 2 * rn * dv) * p * p + 2 * (-u + rn * s + 2 * rn * v) * p * dp)
    r1 = -q * p + rn * p * p
    r2 = -dq * p - q * dp + 2 * rn * p * dp
    return r1_chain, r1, r2


def sigma_residual(n, s, r, r1, r2, kind: str = "bottom"):
    """s^2 r''^2 minus the right-hand side of the sigma form (top: 4 r'^2 term negated)."""
    sg = _sign(kind)
    c = s * r1 - r
    return s * s * r2 * r2 - (sg * 4 * r1 * r1 * c + c * c - (4 * n + 1) * c * r1
                              + 0.25 * r1 * r1)


def sigma_scale(n, s, r, r1, r2, kind: str = "bottom"):
    """Sum of absolute term values of the sigma-form residual (its rounding scale)."""
    c = s * r1 - r
    return (np.abs(s * s * r2 * r2) + np.abs(4 * r1 * r1 * c) + c * c
            + np.abs((4 * n + 1) * c * r1) + 0.25 * r1 * r1)


# ---------------------------------------------------------------------------
# initial data


def nystrom_state(n: int, s: float, kind: str = "bottom",
                  quad_order: int = DEFAULT_QUAD_ORDER,
                  truncation_point: float | None = None) -> PainleveState:
    """Evaluate (q, p, u, v, w) at s by solving the integral equations numerically."""
    if not s > 0:
        raise ValueError("s must be positive")
    trunc = truncation_point or be_truncation(n)
    window = (0.0, s) if kind == "bottom" else (s, np.inf)
    rule = window_rule(window, quad_order, trunc, substitution="sqrt")
    f_s, g_s = k0_phi_psi(n, np.asarray(s))
    if rule is None:
        return PainleveState(s, float(f_s), float(g_s), 0.0, 0.0, 0.0, n, kind)
    x, wt = rule.nodes, rule.weights
    kmat = kernel_k0(n, x[:, None], x[None, :])
    f, g = k0_phi_psi(n, x)
    sol = np.linalg.solve(np.eye(len(x)) - kmat * wt[None, :], np.stack([f, g], axis=1))
    Q, P = sol[:, 0], sol[:, 1]
    ks = kernel_k0(n, np.full_like(x, s), x) * wt
    q = float(f_s + ks @ Q)
    p = float(g_s + ks @ P)
    u = float(np.sum(wt * Q * f))
    v = float(np.sum(wt * Q * g))
    w = float(np.sum(wt * P * g))
    return PainleveState(float(s), q, p, u, v, w, n, kind)


def default_top_start(n: int) -> float:
    """Top-window starting point (sqrt(4n) + 8)^2 in K0 coordinates."""
    return float((np.sqrt(4.0 * n) + 8.0) ** 2)


# ---------------------------------------------------------------------------
# integration


def _integrate(n, state: PainleveState, s_end, grid, tol, atol, log0, kind):
    sign = _sign(kind)
    y0 = [state.q, state.p, state.u, state.v, state.w, 0.0]
    cutoff = cutoff_prob = None
    if kind == "bottom":
        sol = solve_ivp(_rhs, (state.s, s_end), y0, method="DOP853", t_eval=grid,
                        rtol=tol, atol=atol, args=(n, sign))
        if sol.status < 0:
            raise RuntimeError(f"Painleve integration failed: {sol.message}")
        s, ys = sol.t, sol.y
    else:
        # Going down, the window (s, inf) approaches the whole half-line, the
        # state grows like a negative power of the probability and the system
        # turns stiff.  Integrate segment by segment and stop at the last
        # output point above exp(-LOG_FLOOR) (or when the evaluation budget is
        # spent).  The probability is monotone in s, so everything below the
        # stopping point is bounded by its value there.
        pts, cols = [grid[0]], [np.asarray(y0, float)]
        nfev = 0
        for lo in grid[1:]:
            seg = solve_ivp(_rhs, (pts[-1], lo), cols[-1], method="DOP853",
                            rtol=tol, atol=atol, args=(n, sign))
            if seg.status < 0:
                raise RuntimeError(f"Painleve integration failed: {seg.message}")
            nfev += seg.nfev
            y = seg.y[:, -1]
            if log0 - y[5] > LOG_FLOOR or nfev > MAX_TOP_NFEV:
                cutoff = float(pts[-1])
                cutoff_prob = float(np.exp(-(log0 - cols[-1][5])))
                break
            pts.append(lo)
            cols.append(y)
        s, ys = np.asarray(pts), np.stack(cols, axis=1)
    q, p, u, v, w, L = ys
    r = _r_of(n, s, q, p, u, v, w)
    r1c, r1, r2 = _r_derivatives(n, s, q, p, u, v, w, sign)
    fi = np.abs(np.stack(first_integrals(n, s, q, p, u, v, w, kind)))
    fi_scale = np.stack(first_integral_scales(n, s, q, p, u, v, w))
    sres = sigma_residual(n, s, r, r1, r2, kind)
    sscale = sigma_scale(n, s, r, r1, r2, kind)
    if kind == "bottom":
        log_int = log0 + L
    else:
        log_int = log0 - L  # L accumulates int_{start}^{s} which is negative going down
    return SigmaSolution(grid=s, r_values=r, log_integral=log_int, window_kind=kind, n=n,
                         states=ys[:5], r_prime=r1, r_second=r2, r_prime_check=r1c,
                         first_integral_residuals=fi, first_integral_scales=fi_scale,
                         sigma_residuals=sres, sigma_scales=sscale, start=state.s,
                         cutoff=cutoff, cutoff_probability=cutoff_prob)


def _check_trajectory(sol: SigmaSolution, tol_fi: float) -> None:
    """Abort when a first integral exceeds 100 tol (1 + s) by more than rounding.

    Near vanishing top-window probabilities the state grows without bound and
    the absolute residual is limited by cancellation among terms of size
    ``first_integral_scales``; there a relative residual above REL_FI_ABORT
    is required to abort.
    """
    bound = tol_fi * (1.0 + sol.grid)
    bad = np.any((sol.first_integral_residuals > 100.0 * bound)
                 & (sol.relative_first_integral_residuals > REL_FI_ABORT), axis=0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise RuntimeError(
            f"first-integral residual {sol.first_integral_residuals[:, i]} exceeds "
            f"100*tol at s = {sol.grid[i]:.6g}")


def integrate_bottom(n: int, s_max: float, s0: float = DEFAULT_S0, tol: float = DEFAULT_TOL,
                     grid=None, atol: float = 1e-14, fi_tol: float = 1e-8,
                     quad_order: int = DEFAULT_QUAD_ORDER) -> SigmaSolution:
    """Integrate the bottom-window system from s0 to s_max (K0 coordinates)."""
    if not 0 < s0 < s_max:
        raise ValueError("need 0 < s0 < s_max")
    state = nystrom_state(n, s0, "bottom", quad_order)
    if grid is None:
        grid = np.linspace(s0, s_max, 201)
    grid = np.unique(np.concatenate([[s0], np.asarray(grid, float), [s_max]]))
    grid = grid[(grid >= s0) & (grid <= s_max)]
    sol = _integrate(n, state, s_max, grid, tol, atol, series_log_integral(n, s0), "bottom")
    _check_trajectory(sol, fi_tol)
    return sol


def integrate_top(n: int, s_min: float, s_start: float | None = None,
                  tol: float = DEFAULT_TOL,
                  grid=None, atol: float = 1e-60, fi_tol: float = 1e-8,
                  quad_order: int = DEFAULT_QUAD_ORDER) -> SigmaSolution:
    """Integrate the top-window system downward from s_start to s_min."""
    if s_start is None:
        s_start = default_top_start(n)
    if not 0 < s_min < s_start:
        raise ValueError("need 0 < s_min < s_start")
    trunc = be_truncation(n)
    if np.sqrt(s_start) >= trunc:
        raise ValueError("s_start must lie below the truncation point")
    state = nystrom_state(n, s_start, "top", quad_order)
    # tail piece int_{s_start}^inf r/t dt = -log det(I - K0 chi_(s_start, inf))
    det_tail = fredholm_det_scalar(k0_kernel(n), (s_start, np.inf), quad_order,
                                   truncation_point=trunc, substitution="sqrt")
    log0 = -np.log(det_tail)
    # a geometric backbone keeps the drift checks dense where the system is delicate
    backbone = np.geomspace(s_start, s_min, 161)
    extra = backbone if grid is None else np.concatenate([backbone, np.asarray(grid, float)])
    grid = np.unique(np.concatenate([[s_min], extra, [s_start]]))[::-1]
    grid = grid[(grid >= s_min) & (grid <= s_start)]
    sol = _integrate(n, state, s_min, grid, tol, atol, log0, "top")
    _check_trajectory(sol, fi_tol)
    return sol


def prob_bottom(n: int, s, tol: float = DEFAULT_TOL, s0: float = DEFAULT_S0) -> np.ndarray | float:
    """P(X_1(tau) >= s sigma) via the series on (0, s0] and the ODE beyond."""
    s_arr = np.atleast_1d(np.asarray(s, float))
    if np.any(s_arr < 0):
        raise ValueError("s must be nonnegative")
    t = s_arr ** 2
    out = np.empty_like(t)
    small = t <= s0
    out[small] = [np.exp(-series_log_integral(n, ti)) for ti in t[small]]
    if np.any(~small):
        sol = integrate_bottom(n, float(t.max()), s0=s0, tol=tol, grid=t[~small])
        out[~small] = np.interp(t[~small], sol.grid, sol.probability())
    return out if np.ndim(s) else float(out[0])


def prob_top(n: int, s, tol: float = DEFAULT_TOL, s_start: float | None = None):
    """P(X_n(tau) <= s sigma) via downward integration of the top system.

    Values below the integration cutoff are returned as 0; by monotonicity the
    true value there is at most ``SigmaSolution.cutoff_probability``.
    """
    s_arr = np.atleast_1d(np.asarray(s, float))
    if np.any(s_arr <= 0):
        raise ValueError("s must be positive")
    t = s_arr ** 2
    start = default_top_start(n) if s_start is None else s_start
    out = np.empty_like(t)
    big = t >= start
    if np.any(big):
        trunc = be_truncation(n)
        out[big] = [fredholm_det_scalar(k0_kernel(n), (ti, np.inf), truncation_point=trunc,
                                        substitution="sqrt") for ti in t[big]]
    if np.any(~big):
        sol = integrate_top(n, float(t[~big].min()), s_start=start, tol=tol, grid=t[~big])
        # the grid runs downward; np.interp needs increasing abscissae
        reached = np.zeros_like(t, dtype=bool)
        reached[~big] = t[~big] >= (sol.cutoff or 0.0)
        out[reached] = np.interp(t[reached], sol.grid[::-1], sol.probability()[::-1])
        out[~big & ~reached] = 0.0
    return out if np.ndim(s) else float(out[0])
