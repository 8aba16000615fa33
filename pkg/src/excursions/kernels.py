"""Correlation kernels of the excursion ensemble and of its Bessel limit.

Conventions
-----------
* ``n`` is the number of excursions.  The scalar kernel

      K(x, y) = 2 * sum_{j<n} phi_{2j+1}(x) phi_{2j+1}(y)

  is written in the scaled variable X = x / sigma(tau), sigma = sqrt(2 tau (1 - tau)).
* ``K0`` is the same operator after the substitution x -> sqrt(x).
* Extended (multi-time) entries are evaluated in per-slice scaled
  coordinates X_k = x / sigma_k with exponential and power prefactors dropped.
  Those prefactors form a diagonal similarity and leave every Fredholm
  determinant unchanged; :func:`be_raw_entry` restores them when the genuine
  kernel is needed (pointwise scaling limits, similarity checks).
* Time-slice indices ``k`` and ``l`` are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .specfun import (
    composite_gauss_legendre,
    oscillator_derivatives,
    oscillator_wavefunctions,
)

__all__ = [
    "TimePartition",
    "BEKernel",
    "BesselTimePartition",
    "kernel_scalar",
    "kernel_scalar_cd",
    "kernel_k0",
    "kernel_k0_integrable",
    "k0_phi_psi",
    "gue_extended",
    "be_extended_entry",
    "be_extended_block",
    "be_raw_entry",
    "bessel_kernel",
    "bessel_extended_entry",
    "bessel_extended_block",
    "path_density",
]

# |phi_k(x)| <= 1.0865 pi^{-1/4} for every k and x (Cramér's bound), so the
# product of two wavefunctions is bounded by this constant.
PRODUCT_BOUND = 1.0865 ** 2 / np.sqrt(np.pi)
MAX_TAIL_TERMS = 10_000
_LOG_ENVELOPE = np.log(1e14)


@dataclass(frozen=True)
class TimePartition:
    """Strictly increasing times in (0, 1) with derived scale data."""

    taus: tuple[float, ...]

    def __post_init__(self):
        taus = tuple(float(t) for t in np.atleast_1d(self.taus))
        if len(taus) == 0:
            raise ValueError("empty time partition")
        if any(not (0.0 < t < 1.0) for t in taus):
            raise ValueError("times must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(taus[:-1], taus[1:])):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "taus", taus)

    @property
    def m(self) -> int:
        return len(self.taus)

    @property
    def scale_factors(self) -> np.ndarray:
        t = np.asarray(self.taus)
        return np.sqrt(2.0 * t * (1.0 - t))

    @property
    def log_times(self) -> np.ndarray:
        t = np.asarray(self.taus)
        return 0.5 * np.log(t / (1.0 - t))


@dataclass(frozen=True)
class BEKernel:
    """Extended excursion kernel for ``n`` paths observed at ``times``."""

    n: int
    times: TimePartition
    tail_tolerance: float = 1e-14

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if not isinstance(self.times, TimePartition):
            object.__setattr__(self, "times", TimePartition(self.times))

    @property
    def m(self) -> int:
        return self.times.m

    def delta(self, k: int, l: int) -> float:
        self._check(k, l)
        lt = self.times.log_times
        return float(lt[k] - lt[l])

    def _check(self, k: int, l: int) -> None:
        if not (0 <= k < self.m and 0 <= l < self.m):
            raise IndexError(f"slice index out of range for m = {self.m}")


@dataclass(frozen=True)
class BesselTimePartition:
    """Strictly increasing real time offsets for the extended Bessel kernel."""

    taus: tuple[float, ...] = field(default=(0.0,))

    def __post_init__(self):
        taus = tuple(float(t) for t in np.atleast_1d(self.taus))
        if len(taus) == 0:
            raise ValueError("empty time partition")
        if any(b <= a for a, b in zip(taus[:-1], taus[1:])):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "taus", taus)

    @property
    def m(self) -> int:
        return len(self.taus)


# ---------------------------------------------------------------------------
# scalar kernels


def _odd_wavefunctions(n: int, x) -> np.ndarray:
    return oscillator_wavefunctions(2 * n - 1, x)[1::2]


def kernel_scalar(n: int, x, y):
    """K(x, y) = 2 sum_{j<n} phi_{2j+1}(x) phi_{2j+1}(y); broadcasts x and y."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = 2.0 * np.sum(_odd_wavefunctions(n, x) * _odd_wavefunctions(n, y), axis=0)
    return out if out.ndim else float(out)


def kernel_scalar_cd(n: int, x, y, diag_tol: float = 1e-8):
    """Christoffel--Darboux form of :func:`kernel_scalar`.

    K = sqrt(n) [(f(x)g(y) - g(x)f(y)) / (x - y) + (f(x)g(y) + g(x)f(y)) / (x + y)]
    with f = phi_{2n}, g = phi_{2n-1}; the first quotient is replaced by its
    derivative limit when ``|x - y| < diag_tol``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    phx, dphx = oscillator_derivatives(2 * n, x)
    phy = oscillator_wavefunctions(2 * n, y)
    fx, gx, fy, gy = phx[2 * n], phx[2 * n - 1], phy[2 * n], phy[2 * n - 1]
    dfx, dgx = dphx[2 * n], dphx[2 * n - 1]
    diff = x - y
    near = np.abs(diff) < diag_tol
    safe = np.where(near, 1.0, diff)
    first = np.where(near, dfx * gx - dgx * fx, (fx * gy - gx * fy) / safe)
    tot = x + y
    zero = tot == 0
    second = np.where(zero, 0.0, (fx * gy + gx * fy) / np.where(zero, 1.0, tot))
    # at x = y = 0 the second quotient has limit (f g' + g f')(0) = 0 for n >= 1
    out = np.sqrt(n) * (first + second)
    return out if out.ndim else float(out)


def kernel_k0(n: int, x, y):
    """Square-variable kernel K0(x, y) = K(sqrt x, sqrt y) / (2 (x y)^{1/4})."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("K0 is defined for positive arguments")
    out = kernel_scalar(n, np.sqrt(x), np.sqrt(y)) / (2.0 * (x * y) ** 0.25)
    return out if np.ndim(out) else float(out)


def k0_phi_psi(n: int, x):
    """The functions phi(x) = n^{1/4} x^{1/4} phi_{2n}(sqrt x) and
    psi(x) = n^{1/4} x^{-1/4} phi_{2n-1}(sqrt x) that make K0 integrable."""
    x = np.asarray(x, float)
    ph = oscillator_wavefunctions(2 * n, np.sqrt(x))
    c = n ** 0.25
    return c * x ** 0.25 * ph[2 * n], c * x ** -0.25 * ph[2 * n - 1]


def kernel_k0_integrable(n: int, x, y, diag_tol: float = 1e-8):
    """K0 through (phi(x)psi(y) - psi(x)phi(y)) / (x - y), with the analytic
    diagonal [2(1/4 - x/2) phi psi + sqrt(n) x psi^2 + sqrt(n) phi^2] / x."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("K0 is defined for positive arguments")
    fx, gx = k0_phi_psi(n, x)
    fy, gy = k0_phi_psi(n, y)
    rn = np.sqrt(n)
    diag = (2.0 * (0.25 - 0.5 * x) * fx * gx + rn * x * gx * gx + rn * fx * fx) / x
    diff = x - y
    near = np.abs(diff) < diag_tol
    off = (fx * gy - gx * fy) / np.where(near, 1.0, diff)
    out = np.where(near, diag, off)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# extended GUE / excursion kernels


def _mehler(q, x, y):
    """sum_{j>=0} q^j phi_j(x) phi_j(y) for 0 < q < 1 (Mehler's formula)."""
    one_m = 1.0 - q * q
    return np.exp(-((1 + q * q) * (x * x + y * y) - 4 * q * x * y) / (2 * one_m)) / np.sqrt(
        np.pi * one_m)


def _mehler_odd(q, x, y):
    """sum over odd j of q^j phi_j(x) phi_j(y), written to avoid overflow."""
    one_m = 1.0 - q * q
    a = (1 + q * q) * (x * x + y * y) / (2 * one_m)
    b = 2 * q * x * y / one_m
    # exp(-a) sinh(b) = 0.5 exp(|b| - a) (1 - exp(-2|b|)) sign(b)
    return 0.5 * np.sign(b) * np.exp(np.abs(b) - a) * -np.expm1(-2 * np.abs(b)) / np.sqrt(
        np.pi * one_m)


def _tail_length(q: float, start: int, tol: float) -> int:
    """Number of terms after ``start`` until q^j * PRODUCT_BOUND < tol."""
    j_stop = np.log(tol / PRODUCT_BOUND) / np.log(q)
    return max(0, int(np.ceil(j_stop)) - start + 1)


def _weighted_sum(indices, coeffs, x, y):
    """sum_i coeffs_i phi_{indices_i}(x) phi_{indices_i}(y) (elementwise)."""
    kmax = int(indices[-1])
    phx = oscillator_wavefunctions(kmax, x)[indices]
    phy = oscillator_wavefunctions(kmax, y)[indices]
    c = np.asarray(coeffs).reshape((-1,) + (1,) * (phx.ndim - 1))
    return np.sum(c * phx * phy, axis=0)


def gue_extended(n2: int, x, y, tau_hat: float, tail_tolerance: float = 1e-14,
                 method: str = "auto"):
    """Extended Hermite kernel.

    For tau_hat >= 0 returns sum_{j<n2} e^{j tau_hat} phi_j(x) phi_j(y); for
    tau_hat < 0 returns -sum_{j>=n2} e^{j tau_hat} phi_j(x) phi_j(y).

    Args:
        n2: number of head terms.
        x, y: broadcastable real arrays.
        tau_hat: log-time difference.
        tail_tolerance: term-magnitude cutoff for the direct tail sum.
        method: ``"tail"`` (direct summation), ``"mehler"`` (closed form minus
            head) or ``"auto"`` (tail unless it would need more than
            ``MAX_TAIL_TERMS`` terms).
    """
    if n2 < 1:
        raise ValueError("n2 must be positive")
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    j_head = np.arange(n2)
    if tau_hat >= 0:
        out = _weighted_sum(j_head, np.exp(j_head * tau_hat), x, y)
        return out if out.ndim else float(out)
    q = float(np.exp(tau_hat))
    if not q < 1.0 - 1e-14:
        raise ValueError("tau_hat is numerically zero from below: tail diverges")
    n_tail = _tail_length(q, n2, tail_tolerance)
    if method == "auto":
        method = "tail" if n_tail <= MAX_TAIL_TERMS else "mehler"
    if method == "tail":
        j = np.arange(n2, n2 + max(n_tail, 1))
        out = -_weighted_sum(j, q ** j, x, y)
    elif method == "mehler":
        out = -(_mehler(q, x, y) - _weighted_sum(j_head, q ** j_head, x, y))
    else:
        raise ValueError(f"unknown method {method!r}")
    return out if out.ndim else float(out)


def _odd_head_tail(n: int, delta: float, tail_tolerance: float, method: str = "auto"):
    """Index set and coefficients of 2*sum over odd j (head or negative tail).

    Returns ``(indices, coeffs, mehler_q)``; when ``mehler_q`` is not None the
    value is ``-(2*odd_mehler(q) - sum coeffs phi phi)`` instead of a plain sum.
    """
    if delta >= 0:
        j = np.arange(1, 2 * n, 2)
        return j, 2.0 * np.exp(j * delta), None
    q = float(np.exp(delta))
    if not q < 1.0 - 1e-14:
        raise ValueError("equal times with k < l: tail sum diverges")
    n_tail = _tail_length(q, 2 * n, tail_tolerance)
    if method == "auto":
        method = "tail" if n_tail <= 2 * MAX_TAIL_TERMS else "mehler"
    if method == "tail":
        j = np.arange(2 * n + 1, 2 * n + 1 + max(n_tail, 2), 2)
        return j, -2.0 * q ** j, None
    j = np.arange(1, 2 * n, 2)
    return j, 2.0 * q ** j, q


def be_extended_entry(kernel: BEKernel, k: int, l: int, x, y, method: str = "auto"):
    """Similarity-reduced entry (k, l) of the extended excursion kernel.

    ``x`` is in units of sigma_k and ``y`` in units of sigma_l.  The value is
    K_{2n}(x, y; d) - K_{2n}(x, -y; d) with d = tau_hat_k - tau_hat_l, i.e.
    2 sum_{odd j < 2n} e^{j d} phi_j(x) phi_j(y) for k >= l and the negative
    odd tail for k < l.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    delta = kernel.delta(k, l)
    j, c, q = _odd_head_tail(kernel.n, delta, kernel.tail_tolerance, method)
    out = _weighted_sum(j, c, x, y)
    if q is not None:
        out = -(2.0 * _mehler_odd(q, x, y) - out)
    return out if out.ndim else float(out)


def be_extended_block(kernel: BEKernel, k: int, l: int, x, y, method: str = "auto"):
    """Matrix of :func:`be_extended_entry` over 1-D node sets ``x`` and ``y``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    delta = kernel.delta(k, l)
    j, c, q = _odd_head_tail(kernel.n, delta, kernel.tail_tolerance, method)
    kmax = int(j[-1])
    phx = oscillator_wavefunctions(kmax, x)[j]
    phy = oscillator_wavefunctions(kmax, y)[j]
    out = (phx.T * c) @ phy
    if q is not None:
        out = -(2.0 * _mehler_odd(q, x[:, None], y[None, :]) - out)
    return out


def _raw_prefactor(kernel: BEKernel, k: int, l: int, xs, ys):
    t = kernel.times.taus
    return np.exp((0.5 - t[k]) * xs * xs - (0.5 - t[l]) * ys * ys) / np.sqrt(
        2.0 * t[l] * (1.0 - t[k]))


def be_raw_entry(kernel: BEKernel, k: int, l: int, x, y, method: str = "auto"):
    """Entry (k, l) of the extended kernel in physical coordinates with every
    exponential and power factor restored (H - E)."""
    sig = kernel.times.scale_factors
    xs = np.asarray(x, float) / sig[k]
    ys = np.asarray(y, float) / sig[l]
    return _raw_prefactor(kernel, k, l, xs, ys) * be_extended_entry(kernel, k, l, xs, ys,
                                                                     method)


# ---------------------------------------------------------------------------
# Bessel kernels (alpha = 1/2)


def bessel_kernel(x, y):
    """(1/pi) (sin(x-y)/(x-y) - sin(x+y)/(x+y)) with analytic limits."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    out = (np.sinc((x - y) / np.pi) - np.sinc((x + y) / np.pi)) / np.pi
    return out if np.ndim(out) else float(out)


def _bessel_rule(dt: float, k_ge_l: bool, xmax: float, order: int = 24):
    """Quadrature in t for the extended Bessel integrals."""
    if k_ge_l:
        panels = max(1, int(np.ceil(xmax / 6.0)))
        return composite_gauss_legendre(np.linspace(0.0, 1.0, panels + 1), order)
    t_star = np.sqrt(2.0 * _LOG_ENVELOPE / dt)
    t_star = max(t_star, 1.0 + 1e-3)
    width = min(2.0, 6.0 / max(2.0 * xmax, 1.0), t_star - 1.0)
    panels = int(np.ceil((t_star - 1.0) / width))
    return composite_gauss_legendre(np.linspace(1.0, t_star, panels + 1), order)


def _bessel_parts(times: BesselTimePartition, k: int, l: int, xmax: float):
    if not (0 <= k < times.m and 0 <= l < times.m):
        raise IndexError(f"slice index out of range for m = {times.m}")
    d = times.taus[k] - times.taus[l]
    if k >= l:
        rule = _bessel_rule(0.0, True, xmax)
        return rule, 2.0 / np.pi * np.exp(d * rule.nodes ** 2 / 2) * rule.weights
    rule = _bessel_rule(-d, False, xmax)
    return rule, -2.0 / np.pi * np.exp(d * rule.nodes ** 2 / 2) * rule.weights


def bessel_extended_entry(times: BesselTimePartition, k: int, l: int, x, y):
    """Entry (k, l) of the extended Bessel kernel with alpha = 1/2.

    k >= l: (2/pi) int_0^1 e^{(tau_k - tau_l) t^2/2} sin(xt) sin(yt) dt;
    k <  l: -(2/pi) int_1^inf of the same integrand, truncated where the
    Gaussian envelope drops below 1e-14.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    xmax = float(max(np.max(np.abs(x), initial=0.0), np.max(np.abs(y), initial=0.0)))
    rule, c = _bessel_parts(times, k, l, xmax)
    t = rule.nodes.reshape((-1,) + (1,) * x.ndim)
    c = c.reshape(t.shape)
    out = np.sum(c * np.sin(x * t) * np.sin(y * t), axis=0)
    return out if out.ndim else float(out)


def bessel_extended_block(times: BesselTimePartition, k: int, l: int, x, y):
    """Matrix of :func:`bessel_extended_entry` over 1-D node sets."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xmax = float(max(np.max(np.abs(x), initial=0.0), np.max(np.abs(y), initial=0.0)))
    rule, c = _bessel_parts(times, k, l, xmax)
    return (np.sin(np.outer(x, rule.nodes)) * c) @ np.sin(np.outer(rule.nodes, y))


# ---------------------------------------------------------------------------


def path_density(n: int, tau: float, x):
    """One-point density rho_n(x, tau) = (2/sigma) sum_{j<n} phi_{2j+1}(x/sigma)^2."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    sigma = np.sqrt(2.0 * tau * (1.0 - tau))
    x = np.asarray(x, float)
    out = kernel_scalar(n, x / sigma, x / sigma) / sigma
    return out if np.ndim(out) else float(out)
