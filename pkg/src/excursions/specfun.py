"""Special functions shared by every other module.

Harmonic oscillator wavefunctions are evaluated by the normalized three-term
recurrence with running rescaling, so that large indices and large arguments
neither overflow nor lose the Gaussian factor to premature underflow.  The
absorbed (killed-at-zero) Brownian transition density is evaluated in two
complementary forms, and Gauss--Legendre rules are built by Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureRule",
    "gauss_legendre",
    "composite_gauss_legendre",
    "oscillator_wavefunctions",
    "oscillator_derivatives",
    "transition_density",
    "log_transition_density",
]

PI_QUARTER = np.pi ** -0.25
_RESCALE = 1e150


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of an interpolatory rule on ``interval``."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]
    order: int

    def integrate(self, f) -> float:
        """Apply the rule to a vectorized callable."""
        return float(np.dot(self.weights, f(self.nodes)))

    def __len__(self) -> int:
        return len(self.nodes)


@lru_cache(maxsize=64)
def _legendre_reference(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] by Newton iteration on the recurrence."""
    i = np.arange(1, order + 1)
    x = np.cos(np.pi * (i - 0.25) / (order + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(2, order + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = order * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # one more evaluation for the derivative at the converged nodes
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, order + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = order * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order_idx = np.argsort(x)
    x, w = x[order_idx], w[order_idx]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """Gauss--Legendre rule with ``order`` nodes mapped to ``[a, b]``.

    Args:
        order: number of nodes (exact for polynomials of degree ``2*order-1``).
        a: left endpoint.
        b: right endpoint, must exceed ``a``.

    Returns:
        The mapped :class:`QuadratureRule`.
    """
    order = int(order)
    if order < 1:
        raise ValueError("quadrature order must be positive")
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise ValueError(f"degenerate interval ({a}, {b})")
    x, w = _legendre_reference(order)
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=a + half * (x + 1.0), weights=half * w,
                          interval=(float(a), float(b)), order=order)


def composite_gauss_legendre(breaks, order: int) -> QuadratureRule:
    """Concatenate Gauss--Legendre rules on consecutive panels ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    rules = [gauss_legendre(order, lo, hi) for lo, hi in zip(breaks[:-1], breaks[1:])]
    return QuadratureRule(nodes=np.concatenate([r.nodes for r in rules]),
                          weights=np.concatenate([r.weights for r in rules]),
                          interval=(float(breaks[0]), float(breaks[-1])), order=order)


def oscillator_wavefunctions(k_max: int, x) -> np.ndarray:
    """Harmonic oscillator wavefunctions phi_0..phi_{k_max} at ``x``.

    phi_k(x) = (2^k k! sqrt(pi))^{-1/2} H_k(x) exp(-x^2/2), computed by the
    normalized upward recurrence.  A per-point logarithmic scale is carried so
    that neither the polynomial growth nor the Gaussian decay overflows.

    Args:
        k_max: largest index returned.
        x: scalar or array of finite reals.

    Returns:
        Array of shape ``(k_max + 1,) + np.shape(x)``.
    """
    k_max = int(k_max)
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("wavefunction argument must be finite")
    ax = np.abs(x)
    out = np.empty((k_max + 1,) + x.shape)
    log_scale = -0.5 * ax * ax
    prev = np.zeros_like(ax)
    cur = np.full_like(ax, PI_QUARTER)
    out[0] = cur * np.exp(log_scale)
    for k in range(k_max):
        nxt = np.sqrt(2.0 / (k + 1)) * ax * cur - np.sqrt(k / (k + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            f = np.where(big, 1.0 / _RESCALE, 1.0)
            cur = cur * f
            prev = prev * f
            log_scale = log_scale + np.where(big, np.log(_RESCALE), 0.0)
        out[k + 1] = cur * np.exp(log_scale)
    odd = (np.arange(k_max + 1) % 2 == 1).reshape((-1,) + (1,) * x.ndim)
    return np.where(odd & (x < 0), -out, out)


def oscillator_derivatives(k_max: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(phi, dphi)`` for indices 0..k_max using the ladder relation."""
    phi = oscillator_wavefunctions(k_max + 1, x)
    k = np.arange(k_max + 1).reshape((-1,) + (1,) * np.ndim(x))
    lower = np.concatenate([np.zeros((1,) + phi.shape[1:]), phi[:k_max]], axis=0)
    dphi = np.sqrt(k / 2.0) * lower - np.sqrt((k + 1) / 2.0) * phi[1:k_max + 2]
    return phi[:k_max + 1], dphi


def log_transition_density(x, y, tau):
    """Logarithm of the killed transition density; -inf where it vanishes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("transition time must be positive")
    z = 2.0 * x * y / tau
    with np.errstate(divide="ignore"):
        return (-0.5 * np.log(2.0 * np.pi * tau) - (x - y) ** 2 / (2.0 * tau)
                + np.log(-np.expm1(-z)))


def transition_density(x, y, tau):
    """Density of Brownian motion from x to y in time tau, killed at zero.

    Uses sqrt(2/(pi tau)) exp(-(x^2+y^2)/(2 tau)) sinh(xy/tau) when
    ``xy/tau < 30`` and the difference of two Gaussians otherwise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("transition time must be positive")
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("transition density is defined for nonnegative arguments")
    ratio = x * y / tau
    small = ratio < 30.0
    r_small = np.where(small, ratio, 0.0)
    sinh_form = (np.sqrt(2.0 / (np.pi * tau)) * np.exp(-(x * x + y * y) / (2.0 * tau))
                 * np.sinh(r_small))
    diff_form = (np.exp(-(x - y) ** 2 / (2.0 * tau)) / np.sqrt(2.0 * np.pi * tau)
                 * -np.expm1(-2.0 * ratio))
    out = np.where(small, sinh_form, diff_form)
    return out if out.ndim else float(out)
