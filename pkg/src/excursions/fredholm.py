"""Fredholm determinants by Gauss--Legendre Nystrom discretization.

All discretized operators are conjugated by the square roots of the weights,
``M_ij = sqrt(w_i) K(x_i, x_j) sqrt(w_j)``, and the determinant of ``I - M`` is
taken by LU factorization.  For block (extended) kernels the same is done per
block; nonsymmetric blocks are fine because the determinant is invariant under
the similarity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .kernels import (
    BEKernel,
    BesselTimePartition,
    be_extended_block,
    bessel_extended_block,
    kernel_k0,
    kernel_scalar,
)
from .specfun import QuadratureRule, gauss_legendre, oscillator_wavefunctions

__all__ = [
    "DEFAULT_QUAD_ORDER",
    "WindowSet",
    "be_truncation",
    "window_rule",
    "fredholm_det_scalar",
    "finite_det",
    "fredholm_det_extended",
    "fredholm_det_bessel_extended",
    "discretize_extended",
    "resolvent_diagonal",
    "half_line_tail_bound",
    "scalar_kernel",
    "k0_kernel",
]

DEFAULT_QUAD_ORDER = 64

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


def be_truncation(n: int) -> float:
    """Half-line truncation point sqrt(4n) + 10 in scaled units."""
    return float(np.sqrt(4.0 * n) + 10.0)


def _check_window(window) -> tuple[float, float]:
    a, b = float(window[0]), float(window[1])
    if not (a >= 0 and b >= a) or np.isnan(a) or np.isnan(b):
        raise ValueError(f"invalid window ({a}, {b})")
    return a, b


def window_rule(window, quad_order: int, truncation_point: float | None = None,
                substitution: str = "none") -> QuadratureRule | None:
    """Quadrature rule for ``window``; ``None`` when the window is empty.

    With ``substitution="sqrt"`` the rule integrates in t = sqrt(x): nodes are
    t_i^2 and weights 2 t_i w_i.  This removes the x^{1/4}-type endpoint
    behaviour of square-variable kernels.
    """
    a, b = _check_window(window)
    if np.isinf(b):
        if truncation_point is None:
            raise ValueError("half-line window needs a truncation point")
        b = float(truncation_point) if substitution == "none" else float(truncation_point) ** 2
        if b <= a:
            return None
    if b <= a:
        return None
    if substitution == "none":
        return gauss_legendre(quad_order, a, b)
    if substitution != "sqrt":
        raise ValueError(f"unknown substitution {substitution!r}")
    r = gauss_legendre(quad_order, np.sqrt(a), np.sqrt(b))
    return QuadratureRule(nodes=r.nodes ** 2, weights=2.0 * r.nodes * r.weights,
                          interval=(a, b), order=quad_order)


def _det_identity_minus(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 1.0
    if not np.all(np.isfinite(mat)):
        raise FloatingPointError("non-finite kernel values in Nystrom matrix")
    return float(np.linalg.det(np.eye(mat.shape[0]) - mat))


def fredholm_det_scalar(kernel: Kernel, window, quad_order: int = DEFAULT_QUAD_ORDER,
                        truncation_point: float | None = None,
                        substitution: str = "none") -> float:
    """det(I - K chi_window) for a scalar kernel.

    Args:
        kernel: vectorized callable ``K(x, y)`` (broadcasting).
        window: ``(a, b)``; ``b = inf`` denotes a half-line.
        quad_order: Gauss--Legendre order (at least 4).
        truncation_point: replaces ``inf`` for half-lines.
        substitution: ``"sqrt"`` to integrate in t = sqrt(x).
    """
    if quad_order < 4:
        raise ValueError("quad_order must be at least 4")
    rule = window_rule(window, quad_order, truncation_point, substitution)
    if rule is None:
        return 1.0
    sw = np.sqrt(rule.weights)
    x = rule.nodes
    mat = sw[:, None] * kernel(x[:, None], x[None, :]) * sw[None, :]
    return _det_identity_minus(mat)


def half_line_tail_bound(n: int, truncation_point: float, quad_order: int = 64) -> float:
    """Trace of K on (T, T + 20): bounds the log-determinant truncation error."""
    rule = gauss_legendre(quad_order, truncation_point, truncation_point + 20.0)
    return float(np.dot(rule.weights, kernel_scalar(n, rule.nodes, rule.nodes)))


def finite_det(n: int, window, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """det(delta_jk - (Psi_j, Psi_k)_window) with Psi_j = sqrt(2) phi_{2j+1}.

    Half-line windows (s, inf) use orthonormality on (0, inf):
    (Psi_j, Psi_k)_(s, inf) = delta_jk - (Psi_j, Psi_k)_(0, s), which needs no
    truncation.
    """
    a, b = _check_window(window)
    if quad_order < 4:
        raise ValueError("quad_order must be at least 4")
    if np.isinf(b):
        if a == 0:
            return 0.0
        gram = _gram(n, 0.0, a, quad_order)
        return float(np.linalg.det(gram))
    if b <= a:
        return 1.0
    gram = _gram(n, a, b, quad_order)
    return float(np.linalg.det(np.eye(n) - gram))


def _gram(n: int, a: float, b: float, quad_order: int) -> np.ndarray:
    rule = gauss_legendre(quad_order, a, b)
    psi = np.sqrt(2.0) * oscillator_wavefunctions(2 * n - 1, rule.nodes)[1::2]
    return (psi * rule.weights) @ psi.T


@dataclass(frozen=True)
class WindowSet:
    """Per-slice observation windows.

    Attributes:
        kinds: per slice, ``"bottom"`` for (0, x_k) or ``"top"`` for (x_k, inf).
        thresholds: the x_k, in physical units (divided by sigma_k on use).
        truncation_point: half-line cutoff in scaled units; ``None`` uses
            sqrt(4n) + 10 for excursion kernels.
        quad_order: Gauss--Legendre order per nonempty window.
    """

    kinds: tuple[str, ...]
    thresholds: tuple[float, ...]
    truncation_point: float | None = None
    quad_order: int = DEFAULT_QUAD_ORDER

    def __post_init__(self):
        kinds = tuple(np.atleast_1d(self.kinds).tolist())
        thr = tuple(float(x) for x in np.atleast_1d(self.thresholds))
        if len(kinds) == 1 and len(thr) > 1:
            kinds = kinds * len(thr)
        if len(kinds) != len(thr):
            raise ValueError("kinds and thresholds must have equal length")
        if any(k not in ("bottom", "top") for k in kinds):
            raise ValueError("window kinds are 'bottom' or 'top'")
        if any(np.isnan(x) or x < 0 for x in thr):
            raise ValueError("thresholds must be nonnegative")
        finite = [x for x in thr if np.isfinite(x)]
        if self.truncation_point is not None and finite and self.truncation_point <= 0:
            raise ValueError("truncation point must be positive")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "thresholds", thr)

    @classmethod
    def bottom(cls, thresholds: Sequence[float], **kw) -> "WindowSet":
        return cls(("bottom",) * len(thresholds), tuple(thresholds), **kw)

    @classmethod
    def top(cls, thresholds: Sequence[float], **kw) -> "WindowSet":
        return cls(("top",) * len(thresholds), tuple(thresholds), **kw)

    @property
    def m(self) -> int:
        return len(self.thresholds)

    @property
    def uniform_kind(self) -> bool:
        """True when every window has the same kind (probability semantics)."""
        return len(set(self.kinds)) == 1

    def scaled_windows(self, scales) -> list[tuple[float, float]]:
        out = []
        for kind, x, s in zip(self.kinds, self.thresholds, scales):
            xs = x / s
            out.append((0.0, xs) if kind == "bottom" else (xs, np.inf))
        return out


def discretize_extended(kernel: BEKernel, windows: WindowSet) -> np.ndarray:
    """Symmetrized block Nystrom matrix of the extended excursion kernel."""
    if windows.m != kernel.m:
        raise ValueError("window count does not match the time partition")
    trunc = windows.truncation_point or be_truncation(kernel.n)
    scaled = windows.scaled_windows(kernel.times.scale_factors)
    for a, b in scaled:
        if np.isfinite(b) and b > trunc:
            raise ValueError("truncation point must exceed every finite endpoint")
    rules = [window_rule(w, windows.quad_order, trunc) for w in scaled]
    return _assemble(rules, lambda k, l, x, y: be_extended_block(kernel, k, l, x, y))


def _assemble(rules, block) -> np.ndarray:
    idx = [k for k, r in enumerate(rules) if r is not None]
    if not idx:
        return np.zeros((0, 0))
    rows = []
    for k in idx:
        rk = rules[k]
        row = []
        for l in idx:
            rl = rules[l]
            b = block(k, l, rk.nodes, rl.nodes)
            row.append(np.sqrt(rk.weights)[:, None] * b * np.sqrt(rl.weights)[None, :])
        rows.append(np.hstack(row))
    return np.vstack(rows)


def fredholm_det_extended(kernel: BEKernel, windows: WindowSet) -> float:
    """det(I - K^{BE} chi_J) for the extended excursion kernel.

    For all-bottom windows this is P(X_1(tau_k) >= x_k for all k); for all-top
    windows it is P(X_n(tau_k) < x_k for all k).  Mixed kinds are computed as
    raw determinants without a probability interpretation.
    """
    if kernel.m == 0:
        raise ValueError("empty time partition")
    return _det_identity_minus(discretize_extended(kernel, windows))


def fredholm_det_bessel_extended(times: BesselTimePartition, thresholds,
                                 quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """det(I - K^{Bes} chi_J) with J_k = (0, x_k) for the extended Bessel kernel."""
    if isinstance(thresholds, WindowSet):
        if any(k != "bottom" for k in thresholds.kinds):
            raise ValueError("the Bessel determinant uses bottom windows (0, x_k)")
        quad_order = thresholds.quad_order
        thresholds = thresholds.thresholds
    thresholds = [float(x) for x in np.atleast_1d(thresholds)]
    if len(thresholds) != times.m:
        raise ValueError("window count does not match the time partition")
    rules = [window_rule((0.0, x), quad_order) for x in thresholds]
    mat = _assemble(rules, lambda k, l, x, y: bessel_extended_block(times, k, l, x, y))
    return _det_identity_minus(mat)


def resolvent_diagonal(kernel: Kernel, s: float, quad_order: int = DEFAULT_QUAD_ORDER,
                       kind: str = "bottom", truncation_point: float | None = None,
                       substitution: str = "sqrt", cond_limit: float = 1e12) -> float:
    """R(s, s) for the resolvent (I - K chi_J)^{-1} K chi_J, J = (0, s) or (s, inf).

    The default square-root substitution suits square-variable kernels such
    as K0, whose endpoint behaviour is x^{1/4}.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    window = (0.0, s) if kind == "bottom" else (s, np.inf)
    rule = window_rule(window, quad_order, truncation_point, substitution)
    kss = float(kernel(np.asarray(s), np.asarray(s)))
    if rule is None:
        return kss
    sw = np.sqrt(rule.weights)
    x = rule.nodes
    mat = np.eye(len(x)) - sw[:, None] * kernel(x[:, None], x[None, :]) * sw[None, :]
    if np.linalg.cond(mat) > cond_limit:
        raise np.linalg.LinAlgError("near-singular resolvent system")
    ks = sw * kernel(x, np.full_like(x, s))
    return kss + float(ks @ np.linalg.solve(mat, ks))


def scalar_kernel(n: int) -> Kernel:
    """Convenience: the scalar excursion kernel as a two-argument callable."""
    return partial(kernel_scalar, n)


def k0_kernel(n: int) -> Kernel:
    """Convenience: the square-variable kernel K0 as a two-argument callable."""
    return partial(kernel_k0, n)
