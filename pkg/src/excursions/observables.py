"""User-facing quantities built on the determinant, ODE and kernel modules.

Distribution functions use the scaled threshold s = x / sigma(tau) with
sigma(tau) = sqrt(2 tau (1 - tau)); every method reduces to a function of s.
Expected areas integrate the distribution functions in s and use
int_0^1 sigma(tau) d tau = pi sqrt(2) / 8 analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .fredholm import (
    DEFAULT_QUAD_ORDER,
    WindowSet,
    be_truncation,
    finite_det,
    fredholm_det_bessel_extended,
    fredholm_det_extended,
    fredholm_det_scalar,
    scalar_kernel,
)
from .kernels import (
    BEKernel,
    BesselTimePartition,
    TimePartition,
    be_raw_entry,
    bessel_extended_entry,
    bessel_kernel,
    kernel_scalar,
)
from .painleve import SERIES_MAX_S, prob_bottom, prob_top, series_log_integral

__all__ = [
    "F2_MEAN",
    "AREA_PREFACTOR",
    "METHODS",
    "AreaResult",
    "LimitConstants",
    "sigma",
    "bottom_cdf",
    "top_cdf",
    "joint_cdf",
    "expected_area_bottom",
    "expected_area_top",
    "expected_areas",
    "bessel_integral",
    "constant_cL",
    "constant_cH",
    "area_asymptotics",
    "bessel_scaling_error",
    "joint_limit_check",
]

# Mean of the GUE Tracy-Widom distribution (stored datum, not computed here).
F2_MEAN = -1.771086807411601
# (pi sqrt(2) / 8) / 2: the tau integral of sigma, with the determinant in s units
AREA_PREFACTOR = np.pi / (4.0 * np.sqrt(2.0))
METHODS = ("finite", "fredholm", "painleve", "series")
TAIL_LEVEL = 1e-14


@dataclass
class AreaResult:
    """Expected areas under the lowest and highest paths."""

    n: int
    bottom_mean: float
    top_mean: float
    bottom_error: float = 0.0
    top_error: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def scaled_bottom(self) -> float:
        """sqrt(n) times the lowest-path area."""
        return float(np.sqrt(self.n) * self.bottom_mean)


@dataclass
class LimitConstants:
    """Constants of the large-n area asymptotics."""

    c_L: float
    bessel_integral: float
    c_H: float
    f2_mean: float = F2_MEAN
    bessel_error: float = 0.0
    cutoff: float = 0.0


def sigma(tau: float) -> float:
    """Standard deviation scale sqrt(2 tau (1 - tau)) of a path at time tau."""
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (0, 1)")
    return float(np.sqrt(2.0 * tau * (1.0 - tau)))


def _scaled(tau, x):
    x = np.atleast_1d(np.asarray(x, float))
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("thresholds must be nonnegative")
    return x / sigma(tau)


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")


def bottom_cdf(n: int, tau: float, x, method: str = "finite",
               quad_order: int = DEFAULT_QUAD_ORDER, tol: float = 1e-12):
    """P(X_1(tau) >= x), the law of the lowest path.

    Args:
        n: number of paths.
        tau: observation time in (0, 1).
        x: threshold(s) in physical units.
        method: ``finite`` (n x n Gram determinant), ``fredholm`` (Nystrom),
            ``painleve`` (ODE) or ``series`` (small-s expansion, s <= 0.3).
    """
    _check_method(method)
    s = _scaled(tau, x)
    if method == "finite":
        out = np.array([finite_det(n, (0.0, si), quad_order) for si in s])
    elif method == "fredholm":
        out = np.array([fredholm_det_scalar(scalar_kernel(n), (0.0, si), quad_order)
                        for si in s])
    elif method == "painleve":
        out = np.atleast_1d(prob_bottom(n, s, tol=tol))
    else:
        if np.any(s > SERIES_MAX_S):
            raise ValueError(f"series method needs s <= {SERIES_MAX_S}")
        out = np.array([np.exp(-series_log_integral(n, si * si)) if si > 0 else 1.0
                        for si in s])
    return out if np.ndim(x) else float(out[0])


def top_cdf(n: int, tau: float, x, method: str = "finite",
            quad_order: int = DEFAULT_QUAD_ORDER, tol: float = 1e-12):
    """P(X_n(tau) < x), the law of the highest path (methods as bottom_cdf,
    without ``series``)."""
    _check_method(method)
    s = _scaled(tau, x)
    trunc = be_truncation(n)
    if method == "finite":
        out = np.array([finite_det(n, (si, np.inf), quad_order) for si in s])
    elif method == "fredholm":
        out = np.array([fredholm_det_scalar(scalar_kernel(n), (si, np.inf), quad_order,
                                            truncation_point=trunc) for si in s])
    elif method == "painleve":
        out = np.zeros_like(s)
        pos = s > 0
        if np.any(pos):
            out[pos] = np.atleast_1d(prob_top(n, s[pos], tol=tol))
    else:
        raise ValueError("no series expansion is available for the highest path")
    return out if np.ndim(x) else float(out[0])


def joint_cdf(n: int, times, thresholds, kind: str = "bottom",
              quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Joint law at several times through the extended-kernel determinant.

    ``kind="bottom"``: P(X_1(tau_k) >= x_k for all k);
    ``kind="top"``: P(X_n(tau_k) < x_k for all k).  Thresholds are physical.
    """
    if not isinstance(times, TimePartition):
        times = TimePartition(tuple(np.atleast_1d(times)))
    thr = tuple(np.atleast_1d(np.asarray(thresholds, float)))
    windows = WindowSet((kind,) * len(thr), thr, quad_order=quad_order)
    return fredholm_det_extended(BEKernel(n, times), windows)


# ---------------------------------------------------------------------------
# expected areas


def _tail_cutoff(f, start: float, level: float = TAIL_LEVEL, step: float = 1.0,
                 limit: float = 80.0) -> float:
    s = start
    while abs(f(s)) >= level:
        s += step
        if s > limit:
            raise RuntimeError(f"integrand still above {level} at s = {limit}")
    return s


def _integrate(f, upper: float, breaks: int) -> tuple[float, float]:
    pts = np.linspace(0.0, upper, breaks + 1)[1:-1]
    val, err = quad(f, 0.0, upper, points=pts, epsabs=1e-13, epsrel=1e-13, limit=400)
    return float(val), float(err)


def expected_area_bottom(n: int, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Mean area under the lowest path: (pi/(4 sqrt 2)) int_0^inf P_bottom(s) ds."""
    return expected_areas(n, quad_order).bottom_mean


def expected_area_top(n: int, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Mean area under the highest path: (pi/(4 sqrt 2)) int_0^inf (1 - P_top(s)) ds."""
    return expected_areas(n, quad_order).top_mean


def expected_areas(n: int, quad_order: int = DEFAULT_QUAD_ORDER) -> AreaResult:
    """Both expected areas with quadrature error estimates and tail cutoffs."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")

    def low(s):
        return finite_det(n, (0.0, s), quad_order)

    def high(s):
        return 1.0 - finite_det(n, (s, np.inf), quad_order)

    edge = np.sqrt(4.0 * n)
    cut_low = _tail_cutoff(low, edge)
    cut_high = _tail_cutoff(high, edge + 2.0)
    panels = 2 * int(np.ceil(max(cut_low, cut_high)))
    lo, lo_err = _integrate(low, cut_low, panels)
    hi, hi_err = _integrate(high, cut_high, panels)
    return AreaResult(n, AREA_PREFACTOR * lo, AREA_PREFACTOR * hi,
                      AREA_PREFACTOR * (lo_err + TAIL_LEVEL),
                      AREA_PREFACTOR * (hi_err + TAIL_LEVEL),
                      {"cutoff_bottom": cut_low, "cutoff_top": cut_high,
                       "quad_order": quad_order})


# ---------------------------------------------------------------------------
# asymptotic constants


def bessel_integral(quad_order: int = DEFAULT_QUAD_ORDER) -> tuple[float, float, float]:
    """int_0^inf x^{-1/2} det(I - K0Bes chi_(0,x)) dx as 2 int_0^inf det(I - KBes chi_(0,s)) ds.

    Returns ``(value, error_estimate, cutoff)``; the substitution x = s^2
    removes the endpoint singularity.
    """
    def det(s):
        return fredholm_det_scalar(bessel_kernel, (0.0, s), quad_order)

    cut = _tail_cutoff(det, 4.0, step=0.5)
    val, err = _integrate(det, cut, int(2 * np.ceil(cut)))
    return 2.0 * val, 2.0 * (err + TAIL_LEVEL), cut


def constant_cH() -> float:
    """c_H = pi / (8 2^{1/6}) times the stored mean of the GUE Tracy-Widom law."""
    return float(np.pi / (8.0 * 2.0 ** (1.0 / 6.0)) * F2_MEAN)


def constant_cL(quad_order: int = DEFAULT_QUAD_ORDER) -> LimitConstants:
    """c_L = (pi / (16 sqrt 2)) times :func:`bessel_integral`, together with c_H."""
    val, err, cut = bessel_integral(quad_order)
    factor = np.pi / (16.0 * np.sqrt(2.0))
    return LimitConstants(c_L=float(factor * val), bessel_integral=val, c_H=constant_cH(),
                          bessel_error=err, cutoff=cut)


def area_asymptotics(n: int, side: str = "bottom", constants: LimitConstants | None = None
                     ) -> float:
    """Large-n approximations: c_L / sqrt(n) (bottom) or
    (pi / 2^{3/2}) sqrt(n) + c_H n^{-1/6} (top)."""
    if side == "bottom":
        c = constants or constant_cL()
        return float(c.c_L / np.sqrt(n))
    if side == "top":
        c_h = constants.c_H if constants else constant_cH()
        return float(np.pi / 2 ** 1.5 * np.sqrt(n) + c_h * n ** (-1.0 / 6.0))
    raise ValueError("side is 'bottom' or 'top'")


# ---------------------------------------------------------------------------
# scaling limit diagnostics


def _bessel_scales(n: int, tau: float, offsets):
    jac = np.sqrt(tau * (1.0 - tau) / (2.0 * n))
    taus = tuple(tau + tau * (1.0 - tau) / (2.0 * n) * np.asarray(offsets, float))
    return jac, TimePartition(taus)


def bessel_scaling_error(n: int, box_size: float = 5.0,
                         times: BesselTimePartition | None = None, points: int = 101,
                         tau: float = 0.5) -> float:
    """Sup over a grid on [0, box]^2 of the distance to the Bessel kernel.

    Scalar case (``times`` None or m = 1): (1/(2 sqrt n)) K(x/(2 sqrt n), y/(2 sqrt n))
    against K^Bes.  Extended case: the raw extended kernel around ``tau`` with
    positions scaled by sqrt(tau(1-tau)/(2n)) and time offsets by
    tau(1-tau)/(2n), against the extended Bessel kernel, over all blocks.
    """
    if not 0 < box_size <= 8:
        raise ValueError("box_size must lie in (0, 8]")
    x = np.linspace(0.0, box_size, points)
    X, Y = np.meshgrid(x, x, indexing="ij")
    if times is None or times.m == 1:
        c = 2.0 * np.sqrt(n)
        diff = kernel_scalar(n, X / c, Y / c) / c - bessel_kernel(X, Y)
        return float(np.max(np.abs(diff)))
    jac, tp = _bessel_scales(n, tau, times.taus)
    kern = BEKernel(n, tp)
    worst = 0.0
    for k in range(times.m):
        for l in range(times.m):
            a = jac * be_raw_entry(kern, k, l, jac * X, jac * Y)
            b = bessel_extended_entry(times, k, l, X, Y)
            worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def joint_limit_check(times: BesselTimePartition, thresholds, n_list,
                      tau: float = 0.5, quad_order: int = DEFAULT_QUAD_ORDER) -> dict:
    """Scaled excursion determinants next to the extended Bessel determinant.

    Returns a dict with the Bessel value, one row per n (value and absolute
    difference) and whether the differences shrink monotonically.
    """
    if not isinstance(times, BesselTimePartition):
        times = BesselTimePartition(tuple(np.atleast_1d(times)))
    thr = np.atleast_1d(np.asarray(thresholds, float))
    if len(thr) != times.m:
        raise ValueError("one threshold per time is required")
    limit = fredholm_det_bessel_extended(times, thr, quad_order)
    rows = []
    for n in n_list:
        jac, tp = _bessel_scales(n, tau, times.taus)
        windows = WindowSet.bottom(tuple(jac * thr), quad_order=quad_order)
        val = fredholm_det_extended(BEKernel(n, tp), windows)
        rows.append({"n": int(n), "value": val, "difference": abs(val - limit)})
    diffs = [r["difference"] for r in rows]
    monotone = all(b < a for a, b in zip(diffs[:-1], diffs[1:])) or all(d == 0 for d in diffs)
    return {"bessel": limit, "rows": rows, "monotone": monotone,
            "probe": times.m > 1}
