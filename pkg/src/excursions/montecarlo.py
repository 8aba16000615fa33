"""Monte Carlo oracle for nonintersecting Brownian excursions.

Two samplers are provided.

* Rejection (``sample_nonintersecting``): n independent excursions, resampled
  until they are strictly ordered at every interior grid time.  This is the
  literal construction, but its acceptance rate decays polynomially in the grid
  size, so it is only practical for n <= 3 and coarse grids.
* Matrix model (``sample_matrix_paths`` / ``sample_matrix_times``): the
  positive eigenvalues of a Hermitian matrix Brownian bridge with the
  symmetry H = [[A, B], [conj(B), -conj(A)]] (A Hermitian, B complex
  symmetric) form n nonintersecting excursions, exactly in law at any finite
  set of times.  Observables at grid times therefore carry no discretization
  bias; only path functionals such as areas depend on the grid.

All randomness flows from ``numpy.random.SeedSequence(seed).spawn(streams)``
into counter-based Philox generators, one per stream.  Work is split over a
fixed number of streams and reduced in stream order, so results do not depend
on the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import quad

from .kernels import path_density

__all__ = [
    "DEFAULT_M",
    "DEFAULT_STREAMS",
    "ExcursionEnsemble",
    "EstimatorResult",
    "RejectionFailure",
    "make_streams",
    "sample_bridge",
    "sample_excursion",
    "sample_nonintersecting",
    "acceptance_rate",
    "sample_matrix_paths",
    "sample_matrix_times",
    "estimate_bottom_cdf",
    "estimate_top_cdf",
    "estimate_joint",
    "estimate_areas",
    "density_chi_square",
    "grid_index",
]

DEFAULT_M = 512
DEFAULT_STREAMS = 8
_BATCH = 50_000  # matrices per eigenvalue call
_PATH_BATCH_ELEMS = 4_000_000  # complex entries per batch of full-path matrices


@dataclass
class ExcursionEnsemble:
    """n ordered excursions on the grid k/M, k = 0..M.

    Attributes:
        n: number of paths.
        grid: the M + 1 times.
        positions: array (n, M + 1), row 0 the lowest path.
        attempts: rejection attempts used (1 for exact samplers).
    """

    n: int
    grid: np.ndarray
    positions: np.ndarray
    attempts: int = 1

    def __post_init__(self):
        self.positions = np.asarray(self.positions, float)
        if self.positions.shape != (self.n, len(self.grid)):
            raise ValueError("positions must have shape (n, M + 1)")

    @property
    def M(self) -> int:
        return len(self.grid) - 1

    def is_valid(self) -> bool:
        """Zero endpoints and strict ordering 0 < X_1 < ... < X_n inside."""
        x = self.positions
        if np.any(x[:, 0] != 0) or np.any(x[:, -1] != 0):
            return False
        inner = x[:, 1:-1]
        return bool(np.all(inner[0] > 0) and np.all(np.diff(inner, axis=0) > 0))

    def areas(self) -> np.ndarray:
        """Trapezoid areas of each path (endpoints vanish, so sum / M)."""
        return self.positions.sum(axis=1) / self.M


@dataclass
class EstimatorResult:
    """Sample mean with its standard error (sample std / sqrt(count))."""

    estimate: float
    standard_error: float
    sample_count: int
    seed: int
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def within(self, value: float, k: float = 3.0) -> bool:
        """True when |estimate - value| <= k standard errors (or exact match)."""
        return abs(self.estimate - value) <= k * self.standard_error + 1e-15

    def as_dict(self) -> dict:
        return {"label": self.label, "estimate": self.estimate,
                "standard_error": self.standard_error, "sample_count": self.sample_count,
                "seed": self.seed, **self.metadata}


class RejectionFailure(RuntimeError):
    """Raised when the rejection sampler exhausts its attempt budget."""

    def __init__(self, n, M, attempts, accepted):
        self.n, self.M, self.attempts, self.accepted = n, M, attempts, accepted
        rate = accepted / attempts if attempts else 0.0
        super().__init__(f"rejection sampler for n={n}, M={M} accepted {accepted} of "
                         f"{attempts} attempts (rate {rate:.3g}); raise max_attempts or "
                         f"use the matrix sampler")


# ---------------------------------------------------------------------------
# streams and elementary samplers


def make_streams(seed: int, streams: int = DEFAULT_STREAMS) -> list[np.random.Generator]:
    """Independent Philox generators derived deterministically from ``seed``."""
    if streams < 1:
        raise ValueError("need at least one stream")
    children = np.random.SeedSequence(int(seed)).spawn(int(streams))
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _split(samples: int, streams: int) -> list[int]:
    base, extra = divmod(int(samples), int(streams))
    return [base + (i < extra) for i in range(streams)]


def _check_M(M: int) -> int:
    M = int(M)
    if M < 8:
        raise ValueError("grid size M must be at least 8")
    return M


def grid_index(tau: float, M: int) -> int:
    """Index k with k / M == tau; times off the grid are rejected."""
    k = round(float(tau) * M)
    if not 0 < k < M or abs(k - float(tau) * M) > 1e-9 * M:
        raise ValueError(f"time {tau} is not an interior point of the grid k/{M}")
    return k


def sample_bridge(M: int, rng: np.random.Generator, size=()) -> np.ndarray:
    """Standard Brownian bridges on k/M, shape ``size + (M + 1,)``."""
    size = tuple(np.atleast_1d(size)) if size != () else ()
    steps = rng.standard_normal(size + (M,)) / np.sqrt(M)
    w = np.concatenate([np.zeros(size + (1,)), np.cumsum(steps, axis=-1)], axis=-1)
    t = np.arange(M + 1) / M
    b = w - t * w[..., -1:]
    b[..., -1] = 0.0
    return b


def sample_excursion(M: int, rng: np.random.Generator, method: str = "bessel") -> np.ndarray:
    """One standard Brownian excursion on the grid k/M.

    ``method="bessel"`` (default) takes the Euclidean norm of a
    three-dimensional Brownian bridge, which is exact in law at grid times.
    ``method="vervaat"`` cyclically shifts a discrete bridge at its minimum;
    that is exact only as M -> infinity because the continuous minimum falls
    between grid points.
    """
    M = _check_M(M)
    if method == "bessel":
        b = sample_bridge(M, rng, size=3)
        return np.sqrt(np.sum(b * b, axis=0))
    if method == "vervaat":
        b = sample_bridge(M, rng)
        k = int(np.argmin(b[:-1]))
        e = np.roll(b[:-1], -k) - b[k]
        return np.append(e, 0.0)
    raise ValueError(f"unknown excursion method {method!r}")


def _strictly_ordered(paths: np.ndarray) -> np.ndarray:
    """paths (..., n, M+1) sorted at mid time; check strict ordering inside."""
    inner = paths[..., 1:-1]
    return np.all(np.diff(inner, axis=-2) > 0, axis=(-2, -1))


def sample_nonintersecting(n: int, M: int, rng: np.random.Generator,
                           max_attempts: int = 1_000_000, batch: int = 256,
                           method: str = "bessel") -> ExcursionEnsemble:
    """Rejection sampler: independent excursions kept when strictly ordered.

    The candidate paths are sorted by their value at the middle grid time and
    accepted only if that order holds at every interior grid time.

    Raises:
        RejectionFailure: after ``max_attempts`` candidates without success.
    """
    if n not in (1, 2, 3):
        raise ValueError("the rejection sampler supports n in {1, 2, 3}")
    M = _check_M(M)
    grid = np.arange(M + 1) / M
    if n == 1:
        return ExcursionEnsemble(1, grid, sample_excursion(M, rng, method)[None, :], 1)
    attempts = 0
    while attempts < max_attempts:
        b = min(batch, max_attempts - attempts)
        if method == "bessel":
            cand = _bessel_batch(n, M, b, rng)
        else:
            cand = np.array([[sample_excursion(M, rng, method) for _ in range(n)]
                             for _ in range(b)])
        order = np.argsort(cand[:, :, M // 2], axis=1)
        cand = np.take_along_axis(cand, order[:, :, None], axis=1)
        ok = _strictly_ordered(cand)
        if np.any(ok):
            i = int(np.argmax(ok))
            return ExcursionEnsemble(n, grid, cand[i], attempts + i + 1)
        attempts += b
    raise RejectionFailure(n, M, attempts, 0)


def _bessel_batch(n, M, size, rng):
    b = sample_bridge(M, rng, size=(size, n, 3))
    return np.sqrt(np.sum(b * b, axis=2))


def acceptance_rate(n: int, M: int, attempts: int, seed: int) -> EstimatorResult:
    """Fraction of independent n-tuples of excursions that are strictly ordered."""
    if n not in (1, 2, 3):
        raise ValueError("the rejection sampler supports n in {1, 2, 3}")
    M = _check_M(M)
    rng = make_streams(seed, 1)[0]
    hits = 0
    done = 0
    while done < attempts:
        b = min(4096, attempts - done)
        cand = _bessel_batch(n, M, b, rng)
        order = np.argsort(cand[:, :, M // 2], axis=1)
        cand = np.take_along_axis(cand, order[:, :, None], axis=1)
        hits += int(np.sum(_strictly_ordered(cand)))
        done += b
    p = hits / attempts
    se = np.sqrt(p * (1 - p) / max(attempts - 1, 1))
    return EstimatorResult(p, float(se), attempts, seed, f"acceptance n={n} M={M}")


# ---------------------------------------------------------------------------
# matrix model


def _matrix_dim(n: int) -> int:
    m = n * (n - 1) // 2
    return n + 2 * m + 2 * n + 2 * m


def _eigen_positive(z: np.ndarray, n: int) -> np.ndarray:
    """Positive eigenvalues (ascending) of H assembled from bridge coordinates z.

    z has shape (..., dim); real coordinates each of bridge variance t(1 - t)
    are combined so that A_ii ~ 1, Re/Im A_ij ~ 1/2, Re/Im B_ii ~ 1,
    Re/Im B_ij ~ 1/2 in units of t(1 - t).
    """
    if n == 1:
        return np.sqrt(np.sum(z * z, axis=-1))[..., None]
    m = n * (n - 1) // 2
    i, j = np.triu_indices(n, 1)
    shape = z.shape[:-1]
    a = np.zeros(shape + (n, n), complex)
    b = np.zeros(shape + (n, n), complex)
    k = 0
    a[..., range(n), range(n)] = z[..., k:k + n]
    k += n
    off = (z[..., k:k + m] + 1j * z[..., k + m:k + 2 * m]) / np.sqrt(2.0)
    k += 2 * m
    a[..., i, j] = off
    a[..., j, i] = off.conj()
    b[..., range(n), range(n)] = z[..., k:k + n] + 1j * z[..., k + n:k + 2 * n]
    k += 2 * n
    off = (z[..., k:k + m] + 1j * z[..., k + m:k + 2 * m]) / np.sqrt(2.0)
    b[..., i, j] = off
    b[..., j, i] = off
    h = np.block([[a, b], [b.conj(), -a.conj()]])
    if n == 2:
        # spectrum +-l1, +-l2: l1^2 + l2^2 = tr(H^2)/2 and l1^2 l2^2 = det H
        half_trace = 0.5 * np.sum(np.abs(h) ** 2, axis=(-2, -1))
        det = np.linalg.det(h).real
        big = 0.5 * (half_trace + np.sqrt(np.maximum(half_trace ** 2 - 4.0 * det, 0.0)))
        small = np.where(big > 0, det / np.where(big > 0, big, 1.0), 0.0)
        return np.sqrt(np.stack([np.maximum(small, 0.0), big], axis=-1))
    return np.linalg.eigvalsh(h)[..., n:]


def sample_matrix_times(n: int, times, rng: np.random.Generator, size: int) -> np.ndarray:
    """Positions of the n paths at ``times`` (strictly increasing in (0, 1)).

    Returns:
        Array (size, len(times), n), ascending along the last axis.
    """
    times = np.atleast_1d(np.asarray(times, float))
    if np.any(times <= 0) or np.any(times >= 1) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing inside (0, 1)")
    dim = _matrix_dim(n)
    knots = np.append(times, 1.0)
    dt = np.diff(np.concatenate([[0.0], knots]))
    out = np.empty((size, len(times), n))
    for lo in range(0, size, _BATCH):
        b = min(_BATCH, size - lo)
        steps = rng.standard_normal((b, len(knots), dim)) * np.sqrt(dt)[None, :, None]
        w = np.cumsum(steps, axis=1)
        z = w[:, :-1, :] - times[None, :, None] * w[:, -1:, :]
        out[lo:lo + b] = _eigen_positive(z, n)
    return out


def sample_matrix_paths(n: int, M: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Full paths of the n excursions on k/M: array (size, n, M + 1)."""
    M = _check_M(M)
    dim = _matrix_dim(n)
    out = np.zeros((size, n, M + 1))
    per = max(1, _PATH_BATCH_ELEMS // ((M - 1) * 4 * n * n))
    for lo in range(0, size, per):
        b = min(per, size - lo)
        z = sample_bridge(M, rng, size=(b, dim))[..., 1:-1]  # (b, dim, M-1)
        ev = _eigen_positive(np.moveaxis(z, 1, -1), n)  # (b, M-1, n)
        out[lo:lo + b, :, 1:-1] = np.moveaxis(ev, -1, 1)
    return out


# ---------------------------------------------------------------------------
# estimators


def _run_streams(seed, streams, samples, threads, work):
    """Apply ``work(rng, count)`` per stream and return results in stream order."""
    gens = make_streams(seed, streams)
    counts = _split(samples, streams)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(work, gens, counts))
    return [work(g, c) for g, c in zip(gens, counts)]


def _mean_result(sums, squares, count, seed, label, **meta) -> EstimatorResult:
    mean = sums / count
    var = max((squares - count * mean * mean) / max(count - 1, 1), 0.0)
    return EstimatorResult(float(mean), float(np.sqrt(var / count)), int(count), int(seed),
                           label, meta)


def _times_sampler(n, M, times, sampler):
    ks = [grid_index(t, M) for t in times]
    if sampler == "matrix":
        return lambda rng, c: sample_matrix_times(n, np.asarray(ks) / M, rng, c)
    if sampler == "rejection":
        def draw(rng, c):
            out = np.empty((c, len(ks), n))
            for i in range(c):
                e = sample_nonintersecting(n, M, rng)
                out[i] = e.positions[:, ks].T
            return out
        return draw
    raise ValueError(f"unknown sampler {sampler!r}")


def estimate_bottom_cdf(n: int, M: int, tau: float, thresholds, samples: int, seed: int,
                        streams: int = DEFAULT_STREAMS, threads: int = 1,
                        sampler: str = "matrix") -> list[EstimatorResult]:
    """Estimates of P(X_1(tau) >= x) for each threshold x (physical units)."""
    thr = np.atleast_1d(np.asarray(thresholds, float))
    draw = _times_sampler(n, M, [tau], sampler)

    def work(rng, c):
        x1 = draw(rng, c)[:, 0, 0]
        hits = (x1[:, None] >= thr[None, :]).sum(axis=0)
        return hits

    parts = _run_streams(seed, streams, samples, threads, work)
    hits = np.sum(parts, axis=0)
    return [_mean_result(h, h, samples, seed, f"P(X_1({tau:g}) >= {x:g})", sampler=sampler)
            for h, x in zip(hits, thr)]


def estimate_top_cdf(n: int, M: int, tau: float, thresholds, samples: int, seed: int,
                     streams: int = DEFAULT_STREAMS, threads: int = 1,
                     sampler: str = "matrix") -> list[EstimatorResult]:
    """Estimates of P(X_n(tau) < x) for each threshold x (physical units)."""
    thr = np.atleast_1d(np.asarray(thresholds, float))
    draw = _times_sampler(n, M, [tau], sampler)

    def work(rng, c):
        xn = draw(rng, c)[:, 0, -1]
        return (xn[:, None] < thr[None, :]).sum(axis=0)

    hits = np.sum(_run_streams(seed, streams, samples, threads, work), axis=0)
    return [_mean_result(h, h, samples, seed, f"P(X_{n}({tau:g}) < {x:g})", sampler=sampler)
            for h, x in zip(hits, thr)]


def estimate_joint(n: int, M: int, times, thresholds, kind: str, samples: int, seed: int,
                   streams: int = DEFAULT_STREAMS, threads: int = 1,
                   sampler: str = "matrix") -> EstimatorResult:
    """Joint probability over several grid times.

    ``kind="bottom"``: P(X_1(t_k) >= x_k for all k);
    ``kind="top"``: P(X_n(t_k) < x_k for all k).
    """
    times = np.atleast_1d(np.asarray(times, float))
    thr = np.atleast_1d(np.asarray(thresholds, float))
    if len(times) != len(thr):
        raise ValueError("times and thresholds must have equal length")
    if kind not in ("bottom", "top"):
        raise ValueError("kind is 'bottom' or 'top'")
    draw = _times_sampler(n, M, times, sampler)

    def work(rng, c):
        x = draw(rng, c)
        if kind == "bottom":
            ok = np.all(x[:, :, 0] >= thr[None, :], axis=1)
        else:
            ok = np.all(x[:, :, -1] < thr[None, :], axis=1)
        return int(ok.sum())

    hits = sum(_run_streams(seed, streams, samples, threads, work))
    return _mean_result(hits, hits, samples, seed, f"joint {kind}", sampler=sampler)


def estimate_areas(n: int, M: int, samples: int, seed: int, streams: int = DEFAULT_STREAMS,
                   threads: int = 1, sampler: str = "matrix"
                   ) -> tuple[EstimatorResult, EstimatorResult]:
    """Mean trapezoid areas under the lowest and highest paths."""
    M = _check_M(M)

    def work(rng, c):
        if sampler == "matrix":
            paths = sample_matrix_paths(n, M, rng, c)
        elif sampler == "rejection":
            paths = np.stack([sample_nonintersecting(n, M, rng).positions for _ in range(c)])
        else:
            raise ValueError(f"unknown sampler {sampler!r}")
        a = paths.sum(axis=2) / M  # (c, n)
        lo, hi = a[:, 0], a[:, -1]
        return np.array([lo.sum(), (lo * lo).sum(), hi.sum(), (hi * hi).sum()])

    tot = np.sum(_run_streams(seed, streams, samples, threads, work), axis=0)
    return (_mean_result(tot[0], tot[1], samples, seed, "E(A_lowest)", M=M, sampler=sampler),
            _mean_result(tot[2], tot[3], samples, seed, "E(A_highest)", M=M, sampler=sampler))


def density_chi_square(n: int, M: int, tau: float, samples: int, seed: int, bins: int = 40,
                       streams: int = DEFAULT_STREAMS, threads: int = 1,
                       sampler: str = "matrix") -> dict:
    """Chi-square test of all path positions at ``tau`` against the one-point density.

    Bins are equiprobable under the density (normalized to a probability by
    dividing by n); the last bin is open-ended.
    """
    draw = _times_sampler(n, M, [tau], sampler)
    sigma = np.sqrt(2 * tau * (1 - tau))
    # equiprobable edges from the cumulative density on a fine grid
    xs = np.linspace(0.0, sigma * (np.sqrt(4 * n) + 8), 20001)
    dens = path_density(n, tau, xs) / n
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    cdf /= cdf[-1]
    edges = np.interp(np.linspace(0, 1, bins + 1)[1:-1], cdf, xs)

    def work(rng, c):
        x = draw(rng, c)[:, 0, :].ravel()
        return np.bincount(np.searchsorted(edges, x), minlength=bins)

    counts = np.sum(_run_streams(seed, streams, samples, threads, work), axis=0)
    # expected counts from the density itself (robust to cdf interpolation)
    probs = []
    lo = 0.0
    for hi in list(edges) + [np.inf]:
        upper = hi if np.isfinite(hi) else xs[-1]
        probs.append(quad(lambda x: path_density(n, tau, x) / n, lo, upper, limit=200)[0])
        lo = hi
    probs = np.asarray(probs)
    expected = probs / probs.sum() * counts.sum()
    stat, pvalue = stats.chisquare(counts, expected)
    return {"statistic": float(stat), "pvalue": float(pvalue), "dof": bins - 1,
            "counts": counts, "expected": expected, "samples": int(samples), "seed": int(seed)}
