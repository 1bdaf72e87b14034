"""Fractional Brownian motion sampling on uniform time grids.

Two exact-in-distribution samplers are provided:

* :class:`CholeskySampler` factorizes the path covariance directly.  It is
  the reference sampler: exact, O(n^2) memory, capped at a configurable
  number of steps.
* :class:`CirculantSampler` embeds the stationary increment covariance in a
  circulant matrix and diagonalizes it with the FFT (Davies-Harte).  It is
  the production sampler, O(n log n) per path.

Both draw from a seeded :class:`numpy.random.Generator`, and ensembles use
per-path seeds derived from a master seed with a splitting function, so
results do not depend on how paths are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .validation import check_hurst, check_positive

__all__ = [
    "TimeGrid",
    "GaussianPath",
    "FactorizationError",
    "EmbeddingError",
    "fbm_covariance",
    "covariance_matrix",
    "CholeskySampler",
    "CirculantSampler",
    "sample_fbm_cholesky",
    "sample_fbm_circulant",
    "sample_fbm",
    "path_seed_sequence",
]

#: Largest number of steps the Cholesky sampler accepts by default.
CHOLESKY_STEP_CAP = 4096


class FactorizationError(RuntimeError):
    """Covariance factorization failed; carries the offending pivot index."""

    def __init__(self, pivot: int):
        super().__init__(
            f"covariance matrix is not numerically positive definite "
            f"(leading minor {pivot})"
        )
        self.pivot = int(pivot)


class EmbeddingError(RuntimeError):
    """The circulant embedding produced a negative eigenvalue."""

    def __init__(self, min_eigenvalue: float):
        super().__init__(
            f"circulant embedding has negative eigenvalue {min_eigenvalue:.3e}; "
            f"fall back to the Cholesky sampler"
        )
        self.min_eigenvalue = float(min_eigenvalue)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * t_max / n_steps for k = 0..n_steps."""

    t_max: float
    n_steps: int

    def __post_init__(self):
        check_positive("t_max", self.t_max)
        if int(self.n_steps) < 1 or self.n_steps != int(self.n_steps):
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_steps + 1)


@dataclass(frozen=True)
class GaussianPath:
    """A discretized fBm sample path; values[0] is pinned to 0."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_steps + 1,):
            raise ValueError(
                f"values must have length n_steps+1={self.grid.n_steps + 1}, "
                f"got {vals.shape}"
            )
        if vals[0] != 0.0:
            raise ValueError("an fBm path started at time 0 must have values[0] = 0")
        object.__setattr__(self, "values", vals)


def fbm_covariance(s, t, H: float):
    """Covariance of fBm, (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.

    Accepts scalars or arrays; symmetric in (s, t).  Negative time arguments
    are a domain error.
    """
    h = check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("fbm_covariance requires s, t >= 0")
    out = 0.5 * (s ** (2 * h) + t ** (2 * h) - np.abs(t - s) ** (2 * h))
    return out if out.ndim else float(out)


def covariance_matrix(grid: TimeGrid, H: float) -> np.ndarray:
    """Covariance of (B_{t_1}, ..., B_{t_n}) on the interior/terminal nodes."""
    t = grid.times()[1:]
    return fbm_covariance(t[:, None], t[None, :], H)


def path_seed_sequence(seed, index: int) -> np.random.SeedSequence:
    """Derive the seed of path ``index`` from a master seed.

    Splitting goes through :class:`numpy.random.SeedSequence` spawn keys, so
    path ``i`` of an ``N``-path ensemble is the same for every ``N`` and for
    any parallel schedule.
    """
    if isinstance(seed, np.random.SeedSequence):
        key = tuple(seed.spawn_key) + (int(index),)
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=key)
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class CholeskySampler:
    """Exact fBm sampler from a Cholesky factor of the path covariance.

    The factorization is done once at construction; each :meth:`sample` call
    costs one matrix-vector product.
    """

    def __init__(self, grid: TimeGrid, H: float, step_cap: int = CHOLESKY_STEP_CAP):
        self.grid = grid
        self.H = check_hurst(H)
        if grid.n_steps > step_cap:
            raise ValueError(
                f"n_steps={grid.n_steps} exceeds the Cholesky cap {step_cap} "
                f"(O(n^2) memory); use the circulant sampler"
            )
        cov = covariance_matrix(grid, self.H)
        # No jitter: surface factorization failure instead of regularizing.
        factor, info = lapack.dpotrf(cov, lower=1)
        if info > 0:
            raise FactorizationError(info)
        if info < 0:
            raise ValueError(f"dpotrf: illegal argument {-info}")
        self._lower = np.tril(factor)

    def sample(self, seed) -> GaussianPath:
        rng = _rng_from(seed)
        z = rng.standard_normal(self.grid.n_steps)
        values = np.concatenate(([0.0], self._lower @ z))
        return GaussianPath(self.grid, values)


def _embedding_eigenvalues(n_steps: int, H: float) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the fGn covariance (unit lag)."""
    k = np.arange(n_steps + 1, dtype=float)
    gamma = 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    first_row = np.concatenate((gamma[:n_steps], gamma[n_steps:], gamma[n_steps - 1:0:-1]))
    return np.fft.fft(first_row).real


class CirculantSampler:
    """Davies-Harte fBm sampler via circulant embedding of the increments."""

    def __init__(self, grid: TimeGrid, H: float):
        self.grid = grid
        self.H = check_hurst(H)
        eigs = _embedding_eigenvalues(grid.n_steps, self.H)
        floor = -1e-12 * eigs.max()
        if eigs.min() < floor:
            raise EmbeddingError(eigs.min())
        self._sqrt_eigs = np.sqrt(np.clip(eigs, 0.0, None))
        self._scale = grid.dt ** self.H

    def sample(self, seed) -> GaussianPath:
        rng = _rng_from(seed)
        n = self.grid.n_steps
        m = 2 * n
        z = rng.standard_normal(m)
        w = np.zeros(m, dtype=complex)
        w[0] = z[0]
        w[n] = z[1]
        if n > 1:
            w[1:n] = (z[2 : n + 1] + 1j * z[n + 1 : m]) / np.sqrt(2.0)
            w[n + 1 :] = np.conj(w[1:n][::-1])
        fgn = np.sqrt(m) * np.fft.ifft(self._sqrt_eigs * w).real[:n]
        values = np.concatenate(([0.0], np.cumsum(self._scale * fgn)))
        return GaussianPath(self.grid, values)


def sample_fbm_cholesky(grid: TimeGrid, H: float, seed) -> GaussianPath:
    """One fBm path via covariance factorization; deterministic given seed."""
    return CholeskySampler(grid, H).sample(seed)


def sample_fbm_circulant(grid: TimeGrid, H: float, seed) -> GaussianPath:
    """One fBm path via circulant embedding; deterministic given seed."""
    return CirculantSampler(grid, H).sample(seed)


def make_sampler(grid: TimeGrid, H: float, method: str = "auto"):
    """Build a sampler object; ``auto`` prefers circulant with Cholesky fallback."""
    if method == "cholesky":
        return CholeskySampler(grid, H)
    if method == "circulant":
        return CirculantSampler(grid, H)
    if method == "auto":
        try:
            return CirculantSampler(grid, H)
        except EmbeddingError:
            return CholeskySampler(grid, H)
    raise ValueError(f"unknown sampler method {method!r}")


def sample_fbm(grid: TimeGrid, H: float, seed, method: str = "auto") -> GaussianPath:
    return make_sampler(grid, H, method).sample(seed)
