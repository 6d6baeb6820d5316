"""Discrete measures, sampleable measures and seeded random streams.

Points are plain ``float64`` numpy vectors; point clouds are ``(n, d)``
arrays. All randomness flows through :func:`make_rng`, which wraps numpy's
PCG64 bit generator so that a given seed always yields the same stream.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIMPLEX_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``.

    Independent parallel streams are obtained by passing a ``stream`` offset;
    ``make_rng(s, i)`` and ``make_rng(s, j)`` are statistically independent
    for ``i != j`` and each is reproducible on its own.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if stream is None:
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def as_points(points) -> np.ndarray:
    """Coerce to a finite ``(n, d)`` float array; 1-D input is one coordinate per point."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"points must be a (n, d) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain NaN or Inf")
    return arr


def check_simplex(weights, name: str = "weights") -> np.ndarray:
    """Validate simplex weights, renormalizing deviations up to 1e-9."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} contain NaN or Inf")
    if np.any(w < 0):
        raise ValueError(f"{name} must be non-negative")
    total = w.sum()
    dev = abs(total - 1.0)
    if dev > RENORMALIZE_TOL:
        raise ValueError(f"{name} sum to {total!r}, not 1")
    if dev > SIMPLEX_TOL:
        w = w / total
    return w


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i weights[i] * delta(atoms[i])``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = as_points(self.atoms)
        weights = check_simplex(self.weights)
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError(
                f"{atoms.shape[0]} atoms but {weights.shape[0]} weights"
            )
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, atoms) -> DiscreteMeasure:
        atoms = as_points(atoms)
        n = atoms.shape[0]
        return cls(atoms, np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


class ContinuousSampler(ABC):
    """A probability measure known only through its samples."""

    dim: int

    @abstractmethod
    def draw_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. points as an ``(n, dim)`` array."""

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.draw_many(rng, 1)[0]


def sample(sampler: ContinuousSampler, rng: np.random.Generator) -> np.ndarray:
    """One i.i.d. draw from ``sampler``; advances ``rng``."""
    return sampler.draw(rng)


@dataclass(frozen=True, eq=False)
class GaussianMixture(ContinuousSampler):
    """Finite mixture of multivariate normals, sampled via Cholesky factors."""

    means: np.ndarray
    covariances: np.ndarray
    mixture_weights: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        k, d = means.shape
        covs = np.asarray(self.covariances, dtype=np.float64).reshape(k, d, d)
        if not np.allclose(covs, np.swapaxes(covs, 1, 2), rtol=0, atol=1e-12):
            raise ValueError("covariances must be symmetric")
        try:
            chol = np.linalg.cholesky(covs)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariances must be positive definite") from exc
        w = check_simplex(self.mixture_weights, "mixture_weights")
        if w.shape[0] != k:
            raise ValueError(f"{k} components but {w.shape[0]} mixture weights")
        for arr in (means, covs, w, chol):
            arr.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        object.__setattr__(self, "mixture_weights", w)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def draw_many(self, rng, n):
        comp = rng.choice(self.means.shape[0], size=n, p=self.mixture_weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.einsum("nij,nj->ni", self._chol[comp], z)


def make_gaussian_mixture(means, rotation_matrices, dim: int) -> GaussianMixture:
    """Uniform mixture with covariances ``0.01 (R^T + R) + 3 I``, one per ``R``."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    means = np.asarray(means, dtype=np.float64).reshape(-1, dim)
    covs = []
    for R in rotation_matrices:
        R = np.asarray(R, dtype=np.float64)
        if R.shape != (dim, dim):
            raise ValueError(f"rotation matrix must be {dim}x{dim}, got {R.shape}")
        covs.append(0.01 * (R.T + R) + 3.0 * np.eye(dim))
    if len(covs) != means.shape[0]:
        raise ValueError(f"{means.shape[0]} means but {len(covs)} rotation matrices")
    k = len(covs)
    return GaussianMixture(means, np.array(covs), np.full(k, 1.0 / k))


def random_gaussian_mixture(rng, n_components: int = 3, dim: int = 3) -> GaussianMixture:
    """Means uniform in ``[0,1]^dim`` and ``R`` with entries uniform in ``[0,1]``."""
    means = rng.uniform(0.0, 1.0, size=(n_components, dim))
    rots = rng.uniform(0.0, 1.0, size=(n_components, dim, dim))
    return make_gaussian_mixture(means, rots, dim)


@dataclass(frozen=True, eq=False)
class EmpiricalSampler(ContinuousSampler):
    """Draws atom ``i`` of a discrete measure with probability ``weights[i]``."""

    measure: DiscreteMeasure

    @property
    def dim(self) -> int:
        return self.measure.dim

    def draw_many(self, rng, n):
        idx = rng.choice(self.measure.size, size=n, p=self.measure.weights)
        return self.measure.atoms[idx]


def empirical_wrap(m: DiscreteMeasure) -> EmpiricalSampler:
    return EmpiricalSampler(m)


def empirical_from(sampler: ContinuousSampler, n: int, rng) -> DiscreteMeasure:
    """Uniform empirical measure on ``n`` i.i.d. draws."""
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    return DiscreteMeasure.uniform(sampler.draw_many(rng, n))


def load_points(path) -> np.ndarray:
    """Read a whitespace-separated point cloud, one point per line."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(t) for t in line.split()])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} coordinates")
    if not rows:
        raise ValueError(f"{path}: no points")
    return as_points(rows)


def load_measure(points_path, weights_path=None) -> DiscreteMeasure:
    atoms = load_points(points_path)
    if weights_path is None:
        return DiscreteMeasure.uniform(atoms)
    text = Path(weights_path).read_text(encoding="utf-8").split()
    return DiscreteMeasure(atoms, np.array([float(t) for t in text]))


def save_points(path, points) -> None:
    pts = as_points(points)
    lines = (" ".join(repr(float(c)) for c in row) for row in pts)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
