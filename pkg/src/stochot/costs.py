"""Ground costs, dense cost matrices and embedding-file ingestion."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .measures import as_points

ROW_CHUNK = 256


@dataclass(frozen=True)
class CostFunction:
    """``scale * ||x - y||^p``.

    ``kind="squared_euclidean"`` fixes ``p = 2`` and skips the square root,
    ``kind="euclidean_power"`` uses the Euclidean distance raised to ``p``.
    """

    kind: str = "squared_euclidean"
    p: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("squared_euclidean", "euclidean_power"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.kind == "squared_euclidean":
            object.__setattr__(self, "p", 2.0)
        elif not self.p >= 1:
            raise ValueError(f"exponent p must be >= 1, got {self.p}")

    def raw(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Unscaled cost between rows of ``xs`` (n, d) and ``ys`` (m, d), shape (n, m)."""
        diff = xs[:, None, :] - ys[None, :, :]
        sq = np.square(diff).sum(axis=-1)
        if self.kind == "squared_euclidean":
            return sq
        return np.sqrt(sq) ** self.p

    def pairwise(self, xs, ys) -> np.ndarray:
        return self.scale * self.raw(xs, ys)

    def with_scale(self, scale: float) -> CostFunction:
        return replace(self, scale=float(scale))


def squared_euclidean(scale: float = 1.0) -> CostFunction:
    return CostFunction("squared_euclidean", 2.0, scale)


def euclidean_power(p: float, scale: float = 1.0) -> CostFunction:
    return CostFunction("euclidean_power", p, scale)


def eval_cost(c: CostFunction, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(c.pairwise(x[None, :], y[None, :])[0, 0])


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Dense ``I x J`` cost matrix together with the points and cost it came from."""

    entries: np.ndarray
    row_points: np.ndarray
    col_points: np.ndarray
    cost: CostFunction

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def build_cost_matrix(c: CostFunction, xs, ys) -> CostMatrix:
    """Evaluate ``c`` on every pair, one block of rows at a time."""
    xs = as_points(xs)
    ys = as_points(ys)
    if xs.shape[0] == 0 or ys.shape[0] == 0:
        raise ValueError("empty point list")
    if xs.shape[1] != ys.shape[1]:
        raise ValueError(f"dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
    out = np.empty((xs.shape[0], ys.shape[0]))
    for start in range(0, xs.shape[0], ROW_CHUNK):
        stop = start + ROW_CHUNK
        out[start:stop] = c.pairwise(xs[start:stop], ys)
    out.setflags(write=False)
    return CostMatrix(out, xs, ys, c)


def cost_entries(C) -> np.ndarray:
    """Plain float array view of a :class:`CostMatrix` or array-like."""
    if isinstance(C, CostMatrix):
        return C.entries
    arr = np.asarray(C, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {arr.shape}")
    return arr


def median_rescale(c: CostFunction, pool, n_pairs: int, rng) -> CostFunction:
    """Rescale ``c`` so its median over ``n_pairs`` random pairs is exactly 1.

    Each pair joins two distinct pool indices; pairs are drawn independently
    with replacement. For an even count the lower-middle order statistic is
    used.
    """
    pool = as_points(pool)
    n = pool.shape[0]
    if n < 2:
        raise ValueError("pool needs at least two points")
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n - 1, size=n_pairs)
    j = j + (j >= i)
    unit = c.with_scale(1.0)
    vals = np.array([eval_cost(unit, pool[a], pool[b]) for a, b in zip(i, j)])
    med = np.sort(vals)[(n_pairs - 1) // 2]
    if not med > 0:
        raise ValueError("median pair cost is zero; cannot rescale")
    return c.with_scale(1.0 / med)


def save_cost_csv(path, C) -> None:
    entries = cost_entries(C)
    lines = (",".join(repr(float(v)) for v in row) for row in entries)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_cost_csv(path) -> np.ndarray:
    rows = [
        [float(t) for t in line.split(",")]
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    return np.array(rows)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    tokens: tuple
    vectors: np.ndarray

    def __post_init__(self):
        if len(self.tokens) != self.vectors.shape[0]:
            raise ValueError("tokens and vectors differ in length")


def load_embeddings(path, skip_top: int, take: int, rng) -> EmbeddingTable:
    """Stream a GloVe-style text file and sample ``take`` lines after the first ``skip_top``.

    Sampling is uniform without replacement (reservoir sampling), so the file
    is never held in memory; the sample is returned in file order.
    """
    if skip_top < 0 or take < 1:
        raise ValueError("skip_top must be >= 0 and take >= 1")
    reservoir: list[tuple[int, str, list[float]]] = []
    dim = None
    seen = 0
    row = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise ValueError(f"{path}:{lineno}: no vector components")
            elif len(parts) - 1 != dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} floats, got {len(parts) - 1}"
                )
            row += 1
            if row <= skip_top:
                continue
            try:
                vec = [float(t) for t in parts[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if seen < take:
                reservoir.append((seen, parts[0], vec))
            else:
                slot = int(rng.integers(0, seen + 1))
                if slot < take:
                    reservoir[slot] = (seen, parts[0], vec)
            seen += 1
    if seen < take:
        raise ValueError(f"requested {take} lines but only {seen} remain after skipping")
    reservoir.sort(key=lambda item: item[0])
    tokens = tuple(t for _, t, _ in reservoir)
    vectors = np.array([v for _, _, v in reservoir], dtype=np.float64)
    return EmbeddingTable(tokens, vectors)
