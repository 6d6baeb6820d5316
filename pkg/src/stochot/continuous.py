"""Kernel SGD for entropic OT between two sampleable measures.

The dual potentials live in Gaussian-kernel RKHSs and are stored as a
growing expansion ``u(x) = sum_i alpha_i k(x, x_i)``,
``v(y) = sum_i alpha_i l(y, y_i)``. Step ``k`` evaluates both sums, so ``k``
steps cost ``O(k^2)`` kernel evaluations.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .costs import CostFunction
from .discrete import SolveConfig
from .measures import ContinuousSampler, DiscreteMeasure, as_points, make_rng
from .semidual import check_eps, softmin
from .trace import ConvergenceTrace

EXP_GUARD = 700.0
EVAL_CHUNK = 4096


class NumericalOverflowError(FloatingPointError):
    """An exponent exceeded the overflow guard; ``eps`` is too small for the cost scale."""


def _guard(z):
    top = np.max(z)
    if top > EXP_GUARD:
        raise NumericalOverflowError(
            f"exponent {float(top):.1f} exceeds {EXP_GUARD}: eps is too small for this cost scale"
        )


@dataclass(frozen=True)
class Kernel:
    """Gaussian kernel ``exp(-||x - x'||^2 / sigma^2)``."""

    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"bandwidth must be positive, got {self.sigma}")

    def __call__(self, a, b) -> np.ndarray:
        a = as_points(a)
        b = as_points(b)
        sq = np.square(a[:, None, :] - b[None, :, :]).sum(axis=-1)
        return np.exp(-sq / self.sigma**2)


def median_bandwidth(sampler: ContinuousSampler, rng, n: int = 512) -> float:
    """Median pairwise distance over ``n`` pilot draws."""
    pts = sampler.draw_many(rng, n)
    d = np.sqrt(np.square(pts[:, None, :] - pts[None, :, :]).sum(axis=-1))
    return float(np.median(d[np.triu_indices(n, 1)]))


class KernelExpansion:
    """Append-only list of ``(alpha, x, y)`` with the kernels and step settings.

    Storage is preallocated and doubled on demand; appended entries are never
    modified afterwards.
    """

    def __init__(self, kernel_x: Kernel, kernel_y: Kernel, dim_x: int, dim_y: int,
                 eps: float, step_c: float, radius_r: float = 1e4, truncate: bool = False,
                 capacity: int = 1024):
        self.kernel_x = kernel_x
        self.kernel_y = kernel_y
        self.eps = check_eps(eps, allow_zero=False)
        if not step_c > 0 or not radius_r > 0:
            raise ValueError("step_c and radius_r must be positive")
        self.step_c = float(step_c)
        self.radius_r = float(radius_r)
        self.truncate = truncate
        self.k = 0
        self.n = 0
        self._alpha = np.empty(capacity)
        self._xs = np.empty((capacity, dim_x))
        self._ys = np.empty((capacity, dim_y))
        self._buf = np.empty(capacity)

    def __len__(self):
        return self.n

    @property
    def alphas(self) -> np.ndarray:
        view = self._alpha[: self.n]
        view.flags.writeable = False
        return view

    @property
    def xs(self) -> np.ndarray:
        return self._xs[: self.n]

    @property
    def ys(self) -> np.ndarray:
        return self._ys[: self.n]

    def _grow(self):
        cap = 2 * self._alpha.shape[0]
        for name in ("_alpha", "_xs", "_ys"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:])
            new[: self.n] = old[: self.n]
            setattr(self, name, new)
        self._buf = np.empty(cap)

    def append(self, alpha: float, x, y) -> None:
        if self.n == self._alpha.shape[0]:
            self._grow()
        self._alpha[self.n] = alpha
        self._xs[self.n] = x
        self._ys[self.n] = y
        self.n += 1

    def _eval_one(self, centers, kernel, p) -> float:
        n = self.n
        if n == 0:
            return 0.0
        buf = self._buf[:n]
        if centers.shape[1] == 1:
            np.subtract(centers[:n, 0], p[0], out=buf)
            np.square(buf, out=buf)
        else:
            np.square(centers[:n] - p, out=None).sum(axis=1, out=buf)
        np.multiply(buf, -1.0 / kernel.sigma**2, out=buf)
        np.exp(buf, out=buf)
        return float(buf @ self._alpha[:n])

    def _eval_many(self, centers, kernel, pts) -> np.ndarray:
        pts = as_points(pts)
        out = np.zeros(pts.shape[0])
        for start in range(0, self.n, EVAL_CHUNK):
            stop = min(start + EVAL_CHUNK, self.n)
            out += kernel(pts, centers[start:stop]) @ self._alpha[start:stop]
        return out

    def u(self, x) -> float:
        return self._eval_one(self._xs, self.kernel_x, np.atleast_1d(np.asarray(x, float)))

    def v(self, y) -> float:
        return self._eval_one(self._ys, self.kernel_y, np.atleast_1d(np.asarray(y, float)))

    def u_many(self, xs) -> np.ndarray:
        return self._eval_many(self._xs, self.kernel_x, xs)

    def v_many(self, ys) -> np.ndarray:
        return self._eval_many(self._ys, self.kernel_y, ys)

    def to_csv(self, path) -> None:
        dx, dy = self._xs.shape[1], self._ys.shape[1]
        header = ["k", "alpha"] + [f"x{a}" for a in range(dx)] + [f"y{a}" for a in range(dy)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(self.n):
                row = [str(i + 1), repr(float(self._alpha[i]))]
                row += [repr(float(t)) for t in self._xs[i]]
                row += [repr(float(t)) for t in self._ys[i]]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path, kernel_x, kernel_y, eps, step_c, radius_r=1e4) -> KernelExpansion:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            dx = sum(h.startswith("x") for h in header)
            dy = sum(h.startswith("y") for h in header)
            exp = cls(kernel_x, kernel_y, dx, dy, eps, step_c, radius_r)
            for row in reader:
                vals = [float(t) for t in row[1:]]
                exp.append(vals[0], vals[1:1 + dx], vals[1 + dx:])
                exp.k = int(row[0])
        return exp


def eval_u(exp: KernelExpansion, x) -> float:
    return exp.u(x)


def eval_v(exp: KernelExpansion, y) -> float:
    return exp.v(y)


def dual_integrand_f(x, y, u_val, v_val, c_val, eps: float):
    """``u + v - eps * exp((u + v - c) / eps)``; ``x`` and ``y`` enter only through ``c_val``."""
    eps = check_eps(eps, allow_zero=False)
    z = (np.asarray(u_val) + np.asarray(v_val) - np.asarray(c_val)) / eps
    _guard(z)
    return u_val + v_val - eps * np.exp(z)


def _advance(exp: KernelExpansion, x, y, c_val: float) -> None:
    k = exp.k + 1
    z = (exp.u(x) + exp.v(y) - c_val) / exp.eps
    _guard(z)
    factor = min(max(1.0 - np.exp(z), -exp.radius_r), exp.radius_r)
    alpha = exp.step_c / np.sqrt(k) * factor
    exp.k = k
    if not (exp.truncate and abs(alpha) < 1e-12):
        exp.append(alpha, x, y)


def kernel_sgd_step(exp: KernelExpansion, x, y, c: CostFunction) -> KernelExpansion:
    """Append the coefficient for iteration ``k = len + 1``.

    ``alpha_k = (C / sqrt(k)) * clip(1 - exp((u(x_k) + v(y_k) - c(x_k, y_k)) / eps), -r, r)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    _advance(exp, x, y, float(c.pairwise(x[None, :], y[None, :])[0, 0]))
    return exp


def paired_costs(c: CostFunction, xs, ys) -> np.ndarray:
    """``c(xs[i], ys[i])`` for every row ``i``."""
    xs, ys = as_points(xs), as_points(ys)
    sq = np.square(xs - ys).sum(axis=1)
    raw = sq if c.kind == "squared_euclidean" else np.sqrt(sq) ** c.p
    return c.scale * raw


@dataclass(frozen=True, eq=False)
class SemiDiscreteProxy:
    """Source potential induced by a discrete target: ``u(x) = softmin_j(c(x, y_j) - v_j)``."""

    v: np.ndarray
    target: DiscreteMeasure
    cost: CostFunction
    eps: float

    def u_many(self, xs) -> np.ndarray:
        r = self.cost.pairwise(as_points(xs), self.target.atoms) - self.v
        return softmin(r, self.target.weights, self.eps)


def semidiscrete_proxy(mu: ContinuousSampler, nu: ContinuousSampler, c: CostFunction, eps: float,
                       N: int, iters: int, step_c: float, seed: int) -> SemiDiscreteProxy:
    """Reference potential from averaged SGD against ``N`` frozen draws of ``nu``."""
    from .semidiscrete import sgd_solve

    nu_hat = DiscreteMeasure.uniform(nu.draw_many(make_rng(seed, 0), N))
    cfg = SolveConfig(eps=eps, step_c=step_c, max_passes=iters, seed=seed)
    v, _ = sgd_solve(mu, nu_hat, c, eps, cfg, make_rng(seed, 1), checkpoints=[iters], holdout=0)
    return SemiDiscreteProxy(v, nu_hat, c, eps)


def weighted_rel_error(u_vals, ref_vals) -> float:
    """Relative l2 error on points drawn from the source, after removing each mean.

    Potentials are defined up to a constant shared between ``u`` and ``v``, so
    the comparison is made modulo constants.
    """
    a = np.asarray(u_vals) - np.mean(u_vals)
    b = np.asarray(ref_vals) - np.mean(ref_vals)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def kernel_sgd_solve(mu: ContinuousSampler, nu: ContinuousSampler, c: CostFunction,
                     kernels: tuple[Kernel, Kernel], eps: float, cfg: SolveConfig, rng,
                     proxy=None, eval_points=None, checkpoints=(10**3, 10**4, 10**5),
                     radius_r: float = 1e4, holdout: int = 256, k_max: int | None = None,
                     on_checkpoint=None):
    """Kernel SGD on i.i.d. pairs ``(x_k, y_k)`` from ``mu`` x ``nu``.

    Runs ``k_max`` iterations (``cfg.max_passes`` by default; zero is allowed)
    with constant ``C = cfg.step_c``. At each checkpoint, and at the end, the
    trace stores the relative error of ``u_k`` against ``proxy`` on
    ``eval_points`` (``dist_ref_l2``) and a Monte-Carlo estimate of the dual
    objective on ``holdout`` independent pairs (``objective``). ``grad_l1`` has
    no meaning here and is NaN. ``on_checkpoint(k, expansion)`` is called at
    every checkpoint.
    """
    eps = check_eps(eps, allow_zero=False)
    step_c = cfg.step_c if cfg.step_c is not None else eps
    n_iter = cfg.max_passes if k_max is None else int(k_max)
    kx, ky = kernels
    exp = KernelExpansion(kx, ky, mu.dim, nu.dim, eps, step_c, radius_r,
                          capacity=max(16, n_iter + 1))
    hold_rng = make_rng(cfg.seed, 2)
    hx, hy = mu.draw_many(hold_rng, holdout), nu.draw_many(hold_rng, holdout)
    hc = paired_costs(c, hx, hy)
    ref_vals = proxy.u_many(eval_points) if proxy is not None and eval_points is not None else None
    marks = sorted({m for m in checkpoints if m <= n_iter} | {n_iter})
    trace = ConvergenceTrace("kernel_sgd")
    t0 = time.perf_counter()
    paused = 0.0

    def record():
        nonlocal paused
        t = time.perf_counter()
        obj = float(np.mean(dual_integrand_f(None, None, exp.u_many(hx), exp.v_many(hy), hc, eps)))
        dist = None
        if ref_vals is not None:
            dist = weighted_rel_error(exp.u_many(eval_points), ref_vals)
        ms = (t - t0 - paused) * 1e3 if cfg.record_time else 0.0
        trace.add(exp.k, np.nan, dist, obj, ms)
        if on_checkpoint is not None:
            on_checkpoint(exp.k, exp)
        paused += time.perf_counter() - t

    for mark in marks:
        while exp.k < mark:
            n = min(4096, mark - exp.k)
            xs = mu.draw_many(rng, n)
            ys = nu.draw_many(rng, n)
            cs = paired_costs(c, xs, ys)
            for x, y, cv in zip(xs, ys, cs):
                _advance(exp, x, y, float(cv))
        record()
    return exp, trace
