"""Discrete-discrete solvers: log-domain Sinkhorn and SAG on the semi-dual."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .costs import cost_entries
from .measures import DiscreteMeasure, make_rng
from .semidual import DualPotentials, check_eps
from .trace import ConvergenceTrace


@dataclass(frozen=True)
class SolveConfig:
    """Solver settings shared by Sinkhorn, SAG and averaged SGD.

    ``step_c=None`` lets each solver pick its default (``1/L`` for SAG).
    When ``minibatch`` does not divide the number of rows, the last block is
    smaller. ``step_mode="over_sqrt_k"`` divides the step by the square root
    of the pass (or iteration) index. For averaged SGD ``max_passes`` counts
    single iterations.
    """

    eps: float = 0.01
    step_c: float | None = None
    step_mode: str = "constant"
    max_passes: int = 1000
    minibatch: int = 1
    tol_grad_l1: float = 0.0
    seed: int = 0
    checkpoint_every: int = 1
    record_time: bool = False

    def __post_init__(self):
        check_eps(self.eps)
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if self.step_mode not in ("constant", "over_sqrt_k"):
            raise ValueError(f"unknown step_mode {self.step_mode!r}")
        if self.step_c is not None and not self.step_c > 0:
            raise ValueError("step_c must be positive")


def lipschitz_bound(mu, eps: float) -> float:
    """``max_i mu_i / eps``, a smoothness bound for each weighted semi-dual summand."""
    eps = check_eps(eps, allow_zero=False)
    w = mu.weights if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=np.float64)
    return float(w.max() / eps)


class _Problem:
    """Cost matrix plus log-weights laid out for the compiled kernels."""

    def __init__(self, mu: DiscreteMeasure, nu: DiscreteMeasure, C, eps: float):
        self.C = np.ascontiguousarray(cost_entries(C), dtype=np.float64)
        if self.C.shape != (mu.size, nu.size):
            raise ValueError(f"cost matrix {self.C.shape} does not match ({mu.size}, {nu.size})")
        self.mu = np.ascontiguousarray(mu.weights)
        self.nu = np.ascontiguousarray(nu.weights)
        with np.errstate(divide="ignore"):
            self.logmu = np.log(self.mu)
            self.lognu = np.log(self.nu)
        self.eps = eps
        self.all_rows = np.arange(self.C.shape[0])
        self._CT = None

    @property
    def CT(self):
        if self._CT is None:
            self._CT = np.ascontiguousarray(self.C.T)
        return self._CT

    def grad_and_objective(self, v):
        g = np.empty_like(self.nu)
        total = _kernels.rows_grad(self.C, self.all_rows, v, self.mu, self.nu, self.lognu, self.eps, g)
        return g, float(v @ self.nu + total - self.eps)

    def ctransform(self, v):
        u = np.empty_like(self.mu)
        _kernels.row_softmin(self.C, v, self.lognu, self.eps, u)
        return u


def grad_l1_full(v, mu, nu, C, eps: float) -> float:
    """``||sum_i mu_i grad hbar(x_i, v)||_1``, the column marginal violation."""
    eps = check_eps(eps, allow_zero=False)
    prob = _Problem(mu, nu, C, eps)
    g, _ = prob.grad_and_objective(np.ascontiguousarray(v, dtype=np.float64))
    return float(np.abs(g).sum())


class _Recorder:
    def __init__(self, label, cfg, ref, hook=None):
        self.trace = ConvergenceTrace(label)
        self.hook = hook
        self.ref = None if ref is None else np.asarray(ref, dtype=np.float64) - np.mean(ref)
        self.timed = cfg.record_time
        self.t0 = time.perf_counter()
        self.paused = 0.0

    def record(self, passes, v, prob):
        t = time.perf_counter()
        g, obj = prob.grad_and_objective(v)
        gl1 = float(np.abs(g).sum())
        dist = None if self.ref is None else float(np.linalg.norm(v - v.mean() - self.ref))
        ms = (t - self.t0 - self.paused) * 1e3 if self.timed else 0.0
        self.trace.add(passes, gl1, dist, obj, ms)
        if self.hook is not None:
            self.hook(passes, v - v.mean())
        self.paused += time.perf_counter() - t
        return gl1


def _finish(v, prob):
    v = v - v.mean()
    return DualPotentials(prob.ctransform(v), v)


def sinkhorn(mu: DiscreteMeasure, nu: DiscreteMeasure, C, cfg: SolveConfig, ref=None,
             on_checkpoint=None):
    """Alternating exact block maximization of the dual, in the log domain.

    One pass is one ``(u, v)`` sweep. The gradient norm is checked at every
    checkpoint and the run stops once it reaches ``cfg.tol_grad_l1``.
    Returns centered potentials (``u`` is the smoothed c-transform of ``v``)
    and the trace. ``ref`` (a target ``v``) fills the ``dist_ref_l2`` column;
    ``on_checkpoint(pass, centered_v)`` is called at every checkpoint.
    """
    eps = check_eps(cfg.eps, allow_zero=False)
    prob = _Problem(mu, nu, C, eps)
    u = np.zeros_like(prob.mu)
    v = np.zeros_like(prob.nu)
    rec = _Recorder("sinkhorn", cfg, ref, on_checkpoint)
    gl1 = rec.record(0, v, prob)
    for p in range(1, cfg.max_passes + 1):
        if gl1 <= cfg.tol_grad_l1:
            break
        _kernels.row_softmin(prob.C, v, prob.lognu, eps, u)
        _kernels.row_softmin(prob.CT, u, prob.logmu, eps, v)
        if p % cfg.checkpoint_every == 0 or p == cfg.max_passes:
            gl1 = rec.record(p, v, prob)
    return _finish(v, prob), rec.trace


def make_blocks(n: int, size: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Shuffle ``range(n)`` and cut it into contiguous blocks; returns (indices, offsets)."""
    perm = rng.permutation(n)
    ptr = np.append(np.arange(0, n, size), n)
    return perm.astype(np.int64), ptr.astype(np.int64)


def sag_solve(mu: DiscreteMeasure, nu: DiscreteMeasure, C, cfg: SolveConfig, ref=None,
              on_checkpoint=None):
    """Stochastic average gradient ascent on the discrete semi-dual.

    Rows are shuffled once and cut into ``ceil(I/b)`` blocks. Each step
    draws a block uniformly, refreshes its stored gradient and moves ``v``
    along the running sum ``d`` of stored gradients. The step is
    ``step_c * d / n_blocks``, which with ``b = 1`` is classic SAG with step
    ``step_c / I`` on the mean of the per-row gradients. ``n_blocks`` steps
    make one pass. ``step_c`` defaults to ``1/L`` from :func:`lipschitz_bound`.
    ``ref`` and ``on_checkpoint`` behave as in :func:`sinkhorn`.
    """
    eps = check_eps(cfg.eps, allow_zero=False)
    prob = _Problem(mu, nu, C, eps)
    I, J = prob.C.shape
    if cfg.minibatch > I:
        raise ValueError(f"minibatch {cfg.minibatch} exceeds the number of rows {I}")
    step_c = cfg.step_c if cfg.step_c is not None else 1.0 / lipschitz_bound(mu, eps)
    rng = make_rng(cfg.seed)
    blocks, ptr = make_blocks(I, cfg.minibatch, rng)
    nb = ptr.shape[0] - 1
    step = step_c / nb
    G = np.zeros((nb, J))
    d = np.zeros(J)
    v = np.zeros(J)
    rec = _Recorder(f"sag_C{step_c:g}", cfg, ref, on_checkpoint)
    gl1 = rec.record(0, v, prob)
    for p in range(1, cfg.max_passes + 1):
        if gl1 <= cfg.tol_grad_l1:
            break
        seq = rng.integers(0, nb, size=nb)
        if cfg.step_mode == "over_sqrt_k":
            _kernels.sag_steps(prob.C, blocks, ptr, seq, prob.mu, prob.nu, prob.lognu,
                               eps, step / np.sqrt(p), v, G, d)
        else:
            _kernels.sag_steps(prob.C, blocks, ptr, seq, prob.mu, prob.nu, prob.lognu,
                               eps, step, v, G, d)
        if p % cfg.checkpoint_every == 0 or p == cfg.max_passes:
            gl1 = rec.record(p, v, prob)
    return _finish(v, prob), rec.trace


def full_gradient_ascent(mu, nu, C, eps: float, step: float, n_steps: int) -> np.ndarray:
    """Plain gradient ascent ``v <- v + step * grad``; a check for the single-block SAG."""
    prob = _Problem(mu, nu, C, check_eps(eps, allow_zero=False))
    v = np.zeros_like(prob.nu)
    for _ in range(n_steps):
        g, _ = prob.grad_and_objective(v)
        v = v + step * g
    return v
