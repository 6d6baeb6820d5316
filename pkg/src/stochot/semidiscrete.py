"""Averaged SGD on the semi-dual when the source measure can only be sampled."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .costs import CostFunction, build_cost_matrix
from .discrete import SolveConfig, sag_solve
from .measures import ContinuousSampler, DiscreteMeasure, empirical_from, make_rng
from .semidual import check_eps, chi_weights, grad_barh, semidual_at_points
from .trace import ConvergenceTrace

CHUNK = 65536
REFERENCE_ITERS = 10**7


@dataclass(frozen=True, eq=False)
class SgdState:
    """Inner iterate, its running average and the number of steps taken."""

    v_inner: np.ndarray
    v_avg: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, J: int) -> SgdState:
        return cls(np.zeros(J), np.zeros(J), 0)


def sgd_step(state: SgdState, x, nu: DiscreteMeasure, c: CostFunction, eps: float,
             step_c: float) -> SgdState:
    """One ascent step of length ``step_c / sqrt(k)`` followed by the running-mean update."""
    k = state.k + 1
    g = grad_barh(x, state.v_inner, nu, c, eps)
    inner = state.v_inner + (step_c / np.sqrt(k)) * g
    avg = inner / k + ((k - 1.0) / k) * state.v_avg
    return SgdState(inner, avg, k)


def default_step(eps: float) -> float:
    """``C = eps``: the discrete ``1/L`` rule with every source weight replaced by one."""
    return eps if eps > 0 else 1.0


def geometric_checkpoints(k_max: int, per_decade=(1, 2, 5)) -> list[int]:
    out = []
    scale = 1
    while scale <= k_max:
        out.extend(m * scale for m in per_decade if m * scale <= k_max)
        scale *= 10
    if not out or out[-1] != k_max:
        out.append(k_max)
    return out


def _cost_args(c: CostFunction):
    kind = _kernels.SQUARED if c.kind == "squared_euclidean" else _kernels.POWER
    return kind, float(c.p), float(c.scale)


def _rel_dist(v, ref):
    a = v - v.mean()
    b = ref - ref.mean()
    norm = np.linalg.norm(b)
    # a constant reference (e.g. one target atom) leaves only the absolute error
    return float(np.linalg.norm(a - b) / norm) if norm > 0 else float(np.linalg.norm(a - b))


def sgd_solve(mu: ContinuousSampler, nu: DiscreteMeasure, c: CostFunction, eps: float,
              cfg: SolveConfig, rng, ref=None, checkpoints=None, holdout: int = 4096):
    """Averaged SGD for ``cfg.max_passes`` iterations on fresh draws from ``mu``.

    The trace is recorded at ``checkpoints`` (geometric by default). With a
    reference vector its ``dist_ref_l2`` column holds the relative error
    ``||v - ref|| / ||ref||`` after centering both; its ``objective`` column
    is a Monte-Carlo estimate on a held-out batch drawn once from an
    independent stream. ``grad_l1`` is the held-out estimate of the full
    gradient norm. Returns the averaged iterate and the trace.
    """
    eps = check_eps(eps)
    k_max = cfg.max_passes
    step_c = cfg.step_c if cfg.step_c is not None else default_step(eps)
    J = nu.size
    vt = np.zeros(J)
    va = np.zeros(J)
    nu_w = np.ascontiguousarray(nu.weights)
    with np.errstate(divide="ignore"):
        logw = np.log(nu_w)
    atoms = np.ascontiguousarray(nu.atoms)
    kind, p, scale = _cost_args(c)
    held = mu.draw_many(make_rng(cfg.seed, 1), holdout) if holdout else None
    marks = sorted(set(checkpoints if checkpoints is not None else geometric_checkpoints(k_max)))
    trace = ConvergenceTrace(f"sgd_eps{eps:g}")
    t0 = time.perf_counter()
    k = 0
    for mark in marks:
        while k < mark:
            n = min(CHUNK, mark - k)
            X = np.ascontiguousarray(mu.draw_many(rng, n))
            k = _kernels.sgd_chunk(X, atoms, nu_w, logw, eps, step_c, kind, p, scale, vt, va, k)
        ms = (time.perf_counter() - t0) * 1e3 if cfg.record_time else 0.0
        gl1, obj = _holdout_stats(held, va, nu, c, eps) if held is not None else (np.nan, np.nan)
        dist = None if ref is None else _rel_dist(va, ref)
        trace.add(k, gl1, dist, obj, ms)
    return va.copy(), trace


def _holdout_stats(xs, v, nu, c, eps):
    obj = float(np.mean(semidual_at_points(xs, v, nu, c, eps)))
    r = c.pairwise(xs, nu.atoms) - v
    g = nu.weights - chi_weights(r, nu.weights, eps).mean(axis=0)
    return float(np.abs(g).sum()), obj


def frozen_reference(mu: ContinuousSampler, nu: DiscreteMeasure, c: CostFunction, eps: float,
                     step_c: float | None = None, iters: int = REFERENCE_ITERS, seed: int = 0):
    """Long averaged-SGD run used as the ground truth ``v*`` for semi-discrete traces."""
    cfg = SolveConfig(eps=eps, step_c=step_c, max_passes=iters, seed=seed)
    v, _ = sgd_solve(mu, nu, c, eps, cfg, make_rng(seed), checkpoints=[iters], holdout=0)
    return v - v.mean()


def sag_on_samples(mu: ContinuousSampler, nu: DiscreteMeasure, c: CostFunction, eps: float,
                   N: int, cfg: SolveConfig, rng, ref=None):
    """Discretize ``mu`` with ``N`` draws and solve the discrete problem with SAG.

    With a reference, ``dist_ref_l2`` holds the relative error to it, as in
    :func:`sgd_solve`, so the discretization bias shows up as a floor.
    """
    eps = check_eps(eps, allow_zero=False)
    mu_hat = empirical_from(mu, N, rng)
    C = build_cost_matrix(c, mu_hat.atoms, nu.atoms)
    run_cfg = replace(cfg, minibatch=min(cfg.minibatch, N))
    pot, trace = sag_solve(mu_hat, nu, C, run_cfg, ref=ref)
    if ref is not None:
        norm = float(np.linalg.norm(np.asarray(ref) - np.mean(ref))) or 1.0
        rel = ConvergenceTrace(f"sag_N{N}")
        for cp in trace.checkpoints:
            rel.add(cp.pass_count, cp.grad_l1, cp.dist_ref_l2 / norm, cp.objective, cp.wallclock_ms)
        trace = rel
    return pot.v, trace
