"""Independent ground truths for tests and benchmarks.

Exact unregularized OT on tiny or one-dimensional instances, a Sinkhorn
solve to (near) machine precision, an unregularized semi-dual solve by
subgradient ascent, and a finite-difference gradient checker.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .costs import cost_entries
from .discrete import SolveConfig, _Problem, sinkhorn
from .measures import DiscreteMeasure
from .semidual import check_eps, chi_weights, semidual_objective

MAX_SWEEPS = 10**6


class ConvergenceError(RuntimeError):
    """A reference solve did not reach its tolerance within the sweep cap."""


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    v_star: np.ndarray
    objective: float
    eps: float
    tol: float


def exact_ot_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> float:
    """Unregularized OT cost ``sum |x - y|^p pi`` under the monotone (sorted) coupling."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("exact_ot_1d needs one-dimensional atoms")
    if p < 1:
        raise ValueError("p must be >= 1")
    xi = np.argsort(mu.atoms[:, 0], kind="stable")
    yi = np.argsort(nu.atoms[:, 0], kind="stable")
    xs, a = mu.atoms[xi, 0], mu.weights[xi].copy()
    ys, b = nu.atoms[yi, 0], nu.weights[yi].copy()
    i = j = 0
    total = 0.0
    while i < len(a) and j < len(b):
        m = min(a[i], b[j])
        total += m * abs(xs[i] - ys[j]) ** p
        a[i] -= m
        b[j] -= m
        if a[i] == 0:
            i += 1
        if b[j] == 0:
            j += 1
    return float(total)


def brute_force_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, C) -> float:
    """Minimum of ``mean_i C[i, s(i)]`` over all permutations ``s`` (uniform, square, I <= 7)."""
    C = cost_entries(C)
    n = mu.size
    if nu.size != n:
        raise ValueError("brute force needs as many source as target atoms")
    if n > 7:
        raise ValueError("brute force is limited to 7 atoms")
    for w in (mu.weights, nu.weights):
        if not np.allclose(w, 1.0 / n, rtol=0, atol=1e-12):
            raise ValueError("brute force needs uniform weights")
    rows = np.arange(n)
    best = min(C[rows, list(perm)].sum() for perm in itertools.permutations(range(n)))
    return float(best / n)


def lp_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, C) -> tuple[float, np.ndarray]:
    """Unregularized OT value and an optimal ``v`` from the dual linear program (HiGHS)."""
    C = cost_entries(C)
    I, J = C.shape
    # maximize <u, mu> + <v, nu> subject to u_i + v_j <= C_ij
    A = np.zeros((I * J, I + J))
    A[np.arange(I * J), np.repeat(np.arange(I), J)] = 1.0
    A[np.arange(I * J), I + np.tile(np.arange(J), I)] = 1.0
    res = linprog(-np.concatenate([mu.weights, nu.weights]), A_ub=A, b_ub=C.ravel(),
                  bounds=[(None, None)] * (I + J), method="highs")
    if not res.success:
        raise ConvergenceError(f"linear program failed: {res.message}")
    v = res.x[I:]
    return float(-res.fun), v - v.mean()


def _newton_polish(mu, nu, C, eps, v, tol, max_iter=200):
    """Damped Newton ascent on the semi-dual, restricted to zero-sum directions."""
    C = cost_entries(C)
    J = v.size
    ones = np.full((J, J), 1.0 / J)
    f = semidual_objective(v, mu, nu, C, eps)
    for _ in range(max_iter):
        chi = chi_weights(C - v, nu.weights, eps)
        g = nu.weights - mu.weights @ chi
        if np.abs(g).sum() <= tol:
            break
        H = (np.diag(mu.weights @ chi) - (chi * mu.weights[:, None]).T @ chi) / eps
        step = np.linalg.lstsq(H + ones, g, rcond=None)[0]
        step -= step.mean()
        t = 1.0
        while t > 1e-12:
            cand = v + t * step
            fc = semidual_objective(cand, mu, nu, C, eps)
            if fc >= f - 1e-15 * abs(f):
                break
            t *= 0.5
        if t <= 1e-12:
            break
        v, f = cand - cand.mean(), fc
    return v


def reference_solve(mu: DiscreteMeasure, nu: DiscreteMeasure, C, eps: float, tol: float = 1e-12,
                    max_sweeps: int = MAX_SWEEPS, warm_sweeps: int = 2000) -> ReferenceSolution:
    """High-accuracy regularized solve: Sinkhorn, then Newton polishing; centered ``v``.

    Sinkhorn runs until the gradient l1 norm is at most ``tol`` or
    ``warm_sweeps`` sweeps have passed. If the tolerance is not met by then,
    damped Newton steps on the semi-dual finish the job (Sinkhorn's rate
    collapses when the unregularized dual is degenerate). Fails with
    :class:`ConvergenceError` if neither reaches ``tol``; the sweep count is
    capped at ``max_sweeps``.
    """
    eps = check_eps(eps, allow_zero=False)
    cfg = SolveConfig(eps=eps, max_passes=min(warm_sweeps, max_sweeps), tol_grad_l1=tol)
    pot, trace = sinkhorn(mu, nu, C, cfg)
    v = pot.v
    achieved = trace.last.grad_l1
    if achieved > tol:
        v = _newton_polish(mu, nu, C, eps, v, tol)
        achieved = float(np.abs(full_grad(v, mu, nu, C, eps)).sum())
    if achieved > tol:
        raise ConvergenceError(f"reference solve stalled at grad l1 {achieved:.3e} > {tol:.1e}")
    return ReferenceSolution(v, semidual_objective(v, mu, nu, C, eps), eps, achieved)


def subgradient_ascent_eps0(mu: DiscreteMeasure, nu: DiscreteMeasure, C, v0, step_c: float,
                            iters: int) -> np.ndarray:
    """Averaged subgradient ascent on the unregularized semi-dual, started at ``v0``.

    Step ``step_c / sqrt(k)``; argmin ties go to the lowest index.
    """
    C = cost_entries(C)
    vt = np.array(v0, dtype=np.float64)
    va = vt.copy()
    for k in range(1, iters + 1):
        g = nu.weights - mu.weights @ chi_weights(C - vt, nu.weights, 0.0)
        vt = vt + (step_c / np.sqrt(k)) * g
        va = vt / k + ((k - 1.0) / k) * va
    return va - va.mean()


def sandwich_gap(v, mu, nu, C, eps: float) -> tuple[float, float]:
    """``|H_eps(v) - H_0(v)|`` and its bound ``eps (1 - log min_j nu_j)``."""
    gap = abs(semidual_objective(v, mu, nu, C, eps) - semidual_objective(v, mu, nu, C, 0.0))
    nu_w = nu.weights[nu.weights > 0]
    return gap, eps * (1.0 - np.log(nu_w.min()))


@dataclass(frozen=True, eq=False)
class EpsReport:
    eps_grid: np.ndarray
    v_eps: np.ndarray
    v_zero: np.ndarray
    distances: np.ndarray
    sup_norms: np.ndarray
    objectives: np.ndarray
    objective_zero: float

    @property
    def bound(self) -> float:
        return float(self.sup_norms.max())


def eps_convergence_check(mu: DiscreteMeasure, nu: DiscreteMeasure, C, eps_grid,
                          polish_iters: int = 20000, tol: float = 1e-10,
                          anchor_eps: float | None = None) -> EpsReport:
    """Regularized solutions along a decreasing ``eps_grid`` and their distance to an unregularized one.

    The unregularized ``v`` comes from averaged subgradient ascent started at
    the solution for ``anchor_eps`` (default: a tenth of the smallest grid
    value), with step constant ``anchor_eps``. Anchoring below the grid keeps
    the last distance meaningful when the unregularized dual is degenerate
    and the smallest-``eps`` solution is already one of its optima.
    """
    grid = np.asarray(eps_grid, dtype=np.float64)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
        raise ValueError("eps_grid must be strictly decreasing and positive")
    anchor = float(grid[-1]) / 10 if anchor_eps is None else check_eps(anchor_eps, allow_zero=False)
    sols = [reference_solve(mu, nu, C, e, tol=tol) for e in grid]
    V = np.array([s.v_star for s in sols])
    start = reference_solve(mu, nu, C, anchor, tol=tol).v_star
    v0 = subgradient_ascent_eps0(mu, nu, C, start, step_c=anchor, iters=polish_iters)
    if nu.size == 1:
        v0 = np.zeros(1)
    return EpsReport(
        eps_grid=grid,
        v_eps=V,
        v_zero=v0,
        distances=np.linalg.norm(V - v0, axis=1),
        sup_norms=np.abs(V).max(axis=1),
        objectives=np.array([s.objective for s in sols]),
        objective_zero=semidual_objective(v0, mu, nu, C, 0.0),
    )


def finite_diff_grad(objective, v, h: float = 1e-6) -> np.ndarray:
    """Central differences ``(f(v + h e_j) - f(v - h e_j)) / 2h`` per coordinate."""
    v = np.asarray(v, dtype=np.float64)
    g = np.empty_like(v)
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h
        g[j] = (objective(v + e) - objective(v - e)) / (2 * h)
    return g


def full_grad(v, mu, nu, C, eps: float) -> np.ndarray:
    """Analytic semi-dual gradient through the compiled kernel (used by the acceptance suite)."""
    prob = _Problem(mu, nu, C, check_eps(eps, allow_zero=False))
    g, _ = prob.grad_and_objective(np.ascontiguousarray(v, dtype=np.float64))
    return g
