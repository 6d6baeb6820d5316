"""Softmin, Gibbs weights and the regularized semi-dual / dual objectives.

Conventions
-----------
``eps > 0`` selects the entropic branch, ``eps == 0`` the unregularized one.
Atoms whose target weight is zero are dropped from every softmin sum and
never win an argmin. All exponentials go through a max-shifted
log-sum-exp, so ``eps`` as small as 1e-6 with costs of order 1e3 stays finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .costs import CostFunction, cost_entries
from .measures import DiscreteMeasure, as_points


def check_eps(eps: float, allow_zero: bool = True) -> float:
    eps = float(eps)
    if not np.isfinite(eps) or eps < 0:
        raise ValueError(f"eps must be a finite non-negative number, got {eps}")
    if eps == 0 and not allow_zero:
        raise ValueError("eps must be strictly positive here")
    return eps


def _weights(nu) -> np.ndarray:
    if isinstance(nu, DiscreteMeasure):
        return nu.weights
    return np.asarray(nu, dtype=np.float64)


def _log_weights(nu: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(nu)


def _check_pair(r, nu):
    if r.shape[-1] == 0:
        raise ValueError("empty vector")
    if r.shape[-1] != nu.shape[0]:
        raise ValueError(f"length mismatch: {r.shape[-1]} vs {nu.shape[0]}")
    if not np.any(nu > 0):
        raise ValueError("all target weights are zero")


@dataclass(frozen=True, eq=False)
class DualPotentials:
    u: np.ndarray | None
    v: np.ndarray

    def centered(self) -> DualPotentials:
        """Shift ``v`` to zero mean and compensate ``u`` so that ``u + v`` is unchanged."""
        m = self.v.mean()
        u = None if self.u is None else self.u + m
        return DualPotentials(u, self.v - m)


def softmin(r, nu, eps: float):
    """``-eps * log(sum_j nu_j exp(-r_j / eps))``, or ``min_j r_j`` when ``eps == 0``.

    ``r`` may be a vector or a stack of vectors (reduced over the last axis).
    """
    r = np.asarray(r, dtype=np.float64)
    nu = _weights(nu)
    eps = check_eps(eps)
    _check_pair(r, nu)
    if eps == 0:
        return np.min(np.where(nu > 0, r, np.inf), axis=-1)
    return -eps * logsumexp(_log_weights(nu) - r / eps, axis=-1)


def chi_weights(r, nu, eps: float) -> np.ndarray:
    """Gibbs weights ``nu_j exp(-r_j/eps)`` normalized to one (gradient of softmin in ``r``).

    For ``eps == 0`` this is the indicator of the first minimizer of ``r``
    among atoms with positive weight.
    """
    r = np.asarray(r, dtype=np.float64)
    nu = _weights(nu)
    eps = check_eps(eps)
    _check_pair(r, nu)
    if eps == 0:
        masked = np.where(nu > 0, r, np.inf)
        out = np.zeros_like(masked)
        idx = np.argmin(masked, axis=-1)
        np.put_along_axis(out, np.expand_dims(idx, -1), 1.0, axis=-1)
        return out
    return softmax(_log_weights(nu) - r / eps, axis=-1)


def _costs_to_atoms(x, nu_measure: DiscreteMeasure, c: CostFunction) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[0] != nu_measure.dim:
        raise ValueError(f"point has dimension {x.shape[0]}, atoms {nu_measure.dim}")
    return c.pairwise(x[None, :], nu_measure.atoms)[0]


def barh(x, v, nu_measure: DiscreteMeasure, c: CostFunction, eps: float) -> float:
    """Semi-dual integrand at one source point ``x``."""
    v = np.asarray(v, dtype=np.float64)
    r = _costs_to_atoms(x, nu_measure, c) - v
    eps = check_eps(eps)
    val = v @ nu_measure.weights + softmin(r, nu_measure, eps)
    return float(val - eps)


def grad_barh(x, v, nu_measure: DiscreteMeasure, c: CostFunction, eps: float) -> np.ndarray:
    """``nu - chi``: gradient (a subgradient when ``eps == 0``) of :func:`barh` in ``v``."""
    v = np.asarray(v, dtype=np.float64)
    r = _costs_to_atoms(x, nu_measure, c) - v
    return nu_measure.weights - chi_weights(r, nu_measure, eps)


def _setup(v, mu, nu, C):
    v = np.asarray(v, dtype=np.float64)
    C = cost_entries(C)
    mu_w, nu_w = _weights(mu), _weights(nu)
    if C.shape != (mu_w.shape[0], nu_w.shape[0]) or v.shape != (nu_w.shape[0],):
        raise ValueError(
            f"inconsistent shapes: C {C.shape}, mu {mu_w.shape}, nu {nu_w.shape}, v {v.shape}"
        )
    return v, mu_w, nu_w, C


def semidual_objective(v, mu, nu, C, eps: float) -> float:
    """``sum_i mu_i hbar(x_i, v)`` over the rows of the cost matrix."""
    v, mu_w, nu_w, C = _setup(v, mu, nu, C)
    eps = check_eps(eps)
    rows = softmin(C - v, nu_w, eps)
    return float(v @ nu_w + mu_w @ rows - eps)


def semidual_grad(v, mu, nu, C, eps: float) -> np.ndarray:
    """Full gradient ``nu - sum_i mu_i chi_i`` of :func:`semidual_objective`."""
    v, mu_w, nu_w, C = _setup(v, mu, nu, C)
    return nu_w - mu_w @ chi_weights(C - v, nu_w, eps)


def smoothed_ctransform(v, nu, C, eps: float) -> np.ndarray:
    """``u_i = softmin_j(C_ij - v_j)``; the exact c-transform when ``eps == 0``."""
    v = np.asarray(v, dtype=np.float64)
    C = cost_entries(C)
    return softmin(C - v, _weights(nu), eps)


def _log_plan(u, v, mu_w, nu_w, C, eps):
    with np.errstate(divide="ignore"):
        return (u[:, None] + v[None, :] - C) / eps + np.log(mu_w)[:, None] + np.log(nu_w)[None, :]


def dual_objective(u, v, mu, nu, C, eps: float) -> float:
    """``<u, mu> + <v, nu> - eps * sum_ij exp((u_i + v_j - C_ij)/eps) mu_i nu_j``."""
    v, mu_w, nu_w, C = _setup(v, mu, nu, C)
    u = np.asarray(u, dtype=np.float64)
    eps = check_eps(eps, allow_zero=False)
    z = _log_plan(u, v, mu_w, nu_w, C, eps)
    mass = np.exp(logsumexp(z, axis=1)).sum()
    return float(u @ mu_w + v @ nu_w - eps * mass)


def recover_plan(u, v, mu, nu, C, eps: float) -> np.ndarray:
    """Primal plan ``exp((u_i + v_j - C_ij)/eps) mu_i nu_j``."""
    v, mu_w, nu_w, C = _setup(v, mu, nu, C)
    u = np.asarray(u, dtype=np.float64)
    eps = check_eps(eps, allow_zero=False)
    return np.exp(_log_plan(u, v, mu_w, nu_w, C, eps))


def marginal_violation(plan, mu, nu) -> float:
    plan = np.asarray(plan, dtype=np.float64)
    mu_w, nu_w = _weights(mu), _weights(nu)
    return float(np.abs(plan.sum(axis=1) - mu_w).sum() + np.abs(plan.sum(axis=0) - nu_w).sum())


def kl_divergence(plan, mu, nu) -> float:
    """``sum_ij (log(pi_ij / (mu_i nu_j)) - 1) pi_ij`` with ``0 log 0 = 0``."""
    plan = np.asarray(plan, dtype=np.float64)
    ref = np.outer(_weights(mu), _weights(nu))
    if np.any((plan > 0) & (ref == 0)):
        return float("inf")
    pos = plan > 0
    ratio = np.log(plan[pos] / ref[pos])
    return float(((ratio - 1.0) * plan[pos]).sum())


def primal_value(plan, mu, nu, C, eps: float) -> float:
    """Transport cost plus ``eps`` times the KL term."""
    C = cost_entries(C)
    val = float((C * plan).sum())
    if eps > 0:
        val += eps * kl_divergence(plan, mu, nu)
    return val


def semidual_at_points(xs, v, nu_measure: DiscreteMeasure, c: CostFunction, eps: float) -> np.ndarray:
    """:func:`barh` evaluated at every row of ``xs`` (vectorized)."""
    xs = as_points(xs)
    v = np.asarray(v, dtype=np.float64)
    eps = check_eps(eps)
    r = c.pairwise(xs, nu_measure.atoms) - v
    return v @ nu_measure.weights + softmin(r, nu_measure, eps) - eps
