"""The four benchmark experiments behind ``otbench``.

Each ``run_*`` function takes a :class:`BenchConfig`, writes its CSV traces,
``summary.csv`` and SVG plots into ``cfg.out_dir`` and returns the same
numbers as a :class:`BenchResult` for programmatic use.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..continuous import (
    Kernel,
    kernel_sgd_solve,
    median_bandwidth,
    semidiscrete_proxy,
)
from ..costs import build_cost_matrix, load_embeddings, median_rescale, squared_euclidean
from ..discrete import SolveConfig, lipschitz_bound, sag_solve, sinkhorn
from ..measures import (
    DiscreteMeasure,
    GaussianMixture,
    load_points,
    make_rng,
    random_gaussian_mixture,
)
from ..oracle import brute_force_ot, eps_convergence_check, lp_ot
from ..semidiscrete import frozen_reference, sag_on_samples, sgd_solve
from ..semidual import semidual_objective
from ..trace import ConvergenceTrace
from .config import BenchConfig
from .svg import Axes, Series, emit_svg

HIGH_MASS_SIGMAS = 1.0
GRID_SIGMAS = 2.5
GRID_POINTS = 51


@dataclass
class BenchResult:
    """Traces keyed by file stem, summary rows, and extra arrays worth keeping."""

    out_dir: Path
    traces: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


def _out(cfg: BenchConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt_param(x) -> str:
    return f"{x:g}" if isinstance(x, float) else str(x)


def _write_trace(res: BenchResult, method: str, params: str, seed: int, trace: ConvergenceTrace):
    stem = f"trace_{method}_{params}_{seed}"
    trace.to_csv(res.out_dir / f"{stem}.csv")
    res.traces[stem] = trace


def _write_summary(res: BenchResult, columns: list[str]):
    with open(res.out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in res.summary:
            w.writerow(["" if row.get(c) is None else _cell(row.get(c)) for c in columns])


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _plot(path, series, axes):
    """Emit a plot, dropping log scales when they would leave nothing to draw."""
    try:
        emit_svg(path, series, axes)
    except ValueError:
        emit_svg(path, series, replace(axes, xlog=False, ylog=False))


def _median_curve(traces: list[ConvergenceTrace], column: str = "dist_ref_l2"):
    """Checkpoint-wise median over runs that share their checkpoint grid."""
    xs = traces[0].column("pass")
    ys = np.median(np.array([t.column(column) for t in traces], dtype=float), axis=0)
    return xs, [float(y) for y in ys]


# discrete: Sinkhorn against SAG on a fixed finite problem

def discrete_instance(cfg: BenchConfig):
    """Source, target and median-rescaled squared Euclidean cost matrix.

    Synthetic clouds are uniform on the unit cube by default. Gaussian clouds
    are available but their outlying atoms leave the semi-dual nearly flat
    in a few coordinates, so no solver pins those potentials down quickly.
    """
    rng = make_rng(cfg.seed)
    I, J = cfg.sizes.get("I", 1000), cfg.sizes.get("J", 1000)
    if cfg.embeddings is not None:
        table = load_embeddings(cfg.embeddings, cfg.skip_top, I + J, rng)
        order = rng.permutation(I + J)
        X, Y = table.vectors[order[:I]], table.vectors[order[I:]]
    elif cfg.points_x is not None or cfg.points_y is not None:
        if cfg.points_x is None or cfg.points_y is None:
            raise ValueError("points_x and points_y must be given together")
        X, Y = load_points(cfg.points_x), load_points(cfg.points_y)
    elif cfg.cloud == "gaussian":
        X = rng.standard_normal((I, cfg.dim))
        Y = rng.standard_normal((J, cfg.dim)) + 0.5
    else:
        X = rng.random((I, cfg.dim))
        Y = rng.random((J, cfg.dim))
    mu, nu = DiscreteMeasure.uniform(X), DiscreteMeasure.uniform(Y)
    pool = np.vstack([X, Y])
    c = median_rescale(squared_euclidean(), pool, cfg.median_pairs, rng)
    c = c.with_scale(c.scale * cfg.cost_median)
    return mu, nu, build_cost_matrix(c, X, Y)


def run_discrete_bench(cfg: BenchConfig) -> BenchResult:
    """Sinkhorn and SAG at each step multiple of ``1/L`` on one discrete instance.

    The distance column of every trace is measured against the best final
    centered ``v`` over all runs (lowest gradient norm).
    """
    res = BenchResult(_out(cfg))
    mu, nu, C = discrete_instance(cfg)
    L = lipschitz_bound(mu, cfg.eps)
    base = SolveConfig(eps=cfg.eps, max_passes=cfg.passes, minibatch=min(cfg.minibatch, mu.size),
                       seed=cfg.seed, checkpoint_every=cfg.checkpoint_every,
                       record_time=cfg.record_time)
    runs = {}

    def collect(name):
        snaps = []
        runs[name] = snaps
        return lambda p, v: snaps.append(v.copy())

    potentials = {}
    potentials["sinkhorn"], sk_trace = sinkhorn(mu, nu, C, base, on_checkpoint=collect("sinkhorn"))
    raw = {"sinkhorn": sk_trace}
    for m in cfg.stepsize_multiples:
        name = f"sag_{_fmt_param(float(m))}L"
        potentials[name], raw[name] = sag_solve(mu, nu, C, replace(base, step_c=m / L),
                                                on_checkpoint=collect(name))

    best = min(raw, key=lambda n: raw[n].last.grad_l1)
    v_best = runs[best][-1]
    for name, trace in raw.items():
        full = ConvergenceTrace(name)
        for cp, v in zip(trace.checkpoints, runs[name]):
            full.add(cp.pass_count, cp.grad_l1, float(np.linalg.norm(v - v_best)),
                     cp.objective, cp.wallclock_ms)
        raw[name] = full
        method, _, params = name.partition("_")
        _write_trace(res, method, params or f"eps{_fmt_param(cfg.eps)}", cfg.seed, full)

    sk_passes = raw["sinkhorn"].first_below(cfg.tol)
    for name, trace in raw.items():
        hit = trace.first_below(cfg.tol)
        speedup = None
        if hit is not None and sk_passes is not None and hit > 0:
            speedup = sk_passes / hit
        res.summary.append({
            "method": name,
            "step_multiple": None if name == "sinkhorn" else float(name[4:-1]),
            "passes_to_tol": hit,
            "final_pass": trace.last.pass_count,
            "final_grad_l1": trace.last.grad_l1,
            "final_dist_best": trace.last.dist_ref_l2,
            "final_objective": trace.last.objective,
            "speedup_vs_sinkhorn": speedup,
        })
    _write_summary(res, ["method", "step_multiple", "passes_to_tol", "final_pass",
                         "final_grad_l1", "final_dist_best", "final_objective",
                         "speedup_vs_sinkhorn"])

    for column, fname, ylabel in (("grad_l1", "plot_discrete_grad.svg", "gradient l1 norm"),
                                  ("dist_ref_l2", "plot_discrete_dist.svg", "l2 distance to best v")):
        series = [Series(n, tuple(t.column("pass")), tuple(t.column(column)), dashed=n == "sinkhorn")
                  for n, t in raw.items()]
        _plot(res.out_dir / fname, series, Axes("passes", ylabel, f"eps = {cfg.eps:g}"))
    res.extras.update(potentials=potentials, best=best, v_best=v_best, L=L, tol=cfg.tol)
    return res


# semi-discrete: averaged SGD on continuous sources against SAG on samples

def semidiscrete_instance(cfg: BenchConfig):
    """Gaussian-mixture source, ``J`` target atoms drawn from another mixture, rescaled cost."""
    rng = make_rng(cfg.seed)
    mu = random_gaussian_mixture(rng, dim=cfg.dim)
    target = random_gaussian_mixture(rng, dim=cfg.dim)
    nu = DiscreteMeasure.uniform(target.draw_many(rng, cfg.sizes.get("J", 10)))
    pool = np.vstack([mu.draw_many(rng, 1000), nu.atoms])
    c = median_rescale(squared_euclidean(), pool, cfg.median_pairs, rng)
    return mu, nu, c.with_scale(c.scale * cfg.cost_median)


def _sgd_step_c(cfg: BenchConfig) -> float:
    # step constant in units of the typical (median) cost
    return cfg.step_c if cfg.step_c is not None else cfg.cost_median


def run_semidiscrete_bench(cfg: BenchConfig) -> BenchResult:
    """Two panels on one instance.

    ``eps`` panel: SGD for every ``eps`` in ``cfg.eps_grid`` measured against
    a long unregularized run. ``bias`` panel: SGD at ``cfg.eps`` against SAG
    on ``N`` source samples, both measured against a long regularized run.
    """
    if cfg.sgd_iters < 1:
        raise ValueError("sgd_iters must be >= 1")
    res = BenchResult(_out(cfg))
    mu, nu, c = semidiscrete_instance(cfg)
    step_c = _sgd_step_c(cfg)

    def sgd_runs(eps, ref, tag):
        traces = []
        for s in cfg.seeds:
            run = SolveConfig(eps=eps, step_c=step_c, max_passes=cfg.sgd_iters, seed=s,
                              record_time=cfg.record_time)
            _, tr = sgd_solve(mu, nu, c, eps, run, make_rng(s), ref=ref)
            _write_trace(res, "sgd", f"eps{_fmt_param(float(eps))}-{tag}", s, tr)
            traces.append(tr)
        return traces

    eps_series = []
    if cfg.eps_grid:
        ref0 = frozen_reference(mu, nu, c, 0.0, step_c, cfg.reference_iters, seed=cfg.seed)
        res.extras["v_ref_eps0"] = ref0
        for eps in cfg.eps_grid:
            traces = sgd_runs(eps, ref0, "ref0")
            ks, med = _median_curve(traces)
            eps_series.append(Series(f"eps={eps:g}", tuple(ks), tuple(med)))
            res.summary.append({"panel": "eps", "method": "sgd", "eps": float(eps), "N": None,
                                "final_k": ks[-1], "median_final_rel_err": med[-1],
                                "has_nan": any(math.isnan(y) for t in traces for y in t.column("dist_ref_l2"))})
        _plot(res.out_dir / "plot_semidiscrete_eps.svg", eps_series,
                 Axes("iterations", "relative error to unregularized v", xlog=True))

    if cfg.eps > 0:
        ref = frozen_reference(mu, nu, c, cfg.eps, step_c, cfg.reference_iters, seed=cfg.seed)
        res.extras["v_ref_eps"] = ref
        traces = sgd_runs(cfg.eps, ref, "refeps")
        ks, med = _median_curve(traces)
        bias_series = [Series("SGD", tuple(ks), tuple(med))]
        res.summary.append({"panel": "bias", "method": "sgd", "eps": cfg.eps, "N": None,
                            "final_k": ks[-1], "median_final_rel_err": med[-1]})
        for N in cfg.n_samples:
            L = 1.0 / (N * cfg.eps)  # max weight of the N-sample empirical source
            run = SolveConfig(eps=cfg.eps, step_c=cfg.sag_multiple / L, max_passes=cfg.passes,
                              minibatch=cfg.minibatch, checkpoint_every=cfg.checkpoint_every,
                              record_time=cfg.record_time)
            sag = []
            for s in cfg.seeds:
                _, tr = sag_on_samples(mu, nu, c, cfg.eps, N, replace(run, seed=s),
                                       make_rng(s, 7), ref=ref)
                _write_trace(res, "sag", f"N{N}", s, tr)
                sag.append(tr)
            passes, med_sag = _median_curve(sag)
            # one SAG pass touches each of the N samples once
            bias_series.append(Series(f"SAG N={N}", tuple(p * N for p in passes), tuple(med_sag),
                                      dashed=True))
            res.summary.append({"panel": "bias", "method": "sag", "eps": cfg.eps, "N": N,
                                "final_k": passes[-1] * N, "median_final_rel_err": med_sag[-1],
                                "median_floor": float(np.median([t.last.dist_ref_l2 for t in sag]))})
        _plot(res.out_dir / "plot_semidiscrete_bias.svg", bias_series,
                 Axes("sample gradients", f"relative error to v* (eps = {cfg.eps:g})", xlog=True))
    _write_summary(res, ["panel", "method", "eps", "N", "final_k", "median_final_rel_err",
                         "median_floor", "has_nan"])
    return res


# continuous: kernel SGD in 1D against a semi-discrete proxy

def continuous_instance():
    """Standard normal source and a two-component target mixture on the real line."""
    mu = GaussianMixture(np.zeros((1, 1)), np.ones((1, 1, 1)), np.ones(1))
    nu = GaussianMixture(np.array([[-1.0], [1.5]]), np.array([[[0.16]], [[0.36]]]),
                         np.array([0.5, 0.5]))
    return mu, nu, squared_euclidean()


def region_gaps(u_vals, ref_vals, grid, u_eval, ref_eval, center=0.0, width=1.0):
    """Mean absolute gap on a grid, split into the high-mass region and the tails.

    Both potentials are first centered by their mean over source draws
    (``u_eval``, ``ref_eval``), which fixes the free additive constant.
    """
    gap = np.abs((u_vals - np.mean(u_eval)) - (ref_vals - np.mean(ref_eval)))
    inner = np.abs(np.asarray(grid).ravel() - center) <= HIGH_MASS_SIGMAS * width
    return float(gap[inner].mean()), float(gap[~inner].mean())


def run_continuous_bench(cfg: BenchConfig) -> BenchResult:
    """Kernel SGD over ``cfg.seeds`` compared with a semi-discrete proxy potential."""
    res = BenchResult(_out(cfg))
    mu, nu, c = continuous_instance()
    n_proxy = cfg.n_samples[0] if cfg.n_samples else 1000
    proxy = semidiscrete_proxy(mu, nu, c, cfg.eps, n_proxy, cfg.proxy_iters, cfg.proxy_step,
                               seed=cfg.seed)
    xs_eval = mu.draw_many(make_rng(cfg.seed, 3), cfg.eval_points)
    ref_eval = proxy.u_many(xs_eval)
    grid = np.linspace(-GRID_SIGMAS, GRID_SIGMAS, GRID_POINTS)[:, None]
    ref_grid = proxy.u_many(grid)
    sx = cfg.kernel_sigma or median_bandwidth(mu, make_rng(cfg.seed, 4))
    sy = cfg.kernel_sigma or median_bandwidth(nu, make_rng(cfg.seed, 5))
    kernels = (Kernel(sx), Kernel(sy))
    step_c = cfg.step_c if cfg.step_c is not None else 0.01
    marks = [m for m in cfg.checkpoints if m <= cfg.sgd_iters]
    gaps = {}
    overlays = {}
    traces = []
    for n, s in enumerate(cfg.seeds):
        def snap(k, exp, s=s, first=n == 0):
            ug = exp.u_many(grid)
            gaps[(s, k)] = region_gaps(ug, ref_grid, grid, exp.u_many(xs_eval), ref_eval)
            if first:
                overlays[k] = ug - np.mean(exp.u_many(xs_eval))

        run = SolveConfig(eps=cfg.eps, step_c=step_c, seed=s, record_time=cfg.record_time)
        _, tr = kernel_sgd_solve(mu, nu, c, kernels, cfg.eps, run, make_rng(s), proxy=proxy,
                                 eval_points=xs_eval, checkpoints=marks, radius_r=cfg.radius_r,
                                 k_max=cfg.sgd_iters, on_checkpoint=snap)
        _write_trace(res, "kernel_sgd", f"eps{_fmt_param(cfg.eps)}", s, tr)
        traces.append(tr)
    ks, med = _median_curve(traces)
    for k, e in zip(ks, med):
        hi = float(np.median([gaps[(s, k)][0] for s in cfg.seeds]))
        tail = float(np.median([gaps[(s, k)][1] for s in cfg.seeds]))
        res.summary.append({"k": k, "median_rel_err": e, "median_gap_high_mass": hi,
                            "median_gap_tails": tail})
    _write_summary(res, ["k", "median_rel_err", "median_gap_high_mass", "median_gap_tails"])
    _plot(res.out_dir / "plot_continuous_error.svg",
             [Series("kernel SGD (median)", tuple(ks), tuple(med))],
             Axes("iterations", "weighted relative l2 error of u", xlog=True))
    gx = tuple(float(g) for g in grid.ravel())
    series = [Series("semi-discrete proxy", gx, tuple(ref_grid - np.mean(ref_eval)), dashed=True)]
    series += [Series(f"u_k, k={k}", gx, tuple(float(y) for y in overlays[k])) for k in sorted(overlays)]
    _plot(res.out_dir / "plot_continuous_potentials.svg", series,
             Axes("x", "centered u(x)", f"seed {cfg.seeds[0]}", ylog=False))
    res.extras.update(proxy=proxy, gaps=gaps, sigmas=(sx, sy), grid=grid)
    return res


# eps sweep: regularized solutions approach an unregularized one

def sweep_instance(cfg: BenchConfig, seed: int):
    """Uniform points in the unit cube with a median-rescaled squared Euclidean cost."""
    rng = make_rng(seed)
    I, J = cfg.sizes.get("I", 5), cfg.sizes.get("J", 5)
    X, Y = rng.random((I, cfg.dim)), rng.random((J, cfg.dim))
    c = median_rescale(squared_euclidean(), np.vstack([X, Y]), cfg.median_pairs, rng)
    c = c.with_scale(c.scale * cfg.cost_median)
    return DiscreteMeasure.uniform(X), DiscreteMeasure.uniform(Y), build_cost_matrix(c, X, Y)


def exact_value(mu, nu, C) -> float:
    """Unregularized OT value: permutations when small and uniform, else the LP."""
    if mu.size == nu.size <= 7 and np.allclose(mu.weights, mu.weights[0]) \
            and np.allclose(nu.weights, nu.weights[0]):
        return brute_force_ot(mu, nu, C)
    return lp_ot(mu, nu, C)[0]


def run_eps_sweep(cfg: BenchConfig) -> BenchResult:
    """Distance of ``v*_eps`` to an unregularized ``v*_0`` along a decreasing ``eps`` grid."""
    grid = sorted({float(e) for e in cfg.eps_grid if e > 0}, reverse=True)
    if not grid:
        raise ValueError("eps_sweep needs at least one positive eps in eps_grid")
    res = BenchResult(_out(cfg))
    dists = []
    for s in cfg.seeds:
        mu, nu, C = sweep_instance(cfg, s)
        rep = eps_convergence_check(mu, nu, C, grid)
        ot0 = exact_value(mu, nu, C)
        logj = -math.log(nu.weights.min())
        for n, e in enumerate(grid):
            gap = abs(semidual_objective(rep.v_eps[n], mu, nu, C, e) - ot0)
            res.summary.append({"seed": s, "eps": e, "dist_to_v0": float(rep.distances[n]),
                                "sup_norm": float(rep.sup_norms[n]), "objective_gap": gap,
                                "gap_bound": e * logj + e})
        dists.append(rep.distances)
    med = np.median(np.array(dists), axis=0)
    res.extras["median_distances"] = med
    res.extras["eps_grid"] = np.array(grid)
    _write_summary(res, ["seed", "eps", "dist_to_v0", "sup_norm", "objective_gap", "gap_bound"])
    _plot(res.out_dir / "plot_eps_sweep.svg",
             [Series("median ||v_eps - v_0||", tuple(grid), tuple(float(m) for m in med))],
             Axes("eps", "l2 distance to unregularized v", xlog=True))
    return res


RUNNERS = {
    "discrete": run_discrete_bench,
    "semidiscrete": run_semidiscrete_bench,
    "continuous": run_continuous_bench,
    "eps_sweep": run_eps_sweep,
}


def run_experiment(cfg: BenchConfig) -> BenchResult:
    return RUNNERS[cfg.experiment](cfg)
