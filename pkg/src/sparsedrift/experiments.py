"""Configuration-driven experiment runners.

Each runner takes a validated config (see ``config``), fans replications out
to a worker pool, and emits CSV tables, static SVG figures, and a manifest
JSON with content hashes of every emitted file.  Replication r draws all its
randomness from Philox streams keyed by seed ^ r, so outputs are identical
for any ``--jobs`` value and across re-runs; wall-clock timings go to a
separate ``timings.txt`` kept out of the deterministic tables.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from . import rng
from .config import interaction_matrix, steps_from_sampling
from .errors import ConfigError
from .estimate import (
    GramSystem,
    LassoConfig,
    build_gram,
    cross_validate,
    default_lambda_grid,
    empirical_covariance,
    lasso_ou,
    lasso_solve,
    mle_solve,
    select_lambda_descending,
)
from .metrics import error_norms, rate_fit, support_score
from .model import (
    SparseParam,
    cosine_basis,
    generate_sparse_param,
    ou_linear_basis,
)
from .simulate import (
    RecordFlags,
    Trajectory,
    _ou_step,
    _sym_sqrt,
    ou_spectral_constants,
    simulate_linear,
    simulate_ou_exact,
    trajectory_to_binary,
    trajectory_to_csv,
)
from .theory import (
    concentration_audit_linear,
    concentration_audit_ou,
    event_statistics,
    oracle_bound,
    rate_regime,
    tuning_constants_linear,
    tuning_constants_ou,
    cosine_constants,
    estimate_second_moment,
)

# Replication-id offsets keep sub-experiments of one run on disjoint streams.
_CONC_LINEAR_OFFSET = 1_000_000
_CONC_OU_OFFSET = 2_000_000


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Comma-separated, '.' decimal, header row, LF line endings."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str, cfg: dict, files: list[str], warnings: list[str]) -> str:
    manifest = {
        "config": cfg,
        "files": {name: _sha256(os.path.join(out_dir, name)) for name in sorted(files)},
        "warnings": warnings,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _progress(done: int, total: int, label: str) -> None:
    if sys.stderr.isatty():
        end = "\n" if done == total else ""
        print(f"\r{label}: {done}/{total}", end=end, file=sys.stderr, flush=True)


def run_replications(worker: Callable[[dict], dict], payloads: list[dict], jobs: int, label: str) -> list:
    """Ordered replication results; parallel and serial runs are identical."""
    if jobs <= 1 or len(payloads) <= 1:
        out = []
        for i, payload in enumerate(payloads):
            out.append(worker(payload))
            _progress(i + 1, len(payloads), label)
        return out
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        out = list(pool.map(worker, payloads, chunksize=1))
    _progress(len(payloads), len(payloads), label)
    return out


def _cost_warning(cfg: dict, step_evals: float, warnings: list[str]) -> None:
    budget = cfg.get("cost_budget", 5e9)
    if step_evals > budget:
        msg = (
            f"projected cost {step_evals:.3g} fine-step evaluations exceeds budget {budget:.3g}"
        )
        warnings.append(msg)
        print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------


def _solver_from_cfg(est: dict) -> LassoConfig:
    sol = est.get("solver", {})
    return LassoConfig(
        tol=sol.get("tol", 1e-9),
        max_sweeps=sol.get("max_sweeps", 10000),
        snap=sol.get("snap", 1e-12),
    )


def _lambda_grid(est: dict, gram: GramSystem) -> np.ndarray:
    grid_cfg = est.get("lambda_grid", {"num": 20, "ratio": 1e-3})
    if isinstance(grid_cfg, list):
        return np.sort(np.asarray(grid_cfg, dtype=float))[::-1]
    return default_lambda_grid(gram, num=grid_cfg.get("num", 20), ratio=grid_cfg.get("ratio", 1e-3))


def _cosine_setup(model: dict, p: int) -> tuple[int, float]:
    """(s, s_anchor) for the cosine family at parameter dimension p.

    Default anchor: the nonzero fraction, giving drift slope 3 * fraction.
    Tying the anchor to the nonzero count instead pins the state into a
    window a few hundredths wide, under which no estimator can separate the
    oscillatory terms; the fraction reading keeps the design identifiable.
    """
    s = int(round((1.0 - model["sparsity_fraction"]) * p))
    s_anchor = model.get("s_anchor", max(1.0 - model["sparsity_fraction"], 1e-2))
    return s, s_anchor


def _cv_solver(solver: LassoConfig) -> LassoConfig:
    # fold fits only rank candidate lambdas; they run relaxed, the final
    # refit at lambda* uses the configured solver
    return LassoConfig(
        tol=max(solver.tol, 1e-7), max_sweeps=min(solver.max_sweeps, 1000), snap=solver.snap
    )


def _fit_lasso_and_mle(traj, basis, est: dict) -> dict:
    gram = build_gram(traj, basis)
    solver = _solver_from_cfg(est)
    if est.get("lambda") is not None:
        lam = float(est["lambda"])
        cv_lambda = None
    else:
        grid = _lambda_grid(est, gram)
        cv = cross_validate(traj, basis, grid, folds=est.get("cv_folds", 5), config=_cv_solver(solver))
        lam = cv.lambda_star
        cv_lambda = lam
    lasso = lasso_solve(gram, lam, solver)
    mle = mle_solve(gram)
    return {"gram": gram, "lambda": lam, "cv_lambda": cv_lambda, "lasso": lasso, "mle": mle}


# ---------------------------------------------------------------------------
# Support recovery (coefficient heatmap experiment)
# ---------------------------------------------------------------------------


def _support_recovery_rep(payload: dict) -> dict:
    cfg = payload["cfg"]
    rep = payload["rep"]
    t0 = time.perf_counter()
    model = cfg["model"]
    d, p = model["d"], model["p"]
    s, s_anchor = _cosine_setup(model, p)
    basis = cosine_basis(d, p, s_anchor)
    seed = cfg["seed"]
    theta0 = generate_sparse_param(
        p,
        model["sparsity_fraction"],
        rng.stream(seed, rng.PARAM, rep=rep),
        low=model["nonzero_low"],
        high=model["nonzero_high"],
    )
    sampling = cfg["sampling"]
    n, delta_n = steps_from_sampling(sampling)
    burn = math.ceil(sampling["burn_in_fraction"] * n)
    traj, _ = simulate_linear(
        basis,
        theta0,
        sampling["x0"],
        n,
        delta_n,
        substeps=sampling["substeps"],
        seed=seed ^ rep,
        burn_in=burn,
    )
    fits = _fit_lasso_and_mle(traj, basis, cfg["estimation"])
    mle_tau = cfg["estimation"]["mle_threshold"]
    out = {"rep": rep, "lambda": fits["lambda"], "wall": time.perf_counter() - t0}
    for name, result, tau in (("lasso", fits["lasso"], 0.0), ("mle", fits["mle"], mle_tau)):
        err = error_norms(result.theta_hat, theta0.values)
        score = support_score(result.theta_hat, theta0.values, tau)
        out[name] = {
            "theta": [float(v) for v in result.theta_hat],
            "l1": err.l1,
            "l2": err.l2,
            "precision": score.precision,
            "recall": score.recall,
            "f1": score.f1,
            "sweeps": result.sweeps_used,
            "kkt": result.kkt_residual,
            "converged": bool(result.converged),
            "tau": tau,
        }
    out["theta0"] = [float(v) for v in theta0.values]
    return out


_REPLICATION_HEADER = [
    "replication",
    "estimator",
    "lambda",
    "l1_error",
    "l2_error",
    "precision",
    "recall",
    "f1",
    "sweeps",
    "kkt_residual",
    "converged",
    "support_threshold",
]


def _replication_rows(results: list[dict]) -> list[tuple]:
    rows = []
    for res in results:
        for name in ("lasso", "mle"):
            est = res[name]
            rows.append(
                (
                    res["rep"],
                    name,
                    res["lambda"] if name == "lasso" else 0.0,
                    est["l1"],
                    est["l2"],
                    est["precision"],
                    est["recall"],
                    est["f1"],
                    est["sweeps"],
                    est["kkt"],
                    est["converged"],
                    est["tau"],
                )
            )
    return rows


def run_support_recovery(cfg: dict, out_dir: str, jobs: int | None = None) -> list[str]:
    from . import svgplot

    os.makedirs(out_dir, exist_ok=True)
    jobs = jobs or cfg.get("jobs", 1)
    warnings: list[str] = []
    reps = cfg["replications"]
    n, _ = steps_from_sampling(cfg["sampling"])
    _cost_warning(cfg, reps * n * cfg["sampling"]["substeps"] * cfg["model"]["d"] * 1.2, warnings)

    payloads = [{"cfg": cfg, "rep": r} for r in range(reps)]
    results = run_replications(_support_recovery_rep, payloads, jobs, "support-recovery")

    files = []
    write_csv(os.path.join(out_dir, "replications.csv"), _REPLICATION_HEADER, _replication_rows(results))
    files.append("replications.csv")

    meds = {}
    for name in ("lasso", "mle"):
        meds[name] = {
            key: float(np.median([res[name][key] for res in results]))
            for key in ("f1", "l1", "l2")
        }
    write_csv(
        os.path.join(out_dir, "summary.csv"),
        ["estimator", "median_f1", "median_l1", "median_l2", "reps"],
        [(name, meds[name]["f1"], meds[name]["l1"], meds[name]["l2"], reps) for name in ("lasso", "mle")],
    )
    files.append("summary.csv")

    first = results[0]
    coeff = {
        "true": first["theta0"],
        "mle": first["mle"]["theta"],
        "lasso": first["lasso"]["theta"],
    }
    vmax = max(max(abs(v) for v in vec) for vec in coeff.values())
    for name, vec in coeff.items():
        csv_name = f"coefficients_{name}.csv"
        write_csv(
            os.path.join(out_dir, csv_name),
            ["index", "value"],
            [(i, v) for i, v in enumerate(vec)],
        )
        files.append(csv_name)
        svg_name = f"heatmap_{name}.svg"
        with open(os.path.join(out_dir, svg_name), "w", newline="") as fh:
            fh.write(svgplot.heatmap_svg(np.asarray(vec)[None, :], title=name, vmax=vmax))
        files.append(svg_name)

    with open(os.path.join(out_dir, "timings.txt"), "w") as fh:
        for res in results:
            fh.write(f"rep {res['rep']}: {res['wall']:.3f} s\n")
    files.append("timings.txt")

    write_manifest(out_dir, cfg, files, warnings)
    return files + ["manifest.json"]


# ---------------------------------------------------------------------------
# Dimension sweep
# ---------------------------------------------------------------------------


def _dimension_rep(payload: dict) -> dict:
    cfg = dict(payload["cfg"])
    model = dict(cfg["model"])
    model["p"] = payload["p"]
    cfg["model"] = model
    out = _support_recovery_rep({"cfg": cfg, "rep": payload["rep"]})
    out["p"] = payload["p"]
    return out


def run_dimension_sweep(cfg: dict, out_dir: str, jobs: int | None = None) -> list[str]:
    from . import svgplot

    os.makedirs(out_dir, exist_ok=True)
    jobs = jobs or cfg.get("jobs", 1)
    warnings: list[str] = []
    reps = cfg["replications"]
    p_grid = cfg["p_grid"]
    n, _ = steps_from_sampling(cfg["sampling"])
    _cost_warning(
        cfg,
        len(p_grid) * reps * n * cfg["sampling"]["substeps"] * cfg["model"]["d"] * 1.2,
        warnings,
    )

    payloads = [
        {"cfg": cfg, "rep": i * reps + r, "p": p}
        for i, p in enumerate(p_grid)
        for r in range(reps)
    ]
    results = run_replications(_dimension_rep, payloads, jobs, "dimension-sweep")

    files = []
    write_csv(
        os.path.join(out_dir, "replications.csv"),
        ["p"] + _REPLICATION_HEADER,
        [
            (res["p"],) + row
            for res in results
            for row in _replication_rows([res])
        ],
    )
    files.append("replications.csv")

    sweep_rows = []
    stats = {}
    for p in p_grid:
        batch = [res for res in results if res["p"] == p]
        for name in ("lasso", "mle"):
            l1 = np.array([res[name]["l1"] for res in batch])
            l2 = np.array([res[name]["l2"] for res in batch])
            stats[(p, name)] = (l1.mean(), l1.std(ddof=1), l2.mean(), l2.std(ddof=1))
            sweep_rows.append((p, name, *stats[(p, name)], len(batch)))
    write_csv(
        os.path.join(out_dir, "sweep.csv"),
        ["p", "estimator", "mean_l1", "sd_l1", "mean_l2", "sd_l2", "reps"],
        sweep_rows,
    )
    files.append("sweep.csv")

    xs = np.array(p_grid, dtype=float)
    for norm_idx, norm_name in ((0, "l1"), (2, "l2")):
        series = []
        for name in ("lasso", "mle"):
            mean = [stats[(p, name)][norm_idx] for p in p_grid]
            sd = [stats[(p, name)][norm_idx + 1] for p in p_grid]
            series.append((name, mean, sd))
        svg_name = f"errors_{norm_name}.svg"
        with open(os.path.join(out_dir, svg_name), "w", newline="") as fh:
            fh.write(
                svgplot.line_chart_svg(
                    xs,
                    series,
                    title=f"mean {norm_name} error vs p (+- 1 sd)",
                    xlabel="p",
                    ylabel=f"{norm_name} error",
                )
            )
        files.append(svg_name)

    with open(os.path.join(out_dir, "timings.txt"), "w") as fh:
        for res in results:
            fh.write(f"p {res['p']} rep {res['rep']}: {res['wall']:.3f} s\n")
    files.append("timings.txt")

    write_manifest(out_dir, cfg, files, warnings)
    return files + ["manifest.json"]


# ---------------------------------------------------------------------------
# Rate study (interaction-matrix model, streaming Gram accumulation)
# ---------------------------------------------------------------------------


def _ou_block_sums_batch(
    a_mat: np.ndarray,
    n: int,
    delta_n: float,
    folds: int,
    rep_seeds: Sequence[int],
    chunk_steps: int = 8192,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-replication, per-block contrast sums for the row problems.

    Returns (c_sum, cross_sum, dxsq_sum, counts): c_sum[r, k] accumulates
    X X^T over block k, cross_sum[r, k][c, j] accumulates X^c DX^j, and
    dxsq_sum[r, k][j] accumulates (DX^j)^2.  States are never stored; memory
    stays O(reps * chunk).
    """
    d = a_mat.shape[0]
    n_reps = len(rep_seeds)
    decay, sigma, c_inf = _ou_step(a_mat, delta_n)
    sqrt_sigma = _sym_sqrt(sigma)
    sqrt_cinf = _sym_sqrt(c_inf)

    gens = [rng.stream(s, rng.PATH) for s in rep_seeds]
    x = np.stack([g.standard_normal(d) for g in gens]) @ sqrt_cinf.T

    sizes = [len(a) for a in np.array_split(np.arange(n), folds)]
    cuts = np.cumsum([0] + sizes)

    c_sum = np.zeros((n_reps, folds, d, d))
    cross_sum = np.zeros((n_reps, folds, d, d))
    dxsq_sum = np.zeros((n_reps, folds, d))

    start = 0
    while start < n:
        length = min(chunk_steps, n - start)
        eta = np.stack([g.standard_normal((length, d)) for g in gens]) @ sqrt_sigma.T
        xs = np.empty((n_reps, length, d))
        cur = x
        for t in range(length):
            xs[:, t] = cur
            cur = cur @ decay.T + eta[:, t]
        dxs = np.empty_like(xs)
        if length > 1:
            dxs[:, :-1] = xs[:, 1:] - xs[:, :-1]
        dxs[:, -1] = cur - xs[:, -1]
        x = cur
        k0 = int(np.searchsorted(cuts, start, side="right")) - 1
        k1 = int(np.searchsorted(cuts, start + length - 1, side="right")) - 1
        for k in range(k0, k1 + 1):
            lo = max(start, cuts[k]) - start
            hi = min(start + length, cuts[k + 1]) - start
            xb = xs[:, lo:hi]
            db = dxs[:, lo:hi]
            c_sum[:, k] += np.einsum("rtc,rtd->rcd", xb, xb)
            cross_sum[:, k] += np.einsum("rtc,rtd->rcd", xb, db)
            dxsq_sum[:, k] += np.einsum("rtd,rtd->rd", db, db)
        start += length
    return c_sum, cross_sum, dxsq_sum, np.asarray(sizes)


def _ou_row_systems(c_sum, cross_sum, dxsq_sum, m: int, delta_n: float) -> list[GramSystem]:
    gram = c_sum / m
    return [
        GramSystem(
            gram=gram,
            linear=2.0 * cross_sum[:, r] / m,
            constant=float(dxsq_sum[r] / (m * delta_n)),
            delta_n=delta_n,
            n_increments=m,
        )
        for r in range(c_sum.shape[0])
    ]


def _ou_cv_fit(
    c_sum: np.ndarray,
    cross_sum: np.ndarray,
    dxsq_sum: np.ndarray,
    counts: np.ndarray,
    delta_n: float,
    est: dict,
) -> tuple[float, np.ndarray]:
    """Whole-matrix blocked CV over a shared lambda, then a full-data refit."""
    folds = counts.shape[0]
    d = c_sum.shape[1]
    solver = _solver_from_cfg(est)
    full_rows = _ou_row_systems(
        c_sum.sum(axis=0), cross_sum.sum(axis=0), dxsq_sum.sum(axis=0), int(counts.sum()), delta_n
    )
    if est.get("lambda") is not None:
        lam = float(est["lambda"])
    else:
        grid_cfg = est.get("lambda_grid", {"num": 20, "ratio": 1e-3})
        if isinstance(grid_cfg, list):
            grid = np.sort(np.asarray(grid_cfg, dtype=float))[::-1]
        else:
            lam_max = max(float(np.max(np.abs(sys_r.linear))) for sys_r in full_rows)
            lam_max = lam_max if lam_max > 0 else 1.0
            grid = np.geomspace(lam_max, lam_max * grid_cfg.get("ratio", 1e-3), grid_cfg.get("num", 20))
        fold_solver = _cv_solver(solver)
        scores = np.zeros((folds, grid.size))
        for k in range(folds):
            train_idx = [j for j in range(folds) if j != k]
            m_train = int(counts[train_idx].sum())
            train_rows = _ou_row_systems(
                c_sum[train_idx].sum(axis=0),
                cross_sum[train_idx].sum(axis=0),
                dxsq_sum[train_idx].sum(axis=0),
                m_train,
                delta_n,
            )
            test_rows = _ou_row_systems(
                c_sum[k], cross_sum[k], dxsq_sum[k], int(counts[k]), delta_n
            )
            warm = [None] * d
            for i, lam_i in enumerate(grid):
                total = 0.0
                for r in range(d):
                    res = lasso_solve(train_rows[r], float(lam_i), fold_solver, warm_start=warm[r])
                    warm[r] = res.theta_hat
                    total += test_rows[r].contrast_value(res.theta_hat)
                scores[k, i] = total
        lam = select_lambda_descending(grid, scores.mean(axis=0))
    a_hat = np.vstack([lasso_solve(sys_r, lam, solver).theta_hat for sys_r in full_rows])
    return lam, a_hat


def _rate_point_worker(payload: dict) -> dict:
    cfg = payload["cfg"]
    t_horizon = payload["T"]
    sampling = cfg["sampling"]
    if "delta_over_t" in sampling:
        delta_n = sampling["delta_over_t"] / t_horizon
    else:
        delta_n = sampling["delta_n"]
    n = int(round(t_horizon / delta_n))
    a_mat = interaction_matrix(cfg["model"])
    d = a_mat.shape[0]
    reps = cfg["replications"]
    seeds = [cfg["seed"] ^ (payload["t_index"] * reps + r) for r in range(reps)]
    folds = cfg["estimation"].get("cv_folds", 5)

    c_sum, cross_sum, dxsq_sum, counts = _ou_block_sums_batch(a_mat, n, delta_n, folds, seeds)
    vec_true = a_mat.flatten(order="F")
    rows = []
    for r in range(reps):
        lam, a_hat = _ou_cv_fit(
            c_sum[r], cross_sum[r], dxsq_sum[r], counts, delta_n, cfg["estimation"]
        )
        err = error_norms(a_hat.flatten(order="F"), vec_true)
        rows.append({"rep": r, "lambda": lam, "l1": err.l1, "l2": err.l2})
    regime = rate_regime(d, n, delta_n, model="ou")
    return {
        "T": t_horizon,
        "delta_n": delta_n,
        "n": n,
        "rows": rows,
        "regime_value": regime.value,
        "regime_tag": regime.tag,
    }


def run_rate_study(cfg: dict, out_dir: str, jobs: int | None = None) -> list[str]:
    from . import svgplot

    os.makedirs(out_dir, exist_ok=True)
    jobs = jobs or cfg.get("jobs", 1)
    warnings: list[str] = []
    t_grid = sorted(cfg["t_grid"])
    reps = cfg["replications"]
    sampling = cfg["sampling"]
    total_steps = 0.0
    for t_h in t_grid:
        dn = sampling["delta_over_t"] / t_h if "delta_over_t" in sampling else sampling["delta_n"]
        total_steps += reps * t_h / dn
    _cost_warning(cfg, total_steps * cfg["model"]["d"], warnings)

    payloads = [{"cfg": cfg, "T": t_h, "t_index": i} for i, t_h in enumerate(t_grid)]
    points = run_replications(_rate_point_worker, payloads, jobs, "rate-study")

    files = []
    rate_rows = []
    rep_rows = []
    fit_points = []
    regime_warning = False
    for pt in points:
        l2 = np.array([row["l2"] for row in pt["rows"]])
        l1 = np.array([row["l1"] for row in pt["rows"]])
        rate_rows.append(
            (
                pt["T"],
                pt["delta_n"],
                pt["n"],
                l1.mean(),
                l2.mean(),
                l2.std(ddof=1) if l2.size > 1 else 0.0,
                len(pt["rows"]),
                pt["regime_value"],
                pt["regime_tag"],
            )
        )
        for row in pt["rows"]:
            rep_rows.append((pt["T"], row["rep"], row["lambda"], row["l1"], row["l2"]))
        fit_points.append((pt["T"], float(l2.mean())))
        if pt["regime_tag"] != "martingale-dominated":
            regime_warning = True
    if regime_warning:
        warnings.append(
            "rate-study points are not martingale-dominated; slope may be regime-contaminated"
        )

    write_csv(
        os.path.join(out_dir, "rates.csv"),
        ["T", "delta_n", "n", "mean_l1", "mean_l2", "sd_l2", "reps", "regime_value", "regime_tag"],
        rate_rows,
    )
    files.append("rates.csv")
    write_csv(
        os.path.join(out_dir, "replications.csv"),
        ["T", "replication", "lambda", "l1_error", "l2_error"],
        rep_rows,
    )
    files.append("replications.csv")

    if len(fit_points) >= 3:
        fit = rate_fit(fit_points)
        slope, intercept, r2 = fit.slope, fit.intercept, fit.r2
    else:
        xs = np.log([p[0] for p in fit_points])
        ys = np.log([p[1] for p in fit_points])
        slope = float((ys[-1] - ys[0]) / (xs[-1] - xs[0])) if len(fit_points) == 2 else 0.0
        intercept = float(ys[0] - slope * xs[0])
        r2 = 1.0
    write_csv(
        os.path.join(out_dir, "fit.csv"),
        ["slope", "intercept", "r2", "regime_warning"],
        [(slope, intercept, r2, regime_warning)],
    )
    files.append("fit.csv")

    xs = np.array([p[0] for p in fit_points], dtype=float)
    means = np.array([p[1] for p in fit_points], dtype=float)
    with open(os.path.join(out_dir, "rate.svg"), "w", newline="") as fh:
        fh.write(
            svgplot.line_chart_svg(
                xs,
                [("mean l2 error", means, None)],
                title=f"error vs horizon (log-log slope {slope:.3f})",
                xlabel="T",
                ylabel="mean l2 error",
                log_x=True,
                log_y=True,
            )
        )
    files.append("rate.svg")

    write_manifest(out_dir, cfg, files, warnings)
    return files + ["manifest.json"]


# ---------------------------------------------------------------------------
# Event-set and bound verification
# ---------------------------------------------------------------------------


def _verify_rep(payload: dict) -> dict:
    cfg = payload["cfg"]
    rep = payload["rep"]
    a_mat = np.asarray(payload["a_mat"], dtype=float)
    lam = payload["lambda"]
    k_const = payload["k"]
    gamma = cfg["audit"]["gamma"]
    budget = cfg["audit"]["budget"]
    s = int(np.count_nonzero(a_mat))
    d = a_mat.shape[0]
    sampling = cfg["sampling"]
    n, delta_n = steps_from_sampling(sampling)
    seed = cfg["seed"]

    traj, rec = simulate_ou_exact(
        a_mat,
        n,
        delta_n,
        seed=seed ^ rep,
        stationary_init=sampling["stationary_init"],
        substeps=sampling["substeps"],
        record=RecordFlags(noise=True, fine=True),
    )
    basis = ou_linear_basis(d)
    theta0 = a_mat.flatten(order="F")
    stats = event_statistics(
        traj, rec, basis, theta0, s, gamma, budget, seed ^ rep, lam=lam, k=k_const
    )
    est = lasso_ou(traj, lam, _solver_from_cfg(cfg["estimation"]))
    err = est.A_hat - a_mat
    c_t = empirical_covariance(traj)
    lhs = float(np.trace(err @ c_t @ err.T))
    rhs = oracle_bound(lam, s, gamma, k_const, delta_n)
    return {
        "rep": rep,
        "stat_T": stats.stat_T,
        "stat_Tp": stats.stat_Tp,
        "k_hat": stats.k_hat,
        "holds_T": stats.holds_T,
        "holds_Tp": stats.holds_Tp,
        "holds_Tpp": stats.holds_Tpp,
        "oracle_lhs": lhs,
        "oracle_rhs": rhs,
        "oracle_holds": bool(lhs <= rhs),
    }


def run_verifications(cfg: dict, out_dir: str, jobs: int | None = None) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    jobs = jobs or cfg.get("jobs", 1)
    warnings: list[str] = []
    files: list[str] = []
    audit = cfg["audit"]
    seed = cfg["seed"]

    if cfg["experiment"] == "verify-sets":
        a_mat = interaction_matrix(cfg["model"])
        ou = ou_spectral_constants(a_mat)
        s = int(np.count_nonzero(a_mat))
        n, delta_n = steps_from_sampling(cfg["sampling"])
        k_const = audit["k"] if audit["k"] is not None else math.sqrt(ou.l_min) / 2.0
        tc = tuning_constants_ou(
            ou,
            n=n,
            s=s,
            delta_n=delta_n,
            epsilon=audit["epsilon"],
            gamma=audit["gamma"],
            k=k_const,
            c_b_ou=audit["c_b"],
        )
        lam = cfg["estimation"]["lambda"] if cfg["estimation"].get("lambda") else tc.lambda_max
        reps = audit["reps"]
        _cost_warning(cfg, reps * n * cfg["sampling"]["substeps"] * a_mat.shape[0], warnings)

        payloads = [
            {"cfg": cfg, "rep": r, "a_mat": a_mat.tolist(), "lambda": lam, "k": k_const}
            for r in range(reps)
        ]
        results = run_replications(_verify_rep, payloads, jobs, "verify-sets")

        write_csv(
            os.path.join(out_dir, "events.csv"),
            ["replication", "stat_T", "stat_Tp", "k_hat", "holds_T", "holds_Tp", "holds_Tpp"],
            [
                (
                    res["rep"],
                    res["stat_T"],
                    res["stat_Tp"],
                    res["k_hat"],
                    res["holds_T"],
                    res["holds_Tp"],
                    res["holds_Tpp"],
                )
                for res in results
            ],
        )
        files.append("events.csv")

        write_csv(
            os.path.join(out_dir, "oracle.csv"),
            ["replication", "lhs", "rhs", "holds"],
            [(res["rep"], res["oracle_lhs"], res["oracle_rhs"], res["oracle_holds"]) for res in results],
        )
        files.append("oracle.csv")

        freq = {
            key: float(np.mean([res[key] for res in results]))
            for key in ("holds_T", "holds_Tp", "holds_Tpp", "oracle_holds")
        }
        triple = float(
            np.mean(
                [res["holds_T"] and res["holds_Tp"] and res["holds_Tpp"] for res in results]
            )
        )
        eps = audit["epsilon"]
        write_csv(
            os.path.join(out_dir, "event_summary.csv"),
            ["quantity", "frequency", "target", "reps"],
            [
                ("T", freq["holds_T"], 1.0 - eps, reps),
                ("Tp", freq["holds_Tp"], 1.0 - eps, reps),
                ("Tpp", freq["holds_Tpp"], 1.0 - eps, reps),
                ("triple", triple, 1.0 - 3.0 * eps, reps),
                ("oracle", freq["oracle_holds"], 1.0 - 3.0 * eps, reps),
            ],
        )
        files.append("event_summary.csv")

        write_csv(
            os.path.join(out_dir, "constants.csv"),
            ["name", "value"],
            [
                ("lambda_1_ou", tc.lambda_1),
                ("lambda_2_ou", tc.lambda_2),
                ("t_1_ou", tc.t_1),
                ("lambda_used", lam),
                ("epsilon", eps),
                ("gamma", audit["gamma"]),
                ("k", k_const),
                ("c_b_ou", audit["c_b"]),
                ("s", s),
                ("n", n),
                ("delta_n", delta_n),
                ("m_frak", ou.m_frak),
                ("p_frak", ou.p_frak),
                ("l_min", ou.l_min),
                ("l_max", ou.l_max),
                ("a_frak", ou.a_frak),
            ],
        )
        files.append("constants.csv")

    conc_lin = audit.get("concentration_linear")
    if conc_lin is not None:
        a_lin = np.asarray(conc_lin["A0"], dtype=float)
        d_lin = a_lin.shape[0]
        basis = ou_linear_basis(d_lin)
        theta0 = a_lin.flatten(order="F")
        clip = conc_lin.get("clip", 10.0)
        sym = 0.5 * (a_lin + a_lin.T)
        m_const = float(np.linalg.eigvalsh(sym).min())
        if m_const <= 0:
            raise ConfigError("concentration_linear.A0 must have positive-definite symmetric part")
        l_const = float(np.linalg.norm(a_lin, 2))

        def f_clip(x: np.ndarray) -> np.ndarray:
            return np.clip(x[:, 0], -clip, clip)

        table = concentration_audit_linear(
            basis,
            theta0,
            L=l_const,
            M=m_const,
            f=f_clip,
            f_lip=1.0,
            r_grid=conc_lin["r_grid"],
            n=conc_lin["n"],
            delta_n=conc_lin["delta_n"],
            reps=conc_lin["reps"],
            seed=seed ^ _CONC_LINEAR_OFFSET,
            substeps=conc_lin.get("substeps", 1),
            burn_in=conc_lin.get("burn_in"),
        )
        write_csv(
            os.path.join(out_dir, "concentration_linear.csv"),
            ["r_or_x", "empirical", "bound", "se", "reps"],
            list(table.rows()),
        )
        files.append("concentration_linear.csv")

    conc_ou = audit.get("concentration_ou")
    if conc_ou is not None:
        if "A0" in conc_ou:
            a_ou = np.asarray(conc_ou["A0"], dtype=float)
        else:
            a_ou = np.diag(np.asarray(conc_ou["A0_diag"], dtype=float))
        table = concentration_audit_ou(
            ou_spectral_constants(a_ou),
            n=conc_ou["n"],
            delta_n=conc_ou["delta_n"],
            x_grid=conc_ou["x_grid"],
            reps=conc_ou["reps"],
            seed=seed ^ _CONC_OU_OFFSET,
            n_directions=conc_ou.get("n_directions", 16),
        )
        write_csv(
            os.path.join(out_dir, "concentration_ou.csv"),
            ["r_or_x", "empirical", "bound", "se", "reps"],
            list(table.rows()),
        )
        files.append("concentration_ou.csv")

    if cfg["experiment"] == "verify-concentration" and not files:
        raise ConfigError(
            "verify-concentration needs audit.concentration_linear or audit.concentration_ou",
            path="audit",
        )

    write_manifest(out_dir, cfg, files, warnings)
    return files + ["manifest.json"]


# ---------------------------------------------------------------------------
# Single-shot runs (simulate / estimate / cv / constants)
# ---------------------------------------------------------------------------


def _single_trajectory(cfg: dict) -> tuple[Trajectory, SparseParam | None, object]:
    model = cfg["model"]
    sampling = cfg["sampling"]
    n, delta_n = steps_from_sampling(sampling)
    seed = cfg["seed"]
    if model["family"] == "cosine":
        p = model["p"]
        s, s_anchor = _cosine_setup(model, p)
        basis = cosine_basis(model["d"], p, s_anchor)
        theta0 = generate_sparse_param(
            p,
            model["sparsity_fraction"],
            rng.stream(seed, rng.PARAM),
            low=model["nonzero_low"],
            high=model["nonzero_high"],
        )
        burn = math.ceil(sampling["burn_in_fraction"] * n)
        traj, _ = simulate_linear(
            basis,
            theta0,
            sampling["x0"],
            n,
            delta_n,
            substeps=sampling["substeps"],
            seed=seed,
            burn_in=burn,
        )
        return traj, theta0, basis
    a_mat = interaction_matrix(model)
    traj = simulate_ou_exact(
        a_mat, n, delta_n, seed=seed, stationary_init=sampling["stationary_init"]
    )
    basis = ou_linear_basis(model["d"])
    theta0 = SparseParam(values=a_mat.flatten(order="F"))
    return traj, theta0, basis


def run_simulate(cfg: dict, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    traj, theta0, _ = _single_trajectory(cfg)
    files = []
    trajectory_to_csv(traj, os.path.join(out_dir, "trajectory.csv"))
    files.append("trajectory.csv")
    trajectory_to_binary(traj, os.path.join(out_dir, "trajectory.bin"))
    files.append("trajectory.bin")
    if theta0 is not None:
        write_csv(
            os.path.join(out_dir, "theta0.csv"),
            ["index", "value"],
            [(i, float(v)) for i, v in enumerate(theta0.values)],
        )
        files.append("theta0.csv")
    write_manifest(out_dir, cfg, files, [])
    return files + ["manifest.json"]


def run_estimate_single(cfg: dict, out_dir: str, trajectory: Trajectory | None = None) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    if trajectory is None:
        traj, theta0, basis = _single_trajectory(cfg)
    else:
        traj = trajectory
        theta0 = None
        model = cfg["model"]
        if model["family"] == "cosine":
            p = model["p"]
            _, s_anchor = _cosine_setup(model, p)
            basis = cosine_basis(model["d"], p, s_anchor)
        else:
            basis = ou_linear_basis(model["d"])
    fits = _fit_lasso_and_mle(traj, basis, cfg["estimation"])
    files = []
    for name in ("lasso", "mle"):
        result = fits[name]
        write_csv(
            os.path.join(out_dir, f"estimate_{name}.csv"),
            ["index", "value"],
            [(i, float(v)) for i, v in enumerate(result.theta_hat)],
        )
        files.append(f"estimate_{name}.csv")
        with open(os.path.join(out_dir, f"estimate_{name}.json"), "w", newline="") as fh:
            json.dump(result.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        files.append(f"estimate_{name}.json")
    if theta0 is not None:
        rows = []
        for name in ("lasso", "mle"):
            err = error_norms(fits[name].theta_hat, theta0.values)
            tau = 0.0 if name == "lasso" else cfg["estimation"]["mle_threshold"]
            score = support_score(fits[name].theta_hat, theta0.values, tau)
            rows.append((name, fits["lambda"] if name == "lasso" else 0.0, err.l1, err.l2, score.f1))
        write_csv(
            os.path.join(out_dir, "summary.csv"),
            ["estimator", "lambda", "l1_error", "l2_error", "f1"],
            rows,
        )
        files.append("summary.csv")
    write_manifest(out_dir, cfg, files, [])
    return files + ["manifest.json"]


def run_cv(cfg: dict, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    traj, _, basis = _single_trajectory(cfg)
    est = cfg["estimation"]
    gram = build_gram(traj, basis)
    grid = _lambda_grid(est, gram)
    cv = cross_validate(traj, basis, grid, folds=est.get("cv_folds", 5), config=_solver_from_cfg(est))
    rows = []
    for i, lam in enumerate(cv.lambdas):
        rows.append((float(lam), float(cv.mean_scores[i]), *[float(v) for v in cv.fold_scores[:, i]]))
    folds = cv.fold_scores.shape[0]
    write_csv(
        os.path.join(out_dir, "cv.csv"),
        ["lambda", "mean_score"] + [f"fold_{k}" for k in range(folds)],
        rows,
    )
    files = ["cv.csv"]
    write_csv(
        os.path.join(out_dir, "cv_selected.csv"),
        ["lambda_star", "short_blocks"],
        [(cv.lambda_star, cv.short_blocks)],
    )
    files.append("cv_selected.csv")
    write_manifest(out_dir, cfg, files, [])
    return files + ["manifest.json"]


def run_constants(cfg: dict, out_dir: str | None) -> list[tuple[str, float]]:
    """Evaluate the tuning thresholds for the configured model; optionally emit CSV."""
    model = cfg["model"]
    audit = cfg["audit"]
    sampling = cfg["sampling"]
    n, delta_n = steps_from_sampling(sampling)
    seed = cfg["seed"]
    if model["family"] == "cosine":
        p = model["p"]
        s, s_anchor = _cosine_setup(model, p)
        basis = cosine_basis(model["d"], p, s_anchor)
        theta0 = generate_sparse_param(
            p,
            model["sparsity_fraction"],
            rng.stream(seed, rng.PARAM),
            low=model["nonzero_low"],
            high=model["nonzero_high"],
        )
        if "second_moment" in audit:
            second_moment = audit["second_moment"]
        else:
            calib, _ = simulate_linear(
                basis,
                theta0,
                sampling["x0"],
                max(n, 1000),
                delta_n,
                substeps=sampling["substeps"],
                seed=seed ^ _CONC_LINEAR_OFFSET,
                burn_in=math.ceil(0.1 * max(n, 1000)),
            )
            second_moment = estimate_second_moment(calib)
        mc = cosine_constants(
            basis,
            theta0,
            delta_n,
            second_moment=second_moment,
            M=audit.get("M", 1.0),
            C_b=audit["c_b"],
            l=audit.get("l", 1.0),
            k=audit["k"],
            gamma=audit["gamma"],
        )
        tc = tuning_constants_linear(
            mc, d=model["d"], p=p, n=n, s=max(s, 1), delta_n=delta_n, epsilon=audit["epsilon"]
        )
        pairs = [
            ("lambda_11", tc.lambda_11),
            ("lambda_12", tc.lambda_12),
            ("lambda_1", tc.lambda_1),
            ("lambda_2", tc.lambda_2),
            ("t_1", tc.t_1),
            ("lambda_max", tc.lambda_max),
            ("L", mc.L),
            ("M", mc.M),
            ("R", mc.R),
            ("H_dn", mc.H_dn),
            ("K_dn", mc.K_dn),
            ("C_b", mc.C_b),
            ("l", mc.l),
            ("k", mc.k),
            ("gamma", mc.gamma),
            ("second_moment", second_moment),
            ("epsilon", audit["epsilon"]),
            ("s", float(max(s, 1))),
            ("n", float(n)),
            ("delta_n", delta_n),
        ]
    else:
        a_mat = interaction_matrix(model)
        ou = ou_spectral_constants(a_mat)
        s = int(np.count_nonzero(a_mat))
        tc = tuning_constants_ou(
            ou,
            n=n,
            s=s,
            delta_n=delta_n,
            epsilon=audit["epsilon"],
            gamma=audit["gamma"],
            k=audit["k"],
            c_b_ou=audit["c_b"],
        )
        pairs = [
            ("lambda_1_ou", tc.lambda_1),
            ("lambda_2_ou", tc.lambda_2),
            ("t_1_ou", tc.t_1),
            ("lambda_max", tc.lambda_max),
            ("beta", tc.beta),
            ("log_alpha", tc.log_alpha),
            ("m_frak", ou.m_frak),
            ("p_frak", ou.p_frak),
            ("l_min", ou.l_min),
            ("l_max", ou.l_max),
            ("a_frak", ou.a_frak),
            ("k", tc.k),
            ("gamma", audit["gamma"]),
            ("c_b_ou", audit["c_b"]),
            ("epsilon", audit["epsilon"]),
            ("s", float(s)),
            ("n", float(n)),
            ("delta_n", delta_n),
        ]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(os.path.join(out_dir, "constants.csv"), ["name", "value"], pairs)
        write_manifest(out_dir, cfg, ["constants.csv"], [])
    return pairs
