"""Penalized estimation of the drift parameter from a discretized contrast.

For the linear-in-parameter drift the contrast

    R(theta) = (1/T) sum_i || DX_i + Delta_n * b_theta(X_{t_{i-1}}) ||^2

is an explicit quadratic

    R(theta) = c + l . theta + Delta_n * theta^T G theta,

with G the Gram matrix of the basis fields under the empirical norm
||f||_D^2 = (1/n) sum_i ||f(X_{t_{i-1}})||^2.  Once (c, l, G) are assembled,
estimation is pure linear algebra:

* ``lasso_solve`` -- cyclic coordinate descent with exact scalar
  soft-threshold steps on R(theta) + lambda ||theta||_1, KKT-certified.
* ``mle_solve``   -- minimum-norm solution of the stationarity system
  2 Delta_n G theta = -l via a rank-revealing factorization.
* ``lasso_ou``    -- interaction-matrix estimation as d independent row
  problems sharing the empirical covariance as their Gram matrix.
* ``cross_validate`` -- blocked, time-ordered K-fold selection of lambda
  scored by the unpenalized contrast on the held-out block.
* ``brute_force_lasso`` -- sign-pattern enumeration for p <= 3, used as a
  test oracle for the solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DriftBasis
from .simulate import Trajectory

_CHUNK = 4096


@dataclass(frozen=True)
class GramSystem:
    """Quadratic representation (c, l, G) of the discretized contrast."""

    gram: np.ndarray  # (p, p)
    linear: np.ndarray  # (p,)
    constant: float
    delta_n: float
    n_increments: int = 0

    def __post_init__(self):
        g = np.array(self.gram, dtype=float)
        l = np.array(self.linear, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or l.shape != (g.shape[0],):
            raise ValueError("gram must be p x p and linear of length p")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(l)) and np.isfinite(self.constant)):
            raise ValueError("Gram system entries must be finite")
        if self.delta_n <= 0:
            raise ValueError("delta_n must be positive")
        g = 0.5 * (g + g.T)
        g.setflags(write=False)
        l.setflags(write=False)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "linear", l)

    @property
    def p(self) -> int:
        return self.gram.shape[0]

    def contrast_value(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(
            self.constant + self.linear @ theta + self.delta_n * theta @ self.gram @ theta
        )

    def objective(self, theta: np.ndarray, lam: float) -> float:
        return self.contrast_value(theta) + lam * float(np.sum(np.abs(theta)))


@dataclass(frozen=True)
class GramBlockSums:
    """Raw per-block sums from which Gram systems over any block union follow."""

    phi_gram: np.ndarray  # (K, p, p)  sum Phi_i^T Phi_i
    phi_dx: np.ndarray  # (K, p)     sum Phi_i^T DX_i
    phi_phi0: np.ndarray  # (K, p)   sum Phi_i^T phi0(X_i)
    dx_sq: np.ndarray  # (K,)        sum ||DX_i||^2
    phi0_dx: np.ndarray  # (K,)      sum phi0^T DX_i
    phi0_sq: np.ndarray  # (K,)      sum ||phi0||^2
    counts: np.ndarray  # (K,)
    delta_n: float

    @property
    def n_blocks(self) -> int:
        return self.counts.shape[0]

    def system(self, blocks: Sequence[int] | None = None) -> GramSystem:
        idx = np.arange(self.n_blocks) if blocks is None else np.asarray(blocks, dtype=int)
        m = int(self.counts[idx].sum())
        if m < 1:
            raise ValueError("selected blocks contain no increments")
        dn = self.delta_n
        gram = self.phi_gram[idx].sum(axis=0) / m
        linear = 2.0 * self.phi_dx[idx].sum(axis=0) / m + 2.0 * dn * self.phi_phi0[idx].sum(axis=0) / m
        constant = (
            self.dx_sq[idx].sum() / (m * dn)
            + 2.0 * self.phi0_dx[idx].sum() / m
            + dn * self.phi0_sq[idx].sum() / m
        )
        return GramSystem(gram=gram, linear=linear, constant=float(constant), delta_n=dn, n_increments=m)


def gram_blocks(trajectory: Trajectory, basis: DriftBasis, n_blocks: int = 1) -> GramBlockSums:
    """Accumulate contrast sums over contiguous blocks of the time axis."""
    if trajectory.d != basis.d:
        raise ValueError(f"trajectory dimension {trajectory.d} != basis dimension {basis.d}")
    n = trajectory.n
    if n < 2:
        raise ValueError("need at least 2 increments")
    if not 1 <= n_blocks <= n:
        raise ValueError("n_blocks must be in [1, n]")
    p = basis.p
    boundaries = np.array_split(np.arange(n), n_blocks)

    phi_gram = np.zeros((n_blocks, p, p))
    phi_dx = np.zeros((n_blocks, p))
    phi_phi0 = np.zeros((n_blocks, p))
    dx_sq = np.zeros(n_blocks)
    phi0_dx = np.zeros(n_blocks)
    phi0_sq = np.zeros(n_blocks)
    counts = np.zeros(n_blocks, dtype=int)

    states = trajectory.states
    dx = trajectory.increments()
    for k, idx in enumerate(boundaries):
        counts[k] = idx.size
        for start in range(0, idx.size, _CHUNK):
            sl = idx[start : start + _CHUNK]
            x = states[sl]
            d_x = dx[sl]
            phi = basis.phi_batch(x)
            p0 = basis.phi0_batch(x)
            phi_gram[k] += np.einsum("idp,idq->pq", phi, phi)
            phi_dx[k] += np.einsum("idp,id->p", phi, d_x)
            phi_phi0[k] += np.einsum("idp,id->p", phi, p0)
            dx_sq[k] += float(np.sum(d_x * d_x))
            phi0_dx[k] += float(np.sum(p0 * d_x))
            phi0_sq[k] += float(np.sum(p0 * p0))
    return GramBlockSums(
        phi_gram=phi_gram,
        phi_dx=phi_dx,
        phi_phi0=phi_phi0,
        dx_sq=dx_sq,
        phi0_dx=phi0_dx,
        phi0_sq=phi0_sq,
        counts=counts,
        delta_n=trajectory.delta_n,
    )


def build_gram(trajectory: Trajectory, basis: DriftBasis) -> GramSystem:
    """Exact quadratic representation of the contrast for the whole trajectory."""
    return gram_blocks(trajectory, basis, 1).system()


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LassoConfig:
    tol: float = 1e-9  # max coordinate move per sweep to test convergence
    max_sweeps: int = 10000
    snap: float = 1e-12  # magnitudes below this become exact zeros

    def __post_init__(self):
        if self.tol <= 0 or self.max_sweeps < 1 or self.snap < 0:
            raise ValueError("invalid solver configuration")


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: np.ndarray
    lam: float
    sweeps_used: int
    kkt_residual: float
    converged: bool
    pinned: tuple[int, ...] = ()
    objective_trace: tuple[float, ...] = ()
    rank_deficient: bool = False

    def __post_init__(self):
        th = np.array(self.theta_hat, dtype=float)
        th.setflags(write=False)
        object.__setattr__(self, "theta_hat", th)

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "kkt_residual": self.kkt_residual,
            "sweeps": self.sweeps_used,
            "converged": self.converged,
            "rank_deficient": self.rank_deficient,
            "theta": [float(v) for v in self.theta_hat],
        }


def soft_threshold(z, gamma):
    """sign(z) * max(|z| - gamma, 0); gamma must be nonnegative."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("gamma must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


def kkt_residual(gram: GramSystem, theta: np.ndarray, lam: float) -> float:
    """Max violation of the subgradient conditions at theta.

    For theta_j != 0 the stationarity term l_j + 2 Dn (G theta)_j + lam sign
    must vanish; for theta_j = 0 the gradient must stay within [-lam, lam].
    Coordinates with a zero Gram column are skipped (they are pinned).
    """
    g = gram.gram
    theta = np.asarray(theta, dtype=float)
    grad = gram.linear + 2.0 * gram.delta_n * (g @ theta)
    live = np.diag(g) != 0.0
    nonzero = live & (theta != 0.0)
    zero = live & (theta == 0.0)
    res = 0.0
    if np.any(nonzero):
        res = float(np.max(np.abs(grad[nonzero] + lam * np.sign(theta[nonzero]))))
    if np.any(zero):
        res = max(res, float(max(0.0, np.max(np.abs(grad[zero])) - lam)))
    return res


def lasso_solve(
    gram: GramSystem,
    lam: float,
    config: LassoConfig | None = None,
    warm_start: np.ndarray | None = None,
) -> EstimationResult:
    """Cyclic coordinate descent on c + l.theta + Dn theta^T G theta + lam ||theta||_1.

    Coordinates are updated in ascending index order within every sweep;
    full sweeps alternate with refinement sweeps over the current active set
    (the usual coordinate-descent acceleration; the iterate sequence stays
    deterministic).  The solver stops once a full sweep moves no coordinate
    by more than tol, and reports converged only if the KKT residual is
    within 10 * tol * max(1, ||l||_inf).  Exhausting the sweep budget yields
    converged=False, not an exception.
    """
    config = config or LassoConfig()
    if not np.isfinite(lam) or lam < 0:
        raise ValueError("lambda must be a nonnegative finite scalar")
    g = gram.gram
    l = gram.linear
    dn = gram.delta_n
    p = gram.p
    diag = np.diag(g)
    pinned = tuple(int(j) for j in np.flatnonzero(diag == 0.0))
    free = np.flatnonzero(diag != 0.0)
    denom = 2.0 * dn * diag
    kkt_bound = 10.0 * config.tol * max(1.0, float(np.max(np.abs(l))) if p else 1.0)

    theta = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=float)
    theta[list(pinned)] = 0.0
    gtheta = g @ theta
    trace: list[float] = []

    # plain-float copies keep the per-coordinate inner loop off numpy scalars
    l_f = l.tolist()
    diag_f = diag.tolist()
    denom_f = denom.tolist()
    theta_f = theta.tolist()
    two_dn = 2.0 * dn
    lam_f = float(lam)

    def sweep(coords) -> float:
        nonlocal gtheta
        max_move = 0.0
        for j in coords:
            old = theta_f[j]
            partial = l_f[j] + two_dn * (float(gtheta[j]) - diag_f[j] * old)
            mag = abs(partial) - lam_f
            new = 0.0 if mag <= 0.0 else (-mag if partial > 0.0 else mag) / denom_f[j]
            if new != old:
                gtheta += g[j] * (new - old)
                theta_f[j] = new
                move = abs(new - old)
                if move > max_move:
                    max_move = move
        trace.append(gram.objective(np.asarray(theta_f), lam_f))
        return max_move

    free_list = [int(j) for j in free]
    sweeps = 0
    done = False
    while sweeps < config.max_sweeps and not done:
        gtheta = g @ np.asarray(theta_f)  # refresh to bound incremental drift
        sweeps += 1
        done = sweep(free_list) <= config.tol
        if done:
            break
        active = [j for j in free_list if theta_f[j] != 0.0]
        while sweeps < config.max_sweeps and active:
            sweeps += 1
            if sweep(active) <= config.tol:
                break

    theta = np.asarray(theta_f)
    theta[np.abs(theta) < config.snap] = 0.0
    res = kkt_residual(gram, theta, lam)
    return EstimationResult(
        theta_hat=theta,
        lam=float(lam),
        sweeps_used=sweeps,
        kkt_residual=res,
        converged=done and res <= kkt_bound,
        pinned=pinned,
        objective_trace=tuple(trace),
    )


def mle_solve(gram: GramSystem) -> EstimationResult:
    """Minimum-norm solution of 2 Dn G theta = -l (singular values < 1e-10 max dropped).

    Degenerate systems never raise; they yield the minimum-norm solution with
    the rank flag set.  ``converged`` reports whether the stationarity system
    was actually solved to tolerance, which truncation can prevent.
    """
    lhs = 2.0 * gram.delta_n * gram.gram
    theta, _, rank, _ = np.linalg.lstsq(lhs, -gram.linear, rcond=1e-10)
    res = kkt_residual(gram, theta, 0.0)
    bound = 10.0 * LassoConfig().tol * max(1.0, float(np.max(np.abs(gram.linear))) if gram.p else 1.0)
    return EstimationResult(
        theta_hat=theta,
        lam=0.0,
        sweeps_used=0,
        kkt_residual=res,
        converged=res <= bound,
        rank_deficient=bool(rank < gram.p),
    )


def lasso_path(
    gram: GramSystem,
    lambda_grid: Sequence[float],
    config: LassoConfig | None = None,
) -> list[EstimationResult]:
    """Warm-started solves along a strictly descending penalty grid."""
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) >= 0):
        raise ValueError("lambda grid must be strictly descending")
    out: list[EstimationResult] = []
    warm = None
    for lam in grid:
        res = lasso_solve(gram, float(lam), config, warm_start=warm)
        out.append(res)
        warm = res.theta_hat
    return out


def brute_force_lasso(gram: GramSystem, lam: float) -> np.ndarray:
    """Enumerate all 3^p sign patterns (p <= 3) and return the feasible optimum.

    Test oracle: for each pattern the restricted stationarity system is
    solved, sign consistency and the zero-coordinate subgradient bounds are
    checked, and the objective-minimal feasible solution wins.
    """
    p = gram.p
    if p > 3:
        raise ValueError("brute force oracle is limited to p <= 3")
    g = gram.gram
    l = gram.linear
    dn = gram.delta_n
    best = None
    best_obj = np.inf
    patterns = np.stack(np.meshgrid(*([[-1, 0, 1]] * p), indexing="ij")).reshape(p, -1).T
    for sigma in patterns:
        theta = np.zeros(p)
        active = np.flatnonzero(sigma != 0)
        if active.size:
            lhs = 2.0 * dn * g[np.ix_(active, active)]
            rhs = -l[active] - lam * sigma[active]
            sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
            theta[active] = sol
            if np.any(sigma[active] * sol < -1e-12):
                continue
        grad = l + 2.0 * dn * (g @ theta)
        zero = np.flatnonzero(sigma == 0)
        if np.any(np.abs(grad[zero]) > lam + 1e-9):
            continue
        obj = gram.objective(theta, lam)
        if obj < best_obj:
            best_obj = obj
            best = theta
    if best is None:
        raise RuntimeError("no feasible sign pattern found (non-convex input?)")
    return best


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck interaction matrix
# ---------------------------------------------------------------------------


def empirical_covariance(trajectory: Trajectory) -> np.ndarray:
    """C_T = (1/n) sum_i X_{t_{i-1}} X_{t_{i-1}}^T over the n left endpoints."""
    x = trajectory.states[:-1]
    return x.T @ x / x.shape[0]


@dataclass(frozen=True)
class OULassoResult:
    A_hat: np.ndarray
    rows: tuple[EstimationResult, ...]
    lam: float

    def __post_init__(self):
        a = np.array(self.A_hat, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "A_hat", a)

    def vec(self) -> np.ndarray:
        return self.A_hat.flatten(order="F")

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.rows)


def ou_row_systems(trajectory: Trajectory) -> list[GramSystem]:
    """One Gram system per matrix row; all share the empirical covariance."""
    n = trajectory.n
    if n < 2:
        raise ValueError("need at least 2 increments")
    x = trajectory.states[:-1]
    dx = trajectory.increments()
    c_t = x.T @ x / n
    cross = x.T @ dx  # (c, r) entry: sum_i X^c DX^r
    dn = trajectory.delta_n
    t_total = n * dn
    out = []
    for r in range(trajectory.d):
        out.append(
            GramSystem(
                gram=c_t,
                linear=2.0 * cross[:, r] / n,
                constant=float(np.sum(dx[:, r] ** 2) / t_total),
                delta_n=dn,
                n_increments=n,
            )
        )
    return out


def lasso_ou(
    trajectory: Trajectory,
    lam: float,
    config: LassoConfig | None = None,
) -> OULassoResult:
    """Row-separable l1 estimation of the interaction matrix.

    Row r minimizes (1/T) sum_i (DX_i^r + Dn a_r . X_{t_{i-1}})^2 + lam ||a_r||_1;
    stacking the rows reproduces the ou-linear basis solution.
    """
    systems = ou_row_systems(trajectory)
    rows = tuple(lasso_solve(sys_r, lam, config) for sys_r in systems)
    a_hat = np.vstack([r.theta_hat for r in rows])
    return OULassoResult(A_hat=a_hat, rows=rows, lam=float(lam))


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CVResult:
    lambda_star: float
    lambdas: np.ndarray  # descending
    fold_scores: np.ndarray  # (K, L)
    mean_scores: np.ndarray  # (L,)
    short_blocks: bool

    def __post_init__(self):
        for name in ("lambdas", "fold_scores", "mean_scores"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def select_lambda_descending(lambdas: np.ndarray, mean_scores: np.ndarray) -> float:
    """Grid argmin of the mean score; ties resolved toward the larger lambda."""
    best = 0
    for i in range(1, lambdas.size):
        if mean_scores[i] < mean_scores[best]:
            best = i
    return float(lambdas[best])


def cross_validate(
    trajectory: Trajectory,
    basis: DriftBasis,
    lambda_grid: Sequence[float],
    folds: int = 5,
    config: LassoConfig | None = None,
) -> CVResult:
    """Blocked K-fold selection of the penalty weight.

    The time axis is split into K contiguous blocks; each fold fits on the
    union of the other blocks and scores by the unpenalized contrast of the
    held-out block.  Time ordering is never shuffled.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    grid = np.unique(np.asarray(lambda_grid, dtype=float))[::-1]
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("lambda grid must be nonempty and strictly positive")
    blocks = gram_blocks(trajectory, basis, folds)
    short_blocks = bool(np.min(blocks.counts) < basis.p)

    fold_scores = np.empty((folds, grid.size))
    for k in range(folds):
        train = blocks.system([j for j in range(folds) if j != k])
        test = blocks.system([k])
        for i, res in enumerate(lasso_path(train, grid, config)):
            fold_scores[k, i] = test.contrast_value(res.theta_hat)
    mean_scores = fold_scores.mean(axis=0)
    return CVResult(
        lambda_star=select_lambda_descending(grid, mean_scores),
        lambdas=grid,
        fold_scores=fold_scores,
        mean_scores=mean_scores,
        short_blocks=short_blocks,
    )


def default_lambda_grid(gram: GramSystem, num: int = 20, ratio: float = 1e-3) -> np.ndarray:
    """Descending geometric grid from the null-solution threshold ||l||_inf down."""
    lam_max = float(np.max(np.abs(gram.linear)))
    if lam_max <= 0:
        lam_max = 1.0
    return np.geomspace(lam_max, lam_max * ratio, num)
