"""Tuning thresholds, event-set statistics, and Monte Carlo bound audits.

The estimation guarantees hold on the intersection of three events computed
from an instrumented trajectory:

* the martingale event  -- || (1/n) sum_i Phi(X_{t_{i-1}})^T DW_i ||_inf
  is dominated by lambda/4 (statistic ``stat_T``);
* the discretization event -- the same functional with DW_i replaced by the
  within-interval drift increment integral is dominated by lambda/4
  (statistic ``stat_Tp``, evaluated by left-endpoint quadrature on the
  recorded fine sub-path);
* the compatibility event -- the empirical norm dominates the Euclidean norm
  on the near-sparse cone C(s, 3 + 4/gamma) with constant k (estimated by
  ``k_hat``, reported as an upper bound on the true cone infimum).

``tuning_constants_linear`` / ``tuning_constants_ou`` evaluate the
closed-form thresholds lambda_1, lambda_2, T_1 under which those events hold
with probability >= 1 - epsilon each; the concentration and oracle audits
check the corresponding tail bounds by simulation.  All combinatorial terms
are evaluated in log space, so the constants stay finite for any (p, s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from . import rng
from .errors import InstrumentationRequired, SimulationDiverged
from .model import DriftBasis, OUParam, SparseParam, cone_membership
from .simulate import (
    BLOWUP_LIMIT,
    NoiseRecord,
    OUModel,
    Trajectory,
    _sym_sqrt,
    _ou_step,
    simulate_linear,
    simulate_ou_exact,
)
from .estimate import GramSystem, LassoConfig, build_gram, lasso_ou, lasso_solve


# ---------------------------------------------------------------------------
# Model constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelConstants:
    """Inputs to the linear-model thresholds.

    L        Lipschitz bound of the drift at the true parameter.
    M        monotonicity constant: <b(x)-b(y), x-y> >= M ||x-y||^2.
    R        moment-growth constant 2 max_j C_j^2 (1 + max_k E|X^k|^2).
    H_dn     martingale-variance constant (per-coordinate Lipschitz norms of
             ||phi_j||^2 enter squared).
    K_dn     compatibility constant (operator norm of the pairwise Lipschitz
             matrix of <phi_i, phi_j> enters squared).
    C_b      discretization constant; not derivable numerically, defaults 1.
    l        restricted-eigenvalue lower bound on the cone.
    k        norm-equivalence constant, defaults sqrt(l)/2; must satisfy k^2 < l.
    gamma    cone parameter (> 0, arbitrary).
    """

    L: float
    M: float
    R: float
    H_dn: float
    K_dn: float
    C_b: float = 1.0
    l: float = 1.0
    k: float | None = None
    gamma: float = 1.0

    def __post_init__(self):
        if self.k is None:
            object.__setattr__(self, "k", math.sqrt(self.l) / 2.0)
        for name in ("L", "M", "R", "H_dn", "K_dn", "C_b", "l", "k", "gamma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.k**2 >= self.l:
            raise ValueError("need k^2 < l")


def h_delta_constant(delta_n: float, L: float, M: float, tilde_lip: float) -> float:
    """32 Dn^2 e^{4 L Dn} tilde_lip^2 / (1 - e^{-M Dn})^2."""
    return 32.0 * delta_n**2 * math.exp(4.0 * L * delta_n) * tilde_lip**2 / (
        1.0 - math.exp(-M * delta_n)
    ) ** 2


def k_delta_constant(delta_n: float, L: float, M: float, pair_lip_op: float) -> float:
    """16 Dn^2 e^{4 L Dn} ||M_Lip||_op^2 / (1 - e^{-M Dn})^2."""
    return 16.0 * delta_n**2 * math.exp(4.0 * L * delta_n) * pair_lip_op**2 / (
        1.0 - math.exp(-M * delta_n)
    ) ** 2


def estimate_second_moment(trajectory: Trajectory) -> float:
    """max_k of the empirical second moment of coordinate k (left endpoints)."""
    return float(np.max(np.mean(trajectory.states[:-1] ** 2, axis=0)))


def cosine_constants(
    basis: DriftBasis,
    theta0: SparseParam | np.ndarray,
    delta_n: float,
    second_moment: float,
    M: float,
    C_b: float = 1.0,
    l: float = 1.0,
    k: float | None = None,
    gamma: float = 1.0,
) -> ModelConstants:
    """ModelConstants for the cosine family from its declared Lipschitz data.

    The per-coordinate Lipschitz norm of ||phi_j||^2 is j+1 (derivative bound
    of cos^2), hence tilde_lip = p+1 over j = 1..p; the pairwise constants
    are L_i + L_j since each component is bounded by 1.  The monotonicity
    constant M cannot be read off the basis and must be supplied.
    """
    vals = theta0.values if isinstance(theta0, SparseParam) else np.asarray(theta0, float)
    lips = basis.lipschitz_constants()
    drift_lip = float(lips[0] + np.sum(np.abs(vals) * lips[1:]))
    tilde_lip = float(lips[1:].max())
    pair = lips[1:, None] + lips[None, 1:]
    pair_op = float(np.linalg.norm(pair, 2))
    moment_r = 2.0 * 1.0 * (1.0 + second_moment)  # C_j = 1 for j >= 1
    return ModelConstants(
        L=drift_lip,
        M=M,
        R=moment_r,
        H_dn=h_delta_constant(delta_n, drift_lip, M, tilde_lip),
        K_dn=k_delta_constant(delta_n, drift_lip, M, pair_op),
        C_b=C_b,
        l=l,
        k=k,
        gamma=gamma,
    )


# ---------------------------------------------------------------------------
# Tuning constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TuningConstants:
    """Threshold bundle for either drift family; lambda_1 = max of its parts."""

    kind: str  # "linear" | "ou"
    lambda_1: float
    lambda_2: float
    t_1: float
    epsilon: float
    gamma: float
    k: float
    lambda_11: float | None = None
    lambda_12: float | None = None
    beta: float | None = None
    log_alpha: float | None = None

    def __post_init__(self):
        if self.kind == "linear":
            if abs(self.lambda_1 - max(self.lambda_11, self.lambda_12)) > 1e-12 * max(
                1.0, self.lambda_1
            ):
                raise ValueError("lambda_1 must equal max(lambda_11, lambda_12)")
        for name in ("lambda_1", "lambda_2", "t_1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def lambda_max(self) -> float:
        return max(self.lambda_1, self.lambda_2)


def _lambda11(d: int, R: float, delta_n: float, n: int, log_term: float) -> float:
    return 23.0 * math.sqrt(d * R * delta_n / n * log_term)


def _lambda12(d: int, H_dn: float, delta_n: float, n: int, log_term: float) -> float:
    return 7.0 * (d**2 * H_dn * delta_n / n**3 * log_term**3) ** 0.25


def _lambda2(s: int, d: int, delta_n: float, C_b: float, log_term: float) -> float:
    return 8.0 * math.e * math.sqrt(C_b) * s * d * delta_n**1.5 * math.sqrt(log_term)


def _t1_linear(
    d: int, K_dn: float, gamma: float, l: float, k: float, log_sum: float
) -> float:
    return 324.0 * d * K_dn * (5.0 + 4.0 / gamma) ** 4 / (l - k**2) ** 2 * log_sum


def _log_alpha_linear(p: int, s: int) -> float:
    # ln(21^{2s} (p^{2s} ^ (e p / 2s)^{2s})) with ^ the minimum, in log space
    return 2.0 * s * math.log(21.0) + 2.0 * s * min(
        math.log(p), 1.0 + math.log(p) - math.log(2.0 * s)
    )


def tuning_constants_linear(
    mc: ModelConstants,
    *,
    d: int,
    p: int,
    n: int,
    s: int,
    delta_n: float,
    epsilon: float,
) -> TuningConstants:
    """Thresholds for the general linear drift at confidence 1 - epsilon per event."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if min(d, p, n, s) < 1 or delta_n <= 0:
        raise ValueError("dimensions must be positive")
    log1 = math.log(2.0 * p) + math.log(2.0 / epsilon)
    lam11 = _lambda11(d, mc.R, delta_n, n, log1)
    lam12 = _lambda12(d, mc.H_dn, delta_n, n, log1)
    lam2 = _lambda2(s, d, delta_n, mc.C_b, math.log(p) + math.log(1.0 / epsilon))
    log_sum = math.log(2.0 / epsilon) + _log_alpha_linear(p, s)
    t1 = _t1_linear(d, mc.K_dn, mc.gamma, mc.l, mc.k, log_sum)
    return TuningConstants(
        kind="linear",
        lambda_1=max(lam11, lam12),
        lambda_2=lam2,
        t_1=t1,
        epsilon=epsilon,
        gamma=mc.gamma,
        k=mc.k,
        lambda_11=lam11,
        lambda_12=lam12,
    )


def _lambda1_ou(delta_n: float, variance_term: float, n: int, log_term: float) -> float:
    return math.sqrt(32.0 * delta_n * variance_term * log_term / n)


def _lambda2_ou(d: int, delta_n: float, C_b: float, log_term: float) -> float:
    return 8.0 * math.e * math.sqrt(C_b) * d * delta_n**1.5 * math.sqrt(log_term)


def _log_alpha_ou(d: int, s: int) -> float:
    # ln(21^{2s} 2d (d^{4s} ^ (e d^2 / 2s)^{2s})), minimum taken in log space
    return (
        2.0 * s * math.log(21.0)
        + math.log(2.0 * d)
        + min(4.0 * s * math.log(d), 2.0 * s * (1.0 + 2.0 * math.log(d) - math.log(2.0 * s)))
    )


def _t1_ou(ou: OUModel, k: float, beta: float, log_sum: float) -> float:
    gap = ou.l_min - k**2
    return (
        8.0
        * ou.p_frak
        * ou.l_max
        * beta
        * (gap + beta * ou.l_max)
        / (ou.m_frak * gap**2)
        * log_sum
    )


def tuning_constants_ou(
    ou: OUModel,
    *,
    n: int,
    s: int,
    delta_n: float,
    epsilon: float,
    gamma: float = 1.0,
    k: float | None = None,
    c_b_ou: float = 1.0,
) -> TuningConstants:
    """Thresholds for the interaction-matrix model at confidence 1 - epsilon per event."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if n < 1 or s < 1 or delta_n <= 0 or gamma <= 0 or c_b_ou <= 0:
        raise ValueError("invalid inputs")
    if k is None:
        k = math.sqrt(ou.l_min) / 2.0
    if k**2 >= ou.l_min:
        raise ValueError("need k^2 < l_min")
    d = ou.d
    log1 = math.log(d**2) + math.log(2.0 / epsilon)
    lam1 = _lambda1_ou(delta_n, ou.a_frak + ou.l_min - k**2, n, log1)
    lam2 = _lambda2_ou(d, delta_n, c_b_ou, math.log(d**2) + math.log(1.0 / epsilon))
    beta = 9.0 * (5.0 + 4.0 / gamma) ** 2
    log_alpha = _log_alpha_ou(d, s)
    t1 = _t1_ou(ou, k, beta, log_alpha + math.log(1.0 / epsilon))
    return TuningConstants(
        kind="ou",
        lambda_1=lam1,
        lambda_2=lam2,
        t_1=t1,
        epsilon=epsilon,
        gamma=gamma,
        k=k,
        beta=beta,
        log_alpha=log_alpha,
    )


def h0(x, ou: OUModel):
    """Tail-rate function m/(8 p0 lmax) * x^2/(x + lmax); increasing in x."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive")
    out = ou.m_frak / (8.0 * ou.p_frak * ou.l_max) * x**2 / (x + ou.l_max)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Event statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventStatistics:
    stat_T: float
    stat_Tp: float | None
    k_hat: float
    holds_T: bool | None
    holds_Tp: bool | None
    holds_Tpp: bool | None
    gamma: float
    budget: int


def _sample_cone_direction(
    p: int, s: int, c: float, gen: np.random.Generator, max_attempts: int = 100
) -> np.ndarray:
    """Rejection-sample a direction from C(s, c): sparse core + scaled spill-over."""
    for _ in range(max_attempts):
        support = gen.choice(p, size=min(s, p), replace=False)
        u = np.zeros(p)
        u[support] = gen.standard_normal(support.size)
        if np.all(u[support] == 0):
            continue
        rest = np.setdiff1d(np.arange(p), support)
        if rest.size:
            v = gen.standard_normal(rest.size)
            l1 = np.sum(np.abs(v))
            if l1 > 0:
                scale = gen.uniform(0.0, 1.0) * c * np.sum(np.abs(u[support])) / l1
                u[rest] = v * scale
        if cone_membership(u, s, c):
            return u
    # pure s-sparse vectors always belong to the cone
    u = np.zeros(p)
    support = gen.choice(p, size=min(s, p), replace=False)
    u[support] = gen.standard_normal(support.size)
    return u


def cone_restricted_min(
    gram_matrix: np.ndarray,
    s: int,
    gamma: float,
    budget: int,
    seed: int,
) -> float:
    """Upper bound on inf over C(s, 3+4/gamma) of u^T G u / ||u||^2 (as sqrt).

    Exact minimum restricted eigenvalue over all supports of size 2s when
    their count fits in the budget, refined by rejection-sampled cone
    directions.  The exact cone infimum is NP-hard; every value returned is
    certified from above by the sampled directions.
    """
    g = np.asarray(gram_matrix, dtype=float)
    p = g.shape[0]
    c = 3.0 + 4.0 / gamma
    best = np.inf
    r = min(2 * s, p)
    if math.comb(p, r) <= budget:
        for support in combinations(range(p), r):
            idx = np.asarray(support)
            best = min(best, float(np.linalg.eigvalsh(g[np.ix_(idx, idx)])[0]))
    gen = rng.stream(seed, rng.CONE)
    for _ in range(budget):
        u = _sample_cone_direction(p, s, c, gen)
        best = min(best, float(u @ g @ u / (u @ u)))
    return math.sqrt(max(best, 0.0))


def event_statistics(
    trajectory: Trajectory,
    noise: NoiseRecord | None,
    basis: DriftBasis,
    theta0: SparseParam | np.ndarray,
    s: int,
    gamma: float,
    budget: int,
    seed: int,
    lam: float | None = None,
    k: float | None = None,
    gram: GramSystem | None = None,
    require_fine: bool = True,
) -> EventStatistics:
    """Event-set statistics from an instrumented trajectory.

    Requires the recorded coarse Brownian increments; the discretization
    statistic additionally needs the fine sub-path (left-endpoint quadrature,
    O(delta) error).  Flags are filled in when lambda and k are given.
    """
    if noise is None or not np.all(np.isfinite(noise.coarse_dw)):
        raise InstrumentationRequired("coarse Brownian increments were not recorded")
    n = trajectory.n
    states = trajectory.states[:-1]
    vals = theta0.values if isinstance(theta0, SparseParam) else np.asarray(theta0, float)
    drift = basis.drift_fn(vals)

    acc_t = np.zeros(basis.p)
    acc_tp = np.zeros(basis.p)
    have_fine = noise.fine_states is not None
    if require_fine and not have_fine:
        raise InstrumentationRequired("fine sub-path was not recorded")
    m = noise.substeps
    delta = trajectory.delta_n / m
    chunk = max(1, 65536 // max(1, basis.p))
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        phi = basis.phi_batch(states[sl])
        acc_t += np.einsum("idp,id->p", phi, noise.coarse_dw[sl])
        if have_fine:
            fine = noise.fine_states[sl][:, :-1, :]  # m left endpoints per interval
            flat = fine.reshape(-1, basis.d)
            b_fine = drift(flat).reshape(fine.shape)
            b_left = drift(states[sl])
            integral = delta * (b_fine - b_left[:, None, :]).sum(axis=1)
            acc_tp += np.einsum("idp,id->p", phi, integral)

    stat_t = float(np.max(np.abs(acc_t)) / n)
    stat_tp = float(np.max(np.abs(acc_tp)) / n) if have_fine else None

    g = gram.gram if gram is not None else build_gram(trajectory, basis).gram
    k_hat = cone_restricted_min(g, s, gamma, budget, seed)

    return EventStatistics(
        stat_T=stat_t,
        stat_Tp=stat_tp,
        k_hat=k_hat,
        holds_T=None if lam is None else bool(stat_t <= lam / 4.0),
        holds_Tp=None if (lam is None or stat_tp is None) else bool(stat_tp <= lam / 4.0),
        holds_Tpp=None if k is None else bool(k_hat >= k),
        gamma=gamma,
        budget=budget,
    )


# ---------------------------------------------------------------------------
# Concentration audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditTable:
    """Tail-audit table; one row per grid point."""

    x: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray
    se: np.ndarray
    reps: int

    def __post_init__(self):
        for name in ("x", "empirical", "bound", "se"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def rows(self):
        for i in range(self.x.size):
            yield (
                float(self.x[i]),
                float(self.empirical[i]),
                float(self.bound[i]),
                float(self.se[i]),
                self.reps,
            )


def linear_tail_bound(
    r, n: int, delta_n: float, d: int, f_lip: float, L: float, M: float
):
    """exp(-r^2 n (1-e^{-M Dn})^2 / (64 d f_lip^2 Dn e^{4 L Dn}))."""
    r = np.asarray(r, dtype=float)
    num = r**2 * n * (1.0 - np.exp(-M * delta_n)) ** 2
    den = 64.0 * d * f_lip**2 * delta_n * np.exp(4.0 * L * delta_n)
    out = np.exp(-num / den)
    return float(out) if out.ndim == 0 else out


def ou_tail_bound(x, n: int, delta_n: float, ou: OUModel):
    """2 exp(-n Dn H0(x)), the small-step form of the quadratic tail bound."""
    return 2.0 * np.exp(-n * delta_n * h0(x, ou))


def _batched_euler_f_average(
    basis: DriftBasis,
    theta: np.ndarray,
    x0: np.ndarray,
    n: int,
    delta_n: float,
    substeps: int,
    burn_in: int,
    f: Callable[[np.ndarray], np.ndarray],
    rep_ids: Sequence[int],
    seed: int,
) -> np.ndarray:
    """(1/n) sum_{i=1..n} f(X_{t_i}) per replication, batched across reps.

    Each replication draws its noise from its own Philox stream keyed by
    seed ^ rep, so results do not depend on how reps are grouped.
    """
    m = substeps
    delta = delta_n / m
    sq = math.sqrt(delta)
    drift = basis.drift_fn(theta)
    total = (burn_in + n) * m
    out = np.empty(len(rep_ids))
    group = 256
    for g0 in range(0, len(rep_ids), group):
        ids = rep_ids[g0 : g0 + group]
        noise = np.stack(
            [rng.stream(seed ^ r, rng.PATH).standard_normal((total, basis.d)) for r in ids]
        )
        x = np.broadcast_to(np.asarray(x0, float), (len(ids), basis.d)).copy()
        acc = np.zeros(len(ids))
        for step in range(total):
            x = x - drift(x) * delta + sq * noise[:, step]
            if np.max(np.abs(x)) > BLOWUP_LIMIT:
                raise SimulationDiverged(step + 1)
            if step >= burn_in * m and (step + 1 - burn_in * m) % m == 0:
                acc += f(x)
        out[g0 : g0 + len(ids)] = acc / n
    return out


def concentration_audit_linear(
    basis: DriftBasis,
    theta0: SparseParam | np.ndarray,
    L: float,
    M: float,
    f: Callable[[np.ndarray], np.ndarray],
    f_lip: float,
    r_grid: Sequence[float],
    n: int,
    delta_n: float,
    reps: int,
    seed: int,
    substeps: int = 1,
    burn_in: int | None = None,
    x0: float = 0.0,
    calibration_steps: int | None = None,
) -> AuditTable:
    """Audit the additive-functional tail bound by Monte Carlo.

    ``f`` maps a batch of states (m, d) to (m,) and must be 1-Lipschitz after
    dividing by ``f_lip``.  The unknown mean of f is estimated from one long
    calibration run on a dedicated stream (replication id ``reps``); each
    audited replication then contributes the exceedance indicator of its
    trajectory average over each r in the grid.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    vals = theta0.values if isinstance(theta0, SparseParam) else np.asarray(theta0, float)
    if burn_in is None:
        burn_in = math.ceil(0.1 * n)
    calib_n = calibration_steps or max(4 * n, 5000)
    x0_vec = np.full(basis.d, float(x0))
    mean_est = float(
        _batched_euler_f_average(
            basis, vals, x0_vec, calib_n, delta_n, substeps, burn_in, f, [reps], seed
        )[0]
    )
    averages = _batched_euler_f_average(
        basis, vals, x0_vec, n, delta_n, substeps, burn_in, f, list(range(reps)), seed
    )
    deviations = averages - mean_est
    empirical = np.array([np.mean(deviations > r) for r in r_grid])
    bound = linear_tail_bound(r_grid, n, delta_n, basis.d, f_lip, L, M)
    se = np.sqrt(empirical * (1.0 - empirical) / reps)
    return AuditTable(x=r_grid, empirical=empirical, bound=bound, se=se, reps=reps)


def concentration_audit_ou(
    ou: OUModel,
    n: int,
    delta_n: float,
    x_grid: Sequence[float],
    reps: int,
    seed: int,
    n_directions: int = 16,
) -> AuditTable:
    """Audit P(|v^T (C_T - C_inf) v| > x) <= 2 exp(-n Dn H0(x)) by Monte Carlo.

    Unit directions v are sampled uniformly once; the reported empirical
    column is the max over directions of the per-direction exceedance
    frequency, with its binomial standard error.
    """
    if reps < 100:
        raise ValueError("need at least 100 replications")
    x_grid = np.asarray(x_grid, dtype=float)
    d = ou.d
    dir_gen = rng.stream(seed, rng.DIRECTIONS)
    v = dir_gen.standard_normal((n_directions, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    targets = np.einsum("vd,de,ve->v", v, ou.c_inf, v)

    decay, sigma, c_inf = _ou_step(ou.A, delta_n)
    sqrt_sigma = _sym_sqrt(sigma)
    sqrt_cinf = _sym_sqrt(c_inf)

    deviations = np.empty((reps, n_directions))
    group = 256
    for g0 in range(0, reps, group):
        ids = range(g0, min(g0 + group, reps))
        g = len(ids)
        z0 = np.empty((g, d))
        eta = np.empty((g, n, d))
        for j, r in enumerate(ids):
            gen = rng.stream(seed ^ r, rng.PATH)
            z0[j] = gen.standard_normal(d)
            eta[j] = gen.standard_normal((n, d))
        x = z0 @ sqrt_cinf.T
        eta = eta @ sqrt_sigma.T
        acc = np.zeros((g, n_directions))
        for t in range(n):
            proj = x @ v.T
            acc += proj * proj
            x = x @ decay.T + eta[:, t]
        deviations[g0 : g0 + g] = np.abs(acc / n - targets)

    exceed = deviations[:, :, None] > x_grid[None, None, :]  # (reps, v, x)
    freq = exceed.mean(axis=0)  # (v, x)
    empirical = freq.max(axis=0)
    se = np.sqrt(empirical * (1.0 - empirical) / reps)
    bound = ou_tail_bound(x_grid, n, delta_n, ou)
    return AuditTable(x=x_grid, empirical=empirical, bound=bound, se=se, reps=reps)


# ---------------------------------------------------------------------------
# Oracle inequality audit
# ---------------------------------------------------------------------------


def oracle_bound(lam: float, s: int, gamma: float, k: float, delta_n: float) -> float:
    """4 lambda^2 s (2+gamma)^2 / (k^2 gamma Dn^2), the prediction-error bound at theta0."""
    return 4.0 * lam**2 * s * (2.0 + gamma) ** 2 / (k**2 * gamma * delta_n**2)


def oracle_replication_ou(
    A: np.ndarray,
    lam: float,
    k: float,
    gamma: float,
    s: int,
    n: int,
    delta_n: float,
    seed: int,
    config: LassoConfig | None = None,
    stationary_init: bool = True,
) -> tuple[float, float, bool]:
    """(lhs, rhs, holds) for one replication of the interaction-matrix model.

    lhs is the empirical-norm prediction error tr((A_hat - A) C_T
    (A_hat - A)^T), identical to the quadratic-form error of the stacked
    parameter vector.
    """
    traj = simulate_ou_exact(A, n, delta_n, seed=seed, stationary_init=stationary_init)
    est = lasso_ou(traj, lam, config)
    err = est.A_hat - np.asarray(A, float)
    c_t = traj.states[:-1].T @ traj.states[:-1] / traj.n
    lhs = float(np.trace(err @ c_t @ err.T))
    rhs = oracle_bound(lam, s, gamma, k, delta_n)
    return lhs, rhs, lhs <= rhs


def oracle_replication_linear(
    basis: DriftBasis,
    theta0: SparseParam | np.ndarray,
    lam: float,
    k: float,
    gamma: float,
    s: int,
    n: int,
    delta_n: float,
    seed: int,
    substeps: int = 10,
    burn_in: int = 0,
    config: LassoConfig | None = None,
) -> tuple[float, float, bool]:
    vals = theta0.values if isinstance(theta0, SparseParam) else np.asarray(theta0, float)
    traj, _ = simulate_linear(
        basis, vals, 0.0, n, delta_n, substeps=substeps, seed=seed, burn_in=burn_in
    )
    gs = build_gram(traj, basis)
    res = lasso_solve(gs, lam, config)
    err = res.theta_hat - vals
    lhs = float(err @ gs.gram @ err)
    rhs = oracle_bound(lam, s, gamma, k, delta_n)
    return lhs, rhs, lhs <= rhs


def oracle_audit(
    model: OUParam | np.ndarray | tuple[DriftBasis, np.ndarray],
    lam: float,
    k: float,
    gamma: float,
    *,
    n: int,
    delta_n: float,
    reps: int,
    seed: int,
    s: int | None = None,
    l: float | None = None,
    config: LassoConfig | None = None,
) -> float:
    """Fraction of replications on which the prediction-error bound at theta0 holds.

    ``model`` is an interaction matrix (exact transitions) or a
    (basis, theta0) pair (Euler sampling).  Rejects k^2 >= l when the
    restricted-eigenvalue bound l is supplied or derivable.
    """
    if reps < 20:
        raise ValueError("need at least 20 replications")
    if l is not None and k**2 >= l:
        raise ValueError("need k^2 < l")
    hold = 0
    if isinstance(model, (OUParam, np.ndarray)):
        a_mat = model.A if isinstance(model, OUParam) else np.asarray(model, float)
        if s is None:
            s = int(np.count_nonzero(a_mat))
        for r in range(reps):
            _, _, ok = oracle_replication_ou(
                a_mat, lam, k, gamma, s, n, delta_n, seed ^ r, config
            )
            hold += ok
    else:
        basis, theta0 = model
        vals = theta0.values if isinstance(theta0, SparseParam) else np.asarray(theta0, float)
        if s is None:
            s = int(np.count_nonzero(vals))
        for r in range(reps):
            _, _, ok = oracle_replication_linear(
                basis, vals, lam, k, gamma, s, n, delta_n, seed ^ r, config=config
            )
            hold += ok
    return hold / reps


# ---------------------------------------------------------------------------
# Rate regimes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateRegime:
    value: float
    tag: str  # discretization-dominated | martingale-dominated | boundary


def rate_regime(
    d: int, n: int, delta_n: float, s: int | None = None, model: str = "linear"
) -> RateRegime:
    """Which error source dominates the convergence rate at these sizes.

    The split is driven by s^2 d n Dn^2 (linear) or d^2 n Dn^2 (OU): large
    values mean the discretization bias dominates, small values mean the
    martingale fluctuation does; within a factor 10 of 1 is tagged boundary.
    """
    if min(d, n) < 1 or delta_n <= 0:
        raise ValueError("inputs must be positive")
    if model == "linear":
        if s is None or s < 1:
            raise ValueError("linear regime needs s >= 1")
        value = s**2 * d * n * delta_n**2
    elif model == "ou":
        value = d**2 * n * delta_n**2
    else:
        raise ValueError("model must be 'linear' or 'ou'")
    if value > 10.0:
        tag = "discretization-dominated"
    elif value < 0.1:
        tag = "martingale-dominated"
    else:
        tag = "boundary"
    return RateRegime(value=float(value), tag=tag)
