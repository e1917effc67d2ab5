"""Trajectory samplers and Ornstein-Uhlenbeck stationary structure.

Two samplers:

* ``simulate_linear`` -- Euler-Maruyama for dX = -b_theta(X) dt + dW at a fine
  step delta = Delta_n / m, observed every m sub-steps.  Optionally records
  the coarse Brownian increments and the fine sub-path, which the theory
  audits need.
* ``simulate_ou_exact`` -- exact Gaussian transitions X_{i+1} = e^{-A Dt} X_i
  + eta_i with eta_i ~ N(0, Sigma_Dt), so rate-regime audits see no
  integrator bias.  When Brownian increments are requested they are drawn
  from the exact joint law of (DW, eta); the state path itself is unchanged
  by instrumentation.

The stationary covariance C of dX = -A X dt + dW solves A C + C A^T = I; it
is obtained from the Kronecker linearization for d <= 64 (O(d^6) memory/work,
trivial at audit scale and free of iteration error) and from the
Bartels-Stewart solver beyond that (O(d^3)).

Everything is deterministic per (config, seed): noise comes from counter-based
Philox streams keyed by seed and purpose, see ``rng``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import rng
from .errors import (
    DiagonalizationFailed,
    NumericDegeneracy,
    SimulationDiverged,
    UnstableMatrix,
)
from .model import DriftBasis, SparseParam

BLOWUP_LIMIT = 1e8
LYAPUNOV_TOL = 1e-10
_KRONECKER_MAX_DIM = 64


@dataclass(frozen=True)
class Trajectory:
    """Discretely observed path: states X_{t_0}..X_{t_n}, step delta_n."""

    states: np.ndarray  # (n+1, d)
    delta_n: float
    seed: int | None = None

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 2:
            raise ValueError("states must be an (n+1) x d array with n >= 1")
        if not np.all(np.isfinite(states)):
            raise ValueError("states must be finite")
        if self.delta_n <= 0:
            raise ValueError("delta_n must be positive")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def n(self) -> int:
        return self.states.shape[0] - 1

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @property
    def T(self) -> float:
        return self.n * self.delta_n

    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.delta_n

    def increments(self) -> np.ndarray:
        return np.diff(self.states, axis=0)


@dataclass(frozen=True)
class NoiseRecord:
    """Brownian increments per coarse interval and optional fine sub-path.

    ``coarse_dw[i]`` aggregates the interval [t_i, t_{i+1}]; when present,
    ``fine_states[i]`` holds the m+1 states of that interval at sub-step
    delta_n / m (both endpoints included).
    """

    coarse_dw: np.ndarray  # (n, d)
    fine_states: np.ndarray | None = None  # (n, m+1, d)
    substeps: int = 1

    def __post_init__(self):
        dw = np.array(self.coarse_dw, dtype=float)
        dw.setflags(write=False)
        object.__setattr__(self, "coarse_dw", dw)
        if self.fine_states is not None:
            fine = np.array(self.fine_states, dtype=float)
            fine.setflags(write=False)
            object.__setattr__(self, "fine_states", fine)


@dataclass(frozen=True)
class RecordFlags:
    noise: bool = False
    fine: bool = False

    def __bool__(self) -> bool:
        return self.noise or self.fine


@dataclass(frozen=True)
class OUModel:
    """Interaction matrix with its spectral constants and stationary covariance.

    m_frak: smallest real part among eigenvalues of A.
    p_frak: ||P||_op ||P^-1||_op for the unit-column eigenvector matrix P.
    l_min, l_max: extreme eigenvalues of the stationary covariance.
    a_frak: largest diagonal entry of the stationary covariance.
    """

    A: np.ndarray
    c_inf: np.ndarray
    m_frak: float
    p_frak: float
    l_min: float
    l_max: float
    a_frak: float

    def __post_init__(self):
        for name in ("A", "c_inf"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.A.shape[0]


# ---------------------------------------------------------------------------
# Linear-drift Euler sampler
# ---------------------------------------------------------------------------


def simulate_linear(
    basis: DriftBasis,
    theta0: SparseParam | np.ndarray,
    x0: np.ndarray | float,
    n: int,
    delta_n: float,
    substeps: int = 10,
    seed: int = 0,
    record: RecordFlags | None = None,
    burn_in: int = 0,
) -> tuple[Trajectory, NoiseRecord | None]:
    """Euler-Maruyama path of dX = -b_theta0(X) dt + dW observed every substep block.

    ``burn_in`` coarse steps are simulated and discarded before recording
    starts; the returned trajectory then has n+1 states.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if delta_n <= 0:
        raise ValueError("delta_n must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    vals = theta0.values if isinstance(theta0, SparseParam) else np.asarray(theta0, float)
    drift = basis.drift_fn(vals)
    record = record or RecordFlags()

    d = basis.d
    m = substeps
    delta = delta_n / m
    sqrt_delta = np.sqrt(delta)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (d,)).astype(float).copy()

    gen = rng.stream(seed, rng.PATH)
    noise = gen.standard_normal(((burn_in + n) * m, d))

    states = np.empty((n + 1, d))
    coarse_dw = np.zeros((n, d)) if record.noise else None
    fine_states = np.empty((n, m + 1, d)) if record.fine else None

    step = 0
    for _ in range(burn_in * m):
        x = x - drift(x) * delta + sqrt_delta * noise[step]
        step += 1
        if np.max(np.abs(x)) > BLOWUP_LIMIT:
            raise SimulationDiverged(step)

    states[0] = x
    for i in range(n):
        if record.fine:
            fine_states[i, 0] = x
        for k in range(m):
            incr = sqrt_delta * noise[step]
            x = x - drift(x) * delta + incr
            step += 1
            if np.max(np.abs(x)) > BLOWUP_LIMIT:
                raise SimulationDiverged(step)
            if record.noise:
                coarse_dw[i] += incr
            if record.fine:
                fine_states[i, k + 1] = x
        states[i + 1] = x

    traj = Trajectory(states=states, delta_n=delta_n, seed=seed)
    if not record:
        return traj, None
    rec = NoiseRecord(
        coarse_dw=coarse_dw if record.noise else np.full((n, d), np.nan),
        fine_states=fine_states,
        substeps=m,
    )
    return traj, rec


def euler_path(
    basis: DriftBasis,
    theta: np.ndarray,
    x0: np.ndarray,
    delta: float,
    increments: np.ndarray,
) -> np.ndarray:
    """Euler recursion driven by given Brownian increments; used for coupled runs."""
    drift = basis.drift_fn(np.asarray(theta, float))
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((increments.shape[0] + 1, x.size))
    out[0] = x
    for k in range(increments.shape[0]):
        x = x - drift(x) * delta + increments[k]
        if np.max(np.abs(x)) > BLOWUP_LIMIT:
            raise SimulationDiverged(k + 1)
        out[k + 1] = x
    return out


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck machinery
# ---------------------------------------------------------------------------


def _check_stable(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("A must be finite")
    eigs = np.linalg.eigvals(A)
    if np.min(eigs.real) <= 0:
        raise UnstableMatrix(
            f"spectral abscissa check failed: min real part {np.min(eigs.real):.3e} <= 0"
        )
    return A


def stationary_covariance(A: np.ndarray) -> np.ndarray:
    """Solve A C + C A^T = I for the stationary covariance of dX = -A X dt + dW."""
    A = _check_stable(A)
    d = A.shape[0]
    if d <= _KRONECKER_MAX_DIM:
        # Kronecker linearization: explicit O(d^6) solve; exact up to one LU,
        # preferable to iterative schemes at audit scale.
        eye = np.eye(d)
        lhs = np.kron(eye, A) + np.kron(A, eye)
        c = np.linalg.solve(lhs, eye.flatten(order="F")).reshape(d, d, order="F")
    else:
        # Bartels-Stewart (O(d^3)) once Kronecker memory would be prohibitive.
        c = scipy.linalg.solve_continuous_lyapunov(A, np.eye(d))
    c = 0.5 * (c + c.T)
    residual = np.max(np.abs(A @ c + c @ A.T - np.eye(d)))
    if residual > LYAPUNOV_TOL:
        raise NumericDegeneracy(f"Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_TOL}")
    return c


def transition_covariance(A: np.ndarray, dt: float) -> np.ndarray:
    """Covariance of the exact OU transition over a step of length dt.

    Sigma_dt = C_inf - e^{-A dt} C_inf e^{-A^T dt}; tends to C_inf as
    dt -> infinity and to dt * I as dt -> 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    A = _check_stable(A)
    c_inf = stationary_covariance(A)
    decay = scipy.linalg.expm(-A * dt)
    sigma = c_inf - decay @ c_inf @ decay.T
    sigma = 0.5 * (sigma + sigma.T)
    w = np.linalg.eigvalsh(sigma)
    if w.min() < -1e-10:
        raise NumericDegeneracy(f"transition covariance indefinite: min eigenvalue {w.min():.3e}")
    return sigma


def _sym_sqrt(mat: np.ndarray, tol: float = -1e-10) -> np.ndarray:
    """Symmetric square root via eigendecomposition; rejects real indefiniteness."""
    mat = 0.5 * (mat + mat.T)
    w, u = np.linalg.eigh(mat)
    if w.min() < tol * max(1.0, abs(w.max())):
        raise NumericDegeneracy(f"matrix not PSD within tolerance: min eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.T


def _ou_step(A: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(e^{-A dt}, Sigma_dt, C_inf) for the exact transition."""
    c_inf = stationary_covariance(A)
    decay = scipy.linalg.expm(-A * dt)
    sigma = c_inf - decay @ c_inf @ decay.T
    sigma = 0.5 * (sigma + sigma.T)
    return decay, sigma, c_inf


def simulate_ou_exact(
    A: np.ndarray,
    n: int,
    delta_n: float,
    seed: int = 0,
    stationary_init: bool = True,
    *,
    substeps: int = 1,
    record: RecordFlags | None = None,
    x0: np.ndarray | None = None,
) -> Trajectory | tuple[Trajectory, NoiseRecord]:
    """Exact OU path; returns (Trajectory, NoiseRecord) when record flags are set.

    The innovation eta_i is drawn via the symmetric square root of Sigma.
    With ``record.noise`` the Brownian increment of each fine step is sampled
    from its exact conditional law given eta (cross-covariance
    Psi = A^{-1}(I - e^{-A dt})), using a separate auxiliary stream, so the
    state path is bitwise-identical with and without instrumentation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if delta_n <= 0:
        raise ValueError("delta_n must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    A = _check_stable(A)
    d = A.shape[0]
    m = substeps
    dt = delta_n / m
    record = record or RecordFlags()

    decay, sigma, c_inf = _ou_step(A, dt)
    sqrt_sigma = _sym_sqrt(sigma)

    gen = rng.stream(seed, rng.PATH)
    if x0 is not None:
        x = np.asarray(x0, dtype=float).copy()
    elif stationary_init:
        x = _sym_sqrt(c_inf) @ gen.standard_normal(d)
    else:
        x = np.zeros(d)

    eta = gen.standard_normal((n * m, d)) @ sqrt_sigma.T

    dw_fine = None
    if record.noise:
        # DW | eta ~ N(B eta, dt I - B Psi) with B = Psi^T Sigma^{-1}
        psi = np.linalg.solve(A, np.eye(d) - decay)
        b_cond = np.linalg.solve(sigma, psi).T
        cond_cov = dt * np.eye(d) - b_cond @ psi
        sqrt_cond = _sym_sqrt(cond_cov)
        aux = rng.stream(seed, rng.NOISE_AUX)
        dw_fine = eta @ b_cond.T + aux.standard_normal((n * m, d)) @ sqrt_cond.T

    states = np.empty((n + 1, d))
    states[0] = x
    coarse_dw = np.zeros((n, d)) if record.noise else None
    fine_states = np.empty((n, m + 1, d)) if record.fine else None

    step = 0
    for i in range(n):
        if record.fine:
            fine_states[i, 0] = x
        for k in range(m):
            x = decay @ x + eta[step]
            if record.noise:
                coarse_dw[i] += dw_fine[step]
            if record.fine:
                fine_states[i, k + 1] = x
            step += 1
        states[i + 1] = x

    traj = Trajectory(states=states, delta_n=delta_n, seed=seed)
    if not record:
        return traj
    rec = NoiseRecord(
        coarse_dw=coarse_dw if record.noise else np.full((n, d), np.nan),
        fine_states=fine_states,
        substeps=m,
    )
    return traj, rec


def ou_spectral_constants(A: np.ndarray) -> OUModel:
    """Diagonalize A and collect the constants the OU bounds depend on."""
    A = np.asarray(A, dtype=float)
    eigvals, eigvecs = np.linalg.eig(A)
    cond = np.linalg.cond(eigvecs)
    if not np.isfinite(cond) or cond > 1e12:
        raise DiagonalizationFailed(
            f"eigenvector matrix condition {cond:.3e} exceeds 1e12; A is (near) defective"
        )
    m_frak = float(np.min(eigvals.real))
    if m_frak <= 0:
        raise UnstableMatrix(f"minimum eigenvalue real part {m_frak:.3e} <= 0")
    p_frak = float(np.linalg.norm(eigvecs, 2) * np.linalg.norm(np.linalg.inv(eigvecs), 2))
    c_inf = stationary_covariance(A)
    cov_eigs = np.linalg.eigvalsh(c_inf)
    return OUModel(
        A=A,
        c_inf=c_inf,
        m_frak=m_frak,
        p_frak=p_frak,
        l_min=float(cov_eigs.min()),
        l_max=float(cov_eigs.max()),
        a_frak=float(np.max(np.diag(c_inf))),
    )


# ---------------------------------------------------------------------------
# Trajectory import/export
# ---------------------------------------------------------------------------

_BINARY_MAGIC = b"SDTJ"
# Little-endian layout: magic, u64 n_states, u64 d, f64 delta_n, i64 seed
# (-1 when unknown), then n_states*d row-major f64 states.
_HEADER = struct.Struct("<4sQQdq")


def trajectory_to_csv(traj: Trajectory, path: str) -> None:
    """CSV with header t,x_1..x_d, one row per observation time, LF endings."""
    cols = ",".join(f"x_{j + 1}" for j in range(traj.d))
    times = traj.times()
    with open(path, "w", newline="") as fh:
        fh.write(f"t,{cols}\n")
        for i in range(traj.n + 1):
            row = ",".join(repr(float(v)) for v in traj.states[i])
            fh.write(f"{repr(float(times[i]))},{row}\n")


def trajectory_from_csv(path: str) -> Trajectory:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data.reshape(1, -1)
    times = data[:, 0]
    if len(times) < 2:
        raise ValueError("trajectory file must contain at least two observations")
    delta = float(times[1] - times[0])
    if delta <= 0 or np.max(np.abs(np.diff(times) - delta)) > 1e-9 * max(delta, 1.0):
        raise ValueError("observation times must be uniformly spaced")
    return Trajectory(states=data[:, 1:], delta_n=delta, seed=None)


def trajectory_to_binary(traj: Trajectory, path: str) -> None:
    seed = -1 if traj.seed is None else int(traj.seed)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_BINARY_MAGIC, traj.n + 1, traj.d, traj.delta_n, seed))
        fh.write(np.ascontiguousarray(traj.states, dtype="<f8").tobytes())


def trajectory_from_binary(path: str) -> Trajectory:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, n_states, d, delta_n, seed = _HEADER.unpack(head)
        if magic != _BINARY_MAGIC:
            raise ValueError("not a trajectory container")
        raw = fh.read(int(n_states) * int(d) * 8)
    states = np.frombuffer(raw, dtype="<f8").reshape(int(n_states), int(d))
    return Trajectory(states=states, delta_n=delta_n, seed=None if seed < 0 else int(seed))
