"""Shared helpers: random stable matrices, PD Gram systems, quadrature oracles."""

import math

import numpy as np
import scipy.linalg

from sparsedrift.estimate import GramSystem


def random_stable_matrix(rng: np.random.Generator, d: int, margin: float = 0.3) -> np.ndarray:
    """Random matrix with all eigenvalue real parts >= margin."""
    a = rng.normal(size=(d, d)) / np.sqrt(d)
    shift = margin - min(np.linalg.eigvals(a).real.min(), 0.0)
    return a + shift * np.eye(d)


def random_pd_gram(rng: np.random.Generator, p: int, delta_n: float | None = None) -> GramSystem:
    """Well-conditioned random Gram system (min eigenvalue >= 0.1)."""
    b = rng.normal(size=(2 * p, p))
    g = b.T @ b / (2 * p) + 0.1 * np.eye(p)
    return GramSystem(
        gram=g,
        linear=rng.normal(size=p),
        constant=float(rng.normal()),
        delta_n=delta_n if delta_n is not None else float(rng.uniform(0.3, 1.0)),
    )


def _panel_integral(a_mat: np.ndarray, s0: float, s1: float) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(12)
    mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
    total = np.zeros_like(a_mat)
    for x, w in zip(nodes, weights):
        e = scipy.linalg.expm(-a_mat * (mid + half * x))
        total += w * half * (e @ e.T)
    return total


def quadrature_exp_integral(
    a_mat: np.ndarray, upper: float | None = None, panel: float = 0.25
) -> np.ndarray:
    """Composite Gauss-Legendre quadrature of int_0^upper e^{-sA} e^{-sA^T} ds.

    For upper=None the integral is truncated once the integrand norm falls
    below 1e-14.  Independent oracle for the Lyapunov/transition solvers.
    """
    a_mat = np.asarray(a_mat, dtype=float)
    total = np.zeros_like(a_mat)
    if upper is not None:
        n_panels = max(1, math.ceil(upper / panel))
        edges = np.linspace(0.0, upper, n_panels + 1)
        for s0, s1 in zip(edges[:-1], edges[1:]):
            total += _panel_integral(a_mat, s0, s1)
        return total
    s0 = 0.0
    while True:
        total += _panel_integral(a_mat, s0, s0 + panel)
        s0 += panel
        tail = scipy.linalg.expm(-a_mat * s0)
        if np.max(np.abs(tail @ tail.T)) < 1e-14:
            return total
