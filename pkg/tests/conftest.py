"""Shared helpers for the test suite: finite differences and random instances."""

import numpy as np


def central_difference(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function at x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def random_spd(rng, n, floor=0.1):
    """Random symmetric positive-definite matrix with eigenvalues >= floor."""
    M = rng.normal(size=(n, n))
    return M.T @ M + floor * np.eye(n)


def relative_gradient_error(analytic, numeric):
    """Scale-free gradient comparison: ||g_a - g_n|| / max(||g_a||, ||g_n||, 1e-12)."""
    analytic = np.asarray(analytic, dtype=float).ravel()
    numeric = np.asarray(numeric, dtype=float).ravel()
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)
