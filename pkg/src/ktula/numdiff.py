"""Central finite differences, the independent check for every analytic
gradient, Hessian and drift Jacobian in the package."""

import numpy as np


def gradient(f, theta, step=1e-5):
    """Central-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * step)
    return g


def jacobian(f, theta, step=1e-5):
    """Central-difference Jacobian of a vector function, row = output index."""
    theta = np.asarray(theta, dtype=np.float64)
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        cols.append((np.asarray(f(theta + e)) - np.asarray(f(theta - e))) / (2.0 * step))
    return np.stack(cols, axis=1)


def max_relative_error(approx, exact, floor=1.0):
    """max_ij |approx - exact| / max(floor, |exact|), elementwise."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = np.maximum(np.abs(exact), floor)
    return float(np.max(np.abs(approx - exact) / denom))
