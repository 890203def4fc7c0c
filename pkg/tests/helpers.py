"""Shared oracles for the test suite: finite differences, tiny nets, toy data."""

import numpy as np

from fairshift import network
from fairshift.data import Dataset


def central_difference(fn, theta, step=1e-5):
    """Central finite-difference gradient of a scalar function of a flat vector."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        up[i] += step
        down = theta.copy()
        down[i] -= step
        grad[i] = (fn(up) - fn(down)) / (2.0 * step)
    return grad


def relative_error(got, want):
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    denom = max(float(np.linalg.norm(want)), 1e-12)
    return float(np.linalg.norm(got - want)) / denom


def small_net(sizes=(3, 4, 3, 1), seed=0):
    return network.init_params(sizes, seed=seed)


def random_dataset(n=20, d=3, seed=0, ensure_groups=True, ensure_labels=True):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    a = rng.integers(0, 2, size=n)
    if ensure_groups:
        a[0], a[1] = 0, 1
    if ensure_labels:
        y[0], y[1] = 0, 1
    return Dataset(X, y, a)
