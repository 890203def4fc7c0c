"""Synthetic covariate shift via biased sampling along the first principal component.

The generator projects every sample onto the leading principal direction of
the features, then draws a target subsample weighted by a Gaussian centered
at the projection mean and a source subsample (from the remaining pool)
weighted by a Gaussian whose mean is shifted by ``alpha`` and whose spread is
divided by ``beta``.  ``(alpha, beta) = (0, 1)`` makes the two weight
functions identical, i.e. no shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DegenerateVarianceError, NumericError, SampleSizeError, ValidationError


@dataclass(frozen=True)
class PCAProjection:
    """Leading principal direction plus the per-sample projections."""

    direction: np.ndarray
    projected: np.ndarray
    mu: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))
        object.__setattr__(self, "projected", np.asarray(self.projected, dtype=float))
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-10:
            raise ValidationError("principal direction must be a unit vector")
        if self.sigma <= 0:
            raise DegenerateVarianceError("projections have no spread")


@dataclass(frozen=True)
class ShiftConfig:
    """Biased-sampling knobs: shift intensity, sizes, seed, orientation.

    ``alpha`` shifts the mean of the biased Gaussian weight, ``beta`` divides
    its standard deviation.  By default the shifted Gaussian weighs the
    *source* draw and the unshifted one the *target* draw;
    ``swap_orientation`` flips which side gets the shifted weights.
    """

    alpha: float
    beta: float
    n_source: int
    n_target: int
    seed: int = 0
    swap_orientation: bool = False

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        if self.n_source < 1 or self.n_target < 1:
            raise ValidationError("sample counts must be positive")


def default_counts(n: int) -> tuple[int, int]:
    """Source/target sizes when unspecified: a third of the pool each."""
    return n // 3, n // 3


def first_pc(features: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> PCAProjection:
    """Leading principal component by power iteration on the covariance matrix.

    Iterates until successive direction estimates agree to ``tol`` in angle;
    the sign is fixed so the largest-magnitude coordinate is positive.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ValidationError("need a 2-D matrix with at least two samples")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / X.shape[0]
    if not np.any(np.abs(cov) > 0):
        raise DegenerateVarianceError("features have zero variance")

    d = X.shape[1]
    # deterministic start with a mild per-coordinate tilt to break symmetry
    v = 1.0 + 1e-3 * np.arange(d)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise DegenerateVarianceError("iterate fell into the covariance nullspace")
        w /= norm
        if w @ v < 0:
            w = -w
        if np.linalg.norm(w - v) <= tol:
            v = w
            break
        v = w
    else:
        raise NumericError("power iteration did not converge; leading eigenvalues may tie")

    if v[int(np.argmax(np.abs(v)))] < 0:
        v = -v
    projected = X @ v
    sigma = float(projected.std())
    if sigma <= 0:
        raise DegenerateVarianceError("projections collapse to a point")
    return PCAProjection(v, projected, float(projected.mean()), sigma)


def gaussian_weights(values: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian density at each value."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    z = (np.asarray(values, dtype=float) - mu) / sigma
    return np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


def weighted_sample_without_replacement(weights: np.ndarray, k: int,
                                        rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` distinct indices with probability proportional to weight.

    Exponential-keys method: one key Exp(1)/w per item, the k smallest win.
    Order-stable (ties resolve by index) and fully determined by the rng
    state.
    """
    w = np.asarray(weights, dtype=float)
    if k > w.size:
        raise SampleSizeError(f"cannot draw {k} of {w.size} items")
    keys = np.where(w > 0, rng.exponential(size=w.size) / np.where(w > 0, w, 1.0), np.inf)
    return np.sort(np.argsort(keys, kind="stable")[:k])


def biased_sample(ds: Dataset, proj: PCAProjection, cfg: ShiftConfig) -> tuple[Dataset, Dataset]:
    """Split a dataset into a biased source and target along the projection.

    The target is drawn first (weights from the Gaussian at ``(mu, sigma)``);
    the source comes from the remaining pool (weights from the Gaussian at
    ``(mu + alpha, sigma / beta)``), so the two index sets are disjoint.
    ``swap_orientation`` exchanges which side uses the shifted weights.
    """
    if proj.projected.shape[0] != ds.n:
        raise ValidationError("projection and dataset sizes disagree")
    if cfg.n_source + cfg.n_target > ds.n:
        raise SampleSizeError(
            f"requested {cfg.n_source}+{cfg.n_target} samples from a pool of {ds.n}"
        )
    plain = gaussian_weights(proj.projected, proj.mu, proj.sigma)
    shifted = gaussian_weights(proj.projected, proj.mu + cfg.alpha, proj.sigma / cfg.beta)
    target_w, source_w = (shifted, plain) if cfg.swap_orientation else (plain, shifted)

    rng = np.random.default_rng(cfg.seed)
    target_idx = weighted_sample_without_replacement(target_w, cfg.n_target, rng)
    pool = np.setdiff1d(np.arange(ds.n), target_idx)
    picked = weighted_sample_without_replacement(source_w[pool], cfg.n_source, rng)
    source_idx = pool[picked]

    note = (f"shift:alpha={cfg.alpha},beta={cfg.beta},seed={cfg.seed},"
            f"swapped={cfg.swap_orientation}")
    return (ds.subset(source_idx, f"{note} side=source"),
            ds.subset(target_idx, f"{note} side=target"))
