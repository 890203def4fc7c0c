import math

import numpy as np
import pytest

from fairshift import shiftgen
from fairshift.data import Dataset
from fairshift.errors import DegenerateVarianceError, SampleSizeError
from fairshift.shiftgen import ShiftConfig, biased_sample, first_pc, gaussian_weights


def toy_dataset(X, seed=0):
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    y = rng.integers(0, 2, n)
    a = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    a[:2] = [0, 1]
    return Dataset(X, y, a)


class TestFirstPc:
    def test_axis_aligned_data(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([rng.normal(size=50), np.zeros(50)])
        proj = first_pc(X)
        assert np.allclose(proj.direction, [1.0, 0.0], atol=1e-8)

    def test_two_point_diagonal_data(self):
        X = np.array([[1.0, 1.0], [-1.0, -1.0]])
        proj = first_pc(X)
        assert np.allclose(proj.direction, [math.sqrt(0.5), math.sqrt(0.5)], atol=1e-10)

    def test_projected_variance_matches_dense_eigensolve(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(200, 5)) @ rng.normal(size=(5, 5))
        proj = first_pc(X)
        centered = X - X.mean(axis=0)
        cov = centered.T @ centered / X.shape[0]
        top = float(np.linalg.eigvalsh(cov)[-1])
        measured = float(np.var(centered @ proj.direction))
        assert measured == pytest.approx(top, abs=1e-8)

    def test_beats_random_directions(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(100, 4)) * np.array([3.0, 1.0, 0.5, 0.1])
        proj = first_pc(X)
        centered = X - X.mean(axis=0)
        best = float(np.var(centered @ proj.direction))
        for _ in range(200):
            v = rng.normal(size=4)
            v /= np.linalg.norm(v)
            assert float(np.var(centered @ v)) <= best + 1e-10

    def test_direction_is_unit_and_sign_fixed(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 3))
        proj = first_pc(X)
        assert np.linalg.norm(proj.direction) == pytest.approx(1.0, abs=1e-10)
        assert proj.direction[int(np.argmax(np.abs(proj.direction)))] > 0

    def test_zero_variance_rejected(self):
        with pytest.raises(DegenerateVarianceError):
            first_pc(np.ones((10, 3)))


class TestGaussianWeights:
    def test_no_shift_means_identical_weight_vectors(self):
        values = np.random.default_rng(4).normal(size=30)
        plain = gaussian_weights(values, 0.0, 1.0)
        shifted = gaussian_weights(values, 0.0 + 0.0, 1.0 / 1.0)
        assert np.array_equal(plain, shifted)

    def test_weight_at_the_shifted_mode_is_the_peak_density(self):
        mu, sigma, alpha, beta = 0.3, 1.2, 3.0, 6.0
        got = gaussian_weights(np.array([mu + alpha]), mu + alpha, sigma / beta)[0]
        assert got == pytest.approx(1.0 / ((sigma / beta) * math.sqrt(2 * math.pi)), rel=1e-12)


class TestBiasedSample:
    def make(self, n=300, seed=5):
        rng = np.random.default_rng(seed)
        X = np.column_stack([rng.normal(scale=2.0, size=n), rng.normal(size=n)])
        return toy_dataset(X, seed=seed)

    def test_source_and_target_are_disjoint_and_sized(self):
        ds = self.make()
        proj = first_pc(ds.X)
        cfg = ShiftConfig(alpha=1.0, beta=2.0, n_source=100, n_target=100, seed=0)
        src, tgt = biased_sample(ds, proj, cfg)
        assert src.n == 100 and tgt.n == 100
        src_rows = {tuple(r) for r in src.X}
        tgt_rows = {tuple(r) for r in tgt.X}
        assert not src_rows & tgt_rows

    def test_shift_direction_follows_alpha_over_seeds(self):
        ds = self.make(n=400, seed=6)
        proj = first_pc(ds.X)
        wins = 0
        for seed in range(20):
            cfg = ShiftConfig(alpha=3.0, beta=6.0, n_source=100, n_target=100, seed=seed)
            src, tgt = biased_sample(ds, proj, cfg)
            if (src.X @ proj.direction).mean() > (tgt.X @ proj.direction).mean():
                wins += 1
        assert wins == 20

    def test_orientation_flag_swaps_the_shifted_side(self):
        ds = self.make(n=400, seed=7)
        proj = first_pc(ds.X)
        cfg = ShiftConfig(alpha=3.0, beta=6.0, n_source=100, n_target=100, seed=1,
                          swap_orientation=True)
        src, tgt = biased_sample(ds, proj, cfg)
        assert (tgt.X @ proj.direction).mean() > (src.X @ proj.direction).mean()

    def test_deterministic_under_fixed_seed(self):
        ds = self.make()
        proj = first_pc(ds.X)
        cfg = ShiftConfig(alpha=1.5, beta=3.0, n_source=80, n_target=80, seed=9)
        one = biased_sample(ds, proj, cfg)
        two = biased_sample(ds, proj, cfg)
        for lhs, rhs in zip(one, two):
            assert np.array_equal(lhs.X, rhs.X)
            assert np.array_equal(lhs.y, rhs.y)

    def test_oversized_request_rejected(self):
        ds = self.make(n=50)
        proj = first_pc(ds.X)
        with pytest.raises(SampleSizeError):
            biased_sample(ds, proj, ShiftConfig(1.0, 2.0, n_source=40, n_target=20, seed=0))

    def test_no_shift_is_indistinguishable_from_random_splits(self):
        ds = self.make(n=300, seed=8)
        proj = first_pc(ds.X)
        rng = np.random.default_rng(0)
        null_diffs = []
        for _ in range(200):
            perm = rng.permutation(ds.n)
            s, t = perm[:100], perm[100:200]
            null_diffs.append(abs(proj.projected[s].mean() - proj.projected[t].mean()))
        cutoff = np.quantile(null_diffs, 0.95)
        below = 0
        for seed in range(10):
            cfg = ShiftConfig(alpha=0.0, beta=1.0, n_source=100, n_target=100, seed=seed)
            src, tgt = biased_sample(ds, proj, cfg)
            diff = abs((src.X @ proj.direction).mean() - (tgt.X @ proj.direction).mean())
            below += diff <= cutoff
        assert below >= 9
