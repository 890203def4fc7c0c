import numpy as np
import pytest

from fairshift import losses, network
from fairshift.data import Dataset
from fairshift.errors import TrainingDiverged, ValidationError
from fairshift.losses import GradientVector, PerturbationConfig, TrainConfig


def separable_toy(n=100, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([rng.normal([2.0, 2.0], 0.5, (half, 2)),
                   rng.normal([-2.0, -2.0], 0.5, (half, 2))])
    y = np.r_[np.ones(half, dtype=int), np.zeros(half, dtype=int)]
    a = rng.integers(0, 2, size=n)
    a[:2] = [0, 1]
    return Dataset(X, y, a)


def erm_only_loop(ds, hidden, cfg):
    """Training loop with the fairness terms physically deleted."""
    rng = np.random.default_rng(cfg.seed)
    params = network.init_params((ds.d, *hidden, 1), rng=rng)
    state = network.init_adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    for _ in range(cfg.epochs):
        grad = losses.clf_gradient(params, ds, cfg.loss_variant)
        params, state = network.adam_step(state, params, grad)
    return params


class TestTrain:
    def test_lambda_zero_is_bitwise_erm(self):
        ds = separable_toy(seed=1)
        cfg = TrainConfig(lam=0.0, epochs=40, seed=7, lr=0.01,
                          perturbation=PerturbationConfig(0.1, 2.0))
        got = losses.train(ds, hidden=(6,), cfg=cfg).params
        want = erm_only_loop(ds, (6,), cfg)
        assert np.array_equal(got.flatten(), want.flatten())

    def test_separable_toy_reaches_high_accuracy(self):
        ds = separable_toy(seed=2)
        cfg = TrainConfig(lam=0.0, epochs=500, seed=3, lr=0.05)
        result = losses.train(ds, hidden=(8,), cfg=cfg)
        pred = network.forward(result.params, ds.X)
        assert np.mean((pred >= 0.5) == ds.y) >= 0.95

    def test_same_seed_same_config_is_bit_identical(self):
        ds = separable_toy(seed=3)
        cfg = TrainConfig(lam=0.5, epochs=30, seed=11, lr=0.02,
                          perturbation=PerturbationConfig(0.05, 2.0))
        one = losses.train(ds, hidden=(5,), cfg=cfg)
        two = losses.train(ds, hidden=(5,), cfg=cfg)
        assert np.array_equal(one.params.flatten(), two.params.flatten())
        assert one.trace == two.trace

    def test_trace_totals_recompute_from_parts(self):
        ds = separable_toy(seed=4)
        cfg = TrainConfig(lam=2.0, epochs=10, seed=5, lr=0.02,
                          perturbation=PerturbationConfig(0.02, 2.0))
        result = losses.train(ds, hidden=(4,), cfg=cfg)
        assert len(result.trace) == cfg.epochs
        for bd in result.trace:
            want = bd.clf + cfg.lam * (bd.dp + bd.rfr_s0 + bd.rfr_s1)
            assert bd.total == pytest.approx(want, abs=1e-12)

    def test_robust_term_changes_the_run(self):
        ds = separable_toy(seed=5)
        base = TrainConfig(lam=1.0, epochs=30, seed=9, lr=0.02,
                           perturbation=PerturbationConfig(0.0, 2.0))
        robust = TrainConfig(lam=1.0, epochs=30, seed=9, lr=0.02,
                             perturbation=PerturbationConfig(0.1, 2.0))
        a = losses.train(ds, hidden=(5,), cfg=base).params
        b = losses.train(ds, hidden=(5,), cfg=robust).params
        assert not np.array_equal(a.flatten(), b.flatten())

    def test_unscaled_update_variant_differs_from_default(self):
        ds = separable_toy(seed=6)
        kwargs = dict(lam=1.0, epochs=10, seed=2, lr=0.02,
                      perturbation=PerturbationConfig(0.05, 2.0))
        default = losses.train(ds, hidden=(4,), cfg=TrainConfig(**kwargs)).params
        literal = losses.train(
            ds, hidden=(4,), cfg=TrainConfig(unscaled_robust_update=True, **kwargs)
        ).params
        assert not np.array_equal(default.flatten(), literal.flatten())

    def test_minibatches_are_stratified_and_deterministic(self):
        ds = separable_toy(seed=7)
        rng = np.random.default_rng(0)
        batches = list(losses._batches(ds, 16, rng))
        assert sum(b.n for b in batches) == ds.n
        for b in batches:
            assert b.group_count(0) > 0 and b.group_count(1) > 0
        cfg = TrainConfig(lam=0.3, epochs=15, seed=13, lr=0.02, batch_size=16)
        one = losses.train(ds, hidden=(4,), cfg=cfg).params
        two = losses.train(ds, hidden=(4,), cfg=cfg).params
        assert np.array_equal(one.flatten(), two.flatten())

    def test_divergence_aborts_with_epoch_index(self):
        ds = separable_toy(seed=8)
        cfg = TrainConfig(lam=0.0, epochs=3000, seed=0, lr=1.0, weight_decay=-3.0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingDiverged) as err:
                losses.train(ds, hidden=(4,), cfg=cfg)
        assert 0 <= err.value.epoch < 3000

    def test_single_label_dataset_rejected(self):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.normal(size=(10, 2)), np.ones(10, dtype=int),
                     np.r_[np.zeros(5, dtype=int), np.ones(5, dtype=int)])
        with pytest.raises(ValidationError):
            losses.train(ds, hidden=(3,), cfg=TrainConfig(epochs=1))
