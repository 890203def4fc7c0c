"""The training loss stack and its optimization loop.

Three ingredients combine into the trained objective:

* a classification loss (the default is linear in the predicted probability,
  ``E[-y f - (1 - y)(1 - f)]``; binary cross-entropy is available too),
* a demographic-parity regularizer, the absolute gap between the two groups'
  mean predictions (soft, so it stays differentiable),
* a robustness penalty per group: the first-order worst-case increase of the
  group-mean prediction over an L_p ball of weight perturbations, whose
  maximizer has the closed dual-norm form
  ``eps* = rho * sign(g) * |g|^(q-1) / (||g||_q^q)^(1/p)`` with 1/p + 1/q = 1.

The total objective is ``clf + lam * (dp + robust_0 + robust_1)``; one Adam
step per batch descends its gradient, where the robustness gradient is
approximated by re-evaluating each group's mean-prediction gradient at the
perturbed weights (two extra forward/backward pairs per step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import Dataset
from .errors import (
    DegenerateGroupError,
    EmptyBatchError,
    NumericError,
    TrainingDiverged,
    ValidationError,
)
from . import network
from .network import GradientVector, ModelParams

LOSS_VARIANTS = ("linear", "cross-entropy")


@dataclass(frozen=True)
class PerturbationConfig:
    """L_p ball of radius ``rho`` in flattened parameter space."""

    rho: float
    p: float = 2.0

    def __post_init__(self):
        if self.rho < 0:
            raise ValidationError("rho must be nonnegative")
        if not (self.p > 1.0):
            raise ValidationError("p must exceed 1 (use math.inf for the max norm)")

    @property
    def q(self) -> float:
        """Conjugate exponent, 1/p + 1/q = 1 (q = 1 at p = inf)."""
        return 1.0 if math.isinf(self.p) else self.p / (self.p - 1.0)


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the data and architecture."""

    lam: float = 0.0
    epochs: int = 100
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    loss_variant: str = "linear"
    perturbation: PerturbationConfig = field(default_factory=lambda: PerturbationConfig(0.0))
    lr: float = 1e-5
    weight_decay: float = 0.01
    # Historical update variant: after the optimizer step, add the robustness
    # gradient to the iterate raw (no learning rate, ascending sign) instead
    # of descending it through the optimizer.  Off by default.
    unscaled_robust_update: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError("lam must be nonnegative")
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValidationError("batch_size must be positive when given")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ValidationError(f"loss_variant must be one of {LOSS_VARIANTS}")


@dataclass(frozen=True)
class LossBreakdown:
    clf: float
    dp: float
    rfr_s0: float
    rfr_s1: float
    total: float

    def to_dict(self) -> dict:
        return {"clf": self.clf, "dp": self.dp, "rfr_s0": self.rfr_s0,
                "rfr_s1": self.rfr_s1, "total": self.total}


class DualNormResult(NamedTuple):
    epsilon: np.ndarray
    flat_gradient: bool


class RobustTerms(NamedTuple):
    rfr_s0: float
    rfr_s1: float
    eps0: np.ndarray
    eps1: np.ndarray


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    trace: tuple[LossBreakdown, ...]


def default_rho(params: ModelParams, fraction: float = 0.05) -> float:
    """Ball radius as a fraction of the current parameter-vector norm.

    A sane starting point when no radius has been chosen yet; the experiment
    harness still requires an explicit value so that no run silently depends
    on this default.
    """
    return fraction * float(np.linalg.norm(params.flatten()))


def _require_nonempty(ds: Dataset) -> None:
    if ds.n == 0:
        raise EmptyBatchError("dataset has no rows")


def clf_loss(params: ModelParams, ds: Dataset, variant: str = "linear") -> float:
    """Classification loss over the dataset.

    ``linear`` rewards probability mass on the true class directly:
    ``E[-y f - (1 - y)(1 - f)]`` (-1 at perfectly confident correct
    predictions, -0.5 for the constant 0.5 predictor).  ``cross-entropy`` is
    the usual mean negative log-likelihood.
    """
    _require_nonempty(ds)
    f = network.forward(params, ds.X)
    y = ds.y
    if variant == "linear":
        return float(np.mean(-y * f - (1 - y) * (1.0 - f)))
    if variant == "cross-entropy":
        return float(-np.mean(y * np.log(f) + (1 - y) * np.log1p(-f)))
    raise ValidationError(f"unknown loss variant {variant!r}")


def clf_gradient(params: ModelParams, ds: Dataset, variant: str = "linear") -> GradientVector:
    """Exact parameter gradient of :func:`clf_loss`."""
    _require_nonempty(ds)
    n = ds.n
    y = ds.y
    if variant == "linear":
        dpred = (1.0 - 2.0 * y) / n
    elif variant == "cross-entropy":
        f = network.forward(params, ds.X)
        dpred = (f - y) / (f * (1.0 - f)) / n
    else:
        raise ValidationError(f"unknown loss variant {variant!r}")
    return network.backward_scalar(params, ds.X, dpred, origin="classification")


def group_mean(params: ModelParams, ds: Dataset, group: int) -> float:
    """Mean prediction over one sensitive-attribute group."""
    mask = ds.group_mask(group)
    if not mask.any():
        raise DegenerateGroupError(f"group a={group} is empty")
    return float(np.mean(network.forward(params, ds.X[mask])))


def group_mean_gradient(params: ModelParams, ds: Dataset, group: int) -> GradientVector:
    """Exact gradient of the group-mean prediction."""
    mask = ds.group_mask(group)
    ng = int(np.count_nonzero(mask))
    if ng == 0:
        raise DegenerateGroupError(f"group a={group} is empty")
    dpred = np.full(ng, 1.0 / ng)
    return network.backward_scalar(params, ds.X[mask], dpred, origin=f"group-mean({group})")


def dp_loss(params: ModelParams, ds: Dataset) -> float:
    """Soft demographic-parity gap: |mean prediction gap between groups|."""
    return abs(group_mean(params, ds, 0) - group_mean(params, ds, 1))


def dp_gradient(params: ModelParams, ds: Dataset) -> GradientVector:
    """Gradient of :func:`dp_loss`; the subgradient at a zero gap is zero."""
    for g in (0, 1):
        if ds.group_count(g) == 0:
            raise DegenerateGroupError(f"group a={g} is empty")
    f = network.forward(params, ds.X)
    mask0 = ds.group_mask(0)
    n0 = int(np.count_nonzero(mask0))
    n1 = ds.n - n0
    gap = float(np.mean(f[mask0]) - np.mean(f[~mask0]))
    s = float(np.sign(gap))
    dpred = np.where(mask0, s / n0, -s / n1)
    return network.backward_scalar(params, ds.X, dpred, origin="dp")


def dual_norm_epsilon(grad, cfg: PerturbationConfig) -> DualNormResult:
    """Closed-form maximizer of ``<g, eps>`` over the L_p ball of radius rho.

    ``eps* = rho * sign(g) * |g|^(q-1) / (||g||_q^q)^(1/p)``; for p = 2 this
    is ``rho * g / ||g||_2`` and for p = inf it is ``rho * sign(g)`` (with
    sign(0) = 0, since a coordinate the objective ignores at first order is
    not worth perturbing).  A zero gradient yields a zero vector with the
    ``flat_gradient`` flag set instead of an error, because early training
    can saturate the logistic output.

    The result depends on ``g`` only through its direction; the input is
    normalized by its max magnitude before exponentiation so scaling ``g``
    never changes the answer or overflows.
    """
    g = grad.values if isinstance(grad, GradientVector) else np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NumericError("gradient has non-finite entries")
    if cfg.rho == 0.0:
        return DualNormResult(np.zeros_like(g), False)
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    if scale == 0.0:
        return DualNormResult(np.zeros_like(g), True)
    if math.isinf(cfg.p):
        return DualNormResult(cfg.rho * np.sign(g), False)
    q = cfg.q
    u = np.abs(g) / scale
    eps = cfg.rho * np.sign(g) * u ** (q - 1.0) / np.sum(u ** q) ** (1.0 / cfg.p)
    return DualNormResult(eps, False)


def rfr_terms(params: ModelParams, ds: Dataset, cfg: PerturbationConfig) -> RobustTerms:
    """Per-group worst-case increase of the mean prediction over the ball.

    For each group the perturbation is the dual-norm maximizer of that
    group's mean-prediction gradient; the term is the realized increase
    ``mean f(theta + eps*) - mean f(theta)`` (zero perturbation is feasible,
    so the terms are nonnegative up to first-order error).
    """
    vals, epss = [], []
    for g in (0, 1):
        grad = group_mean_gradient(params, ds, g)
        eps = dual_norm_epsilon(grad, cfg).epsilon
        base = group_mean(params, ds, g)
        moved = group_mean(network.perturb(params, eps), ds, g)
        vals.append(moved - base)
        epss.append(eps)
    return RobustTerms(vals[0], vals[1], epss[0], epss[1])


def rfr_gradient(params: ModelParams, ds: Dataset, cfg: PerturbationConfig) -> GradientVector:
    """First-order gradient of the robustness penalty.

    Sum over groups of the group-mean-prediction gradient re-evaluated at the
    perturbed weights ``theta + eps_a*`` (the perturbation's own dependence
    on theta is dropped, avoiding second-order terms).  Costs one extra
    forward/backward pair per group beyond the base gradients.
    """
    total = None
    for g in (0, 1):
        grad = group_mean_gradient(params, ds, g)
        eps = dual_norm_epsilon(grad, cfg).epsilon
        shifted = network.perturb(params, eps)
        moved = group_mean_gradient(shifted, ds, g).values
        total = moved if total is None else total + moved
    if not np.all(np.isfinite(total)):
        raise NumericError("robustness gradient has non-finite entries")
    return GradientVector(total, origin="rfr")


def loss_breakdown(params: ModelParams, ds: Dataset, cfg: TrainConfig) -> LossBreakdown:
    """All loss components at the current weights, plus their weighted total."""
    clf = clf_loss(params, ds, cfg.loss_variant)
    dp = dp_loss(params, ds)
    terms = rfr_terms(params, ds, cfg.perturbation)
    total = clf + cfg.lam * (dp + terms.rfr_s0 + terms.rfr_s1)
    return LossBreakdown(clf, dp, terms.rfr_s0, terms.rfr_s1, total)


def _check_trainable(ds: Dataset) -> None:
    ds.require_groups()
    for label in (0, 1):
        if not np.any(ds.y == label):
            raise ValidationError(f"training data has no rows with y={label}")


def _batches(ds: Dataset, batch_size: int | None, rng: np.random.Generator):
    """Full batch, or stratified minibatches that each contain both groups."""
    if batch_size is None or batch_size >= ds.n:
        yield ds
        return
    n_batches = max(1, -(-ds.n // batch_size))
    n_batches = min(n_batches, ds.group_count(0), ds.group_count(1))
    chunks = []
    for g in (0, 1):
        idx = np.flatnonzero(ds.group_mask(g))
        chunks.append(np.array_split(rng.permutation(idx), n_batches))
    for c0, c1 in zip(*chunks):
        yield ds.subset(np.concatenate([c0, c1]))


def _step(params: ModelParams, state: network.OptimizerState, batch: Dataset,
          cfg: TrainConfig) -> tuple[ModelParams, network.OptimizerState]:
    """One descent step on the combined objective gradient.

    With ``lam = 0`` only the classification gradient is computed, so the run
    is bit-identical to a plain ERM loop.  With ``rho = 0`` the robustness
    penalty is identically zero (the zero perturbation is the whole ball) and
    its gradient is skipped, leaving exactly the parity-regularized
    objective.
    """
    g = clf_gradient(params, batch, cfg.loss_variant).values
    origin = "classification"
    if cfg.lam > 0.0:
        g = g + cfg.lam * dp_gradient(params, batch).values
        origin = "clf+dp"
        if cfg.perturbation.rho > 0.0:
            robust = rfr_gradient(params, batch, cfg.perturbation).values
            if cfg.unscaled_robust_update:
                params, state = network.adam_step(state, params, GradientVector(g, origin))
                return network.perturb(params, cfg.lam * robust), state
            g = g + cfg.lam * robust
            origin = "clf+dp+rfr"
    return network.adam_step(state, params, GradientVector(g, origin))


def train(ds: Dataset, hidden=(50, 50), cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Run the full training loop and return final weights plus a loss trace.

    Per step: classification + parity gradient, then the per-group dual-norm
    perturbations, then the robustness gradient at the perturbed weights, all
    combined into a single Adam update.  The per-epoch trace records the loss
    breakdown on the full dataset; a non-finite total aborts with the epoch
    index.
    """
    _check_trainable(ds)
    rng = np.random.default_rng(cfg.seed)
    params = network.init_params((ds.d, *hidden, 1), rng=rng)
    state = network.init_adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    trace = []
    for epoch in range(cfg.epochs):
        try:
            for batch in _batches(ds, cfg.batch_size, rng):
                params, state = _step(params, state, batch, cfg)
            bd = loss_breakdown(params, ds, cfg)
        except NumericError as exc:
            raise TrainingDiverged(epoch) from exc
        if not math.isfinite(bd.total):
            raise TrainingDiverged(epoch)
        trace.append(bd)
    return TrainResult(params, tuple(trace))
