"""Dense feed-forward network with hand-rolled reverse-mode gradients.

The model is a ReLU multilayer perceptron whose output unit is logistic, so
every prediction is a probability in (0, 1).  Parameters live in plain numpy
arrays and every operation is pure: functions return new ``ModelParams``
instead of mutating.  A flattened-vector view of the parameters supports the
perturbation arithmetic used by the robustness penalty.

All arithmetic is float64; gradient tests rely on 1e-4-level agreement with
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatchError, NumericError, ShapeError

# Logistic output is clamped to keep predictions strictly inside (0, 1) even
# when the pre-activation saturates past float precision.
_PRED_CLIP = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """Layered weights of a ReLU net with a logistic output unit.

    ``weights[i]`` has shape ``(out_i, in_i)`` and ``biases[i]`` shape
    ``(out_i,)``; consecutive dimensions chain (``out_i == in_{i+1}``).
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ShapeError("weights and biases must pair up layer by layer")
        if not self.weights:
            raise ShapeError("a network needs at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} and bias {b.shape} mismatch")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i}: input width {w.shape[1]} != previous output "
                    f"{self.weights[i - 1].shape[0]}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flatten(self) -> np.ndarray:
        """Parameter vector: per layer, weight entries (row-major) then bias."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def unflatten(self, vec: np.ndarray) -> "ModelParams":
        """Rebuild params with this network's shapes from a flat vector."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ShapeError(f"expected vector of length {self.n_params}, got {vec.shape}")
        weights, biases, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vec[k:k + w.size].reshape(w.shape).copy())
            k += w.size
            biases.append(vec[k:k + b.size].copy())
            k += b.size
        return ModelParams(tuple(weights), tuple(biases))

    def weight_mask(self) -> np.ndarray:
        """Flat 0/1 mask marking weight (not bias) coordinates."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ones(w.size))
            parts.append(np.zeros(b.size))
        return np.concatenate(parts)


@dataclass(frozen=True)
class GradientVector:
    """Flat parameter gradient tagged with the objective it came from."""

    values: np.ndarray
    origin: str = "unspecified"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1:
            raise ShapeError("gradient must be a flat vector")


def init_params(layer_sizes, seed=None, rng=None) -> ModelParams:
    """Seeded uniform initialization in +-sqrt(6 / (fan_in + fan_out)) per layer.

    ``layer_sizes`` lists (input_dim, hidden..., output_dim); the output
    width must be 1 (single logistic unit).
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ShapeError("need at least input and output sizes")
    if sizes[-1] != 1:
        raise ShapeError("output layer must have a single logistic unit")
    if rng is None:
        rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(tuple(weights), tuple(biases))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_input(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.shape[1] != params.input_dim:
        raise ShapeError(f"expected {params.input_dim} features, got {X.shape[1]}")
    return X


def _forward_cached(params: ModelParams, X: np.ndarray):
    """Forward pass keeping activations and pre-activations for backprop."""
    X = _check_input(params, X)
    acts = [X]
    pre = []
    a = X
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        pre.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
            acts.append(a)
    pred = _sigmoid(pre[-1][:, 0])
    pred = np.clip(pred, _PRED_CLIP, 1.0 - _PRED_CLIP)
    return pred, acts, pre


def forward(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Predicted probability per row of ``X``, each strictly in (0, 1)."""
    pred, _, _ = _forward_cached(params, X)
    return pred


def backward_scalar(params: ModelParams, X: np.ndarray, dpred: np.ndarray,
                    origin: str = "unspecified") -> GradientVector:
    """Gradient of a scalar objective given its per-prediction derivative.

    For an objective ``L = h(f(x_1), ..., f(x_n))`` pass
    ``dpred[i] = dL/df(x_i)``; the result is ``dL/dtheta`` as a flat vector.
    This covers every supported objective (subset-mean prediction,
    classification losses, the parity regularizer), since each is a smooth
    function of the prediction vector.
    """
    X = _check_input(params, X)
    if X.shape[0] == 0:
        raise EmptyBatchError("cannot differentiate over an empty batch")
    dpred = np.asarray(dpred, dtype=float)
    if dpred.shape != (X.shape[0],):
        raise ShapeError(f"dpred must have shape ({X.shape[0]},), got {dpred.shape}")

    pred, acts, pre = _forward_cached(params, X)
    # logistic unit: df/dz = f (1 - f)
    dz = (dpred * pred * (1.0 - pred))[:, None]
    grads_w = [None] * params.n_layers
    grads_b = [None] * params.n_layers
    for i in range(params.n_layers - 1, -1, -1):
        grads_w[i] = dz.T @ acts[i]
        grads_b[i] = dz.sum(axis=0)
        if i > 0:
            da = dz @ params.weights[i]
            dz = da * (pre[i - 1] > 0.0)
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.ravel())
        parts.append(gb)
    return GradientVector(np.concatenate(parts), origin)


def prediction_input_gradient(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Per-sample gradient of the prediction w.r.t. its own input row.

    Row ``i`` of the result is ``df(x_i)/dx_i``; a single backward pass
    suffices because predictions do not couple across rows.
    """
    X = _check_input(params, X)
    pred, _, pre = _forward_cached(params, X)
    dz = (pred * (1.0 - pred))[:, None]
    for i in range(params.n_layers - 1, 0, -1):
        da = dz @ params.weights[i]
        dz = da * (pre[i - 1] > 0.0)
    return dz @ params.weights[0]


def relu_pattern(params: ModelParams, X: np.ndarray) -> tuple[np.ndarray, ...]:
    """Active/inactive pattern of every hidden unit for each sample.

    Useful for checking that a perturbation stays within one linear region
    of the hidden layers.
    """
    _, _, pre = _forward_cached(params, X)
    return tuple(z > 0.0 for z in pre[:-1])


def perturb(params: ModelParams, eps: np.ndarray) -> ModelParams:
    """Parameters shifted by a flat perturbation vector; the input is untouched."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (params.n_params,):
        raise ShapeError(f"perturbation length {eps.shape} != {params.n_params} parameters")
    return params.unflatten(params.flatten() + eps)


@dataclass(frozen=True)
class OptimizerState:
    """Adam state: moment vectors, step counter, and the two knobs we expose.

    Weight decay is decoupled (applied directly to the iterate, not through
    the moments) and touches weight coordinates only, never biases.
    """

    m: np.ndarray
    v: np.ndarray
    step: int
    lr: float
    weight_decay: float
    decay_mask: np.ndarray

    def __post_init__(self):
        if self.m.shape != self.v.shape or self.m.shape != self.decay_mask.shape:
            raise ShapeError("moment vectors and decay mask must share one length")
        if self.step < 0:
            raise ValueError("step counter must be nonnegative")


def init_adam(params: ModelParams, lr: float = 1e-5, weight_decay: float = 0.01) -> OptimizerState:
    n = params.n_params
    return OptimizerState(
        m=np.zeros(n), v=np.zeros(n), step=0,
        lr=lr, weight_decay=weight_decay, decay_mask=params.weight_mask(),
    )


def adam_step(state: OptimizerState, params: ModelParams,
              grad: GradientVector) -> tuple[ModelParams, OptimizerState]:
    """One Adam update; returns fresh params and state."""
    g = grad.values
    if g.shape != state.m.shape:
        raise ShapeError(f"gradient length {g.shape} != optimizer length {state.m.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite entries in gradient tagged '{grad.origin}'")

    t = state.step + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * g
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * g * g
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)

    theta = params.flatten()
    if state.weight_decay != 0.0:
        theta = theta - state.lr * state.weight_decay * theta * state.decay_mask
    theta = theta - state.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    new_state = OptimizerState(m=m, v=v, step=t, lr=state.lr,
                               weight_decay=state.weight_decay,
                               decay_mask=state.decay_mask)
    return params.unflatten(theta), new_state
