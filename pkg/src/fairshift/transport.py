"""Discrete optimal transport and the shift/perturbation equivalence checks.

Everything here works on finite supports so each claim can be certified
exactly:

* ``solve_ot`` finds the minimum-cost coupling between two discrete
  distributions under the cost ``||s - t||^p_exp``, with an exhaustive
  vertex-enumeration cross-check on tiny instances;
* ``perturbation_law`` aggregates an optimal plan into the distribution of
  displacements ``delta = t - s``;
* ``check_loss_equivalence`` verifies that the expected loss on the target equals
  the expected loss on the plan-perturbed source (an exact identity on
  finite sums);
* ``check_weight_equivalence`` verifies that a data perturbation can be traded for a
  weight perturbation up to second order: it solves the one-scalar
  first-order matching condition for a minimum-norm weight step and measures
  how fast the residual mismatch decays as the perturbation scale halves;
* ``scalar_inequality_holds`` tests the four-scalar absolute-difference inequality
  behind the parity transfer bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import NumericError, ValidationError
from . import network
from .network import ModelParams

_MASS_TOL = 1e-12
_MARGINAL_TOL = 1e-9


def _as_points(support) -> np.ndarray:
    pts = np.asarray(support, dtype=float)
    if pts.ndim == 1:
        return pts[:, None]
    if pts.ndim == 2:
        return pts
    raise ValidationError("support must be scalars or vectors")


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite-support distribution: points plus a probability vector."""

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        pts = _as_points(support)
        if mass.ndim != 1 or mass.shape[0] != pts.shape[0]:
            raise ValidationError("mass vector must pair with support points")
        if np.any(mass < 0):
            raise ValidationError("masses must be nonnegative")
        if abs(mass.sum() - 1.0) > _MASS_TOL:
            raise ValidationError(f"masses sum to {mass.sum()!r}, not 1")
        if len(np.unique(pts.round(12), axis=0)) != pts.shape[0]:
            raise ValidationError("support points must be distinct")

    @property
    def n(self) -> int:
        return _as_points(self.support).shape[0]

    def points(self) -> np.ndarray:
        """Support as a 2-D (n, d) array regardless of scalar/vector input."""
        return _as_points(self.support)


@dataclass(frozen=True)
class TransportPlan:
    """Joint mass matrix over source x target supports."""

    gamma: np.ndarray
    cost_exponent: float
    source: DiscreteDistribution
    target: DiscreteDistribution

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "gamma", gamma)
        if self.cost_exponent <= 0:
            raise ValidationError("cost exponent must be positive")
        if gamma.shape != (self.source.n, self.target.n):
            raise ValidationError("plan shape must be (source, target)")
        if np.any(gamma < -1e-12):
            raise ValidationError("plan entries must be nonnegative")
        if np.max(np.abs(gamma.sum(axis=1) - self.source.mass)) > _MARGINAL_TOL:
            raise ValidationError("row sums do not match source masses")
        if np.max(np.abs(gamma.sum(axis=0) - self.target.mass)) > _MARGINAL_TOL:
            raise ValidationError("column sums do not match target masses")

    @property
    def cost(self) -> float:
        """Total transport cost of the plan under ``||s - t||^p_exp``."""
        C = cost_matrix(self.source, self.target, self.cost_exponent)
        return float(np.sum(self.gamma * C))


@dataclass(frozen=True)
class PerturbationLaw:
    """Distribution of displacements ``delta = t - s`` induced by a plan."""

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        if abs(mass.sum() - 1.0) > _MARGINAL_TOL:
            raise ValidationError(f"law masses sum to {mass.sum()!r}, not 1")
        if np.any(mass < 0):
            raise ValidationError("law masses must be nonnegative")

    def points(self) -> np.ndarray:
        return _as_points(self.support)

    def power(self, p_exp: float) -> float:
        """E[|delta|^p_exp] under the law (Euclidean norm for vectors)."""
        norms = np.linalg.norm(self.points(), axis=1)
        return float(np.sum(self.mass * norms ** p_exp))

    def moments(self) -> np.ndarray:
        """E[delta], coordinate-wise."""
        return self.points().T @ self.mass


def cost_matrix(src: DiscreteDistribution, tgt: DiscreteDistribution,
                p_exp: float) -> np.ndarray:
    S, T = src.points(), tgt.points()
    if S.shape[1] != T.shape[1]:
        raise ValidationError("source and target supports live in different dimensions")
    diff = S[:, None, :] - T[None, :, :]
    return np.linalg.norm(diff, axis=2) ** p_exp


def _marginal_system(m: int, n: int) -> np.ndarray:
    """Equality matrix mapping a flattened plan to its row and column sums."""
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    return A


def enumerate_vertex_plans(src_mass, tgt_mass) -> list[np.ndarray]:
    """All vertices of the transportation polytope (tiny instances only).

    Candidate bases are every cell subset of size m + n - 1; each consistent,
    nonnegative basic solution is a vertex.  Exponential in the support
    sizes, so callers should keep m, n <= 4 or so.
    """
    p = np.asarray(src_mass, dtype=float)
    q = np.asarray(tgt_mass, dtype=float)
    m, n = p.size, q.size
    A = _marginal_system(m, n)
    b = np.concatenate([p, q])
    plans = []
    seen = set()
    for basis in itertools.combinations(range(m * n), m + n - 1):
        cols = A[:, basis]
        sol, *_ = np.linalg.lstsq(cols, b, rcond=None)
        if np.max(np.abs(cols @ sol - b)) > 1e-9 or np.any(sol < -1e-12):
            continue
        gamma = np.zeros(m * n)
        gamma[list(basis)] = np.clip(sol, 0.0, None)
        key = tuple(gamma.round(10))
        if key not in seen:
            seen.add(key)
            plans.append(gamma.reshape(m, n))
    return plans


def random_feasible_plan(src_mass, tgt_mass, rng: np.random.Generator,
                         n_vertices: int = 4) -> np.ndarray:
    """Random point of the transportation polytope.

    Convex combination of random vertices, each produced by greedy northwest
    allocation along a random row/column order.
    """
    p = np.asarray(src_mass, dtype=float)
    q = np.asarray(tgt_mass, dtype=float)
    verts = [_greedy_vertex(p, q, rng.permutation(p.size), rng.permutation(q.size))
             for _ in range(n_vertices)]
    w = rng.dirichlet(np.ones(n_vertices))
    return sum(wi * vi for wi, vi in zip(w, verts))


def _greedy_vertex(p: np.ndarray, q: np.ndarray, row_order, col_order) -> np.ndarray:
    gamma = np.zeros((p.size, q.size))
    rem_r, rem_c = p.copy(), q.copy()
    ri = ci = 0
    while ri < p.size and ci < q.size:
        r, c = row_order[ri], col_order[ci]
        move = min(rem_r[r], rem_c[c])
        gamma[r, c] += move
        rem_r[r] -= move
        rem_c[c] -= move
        if rem_r[r] <= 1e-15:
            ri += 1
        else:
            ci += 1
    return gamma


def solve_ot(src: DiscreteDistribution, tgt: DiscreteDistribution,
             p_exp: float = 2.0) -> TransportPlan:
    """Exact minimum-cost coupling under the cost ``||s - t||^p_exp``.

    Solved as a linear program over the transportation polytope; on supports
    up to 4 x 4 the optimum is additionally certified against exhaustive
    vertex enumeration.
    """
    if p_exp <= 0:
        raise ValidationError("cost exponent must be positive")
    C = cost_matrix(src, tgt, p_exp)
    m, n = C.shape
    A = _marginal_system(m, n)
    b = np.concatenate([src.mass, tgt.mass])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if not res.success:
        raise NumericError(f"transport LP failed: {res.message}")
    gamma = np.clip(res.x.reshape(m, n), 0.0, None)

    if m <= 4 and n <= 4:
        best = min(float(np.sum(v * C)) for v in enumerate_vertex_plans(src.mass, tgt.mass))
        got = float(np.sum(gamma * C))
        if got > best + 1e-9 * max(1.0, abs(best)):
            raise NumericError(
                f"LP cost {got!r} exceeds enumerated optimum {best!r}"
            )
    return TransportPlan(gamma, p_exp, src, tgt)


def perturbation_law(plan: TransportPlan) -> PerturbationLaw:
    """Aggregate a plan into the distribution of displacements ``t - s``.

    Displacements matching to 12 decimals are merged into one support point;
    the law's mass at ``delta`` is the summed plan mass over all cell pairs
    with that displacement.
    """
    S, T = plan.source.points(), plan.target.points()
    groups: dict[tuple, float] = {}
    reps: dict[tuple, np.ndarray] = {}
    for i in range(S.shape[0]):
        for j in range(T.shape[0]):
            d = T[j] - S[i]
            key = tuple(np.round(d, 12))
            groups[key] = groups.get(key, 0.0) + float(plan.gamma[i, j])
            reps.setdefault(key, d)
    keys = sorted(k for k in groups if groups[k] > 0.0)
    support = np.array([reps[k] for k in keys])
    mass = np.array([groups[k] for k in keys])
    if support.shape[1] == 1:
        support = support[:, 0]
    return PerturbationLaw(support, mass)


@dataclass(frozen=True)
class LossEquivalenceReport:
    """Loss equality between the target and the perturbed source."""

    target_loss: float
    perturbed_source_loss: float
    transport_cost: float

    @property
    def gap(self) -> float:
        return abs(self.target_loss - self.perturbed_source_loss)

    def to_dict(self) -> dict:
        return {"target_loss": self.target_loss,
                "perturbed_source_loss": self.perturbed_source_loss,
                "transport_cost": self.transport_cost, "gap": self.gap}


def _split_xy(dist: DiscreteDistribution) -> tuple[np.ndarray, np.ndarray]:
    pts = dist.points()
    if pts.shape[1] < 2:
        raise ValidationError("joint support needs at least one feature plus a label")
    return pts[:, :-1], pts[:, -1]


def check_loss_equivalence(params: ModelParams, src: DiscreteDistribution,
                     tgt: DiscreteDistribution, loss, p_exp: float = 2.0) -> LossEquivalenceReport:
    """Compare E_target[loss] with E_{source, delta}[loss] under the optimal plan.

    Supports are joint (features..., label) points; ``loss`` is a vectorized
    callable ``loss(pred, y) -> per-sample values``.  Both sides are finite
    sums, so the gap is rounding-level whenever the plan is feasible.
    """
    plan = solve_ot(src, tgt, p_exp)
    Xt, Yt = _split_xy(tgt)
    lhs = float(np.sum(tgt.mass * loss(network.forward(params, Xt), Yt)))

    Xs, Ys = _split_xy(src)
    m, n = plan.gamma.shape
    # every source point shifted toward every target point: x_i + (x_j - x_i)
    Xp = (Xs[:, None, :] + (Xt[None, :, :] - Xs[:, None, :])).reshape(m * n, -1)
    Yp = (Ys[:, None] + (Yt[None, :] - Ys[:, None])).reshape(m * n)
    vals = loss(network.forward(params, Xp), Yp).reshape(m, n)
    rhs = float(np.sum(plan.gamma * vals))
    return LossEquivalenceReport(lhs, rhs, plan.cost)


@dataclass(frozen=True)
class SmoothLoss:
    """Loss with the partial derivatives the first-order matching needs."""

    value: callable  # (pred, y) -> per-sample loss
    dpred: callable  # d loss / d prediction
    dlabel: callable  # d loss / d label
    name: str = "loss"


def squared_loss() -> SmoothLoss:
    return SmoothLoss(
        value=lambda f, y: (f - y) ** 2,
        dpred=lambda f, y: 2.0 * (f - y),
        dlabel=lambda f, y: -2.0 * (f - y),
        name="squared",
    )


def linear_loss() -> SmoothLoss:
    """The probability-linear classification loss, -y f - (1 - y)(1 - f)."""
    return SmoothLoss(
        value=lambda f, y: -y * f - (1.0 - y) * (1.0 - f),
        dpred=lambda f, y: 1.0 - 2.0 * y,
        dlabel=lambda f, y: 1.0 - 2.0 * f,
        name="linear",
    )


LABEL_READINGS = ("loss-direct", "prediction-literal")


@dataclass(frozen=True)
class WeightEquivalenceReport:
    """Mismatch between data- and weight-perturbed losses across scales.

    ``label_reading`` records how label displacements enter the first-order
    matching condition: ``loss-direct`` routes them through the loss's own
    label derivative; ``prediction-literal`` treats the prediction as the
    only label-dependent term and therefore drops them (the prediction does
    not take the label as input).
    """

    scales: tuple[float, ...]
    mismatches: tuple[float, ...]
    ratios: tuple[float, ...]
    delta_theta: np.ndarray
    flagged_unrepresentable: bool
    label_reading: str

    @property
    def delta_theta_norm(self) -> float:
        return float(np.linalg.norm(self.delta_theta))

    def decays(self, threshold: float = 0.35) -> bool:
        return all(r <= threshold for r in self.ratios)

    def to_dict(self) -> dict:
        return {"scales": list(self.scales), "mismatches": list(self.mismatches),
                "ratios": list(self.ratios), "delta_theta_norm": self.delta_theta_norm,
                "flagged_unrepresentable": self.flagged_unrepresentable,
                "label_reading": self.label_reading}


def check_weight_equivalence(params: ModelParams, src: DiscreteDistribution,
                   law: PerturbationLaw, loss: SmoothLoss,
                   scales=(1.0, 0.5, 0.25, 0.125),
                   label_reading: str = "loss-direct") -> WeightEquivalenceReport:
    """Trade a data perturbation for a weight perturbation and measure the gap.

    The matching condition equates the first-order loss change of the data
    perturbation with that of a weight step: one scalar equation in all the
    parameters, solved by the minimum-norm ``delta_theta = c * r / (c . c)``
    where ``c`` is the expected loss-parameter gradient and ``r`` the
    expected first-order data effect.  The mismatch between the two perturbed
    losses is then evaluated at each scale; a first-order-valid match decays
    quadratically, i.e. by about 4x per halving.

    When ``c`` vanishes but ``r`` does not, no weight step can represent the
    perturbation at first order and the report is flagged.
    """
    if label_reading not in LABEL_READINGS:
        raise ValidationError(f"label_reading must be one of {LABEL_READINGS}")
    X, Y = _split_xy(src)
    if law.points().shape[1] != X.shape[1] + 1:
        raise ValidationError("law displacements must match the joint (x, y) dimension")
    f = network.forward(params, X)
    dl_df = loss.dpred(f, Y)

    c = network.backward_scalar(params, X, dl_df * src.mass, origin="loss-mean").values
    input_grads = network.prediction_input_gradient(params, X)
    vx = input_grads.T @ (src.mass * dl_df)
    vy = float(np.sum(src.mass * loss.dlabel(f, Y))) if label_reading == "loss-direct" else 0.0

    mean_delta = law.moments()
    r = float(vx @ mean_delta[:-1] + vy * mean_delta[-1])

    c_norm = float(np.linalg.norm(c))
    flagged = c_norm <= 1e-12 and abs(r) > 1e-12
    delta_theta = c * (r / (c_norm ** 2)) if c_norm > 1e-12 else np.zeros_like(c)

    D = law.points()
    mismatches = []
    for s in scales:
        data_side = 0.0
        for k in range(D.shape[0]):
            Xp = X + s * D[k, :-1]
            Yp = Y + s * D[k, -1]
            data_side += float(law.mass[k]) * float(
                np.sum(src.mass * loss.value(network.forward(params, Xp), Yp)))
        shifted = network.perturb(params, s * delta_theta)
        weight_side = float(np.sum(src.mass * loss.value(network.forward(shifted, X), Y)))
        mismatches.append(abs(data_side - weight_side))

    ratios = []
    for prev, cur in zip(mismatches, mismatches[1:]):
        ratios.append(cur / prev if prev > 1e-15 else 0.0)
    return WeightEquivalenceReport(tuple(scales), tuple(mismatches), tuple(ratios),
                          delta_theta, flagged, label_reading)


def scalar_inequality_holds(a1: float, b1: float, a2: float, b2: float) -> bool:
    """Whether ``||a1 - b1| - |a2 - b2|| <= |a1 - a2| + |b1 - b2|`` holds.

    The inequality is true for all reals; a rounding guard proportional to
    the operand magnitudes keeps exact-tie cases from flipping on float
    noise.
    """
    lhs = abs(abs(a1 - b1) - abs(a2 - b2))
    rhs = abs(a1 - a2) + abs(b1 - b2)
    guard = 1e-12 * max(1.0, abs(a1), abs(b1), abs(a2), abs(b2))
    return lhs <= rhs + guard
