"""Fairness metrics and the parity transfer bound check.

Thresholded metrics (accuracy, demographic parity, equal opportunity) are
what the experiment tables report; the soft parity gap on mean probability
outputs is the quantity the transfer bound is stated in, and the bound itself
is pure algebra: the target gap never exceeds the source gap plus the two
per-group mean-prediction drifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DegenerateGroupError
from . import network
from .network import ModelParams


@dataclass(frozen=True)
class FairnessReport:
    """Thresholded metrics on one dataset; delta_eo is None when undefined."""

    accuracy: float
    delta_dp: float
    delta_eo: float | None
    threshold: float
    n_group0: int
    n_group1: int

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "delta_dp": self.delta_dp,
                "delta_eo": self.delta_eo, "threshold": self.threshold,
                "n_group0": self.n_group0, "n_group1": self.n_group1}


@dataclass(frozen=True)
class BoundReport:
    """Parity transfer bound: dp_target <= dp_source + delta0 + delta1."""

    dp_source: float
    dp_target: float
    delta0: float
    delta1: float

    @property
    def bound(self) -> float:
        return self.dp_source + self.delta0 + self.delta1

    @property
    def satisfied(self) -> bool:
        return self.dp_target <= self.bound + 1e-12

    def to_dict(self) -> dict:
        return {"dp_source": self.dp_source, "dp_target": self.dp_target,
                "delta0": self.delta0, "delta1": self.delta1,
                "bound": self.bound, "satisfied": self.satisfied}


def soft_dp(pred: np.ndarray, a: np.ndarray) -> float:
    """Absolute gap between the two groups' mean probability outputs."""
    pred = np.asarray(pred, dtype=float)
    a = np.asarray(a)
    means = []
    for g in (0, 1):
        mask = a == g
        if not mask.any():
            raise DegenerateGroupError(f"group a={g} is empty")
        means.append(float(pred[mask].mean()))
    return abs(means[0] - means[1])


def fairness_metrics(pred: np.ndarray, y: np.ndarray, a: np.ndarray,
                     threshold: float = 0.5) -> FairnessReport:
    """Thresholded accuracy, parity gap, and equal-opportunity gap.

    Equal opportunity compares positive rates among truly positive rows; if
    either group has no positives the gap is reported as None rather than a
    silent zero.
    """
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y)
    a = np.asarray(a)
    yhat = (pred >= threshold).astype(int)

    rates, tprs, counts = [], [], []
    for g in (0, 1):
        mask = a == g
        if not mask.any():
            raise DegenerateGroupError(f"group a={g} is empty")
        counts.append(int(mask.sum()))
        rates.append(float(yhat[mask].mean()))
        pos = mask & (y == 1)
        tprs.append(float(yhat[pos].mean()) if pos.any() else None)

    delta_eo = None
    if tprs[0] is not None and tprs[1] is not None:
        delta_eo = abs(tprs[0] - tprs[1])
    return FairnessReport(
        accuracy=float((yhat == y).mean()),
        delta_dp=abs(rates[0] - rates[1]),
        delta_eo=delta_eo,
        threshold=threshold,
        n_group0=counts[0],
        n_group1=counts[1],
    )


def evaluate(params: ModelParams, ds: Dataset, threshold: float = 0.5) -> FairnessReport:
    """Run the model on a dataset and report the thresholded metrics."""
    return fairness_metrics(network.forward(params, ds.X), ds.y, ds.a, threshold)


def check_bound(params: ModelParams, source: Dataset, target: Dataset) -> BoundReport:
    """Evaluate the parity transfer bound for one model and dataset pair.

    All quantities are soft (mean probability outputs).  The inequality holds
    for every model and every pair of datasets with nonempty group views; a
    violation beyond rounding indicates a computation bug, not a modeling
    failure.
    """
    fs = network.forward(params, source.X)
    ft = network.forward(params, target.X)
    means = {}
    for name, pred, ds in (("s", fs, source), ("t", ft, target)):
        for g in (0, 1):
            mask = ds.group_mask(g)
            if not mask.any():
                raise DegenerateGroupError(f"{name} group a={g} is empty")
            means[(name, g)] = float(pred[mask].mean())
    return BoundReport(
        dp_source=abs(means[("s", 0)] - means[("s", 1)]),
        dp_target=abs(means[("t", 0)] - means[("t", 1)]),
        delta0=abs(means[("s", 0)] - means[("t", 0)]),
        delta1=abs(means[("s", 1)] - means[("t", 1)]),
    )
