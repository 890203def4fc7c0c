"""Bundled numerical certification suites.

Each suite builds seeded instances, checks one theoretical claim at its
stated tolerance, and returns a ``SuiteResult`` with the worst observed
statistics.  The CLI's ``verify-theory`` subcommand runs them all and prints
one pass/fail line each; the acceptance tests call them directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import losses, metrics, network, transport
from .data import Dataset
from .losses import PerturbationConfig
from .transport import DiscreteDistribution, PerturbationLaw, TransportPlan


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "details": self.details}


def _random_joint(rng: np.random.Generator, k: int, d: int) -> DiscreteDistribution:
    pts = rng.normal(size=(k, d + 1))
    return DiscreteDistribution(pts, rng.dirichlet(np.ones(k)))


def dual_norm_suite(n_vectors: int = 100, n_samples: int = 100_000,
                    rho: float = 0.7, seed: int = 0) -> SuiteResult:
    """Closed-form ball maximizer vs. a large random sweep, both norms.

    For each random gradient vector (dimensions spread over 3..500) and each
    of the Euclidean and max norms: the perturbation must sit on the sphere
    to 1e-9 and achieve at least the sweep's best inner product less 1e-3
    relative.
    """
    dims = [3, 7, 17, 33, 64, 120, 200, 320, 450, 500]
    per_dim = max(1, n_vectors // len(dims))
    rng = np.random.default_rng(seed)
    # one Gaussian and one uniform pool at the top dimension; each smaller
    # dimension uses a column slice (rows of iid Gaussians restricted to d
    # coordinates are again iid, so the slice is a valid sweep)
    gauss = rng.standard_normal((n_samples, max(dims)), dtype=np.float32)
    unif = rng.random((n_samples, max(dims)), dtype=np.float32)
    row_sq = np.zeros(n_samples, dtype=np.float32)
    prev_d = 0

    worst_feas = 0.0
    worst_rel_gap = 0.0  # how far the closed form fell below the sweep best
    beaten = 0
    tested = 0
    for d in dims:
        row_sq += np.einsum("ij,ij->i", gauss[:, prev_d:d], gauss[:, prev_d:d])
        prev_d = d
        gs = rng.normal(size=(per_dim, d))
        G32 = gs.T.astype(np.float32)
        # Euclidean ball point: rho * u^(1/d) * z / |z|; its inner product
        # with g is the raw dot scaled per sample, no need to materialize it
        scale2 = np.float32(rho) * rng.random(n_samples, dtype=np.float32) \
            ** np.float32(1.0 / d) / np.sqrt(row_sq)
        best2 = ((gauss[:, :d] @ G32) * scale2[:, None]).max(axis=0)
        # max-norm ball point: rho * (2u - 1); inner product = rho*(2 u.g - sum g)
        best_cube = (np.float32(rho)
                     * (2.0 * (unif[:, :d] @ G32) - gs.sum(axis=1).astype(np.float32))
                     ).max(axis=0)
        for j, g in enumerate(gs):
            tested += 1
            for p, best in ((2.0, float(best2[j])), (math.inf, float(best_cube[j]))):
                cfg = PerturbationConfig(rho, p)
                eps = losses.dual_norm_epsilon(g, cfg).epsilon
                lp = np.max(np.abs(eps)) if math.isinf(p) else float(np.linalg.norm(eps))
                worst_feas = max(worst_feas, abs(lp - rho))
                achieved = float(g @ eps)
                if achieved < best - 1e-9:
                    beaten += 1
                worst_rel_gap = max(worst_rel_gap, (best - achieved) / max(abs(best), 1e-30))
    passed = worst_feas <= 1e-9 and worst_rel_gap <= 1e-3
    return SuiteResult("dual-norm-optimality", passed, {
        "vectors": tested, "samples_per_vector": n_samples,
        "worst_norm_error": worst_feas, "worst_relative_gap": worst_rel_gap,
        "sweep_wins": beaten,
    })


def loss_equivalence_suite(n_instances: int = 20, seed: int = 0) -> SuiteResult:
    """Target loss equals perturbed-source loss on random discrete instances."""
    rng = np.random.default_rng(seed)
    gaps = []
    sizes = []
    for i in range(n_instances):
        d = int(rng.integers(1, 3))
        params = network.init_params((d, 3, 1), rng=rng)
        src = _random_joint(rng, int(rng.integers(2, 5)), d)
        tgt = _random_joint(rng, int(rng.integers(2, 5)), d)
        report = transport.check_loss_equivalence(params, src, tgt, lambda f, y: (f - y) ** 2)
        gaps.append(report.gap)
        sizes.append([src.n, tgt.n])
    worst = max(gaps)
    return SuiteResult("loss-equivalence", worst <= 1e-10,
                       {"instances": n_instances, "worst_gap": worst,
                        "gaps": gaps, "support_sizes": sizes})


def _within_one_linear_region(params, src, law, delta_theta, smax: float) -> bool:
    """Whether every perturbation in the sweep leaves the ReLU pattern alone.

    The first-order trade between data and weight perturbations presumes a
    differentiable prediction; an instance whose sweep crosses a hidden-unit
    kink violates that premise, so the suite draws a fresh one instead.
    """
    X = src.points()[:, :-1]
    base = network.relu_pattern(params, X)
    candidates = [network.relu_pattern(params, X + smax * dk[:-1]) for dk in law.points()]
    candidates.append(network.relu_pattern(network.perturb(params, smax * delta_theta), X))
    return all(
        all(np.array_equal(a, b) for a, b in zip(base, cand)) for cand in candidates
    )


def _clean_decay_window(report, ratio_bound: float, window: int = 3,
                        noise_floor: float = 1e-13) -> tuple[float, ...] | None:
    """First run of ``window`` consecutive halvings that all decay cleanly.

    The quadratic-decay claim is asymptotic; at coarse scales the mismatch
    can change sign (near-cancelling second-order coefficients), which makes
    a single adjacent ratio meaningless.  A window of consecutive clean
    halvings above the float noise floor certifies the decay without
    cherry-picking individual ratios.
    """
    m = report.mismatches
    best = None
    for start in range(len(m) - window):
        chunk = m[start:start + window + 1]
        if min(chunk) <= noise_floor:
            continue
        ratios = tuple(b / a for a, b in zip(chunk, chunk[1:]))
        if all(r <= ratio_bound for r in ratios):
            if best is None or max(ratios) < max(best):
                best = ratios
    return best


def weight_equivalence_suite(n_instances: int = 10, seed: int = 0,
                   ratio_bound: float = 0.35) -> SuiteResult:
    """Data-vs-weight perturbation mismatch decays ~4x per halving of scale.

    Each instance sweeps seven halvings and must show three consecutive
    clean ones; instances whose sweep crosses a hidden-unit kink (outside
    the differentiable regime the first-order argument needs) are redrawn.
    """
    rng = np.random.default_rng(seed)
    scales = tuple(0.5 ** k for k in range(9))
    worst_window_ratio = 0.0
    windows = []
    failed = 0
    made = 0
    draws = 0
    while made < n_instances:
        draws += 1
        if draws > 50 * n_instances:
            raise RuntimeError("could not draw enough kink-free instances")
        d = int(rng.integers(1, 3))
        params = network.init_params((d, 3, 1), rng=rng)
        src = _random_joint(rng, int(rng.integers(3, 6)), d)
        k = int(rng.integers(1, 4))
        deltas = 0.05 * rng.normal(size=(k, d + 1))
        law = PerturbationLaw(deltas, rng.dirichlet(np.ones(k)) if k > 1 else np.ones(1))
        report = transport.check_weight_equivalence(params, src, law, transport.squared_loss(),
                                          scales=scales)
        if not _within_one_linear_region(params, src, law, report.delta_theta, scales[0]):
            continue
        made += 1
        window = _clean_decay_window(report, ratio_bound)
        if window is None:
            failed += 1
            windows.append(None)
        else:
            windows.append(list(window))
            worst_window_ratio = max(worst_window_ratio, max(window))
    return SuiteResult("weight-perturbation-equivalence", failed == 0,
                       {"instances": n_instances, "rejected_draws": draws - made,
                        "instances_without_decay_window": failed,
                        "worst_window_ratio": worst_window_ratio,
                        "ratio_bound": ratio_bound, "decay_windows": windows})


def minimal_power_suite(n_instances: int = 5, n_alternatives: int = 200,
                   seed: int = 0) -> SuiteResult:
    """The optimal plan's displacement law has minimal power among tested plans."""
    rng = np.random.default_rng(seed)
    worst_excess = -math.inf
    for i in range(n_instances):
        k = int(rng.integers(2, 5))
        m = int(rng.integers(2, 5))
        src = DiscreteDistribution(rng.normal(size=k), rng.dirichlet(np.ones(k)))
        tgt = DiscreteDistribution(rng.normal(size=m), rng.dirichlet(np.ones(m)))
        plan = transport.solve_ot(src, tgt, 2.0)
        opt_power = transport.perturbation_law(plan).power(2.0)
        alternatives = [np.asarray(v) for v in
                        transport.enumerate_vertex_plans(src.mass, tgt.mass)]
        alternatives += [transport.random_feasible_plan(src.mass, tgt.mass, rng)
                         for _ in range(n_alternatives)]
        for gamma in alternatives:
            alt = TransportPlan(gamma, 2.0, src, tgt)
            alt_power = transport.perturbation_law(alt).power(2.0)
            worst_excess = max(worst_excess, opt_power - alt_power)
    return SuiteResult("minimal-power-law", worst_excess <= 1e-12,
                       {"instances": n_instances, "alternatives_each": n_alternatives,
                        "worst_excess": worst_excess})


def scalar_inequality_suite(n_tuples: int = 1_000_000, seed: int = 0) -> SuiteResult:
    """The four-scalar absolute-difference inequality over random tuples."""
    rng = np.random.default_rng(seed)
    tuples = rng.uniform(-10.0, 10.0, size=(n_tuples, 4))
    a1, b1, a2, b2 = tuples.T
    lhs = np.abs(np.abs(a1 - b1) - np.abs(a2 - b2))
    rhs = np.abs(a1 - a2) + np.abs(b1 - b2)
    violations = int(np.count_nonzero(lhs > rhs + 1e-12))
    # spot-check the scalar entry point against the vectorized sweep
    sample_ok = all(transport.scalar_inequality_holds(*tuples[i]) for i in range(0, n_tuples, 10_000))
    return SuiteResult("scalar-inequality", violations == 0 and sample_ok,
                       {"tuples": n_tuples, "violations": violations})


def bound_suite(n_trials: int = 1000, seed: int = 0) -> SuiteResult:
    """Parity transfer bound over random model/dataset pairs."""
    rng = np.random.default_rng(seed)
    violations = 0
    worst_margin = math.inf
    for _ in range(n_trials):
        d = int(rng.integers(2, 5))
        params = network.init_params((d, int(rng.integers(2, 6)), 1), rng=rng)
        src = _random_dataset(rng, int(rng.integers(6, 40)), d)
        tgt = _random_dataset(rng, int(rng.integers(6, 40)), d)
        report = metrics.check_bound(params, src, tgt)
        worst_margin = min(worst_margin, report.bound - report.dp_target)
        if not report.satisfied or report.dp_target > report.bound + 1e-12:
            violations += 1
    return SuiteResult("parity-transfer-bound", violations == 0,
                       {"trials": n_trials, "violations": violations,
                        "smallest_margin": worst_margin})


def _random_dataset(rng: np.random.Generator, n: int, d: int) -> Dataset:
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    a = rng.integers(0, 2, size=n)
    a[:2] = (0, 1)
    return Dataset(X, y, a)


def run_all(seed: int = 0) -> list[SuiteResult]:
    return [
        dual_norm_suite(seed=seed),
        loss_equivalence_suite(seed=seed),
        weight_equivalence_suite(seed=seed),
        minimal_power_suite(seed=seed),
        scalar_inequality_suite(seed=seed),
        bound_suite(seed=seed),
    ]
