import numpy as np

from fairshift import losses, network, theory_suite


class TestSuites:
    def test_dual_norm_suite_small(self):
        result = theory_suite.dual_norm_suite(n_vectors=10, n_samples=5000, seed=1)
        assert result.passed
        assert result.details["worst_norm_error"] <= 1e-9

    def test_corollary_suite_small(self):
        result = theory_suite.loss_equivalence_suite(n_instances=4, seed=2)
        assert result.passed

    def test_weight_equivalence_suite_small(self):
        result = theory_suite.weight_equivalence_suite(n_instances=3, seed=3)
        assert result.passed
        assert result.details["instances_without_decay_window"] == 0

    def test_minimal_power_suite_small(self):
        result = theory_suite.minimal_power_suite(n_instances=2, n_alternatives=30, seed=4)
        assert result.passed

    def test_bound_and_lemma_small(self):
        assert theory_suite.bound_suite(n_trials=60, seed=5).passed
        assert theory_suite.scalar_inequality_suite(n_tuples=20_000, seed=6).passed

    def test_results_serialize(self):
        result = theory_suite.scalar_inequality_suite(n_tuples=1000, seed=0)
        d = result.to_dict()
        assert d["name"] == "scalar-inequality"
        assert isinstance(d["passed"], bool)


class TestDefaultRho:
    def test_is_a_fraction_of_the_weight_norm(self):
        params = network.init_params((3, 5, 1), seed=0)
        want = 0.05 * float(np.linalg.norm(params.flatten()))
        assert losses.default_rho(params) == want
        assert losses.default_rho(params, fraction=0.1) == 2 * want
