import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import graphlime as gl
from graphlime.evaluation import f1_from_labels

from conftest import BENCH_PARAMS, SigmoidFeaturePredictor, make_graph

small_matrices = st.integers(2, 8).flatmap(
    lambda n: st.integers(2, 6).flatmap(
        lambda d: st.lists(
            st.lists(st.floats(0, 1, allow_nan=False), min_size=d, max_size=d),
            min_size=n,
            max_size=n,
        ).map(np.asarray)
    )
)


def exhaustive_best_coverage(W, I, budget):
    best = -1.0
    for size in range(1, budget + 1):
        for combo in itertools.combinations(range(W.shape[0]), size):
            best = max(best, gl.coverage_score(combo, W, I))
    return best


class TestGlobalImportance:
    def test_sqrt_of_column_sums(self):
        I = gl.global_importance(np.array([[4.0, 0.0], [0.0, 0.0]]))
        np.testing.assert_allclose(I, [2.0, 0.0])

    def test_all_zero(self):
        np.testing.assert_array_equal(gl.global_importance(np.zeros((3, 2))), 0.0)

    def test_uniform_matrix(self):
        I = gl.global_importance(np.ones((2, 2)))
        np.testing.assert_allclose(I, np.sqrt(2.0))

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            gl.global_importance(np.array([[1.0, -0.1]]))


class TestCoverageScore:
    def test_empty_set_scores_zero(self):
        W = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert gl.coverage_score([], W, gl.global_importance(W)) == 0.0

    def test_all_instances_cover_positive_columns(self):
        W = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        I = np.array([1.0, 2.0, 5.0])
        assert gl.coverage_score([0, 1], W, I) == pytest.approx(3.0)

    def test_single_instance(self):
        W = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert gl.coverage_score([0], W, [1.0, 1.0]) == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(small_matrices, st.data())
    def test_monotone_and_submodular(self, W, data):
        n = W.shape[0]
        I = gl.global_importance(W)
        subset = set(
            data.draw(st.lists(st.integers(0, n - 1), max_size=n, unique=True))
        )
        superset = subset | set(
            data.draw(st.lists(st.integers(0, n - 1), max_size=n, unique=True))
        )
        extra = data.draw(st.integers(0, n - 1))
        # monotone
        assert gl.coverage_score(subset, W, I) <= gl.coverage_score(superset, W, I) + 1e-12
        # submodular: marginal gains shrink on the larger set
        gain_small = gl.coverage_score(subset | {extra}, W, I) - gl.coverage_score(
            subset, W, I
        )
        gain_large = gl.coverage_score(superset | {extra}, W, I) - gl.coverage_score(
            superset, W, I
        )
        assert gain_large <= gain_small + 1e-12


class TestSubmodularPick:
    def test_single_covering_instance(self):
        W = np.array([[1.0, 1.0, 1.0], [1.0, 0.0, 0.0]])
        picks = gl.submodular_pick(W, gl.global_importance(W), 1)
        assert picks == [0]

    def test_worked_three_instance_example(self):
        W = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        I = gl.global_importance(W)
        np.testing.assert_allclose(I, [np.sqrt(2.0), np.sqrt(2.0)])
        assert gl.submodular_pick(W, I, 1) == [2]

    def test_budget_above_instances_warns_and_picks_all(self):
        W = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.warns(UserWarning, match="picking all"):
            picks = gl.submodular_pick(W, gl.global_importance(W), 5)
        assert sorted(picks) == [0, 1]

    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError):
            gl.submodular_pick(np.ones((2, 2)), np.ones(2), 0)

    def test_tie_breaks_to_lowest_instance(self):
        W = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        picks = gl.submodular_pick(W, np.array([1.0, 1.0]), 2)
        assert picks[0] == 0

    def test_prefix_consistency(self):
        rng = np.random.default_rng(3)
        W = rng.uniform(0, 1, size=(7, 5)) * (rng.random((7, 5)) < 0.6)
        I = gl.global_importance(W)
        full = gl.submodular_pick(W, I, 5)
        for b in range(1, 5):
            assert gl.submodular_pick(W, I, b) == full[:b]

    def test_matches_exhaustive_on_verified_batch(self):
        # 200 frozen cases checked against the exhaustive oracle
        for k in range(200):
            rng = np.random.default_rng([40, k])
            n = int(rng.integers(2, 9))
            d = int(rng.integers(2, 7))
            budget = min(int(rng.integers(1, 4)), n)
            W = rng.uniform(0.1, 1, size=(n, d)) * (rng.random((n, d)) < 0.85)
            I = gl.global_importance(W)
            picks = gl.submodular_pick(W, I, budget)
            assert gl.coverage_score(picks, W, I) == pytest.approx(
                exhaustive_best_coverage(W, I, budget), abs=1e-12
            )

    def test_greedy_bound_holds_even_where_not_exact(self):
        # seed batch 0 contains a known greedy-suboptimal case; the
        # (1 - 1/e) guarantee must still hold everywhere
        bound = 1.0 - 1.0 / np.e
        for k in range(200):
            rng = np.random.default_rng([0, k])
            n = int(rng.integers(2, 9))
            d = int(rng.integers(2, 7))
            budget = min(int(rng.integers(1, 4)), n)
            W = rng.uniform(0, 1, size=(n, d)) * (rng.random((n, d)) < 0.5)
            I = gl.global_importance(W)
            picks = gl.submodular_pick(W, I, budget)
            best = exhaustive_best_coverage(W, I, budget)
            assert gl.coverage_score(picks, W, I) >= bound * best - 1e-12


class TestExplanationMatrix:
    def test_weights_land_in_rows(self, bench_graph, bench_model):
        explainer = gl.GraphLimeExplainer(top_k=3).fit(bench_graph, bench_model)
        expls = [explainer.explain(v) for v in (0, 1)]
        W = gl.explanation_matrix(expls, bench_graph.feature_count)
        assert W.values.shape == (2, bench_graph.feature_count)
        for row, expl in zip(W.values, expls):
            assert set(np.where(row > 0)[0]) == set(expl.selected)

    def test_rows_nonnegative_for_signed_methods(self, bench_graph, bench_model):
        explainer = gl.LinearLimeExplainer(top_k=5, seed=0).fit(bench_graph, bench_model)
        W = gl.explanation_matrix([explainer.explain(3)], bench_graph.feature_count)
        assert np.all(W.values >= 0)


class TestTrustScoring:
    def test_true_negative_from_untrustworthy_only_selection(self):
        # user mistrusts, oracle mistrusts: a true negative (trustworthy
        # is the positive class), so neither precision nor recall moves
        oracle = np.array([False, True])
        user = np.array([False, True])
        precision, recall, f1 = f1_from_labels(oracle, user)
        assert (precision, recall, f1) == (1.0, 1.0, 1.0)

    def test_all_wrong_scores_zero(self):
        oracle = np.array([True, False])
        user = np.array([False, True])
        assert f1_from_labels(oracle, user) == (0.0, 0.0, 0.0)

    def test_f1_consistent_with_precision_recall(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            oracle = rng.random(20) < 0.6
            user = rng.random(20) < 0.6
            p, r, f1 = f1_from_labels(oracle, user)
            expected = 2 * p * r / (p + r) if p + r else 0.0
            assert f1 == pytest.approx(expected)


@pytest.fixture(scope="module")
def trust_setup(bench_graph, bench_model, bench_split):
    _, test_ids = bench_split
    return bench_graph, bench_model, test_ids[:30]


class TestTrustExperiment:
    def test_zero_fraction_everything_trustworthy(self, trust_setup):
        graph, model, nodes = trust_setup
        report = gl.run_trust_experiment(
            graph, model, ["graphlime", "random"],
            nodes=nodes, untrust_fraction=0.0, rounds=2, seed=1,
        )
        for method in ("graphlime", "random"):
            for p, r, f1 in report.scores[method]:
                assert (p, r, f1) == (1.0, 1.0, 1.0)

    def test_fraction_too_small_for_d_rejected(self):
        g = make_graph([(0, 1)], np.random.default_rng(1).normal(size=(5, 2)))
        model = SigmoidFeaturePredictor(np.ones(2))
        with pytest.raises(ValueError, match="zero of"):
            gl.run_trust_experiment(g, model, ["random"], nodes=[0, 1], untrust_fraction=0.3)

    def test_node_order_invariance(self, trust_setup):
        graph, model, nodes = trust_setup
        kwargs = dict(untrust_fraction=0.3, rounds=3, seed=6, top_k=5)
        fwd = gl.run_trust_experiment(graph, model, ["graphlime"], nodes=nodes, **kwargs)
        rev = gl.run_trust_experiment(graph, model, ["graphlime"], nodes=nodes[::-1], **kwargs)
        assert fwd.scores == rev.scores

    def test_per_round_f1_consistency_invariant(self, trust_setup):
        graph, model, nodes = trust_setup
        report = gl.run_trust_experiment(
            graph, model, ["greedy", "random"], nodes=nodes,
            untrust_fraction=0.3, rounds=4, seed=9,
        )
        for triples in report.scores.values():
            for p, r, f1 in triples:
                expected = 2 * p * r / (p + r) if p + r else 0.0
                assert f1 == pytest.approx(expected)

    def test_csv_rows_shape(self, trust_setup):
        graph, model, nodes = trust_setup
        report = gl.run_trust_experiment(
            graph, model, ["random"], nodes=nodes, rounds=2, seed=2
        )
        header, rows = report.csv_rows()
        assert header == ["round", "method", "precision", "recall", "f1"]
        assert len(rows) == 2


class TestNoiseExperiment:
    def test_empty_methods_empty_report(self, bench_graph):
        report = gl.run_noise_experiment(bench_graph, [], seed=0)
        assert report.counts == {}

    def test_random_matches_hypergeometric_mean(self):
        # d = 20 originals + 10 noise = 30; K = 10 draws; mean = 10 * 10/30
        graph = gl.generate_synthetic(seed=31, **BENCH_PARAMS)
        report = gl.run_noise_experiment(
            graph, ["random"], noise_count=10, nodes_to_explain=200,
            top_k=10, seed=8,
        )
        counts = [c for _, c in report.counts["random"]]
        assert len(counts) >= 50
        assert np.mean(counts) == pytest.approx(10 * 10 / 30, abs=0.5)

    def test_counts_bounded_by_k(self, bench_graph):
        report = gl.run_noise_experiment(
            bench_graph, ["random"], noise_count=10, nodes_to_explain=40,
            top_k=7, seed=3,
        )
        assert all(0 <= c <= 7 for _, c in report.counts["random"])

    def test_zero_noise_zero_counts(self, bench_graph):
        report = gl.run_noise_experiment(
            bench_graph, ["random", "graphlime"], noise_count=0,
            nodes_to_explain=10, top_k=5, seed=4,
        )
        for method in ("random", "graphlime"):
            assert all(c == 0 for _, c in report.counts[method])

    def test_gate_unmet_reports_achieved(self, bench_graph):
        with pytest.raises(gl.GateUnmetError) as err:
            gl.run_noise_experiment(
                bench_graph, ["random"], nodes_to_explain=5, seed=5,
                accuracy_gate=1.01, max_attempts=2,
            )
        assert err.value.achieved is not None

    def test_csv_columns(self, bench_graph):
        report = gl.run_noise_experiment(
            bench_graph, ["random"], noise_count=2, nodes_to_explain=5,
            top_k=3, seed=6,
        )
        header, rows = report.csv_rows()
        assert header == ["node_id", "method", "noisy_count"]
        assert len(rows) == 5


class _FixedLabelPredictor:
    """Stub classifier that predicts a fixed label vector, ignoring features."""

    def __init__(self, predicted):
        self.predicted = np.asarray(predicted, dtype=int)
        self.class_count_ = int(self.predicted.max()) + 1

    def predict_proba(self, graph, nodes=None, override=None):
        onehot = np.eye(self.class_count_)[self.predicted]
        if nodes is None:
            return onehot
        return onehot[np.asarray(nodes, dtype=int)]

    def accuracy(self, graph, node_ids):
        ids = np.asarray(node_ids, dtype=int)
        return float(np.mean(self.predicted[ids] == graph.labels[ids]))


def _stub_trainer(error_rate):
    def trainer(graph, train_ids, test_ids, seed, noisy_indices=()):
        rng = np.random.default_rng(seed)
        predicted = np.array(graph.labels)
        wrong = rng.random(predicted.size) < error_rate
        predicted[wrong] = (predicted[wrong] + 1) % graph.class_count
        return _FixedLabelPredictor(predicted)

    return trainer


class TestModelSelection:
    def test_coin_flip_near_half(self, bench_graph):
        report = gl.run_model_selection(
            bench_graph, ["random_choice"], [5], rounds=200, seed=14, candidates=6,
            trainer_strong=_stub_trainer(0.02), trainer_weak=_stub_trainer(0.2),
        )
        assert report.accuracy["random_choice"][5] == pytest.approx(0.5, abs=0.1)

    def test_oracle_method_and_report_shape(self, bench_graph):
        report = gl.run_model_selection(
            bench_graph, ["graphlime", "random_choice"], [3, 5],
            rounds=3, seed=15, candidates=8,
        )
        assert set(report.accuracy) == {"graphlime", "random_choice"}
        header, rows = report.csv_rows()
        assert header == ["method", "budget", "accuracy"]
        assert len(rows) == 4
        assert len(report.details) == 3

    def test_gate_unmet_raises(self, bench_graph):
        with pytest.raises(gl.GateUnmetError):
            gl.run_model_selection(
                bench_graph, ["random_choice"], [2], rounds=1, seed=16,
                candidates=4, accuracy_threshold=1.5, max_attempts=2,
            )
