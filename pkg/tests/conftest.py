import numpy as np
import pytest

import graphlime as gl


def make_graph(edges, features, labels=None, names=None):
    return gl.Graph(
        features=np.asarray(features, dtype=float),
        edges=np.asarray(edges, dtype=int).reshape(-1, 2),
        labels=None if labels is None else np.asarray(labels, dtype=int),
        feature_names=names,
    )


@pytest.fixture
def path_graph():
    # 0 - 1 - 2 - 3
    rng = np.random.default_rng(0)
    return make_graph([(0, 1), (1, 2), (2, 3)], rng.normal(size=(4, 3)))


@pytest.fixture
def star_graph():
    # center 0 with leaves 1..5
    rng = np.random.default_rng(1)
    return make_graph([(0, i) for i in range(1, 6)], rng.normal(size=(6, 3)))


class SigmoidFeaturePredictor:
    """Deterministic black box: p(class 1) = sigmoid(gain * w @ x_v).

    Depends only on the node's own feature row, honors overrides, and
    returns valid probability rows.
    """

    def __init__(self, weights, gain=4.0):
        self.weights = np.asarray(weights, dtype=float)
        self.gain = gain
        self.class_count_ = 2

    def predict_proba(self, graph, nodes=None, override=None):
        x = graph.features if override is None else np.asarray(override, dtype=float)
        if nodes is None:
            nodes = np.arange(graph.node_count)
        rows = x[np.asarray(nodes, dtype=int)]
        p1 = 1.0 / (1.0 + np.exp(-self.gain * (rows @ self.weights)))
        return np.column_stack([1.0 - p1, p1])


@pytest.fixture
def sigmoid_predictor_factory():
    return SigmoidFeaturePredictor


# Desk-scale benchmark dataset + trained model, shared by the heavier tests.

BENCH_PARAMS = dict(
    node_count=300,
    informative=10,
    nuisance=10,
    classes=8,
    within_degree=10.0,
    between_degree=4.0,
    separation=1.2,
)


@pytest.fixture(scope="session")
def bench_graph():
    return gl.generate_synthetic(seed=11, **BENCH_PARAMS)


@pytest.fixture(scope="session")
def bench_split(bench_graph):
    order = np.random.default_rng(12).permutation(bench_graph.node_count)
    cut = int(0.8 * bench_graph.node_count)
    return np.sort(order[:cut]), np.sort(order[cut:])


@pytest.fixture(scope="session")
def bench_model(bench_graph, bench_split):
    train_ids, test_ids = bench_split
    return gl.ReferenceGnn(seed=3).fit(bench_graph, train_ids, test_ids)


# Acceptance reporting: one line per criterion in the terminal summary.

ACCEPTANCE_RESULTS = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in item.nodeid:
        ACCEPTANCE_RESULTS.append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS:
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{status}  {name}")
