"""Simulated-user experiments and global instance selection.

Three protocols quantify explanation quality against ground truth that only
the harness knows: how often noise columns sneak into explanations, whether
explanations let a user spot untrustworthy predictions, and whether
explanations of a few well-chosen instances identify the better of two
classifiers. Instance selection uses greedy weighted feature coverage over
the explanation matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import GateUnmetError, InsufficientNeighborsError
from .explainers import make_explainer
from .gnn import ReferenceGnn
from .graph import Graph, inject_noise_features, n_hop_neighborhood
from .validation import check_node_ids, check_seed


# --------------------------------------------------------------------------
# Explanation matrix, global importance, coverage, submodular pick
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplanationMatrix:
    """Per-instance local importances: row i holds instance i's weights."""

    values: np.ndarray  # (n_instances, d), nonnegative
    instance_ids: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("explanation matrix must be 2-D")
        if values.shape[0] != len(self.instance_ids):
            raise ValueError("one row per instance id required")
        object.__setattr__(self, "values", values)


def explanation_matrix(explanations, feature_count: int) -> ExplanationMatrix:
    """Stack explanations into a (n_instances x d) importance matrix."""
    rows = np.zeros((len(explanations), feature_count))
    ids = []
    for i, expl in enumerate(explanations):
        ids.append(int(expl.node))
        for j, w in zip(expl.selected, expl.weights):
            rows[i, j] = abs(float(w))
    return ExplanationMatrix(values=rows, instance_ids=tuple(ids))


def global_importance(W) -> np.ndarray:
    """Square root of each feature's column sum of local importances."""
    W = np.asarray(W.values if isinstance(W, ExplanationMatrix) else W, dtype=float)
    if np.any(W < 0):
        raise ValueError("explanation matrix entries must be nonnegative")
    return np.sqrt(W.sum(axis=0))


def coverage_score(instances, W, importance) -> float:
    """Total importance of features covered by at least one chosen instance."""
    W = np.asarray(W.values if isinstance(W, ExplanationMatrix) else W, dtype=float)
    importance = np.asarray(importance, dtype=float)
    idx = np.asarray(sorted(instances), dtype=int)
    if idx.size == 0:
        return 0.0
    covered = (W[idx] > 0).any(axis=0)
    return float(importance[covered].sum())


def submodular_pick(W, importance, budget: int) -> list[int]:
    """Greedy instance selection maximizing weighted feature coverage.

    Adds the instance with the largest coverage gain until ``budget``
    instances are chosen; ties break to the lowest instance index. Picks are
    prefix-consistent: the first b picks for any budget >= b are identical.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    W = np.asarray(W.values if isinstance(W, ExplanationMatrix) else W, dtype=float)
    importance = np.asarray(importance, dtype=float)
    n = W.shape[0]
    if budget > n:
        warnings.warn(
            f"budget {budget} exceeds the {n} candidate instances; picking all",
            stacklevel=2,
        )
        budget = n
    covered = np.zeros(W.shape[1], dtype=bool)
    chosen: list[int] = []
    remaining = list(range(n))
    positive = W > 0
    for _ in range(budget):
        gains = [float(importance[positive[i] & ~covered].sum()) for i in remaining]
        best = int(np.argmax(gains))  # first max -> lowest remaining index
        pick = remaining.pop(best)
        chosen.append(pick)
        covered |= positive[pick]
    return chosen


# --------------------------------------------------------------------------
# Shared harness plumbing
# --------------------------------------------------------------------------


def default_predictor_factory(graph, train_ids, test_ids, seed, **gnn_params):
    return ReferenceGnn(seed=seed, **gnn_params).fit(graph, train_ids, test_ids)


def _split_ids(node_count: int, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    order = rng.permutation(node_count)
    cut = int(round(fraction * node_count))
    return np.sort(order[:cut]), np.sort(order[cut:])


def _train_with_gate(graph, train_ids, test_ids, factory, gate, max_attempts, seed):
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    best = -1.0
    for attempt in range(max_attempts):
        model = factory(graph, train_ids, test_ids, seed + attempt)
        achieved = model.accuracy(graph, test_ids)
        if achieved >= gate:
            return model, attempt + 1, achieved
        best = max(best, achieved)
    raise GateUnmetError(
        f"test accuracy {best:.3f} below the {gate:.2f} gate after "
        f"{max_attempts} attempts",
        achieved=best,
    )


def _build_explainers(methods, top_k, seed, hops, explainer_params):
    params = dict(explainer_params or {})
    params.setdefault("top_k", top_k)
    params.setdefault("seed", seed)
    params.setdefault("hops", hops)
    return {m: make_explainer(m, **params) for m in methods}


# --------------------------------------------------------------------------
# Noise-feature experiment
# --------------------------------------------------------------------------


@dataclass
class NoiseReport:
    """Per-method noisy-feature counts for each explained node."""

    counts: dict[str, list[tuple[int, int]]]
    skipped: dict[str, list[int]]
    noisy_indices: tuple[int, ...]
    top_k: int
    seed: int
    model_info: dict = field(default_factory=dict)

    def mean(self, method: str) -> float:
        values = [c for _, c in self.counts[method]]
        return float(np.mean(values)) if values else float("nan")

    def histogram(self, method: str) -> dict[int, int]:
        hist: dict[int, int] = {}
        for _, c in self.counts[method]:
            hist[c] = hist.get(c, 0) + 1
        return dict(sorted(hist.items()))

    def to_json_dict(self) -> dict:
        return {
            "experiment": "noise",
            "top_k": self.top_k,
            "seed": self.seed,
            "noisy_indices": list(self.noisy_indices),
            "model_info": self.model_info,
            "methods": {
                m: {
                    "counts": [[int(v), int(c)] for v, c in rows],
                    "mean": self.mean(m),
                    "histogram": {str(k): v for k, v in self.histogram(m).items()},
                    "skipped": [int(v) for v in self.skipped[m]],
                }
                for m, rows in self.counts.items()
            },
        }

    def csv_rows(self) -> tuple[list[str], list[list]]:
        header = ["node_id", "method", "noisy_count"]
        rows = [
            [node, method, count]
            for method, pairs in self.counts.items()
            for node, count in pairs
        ]
        return header, rows


def run_noise_experiment(
    graph: Graph,
    methods,
    *,
    noise_count: int = 10,
    nodes_to_explain=200,
    top_k: int = 10,
    seed: int = 0,
    hops: int = 2,
    predictor_factory=None,
    accuracy_gate: float = 0.8,
    max_attempts: int = 25,
    train_fraction: float = 0.8,
    explainer_params=None,
) -> NoiseReport:
    """Inject noise columns, retrain, and count how many get selected.

    A classifier is trained on the noise-augmented graph (retrying seeds
    until its held-out accuracy clears ``accuracy_gate``), each requested
    node is explained with each method, and the report collects
    ``|selected & noisy|`` per node. Raises :class:`GateUnmetError` when the
    gate cannot be met within ``max_attempts``.
    """
    seed = check_seed(seed)
    methods = list(methods)
    if not methods:
        return NoiseReport({}, {}, (), top_k, seed)

    if noise_count > 0:
        augmented, injection = inject_noise_features(graph, noise_count, seed)
        noisy = set(injection.noisy_indices)
    else:
        augmented, noisy = graph, set()

    rng = np.random.default_rng([seed, 1])
    train_ids, test_ids = _split_ids(augmented.node_count, train_fraction, rng)
    factory = predictor_factory or default_predictor_factory
    model, attempts, achieved = _train_with_gate(
        augmented, train_ids, test_ids, factory, accuracy_gate, max_attempts, seed
    )

    if isinstance(nodes_to_explain, (int, np.integer)):
        count = min(int(nodes_to_explain), test_ids.size)
        nodes = np.sort(rng.choice(test_ids, size=count, replace=False))
    else:
        nodes = check_node_ids(nodes_to_explain, augmented.node_count)

    explainers = _build_explainers(methods, top_k, seed, hops, explainer_params)
    counts: dict[str, list[tuple[int, int]]] = {m: [] for m in methods}
    skipped: dict[str, list[int]] = {m: [] for m in methods}
    for method, explainer in explainers.items():
        explainer.fit(augmented, model)
        for v in nodes:
            try:
                expl = explainer.explain(int(v))
            except InsufficientNeighborsError:
                skipped[method].append(int(v))
                continue
            counts[method].append((int(v), len(set(expl.selected) & noisy)))

    return NoiseReport(
        counts=counts,
        skipped=skipped,
        noisy_indices=tuple(sorted(noisy)),
        top_k=top_k,
        seed=seed,
        model_info={
            "attempts": attempts,
            "test_accuracy": achieved,
            "train_accuracy": model.accuracy(augmented, train_ids),
        },
    )


# --------------------------------------------------------------------------
# Trustworthiness experiment
# --------------------------------------------------------------------------


def f1_from_labels(oracle: np.ndarray, user: np.ndarray) -> tuple[float, float, float]:
    """Precision/recall/F1 with the trustworthy label as the positive class."""
    oracle = np.asarray(oracle, dtype=bool)
    user = np.asarray(user, dtype=bool)
    tp = int(np.sum(user & oracle))
    fp = int(np.sum(user & ~oracle))
    fn = int(np.sum(~user & oracle))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class TrustReport:
    """Per-round precision/recall/F1 for each method."""

    scores: dict[str, list[tuple[float, float, float]]]
    untrustworthy_sets: list[tuple[int, ...]]
    nodes: tuple[int, ...]
    top_k: int
    untrust_fraction: float
    rounds: int
    seed: int
    positive_label: str = "trustworthy"

    def mean_f1(self, method: str) -> float:
        return float(np.mean([f1 for _, _, f1 in self.scores[method]]))

    def mean_precision(self, method: str) -> float:
        return float(np.mean([p for p, _, _ in self.scores[method]]))

    def mean_recall(self, method: str) -> float:
        return float(np.mean([r for _, r, _ in self.scores[method]]))

    def to_json_dict(self) -> dict:
        return {
            "experiment": "trust",
            "top_k": self.top_k,
            "untrust_fraction": self.untrust_fraction,
            "rounds": self.rounds,
            "seed": self.seed,
            "positive_label": self.positive_label,
            "nodes": list(self.nodes),
            "untrustworthy_sets": [list(s) for s in self.untrustworthy_sets],
            "methods": {
                m: {
                    "per_round": [[p, r, f] for p, r, f in rows],
                    "mean_precision": self.mean_precision(m),
                    "mean_recall": self.mean_recall(m),
                    "mean_f1": self.mean_f1(m),
                }
                for m, rows in self.scores.items()
            },
        }

    def csv_rows(self) -> tuple[list[str], list[list]]:
        header = ["round", "method", "precision", "recall", "f1"]
        rows = []
        for method, triples in self.scores.items():
            for r, (p, rec, f1) in enumerate(triples):
                rows.append([r, method, p, rec, f1])
        return header, rows


def _class_surrogate(graph, model, node, selected, hops):
    """Least-squares per-class scores over the local sample, restricted
    to the explanation's selected features (intercept included)."""
    nodes = n_hop_neighborhood(graph, node, hops)
    outputs = model.predict_proba(graph, nodes=nodes)
    cols = np.asarray(selected, dtype=int)
    design = np.hstack(
        [np.ones((nodes.size, 1)), graph.features[np.ix_(nodes, cols)]]
    )
    weights, *_ = np.linalg.lstsq(design, outputs, rcond=None)
    return weights  # (1 + k, classes)


def _surrogate_class(weights: np.ndarray, x_selected: np.ndarray) -> int:
    scores = np.concatenate([[1.0], x_selected]) @ weights
    return int(np.argmax(scores))


def run_trust_experiment(
    graph: Graph,
    model,
    methods,
    *,
    nodes=None,
    untrust_fraction: float = 0.3,
    top_k: int = 10,
    rounds: int = 10,
    seed: int = 0,
    hops: int = 2,
    explainer_params=None,
) -> TrustReport:
    """Simulated users flag untrustworthy predictions from explanations.

    Per round a random feature subset is marked untrustworthy. The oracle
    labels a prediction untrustworthy iff its argmax changes when those
    columns are zeroed everywhere. Simulated users see only explanations:
    surrogate-based methods (graphlime, lime_linear) refit a linear model on
    the selected features and check whether ITS argmax flips under the same
    zeroing; set-based methods (greedy, random) mistrust any explanation
    that contains an untrustworthy feature. F1 treats trustworthy as the
    positive class. Explanations do not depend on the round's untrustworthy
    set, so they are computed once and reused.
    """
    seed = check_seed(seed)
    methods = list(methods)
    d = graph.feature_count
    n_untrust = int(np.floor(untrust_fraction * d))
    if untrust_fraction > 0 and n_untrust == 0:
        raise ValueError(
            f"untrust_fraction={untrust_fraction} selects zero of {d} features"
        )

    if nodes is None:
        rng0 = np.random.default_rng([seed, 2])
        nodes = np.sort(rng0.choice(graph.node_count, size=min(100, graph.node_count), replace=False))
    nodes = check_node_ids(nodes, graph.node_count)

    base = model.predict_proba(graph, nodes=nodes)
    base_class = np.argmax(base, axis=1)

    explainers = _build_explainers(methods, top_k, seed, hops, explainer_params)
    plans: dict[str, list] = {m: [] for m in methods}
    usable = np.ones(nodes.size, dtype=bool)
    for method, explainer in explainers.items():
        explainer.fit(graph, model)
        for i, v in enumerate(nodes):
            if not usable[i]:
                plans[method].append(None)
                continue
            try:
                expl = explainer.explain(int(v))
            except InsufficientNeighborsError:
                usable[i] = False
                plans[method].append(None)
                continue
            if method in ("graphlime", "lime_linear"):
                surrogate = _class_surrogate(graph, model, int(v), expl.selected, hops)
                x_sel = graph.features[int(v), list(expl.selected)]
                plans[method].append(
                    (expl.selected, surrogate, _surrogate_class(surrogate, x_sel), x_sel)
                )
            else:
                plans[method].append((expl.selected,))
    # Drop nodes any method failed on so every method scores the same set.
    keep = np.where(usable)[0]
    eval_nodes = nodes[keep]

    scores: dict[str, list[tuple[float, float, float]]] = {m: [] for m in methods}
    untrust_sets: list[tuple[int, ...]] = []
    for r in range(rounds):
        rng = np.random.default_rng([seed, 3, r])
        untrust = (
            np.sort(rng.choice(d, size=n_untrust, replace=False))
            if n_untrust
            else np.zeros(0, dtype=int)
        )
        untrust_set = set(int(j) for j in untrust)
        untrust_sets.append(tuple(sorted(untrust_set)))

        override = np.array(graph.features)
        if untrust.size:
            override[:, untrust] = 0.0
        masked = model.predict_proba(graph, override=override, nodes=eval_nodes)
        oracle = np.argmax(masked, axis=1) == base_class[keep]

        for method in methods:
            user = np.empty(eval_nodes.size, dtype=bool)
            for out_i, plan_i in enumerate(keep):
                plan = plans[method][plan_i]
                selected = plan[0]
                overlap = [k for k, j in enumerate(selected) if j in untrust_set]
                if len(plan) == 1:  # set-based user rule
                    user[out_i] = not overlap
                else:
                    _, surrogate, base_cls, x_sel = plan
                    if not overlap:
                        user[out_i] = True
                        continue
                    x_mod = x_sel.copy()
                    x_mod[overlap] = 0.0
                    user[out_i] = _surrogate_class(surrogate, x_mod) == base_cls
            scores[method].append(f1_from_labels(oracle, user))

    return TrustReport(
        scores=scores,
        untrustworthy_sets=untrust_sets,
        nodes=tuple(int(v) for v in eval_nodes),
        top_k=top_k,
        untrust_fraction=untrust_fraction,
        rounds=rounds,
        seed=seed,
    )


# --------------------------------------------------------------------------
# Model-selection experiment
# --------------------------------------------------------------------------


def train_reference(graph, train_ids, test_ids, seed, noisy_indices=()):
    """Default trainer for the better classifier: plain fit on the graph."""
    return ReferenceGnn(seed=seed).fit(graph, train_ids, test_ids)


def train_shortcut_reliant(graph, train_ids, test_ids, seed, noisy_indices=(),
                           leak: float = 1.5, jitter: float = 0.6, blur: float = 3.0):
    """Trainer that plants a spurious shortcut through the noise columns.

    The training view overwrites each noisy column with a label-correlated
    signal and blurs every other column with extra noise, so the fitted
    model genuinely leans on the shortcut columns. On the real graph (where
    they are noise) its accuracy drops and its explanations expose the
    reliance.
    """
    if not noisy_indices:
        return ReferenceGnn(seed=seed).fit(graph, train_ids, test_ids)
    rng = np.random.default_rng([check_seed(seed), 11])
    view = np.array(graph.features)
    labels = graph.labels
    classes = graph.class_count
    noisy = np.asarray(sorted(noisy_indices), dtype=int)
    real = np.setdiff1d(np.arange(graph.feature_count), noisy)
    scale = view[:, real].std(axis=0)
    view[:, real] += blur * scale * rng.standard_normal((labels.size, real.size))
    for slot, j in enumerate(noisy):
        target = slot % classes
        view[:, j] = leak * (labels == target) + jitter * rng.standard_normal(labels.size)
    shortcut_graph = graph.with_features(view, graph.feature_names)
    return ReferenceGnn(seed=seed).fit(shortcut_graph, train_ids, test_ids)


@dataclass
class ModelSelectionReport:
    """Fraction of rounds each method picked the truly better classifier."""

    accuracy: dict[str, dict[int, float]]
    b_values: tuple[int, ...]
    rounds: int
    seed: int
    details: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "experiment": "model_selection",
            "rounds": self.rounds,
            "seed": self.seed,
            "b_values": list(self.b_values),
            "accuracy": {
                m: {str(b): acc for b, acc in per.items()}
                for m, per in self.accuracy.items()
            },
            "details": self.details,
        }

    def csv_rows(self) -> tuple[list[str], list[list]]:
        header = ["method", "budget", "accuracy"]
        rows = [
            [m, b, acc]
            for m, per in self.accuracy.items()
            for b, acc in sorted(per.items())
        ]
        return header, rows


def run_model_selection(
    graph: Graph,
    methods,
    b_values,
    *,
    noise_count: int = 10,
    rounds: int = 50,
    seed: int = 0,
    top_k: int = 10,
    hops: int = 2,
    candidates: int = 40,
    accuracy_threshold: float = 0.7,
    gap_threshold: float = 0.05,
    max_attempts: int = 25,
    trainer_strong=None,
    trainer_weak=None,
    weak_trainer_params=None,
    train_fraction: float = 0.8,
    explainer_params=None,
) -> ModelSelectionReport:
    """Can explanations of a few picked instances identify the better model?

    Per round: inject noise columns (the untrustworthy set), train a pair of
    classifiers until both clear ``accuracy_threshold`` on train and test
    and their test accuracies differ by more than ``gap_threshold``
    (retrying up to ``max_attempts``). For each explanation method, explain
    a candidate pool under each classifier, greedily pick B instances by
    coverage, and choose the classifier whose picked explanations contain
    fewer untrustworthy features (ties by seeded coin flip). The method
    name ``random_choice`` is the coin-flip baseline. Reported accuracy is
    the fraction of rounds choosing the classifier with higher test
    accuracy, per B.
    """
    seed = check_seed(seed)
    methods = list(methods)
    b_values = tuple(int(b) for b in b_values)
    if not b_values or min(b_values) < 1:
        raise ValueError("b_values must be positive")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    b_max = max(b_values)
    trainer_strong = trainer_strong or train_reference
    if trainer_weak is None:
        weak_params = dict(weak_trainer_params or {})

        def trainer_weak(graph, train_ids, test_ids, seed, noisy_indices=()):
            return train_shortcut_reliant(
                graph, train_ids, test_ids, seed, noisy_indices, **weak_params
            )

    explain_methods = [m for m in methods if m != "random_choice"]
    correct = {m: {b: 0 for b in b_values} for m in methods}
    details: list[dict] = []

    for r in range(rounds):
        rng = np.random.default_rng([seed, 4, r])
        noise_seed = int(rng.integers(2**31))
        augmented, injection = inject_noise_features(graph, noise_count, noise_seed)
        untrust = set(injection.noisy_indices)
        train_ids, test_ids = _split_ids(augmented.node_count, train_fraction, rng)

        pair = None
        for attempt in range(max_attempts):
            seed_a = int(rng.integers(2**31))
            seed_b = int(rng.integers(2**31))
            model_a = trainer_strong(augmented, train_ids, test_ids, seed_a,
                                     injection.noisy_indices)
            model_b = trainer_weak(augmented, train_ids, test_ids, seed_b,
                                   injection.noisy_indices)
            accs = {
                "train_a": model_a.accuracy(augmented, train_ids),
                "test_a": model_a.accuracy(augmented, test_ids),
                "train_b": model_b.accuracy(augmented, train_ids),
                "test_b": model_b.accuracy(augmented, test_ids),
            }
            if (
                min(accs.values()) > accuracy_threshold
                and abs(accs["test_a"] - accs["test_b"]) > gap_threshold
            ):
                pair = (model_a, model_b, accs)
                break
        if pair is None:
            raise GateUnmetError(
                f"round {r}: no classifier pair met the accuracy/gap gates in "
                f"{max_attempts} attempts",
                achieved=accs,
            )
        model_a, model_b, accs = pair
        better = 0 if accs["test_a"] > accs["test_b"] else 1

        pool_size = min(candidates, test_ids.size)
        pool = np.sort(rng.choice(test_ids, size=pool_size, replace=False))

        round_detail = {"round": r, "accuracies": accs, "better": better, "choices": {}}
        for method in explain_methods:
            explainer_proto = _build_explainers(
                [method], top_k, seed, hops, explainer_params
            )[method]
            per_model_counts = []
            explanations_by_model = []
            for model in (model_a, model_b):
                explainer = explainer_proto.__class__(**explainer_proto.get_params())
                explainer.fit(augmented, model)
                expls = []
                for v in pool:
                    try:
                        expls.append(explainer.explain(int(v)))
                    except InsufficientNeighborsError:
                        expls.append(None)
                explanations_by_model.append(expls)
            shared = [
                i for i in range(pool_size)
                if explanations_by_model[0][i] is not None
                and explanations_by_model[1][i] is not None
            ]
            for expls in explanations_by_model:
                usable = [expls[i] for i in shared]
                W = explanation_matrix(usable, augmented.feature_count)
                importance = global_importance(W)
                picks = submodular_pick(W, importance, min(b_max, len(usable)))
                cumulative, counts_by_b, running = [], {}, 0
                for pos, pick in enumerate(picks, start=1):
                    running += len(set(usable[pick].selected) & untrust)
                    cumulative.append(running)
                for b in b_values:
                    idx = min(b, len(picks)) - 1
                    counts_by_b[b] = cumulative[idx] if idx >= 0 else 0
                per_model_counts.append(counts_by_b)
            choice_by_b = {}
            for b in b_values:
                ca, cb = per_model_counts[0][b], per_model_counts[1][b]
                if ca < cb:
                    choice = 0
                elif cb < ca:
                    choice = 1
                else:
                    choice = int(rng.integers(2))
                choice_by_b[b] = choice
                correct[method][b] += int(choice == better)
            round_detail["choices"][method] = {str(b): c for b, c in choice_by_b.items()}

        if "random_choice" in methods:
            choice_by_b = {b: int(rng.integers(2)) for b in b_values}
            for b, choice in choice_by_b.items():
                correct["random_choice"][b] += int(choice == better)
            round_detail["choices"]["random_choice"] = {
                str(b): c for b, c in choice_by_b.items()
            }
        details.append(round_detail)

    accuracy = {
        m: {b: correct[m][b] / rounds for b in b_values} for m in methods
    }
    return ModelSelectionReport(
        accuracy=accuracy,
        b_values=b_values,
        rounds=rounds,
        seed=seed,
        details=details,
    )
