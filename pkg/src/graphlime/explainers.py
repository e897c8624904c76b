"""Four per-node explanation methods behind one estimator-shaped contract.

Every explainer binds to a graph and a black-box predictor via ``fit`` and
then answers ``explain(node)`` with a ranked feature list. The main method
fits the nonnegative kernel-dependence lasso over the node's N-hop
neighborhood; the baselines are a perturbation-sampled linear lasso, greedy
feature removal, and uniform random selection.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.linear_model import lars_path

from .exceptions import DegenerateProblemError
from .graph import Graph, assemble_local_sample, n_hop_neighborhood
from .hsic import KernelConfig, SolverConfig, build_problem, solve_nonnegative_lars, top_k
from .serialize import dumps_canonical
from .validation import check_node_id, check_seed

VALID_METHODS = ("graphlime", "lime_linear", "greedy", "random")


def _weighted_lasso_path_k(X, y, sample_weight, k: int) -> np.ndarray:
    """Signed lasso coefficients at the first path point with k active features.

    Sample weights fold in as row rescaling of the (weight-)centered data,
    which is the standard weighted-least-squares reduction. Falls back to
    the end of the path when it never reaches k active features.
    """
    w = np.asarray(sample_weight, dtype=float)
    total = w.sum()
    if not total > 0:
        raise DegenerateProblemError(
            "proximity weights underflowed to zero; widen the kernel"
        )
    x_mean = (w[:, None] * X).sum(axis=0) / total
    y_mean = float((w * y).sum() / total)
    root = np.sqrt(w)
    xw = (X - x_mean) * root[:, None]
    yw = (y - y_mean) * root
    _, _, coefs = lars_path(xw, yw, method="lasso")
    active_counts = np.count_nonzero(coefs, axis=0)
    hits = np.where(active_counts >= k)[0]
    column = hits[0] if hits.size else coefs.shape[1] - 1
    return np.asarray(coefs[:, column], dtype=float)


@dataclass(frozen=True)
class Explanation:
    """Ranked feature indices explaining one node's prediction.

    ``weights`` aligns with ``selected`` (nonnegative lasso weights for
    graphlime, absolute linear coefficients for lime_linear, 1.0 for the
    coefficient-free baselines). ``beta`` keeps the full coefficient vector
    when the method has one. ``config`` snapshots the explainer settings.
    """

    node: int
    method: str
    selected: tuple[int, ...]
    weights: tuple[float, ...]
    sample_size: int
    config: dict = field(default_factory=dict)
    beta: np.ndarray | None = None

    def __post_init__(self):
        if len(self.selected) != len(self.weights):
            raise ValueError("selected and weights must align")
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected indices must be unique")

    def config_digest(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def to_dict(self, feature_names=None) -> dict:
        def name(i: int) -> str:
            if feature_names is not None:
                return str(feature_names[i])
            return f"x{i}"

        return {
            "node": int(self.node),
            "method": self.method,
            "selected": [
                {"index": int(i), "name": name(int(i)), "weight": float(w)}
                for i, w in zip(self.selected, self.weights)
            ],
            "n": int(self.sample_size),
            "config_digest": self.config_digest(),
        }

    def to_json(self, feature_names=None) -> str:
        return dumps_canonical(self.to_dict(feature_names))


class BaseNodeExplainer(BaseEstimator):
    """Common fit/explain plumbing; subclasses implement ``_explain``."""

    method = "base"
    requires_model = True

    def fit(self, graph: Graph, model=None):
        if self.requires_model and model is None:
            raise ValueError(f"{self.method} explainer requires a predictor")
        self.graph_ = graph
        self.model_ = model
        self._post_fit()
        return self

    def _post_fit(self):
        pass

    def explain(self, node: int) -> Explanation:
        if not hasattr(self, "graph_"):
            raise ValueError("explainer is not fitted; call fit(graph, model) first")
        node = check_node_id(node, self.graph_.node_count)
        return self._explain(node)

    def _snapshot(self) -> dict:
        config = {k: v for k, v in self.get_params().items()}
        config["method"] = self.method
        return config

    def _explain(self, node: int) -> Explanation:  # pragma: no cover - abstract
        raise NotImplementedError


class GraphLimeExplainer(BaseNodeExplainer):
    """Nonlinear local explanations from the kernel-dependence lasso.

    For the explained node: sample its ``hops``-hop neighborhood, query the
    predictor on every sampled node, regress the output Gram onto the
    per-feature Grams under a nonnegativity constraint, and return the
    ``top_k`` positive-weight features. Deterministic; no sampling noise.
    """

    method = "graphlime"

    def __init__(
        self,
        hops: int = 2,
        top_k: int = 10,
        sigma_x: float | str = "auto",
        sigma_y: float | str = "auto",
        use_adjacency_mask: bool = False,
        rho: float | None = None,
        max_iterations: int | None = None,
        tolerance: float = 1e-7,
    ):
        self.hops = hops
        self.top_k = top_k
        self.sigma_x = sigma_x
        self.sigma_y = sigma_y
        self.use_adjacency_mask = use_adjacency_mask
        self.rho = rho
        self.max_iterations = max_iterations
        self.tolerance = tolerance

    def _post_fit(self):
        self._proba_cache = None

    def _predictions(self) -> np.ndarray:
        # One full forward pass serves every explain() call on this graph.
        if self._proba_cache is None:
            self._proba_cache = self.model_.predict_proba(self.graph_)
        return self._proba_cache

    def _explain(self, node: int) -> Explanation:
        nodes = n_hop_neighborhood(self.graph_, node, self.hops)
        sample = assemble_local_sample(self.graph_, nodes, self._predictions()[nodes])
        kernel_config = KernelConfig(
            sigma_x=self.sigma_x,
            sigma_y=self.sigma_y,
            use_adjacency_mask=self.use_adjacency_mask,
        )
        problem = build_problem(sample, kernel_config, self.graph_)
        if self.rho is not None:
            solver_config = SolverConfig(
                rho=self.rho, max_iterations=self.max_iterations, tolerance=self.tolerance
            )
        else:
            solver_config = SolverConfig(
                target_nonzeros=self.top_k,
                max_iterations=self.max_iterations,
                tolerance=self.tolerance,
            )
        coef = solve_nonnegative_lars(problem, solver_config)
        selected = top_k(coef, self.top_k)
        return Explanation(
            node=node,
            method=self.method,
            selected=tuple(selected),
            weights=tuple(float(coef.beta[j]) for j in selected),
            sample_size=sample.n,
            config=self._snapshot(),
            beta=coef.beta,
        )


class LinearLimeExplainer(BaseNodeExplainer):
    """Perturbation-sampled, proximity-weighted linear lasso baseline.

    Draws Gaussian perturbations of the explained node's feature row
    (``scale`` times each column's standard deviation), queries the
    predictor with the perturbed row substituted in, and fits a lasso from
    perturbed features to the probability of the node's original class with
    weights exp(-||x' - x||^2 / width^2). The lasso path is stopped at the
    first point with ``top_k`` active features, so the explanation is the
    K features the lasso selects, ranked by |coefficient|.
    """

    method = "lime_linear"

    def __init__(
        self,
        top_k: int = 10,
        num_samples: int = 500,
        scale: float = 0.5,
        width: float | None = None,
        seed: int = 0,
    ):
        self.top_k = top_k
        self.num_samples = num_samples
        self.scale = scale
        self.width = width
        self.seed = seed

    def _explain(self, node: int) -> Explanation:
        graph = self.graph_
        d = graph.feature_count
        if self.num_samples < d / 10:
            raise ValueError(
                f"num_samples={self.num_samples} too small for {d} features "
                f"(need at least d/10)"
            )
        rng = np.random.default_rng([check_seed(self.seed), node])
        x_center = graph.features[node]
        stds = graph.features.std(axis=0)
        if self.width is not None:
            if not self.width > 0:
                raise ValueError("width must be strictly positive")
            width = float(self.width)
        else:
            width = float(np.sqrt(d) * np.median(stds))
            if width <= 0:
                width = 1.0

        noise = rng.standard_normal((self.num_samples, d)) * (self.scale * stds)
        perturbed = x_center + noise
        if np.allclose(perturbed, perturbed[0]):
            raise DegenerateProblemError(
                "all perturbations identical (scale 0 or constant features); "
                "cannot fit a local linear model"
            )

        target_class = int(np.argmax(self.model_.predict_proba(graph, nodes=[node])[0]))
        override = np.array(graph.features)
        targets = np.empty(self.num_samples)
        for i in range(self.num_samples):
            override[node] = perturbed[i]
            targets[i] = self.model_.predict_proba(graph, nodes=[node], override=override)[
                0, target_class
            ]
        weights = np.exp(-np.sum(noise * noise, axis=1) / (width * width))

        coef = _weighted_lasso_path_k(perturbed, targets, weights, self.top_k)
        order = np.argsort(-np.abs(coef), kind="stable")
        selected = [int(j) for j in order if coef[j] != 0.0][: self.top_k]
        return Explanation(
            node=node,
            method=self.method,
            selected=tuple(selected),
            weights=tuple(float(abs(coef[j])) for j in selected),
            sample_size=self.num_samples,
            config=self._snapshot(),
            beta=coef,
        )


class GreedyExplainer(BaseNodeExplainer):
    """Removes the most prediction-decreasing feature until the class flips.

    Each step zeroes, across all nodes, the single remaining column whose
    removal most decreases the probability of the node's original class
    (ties to the lowest index); stops when the argmax class changes or
    after ``max_removals`` steps. The removal order is the explanation.
    """

    method = "greedy"

    def __init__(self, top_k: int = 10, max_removals: int | None = None):
        self.top_k = top_k
        self.max_removals = max_removals

    def _explain(self, node: int) -> Explanation:
        graph = self.graph_
        d = graph.feature_count
        limit = self.max_removals if self.max_removals is not None else self.top_k
        base = self.model_.predict_proba(graph, nodes=[node])[0]
        target_class = int(np.argmax(base))
        override = np.array(graph.features)
        removed: list[int] = []
        removed_mask = np.zeros(d, dtype=bool)
        for _ in range(limit):
            best_j = -1
            best_p = np.inf
            for j in range(d):
                if removed_mask[j]:
                    continue
                saved = override[:, j].copy()
                override[:, j] = 0.0
                p = self.model_.predict_proba(graph, nodes=[node], override=override)[
                    0, target_class
                ]
                override[:, j] = saved
                if p < best_p:  # strict: ties keep the lowest index
                    best_p = p
                    best_j = j
            if best_j < 0:
                break
            override[:, best_j] = 0.0
            removed.append(best_j)
            removed_mask[best_j] = True
            now = self.model_.predict_proba(graph, nodes=[node], override=override)[0]
            if int(np.argmax(now)) != target_class:
                break
        return Explanation(
            node=node,
            method=self.method,
            selected=tuple(removed),
            weights=tuple(1.0 for _ in removed),
            sample_size=graph.node_count,
            config=self._snapshot(),
        )


class RandomExplainer(BaseNodeExplainer):
    """Uniformly samples ``top_k`` features without replacement."""

    method = "random"
    requires_model = False

    def __init__(self, top_k: int = 10, seed: int = 0):
        self.top_k = top_k
        self.seed = seed

    def _explain(self, node: int) -> Explanation:
        d = self.graph_.feature_count
        if self.top_k > d:
            raise ValueError(f"top_k={self.top_k} exceeds feature count {d}")
        rng = np.random.default_rng([check_seed(self.seed), node])
        selected = rng.choice(d, size=self.top_k, replace=False)
        return Explanation(
            node=node,
            method=self.method,
            selected=tuple(int(j) for j in selected),
            weights=tuple(1.0 for _ in range(self.top_k)),
            sample_size=0,
            config=self._snapshot(),
        )


_EXPLAINERS = {
    "graphlime": GraphLimeExplainer,
    "lime_linear": LinearLimeExplainer,
    "greedy": GreedyExplainer,
    "random": RandomExplainer,
}


def make_explainer(method: str, **params) -> BaseNodeExplainer:
    """Build an explainer by method name, keeping only params it understands."""
    if method not in _EXPLAINERS:
        raise ValueError(
            f"unknown method {method!r}; valid methods: {', '.join(VALID_METHODS)}"
        )
    cls = _EXPLAINERS[method]
    accepted = cls().get_params().keys()
    kwargs = {k: v for k, v in params.items() if k in accepted}
    return cls(**kwargs)
