"""Reference mean-aggregation node classifier and its persistence format.

The bundled model exists so the full pipeline runs without an external deep
learning stack. It is a small two-layer message-passing network: each layer
concatenates a node's own representation with the mean over its neighborhood
(self-loop included) and applies a dense weight matrix; training is
full-batch gradient descent on cross-entropy, deterministic under a seed.
Any object honoring the :class:`Predictor` protocol can stand in for it.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ModelFormatError, TrainingError
from .graph import Graph
from .serialize import dumps_canonical, write_text_atomic
from .validation import check_node_ids, check_seed

MODEL_FORMAT_VERSION = 1


@runtime_checkable
class Predictor(Protocol):
    """Black-box contract every explainer consumes.

    ``predict_proba`` must return one probability row per requested node,
    computed against ``override`` instead of the graph's own features when
    an override matrix is supplied, and must be deterministic.
    """

    class_count_: int

    def predict_proba(self, graph: Graph, nodes=None, override=None) -> np.ndarray:
        ...


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


class ReferenceGnn(BaseEstimator):
    """Two-layer mean-aggregation classifier trained by full-batch descent.

    Parameters
    ----------
    hidden_width : int
        Width of the hidden layer.
    learning_rate : float
        Fixed step size for gradient descent.
    epochs : int
        Number of full-batch updates; 0 leaves the random init untouched.
    seed : int
        Controls weight initialization; training itself is deterministic.
    """

    def __init__(self, hidden_width: int = 16, learning_rate: float = 0.5,
                 epochs: int = 300, seed: int = 0):
        self.hidden_width = hidden_width
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed

    # ------------------------------------------------------------------ fit

    def fit(self, graph: Graph, train_ids, test_ids=None):
        if graph.labels is None:
            raise ValueError("training requires a labeled graph")
        train_ids = check_node_ids(train_ids, graph.node_count)
        if test_ids is not None:
            test_ids = check_node_ids(test_ids, graph.node_count)
            if np.intersect1d(train_ids, test_ids).size:
                raise ValueError("train and test ids overlap")
        if train_ids.size == 0:
            raise ValueError("empty training set")
        check_seed(self.seed)

        n, d = graph.features.shape
        classes = graph.class_count
        h = int(self.hidden_width)
        # Small init: an untrained model emits near-uniform probabilities.
        rng = np.random.default_rng(self.seed)
        w1 = rng.normal(0.0, 0.1 / np.sqrt(2 * d), size=(2 * d, h))
        w2 = rng.normal(0.0, 0.1 / np.sqrt(2 * h), size=(2 * h, classes))

        agg = graph.mean_aggregator()
        x = graph.features
        labels = graph.labels
        onehot = np.zeros((n, classes))
        onehot[np.arange(n), labels] = 1.0
        train_mask = np.zeros(n, dtype=bool)
        train_mask[train_ids] = True

        for epoch in range(int(self.epochs)):
            probs, cache = self._forward(x, agg, w1, w2)
            loss = -float(np.mean(np.log(probs[train_ids, labels[train_ids]] + 1e-12)))
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            grad_w1, grad_w2 = self._backward(cache, probs, onehot, train_mask, w2)
            w1 = w1 - self.learning_rate * grad_w1
            w2 = w2 - self.learning_rate * grad_w2

        self.w1_ = w1
        self.w2_ = w2
        self.feature_count_ = d
        self.class_count_ = classes
        self.train_accuracy_ = self.accuracy(graph, train_ids)
        self.test_accuracy_ = (
            self.accuracy(graph, test_ids) if test_ids is not None and test_ids.size else None
        )
        self.training_meta_ = {
            "epochs": int(self.epochs),
            "seed": int(self.seed),
            "train_accuracy": self.train_accuracy_,
            "test_accuracy": self.test_accuracy_,
        }
        return self

    @staticmethod
    def _forward(x, agg, w1, w2):
        ax = agg @ x
        in1 = np.hstack([x, ax])
        pre = in1 @ w1
        hidden = np.maximum(pre, 0.0)
        ah = agg @ hidden
        in2 = np.hstack([hidden, ah])
        probs = _softmax(in2 @ w2)
        return probs, (agg, in1, pre, in2)

    @staticmethod
    def _backward(cache, probs, onehot, train_mask, w2):
        agg, in1, pre, in2 = cache
        n_train = int(train_mask.sum())
        h = pre.shape[1]
        dlogits = probs - onehot
        dlogits[~train_mask] = 0.0
        dlogits /= n_train
        grad_w2 = in2.T @ dlogits
        din2 = dlogits @ w2.T
        dhidden = din2[:, :h] + agg.T @ din2[:, h:]
        dpre = dhidden * (pre > 0.0)
        grad_w1 = in1.T @ dpre
        return grad_w1, grad_w2

    def _loss_and_grads(self, graph: Graph, train_ids) -> tuple[float, np.ndarray, np.ndarray]:
        """Loss and analytic weight gradients at the current parameters."""
        train_ids = check_node_ids(train_ids, graph.node_count)
        labels = graph.labels
        n = graph.node_count
        onehot = np.zeros((n, self.class_count_))
        onehot[np.arange(n), labels] = 1.0
        mask = np.zeros(n, dtype=bool)
        mask[train_ids] = True
        probs, cache = self._forward(graph.features, graph.mean_aggregator(), self.w1_, self.w2_)
        loss = -float(np.mean(np.log(probs[train_ids, labels[train_ids]] + 1e-12)))
        grad_w1, grad_w2 = self._backward(cache, probs, onehot, mask, self.w2_)
        return loss, grad_w1, grad_w2

    # -------------------------------------------------------------- predict

    def predict_proba(self, graph: Graph, nodes=None, override=None) -> np.ndarray:
        """Probability rows for ``nodes`` (all nodes when omitted).

        ``override`` replaces the graph's feature matrix for this call only,
        enabling feature-removal and perturbation experiments.
        """
        if not hasattr(self, "w1_"):
            raise ValueError("model is not fitted")
        if graph.feature_count != self.feature_count_:
            raise ValueError(
                f"graph has {graph.feature_count} features, model expects "
                f"{self.feature_count_}"
            )
        x = graph.features
        if override is not None:
            override = np.asarray(override, dtype=float)
            if override.shape != x.shape:
                raise ValueError(
                    f"override shape {override.shape} does not match features "
                    f"{x.shape}"
                )
            x = override
        probs, _ = self._forward(x, graph.mean_aggregator(), self.w1_, self.w2_)
        if nodes is None:
            return probs
        return probs[check_node_ids(nodes, graph.node_count)]

    def predict(self, graph: Graph, nodes=None, override=None) -> np.ndarray:
        return np.argmax(self.predict_proba(graph, nodes, override), axis=1)

    def accuracy(self, graph: Graph, node_ids) -> float:
        """Fraction of ``node_ids`` whose argmax prediction matches the label."""
        if graph.labels is None:
            raise ValueError("accuracy requires a labeled graph")
        node_ids = check_node_ids(node_ids, graph.node_count)
        if node_ids.size == 0:
            raise ValueError("empty node id set")
        predicted = self.predict(graph, nodes=node_ids)
        return float(np.mean(predicted == graph.labels[node_ids]))


def save_model(model: ReferenceGnn, path) -> None:
    """Write the model as versioned JSON (dims + row-major flattened weights)."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_count": int(model.feature_count_),
        "hidden_width": int(model.w1_.shape[1]),
        "class_count": int(model.class_count_),
        "w1": [float(v) for v in model.w1_.ravel()],
        "w2": [float(v) for v in model.w2_.ravel()],
        "training": model.training_meta_,
        "params": {
            "hidden_width": int(model.hidden_width),
            "learning_rate": float(model.learning_rate),
            "epochs": int(model.epochs),
            "seed": int(model.seed),
        },
    }
    write_text_atomic(Path(path), dumps_canonical(payload))


def load_model(path) -> ReferenceGnn:
    """Read a model written by :func:`save_model`; round-trips are lossless."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(payload, dict) or payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format version {payload.get('format_version')!r}"
            if isinstance(payload, dict)
            else f"{path}: not a model file"
        )
    try:
        d = int(payload["feature_count"])
        h = int(payload["hidden_width"])
        classes = int(payload["class_count"])
        w1 = np.asarray(payload["w1"], dtype=float)
        w2 = np.asarray(payload["w2"], dtype=float)
        params = payload.get("params", {})
        training = payload.get("training", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: missing or malformed field ({exc})") from None
    if w1.size != 2 * d * h:
        raise ModelFormatError(
            f"{path}: w1 has {w1.size} values, expected {2 * d * h} for "
            f"feature_count={d}, hidden_width={h}"
        )
    if w2.size != 2 * h * classes:
        raise ModelFormatError(
            f"{path}: w2 has {w2.size} values, expected {2 * h * classes}"
        )
    model = ReferenceGnn(
        hidden_width=int(params.get("hidden_width", h)),
        learning_rate=float(params.get("learning_rate", 0.5)),
        epochs=int(params.get("epochs", 0)),
        seed=int(params.get("seed", 0)),
    )
    model.w1_ = w1.reshape(2 * d, h)
    model.w2_ = w2.reshape(2 * h, classes)
    model.feature_count_ = d
    model.class_count_ = classes
    model.training_meta_ = training
    model.train_accuracy_ = training.get("train_accuracy")
    model.test_accuracy_ = training.get("test_accuracy")
    return model
