"""Graph container, dataset IO, neighborhood sampling, and noise injection.

Datasets arrive as three plain-text files: a tab-separated edge list, a CSV
feature matrix with a header of feature names (row index == node id), and an
optional label file with one integer class per line.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import GraphFormatError, InsufficientNeighborsError
from .validation import check_node_id, check_probability_rows, check_seed


@dataclass(frozen=True)
class Graph:
    """Undirected graph with one dense feature row per node.

    Edges are canonicalized on construction: symmetrized, deduplicated,
    stored as (min, max) pairs in lexicographic order, with self-loops
    dropped (aggregation and masking add them logically). Arrays are
    marked read-only; the graph never mutates after construction.

    Parameters
    ----------
    features : ndarray of shape (node_count, d)
        Dense per-node feature matrix, d >= 1.
    edges : array-like of shape (m, 2)
        Undirected edges in any order/orientation; duplicates allowed.
    labels : ndarray of shape (node_count,), optional
        Integer class ids.
    feature_names : sequence of str, optional
        One name per feature column.
    """

    features: np.ndarray
    edges: np.ndarray
    labels: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2 or features.shape[1] < 1:
            raise ValueError(f"features must be 2-D with d >= 1, got {features.shape}")
        n = features.shape[0]

        edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            bad = edges[(edges < 0).any(axis=1) | (edges >= n).any(axis=1)][0]
            raise ValueError(f"edge {tuple(bad)} has endpoint outside [0, {n})")
        edges = edges[edges[:, 0] != edges[:, 1]]  # self-loops are implicit
        if edges.size:
            edges = np.sort(edges, axis=1)
            edges = np.unique(edges, axis=0)
        else:
            edges = edges.reshape(0, 2)

        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=int)
            if labels.shape != (n,):
                raise ValueError(
                    f"labels has {labels.shape[0]} entries, expected {n}"
                )
            labels.setflags(write=False)

        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != features.shape[1]:
                raise ValueError(
                    f"{len(names)} feature names for {features.shape[1]} columns"
                )

        features.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)

        # CSR adjacency with sorted neighbor lists, for O(deg) lookups.
        if edges.size:
            both = np.concatenate([edges, edges[:, ::-1]])
            order = np.lexsort((both[:, 1], both[:, 0]))
            both = both[order]
            indptr = np.searchsorted(both[:, 0], np.arange(n + 1))
            neighbors = np.ascontiguousarray(both[:, 1])
        else:
            indptr = np.zeros(n + 1, dtype=int)
            neighbors = np.zeros(0, dtype=int)
        indptr.setflags(write=False)
        neighbors.setflags(write=False)
        self._cache["indptr"] = indptr
        self._cache["neighbors"] = neighbors

    @property
    def node_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    @property
    def class_count(self) -> int:
        if self.labels is None:
            raise ValueError("graph has no labels")
        return int(self.labels.max()) + 1

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor ids of ``v`` (without ``v`` itself)."""
        indptr = self._cache["indptr"]
        return self._cache["neighbors"][indptr[v]: indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return i < nbrs.size and nbrs[i] == v

    def adjacency_submatrix(self, node_ids) -> np.ndarray:
        """Dense 0/1 adjacency over ``node_ids`` with a unit diagonal."""
        node_ids = np.asarray(node_ids, dtype=int)
        k = node_ids.size
        pos = {int(u): i for i, u in enumerate(node_ids)}
        mask = np.eye(k)
        for i, u in enumerate(node_ids):
            for w in self.neighbors(int(u)):
                j = pos.get(int(w))
                if j is not None:
                    mask[i, j] = 1.0
        return mask

    def mean_aggregator(self) -> sp.csr_matrix:
        """Row-stochastic matrix averaging each node with its neighbors.

        Row v holds weight 1/(deg(v)+1) on v and on each neighbor of v,
        i.e. a mean aggregation with an implicit self-loop.
        """
        if "aggregator" not in self._cache:
            n = self.node_count
            indptr = self._cache["indptr"]
            neighbors = self._cache["neighbors"]
            deg = np.diff(indptr)
            rows = np.concatenate([np.repeat(np.arange(n), deg), np.arange(n)])
            cols = np.concatenate([neighbors, np.arange(n)])
            vals = 1.0 / (deg + 1.0)
            data = vals[rows]
            agg = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
            self._cache["aggregator"] = agg
        return self._cache["aggregator"]

    def with_features(self, features: np.ndarray, feature_names=None) -> "Graph":
        """New graph sharing edges/labels but carrying a different feature matrix."""
        return Graph(
            features=np.array(features, dtype=float),
            edges=self.edges,
            labels=self.labels,
            feature_names=feature_names,
        )


@dataclass(frozen=True)
class LocalSample:
    """The ordered neighborhood of an explained node with its model outputs.

    ``node_ids[0]`` is the explained node; ``features`` holds the matching
    feature rows and ``predictions`` one probability vector per node.
    """

    center: int
    node_ids: np.ndarray
    features: np.ndarray
    predictions: np.ndarray

    def __post_init__(self):
        node_ids = np.asarray(self.node_ids, dtype=int)
        if node_ids.size < 2:
            raise InsufficientNeighborsError(
                f"node {self.center}: neighborhood has {node_ids.size} node(s), "
                "need at least 2 to fit a surrogate"
            )
        if node_ids[0] != self.center:
            raise ValueError("node_ids must start with the explained node")
        if np.unique(node_ids).size != node_ids.size:
            raise ValueError("node_ids contains duplicates")
        features = np.asarray(self.features, dtype=float)
        if features.shape[0] != node_ids.size:
            raise ValueError("features row count does not match node_ids")
        predictions = check_probability_rows(self.predictions)
        if predictions.shape[0] != node_ids.size:
            raise ValueError("predictions row count does not match node_ids")
        object.__setattr__(self, "node_ids", node_ids)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "predictions", predictions)

    @property
    def n(self) -> int:
        return self.node_ids.size


@dataclass(frozen=True)
class NoiseInjection:
    """Record of which appended feature columns are noise."""

    noisy_indices: tuple[int, ...]
    seed: int


def _parse_int(token: str, path, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(
            f"{path}, line {lineno}: cannot parse {what} {token!r} as an integer"
        ) from None


def load_graph(edge_source, feature_source, label_source=None) -> Graph:
    """Load a graph from an edge list, a feature CSV, and optional labels.

    Parameters
    ----------
    edge_source : path
        UTF-8 text, one ``src<TAB>dst`` integer pair per line; lines starting
        with ``#`` are ignored. Directed/duplicate pairs are symmetrized and
        deduplicated.
    feature_source : path
        CSV with a header row of feature names, one row per node in id order.
    label_source : path, optional
        One integer class id per line, one line per node.

    Raises
    ------
    GraphFormatError
        On malformed lines (with line number), out-of-range edge endpoints,
        or row-count mismatches between files.
    """
    feature_path = Path(feature_source)
    with feature_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphFormatError(f"{feature_path}: empty feature file") from None
        if not header:
            raise GraphFormatError(f"{feature_path}: empty header row")
        d = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d:
                raise GraphFormatError(
                    f"{feature_path}, line {lineno}: expected {d} values, got {len(row)}"
                )
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise GraphFormatError(
                    f"{feature_path}, line {lineno}: non-numeric feature value"
                ) from None
    if not rows:
        raise GraphFormatError(f"{feature_path}: no feature rows")
    features = np.asarray(rows, dtype=float)
    n = features.shape[0]

    edge_path = Path(edge_source)
    pairs = []
    with edge_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{edge_path}, line {lineno}: expected 'src<TAB>dst', got {line!r}"
                )
            u = _parse_int(parts[0], edge_path, lineno, "source id")
            v = _parse_int(parts[1], edge_path, lineno, "target id")
            if u >= n or v >= n or u < 0 or v < 0:
                raise GraphFormatError(
                    f"{edge_path}, line {lineno}: endpoint {max(u, v)} outside "
                    f"[0, {n}) implied by the feature file"
                )
            pairs.append((u, v))

    labels = None
    if label_source is not None:
        label_path = Path(label_source)
        values = []
        with label_path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                values.append(_parse_int(line, label_path, lineno, "label"))
        if len(values) != n:
            raise GraphFormatError(
                f"{label_path}: {len(values)} labels for {n} feature rows"
            )
        labels = np.asarray(values, dtype=int)

    return Graph(
        features=features,
        edges=np.asarray(pairs, dtype=int).reshape(-1, 2),
        labels=labels,
        feature_names=tuple(header),
    )


def save_graph(graph: Graph, edge_dest, feature_dest, label_dest=None) -> None:
    """Write a graph back to disk in the canonical on-disk format.

    Saving a loaded graph and loading it again round-trips exactly; the
    written files are byte-stable for a given graph.
    """
    edge_path = Path(edge_dest)
    with edge_path.open("w", encoding="utf-8") as fh:
        for u, v in graph.edges:
            fh.write(f"{u}\t{v}\n")

    names = graph.feature_names
    if names is None:
        names = tuple(f"x{i}" for i in range(graph.feature_count))
    feature_path = Path(feature_dest)
    with feature_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in graph.features:
            writer.writerow([repr(float(x)) for x in row])

    if label_dest is not None:
        if graph.labels is None:
            raise ValueError("graph has no labels to save")
        with Path(label_dest).open("w", encoding="utf-8") as fh:
            for y in graph.labels:
                fh.write(f"{y}\n")


def n_hop_neighborhood(graph: Graph, v: int, hops: int) -> np.ndarray:
    """Nodes within ``hops`` of ``v``, BFS order, ties broken by ascending id.

    The explained node comes first and is part of its own neighborhood.
    An isolated node yields ``[v]``.
    """
    v = check_node_id(v, graph.node_count)
    if hops < 1:
        raise ValueError("hops must be >= 1")
    visited = np.zeros(graph.node_count, dtype=bool)
    visited[v] = True
    order = [np.array([v], dtype=int)]
    frontier = order[0]
    for _ in range(hops):
        if frontier.size == 0:
            break
        nxt = np.unique(
            np.concatenate([graph.neighbors(int(u)) for u in frontier])
            if frontier.size
            else np.zeros(0, dtype=int)
        )
        nxt = nxt[~visited[nxt]]
        if nxt.size == 0:
            break
        visited[nxt] = True
        order.append(nxt)  # np.unique output is ascending
        frontier = nxt
    return np.concatenate(order)


def assemble_local_sample(graph: Graph, nodes, predictor_outputs) -> LocalSample:
    """Gather feature rows and model outputs for an ordered node sequence.

    Raises
    ------
    InsufficientNeighborsError
        If fewer than two nodes are supplied (an isolated explained node).
    """
    nodes = np.asarray(nodes, dtype=int)
    if nodes.size == 0:
        raise ValueError("empty node sequence")
    for u in nodes:
        check_node_id(u, graph.node_count)
    outputs = np.asarray(predictor_outputs, dtype=float)
    if outputs.ndim != 2 or outputs.shape[0] != nodes.size:
        raise ValueError(
            f"predictor outputs shape {outputs.shape} does not match "
            f"{nodes.size} nodes"
        )
    return LocalSample(
        center=int(nodes[0]),
        node_ids=nodes,
        features=np.array(graph.features[nodes]),
        predictions=outputs,
    )


def inject_noise_features(graph: Graph, count: int, seed: int) -> tuple[Graph, NoiseInjection]:
    """Append ``count`` noise columns drawn to match the original feature scale.

    Binary matrices (all entries in {0, 1}) get Bernoulli columns at the
    matrix's overall density; anything else gets Gaussian columns with the
    pooled mean and standard deviation. Original columns are untouched.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)
    base = graph.features
    n, d = base.shape
    is_binary = bool(np.all((base == 0.0) | (base == 1.0)))
    if is_binary:
        density = float(base.mean())
        noise = (rng.random((n, count)) < density).astype(float)
    else:
        mu = float(base.mean())
        sigma = float(base.std())
        noise = rng.normal(mu, sigma, size=(n, count))
    features = np.hstack([base, noise])
    names = graph.feature_names
    if names is not None:
        names = names + tuple(f"noise_{i:02d}" for i in range(count))
    augmented = Graph(
        features=features,
        edges=graph.edges,
        labels=graph.labels,
        feature_names=names,
    )
    injection = NoiseInjection(
        noisy_indices=tuple(range(d, d + count)),
        seed=seed,
    )
    return augmented, injection
