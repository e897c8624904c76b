import numpy as np
import pytest
import scipy.sparse.csgraph as csgraph
from hypothesis import given, settings
from hypothesis import strategies as st

import graphlime as gl
from graphlime import GraphFormatError, InsufficientNeighborsError

from conftest import make_graph


def write_dataset(tmp_path, edges_text, features_text, labels_text=None):
    edge_file = tmp_path / "edges.tsv"
    edge_file.write_text(edges_text)
    feat_file = tmp_path / "features.csv"
    feat_file.write_text(features_text)
    label_file = None
    if labels_text is not None:
        label_file = tmp_path / "labels.txt"
        label_file.write_text(labels_text)
    return edge_file, feat_file, label_file


class TestLoadGraph:
    def test_smallest_valid_graph(self, tmp_path):
        e, f, _ = write_dataset(tmp_path, "0\t1\n", "a,b\n1,0\n0,1\n")
        g = gl.load_graph(e, f)
        assert g.node_count == 2
        assert g.edge_count == 1
        assert g.feature_names == ("a", "b")

    def test_reversed_and_duplicate_edges_dedup(self, tmp_path):
        e, f, _ = write_dataset(
            tmp_path, "0\t1\n1\t0\n0\t1\n# comment\n\n1\t2\n", "a\n1\n2\n3\n"
        )
        g = gl.load_graph(e, f)
        assert g.edge_count == 2
        assert g.has_edge(1, 0)

    def test_labels_loaded(self, tmp_path):
        e, f, l = write_dataset(tmp_path, "0\t1\n", "a\n1\n2\n", "0\n1\n")
        g = gl.load_graph(e, f, l)
        assert g.class_count == 2

    def test_malformed_edge_line_reports_lineno(self, tmp_path):
        e, f, _ = write_dataset(tmp_path, "0\t1\nnope\n", "a\n1\n2\n")
        with pytest.raises(GraphFormatError, match="line 2"):
            gl.load_graph(e, f)

    def test_edge_endpoint_out_of_bounds(self, tmp_path):
        e, f, _ = write_dataset(tmp_path, "0\t7\n", "a\n1\n2\n")
        with pytest.raises(GraphFormatError, match="7"):
            gl.load_graph(e, f)

    def test_label_count_mismatch(self, tmp_path):
        e, f, l = write_dataset(tmp_path, "0\t1\n", "a\n1\n2\n", "0\n1\n0\n")
        with pytest.raises(GraphFormatError, match="3 labels for 2"):
            gl.load_graph(e, f, l)

    def test_non_numeric_feature_reports_lineno(self, tmp_path):
        e, f, _ = write_dataset(tmp_path, "0\t1\n", "a\n1\nx\n")
        with pytest.raises(GraphFormatError, match="line 3"):
            gl.load_graph(e, f)

    def test_ragged_feature_row(self, tmp_path):
        e, f, _ = write_dataset(tmp_path, "0\t1\n", "a,b\n1,2\n3\n")
        with pytest.raises(GraphFormatError, match="line 3"):
            gl.load_graph(e, f)


class TestSaveRoundTrip:
    def test_save_load_save_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(5)
        g = make_graph(
            [(3, 0), (0, 1), (1, 0), (2, 3)],
            rng.normal(size=(4, 3)),
            labels=[0, 1, 1, 0],
            names=["f0", "f1", "f2"],
        )
        p1 = tmp_path / "one"
        p2 = tmp_path / "two"
        p1.mkdir(), p2.mkdir()
        gl.save_graph(g, p1 / "e.tsv", p1 / "f.csv", p1 / "l.txt")
        g2 = gl.load_graph(p1 / "e.tsv", p1 / "f.csv", p1 / "l.txt")
        gl.save_graph(g2, p2 / "e.tsv", p2 / "f.csv", p2 / "l.txt")
        for name in ("e.tsv", "f.csv", "l.txt"):
            assert (p1 / name).read_bytes() == (p2 / name).read_bytes()
        np.testing.assert_array_equal(g.features, g2.features)
        np.testing.assert_array_equal(g.edges, g2.edges)


class TestNeighborhood:
    def test_path_graph_two_hops(self, path_graph):
        assert gl.n_hop_neighborhood(path_graph, 0, 2).tolist() == [0, 1, 2]

    def test_path_graph_one_hop(self, path_graph):
        assert gl.n_hop_neighborhood(path_graph, 0, 1).tolist() == [0, 1]

    def test_star_graph(self, star_graph):
        hood = gl.n_hop_neighborhood(star_graph, 0, 1)
        assert hood.tolist() == [0, 1, 2, 3, 4, 5]

    def test_isolated_node(self):
        g = make_graph([(0, 1)], np.eye(3))
        assert gl.n_hop_neighborhood(g, 2, 2).tolist() == [2]

    def test_ordering_distance_then_id(self):
        # 4 links to 0; 1,2 are one hop; 3 two hops via 2.
        g = make_graph([(0, 4), (0, 1), (0, 2), (2, 3)], np.eye(5))
        assert gl.n_hop_neighborhood(g, 0, 2).tolist() == [0, 1, 2, 4, 3]

    def test_invalid_args(self, path_graph):
        with pytest.raises(ValueError):
            gl.n_hop_neighborhood(path_graph, 99, 1)
        with pytest.raises(ValueError):
            gl.n_hop_neighborhood(path_graph, 0, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_monotone_in_hops_and_distances_match_oracle(self, data):
        n = data.draw(st.integers(4, 20))
        edge_pool = [(i, j) for i in range(n) for j in range(i + 1, n)]
        edges = data.draw(
            st.lists(st.sampled_from(edge_pool), min_size=1, max_size=3 * n, unique=True)
        )
        g = make_graph(edges, np.eye(n))
        v = data.draw(st.integers(0, n - 1))

        adj = np.zeros((n, n))
        for i, j in edges:
            adj[i, j] = adj[j, i] = 1
        dist = csgraph.shortest_path(adj, unweighted=True)

        previous = set()
        for hops in (1, 2, 3):
            hood = gl.n_hop_neighborhood(g, v, hops)
            members = set(hood.tolist())
            assert previous <= members
            expected = {u for u in range(n) if dist[v, u] <= hops}
            assert members == expected
            previous = members


class TestLocalSample:
    def test_two_nodes(self, path_graph):
        sample = gl.assemble_local_sample(
            path_graph, [0, 1], [[0.5, 0.5], [0.2, 0.8]]
        )
        assert sample.n == 2
        assert sample.center == 0

    def test_isolated_refused(self, path_graph):
        with pytest.raises(InsufficientNeighborsError):
            gl.assemble_local_sample(path_graph, [0], [[1.0, 0.0]])

    def test_star_sample_shape(self, star_graph):
        nodes = gl.n_hop_neighborhood(star_graph, 0, 1)
        outputs = np.full((6, 2), 0.5)
        sample = gl.assemble_local_sample(star_graph, nodes, outputs)
        assert sample.features.shape == (6, 3)

    def test_rejects_non_probability_rows(self, path_graph):
        with pytest.raises(ValueError, match="sums to"):
            gl.assemble_local_sample(path_graph, [0, 1], [[0.9, 0.0], [0.5, 0.5]])

    def test_rejects_duplicates(self, path_graph):
        with pytest.raises(ValueError, match="duplicate"):
            gl.assemble_local_sample(
                path_graph, [0, 1, 1], np.full((3, 2), 0.5)
            )


class TestNoiseInjection:
    def test_counts_and_indices(self):
        rng = np.random.default_rng(2)
        g = make_graph([(0, 1), (1, 2)], rng.normal(size=(3, 5)))
        aug, injection = gl.inject_noise_features(g, 10, seed=4)
        assert aug.feature_count == 15
        assert injection.noisy_indices == tuple(range(5, 15))

    def test_single_column(self, path_graph):
        aug, injection = gl.inject_noise_features(path_graph, 1, seed=0)
        assert aug.feature_count == path_graph.feature_count + 1
        assert injection.noisy_indices == (path_graph.feature_count,)

    def test_deterministic_under_seed(self, path_graph):
        a1, _ = gl.inject_noise_features(path_graph, 3, seed=9)
        a2, _ = gl.inject_noise_features(path_graph, 3, seed=9)
        np.testing.assert_array_equal(a1.features, a2.features)

    def test_original_columns_untouched(self, star_graph):
        aug, _ = gl.inject_noise_features(star_graph, 4, seed=1)
        np.testing.assert_array_equal(
            aug.features[:, : star_graph.feature_count], star_graph.features
        )

    def test_binary_matrix_gets_binary_noise(self):
        rng = np.random.default_rng(3)
        g = make_graph([(0, 1)], (rng.random((40, 6)) < 0.3).astype(float))
        aug, injection = gl.inject_noise_features(g, 5, seed=2)
        noise = aug.features[:, list(injection.noisy_indices)]
        assert set(np.unique(noise)) <= {0.0, 1.0}

    def test_count_must_be_positive(self, path_graph):
        with pytest.raises(ValueError):
            gl.inject_noise_features(path_graph, 0, seed=1)


class TestGraphInvariants:
    def test_rejects_out_of_range_edge(self):
        with pytest.raises(ValueError, match="outside"):
            make_graph([(0, 9)], np.eye(3))

    def test_drops_explicit_self_loops(self):
        g = make_graph([(1, 1), (0, 1)], np.eye(2))
        assert g.edge_count == 1

    def test_features_are_read_only(self, path_graph):
        with pytest.raises(ValueError):
            path_graph.features[0, 0] = 99.0

    def test_adjacency_submatrix(self, path_graph):
        sub = path_graph.adjacency_submatrix([0, 1, 3])
        expected = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=float)
        np.testing.assert_array_equal(sub, expected)
