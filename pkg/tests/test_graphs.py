"""
Unit tests for domain graphs, graph statistics and node embeddings.
"""
import math

import networkx as nx
import numpy as np
import pytest

from engine.errors import GraphConnectivityError, InputError
from graphs.domain_graph import (
    DomainGraph,
    UnitVectorSet,
    bfs_hops,
    binary_entropy,
    binary_entropy_array,
    make_chain,
    make_clique,
    make_star,
    mean_edge_density,
    optimum_disc_loss,
    random_connected_subgraph,
    sample_dg_graph,
    select_connected_sources,
)
from graphs.embeddings import (
    NodeEmbeddingTable,
    embedding_auc,
    pretrain_embeddings,
    reconstruction_loss,
    roc_auc,
)


class TestDomainGraph:
    """Test adjacency validation and shape recognisers."""

    def test_rejects_asymmetric_adjacency(self):
        with pytest.raises(InputError):
            DomainGraph(np.array([[0, 1], [0, 0]]))

    def test_rejects_self_loop(self):
        with pytest.raises(InputError):
            DomainGraph.from_edges(3, [(1, 1)])

    def test_rejects_out_of_range_edge(self):
        with pytest.raises(InputError):
            DomainGraph.from_edges(3, [(0, 3)])

    def test_rejects_non_binary_entries(self):
        with pytest.raises(InputError):
            DomainGraph(np.array([[0, 2], [2, 0]]))

    def test_edges_sorted_and_deduplicated(self):
        g = DomainGraph.from_edges(4, [(2, 1), (1, 2), (0, 3)])
        assert g.edges() == [(0, 3), (1, 2)]

    def test_json_round_trip(self, star4):
        again = DomainGraph.from_json(star4.to_json())
        assert np.array_equal(again.adjacency, star4.adjacency)

    def test_from_json_missing_key(self):
        with pytest.raises(InputError):
            DomainGraph.from_json({"n": 3})

    def test_shape_recognisers(self, chain3, clique3, star4):
        assert clique3.is_clique() and not clique3.is_chain()
        assert star4.is_star() and not star4.is_clique()
        assert chain3.is_chain()
        # a chain of three is also a star centred on its middle, not on domain 0
        assert not chain3.is_star()

    def test_as_networkx(self, star4):
        g = star4.as_networkx()
        assert g.number_of_nodes() == 4
        assert g.number_of_edges() == 3
        assert nx.is_connected(g)

    def test_constructors_need_two_domains(self):
        for make in (make_clique, make_star, make_chain):
            with pytest.raises(InputError):
                make(1)


class TestGraphStatistics:
    """Test edge density, entropy and the discriminator ceiling."""

    def test_mean_edge_density_clique(self, clique3):
        assert mean_edge_density(clique3) == pytest.approx(2 / 3)

    def test_mean_edge_density_star_and_chain(self, chain3):
        assert mean_edge_density(make_star(3)) == pytest.approx(4 / 9)
        assert mean_edge_density(chain3) == pytest.approx(4 / 9)

    def test_binary_entropy_values(self):
        assert binary_entropy(0.5) == pytest.approx(math.log(2))
        assert binary_entropy(2 / 3) == pytest.approx(0.636514, abs=1e-6)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_binary_entropy_out_of_range(self):
        with pytest.raises(InputError):
            binary_entropy(1.2)
        with pytest.raises(InputError):
            binary_entropy(float("nan"))

    def test_binary_entropy_array_matches_scalar(self):
        p = np.array([0.0, 0.1, 0.5, 0.9, 1.0])
        expected = [binary_entropy(float(v)) for v in p]
        np.testing.assert_allclose(binary_entropy_array(p), expected)

    def test_optimum_disc_loss_clique(self, clique3):
        assert optimum_disc_loss(clique3) == pytest.approx(binary_entropy(2 / 3))

    def test_optimum_disc_loss_never_exceeds_ln2(self):
        for g in (make_clique(5), make_star(5), make_chain(5)):
            assert optimum_disc_loss(g) <= math.log(2) + 1e-12


class TestBfsHops:
    """Test multi-source hop distances."""

    def test_chain_from_one_end(self):
        hops = bfs_hops(make_chain(5), [0])
        np.testing.assert_array_equal(hops, [0, 1, 2, 3, 4])

    def test_multi_source(self):
        hops = bfs_hops(make_chain(5), [0, 4])
        np.testing.assert_array_equal(hops, [0, 1, 2, 1, 0])

    def test_unreachable_is_infinite(self):
        g = DomainGraph.from_edges(4, [(0, 1), (2, 3)])
        hops = bfs_hops(g, [0])
        assert hops[1] == 1
        assert math.isinf(hops[2]) and math.isinf(hops[3])

    def test_needs_a_source(self, chain3):
        with pytest.raises(InputError):
            bfs_hops(chain3, [])

    def test_source_out_of_range(self, chain3):
        with pytest.raises(InputError):
            bfs_hops(chain3, [7])

    def test_matches_closest_source_distance(self):
        g, _ = sample_dg_graph(20, seed=6)
        sources = [0, 7, 13]
        lengths = [nx.single_source_shortest_path_length(g.as_networkx(), s) for s in sources]
        expected = [min(length[node] for length in lengths) for node in range(20)]
        np.testing.assert_array_equal(bfs_hops(g, sources), expected)

    def test_neighbours_differ_by_at_most_one(self):
        g, _ = sample_dg_graph(15, seed=2)
        hops = bfs_hops(g, [3])
        assert all(abs(hops[i] - hops[j]) <= 1 for i, j in g.edges())


class TestSampling:
    """Test DG graph sampling, source selection and random subgraphs."""

    def test_sample_is_connected_and_seeded(self):
        g1, v1 = sample_dg_graph(15, seed=0)
        g2, v2 = sample_dg_graph(15, seed=0)
        assert g1.is_connected()
        assert np.array_equal(g1.adjacency, g2.adjacency)
        np.testing.assert_array_equal(v1.omega, v2.omega)

    def test_unit_vectors_have_unit_norm(self):
        _, vectors = sample_dg_graph(10, seed=4)
        np.testing.assert_allclose(np.linalg.norm(vectors.vectors(), axis=1), 1.0)

    def test_edge_probabilities_in_unit_interval(self):
        vectors = UnitVectorSet(np.array([-1.2, 0.0, 0.7, 1.5]))
        probs = vectors.edge_probabilities()
        assert np.all((probs >= 0) & (probs <= 1))
        # identical directions are always adjacent
        assert probs[1, 1] == pytest.approx(1.0)

    def test_edge_probability_is_angle_cosine(self):
        omega = np.array([-1.1, -0.3, 0.0, 0.4, 1.2])
        probs = UnitVectorSet(omega).edge_probabilities()
        expected = 0.5 * np.cos(omega[:, None] - omega[None, :]) + 0.5
        np.testing.assert_allclose(probs, expected, atol=1e-12)

    def test_edge_frequency_follows_probability(self):
        """Pooled over many graphs, edges appear about as often as their probability."""
        probs, edges = [], []
        for seed in range(200):
            g, vectors = sample_dg_graph(15, seed=seed)
            iu, ju = np.triu_indices(15, k=1)
            probs.append(vectors.edge_probabilities()[iu, ju])
            edges.append(g.adjacency[iu, ju])
        probs, edges = np.concatenate(probs), np.concatenate(edges)
        for lo, hi in [(0.0, 0.3), (0.3, 0.6), (0.6, 0.8), (0.8, 1.0)]:
            mask = (probs >= lo) & (probs < hi)
            assert edges[mask].mean() == pytest.approx(probs[mask].mean(), abs=0.05)

    def test_unit_vectors_reject_closed_interval(self):
        with pytest.raises(InputError):
            UnitVectorSet(np.array([math.pi / 2]))

    def test_connected_sources(self):
        g, _ = sample_dg_graph(15, seed=1)
        sources = select_connected_sources(g, 6, np.random.default_rng(0))
        assert len(sources) == 6
        assert nx.is_connected(g.as_networkx().subgraph(sources))

    def test_connected_sources_too_many_for_component(self):
        g = DomainGraph.from_edges(4, [(0, 1), (2, 3)])
        with pytest.raises(GraphConnectivityError):
            select_connected_sources(g, 3, np.random.default_rng(0))

    def test_random_subgraph_is_connected(self):
        g, _ = sample_dg_graph(12, seed=2)
        rng = np.random.default_rng(5)
        for _ in range(20):
            nodes = random_connected_subgraph(g, rng)
            assert 1 <= len(nodes) <= 12
            assert nx.is_connected(g.as_networkx().subgraph(nodes))

    def test_random_subgraph_requested_size(self, clique3):
        nodes = random_connected_subgraph(clique3, np.random.default_rng(0), size=2)
        assert len(nodes) == 2


class TestEmbeddings:
    """Test node embedding pretraining and its diagnostics."""

    def test_table_rejects_duplicate_rows(self):
        with pytest.raises(InputError):
            NodeEmbeddingTable(np.array([[1.0, 0.0], [1.0, 0.0]]))

    def test_table_rows_out_of_range(self):
        table = NodeEmbeddingTable(np.eye(3))
        with pytest.raises(InputError):
            table.rows(np.array([0, 3]))

    def test_pretraining_lowers_reconstruction_loss(self, star4):
        before = reconstruction_loss(star4, np.random.Generator(np.random.PCG64(0)).normal(size=(4, 2)))
        table = pretrain_embeddings(star4, k=2, lr=0.05, steps=300, seed=0)
        assert table.z.shape == (4, 2)
        assert reconstruction_loss(star4, table.z) < before

    def test_pretraining_is_deterministic(self, chain3):
        a = pretrain_embeddings(chain3, k=2, lr=0.05, steps=50, seed=3)
        b = pretrain_embeddings(chain3, k=2, lr=0.05, steps=50, seed=3)
        np.testing.assert_array_equal(a.z, b.z)

    def test_pretraining_rejects_bad_k(self, chain3):
        with pytest.raises(InputError):
            pretrain_embeddings(chain3, k=0)

    def test_zero_steps_keeps_initial_table(self, chain3):
        table = pretrain_embeddings(chain3, k=2, steps=0, seed=0)
        expected = np.random.Generator(np.random.PCG64(0)).normal(0.0, 1.0, size=(3, 2))
        np.testing.assert_array_equal(table.z, expected)

    def test_roc_auc_known_value(self):
        scores = np.array([0.1, 0.4, 0.35, 0.8])
        labels = np.array([0, 0, 1, 1])
        assert roc_auc(scores, labels) == pytest.approx(0.75)

    def test_roc_auc_needs_both_classes(self):
        with pytest.raises(InputError):
            roc_auc(np.array([0.1, 0.2]), np.array([1, 1]))

    def test_embedding_auc_after_pretraining(self):
        g = make_chain(5)
        table = pretrain_embeddings(g, k=2, lr=0.05, steps=500, seed=0)
        assert 0.5 < embedding_auc(g, table) <= 1.0
