"""
Unit tests for dataset builders and the TPT CSV reader.
"""
import math

import networkx as nx
import numpy as np
import pytest
from scipy.stats import norm

from config.tpt_splits import BUILTIN_SPLITS, TptSplit, all_states_covered, get_split, write_split
from engine.errors import InputError, ParseError
from graphs.domain_graph import UnitVectorSet, sample_dg_graph
from tasks.base_task import SEED_STREAMS, Dataset, TaskKind, split_seeds, stream_seed
from tasks.dg_task import (
    Chain3TaskBuilder,
    DgTaskBuilder,
    bayes_label,
    box_muller_normal,
    draw_eval_samples,
    gaussian_means,
    generate_dg,
)
from tasks.tpt_task import (
    TPT_HEADER,
    TptRecord,
    TptTaskBuilder,
    build_tpt_task,
    destandardize_targets,
    load_tpt_csv,
    write_tpt_csv,
)
from tests.conftest import make_tpt_records


class TestSeeds:
    """Test named seed streams."""

    def test_split_seeds_deterministic_and_distinct(self):
        a = split_seeds(7, 4)
        assert a == split_seeds(7, 4)
        assert len(set(a)) == 4

    def test_stream_seed_uses_fixed_order(self):
        children = split_seeds(11, len(SEED_STREAMS))
        assert stream_seed(11, "model") == children[SEED_STREAMS.index("model")]

    def test_unknown_stream(self):
        with pytest.raises(InputError):
            stream_seed(0, "weather")


class TestDgTask:
    """Test the DG-style Gaussian task."""

    def test_means_for_quarter_pi(self):
        mu1, mu0 = gaussian_means(UnitVectorSet(np.array([math.pi / 4])))
        np.testing.assert_allclose(mu1[0], [math.sqrt(2) / 8, math.sqrt(2) / 8])
        np.testing.assert_allclose(mu0[0], -mu1[0])

    def test_dg15_counts(self):
        dataset = generate_dg(15, 100, 6, seed=0)
        assert dataset.n_domains == 15
        assert len(dataset) == 1500
        assert int(dataset.is_source.sum()) == 600
        assert len(dataset.source_domains) == 6
        np.testing.assert_array_equal(dataset.domain_counts(), np.full(15, 100))
        assert dataset.graph.is_connected()

    def test_sources_are_connected(self, small_dg):
        subgraph = small_dg.graph.as_networkx().subgraph(sorted(small_dg.source_domains))
        assert nx.is_connected(subgraph)

    def test_classes_balanced_per_domain(self, small_dg):
        for i in range(small_dg.n_domains):
            assert int(small_dg.y[small_dg.u == i].sum()) == 20

    def test_same_seed_same_dataset(self):
        a = generate_dg(6, 20, 2, seed=9)
        b = generate_dg(6, 20, 2, seed=9)
        np.testing.assert_array_equal(a.x, b.x)
        assert a.source_domains == b.source_domains

    def test_odd_per_domain_rejected(self):
        with pytest.raises(InputError):
            DgTaskBuilder(n_domains=6, per_domain=101)

    def test_sources_must_leave_a_target(self):
        with pytest.raises(InputError):
            DgTaskBuilder(n_domains=4, n_sources=4)

    def test_target_samples_are_unlabeled(self, small_dg):
        unlabeled = [s for s in small_dg.samples() if not s.is_labeled]
        assert len(unlabeled) == 40 * len(small_dg.target_domains)
        assert all(s.u in small_dg.target_domains for s in unlabeled)

    def test_source_view_holds_only_sources(self, small_dg):
        view = small_dg.source_view()
        assert set(np.unique(view.u).tolist()) == set(small_dg.source_domains)

    def test_class_means_converge(self, small_chain3):
        x, y, u = draw_eval_samples(small_chain3.metadata, per_domain=20000, seed=4)
        mu1 = np.asarray(small_chain3.metadata["mu1"])
        for i in range(3):
            in_domain = u == i
            gap = x[in_domain & (y == 1)].mean(axis=0) - x[in_domain & (y == 0)].mean(axis=0)
            np.testing.assert_allclose(gap, 2 * mu1[i], atol=0.1)

    def test_neighbours_share_decision_boundaries(self):
        """Adjacent domains have more similar class means than non-adjacent ones."""
        adjacent, apart = [], []
        for seed in range(20):
            graph, vectors = sample_dg_graph(15, seed=seed)
            mu1, _ = gaussian_means(vectors)
            unit = mu1 / np.linalg.norm(mu1, axis=1, keepdims=True)
            cosine = unit @ unit.T
            iu, ju = np.triu_indices(15, k=1)
            linked = graph.adjacency[iu, ju] == 1
            adjacent.extend(cosine[iu, ju][linked])
            apart.extend(cosine[iu, ju][~linked])
        assert np.mean(adjacent) > np.mean(apart)


class TestBoxMuller:
    """Test the Gaussian draws behind the DG generator."""

    @staticmethod
    def reference(seed: int, pairs: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(seed))
        u1 = 1.0 - rng.random(pairs)
        u2 = rng.random(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        return np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])

    def test_stream_is_pinned_to_uniforms(self):
        z = box_muller_normal(np.random.Generator(np.random.PCG64(11)), (3, 2))
        np.testing.assert_array_equal(z.ravel(), self.reference(11, 3))

    def test_odd_size_drops_last_sine(self):
        z = box_muller_normal(np.random.Generator(np.random.PCG64(2)), (5,))
        np.testing.assert_array_equal(z, self.reference(2, 3)[:5])

    def test_domain_draws_follow_the_stream(self, small_chain3):
        x, y, _ = draw_eval_samples(small_chain3.metadata, per_domain=4, seed=5, domains=[1])
        mu1 = np.asarray(small_chain3.metadata["mu1"])[1]
        rng = np.random.Generator(np.random.PCG64(5))
        positives = mu1 + box_muller_normal(rng, (2, 2))
        negatives = -mu1 + box_muller_normal(rng, (2, 2))
        np.testing.assert_array_equal(x, np.vstack([positives, negatives]))
        np.testing.assert_array_equal(y, [1, 1, 0, 0])

    def test_standard_normal_moments(self):
        z = box_muller_normal(np.random.Generator(np.random.PCG64(0)), (100000,))
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1.0) < 0.02
        assert abs(np.mean(np.abs(z) < 1.0) - (norm.cdf(1) - norm.cdf(-1))) < 0.01


class TestChain3:
    """Test the three-domain chain variant."""

    def test_layout(self, small_chain3):
        assert small_chain3.graph.is_chain()
        assert small_chain3.source_domains == frozenset({0, 2})
        assert small_chain3.target_domains == frozenset({1})
        assert small_chain3.task == TaskKind.CLASSIFICATION

    def test_angles_must_be_three(self):
        with pytest.raises(InputError):
            Chain3TaskBuilder(omega=(0.1, 0.2))


class TestBayesRule:
    """Test the Bayes labels and fresh evaluation draws."""

    def test_sign_of_projection(self, small_chain3):
        mu1 = np.asarray(small_chain3.metadata["mu1"])
        x = np.vstack([mu1[1], -mu1[1], np.zeros(2)])
        labels = bayes_label(x, np.array([1, 1, 1]), small_chain3.metadata)
        # ties go to class 0
        np.testing.assert_array_equal(labels, [1, 0, 0])

    def test_bayes_accuracy_beats_chance(self, small_chain3):
        x, y, u = draw_eval_samples(small_chain3.metadata, per_domain=10000, seed=8)
        labels = bayes_label(x, u, small_chain3.metadata)
        mu1 = np.asarray(small_chain3.metadata["mu1"])
        for i in range(3):
            accuracy = np.mean(labels[u == i] == y[u == i])
            assert accuracy > 0.5
            assert accuracy == pytest.approx(norm.cdf(np.linalg.norm(mu1[i])), abs=0.02)

    def test_domain_out_of_range(self, small_chain3):
        with pytest.raises(InputError):
            bayes_label(np.zeros((1, 2)), np.array([3]), small_chain3.metadata)

    def test_needs_gaussian_metadata(self):
        with pytest.raises(InputError):
            bayes_label(np.zeros((1, 2)), np.array([0]), {})

    def test_eval_draws_shape_and_balance(self, small_chain3):
        x, y, u = draw_eval_samples(small_chain3.metadata, per_domain=10, seed=0, domains=[1])
        assert x.shape == (10, 2)
        assert int(y.sum()) == 5
        assert set(u.tolist()) == {1}


class TestDatasetValidation:
    """Test Dataset invariants."""

    def test_domain_without_samples(self, chain3):
        with pytest.raises(InputError):
            Dataset(
                graph=chain3,
                x=np.zeros((2, 2)),
                y=np.array([0, 1]),
                u=np.array([0, 2]),
                source_domains={0},
                task=TaskKind.CLASSIFICATION,
            )

    def test_needs_a_source(self, chain3):
        with pytest.raises(InputError):
            Dataset(
                graph=chain3,
                x=np.zeros((3, 2)),
                y=np.array([0, 1, 0]),
                u=np.array([0, 1, 2]),
                source_domains=set(),
                task=TaskKind.CLASSIFICATION,
            )

    def test_non_finite_features(self, chain3):
        with pytest.raises(InputError):
            Dataset(
                graph=chain3,
                x=np.array([[0.0, np.nan], [0.0, 0.0], [1.0, 1.0]]),
                y=np.array([0, 1, 0]),
                u=np.array([0, 1, 2]),
                source_domains={0},
                task=TaskKind.CLASSIFICATION,
            )


class TestTptCsv:
    """Test the temperature CSV reader."""

    def _write(self, path, lines):
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_round_trip(self, tmp_path, mini_tpt_records):
        path = write_tpt_csv(mini_tpt_records, tmp_path / "tpt.csv")
        assert load_tpt_csv(path) == mini_tpt_records

    def test_bad_header(self, tmp_path):
        path = self._write(tmp_path / "bad.csv", ["state,year,jan"])
        with pytest.raises(ParseError) as exc:
            load_tpt_csv(path)
        assert exc.value.line == 1

    def test_wrong_field_count_names_the_line(self, tmp_path):
        good = "CA,2000," + ",".join(["50"] * 12)
        path = self._write(tmp_path / "bad.csv", [",".join(TPT_HEADER), good, "CA,2001,50,51"])
        with pytest.raises(ParseError) as exc:
            load_tpt_csv(path)
        assert exc.value.line == 3

    def test_non_numeric_temperature(self, tmp_path):
        row = "CA,2000," + ",".join(["50"] * 11 + ["warm"])
        path = self._write(tmp_path / "bad.csv", [",".join(TPT_HEADER), row])
        with pytest.raises(ParseError) as exc:
            load_tpt_csv(path)
        assert exc.value.line == 2

    def test_duplicate_state_year(self, tmp_path):
        row = "CA,2000," + ",".join(["50"] * 12)
        path = self._write(tmp_path / "dup.csv", [",".join(TPT_HEADER), row, row])
        with pytest.raises(ParseError) as exc:
            load_tpt_csv(path)
        assert exc.value.line == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_tpt_csv(tmp_path / "absent.csv")

    def test_record_needs_twelve_months(self):
        with pytest.raises(InputError):
            TptRecord("CA", 2000, (1.0, 2.0))


class TestTptTask:
    """Test the TPT regression dataset and its splits."""

    def test_mini_split_dataset(self, mini_split, mini_tpt_records):
        dataset = build_tpt_task(mini_tpt_records, mini_split)
        assert dataset.task == TaskKind.REGRESSION
        assert dataset.x.shape == (48, 6)
        assert dataset.y.shape == (48, 6)
        assert dataset.out_dim == 6
        # domains are the states in alphabetical order: AZ, CA, NV, OR
        assert dataset.source_domains == frozenset({1, 3})
        assert dataset.graph.n_domains == 4

    def test_source_statistics_are_standardized(self, mini_split, mini_tpt_records):
        dataset = build_tpt_task(mini_tpt_records, mini_split)
        source_x = dataset.x[dataset.is_source]
        np.testing.assert_allclose(source_x.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(source_x.std(axis=0), 1.0, atol=1e-12)

    def test_destandardize_recovers_degrees(self, mini_split, mini_tpt_records):
        dataset = build_tpt_task(mini_tpt_records, mini_split)
        recovered = destandardize_targets(dataset.y, dataset.metadata)
        first = min((r for r in mini_tpt_records if r.state == "AZ"), key=lambda r: r.year)
        np.testing.assert_allclose(recovered[0], first.targets)

    def test_missing_state(self, mini_split):
        records = make_tpt_records(["CA", "OR", "NV"], range(2000, 2003))
        with pytest.raises(InputError):
            build_tpt_task(records, mini_split)

    def test_builder_reads_csv(self, tmp_path, mini_split, mini_tpt_records):
        path = write_tpt_csv(mini_tpt_records, tmp_path / "tpt.csv")
        dataset = TptTaskBuilder(path, mini_split).build()
        assert len(dataset) == len(mini_tpt_records)

    def test_split_rejects_overlap(self):
        with pytest.raises(InputError):
            TptSplit("bad", ("CA",), ("CA", "OR"), ())

    def test_builtin_splits_partition_the_states(self):
        for split in BUILTIN_SPLITS.values():
            assert all_states_covered(split.states)
            assert len(split.source) == 24 and len(split.target) == 24
            assert split.graph().is_connected()

    def test_split_file_round_trip(self, tmp_path, mini_split):
        path = write_split(mini_split, tmp_path / "mini.json")
        assert get_split(path) == mini_split

    def test_unknown_split(self):
        with pytest.raises(InputError):
            get_split("diagonal")
