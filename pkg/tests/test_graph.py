import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pebg.data import ingest
from pebg.errors import StructuralError
from pebg.graph import (
    BipartiteGraph,
    all_pairs,
    build_graph,
    draw_negatives,
    question_similarity,
    sample_pairs,
    skill_similarity,
)

from _oracles import brute_similarity

HEADER = "student_id,question_id,skill_ids,correct"


def _example_graph():
    # records q1-s1, q2-s1, q2-s2, q3-s2
    return BipartiteGraph.from_edges(3, 2, [(0, 0), (1, 0), (1, 1), (2, 1)])


def _graph_from_adjacency(adj):
    adj = np.asarray(adj)
    return BipartiteGraph.from_edges(adj.shape[0], adj.shape[1], np.argwhere(adj))


def test_build_graph_transcribes_records():
    ds = ingest([HEADER, "a,q1,s1,1", "a,q2,s1,1", "a,q2,s2,0", "a,q3,s2,1", "a,q1,s1,0"])
    g = build_graph(ds)
    np.testing.assert_array_equal(g.adjacency().toarray(), [[1, 0], [1, 1], [0, 1]])
    assert g.num_edges == 4  # the duplicate q1-s1 is one edge


def test_neighbor_lists_sorted_and_consistent():
    g = BipartiteGraph.from_edges(4, 3, [(3, 2), (0, 1), (3, 0), (0, 1), (1, 2)])
    for i, nb in enumerate(g.question_neighbors):
        assert list(nb) == sorted(set(nb))
        for j in nb:
            assert i in g.skill_neighbors[j]
    for j, nb in enumerate(g.skill_neighbors):
        assert list(nb) == sorted(set(nb))
        for i in nb:
            assert j in g.question_neighbors[i]


def test_question_similarity_example():
    rel = question_similarity(_example_graph())
    np.testing.assert_array_equal(rel.dense(), [[1, 1, 0], [1, 1, 1], [0, 1, 1]])


def test_skill_similarity_example():
    rel = skill_similarity(_example_graph())
    np.testing.assert_array_equal(rel.dense(), np.ones((2, 2)))


def test_star_graph_all_similar():
    g = BipartiteGraph.from_edges(5, 1, [(i, 0) for i in range(5)])
    assert question_similarity(g).num_positives == 25


def test_disconnected_components_have_no_cross_pairs():
    g = BipartiteGraph.from_edges(4, 2, [(0, 0), (1, 0), (2, 1), (3, 1)])
    dense = question_similarity(g).dense()
    assert dense[:2, 2:].sum() == 0 and dense[2:, :2].sum() == 0
    assert skill_similarity(g).dense()[0, 1] == 0


def test_mean_pool_matrix():
    g = BipartiteGraph.from_edges(1, 2, [(0, 0), (0, 1)])
    S = np.array([[1.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(g.mean_pool_matrix() @ S, [[0.5, 1.0]])


def test_isolated_question_is_structural_error():
    g = BipartiteGraph.from_edges(2, 1, [(0, 0)])
    with pytest.raises(StructuralError):
        g.mean_pool_matrix()


def test_write_edges(tmp_path):
    path = tmp_path / "edges.txt"
    _example_graph().write_edges(path)
    assert path.read_text() == "0 0\n1 0\n1 1\n2 1\n"


adjacencies = st.integers(1, 20).flatmap(
    lambda nq: st.integers(1, 20).flatmap(
        lambda ns: arrays(np.int8, (nq, ns), elements=st.integers(0, 1))))


@given(adjacencies)
@settings(max_examples=100, deadline=None)
def test_similarity_matches_brute_force(adj):
    g = _graph_from_adjacency(adj)
    np.testing.assert_array_equal(question_similarity(g).dense(), brute_similarity(adj, "question"))
    np.testing.assert_array_equal(skill_similarity(g).dense(), brute_similarity(adj, "skill"))


@given(adjacencies)
@settings(max_examples=50, deadline=None)
def test_similarity_symmetric_and_reflexive(adj):
    g = _graph_from_adjacency(adj)
    for rel, degree in ((question_similarity(g), adj.sum(1)), (skill_similarity(g), adj.sum(0))):
        dense = rel.dense()
        np.testing.assert_array_equal(dense, dense.T)
        np.testing.assert_array_equal(np.diag(dense), (degree > 0).astype(float))


@given(adjacencies, st.randoms(use_true_random=False))
@settings(max_examples=50, deadline=None)
def test_similarity_count_invariant_under_relabeling(adj, rnd):
    pq = list(range(adj.shape[0]))
    ps = list(range(adj.shape[1]))
    rnd.shuffle(pq)
    rnd.shuffle(ps)
    permuted = adj[np.ix_(pq, ps)]
    a = question_similarity(_graph_from_adjacency(adj))
    b = question_similarity(_graph_from_adjacency(permuted))
    assert a.num_positives == b.num_positives
    np.testing.assert_array_equal(b.dense(), a.dense()[np.ix_(pq, pq)])


# sampling


def test_sample_counts_and_labels(rng):
    rel = _example_graph().edge_relation()
    s = sample_pairs(rel, 1, rng)
    assert len(s) == 2 * rel.num_positives
    truth = rel.contains(s.left, s.right)
    np.testing.assert_array_equal(truth, s.label == 1)
    assert s.label.sum() == rel.num_positives


def test_sample_positives_cover_relation_once(rng):
    rel = question_similarity(_example_graph())
    s = sample_pairs(rel, 3, rng)
    pos = sorted(zip(s.left[s.label == 1], s.right[s.label == 1]))
    assert pos == sorted(map(tuple, rel.pairs()))
    assert (s.label == 0).sum() == 3 * rel.num_positives


def test_sample_accepts_graph(rng):
    s = sample_pairs(_example_graph(), 1, rng)
    assert s.label.sum() == 4


def test_dense_relation_exhausts_negatives(rng):
    g = BipartiteGraph.from_edges(3, 1, [(0, 0), (1, 0), (2, 0)])
    s = sample_pairs(question_similarity(g), 1, rng)
    assert s.negatives_exhausted
    assert (s.label == 0).sum() == 0


def test_zero_positive_relation_gives_empty_signal(rng):
    rel = BipartiteGraph.from_edges(2, 2, []).edge_relation()
    s = sample_pairs(rel, 1, rng)
    assert s.empty and s.negatives_exhausted


def test_num_negatives_must_be_positive(rng):
    with pytest.raises(ValueError):
        sample_pairs(_example_graph(), 0, rng)


def test_sampling_deterministic_given_state():
    rel = question_similarity(_example_graph())
    a = sample_pairs(rel, 2, np.random.default_rng(5))
    b = sample_pairs(rel, 2, np.random.default_rng(5))
    for x, y in ((a.left, b.left), (a.right, b.right), (a.label, b.label)):
        np.testing.assert_array_equal(x, y)


@given(adjacencies, st.integers(0, 2**32 - 1), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_sampled_positives_equal_full_mode_positives(adj, seed, k):
    g = _graph_from_adjacency(adj)
    for rel in (g.edge_relation(), question_similarity(g), skill_similarity(g)):
        sampled = sample_pairs(rel, k, np.random.default_rng(seed))
        full = all_pairs(rel)
        got = set(zip(sampled.left[sampled.label == 1].tolist(), sampled.right[sampled.label == 1].tolist()))
        want = set(zip(full.left[full.label == 1].tolist(), full.right[full.label == 1].tolist()))
        assert got == want
        assert not rel.contains(sampled.left[sampled.label == 0], sampled.right[sampled.label == 0]).any()


def test_draw_negatives_never_returns_positives(rng):
    g = BipartiteGraph.from_edges(6, 3, [(i, i % 3) for i in range(6)])
    rel = question_similarity(g)
    left, right, exhausted = draw_negatives(rel, 500, rng)
    assert not exhausted and len(left) == 500
    assert not rel.contains(left, right).any()


def test_batches_partition_sample(rng):
    s = sample_pairs(question_similarity(_example_graph()), 1, rng)
    parts = list(s.batches(3))
    assert sum(len(p) for p in parts) == len(s)
    np.testing.assert_array_equal(np.concatenate([p.label for p in parts]), s.label)
