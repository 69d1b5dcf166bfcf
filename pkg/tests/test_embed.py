import numpy as np
import pytest

from hiersage.embed import (
    WalkCorpus,
    cosine_similarity_matrix,
    node_embeddings,
    random_walks,
    train_skipgram,
)
from hiersage.graph import from_edges


def two_cliques(k):
    edges = [(u, v) for u in range(k) for v in range(u + 1, k)]
    edges += [(u + k, v + k) for u, v in edges]
    return from_edges(2 * k, edges)


def test_walks_on_single_edge_alternate():
    g = from_edges(2, [(0, 1)])
    corpus = random_walks(g, walk_length=4, walks_per_node=3, seed=0)
    assert corpus.walks.shape == (6, 4)
    for walk in corpus.walks:
        assert all(walk[i] != walk[i + 1] for i in range(3))
        assert set(walk.tolist()) == {0, 1}


def test_isolated_nodes_emit_no_walks():
    g = from_edges(3, [(0, 1)])
    corpus = random_walks(g, walk_length=5, walks_per_node=2, seed=0)
    assert corpus.walks.shape[0] == 4
    assert 2 not in corpus.walks


def test_triangle_walk_count():
    g = from_edges(3, [(0, 1), (1, 2), (2, 0)])
    corpus = random_walks(g, walk_length=5, walks_per_node=2, seed=1)
    assert corpus.walks.shape == (6, 5)


def test_every_walk_step_is_an_edge():
    g = two_cliques(5)
    corpus = random_walks(g, walk_length=10, walks_per_node=4, seed=3)
    for walk in corpus.walks:
        for a, b in zip(walk[:-1], walk[1:]):
            assert g.has_edge(int(a), int(b))


def test_walks_deterministic():
    g = two_cliques(4)
    c1 = random_walks(g, 8, 3, seed=9)
    c2 = random_walks(g, 8, 3, seed=9)
    assert np.array_equal(c1.walks, c2.walks)
    c3 = random_walks(g, 8, 3, seed=10)
    assert not np.array_equal(c1.walks, c3.walks)


def test_walk_length_validation():
    with pytest.raises(ValueError):
        random_walks(from_edges(2, [(0, 1)]), walk_length=1)


def test_skipgram_zero_epochs_returns_init():
    g = from_edges(2, [(0, 1)])
    corpus = random_walks(g, 4, 2, seed=0)
    t1, hist = train_skipgram(g, corpus, dim=8, epochs=0, seed=5)
    t2, _ = train_skipgram(g, corpus, dim=8, epochs=0, seed=5)
    assert hist == []
    assert np.array_equal(t1, t2)
    assert t1.shape == (2, 8)


def test_skipgram_empty_corpus_rejected():
    g = from_edges(2, [(0, 1)])
    empty = WalkCorpus(np.zeros((0, 4), dtype=np.int64), 4, 0)
    with pytest.raises(ValueError):
        train_skipgram(g, empty, epochs=1)


def test_skipgram_bitwise_reproducible():
    g = two_cliques(4)
    corpus = random_walks(g, 10, 4, seed=2)
    t1, h1 = train_skipgram(g, corpus, dim=16, epochs=3, seed=7)
    t2, h2 = train_skipgram(g, corpus, dim=16, epochs=3, seed=7)
    assert np.array_equal(t1, t2)
    assert h1 == h2


def test_skipgram_loss_non_increasing_within_tolerance():
    g = two_cliques(6)
    corpus = random_walks(g, 20, 6, seed=4)
    _, hist = train_skipgram(g, corpus, dim=16, epochs=6, seed=4)
    for a, b in zip(hist[:-1], hist[1:]):
        assert b <= a + 0.05


def test_clique_separation():
    g = two_cliques(4)
    corpus = random_walks(g, 20, 10, seed=0)
    table, _ = train_skipgram(g, corpus, dim=16, epochs=10, seed=0)
    sim = cosine_similarity_matrix(table)
    intra = np.mean([sim[u, v] for u in range(4) for v in range(4) if u != v])
    inter = np.mean([sim[u, v] for u in range(4) for v in range(4, 8)])
    assert intra > inter


def test_single_edge_similarity_beats_random_init():
    g = from_edges(2, [(0, 1)])
    corpus = random_walks(g, 10, 10, seed=1)
    init, _ = train_skipgram(g, corpus, dim=2, epochs=0, seed=1)
    trained, _ = train_skipgram(g, corpus, dim=2, epochs=20, seed=1)

    def cos(t):
        return float(t[0] @ t[1] / (np.linalg.norm(t[0]) * np.linalg.norm(t[1])))

    assert cos(trained) > cos(init)


def test_norms_stay_finite_over_50_epochs():
    g = two_cliques(5)
    corpus = random_walks(g, 15, 5, seed=8)
    table, hist = train_skipgram(g, corpus, dim=8, epochs=50, seed=8)
    assert np.all(np.isfinite(table))
    assert np.all(np.isfinite(hist))


def test_node_embeddings_wrapper_names():
    g = two_cliques(3)
    fm = node_embeddings(g, dim=4, walk_length=6, walks_per_node=2, epochs=1, seed=0)
    assert fm.names == ["emb_0", "emb_1", "emb_2", "emb_3"]
    assert fm.values.shape == (6, 4)
