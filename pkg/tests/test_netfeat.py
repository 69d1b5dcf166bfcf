import io

import numpy as np
import pytest

from hiersage.graph import from_edges
from hiersage.netfeat import (
    FeatureMatrix,
    Partition,
    assemble_features,
    assortativity,
    betweenness,
    graph_descriptor_features,
    load_features,
    louvain,
    modularity,
    one_hot_communities,
    save_features,
)

from oracles import brute_betweenness, brute_modularity, random_connected_graph


def triangle():
    return from_edges(3, [(0, 1), (1, 2), (2, 0)])


def star(k):
    return from_edges(k + 1, [(0, i) for i in range(1, k + 1)])


def path3():
    return from_edges(3, [(0, 1), (1, 2)])


# --- assortativity -----------------------------------------------------------

def test_assortativity_triangle_all_one():
    assert np.array_equal(assortativity(triangle()), np.ones(3))


def test_assortativity_star_quarter():
    # hand evaluation: center (1/4)*4*(1/4) = 1/4, each leaf (1/1)*(1/4) = 1/4
    a = assortativity(star(4))
    assert np.array_equal(a, np.full(5, 0.25))


def test_assortativity_path_half():
    assert np.array_equal(assortativity(path3()), np.full(3, 0.5))


def test_assortativity_isolated_zero_and_bounds():
    g = from_edges(4, [(0, 1), (1, 2)])
    a = assortativity(g)
    assert a[3] == 0.0
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, edges = random_connected_graph(rng)
        vals = assortativity(from_edges(n, edges))
        assert np.all((vals >= 0) & (vals <= 1))


def test_assortativity_regular_graph_is_one():
    cycle = from_edges(6, [(i, (i + 1) % 6) for i in range(6)])
    assert np.array_equal(assortativity(cycle), np.ones(6))


# --- betweenness -------------------------------------------------------------

def test_betweenness_path():
    assert np.allclose(betweenness(path3()), [0.0, 1.0, 0.0], atol=1e-12)


def test_betweenness_star_center():
    b = betweenness(star(4))
    assert b[0] == pytest.approx(6.0, abs=1e-12)  # C(4,2)
    assert np.allclose(b[1:], 0.0, atol=1e-12)


def test_betweenness_complete_graph_zero():
    k5 = from_edges(5, [(u, v) for u in range(5) for v in range(u + 1, 5)])
    assert np.allclose(betweenness(k5), 0.0, atol=1e-12)


def test_betweenness_matches_bruteforce_small_graphs():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n, edges = random_connected_graph(rng)
        g = from_edges(n, edges)
        fast = betweenness(g)
        slow = brute_betweenness(g)
        assert np.allclose(fast, slow, atol=1e-9)


def test_betweenness_sum_matches_oracle_total():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n, edges = random_connected_graph(rng)
        g = from_edges(n, edges)
        assert betweenness(g).sum() == pytest.approx(sum(brute_betweenness(g)), abs=1e-9)


def test_betweenness_disconnected_pairs_contribute_zero():
    g = from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5)])
    assert np.allclose(betweenness(g), brute_betweenness(g), atol=1e-12)


def test_betweenness_normalized_flag():
    g = path3()
    b = betweenness(g, normalized=True)
    assert b[1] == pytest.approx(1.0)  # 1 / C(2,2)


def test_betweenness_sampled_exact_when_all_sources():
    g = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)])
    assert np.allclose(betweenness(g, sample_sources=5), betweenness(g))


# --- modularity + louvain ----------------------------------------------------

def test_modularity_single_community_zero():
    g = triangle()
    assert modularity(g, Partition(np.zeros(3, dtype=int), 1)) == pytest.approx(0.0)


def test_modularity_two_k3_split_half():
    g = from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    p = Partition(np.array([0, 0, 0, 1, 1, 1]), 2)
    assert modularity(g, p) == pytest.approx(0.5)
    single = Partition(np.zeros(6, dtype=int), 1)
    assert modularity(g, single) == pytest.approx(0.0)


def test_modularity_empty_graph_errors():
    with pytest.raises(ValueError):
        modularity(from_edges(3, []), Partition(np.zeros(3, dtype=int), 1))


def two_k4_bridge():
    k4a = [(u, v) for u in range(4) for v in range(u + 1, 4)]
    k4b = [(u + 4, v + 4) for u, v in k4a]
    return from_edges(8, k4a + k4b + [(3, 4)])


def test_louvain_recovers_cliques_and_hits_bruteforce_optimum():
    g = two_k4_bridge()
    p = louvain(g, seed=0)
    assert p.k == 2
    assert len(set(p.assignment[:4])) == 1 and len(set(p.assignment[4:])) == 1
    assert p.assignment[0] != p.assignment[4]
    best_q, _ = brute_modularity(g)
    assert modularity(g, p) == pytest.approx(best_q, abs=1e-9)


def test_louvain_edgeless_singletons():
    p = louvain(from_edges(4, []), seed=0)
    assert p.k == 4
    assert np.array_equal(p.assignment, np.arange(4))


def test_louvain_single_k3_one_community():
    p = louvain(triangle(), seed=0)
    assert p.k == 1
    best_q, best_part = brute_modularity(triangle())
    assert best_q == pytest.approx(0.0)


def test_louvain_beats_singletons_and_is_deterministic():
    rng = np.random.default_rng(21)
    for trial in range(10):
        n, edges = random_connected_graph(rng)
        g = from_edges(n, edges)
        p1 = louvain(g, seed=trial)
        p2 = louvain(g, seed=trial)
        assert np.array_equal(p1.assignment, p2.assignment)
        singles = Partition(np.arange(g.n), g.n)
        assert modularity(g, p1) >= modularity(g, singles) - 1e-12


# --- one-hot + assembly ------------------------------------------------------

def test_one_hot_basic():
    p = Partition(np.array([0, 0, 1]), 2)
    fm = one_hot_communities(p, 4)
    expect = np.array([[1, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
    assert np.array_equal(fm.values, expect)
    assert fm.onehot.all()


def test_one_hot_overflow_to_other():
    p = Partition(np.array([0, 0, 0, 1, 1, 2, 3, 4]), 5)
    fm = one_hot_communities(p, 3)
    assert fm.names == ["community_0", "community_1", "community_other"]
    assert np.array_equal(fm.values.sum(axis=0), [3, 2, 3])
    assert np.array_equal(fm.values.sum(axis=1), np.ones(8))


def test_one_hot_single_community_padded():
    fm = one_hot_communities(Partition(np.zeros(3, dtype=int), 1), 4)
    assert np.array_equal(fm.values[:, 0], np.ones(3))
    assert np.array_equal(fm.values[:, 1:], np.zeros((3, 3)))


def test_assemble_concatenates_names():
    a = FeatureMatrix(np.ones((4, 2)), ["x", "y"])
    b = FeatureMatrix(np.zeros((4, 3)), ["u", "v", "w"])
    fm = assemble_features([a, b])
    assert fm.d == 5 and fm.names == ["x", "y", "u", "v", "w"]


def test_assemble_standardize_constant_column_zeroed():
    a = FeatureMatrix(np.full((5, 1), 3.0), ["c"])
    fm = assemble_features([a], standardize=True)
    assert np.array_equal(fm.values, np.zeros((5, 1)))


def test_assemble_standardize_train_rows_only():
    vals = np.arange(6, dtype=float)[:, None]
    fm = assemble_features([FeatureMatrix(vals, ["x"])], standardize=True,
                           train_nodes=np.array([0, 1, 2]))
    train_col = fm.values[:3, 0]
    assert train_col.mean() == pytest.approx(0.0)
    assert train_col.std() == pytest.approx(1.0)
    assert fm.values[5, 0] > fm.values[2, 0]


def test_assemble_skips_onehot_columns():
    oh = one_hot_communities(Partition(np.array([0, 1, 0, 1]), 2), 2)
    fm = assemble_features([oh], standardize=True)
    assert set(np.unique(fm.values)) == {0.0, 1.0}


def test_assemble_errors():
    a = FeatureMatrix(np.ones((4, 1)), ["x"])
    b = FeatureMatrix(np.ones((5, 1)), ["y"])
    with pytest.raises(ValueError):
        assemble_features([a, b])
    with pytest.raises(ValueError):
        assemble_features([])


def test_feature_matrix_validation():
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[np.nan]]), ["x"])
    with pytest.raises(ValueError):
        FeatureMatrix(np.ones((2, 2)), ["x", "x"])


def test_descriptor_features_and_tsv_roundtrip():
    g = two_k4_bridge()
    fm = graph_descriptor_features(g, seed=0, max_communities=4)
    assert fm.names[:2] == ["degree", "assortativity"]
    assert fm.n == 8
    buf = io.StringIO()
    save_features(fm, buf)
    back = load_features(io.StringIO(buf.getvalue()))
    assert back.names == fm.names
    assert np.allclose(back.values, fm.values, atol=1e-9)
