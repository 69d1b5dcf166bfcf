import numpy as np
import pytest

from hiersage.graph import check_invariants, connected_components
from hiersage.synthgen import (
    SynthConfig,
    class_sizes,
    coarse_group_features,
    empirical_homophily,
    generate,
)


def test_limit_case_two_disjoint_cliques():
    cfg = SynthConfig(groups=2, leaves_per_group=1, n=6, size_distribution="uniform",
                      p_same=1.0, p_sibling=0.0, p_far=0.0, star_classes=0, seed=1)
    g, labels, h = generate(cfg)
    assert g.m == 6  # two K3s
    comp = connected_components(g)
    for u in range(6):
        for v in range(6):
            assert (comp[u] == comp[v]) == (labels[u] == labels[v])
    assert empirical_homophily(g, labels, h) == (1.0, 1.0)


def test_degenerate_homophily_is_er_like():
    p = 0.05
    cfg = SynthConfig(groups=2, leaves_per_group=1, n=400, size_distribution="uniform",
                      p_same=p, p_sibling=p, p_far=p, star_classes=0, seed=3)
    g, labels, h = generate(cfg)
    check_invariants(g)
    same_leaf, _ = empirical_homophily(g, labels, h)
    # with equal densities the same-leaf fraction matches the class share ~ 1/2
    assert abs(same_leaf - 0.5) < 0.05


def test_geometric_sizes_normalization():
    cfg = SynthConfig(groups=2, leaves_per_group=3, n=1200, geometric_ratio=0.7)
    sizes = class_sizes(cfg)
    expect_top = 1200 * (0.3 / (1 - 0.7 ** 6))
    assert abs(sizes[0] - expect_top) <= 1.0
    assert np.all(np.diff(sizes) <= 0)
    assert sizes.sum() == 1200


def test_uniform_sizes():
    cfg = SynthConfig(groups=2, leaves_per_group=2, n=10, size_distribution="uniform")
    assert class_sizes(cfg).tolist() == [3, 3, 2, 2]


def test_generated_graph_passes_invariants_and_is_deterministic():
    cfg = SynthConfig(seed=9, n=300)
    g1, labels1, h = generate(cfg)
    g2, labels2, _ = generate(cfg)
    check_invariants(g1)
    assert g1 == g2
    assert np.array_equal(labels1, labels2)
    assert all(h.is_leaf(int(c)) for c in np.unique(labels1))


def test_intra_class_density_converges_to_p_same():
    cfg = SynthConfig(groups=2, leaves_per_group=1, n=2000, size_distribution="uniform",
                      p_same=0.02, p_sibling=0.002, p_far=0.002, star_classes=0, seed=5)
    g, labels, h = generate(cfg)
    leaf0 = labels == labels[np.argmax(labels == labels.min())]
    members = np.flatnonzero(labels == np.unique(labels)[0])
    total = len(members) * (len(members) - 1) / 2
    inside = set(members.tolist())
    count = sum(1 for u in members for v in g.neighbors(u) if int(v) in inside) / 2
    p_hat = count / total
    sigma = np.sqrt(0.02 * 0.98 / total)
    assert abs(p_hat - 0.02) <= 3 * sigma


def test_random_labels_homophily_near_one_over_k():
    cfg = SynthConfig(groups=2, leaves_per_group=2, n=800, size_distribution="uniform",
                      p_same=0.02, p_sibling=0.02, p_far=0.02, star_classes=0, seed=7)
    g, labels, h = generate(cfg)
    rng = np.random.default_rng(0)
    shuffled = labels.copy()
    rng.shuffle(shuffled)
    same_leaf, _ = empirical_homophily(g, shuffled, h)
    # ~ 2m samples of a Bernoulli(1/4) averaged over nodes; 3 sigma with slack
    sigma = np.sqrt(0.25 * 0.75 / (2 * g.m))
    assert abs(same_leaf - 0.25) <= max(5 * sigma, 0.02)


def test_star_class_attaches_broadly():
    base = dict(groups=2, leaves_per_group=3, n=900, size_distribution="uniform",
                p_same=0.02, p_sibling=0.004, p_far=0.0, seed=11)
    plain = generate(SynthConfig(star_classes=0, p_star=0.0, **base))[0]
    starred_g, labels, h = generate(SynthConfig(star_classes=1, p_star=0.02, **base))
    assert starred_g.m > plain.m
    star_leaf = h.leaf_ids[0]
    members = labels == star_leaf
    cross = sum(1 for u in np.flatnonzero(~members)
                for v in starred_g.neighbors(u) if members[v])
    assert cross > 0


def test_strict_mode_rejects_sparse_config():
    with pytest.raises(ValueError, match="infeasible"):
        generate(SynthConfig(n=600, p_same=0.001, p_sibling=0.001, p_far=0.001,
                             strict=True, star_classes=0))


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(p_same=0.1, p_sibling=0.2, p_far=0.0)
    with pytest.raises(ValueError):
        SynthConfig(geometric_ratio=0.0)
    with pytest.raises(ValueError):
        SynthConfig(n=3, groups=2, leaves_per_group=3)


def test_coarse_features_correlate_with_group():
    cfg = SynthConfig(seed=2, n=600)
    g, labels, h = generate(cfg)
    fm = coarse_group_features(labels, h, correlation=0.8, seed=4)
    assert fm.values.shape == (600, 2)
    assert np.array_equal(fm.values.sum(axis=1), np.ones(600))
    true_group = np.array([int(h.parent[c]) for c in labels])
    groups = sorted(set(true_group.tolist()))
    hit = fm.values[np.arange(600), np.searchsorted(groups, true_group)]
    assert abs(hit.mean() - 0.8) < 0.06
