import io

import numpy as np
import pytest

from hiersage.graph import (
    Graph,
    GraphFormatError,
    NodeTable,
    check_invariants,
    connected_components,
    from_edges,
    induced_subgraph,
    is_connected_within,
    largest_connected_component,
    load_edge_list,
    load_node_table,
    save_edge_list,
    save_node_table,
)


def lines(text):
    return io.StringIO(text)


def test_load_dedups_and_drops_self_loops():
    g, nodes = load_edge_list(lines("a\tb\nb\ta\na\ta\na\tc\n"))
    assert g.n == 3
    assert g.m == 2
    assert nodes.names == ["a", "b", "c"]
    assert sorted(map(tuple, g.edges().tolist())) == [(0, 1), (0, 2)]


def test_load_empty_stream():
    g, nodes = load_edge_list(lines(""))
    assert g.n == 0 and g.m == 0


def test_load_triangle_degrees():
    g, _ = load_edge_list(lines("a\tb\nb\tc\nc\ta\n"))
    assert [g.degree(u) for u in range(3)] == [2, 2, 2]


def test_load_comments_and_blank_lines_skipped():
    g, _ = load_edge_list(lines("# header\n\na\tb\n"))
    assert g.m == 1


def test_load_malformed_line_reports_number():
    with pytest.raises(GraphFormatError, match="line 2"):
        load_edge_list(lines("a\tb\nbogus line\n"))


def test_load_unknown_name_with_table():
    table = NodeTable(names=["a", "b"])
    with pytest.raises(GraphFormatError, match="unknown node name"):
        load_edge_list(lines("a\tz\n"), nodes=table)


def test_load_with_table_keeps_isolated_nodes():
    table = NodeTable(names=["a", "b", "loner"])
    g, nodes = load_edge_list(lines("a\tb\n"), nodes=table)
    assert g.n == 3
    assert g.degree(2) == 0


def test_degree_star_and_path():
    star = from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    assert star.degree(0) == 4
    path = from_edges(3, [(0, 1), (1, 2)])
    assert path.degree(1) == 2
    iso = from_edges(2, [(0, 1)])
    g = from_edges(3, [(0, 1)])
    assert g.degree(2) == 0
    with pytest.raises(IndexError):
        iso.degree(5)


def test_invariants_hold_after_load():
    g, _ = load_edge_list(lines("a\tb\nb\tc\nc\ta\nb\ta\nd\td\n"))
    check_invariants(g)


def test_roundtrip_idempotent():
    g, nodes = load_edge_list(lines("c\ta\na\tb\nb\tc\nd\tb\n"))
    buf = io.StringIO()
    save_edge_list(g, buf, names=nodes.names)
    g2, nodes2 = load_edge_list(lines(buf.getvalue()), nodes=nodes)
    assert g2 == g
    buf2 = io.StringIO()
    save_edge_list(g2, buf2, names=nodes2.names)
    assert buf.getvalue() == buf2.getvalue()


def test_node_table_roundtrip():
    table = NodeTable(names=["a", "b"], labels=["G0.L0", None])
    buf = io.StringIO()
    save_node_table(table, buf)
    assert buf.getvalue() == "0\ta\tG0.L0\n1\tb\t-\n"
    back = load_node_table(lines(buf.getvalue()))
    assert back.names == table.names and back.labels == table.labels


def test_node_table_duplicate_names_rejected():
    with pytest.raises(GraphFormatError):
        NodeTable(names=["a", "a"])


def test_largest_component_tie_break():
    # two triangles plus an isolated node; both triangles size 3
    g = from_edges(7, [(3, 4), (4, 5), (5, 3), (0, 1), (1, 2), (2, 0)])
    sub, mapping = largest_connected_component(g)
    assert sub.n == 3 and sub.m == 3
    assert np.array_equal(np.flatnonzero(mapping >= 0), [0, 1, 2])


def test_largest_component_identity_on_connected():
    g = from_edges(4, [(0, 1), (1, 2), (2, 3)])
    sub, mapping = largest_connected_component(g)
    assert sub == g
    assert np.array_equal(mapping, np.arange(4))


def test_largest_component_k4_beats_k3():
    k4 = [(4, 5), (4, 6), (4, 7), (5, 6), (5, 7), (6, 7)]
    k3 = [(0, 1), (1, 2), (2, 0)]
    g = from_edges(8, k3 + k4)
    sub, _ = largest_connected_component(g)
    assert sub.n == 4 and sub.m == 6


def test_largest_component_empty_graph():
    g = from_edges(0, [])
    sub, mapping = largest_connected_component(g)
    assert sub.n == 0 and mapping.size == 0


def test_induced_subgraph_cases():
    tri = from_edges(3, [(0, 1), (1, 2), (2, 0)])
    sub, mapping = induced_subgraph(tri, [0, 1])
    assert sub.n == 2 and sub.m == 1
    full, mapping = induced_subgraph(tri, [0, 1, 2])
    assert full == tri
    empty, _ = induced_subgraph(tri, [])
    assert empty.n == 0 and empty.m == 0


def test_induced_subgraph_keeps_only_internal_edges():
    g = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    sub, mapping = induced_subgraph(g, [0, 1, 3])
    assert sub.m == 1  # only (0,1) survives
    assert mapping[2] == -1 and mapping[3] == 2


def test_connected_components_and_subset_check():
    g = from_edges(6, [(0, 1), (2, 3), (3, 4)])
    comp = connected_components(g)
    assert comp[0] == comp[1]
    assert comp[2] == comp[3] == comp[4]
    assert comp[5] not in (comp[0], comp[2])
    assert is_connected_within(g, np.array([2, 3, 4]))
    assert not is_connected_within(g, np.array([0, 1, 2]))


def test_random_graphs_keep_invariants():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(1, 12))
        k = int(rng.integers(0, 30))
        raw = rng.integers(0, n, size=(k, 2))
        g = from_edges(n, raw)
        check_invariants(g)
        assert g.m == len(g.edges())
