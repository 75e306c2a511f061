"""Canonicalization, path ids, and structural hashing."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import edge, graph, null, obj, prim, shuffle_ids
from crossfire.errors import MalformedGraphError
from crossfire.graphs import (
    GraphEdge,
    GraphNode,
    RootVariable,
    canonicalize,
    extends_path,
    path_depth,
    raw_graph,
    structural_hash,
)
from crossfire.synthgen import ScenarioSpec, _random_graph


def test_field_chain_gets_path_ids():
    g = graph(
        "var2",
        [obj("a"), obj("b"), prim("c", "1")],
        [edge("a", "f4", "b"), edge("b", "f3", "c")],
    )
    assert sorted(n.node_id for n in g.nodes) == ["var2", "var2.f4", "var2.f4.f3"]


def test_single_primitive_root():
    g = graph("varX", [prim("p", "5")], [])
    assert [n.node_id for n in g.nodes] == ["varX"]
    assert g.edges == ()


def test_diamond_owned_under_first_label():
    # Hand-enumerated BFS on the 4-node instance: root expands a before b,
    # so the shared child is owned at var.a and the b edge hits a back-reference.
    g = graph(
        "var",
        [obj("r"), obj("shared"), prim("leaf", "3")],
        [edge("r", "a", "shared"), edge("r", "b", "shared"), edge("shared", "f", "leaf")],
    )
    by_id = g.nodes_by_id
    assert by_id["var.a"].kind == "object"
    assert by_id["var.a.f"].value == "3"
    assert by_id["var.b"].kind == "back-reference"
    assert by_id["var.b"].ref_target == "var.a"
    assert "var.b.f" not in by_id


def test_cycle_becomes_back_reference():
    g = graph(
        "v",
        [obj("r"), obj("child")],
        [edge("r", "f0", "child"), edge("child", "back", "r")],
    )
    assert g.nodes_by_id["v.f0.back"].ref_target == "v"


def test_collection_children_sorted_numerically():
    from conftest import coll

    g = graph(
        "v",
        [coll("c", 3), prim("p0", "0"), prim("p1", "1"), prim("p2", "2")],
        [edge("c", 2, "p2"), edge("c", 0, "p0"), edge("c", 1, "p1")],
    )
    assert [n.node_id for n in g.nodes if n.kind == "primitive"] == ["v[0]", "v[1]", "v[2]"]
    assert g.nodes_by_id["v[2]"].value == "2"


def test_depth_cap_inserts_truncated_marker():
    g = graph("v", [obj("a"), obj("b"), prim("c", "9")], [edge("a", "f", "b"), edge("b", "g", "c")])
    capped = canonicalize(g, depth_cap=2)
    marker = capped.nodes_by_id["v.f"]
    assert marker.kind == "truncated"
    assert marker.type_name == "demo.T"
    assert "v.f.g" not in capped.nodes_by_id
    # Re-canonicalizing at the same cap is a fixed point.
    assert canonicalize(capped, depth_cap=2) == capped


def test_disconnected_node_rejected():
    with pytest.raises(MalformedGraphError, match="disconnected"):
        graph("v", [obj("a"), prim("stray", "1")], [])


def test_duplicate_edge_label_rejected():
    with pytest.raises(MalformedGraphError, match="duplicate"):
        graph(
            "v",
            [obj("a"), prim("b", "1"), prim("c", "2")],
            [edge("a", "f", "b"), edge("a", "f", "c")],
        )


def test_mixed_labels_rejected():
    with pytest.raises(MalformedGraphError, match="mixed"):
        graph(
            "v",
            [obj("a"), prim("b", "1"), prim("c", "2")],
            [edge("a", "f", "b"), edge("a", 0, "c")],
        )


def test_separator_in_field_label_rejected():
    with pytest.raises(MalformedGraphError, match="separator"):
        graph("v", [obj("a"), prim("b", "1")], [edge("a", "f.g", "b")])


def test_children_under_leaf_rejected():
    with pytest.raises(MalformedGraphError, match="children"):
        graph("v", [prim("a", "1"), prim("b", "2")], [edge("a", "f", "b")])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_canonicalize_idempotent_and_relabel_invariant(seed):
    rng = random.Random(seed)
    g = _random_graph(rng, ScenarioSpec(seed=seed), RootVariable("v"))
    assert canonicalize(g) == g  # idempotence
    relabeled = shuffle_ids(g, seed)
    assert canonicalize(relabeled) == g  # ids carry no information


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_path_id_soundness(seed):
    # Following a node id's labels from the root must reach exactly that node.
    rng = random.Random(seed)
    g = _random_graph(rng, ScenarioSpec(seed=seed), RootVariable("v"))
    children = {parent: dict(pairs) for parent, pairs in g.children.items()}
    for node in g.nodes:
        if node.kind == "back-reference":
            continue
        current = g.root
        for label in _labels_of(node.node_id):
            current = children[current][label]
        assert current == node.node_id


def _labels_of(node_id: str):
    """Independent path parser used only by tests."""
    labels: list[str | int] = []
    buf = ""
    mode = "root"
    for ch in node_id:
        if ch == ".":
            if mode == "field":
                labels.append(buf)
            buf, mode = "", "field"
        elif ch == "[":
            if mode == "field":
                labels.append(buf)
            buf, mode = "", "index"
        elif ch == "]":
            labels.append(int(buf))
            buf, mode = "", "closed"
        else:
            buf += ch
    if mode == "field" and buf:
        labels.append(buf)
    return labels


def test_path_depth():
    assert path_depth("var2") == 1
    assert path_depth("var2.f4") == 2
    assert path_depth("var2.f4.f3") == 3
    assert path_depth("v[0]") == 2
    assert path_depth("v.items[3].name") == 4


def test_extends_path_is_delimiter_exact():
    assert extends_path("v.f1", "v.f1.g")
    assert extends_path("v.f1", "v.f1[0]")
    assert not extends_path("v.f1", "v.f10")
    assert not extends_path("v.f1", "v.f1")


# ---------------------------------------------------------------------------
# structural hash
# ---------------------------------------------------------------------------

def test_aliased_variables_hash_equal():
    nodes = [obj("r"), prim("x", "42")]
    edges = [edge("r", "f", "x")]
    a = canonicalize(raw_graph(RootVariable("a"), "r", nodes, edges))
    b = canonicalize(raw_graph(RootVariable("b"), "r", nodes, edges))
    assert a.nodes != b.nodes  # different path ids
    assert a.structure_hash == b.structure_hash


def test_value_change_changes_hash():
    base = graph("v", [obj("r"), prim("x", "42")], [edge("r", "f", "x")])
    changed = graph("v", [obj("r"), prim("x", "43")], [edge("r", "f", "x")])
    assert base.structure_hash != changed.structure_hash


def test_demo_variable_graphs_hash_differently(demo):
    run = demo.original_runs["test1"][0]
    graphs = {g.variable.name: g for g in run.variables}
    assert graphs["var1"].structure_hash != graphs["var2"].structure_hash


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_hash_equals_iff_root_relative_payload_equals(seed):
    rng = random.Random(seed)
    spec = ScenarioSpec(seed=seed)
    g1 = _random_graph(rng, spec, RootVariable("v"))
    g2 = _random_graph(rng, spec, RootVariable("w"))
    same_payload = g1.payload(hash_form=True) == g2.payload(hash_form=True)
    same_hash = structural_hash(g1) == structural_hash(g2)
    assert same_payload == same_hash  # collision here counts as a failure


def test_hash_is_pure_function():
    g = graph("v", [obj("r"), prim("x", "1")], [edge("r", "f", "x")])
    assert structural_hash(g) == structural_hash(g) == g.structure_hash
