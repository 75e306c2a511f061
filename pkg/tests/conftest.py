from __future__ import annotations

import random

import pytest

from crossfire.graphs import GraphEdge, GraphNode, RootVariable, VariableGraph, canonicalize, raw_graph
from crossfire.pipeline import AnalysisResult, analyze_corpus
from crossfire.synthgen import SyntheticCorpus, demo_corpus


def obj(nid: str, type_name: str = "demo.T") -> GraphNode:
    return GraphNode(nid, "object", type_name)


def coll(nid: str, size: int, type_name: str = "list") -> GraphNode:
    return GraphNode(nid, "collection", type_name, size=size)


def prim(nid: str, value: str, type_name: str = "int") -> GraphNode:
    return GraphNode(nid, "primitive", type_name, value=value)


def null(nid: str) -> GraphNode:
    return GraphNode(nid, "null", "null")


def edge(parent: str, label, child: str) -> GraphEdge:
    return GraphEdge(parent=parent, label=label, child=child)


def graph(name: str, nodes, edges, kind: str = "local", canonical: bool = True) -> VariableGraph:
    raw = raw_graph(RootVariable(name, kind), nodes[0].node_id, nodes, edges)
    return canonicalize(raw) if canonical else raw


def shuffle_ids(g: VariableGraph, seed: int) -> VariableGraph:
    """Relabel every node id randomly, keeping the structure intact."""
    rng = random.Random(seed)
    ids = [n.node_id for n in g.nodes]
    fresh = [f"x{i}" for i in range(len(ids))]
    rng.shuffle(fresh)
    mapping = dict(zip(ids, fresh))
    nodes = [
        GraphNode(
            node_id=mapping[n.node_id],
            kind=n.kind,
            type_name=n.type_name,
            value=n.value,
            ref_target=mapping[n.ref_target] if n.ref_target is not None else None,
            size=n.size,
        )
        for n in g.nodes
    ]
    edges = [GraphEdge(mapping[e.parent], e.label, mapping[e.child]) for e in g.edges]
    return raw_graph(g.variable, mapping[g.root], nodes, edges)


@pytest.fixture(scope="session")
def demo() -> SyntheticCorpus:
    return demo_corpus()


@pytest.fixture(scope="session")
def demo_analysis(demo) -> AnalysisResult:
    return analyze_corpus(demo)
