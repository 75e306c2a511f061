"""Snapshot serialization, parsing, and manifest validation."""

from __future__ import annotations

import json

import pytest

from conftest import coll, edge, graph, obj, prim
from crossfire.errors import SchemaError, SnapshotParseError
from crossfire.snapshots import (
    MutantManifest,
    MutantRecord,
    TestRunSnapshot,
    load_manifest,
    parse,
    serialize,
    snapshot_path,
    validate,
    write_manifest,
    write_snapshot,
)
from crossfire.synthgen import demo_corpus, generate_corpus, ScenarioSpec, write_corpus


def make_snapshot(test_id="t1", version="original", run_index=0):
    g = graph("v", [obj("r"), prim("x", "5")], [edge("r", "f", "x")])
    return TestRunSnapshot(version, run_index, test_id, (g,))


def make_manifest():
    return MutantManifest(
        mutants=(
            MutantRecord("m1", "src/a:1", "op", "survived", ("t1",)),
            MutantRecord("m2", "src/a:2", "op", "killed", ("t1",)),
        ),
        tests=("t1",),
        n_runs=3,
    )


def test_round_trip_identity():
    snapshot = make_snapshot()
    assert parse(serialize(snapshot)) == snapshot


def test_serialization_is_canonical():
    snapshot = make_snapshot()
    assert serialize(snapshot) == serialize(snapshot)
    # keys sorted, no whitespace
    text = serialize(snapshot).decode("utf-8")
    assert ": " not in text and ", " not in text


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_round_trip_on_generated_corpora(seed):
    corpus = generate_corpus(ScenarioSpec(seed=seed, n_tests=3, n_mutants=8))
    for runs in corpus.original_runs.values():
        for snapshot in runs:
            assert parse(serialize(snapshot)) == snapshot
    for runs_by_test in corpus.mutant_runs.values():
        for snapshot in runs_by_test.values():
            assert parse(serialize(snapshot)) == snapshot


def test_parse_rejects_collection_size_mismatch():
    payload = json.loads(serialize(make_snapshot()).decode())
    bad = graph("v", [coll("c", 2), prim("a", "1"), prim("b", "2")], [edge("c", 0, "a"), edge("c", 1, "b")])
    var = bad.payload()
    var["nodes"] = [n if n["node_id"] != "v" else {**n, "size": 3} for n in var["nodes"]]
    payload["variables"] = [var]
    with pytest.raises(SchemaError, match="size"):
        parse(json.dumps(payload).encode())


def test_parse_reports_json_offset():
    with pytest.raises(SnapshotParseError) as excinfo:
        parse(b'{"program_version": }')
    assert excinfo.value.offset == 20


def test_parse_names_missing_field():
    with pytest.raises(SchemaError, match="snapshot.test_id"):
        parse(b'{"program_version":"original","run_index":0,"variables":[]}')


def test_parse_rejects_value_on_object_node():
    payload = json.loads(serialize(make_snapshot()).decode())
    nodes = payload["variables"][0]["nodes"]
    payload["variables"][0]["nodes"] = [
        n if n["node_id"] != "v" else {**n, "value": "oops"} for n in nodes
    ]
    with pytest.raises(SchemaError, match="value"):
        parse(json.dumps(payload).encode())


def test_parse_rejects_duplicate_variables():
    snapshot = make_snapshot()
    doubled = TestRunSnapshot("original", 0, "t1", snapshot.variables * 2)
    with pytest.raises(SchemaError, match="pairwise distinct"):
        parse(serialize(doubled))


def test_validate_ok():
    assert validate(make_snapshot(), make_manifest()) == []


def test_validate_unknown_test():
    violations = validate(make_snapshot(test_id="ghost"), make_manifest())
    assert len(violations) == 1
    assert "unknown test" in violations[0].message


def test_validate_unknown_version_and_run_index():
    assert any(
        "unknown program version" in v.message
        for v in validate(make_snapshot(version="m9"), make_manifest())
    )
    assert any(
        "run_index" in v.message
        for v in validate(make_snapshot(run_index=7), make_manifest())
    )
    assert any(
        "run_index" in v.message
        for v in validate(make_snapshot(version="m1", run_index=1), make_manifest())
    )


def test_validate_flags_stale_hash():
    from dataclasses import replace

    snapshot = make_snapshot()
    tampered = TestRunSnapshot(
        "original", 0, "t1", (replace(snapshot.variables[0], structure_hash=123),)
    )
    violations = validate(tampered, make_manifest())
    assert any("structure_hash" in v.message for v in violations)


def test_validate_flags_non_canonical_order():
    g = graph("v", [obj("r"), prim("x", "5")], [edge("r", "f", "x")])
    reordered = TestRunSnapshot(
        "original", 0, "t1",
        (type(g)(variable=g.variable, root=g.root, nodes=tuple(reversed(g.nodes)),
                 edges=g.edges, structure_hash=g.structure_hash),),
    )
    violations = validate(reordered, make_manifest())
    assert any("canonical" in v.message for v in violations)


def test_mixed_labels_yield_one_violation_per_parent():
    # Constructed counterexample: two parents each mixing field and index labels.
    from crossfire.graphs import GraphEdge, GraphNode, RootVariable, VariableGraph

    nodes = (
        GraphNode("v", "object", "demo.T"),
        GraphNode("v.a", "object", "demo.T"),
        GraphNode("v.a.x", "primitive", "int", value="1"),
        GraphNode("v.a[0]", "primitive", "int", value="2"),
        GraphNode("v.b", "object", "demo.T"),
        GraphNode("v.b.y", "primitive", "int", value="3"),
        GraphNode("v.b[1]", "primitive", "int", value="4"),
    )
    edges = (
        GraphEdge("v", "a", "v.a"),
        GraphEdge("v", "b", "v.b"),
        GraphEdge("v.a", "x", "v.a.x"),
        GraphEdge("v.a", 0, "v.a[0]"),
        GraphEdge("v.b", "y", "v.b.y"),
        GraphEdge("v.b", 1, "v.b[1]"),
    )
    bad = VariableGraph(RootVariable("v"), "v", nodes, edges)
    snapshot = TestRunSnapshot("original", 0, "t1", (bad,))
    violations = validate(snapshot, make_manifest())
    assert len(violations) == 1  # canonicalize reports the first offending parent
    assert "mixed" in violations[0].message


def test_manifest_round_trip(tmp_path):
    manifest = make_manifest()
    write_manifest(tmp_path, manifest)
    assert load_manifest(tmp_path) == manifest


def test_manifest_rejects_unknown_covering_test(tmp_path):
    payload = make_manifest().payload()
    payload["mutants"][0]["covering_test_ids"] = ["ghost"]
    (tmp_path / "manifest.json").write_text(json.dumps(payload))
    with pytest.raises(SchemaError, match="unknown test"):
        load_manifest(tmp_path)


def test_corpus_layout(tmp_path):
    corpus = demo_corpus(n_runs=2)
    write_corpus(corpus, tmp_path)
    assert (tmp_path / "manifest.json").is_file()
    assert (tmp_path / "runs" / "original" / "run-0" / "test1.snap.json").is_file()
    assert (tmp_path / "runs" / "mutants" / "m1" / "test2.snap.json").is_file()
    assert (tmp_path / "truth.json").is_file()


def test_write_snapshot_is_byte_stable(tmp_path):
    snapshot = make_snapshot()
    first = write_snapshot(tmp_path, snapshot).read_bytes()
    second = write_snapshot(tmp_path, snapshot).read_bytes()
    assert first == second
    assert snapshot_path(tmp_path, "original", 0, "t1").read_bytes() == first
