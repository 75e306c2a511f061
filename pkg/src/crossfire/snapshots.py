"""End-of-test snapshot files, the mutant manifest, and corpus layout.

On-disk format is canonical UTF-8 JSON (sorted keys, no insignificant
whitespace): parse(serialize(s)) == s and two serializations of the same
snapshot are byte-identical. Corpus layout:

    <corpus>/manifest.json
    <corpus>/runs/original/run-<k>/<test_id>.snap.json
    <corpus>/runs/mutants/<mutant_id>/<test_id>.snap.json
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Iterator

from .canonical import canonical_bytes
from .errors import MalformedGraphError, SchemaError, SnapshotParseError
from .graphs import (
    KIND_BACKREF,
    KIND_COLLECTION,
    KIND_PRIMITIVE,
    NODE_KINDS,
    VARIABLE_KINDS,
    GraphEdge,
    GraphNode,
    RootVariable,
    VariableGraph,
    canonicalize,
    structural_hash,
)

ORIGINAL_VERSION = "original"

# Canonical graphs are fixed points of canonicalize at any cap at or above
# their depth; parse/validate re-check with an effectively unlimited cap.
_NO_CAP = 1 << 30


@dataclass(frozen=True)
class TestRunSnapshot:
    """All variable graphs captured at the end of one test run."""

    program_version: str  # "original" or a mutant id
    run_index: int
    test_id: str
    variables: tuple[VariableGraph, ...]

    def variable_map(self) -> dict[tuple[str, str, int], VariableGraph]:
        return {graph.variable.key(): graph for graph in self.variables}

    def payload(self) -> dict[str, Any]:
        return {
            "program_version": self.program_version,
            "run_index": self.run_index,
            "test_id": self.test_id,
            "variables": [g.payload() for g in self.variables],
        }


@dataclass(frozen=True)
class MutantRecord:
    mutant_id: str
    source_location: str
    operator: str
    status: str  # "killed" or "survived"
    covering_test_ids: tuple[str, ...]

    def payload(self) -> dict[str, Any]:
        return {
            "covering_test_ids": list(self.covering_test_ids),
            "mutant_id": self.mutant_id,
            "operator": self.operator,
            "source_location": self.source_location,
            "status": self.status,
        }


@dataclass(frozen=True)
class MutantManifest:
    mutants: tuple[MutantRecord, ...]
    tests: tuple[str, ...]
    n_runs: int

    def mutant(self, mutant_id: str) -> MutantRecord:
        return self.by_id[mutant_id]

    @cached_property
    def by_id(self) -> dict[str, MutantRecord]:
        return {m.mutant_id: m for m in self.mutants}

    def surviving(self) -> tuple[MutantRecord, ...]:
        return tuple(m for m in self.mutants if m.status == "survived")

    def payload(self) -> dict[str, Any]:
        return {
            "mutants": [m.payload() for m in self.mutants],
            "n_runs": self.n_runs,
            "tests": list(self.tests),
        }


@dataclass(frozen=True)
class Violation:
    """One validation finding; violations are data, not exceptions."""

    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def serialize(snapshot: TestRunSnapshot) -> bytes:
    return canonical_bytes(snapshot.payload())


def serialize_manifest(manifest: MutantManifest) -> bytes:
    return canonical_bytes(manifest.payload())


def parse(data: bytes) -> TestRunSnapshot:
    """Parse and schema-check snapshot bytes.

    Raises SnapshotParseError with the character offset for invalid JSON
    and SchemaError naming the offending field for schema violations;
    per-graph structural invariants (label mixing, index contiguity,
    collection size vs index-edge count, connectivity) are enforced here.
    """
    try:
        payload = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise SnapshotParseError("snapshot is not valid UTF-8", exc.start) from exc
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    return snapshot_from_payload(payload)


def snapshot_from_payload(payload: Any) -> TestRunSnapshot:
    root = _Reader(payload, "snapshot")
    version = root.str_field("program_version")
    run_index = root.int_field("run_index")
    test_id = root.str_field("test_id")
    if run_index < 0:
        raise SchemaError("snapshot.run_index", "must be >= 0")
    variables = []
    for i, var_payload in enumerate(root.list_field("variables")):
        variables.append(_graph_from_payload(var_payload, f"snapshot.variables[{i}]"))
    snapshot = TestRunSnapshot(
        program_version=version,
        run_index=run_index,
        test_id=test_id,
        variables=tuple(variables),
    )
    keys = [g.variable.key() for g in snapshot.variables]
    if len(set(keys)) != len(keys):
        raise SchemaError("snapshot.variables", "variable roots are not pairwise distinct")
    return snapshot


def parse_manifest(data: bytes) -> MutantManifest:
    try:
        payload = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise SnapshotParseError("manifest is not valid UTF-8", exc.start) from exc
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    root = _Reader(payload, "manifest")
    n_runs = root.int_field("n_runs")
    tests = tuple(root.str_list_field("tests"))
    mutants = []
    seen = set()
    for i, m_payload in enumerate(root.list_field("mutants")):
        reader = _Reader(m_payload, f"manifest.mutants[{i}]")
        record = MutantRecord(
            mutant_id=reader.str_field("mutant_id"),
            source_location=reader.str_field("source_location"),
            operator=reader.str_field("operator"),
            status=reader.str_field("status"),
            covering_test_ids=tuple(reader.str_list_field("covering_test_ids")),
        )
        if record.status not in ("killed", "survived"):
            raise SchemaError(f"manifest.mutants[{i}].status", f"unknown status {record.status!r}")
        if record.mutant_id in seen:
            raise SchemaError(f"manifest.mutants[{i}].mutant_id", f"duplicate mutant id {record.mutant_id!r}")
        seen.add(record.mutant_id)
        for t in record.covering_test_ids:
            if t not in tests:
                raise SchemaError(
                    f"manifest.mutants[{i}].covering_test_ids", f"unknown test {t!r}"
                )
        mutants.append(record)
    return MutantManifest(mutants=tuple(mutants), tests=tests, n_runs=n_runs)


def _graph_from_payload(payload: Any, where: str) -> VariableGraph:
    reader = _Reader(payload, where)
    var_reader = _Reader(reader.field("variable", dict), f"{where}.variable")
    variable = RootVariable(
        name=var_reader.str_field("name"),
        variable_kind=var_reader.str_field("variable_kind"),
        ordinal=var_reader.int_field("ordinal"),
    )
    if variable.variable_kind not in VARIABLE_KINDS:
        raise SchemaError(f"{where}.variable.variable_kind", f"unknown kind {variable.variable_kind!r}")
    root = reader.str_field("root")
    hash_text = reader.str_field("structure_hash")
    try:
        stored_hash = int(hash_text, 16)
    except ValueError:
        raise SchemaError(f"{where}.structure_hash", f"not a hex string: {hash_text!r}") from None

    nodes = []
    for i, node_payload in enumerate(reader.list_field("nodes")):
        nodes.append(_node_from_payload(node_payload, f"{where}.nodes[{i}]"))
    edges = []
    for i, edge_payload in enumerate(reader.list_field("edges")):
        er = _Reader(edge_payload, f"{where}.edges[{i}]")
        label = er.field("label", (str, int))
        edges.append(GraphEdge(parent=er.str_field("parent"), label=label, child=er.str_field("child")))

    graph = VariableGraph(
        variable=variable,
        root=root,
        nodes=tuple(nodes),
        edges=tuple(edges),
        structure_hash=stored_hash,
    )
    if root != variable.name:
        raise SchemaError(f"{where}.root", f"root {root!r} does not equal the variable name")
    try:
        # Triggers duplicate-node/edge-label detection and structural checks.
        # Unlimited depth: files written under a larger depth cap stay readable.
        graph.nodes_by_id
        canonicalize(graph, depth_cap=_NO_CAP)
    except MalformedGraphError as exc:
        raise SchemaError(where, str(exc)) from exc
    return graph


def _node_from_payload(payload: Any, where: str) -> GraphNode:
    reader = _Reader(payload, where)
    kind = reader.str_field("kind")
    if kind not in NODE_KINDS:
        raise SchemaError(f"{where}.kind", f"unknown kind {kind!r}")
    node = GraphNode(
        node_id=reader.str_field("node_id"),
        kind=kind,
        type_name=reader.str_field("type_name"),
        value=reader.opt_str_field("value"),
        ref_target=reader.opt_str_field("ref_target"),
        size=reader.opt_int_field("size"),
    )
    if (node.value is not None) != (kind == KIND_PRIMITIVE):
        raise SchemaError(f"{where}.value", f"value is present iff kind is primitive, got {kind}")
    if (node.ref_target is not None) != (kind == KIND_BACKREF):
        raise SchemaError(f"{where}.ref_target", f"ref_target is present iff kind is back-reference, got {kind}")
    if (node.size is not None) != (kind == KIND_COLLECTION):
        raise SchemaError(f"{where}.size", f"size is present iff kind is collection, got {kind}")
    if node.size is not None and node.size < 0:
        raise SchemaError(f"{where}.size", "size must be >= 0")
    return node


class _Reader:
    """Tiny schema walker that raises SchemaError naming the field."""

    def __init__(self, payload: Any, where: str):
        if not isinstance(payload, dict):
            raise SchemaError(where, f"expected object, got {type(payload).__name__}")
        self.payload = payload
        self.where = where

    def field(self, name: str, types) -> Any:
        if name not in self.payload:
            raise SchemaError(f"{self.where}.{name}", "missing required field")
        value = self.payload[name]
        if not isinstance(value, types) or isinstance(value, bool):
            raise SchemaError(f"{self.where}.{name}", f"wrong type {type(value).__name__}")
        return value

    def str_field(self, name: str) -> str:
        return self.field(name, str)

    def int_field(self, name: str) -> int:
        return self.field(name, int)

    def list_field(self, name: str) -> list:
        return self.field(name, list)

    def str_list_field(self, name: str) -> list[str]:
        values = self.list_field(name)
        for i, v in enumerate(values):
            if not isinstance(v, str):
                raise SchemaError(f"{self.where}.{name}[{i}]", f"wrong type {type(v).__name__}")
        return values

    def opt_str_field(self, name: str) -> str | None:
        if name not in self.payload:
            return None
        return self.str_field(name)

    def opt_int_field(self, name: str) -> int | None:
        if name not in self.payload:
            return None
        return self.int_field(name)


# ---------------------------------------------------------------------------
# Validation against a manifest
# ---------------------------------------------------------------------------

def validate(snapshot: TestRunSnapshot, manifest: MutantManifest) -> list[Violation]:
    """Check type invariants plus manifest membership. Empty list == valid."""
    violations: list[Violation] = []
    where = f"{snapshot.program_version}/run-{snapshot.run_index}/{snapshot.test_id}"

    if snapshot.test_id not in manifest.tests:
        violations.append(Violation(where, f"unknown test {snapshot.test_id!r}"))
    if snapshot.program_version == ORIGINAL_VERSION:
        if not 0 <= snapshot.run_index < manifest.n_runs:
            violations.append(
                Violation(where, f"original run_index {snapshot.run_index} outside [0, {manifest.n_runs})")
            )
    elif snapshot.program_version in manifest.by_id:
        if snapshot.run_index != 0:
            violations.append(Violation(where, "mutant snapshots must have run_index 0"))
    else:
        violations.append(Violation(where, f"unknown program version {snapshot.program_version!r}"))

    for graph in snapshot.variables:
        vwhere = f"{where}:{graph.variable.name}"
        try:
            canonical = canonicalize(graph, depth_cap=_NO_CAP)
        except MalformedGraphError as exc:
            violations.append(Violation(vwhere, str(exc)))
            continue
        if canonical.nodes != graph.nodes or canonical.edges != graph.edges:
            violations.append(Violation(vwhere, "graph is not in canonical form"))
        expected_hash = structural_hash(graph)
        if graph.structure_hash != expected_hash:
            violations.append(
                Violation(vwhere, f"structure_hash {graph.structure_hash:016x} != computed {expected_hash:016x}")
            )
    return violations


# ---------------------------------------------------------------------------
# Corpus layout
# ---------------------------------------------------------------------------

def manifest_path(corpus: Path) -> Path:
    return corpus / "manifest.json"


def original_run_dir(corpus: Path, run_index: int) -> Path:
    return corpus / "runs" / "original" / f"run-{run_index}"


def mutant_dir(corpus: Path, mutant_id: str) -> Path:
    return corpus / "runs" / "mutants" / mutant_id


def snapshot_path(corpus: Path, program_version: str, run_index: int, test_id: str) -> Path:
    if program_version == ORIGINAL_VERSION:
        return original_run_dir(corpus, run_index) / f"{test_id}.snap.json"
    return mutant_dir(corpus, program_version) / f"{test_id}.snap.json"


def write_snapshot(corpus: Path, snapshot: TestRunSnapshot) -> Path:
    path = snapshot_path(corpus, snapshot.program_version, snapshot.run_index, snapshot.test_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize(snapshot))
    return path


def load_snapshot(path: Path) -> TestRunSnapshot:
    return parse(path.read_bytes())


def load_manifest(corpus: Path) -> MutantManifest:
    return parse_manifest(manifest_path(corpus).read_bytes())


def write_manifest(corpus: Path, manifest: MutantManifest) -> Path:
    path = manifest_path(corpus)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_manifest(manifest))
    return path


def iter_snapshot_paths(corpus: Path) -> Iterator[Path]:
    runs = corpus / "runs"
    if runs.is_dir():
        yield from sorted(runs.glob("original/run-*/*.snap.json"))
        yield from sorted(runs.glob("mutants/*/*.snap.json"))
