"""Synthetic corpora with planted ground truth, and an exact cover oracle.

Real-world mutation corpora are not reproducible at desk scale, so every
pipeline property is tested against corpora whose infections, masked
locations and killable mutants are planted by construction and written to
a sidecar truth manifest, never inferred.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Any, Iterable

from .candidates import assertion_kind_for
from .canonical import canonical_bytes, canonical_value
from .errors import DataIntegrityError, OracleSizeError, ScenarioError
from .graphs import (
    KIND_BACKREF,
    KIND_COLLECTION,
    KIND_NULL,
    KIND_OBJECT,
    KIND_PRIMITIVE,
    GraphEdge,
    GraphNode,
    RootVariable,
    VariableGraph,
    canonicalize,
    child_path,
    extends_path,
    node_summary,
    path_depth,
    raw_graph,
)
from .infection import DIFF_MISSING, DIFF_NULLNESS, DIFF_SIZE, DIFF_TYPE, DIFF_VALUE
from .snapshots import (
    MutantManifest,
    MutantRecord,
    ORIGINAL_VERSION,
    TestRunSnapshot,
    write_manifest,
    write_snapshot,
)

PLANT_KINDS = (DIFF_VALUE, DIFF_SIZE, DIFF_NULLNESS, DIFF_TYPE, DIFF_MISSING)


@dataclass(frozen=True)
class ScenarioSpec:
    """Knobs for random corpus generation. Everything derives from the seed."""

    seed: int = 0
    n_tests: int = 4
    n_runs: int = 10
    vars_per_test: tuple[int, int] = (1, 3)
    tree_depth: tuple[int, int] = (2, 4)
    fanout: tuple[int, int] = (1, 3)
    collection_prob: float = 0.30
    share_prob: float = 0.15       # extra aliasing edge inside one graph
    alias_prob: float = 0.20       # variable aliasing a sibling variable
    n_mutants: int = 20
    surviving_fraction: float = 0.6
    infected_fraction: float = 0.85  # surviving mutants that actually get plantings
    plantings_per_variable: tuple[int, int] = (1, 2)
    covering_tests_per_mutant: tuple[int, int] = (1, 2)
    nondet_per_variable: tuple[int, int] = (0, 2)
    masked_infections: bool = False  # plant some infections at masked locations on purpose
    planting_kinds: tuple[str, ...] = PLANT_KINDS


# --------------------------------------------------------------------------
# Plans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlantingOp:
    """One mutant-induced difference to inject into one variable graph."""

    kind: str                      # a difference kind from infection
    node_id: str                   # target node; for missing-structure the parent object
    label: str | int | None = None  # missing-structure: child edge to drop
    new_value: str | None = None    # value: canonical string; type: new type name
    extra: int = 0                  # collection-size: elements appended
    masked: bool = False            # planted at a nondeterministic node on purpose

    def record_node(self) -> str:
        if self.kind == DIFF_MISSING:
            assert self.label is not None
            return child_path(self.node_id, self.label)
        return self.node_id


@dataclass(frozen=True)
class NondetOp:
    """Planned run-to-run variation at one location of one variable."""

    kind: str                      # "value" | "size" | "presence"
    node_id: str
    label: str | int | None = None  # presence: child edge dropped in drop_runs
    drop_runs: tuple[int, ...] = ()


VarKey = tuple[str, str, int]


@dataclass(frozen=True)
class TruthRecord:
    mutant_id: str
    test_id: str
    var_key: VarKey
    node_id: str
    difference_kind: str
    expected: str
    observed: str
    depth: int

    def identity(self) -> tuple:
        return (self.mutant_id, self.test_id, self.var_key, self.node_id)

    def payload(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "difference_kind": self.difference_kind,
            "expected": self.expected,
            "mutant_id": self.mutant_id,
            "node_id": self.node_id,
            "observed": self.observed,
            "test_id": self.test_id,
            "variable": {"name": self.var_key[0], "ordinal": self.var_key[2], "variable_kind": self.var_key[1]},
        }


@dataclass(frozen=True)
class GroundTruth:
    killable: frozenset[str]
    records: tuple[TruthRecord, ...]
    masked: tuple[TruthRecord, ...]          # expected to produce no records
    nondet: dict[tuple[str, VarKey], tuple[str, ...]]
    candidates: tuple[dict[str, Any], ...]   # grouping key + kills, mirrors the matrix

    def payload(self) -> dict[str, Any]:
        return {
            "candidates": list(self.candidates),
            "killable": sorted(self.killable),
            "masked": [r.payload() for r in self.masked],
            "nondet": [
                {
                    "node_ids": list(ids),
                    "test_id": test_id,
                    "variable": {"name": vk[0], "ordinal": vk[2], "variable_kind": vk[1]},
                }
                for (test_id, vk), ids in sorted(self.nondet.items())
            ],
            "records": [r.payload() for r in self.records],
        }


@dataclass
class SyntheticCorpus:
    manifest: MutantManifest
    original_runs: dict[str, list[TestRunSnapshot]]          # test -> runs 0..N-1
    mutant_runs: dict[str, dict[str, TestRunSnapshot]]       # mutant -> test -> run
    truth: GroundTruth
    kills: list[dict[str, Any]] = field(default_factory=list)
    assertion_inventory: dict[str, list[tuple[int, int]]] = field(default_factory=dict)


# --------------------------------------------------------------------------
# Graph substitution machinery
# --------------------------------------------------------------------------

def _subtree_ids(graph: VariableGraph, node_id: str) -> set[str]:
    return {nid for nid in graph.nodes_by_id if nid == node_id or extends_path(node_id, nid)}


def removal_safe(graph: VariableGraph, node_id: str) -> bool:
    """A subtree may be removed only if no outside back-reference targets it;
    otherwise re-canonicalization would re-root ownership and shift node ids."""
    doomed = _subtree_ids(graph, node_id)
    for node in graph.nodes:
        if node.kind == KIND_BACKREF and node.node_id not in doomed:
            if node.ref_target in doomed:
                return False
    return True


def _apply_ops(base: VariableGraph, ops: Iterable[PlantingOp | NondetOp], run_index: int = 0) -> VariableGraph:
    """Apply substitutions to a canonical graph and re-canonicalize."""
    nodes = dict(base.nodes_by_id)
    edges = list(base.edges)

    def drop_subtree(root_id: str) -> None:
        doomed = {nid for nid in nodes if nid == root_id or extends_path(root_id, nid)}
        for nid in doomed:
            del nodes[nid]
        edges[:] = [e for e in edges if e.parent not in doomed and e.child not in doomed]

    for op in ops:
        if isinstance(op, NondetOp):
            if op.kind == "value":
                node = nodes[op.node_id]
                nodes[op.node_id] = replace(node, value=_vary_value(node.type_name, node.value or "", run_index))
            elif op.kind == "size":
                _grow(nodes, edges, op.node_id, extra=run_index, salt=run_index)
            elif op.kind == "presence":
                if run_index in op.drop_runs:
                    assert op.label is not None
                    child = child_path(op.node_id, op.label)
                    edges[:] = [e for e in edges if not (e.parent == op.node_id and e.label == op.label)]
                    drop_subtree(child)
            continue

        if op.kind == DIFF_VALUE:
            nodes[op.node_id] = replace(nodes[op.node_id], value=op.new_value)
        elif op.kind == DIFF_TYPE:
            nodes[op.node_id] = replace(nodes[op.node_id], type_name=op.new_value or "")
        elif op.kind == DIFF_NULLNESS:
            original = nodes[op.node_id]
            for _, child in base.children.get(op.node_id, ()):
                drop_subtree(child)
            edges[:] = [e for e in edges if e.parent != op.node_id]
            nodes[op.node_id] = GraphNode(node_id=op.node_id, kind=KIND_NULL, type_name=original.type_name)
        elif op.kind == DIFF_SIZE:
            _grow(nodes, edges, op.node_id, extra=op.extra, salt=op.extra)
        elif op.kind == DIFF_MISSING:
            assert op.label is not None
            child = child_path(op.node_id, op.label)
            edges[:] = [e for e in edges if not (e.parent == op.node_id and e.label == op.label)]
            drop_subtree(child)
        else:
            raise ScenarioError(f"unknown planting kind {op.kind!r}")

    return canonicalize(raw_graph(base.variable, base.root, nodes.values(), edges))


def _grow(nodes: dict[str, GraphNode], edges: list[GraphEdge], node_id: str, extra: int, salt: int) -> None:
    node = nodes[node_id]
    if node.kind != KIND_COLLECTION or node.size is None:
        raise ScenarioError(f"size op targets non-collection {node_id!r}")
    for i in range(node.size, node.size + extra):
        cid = child_path(node_id, i)
        nodes[cid] = GraphNode(node_id=cid, kind=KIND_PRIMITIVE, type_name="int", value=str(7000 + 13 * i + salt))
        edges.append(GraphEdge(parent=node_id, label=i, child=cid))
    nodes[node_id] = replace(node, size=node.size + extra)


def _vary_value(type_name: str, value: str, run_index: int) -> str:
    if run_index == 0:
        return value
    if type_name == "int":
        return str(int(value) + 9973 * run_index)
    if type_name == "float":
        return repr(float(value) + 0.53125 * run_index)
    if type_name == "bool":
        return "false" if value == "true" else "true"
    # strings are stored JSON-escaped
    return json.dumps(json.loads(value) + f"~{run_index}", ensure_ascii=False)


def _rebase(node_id: str, old_root: str, new_root: str) -> str:
    if node_id == old_root:
        return new_root
    return new_root + node_id[len(old_root):]


def _rebase_op(op, old_root: str, new_root: str):
    return replace(op, node_id=_rebase(op.node_id, old_root, new_root))


# --------------------------------------------------------------------------
# Random base graphs
# --------------------------------------------------------------------------

def _random_graph(rng: random.Random, spec: ScenarioSpec, variable: RootVariable) -> VariableGraph:
    nodes: dict[str, GraphNode] = {}
    edges: list[GraphEdge] = []
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"n{counter[0]}"

    def build_leaf() -> str:
        nid = fresh()
        choice = rng.randrange(5)
        if choice == 0:
            nodes[nid] = GraphNode(nid, KIND_PRIMITIVE, "int", value=str(rng.randrange(-1000, 1000)))
        elif choice == 1:
            nodes[nid] = GraphNode(
                nid, KIND_PRIMITIVE, "str", value=json.dumps(f"s{rng.randrange(10_000)}", ensure_ascii=False)
            )
        elif choice == 2:
            nodes[nid] = GraphNode(nid, KIND_PRIMITIVE, "float", value=repr(rng.randrange(1, 512) / 8.0))
        elif choice == 3:
            nodes[nid] = GraphNode(nid, KIND_PRIMITIVE, "bool", value="true" if rng.random() < 0.5 else "false")
        else:
            nodes[nid] = GraphNode(nid, KIND_NULL, "null")
        return nid

    def build(depth_left: int) -> str:
        if depth_left <= 1:
            return build_leaf()
        nid = fresh()
        fanout = rng.randint(*spec.fanout)
        if rng.random() < spec.collection_prob:
            nodes[nid] = GraphNode(nid, KIND_COLLECTION, "list", size=fanout)
            for i in range(fanout):
                edges.append(GraphEdge(parent=nid, label=i, child=build(depth_left - 1)))
        else:
            nodes[nid] = GraphNode(nid, KIND_OBJECT, f"demo.T{rng.randrange(8)}")
            for i in range(fanout):
                edges.append(GraphEdge(parent=nid, label=f"f{i}", child=build(depth_left - 1)))
        return nid

    depth = rng.randint(*spec.tree_depth)
    root = build(max(depth, 1))
    if nodes[root].kind in (KIND_PRIMITIVE, KIND_NULL) and rng.random() < 0.8:
        # Mostly structured roots; a bare primitive root stays occasionally.
        obj = fresh()
        nodes[obj] = GraphNode(obj, KIND_OBJECT, "demo.T9")
        edges.append(GraphEdge(parent=obj, label="f0", child=root))
        root = obj

    if rng.random() < spec.share_prob:
        object_ids = [nid for nid, n in nodes.items() if n.kind == KIND_OBJECT]
        targets = [nid for nid in nodes if nid != root]
        if object_ids and targets:
            parent = rng.choice(sorted(object_ids))
            target = rng.choice(sorted(targets))
            edges.append(GraphEdge(parent=parent, label="zz", child=target))

    return canonicalize(raw_graph(variable, root, nodes.values(), edges))


# --------------------------------------------------------------------------
# Corpus generation
# --------------------------------------------------------------------------

def generate_corpus(spec: ScenarioSpec) -> SyntheticCorpus:
    rng = random.Random(spec.seed)
    tests = [f"t{idx:03d}" for idx in range(1, spec.n_tests + 1)]

    base: dict[tuple[str, VarKey], VariableGraph] = {}
    nondet_plan: dict[tuple[str, VarKey], list[NondetOp]] = {}
    alias_of: dict[tuple[str, VarKey], tuple[str, VarKey]] = {}

    for test_id in tests:
        n_vars = rng.randint(*spec.vars_per_test)
        built: list[tuple[VarKey, VariableGraph]] = []
        for v in range(n_vars):
            kind = "local" if rng.random() < 0.8 else rng.choice(["method-return", "static-field"])
            variable = RootVariable(name=f"var{v + 1}", variable_kind=kind, ordinal=0)
            if built and rng.random() < spec.alias_prob:
                src_key, src_graph = built[rng.randrange(len(built))]
                graph = canonicalize(
                    raw_graph(variable, src_graph.root, src_graph.nodes, src_graph.edges)
                )
                alias_of[(test_id, variable.key())] = (test_id, src_key)
            else:
                graph = _random_graph(rng, spec, variable)
            base[(test_id, variable.key())] = graph
            built.append((variable.key(), graph))

        for var_key, graph in built:
            full_key = (test_id, var_key)
            if full_key in alias_of:
                source = alias_of[full_key]
                mirrored = [
                    _rebase_op(op, source[1][0], var_key[0]) for op in nondet_plan.get(source, [])
                ]
                nondet_plan[full_key] = mirrored
                continue
            nondet_plan[full_key] = _plan_nondeterminism(rng, spec, graph)

    truth_nondet = {
        key: _nondet_closure(base[key], ops, spec.n_runs) for key, ops in nondet_plan.items()
    }

    original_runs: dict[str, list[TestRunSnapshot]] = {}
    for test_id in tests:
        runs = []
        var_keys = sorted(k for (t, k) in base if t == test_id)
        for run_index in range(spec.n_runs):
            graphs = []
            for var_key in var_keys:
                graph = base[(test_id, var_key)]
                ops = nondet_plan[(test_id, var_key)]
                graphs.append(_apply_ops(graph, ops, run_index=run_index) if ops else graph)
            runs.append(
                TestRunSnapshot(
                    program_version=ORIGINAL_VERSION,
                    run_index=run_index,
                    test_id=test_id,
                    variables=tuple(graphs),
                )
            )
        original_runs[test_id] = runs

    mutants, mutant_plantings = _plan_mutants(rng, spec, tests, base, truth_nondet, alias_of)

    mutant_runs: dict[str, dict[str, TestRunSnapshot]] = {}
    for record in mutants:
        if record.status != "survived":
            continue
        runs: dict[str, TestRunSnapshot] = {}
        for test_id in record.covering_test_ids:
            graphs = []
            for var_key in sorted(k for (t, k) in base if t == test_id):
                graph = base[(test_id, var_key)]
                ops = mutant_plantings.get((record.mutant_id, test_id, var_key), ())
                graphs.append(_apply_ops(graph, ops) if ops else graph)
            runs[test_id] = TestRunSnapshot(
                program_version=record.mutant_id, run_index=0, test_id=test_id, variables=tuple(graphs)
            )
        mutant_runs[record.mutant_id] = runs

    truth = _assemble_truth(base, truth_nondet, mutant_plantings)
    manifest = MutantManifest(mutants=tuple(mutants), tests=tuple(tests), n_runs=spec.n_runs)
    corpus = SyntheticCorpus(
        manifest=manifest, original_runs=original_runs, mutant_runs=mutant_runs, truth=truth
    )
    _synthesize_kills(rng, corpus)
    return corpus


def _plan_nondeterminism(rng: random.Random, spec: ScenarioSpec, graph: VariableGraph) -> list[NondetOp]:
    count = rng.randint(*spec.nondet_per_variable)
    if count == 0:
        return []
    ops: list[NondetOp] = []
    claimed: set[str] = set()
    primitives = sorted(
        nid for nid, n in graph.nodes_by_id.items() if n.kind == KIND_PRIMITIVE
    )
    collections = sorted(
        nid for nid, n in graph.nodes_by_id.items() if n.kind == KIND_COLLECTION
    )
    objects = sorted(
        nid
        for nid, n in graph.nodes_by_id.items()
        if n.kind == KIND_OBJECT and graph.children.get(nid)
    )
    for _ in range(count):
        roll = rng.random()
        if roll < 0.70 and primitives:
            nid = rng.choice(primitives)
            if nid in claimed:
                continue
            ops.append(NondetOp(kind="value", node_id=nid))
        elif roll < 0.85 and collections:
            nid = rng.choice(collections)
            if nid in claimed or not removal_safe(graph, nid):
                continue
            ops.append(NondetOp(kind="size", node_id=nid))
        elif objects:
            parent = rng.choice(objects)
            label, child = rng.choice(graph.children[parent])
            if child in claimed or parent in claimed or not removal_safe(graph, child):
                continue
            drop_runs = tuple(
                sorted(rng.sample(range(1, spec.n_runs), rng.randint(1, max(1, spec.n_runs // 3))))
            )
            ops.append(NondetOp(kind="presence", node_id=parent, label=label, drop_runs=drop_runs))
            claimed.add(child)
            claimed.update(_subtree_ids(graph, child))
            continue
        else:
            continue
        claimed.add(ops[-1].node_id)
        claimed.update(_subtree_ids(graph, ops[-1].node_id))
    return ops


def _nondet_closure(graph: VariableGraph, ops: list[NondetOp], n_runs: int) -> frozenset[str]:
    """Node ids the engine must classify nondeterministic for this plan."""
    nondet: set[str] = set()
    for op in ops:
        if op.kind == "value":
            nondet.add(op.node_id)
        elif op.kind == "size":
            nondet.update(_subtree_ids(graph, op.node_id))
            size = graph.node(op.node_id).size or 0
            for run_index in range(1, n_runs):
                for i in range(size, size + run_index):
                    nondet.add(child_path(op.node_id, i))
        elif op.kind == "presence":
            assert op.label is not None
            nondet.update(_subtree_ids(graph, child_path(op.node_id, op.label)))
    return frozenset(nondet)


def _plan_mutants(
    rng: random.Random,
    spec: ScenarioSpec,
    tests: list[str],
    base: dict[tuple[str, VarKey], VariableGraph],
    truth_nondet: dict[tuple[str, VarKey], frozenset[str]],
    alias_of: dict[tuple[str, VarKey], tuple[str, VarKey]],
) -> tuple[list[MutantRecord], dict[tuple[str, str, VarKey], tuple[PlantingOp, ...]]]:
    aliases_by_source: dict[tuple[str, VarKey], list[tuple[str, VarKey]]] = {}
    for alias, source in alias_of.items():
        aliases_by_source.setdefault(source, []).append(alias)

    mutants: list[MutantRecord] = []
    plantings: dict[tuple[str, str, VarKey], tuple[PlantingOp, ...]] = {}
    width = max(3, len(str(spec.n_mutants)))
    for idx in range(1, spec.n_mutants + 1):
        mutant_id = f"m{idx:0{width}d}"
        surviving = rng.random() < spec.surviving_fraction
        max_cover = min(len(tests), spec.covering_tests_per_mutant[1])
        min_cover = min(spec.covering_tests_per_mutant[0], max_cover)
        covering = tuple(sorted(rng.sample(tests, rng.randint(min_cover, max_cover))))
        mutants.append(
            MutantRecord(
                mutant_id=mutant_id,
                source_location=f"src/module_{idx % 7}.ext:{40 + idx}",
                operator=rng.choice(["negate-conditional", "math-op-swap", "return-default", "boundary-shift"]),
                status="survived" if surviving else "killed",
                covering_test_ids=covering,
            )
        )
        if not surviving or rng.random() > spec.infected_fraction:
            continue

        for test_id in covering:
            var_keys = sorted(k for (t, k) in base if t == test_id and (test_id, k) not in alias_of)
            if not var_keys:
                continue
            chosen_vars = rng.sample(var_keys, min(len(var_keys), rng.randint(1, 2)))
            for var_key in chosen_vars:
                graph = base[(test_id, var_key)]
                ops = _plan_plantings(rng, spec, graph, truth_nondet[(test_id, var_key)])
                if not ops:
                    continue
                plantings[(mutant_id, test_id, var_key)] = tuple(ops)
                for alias in aliases_by_source.get((test_id, var_key), []):
                    mirrored = tuple(_rebase_op(op, var_key[0], alias[1][0]) for op in ops)
                    plantings[(mutant_id, alias[0], alias[1])] = mirrored

    validate_plan(base, truth_nondet, plantings)
    return mutants, plantings


def _plan_plantings(
    rng: random.Random,
    spec: ScenarioSpec,
    graph: VariableGraph,
    nondet: frozenset[str],
) -> list[PlantingOp]:
    deterministic = sorted(set(graph.nodes_by_id) - nondet)
    ops: list[PlantingOp] = []
    taken: list[str] = []

    def compatible(candidate: str) -> bool:
        return not any(
            candidate == other or extends_path(candidate, other) or extends_path(other, candidate)
            for other in taken
        )

    want = rng.randint(*spec.plantings_per_variable)
    kinds = list(spec.planting_kinds)
    for _ in range(want * 3):  # retry budget; sparse graphs may reject picks
        if len(ops) >= want:
            break
        kind = rng.choice(kinds)
        op = _make_planting(rng, graph, kind, deterministic, compatible)
        if op is None:
            continue
        ops.append(op)
        taken.append(op.record_node())

    if spec.masked_infections and nondet and rng.random() < 0.75:
        masked_leaves = sorted(
            nid for nid in nondet
            if nid in graph.nodes_by_id
            and graph.node(nid).kind == KIND_PRIMITIVE
            and compatible(nid)
        )
        if masked_leaves:
            nid = rng.choice(masked_leaves)
            node = graph.node(nid)
            ops.append(
                PlantingOp(kind=DIFF_VALUE, node_id=nid, new_value=_mutate_value(node), masked=True)
            )
            taken.append(nid)
    return ops


def _make_planting(rng, graph: VariableGraph, kind: str, deterministic, compatible) -> PlantingOp | None:
    if kind == DIFF_VALUE:
        pool = [n for n in deterministic if graph.node(n).kind == KIND_PRIMITIVE and compatible(n)]
        if not pool:
            return None
        nid = rng.choice(pool)
        return PlantingOp(kind=kind, node_id=nid, new_value=_mutate_value(graph.node(nid)))
    if kind == DIFF_TYPE:
        pool = [
            n for n in deterministic
            if graph.node(n).kind in (KIND_OBJECT, KIND_COLLECTION, KIND_PRIMITIVE) and compatible(n)
        ]
        if not pool:
            return None
        nid = rng.choice(pool)
        return PlantingOp(kind=kind, node_id=nid, new_value=graph.node(nid).type_name + "X")
    if kind == DIFF_SIZE:
        pool = [n for n in deterministic if graph.node(n).kind == KIND_COLLECTION and compatible(n)]
        if not pool:
            return None
        nid = rng.choice(pool)
        return PlantingOp(kind=kind, node_id=nid, extra=rng.randint(1, 3))
    if kind == DIFF_NULLNESS:
        pool = [
            n for n in deterministic
            if graph.node(n).kind in (KIND_OBJECT, KIND_COLLECTION)
            and compatible(n)
            and removal_safe(graph, n)
        ]
        if not pool:
            return None
        return PlantingOp(kind=kind, node_id=rng.choice(pool))
    if kind == DIFF_MISSING:
        pool = []
        for parent in deterministic:
            if graph.node(parent).kind != KIND_OBJECT:
                continue
            for label, child in graph.children.get(parent, ()):
                if child in deterministic and compatible(child) and removal_safe(graph, child):
                    pool.append((parent, label))
        if not pool:
            return None
        parent, label = pool[rng.randrange(len(pool))]
        return PlantingOp(kind=kind, node_id=parent, label=label)
    raise ScenarioError(f"unknown planting kind {kind!r}")


def _mutate_value(node: GraphNode) -> str:
    value = node.value or ""
    if node.type_name == "int":
        return str(int(value) + 1)
    if node.type_name == "float":
        return repr(float(value) + 0.25)
    if node.type_name == "bool":
        return "false" if value == "true" else "true"
    return json.dumps(json.loads(value) + "!", ensure_ascii=False)


def validate_plan(
    base: dict[tuple[str, VarKey], VariableGraph],
    truth_nondet: dict[tuple[str, VarKey], frozenset[str]],
    plantings: dict[tuple[str, str, VarKey], tuple[PlantingOp, ...]],
) -> None:
    """Reject plans whose plantings would hide or mask each other."""
    for (mutant_id, test_id, var_key), ops in plantings.items():
        graph = base[(test_id, var_key)]
        nondet = truth_nondet[(test_id, var_key)]
        record_nodes = [op.record_node() for op in ops]
        for op, record_node in zip(ops, record_nodes):
            if record_node not in graph.nodes_by_id:
                raise ScenarioError(
                    f"{mutant_id}/{test_id}/{var_key}: planted node {record_node!r} does not exist"
                )
            if op.masked:
                if record_node not in nondet:
                    raise ScenarioError(
                        f"{mutant_id}: masked planting at deterministic node {record_node!r}"
                    )
            elif record_node in nondet:
                raise ScenarioError(
                    f"{mutant_id}: planting at nondeterministic node {record_node!r} would be masked"
                )
        for a, b in combinations(record_nodes, 2):
            if a == b or extends_path(a, b) or extends_path(b, a):
                raise ScenarioError(
                    f"{mutant_id}/{test_id}/{var_key}: plantings at {a!r} and {b!r} hide each other"
                )


def _assemble_truth(
    base: dict[tuple[str, VarKey], VariableGraph],
    truth_nondet: dict[tuple[str, VarKey], frozenset[str]],
    plantings: dict[tuple[str, str, VarKey], tuple[PlantingOp, ...]],
) -> GroundTruth:
    records: list[TruthRecord] = []
    masked: list[TruthRecord] = []
    for (mutant_id, test_id, var_key), ops in sorted(plantings.items()):
        graph = base[(test_id, var_key)]
        for op in ops:
            record_node = op.record_node()
            node = graph.node(record_node)
            if op.kind == DIFF_VALUE:
                expected, observed = node.value or "", op.new_value or ""
            elif op.kind == DIFF_TYPE:
                expected, observed = node.type_name, op.new_value or ""
            elif op.kind == DIFF_NULLNESS:
                expected, observed = node_summary(node), "null"
            elif op.kind == DIFF_SIZE:
                expected, observed = str(node.size), str((node.size or 0) + op.extra)
            else:
                expected, observed = node_summary(node), "absent"
            truth_record = TruthRecord(
                mutant_id=mutant_id,
                test_id=test_id,
                var_key=var_key,
                node_id=record_node,
                difference_kind=op.kind,
                expected=expected,
                observed=observed,
                depth=path_depth(record_node),
            )
            (masked if op.masked else records).append(truth_record)

    grouped: dict[tuple, set[str]] = {}
    for record in records:
        key = (
            record.test_id,
            record.var_key,
            record.node_id,
            record.expected,
            assertion_kind_for(record.difference_kind),
        )
        grouped.setdefault(key, set()).add(record.mutant_id)
    candidate_rows = tuple(
        {
            "assertion_kind": key[4],
            "expected": key[3],
            "kills": sorted(kills),
            "node_id": key[2],
            "test_id": key[0],
            "variable": {"name": key[1][0], "ordinal": key[1][2], "variable_kind": key[1][1]},
        }
        for key, kills in sorted(grouped.items())
    )
    return GroundTruth(
        killable=frozenset(r.mutant_id for r in records),
        records=tuple(sorted(records, key=TruthRecord.identity)),
        masked=tuple(sorted(masked, key=TruthRecord.identity)),
        nondet={key: tuple(sorted(ids)) for key, ids in truth_nondet.items()},
        candidates=candidate_rows,
    )


def _synthesize_kills(rng: random.Random, corpus: SyntheticCorpus) -> None:
    """Kill records plus an assertion inventory for the killed mutants."""
    inventory: dict[str, list[tuple[int, int]]] = {}
    for test_id in corpus.manifest.tests:
        n_asserts = rng.randint(1, 4)
        inventory[test_id] = [(10 + 3 * i, i) for i in range(n_asserts)]
    kills: list[dict[str, Any]] = []
    for mutant in corpus.manifest.mutants:
        if mutant.status != "killed" or not mutant.covering_test_ids:
            continue
        n_tests = rng.randint(1, min(2, len(mutant.covering_test_ids)))
        for test_id in rng.sample(list(mutant.covering_test_ids), n_tests):
            if rng.random() < 0.7:
                line, ordinal = rng.choice(inventory[test_id])
                kills.append(
                    {
                        "assertion_id": {"line": line, "ordinal": ordinal, "test_id": test_id},
                        "failure_kind": "assertion",
                        "mutant_id": mutant.mutant_id,
                        "test_id": test_id,
                    }
                )
            else:
                kills.append(
                    {"failure_kind": "non-assertion", "mutant_id": mutant.mutant_id, "test_id": test_id}
                )
    kills.sort(key=lambda k: (k["mutant_id"], k["test_id"], str(k.get("assertion_id", ""))))
    corpus.kills = kills
    corpus.assertion_inventory = inventory


# --------------------------------------------------------------------------
# Worked-example corpus (two tests, three surviving mutants)
# --------------------------------------------------------------------------

def demo_corpus(n_runs: int = 10) -> SyntheticCorpus:
    """Small deterministic corpus exercising crossfire, depth filtering and masking.

    test1 exposes var1 (fields f2, f3) and var2 (f4.f3 mirrors f3 one level
    deeper, f5 a string, f6 a nondeterministic float). Mutants m1 and m2
    both pollute var1.f2, m3 pollutes f3 through both variables, m6 only
    touches the masked f6. test2 exposes var3.g1, also polluted by m1.
    """
    var1 = RootVariable("var1")
    var2 = RootVariable("var2")
    var3 = RootVariable("var3")

    def obj(nid: str, type_name: str) -> GraphNode:
        return GraphNode(nid, KIND_OBJECT, type_name)

    def prim(nid: str, type_name: str, value: str) -> GraphNode:
        return GraphNode(nid, KIND_PRIMITIVE, type_name, value=value)

    g_var1 = canonicalize(
        raw_graph(
            var1,
            "r",
            [obj("r", "demo.Widget"), prim("a", "int", "5"), prim("b", "int", "7")],
            [GraphEdge("r", "f2", "a"), GraphEdge("r", "f3", "b")],
        )
    )
    g_var2 = canonicalize(
        raw_graph(
            var2,
            "r",
            [
                obj("r", "demo.Holder"),
                obj("inner", "demo.Part"),
                prim("deep", "int", "7"),
                prim("label", "str", json.dumps("label")),
                prim("clock", "float", "0.5"),
            ],
            [
                GraphEdge("r", "f4", "inner"),
                GraphEdge("inner", "f3", "deep"),
                GraphEdge("r", "f5", "label"),
                GraphEdge("r", "f6", "clock"),
            ],
        )
    )
    g_var3 = canonicalize(
        raw_graph(
            var3,
            "r",
            [obj("r", "demo.Gauge"), prim("g", "int", "9")],
            [GraphEdge("r", "g1", "g")],
        )
    )

    base = {
        ("test1", var1.key()): g_var1,
        ("test1", var2.key()): g_var2,
        ("test2", var3.key()): g_var3,
    }
    nondet_plan = {
        ("test1", var1.key()): [],
        ("test1", var2.key()): [NondetOp(kind="value", node_id="var2.f6")],
        ("test2", var3.key()): [],
    }
    truth_nondet = {key: _nondet_closure(base[key], ops, n_runs) for key, ops in nondet_plan.items()}

    original_runs: dict[str, list[TestRunSnapshot]] = {}
    for test_id in ("test1", "test2"):
        runs = []
        var_keys = sorted(k for (t, k) in base if t == test_id)
        for run_index in range(n_runs):
            graphs = []
            for var_key in var_keys:
                graph = base[(test_id, var_key)]
                ops = nondet_plan[(test_id, var_key)]
                graphs.append(_apply_ops(graph, ops, run_index=run_index) if ops else graph)
            runs.append(TestRunSnapshot(ORIGINAL_VERSION, run_index, test_id, tuple(graphs)))
        original_runs[test_id] = runs

    plantings: dict[tuple[str, str, VarKey], tuple[PlantingOp, ...]] = {
        ("m1", "test1", var1.key()): (PlantingOp(DIFF_VALUE, "var1.f2", new_value="6"),),
        ("m1", "test2", var3.key()): (PlantingOp(DIFF_VALUE, "var3.g1", new_value="10"),),
        ("m2", "test1", var1.key()): (PlantingOp(DIFF_VALUE, "var1.f2", new_value="8"),),
        ("m3", "test1", var1.key()): (PlantingOp(DIFF_VALUE, "var1.f3", new_value="0"),),
        ("m3", "test1", var2.key()): (PlantingOp(DIFF_VALUE, "var2.f4.f3", new_value="0"),),
        ("m6", "test1", var2.key()): (
            PlantingOp(DIFF_VALUE, "var2.f6", new_value="999.25", masked=True),
        ),
    }
    validate_plan(base, truth_nondet, plantings)

    mutants = [
        MutantRecord("m1", "src/core.ext:10", "math-op-swap", "survived", ("test1", "test2")),
        MutantRecord("m2", "src/core.ext:14", "negate-conditional", "survived", ("test1",)),
        MutantRecord("m3", "src/core.ext:21", "return-default", "survived", ("test1",)),
        MutantRecord("m4", "src/core.ext:30", "boundary-shift", "killed", ("test1",)),
        MutantRecord("m5", "src/core.ext:33", "math-op-swap", "killed", ("test1",)),
        MutantRecord("m6", "src/core.ext:40", "negate-conditional", "survived", ("test1",)),
    ]

    mutant_runs: dict[str, dict[str, TestRunSnapshot]] = {}
    for record in mutants:
        if record.status != "survived":
            continue
        runs: dict[str, TestRunSnapshot] = {}
        for test_id in record.covering_test_ids:
            graphs = []
            for var_key in sorted(k for (t, k) in base if t == test_id):
                graph = base[(test_id, var_key)]
                ops = plantings.get((record.mutant_id, test_id, var_key), ())
                graphs.append(_apply_ops(graph, ops) if ops else graph)
            runs[test_id] = TestRunSnapshot(record.mutant_id, 0, test_id, tuple(graphs))
        mutant_runs[record.mutant_id] = runs

    truth = _assemble_truth(base, truth_nondet, plantings)
    manifest = MutantManifest(mutants=tuple(mutants), tests=("test1", "test2"), n_runs=n_runs)
    corpus = SyntheticCorpus(
        manifest=manifest, original_runs=original_runs, mutant_runs=mutant_runs, truth=truth
    )
    corpus.assertion_inventory = {"test1": [(11, 0), (12, 1)], "test2": [(21, 0)]}
    corpus.kills = [
        {
            "assertion_id": {"line": 12, "ordinal": 1, "test_id": "test1"},
            "failure_kind": "assertion",
            "mutant_id": "m4",
            "test_id": "test1",
        },
        {
            "assertion_id": {"line": 12, "ordinal": 1, "test_id": "test1"},
            "failure_kind": "assertion",
            "mutant_id": "m5",
            "test_id": "test1",
        },
    ]
    return corpus


# --------------------------------------------------------------------------
# Writing a corpus to disk
# --------------------------------------------------------------------------

def write_corpus(corpus: SyntheticCorpus, path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    write_manifest(path, corpus.manifest)
    for runs in corpus.original_runs.values():
        for snapshot in runs:
            write_snapshot(path, snapshot)
    for runs_by_test in corpus.mutant_runs.values():
        for snapshot in runs_by_test.values():
            write_snapshot(path, snapshot)
    (path / "truth.json").write_bytes(canonical_bytes(corpus.truth.payload()))
    if corpus.kills:
        lines = b"".join(canonical_bytes(k) + b"\n" for k in corpus.kills)
        (path / "kills.jsonl").write_bytes(lines)
    if corpus.assertion_inventory:
        payload = {
            test: [[line, ordinal] for line, ordinal in pairs]
            for test, pairs in corpus.assertion_inventory.items()
        }
        (path / "assertions.json").write_bytes(canonical_bytes(payload))
    return path


# --------------------------------------------------------------------------
# Exact minimum cover oracle
# --------------------------------------------------------------------------

ORACLE_MAX_GROUPS = 20
ORACLE_MAX_MUTANTS = 12


def exact_min_cover(matrix, dimension: str) -> int:
    """Minimum number of groups (assertions, variables or tests) covering
    every killable mutant, by exhaustive subset enumeration."""
    killable = sorted(matrix.killable_mutants)
    if not killable:
        return 0
    if len(killable) > ORACLE_MAX_MUTANTS:
        raise OracleSizeError(f"{len(killable)} killable mutants exceeds oracle cap {ORACLE_MAX_MUTANTS}")
    index = {mutant: i for i, mutant in enumerate(killable)}

    by_id = matrix.by_id
    if dimension == "assertion":
        groups = [frozenset(c.kills) for c in matrix.candidates]
    elif dimension == "variable":
        groups = [
            frozenset().union(*(by_id[cid].kills for cid in ids))
            for ids in matrix.by_variable.values()
        ]
    elif dimension == "test":
        groups = [
            frozenset().union(*(by_id[cid].kills for cid in ids))
            for ids in matrix.by_test.values()
        ]
    else:
        raise OracleSizeError(f"unknown dimension {dimension!r}")

    if len(groups) > ORACLE_MAX_GROUPS:
        raise OracleSizeError(f"{len(groups)} groups exceeds oracle cap {ORACLE_MAX_GROUPS}")

    masks = []
    for kills in groups:
        mask = 0
        for mutant in kills:
            mask |= 1 << index[mutant]
        masks.append(mask)
    full = (1 << len(killable)) - 1
    union = 0
    for mask in masks:
        union |= mask
    if union != full:
        raise DataIntegrityError("kill sets do not cover the killable set")

    for size in range(1, len(masks) + 1):
        for combo in combinations(masks, size):
            acc = 0
            for mask in combo:
                acc |= mask
                if acc == full:
                    break
            if acc == full:
                return size
    raise DataIntegrityError("unreachable: full cover exists but was not found")
