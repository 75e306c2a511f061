"""Rooted object graphs with path-derived node IDs.

A variable's end-of-test state is a rooted graph: objects and collections
as inner nodes, primitives and nulls at the leaves. Canonicalization
relabels every node with its access path from the root variable so that
the same logical location gets the same node ID in every run, which is
what makes cross-run matching and diffing possible.

Sharing and cycles are broken at canonicalization time: the first BFS
arrival at a shared node owns it; every later arrival becomes a
back-reference leaf pointing at the owner's node ID.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Iterable

from .canonical import canonical_bytes, fnv1a_64
from .errors import MalformedGraphError

KIND_OBJECT = "object"
KIND_COLLECTION = "collection"
KIND_PRIMITIVE = "primitive"
KIND_NULL = "null"
KIND_BACKREF = "back-reference"
KIND_TRUNCATED = "truncated"

NODE_KINDS = frozenset(
    {KIND_OBJECT, KIND_COLLECTION, KIND_PRIMITIVE, KIND_NULL, KIND_BACKREF, KIND_TRUNCATED}
)
# Kinds that never have outgoing edges.
LEAF_KINDS = frozenset({KIND_PRIMITIVE, KIND_NULL, KIND_BACKREF, KIND_TRUNCATED})

VARIABLE_KINDS = frozenset(
    {"local", "test-class-field", "method-return", "instantiated-object", "static-field"}
)

DEPTH_CAP_DEFAULT = 64

# Placeholder root used when hashing, so aliased variables with identical
# object graphs hash equal regardless of their names.
_HASH_ROOT = "$"


@dataclass(frozen=True, order=True)
class RootVariable:
    """A memory location immediately accessible from a test's scope."""

    name: str
    variable_kind: str = "local"
    ordinal: int = 0

    def key(self) -> tuple[str, str, int]:
        return (self.name, self.variable_kind, self.ordinal)

    def payload(self) -> dict[str, Any]:
        return {"name": self.name, "ordinal": self.ordinal, "variable_kind": self.variable_kind}


@dataclass(frozen=True)
class GraphNode:
    node_id: str
    kind: str
    type_name: str
    value: str | None = None        # primitive only
    ref_target: str | None = None   # back-reference only
    size: int | None = None         # collection only

    def payload(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "node_id": self.node_id, "type_name": self.type_name}
        if self.value is not None:
            out["value"] = self.value
        if self.ref_target is not None:
            out["ref_target"] = self.ref_target
        if self.size is not None:
            out["size"] = self.size
        return out


@dataclass(frozen=True)
class GraphEdge:
    parent: str
    label: str | int  # field name (str) or collection index (int)
    child: str

    def payload(self) -> dict[str, Any]:
        return {"child": self.child, "label": self.label, "parent": self.parent}


def edge_sort_key(label: str | int) -> tuple[int, str | int]:
    """Field labels sort lexicographically before index labels sort numerically."""
    return (0, label) if isinstance(label, str) else (1, label)


def child_path(parent_path: str, label: str | int) -> str:
    """Access path of a child: `.field` for fields, `[i]` for indices."""
    if isinstance(label, str):
        return f"{parent_path}.{label}"
    return f"{parent_path}[{label}]"


def path_depth(node_id: str) -> int:
    """Number of nodes on the path from the root, the root counting as 1."""
    depth = 1
    bracket = 0
    for ch in node_id:
        if ch == "[":
            bracket += 1
            depth += 1
        elif ch == "]":
            bracket -= 1
        elif ch == "." and bracket == 0:
            depth += 1
    return depth


def extends_path(ancestor: str, node_id: str) -> bool:
    """True iff node_id lies strictly below ancestor on the access path.

    Labels never contain "." or "[", so delimiter-prefix matching is exact
    ("var.f1" does not match "var.f10").
    """
    return node_id.startswith(ancestor + ".") or node_id.startswith(ancestor + "[")


def node_summary(node: GraphNode) -> str:
    """Compact canonical rendering of a node for record fields and reports."""
    if node.kind == KIND_PRIMITIVE:
        return node.value if node.value is not None else ""
    if node.kind == KIND_NULL:
        return "null"
    if node.kind == KIND_COLLECTION:
        return f"{node.type_name}[{node.size}]"
    if node.kind == KIND_BACKREF:
        return f"ref:{node.ref_target}"
    if node.kind == KIND_TRUNCATED:
        return f"truncated:{node.type_name}"
    return node.type_name


@dataclass(frozen=True)
class VariableGraph:
    """One variable's state graph. Immutable once canonicalized."""

    variable: RootVariable
    root: str
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    structure_hash: int = 0

    @cached_property
    def nodes_by_id(self) -> dict[str, GraphNode]:
        index = {}
        for node in self.nodes:
            if node.node_id in index:
                raise MalformedGraphError(f"duplicate node id {node.node_id!r}")
            index[node.node_id] = node
        return index

    @cached_property
    def children(self) -> dict[str, tuple[tuple[str | int, str], ...]]:
        """parent node_id -> ((label, child node_id), ...) in canonical label order."""
        grouped: dict[str, list[tuple[str | int, str]]] = {}
        for edge in self.edges:
            grouped.setdefault(edge.parent, []).append((edge.label, edge.child))
        out = {}
        for parent, pairs in grouped.items():
            labels = [label for label, _ in pairs]
            if len(set(labels)) != len(labels):
                raise MalformedGraphError(f"duplicate edge label under {parent!r}")
            out[parent] = tuple(sorted(pairs, key=lambda p: edge_sort_key(p[0])))
        return out

    def node(self, node_id: str) -> GraphNode:
        return self.nodes_by_id[node_id]

    def payload(self, hash_form: bool = False) -> dict[str, Any]:
        """JSON shape of this graph.

        With hash_form=True, node IDs are re-rooted at a fixed placeholder
        and the variable identity is dropped, so aliased variables with
        identical object graphs produce identical payloads.
        """
        if hash_form:
            rebase = _rebase_fn(self.root, _HASH_ROOT)
            nodes = [
                {
                    **n.payload(),
                    "node_id": rebase(n.node_id),
                    **({"ref_target": rebase(n.ref_target)} if n.ref_target is not None else {}),
                }
                for n in self.nodes
            ]
            edges = [
                {"child": rebase(e.child), "label": e.label, "parent": rebase(e.parent)}
                for e in self.edges
            ]
            return {"edges": edges, "nodes": nodes, "root": _HASH_ROOT}
        return {
            "edges": [e.payload() for e in self.edges],
            "nodes": [n.payload() for n in self.nodes],
            "root": self.root,
            "structure_hash": f"{self.structure_hash:016x}",
            "variable": self.variable.payload(),
        }


def _rebase_fn(old_root: str, new_root: str):
    def rebase(node_id: str) -> str:
        if node_id == old_root:
            return new_root
        if extends_path(old_root, node_id):
            return new_root + node_id[len(old_root):]
        raise MalformedGraphError(f"node id {node_id!r} not rooted at {old_root!r}")

    return rebase


def structural_hash(graph: VariableGraph) -> int:
    """64-bit FNV-1a over the root-relative canonical serialization.

    Equal object graphs hash equal even under different variable names,
    which is what lets the differ skip re-diffing aliased variables.
    """
    return fnv1a_64(canonical_bytes(graph.payload(hash_form=True)))


def raw_graph(
    variable: RootVariable,
    root: str,
    nodes: Iterable[GraphNode],
    edges: Iterable[GraphEdge],
) -> VariableGraph:
    """Assemble an un-canonicalized graph (arbitrary node IDs allowed)."""
    return VariableGraph(variable=variable, root=root, nodes=tuple(nodes), edges=tuple(edges))


def canonicalize(graph: VariableGraph, depth_cap: int = DEPTH_CAP_DEFAULT) -> VariableGraph:
    """Relabel nodes with BFS-assigned path IDs and break sharing.

    BFS from the root expands children in canonical edge order (field
    labels lexicographically, index labels numerically). The first arrival
    at a shared node fixes its ID; later arrivals become back-reference
    leaves. Nodes at the depth cap that still have children are replaced
    by an explicit truncated marker. Idempotent: canonicalizing a
    canonical graph reproduces it.
    """
    if depth_cap < 1:
        raise MalformedGraphError(f"depth cap must be >= 1, got {depth_cap}")
    if any(sep in graph.variable.name for sep in ".[]"):
        raise MalformedGraphError(f"variable name {graph.variable.name!r} contains a path separator")

    index = graph.nodes_by_id
    if graph.root not in index:
        raise MalformedGraphError(f"root {graph.root!r} is not a node")
    children = graph.children
    for parent, pairs in children.items():
        parent_node = index.get(parent)
        if parent_node is None:
            raise MalformedGraphError(f"edge parent {parent!r} is not a node")
        if parent_node.kind in LEAF_KINDS:
            raise MalformedGraphError(f"{parent_node.kind} node {parent!r} has children")
        _check_labels(parent_node, pairs)
        for label, child in pairs:
            if child not in index:
                raise MalformedGraphError(f"edge child {child!r} is not a node")
            if isinstance(label, str) and any(sep in label for sep in ".[]"):
                raise MalformedGraphError(f"field label {label!r} contains a path separator")

    _check_connected(graph, index, children)

    root_var = graph.variable.name
    owner: dict[str, str] = {graph.root: root_var}
    out_nodes: list[GraphNode] = []
    out_edges: list[GraphEdge] = []
    backrefs: list[tuple[str, str, str]] = []  # (path, raw target, type_name)
    queue: deque[tuple[str, str, int]] = deque([(graph.root, root_var, 1)])

    while queue:
        raw_id, path, depth = queue.popleft()
        node = index[raw_id]
        kids = children.get(raw_id, ())

        if node.kind == KIND_BACKREF:
            # Pass-through for already-canonical input; target resolved below.
            backrefs.append((path, node.ref_target or "", node.type_name))
            continue

        if kids and depth >= depth_cap:
            out_nodes.append(GraphNode(node_id=path, kind=KIND_TRUNCATED, type_name=node.type_name))
            continue

        out_nodes.append(replace(node, node_id=path))
        for label, child_raw in kids:
            cpath = child_path(path, label)
            out_edges.append(GraphEdge(parent=path, label=label, child=cpath))
            if child_raw in owner:
                child_node = index[child_raw]
                target = child_raw if child_node.kind != KIND_BACKREF else (child_node.ref_target or "")
                backrefs.append((cpath, target, child_node.type_name))
            else:
                owner[child_raw] = cpath
                queue.append((child_raw, cpath, depth + 1))

    for path, raw_target, type_name in backrefs:
        target = owner.get(raw_target)
        if target is None:
            raise MalformedGraphError(f"back-reference at {path!r} targets unowned node {raw_target!r}")
        out_nodes.append(GraphNode(node_id=path, kind=KIND_BACKREF, type_name=type_name, ref_target=target))

    out_nodes.sort(key=lambda n: n.node_id)
    out_edges.sort(key=lambda e: (e.parent, edge_sort_key(e.label)))
    result = VariableGraph(
        variable=graph.variable,
        root=root_var,
        nodes=tuple(out_nodes),
        edges=tuple(out_edges),
    )
    return replace(result, structure_hash=structural_hash(result))


def _check_labels(parent: GraphNode, pairs: tuple[tuple[str | int, str], ...]) -> None:
    str_labels = [l for l, _ in pairs if isinstance(l, str)]
    int_labels = [l for l, _ in pairs if isinstance(l, int)]
    if str_labels and int_labels:
        raise MalformedGraphError(f"mixed field and index labels under {parent.node_id!r}")
    if parent.kind == KIND_COLLECTION:
        if str_labels:
            raise MalformedGraphError(f"collection {parent.node_id!r} has field-labeled children")
        if sorted(int_labels) != list(range(parent.size or 0)):
            raise MalformedGraphError(
                f"collection {parent.node_id!r} size {parent.size} does not match its index labels"
            )
    elif int_labels:
        raise MalformedGraphError(f"non-collection {parent.node_id!r} has index-labeled children")


def _check_connected(
    graph: VariableGraph,
    index: dict[str, GraphNode],
    children: dict[str, tuple[tuple[str | int, str], ...]],
) -> None:
    # Reachability without the depth cap: a node droppable only by
    # truncation is fine, a node unreachable outright is malformed.
    seen = {graph.root}
    stack = [graph.root]
    while stack:
        current = stack.pop()
        node = index[current]
        if node.kind == KIND_BACKREF and node.ref_target in index and node.ref_target not in seen:
            seen.add(node.ref_target)
            stack.append(node.ref_target)
        for _, child in children.get(current, ()):
            if child not in seen:
                seen.add(child)
                stack.append(child)
    stranded = set(index) - seen
    if stranded:
        raise MalformedGraphError(f"disconnected nodes: {sorted(stranded)[:5]}")
