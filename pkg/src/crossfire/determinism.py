"""Deterministic/nondeterministic location masks built from repeated runs.

A location is only assertable if it holds the same value in every one of
the N unmutated runs; anything that varies (timestamps, hash codes,
iteration order fallout) must be excluded before mutant runs are compared
against the original, or every mutant would look infected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from .errors import ConfigError, InputError, MaskLookupError
from .graphs import (
    KIND_PRIMITIVE,
    GraphNode,
    RootVariable,
    VariableGraph,
    extends_path,
)
from .snapshots import ORIGINAL_VERSION, TestRunSnapshot

VarKey = tuple[str, str, int]


@dataclass(frozen=True)
class MaskEntry:
    deterministic: frozenset[str]
    nondeterministic: frozenset[str]


@dataclass(frozen=True)
class DeterminismMask:
    """Partition of every observed node id into deterministic/nondeterministic,
    per (test, variable)."""

    entries: dict[tuple[str, VarKey], MaskEntry]
    n_runs_observed: int

    def entry(self, test_id: str, variable: RootVariable) -> MaskEntry:
        try:
            return self.entries[(test_id, variable.key())]
        except KeyError:
            raise MaskLookupError(f"no mask for test {test_id!r}, variable {variable.key()!r}") from None

    def has_variable(self, test_id: str, variable: RootVariable) -> bool:
        return (test_id, variable.key()) in self.entries

    def tests(self) -> set[str]:
        return {test_id for test_id, _ in self.entries}

    def payload(self) -> dict[str, Any]:
        items = []
        for (test_id, var_key), entry in sorted(self.entries.items()):
            items.append(
                {
                    "deterministic": sorted(entry.deterministic),
                    "nondeterministic": sorted(entry.nondeterministic),
                    "test_id": test_id,
                    "variable": {"name": var_key[0], "ordinal": var_key[2], "variable_kind": var_key[1]},
                }
            )
        return {"entries": items, "n_runs": self.n_runs_observed}

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "DeterminismMask":
        entries = {}
        for item in payload["entries"]:
            var = item["variable"]
            key = (item["test_id"], (var["name"], var["variable_kind"], var["ordinal"]))
            entries[key] = MaskEntry(
                deterministic=frozenset(item["deterministic"]),
                nondeterministic=frozenset(item["nondeterministic"]),
            )
        return cls(entries=entries, n_runs_observed=payload["n_runs"])

    @classmethod
    def merge(cls, masks: Iterable["DeterminismMask"]) -> "DeterminismMask":
        merged: dict[tuple[str, VarKey], MaskEntry] = {}
        n_runs = 0
        for mask in masks:
            n_runs = max(n_runs, mask.n_runs_observed)
            overlap = merged.keys() & mask.entries.keys()
            if overlap:
                raise InputError(f"mask entries overlap: {sorted(overlap)[:3]}")
            merged.update(mask.entries)
        return cls(entries=merged, n_runs_observed=n_runs)


def build_mask(runs: list[TestRunSnapshot]) -> DeterminismMask:
    """Classify every node id observed across N runs of one test.

    A node is deterministic iff it exists in all N runs with identical
    kind, type_name and value/size/ref_target. Structural disagreement
    (present in only some runs, kind mismatch, size mismatch) marks the
    node and its entire path-subtree nondeterministic; a value-level
    disagreement marks only that node.
    """
    if len(runs) < 2:
        raise ConfigError(f"need at least 2 runs to build a mask, got {len(runs)}")
    test_ids = {run.test_id for run in runs}
    if len(test_ids) != 1:
        raise InputError(f"runs span multiple tests: {sorted(test_ids)}")
    versions = {run.program_version for run in runs}
    if versions != {ORIGINAL_VERSION}:
        raise InputError(f"mask runs must all be original-program runs, got {sorted(versions)}")
    indices = sorted(run.run_index for run in runs)
    if len(set(indices)) != len(indices):
        raise InputError(f"duplicate run indices: {indices}")

    test_id = runs[0].test_id
    n = len(runs)
    per_run_vars = [run.variable_map() for run in runs]
    all_var_keys = sorted({key for vmap in per_run_vars for key in vmap})

    entries: dict[tuple[str, VarKey], MaskEntry] = {}
    for var_key in all_var_keys:
        graphs = [vmap.get(var_key) for vmap in per_run_vars]
        present = [g for g in graphs if g is not None]
        observed: set[str] = set()
        for graph in present:
            observed.update(graph.nodes_by_id)

        if len(present) < n:
            # Variable itself flickers across runs: nothing under it is assertable.
            entries[(test_id, var_key)] = MaskEntry(frozenset(), frozenset(observed))
            continue

        structural_roots: set[str] = set()
        nondet: set[str] = set()
        for node_id in observed:
            nodes = [g.nodes_by_id.get(node_id) for g in present]
            verdict = _classify(nodes)
            if verdict == "deterministic":
                continue
            nondet.add(node_id)
            if verdict == "structural":
                structural_roots.add(node_id)
        if structural_roots:
            for node_id in observed:
                if node_id in nondet:
                    continue
                if any(extends_path(root, node_id) for root in structural_roots):
                    nondet.add(node_id)
        entries[(test_id, var_key)] = MaskEntry(
            deterministic=frozenset(observed - nondet),
            nondeterministic=frozenset(nondet),
        )
    return DeterminismMask(entries=entries, n_runs_observed=n)


def _classify(nodes: list[GraphNode | None]) -> str:
    """deterministic | value | structural, comparing one node id across runs."""
    if any(node is None for node in nodes):
        return "structural"
    first = nodes[0]
    rest = nodes[1:]
    if any(node.kind != first.kind for node in rest):
        return "structural"
    if first.size is not None and any(node.size != first.size for node in rest):
        return "structural"
    if any(node.type_name != first.type_name for node in rest):
        return "value"
    if first.kind == KIND_PRIMITIVE and any(node.value != first.value for node in rest):
        return "value"
    if any(node.ref_target != first.ref_target for node in rest):
        return "value"
    return "deterministic"


def is_deterministic(
    mask: DeterminismMask, test_id: str, variable: RootVariable, node_id: str
) -> bool:
    """True iff the node was observed in all original runs with one value.

    Node ids never observed in the original runs return False: an
    assertion needs an expected value, and only original runs supply one.
    """
    entry = mask.entry(test_id, variable)
    return node_id in entry.deterministic
