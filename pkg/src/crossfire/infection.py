"""Halting BFS comparison of original vs. mutant variable graphs.

The traversal walks matched node ids breadth-first, skips everything the
determinism mask excludes, and emits at most one difference record per
path: once a difference is found at a node, nothing deeper along that
path is compared. A collection-size mismatch likewise stops comparison
under the collection, since element paths are not comparable across
different sizes.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .determinism import DeterminismMask, MaskEntry
from .errors import InputError
from .graphs import (
    KIND_BACKREF,
    KIND_COLLECTION,
    KIND_NULL,
    KIND_OBJECT,
    KIND_PRIMITIVE,
    RootVariable,
    VariableGraph,
    node_summary,
    path_depth,
)
from .snapshots import TestRunSnapshot

logger = logging.getLogger(__name__)

DIFF_VALUE = "value"
DIFF_NULLNESS = "nullness"
DIFF_TYPE = "type"
DIFF_SIZE = "collection-size"
DIFF_MISSING = "missing-structure"

OBSERVED_ABSENT = "absent"


@dataclass(frozen=True)
class InfectionRecord:
    """One granular, deterministic state difference caused by a mutant."""

    mutant_id: str
    test_id: str
    variable: RootVariable
    node_id: str
    depth: int  # nodes on the access path, root counted as 1
    difference_kind: str
    expected: str
    observed: str

    def sort_key(self):
        return (self.mutant_id, self.test_id, self.variable.key(), self.node_id)

    def payload(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "difference_kind": self.difference_kind,
            "expected": self.expected,
            "mutant_id": self.mutant_id,
            "node_id": self.node_id,
            "observed": self.observed,
            "test_id": self.test_id,
            "variable": self.variable.payload(),
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "InfectionRecord":
        var = payload["variable"]
        return cls(
            mutant_id=payload["mutant_id"],
            test_id=payload["test_id"],
            variable=RootVariable(var["name"], var["variable_kind"], var["ordinal"]),
            node_id=payload["node_id"],
            depth=payload["depth"],
            difference_kind=payload["difference_kind"],
            expected=payload["expected"],
            observed=payload["observed"],
        )


def diff_graphs(
    original: VariableGraph,
    mutant: VariableGraph,
    mask_entry: MaskEntry,
    mutant_id: str,
    test_id: str,
) -> list[InfectionRecord]:
    """Compare one variable's original and mutant graphs under the mask."""
    if original.variable != mutant.variable:
        raise InputError(
            f"variable mismatch: {original.variable.key()} vs {mutant.variable.key()}"
        )
    for graph in (original, mutant):
        if graph.root != graph.variable.name:
            raise InputError(f"graph for {graph.variable.key()} is not canonicalized")

    variable = original.variable
    records: list[InfectionRecord] = []

    def emit(node_id: str, kind: str, expected: str, observed: str) -> None:
        records.append(
            InfectionRecord(
                mutant_id=mutant_id,
                test_id=test_id,
                variable=variable,
                node_id=node_id,
                depth=path_depth(node_id),
                difference_kind=kind,
                expected=expected,
                observed=observed,
            )
        )

    queue: deque[str] = deque([original.root])
    while queue:
        node_id = queue.popleft()
        if node_id not in mask_entry.deterministic:
            continue  # nondeterministic or never observed: whole subtree excluded

        o_node = original.node(node_id)
        m_node = mutant.nodes_by_id.get(node_id)
        if m_node is None:
            # Matched parent, edge gone in the mutant. Any access down this
            # path fails under the mutant, so the location itself is assertable.
            emit(node_id, DIFF_MISSING, node_summary(o_node), OBSERVED_ABSENT)
            continue

        if o_node.kind != m_node.kind:
            if KIND_NULL in (o_node.kind, m_node.kind):
                emit(node_id, DIFF_NULLNESS, node_summary(o_node), node_summary(m_node))
            else:
                emit(node_id, DIFF_TYPE, node_summary(o_node), node_summary(m_node))
            continue

        kind = o_node.kind
        if kind == KIND_PRIMITIVE:
            if o_node.value != m_node.value:
                emit(node_id, DIFF_VALUE, o_node.value or "", m_node.value or "")
            elif o_node.type_name != m_node.type_name:
                emit(node_id, DIFF_TYPE, o_node.type_name, m_node.type_name)
            continue
        if kind == KIND_BACKREF:
            if o_node.ref_target != m_node.ref_target:
                # Aliasing changed by the mutant; observable, but no value category fits.
                emit(node_id, DIFF_TYPE, node_summary(o_node), node_summary(m_node))
            elif o_node.type_name != m_node.type_name:
                emit(node_id, DIFF_TYPE, o_node.type_name, m_node.type_name)
            continue
        if kind == KIND_COLLECTION:
            if o_node.size != m_node.size:
                emit(node_id, DIFF_SIZE, str(o_node.size), str(m_node.size))
                continue  # element paths are incomparable across sizes
            if o_node.type_name != m_node.type_name:
                emit(node_id, DIFF_TYPE, o_node.type_name, m_node.type_name)
                continue
            queue.extend(child for _, child in original.children.get(node_id, ()))
            continue
        if kind == KIND_OBJECT:
            if o_node.type_name != m_node.type_name:
                emit(node_id, DIFF_TYPE, o_node.type_name, m_node.type_name)
                continue
            o_kids = original.children.get(node_id, ())
            m_labels = {label for label, _ in mutant.children.get(node_id, ())}
            extra = m_labels - {label for label, _ in o_kids}
            if extra:
                # Mutant-only structure was never observed in original runs,
                # so no expected value exists there; not assertable.
                logger.info(
                    "mutant %s adds structure under %s (%s); skipped",
                    mutant_id, node_id, sorted(map(str, extra)),
                )
            for label, child in o_kids:
                if label in m_labels:
                    queue.append(child)
                else:
                    child_node = original.node(child)
                    if child in mask_entry.deterministic:
                        emit(child, DIFF_MISSING, node_summary(child_node), OBSERVED_ABSENT)
            continue
        # null/truncated nodes: type_name divergence is still observable
        if o_node.type_name != m_node.type_name:
            emit(node_id, DIFF_TYPE, o_node.type_name, m_node.type_name)

    records.sort(key=InfectionRecord.sort_key)
    return records


def diff_test_run(
    original_run: TestRunSnapshot,
    mutant_run: TestRunSnapshot,
    mask: DeterminismMask,
    mutant_id: str | None = None,
    comparator: Callable[..., list[InfectionRecord]] | None = None,
) -> list[InfectionRecord]:
    """Diff all variables of one covering test run.

    Variables whose (original hash, mutant hash) pair was already compared
    in this run are not re-walked; the earlier result is replayed under
    the alias, then re-filtered through the alias's own mask slice.
    """
    if original_run.test_id != mutant_run.test_id:
        raise InputError(f"test mismatch: {original_run.test_id!r} vs {mutant_run.test_id!r}")
    test_id = original_run.test_id
    mutant_id = mutant_id or mutant_run.program_version
    compare = comparator or diff_graphs

    original_vars = original_run.variable_map()
    mutant_vars = mutant_run.variable_map()

    for key in sorted(mutant_vars.keys() - original_vars.keys()):
        logger.info(
            "test %s: variable %s exists only in mutant %s; not assertable, skipped",
            test_id, key, mutant_id,
        )

    records: list[InfectionRecord] = []
    diffed: dict[tuple[int, int], list[InfectionRecord]] = {}
    for key in sorted(original_vars):
        o_graph = original_vars[key]
        variable = o_graph.variable
        if not mask.has_variable(test_id, variable):
            raise InputError(f"mask missing entry for test {test_id!r}, variable {key}")
        entry = mask.entry(test_id, variable)

        m_graph = mutant_vars.get(key)
        if m_graph is None:
            if o_graph.root in entry.deterministic:
                records.append(
                    InfectionRecord(
                        mutant_id=mutant_id,
                        test_id=test_id,
                        variable=variable,
                        node_id=o_graph.root,
                        depth=1,
                        difference_kind=DIFF_MISSING,
                        expected=node_summary(o_graph.node(o_graph.root)),
                        observed=OBSERVED_ABSENT,
                    )
                )
            continue

        if o_graph.structure_hash == m_graph.structure_hash:
            continue  # identical state, nothing to compare
        pair = (o_graph.structure_hash, m_graph.structure_hash)
        if pair in diffed:
            records.extend(_replay(diffed[pair], variable, entry))
            continue
        found = compare(o_graph, m_graph, entry, mutant_id, test_id)
        diffed[pair] = found
        records.extend(found)

    records.sort(key=InfectionRecord.sort_key)
    return records


def _replay(
    template: list[InfectionRecord], variable: RootVariable, entry: MaskEntry
) -> list[InfectionRecord]:
    """Re-root cached records onto an aliased variable."""
    out = []
    for record in template:
        suffix = record.node_id[len(record.variable.name):]
        node_id = variable.name + suffix
        if node_id not in entry.deterministic:
            continue
        out.append(
            InfectionRecord(
                mutant_id=record.mutant_id,
                test_id=record.test_id,
                variable=variable,
                node_id=node_id,
                depth=record.depth,
                difference_kind=record.difference_kind,
                expected=record.expected,
                observed=record.observed,
            )
        )
    return out


@dataclass(frozen=True)
class MutantDiffResult:
    mutant_id: str
    records: tuple[InfectionRecord, ...]
    errors: tuple[str, ...]  # per-test failures; other tests still processed


def diff_mutant(
    mutant_id: str,
    covering_runs: dict[str, TestRunSnapshot],
    baseline_runs: dict[str, TestRunSnapshot],
    mask: DeterminismMask,
) -> MutantDiffResult:
    """Diff a surviving mutant against the reference run of each covering test.

    covering_runs/baseline_runs map test_id to the mutant's run and the
    designated reference original run (run 0) respectively.
    """
    records: list[InfectionRecord] = []
    errors: list[str] = []
    for test_id in sorted(covering_runs):
        baseline = baseline_runs.get(test_id)
        if baseline is None:
            errors.append(f"{test_id}: no original reference run")
            continue
        try:
            records.extend(diff_test_run(baseline, covering_runs[test_id], mask, mutant_id))
        except Exception as exc:  # keep processing the other covering tests
            errors.append(f"{test_id}: {exc}")
    records.sort(key=InfectionRecord.sort_key)
    return MutantDiffResult(mutant_id=mutant_id, records=tuple(records), errors=tuple(errors))
