"""Assertion candidates and the candidate-to-killed-mutants matrix.

Records from different mutants merge into one candidate when a single
assertion would reveal all of them: an equality check of the expected
original value fails for any observed deviation, so merging is keyed on
the expected value, never the observed ones.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable

from .canonical import canonical_bytes
from .errors import DataIntegrityError
from .graphs import RootVariable
from .infection import (
    DIFF_MISSING,
    DIFF_NULLNESS,
    DIFF_SIZE,
    DIFF_TYPE,
    DIFF_VALUE,
    InfectionRecord,
)
from .snapshots import MutantManifest

ASSERT_VALUE = "value-equality"
ASSERT_NULL = "null-check"
ASSERT_TYPE = "type-check"
ASSERT_SIZE = "size-check"

# missing structure maps to a presence (non-null) check at the location
_ASSERTION_KIND = {
    DIFF_VALUE: ASSERT_VALUE,
    DIFF_NULLNESS: ASSERT_NULL,
    DIFF_MISSING: ASSERT_NULL,
    DIFF_TYPE: ASSERT_TYPE,
    DIFF_SIZE: ASSERT_SIZE,
}


def assertion_kind_for(difference_kind: str) -> str:
    return _ASSERTION_KIND[difference_kind]


@dataclass(frozen=True)
class AssertionCandidate:
    candidate_id: str
    test_id: str
    variable: RootVariable
    node_id: str
    depth: int
    assertion_kind: str
    expected: str
    kills: frozenset[str]

    def group_key(self) -> tuple:
        return (self.test_id, self.variable.key(), self.node_id, self.expected, self.assertion_kind)

    def sort_key(self) -> tuple:
        return (self.test_id, self.variable.key(), self.node_id, self.assertion_kind, self.expected)

    def variable_group(self) -> tuple[str, tuple[str, str, int]]:
        return (self.test_id, self.variable.key())

    def payload(self) -> dict[str, Any]:
        return {
            "assertion_kind": self.assertion_kind,
            "candidate_id": self.candidate_id,
            "depth": self.depth,
            "expected": self.expected,
            "kills": sorted(self.kills),
            "node_id": self.node_id,
            "test_id": self.test_id,
            "variable": self.variable.payload(),
        }


def candidate_id_for(
    test_id: str, variable: RootVariable, node_id: str, expected: str, assertion_kind: str
) -> str:
    """Stable id: hash of the grouping key, identical across runs and platforms."""
    key = {
        "assertion_kind": assertion_kind,
        "expected": expected,
        "node_id": node_id,
        "test_id": test_id,
        "variable": variable.payload(),
    }
    return hashlib.sha256(canonical_bytes(key)).hexdigest()[:16]


def build_candidates(records: Iterable[InfectionRecord]) -> list[AssertionCandidate]:
    """Group records into candidates; kills is the union over merged records."""
    grouped: dict[tuple, dict] = {}
    expected_seen: dict[tuple, str] = {}
    for record in records:
        assertion_kind = assertion_kind_for(record.difference_kind)
        integrity_key = (record.test_id, record.variable.key(), record.node_id, assertion_kind)
        prior = expected_seen.get(integrity_key)
        if prior is None:
            expected_seen[integrity_key] = record.expected
        elif prior != record.expected:
            # The expected value at a deterministic node is unique by mask
            # construction; two values mean corrupted inputs.
            raise DataIntegrityError(
                f"contradictory expected values at {integrity_key}: {prior!r} vs {record.expected!r}"
            )
        key = (record.test_id, record.variable.key(), record.node_id, record.expected, assertion_kind)
        slot = grouped.setdefault(
            key,
            {"record": record, "assertion_kind": assertion_kind, "kills": set()},
        )
        slot["kills"].add(record.mutant_id)

    candidates = []
    for slot in grouped.values():
        record = slot["record"]
        candidates.append(
            AssertionCandidate(
                candidate_id=candidate_id_for(
                    record.test_id, record.variable, record.node_id,
                    record.expected, slot["assertion_kind"],
                ),
                test_id=record.test_id,
                variable=record.variable,
                node_id=record.node_id,
                depth=record.depth,
                assertion_kind=slot["assertion_kind"],
                expected=record.expected,
                kills=frozenset(slot["kills"]),
            )
        )
    candidates.sort(key=AssertionCandidate.sort_key)
    return candidates


@dataclass(frozen=True)
class CandidateMatrix:
    """Candidates plus their variable/test groupings and the killable set."""

    candidates: tuple[AssertionCandidate, ...]
    by_variable: dict[tuple[str, tuple[str, str, int]], tuple[str, ...]]
    by_test: dict[str, tuple[str, ...]]
    killable_mutants: frozenset[str]

    def candidate(self, candidate_id: str) -> AssertionCandidate:
        return self.by_id[candidate_id]

    @cached_property
    def by_id(self) -> dict[str, AssertionCandidate]:
        return {c.candidate_id: c for c in self.candidates}

    def payload(self) -> dict[str, Any]:
        return {
            "by_test": [
                {"candidate_ids": list(ids), "test_id": test_id}
                for test_id, ids in sorted(self.by_test.items())
            ],
            "by_variable": [
                {
                    "candidate_ids": list(ids),
                    "test_id": test_id,
                    "variable": {"name": vk[0], "ordinal": vk[2], "variable_kind": vk[1]},
                }
                for (test_id, vk), ids in sorted(self.by_variable.items())
            ],
            "candidates": [c.payload() for c in self.candidates],
            "killable_mutants": sorted(self.killable_mutants),
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "CandidateMatrix":
        candidates = []
        for item in payload["candidates"]:
            var = item["variable"]
            candidates.append(
                AssertionCandidate(
                    candidate_id=item["candidate_id"],
                    test_id=item["test_id"],
                    variable=RootVariable(var["name"], var["variable_kind"], var["ordinal"]),
                    node_id=item["node_id"],
                    depth=item["depth"],
                    assertion_kind=item["assertion_kind"],
                    expected=item["expected"],
                    kills=frozenset(item["kills"]),
                )
            )
        return build_matrix(candidates)


def build_matrix(candidates: Iterable[AssertionCandidate]) -> CandidateMatrix:
    ordered = tuple(sorted(candidates, key=AssertionCandidate.sort_key))
    by_variable: dict[tuple[str, tuple[str, str, int]], list[str]] = {}
    by_test: dict[str, list[str]] = {}
    killable: set[str] = set()
    for candidate in ordered:
        by_variable.setdefault(candidate.variable_group(), []).append(candidate.candidate_id)
        by_test.setdefault(candidate.test_id, []).append(candidate.candidate_id)
        killable.update(candidate.kills)
    return CandidateMatrix(
        candidates=ordered,
        by_variable={k: tuple(v) for k, v in by_variable.items()},
        by_test={k: tuple(v) for k, v in by_test.items()},
        killable_mutants=frozenset(killable),
    )


@dataclass(frozen=True)
class KillabilityStats:
    n_killable: int
    n_surviving: int
    averages_defined: bool
    avg_candidates_per_killable: Fraction
    avg_variables_per_killable: Fraction
    avg_tests_per_killable: Fraction
    total_candidates: int
    total_variables: int          # distinct (test, variable) pairs
    total_variables_global: int   # distinct variable identities ignoring test
    total_tests: int
    avg_depth: Fraction

    def payload(self) -> dict[str, Any]:
        return {
            "averages_defined": self.averages_defined,
            "avg_candidates_per_killable": _frac(self.avg_candidates_per_killable),
            "avg_depth": _frac(self.avg_depth),
            "avg_tests_per_killable": _frac(self.avg_tests_per_killable),
            "avg_variables_per_killable": _frac(self.avg_variables_per_killable),
            "n_killable": self.n_killable,
            "n_surviving": self.n_surviving,
            "total_candidates": self.total_candidates,
            "total_tests": self.total_tests,
            "total_variables": self.total_variables,
            "total_variables_global": self.total_variables_global,
        }


def _frac(value: Fraction) -> dict[str, int]:
    return {"den": value.denominator, "num": value.numerator}


def killable_stats(matrix: CandidateMatrix, manifest: MutantManifest) -> KillabilityStats:
    """Killability magnitude plus ways-of-killing averages per killable mutant."""
    n_surviving = len(manifest.surviving())
    killable = matrix.killable_mutants
    if not killable:
        zero = Fraction(0)
        return KillabilityStats(0, n_surviving, False, zero, zero, zero, 0, 0, 0, 0, zero)

    per_mutant_candidates: dict[str, int] = {m: 0 for m in killable}
    per_mutant_vars: dict[str, set] = {m: set() for m in killable}
    per_mutant_tests: dict[str, set] = {m: set() for m in killable}
    for candidate in matrix.candidates:
        for mutant in candidate.kills:
            per_mutant_candidates[mutant] += 1
            per_mutant_vars[mutant].add(candidate.variable_group())
            per_mutant_tests[mutant].add(candidate.test_id)

    n = len(killable)
    return KillabilityStats(
        n_killable=n,
        n_surviving=n_surviving,
        averages_defined=True,
        avg_candidates_per_killable=Fraction(sum(per_mutant_candidates.values()), n),
        avg_variables_per_killable=Fraction(sum(len(v) for v in per_mutant_vars.values()), n),
        avg_tests_per_killable=Fraction(sum(len(t) for t in per_mutant_tests.values()), n),
        total_candidates=len(matrix.candidates),
        total_variables=len({c.variable_group() for c in matrix.candidates}),
        total_variables_global=len({c.variable.key() for c in matrix.candidates}),
        total_tests=len({c.test_id for c in matrix.candidates}),
        avg_depth=Fraction(sum(c.depth for c in matrix.candidates), len(matrix.candidates)),
    )
