"""Report rendering and kill-attribution ingestion.

Renders the killability summary, the strategy comparison, and per-mutant
assertion suggestions; ingests externally produced kill records to
aggregate per-test and per-assertion kill capability. All outputs are
pure renderings: identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .candidates import AssertionCandidate, CandidateMatrix, KillabilityStats
from .canonical import canonical_bytes, fmt_factor, fmt_mean, fmt_percent
from .errors import SchemaError, SnapshotParseError
from .infection import InfectionRecord
from .selection import AggregatedSelection
from .snapshots import MutantManifest

logger = logging.getLogger(__name__)

FAILURE_ASSERTION = "assertion"
FAILURE_NON_ASSERTION = "non-assertion"

AssertionId = tuple[str, int, int]  # (test_id, source line, ordinal)


@dataclass(frozen=True)
class KillRecord:
    mutant_id: str
    test_id: str
    failure_kind: str
    assertion_id: AssertionId | None = None

    def payload(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "failure_kind": self.failure_kind,
            "mutant_id": self.mutant_id,
            "test_id": self.test_id,
        }
        if self.assertion_id is not None:
            out["assertion_id"] = {
                "line": self.assertion_id[1],
                "ordinal": self.assertion_id[2],
                "test_id": self.assertion_id[0],
            }
        return out


def ingest_kill_records(path: Path, manifest: MutantManifest) -> list[KillRecord]:
    """Read kills.jsonl; reject unknown/mismatched entries with line numbers.

    Duplicate (mutant, test, assertion) triples are dropped with a notice.
    """
    records: list[KillRecord] = []
    seen: set[tuple] = set()
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SnapshotParseError(f"{path.name}:{line_no}: invalid JSON: {exc.msg}", exc.pos) from exc
        where = f"{path.name}:{line_no}"
        if not isinstance(payload, dict):
            raise SchemaError(where, "expected an object per line")
        try:
            mutant_id = payload["mutant_id"]
            test_id = payload["test_id"]
            failure_kind = payload["failure_kind"]
        except KeyError as exc:
            raise SchemaError(where, f"missing required field {exc.args[0]!r}") from None
        if failure_kind not in (FAILURE_ASSERTION, FAILURE_NON_ASSERTION):
            raise SchemaError(where, f"unknown failure_kind {failure_kind!r}")
        mutant = manifest.by_id.get(mutant_id)
        if mutant is None:
            raise SchemaError(where, f"unknown mutant {mutant_id!r}")
        if mutant.status != "killed":
            raise SchemaError(where, f"mutant {mutant_id!r} is not marked killed in the manifest")
        if test_id not in mutant.covering_test_ids:
            raise SchemaError(where, f"test {test_id!r} does not cover mutant {mutant_id!r}")
        assertion_id: AssertionId | None = None
        if failure_kind == FAILURE_ASSERTION:
            try:
                aid = payload["assertion_id"]
                assertion_id = (aid["test_id"], aid["line"], aid["ordinal"])
            except (KeyError, TypeError):
                raise SchemaError(where, "assertion failures need an assertion_id object") from None
        key = (mutant_id, test_id, assertion_id)
        if key in seen:
            logger.info("%s: duplicate kill record %s; dropped", where, key)
            continue
        seen.add(key)
        records.append(KillRecord(mutant_id, test_id, failure_kind, assertion_id))
    return records


@dataclass(frozen=True)
class CapabilityReport:
    """Distinct-mutant kill counts per test and per assertion.

    Zero-kill assertions are retained so the grid shows unused assertions.
    """

    test_kills: dict[str, int]
    assertion_kills: dict[AssertionId, int]
    assertions_per_test: dict[str, int]

    def payload(self) -> dict[str, Any]:
        return {
            "assertion_kills": [
                {"kills": count, "line": aid[1], "ordinal": aid[2], "test_id": aid[0]}
                for aid, count in sorted(self.assertion_kills.items())
            ],
            "assertions_per_test": dict(sorted(self.assertions_per_test.items())),
            "test_kills": dict(sorted(self.test_kills.items())),
        }


def capability_report(
    records: Iterable[KillRecord], inventory: dict[str, list[tuple[int, int]]]
) -> CapabilityReport:
    """Aggregate kill records against the full assertion inventory."""
    assertion_kills: dict[AssertionId, set[str]] = {}
    for test_id, assertions in inventory.items():
        for line, ordinal in assertions:
            assertion_kills[(test_id, line, ordinal)] = set()
    test_kills: dict[str, set[str]] = {test_id: set() for test_id in inventory}

    for record in records:
        test_kills.setdefault(record.test_id, set()).add(record.mutant_id)
        if record.assertion_id is not None:
            if record.assertion_id not in assertion_kills:
                raise SchemaError(
                    "assertion_id",
                    f"{record.assertion_id} not present in the assertion inventory",
                )
            assertion_kills[record.assertion_id].add(record.mutant_id)

    return CapabilityReport(
        test_kills={t: len(mutants) for t, mutants in test_kills.items()},
        assertion_kills={aid: len(mutants) for aid, mutants in assertion_kills.items()},
        assertions_per_test={t: len(assertions) for t, assertions in inventory.items()},
    )


def capability_grid_csv(report: CapabilityReport) -> str:
    """Pixel-grid data: one row per test and per assertion, for external plotting."""
    lines = ["unit,test_id,line,ordinal,kills,assertion_count"]
    for test_id in sorted(report.test_kills):
        kills = report.test_kills[test_id]
        count = report.assertions_per_test.get(test_id, 0)
        lines.append(f"test,{test_id},,,{kills},{count}")
    for (test_id, line, ordinal), kills in sorted(report.assertion_kills.items()):
        lines.append(f"assertion,{test_id},{line},{ordinal},{kills},")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Suggestions
# ---------------------------------------------------------------------------

def suggestions(
    matrix: CandidateMatrix, records: Iterable[InfectionRecord]
) -> list[dict[str, Any]]:
    """One suggestion card per killable mutant: its shallowest candidate,
    with the observed polluted value under that mutant."""
    observed_by: dict[tuple, str] = {}
    for record in records:
        key = (record.mutant_id, record.test_id, record.variable.key(), record.node_id)
        observed_by[key] = record.observed

    best: dict[str, AssertionCandidate] = {}
    for candidate in matrix.candidates:
        for mutant in candidate.kills:
            current = best.get(mutant)
            if current is None or (candidate.depth, candidate.sort_key()) < (
                current.depth,
                current.sort_key(),
            ):
                best[mutant] = candidate

    cards = []
    for mutant_id in sorted(best):
        candidate = best[mutant_id]
        observed = observed_by.get(
            (mutant_id, candidate.test_id, candidate.variable.key(), candidate.node_id), ""
        )
        also = sorted(candidate.kills - {mutant_id})
        card = (
            f"augment {candidate.test_id}, assert {candidate.node_id} equals {candidate.expected} "
            f"(observed {observed} under mutant {mutant_id})"
        )
        if also:
            card += f"; also kills: {', '.join(also)}"
        cards.append(
            {
                "also_kills": also,
                "assertion_kind": candidate.assertion_kind,
                "candidate_id": candidate.candidate_id,
                "card": card,
                "expected": candidate.expected,
                "mutant_id": mutant_id,
                "node_id": candidate.node_id,
                "observed": observed,
                "test_id": candidate.test_id,
                "variable": candidate.variable.payload(),
            }
        )
    return cards


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

FORMATS = ("markdown", "csv", "json")


def render_killability_row(stats: KillabilityStats) -> str:
    """Killable/surviving cell, e.g. "36/60 (60%)"."""
    return f"{stats.n_killable}/{stats.n_surviving} ({fmt_percent(stats.n_killable, stats.n_surviving)})"


def render_strategy_cell(mean_count, covered: int) -> str:
    """Primary-metric cell, e.g. mean 27 assertions covering 36 mutants -> "27.0 (1.3)"."""
    return f"{fmt_mean(mean_count)} ({fmt_factor(covered, mean_count)})"


def stats_csv(stats: KillabilityStats) -> str:
    header = (
        "killable,surviving,killable_pct,avg_candidates_per_killable,"
        "avg_variables_per_killable,avg_tests_per_killable,"
        "total_candidates,total_variables,total_variables_global,total_tests,avg_depth"
    )
    row = ",".join(
        [
            str(stats.n_killable),
            str(stats.n_surviving),
            fmt_percent(stats.n_killable, stats.n_surviving),
            fmt_mean(stats.avg_candidates_per_killable),
            fmt_mean(stats.avg_variables_per_killable),
            fmt_mean(stats.avg_tests_per_killable),
            str(stats.total_candidates),
            str(stats.total_variables),
            str(stats.total_variables_global),
            str(stats.total_tests),
            fmt_mean(stats.avg_depth),
        ]
    )
    return f"{header}\n{row}\n"


def selection_summary_csv(aggregates: list[AggregatedSelection]) -> str:
    lines = ["strategy,covered,assertions,variables,tests,factor"]
    for agg in aggregates:
        covered = len(agg.covered)
        lines.append(
            ",".join(
                [
                    agg.strategy,
                    str(covered),
                    fmt_mean(agg.mean_assertions),
                    fmt_mean(agg.mean_variables),
                    fmt_mean(agg.mean_tests),
                    fmt_factor(covered, agg.mean_primary()),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def report_markdown(
    stats: KillabilityStats,
    aggregates: list[AggregatedSelection],
    cards: list[dict[str, Any]],
    capability: CapabilityReport | None = None,
) -> str:
    out = ["# Surviving-mutant assertion amplification report", ""]

    out += ["## Killability", ""]
    if stats.n_killable == 0:
        out += ["No killable mutants: no propagated, deterministic, unasserted infection was found.", ""]
    else:
        out += [
            "| Killable/Surviving | avg assertions | avg variables | avg tests | #Assert | #Var | #Test | avg depth |",
            "|---|---|---|---|---|---|---|---|",
            "| {} | {} | {} | {} | {} | {} | {} | {} |".format(
                render_killability_row(stats),
                fmt_mean(stats.avg_candidates_per_killable),
                fmt_mean(stats.avg_variables_per_killable),
                fmt_mean(stats.avg_tests_per_killable),
                stats.total_candidates,
                stats.total_variables,
                stats.total_tests,
                fmt_mean(stats.avg_depth),
            ),
            "",
        ]

    if aggregates:
        out += ["## Strategy comparison", ""]
        out += [
            "| Strategy | #Assert | #Var | #Test |",
            "|---|---|---|---|",
        ]
        for agg in aggregates:
            covered = len(agg.covered)
            cells = {
                "assertion-greedy": fmt_mean(agg.mean_assertions),
                "variable-greedy": fmt_mean(agg.mean_variables),
                "test-greedy": fmt_mean(agg.mean_tests),
            }
            cells[agg.strategy] = "**" + render_strategy_cell(agg.mean_primary(), covered) + "**"
            out.append(
                f"| {agg.strategy} | {cells['assertion-greedy']} | "
                f"{cells['variable-greedy']} | {cells['test-greedy']} |"
            )
        out.append("")

    if capability is not None:
        killed = sorted(capability.test_kills.items())
        out += ["## Test and assertion kill capability", ""]
        out += [f"- tests with kill records: {sum(1 for _, k in killed if k > 0)} of {len(killed)}"]
        zero = sum(1 for count in capability.assertion_kills.values() if count == 0)
        out += [f"- assertions with zero kills: {zero} of {len(capability.assertion_kills)}", ""]

    out += ["## Suggestions", ""]
    if not cards:
        out += ["No suggestions: no killable mutants.", ""]
    else:
        for card in cards:
            out.append(f"- {card['card']}")
        out.append("")
    return "\n".join(out)


def emit_report(
    outdir: Path,
    stats: KillabilityStats,
    aggregates: list[AggregatedSelection],
    matrix: CandidateMatrix,
    records: list[InfectionRecord],
    capability: CapabilityReport | None = None,
    formats: tuple[str, ...] = FORMATS,
) -> list[Path]:
    """Write the report artifacts for the requested formats."""
    outdir.mkdir(parents=True, exist_ok=True)
    cards = suggestions(matrix, records)
    written: list[Path] = []

    if "markdown" in formats:
        path = outdir / "report.md"
        path.write_text(report_markdown(stats, aggregates, cards, capability), encoding="utf-8")
        written.append(path)
    if "csv" in formats:
        path = outdir / "stats.csv"
        path.write_text(stats_csv(stats), encoding="utf-8")
        written.append(path)
        if aggregates:
            path = outdir / "selection-summary.csv"
            path.write_text(selection_summary_csv(aggregates), encoding="utf-8")
            written.append(path)
        if capability is not None:
            path = outdir / "capability-grid.csv"
            path.write_text(capability_grid_csv(capability), encoding="utf-8")
            written.append(path)
    if "json" in formats:
        payload: dict[str, Any] = {
            "killability": stats.payload(),
            "strategies": [agg.payload() for agg in aggregates],
            "suggestions": cards,
        }
        if capability is not None:
            payload["capability"] = capability.payload()
        path = outdir / "report.json"
        path.write_bytes(canonical_bytes(payload))
        written.append(path)

    path = outdir / "suggestions.jsonl"
    path.write_bytes(b"".join(canonical_bytes(card) + b"\n" for card in cards))
    written.append(path)
    return written
