"""Stage orchestration over an on-disk corpus, with content-digest caching.

Stages read the previous stage's cached artifact when its input digest is
unchanged, so a repeated `pipeline` invocation only recomputes what moved.
Per-mutant diffs fan out to a process pool; every aggregation step sorts,
so worker scheduling never shows up in the artifacts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .candidates import CandidateMatrix, KillabilityStats, build_candidates, build_matrix, killable_stats
from .canonical import canonical_bytes
from .determinism import DeterminismMask, build_mask
from .errors import ConfigError, CrossfireError
from .infection import InfectionRecord, MutantDiffResult, diff_mutant
from .reporting import (
    FORMATS,
    CapabilityReport,
    capability_report,
    emit_report,
    ingest_kill_records,
)
from .selection import (
    STRATEGIES,
    AggregatedSelection,
    Selection,
    TIE_RANDOM,
    run_repeated,
    shortest_depth_filter,
)
from .snapshots import (
    MutantManifest,
    TestRunSnapshot,
    Violation,
    load_manifest,
    load_snapshot,
    manifest_path,
    snapshot_path,
    validate,
)
from .synthgen import SyntheticCorpus

logger = logging.getLogger(__name__)

MASK_FILE = "mask.json"
INFECTIONS_FILE = "infections.jsonl"
MATRIX_FILE = "matrix.json"
STATS_FILE = "stats.json"
SELECTION_FILE = "selection.json"
CACHE_FILE = "cache.json"


@dataclass(frozen=True)
class SelectOptions:
    strategies: tuple[str, ...] = STRATEGIES
    repeats: int = 20
    base_seed: int = 0
    tie_break: str = TIE_RANDOM
    depth_filter: bool = True

    def digest_payload(self) -> dict:
        return {
            "base_seed": self.base_seed,
            "depth_filter": self.depth_filter,
            "repeats": self.repeats,
            "strategies": list(self.strategies),
            "tie_break": self.tie_break,
        }


@dataclass
class StageCache:
    path: Path
    entries: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, outdir: Path) -> "StageCache":
        path = outdir / CACHE_FILE
        entries: dict[str, str] = {}
        if path.is_file():
            try:
                entries = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                entries = {}
        return cls(path=path, entries=entries)

    def fresh(self, stage: str, digest: str, artifacts: list[Path]) -> bool:
        return self.entries.get(stage) == digest and all(p.is_file() for p in artifacts)

    def update(self, stage: str, digest: str) -> None:
        self.entries[stage] = digest
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_bytes(canonical_bytes(dict(sorted(self.entries.items()))))


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_inputs(root: Path, paths: list[Path], extra=None) -> str:
    rows = []
    for path in sorted(paths):
        # Out-of-corpus inputs (stage artifacts) are keyed by name only, so
        # digests do not depend on where the output directory lives.
        rel = str(path.relative_to(root)) if path.is_relative_to(root) else path.name
        rows.append([rel, _sha256(path.read_bytes())])
    return _sha256(canonical_bytes([rows, extra]))


# ---------------------------------------------------------------------------
# Corpus access
# ---------------------------------------------------------------------------

def original_run_paths(corpus: Path) -> list[Path]:
    return sorted((corpus / "runs" / "original").glob("run-*/*.snap.json"))


def mutant_run_paths(corpus: Path) -> list[Path]:
    return sorted((corpus / "runs" / "mutants").glob("*/*.snap.json"))


def load_original_runs(corpus: Path, manifest: MutantManifest) -> dict[str, list[TestRunSnapshot]]:
    runs: dict[str, list[TestRunSnapshot]] = {}
    for test_id in manifest.tests:
        per_test = []
        for run_index in range(manifest.n_runs):
            path = snapshot_path(corpus, "original", run_index, test_id)
            if path.is_file():
                per_test.append(load_snapshot(path))
        if per_test:
            runs[test_id] = per_test
    return runs


# ---------------------------------------------------------------------------
# validate stage
# ---------------------------------------------------------------------------

def stage_validate(corpus: Path) -> tuple[list[Violation], int]:
    """Schema-check every snapshot in the corpus against the manifest."""
    if not manifest_path(corpus).is_file():
        raise ConfigError(f"no manifest.json under {corpus}")
    violations: list[Violation] = []
    manifest = load_manifest(corpus)
    checked = 0
    for path in original_run_paths(corpus) + mutant_run_paths(corpus):
        checked += 1
        rel = str(path.relative_to(corpus))
        try:
            snapshot = load_snapshot(path)
        except CrossfireError as exc:
            violations.append(Violation(rel, str(exc)))
            continue
        violations.extend(validate(snapshot, manifest))
    return violations, checked


# ---------------------------------------------------------------------------
# baseline stage
# ---------------------------------------------------------------------------

def build_masks(original_runs: dict[str, list[TestRunSnapshot]]) -> DeterminismMask:
    masks = [build_mask(runs) for _, runs in sorted(original_runs.items())]
    return DeterminismMask.merge(masks)


def stage_baseline(corpus: Path, outdir: Path, cache: StageCache | None = None) -> DeterminismMask:
    manifest = load_manifest(corpus)
    artifact = outdir / MASK_FILE
    digest = digest_inputs(corpus, [manifest_path(corpus)] + original_run_paths(corpus))
    if cache is not None and cache.fresh("baseline", digest, [artifact]):
        logger.info("baseline: up to date")
        return DeterminismMask.from_payload(json.loads(artifact.read_text(encoding="utf-8")))
    mask = build_masks(load_original_runs(corpus, manifest))
    outdir.mkdir(parents=True, exist_ok=True)
    artifact.write_bytes(canonical_bytes(mask.payload()))
    if cache is not None:
        cache.update("baseline", digest)
    return mask


# ---------------------------------------------------------------------------
# diff stage
# ---------------------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(corpus_str: str, mask_path_str: str) -> None:
    corpus = Path(corpus_str)
    _WORKER["corpus"] = corpus
    _WORKER["manifest"] = load_manifest(corpus)
    _WORKER["mask"] = DeterminismMask.from_payload(
        json.loads(Path(mask_path_str).read_text(encoding="utf-8"))
    )
    _WORKER["baselines"] = {}


def _worker_baseline(test_id: str) -> TestRunSnapshot | None:
    cache = _WORKER["baselines"]
    if test_id not in cache:
        path = snapshot_path(_WORKER["corpus"], "original", 0, test_id)
        cache[test_id] = load_snapshot(path) if path.is_file() else None
    return cache[test_id]


def _diff_one_mutant(mutant_id: str) -> MutantDiffResult:
    corpus: Path = _WORKER["corpus"]
    manifest: MutantManifest = _WORKER["manifest"]
    mask: DeterminismMask = _WORKER["mask"]
    record = manifest.mutant(mutant_id)

    covering_runs: dict[str, TestRunSnapshot] = {}
    baselines: dict[str, TestRunSnapshot] = {}
    errors: list[str] = []
    for test_id in record.covering_test_ids:
        baseline = _worker_baseline(test_id)
        if baseline is not None:
            baselines[test_id] = baseline
        path = snapshot_path(corpus, mutant_id, 0, test_id)
        if not path.is_file():
            errors.append(f"{test_id}: missing snapshot {path.name}")
            continue
        try:
            covering_runs[test_id] = load_snapshot(path)
        except CrossfireError as exc:
            errors.append(f"{test_id}: {exc}")
    result = diff_mutant(mutant_id, covering_runs, baselines, mask)
    return MutantDiffResult(
        mutant_id=mutant_id,
        records=result.records,
        errors=tuple(sorted(set(result.errors) | set(errors))),
    )


def stage_diff(
    corpus: Path,
    outdir: Path,
    jobs: int = 1,
    cache: StageCache | None = None,
) -> list[InfectionRecord]:
    manifest = load_manifest(corpus)
    mask_path = outdir / MASK_FILE
    if not mask_path.is_file():
        raise ConfigError(f"no {MASK_FILE} under {outdir}; run the baseline stage first")
    artifact = outdir / INFECTIONS_FILE
    digest = digest_inputs(
        corpus, [manifest_path(corpus), mask_path] + mutant_run_paths(corpus)
    )
    if cache is not None and cache.fresh("diff", digest, [artifact]):
        logger.info("diff: up to date")
        return read_infections(artifact)

    surviving = [m.mutant_id for m in manifest.surviving()]
    jobs = jobs if jobs > 0 else (os.cpu_count() or 1)
    results: list[MutantDiffResult] = []
    if jobs == 1 or len(surviving) <= 1:
        _init_worker(str(corpus), str(mask_path))
        results = [_diff_one_mutant(mid) for mid in surviving]
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(str(corpus), str(mask_path))
        ) as pool:
            results = list(pool.map(_diff_one_mutant, surviving))

    records: list[InfectionRecord] = []
    for result in sorted(results, key=lambda r: r.mutant_id):
        records.extend(result.records)
        for error in result.errors:
            logger.warning("mutant %s: %s", result.mutant_id, error)
    records.sort(key=InfectionRecord.sort_key)

    outdir.mkdir(parents=True, exist_ok=True)
    artifact.write_bytes(b"".join(canonical_bytes(r.payload()) + b"\n" for r in records))
    if cache is not None:
        cache.update("diff", digest)
    return records


def read_infections(path: Path) -> list[InfectionRecord]:
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(InfectionRecord.from_payload(json.loads(line)))
    return records


# ---------------------------------------------------------------------------
# matrix stage
# ---------------------------------------------------------------------------

def stage_matrix(
    corpus: Path, outdir: Path, cache: StageCache | None = None
) -> tuple[CandidateMatrix, KillabilityStats]:
    infections = outdir / INFECTIONS_FILE
    if not infections.is_file():
        raise ConfigError(f"no {INFECTIONS_FILE} under {outdir}; run the diff stage first")
    artifact = outdir / MATRIX_FILE
    stats_artifact = outdir / STATS_FILE
    digest = digest_inputs(corpus, [manifest_path(corpus), infections])
    manifest = load_manifest(corpus)
    if cache is not None and cache.fresh("matrix", digest, [artifact, stats_artifact]):
        logger.info("matrix: up to date")
        matrix = CandidateMatrix.from_payload(json.loads(artifact.read_text(encoding="utf-8")))
        return matrix, killable_stats(matrix, manifest)

    records = read_infections(infections)
    matrix = build_matrix(build_candidates(records))
    stats = killable_stats(matrix, manifest)
    outdir.mkdir(parents=True, exist_ok=True)
    artifact.write_bytes(canonical_bytes(matrix.payload()))
    stats_artifact.write_bytes(canonical_bytes(stats.payload()))
    if cache is not None:
        cache.update("matrix", digest)
    return matrix, stats


# ---------------------------------------------------------------------------
# select stage
# ---------------------------------------------------------------------------

def stage_select(
    corpus: Path,
    outdir: Path,
    options: SelectOptions,
    cache: StageCache | None = None,
) -> list[AggregatedSelection]:
    matrix_file = outdir / MATRIX_FILE
    if not matrix_file.is_file():
        raise ConfigError(f"no {MATRIX_FILE} under {outdir}; run the matrix stage first")
    artifact = outdir / SELECTION_FILE
    digest = digest_inputs(corpus, [matrix_file], extra=options.digest_payload())
    if cache is not None and cache.fresh("select", digest, [artifact]):
        logger.info("select: up to date")
        return load_aggregates(artifact)

    matrix = CandidateMatrix.from_payload(json.loads(matrix_file.read_text(encoding="utf-8")))
    working = shortest_depth_filter(matrix) if options.depth_filter else matrix
    aggregates = [
        run_repeated(
            working,
            strategy,
            repeats=options.repeats,
            base_seed=options.base_seed,
            tie_break=options.tie_break,
            depth_filtered=options.depth_filter,
        )
        for strategy in options.strategies
    ]
    payload = {
        "aggregates": [agg.payload() for agg in aggregates],
        "config": options.digest_payload(),
    }
    outdir.mkdir(parents=True, exist_ok=True)
    artifact.write_bytes(canonical_bytes(payload))
    if cache is not None:
        cache.update("select", digest)
    return aggregates


def load_aggregates(path: Path) -> list[AggregatedSelection]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    return [_aggregate_from_payload(item) for item in payload["aggregates"]]


def _aggregate_from_payload(item: dict) -> AggregatedSelection:
    runs = tuple(
        Selection(
            strategy=item["strategy"],
            seed=run["seed"],
            tie_break=TIE_RANDOM,
            depth_filtered=True,
            steps=(),
            covered=frozenset(),
            n_assertions=run["n_assertions"],
            n_variables=run["n_variables"],
            n_tests=run["n_tests"],
            crossfire_factor=Fraction(run["crossfire_factor"]["num"], run["crossfire_factor"]["den"]),
        )
        for run in item["runs"]
    )
    return AggregatedSelection(
        strategy=item["strategy"],
        repeats=item["repeats"],
        base_seed=item["base_seed"],
        seeds=tuple(item["seeds"]),
        runs=runs,
        mean_assertions=Fraction(item["mean_n_assertions"]["num"], item["mean_n_assertions"]["den"]),
        mean_variables=Fraction(item["mean_n_variables"]["num"], item["mean_n_variables"]["den"]),
        mean_tests=Fraction(item["mean_n_tests"]["num"], item["mean_n_tests"]["den"]),
        mean_factor=Fraction(item["mean_crossfire_factor"]["num"], item["mean_crossfire_factor"]["den"]),
        covered=frozenset(item["covered"]),
    )


# ---------------------------------------------------------------------------
# report stage
# ---------------------------------------------------------------------------

def stage_report(
    corpus: Path,
    outdir: Path,
    formats: tuple[str, ...] = FORMATS,
    cache: StageCache | None = None,
) -> list[Path]:
    matrix_file = outdir / MATRIX_FILE
    infections_file = outdir / INFECTIONS_FILE
    selection_file = outdir / SELECTION_FILE
    for path, stage in ((matrix_file, "matrix"), (infections_file, "diff")):
        if not path.is_file():
            raise ConfigError(f"no {path.name} under {outdir}; run the {stage} stage first")
    manifest = load_manifest(corpus)

    inputs = [manifest_path(corpus), matrix_file, infections_file]
    if selection_file.is_file():
        inputs.append(selection_file)
    kills_file = corpus / "kills.jsonl"
    inventory_file = corpus / "assertions.json"
    if kills_file.is_file():
        inputs.append(kills_file)
    if inventory_file.is_file():
        inputs.append(inventory_file)
    digest = digest_inputs(corpus, inputs, extra=sorted(formats))
    expected = _report_artifacts(outdir, formats, with_selection=selection_file.is_file(),
                                 with_capability=kills_file.is_file() and inventory_file.is_file())
    if cache is not None and cache.fresh("report", digest, expected):
        logger.info("report: up to date")
        return expected

    matrix = CandidateMatrix.from_payload(json.loads(matrix_file.read_text(encoding="utf-8")))
    stats = killable_stats(matrix, manifest)
    records = read_infections(infections_file)
    aggregates = load_aggregates(selection_file) if selection_file.is_file() else []

    capability: CapabilityReport | None = None
    if kills_file.is_file() and inventory_file.is_file():
        kill_records = ingest_kill_records(kills_file, manifest)
        inventory_raw = json.loads(inventory_file.read_text(encoding="utf-8"))
        inventory = {
            test: [(line, ordinal) for line, ordinal in pairs]
            for test, pairs in inventory_raw.items()
        }
        capability = capability_report(kill_records, inventory)

    written = emit_report(outdir, stats, aggregates, matrix, records, capability, formats)
    if cache is not None:
        cache.update("report", digest)
    return written


def _report_artifacts(outdir: Path, formats, with_selection: bool, with_capability: bool) -> list[Path]:
    paths = []
    if "markdown" in formats:
        paths.append(outdir / "report.md")
    if "csv" in formats:
        paths.append(outdir / "stats.csv")
        if with_selection:
            paths.append(outdir / "selection-summary.csv")
        if with_capability:
            paths.append(outdir / "capability-grid.csv")
    if "json" in formats:
        paths.append(outdir / "report.json")
    paths.append(outdir / "suggestions.jsonl")
    return paths


# ---------------------------------------------------------------------------
# Whole pipeline, and the in-memory path used by tests
# ---------------------------------------------------------------------------

def run_pipeline(
    corpus: Path,
    outdir: Path,
    jobs: int = 1,
    select_options: SelectOptions | None = None,
    formats: tuple[str, ...] = FORMATS,
) -> dict:
    options = select_options or SelectOptions()
    cache = StageCache.load(outdir)
    mask = stage_baseline(corpus, outdir, cache)
    records = stage_diff(corpus, outdir, jobs=jobs, cache=cache)
    matrix, stats = stage_matrix(corpus, outdir, cache)
    aggregates = stage_select(corpus, outdir, options, cache)
    written = stage_report(corpus, outdir, formats, cache)
    return {
        "mask": mask,
        "records": records,
        "matrix": matrix,
        "stats": stats,
        "aggregates": aggregates,
        "written": written,
    }


@dataclass
class AnalysisResult:
    mask: DeterminismMask
    records: list[InfectionRecord]
    matrix: CandidateMatrix
    stats: KillabilityStats


def analyze_corpus(corpus: SyntheticCorpus) -> AnalysisResult:
    """Run baseline -> diff -> matrix fully in memory (test harness path)."""
    mask = build_masks(corpus.original_runs)
    records: list[InfectionRecord] = []
    for mutant in corpus.manifest.surviving():
        runs_by_test = corpus.mutant_runs.get(mutant.mutant_id, {})
        baselines = {
            test_id: corpus.original_runs[test_id][0]
            for test_id in runs_by_test
            if test_id in corpus.original_runs
        }
        result = diff_mutant(mutant.mutant_id, runs_by_test, baselines, mask)
        records.extend(result.records)
        for error in result.errors:
            logger.warning("mutant %s: %s", mutant.mutant_id, error)
    records.sort(key=InfectionRecord.sort_key)
    matrix = build_matrix(build_candidates(records))
    return AnalysisResult(
        mask=mask,
        records=records,
        matrix=matrix,
        stats=killable_stats(matrix, corpus.manifest),
    )
