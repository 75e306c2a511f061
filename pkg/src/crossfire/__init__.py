"""Memory-state analysis that turns surviving mutants into assertion candidates.

Given N end-of-test snapshots of an unmutated program and one snapshot per
surviving mutant's covering test, the pipeline masks nondeterministic
state, diffs object graphs to locate propagated-but-unrevealed infections,
derives assertion candidates with their killed-mutant sets, and selects a
near-minimal candidate set under three crossfire-optimizing strategies.
"""

from .candidates import (
    AssertionCandidate,
    CandidateMatrix,
    KillabilityStats,
    build_candidates,
    build_matrix,
    killable_stats,
)
from .determinism import DeterminismMask, build_mask, is_deterministic
from .graphs import (
    GraphEdge,
    GraphNode,
    RootVariable,
    VariableGraph,
    canonicalize,
    raw_graph,
    structural_hash,
)
from .infection import InfectionRecord, diff_graphs, diff_mutant, diff_test_run
from .selection import (
    AggregatedSelection,
    Selection,
    run_repeated,
    select_assertion_greedy,
    select_test_greedy,
    select_variable_greedy,
    shortest_depth_filter,
)
from .snapshots import (
    MutantManifest,
    MutantRecord,
    TestRunSnapshot,
    Violation,
    parse,
    parse_manifest,
    serialize,
    validate,
)
from .synthgen import ScenarioSpec, demo_corpus, exact_min_cover, generate_corpus, write_corpus

__version__ = "0.1.0"
