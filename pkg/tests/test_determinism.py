"""Determinism mask construction from repeated runs."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import coll, edge, graph, obj, prim
from crossfire.determinism import build_mask, is_deterministic
from crossfire.errors import ConfigError, InputError, MaskLookupError
from crossfire.graphs import RootVariable
from crossfire.snapshots import TestRunSnapshot
from crossfire.synthgen import ScenarioSpec, generate_corpus
from crossfire.pipeline import build_masks

VAR = RootVariable("v")


def run_with(value: str, run_index: int, extra=None) -> TestRunSnapshot:
    nodes = [obj("r"), prim("x", value), prim("y", "77")]
    edges = [edge("r", "f", "x"), edge("r", "g", "y")]
    if extra:
        nodes, edges = extra(nodes, edges)
    return TestRunSnapshot("original", run_index, "t1", (graph("v", nodes, edges),))


def test_identical_runs_all_deterministic():
    runs = [run_with("5", k) for k in range(10)]
    mask = build_mask(runs)
    entry = mask.entries[("t1", VAR.key())]
    assert entry.nondeterministic == frozenset()
    assert entry.deterministic == {"v", "v.f", "v.g"}
    assert is_deterministic(mask, "t1", VAR, "v.f")


def test_single_divergent_run_marks_leaf():
    runs = [run_with("5", k) for k in range(9)] + [run_with("6", 9)]
    mask = build_mask(runs)
    entry = mask.entries[("t1", VAR.key())]
    assert entry.nondeterministic == {"v.f"}
    assert "v.g" in entry.deterministic  # siblings unaffected
    assert not is_deterministic(mask, "t1", VAR, "v.f")


def test_hashcode_like_field_differs_every_run():
    runs = [run_with(str(1000 + 17 * k), k) for k in range(10)]
    mask = build_mask(runs)
    entry = mask.entries[("t1", VAR.key())]
    assert entry.nondeterministic == {"v.f"}
    assert entry.deterministic == {"v", "v.g"}


def test_structural_disagreement_closes_subtree():
    def with_branch(nodes, edges):
        nodes += [obj("br"), prim("deep", "1")]
        edges += [edge("r", "extra", "br"), edge("br", "leaf", "deep")]
        return nodes, edges

    # The extra branch exists in run 0 only: branch and descendants nondeterministic.
    runs = [run_with("5", 0, with_branch)] + [run_with("5", k) for k in range(1, 4)]
    mask = build_mask(runs)
    entry = mask.entries[("t1", VAR.key())]
    assert entry.nondeterministic == {"v.extra", "v.extra.leaf"}
    assert entry.deterministic == {"v", "v.f", "v.g"}


def test_collection_size_disagreement_closes_subtree():
    def sized(n):
        def build(nodes, edges):
            items = [prim(f"i{i}", str(i)) for i in range(n)]
            nodes += [coll("c", n)] + items
            edges += [edge("r", "items", "c")] + [edge("c", i, f"i{i}") for i in range(n)]
            return nodes, edges

        return build

    runs = [run_with("5", 0, sized(2)), run_with("5", 1, sized(2)), run_with("5", 2, sized(3))]
    mask = build_mask(runs)
    entry = mask.entries[("t1", VAR.key())]
    assert "v.items" in entry.nondeterministic
    assert "v.items[0]" in entry.nondeterministic  # identical values, but under a size flicker
    assert "v.items[2]" in entry.nondeterministic
    assert entry.deterministic == {"v", "v.f", "v.g"}


def test_variable_absent_in_one_run_wholly_nondeterministic():
    other = TestRunSnapshot(
        "original", 2, "t1",
        (graph("v", [obj("r"), prim("x", "5"), prim("y", "77")],
               [edge("r", "f", "x"), edge("r", "g", "y")]),
         graph("w", [prim("p", "1")], [])),
    )
    runs = [run_with("5", 0), run_with("5", 1), other]
    mask = build_mask(runs)
    w_entry = mask.entries[("t1", RootVariable("w").key())]
    assert w_entry.deterministic == frozenset()
    assert w_entry.nondeterministic == {"w"}


def test_absent_node_is_not_assertable():
    runs = [run_with("5", k) for k in range(3)]
    mask = build_mask(runs)
    # Brute-force oracle: membership in the union of observed ids across runs.
    observed = set()
    for run in runs:
        observed.update(run.variables[0].nodes_by_id)
    assert "v.never" not in observed
    assert not is_deterministic(mask, "t1", VAR, "v.never")


def test_unknown_variable_raises_lookup_error():
    mask = build_mask([run_with("5", 0), run_with("5", 1)])
    with pytest.raises(MaskLookupError):
        is_deterministic(mask, "t1", RootVariable("ghost"), "ghost")


def test_fewer_than_two_runs_is_config_error():
    with pytest.raises(ConfigError):
        build_mask([run_with("5", 0)])


def test_mismatched_test_ids_is_input_error():
    other = TestRunSnapshot("original", 1, "t2", run_with("5", 1).variables)
    with pytest.raises(InputError):
        build_mask([run_with("5", 0), other])


def test_mutant_runs_rejected():
    bad = TestRunSnapshot("m1", 0, "t1", run_with("5", 0).variables)
    with pytest.raises(InputError):
        build_mask([run_with("5", 0), bad])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_mask_partitions_observed_union(seed):
    spec = ScenarioSpec(seed=seed, n_tests=2, n_mutants=4, nondet_per_variable=(0, 3))
    corpus = generate_corpus(spec)
    mask = build_masks(corpus.original_runs)
    for test_id, runs in corpus.original_runs.items():
        per_var_observed: dict = {}
        for run in runs:
            for g in run.variables:
                per_var_observed.setdefault(g.variable.key(), set()).update(g.nodes_by_id)
        for var_key, observed in per_var_observed.items():
            entry = mask.entries[(test_id, var_key)]
            assert entry.deterministic | entry.nondeterministic == observed
            assert entry.deterministic & entry.nondeterministic == frozenset()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_extra_divergent_run_never_shrinks_nondeterminism(seed):
    rng = random.Random(seed)
    base_runs = [run_with("5", k) for k in range(3)]
    mask_before = build_mask(base_runs)

    def perturb(nodes, edges):
        nodes = [prim(n.node_id, str(rng.randrange(100))) if n.kind == "primitive" else n for n in nodes]
        return nodes, edges

    extra = run_with(str(rng.randrange(100)), 3, perturb)
    mask_after = build_mask(base_runs + [extra])
    before = mask_before.entries[("t1", VAR.key())].nondeterministic
    after = mask_after.entries[("t1", VAR.key())].nondeterministic
    assert before <= after


def test_subtree_closure_no_deterministic_node_under_structural_nondet():
    for seed in range(5):
        corpus = generate_corpus(ScenarioSpec(seed=seed, n_tests=3, nondet_per_variable=(1, 3)))
        mask = build_masks(corpus.original_runs)
        for entry in mask.entries.values():
            for det in entry.deterministic:
                for nondet in entry.nondeterministic:
                    if det.startswith(nondet + ".") or det.startswith(nondet + "["):
                        # A deterministic node below a nondeterministic one is
                        # only legal when the ancestor is value-nondeterministic.
                        assert not _is_structural(corpus, entry, nondet), (det, nondet)


def _is_structural(corpus, entry, node_id):
    # Structural nondeterminism implies descendants are nondeterministic too;
    # a value flicker at a leaf has no descendants at all.
    return any(
        other != node_id and (other.startswith(node_id + ".") or other.startswith(node_id + "["))
        for other in entry.deterministic
    )


def test_mask_payload_round_trip():
    from crossfire.determinism import DeterminismMask

    mask = build_mask([run_with("5", 0), run_with("6", 1)])
    assert DeterminismMask.from_payload(mask.payload()) == mask
