"""Shortest-path filtering and the three greedy crossfire strategies.

All strategies are greedy set cover at different granularities: pick the
assertion / variable / test that kills the most not-yet-covered mutants,
repeat until every killable mutant is covered. Ties are broken uniformly
at random under an explicit seed (or lexicographically on request), and
crossfire factors stay exact rationals until display.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Callable

from .candidates import AssertionCandidate, CandidateMatrix, build_matrix
from .canonical import fraction_payload
from .errors import ConfigError

STRATEGY_ASSERTION = "assertion-greedy"
STRATEGY_VARIABLE = "variable-greedy"
STRATEGY_TEST = "test-greedy"
STRATEGIES = (STRATEGY_ASSERTION, STRATEGY_VARIABLE, STRATEGY_TEST)

TIE_RANDOM = "random"
TIE_LEXICOGRAPHIC = "lexicographic"

REPEATS_DEFAULT = 20


def shortest_depth_filter(matrix: CandidateMatrix) -> CandidateMatrix:
    """Keep only candidates that reach some mutant at its minimum depth.

    Kill credit is restricted to the mutants a candidate reaches at that
    minimum depth, so post-filter selections only ever assert at the
    shortest access path. The killable set is unchanged: each mutant keeps
    at least one candidate at its own minimum.
    """
    min_depth: dict[str, int] = {}
    for candidate in matrix.candidates:
        for mutant in candidate.kills:
            depth = min_depth.get(mutant)
            if depth is None or candidate.depth < depth:
                min_depth[mutant] = candidate.depth

    filtered = []
    for candidate in matrix.candidates:
        keep = frozenset(m for m in candidate.kills if candidate.depth == min_depth[m])
        if keep:
            filtered.append(replace(candidate, kills=keep))
    return build_matrix(filtered)


@dataclass(frozen=True)
class SelectionStep:
    candidate_id: str
    new_mutants: tuple[str, ...]

    def payload(self) -> dict[str, Any]:
        return {"candidate_id": self.candidate_id, "new_mutants": list(self.new_mutants)}


@dataclass(frozen=True)
class Selection:
    strategy: str
    seed: int
    tie_break: str
    depth_filtered: bool
    steps: tuple[SelectionStep, ...]
    covered: frozenset[str]
    n_assertions: int
    n_variables: int
    n_tests: int
    crossfire_factor: Fraction

    @property
    def chosen(self) -> tuple[str, ...]:
        return tuple(step.candidate_id for step in self.steps)

    def primary_count(self) -> int:
        if self.strategy == STRATEGY_ASSERTION:
            return self.n_assertions
        if self.strategy == STRATEGY_VARIABLE:
            return self.n_variables
        return self.n_tests

    def payload(self) -> dict[str, Any]:
        return {
            "covered": sorted(self.covered),
            "crossfire_factor": fraction_payload(self.crossfire_factor),
            "depth_filtered": self.depth_filtered,
            "n_assertions": self.n_assertions,
            "n_tests": self.n_tests,
            "n_variables": self.n_variables,
            "seed": self.seed,
            "steps": [s.payload() for s in self.steps],
            "strategy": self.strategy,
            "tie_break": self.tie_break,
        }


def _finish(
    matrix: CandidateMatrix,
    strategy: str,
    seed: int,
    tie_break: str,
    depth_filtered: bool,
    steps: list[SelectionStep],
    covered: set[str],
) -> Selection:
    chosen = [matrix.candidate(step.candidate_id) for step in steps]
    n_assertions = len(chosen)
    n_variables = len({c.variable_group() for c in chosen})
    n_tests = len({c.test_id for c in chosen})
    primary = {
        STRATEGY_ASSERTION: n_assertions,
        STRATEGY_VARIABLE: n_variables,
        STRATEGY_TEST: n_tests,
    }[strategy]
    factor = Fraction(len(covered), primary) if primary else Fraction(0)
    return Selection(
        strategy=strategy,
        seed=seed,
        tie_break=tie_break,
        depth_filtered=depth_filtered,
        steps=tuple(steps),
        covered=frozenset(covered),
        n_assertions=n_assertions,
        n_variables=n_variables,
        n_tests=n_tests,
        crossfire_factor=factor,
    )


def _pick(items: list, rng: random.Random, tie_break: str):
    """items are (sort_key, payload) pairs sharing the best gain."""
    items.sort(key=lambda pair: pair[0])
    if tie_break == TIE_LEXICOGRAPHIC or len(items) == 1:
        return items[0][1]
    return items[rng.randrange(len(items))][1]


def select_assertion_greedy(
    matrix: CandidateMatrix,
    seed: int = 0,
    tie_break: str = TIE_RANDOM,
    depth_filtered: bool = True,
) -> Selection:
    """Strategy 1: repeatedly take the candidate covering the most uncovered mutants."""
    rng = random.Random(seed)
    covered: set[str] = set()
    steps: list[SelectionStep] = []
    while covered != matrix.killable_mutants:
        best_gain = 0
        best: list[tuple[tuple, AssertionCandidate]] = []
        for candidate in matrix.candidates:
            gain = len(candidate.kills - covered)
            if gain > best_gain:
                best_gain = gain
                best = [(candidate.sort_key(), candidate)]
            elif gain == best_gain and gain > 0:
                best.append((candidate.sort_key(), candidate))
        if not best:
            break  # unreachable when kill sets are faithful to the killable set
        choice = _pick(best, rng, tie_break)
        new = tuple(sorted(choice.kills - covered))
        covered.update(new)
        steps.append(SelectionStep(choice.candidate_id, new))
    return _finish(matrix, STRATEGY_ASSERTION, seed, tie_break, depth_filtered, steps, covered)


def select_variable_greedy(
    matrix: CandidateMatrix,
    seed: int = 0,
    tie_break: str = TIE_RANDOM,
    depth_filtered: bool = True,
) -> Selection:
    """Strategy 2: greediest (test, variable) group, then greedy assertions inside it."""
    return _grouped_greedy(
        matrix, STRATEGY_VARIABLE, lambda c: c.variable_group(), seed, tie_break, depth_filtered
    )


def select_test_greedy(
    matrix: CandidateMatrix,
    seed: int = 0,
    tie_break: str = TIE_RANDOM,
    depth_filtered: bool = True,
) -> Selection:
    """Strategy 3: greediest test, then greedy assertions inside it."""
    return _grouped_greedy(
        matrix, STRATEGY_TEST, lambda c: c.test_id, seed, tie_break, depth_filtered
    )


def _grouped_greedy(
    matrix: CandidateMatrix,
    strategy: str,
    group_of: Callable[[AssertionCandidate], Any],
    seed: int,
    tie_break: str,
    depth_filtered: bool,
) -> Selection:
    rng = random.Random(seed)
    groups: dict[Any, list[AssertionCandidate]] = {}
    for candidate in matrix.candidates:
        groups.setdefault(group_of(candidate), []).append(candidate)

    covered: set[str] = set()
    steps: list[SelectionStep] = []
    while covered != matrix.killable_mutants:
        best_gain = 0
        best: list[tuple[Any, Any]] = []
        for group_key, members in groups.items():
            reach: set[str] = set()
            for candidate in members:
                reach.update(candidate.kills)
            gain = len(reach - covered)
            if gain > best_gain:
                best_gain = gain
                best = [(group_key, group_key)]
            elif gain == best_gain and gain > 0:
                best.append((group_key, group_key))
        if not best:
            break
        group_key = _pick(best, rng, tie_break)

        # Inner greedy: cover everything this group can reach, never picking
        # a candidate that adds zero new coverage.
        members = groups[group_key]
        while True:
            inner_gain = 0
            inner_best: list[tuple[tuple, AssertionCandidate]] = []
            for candidate in members:
                gain = len(candidate.kills - covered)
                if gain > inner_gain:
                    inner_gain = gain
                    inner_best = [(candidate.sort_key(), candidate)]
                elif gain == inner_gain and gain > 0:
                    inner_best.append((candidate.sort_key(), candidate))
            if not inner_best:
                break
            choice = _pick(inner_best, rng, tie_break)
            new = tuple(sorted(choice.kills - covered))
            covered.update(new)
            steps.append(SelectionStep(choice.candidate_id, new))
    return _finish(matrix, strategy, seed, tie_break, depth_filtered, steps, covered)


_SELECTORS = {
    STRATEGY_ASSERTION: select_assertion_greedy,
    STRATEGY_VARIABLE: select_variable_greedy,
    STRATEGY_TEST: select_test_greedy,
}


def select(
    matrix: CandidateMatrix,
    strategy: str,
    seed: int = 0,
    tie_break: str = TIE_RANDOM,
    depth_filtered: bool = True,
) -> Selection:
    try:
        selector = _SELECTORS[strategy]
    except KeyError:
        raise ConfigError(f"unknown strategy {strategy!r}") from None
    return selector(matrix, seed=seed, tie_break=tie_break, depth_filtered=depth_filtered)


@dataclass(frozen=True)
class AggregatedSelection:
    """Arithmetic means over R independent seeded runs of one strategy."""

    strategy: str
    repeats: int
    base_seed: int
    seeds: tuple[int, ...]
    runs: tuple[Selection, ...]
    mean_assertions: Fraction
    mean_variables: Fraction
    mean_tests: Fraction
    mean_factor: Fraction
    covered: frozenset[str]

    def mean_primary(self) -> Fraction:
        if self.strategy == STRATEGY_ASSERTION:
            return self.mean_assertions
        if self.strategy == STRATEGY_VARIABLE:
            return self.mean_variables
        return self.mean_tests

    def payload(self) -> dict[str, Any]:
        return {
            "base_seed": self.base_seed,
            "covered": sorted(self.covered),
            "mean_crossfire_factor": fraction_payload(self.mean_factor),
            "mean_n_assertions": fraction_payload(self.mean_assertions),
            "mean_n_tests": fraction_payload(self.mean_tests),
            "mean_n_variables": fraction_payload(self.mean_variables),
            "repeats": self.repeats,
            "runs": [
                {
                    "crossfire_factor": fraction_payload(run.crossfire_factor),
                    "n_assertions": run.n_assertions,
                    "n_tests": run.n_tests,
                    "n_variables": run.n_variables,
                    "seed": run.seed,
                }
                for run in self.runs
            ],
            "seeds": list(self.seeds),
            "strategy": self.strategy,
        }


def run_repeated(
    matrix: CandidateMatrix,
    strategy: str,
    repeats: int = REPEATS_DEFAULT,
    base_seed: int = 0,
    tie_break: str = TIE_RANDOM,
    depth_filtered: bool = True,
) -> AggregatedSelection:
    """R independent selections under seeds base_seed..base_seed+R-1."""
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    seeds = tuple(base_seed + i for i in range(repeats))
    runs = tuple(
        select(matrix, strategy, seed=s, tie_break=tie_break, depth_filtered=depth_filtered)
        for s in seeds
    )
    covered = frozenset().union(*(run.covered for run in runs)) if runs else frozenset()
    r = len(runs)
    return AggregatedSelection(
        strategy=strategy,
        repeats=r,
        base_seed=base_seed,
        seeds=seeds,
        runs=runs,
        mean_assertions=Fraction(sum(run.n_assertions for run in runs), r),
        mean_variables=Fraction(sum(run.n_variables for run in runs), r),
        mean_tests=Fraction(sum(run.n_tests for run in runs), r),
        mean_factor=Fraction(sum(run.crossfire_factor for run in runs), r),
        covered=covered,
    )
