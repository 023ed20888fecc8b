"""Baseline suite profiling and expensive-function candidate selection.

A profiling run executes every test once with entry/exit timing hooks.
Per-function cost is inclusive: each dynamic entry contributes its own
entry-to-exit interval, so nested and recursive invocations overlap
their parents (nested expensive functions are double-counted).
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

from .analysis import DeterminacyReport
from .lang.ast import Program
from .lang.interp import DEFAULT_STEP_LIMIT, Hooks, Runtime, Verdict, run_test


class SuiteEmpty(Exception):
    pass


@dataclass
class FunctionStats:
    invocations: int = 0
    inclusive_ns: int = 0
    inclusive_steps: int = 0

    @property
    def mean_ns(self) -> float:
        return self.inclusive_ns / self.invocations if self.invocations else 0.0


@dataclass
class TestRecord:
    covered: set[str]
    verdict: Verdict
    duration_ns: int
    steps: int
    output: list[str]


@dataclass
class Profile:
    functions: dict[str, FunctionStats]
    tests: dict[str, TestRecord]
    step_limit: int = DEFAULT_STEP_LIMIT

    def passing_tests(self) -> list[str]:
        return [t for t, rec in self.tests.items() if rec.verdict.passed]

    def covering_passing_tests(self, fn: str) -> list[str]:
        return sorted(
            t for t, rec in self.tests.items() if rec.verdict.passed and fn in rec.covered
        )

    def total_test_ns(self) -> int:
        return sum(self.functions[t].inclusive_ns for t in self.tests)


class ProfileHooks(Hooks):
    """Times every user-function call and records per-test coverage."""

    def __init__(self):
        self.stats: dict[str, FunctionStats] = {}
        self.covered: set[str] = set()
        self._open: list[tuple[str, int, int]] = []

    def begin_test(self) -> None:
        self.covered = set()
        self._open = []

    def on_call_enter(self, fn, args, state):
        st = self.stats.setdefault(fn, FunctionStats())
        st.invocations += 1
        self.covered.add(fn)
        self._open.append((fn, time.perf_counter_ns(), state.steps))
        return None

    def on_call_exit(self, fn, ret, state):
        name, t0, s0 = self._open.pop()
        st = self.stats[name]
        st.inclusive_ns += time.perf_counter_ns() - t0
        st.inclusive_steps += state.steps - s0


def profile_suite(
    program: Program,
    step_limit: int = DEFAULT_STEP_LIMIT,
    runtime: Runtime | None = None,
    reps: int = 1,
) -> Profile:
    """Profile the whole suite; with reps > 1, timings are per-entry medians.

    Coverage, verdicts, step counts, and output logs come from the first
    repetition (they are deterministic up to the seeded RNG stream).
    """
    if not program.tests:
        raise SuiteEmpty("program declares no tests")
    runtime = runtime or Runtime()
    runs: list[Profile] = []
    for rep in range(max(1, reps)):
        functions = {f: FunctionStats() for f in program.functions}
        tests: dict[str, TestRecord] = {}
        for test in program.tests:
            hooks = ProfileHooks()
            hooks.stats = {f: functions[f] for f in functions}
            hooks.begin_test()
            outcome, state = run_test(
                program,
                test,
                hooks,
                step_limit,
                rng=runtime.rng_for(f"profile:{rep}:{test}"),
                clock=runtime.clock_for(f"profile:{rep}:{test}"),
            )
            tests[test] = TestRecord(
                covered=hooks.covered,
                verdict=outcome.verdict,
                duration_ns=outcome.wall_ns,
                steps=outcome.steps,
                output=list(state.output),
            )
        runs.append(Profile(functions=functions, tests=tests, step_limit=step_limit))

    base = runs[0]
    if len(runs) > 1:
        for f, st in base.functions.items():
            st.inclusive_ns = int(statistics.median(r.functions[f].inclusive_ns for r in runs))
        for t, rec in base.tests.items():
            rec.duration_ns = int(statistics.median(r.tests[t].duration_ns for r in runs))
    return base


@dataclass
class ExpensivenessCriterion:
    tau_ns: int = 1_000_000  # 1 ms
    limit_value: float = 20.0
    limit_is_pct: bool = True
    tau_mode: str = "mean"  # or "cumulative"

    def resolve_limit(self, n_functions: int) -> int:
        if self.limit_is_pct:
            return math.ceil(self.limit_value / 100.0 * n_functions)
        return int(self.limit_value)


@dataclass
class Candidate:
    fn: str
    inclusive_ns: int
    covering_tests: list[str] = field(default_factory=list)


def select_candidates(
    profile: Profile,
    determinacy: DeterminacyReport,
    criterion: ExpensivenessCriterion,
) -> list[Candidate]:
    """Deterministic, expensive, covered-by-a-passing-test functions.

    Ordered by inclusive time descending (name ascending on ties) and
    truncated to the resolved limit.  Test functions are not candidates
    (bypassing an oracle is pointless) but do count toward the limit's
    percentage base denominator of declared non-test functions.
    """
    tests = set(profile.tests)
    pool = []
    for fn, st in profile.functions.items():
        if fn in tests or fn in determinacy.nondeterministic:
            continue
        cost = st.mean_ns if criterion.tau_mode == "mean" else st.inclusive_ns
        if cost <= criterion.tau_ns:
            continue
        covering = profile.covering_passing_tests(fn)
        if not covering:
            continue
        pool.append(Candidate(fn=fn, inclusive_ns=st.inclusive_ns, covering_tests=covering))
    pool.sort(key=lambda c: (-c.inclusive_ns, c.fn))
    limit = criterion.resolve_limit(len(profile.functions) - len(tests))
    return pool[:limit]


def cost_breakdown(profile: Profile, top_fraction: float) -> tuple[int, int, float]:
    """(top-set time, total suite time, share) for the most expensive functions.

    Inclusive intervals overlap when expensive functions nest, so the
    share may exceed 1; this follows literal entry/exit differencing.
    """
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must be in (0, 1]")
    ranked = sorted(profile.functions.items(), key=lambda kv: (-kv[1].inclusive_ns, kv[0]))
    k = math.ceil(top_fraction * len(ranked))
    top_ns = sum(st.inclusive_ns for _, st in ranked[:k])
    total_ns = profile.total_test_ns()
    share = top_ns / total_ns if total_ns else 1.0
    return top_ns, total_ns, share


# -- JSON round trip --------------------------------------------------------


def profile_to_json(profile: Profile) -> dict:
    return {
        "step_limit": profile.step_limit,
        "functions": {
            f: {
                "invocations": st.invocations,
                "inclusive_ns": st.inclusive_ns,
                "inclusive_steps": st.inclusive_steps,
                "mean_ns": st.mean_ns,
            }
            for f, st in sorted(profile.functions.items())
        },
        "tests": {
            t: {
                "covered": sorted(rec.covered),
                "verdict": {
                    "kind": rec.verdict.kind,
                    "node_id": rec.verdict.node_id,
                    "error": rec.verdict.error,
                },
                "duration_ns": rec.duration_ns,
                "steps": rec.steps,
                "output": rec.output,
            }
            for t, rec in sorted(profile.tests.items())
        },
    }


def profile_from_json(doc: dict) -> Profile:
    functions = {
        f: FunctionStats(
            invocations=d["invocations"],
            inclusive_ns=d["inclusive_ns"],
            inclusive_steps=d["inclusive_steps"],
        )
        for f, d in doc["functions"].items()
    }
    tests = {
        t: TestRecord(
            covered=set(d["covered"]),
            verdict=Verdict(
                kind=d["verdict"]["kind"],
                node_id=d["verdict"]["node_id"],
                error=d["verdict"]["error"],
            ),
            duration_ns=d["duration_ns"],
            steps=d["steps"],
            output=list(d["output"]),
        )
        for t, d in doc["tests"].items()
    }
    return Profile(functions=functions, tests=tests, step_limit=doc.get("step_limit", DEFAULT_STEP_LIMIT))
