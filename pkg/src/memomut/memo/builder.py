"""Memo-table construction: snapshot recording and provisional filtering.

Recording runs each candidate's covering passing tests with hooks that
snapshot an input key at every entry (arguments plus may-read globals)
and an output record at the matching exit (return value, may-write
globals, mutated array arguments).  Provisional memoization then
re-runs the same tests with look-up enabled for one function at a time
and throws out anything that regresses a test or misses the cache.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..analysis import AnalysisBundle
from ..lang.ast import Program
from ..lang.interp import ExecState, Hooks, Runtime, Substitute, run_test
from ..lang.values import deep_copy, deep_equal
from ..profiler import Candidate, ExpensivenessCriterion, Profile
from .db import Exclusion, FingerprintMismatch, MemoDB, MemoTable, OutputRecord
from .encoding import encode_key, program_fingerprint


def _records_equal(a: OutputRecord, b: OutputRecord) -> bool:
    return (
        deep_equal(a.ret, b.ret)
        and a.output_steps == b.output_steps
        and set(a.written_globals) == set(b.written_globals)
        and all(deep_equal(v, b.written_globals[g]) for g, v in a.written_globals.items())
        and set(a.post_args) == set(b.post_args)
        and all(deep_equal(v, b.post_args[p]) for p, v in a.post_args.items())
    )


class RecordHooks(Hooks):
    """Fills one function's memo-table during an unmutated run."""

    def __init__(self, table: MemoTable):
        self.table = table
        self.conflicted = False
        self._open: list[tuple[bytes, list, int]] = []

    def on_call_enter(self, fn, args, state):
        if fn == self.table.fn:
            key = encode_key(args, [(g, state.globals[g]) for g in self.table.may_read])
            self._open.append((key, args, state.steps))
        return None

    def on_call_exit(self, fn, ret, state):
        if fn != self.table.fn:
            return
        key, args, steps0 = self._open.pop()
        rec = OutputRecord(
            ret=deep_copy(ret),
            written_globals={g: deep_copy(state.globals[g]) for g in self.table.may_write},
            post_args={
                p: deep_copy(args[p]) for p in self.table.mut_args if p < len(args)
            },
            output_steps=state.steps - steps0,
        )
        existing = self.table.entries.get(key)
        if existing is None:
            self.table.entries[key] = rec
        elif not _records_equal(existing, rec):
            self.conflicted = True


class LookupHooks(Hooks):
    """Bypasses table-holding functions on cache hits.

    `blocked` names functions whose bypass is gated off for the current
    execution (mutated or depending on the mutated function); gated
    entries execute normally and are not counted as cache misses.
    """

    def __init__(self, tables: dict[str, MemoTable], blocked: frozenset[str] = frozenset()):
        self.tables = tables
        self.blocked = blocked
        self.hits = 0
        self.misses = 0
        self.gated = 0
        self.decisions: list[tuple[str, str]] | None = None

    def on_call_enter(self, fn, args, state):
        table = self.tables.get(fn)
        if table is None:
            return None
        if fn in self.blocked:
            self.gated += 1
            if self.decisions is not None:
                self.decisions.append((fn, "gated"))
            return None
        key = encode_key(args, [(g, state.globals[g]) for g in table.may_read])
        rec = table.entries.get(key)
        if rec is None:
            self.misses += 1
            if self.decisions is not None:
                self.decisions.append((fn, "miss"))
            return None
        self.hits += 1
        if self.decisions is not None:
            self.decisions.append((fn, "bypass"))
        return Substitute(value=deep_copy(rec.ret), patch=_make_patch(rec, args))


def _make_patch(rec: OutputRecord, args: list):
    def patch(state: ExecState) -> None:
        for g, v in rec.written_globals.items():
            state.globals[g] = deep_copy(v)
        for p, v in rec.post_args.items():
            target = args[p]
            if isinstance(target, list):
                target[:] = deep_copy(v)

    return patch


def _test_limit(profile: Profile, test: str, factor: int) -> int:
    return profile.tests[test].steps * factor + 1000


def record_tables(
    program: Program,
    bundle: AnalysisBundle,
    candidates: list[Candidate],
    profile: Profile,
    criterion: ExpensivenessCriterion | None = None,
    step_limit_factor: int = 10,
    runtime: Runtime | None = None,
) -> MemoDB:
    """Raw memo-tables database recorded from the unmutated program."""
    runtime = runtime or Runtime()
    criterion = criterion or ExpensivenessCriterion()
    db = MemoDB(
        fingerprint=program_fingerprint(program),
        tau_ns=criterion.tau_ns,
        limit_value=criterion.limit_value,
        limit_is_pct=criterion.limit_is_pct,
    )
    effects = bundle.effects
    for cand in candidates:
        fn = cand.fn
        table = MemoTable(
            fn=fn,
            may_read=sorted(effects.reads.get(fn, ())),
            may_write=sorted(effects.writes.get(fn, ())),
            mut_args=sorted(effects.mut_args.get(fn, ())),
        )
        hooks = RecordHooks(table)
        for test in cand.covering_tests:
            hooks._open.clear()
            run_test(
                program,
                test,
                hooks,
                step_limit=_test_limit(profile, test, step_limit_factor),
                rng=runtime.rng_for(f"record:{fn}:{test}"),
                clock=runtime.clock_for(f"record:{fn}:{test}"),
            )
            table.recorded_from.add(test)
        if hooks.conflicted:
            db.exclusions[fn] = Exclusion(reason="conflicted")
        else:
            db.tables[fn] = table
    return db


@dataclass
class ProvisionalStats:
    hits: dict[str, int]
    misses: dict[str, int]


def provisional_memoization(
    program: Program,
    raw: MemoDB,
    profile: Profile,
    step_limit_factor: int = 10,
    runtime: Runtime | None = None,
    miss_tolerance: int = 0,
) -> tuple[MemoDB, ProvisionalStats]:
    """Filter the raw database down to safely memoizable functions.

    A function is dropped if look-up-enabled re-runs of its covering
    tests regress any previously-passing test (verdict or printed
    output) or incur more than `miss_tolerance` cache misses.
    """
    if raw.fingerprint != program_fingerprint(program):
        raise FingerprintMismatch("raw database was recorded from a different program")
    runtime = runtime or Runtime()
    final = MemoDB(
        fingerprint=raw.fingerprint,
        tau_ns=raw.tau_ns,
        limit_value=raw.limit_value,
        limit_is_pct=raw.limit_is_pct,
        exclusions=dict(raw.exclusions),
    )
    stats = ProvisionalStats(hits={}, misses={})
    for fn in sorted(raw.tables):
        table = raw.tables[fn]
        hooks = LookupHooks({fn: table})
        failed_test = None
        for test in sorted(table.recorded_from):
            baseline = profile.tests[test]
            outcome, state = run_test(
                program,
                test,
                hooks,
                step_limit=_test_limit(profile, test, step_limit_factor),
                rng=runtime.rng_for(f"provisional:{fn}:{test}"),
                clock=runtime.clock_for(f"provisional:{fn}:{test}"),
            )
            if outcome.verdict != baseline.verdict or state.output != baseline.output:
                failed_test = test
                break
        stats.hits[fn] = hooks.hits
        stats.misses[fn] = hooks.misses
        if failed_test is not None:
            final.exclusions[fn] = Exclusion(reason="new_test_failure", detail=failed_test)
        elif hooks.misses > miss_tolerance:
            final.exclusions[fn] = Exclusion(
                reason="cache_miss_on_covering_test", detail=str(hooks.misses)
            )
        else:
            final.tables[fn] = table
    return final, stats
