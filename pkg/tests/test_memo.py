"""Value encoding, memo-table recording, provisional filtering, persistence."""

import pytest
from hypothesis import given, strategies as st

from memomut.analysis import analyze_program
from memomut.lang.interp import Runtime, run_test
from memomut.lang.parser import parse
from memomut.lang.values import UNIT, FnRef, deep_equal
from memomut.memo.builder import LookupHooks, provisional_memoization, record_tables
from memomut.memo.db import (
    CorruptDB,
    Exclusion,
    FingerprintMismatch,
    MemoDB,
    MemoTable,
    OutputRecord,
    SCHEMA_VERSION,
    SchemaVersionMismatch,
    db_from_bytes,
    db_to_bytes,
    db_to_json,
    load_db,
    save_db,
)
from memomut.memo.encoding import (
    DecodeError,
    decode_value,
    encode_key,
    encode_value,
    fnv1a64,
    program_fingerprint,
)
from memomut.profiler import ExpensivenessCriterion, profile_suite, select_candidates


# -- encoding ---------------------------------------------------------------


def test_encode_examples():
    assert encode_value(1) == b"\x01" + (1).to_bytes(8, "big")
    assert encode_value(-1) == b"\x01" + b"\xff" * 8
    assert encode_value(True) == b"\x02\x01"
    assert encode_value("") == b"\x03\x00\x00\x00\x00"
    assert encode_value([]) == b"\x04\x00\x00\x00\x00"
    assert encode_value(UNIT) == b"\x06"
    assert encode_value(FnRef("f")) == b"\x05\x00\x00\x00\x01f"


def test_fnv1a64_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_decode_rejects_garbage():
    with pytest.raises(DecodeError):
        decode_value(b"\x07")
    with pytest.raises(DecodeError):
        decode_value(b"\x01\x00")  # truncated int
    with pytest.raises(DecodeError):
        decode_value(b"\x02\x05")  # bool byte out of range
    with pytest.raises(DecodeError):
        decode_value(b"")


_values = st.recursive(
    st.integers(min_value=-(1 << 63), max_value=(1 << 63) - 1)
    | st.booleans()
    | st.text(max_size=6)
    | st.just(UNIT)
    | st.builds(FnRef, st.text(min_size=1, max_size=4)),
    lambda children: st.lists(children, max_size=3),
    max_leaves=10,
)


@given(_values)
def test_encode_decode_round_trip(v):
    data = encode_value(v)
    back, end = decode_value(data)
    assert end == len(data)
    assert deep_equal(back, v) or back is v is UNIT


@given(st.lists(_values, max_size=3), st.lists(_values, max_size=3))
def test_encode_key_injective_on_args(a, b):
    ka = encode_key(a, [])
    kb = encode_key(b, [])
    same = len(a) == len(b) and all(deep_equal(x, y) for x, y in zip(a, b))
    assert (ka == kb) == same


def test_encode_key_separates_sections():
    # One argument vs one global with the same payload must differ.
    assert encode_key([1], []) != encode_key([], [("g", 1)])
    assert encode_key([], [("g", 1)]) != encode_key([], [("h", 1)])


def test_fingerprint_tracks_source_changes():
    a = parse("fn f(){ return 1; } fn test_a(){ f(); }")
    b = parse("fn f(){ return 2; } fn test_a(){ f(); }")
    assert program_fingerprint(a) != program_fingerprint(b)
    assert program_fingerprint(a) == program_fingerprint(parse("fn f()  {  return 1; } fn test_a(){ f(); }"))


# -- recording --------------------------------------------------------------


def _pipeline_for(src, **kw):
    program = parse(src)
    runtime = Runtime(seed=0, fake_time=True)
    profile = profile_suite(program, runtime=runtime)
    bundle = analyze_program(program, time_rand_only=kw.pop("time_rand_only", False))
    criterion = ExpensivenessCriterion(tau_ns=kw.pop("tau_ns", 0), limit_value=100.0)
    cands = select_candidates(profile, bundle.determinacy, criterion)
    raw = record_tables(program, bundle, cands, profile, criterion=criterion, runtime=runtime)
    final, stats = provisional_memoization(program, raw, profile, runtime=runtime)
    return program, profile, raw, final, stats


FIB_SRC = """
fn fib(n) {
    if (n < 2) { return n; }
    return fib(n - 1) + fib(n - 2);
}
fn test_fib() { assert(fib(10) == 55); }
"""


def test_fib_table_has_one_entry_per_distinct_argument():
    _, _, raw, final, _ = _pipeline_for(FIB_SRC)
    table = raw.tables["fib"]
    assert len(table.entries) == 11  # fib(0) .. fib(10)
    assert table.recorded_from == {"test_fib"}
    assert "fib" in final.tables
    key10 = encode_key([10], [])
    assert table.entries[key10].ret == 55
    assert table.entries[key10].written_globals == {}


def test_recorded_output_steps_positive():
    _, _, raw, _, _ = _pipeline_for(FIB_SRC)
    steps = [rec.output_steps for rec in raw.tables["fib"].entries.values()]
    assert all(s > 0 for s in steps)
    # fib(10) costs more than fib(0).
    assert raw.tables["fib"].entries[encode_key([10], [])].output_steps > min(steps)


def test_record_captures_global_writes():
    src = (
        "global G = 0; "
        "fn f(n){ G = G + n; return G; } "
        "fn test_a(){ assert(f(2) == 2); assert(f(3) == 5); }"
    )
    _, _, raw, final, _ = _pipeline_for(src)
    table = raw.tables["f"]
    assert table.may_read == ["G"] and table.may_write == ["G"]
    # Same arg under different global values produces distinct keys.
    k1 = encode_key([2], [("G", 0)])
    k2 = encode_key([3], [("G", 2)])
    assert table.entries[k1].written_globals == {"G": 2}
    assert table.entries[k2].written_globals == {"G": 5}
    assert "f" in final.tables


def test_record_captures_argument_mutation():
    src = (
        "fn fill(a, v){ a[0] = v; push(a, v); } "
        "fn test_a(){ let a = [0]; fill(a, 7); assert(a[1] == 7); }"
    )
    _, _, raw, final, _ = _pipeline_for(src)
    table = raw.tables["fill"]
    assert table.mut_args == [0]
    rec = next(iter(table.entries.values()))
    assert rec.post_args == {0: [7, 7]}
    assert "fill" in final.tables


def test_conflicting_snapshots_flag_the_table():
    # Two different results for the same recorded entry state. The
    # analyses make this unreachable from real programs, so drive the
    # hooks directly with a table whose tracked state is incomplete.
    from memomut.memo.builder import RecordHooks

    table = MemoTable(fn="f", may_read=[], may_write=[], mut_args=[])
    hooks = RecordHooks(table)

    class _S:
        globals = {}
        steps = 0

    hooks.on_call_enter("f", [1], _S)
    hooks.on_call_exit("f", 10, _S)
    hooks.on_call_enter("f", [1], _S)
    hooks.on_call_exit("f", 11, _S)
    assert hooks.conflicted


def test_provisional_drops_rand_argument_functions():
    src = (
        "fn f(n){ return n * n; } "
        "fn test_a(){ assert(f(rand(1000)) >= 0); }"
    )
    _, _, raw, final, stats = _pipeline_for(src)
    assert "f" in raw.tables
    assert "f" not in final.tables
    assert final.exclusions["f"].reason == "cache_miss_on_covering_test"
    assert stats.misses["f"] > 0


def test_provisional_drops_changed_output_log():
    src = (
        "fn noisy(n){ print(n); return n + 1; } "
        "fn test_a(){ assert(noisy(1) == 2); }"
    )
    program, profile, raw, final, _ = _pipeline_for(src, time_rand_only=True)
    assert "noisy" in raw.tables  # candidate only without the print axiom
    assert "noisy" not in final.tables
    assert final.exclusions["noisy"].reason == "new_test_failure"
    assert final.exclusions["noisy"].detail == "test_a"


def test_provisional_zero_misses_on_retained(corpus_pipelines):
    for name, pipe in corpus_pipelines.items():
        final, stats = provisional_memoization(
            pipe.program, pipe.raw, pipe.profile, runtime=pipe.runtime
        )
        for fn in final.tables:
            assert stats.misses[fn] == 0, f"{name}:{fn}"


def test_provisional_rejects_foreign_program(sample_pipeline):
    other = parse("fn f(){ return 1; } fn test_a(){ f(); }")
    with pytest.raises(FingerprintMismatch):
        provisional_memoization(other, sample_pipeline.raw, sample_pipeline.profile)


def test_lookup_hit_restores_state():
    src = (
        "global G = 0; "
        "fn f(n){ G = G + n; return G; } "
        "fn test_a(){ assert(f(2) == 2); assert(f(3) == 5); }"
    )
    program, profile, _, final, _ = _pipeline_for(src)
    hooks = LookupHooks(final.tables)
    rt = Runtime(seed=0, fake_time=True)
    outcome, state = run_test(
        program,
        test_name := "test_a",
        hooks,
        rng=rt.rng_for(f"check:{test_name}"),
        clock=rt.clock_for(f"check:{test_name}"),
    )
    assert outcome.verdict.passed
    assert hooks.hits == 2 and hooks.misses == 0
    assert state.globals["G"] == 5
    # Fewer steps than an unhooked run: both bodies were skipped.
    plain, _ = run_test(program, test_name)
    assert outcome.steps < plain.steps


def test_lookup_gated_runs_normally():
    program, profile, _, final, _ = _pipeline_for(FIB_SRC)
    hooks = LookupHooks(final.tables, blocked=frozenset({"fib"}))
    outcome, _ = run_test(program, "test_fib", hooks)
    assert outcome.verdict.passed
    assert hooks.hits == 0 and hooks.misses == 0
    assert hooks.gated > 0


# -- persistence ------------------------------------------------------------


def _dbs_structurally_equal(a: MemoDB, b: MemoDB) -> bool:
    if (a.fingerprint, a.tau_ns, a.limit_value, a.limit_is_pct) != (
        b.fingerprint,
        b.tau_ns,
        b.limit_value,
        b.limit_is_pct,
    ):
        return False
    if set(a.tables) != set(b.tables) or set(a.exclusions) != set(b.exclusions):
        return False
    for fn, ta in a.tables.items():
        tb = b.tables[fn]
        if (ta.may_read, ta.may_write, ta.mut_args, ta.recorded_from) != (
            tb.may_read,
            tb.may_write,
            tb.mut_args,
            tb.recorded_from,
        ):
            return False
        if set(ta.entries) != set(tb.entries):
            return False
        for key, ra in ta.entries.items():
            rb = tb.entries[key]
            if not deep_equal(ra.ret, rb.ret) or ra.output_steps != rb.output_steps:
                return False
            if ra.written_globals != rb.written_globals or set(ra.post_args) != set(rb.post_args):
                return False
    return all(a.exclusions[f] == b.exclusions[f] for f in a.exclusions)


def test_db_round_trip_all_corpus(corpus_pipelines, tmp_path):
    for name, pipe in corpus_pipelines.items():
        path = tmp_path / f"{name}.db"
        save_db(pipe.db, path)
        back = load_db(path, pipe.program)
        assert _dbs_structurally_equal(pipe.db, back), name
        assert db_to_bytes(back) == db_to_bytes(pipe.db)


def test_round_trip_preserves_exclusions(tmp_path):
    db = MemoDB(fingerprint=7, tau_ns=5, limit_value=2, limit_is_pct=False)
    db.exclusions["f"] = Exclusion(reason="conflicted")
    db.exclusions["g"] = Exclusion(reason="new_test_failure", detail="test_x")
    back = db_from_bytes(db_to_bytes(db))
    assert back.exclusions == db.exclusions


def test_single_byte_corruption_detected(corpus_pipelines):
    import random

    rng = random.Random(99)
    for name, pipe in corpus_pipelines.items():
        blob = bytearray(db_to_bytes(pipe.db))
        offsets = rng.sample(range(len(blob)), min(20, len(blob)))
        for off in offsets:
            corrupted = bytearray(blob)
            corrupted[off] ^= 0x5A
            with pytest.raises((CorruptDB, SchemaVersionMismatch)):
                db_from_bytes(bytes(corrupted))


def test_truncation_detected(sample_pipeline):
    blob = db_to_bytes(sample_pipeline.db)
    with pytest.raises(CorruptDB):
        db_from_bytes(blob[:-1])
    with pytest.raises(CorruptDB):
        db_from_bytes(blob + b"\x00")
    with pytest.raises(CorruptDB):
        db_from_bytes(b"NOPE" + blob[4:])


def test_fingerprint_mismatch_raised(sample_pipeline):
    other = parse("fn f(){ return 1; } fn test_a(){ f(); }")
    blob = db_to_bytes(sample_pipeline.db)
    with pytest.raises(FingerprintMismatch):
        db_from_bytes(blob, program_fingerprint(other))


def test_schema_version_mismatch(sample_pipeline):
    db = MemoDB(
        fingerprint=1,
        tau_ns=1,
        limit_value=1,
        limit_is_pct=False,
        schema_version=SCHEMA_VERSION + 1,
    )
    with pytest.raises(SchemaVersionMismatch):
        db_from_bytes(db_to_bytes(db))


def test_db_to_json_shape(sample_pipeline):
    doc = db_to_json(sample_pipeline.db)
    assert doc["schema_version"] == SCHEMA_VERSION
    assert set(doc) == {
        "fingerprint",
        "schema_version",
        "tau_ns",
        "limit",
        "tables",
        "exclusions",
    }
    for t in doc["tables"].values():
        assert set(t) == {"may_read", "may_write", "mut_args", "recorded_from", "entries"}
