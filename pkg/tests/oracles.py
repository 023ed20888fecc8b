"""Independent oracles the main implementations are checked against.

Deliberately written with different algorithms and data structures than
the package code: per-node BFS instead of the set-propagation fixpoint,
a pattern-matching mutant enumerator instead of the generator, an
exhaustive run-everything mutant runner instead of the covering-tests
engine, and a minimal step-counting evaluator for profiler arithmetic.
"""

from __future__ import annotations

from collections import deque

from memomut.lang import ast as A
from memomut.lang.interp import Runtime, run_test
from memomut.mutation import MutantPool, apply_mutant
from memomut.profiler import Profile


def bfs_closure(nodes, edge_pairs) -> dict[str, set[str]]:
    """Reflexive reachability by breadth-first search from every node."""
    succ: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in edge_pairs:
        succ[a].add(b)
    out = {}
    for start in nodes:
        seen = {start}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for nxt in succ.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        out[start] = seen
    return out


_ARITH = {"+", "-", "*", "/", "%"}
_ORDER = {"<", "<=", ">", ">="}
_EQ = {"==", "!="}
_DEFAULTS = {
    "int": lambda e: type(e) is A.IntLit and e.value == 0,
    "bool": lambda e: type(e) is A.BoolLit and e.value is False,
    "str": lambda e: type(e) is A.StrLit and e.value == "",
    "arr": lambda e: type(e) is A.ArrayLit and not e.items,
}


def _static_type(e):
    if type(e) is A.IntLit:
        return "int"
    if type(e) is A.BoolLit:
        return "bool"
    if type(e) is A.StrLit:
        return "str"
    if type(e) is A.ArrayLit:
        return "arr"
    if type(e) is A.FnRefLit:
        return "fnref"
    if type(e) is A.Unary:
        return "int" if e.op == "-" else "bool"
    if type(e) is A.Binary:
        return "int" if e.op in _ARITH else "bool"
    if type(e) is A.Call and e.callee is None and e.name in ("len", "rand", "time_now"):
        return "int"
    return None


def enumerate_mutants(program) -> set[tuple[str, int, str, int]]:
    """All (fn, node_id, operator, variant) mutation opportunities."""
    found: set[tuple[str, int, str, int]] = set()
    for name, fn in program.functions.items():
        if name in program.tests:
            continue
        for node in A.walk(fn.body):
            nid = node.node_id
            if type(node) is A.Binary:
                if node.op in _ARITH:
                    found.add((name, nid, "AOR", 0))
                if node.op in _ORDER:
                    found.add((name, nid, "ROR", 0))
                    found.add((name, nid, "ROR", 1))
                if node.op in _EQ:
                    found.add((name, nid, "ROR", 0))
                if node.op in ("&&", "||"):
                    found.add((name, nid, "LCR", 0))
            if type(node) in (A.If, A.While):
                found.add((name, nid, "UOI_NEG", 0))
            if type(node) is A.Return and node.value is not None:
                ty = _static_type(node.value)
                if ty in _DEFAULTS and not _DEFAULTS[ty](node.value):
                    found.add((name, nid, "RVM", 0))
            if type(node) is A.IntLit:
                found.add((name, nid, "CRP", 0))
            if type(node) is A.Unary and node.op == "-":
                found.add((name, nid, "AOD", 0))
            if type(node) is A.Assign:
                found.add((name, nid, "SVR", 0))
    return found


def exhaustive_killed(
    program, pool: MutantPool, profile: Profile, runtime: Runtime, factor: int = 10
) -> set[int]:
    """Killed-set running every test against every mutant, no shortcuts."""
    killed: set[int] = set()
    for m in pool.mutants:
        mutated = apply_mutant(program, m)
        for test in sorted(program.tests):
            limit = profile.tests[test].steps * factor + 1000
            outcome, _ = run_test(
                mutated,
                test,
                None,
                step_limit=limit,
                rng=runtime.rng_for(f"mutant:{m.id}:{test}"),
                clock=runtime.clock_for(f"mutant:{m.id}:{test}"),
            )
            if not outcome.verdict.passed:
                killed.add(m.id)
    return killed


class _Halt(Exception):
    def __init__(self, value):
        self.value = value


def count_body_steps(program, fn_name: str, args: list) -> int:
    """Steps a direct call spends inside `fn_name`'s body.

    A tiny evaluator for the deterministic integer subset of the
    language (no globals, no calls, no arrays), counting one step per
    node like the real interpreter but implemented independently.
    """
    fn = program.functions[fn_name]
    env = dict(zip(fn.params, args))
    counter = [0]

    def expr(e):
        counter[0] += 1
        t = type(e)
        if t is A.IntLit:
            return e.value
        if t is A.BoolLit:
            return e.value
        if t is A.Name:
            return env[e.ident]
        if t is A.Unary:
            v = expr(e.operand)
            return -v if e.op == "-" else not v
        if t is A.Binary:
            lhs = expr(e.left)
            rhs = expr(e.right)
            return {
                "+": lambda: lhs + rhs,
                "-": lambda: lhs - rhs,
                "*": lambda: lhs * rhs,
                "<": lambda: lhs < rhs,
                "<=": lambda: lhs <= rhs,
                ">": lambda: lhs > rhs,
                ">=": lambda: lhs >= rhs,
                "==": lambda: lhs == rhs,
                "!=": lambda: lhs != rhs,
            }[e.op]()
        raise NotImplementedError(type(e).__name__)

    def block(b):
        counter[0] += 1
        for st in b.stmts:
            stmt(st)

    def stmt(s):
        counter[0] += 1
        t = type(s)
        if t is A.Let:
            env[s.name] = expr(s.value)
        elif t is A.Assign:
            value = expr(s.value)
            counter[0] += 1  # target node
            env[s.target.ident] = value
        elif t is A.While:
            while expr(s.cond):
                block(s.body)
        elif t is A.If:
            if expr(s.cond):
                block(s.then)
            elif s.orelse is not None:
                block(s.orelse)
        elif t is A.Return:
            raise _Halt(None if s.value is None else expr(s.value))
        else:
            raise NotImplementedError(type(s).__name__)

    try:
        block(fn.body)
    except _Halt:
        pass
    return counter[0]
