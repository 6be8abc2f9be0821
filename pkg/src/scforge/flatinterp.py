"""Reference interpreter for flat statecharts.

One object, one FIFO event buffer, run-to-completion steps: each step consumes
one buffered message, fires one enabled transition atomically (statements,
state change, postcondition and invariant checks), and appends the emitted
messages to the output. If a buffered message enables nothing, the machine
falls into chaos — reported as an explicit outcome that drops the message,
so completion behavior stays observable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Union

from .actions import (
    ActionConditionViolated,
    Message,
    TIMEOUT,
    TIMER_FLAG,
    UnboundVariable,
    Valuation,
    eval_cond,
    exec_stmt,
    match_call,
)
from .ast import SCSimp, SimpTrans


class BadInitialState(Exception):
    pass


@dataclass(frozen=True)
class Configuration:
    current: str
    store: tuple  # sorted (name, value) pairs
    buffer: tuple  # FIFO of Message, head first
    emitted: tuple  # Messages emitted so far, in order

    @classmethod
    def make(cls, current: str, store: Optional[dict] = None,
             buffer: Iterable[Message] = (), emitted: Iterable[Message] = ()):
        return cls(current, _freeze(store or {}), tuple(buffer), tuple(emitted))

    def store_dict(self) -> dict:
        return dict(self.store)


def _freeze(store: dict) -> tuple:
    return tuple(sorted(store.items(), key=lambda kv: kv[0]))


# -- outcomes ---------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    next: Configuration


@dataclass(frozen=True)
class Chaos:
    reason: str
    next: Configuration  # with the offending message dropped


@dataclass(frozen=True)
class PostconditionViolated:
    transition: SimpTrans
    next: Configuration


@dataclass(frozen=True)
class InvariantViolated:
    state: str
    next: Configuration


Outcome = Union[Step, Chaos, PostconditionViolated, InvariantViolated]


# -- schedulers -------------------------------------------------------------

def _choice_key(choice):
    t, m, v = choice
    return (t.src, t.trg, t.call.name, repr(t.pre), repr(t.act), repr(m), repr(sorted(v.items())))


class LexScheduler:
    """Deterministic: smallest choice in a fixed lexicographic order."""

    def choose(self, choices):
        return min(choices, key=_choice_key)


class RandomScheduler:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def choose(self, choices):
        return self.rng.choice(sorted(choices, key=_choice_key))


def scheduler_from_spec(spec: str):
    if spec == "lex":
        return LexScheduler()
    if spec.startswith("rand:"):
        return RandomScheduler(int(spec.split(":", 1)[1]))
    raise ValueError(f"unknown scheduler {spec!r}")


# -- enabling and firing ----------------------------------------------------

def _guard_holds(pre, store: dict, v: Valuation) -> bool:
    try:
        return eval_cond(pre, store, v)
    except UnboundVariable:
        return False  # a guard over a never-assigned variable cannot hold


def _cond_satisfied(cond, store: dict, v: Valuation) -> bool:
    try:
        return eval_cond(cond, store, v)
    except UnboundVariable:
        return True  # invariants over not-yet-assigned variables are vacuous


def enabled(conf: Configuration, sc: SCSimp, match: str = "fifo"):
    """All (transition, message, valuation) triples that may fire.

    "fifo": only the head message is eligible. "anywhere": any buffered
    message may be selected.
    """
    store = conf.store_dict()
    if match == "fifo":
        candidates = conf.buffer[:1]
    elif match == "anywhere":
        candidates = conf.buffer
    else:
        raise ValueError(f"unknown match mode {match!r}")
    out = []
    for m in candidates:
        for t in sc.sorted_transitions():
            if t.src != conf.current:
                continue
            v = match_call(t.call, m)
            if v is None:
                continue
            if _guard_holds(t.pre, store, v):
                out.append((t, m, v))
    return out


def _drop_first(buffer: tuple, m: Message) -> tuple:
    out = list(buffer)
    out.remove(m)
    return tuple(out)


def fire(conf: Configuration, choice, sc: SCSimp) -> Outcome:
    t, m, v = choice
    store = conf.store_dict()
    buffer = _drop_first(conf.buffer, m)
    try:
        new_store, msgs = exec_stmt(t.act.stmt, store, v)
    except ActionConditionViolated:
        nxt = Configuration.make(t.trg, store, buffer, conf.emitted)
        return PostconditionViolated(t, nxt)
    nxt = Configuration.make(t.trg, new_store, buffer, conf.emitted + msgs)
    if t.act.post is not None and not _cond_satisfied(t.act.post, new_store, v):
        return PostconditionViolated(t, nxt)
    if not _cond_satisfied(sc.inv, new_store, v):
        return InvariantViolated("<chart>", nxt)
    target = sc.state(t.trg)
    if not _cond_satisfied(target.inv, new_store, v):
        return InvariantViolated(t.trg, nxt)
    return Step(nxt)


def step(conf: Configuration, sc: SCSimp, scheduler=None, match: str = "fifo") -> Outcome:
    if not conf.buffer:
        return Step(conf)  # quiescent
    head = conf.buffer[0]
    if head.name == TIMEOUT and not dict(conf.store).get(TIMER_FLAG, False):
        # a timeout whose timer was never set (or was stopped) evaporates
        return Step(replace(conf, buffer=conf.buffer[1:]))
    choices = enabled(conf, sc, match)
    if not choices:
        dropped = replace(conf, buffer=_drop_first(conf.buffer, head))
        return Chaos(f"no enabled transition for {head.name} in {conf.current}", dropped)
    choice = (scheduler or LexScheduler()).choose(choices)
    return fire(conf, choice, sc)


@dataclass
class RunResult:
    trajectory: list  # Configurations, initial first
    emissions: tuple  # all emitted Messages in order
    outcome: Outcome  # Step(last) when the run ended quiescent

    @property
    def quiescent(self) -> bool:
        return isinstance(self.outcome, Step)

    @property
    def final(self) -> Configuration:
        return self.outcome.next


def run(
    sc: SCSimp,
    init: str,
    inputs: Iterable[Message],
    scheduler=None,
    match: str = "fifo",
    max_steps: int = 10000,
) -> RunResult:
    state = sc.state(init)
    if "initial" not in state.modifiers:
        raise BadInitialState(init)
    conf = Configuration.make(init, {}, tuple(inputs))
    trajectory = [conf]
    outcome: Outcome = Step(conf)
    for _ in range(max_steps):
        if not conf.buffer:
            outcome = Step(conf)
            break
        outcome = step(conf, sc, scheduler, match)
        conf = outcome.next
        trajectory.append(conf)
        if not isinstance(outcome, Step):
            break
    return RunResult(trajectory, conf.emitted, outcome)


def run_all_initials(sc: SCSimp, inputs, scheduler=None, match: str = "fifo",
                     max_steps: int = 10000) -> dict:
    """Run from every initial state; keys sorted by state name."""
    return {
        s.name: run(sc, s.name, inputs, scheduler, match, max_steps)
        for s in sorted(sc.initial_states(), key=lambda s: s.name)
    }


def _json_value(v):
    if isinstance(v, tuple):
        return [_json_value(x) for x in v]
    return v


def run_log_lines(result: RunResult) -> list:
    """One JSON-ready dict per step: {step, state, consumed, emitted, storeDiff}."""
    out = []
    prev = result.trajectory[0]
    for i, conf in enumerate(result.trajectory[1:], start=1):
        consumed = None
        remaining = list(conf.buffer)
        for m in prev.buffer:
            if m in remaining:
                remaining.remove(m)
            else:
                consumed = format_message(m)
                break
        emitted = [format_message(m) for m in conf.emitted[len(prev.emitted):]]
        before, after = dict(prev.store), dict(conf.store)
        diff = {
            k: _json_value(after[k])
            for k in sorted(after)
            if k not in before or before[k] != after[k]
        }
        out.append(
            {"step": i, "state": conf.current, "consumed": consumed,
             "emitted": emitted, "storeDiff": diff}
        )
        prev = conf
    return out


def explore_emissions(
    sc: SCSimp,
    init: str,
    inputs: Iterable[Message],
    match: str = "fifo",
    max_steps: int = 10000,
) -> set:
    """All (emissions, outcome-kind) pairs reachable over every scheduler
    choice, by exhaustive branching."""
    state = sc.state(init)
    if "initial" not in state.modifiers:
        raise BadInitialState(init)
    start = Configuration.make(init, {}, tuple(inputs))
    out: set = set()
    stack = [(start, 0)]
    seen = set()
    while stack:
        conf, depth = stack.pop()
        if (conf, depth) in seen:
            continue
        seen.add((conf, depth))
        if not conf.buffer or depth >= max_steps:
            out.add((conf.emitted, "quiescent"))
            continue
        head = conf.buffer[0]
        if head.name == TIMEOUT and not dict(conf.store).get(TIMER_FLAG, False):
            stack.append((replace(conf, buffer=conf.buffer[1:]), depth + 1))
            continue
        choices = enabled(conf, sc, match)
        if not choices:
            dropped = replace(conf, buffer=_drop_first(conf.buffer, head))
            out.add((dropped.emitted, "chaos"))
            continue
        for choice in choices:
            res = fire(conf, choice, sc)
            if isinstance(res, Step):
                stack.append((res.next, depth + 1))
            else:
                kind = type(res).__name__
                out.add((res.next.emitted, kind.lower()))
    return out


# -- message text format ----------------------------------------------------

def parse_message(text: str) -> Message:
    """Parse `name(arg, ...)` with integer, boolean, and [list] arguments."""
    from .parse import Parser

    p = Parser(text, allow_reserved=True)
    exception = False
    if p.at("kw", "throw"):
        p.next()
        exception = True
    name = p.ident()
    p.expect("(")
    args = []
    if not p.at(")"):
        args.append(_value(p))
        while p.at(","):
            p.next()
            args.append(_value(p))
    p.expect(")")
    p.expect("eof")
    return Message(name, tuple(args), exception)


def _value(p):
    from .parse import StatechartSyntaxError

    if p.at("int"):
        return p.next().value
    if p.at("-") and p.peek(1).kind == "int":
        p.next()
        return -p.next().value
    if p.at("kw", "true"):
        p.next()
        return True
    if p.at("kw", "false"):
        p.next()
        return False
    if p.at("["):
        p.next()
        items = []
        if not p.at("]"):
            items.append(_value(p))
            while p.at(","):
                p.next()
                items.append(_value(p))
        p.expect("]")
        return tuple(items)
    tok = p.peek()
    raise StatechartSyntaxError(tok.line, tok.col, "value")


def format_message(m: Message) -> str:
    from .printer import print_value

    throw = "throw " if m.exception else ""
    return f"{throw}{m.name}(" + ", ".join(print_value(a) for a in m.args) + ")"
