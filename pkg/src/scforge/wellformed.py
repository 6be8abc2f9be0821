"""Static well-formedness checks CC1..CC14 for statecharts.

Checks CC5, CC6, CC8, CC9, and CC11 need a class signature (attributes and
methods of the class the chart belongs to); without one they are reported as
skipped diagnostics rather than silently dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .actions import (
    Action,
    Assign,
    Call,
    Cond,
    PCons,
    PEmpty,
    Send,
    cond_vars,
    pattern_vars,
    stmt_read_vars,
    stmt_sends,
)
from .ast import (
    COMPLETION_ERROR,
    COMPLETION_STEREOS,
    PRIO_STEREOS,
    SCFull,
    SCSimp,
    triggers_full,
)


@dataclass(frozen=True)
class Violation:
    code: str  # "CC1" .. "CC14"
    subject: str  # path to the offending element
    message: str
    skipped: bool = False  # a check that could not run, not a finding

    def to_json(self) -> str:
        data = {"code": self.code, "subject": self.subject, "message": self.message}
        if self.skipped:
            data["skipped"] = True
        return json.dumps(data)


@dataclass(frozen=True)
class SignatureContext:
    """The class signature a chart is checked against."""

    class_name: str
    methods: frozenset[tuple[str, int]] = frozenset()  # (name, arity)
    attributes: frozenset[str] = frozenset()

    @classmethod
    def from_json(cls, text: str) -> "SignatureContext":
        data = json.loads(text)
        return cls(
            class_name=data["class"],
            methods=frozenset((m["name"], int(m["arity"])) for m in data.get("methods", [])),
            attributes=frozenset(data.get("attributes", [])),
        )


CTX_CODES = ("CC5", "CC6", "CC8", "CC9", "CC11")


def _sort(violations: list[Violation]) -> list[Violation]:
    return sorted(violations, key=lambda v: (int(v.code[2:]), v.subject, v.message))


def _closure(pairs: Iterable[tuple[str, str]]) -> set[tuple[str, str]]:
    out = set(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(out):
            for c, d in list(out):
                if b == c and (a, d) not in out:
                    out.add((a, d))
                    changed = True
    return out


def check_all(sc: SCFull, ctx: Optional[SignatureContext] = None) -> list[Violation]:
    out: list[Violation] = []
    names = {s.name for s in sc.states}
    chart = f"statechart {sc.diagram_name}"

    # CC1: Sub+ is irreflexive, and the relation only mentions declared states.
    for a, b in _closure(sc.sub):
        if a == b:
            out.append(Violation("CC1", f"state {a}", "state is a (transitive) substate of itself"))
    for a, b in sorted(sc.sub):
        for n in (a, b):
            if n not in names:
                out.append(
                    Violation("CC1", f"sub ({a}, {b})", f"substate relation references undeclared state {n}")
                )

    # CC2: exception triggers require an exception state.
    has_exception_state = any("exception" in s.sstereos for s in sc.states)
    if not has_exception_state:
        for t in sc.sorted_trans():
            if t.call.exception:
                out.append(
                    Violation(
                        "CC2",
                        f"transition {t.src}->{t.trg}",
                        "exception trigger but no state carries stereotype exception",
                    )
                )
        for s in sc.sorted_states():
            for it in s.internT:
                if it.call.exception:
                    out.append(
                        Violation(
                            "CC2",
                            f"state {s.name}",
                            "internal exception trigger but no state carries stereotype exception",
                        )
                    )

    # CC3: at most one priority and one completion stereotype; a completion
    # stereotype forbids error states (except completion:error, which itself
    # introduces one during transformation).
    if len(sc.stereos & PRIO_STEREOS) > 1:
        out.append(Violation("CC3", chart, "At most one priority stereotype"))
    completion = sc.stereos & COMPLETION_STEREOS
    if len(completion) > 1:
        out.append(Violation("CC3", chart, "At most one completion stereotype"))
    if completion and completion != {COMPLETION_ERROR}:
        for s in sc.sorted_states():
            if "error" in s.sstereos:
                out.append(
                    Violation(
                        "CC3",
                        f"state {s.name}",
                        "completion stereotype excludes error states",
                    )
                )

    # CC4: transition endpoints are declared.
    for t in sc.sorted_trans():
        for n in (t.src, t.trg):
            if n not in names:
                out.append(
                    Violation("CC4", f"transition {t.src}->{t.trg}", f"undeclared state {n}")
                )

    # CC5/CC6/CC8/CC9/CC11 need the class signature.
    if ctx is None:
        for code in CTX_CODES:
            out.append(
                Violation(code, chart, "skipped: no signature context supplied", skipped=True)
            )
    else:
        out.extend(_check_with_ctx(sc, ctx))

    # CC7: event parameters are pairwise different.
    def check_params(call: Call, subject: str):
        seen: set[str] = set()
        for v in pattern_vars(_args_pattern(call)):
            if v in seen:
                out.append(Violation("CC7", subject, f"duplicate event parameter {v}"))
            seen.add(v)

    for t in sc.sorted_trans():
        check_params(t.call, f"transition {t.src}->{t.trg}")
    for s in sc.sorted_states():
        for it in s.internT:
            check_params(it.call, f"state {s.name}")

    # CC10 (direct approximation): statements may not send a message whose
    # name is one of the chart's triggers.
    trig = triggers_full(sc)

    def check_sends(act: Optional[Action], subject: str):
        if act is None:
            return
        for send in stmt_sends(act.stmt):
            if send.name in trig:
                out.append(
                    Violation(
                        "CC10",
                        subject,
                        f"statement sends {send.name}, a trigger of this statechart "
                        "(direct-call approximation)",
                    )
                )

    for t in sc.sorted_trans():
        check_sends(t.act, f"transition {t.src}->{t.trg}")
    for s in sc.sorted_states():
        for act, what in ((s.entry, "entry"), (s.do, "do"), (s.exit, "exit")):
            check_sends(act, f"state {s.name} {what}")
        for it in s.internT:
            check_sends(it.act, f"state {s.name}")

    # CC12: state names pairwise distinct.
    by_name: dict[str, int] = {}
    for s in sc.states:
        by_name[s.name] = by_name.get(s.name, 0) + 1
    for n, count in sorted(by_name.items()):
        if count > 1:
            out.append(Violation("CC12", f"state {n}", f"{count} states share this name"))

    # CC13/CC14: constructor and finalize call life-cycle restrictions.
    ingoing = {n: [t for t in sc.trans if t.trg == n] for n in names}
    outgoing = {n: [t for t in sc.trans if t.src == n] for n in names}
    for s in sc.sorted_states():
        if "initial" in s.modifiers and any(
            t.call.name == sc.class_name for t in outgoing.get(s.name, [])
        ):
            if ingoing.get(s.name):
                out.append(
                    Violation(
                        "CC13",
                        f"state {s.name}",
                        "initial state with outgoing constructor call has ingoing transitions",
                    )
                )
        if "final" in s.modifiers and any(
            t.call.name == "finalize" for t in ingoing.get(s.name, [])
        ):
            if outgoing.get(s.name):
                out.append(
                    Violation(
                        "CC14",
                        f"state {s.name}",
                        "final state with ingoing finalize call has outgoing transitions",
                    )
                )

    return _sort(out)


def _args_pattern(call: Call):
    # a single pattern holding all arguments, in order
    p = PEmpty()
    for a in reversed(call.args):
        p = PCons(a, p)
    return p


def _check_with_ctx(sc: SCFull, ctx: SignatureContext) -> list[Violation]:
    out: list[Violation] = []
    chart = f"statechart {sc.diagram_name}"

    # CC5: the chart's class is the one described by the signature.
    if sc.class_name != ctx.class_name:
        out.append(
            Violation("CC5", chart, f"class {sc.class_name} not declared (signature is for {ctx.class_name})")
        )

    # CC6: triggers are declared methods (constructor calls use the class name).
    def check_event(call: Call, subject: str):
        key = (call.name, len(call.args))
        if call.name == sc.class_name or key in ctx.methods:
            return
        out.append(Violation("CC6", subject, f"event {call.name}/{len(call.args)} not declared"))

    for t in sc.sorted_trans():
        check_event(t.call, f"transition {t.src}->{t.trg}")
    for s in sc.sorted_states():
        for it in s.internT:
            check_event(it.call, f"state {s.name}")

    attrs = set(ctx.attributes)

    # CC8: invariants refer only to declared attributes.
    def check_inv(inv: Optional[Cond], subject: str):
        if inv is None:
            return
        for v in sorted(cond_vars(inv) - attrs):
            out.append(Violation("CC8", subject, f"invariant refers to undeclared {v}"))

    check_inv(sc.inv, chart)
    for s in sc.sorted_states():
        check_inv(s.inv, f"state {s.name}")

    # CC9: pre/postconditions may additionally use the event's arguments.
    def check_prepost(pre: Optional[Cond], act: Optional[Action], args: set[str], subject: str):
        for cond, what in ((pre, "precondition"), (act.post if act else None, "postcondition")):
            if cond is None:
                continue
            for v in sorted(cond_vars(cond) - attrs - args):
                out.append(Violation("CC9", subject, f"{what} refers to undeclared {v}"))

    for t in sc.sorted_trans():
        args = set(pattern_vars(_args_pattern(t.call)))
        check_prepost(t.pre, t.act, args, f"transition {t.src}->{t.trg}")
    for s in sc.sorted_states():
        for it in s.internT:
            args = set(pattern_vars(_args_pattern(it.call)))
            check_prepost(it.pre, it.act, args, f"state {s.name}")
        for act, what in ((s.entry, "entry"), (s.do, "do"), (s.exit, "exit")):
            check_prepost(None, act, set(), f"state {s.name} {what}")

    # CC11: statements read/write declared attributes and call declared methods.
    def check_stmt(act: Optional[Action], args: set[str], subject: str):
        if act is None:
            return
        for v in sorted(stmt_read_vars(act.stmt) - attrs - args):
            out.append(Violation("CC11", subject, f"statement reads undeclared {v}"))
        for prim in act.stmt:
            if isinstance(prim, Assign) and prim.var not in attrs:
                out.append(Violation("CC11", subject, f"statement assigns undeclared {prim.var}"))
            if isinstance(prim, Send) and (prim.name, len(prim.args)) not in ctx.methods:
                out.append(
                    Violation("CC11", subject, f"statement calls undeclared {prim.name}/{len(prim.args)}")
                )

    for t in sc.sorted_trans():
        args = set(pattern_vars(_args_pattern(t.call)))
        check_stmt(t.act, args, f"transition {t.src}->{t.trg}")
    for s in sc.sorted_states():
        for it in s.internT:
            args = set(pattern_vars(_args_pattern(it.call)))
            check_stmt(it.act, args, f"state {s.name}")
        for act, what in ((s.entry, "entry"), (s.do, "do"), (s.exit, "exit")):
            check_stmt(act, set(), f"state {s.name} {what}")

    return out


def check_simp(sc: SCSimp) -> list[Violation]:
    """The hierarchy-free subset: CC4, CC7, CC12."""
    out: list[Violation] = []
    names = {s.name for s in sc.states}
    for t in sc.sorted_transitions():
        for n in (t.src, t.trg):
            if n not in names:
                out.append(Violation("CC4", f"transition {t.src}->{t.trg}", f"undeclared state {n}"))
        seen: set[str] = set()
        for v in pattern_vars(_args_pattern(t.call)):
            if v in seen:
                out.append(
                    Violation("CC7", f"transition {t.src}->{t.trg}", f"duplicate event parameter {v}")
                )
            seen.add(v)
    by_name: dict[str, int] = {}
    for s in sc.states:
        by_name[s.name] = by_name.get(s.name, 0) + 1
    for n, count in sorted(by_name.items()):
        if count > 1:
            out.append(Violation("CC12", f"state {n}", f"{count} states share this name"))
    return _sort(out)
