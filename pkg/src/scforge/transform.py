"""Flattening of hierarchical statecharts via a system of rewrite rules.

Each rule binds elements of the chart, checks a precondition, and rewrites a
declared set of components (its "delta"), leaving everything else untouched.
`transform_fixpoint` applies rules until none changes the chart, yielding a
flat machine that `to_simplified` converts to the `SCSimp` form.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Callable, Optional

from .actions import (
    Action,
    Call,
    CMatch,
    CNot,
    Cond,
    CTrue,
    EBin,
    ECons,
    EList,
    ELit,
    EVar,
    Expr,
    PPlus,
    PVar,
    SetTimer,
    StopTimer,
    TIMEOUT,
    TRUE,
    Assign,
    Check,
    Send,
    action_post,
    action_stmt,
    call_expr_of,
    conj_opt,
    inp_name,
    seq_actions_all,
    CAnd,
    COr,
    CCmp,
    CVar,
    CFalse,
)
from .ast import (
    COMPLETION_CHAOS,
    COMPLETION_ERROR,
    COMPLETION_IGNORE,
    FullState,
    InternT,
    PRIO_INNER,
    PRIO_OUTER,
    PRIO_STEREOS,
    SCFull,
    SCSimp,
    SEQUENTIAL,
    SimpState,
    SimpTrans,
    Trans,
    trans_key,
)
from .printer import print_chart


class BindingStale(Exception):
    """The binding no longer matches the chart it is applied to."""


class NonTermination(Exception):
    """The rewrite loop exceeded its step budget."""


class NotSimplifiable(Exception):
    """Residual constructs prevent conversion to the flat form."""


class IllFormedInput(Exception):
    """The chart fails its static checks."""


RULE_NAMES = {
    1: "elimDo",
    2: "elimInternalT1",
    3: "elimInternalT2",
    4: "addInitTop",
    5: "addInitSub",
    6: "forwardToSub",
    7: "deleteInitSub",
    8: "addFinalTop",
    9: "addFinalSub",
    10: "backwardToSub",
    11: "backwardToSubPrioInner",
    12: "backwardToSubPrioOuter",
    13: "backwardToSubPrio",
    14: "elimPrio",
    15: "deleteFinalSub",
    16: "moveExitActions",
    17: "moveExitActionsSeq",
    18: "removeExitAction",
    19: "moveEntryActions",
    20: "moveEntryActionsSeq",
    21: "removeEntryAction",
    22: "moveInvariant",
    23: "removeHierarchy",
    24: "completionIgnore",
    25: "completionError",
    26: "completionException",
}
# Engine-only cleanup step: once the chart is flat, stereotypes that have no
# remaining effect (priorities, chaos completion, sequential conditions) are
# dropped so the final result carries no stereotypes.
DROP_STEREOS_STEP = 27
ENGINE_STEP_NAMES = dict(RULE_NAMES)
ENGINE_STEP_NAMES[DROP_STEREOS_STEP] = "dropStereotypes"

RULE_NUMBERS = {name: num for num, name in RULE_NAMES.items()}


@dataclass(frozen=True)
class Binding:
    rule: int
    items: tuple  # ordered (key, value) pairs

    def __getitem__(self, key):
        for k, v in self.items:
            if k == key:
                return v
        raise KeyError(key)

    def describe(self) -> str:
        def show(v):
            if isinstance(v, Trans):
                return f"{v.src}->{v.trg}:{v.call.name}"
            if isinstance(v, InternT):
                return f"internal:{v.call.name}"
            if isinstance(v, frozenset):
                return "{" + ", ".join(sorted(show(x) for x in v)) + "}"
            return str(v)

        return ", ".join(f"{k}={show(v)}" for k, v in self.items)


@dataclass(frozen=True)
class TraceEntry:
    rule: int
    name: str
    binding: str
    before_hash: str
    after_hash: str


def chart_hash(sc: SCFull) -> str:
    return hashlib.sha256(print_chart(sc).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Structural queries

def sub_plus(sc: SCFull) -> set[tuple[str, str]]:
    parent = dict(sc.sub)
    out: set[tuple[str, str]] = set()
    for child in parent:
        cur = child
        while cur in parent:
            cur = parent[cur]
            out.add((child, cur))
            if cur == child:  # defensive: cyclic sub
                break
    return out


def substates(s: FullState, sc: SCFull) -> set[FullState]:
    return {st for st in sc.states if (st.name, s.name) in sc.sub}


def superstates(s: FullState, sc: SCFull) -> set[FullState]:
    plus = sub_plus(sc)
    return {st for st in sc.states if (s.name, st.name) in plus}


def ingoing_t(s: FullState, sc: SCFull) -> set[Trans]:
    return {t for t in sc.trans if t.trg == s.name}


def outgoing_t(s: FullState, sc: SCFull) -> set[Trans]:
    return {t for t in sc.trans if t.src == s.name}


def _is_top(s: FullState, sc: SCFull) -> bool:
    return sc.parent_name(s.name) is None


def top_initials(sc: SCFull) -> set[FullState]:
    return {s for s in sc.states if "initial" in s.modifiers and _is_top(s, sc)}


def top_initial(sc: SCFull) -> bool:
    return bool(top_initials(sc))


def top_finals(sc: SCFull) -> set[FullState]:
    return {s for s in sc.states if "final" in s.modifiers and _is_top(s, sc)}


def top_final(sc: SCFull) -> bool:
    return bool(top_finals(sc))


def simple_state(s: FullState, sc: SCFull) -> bool:
    return not substates(s, sc) and s.do is None and not s.internT


def initial_irrelevant(s: FullState, sc: SCFull) -> bool:
    plus = sub_plus(sc)
    return (
        s not in top_initials(sc)
        and top_initial(sc)
        and all(not ingoing_t(sup, sc) for sup in superstates(s, sc) | {s})
        and not any((s.name, sup.name) in plus for sup in top_initials(sc))
    )


def final_irrelevant(s: FullState, sc: SCFull) -> bool:
    plus = sub_plus(sc)
    return (
        s not in top_finals(sc)
        and top_final(sc)
        and all(not outgoing_t(sup, sc) for sup in superstates(s, sc) | {s})
        and not any((s.name, sup.name) in plus for sup in top_finals(sc))
    )


def same_call(s: FullState, ts: set[Trans], sc: SCFull) -> bool:
    """All of ts share one call name, and no other outgoing transition of s
    uses that name (maximality)."""
    names = {t.call.name for t in ts}
    if len(names) != 1:
        return False
    name = names.pop()
    return not any(t.call.name == name for t in outgoing_t(s, sc) - ts)


def no_prio(t: Trans) -> bool:
    return t.prio is None


def no_prios(ts) -> bool:
    return all(no_prio(t) for t in ts)


def call_groups(s: FullState, sc: SCFull) -> dict[str, set[Trans]]:
    """Outgoing transitions of s grouped into maximal same-call classes."""
    groups: dict[str, set[Trans]] = {}
    for t in outgoing_t(s, sc):
        groups.setdefault(t.call.name, set()).add(t)
    return groups


def list_of_all_superstates(s: FullState, sc: SCFull) -> list[FullState]:
    out = []
    cur = sc.parent_name(s.name)
    while cur is not None:
        st = sc.state(cur)
        out.append(st)
        cur = sc.parent_name(cur)
    return out


def cs(s1: FullState, s2: FullState, sc: SCFull) -> set[FullState]:
    plus = sub_plus(sc)
    return {
        s
        for s in sc.states
        if (s1.name, s.name) in plus and (s2.name, s.name) in plus
    }


def lcs(s1: FullState, s2: FullState, sc: SCFull) -> Optional[FullState]:
    common = cs(s1, s2, sc)
    plus = sub_plus(sc)
    for s in common:
        if all(s == o or (s.name, o.name) in plus for o in common):
            return s
    return None


def chain_below(s: FullState, stop: Optional[FullState], sc: SCFull) -> list[FullState]:
    """Superstates of s from the parent upward, strictly below `stop`
    (all of them when stop is absent)."""
    out = []
    for st in list_of_all_superstates(s, sc):
        if stop is not None and st.name == stop.name:
            break
        out.append(st)
    return out


def flat_and_simplified(sc: SCFull) -> bool:
    for s in sc.states:
        if s.do is not None or s.entry is not None or s.exit is not None:
            return False
        if s.internT:
            return False
        if substates(s, sc):
            if ingoing_t(s, sc) or outgoing_t(s, sc) or s.inv is not None:
                return False
        if initial_irrelevant(s, sc) and "initial" in s.modifiers:
            return False
        if final_irrelevant(s, sc) and "final" in s.modifiers:
            return False
    return True


# ---------------------------------------------------------------------------
# Call normalization: replacing pattern arguments by positional input
# variables (inp1, inp2, ...) with matching conditions in the precondition.

def _subst_map(call: Call) -> dict[str, Expr]:
    out: dict[str, Expr] = {}
    for i, p in enumerate(call.args):
        if isinstance(p, PVar):
            out[p.name] = EVar(inp_name(i + 1))
        elif isinstance(p, PPlus):
            out[p.var] = EBin("-", EVar(inp_name(i + 1)), ELit(p.k))
    return out


def _subst_expr(e: Expr, m: dict[str, Expr]) -> Expr:
    if isinstance(e, EVar):
        return m.get(e.name, e)
    if isinstance(e, EBin):
        return EBin(e.op, _subst_expr(e.left, m), _subst_expr(e.right, m))
    if isinstance(e, ECons):
        return ECons(_subst_expr(e.head, m), _subst_expr(e.tail, m))
    if isinstance(e, EList):
        return EList(tuple(_subst_expr(x, m) for x in e.items))
    return e


def _subst_cond(c: Cond, m: dict[str, Expr]) -> Cond:
    if isinstance(c, CVar):
        r = m.get(c.name)
        return CVar(r.name) if isinstance(r, EVar) else c
    if isinstance(c, CNot):
        return CNot(_subst_cond(c.operand, m))
    if isinstance(c, CAnd):
        return CAnd(_subst_cond(c.left, m), _subst_cond(c.right, m))
    if isinstance(c, COr):
        return COr(_subst_cond(c.left, m), _subst_cond(c.right, m))
    if isinstance(c, CCmp):
        return CCmp(c.op, _subst_expr(c.left, m), _subst_expr(c.right, m))
    if isinstance(c, CMatch):
        r = m.get(c.var)
        return CMatch(r.name, c.pattern) if isinstance(r, EVar) else c
    return c


def _subst_stmt(s, m: dict[str, Expr]):
    out = []
    for prim in s:
        if isinstance(prim, Assign):
            out.append(Assign(prim.var, _subst_expr(prim.expr, m)))
        elif isinstance(prim, Send):
            out.append(Send(prim.name, tuple(_subst_expr(a, m) for a in prim.args), prim.exception))
        elif isinstance(prim, Check):
            out.append(Check(_subst_cond(prim.cond, m)))
        else:
            out.append(prim)
    return tuple(out)


def _subst_action(a: Optional[Action], m: dict[str, Expr]) -> Optional[Action]:
    if a is None:
        return None
    return Action(
        _subst_stmt(a.stmt, m),
        None if a.post is None else _subst_cond(a.post, m),
    )


def _match_cond(call: Call) -> Optional[Cond]:
    """Matching conditions for the non-variable argument patterns, or absent
    when every argument is a plain variable."""
    conjs = [
        CMatch(inp_name(i + 1), p)
        for i, p in enumerate(call.args)
        if not isinstance(p, PVar)
    ]
    return conj_opt(*conjs)


def _fire_cond(t: Trans) -> Cond:
    """pre && match for a transition, under its own input renaming."""
    m = _subst_map(t.call)
    pre = None if t.pre is None else _subst_cond(t.pre, m)
    c = conj_opt(pre, _match_cond(t.call))
    return c if c is not None else TRUE


def _neg_precond(ts) -> Optional[Cond]:
    """&& over ts of !(pre && match), absent for the empty set."""
    return conj_opt(*(CNot(_fire_cond(t)) for t in sorted(ts, key=trans_key)))


def normalize_trans(t: Trans, extra_pre: Optional[Cond], src: Optional[str] = None,
                    trg: Optional[str] = None, drop_prio: bool = False) -> Trans:
    """Rebuild t with its call's patterns replaced by input variables; the
    pattern constraints and `extra_pre` join the precondition."""
    m = _subst_map(t.call)
    pre = conj_opt(
        None if t.pre is None else _subst_cond(t.pre, m),
        _match_cond(t.call),
        extra_pre,
    )
    return Trans(
        None if drop_prio else t.prio,
        src if src is not None else t.src,
        pre,
        call_expr_of(t.call),
        _subst_action(t.act, m),
        trg if trg is not None else t.trg,
    )


# ---------------------------------------------------------------------------
# Rule bindings and application

def _sorted_states(sc: SCFull) -> list[FullState]:
    return sc.sorted_states()


def _intern_key(it: InternT):
    return (it.call.name, len(it.call.args), repr(it.pre), repr(it.act))


def _b(rule: int, *items) -> Binding:
    return Binding(rule, tuple(items))


def _depth(name: str, sc: SCFull) -> int:
    d = 0
    cur = sc.parent_name(name)
    while cur is not None:
        d += 1
        cur = sc.parent_name(cur)
    return d


def find_bindings(rule: int, sc: SCFull) -> list[Binding]:
    out: list[Binding] = []
    states = _sorted_states(sc)

    if rule == 1:  # elimDo
        for s in states:
            if s.do is not None:
                out.append(_b(rule, ("s", s.name)))

    elif rule == 2:  # elimInternalT1
        for s in states:
            if substates(s, sc):
                for it in sorted(s.internT, key=_intern_key):
                    out.append(_b(rule, ("s", s.name), ("inT", it)))

    elif rule == 3:  # elimInternalT2
        for s in states:
            if not substates(s, sc):
                for it in sorted(s.internT, key=_intern_key):
                    out.append(_b(rule, ("s", s.name), ("inT", it)))

    elif rule in (4, 8):  # addInitTop / addFinalTop
        mod = "initial" if rule == 4 else "final"
        tops = [s for s in states if _is_top(s, sc)]
        if tops and all(mod not in s.modifiers for s in tops):
            out.append(_b(rule))

    elif rule in (5, 9):  # addInitSub / addFinalSub
        mod = "initial" if rule == 5 else "final"
        for s in states:
            subs = substates(s, sc)
            if not subs or any(mod in st.modifiers for st in subs):
                continue
            relevant = (
                mod in s.modifiers
                or (ingoing_t(s, sc) if rule == 5 else outgoing_t(s, sc))
            )
            if relevant:
                out.append(_b(rule, ("s", s.name)))

    elif rule == 6:  # forwardToSub
        for s in states:
            if any("initial" in st.modifiers for st in substates(s, sc)):
                for t in sorted(ingoing_t(s, sc), key=trans_key):
                    out.append(_b(rule, ("s", s.name), ("t", t)))

    elif rule in (7, 15):  # deleteInitSub / deleteFinalSub
        mod = "initial" if rule == 7 else "final"
        irrelevant = initial_irrelevant if rule == 7 else final_irrelevant
        cands = [s for s in states if mod in s.modifiers and irrelevant(s, sc)]
        # ancestors first, so a deleted modifier cannot be re-added below
        for s in sorted(cands, key=lambda s: (_depth(s.name, sc), s.name)):
            out.append(_b(rule, ("s", s.name)))

    elif rule == 10:  # backwardToSub
        if not (sc.stereos & PRIO_STEREOS):
            for s in states:
                if any("final" in st.modifiers for st in substates(s, sc)):
                    for t in sorted(outgoing_t(s, sc), key=trans_key):
                        out.append(_b(rule, ("s", s.name), ("t", t)))

    elif rule in (11, 12):  # backwardToSubPrioInner / -Outer
        stereo = PRIO_INNER if rule == 11 else PRIO_OUTER
        if stereo in sc.stereos:
            for s in states:
                if not any("final" in st.modifiers for st in substates(s, sc)):
                    continue
                for name, ts in sorted(call_groups(s, sc).items()):
                    if ts and no_prios(ts):
                        out.append(_b(rule, ("s", s.name), ("ts", frozenset(ts))))

    elif rule == 13:  # backwardToSubPrio
        for s in states:
            if any("final" in st.modifiers for st in substates(s, sc)):
                for t in sorted(outgoing_t(s, sc), key=trans_key):
                    if t.prio is not None:
                        out.append(_b(rule, ("s", s.name), ("t", t)))

    elif rule == 14:  # elimPrio
        for s in states:
            if not simple_state(s, sc):
                continue
            if any(outgoing_t(sup, sc) for sup in superstates(s, sc)):
                continue
            for name, ts in sorted(call_groups(s, sc).items()):
                if ts and not no_prios(ts):
                    out.append(_b(rule, ("s", s.name), ("ts", frozenset(ts))))

    elif rule in (16, 17):  # moveExitActions / -Seq
        seq = SEQUENTIAL in sc.stereos
        if (rule == 17) == seq:
            for s in states:
                # final states are allowed: the exit action only runs when the
                # state is left through a transition, which is exactly where the
                # action moves to (termination runs it in neither version)
                if (
                    s.exit is not None
                    and simple_state(s, sc)
                    and all(not outgoing_t(sup, sc) for sup in superstates(s, sc))
                ):
                    out.append(_b(rule, ("s", s.name)))

    elif rule == 18:  # removeExitAction
        for s in states:
            if (
                s.exit is not None
                and not outgoing_t(s, sc)
                and all(not outgoing_t(sup, sc) for sup in superstates(s, sc))
            ):
                out.append(_b(rule, ("s", s.name)))

    elif rule in (19, 20):  # moveEntryActions / -Seq
        seq = SEQUENTIAL in sc.stereos
        if (rule == 20) == seq:
            for s in states:
                if (
                    s.entry is not None
                    and "initial" not in s.modifiers
                    and simple_state(s, sc)
                    and all(not ingoing_t(sup, sc) for sup in superstates(s, sc))
                ):
                    out.append(_b(rule, ("s", s.name)))

    elif rule == 21:  # removeEntryAction
        for s in states:
            if (
                s.entry is not None
                and not ingoing_t(s, sc)
                and all(not ingoing_t(sup, sc) for sup in superstates(s, sc))
            ):
                out.append(_b(rule, ("s", s.name)))

    elif rule == 22:  # moveInvariant
        for s in states:
            if (
                s.inv is not None
                and substates(s, sc)
                and s.do is None
                and not s.internT
            ):
                out.append(_b(rule, ("s", s.name)))

    elif rule == 23:  # removeHierarchy
        if sc.sub and flat_and_simplified(sc):
            out.append(_b(rule))

    elif rule == 24:  # completionIgnore
        if COMPLETION_IGNORE in sc.stereos and not sc.sub and flat_and_simplified(sc):
            out.append(_b(rule))

    elif rule == 25:  # completionError
        if COMPLETION_ERROR in sc.stereos and not sc.sub and flat_and_simplified(sc):
            errs = [s for s in states if "error" in s.sstereos]
            if errs:
                out.append(_b(rule, ("err", errs[0].name)))
            else:
                # the rule introduces the error state itself
                name = "Error"
                while sc.state_opt(name) is not None:
                    name += "$"
                out.append(_b(rule, ("err", name)))

    elif rule == 26:  # completionException
        if not sc.sub and flat_and_simplified(sc):
            excs = [s for s in states if "exception" in s.sstereos]
            if excs and any(t.call.exception for t in sc.trans):
                out.append(_b(rule, ("exc", excs[0].name)))

    elif rule == DROP_STEREOS_STEP:
        droppable = sc.stereos & {PRIO_INNER, PRIO_OUTER, COMPLETION_CHAOS, SEQUENTIAL}
        if droppable and not sc.sub and flat_and_simplified(sc):
            out.append(_b(rule))

    return out


def apply_rule(rule: int, sc: SCFull, b: Binding) -> SCFull:
    if b not in find_bindings(rule, sc):
        raise BindingStale(f"rule {rule} ({ENGINE_STEP_NAMES[rule]}): {b.describe()}")
    return _apply(rule, sc, b)


def _with_timer(a: Optional[Action], prim) -> Action:
    return Action(action_stmt(a) + (prim,), action_post(a))


def _apply(rule: int, sc: SCFull, b: Binding) -> SCFull:
    if rule == 1:  # elimDo
        s = sc.state(b["s"])
        new_it = InternT(
            TRUE,
            Call(TIMEOUT, ()),
            Action(s.do.stmt + (SetTimer(),), s.do.post),
        )
        return sc.replace_state(
            s,
            s.with_(
                internT=s.internT | {new_it},
                entry=_with_timer(s.entry, SetTimer()),
                exit=_with_timer(s.exit, StopTimer()),
                do=None,
            ),
        )

    if rule == 2:  # elimInternalT1
        s, it = sc.state(b["s"]), b["inT"]
        added = {
            Trans(None, st.name, it.pre, it.call, it.act, st.name)
            for st in substates(s, sc)
        }
        sc = sc.replace_state(s, s.with_(internT=s.internT - {it}))
        return sc.with_(trans=sc.trans | added)

    if rule == 3:  # elimInternalT2
        s, it = sc.state(b["s"]), b["inT"]
        k = 0
        while sc.state_opt(f"{s.name}$inner{k}") is not None:
            k += 1
        fresh = FullState(
            modifiers=frozenset(["initial", "final"]), name=f"{s.name}$inner{k}"
        )
        sc = sc.replace_state(s, s.with_(internT=s.internT - {it}))
        return sc.with_(
            states=sc.states | {fresh},
            sub=sc.sub | {(fresh.name, s.name)},
            trans=sc.trans | {Trans(None, fresh.name, it.pre, it.call, it.act, fresh.name)},
        )

    if rule in (4, 8):  # addInitTop / addFinalTop
        mod = "initial" if rule == 4 else "final"
        states = {
            s.with_(modifiers=s.modifiers | {mod}) if _is_top(s, sc) else s
            for s in sc.states
        }
        return sc.with_(states=frozenset(states))

    if rule in (5, 9):  # addInitSub / addFinalSub
        mod = "initial" if rule == 5 else "final"
        s = sc.state(b["s"])
        subs = substates(s, sc)
        states = {
            st.with_(modifiers=st.modifiers | {mod}) if st in subs else st
            for st in sc.states
        }
        return sc.with_(states=frozenset(states))

    if rule == 6:  # forwardToSub
        s, t = sc.state(b["s"]), b["t"]
        subs = [st for st in substates(s, sc) if "initial" in st.modifiers]
        added = {
            Trans(t.prio, t.src, t.pre, t.call, t.act, st.name) for st in subs
        }
        return sc.with_(trans=(sc.trans - {t}) | added)

    if rule in (7, 15):  # deleteInitSub / deleteFinalSub
        mod = "initial" if rule == 7 else "final"
        s = sc.state(b["s"])
        return sc.replace_state(s, s.with_(modifiers=s.modifiers - {mod}))

    if rule in (10, 13):  # backwardToSub / backwardToSubPrio
        s, t = sc.state(b["s"]), b["t"]
        subs = [st for st in substates(s, sc) if "final" in st.modifiers]
        added = {
            Trans(t.prio, st.name, t.pre, t.call, t.act, t.trg) for st in subs
        }
        return sc.with_(trans=(sc.trans - {t}) | added)

    if rule == 11:  # backwardToSubPrioInner
        s, ts = sc.state(b["s"]), b["ts"]
        name = next(iter(ts)).call.name
        subs = sorted(
            (st for st in substates(s, sc) if "final" in st.modifiers),
            key=lambda st: st.name,
        )
        added: set[Trans] = set()
        for st in subs:
            c_trans = {
                t
                for t in outgoing_t(st, sc)
                if t.call.name == name and no_prio(t)
            }
            pre_i = _neg_precond(c_trans)
            for t in sorted(ts, key=trans_key):
                added.add(normalize_trans(t, pre_i, src=st.name))
        return sc.with_(trans=(sc.trans - ts) | added)

    if rule == 12:  # backwardToSubPrioOuter
        s, ts = sc.state(b["s"]), b["ts"]
        name = next(iter(ts)).call.name
        subs = sorted(
            (st for st in substates(s, sc) if "final" in st.modifiers),
            key=lambda st: st.name,
        )
        pre_outer = _neg_precond(ts)
        added: set[Trans] = set()
        removed: set[Trans] = set(ts)
        for st in subs:
            c_trans = {
                t
                for t in outgoing_t(st, sc)
                if t.call.name == name and no_prio(t)
            }
            removed |= c_trans
            # the outer transitions move down unchanged
            for t in sorted(ts, key=trans_key):
                added.add(Trans(t.prio, st.name, t.pre, t.call, t.act, t.trg))
            # the inner ones only fire if no outer one does
            for t in sorted(c_trans, key=trans_key):
                added.add(normalize_trans(t, pre_outer))
        return sc.with_(trans=(sc.trans - removed) | added)

    if rule == 14:  # elimPrio
        s, ts = sc.state(b["s"]), b["ts"]

        def prio(t: Trans) -> int:
            return t.prio if t.prio is not None else 0

        added: set[Trans] = set()
        for t in sorted(ts, key=trans_key):
            higher = {t2 for t2 in ts if prio(t2) > prio(t)}
            added.add(normalize_trans(t, _neg_precond(higher), drop_prio=True))
        return sc.with_(trans=(sc.trans - ts) | added)

    if rule in (16, 17):  # moveExitActions / -Seq
        s = sc.state(b["s"])
        outgoing = sorted(outgoing_t(s, sc), key=trans_key)
        new_trans = set(sc.trans) - set(outgoing)
        for t in outgoing:
            chain = [
                st
                for st in chain_below(s, lcs(s, sc.state(t.trg), sc), sc)
                if st.exit is not None
            ]
            acts = [s.exit] + [st.exit for st in chain]
            if rule == 16:
                stmt = tuple(x for a in acts for x in a.stmt) + action_stmt(t.act)
                post = conj_opt(*(a.post for a in acts), action_post(t.act))
                new_act = Action(stmt, post)
            else:
                seq = seq_actions_all(acts + [t.act if t.act else Action()])
                new_act = Action(seq.stmt, action_post(t.act))
            new_trans.add(Trans(t.prio, t.src, t.pre, t.call, new_act, t.trg))
        sc = sc.with_(trans=frozenset(new_trans))
        s = sc.state(b["s"])
        return sc.replace_state(s, s.with_(exit=None))

    if rule in (18, 21):  # removeExitAction / removeEntryAction
        s = sc.state(b["s"])
        return sc.replace_state(
            s, s.with_(exit=None) if rule == 18 else s.with_(entry=None)
        )

    if rule in (19, 20):  # moveEntryActions / -Seq
        s = sc.state(b["s"])
        ingoing = sorted(ingoing_t(s, sc), key=trans_key)
        new_trans = set(sc.trans) - set(ingoing)
        for t in ingoing:
            chain = [
                st
                for st in chain_below(s, lcs(s, sc.state(t.src), sc), sc)
                if st.entry is not None
            ]
            # entered outermost first: reverse of the upward chain, then s
            acts = [st.entry for st in reversed(chain)] + [s.entry]
            if rule == 19:
                stmt = action_stmt(t.act) + tuple(x for a in acts for x in a.stmt)
                post = conj_opt(action_post(t.act), *(a.post for a in acts))
                new_act = Action(stmt, post)
            else:
                seq = seq_actions_all([t.act if t.act else Action()] + acts)
                new_act = Action(seq.stmt, conj_opt(action_post(t.act), s.entry.post))
            new_trans.add(Trans(t.prio, t.src, t.pre, t.call, new_act, t.trg))
        sc = sc.with_(trans=frozenset(new_trans))
        s = sc.state(b["s"])
        return sc.replace_state(s, s.with_(entry=None))

    if rule == 22:  # moveInvariant
        s = sc.state(b["s"])
        subs = substates(s, sc)
        states = set(sc.states) - subs - {s}
        for st in subs:
            states.add(st.with_(inv=conj_opt(s.inv, st.inv)))
        states.add(s.with_(inv=None))
        return sc.with_(states=frozenset(states))

    if rule == 23:  # removeHierarchy
        supers = {s for s in sc.states if substates(s, sc)}
        return sc.with_(states=sc.states - supers, sub=frozenset())

    if rule in (24, 25, 26):
        return _apply_completion(rule, sc, b)

    if rule == DROP_STEREOS_STEP:
        droppable = {PRIO_INNER, PRIO_OUTER, COMPLETION_CHAOS, SEQUENTIAL}
        return sc.with_(stereos=sc.stereos - droppable)

    raise ValueError(f"unknown rule {rule}")


def _apply_completion(rule: int, sc: SCFull, b: Binding) -> SCFull:
    exception_rule = rule == 26
    if rule == 24:
        target_of = lambda s: s.name  # self loops
    elif rule == 25:
        err = b["err"]
        if sc.state_opt(err) is None:
            sc = sc.with_(
                states=sc.states
                | {FullState(modifiers=frozenset(), name=err, sstereos=frozenset(["error"]))}
            )
        target_of = lambda s: err
    else:
        exc = b["exc"]
        target_of = lambda s: exc

    # one representative call per trigger name, over the relevant trigger kind
    all_calls: dict[str, Call] = {}
    for t in sorted(sc.trans, key=trans_key):
        if t.call.exception == exception_rule and t.call.name not in all_calls:
            all_calls[t.call.name] = call_expr_of(t.call)

    added: set[Trans] = set()
    for s in sc.sorted_states():
        groups = call_groups(s, sc)
        outgoing_names = set(groups)
        for name in sorted(set(all_calls) - outgoing_names):
            added.add(
                Trans(None, s.name, None, all_calls[name], None, target_of(s))
            )
        for name, ts in sorted(groups.items()):
            rep = next(iter(ts)).call
            if rep.exception != exception_rule:
                continue
            pre = _neg_precond(ts)
            added.add(
                Trans(None, s.name, pre, call_expr_of(rep), None, target_of(s))
            )
    out = sc.with_(trans=sc.trans | added)
    if rule == 24:
        out = out.with_(stereos=out.stereos - {COMPLETION_IGNORE})
    elif rule == 25:
        out = out.with_(stereos=out.stereos - {COMPLETION_ERROR})
    return out


# ---------------------------------------------------------------------------
# Fixpoint engine

def transform_fixpoint(
    sc: SCFull,
    strategy: str = "paper",
    max_steps: int = 10000,
    on_step: Optional[Callable[[int, SCFull], None]] = None,
) -> tuple[SCFull, list[TraceEntry]]:
    """Apply rules until none changes the chart.

    strategy: "paper" (lowest rule number first, first binding) or
    "random:<seed>" (uniformly random applicable rule and binding each step).
    The exception-completion rule runs at most once; applications that would
    leave the chart unchanged are skipped.
    """
    rng: Optional[random.Random] = None
    if strategy.startswith("random:"):
        rng = random.Random(int(strategy.split(":", 1)[1]))
    elif strategy != "paper":
        raise ValueError(f"unknown strategy {strategy!r}")

    trace: list[TraceEntry] = []
    steps = 0
    done_exception = False
    while True:
        candidates: list[tuple[int, Binding]] = []
        for rule in ENGINE_STEP_NAMES:
            if rule == 26 and done_exception:
                continue
            for b in find_bindings(rule, sc):
                candidates.append((rule, b))
        if rng is not None:
            rng.shuffle(candidates)

        progressed = False
        for rule, b in candidates:
            new = _apply(rule, sc, b)
            if new == sc:
                if rule == 26:
                    done_exception = True
                continue
            steps += 1
            if steps > max_steps:
                raise NonTermination(f"no fixpoint within {max_steps} steps")
            trace.append(
                TraceEntry(
                    rule,
                    ENGINE_STEP_NAMES[rule],
                    b.describe(),
                    chart_hash(sc),
                    chart_hash(new),
                )
            )
            if rule == 26:
                done_exception = True
            sc = new
            if on_step is not None:
                on_step(steps, sc)
            progressed = True
            break
        if not progressed:
            return sc, trace


# ---------------------------------------------------------------------------
# Conversion to the flat form

def to_simplified(sc: SCFull) -> SCSimp:
    residual = []
    if sc.sub:
        residual.append("substate relation")
    for s in sc.sorted_states():
        if s.do is not None:
            residual.append(f"do action on {s.name}")
        if s.entry is not None:
            residual.append(f"entry action on {s.name}")
        if s.exit is not None:
            residual.append(f"exit action on {s.name}")
        if s.internT:
            residual.append(f"internal transitions on {s.name}")
    if sc.stereos:
        residual.append("stereotypes " + ", ".join(sorted(sc.stereos)))
    if not flat_and_simplified(sc):
        residual.append("superfluous modifiers or hierarchy information")
    if residual:
        raise NotSimplifiable("; ".join(residual))
    return SCSimp(
        diagram_name=sc.diagram_name,
        class_name=sc.class_name,
        inv=sc.inv if sc.inv is not None else TRUE,
        states=frozenset(
            SimpState(s.modifiers, s.name, s.inv if s.inv is not None else TRUE)
            for s in sc.states
        ),
        transitions=frozenset(
            SimpTrans(
                t.src,
                t.pre if t.pre is not None else TRUE,
                t.call,
                t.act if t.act is not None else Action(),
                t.trg,
            )
            for t in sc.trans
        ),
    )
