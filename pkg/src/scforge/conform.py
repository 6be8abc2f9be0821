"""Conformance of finite system-model fragments against statecharts.

A fragment is an explicit finite graph of object-group states: per object a
variable store, thread stacks of in-processing messages, and an event buffer;
edges carry the messages output during that step. Checking asks whether the
fragment is a possible realization of a chart: invariants hold on projected
nodes, initial states project into initial nodes, run-to-completion holds,
and every enabled chart transition is implementable as a bounded chain of
microsteps. A second family of checks relates term-level macrosteps to
fragment runs (index conditions on consumption and emission).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .actions import (
    Message,
    UnboundVariable,
    eval_cond,
    exec_stmt,
    match_call,
)
from .ast import SCSimp, triggers_simp
from .flatinterp import format_message, parse_message
from .vdb import And, Basic, Or, Sym, Term


class UnknownObject(Exception):
    pass


class IncompleteProjection(Exception):
    pass


# -- fragment data model ----------------------------------------------------

def _freeze_value(v):
    if isinstance(v, list):
        return tuple(_freeze_value(x) for x in v)
    return v


@dataclass(frozen=True)
class ObjectState:
    vars: tuple  # sorted (name, value) pairs
    threads: tuple  # sorted (threadId, stack of Message, bottom first) pairs
    buffer: tuple  # Messages

    @classmethod
    def make(cls, vars=None, threads=None, buffer=()):
        return cls(
            tuple(sorted((vars or {}).items())),
            tuple(sorted((threads or {}).items())),
            tuple(buffer),
        )

    def vars_dict(self) -> dict:
        return dict(self.vars)

    def stack_tops(self):
        return [stack[-1] for _, stack in self.threads if stack]


@dataclass(frozen=True)
class OGSNode:
    id: str
    objects: tuple  # sorted (oid, ObjectState) pairs

    @classmethod
    def make(cls, id, objects):
        return cls(id, tuple(sorted(objects.items())))

    def object(self, oid: str) -> ObjectState:
        for o, st in self.objects:
            if o == oid:
                return st
        raise UnknownObject(oid)


@dataclass(frozen=True)
class SystemFragment:
    nodes: tuple  # sorted (id, OGSNode) pairs
    edges: tuple  # (from, to, Messages) triples
    init: frozenset
    main: str

    @classmethod
    def make(cls, nodes, edges, init, main):
        by_id = {n.id: n for n in nodes}
        for frm, to, _ in edges:
            for end in (frm, to):
                if end not in by_id:
                    raise ValueError(f"edge endpoint {end!r} is not a node")
        for i in init:
            if i not in by_id:
                raise ValueError(f"initial id {i!r} is not a node")
        return cls(tuple(sorted(by_id.items())), tuple(edges), frozenset(init), main)

    @classmethod
    def from_json(cls, text: str) -> "SystemFragment":
        data = json.loads(text)
        nodes = []
        for nd in data["nodes"]:
            objects = {}
            for oid, body in nd.get("objects", {}).items():
                objects[oid] = ObjectState.make(
                    vars={k: _freeze_value(v) for k, v in body.get("vars", {}).items()},
                    threads={
                        tid: tuple(parse_message(m) for m in stack)
                        for tid, stack in body.get("threads", {}).items()
                    },
                    buffer=tuple(parse_message(m) for m in body.get("buffer", [])),
                )
            nodes.append(OGSNode.make(nd["id"], objects))
        edges = tuple(
            (e["from"], e["to"], tuple(parse_message(m) for m in e.get("M", [])))
            for e in data.get("edges", [])
        )
        return cls.make(nodes, edges, data.get("init", []), data["main"])

    def node(self, id: str) -> OGSNode:
        for i, n in self.nodes:
            if i == id:
                return n
        raise KeyError(id)

    def node_ids(self):
        return [i for i, _ in self.nodes]

    def successors(self, id: str):
        return [(to, m) for frm, to, m in self.edges if frm == id]


def load_projection(text: str) -> dict:
    data = json.loads(text)
    return {name: frozenset(ids) for name, ids in data.items()}


# -- basic queries ----------------------------------------------------------

def reachable_n(frag: SystemFragment, frm: str, n: int) -> frozenset:
    """Ids reachable from frm in at most n edges."""
    frontier = {frm}
    seen = {frm}
    for _ in range(n):
        frontier = {
            to for i in frontier for to, _ in frag.successors(i) if to not in seen
        }
        if not frontier:
            break
        seen |= frontier
    return frozenset(seen)


def proc_check(node: OGSNode, oid: str, m: Message) -> bool:
    """True iff m is on top of some thread stack of the object."""
    return any(top == m for top in node.object(oid).stack_tops())


def _holds(cond, store: dict, v: dict) -> bool:
    if cond is None:
        return True
    try:
        return eval_cond(cond, store, v)
    except UnboundVariable:
        return True  # conditions over absent variables are vacuous


def _enabled_guard(cond, store: dict, v: dict) -> bool:
    if cond is None:
        return True
    try:
        return eval_cond(cond, store, v)
    except UnboundVariable:
        return False


# -- chart-level conformance (five numbered conditions) ---------------------

def check_system_conformance(
    sc: SCSimp,
    frag: SystemFragment,
    proj: dict,
    bound: Optional[int] = None,
) -> list:
    """One report entry per condition: {condition, pass, witnesses}.

    1. the chart invariant holds at every projected node;
    2. projections of initial states are initial fragment nodes;
    3. each state invariant holds on that state's projection;
    4. run-to-completion: no node processes two distinct trigger messages;
    5. every enabled transition at a projected source node is realized by a
       bounded microstep chain ending in the target's projection, with the
       statement's store effect and exactly its emissions in between.
    """
    missing = [s.name for s in sc.sorted_states() if s.name not in proj]
    if missing:
        raise IncompleteProjection(", ".join(missing))
    known = set(frag.node_ids())
    for name, ids in proj.items():
        stray = ids - known
        if stray:
            raise IncompleteProjection(
                f"{name} projects to unknown nodes {sorted(stray)}"
            )
    if bound is None:
        bound = len(frag.nodes)

    report = []

    # 1: chart invariant on the union of all projections
    witnesses = []
    for nid in sorted(set().union(*proj.values()) if proj else set()):
        store = frag.node(nid).object(frag.main).vars_dict()
        if not _holds(sc.inv, store, {}):
            witnesses.append(f"chart invariant fails at {nid}")
    report.append({"condition": 1, "pass": not witnesses, "witnesses": witnesses})

    # 2: initial states project into initial fragment nodes
    witnesses = []
    for s in sc.sorted_states():
        if "initial" in s.modifiers:
            for nid in sorted(proj[s.name] - frag.init):
                witnesses.append(f"{nid} in projection of initial {s.name} but not initial")
    report.append({"condition": 2, "pass": not witnesses, "witnesses": witnesses})

    # 3: state invariants on their projections
    witnesses = []
    for s in sc.sorted_states():
        for nid in sorted(proj[s.name]):
            store = frag.node(nid).object(frag.main).vars_dict()
            if not _holds(s.inv, store, {}):
                witnesses.append(f"invariant of {s.name} fails at {nid}")
    report.append({"condition": 3, "pass": not witnesses, "witnesses": witnesses})

    # 4: run-to-completion — at most one trigger message in processing
    trig = triggers_simp(sc)
    witnesses = []
    for nid in frag.node_ids():
        tops = [
            m for m in frag.node(nid).object(frag.main).stack_tops()
            if m.name in trig
        ]
        distinct = {m for m in tops}
        if len(distinct) > 1:
            names = ", ".join(sorted(format_message(m) for m in distinct))
            witnesses.append(f"{nid} processes {names} simultaneously")
    report.append({"condition": 4, "pass": not witnesses, "witnesses": witnesses})

    # 5: enabled transitions are realized by microstep chains
    witnesses = []
    for t in sc.sorted_transitions():
        for nid in sorted(proj[t.src]):
            node = frag.node(nid)
            store = node.object(frag.main).vars_dict()
            for m in node.object(frag.main).buffer:
                v = match_call(t.call, m)
                if v is None or not _enabled_guard(t.pre, store, v):
                    continue
                if not _transition_realized(sc, frag, proj, t, nid, m, v, bound):
                    witnesses.append(
                        f"transition {t.src}->{t.trg} on {format_message(m)} "
                        f"enabled at {nid} but not realized within {bound} steps"
                    )
    report.append({"condition": 5, "pass": not witnesses, "witnesses": witnesses})
    return report


def conformance_passed(report: list) -> bool:
    return all(entry["pass"] for entry in report)


def _transition_realized(sc, frag, proj, t, start, m, v, bound) -> bool:
    store = frag.node(start).object(frag.main).vars_dict()
    new_store, emitted = exec_stmt(t.act.stmt, store, v)
    delta = {
        k: val for k, val in new_store.items()
        if k not in store or store[k] != val
    }
    sent_names = {e.name for e in emitted}

    # depth-first search over microstep paths of length <= bound
    def paths():
        stack = [((start,), ((),))]
        while stack:
            ids, labels = stack.pop()
            yield ids, labels
            if len(ids) <= bound:
                for to, mlabel in frag.successors(ids[-1]):
                    stack.append((ids + (to,), labels + (mlabel,)))

    for ids, labels in paths():
        n3 = len(ids) - 1
        end = frag.node(ids[n3])
        if ids[n3] not in proj[t.trg]:
            continue
        end_obj = end.object(frag.main)
        if m in end_obj.buffer:
            continue  # the trigger message must have been consumed
        if not _holds(t.act.post, end_obj.vars_dict(), v):
            continue
        # exactly the statement's emissions (over its message names) occur
        observed = tuple(
            out for mlabel in labels for out in mlabel if out.name in sent_names
        )
        if observed != emitted:
            continue
        # some window os1..os2 shows the store effect
        for n2 in range(n3 + 1):
            vars2 = frag.node(ids[n2]).object(frag.main).vars_dict()
            if all(vars2.get(k) == val for k, val in delta.items()):
                return True
    return False


def report_to_json(report: list) -> str:
    return json.dumps(report, indent=2)


# -- term-level macrostep checks --------------------------------------------

def proj_of_term(term: Term, proj: dict) -> frozenset:
    """The projection of a statemachine term: an or-term projects through its
    active subterm; a name not in the map projects to nothing."""
    if isinstance(term, Basic):
        return proj.get(term.name, frozenset())
    if isinstance(term, Or):
        return proj_of_term(term.subterms[term.active - 1], proj)
    out = [proj_of_term(s, proj) for s in term.subterms]
    return frozenset.intersection(*out) if out else frozenset()


def fragment_run(frag: SystemFragment, ids: Iterable[str]) -> list:
    """A run as (node, M) pairs along the given node ids; M is the label of
    the edge taken into each node (empty for the first)."""
    ids = list(ids)
    out = [(frag.node(ids[0]), ())]
    for a, b in zip(ids, ids[1:]):
        labels = [m for to, m in frag.successors(a) if to == b]
        if not labels:
            raise ValueError(f"no edge {a!r} -> {b!r}")
        out.append((frag.node(b), labels[0]))
    return out


def check_run_satisfaction(
    s1: Term,
    s2: Term,
    e: Sym,
    alpha: tuple,
    run: list,
    proj: dict,
    main: str,
) -> bool:
    """Does the microstep run implement the macrostep s1 --e/alpha--> s2?

    Requires a smallest index k with run[k] in the projection of s2, a unique
    index r where the input event e is present and then consumed, and - when
    alpha is non-empty - a unique emission index s (r <= s <= k) whose output
    label carries exactly alpha.
    """
    if not run:
        return False
    e_msg = Message(e.name, tuple(e.payload))
    p2 = proj_of_term(s2, proj)
    k = next((i for i, (node, _) in enumerate(run) if node.id in p2), None)
    if k is None:
        return False

    def has_input(i):
        return e_msg in run[i][0].object(main).buffer

    consumed = [
        r for r in range(k)
        if has_input(r) and r + 1 < len(run) and not has_input(r + 1)
    ]
    if len(consumed) != 1:
        return False
    r = consumed[0]

    if alpha:
        alpha_names = {a.name for a in alpha}
        emitting = [
            i for i in range(1, k + 1)
            if any(out.name in alpha_names for out in run[i][1])
        ]
        if len(emitting) != 1:
            return False
        s = emitting[0]
        if not (r <= s <= k):
            return False
        observed = tuple(
            Sym(out.name, out.args) for out in run[s][1] if out.name in alpha_names
        )
        if observed != tuple(alpha):
            return False
    return True


def check_macro_micro_refinement(
    kripke_edges: Iterable[tuple],
    frag: SystemFragment,
    proj: dict,
    bound: Optional[int] = None,
) -> dict:
    """For every macro edge (s1, s2) and every projected node of s1, some
    microstep chain of bounded length must end in the projection of s2."""
    if bound is None:
        bound = len(frag.nodes)
    failures = []
    for idx, (s1, s2) in enumerate(kripke_edges):
        p1, p2 = proj_of_term(s1, proj), proj_of_term(s2, proj)
        for st in sorted(p1):
            if not (reachable_n(frag, st, bound) & p2):
                failures.append({"edge": idx, "from": st})
    return {"pass": not failures, "failures": failures}
