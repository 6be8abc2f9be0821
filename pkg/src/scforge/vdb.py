"""Term-based operational semantics for statemachines.

A statemachine is a nested term: basic states, or-states (one active child,
a set of named transitions between children), and and-states (all children
active). A two-level semantics drives it: auxiliary judgments
`t --e/alpha-->_f t'` (flag f=1 when a transition fired, f=0 for a stutter
that merely consumes the event) and, on top, Kripke steps over (term, event
queue) nodes where the outputs of a step are fed back into the queue.

Includes an encoder from guard-free statecharts to terms: hierarchy becomes
nested or-terms, and data-carrying states are expanded over a finite value
domain (state `NonEmpty` holding v becomes the family `NonEmpty(v)`).
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .actions import (
    Assign,
    CTrue,
    ELit,
    Send,
    eval_expr,
    PVar,
)
from .ast import SCFull, SCSimp


class UnknownTargetName(Exception):
    pass


class StateSpaceBound(Exception):
    pass


class NotGuardFree(Exception):
    """The chart uses constructs the term encoding cannot express."""

    def __init__(self, offending: list):
        self.offending = list(offending)
        super().__init__("; ".join(self.offending))


class UnboundedValueDomain(Exception):
    pass


# -- terms ------------------------------------------------------------------

NONE, DEEP, SHALLOW = "none", "deep", "shallow"
HISTORY_TYPES = (NONE, DEEP, SHALLOW)


@dataclass(frozen=True)
class Sym:
    """An event or action symbol: a name with concrete payload values."""

    name: str
    payload: tuple = ()

    def __str__(self):
        from .printer import print_value

        return f"{self.name}(" + ", ".join(print_value(p) for p in self.payload) + ")"


@dataclass(frozen=True)
class VdbTransition:
    tname: str
    i: int  # source child index, 1-based
    ns: frozenset  # source restriction
    e: Sym  # trigger
    alpha: tuple  # output actions, in order
    nt: frozenset  # target determinator
    j: int  # target child index, 1-based
    ht: str = NONE


@dataclass(frozen=True)
class Basic:
    name: str
    entry: tuple = ()
    exit: tuple = ()


@dataclass(frozen=True)
class And:
    name: str
    subterms: tuple
    entry: tuple = ()
    exit: tuple = ()


@dataclass(frozen=True)
class Or:
    name: str
    subterms: tuple
    active: int  # 1-based
    transitions: frozenset = frozenset()
    entry: tuple = ()
    exit: tuple = ()


Term = Union[Basic, And, Or]


def validate_term(t: Term) -> None:
    """State and transition names must be pairwise distinct; indices in range."""
    seen_states: set = set()
    seen_trans: set = set()

    def walk(t: Term):
        if t.name in seen_states:
            raise ValueError(f"duplicate state name {t.name!r}")
        seen_states.add(t.name)
        if isinstance(t, Basic):
            return
        if not t.subterms:
            raise ValueError(f"{t.name!r} has no subterms")
        if isinstance(t, Or):
            if not 1 <= t.active <= len(t.subterms):
                raise ValueError(f"{t.name!r}: active index {t.active} out of range")
            for tr in t.transitions:
                if tr.tname in seen_trans:
                    raise ValueError(f"duplicate transition name {tr.tname!r}")
                seen_trans.add(tr.tname)
                for idx in (tr.i, tr.j):
                    if not 1 <= idx <= len(t.subterms):
                        raise ValueError(f"{tr.tname!r}: index {idx} out of range")
                if tr.ht not in HISTORY_TYPES:
                    raise ValueError(f"{tr.tname!r}: bad history type {tr.ht!r}")
        for s in t.subterms:
            walk(s)

    walk(t)


# -- configuration, entry/exit, next ----------------------------------------

def conf_of(t: Term) -> frozenset:
    if isinstance(t, Basic):
        return frozenset([t.name])
    if isinstance(t, And):
        return frozenset([t.name]).union(*(conf_of(s) for s in t.subterms))
    return frozenset([t.name]) | conf_of(t.subterms[t.active - 1])


def entry_seqs(t: Term) -> frozenset:
    if isinstance(t, Basic):
        return frozenset([t.entry])
    if isinstance(t, Or):
        return frozenset(t.entry + b for b in entry_seqs(t.subterms[t.active - 1]))
    out = set()
    for perm in itertools.permutations(t.subterms):
        for parts in itertools.product(*(entry_seqs(s) for s in perm)):
            out.add(t.entry + tuple(x for part in parts for x in part))
    return frozenset(out)


def exit_seqs(t: Term) -> frozenset:
    if isinstance(t, Basic):
        return frozenset([t.exit])
    if isinstance(t, Or):
        return frozenset(b + t.exit for b in exit_seqs(t.subterms[t.active - 1]))
    out = set()
    for perm in itertools.permutations(t.subterms):
        for parts in itertools.product(*(exit_seqs(s) for s in perm)):
            out.add(tuple(x for part in parts for x in part) + t.exit)
    return frozenset(out)


def _names(t: Term) -> set:
    out = {t.name}
    if not isinstance(t, Basic):
        for s in t.subterms:
            out |= _names(s)
    return out


def _reset(t: Term, keep_top: bool) -> Term:
    if isinstance(t, Basic):
        return t
    subs = tuple(_reset(s, False) for s in t.subterms)
    if isinstance(t, And):
        return And(t.name, subs, t.entry, t.exit)
    return Or(t.name, subs, t.active if keep_top else 1, t.transitions, t.entry, t.exit)


def _force_active(t: Term, target: str) -> Optional[Term]:
    """Adjust Or indices so that `target` is in the active configuration.
    Returns None when the name does not occur in t."""
    if isinstance(t, Basic):
        return t if t.name == target else None
    if t.name == target:
        return t
    for idx, s in enumerate(t.subterms):
        forced = _force_active(s, target)
        if forced is not None:
            subs = t.subterms[:idx] + (forced,) + t.subterms[idx + 1:]
            if isinstance(t, And):
                return And(t.name, subs, t.entry, t.exit)
            return Or(t.name, subs, idx + 1, t.transitions, t.entry, t.exit)
    return None


def next_state(ht: str, nt: Iterable[str], s: Term) -> Term:
    """The state that becomes active when a transition enters s.

    deep: the stored configuration is restored unchanged; shallow: only the
    top-level active index survives; none: every or-index resets to its
    default 1. Afterwards each target-determinator name is forced active.
    """
    if ht == DEEP:
        out = s
    elif ht == SHALLOW:
        out = _reset(s, keep_top=True)
    elif ht == NONE:
        out = _reset(s, keep_top=False)
    else:
        raise ValueError(f"bad history type {ht!r}")
    for name in sorted(nt):
        forced = _force_active(out, name)
        if forced is None:
            raise UnknownTargetName(name)
        out = forced
    return out


# -- auxiliary step judgments -----------------------------------------------

def aux_step(t: Term, e: Sym) -> frozenset:
    """All derivable judgments t --e/alpha-->_f t' as (alpha, f, t') triples."""
    if isinstance(t, Basic):
        return frozenset([((), 0, t)])  # stutter
    if isinstance(t, And):
        child_steps = [sorted(aux_step(s, e), key=repr) for s in t.subterms]
        out = set()
        for combo in itertools.product(*child_steps):
            f = 1 if any(fj for _, fj, _ in combo) else 0
            subs = tuple(tj for _, _, tj in combo)
            term = And(t.name, subs, t.entry, t.exit)
            for perm in itertools.permutations(range(len(combo))):
                alpha = tuple(x for k in perm for x in combo[k][0])
                out.add((alpha, f, term))
        return frozenset(out)

    # or-term
    active = t.subterms[t.active - 1]
    inner = aux_step(active, e)
    inner_fired = [(a, f, s) for a, f, s in inner if f == 1]
    out = set()
    # inner transitions take priority and propagate
    for alpha, _, s_new in inner_fired:
        subs = t.subterms[:t.active - 1] + (s_new,) + t.subterms[t.active:]
        out.add((alpha, 1, Or(t.name, subs, t.active, t.transitions, t.entry, t.exit)))
    if not inner_fired:
        # own transitions fire only when the active child cannot
        for tr in sorted(t.transitions, key=lambda tr: tr.tname):
            if tr.i != t.active or tr.e != e:
                continue
            if not tr.ns <= conf_of(active):
                continue
            target = next_state(tr.ht, tr.nt, t.subterms[tr.j - 1])
            subs = t.subterms[:tr.j - 1] + (target,) + t.subterms[tr.j:]
            term = Or(t.name, subs, tr.j, t.transitions, t.entry, t.exit)
            for e1 in exit_seqs(active):
                for e2 in entry_seqs(target):
                    out.add((e1 + tr.alpha + e2, 1, term))
    if not any(f == 1 for _, f, _ in out):
        out.add(((), 0, t))  # stutter
    return frozenset(out)


# -- Kripke steps -----------------------------------------------------------

@dataclass(frozen=True)
class KripkeNode:
    term: Term
    queue: tuple  # of Sym


def fifo_sel(queue: tuple):
    """Remove the head message; undefined on an empty queue."""
    if queue:
        yield queue[0], queue[1:]


def fifo_join(alpha: tuple, queue: tuple) -> tuple:
    """Append the outputs, element-wise in order, at the tail."""
    return queue + tuple(alpha)


def drop_join(alphabet: Iterable[str]):
    """A join that silently discards outputs outside the event alphabet."""
    allowed = frozenset(alphabet)

    def join(alpha: tuple, queue: tuple) -> tuple:
        return queue + tuple(a for a in alpha if a.name in allowed)

    return join


def consume_input(node: KripkeNode, sel=fifo_sel, join=fifo_join) -> frozenset:
    """All successor nodes: pick an event via sel, take any auxiliary step,
    merge the outputs back into the queue via join."""
    out = set()
    for e, rest in sel(node.queue):
        for alpha, _, term in aux_step(node.term, e):
            out.add(KripkeNode(term, join(alpha, rest)))
    return frozenset(out)


def run_bounded(
    start: KripkeNode,
    max_steps: int,
    sel=fifo_sel,
    join=fifo_join,
    max_nodes: Optional[int] = None,
) -> frozenset:
    """All maximal step sequences of length <= max_steps from start."""
    if max_nodes is None:
        max_nodes = int(os.environ.get("SCFORGE_MAX_NODES", "10000"))
    succs: dict = {}
    nodes_seen = {start}

    def successors(node: KripkeNode) -> frozenset:
        if node not in succs:
            succs[node] = consume_input(node, sel, join)
            nodes_seen.update(succs[node])
            if len(nodes_seen) > max_nodes:
                raise StateSpaceBound(f"more than {max_nodes} distinct nodes")
        return succs[node]

    runs = set()
    stack = [(start,)]
    while stack:
        path = stack.pop()
        nxt = successors(path[-1]) if len(path) <= max_steps else frozenset()
        if not nxt:
            runs.add(path)
            continue
        for node in nxt:
            stack.append(path + (node,))
    return frozenset(runs)


def run_outputs(run: tuple) -> tuple:
    """The actions each step appended to the queue (FIFO sel/join assumed)."""
    out = []
    for a, b in zip(run, run[1:]):
        out.extend(b.queue[len(a.queue) - 1:])
    return tuple(out)


def node_to_json(node: KripkeNode) -> dict:
    return {
        "term-conf": sorted(conf_of(node.term)),
        "queue": [str(e) for e in node.queue],
    }


def runs_to_json(runs: Iterable[tuple]) -> str:
    data = [[node_to_json(n) for n in run] for run in sorted(runs, key=repr)]
    return json.dumps(data, indent=2)


# -- encoding guard-free statecharts ----------------------------------------

def _is_trivial(cond) -> bool:
    return cond is None or isinstance(cond, CTrue)


def _data_name(state: str, value) -> str:
    from .printer import print_value

    return f"{state}({print_value(value)})"


def encode_guard_free(sc: Union[SCFull, SCSimp], domain: Optional[tuple] = None) -> Term:
    """Translate a guard-free statechart into a statemachine term.

    Hierarchy becomes nested or-terms (active index 1 = an initial substate).
    A single data variable is allowed on flat charts; its carrying states are
    expanded over the finite `domain` (state S holding value d becomes S(d)).
    """
    if isinstance(sc, SCFull):
        trans = sorted(sc.trans, key=lambda t: (t.src, t.trg, t.call.name))
        problems = []
        for s in sc.sorted_states():
            if s.do is not None:
                problems.append(f"state {s.name} has a do action")
            if s.internT:
                problems.append(f"state {s.name} has internal transitions")
            for act, what in ((s.entry, "entry"), (s.exit, "exit")):
                if act is not None and _ground_syms(act.stmt) is None:
                    problems.append(f"state {s.name} {what} is not a ground send sequence")
        if problems:
            raise NotGuardFree(problems)
        if sc.sub:
            return _encode_hier(sc)
        states = [(s.name, s.modifiers, s.entry, s.exit) for s in sc.sorted_states()]
    else:
        trans = sorted(
            sc.transitions, key=lambda t: (t.src, t.trg, t.call.name, repr(t))
        )
        states = [(s.name, s.modifiers, None, None) for s in sc.sorted_states()]
    return _encode_flat(sc, states, trans, domain)


def _ground_syms(stmt) -> Optional[tuple]:
    """A statement as a ground action-symbol sequence, or None if impossible."""
    out = []
    for prim in stmt:
        if not isinstance(prim, Send):
            return None
        args = []
        for a in prim.args:
            if not isinstance(a, ELit):
                return None
            args.append(a.value)
        out.append(Sym(prim.name, tuple(args)))
    return tuple(out)


def _entry_exit(entry, exit) -> tuple:
    en = _ground_syms(entry.stmt) if entry is not None else ()
    ex = _ground_syms(exit.stmt) if exit is not None else ()
    return en, ex


def _encode_hier(sc: SCFull) -> Term:
    problems = []
    for t in sorted(sc.trans, key=lambda t: (t.src, t.trg)):
        if not _is_trivial(t.pre):
            problems.append(f"transition {t.src}->{t.trg} has a guard")
        if t.act is not None and not _is_trivial(t.act.post):
            problems.append(f"transition {t.src}->{t.trg} has a postcondition")
        if t.call.args:
            problems.append(f"transition {t.src}->{t.trg} carries event data in a hierarchical chart")
        if sc.parent_name(t.src) != sc.parent_name(t.trg):
            problems.append(f"transition {t.src}->{t.trg} crosses hierarchy levels")
        if t.act is not None and _ground_syms(t.act.stmt) is None:
            problems.append(f"transition {t.src}->{t.trg} action is not a ground send sequence")
    if problems:
        raise NotGuardFree(problems)

    def children_of(parent: Optional[str]) -> list:
        subs = [s for s in sc.sorted_states() if sc.parent_name(s.name) == parent]
        return sorted(subs, key=lambda s: ("initial" not in s.modifiers, s.name))

    counter = itertools.count(1)

    def build(parent: Optional[str], name: str, entry, exit) -> Term:
        kids = children_of(parent)
        if not kids and parent is not None:
            en, ex = _entry_exit(entry, exit)
            return Basic(parent, en, ex)
        if parent is None and not kids:
            raise NotGuardFree(["chart has no states"])
        if "initial" not in kids[0].modifiers:
            raise NotGuardFree([f"{name} has no initial (sub)state"])
        index = {s.name: k + 1 for k, s in enumerate(kids)}
        transitions = set()
        for t in sorted(sc.trans, key=lambda t: (t.src, t.trg, t.call.name)):
            if sc.parent_name(t.src) != parent or t.src not in index:
                continue
            alpha = _ground_syms(t.act.stmt) if t.act is not None else ()
            transitions.add(
                VdbTransition(
                    tname=f"t{next(counter)}",
                    i=index[t.src],
                    ns=frozenset(),
                    e=Sym(t.call.name, ()),
                    alpha=alpha,
                    nt=frozenset(),
                    j=index[t.trg],
                )
            )
        subterms = tuple(build(s.name, s.name, s.entry, s.exit) for s in kids)
        en, ex = _entry_exit(entry, exit)
        return Or(name, subterms, 1, frozenset(transitions), en, ex)

    term = build(None, sc.diagram_name, None, None)
    validate_term(term)
    return term


def _encode_flat(sc, states, trans, domain) -> Term:
    problems = []
    data_vars = set()
    for t in trans:
        if not _is_trivial(t.pre):
            problems.append(f"transition {t.src}->{t.trg} has a guard")
        act = t.act
        if act is not None and not _is_trivial(act.post):
            problems.append(f"transition {t.src}->{t.trg} has a postcondition")
        if len(t.call.args) > 1 or any(not isinstance(a, PVar) for a in t.call.args):
            problems.append(
                f"transition {t.src}->{t.trg}: only a single variable event pattern is supported"
            )
        for prim in (act.stmt if act is not None else ()):
            if isinstance(prim, Assign):
                data_vars.add(prim.var)
            elif not isinstance(prim, Send):
                problems.append(f"transition {t.src}->{t.trg} uses a non send/assign statement")
    if len(data_vars) > 1:
        problems.append(f"more than one data variable: {', '.join(sorted(data_vars))}")
    if problems:
        raise NotGuardFree(problems)

    var = next(iter(data_vars)) if data_vars else None
    needs_domain = var is not None or any(t.call.args for t in trans)
    if needs_domain and not domain:
        raise UnboundedValueDomain(
            "chart carries data; supply a finite value domain"
        )

    # a state carries the variable when an ingoing transition assigns it or
    # an outgoing one reads it
    carriers: set = set()
    if var is not None:
        for t in trans:
            assigns = any(
                isinstance(p, Assign) and p.var == var
                for p in (t.act.stmt if t.act else ())
            )
            reads = var in _read_vars(t)
            if assigns:
                carriers.add(t.trg)
            if reads:
                carriers.add(t.src)

    # children: initial states first, carriers expanded over the domain
    ordered = sorted(states, key=lambda s: ("initial" not in s[1], s[0]))
    if not ordered or "initial" not in ordered[0][1]:
        raise NotGuardFree(["chart has no initial state"])
    children: list = []
    index: dict = {}
    for name, _mods, entry, exit in ordered:
        en, ex = _entry_exit(entry, exit)
        if name in carriers:
            for d in domain:
                index[(name, d)] = len(children) + 1
                children.append(Basic(_data_name(name, d), en, ex))
        else:
            index[(name, None)] = len(children) + 1
            children.append(Basic(name, en, ex))

    transitions = set()
    counter = itertools.count(1)
    for t in trans:
        param = t.call.args[0].name if t.call.args else None
        param_values = tuple(domain) if param is not None else (None,)
        src_values = tuple(domain) if t.src in carriers else (None,)
        for d in src_values:
            for i in param_values:
                env = {}
                if d is not None:
                    env[var] = d
                if param is not None:
                    env[param] = i
                alpha, final = _run_action(t, env, var)
                if t.trg in carriers:
                    if final is None:
                        raise NotGuardFree(
                            [f"transition {t.src}->{t.trg}: value of {var} in target undetermined"]
                        )
                    if final not in domain:
                        raise UnboundedValueDomain(
                            f"value {final!r} escapes the supplied domain"
                        )
                    j = index[(t.trg, final)]
                else:
                    j = index[(t.trg, None)]
                payload = (i,) if param is not None else ()
                transitions.add(
                    VdbTransition(
                        tname=f"t{next(counter)}",
                        i=index[(t.src, d)],
                        ns=frozenset(),
                        e=Sym(t.call.name, payload),
                        alpha=alpha,
                        nt=frozenset(),
                        j=j,
                    )
                )
    term = Or(sc.diagram_name, tuple(children), 1, frozenset(transitions))
    validate_term(term)
    return term


def _read_vars(t) -> set:
    from .actions import expr_vars

    out: set = set()
    params = {a.name for a in t.call.args}
    for prim in (t.act.stmt if t.act is not None else ()):
        if isinstance(prim, Assign):
            out |= expr_vars(prim.expr)
        elif isinstance(prim, Send):
            for a in prim.args:
                out |= expr_vars(a)
    return out - params


def _run_action(t, env: dict, var) -> tuple:
    """Evaluate the send/assign sequence under env; returns (actions, final
    value of the data variable or None)."""
    store = dict(env)
    alpha = []
    for prim in (t.act.stmt if t.act is not None else ()):
        if isinstance(prim, Assign):
            store[prim.var] = eval_expr(prim.expr, store)
        else:
            args = tuple(eval_expr(a, store) for a in prim.args)
            alpha.append(Sym(prim.name, args))
    return tuple(alpha), store.get(var) if var is not None else None


# -- term text format -------------------------------------------------------

_PLAIN = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-$")


def _atom(name: str) -> str:
    if name and all(c in _PLAIN for c in name) and not name[0].isdigit():
        return name
    return "|" + name.replace("|", "\\|") + "|"


def _value_sexpr(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, tuple):
        return "(" + " ".join(_value_sexpr(x) for x in v) + ")"
    raise TypeError(f"bad payload value {v!r}")


def _sym_sexpr(s: Sym) -> str:
    return "(" + " ".join([_atom(s.name)] + [_value_sexpr(p) for p in s.payload]) + ")"


def _seq_sexpr(seq: tuple) -> str:
    return "(" + " ".join(_sym_sexpr(s) for s in seq) + ")"


def term_to_sexpr(t: Term) -> str:
    if isinstance(t, Basic):
        return f"(basic {_atom(t.name)} {_seq_sexpr(t.entry)} {_seq_sexpr(t.exit)})"
    subs = "(" + " ".join(term_to_sexpr(s) for s in t.subterms) + ")"
    if isinstance(t, And):
        return f"(and {_atom(t.name)} {subs} {_seq_sexpr(t.entry)} {_seq_sexpr(t.exit)})"
    trans = "(" + " ".join(
        _trans_sexpr(tr) for tr in sorted(t.transitions, key=lambda tr: tr.tname)
    ) + ")"
    return (
        f"(or {_atom(t.name)} {subs} {t.active} {trans} "
        f"{_seq_sexpr(t.entry)} {_seq_sexpr(t.exit)})"
    )


def _trans_sexpr(tr: VdbTransition) -> str:
    ns = "(" + " ".join(_atom(n) for n in sorted(tr.ns)) + ")"
    nt = "(" + " ".join(_atom(n) for n in sorted(tr.nt)) + ")"
    return (
        f"(trans {_atom(tr.tname)} {tr.i} {ns} {_sym_sexpr(tr.e)} "
        f"{_seq_sexpr(tr.alpha)} {nt} {tr.j} {tr.ht})"
    )


def _sexpr_tokens(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == "|":
            j = i + 1
            buf = []
            while j < n and text[j] != "|":
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= n:
                raise ValueError("unterminated |...| atom")
            yield "".join(buf)
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()|":
                j += 1
            yield text[i:j]
            i = j


def _read_sexpr(tokens: list, pos: int):
    if pos >= len(tokens):
        raise ValueError("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read_sexpr(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise ValueError("missing closing parenthesis")
        return items, pos + 1
    if tok == ")":
        raise ValueError("unexpected closing parenthesis")
    return tok, pos + 1


def term_from_sexpr(text: str) -> Term:
    tokens = list(_sexpr_tokens(text))
    tree, pos = _read_sexpr(tokens, 0)
    if pos != len(tokens):
        raise ValueError("trailing input after term")
    return _term_from_tree(tree)


def _value_from_tree(tree):
    if isinstance(tree, list):
        return tuple(_value_from_tree(x) for x in tree)
    if tree == "true":
        return True
    if tree == "false":
        return False
    try:
        return int(tree)
    except ValueError:
        raise ValueError(f"bad payload value {tree!r}")


def _sym_from_tree(tree) -> Sym:
    if not isinstance(tree, list) or not tree:
        raise ValueError(f"bad symbol {tree!r}")
    return Sym(tree[0], tuple(_value_from_tree(x) for x in tree[1:]))


def _seq_from_tree(tree) -> tuple:
    return tuple(_sym_from_tree(x) for x in tree)


def _term_from_tree(tree) -> Term:
    if not isinstance(tree, list) or not tree:
        raise ValueError(f"bad term {tree!r}")
    head = tree[0]
    if head == "basic":
        _, name, en, ex = tree
        return Basic(name, _seq_from_tree(en), _seq_from_tree(ex))
    if head == "and":
        _, name, subs, en, ex = tree
        return And(name, tuple(_term_from_tree(s) for s in subs),
                   _seq_from_tree(en), _seq_from_tree(ex))
    if head == "or":
        _, name, subs, active, trans, en, ex = tree
        return Or(
            name,
            tuple(_term_from_tree(s) for s in subs),
            int(active),
            frozenset(_trans_from_tree(tr) for tr in trans),
            _seq_from_tree(en),
            _seq_from_tree(ex),
        )
    raise ValueError(f"bad term head {head!r}")


def _trans_from_tree(tree) -> VdbTransition:
    if not isinstance(tree, list) or tree[:1] != ["trans"]:
        raise ValueError(f"bad transition {tree!r}")
    _, tname, i, ns, e, alpha, nt, j, ht = tree
    if ht not in HISTORY_TYPES:
        raise ValueError(f"bad history type {ht!r}")
    return VdbTransition(
        tname=tname,
        i=int(i),
        ns=frozenset(ns),
        e=_sym_from_tree(e),
        alpha=_seq_from_tree(alpha),
        nt=frozenset(nt),
        j=int(j),
        ht=ht,
    )
