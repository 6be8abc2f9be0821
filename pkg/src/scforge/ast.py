"""Abstract syntax for full (hierarchical) and simplified (flat) statecharts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .actions import Action, Call, Cond

# Chart-level stereotypes.
PRIO_INNER = "prio:inner"
PRIO_OUTER = "prio:outer"
COMPLETION_IGNORE = "completion:ignore"
COMPLETION_CHAOS = "completion:chaos"
COMPLETION_ERROR = "completion:error"
SEQUENTIAL = "action conditions:sequential"

CHART_STEREOS = {
    PRIO_INNER,
    PRIO_OUTER,
    COMPLETION_IGNORE,
    COMPLETION_CHAOS,
    COMPLETION_ERROR,
    SEQUENTIAL,
}
PRIO_STEREOS = {PRIO_INNER, PRIO_OUTER}
COMPLETION_STEREOS = {COMPLETION_IGNORE, COMPLETION_CHAOS, COMPLETION_ERROR}

# State stereotypes and modifiers.
STATE_STEREOS = {"error", "exception"}
MODIFIERS = {"initial", "final"}


@dataclass(frozen=True)
class InternT:
    """Internal transition: triggered like a transition, but without a state change."""

    pre: Optional[Cond]
    call: Call
    act: Optional[Action]


@dataclass(frozen=True)
class Trans:
    prio: Optional[int]  # the <<prio=n>> transition stereotype
    src: str
    pre: Optional[Cond]
    call: Call
    act: Optional[Action]
    trg: str
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, hash=False, repr=False)


@dataclass(frozen=True)
class FullState:
    sstereos: frozenset[str] = frozenset()
    modifiers: frozenset[str] = frozenset()
    name: str = ""
    inv: Optional[Cond] = None
    entry: Optional[Action] = None
    exit: Optional[Action] = None
    do: Optional[Action] = None
    internT: frozenset[InternT] = frozenset()
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, hash=False, repr=False)

    def with_(self, **kw) -> "FullState":
        data = {
            "sstereos": self.sstereos,
            "modifiers": self.modifiers,
            "name": self.name,
            "inv": self.inv,
            "entry": self.entry,
            "exit": self.exit,
            "do": self.do,
            "internT": self.internT,
        }
        data.update(kw)
        return FullState(**data)


@dataclass(frozen=True)
class SCFull:
    stereos: frozenset[str] = frozenset()
    diagram_name: str = ""
    class_name: str = ""
    inv: Optional[Cond] = None
    states: frozenset[FullState] = frozenset()
    trans: frozenset[Trans] = frozenset()
    sub: frozenset[tuple[str, str]] = frozenset()  # (child, parent) state names

    def with_(self, **kw) -> "SCFull":
        data = {
            "stereos": self.stereos,
            "diagram_name": self.diagram_name,
            "class_name": self.class_name,
            "inv": self.inv,
            "states": self.states,
            "trans": self.trans,
            "sub": self.sub,
        }
        data.update(kw)
        return SCFull(**data)

    def state(self, name: str) -> FullState:
        for s in self.states:
            if s.name == name:
                return s
        raise KeyError(name)

    def state_opt(self, name: str) -> Optional[FullState]:
        for s in self.states:
            if s.name == name:
                return s
        return None

    def replace_state(self, old: FullState, new: FullState) -> "SCFull":
        return self.with_(states=(self.states - {old}) | {new})

    def parent_name(self, name: str) -> Optional[str]:
        for child, parent in self.sub:
            if child == name:
                return parent
        return None

    def sorted_states(self) -> list[FullState]:
        return sorted(self.states, key=lambda s: s.name)

    def sorted_trans(self) -> list[Trans]:
        return sorted(self.trans, key=trans_key)


def trans_key(t: Trans):
    return (t.src, t.trg, t.call.name, len(t.call.args), repr(t.pre), repr(t.act), repr(t.prio))


# ---------------------------------------------------------------------------
# Simplified statecharts

@dataclass(frozen=True)
class SimpState:
    modifiers: frozenset[str]
    name: str
    inv: Cond


@dataclass(frozen=True)
class SimpTrans:
    src: str
    pre: Cond
    call: Call
    act: Action
    trg: str


@dataclass(frozen=True)
class SCSimp:
    diagram_name: str
    class_name: str
    inv: Cond
    states: frozenset[SimpState]
    transitions: frozenset[SimpTrans]

    def state(self, name: str) -> SimpState:
        for s in self.states:
            if s.name == name:
                return s
        raise KeyError(name)

    def sorted_states(self) -> list[SimpState]:
        return sorted(self.states, key=lambda s: s.name)

    def sorted_transitions(self) -> list[SimpTrans]:
        return sorted(
            self.transitions,
            key=lambda t: (t.src, t.trg, t.call.name, len(t.call.args), repr(t.pre), repr(t.act)),
        )

    def initial_states(self) -> list[SimpState]:
        return [s for s in self.sorted_states() if "initial" in s.modifiers]


def triggers_full(sc: SCFull) -> set[str]:
    """All trigger names: calls on transitions and internal transitions."""
    names = {t.call.name for t in sc.trans}
    for s in sc.states:
        names |= {it.call.name for it in s.internT}
    return names


def triggers_simp(sc: SCSimp) -> set[str]:
    return {t.call.name for t in sc.transitions}
