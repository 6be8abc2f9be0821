"""Tests for the rewrite rules, structural queries, and the fixpoint engine."""

from __future__ import annotations

import pytest

from scforge.actions import (
    Action,
    Call,
    CMatch,
    CNot,
    CTrue,
    PVar,
    Send,
    SetTimer,
    StopTimer,
    TIMEOUT,
    TRUE,
)
from scforge.ast import FullState, InternT, SCFull, Trans
from scforge.parse import parse
from scforge.printer import print_chart
from scforge.transform import (
    BindingStale,
    NotSimplifiable,
    RULE_NAMES,
    RULE_NUMBERS,
    apply_rule,
    chain_below,
    find_bindings,
    flat_and_simplified,
    final_irrelevant,
    initial_irrelevant,
    lcs,
    simple_state,
    substates,
    superstates,
    to_simplified,
    top_initial,
    transform_fixpoint,
)
from scforge.wellformed import check_all


def rule(name: str) -> int:
    return RULE_NUMBERS[name]


NESTED = parse(
    """
    statechart D for C {
        initial state A {
            initial state X;
            state Y;
        }
        state B;
        A -> B : f();
    }
    """
)


# -- structural queries -----------------------------------------------------

def test_substates_superstates():
    a, x = NESTED.state("A"), NESTED.state("X")
    assert substates(a, NESTED) == {x, NESTED.state("Y")}
    assert superstates(x, NESTED) == {a}
    assert substates(x, NESTED) == set()


def test_top_initial():
    assert top_initial(NESTED)
    no_init = parse("statechart D for C { state A; }")
    assert not top_initial(no_init)


def test_simple_state():
    assert not simple_state(NESTED.state("A"), NESTED)
    assert simple_state(NESTED.state("X"), NESTED)
    with_do = parse("statechart D for C { initial state A { do / d(); } }")
    assert not simple_state(with_do.state("A"), with_do)


def test_lcs():
    sc = NESTED
    x, y, a, b = sc.state("X"), sc.state("Y"), sc.state("A"), sc.state("B")
    assert lcs(x, y, sc) == a  # siblings meet at their parent
    assert lcs(a, b, sc) is None  # two top-level states share nothing
    assert lcs(x, x, sc) == a  # strict superstates only
    assert chain_below(x, a, sc) == []
    assert chain_below(x, None, sc) == [a]


def test_initial_irrelevant_rule7_example():
    sc = parse(
        """
        statechart D for C {
            state B {
                initial state Z;
            }
            initial state A {
                initial state X;
                state Y;
            }
            B -> A : f();
        }
        """
    )
    assert initial_irrelevant(sc.state("Z"), sc)
    assert not initial_irrelevant(sc.state("X"), sc)


def test_initial_irrelevant_trivial_cases():
    # a top-level initial state is never irrelevant
    assert not initial_irrelevant(NESTED.state("A"), NESTED)
    # without any top-level initial state nothing is irrelevant
    sc = parse("statechart D for C { state A { initial state X; } }")
    assert not initial_irrelevant(sc.state("X"), sc)


def test_flat_and_simplified():
    flat = parse(
        """
        statechart D for C {
            initial state A;
            final state B;
            A -> B : f();
        }
        """
    )
    assert flat_and_simplified(flat)
    with_do = parse("statechart D for C { initial state A { do / d(); } }")
    assert not flat_and_simplified(with_do)
    assert not flat_and_simplified(NESTED)  # A has an outgoing transition


# -- bindings ---------------------------------------------------------------

def test_elim_do_binding():
    sc = parse("statechart D for C { initial state A { do / d(); } }")
    assert len(find_bindings(rule("elimDo"), sc)) == 1


def test_add_init_top_not_applicable_when_initial_exists():
    assert find_bindings(rule("addInitTop"), NESTED) == []


def test_backward_to_sub_blocked_by_priority_stereotype():
    sc = parse(
        """
        statechart D for C <<prio:inner>> {
            initial state A {
                initial final state X;
            }
            state B;
            A -> B : f();
        }
        """
    )
    assert find_bindings(rule("backwardToSub"), sc) == []
    assert find_bindings(rule("backwardToSubPrioInner"), sc) != []
    assert find_bindings(rule("backwardToSubPrioOuter"), sc) == []


# -- individual rule applications -------------------------------------------

def test_rule1_elim_do():
    sc = parse(
        """
        statechart D for C {
            initial state A {
                entry / e();
                do / d() [v == 1];
            }
        }
        """
    )
    [b] = find_bindings(1, sc)
    out = apply_rule(1, sc, b)
    a = out.state("A")
    assert a.do is None
    assert a.entry.stmt[-1] == SetTimer()
    assert a.exit.stmt == (StopTimer(),)
    [it] = a.internT
    assert it.pre == TRUE
    assert it.call == Call(TIMEOUT, ())
    assert it.act.stmt == (Send("d", ()), SetTimer())
    assert it.act.post is not None  # keeps the do postcondition


def test_rule3_fresh_substate():
    sc = parse(
        """
        statechart D for C {
            initial state A {
                -> f() / out();
            }
        }
        """
    )
    [b] = find_bindings(3, sc)
    out = apply_rule(3, sc, b)
    fresh = out.state("A$inner0")
    assert fresh.modifiers == {"initial", "final"}
    assert ("A$inner0", "A") in out.sub
    assert any(t.src == t.trg == "A$inner0" and t.call.name == "f" for t in out.trans)
    assert out.state("A").internT == frozenset()


def test_rule4_all_top_states_become_initial():
    sc = parse("statechart D for C { state A; state B { state X; } }")
    [b] = find_bindings(4, sc)
    out = apply_rule(4, sc, b)
    assert "initial" in out.state("A").modifiers
    assert "initial" in out.state("B").modifiers
    assert "initial" not in out.state("X").modifiers  # only top level


def test_rule6_forwarding_duplicates_per_initial_substate():
    sc = parse(
        """
        statechart D for C {
            initial state Q;
            state A {
                initial state S1;
                initial state S2;
            }
            Q -> A : f();
        }
        """
    )
    [b] = find_bindings(6, sc)
    out = apply_rule(6, sc, b)
    targets = {t.trg for t in out.trans if t.src == "Q"}
    assert targets == {"S1", "S2"}
    assert not any(t.trg == "A" for t in out.trans)


def test_rule23_removes_superstates():
    sc = parse(
        """
        statechart D for C {
            state A {
                initial final state X;
            }
        }
        """
    )
    # make it flat-and-simplified first: A must carry no information
    out, _ = transform_fixpoint(sc)
    assert out.sub == frozenset()
    assert out.state_opt("A") is None
    assert out.state_opt("X") is not None


def test_rule24_completion_ignore():
    sc = parse(
        """
        statechart D for C <<completion:ignore>> {
            initial state A;
            final state B;
            A -> B : f();
            B -> A : g();
        }
        """
    )
    [b] = find_bindings(24, sc)
    out = apply_rule(24, sc, b)
    # A misses g: gains an unguarded self-loop
    miss = [t for t in out.trans if t.src == "A" and t.call.name == "g"]
    assert len(miss) == 1 and miss[0].trg == "A" and miss[0].pre is None
    # A handles f: gains a self-loop guarded by the negated firing condition
    comp = [t for t in out.trans if t.src == "A" and t.trg == "A" and t.call.name == "f"]
    assert len(comp) == 1
    assert isinstance(comp[0].pre, CNot)
    # the stereotype is consumed so the rule cannot re-fire
    assert "completion:ignore" not in out.stereos
    assert find_bindings(24, out) == []


def test_rule25_completion_error_targets_error_state():
    sc = parse(
        """
        statechart D for C <<completion:error>> {
            <<error>> state E;
            initial state A;
            A -> A : f();
        }
        """
    )
    [b] = find_bindings(25, sc)
    out = apply_rule(25, sc, b)
    comp = [t for t in out.trans if t.src == "A" and t.call.name == "f" and t.trg == "E"]
    assert len(comp) == 1
    # the error state itself is completed too
    assert any(t.src == "E" and t.call.name == "f" for t in out.trans)


def test_rule26_completion_exception():
    sc = parse(
        """
        statechart D for C {
            <<exception>> state X;
            initial state A;
            state B;
            A -> X : throw boom();
            A -> B : f();
        }
        """
    )
    [b] = find_bindings(26, sc)
    out = apply_rule(26, sc, b)
    # B misses the exception trigger: it leads to the exception state
    added = [t for t in out.trans if t.src == "B" and t.call.name == "boom"]
    assert len(added) == 1 and added[0].trg == "X"
    # plain triggers are not completed by this rule
    assert not any(t.src == "B" and t.call.name == "f" for t in out.trans)


def test_binding_stale():
    sc = parse("statechart D for C { initial state A { do / d(); } }")
    [b] = find_bindings(1, sc)
    out = apply_rule(1, sc, b)
    with pytest.raises(BindingStale):
        apply_rule(1, out, b)


# -- call normalization -----------------------------------------------------

def test_elim_prio_negates_higher_priorities():
    sc = parse(
        """
        statechart D for C {
            initial state A;
            state B;
            <<prio=2>> A -> A : [v == 0] f(x) / out(x);
            <<prio=1>> A -> B : f(y);
        }
        """
    )
    [b] = find_bindings(14, sc)
    out = apply_rule(14, sc, b)
    assert all(t.prio is None for t in out.trans)
    low = next(t for t in out.trans if t.trg == "B")
    high = next(t for t in out.trans if t.trg == "A")
    # the call now uses positional input variables
    assert low.call == Call("f", (PVar("inp1"),))
    assert high.call == Call("f", (PVar("inp1"),))
    # the lower-priority transition may only fire when the higher one cannot
    assert isinstance(low.pre, CNot) or "inp1" in repr(low.pre)
    # the action was renamed along with the call
    from scforge.actions import EVar

    assert high.act.stmt == (Send("out", (EVar("inp1"),)),)


def test_prio_inner_vs_outer_structural():
    inner_txt = """
    statechart D for C <<prio:%s>> {
        initial state A {
            initial final state X;
        }
        state B;
        A -> B : f();
        X -> X : f();
    }
    """
    inner, _ = transform_fixpoint(parse(inner_txt % "inner"))
    outer, _ = transform_fixpoint(parse(inner_txt % "outer"))
    # inner priority: the outer transition X->B is guarded by the inner loop
    xb_inner = next(t for t in inner.trans if t.src == "X" and t.trg == "B")
    assert xb_inner.pre is not None
    xx_inner = next(t for t in inner.trans if t.src == "X" and t.trg == "X")
    assert xx_inner.pre is None
    # outer priority: the inner loop is guarded by the outer transition
    xb_outer = next(t for t in outer.trans if t.src == "X" and t.trg == "B")
    assert xb_outer.pre is None
    xx_outer = next(t for t in outer.trans if t.src == "X" and t.trg == "X")
    assert xx_outer.pre is not None


# -- fixpoint engine --------------------------------------------------------

def test_fixpoint_identity_on_flat_chart():
    sc = parse(
        """
        statechart D for C {
            initial state A;
            final state B;
            A -> B : f();
        }
        """
    )
    out, trace = transform_fixpoint(sc)
    assert out == sc
    assert trace == []


def test_fixpoint_flattens_single_hierarchy():
    sc = parse(
        """
        statechart D for C {
            initial state Q;
            state A {
                initial final state X;
            }
            Q -> A : f();
            A -> Q : g();
        }
        """
    )
    out, trace = transform_fixpoint(sc)
    names = [e.name for e in trace]
    assert "forwardToSub" in names
    assert "backwardToSub" in names
    assert "removeHierarchy" in names
    assert flat_and_simplified(out)
    assert out.sub == frozenset()


def test_fixpoint_result_has_no_residual_constructs():
    sc = parse(
        """
        statechart D for C <<prio:inner, completion:ignore>> {
            initial state A {
                entry / e();
                do / d();
                -> h() / out();
                initial state X {
                    exit / x();
                }
                final state Y;
                X -> Y : go();
            }
            state B;
            A -> B : f();
            B -> A : back();
        }
        """
    )
    out, trace = transform_fixpoint(sc)
    assert out.sub == frozenset()
    assert out.stereos == frozenset()
    for s in out.states:
        assert s.do is None and s.entry is None and s.exit is None
        assert s.internT == frozenset()
    assert flat_and_simplified(out)
    to_simplified(out)  # must not raise


def test_fixpoint_trace_is_replayable():
    sc = NESTED
    out, trace = transform_fixpoint(sc)
    assert trace, "expected at least one step"
    from scforge.transform import chart_hash

    assert trace[0].before_hash == chart_hash(sc)
    assert trace[-1].after_hash == chart_hash(out)
    for prev, nxt in zip(trace, trace[1:]):
        assert prev.after_hash == nxt.before_hash


def test_fixpoint_random_strategy_also_flattens():
    sc = parse(
        """
        statechart D for C {
            initial state A {
                do / d();
                initial state X;
                final state Y;
                X -> Y : go();
            }
            state B;
            A -> B : f();
        }
        """
    )
    for seed in (0, 1, 2):
        out, _ = transform_fixpoint(sc, strategy=f"random:{seed}")
        assert flat_and_simplified(out)
        assert out.sub == frozenset()


def test_fixpoint_preserves_wellformedness():
    sc = parse(
        """
        statechart D for C <<completion:ignore>> {
            initial state A {
                do / d();
                initial final state X;
            }
            state B;
            A -> B : f();
        }
        """
    )
    assert [v for v in check_all(sc) if not v.skipped] == []
    out, trace = transform_fixpoint(sc)
    assert [v for v in check_all(out) if not v.skipped] == []


# -- conversion -------------------------------------------------------------

def test_to_simplified_buffer():
    sc = parse(
        """
        statechart Buffer for BufferClass {
            initial state Empty;
            state NonEmpty;
            Empty -> Empty : get() / send(-1);
            Empty -> NonEmpty : put(i) / v = i;
            NonEmpty -> Empty : get() / send(v);
            NonEmpty -> NonEmpty : put(i) / v = i;
        }
        """
    )
    flat, _ = transform_fixpoint(sc)
    simp = to_simplified(flat)
    assert len(simp.states) == 2
    assert len(simp.transitions) == 4
    assert simp.inv == CTrue()  # absent invariant normalizes to true


def test_to_simplified_rejects_residual_do():
    sc = parse("statechart D for C { initial state A { do / d(); } }")
    with pytest.raises(NotSimplifiable) as exc:
        to_simplified(sc)
    assert "do action" in str(exc.value)


def test_rule_names_bijective():
    assert len(RULE_NAMES) == 26
    assert sorted(RULE_NAMES) == list(range(1, 27))
    assert len(set(RULE_NAMES.values())) == 26
