import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierltl.ltl.automaton import ltl_to_buchi, nnf
from hierltl.ltl.search import (
    AcceptingPath, NoAcceptingPath, RoiTransitionSystem, accepts_lasso, consecutive_pairs,
    find_accepting_path,
)
from hierltl.ltl.semantics import evaluate_on_lasso
from hierltl.ltl.syntax import (
    TRUE, Always, And, Atom, Eventually, Implies, LtlSyntaxError, Next, Not, Or, Release,
    UndeclaredAtomError, Until, parse_ltl, size, to_text,
)

OFFICE = ("p1", "p2", "p3", "p4")
OFFICE_FORMULA = "[]<> p2 && []<> p4 && <> p3 && (! p3) U p4"
OFFICE_MOVES = {"p1": ["p1", "p2"], "p2": list(OFFICE), "p3": ["p2", "p3", "p4"], "p4": ["p2", "p3", "p4"]}
a, b = Atom("a"), Atom("b")


def test_parse_office_formula():
    f = parse_ltl(OFFICE_FORMULA, OFFICE)
    gf = lambda x: Always(Eventually(Atom(x)))
    assert f == And(And(And(gf("p2"), gf("p4")), Eventually(Atom("p3"))), Until(Not(Atom("p3")), Atom("p4")))


def test_parse_unary_chain():
    assert parse_ltl("G F a", ["a"]) == Always(Eventually(a))
    assert parse_ltl("GF a", ["a"]) == Always(Eventually(a))
    assert parse_ltl("[]<>a", ["a"]) == Always(Eventually(a))


def test_parse_precedence():
    assert parse_ltl("a U b U a", "ab") == Until(a, Until(b, a))
    assert parse_ltl("a R b && a", "ab") == And(Release(a, b), a)
    assert parse_ltl("a || b && a", "ab") == Or(a, And(b, a))
    assert parse_ltl("a -> b -> a", "ab") == Implies(a, Implies(b, a))
    assert parse_ltl("!a U b", "ab") == Until(Not(a), b)
    assert parse_ltl("X (a || b)", "ab") == Next(Or(a, b))
    assert parse_ltl("true U b", "ab") == Until(TRUE, b)


@pytest.mark.parametrize("text", ["a U", "(a", "a b", "&& a", "a )", "", "a $ b"])
def test_parse_syntax_errors(text):
    with pytest.raises(LtlSyntaxError):
        parse_ltl(text, "ab")


def test_syntax_error_position():
    with pytest.raises(LtlSyntaxError) as err:
        parse_ltl("a U", "ab")
    assert err.value.position == 3


def test_undeclared_atom():
    with pytest.raises(UndeclaredAtomError):
        parse_ltl("F c", "ab")


def test_reserved_atom_names():
    with pytest.raises(ValueError):
        parse_ltl("F U", ["U"])


def formula_strategy(atoms=("a", "b")):
    leaves = st.sampled_from([Atom(x) for x in atoms] + [TRUE])
    return st.recursive(
        leaves,
        lambda sub: st.one_of(
            st.builds(Not, sub), st.builds(Next, sub), st.builds(Eventually, sub), st.builds(Always, sub),
            st.builds(And, sub, sub), st.builds(Or, sub, sub), st.builds(Implies, sub, sub),
            st.builds(Until, sub, sub), st.builds(Release, sub, sub),
        ),
        max_leaves=8,
    )


@settings(max_examples=300, deadline=None)
@given(formula_strategy())
def test_print_parse_roundtrip(f):
    assert parse_ltl(to_text(f), "ab") == f


def test_evaluate_examples():
    p, q = Atom("p"), Atom("q")
    assert evaluate_on_lasso(Always(Eventually(p)), [], ["p"])
    assert not evaluate_on_lasso(Eventually(q), ["p"], ["p"])
    f = parse_ltl(OFFICE_FORMULA, OFFICE)
    assert evaluate_on_lasso(f, ["p1", "p2", "p4", "p3"], ["p2", "p4"])
    assert not evaluate_on_lasso(f, ["p1", "p3", "p4"], ["p2", "p4"])
    with pytest.raises(ValueError):
        evaluate_on_lasso(p, ["p"], [])


def test_evaluate_next_and_until_on_seam():
    assert evaluate_on_lasso(Next(Next(a)), ["b"], ["b", "a"])
    assert not evaluate_on_lasso(Until(a, b), ["a"], ["a"])
    assert evaluate_on_lasso(Release(b, a), ["a"], ["a"])


def _lassos(atoms, max_total):
    for n in range(1, max_total + 1):
        for word in itertools.product(atoms, repeat=n):
            for loop in range(n):
                yield word[:loop], word[loop:]


@pytest.mark.parametrize("f", [Eventually(a), Always(a), TRUE, Until(Not(a), b), Always(Eventually(b))])
def test_automaton_matches_oracle_short_lassos(f):
    aut = ltl_to_buchi(f)
    for pre, suf in _lassos("ab", 4):
        assert accepts_lasso(aut, pre, suf) == evaluate_on_lasso(f, pre, suf), (pre, suf)


def test_nnf_pushes_negation():
    f = nnf(Not(Until(a, Next(b))))
    assert f == Release(Not(a), Next(Not(b)))
    assert nnf(Not(Always(a))) == Until(TRUE, Not(a))


@settings(max_examples=150, deadline=None)
@given(formula_strategy())
def test_automaton_matches_oracle_random(f):
    aut = ltl_to_buchi(f)
    for pre, suf in _lassos("ab", 3):
        assert accepts_lasso(aut, pre, suf) == evaluate_on_lasso(f, pre, suf)


def test_automaton_guards_use_declared_atoms():
    f = parse_ltl(OFFICE_FORMULA, OFFICE)
    aut = ltl_to_buchi(f)
    assert aut.acceptance
    for edges in aut.edges.values():
        for guard, target in edges:
            assert guard.positive | guard.negative <= set(OFFICE)
            assert target in aut.states
    text = aut.dump()
    assert text.startswith(f"states {len(aut.states)}")


def test_office_path():
    ts = RoiTransitionSystem.from_adjacency(OFFICE, OFFICE_MOVES)
    f = parse_ltl(OFFICE_FORMULA, OFFICE)
    path = find_accepting_path(ts, ltl_to_buchi(f), "p1")
    assert evaluate_on_lasso(f, path.prefix, path.suffix)
    assert path.respects(ts)
    assert path == AcceptingPath(("p1", "p2", "p4", "p3"), ("p2", "p4"))


def test_single_self_loop():
    ts = RoiTransitionSystem.from_adjacency(["p"], {"p": ["p"]})
    path = find_accepting_path(ts, ltl_to_buchi(Always(Atom("p"))), "p")
    assert path == AcceptingPath((), ("p",))


def test_unreachable_region():
    ts = RoiTransitionSystem.from_adjacency(["p", "q"], {"p": ["p"], "q": ["q", "p"]})
    with pytest.raises(NoAcceptingPath):
        find_accepting_path(ts, ltl_to_buchi(Eventually(Atom("q"))), "p")


def test_false_is_unrealizable():
    ts = RoiTransitionSystem.complete(["p"])
    with pytest.raises(NoAcceptingPath):
        find_accepting_path(ts, ltl_to_buchi(parse_ltl("false", ["p"])), "p")


def test_transition_system_validation():
    with pytest.raises(ValueError):
        RoiTransitionSystem.from_adjacency(["p"], {"p": ["q"]})


def test_consecutive_pairs_examples():
    office = AcceptingPath(("p1", "p2", "p4", "p3"), ("p2", "p4"))
    assert consecutive_pairs(office) == [("p1", "p2"), ("p2", "p4"), ("p4", "p3"), ("p3", "p2"), ("p4", "p2")]
    assert consecutive_pairs(AcceptingPath((), ("a",))) == [("a", "a")]
    assert consecutive_pairs(AcceptingPath(("a",), ("b", "c"))) == [("a", "b"), ("b", "c"), ("c", "b")]


moves_strategy = st.fixed_dictionaries(
    {r: st.lists(st.sampled_from("abc"), min_size=1, max_size=3, unique=True) for r in "abc"}
)


@settings(max_examples=150, deadline=None)
@given(formula_strategy("abc"), moves_strategy, st.sampled_from("abc"))
def test_returned_paths_are_sound(f, moves, start):
    ts = RoiTransitionSystem.from_adjacency("abc", moves)
    aut = ltl_to_buchi(f)
    try:
        path = find_accepting_path(ts, aut, start)
    except NoAcceptingPath:
        # no short lasso of the system may satisfy the formula either
        for pre, suf in _lassos("abc", 4):
            word = pre + suf
            if word[0] != start:
                continue
            ok = AcceptingPath(pre, suf).respects(ts)
            assert not (ok and evaluate_on_lasso(f, pre, suf))
        return
    assert (path.prefix + path.suffix)[0] == start
    assert path.respects(ts)
    assert evaluate_on_lasso(f, path.prefix, path.suffix)


def test_size():
    assert size(parse_ltl(OFFICE_FORMULA, OFFICE)) == 15
