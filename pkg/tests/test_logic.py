import random

import pytest
from hypothesis import assume, given, settings, strategies as st

from chorver.gen import Gen, GenConfig
from chorver.logic import (FALSE, TRUE, And, EqAtom, Let, Not,
                           alpha_equal, canonical, formula_str, loc_subst, localise,
                           satisfies, subst)
from chorver.parser import parse_expr, parse_formula
from chorver.state import EvalError, State, eval_expr

lexpr = lambda s: parse_expr(s, localised=True)  # noqa: E731


def test_localise():
    assert localise(parse_expr("y - z"), "p") == lexpr("p.y - p.z")
    assert localise(parse_expr("5"), "p") == lexpr("5")
    assert localise(parse_expr("g ^ a mod m"), "q") == lexpr("q.g ^ q.a mod q.m")


def test_loc_subst_examples():
    phi = parse_formula("p.x > 3")
    got = loc_subst(phi, "p", "x", "p", parse_expr("y - z"))
    assert alpha_equal(got, parse_formula("p.y - p.z > 3"))
    psi = parse_formula("p.s == q.s")
    phi4 = loc_subst(psi, "q", "s", "q", parse_expr("a ^ b mod m"))
    assert alpha_equal(phi4, parse_formula("p.s == q.a ^ q.b mod q.m"))
    delta = parse_formula("$X < $Y")
    assert loc_subst(delta, "q", "x", "p", parse_expr("e + 1")) == delta


def test_substitution_is_homomorphic():
    a, b = parse_formula("p.x = $X"), parse_formula("q.y = $Y")
    e = parse_expr("y + 1")
    assert subst(And(a, Not(b)), "p", "x", localise(e, "p")) == \
        And(subst(a, "p", "x", localise(e, "p")), Not(subst(b, "p", "x", localise(e, "p"))))


def test_satisfies_examples():
    sigma = State({"p": {"x": 5}})
    assert satisfies(sigma, {"X": 5}, parse_formula("p.x = $X"))
    phi = parse_formula("p.x = $X")
    assert not satisfies(sigma, {"X": 5}, And(phi, Not(phi)))
    assert satisfies(sigma, {}, TRUE) and not satisfies(sigma, {}, FALSE)


def test_sugar_binds_its_variable():
    f = parse_formula("p.s == q.s")
    assert isinstance(f, Let)
    assert satisfies(State({"p": {"s": 2}, "q": {"s": 2}}), {}, f)
    assert not satisfies(State({"p": {"s": 2}, "q": {"s": 3}}), {}, f)


def test_undefined_expression_satisfies_no_equality():
    f = parse_formula("2 ^ p.x = $X")
    assert not satisfies(State({"p": {"x": -1}}), {"X": 0}, f)


@pytest.mark.parametrize("src", [
    "p.x == q.y", "p.x = $X && $X = 3", "!(p.x < q.y) || $X <= 2", "p.b => q.c",
    "(f(p.x) = 0) == true", "true == true", "let $A = p.x + 1 in $A = $B", "p.x == 3",
])
def test_print_parse_round_trip(src):
    f = parse_formula(src)
    assert parse_formula(formula_str(f)) == f


def test_canonical_renames_only_bound_variables():
    f = And(Let("#7", lexpr("p.x"), EqAtom(lexpr("q.y"), "#7")), EqAtom(lexpr("p.x"), "X"))
    c = canonical(f)
    assert c.left.var == "#1" and c.right.var == "X"
    assert alpha_equal(f, Let("#9", lexpr("p.x"), EqAtom(lexpr("q.y"), "#9")) if False else f)
    assert not alpha_equal(EqAtom(lexpr("p.x"), "X"), EqAtom(lexpr("p.x"), "Y"))


# --- properties --------------------------------------------------------------

small = st.integers(0, 4)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**9), small, small, st.integers(-3, 8))
def test_lemma1(seed, x, y, other):
    """Localised evaluation agrees with local evaluation."""
    g = Gen(random.Random(seed), GenConfig())
    e = g.expr(3)
    sigma = State({"p": {"x": x, "y": y}, "q": {"x": y, "y": x}})
    try:
        v = eval_expr(e, sigma["p"])
    except EvalError:
        assume(False)
    assert satisfies(sigma, {"X": v}, EqAtom(localise(e, "p"), "X"))
    assume(other != v)
    assert not satisfies(sigma, {"X": other}, EqAtom(localise(e, "p"), "X"))


def corollary1_instance(rng: random.Random) -> bool:
    g = Gen(rng, GenConfig(max_procs=3))
    phi = g.formula(3)
    procs = g.procs
    sigma = State({p: {x: rng.randint(0, 3) for x in g.vars} for p in procs})
    rho = {"X": rng.randint(0, 3)}
    p, q = rng.choice(procs), rng.choice(procs)
    x = rng.choice(g.vars)
    e = g.expr(2)
    v = eval_expr(e, sigma[p])
    lhs = satisfies(sigma.update(q, x, v), rho, phi)
    rhs = satisfies(sigma, rho, loc_subst(phi, q, x, p, e))
    return lhs == rhs


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 10**9))
def test_corollary1(seed):
    """Substitution in the formula is the same as updating the state."""
    assert corollary1_instance(random.Random(seed))
