import copy

import pytest

from chorver.backends import BoundedEnum, Refuted
from chorver.hoare import (DerivationTree, HoareError, check_adequacy, check_consistency,
                           check_derivation, reconstruct_derivation, replays, verify, wlp)
from chorver.logic import TRUE, alpha_equal, loc_subst, satisfies
from chorver.parser import parse_expr, parse_formula, parse_program
from chorver.syntax import NIL, Call

# the first displayed formula of the DH derivation, transcribed
DH_PHI1 = "(q.g ^ q.b mod q.m) ^ p.a mod p.m == (p.g ^ p.a mod p.m) ^ q.b mod q.m"
DH_DOMAIN = BoundedEnum(0, 5)


def test_wlp_base_cases(zeros):
    psi = parse_formula("p.x == q.y")
    assert wlp(NIL, psi) == psi
    prog, _, spec = zeros
    pre = spec.procedures["Z"][0]
    assert wlp(Call("Z"), psi, spec.procedures) == pre
    assert wlp(Call("Z"), TRUE, spec.procedures) == pre
    with pytest.raises(HoareError):
        wlp(Call("Z"), psi, {})


def test_wlp_dh_is_phi1(dh):
    prog, _, spec = dh
    w = wlp(prog.main, spec.post)
    assert alpha_equal(w, parse_formula(DH_PHI1))
    # the same formula through the explicit chain of four substitutions
    e = parse_expr
    f = loc_subst(spec.post, "q", "s", "q", e("a ^ b mod m"))
    assert alpha_equal(f, parse_formula("p.s == q.a ^ q.b mod q.m"))
    f = loc_subst(f, "p", "s", "p", e("b ^ a mod m"))
    f = loc_subst(f, "p", "b", "q", e("g ^ b mod m"))
    assert alpha_equal(f, parse_formula("(q.g ^ q.b mod q.m) ^ p.a mod p.m == q.a ^ q.b mod q.m"))
    f = loc_subst(f, "q", "a", "p", e("g ^ a mod m"))
    assert alpha_equal(w, f)
    assert wlp(prog.main, spec.post) == w  # pure up to canonical form


def test_wlp_conditional_uses_distinct_fresh_variables():
    prog = parse_program("processes p, q; main { if p.x < 1 then { if q.y < 1 then { 0 } "
                         "else { 0 } } else { 0 } }")
    w = wlp(prog.main, parse_formula("p.x == q.y"))
    from chorver.logic import formula_str
    text = formula_str(w)
    assert "p.x < 1" in text and "q.y < 1" in text


def test_verify_examples(dh, zeros):
    prog, _, spec = dh
    assert verify(spec.pre, prog.main, spec.post, {}, DH_DOMAIN, prog).valid
    psi = parse_formula("p.x == q.y")
    assert verify(psi, NIL, psi).valid
    prog2 = parse_program("processes p; main { p.x := 0; 0 }")
    post = parse_formula("p.x = $X && $X = 1")
    v = verify(TRUE, prog2.main, post, {}, BoundedEnum(), prog2)
    assert v.status == "Refuted"
    assert replays(v.counterexample, v.failing, prog2)
    assert not satisfies(v.counterexample.state, v.counterexample.rho, v.wlp)


def test_broken_spec_is_refuted(broken):
    prog, spec = broken
    v = verify(spec.pre, prog.main, spec.post, {}, DH_DOMAIN, prog)
    assert v.status == "Refuted" and replays(v.counterexample, v.failing, prog)


def test_zeros_consistency_and_adequacy(zeros):
    prog, _, spec = zeros
    assert all(v.valid for v in check_consistency(spec.procedures, prog).values())
    assert all(v.valid for v in check_adequacy(spec.procedures, prog, spec.post).values())
    assert verify(spec.pre, prog.main, spec.post, spec.procedures, BoundedEnum(), prog).valid


def test_consistency_refuted_with_false_post(zeros):
    prog, _, spec = zeros
    bad_post = parse_formula("(f(p.x) = 0) == false")
    bad = {"Z": (spec.procedures["Z"][0], bad_post)}
    [v] = check_consistency(bad, prog, BoundedEnum(0, 7)).values()
    assert v.status == "Refuted"


def test_empty_map_is_vacuously_consistent():
    prog = parse_program("processes p; main { 0 }")
    assert check_consistency({}, prog) == {}


def test_adequacy_reflexive_and_weakened(zeros):
    prog, _, spec = zeros
    psi = spec.post
    # wlp of the body under the map itself, used literally as the precondition
    lit = {"Z": (wlp(prog.procedures["Z"], psi, spec.procedures), psi)}
    [v] = check_adequacy(lit, prog, psi).values()
    assert v.valid
    weak = {"Z": (parse_formula("p.x = $X && $X = 0"), psi)}
    [v] = check_adequacy(weak, prog, psi, BoundedEnum(0, 7)).values()
    assert v.status == "Refuted"
    back = v.obligations[1]
    assert back.name == "wlp -> pre" and isinstance(back.result, Refuted)
    # a state satisfying the wlp with p.x other than 0
    assert back.result.state["p"]["x"] != 0
    assert replays(back.result, back, prog)
    other = {"Z": (spec.procedures["Z"][0], parse_formula("p.x == p.x"))}
    [v] = check_adequacy(other, prog, psi).values()
    assert v.status == "Refuted"


def test_call_site_obligation_keeps_verify_sound():
    # the map claims Z establishes p.x = 1, which is false; a caller relying on
    # a different postcondition must not verify through it
    prog = parse_program("processes p; procedure Z { p.x := 2; 0 } main { Z }")
    spec = {"Z": (TRUE, parse_formula("p.x == 2"))}
    v = verify(TRUE, prog.main, parse_formula("p.x == 3"), spec, BoundedEnum(0, 3), prog)
    assert v.status == "Refuted" and v.failing.name == "call Z"


def test_dh_derivation_shape(dh):
    prog, _, spec = dh
    tree = reconstruct_derivation(spec.pre, prog.main, spec.post, {}, DH_DOMAIN, prog)
    assert tree.rules() == ["H|Weak", "H|Com", "H|Com", "H|Assign", "H|Assign", "H|Nil"]
    assert check_derivation(tree, {}, DH_DOMAIN, prog) == []
    assert alpha_equal(tree.children[0].pre, parse_formula(DH_PHI1))


def test_nil_derivation_is_single_node():
    psi = parse_formula("p.x == q.y")
    tree = reconstruct_derivation(psi, NIL, psi)
    assert tree.rules() == ["H|Nil"]


def test_zeros_derivations(zeros):
    prog, _, spec = zeros
    tree = reconstruct_derivation(spec.pre, prog.main, spec.post, spec.procedures,
                                  BoundedEnum(), prog)
    assert tree.rules() == ["H|Assign", "H|Call"]
    assert check_derivation(tree, spec.procedures, BoundedEnum(), prog) == []
    pre, post = spec.procedures["Z"]
    body = reconstruct_derivation(pre, prog.procedures["Z"], post, spec.procedures,
                                  BoundedEnum(), prog)
    assert body.rules()[:3] == ["H|Weak", "H|Com", "H|Cond"]
    assert check_derivation(body, spec.procedures, BoundedEnum(), prog) == []


def test_refuses_invalid_triple(broken):
    prog, spec = broken
    with pytest.raises(HoareError):
        reconstruct_derivation(spec.pre, prog.main, spec.post, {}, DH_DOMAIN, prog)


def test_checker_catches_tampering(dh, zeros):
    prog, _, spec = dh
    tree = reconstruct_derivation(spec.pre, prog.main, spec.post, {}, DH_DOMAIN, prog)
    t = copy.deepcopy(tree)
    t.children[0].children[0].rule = "H|Assign"
    assert check_derivation(t, {}, DH_DOMAIN, prog)
    t = copy.deepcopy(tree)
    t.children[0].pre = spec.post
    assert check_derivation(t, {}, DH_DOMAIN, prog)
    # a weakening step whose side condition is false
    bogus = DerivationTree("H|Weak", TRUE, NIL, spec.post,
                           [DerivationTree("H|Nil", spec.post, NIL, spec.post)],
                           [(TRUE, spec.post), (spec.post, spec.post)])
    assert any("not valid" in p for p in check_derivation(bogus, {}, DH_DOMAIN, prog))
    zprog, _, zspec = zeros
    t = DerivationTree("H|Call", TRUE, Call("Z"), zspec.post)
    assert check_derivation(t, zspec.procedures, BoundedEnum(), zprog)
