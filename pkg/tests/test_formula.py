import itertools
import random

import pytest

from ilvelt.formula import (
    Atom,
    BOTTOM,
    Box,
    IL_AXIOMS,
    Implies,
    InstantiationError,
    ParseError,
    Rhd,
    SCHEMAS,
    instantiate,
    parse,
    print_formula,
    subformulas,
)

p, q, r = Atom("p"), Atom("q"), Atom("r")


def test_parse_p_axiom_shape():
    assert parse("p |> q -> [](p |> q)") == Implies(Rhd(p, q), Box(Rhd(p, q)))


def test_parse_negation_desugars():
    assert parse("~p") == Implies(p, BOTTOM)


def test_parse_diamond_desugars():
    assert parse("<> p") == Implies(Box(Implies(p, BOTTOM)), BOTTOM)


def test_parse_connective_desugaring():
    assert parse("p & q") == Implies(Implies(p, Implies(q, BOTTOM)), BOTTOM)
    assert parse("p | q") == Implies(Implies(p, BOTTOM), q)
    assert parse("p <-> q") == parse("(p -> q) & (q -> p)")


def test_precedence():
    # & binds before |, | before |>, |> before ->
    assert parse("p & q | r") == parse("(p & q) | r")
    assert parse("p | q |> r") == parse("(p | q) |> r")
    assert parse("p |> q -> r") == parse("(p |> q) -> r")
    assert parse("a -> b -> c") == parse("a -> (b -> c)")


def test_rhd_chain_rejected():
    with pytest.raises(ParseError):
        parse("p |> q |> r")


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as e:
        parse("p -> $")
    assert e.value.pos == 5
    with pytest.raises(ParseError):
        parse("p ->")


def test_comments_and_whitespace():
    assert parse("p   ->  # trailing words\n q") == Implies(p, q)


def test_print_examples():
    assert print_formula(BOTTOM) == "false"
    assert print_formula(Rhd(p, q)) == "p |> q"
    assert print_formula(Box(Box(p))) == "[][]p"
    assert print_formula(Implies(Rhd(p, q), Box(Rhd(p, q)))) == "p |> q -> [](p |> q)"


def _formulas(depth, atoms):
    if depth == 0:
        return [BOTTOM] + [Atom(a) for a in atoms]
    smaller = _formulas(depth - 1, atoms)
    out = list(smaller)
    out += [Box(f) for f in smaller]
    out += [Implies(a, b) for a in smaller for b in smaller]
    out += [Rhd(a, b) for a in smaller for b in smaller]
    return out


def test_roundtrip_exhaustive_depth_two():
    for f in _formulas(2, ["p", "q"]):
        assert parse(print_formula(f)) == f


def rand_formula(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return rng.choice([BOTTOM, p, q])
    kind = rng.choice(["i", "b", "r"])
    if kind == "i":
        return Implies(rand_formula(rng, depth - 1), rand_formula(rng, depth - 1))
    if kind == "b":
        return Box(rand_formula(rng, depth - 1))
    return Rhd(rand_formula(rng, depth - 1), rand_formula(rng, depth - 1))


def test_roundtrip_random_deeper():
    rng = random.Random(2024)
    for _ in range(2000):
        f = rand_formula(rng, rng.randint(3, 6))
        assert parse(print_formula(f)) == f


def test_catalog_contents():
    assert set(SCHEMAS) == {
        "L1", "L2", "L3", "J1", "J2", "J3", "J4", "J5",
        "M", "P", "M0", "W", "Wstar", "P0", "R", "Rstar",
    }
    assert IL_AXIOMS == ("L1", "L2", "L3", "J1", "J2", "J3", "J4", "J5")
    assert SCHEMAS["J5"].body == parse("<>A |> A")
    assert SCHEMAS["R"].body == parse("A |> B -> ~(A |> ~C) |> B & []C")
    assert SCHEMAS["Wstar"].body == parse("A |> B -> B & []C |> B & []C & []~A")


def test_rstar_is_r_with_boxed_negation_conjoined():
    r_body = SCHEMAS["R"].body
    rstar_body = SCHEMAS["Rstar"].body
    conjoined = parse("(B & []C) & []~A")
    assert rstar_body == Implies(
        r_body.left, Rhd(r_body.right.left, conjoined)
    )


def test_instantiate_r_example():
    inst = instantiate(SCHEMAS["R"], {"A": p, "B": q, "C": r})
    assert inst == parse("p|>q -> ~(p|>~r) |> q & []r")


def test_instantiate_p0_example():
    inst = instantiate(SCHEMAS["P0"], {"A": p, "B": q})
    assert inst == parse("p |> <>q -> [](p |> q)")


def test_instantiate_l2_with_bottom():
    assert instantiate(SCHEMAS["L2"], {"A": BOTTOM}) == parse("[]false -> [][]false")


def test_instantiate_missing_binding():
    with pytest.raises(InstantiationError):
        instantiate(SCHEMAS["R"], {"A": p, "B": q})


def test_instantiate_leaves_object_atoms_alone():
    from ilvelt.formula import Schema

    s = Schema("X", parse("p -> A"))
    assert instantiate(s, {"A": q}) == parse("p -> q")


def test_instantiate_without_metavariables_is_identity():
    from ilvelt.formula import Schema

    body = parse("p |> q -> []p")
    s = Schema("X", body)
    assert instantiate(s, {}) == body


def test_subformulas():
    assert subformulas(p) == [p]
    assert subformulas(Box(p)) == [p, Box(p)]
    assert subformulas(Rhd(p, Box(p))) == [p, Box(p), Rhd(p, Box(p))]
    # children strictly before parents, no duplicates
    f = parse("(p -> q) -> (p -> q)")
    subs = subformulas(f)
    assert len(subs) == len(set(subs))
    for i, g in enumerate(subs):
        for child in subs[i + 1:]:
            assert g != child


def test_metavariable_and_atom_namespaces_disjoint():
    f = parse("A -> p")
    names = {g.name for g in subformulas(f) if isinstance(g, Atom)}
    assert names == {"A", "p"}
    from ilvelt.formula import is_metavariable

    assert is_metavariable("A") and not is_metavariable("p")
