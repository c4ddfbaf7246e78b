import pytest

from aennm.expr import Symbol, num
from aennm.parsing import ParseError, parse_expr
from aennm.solver import SolutionFamily, render_family
from aennm.textio import (parse_coefficients, parse_families, parse_solution, render_families,
                          render_solution)

P = parse_expr


def test_brace_list_with_commas_and_chains():
    fams = parse_families("{\n  w_13 = w_14 = 0,  b = b\n  b_4 = -b*w_24\n  nonzero: b, w_24\n}\n")
    (fam,) = fams
    assert fam.assignment == {Symbol("w_13"): num(0), Symbol("w_14"): num(0), Symbol("b_4"): P("-b*w_24")}
    assert fam.conditions == (Symbol("b"), Symbol("w_24"))


def test_header_names_and_tags():
    fams = parse_families("# family F2 [degenerate]\n{ p = 1 }\n# family F3\n{ q = 2 }\n")
    assert [f.name for f in fams] == ["F2", "F3"]
    assert fams[0].tags == frozenset({"degenerate"})


def test_bare_family_without_braces():
    (fam,) = parse_families("p = 2*q\n")
    assert fam.assignment == {Symbol("p"): P("2*q")}


def test_greek_names_canonicalised():
    (fam,) = parse_families("{ α = 1 }")
    assert Symbol("alpha") in fam.assignment


def test_conflicting_binding():
    with pytest.raises(ParseError, match="conflicting"):
        parse_families("{ p = 1, p = 2 }")


def test_unclosed_brace_position():
    text = "{ p = 1\n"
    with pytest.raises(ParseError) as info:
        parse_families(text)
    assert info.value.offset == 0


def test_family_round_trip():
    fam = SolutionFamily({Symbol("b_5"): P("w_4u/(2*b*w_24)"), Symbol("w_13"): num(0)},
                         conditions=(Symbol("b"),), name="F1")
    (again,) = parse_families(render_families([fam]))
    assert again.assignment == fam.assignment and again.conditions == fam.conditions
    assert again.name == "F1"


def test_coefficients():
    assert parse_coefficients("b = -1, w_x2 = 2\n# note\ngamma = 1/2\n") == \
        {"b": -1.0, "w_x2": 2.0, "gamma": 0.5}
    with pytest.raises(ParseError):
        parse_coefficients("b -1")


def test_solution_round_trip():
    e = parse_expr("-w_4u/(2*b*w_24*cosh(2*sqrt(-b)*(t*w_t2 + x*w_x2 + b_2)))", vars=("x", "t"))
    text = render_solution(e, ("x", "t"), "tanh", None, "b < 0")
    assert text.startswith("# requires b < 0\n")
    expr, vars_, branch, fam = parse_solution(text)
    assert expr == e and vars_ == ("x", "t") and branch == "tanh" and fam is None


def test_solution_needs_vars_first():
    with pytest.raises(ParseError, match="vars"):
        parse_solution("u = x\nvars x\n")


def test_solution_unknown_directive():
    with pytest.raises(ParseError, match="unknown directive"):
        parse_solution("vars x\nspeed 3\nu = x\n")
