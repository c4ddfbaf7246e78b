import math
from math import factorial

import pytest
from hypothesis import given, settings, strategies as st

from aennm.expr import PhiAtom, Symbol, Var, expand, num, power, simplify
from aennm.network import RiccatiContext
from aennm.parsing import parse_expr
from aennm.polys import PolyContext
from aennm.riccati import RiccatiError, diff, diff_multi

from conftest import load_trial
from helpers import same_rational
from strategies import raw_exprs

CTX = load_trial("2221_phi_phi2").ctx
phi1, phi2 = PhiAtom(1), PhiAtom(2)
x, t = Var("x"), Var("t")


def P(text):
    return parse_expr(text)


def test_phi_rule():
    assert diff(phi1, x, CTX) == P("w_x1*(b + phi1^2)")


def test_constant():
    assert diff(num(7), t, CTX) == num(0)


def test_second_derivative():
    got = diff(diff(phi2, x, CTX), x, CTX)
    assert expand(got) == expand(P("2*w_x2^2*(b*phi2 + phi2^3)"))


def test_multi_on_square():
    got = diff_multi(power(phi2, 2), {"t": 2}, CTX)
    assert expand(got) == P("6*w_t2^2*phi2^4 + 8*b*w_t2^2*phi2^2 + 2*b^2*w_t2^2")


def test_multi_empty_orders():
    e = P("w_13*phi1 + phi2^2")
    assert diff_multi(e, {}, CTX) == e


def _leading(e, atom):
    ctx = PolyContext.for_exprs(e)
    p = ctx.to_poly(e)
    i = ctx.index[atom]
    deg = max(m[i] for m in p.monoms())
    lead = sum((ctx.from_poly(ctx.ring({m: c})) for m, c in p.terms() if m[i] == deg), num(0))
    return deg, lead


def test_fourth_derivative_leading_term():
    deg, lead = _leading(expand(diff_multi(phi2, {"x": 4}, CTX)), phi2)
    assert deg == 5
    assert lead == P("24*w_x2^4*phi2^5")


@pytest.mark.parametrize("n", range(1, 6))
def test_leading_coefficient_law(n):
    deg, lead = _leading(expand(diff_multi(phi1, {"x": n}, CTX)), phi1)
    assert deg == n + 1
    assert lead == num(factorial(n)) * power(Symbol("w_x1"), n) * power(phi1, n + 1)


def test_unregistered_atom():
    with pytest.raises(RiccatiError, match="unregistered"):
        diff(PhiAtom(9), x, CTX)


def test_func_nodes_rejected():
    with pytest.raises(RiccatiError):
        diff(P("tanh(x)"), x, CTX)


def test_negative_power_quotient_rule():
    e = P("1/(w_14*phi1 + b_4)")
    assert same_rational(diff(e, x, CTX), P("-w_14*w_x1*(b + phi1^2)/(w_14*phi1 + b_4)^2"))


polys_in_atoms = raw_exprs(neg_powers=False, max_leaves=8)


@settings(max_examples=1000, deadline=None)
@given(raw_exprs(max_leaves=8))
def test_derivatives_commute(e):
    try:
        e = simplify(e)
        dxt = diff(diff(e, x, CTX), t, CTX)
        dtx = diff(diff(e, t, CTX), x, CTX)
    except ZeroDivisionError:
        return
    assert same_rational(dxt, dtx)


def _phi_degree(e):
    ctx = PolyContext.for_exprs(e, extra=[phi1, phi2])
    p = ctx.to_poly(e)
    if p.is_zero:
        return None
    i, j = ctx.index[phi1], ctx.index[phi2]
    return max(m[i] + m[j] for m in p.monoms())


@settings(max_examples=1000, deadline=None)
@given(polys_in_atoms)
def test_closure_and_degree_growth(e):
    try:
        e = expand(simplify(e))
    except ZeroDivisionError:
        return
    d = expand(diff(e, x, CTX))
    # closure: still a polynomial in the atoms, no new leaves beyond w_x*, b
    ctx = PolyContext.for_exprs(d)
    ctx.to_poly(d)
    deg_e = _phi_degree(e)
    deg_d = _phi_degree(d)
    if deg_e is None or deg_e == 0 or deg_d is None:
        return
    assert deg_d == deg_e + 1


def test_degree_grows_by_one_for_single_atom():
    for k in range(1, 6):
        d = expand(diff(power(phi1, k), x, CTX))
        assert _phi_degree(d) == k + 1


@pytest.mark.parametrize("kind", ["tanh", "coth", "rational", "tan", "cot"])
def test_branch_formulas_solve_riccati(kind):
    """|phi' - b - phi^2| <= 1e-8 relative, 50 points x 10 values of b."""
    import mpmath
    import numpy as np
    from aennm.emitter import BranchKind, _mp_funcs
    from aennm.expr import eval_numeric, eval_with

    branch = BranchKind.from_label(kind)
    xi = Var("s")
    fns = _mp_funcs()
    rng = np.random.default_rng(3)
    for _ in range(10):
        bval = branch.sign * rng.uniform(0.2, 2.0)
        phi = branch.phi(xi, num(0) if branch.sign == 0 else Symbol("b"))
        checked = 0
        while checked < 50:
            s0 = rng.uniform(-3, 3)
            try:
                eval_numeric(phi, {"b": bval, "s": s0}, pole_tol=1e-2)
            except ArithmeticError:
                continue
            with mpmath.workdps(40):
                env = {"b": mpmath.mpf(bval)}
                f = lambda s: eval_with(phi, {**env, "s": s}, fns)
                f0 = f(mpmath.mpf(s0))
                dphi = mpmath.diff(f, mpmath.mpf(s0))
                rhs = env["b"] + f0 * f0
                assert abs(dphi - rhs) <= 1e-8 * max(1, abs(rhs))
            checked += 1
