"""Hypothesis strategies for raw (non-canonical) expression trees."""
from fractions import Fraction

from hypothesis import strategies as st

from aennm.expr import Func, IntPow, PhiAtom, Product, Rational, Sum, Symbol, Var

VARS = ("x", "t")
SYMS = ("p", "q", "w_x1")

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=4).map(Rational)


def leaves(phi=True, funcs=False):
    opts = [rationals, st.sampled_from(VARS).map(Var), st.sampled_from(SYMS).map(Symbol)]
    if phi:
        opts.append(st.sampled_from((1, 2)).map(PhiAtom))
    return st.one_of(*opts)


def raw_exprs(phi=True, funcs=False, max_leaves=12, neg_powers=True):
    """Trees built with the bare node constructors, so nothing is canonical yet."""
    lo = -2 if neg_powers else 0

    def extend(children):
        parts = [
            st.lists(children, min_size=1, max_size=3).map(lambda xs: Sum(tuple(xs))),
            st.lists(children, min_size=1, max_size=3).map(lambda xs: Product(tuple(xs))),
            st.tuples(children, st.integers(lo, 3)).map(lambda a: IntPow(*a)),
        ]
        if funcs:
            parts.append(st.tuples(st.sampled_from(("tanh", "cos", "sin", "cosh")), children)
                         .map(lambda a: Func(*a)))
        return st.one_of(*parts)

    return st.recursive(leaves(phi), extend, max_leaves=max_leaves)


def bindings():
    vals = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False).filter(lambda v: abs(v) > 0.1)
    return st.fixed_dictionaries({n: vals for n in VARS + SYMS})


def small_fraction():
    return st.fractions(min_value=-3, max_value=3, max_denominator=3).map(Fraction)
