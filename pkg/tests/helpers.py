"""Exact comparison helpers shared by the tests."""
from aennm.polys import PolyContext


def same_rational(a, b) -> bool:
    """a == b as rational functions of their leaves."""
    ctx = PolyContext.for_exprs(a, b)
    return (ctx.to_rational(a) - ctx.to_rational(b)).is_zero
