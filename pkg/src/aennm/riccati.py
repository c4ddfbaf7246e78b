"""Differentiation closed under the Riccati rule phi' = b + phi**2.

A phi atom applied to the affine argument xi = sum(w_v * v) + c differentiates
as d(phi)/dv = w_v * (b + phi**2), so derivatives of polynomials (and of
negative powers of polynomials) in the atoms stay in the same class.
"""
from __future__ import annotations

from typing import Mapping

from .expr import (
    ONE, ZERO, Deriv, Expr, Func, IntPow, PhiAtom, Product, Rational, Sum, Symbol, Var,
    add, mul, num, power,
)
from .network import RiccatiContext
from .polys import PolyContext, RationalForm

__all__ = ["diff", "diff_multi", "derivation_images", "diff_rational", "RiccatiError"]


class RiccatiError(ValueError):
    pass


def _var_name(v) -> str:
    return v.name if isinstance(v, Var) else str(v)


def diff(e: Expr, v, ctx: RiccatiContext) -> Expr:
    v = _var_name(v)
    cache: dict[Expr, Expr] = {}

    def d(n: Expr) -> Expr:
        hit = cache.get(n)
        if hit is not None:
            return hit
        if isinstance(n, (Rational, Symbol)):
            out = ZERO
        elif isinstance(n, Var):
            out = ONE if n.name == v else ZERO
        elif isinstance(n, PhiAtom):
            try:
                arg = ctx.argument(n)
            except KeyError:
                raise RiccatiError(f"unregistered atom phi{n.index}") from None
            out = mul(d(arg), add(ctx.b, power(n, 2)))
        elif isinstance(n, Sum):
            out = add(*(d(t) for t in n.terms))
        elif isinstance(n, Product):
            fs = n.factors
            parts = []
            for i, f in enumerate(fs):
                df = d(f)
                if df != ZERO:
                    parts.append(mul(*fs[:i], df, *fs[i + 1:]))
            out = add(*parts)
        elif isinstance(n, IntPow):
            db = d(n.base)
            out = ZERO if db == ZERO else mul(num(n.exp), power(n.base, n.exp - 1), db)
        elif isinstance(n, (Func, Deriv)):
            raise RiccatiError(f"cannot differentiate {type(n).__name__} nodes symbolically")
        else:
            raise TypeError(type(n).__name__)
        cache[n] = out
        return out

    return d(e)


def diff_multi(e: Expr, orders: Mapping, ctx: RiccatiContext) -> Expr:
    for v, n in sorted((_var_name(v), n) for v, n in dict(orders).items()):
        if n < 0:
            raise ValueError("derivative orders must be non-negative")
        for _ in range(n):
            e = diff(e, v, ctx)
    return e


def derivation_images(pctx: PolyContext, ctx: RiccatiContext, v) -> dict:
    """Generator index -> polynomial image of d/dv on that generator."""
    v = _var_name(v)
    images = {}
    var = Var(v)
    if var in pctx.index:
        images[pctx.index[var]] = pctx.ring.one
    b = pctx.gen(ctx.b) if ctx.b in pctx.index else None
    for atom, arg in ctx.atoms:
        if atom not in pctx.index:
            continue
        coeff = pctx.to_poly(diff(arg, v, ctx))
        if coeff.is_zero:
            continue
        if b is None:
            raise RiccatiError("Riccati constant missing from the polynomial context")
        phi = pctx.gen(atom)
        images[pctx.index[atom]] = coeff * (b + phi ** 2)
    return images


def diff_rational(r: RationalForm, orders: Mapping, ctx: RiccatiContext) -> RationalForm:
    """Same rule as :func:`diff`, applied to a rational form."""
    for v, n in sorted((_var_name(v), n) for v, n in dict(orders).items()):
        images = derivation_images(r.ctx, ctx, v)
        for _ in range(n):
            r = r.derive(images)
    return r
