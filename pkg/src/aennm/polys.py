"""Bridge between :mod:`aennm.expr` trees and sparse multivariate polynomials.

Polynomial arithmetic is delegated to sympy's sparse ``PolyElement`` over QQ
(gmpy2-backed).  On top of it sits :class:`RationalForm`, a numerator together
with a *factored* denominator ``{base: exponent}``.  Denominator bases are kept
primitive and are never multiplied out, which keeps the quotient rule cheap.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping

import sympy
from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring

from .expr import (
    Deriv, Expr, Func, IntPow, PhiAtom, Product, Rational, Sum, Symbol, Var,
    add, atoms, mul, num, power,
)

__all__ = ["PolyContext", "RationalForm", "to_fraction", "poly_key"]


def to_fraction(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


def poly_key(p: PolyElement):
    return tuple(sorted((m, to_fraction(c)) for m, c in p.terms()))


def _gen_name(e: Expr) -> str:
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Var):
        return "$" + e.name
    if isinstance(e, PhiAtom):
        return f"$phi{e.index}"
    raise TypeError(f"{type(e).__name__} cannot be a polynomial generator")


class PolyContext:
    """A polynomial ring whose generators are expression leaves."""

    def __init__(self, leaves: Iterable[Expr]):
        leaves = sorted(set(leaves), key=lambda e: e.key)
        if not leaves:
            leaves = [Symbol("$dummy")]
        self.leaves: tuple[Expr, ...] = tuple(leaves)
        self.index = {e: i for i, e in enumerate(self.leaves)}
        self.ring, *self.gens = ring([sympy.Symbol(_gen_name(e)) for e in self.leaves], QQ)
        self.ngens = len(self.leaves)

    @classmethod
    def for_exprs(cls, *exprs: Expr, extra: Iterable[Expr] = ()) -> "PolyContext":
        leaves = set(extra)
        for e in exprs:
            leaves |= {a for a in atoms(e) if isinstance(a, (Symbol, Var, PhiAtom))}
        return cls(leaves)

    def gen(self, leaf: Expr) -> PolyElement:
        return self.gens[self.index[leaf]]

    def const(self, value) -> PolyElement:
        return self.ring(QQ(Fraction(value).numerator, Fraction(value).denominator))

    # -- Expr -> polynomial ------------------------------------------------
    def to_rational(self, e: Expr, leaf_map: Mapping[Expr, "RationalForm"] | None = None,
                    _cache=None) -> "RationalForm":
        if _cache is None:
            _cache = {}
        hit = _cache.get(e)
        if hit is not None:
            return hit
        if leaf_map and e in leaf_map:
            out = leaf_map[e]
        elif isinstance(e, Rational):
            out = RationalForm(self, self.const(e.value))
        elif isinstance(e, (Symbol, Var, PhiAtom)):
            if e not in self.index:
                raise KeyError(f"{e} is not a generator of this context")
            out = RationalForm(self, self.gen(e))
        elif isinstance(e, Sum):
            out = self.to_rational(e.terms[0], leaf_map, _cache)
            for t in e.terms[1:]:
                out = out + self.to_rational(t, leaf_map, _cache)
        elif isinstance(e, Product):
            out = self.to_rational(e.factors[0], leaf_map, _cache)
            for f in e.factors[1:]:
                out = out * self.to_rational(f, leaf_map, _cache)
        elif isinstance(e, IntPow):
            out = self.to_rational(e.base, leaf_map, _cache) ** e.exp
        elif isinstance(e, (Func, Deriv)):
            raise TypeError(f"{type(e).__name__} nodes have no polynomial form")
        else:
            raise TypeError(type(e).__name__)
        _cache[e] = out
        return out

    def to_poly(self, e: Expr) -> PolyElement:
        r = self.to_rational(e)
        if r.den:
            raise ValueError(f"not a polynomial: {e}")
        return r.num

    # -- polynomial -> Expr ------------------------------------------------
    def from_poly(self, p: PolyElement) -> Expr:
        terms = []
        for monom, c in p.terms():
            factors = [num(to_fraction(c))]
            for i, k in enumerate(monom):
                if k:
                    factors.append(power(self.leaves[i], k))
            terms.append(mul(*factors))
        return add(*terms)

    def from_rational(self, r: "RationalForm") -> Expr:
        return mul(self.from_poly(r.num), *(power(self.from_poly(b), -k) for b, k in r.den))

    def monomial_expr(self, monom) -> Expr:
        return mul(*(power(self.leaves[i], k) for i, k in enumerate(monom) if k))

    def used_leaves(self, p: PolyElement) -> set[Expr]:
        used = set()
        for monom in p.itermonoms():
            used.update(self.leaves[i] for i, k in enumerate(monom) if k)
        return used


def _normalize_denominator(ctx: PolyContext, q: PolyElement):
    """Split q = c * monomial * rest; return (c, [(base, exp), ...])."""
    if q.is_zero:
        raise ZeroDivisionError("zero denominator")
    lc = q.LC
    q = q.quo_ground(lc)
    monoms = list(q.itermonoms())
    low = [min(m[i] for m in monoms) for i in range(ctx.ngens)]
    bases = []
    if any(low):
        q = ctx.ring({tuple(a - b for a, b in zip(m, low)): c for m, c in q.iterterms()})
        bases.extend((ctx.gens[i], k) for i, k in enumerate(low) if k)
    if not q.is_ground:
        bases.append((q, 1))
    elif q != 1:
        lc = lc * q.LC
    return lc, bases


class RationalForm:
    """``num / prod(base**exp)`` with denominators kept factored."""

    __slots__ = ("ctx", "num", "den")

    def __init__(self, ctx: PolyContext, num: PolyElement, den=()):
        self.ctx = ctx
        self.num = num
        merged: dict = {}
        for b, k in den:
            if k:
                merged[b] = merged.get(b, 0) + k
        self.den = tuple(sorted(((b, k) for b, k in merged.items() if k),
                                key=lambda bk: poly_key(bk[0])))

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def den_poly(self) -> PolyElement:
        out = self.ctx.ring.one
        for b, k in self.den:
            out *= b ** k
        return out

    def _lift(self, target: dict) -> PolyElement:
        mine = dict(self.den)
        out = self.num
        for b, k in target.items():
            extra = k - mine.get(b, 0)
            if extra:
                out = out * b ** extra
        return out

    def __add__(self, other: "RationalForm") -> "RationalForm":
        if other.num.is_zero:
            return self
        if self.num.is_zero:
            return other
        target = dict(self.den)
        for b, k in other.den:
            target[b] = max(target.get(b, 0), k)
        return RationalForm(self.ctx, self._lift(target) + other._lift(target), target.items())

    def __neg__(self):
        return RationalForm(self.ctx, -self.num, self.den)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "RationalForm") -> "RationalForm":
        if self.num.is_zero or other.num.is_zero:
            return RationalForm(self.ctx, self.ctx.ring.zero)
        return RationalForm(self.ctx, self.num * other.num, self.den + other.den)

    def inverse(self) -> "RationalForm":
        c, bases = _normalize_denominator(self.ctx, self.num)
        return RationalForm(self.ctx, self.den_poly().quo_ground(c), bases)

    def __pow__(self, k: int) -> "RationalForm":
        if k < 0:
            return self.inverse() ** (-k)
        return RationalForm(self.ctx, self.num ** k, [(b, e * k) for b, e in self.den])

    def derive(self, gen_derivs: Mapping[int, PolyElement]) -> "RationalForm":
        """Apply the derivation fixed by ``gen_derivs`` (generator index -> image).

        Only denominator bases with a nonzero derivative have their exponent
        raised, so derivatives commute exactly at the representation level.
        """
        d = lambda p: _derive_poly(self.ctx, p, gen_derivs)
        bumped = []
        for b, k in self.den:
            db = d(b)
            if not db.is_zero:
                bumped.append((b, k, db))
        if not bumped:
            return RationalForm(self.ctx, d(self.num), self.den)
        prod_all = self.ctx.ring.one
        for b, _, _ in bumped:
            prod_all *= b
        new_num = d(self.num) * prod_all
        for j, (b, k, db) in enumerate(bumped):
            others = self.ctx.ring.one
            for i, (b2, _, _) in enumerate(bumped):
                if i != j:
                    others *= b2
            new_num -= self.num * db * others * k
        return RationalForm(self.ctx, new_num, list(self.den) + [(b, 1) for b, _, _ in bumped])

    def to_expr(self) -> Expr:
        return self.ctx.from_rational(self)


def _derive_poly(ctx: PolyContext, p: PolyElement, gen_derivs: Mapping[int, PolyElement]):
    out = ctx.ring.zero
    for i, image in gen_derivs.items():
        g = ctx.gens[i]
        if p.degree(g) > 0:
            out += p.diff(g) * image
    return out
