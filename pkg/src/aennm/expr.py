"""Exact symbolic expressions.

Every node is immutable and built through the smart constructors ``num``,
``add``, ``mul``, ``power`` and ``func``, which return the canonical form
directly.  Canonical forms compare structurally, so ``==`` is the equality
of this module.  Products of sums are *not* expanded by canonicalisation;
use :func:`expand` for that.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational as _RationalABC
from typing import Callable, Iterable, Mapping

__all__ = [
    "Expr", "Rational", "Symbol", "Var", "PhiAtom", "Deriv", "Sum", "Product",
    "IntPow", "Func", "FUNC_KINDS", "ZERO", "ONE",
    "num", "add", "mul", "power", "func", "neg", "sub", "div",
    "simplify", "substitute", "expand", "atoms", "symbols_of", "contains",
    "eval_numeric", "eval_with", "render", "SingularPointError", "UnboundSymbolError",
]

FUNC_KINDS = ("tanh", "coth", "tan", "cot", "cosh", "sinh", "cos", "sin", "sqrt")


class SingularPointError(ArithmeticError):
    """Evaluation hit a pole (or came within the requested tolerance of one)."""


class UnboundSymbolError(KeyError):
    def __str__(self):
        return f"unbound symbol {self.args[0]!r}"


class Expr:
    __slots__ = ("_hash", "_key")

    rank = -1

    def _args(self):
        raise NotImplementedError

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((type(self).__name__, self._args()))
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if isinstance(other, (int, Fraction)):
            other = num(other)
        if type(self) is not type(other):
            return False
        return hash(self) == hash(other) and self._args() == other._args()

    def __ne__(self, other):
        return not self == other

    @property
    def key(self):
        """Total-order sort key used for canonical ordering."""
        k = self._key
        if k is None:
            k = self._key = self._make_key()
        return k

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"Expr({render(self)!r})"

    def __str__(self):
        return render(self)

    # arithmetic sugar
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("only integer exponents are supported")
        return power(self, k)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return num(x)
    raise TypeError(f"cannot use {type(x).__name__} in an exact expression")


class Rational(Expr):
    __slots__ = ("value",)
    rank = 0

    def __init__(self, value: Fraction):
        self._hash = self._key = None
        self.value = value

    def _args(self):
        return (self.value,)

    def _make_key(self):
        return (0, self.value)


class Var(Expr):
    """Independent variable (x, t, y, ...)."""

    __slots__ = ("name",)
    rank = 1

    def __init__(self, name: str):
        self._hash = self._key = None
        self.name = name

    def _args(self):
        return (self.name,)

    def _make_key(self):
        return (1, self.name)


class Symbol(Expr):
    """Parameter symbol: weights, biases, PDE constants, the Riccati constant."""

    __slots__ = ("name",)
    rank = 2

    def __init__(self, name: str):
        self._hash = self._key = None
        self.name = name

    def _args(self):
        return (self.name,)

    def _make_key(self):
        return (2, self.name)


class PhiAtom(Expr):
    """Riccati solution applied to a registered affine argument."""

    __slots__ = ("index",)
    rank = 3

    def __init__(self, index: int):
        self._hash = self._key = None
        self.index = index

    def _args(self):
        return (self.index,)

    def _make_key(self):
        return (3, self.index)


class Deriv(Expr):
    """Partial derivative of ``unknown**power``; ``orders`` is a sorted tuple of (var, n)."""

    __slots__ = ("unknown", "orders", "power")
    rank = 4

    def __init__(self, unknown: str, orders=(), power: int = 1):
        self._hash = self._key = None
        self.unknown = unknown
        if isinstance(orders, Mapping):
            orders = orders.items()
        self.orders = tuple(sorted((v, n) for v, n in orders if n))
        self.power = power

    def _args(self):
        return (self.unknown, self.orders, self.power)

    def _make_key(self):
        return (4, self.unknown, self.power, self.orders)


class Func(Expr):
    __slots__ = ("kind", "arg")
    rank = 5

    def __init__(self, kind: str, arg: Expr):
        self._hash = self._key = None
        self.kind = kind
        self.arg = arg

    def _args(self):
        return (self.kind, self.arg)

    def _make_key(self):
        return (5, self.kind, self.arg.key)


class IntPow(Expr):
    __slots__ = ("base", "exp")
    rank = 6

    def __init__(self, base: Expr, exp: int):
        self._hash = self._key = None
        self.base = base
        self.exp = exp

    def _args(self):
        return (self.base, self.exp)

    def _make_key(self):
        return (6, self.base.key, self.exp)


class Product(Expr):
    __slots__ = ("factors",)
    rank = 7

    def __init__(self, factors: tuple):
        self._hash = self._key = None
        self.factors = factors

    def _args(self):
        return self.factors

    def _make_key(self):
        return (7, tuple(f.key for f in self.factors))


class Sum(Expr):
    __slots__ = ("terms",)
    rank = 8

    def __init__(self, terms: tuple):
        self._hash = self._key = None
        self.terms = terms

    def _args(self):
        return self.terms

    def _make_key(self):
        return (8, tuple(t.key for t in self.terms))


ZERO = Rational(Fraction(0))
ONE = Rational(Fraction(1))
_MINUS_ONE = Rational(Fraction(-1))


def num(value) -> Rational:
    if isinstance(value, Rational):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not allowed in exact expressions")
    if not isinstance(value, _RationalABC):
        value = Fraction(value)
    value = Fraction(value)
    if value == 0:
        return ZERO
    if value == 1:
        return ONE
    return Rational(value)


def _split_coeff(e: Expr):
    """Split a term into (rational coefficient, coefficient-free rest)."""
    if isinstance(e, Rational):
        return e.value, ONE
    if isinstance(e, Product) and isinstance(e.factors[0], Rational):
        rest = e.factors[1:]
        return e.factors[0].value, rest[0] if len(rest) == 1 else Product(rest)
    return Fraction(1), e


def _split_power(e: Expr):
    if isinstance(e, IntPow):
        return e.base, e.exp
    return e, 1


def add(*args) -> Expr:
    const = Fraction(0)
    coeffs: dict[Expr, Fraction] = {}
    stack = [_coerce(a) for a in reversed(args)]
    while stack:
        a = stack.pop()
        if isinstance(a, Sum):
            stack.extend(reversed(a.terms))
        elif isinstance(a, Rational):
            const += a.value
        else:
            c, rest = _split_coeff(a)
            coeffs[rest] = coeffs.get(rest, 0) + c
    terms = []
    for rest, c in coeffs.items():
        if c == 0:
            continue
        terms.append((rest.key, c, rest))
    terms.sort(key=lambda t: (t[0], t[1]))
    out = [rest if c == 1 else _scale(rest, c) for _, c, rest in terms]
    if const != 0:
        out.append(num(const))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Sum(tuple(out))


def _scale(rest: Expr, c: Fraction) -> Expr:
    # rest is coefficient-free and canonical
    if isinstance(rest, Product):
        return Product((num(c),) + rest.factors)
    return Product((num(c), rest))


def mul(*args) -> Expr:
    coeff = Fraction(1)
    powers: dict[Expr, int] = {}
    stack = [_coerce(a) for a in reversed(args)]
    while stack:
        a = stack.pop()
        if isinstance(a, Product):
            stack.extend(reversed(a.factors))
        elif isinstance(a, Rational):
            coeff *= a.value
        else:
            base, k = _split_power(a)
            powers[base] = powers.get(base, 0) + k
    if coeff == 0:
        return ZERO
    roots = [b for b, k in powers.items() if abs(k) >= 2 and isinstance(b, Func) and b.kind == "sqrt"]
    if roots:
        extra = []
        for b in roots:
            q, powers[b] = divmod(powers[b], 2)
            extra.append(power(b.arg, q))
        rest = [b if k == 1 else IntPow(b, k) for b, k in powers.items() if k]
        return mul(num(coeff), *rest, *extra)
    factors = []
    for base, k in powers.items():
        if k == 0:
            continue
        f = base if k == 1 else IntPow(base, k)
        factors.append(((base.key, k), f))
    factors.sort(key=lambda t: t[0])
    out = [f for _, f in factors]
    if not out:
        return num(coeff)
    if coeff == 1:
        return out[0] if len(out) == 1 else Product(tuple(out))
    return Product((num(coeff),) + tuple(out))


def power(base: Expr, k: int) -> Expr:
    base = _coerce(base)
    if not isinstance(k, int):
        raise TypeError("only integer exponents are supported")
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Rational):
        if base.value == 0 and k < 0:
            raise ZeroDivisionError("zero denominator")
        return num(base.value ** k)
    if isinstance(base, IntPow):
        return power(base.base, base.exp * k)
    if isinstance(base, Product):
        return mul(*(power(f, k) for f in base.factors))
    if isinstance(base, Func) and base.kind == "sqrt" and abs(k) >= 2:
        q, r = divmod(k, 2)
        return mul(power(base.arg, q), base) if r else power(base.arg, q)
    return IntPow(base, k)


def neg(e: Expr) -> Expr:
    return mul(_MINUS_ONE, e)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def div(a: Expr, b: Expr) -> Expr:
    return mul(a, power(b, -1))


def _exact_sqrt(q: Fraction):
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


_ZERO_AT_ZERO = {"tanh", "tan", "sinh", "sin", "sqrt"}
_ONE_AT_ZERO = {"cosh", "cos"}


def func(kind: str, arg) -> Expr:
    if kind not in FUNC_KINDS:
        raise ValueError(f"unknown function {kind!r}")
    arg = _coerce(arg)
    if isinstance(arg, Rational):
        if arg.value == 0:
            if kind in _ZERO_AT_ZERO:
                return ZERO
            if kind in _ONE_AT_ZERO:
                return ONE
        if kind == "sqrt":
            if arg.value < 0:
                raise ValueError("square root of a negative rational")
            r = _exact_sqrt(arg.value)
            if r is not None:
                return num(r)
    return Func(kind, arg)


# ---------------------------------------------------------------------------
# traversal


def _rebuild(e: Expr, leaf: Callable[[Expr], Expr | None]) -> Expr:
    r = leaf(e)
    if r is not None:
        return r
    if isinstance(e, Sum):
        return add(*(_rebuild(t, leaf) for t in e.terms))
    if isinstance(e, Product):
        return mul(*(_rebuild(f, leaf) for f in e.factors))
    if isinstance(e, IntPow):
        return power(_rebuild(e.base, leaf), e.exp)
    if isinstance(e, Func):
        return func(e.kind, _rebuild(e.arg, leaf))
    return e


def simplify(e: Expr) -> Expr:
    """Return the canonical form of ``e`` (idempotent)."""
    return _rebuild(e, lambda _: None)


def atoms(e: Expr) -> set[Expr]:
    """Leaves of ``e`` other than rational constants."""
    out = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Sum):
            stack.extend(n.terms)
        elif isinstance(n, Product):
            stack.extend(n.factors)
        elif isinstance(n, IntPow):
            stack.append(n.base)
        elif isinstance(n, Func):
            stack.append(n.arg)
        elif not isinstance(n, Rational):
            out.add(n)
    return out


def symbols_of(e: Expr) -> set[Symbol]:
    return {a for a in atoms(e) if isinstance(a, Symbol)}


def contains(e: Expr, target: Expr) -> bool:
    return target in atoms(e)


def substitute(e: Expr, bindings: Mapping[Expr, Expr]) -> Expr:
    """Simultaneous substitution of leaves followed by canonicalisation."""
    if not bindings:
        return e
    clean = {}
    for target, repl in bindings.items():
        if not isinstance(target, (Symbol, Var, PhiAtom, Deriv)):
            raise TypeError(f"cannot bind {target!r}")
        repl = _coerce(repl)
        if contains(repl, target):
            raise ValueError(f"binding for {render(target)} refers to itself")
        clean[target] = repl
    return _rebuild(e, clean.get)


def _distribute(a: Expr, b: Expr) -> Expr:
    # a and b are already expanded; multiply termwise so mul never re-folds a power
    ta = a.terms if isinstance(a, Sum) else (a,)
    tb = b.terms if isinstance(b, Sum) else (b,)
    return add(*(mul(p, q) for p in ta for q in tb))


def expand(e: Expr) -> Expr:
    """Distribute products and non-negative powers over sums."""
    if isinstance(e, Sum):
        return add(*(expand(t) for t in e.terms))
    if isinstance(e, Product):
        acc = ONE
        for f in e.factors:
            acc = _distribute(acc, expand(f))
        return acc
    if isinstance(e, IntPow):
        base = expand(e.base)
        if e.exp > 0 and isinstance(base, Sum):
            out = base
            for _ in range(e.exp - 1):
                out = _distribute(out, base)
            return out
        return power(base, e.exp)
    if isinstance(e, Func):
        return func(e.kind, expand(e.arg))
    return e


# ---------------------------------------------------------------------------
# numeric evaluation


def _leaf_name(e: Expr) -> str:
    return e.name if isinstance(e, (Symbol, Var)) else render(e)


def _lookup(bindings, e):
    if e in bindings:
        return bindings[e]
    name = _leaf_name(e)
    if name in bindings:
        return bindings[name]
    raise UnboundSymbolError(name)


def _normalize_bindings(bindings):
    return {(k.name if isinstance(k, (Symbol, Var)) else k): v for k, v in bindings.items()}


def eval_numeric(e: Expr, bindings: Mapping, pole_tol: float = 0.0) -> float:
    """IEEE double evaluation of a phi-free expression.

    Raises :class:`SingularPointError` at a pole of ``cot``/``coth``/``tan`` or
    a negative power, or within ``pole_tol`` of one (measured on the vanishing
    quantity: the base, ``sin``, ``sinh`` or ``cos`` of the argument).
    """
    return _eval(e, _normalize_bindings(bindings), pole_tol, _FLOAT_FUNCS)


def eval_with(e: Expr, bindings: Mapping, funcs: Mapping, pole_tol: float = 0.0):
    """Like :func:`eval_numeric` with a caller-supplied function table.

    ``funcs`` maps every function kind plus ``_sin``/``_sinh``/``_cos`` (used
    for pole detection) and optionally ``_const`` (rational constants).
    """
    return _eval(e, _normalize_bindings(bindings), pole_tol, funcs)


def _sing(v, tol):
    return v == 0 or abs(v) <= tol


_FLOAT_FUNCS = {
    "tanh": math.tanh, "cosh": math.cosh, "sinh": math.sinh,
    "tan": math.tan, "cos": math.cos, "sin": math.sin,
    "coth": lambda z: math.cosh(z) / math.sinh(z),
    "cot": lambda z: math.cos(z) / math.sin(z),
    "sqrt": math.sqrt,
    "_sin": math.sin, "_sinh": math.sinh, "_cos": math.cos,
}


def _eval(e: Expr, b, tol, fns):
    if isinstance(e, Rational):
        return fns.get("_const", float)(e.value)
    if isinstance(e, (Symbol, Var)):
        return _lookup(b, e)
    if isinstance(e, Sum):
        acc = 0
        for t in e.terms:
            acc = acc + _eval(t, b, tol, fns)
        return acc
    if isinstance(e, Product):
        acc = 1
        for f in e.factors:
            acc = acc * _eval(f, b, tol, fns)
        return acc
    if isinstance(e, IntPow):
        v = _eval(e.base, b, tol, fns)
        if e.exp < 0:
            if _sing(v, tol):
                raise SingularPointError("singular point")
            return 1 / v ** (-e.exp)
        return v ** e.exp
    if isinstance(e, Func):
        z = _eval(e.arg, b, tol, fns)
        k = e.kind
        if k == "cot" and _sing(fns["_sin"](z), tol):
            raise SingularPointError("singular point")
        if k == "coth" and _sing(fns["_sinh"](z), tol):
            raise SingularPointError("singular point")
        if k == "tan" and _sing(fns["_cos"](z), tol):
            raise SingularPointError("singular point")
        if k == "sqrt" and z < 0:
            raise ValueError("square root of a negative number")
        return fns[k](z)
    if isinstance(e, PhiAtom):
        raise ValueError("phi atoms must be instantiated before numeric evaluation")
    if isinstance(e, Deriv):
        return _lookup(b, e)
    raise TypeError(f"cannot evaluate {type(e).__name__}")


# ---------------------------------------------------------------------------
# rendering


def _render_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _render_deriv(d: Deriv) -> str:
    head = d.unknown if d.power == 1 else f"({d.unknown}^{d.power})"
    if not d.orders:
        return head
    return head + "_" + "".join(v * n for v, n in d.orders)


def _render_factor(f: Expr) -> str:
    if isinstance(f, Sum) or (isinstance(f, Rational) and f.value < 0):
        return f"({render(f)})"
    return render(f)


def _render_base(f: Expr) -> str:
    if isinstance(f, (Sum, Product, IntPow)) or isinstance(f, Rational) or (
            isinstance(f, Deriv) and f.power != 1):
        return f"({render(f)})"
    return render(f)


def render(e: Expr) -> str:
    """Canonical text form; parses back to the same expression."""
    if isinstance(e, Rational):
        return _render_rational(e.value)
    if isinstance(e, (Symbol, Var)):
        return e.name
    if isinstance(e, PhiAtom):
        return f"phi{e.index}"
    if isinstance(e, Deriv):
        return _render_deriv(e)
    if isinstance(e, Func):
        return f"{e.kind}({render(e.arg)})"
    if isinstance(e, IntPow):
        return f"{_render_base(e.base)}^{e.exp}"
    if isinstance(e, Product):
        c, rest = _split_coeff(e)
        factors = rest.factors if isinstance(rest, Product) else (rest,)
        body = "*".join(_render_factor(f) for f in factors)
        if c == 1:
            return body
        if c == -1:
            return "-" + body
        return f"{_render_rational(c)}*{body}"
    if isinstance(e, Sum):
        parts = [render(e.terms[0])]
        for t in e.terms[1:]:
            c, _ = _split_coeff(t)
            if c < 0:
                pos = neg(t)
                parts.append(" - " + (f"({render(pos)})" if isinstance(pos, Sum) else render(pos)))
            else:
                parts.append(" + " + render(t))
        return "".join(parts)
    raise TypeError(type(e).__name__)
