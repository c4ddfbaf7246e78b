"""Closed-form solutions, finite-difference verification and grid export.

A verified family becomes an explicit solution by replacing every phi atom
with one of the five Riccati branches

    b < 0:  -sqrt(-b) tanh(sqrt(-b) xi),   -sqrt(-b) coth(sqrt(-b) xi)
    b = 0:  -1/xi
    b > 0:   sqrt(b) tan(sqrt(b) xi),      -sqrt(b) cot(sqrt(b) xi)

The numeric check below never touches :mod:`aennm.riccati`; derivatives come
from central differences evaluated in extended precision.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as cartesian
from typing import Mapping

import mpmath
import numpy as np

from .expr import (
    ONE, ZERO, Deriv, Expr, Func, IntPow, PhiAtom, Product, Rational, SingularPointError,
    Sum, Symbol, Var, atoms, eval_numeric, eval_with, func, mul, neg, num, power,
    substitute, symbols_of,
)
from .network import TrialFunction
from .parsing import PdeSpec
from .solver import SolutionFamily, resolve_assignment

__all__ = [
    "BranchKind", "BranchError", "NumericDomainError", "ClosedFormSolution", "ResidualReport",
    "GridData", "instantiate", "instantiate_all", "verify_numeric", "eval_grid", "export_grid",
    "grid_csv", "bind_coefficients", "max_relative_difference", "is_degenerate",
]


class BranchError(ValueError):
    """Branch and family disagree on the sign of the Riccati constant."""


class NumericDomainError(ArithmeticError):
    """No usable (non-singular) sample point."""


class BranchKind(enum.Enum):
    TANH_NEG = ("tanh", -1)
    COTH_NEG = ("coth", -1)
    RATIONAL_ZERO = ("rational", 0)
    TAN_POS = ("tan", 1)
    COT_POS = ("cot", 1)

    def __init__(self, label, sign):
        self.label = label
        self.sign = sign

    @property
    def sign_condition(self) -> str:
        return {-1: "b < 0", 0: "b = 0", 1: "b > 0"}[self.sign]

    def phi(self, xi: Expr, b: Expr) -> Expr:
        if self.sign == 0:
            return neg(power(xi, -1))
        k = func("sqrt", neg(b) if self.sign < 0 else b)
        z = mul(k, xi)
        if self is BranchKind.TANH_NEG:
            return neg(mul(k, func("tanh", z)))
        if self is BranchKind.COTH_NEG:
            return neg(mul(k, func("coth", z)))
        if self is BranchKind.TAN_POS:
            return mul(k, func("tan", z))
        return neg(mul(k, func("cot", z)))

    @classmethod
    def from_label(cls, label: str) -> "BranchKind":
        for kind in cls:
            if kind.label == label or kind.name.lower() == label.lower():
                return kind
        raise ValueError(f"unknown branch {label!r}")


@dataclass(frozen=True)
class ClosedFormSolution:
    expr: Expr
    branch: BranchKind | None
    family: SolutionFamily | None = None
    vars: tuple[str, ...] = ("x", "t")
    riccati: Symbol = Symbol("b")
    output: str = "u"

    @property
    def sign_condition(self) -> str:
        return self.branch.sign_condition if self.branch else ""

    @property
    def free_symbols(self) -> set[Symbol]:
        return symbols_of(self.expr)


def _sign_of(e: Expr):
    if isinstance(e, Rational):
        v = e.value
        return (v > 0) - (v < 0)
    return None


def instantiate(tf: TrialFunction, fam: SolutionFamily, branch: BranchKind) -> ClosedFormSolution:
    assign = resolve_assignment(fam.assignment)
    b = tf.ctx.b
    if b in assign:
        s = _sign_of(assign[b])
        if s is not None and s != branch.sign:
            raise BranchError(f"family fixes {b.name} = {assign[b]}, branch needs {branch.sign_condition}")
    elif branch.sign == 0:
        if any(c == b or (isinstance(c, Product) and b in c.factors) for c in fam.conditions):
            raise BranchError(f"family requires {b.name} != 0")
        assign = {k: _subst_checked(v, {b: ZERO}) for k, v in assign.items()}
        assign[b] = ZERO
    bexpr = assign.get(b, b)
    phis = {}
    for atom, arg in tf.ctx.atoms:
        xi = _subst_checked(arg, assign)
        phis[atom] = branch.phi(xi, bexpr)
    u = _subst_checked(_subst_checked(tf.expr, assign), phis)
    if any(isinstance(a, PhiAtom) for a in atoms(u)):
        raise BranchError("unregistered phi atom left after instantiation")
    return ClosedFormSolution(u, branch, fam, tf.spec.inputs, b, tf.spec.output)


def _subst_checked(e, bindings):
    try:
        return substitute(e, bindings)
    except ZeroDivisionError as exc:
        raise BranchError(f"branch makes the family singular: {exc}") from None


def instantiate_all(tf: TrialFunction, fam: SolutionFamily) -> list[ClosedFormSolution]:
    out = []
    for kind in BranchKind:
        try:
            out.append(instantiate(tf, fam, kind))
        except BranchError:
            continue
    return out


def is_degenerate(tf: TrialFunction, fam: SolutionFamily) -> bool:
    """True when the instantiated trial is constant in every independent variable."""
    for sol in instantiate_all(tf, fam):
        if any(isinstance(a, Var) for a in atoms(sol.expr)):
            return False
    return True


# ---------------------------------------------------------------------------
# coefficient binding


def _name(k) -> str:
    return k.name if isinstance(k, (Symbol, Var)) else str(k)


def bind_coefficients(sol: ClosedFormSolution, coeffs: Mapping, pde: PdeSpec | None = None,
                      check_conditions=True) -> dict[str, float]:
    """Free-symbol values plus the family's solved symbols evaluated at them."""
    values = {_name(k): float(v) for k, v in coeffs.items()}
    if sol.family is not None:
        assign = resolve_assignment(sol.family.assignment)
        for s, e in assign.items():
            try:
                v = eval_numeric(e, values)
            except (KeyError, ZeroDivisionError, SingularPointError):
                continue
            if s.name in values:
                given = values[s.name]
                if not math.isclose(given, v, rel_tol=1e-9, abs_tol=1e-12):
                    raise ValueError(f"coefficient {s.name}={given} contradicts the family value {v}")
            values[s.name] = v
        if check_conditions:
            for c in sol.family.conditions:
                try:
                    v = eval_numeric(c, values)
                except KeyError:
                    continue
                if abs(v) < 1e-12:
                    raise ValueError("coefficients violate a nonzero condition of the family")
    b = values.get(sol.riccati.name)
    if sol.branch is not None and b is not None:
        s = (b > 0) - (b < 0)
        if s != sol.branch.sign:
            raise BranchError(f"{sol.riccati.name}={b} violates {sol.sign_condition}")
    missing = {s.name for s in sol.free_symbols} - values.keys()
    if pde is not None:
        missing |= set(pde.params) - values.keys()
    if missing:
        raise KeyError(f"unbound coefficient(s): {', '.join(sorted(missing))}")
    return values


# ---------------------------------------------------------------------------
# finite-difference verification


def _mp_funcs():
    return {
        "tanh": mpmath.tanh, "cosh": mpmath.cosh, "sinh": mpmath.sinh,
        "tan": mpmath.tan, "cos": mpmath.cos, "sin": mpmath.sin,
        "coth": mpmath.coth, "cot": mpmath.cot, "sqrt": mpmath.sqrt,
        "_sin": mpmath.sin, "_sinh": mpmath.sinh, "_cos": mpmath.cos,
        "_const": lambda q: mpmath.mpf(q.numerator) / q.denominator,
    }


def _stencil(order: int):
    """Offsets (in units of h) and weights of the central difference of ``order``."""
    return [((order / 2 - k), (-1) ** k * math.comb(order, k)) for k in range(order + 1)]


def _fd(f, point: dict, orders: Mapping[str, int], h):
    """Central difference of ``f`` at ``point`` for mixed ``orders`` with step ``h``."""
    items = [(v, n) for v, n in sorted(orders.items()) if n]
    if not items:
        return f(point)
    stencils = [_stencil(n) for _, n in items]
    total = 0
    for combo in cartesian(*stencils):
        p = dict(point)
        w = 1
        for (v, _), (off, c) in zip(items, combo):
            p[v] = p[v] + off * h
            w *= c
        total += w * f(p)
    return total / h ** sum(n for _, n in items)


@dataclass
class ResidualReport:
    family_id: str
    branch: str
    max_residual: float
    median_residual: float
    seed: int
    points: int
    rejected: int = 0

    def as_dict(self) -> dict:
        return {"family_id": self.family_id, "branch": self.branch,
                "max_residual": self.max_residual, "median_residual": self.median_residual,
                "seed": self.seed, "points": self.points, "rejected": self.rejected}

    def render(self) -> str:
        return "".join(f"{k}: {v}\n" for k, v in self.as_dict().items())


def verify_numeric(sol: ClosedFormSolution, pde: PdeSpec, coeffs: Mapping, trials: int = 100,
                   seed: int = 0, domain=(-5.0, 5.0), h: float = 1e-10, reject: float = 1e-2,
                   dps: int = 100, family_id: str = "") -> ResidualReport:
    """Max/median |PDE residual| of ``sol`` at random points, by Richardson-extrapolated
    central differences (steps h and 2h) in ``dps``-digit arithmetic."""
    values = bind_coefficients(sol, coeffs, pde)
    fns = _mp_funcs()
    rng = np.random.default_rng(seed)
    vars_ = list(pde.vars)
    residuals, rejected = [], 0
    with mpmath.workdps(dps):
        env = {k: mpmath.mpf(v) for k, v in values.items()}
        hh = mpmath.mpf(h)  # exact binary value of the float step
        cache = {}

        def u_pow(k):
            def f(p):
                return eval_with(sol.expr, {**env, **p}, fns) ** k
            return f

        attempts = 0
        while len(residuals) < trials and attempts < 50 * trials:
            attempts += 1
            raw = rng.uniform(domain[0], domain[1], size=len(vars_))
            point = {v: mpmath.mpf(float(x)) for v, x in zip(vars_, raw)}
            try:
                fpoint = {v: float(x) for v, x in zip(vars_, raw)}
                eval_numeric(sol.expr, {**values, **fpoint})
                if pole_distance(sol.expr, values, fpoint) < reject:
                    raise SingularPointError("too close to a pole")
                leaves = {}
                for d in pde.derivs:
                    f = u_pow(d.power)
                    orders = dict(d.orders)
                    d1 = _fd(f, point, orders, hh)
                    d2 = _fd(f, point, orders, 2 * hh)
                    leaves[d] = (4 * d1 - d2) / 3 if orders else d1
                r = eval_with(pde.lhs, {**env, **point, **_deriv_keys(leaves)}, fns)
            except (SingularPointError, ZeroDivisionError, ValueError):
                rejected += 1
                continue
            residuals.append(abs(float(r)))
    if not residuals:
        raise NumericDomainError("every sampled point is singular")
    return ResidualReport(family_id or (sol.family.name if sol.family else ""),
                          sol.branch.label if sol.branch else "closed-form",
                          max(residuals), statistics.median(residuals), seed, len(residuals), rejected)


_GUARDS = {"coth": "sinh", "cot": "sin", "tan": "cos"}


def singular_quantities(e: Expr) -> list[Expr]:
    """Sub-expressions whose zeros are poles of ``e``."""
    out, seen = [], set()

    def walk(n):
        if n in seen:
            return
        seen.add(n)
        if isinstance(n, IntPow) and n.exp < 0:
            out.append(n.base)
        elif isinstance(n, Func) and n.kind in _GUARDS:
            out.append(func(_GUARDS[n.kind], n.arg))
        for c in getattr(n, "terms", ()) + getattr(n, "factors", ()):
            walk(c)
        if isinstance(n, IntPow):
            walk(n.base)
        elif isinstance(n, Func):
            walk(n.arg)

    walk(e)
    return out


def pole_distance(e: Expr, values: Mapping, point: Mapping, step: float = 1e-6) -> float:
    """First-order estimate |q| / |grad q| of the distance from ``point`` to the nearest pole."""
    env = {**values, **point}
    best = math.inf
    for q in singular_quantities(e):
        v = eval_numeric(q, env)
        grad2 = 0.0
        for var, x in point.items():
            hi = eval_numeric(q, {**env, var: x + step})
            lo = eval_numeric(q, {**env, var: x - step})
            grad2 += ((hi - lo) / (2 * step)) ** 2
        g = math.sqrt(grad2)
        if g == 0.0:
            if v == 0.0:
                return 0.0
            continue
        best = min(best, abs(v) / g)
    return best


def _deriv_keys(leaves: Mapping[Deriv, object]) -> dict:
    from .expr import render
    return {render(d): v for d, v in leaves.items()}


def max_relative_difference(a: Expr, b: Expr, coeffs: Mapping, vars_, n: int = 200, seed: int = 0,
                            domain=(-5.0, 5.0), reject: float = 1e-2) -> float:
    """max |a - b| / max(1, |b|) over ``n`` random non-singular points."""
    rng = np.random.default_rng(seed)
    worst, got, attempts = 0.0, 0, 0
    values = {_name(k): float(v) for k, v in coeffs.items()}
    while got < n and attempts < 50 * n:
        attempts += 1
        p = dict(values)
        p.update({v: float(x) for v, x in zip(vars_, rng.uniform(*domain, size=len(vars_)))})
        try:
            va = eval_numeric(a, p, pole_tol=reject)
            vb = eval_numeric(b, p, pole_tol=reject)
        except (SingularPointError, ZeroDivisionError):
            continue
        got += 1
        worst = max(worst, abs(va - vb) / max(1.0, abs(vb)))
    if not got:
        raise NumericDomainError("every sampled point is singular")
    return worst


# ---------------------------------------------------------------------------
# grids


@dataclass
class GridData:
    axes: dict  # var -> 1-D array, in row-major order (first axis slowest)
    values: np.ndarray  # shape = tuple(len(a) for a in axes.values())
    mask: np.ndarray  # True where the sample is pole-adjacent or non-finite
    fixed: dict = field(default_factory=dict)  # var -> value for sliced variables
    output: str = "u"

    @property
    def shape(self):
        return self.values.shape


def _np_eval(e: Expr, env: Mapping, tol: float, bad: list):
    if isinstance(e, Rational):
        return float(e.value)
    if isinstance(e, (Symbol, Var)):
        try:
            return env[e.name]
        except KeyError:
            raise KeyError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Sum):
        acc = 0.0
        for t in e.terms:
            acc = acc + _np_eval(t, env, tol, bad)
        return acc
    if isinstance(e, Product):
        acc = 1.0
        for f in e.factors:
            acc = acc * _np_eval(f, env, tol, bad)
        return acc
    if isinstance(e, IntPow):
        v = _np_eval(e.base, env, tol, bad)
        if e.exp < 0:
            near = np.abs(v) <= tol
            bad.append(near)
            v = np.where(near, np.nan, v)
            return 1.0 / v ** (-e.exp)
        return v ** e.exp
    if isinstance(e, Func):
        z = _np_eval(e.arg, env, tol, bad)
        k = e.kind
        guard = {"cot": np.sin, "coth": np.sinh, "tan": np.cos}.get(k)
        if guard is not None:
            near = np.abs(guard(z)) <= tol
            bad.append(near)
            z = np.where(near, np.nan, z)
        if k == "coth":
            return np.cosh(z) / np.sinh(z)
        if k == "cot":
            return np.cos(z) / np.sin(z)
        if k == "sqrt":
            if np.any(np.asarray(z) < 0):
                raise ValueError("square root of a negative number")
        return getattr(np, k)(z)
    raise TypeError(f"cannot evaluate {type(e).__name__} on a grid")


def eval_grid(sol: ClosedFormSolution, coeffs: Mapping, axes: Mapping, fixed: Mapping | None = None,
              pole_tol: float = 1e-3) -> GridData:
    """Evaluate on the tensor grid ``axes`` (var -> 1-D samples), other variables ``fixed``."""
    values = bind_coefficients(sol, coeffs, check_conditions=False)
    fixed = {k: float(v) for k, v in (fixed or {}).items()}
    axes = {k: np.asarray(v, dtype=float) for k, v in axes.items()}
    missing = set(sol.vars) - axes.keys() - fixed.keys()
    if missing:
        raise KeyError(f"no axis or fixed value for {', '.join(sorted(missing))}")
    mesh = np.meshgrid(*axes.values(), indexing="ij") if axes else []
    env = dict(values)
    env.update(fixed)
    env.update(dict(zip(axes, mesh)))
    shape = tuple(len(a) for a in axes.values())
    bad: list = []
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(_np_eval(sol.expr, env, pole_tol, bad), dtype=float), shape)
    mask = ~np.isfinite(vals)
    for b in bad:
        mask = mask | np.broadcast_to(b, shape)
    vals = np.where(mask, np.nan, vals)
    return GridData(axes, vals, mask, fixed, sol.output)


def _column_order(g: GridData) -> list[str]:
    names = list(g.axes) + [v for v in g.fixed if v not in g.axes]
    order = {"x": 0, "y": 1, "t": 2}
    return sorted(names, key=lambda v: (order.get(v, 3), v))


def grid_csv(g: GridData) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = _column_order(g)
    w.writerow(cols + [g.output])
    names = list(g.axes)
    for idx in np.ndindex(*g.shape):
        point = {v: g.axes[v][i] for v, i in zip(names, idx)}
        point.update(g.fixed)
        row = [repr(float(point[c])) for c in cols]
        row.append("" if g.mask[idx] else repr(float(g.values[idx])))
        w.writerow(row)
    return buf.getvalue()


def export_grid(g: GridData, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(grid_csv(g))
