"""Trial substitution, denominator clearing and coefficient collection."""
from __future__ import annotations

from dataclasses import dataclass, field

from .expr import Deriv, Expr, PhiAtom, Symbol, Var, atoms, mul, power, render
from .network import RiccatiContext, TrialFunction
from .parsing import PdeSpec
from .polys import PolyContext, RationalForm, poly_key, to_fraction
from .riccati import diff_rational

__all__ = [
    "AlgebraicSystem", "residual", "residual_form", "clear_denominators", "collect",
    "build_system", "render_system", "SystemError_",
]


class SystemError_(ValueError):
    pass


@dataclass(frozen=True)
class AlgebraicSystem:
    equations: tuple[Expr, ...]
    assumptions: tuple[Expr, ...] = ()
    monomial_index: dict = field(default_factory=dict)  # phi/var monomial -> coefficient

    @property
    def symbols(self) -> set[Symbol]:
        out = set()
        for eq in self.equations:
            out |= {a for a in atoms(eq) if isinstance(a, Symbol)}
        return out

    def __len__(self):
        return len(self.equations)


def _pipeline_context(pde: PdeSpec, tf: TrialFunction) -> PolyContext:
    missing = set(pde.vars) - set(tf.spec.inputs)
    if missing:
        raise SystemError_(f"variable mismatch: trial has no input(s) {sorted(missing)}")
    net_syms = {s.name for s in tf.spec.all_symbols()} | {tf.ctx.b.name}
    clash = net_syms & set(pde.params)
    if clash:
        raise SystemError_(f"PDE parameter(s) {sorted(clash)} collide with network symbols; "
                           "rename them or use 'riccati <name>' in the network file")
    leaves = {Var(v) for v in tf.spec.inputs} | set(tf.ctx.atom_list) | {tf.ctx.b}
    leaves |= {a for a in atoms(tf.expr) if isinstance(a, (Symbol, PhiAtom, Var))}
    for _, arg in tf.ctx.atoms:
        leaves |= {a for a in atoms(arg) if isinstance(a, Symbol)}
    leaves |= set(pde.param_symbols)
    return PolyContext(leaves)


def residual_form(pde: PdeSpec, tf: TrialFunction, pctx: PolyContext | None = None) -> RationalForm:
    pctx = pctx or _pipeline_context(pde, tf)
    u = pctx.to_rational(tf.expr)
    powers: dict[int, RationalForm] = {1: u}
    leaf_map = {}
    for d in pde.derivs:
        base = powers.get(d.power)
        if base is None:
            base = powers[d.power] = u ** d.power
        leaf_map[d] = diff_rational(base, dict(d.orders), tf.ctx)
    return pctx.to_rational(pde.lhs, leaf_map)


def residual(pde: PdeSpec, tf: TrialFunction) -> Expr:
    """PDE left-hand side with the trial substituted, as a rational expression in phi atoms."""
    return residual_form(pde, tf).to_expr()


def clear_denominators(e: Expr):
    """Return ``(numerator, assumptions)`` with ``e == numerator / prod(assumptions)``."""
    pctx = PolyContext.for_exprs(e)
    r = pctx.to_rational(e)
    numer = pctx.from_poly(r.num)
    return numer, [power(pctx.from_poly(b), k) for b, k in r.den]


def _collect_poly(pctx: PolyContext, p, collect_gens: set[int]):
    groups: dict[tuple, dict] = {}
    for monom, c in p.iterterms():
        key = tuple(k if i in collect_gens else 0 for i, k in enumerate(monom))
        rest = tuple(0 if i in collect_gens else k for i, k in enumerate(monom))
        groups.setdefault(key, {})[rest] = c
    return {key: pctx.ring(terms) for key, terms in groups.items()}


def _system_from_groups(pctx, groups, assumptions) -> AlgebraicSystem:
    index = {}
    seen = {}
    for key in sorted(groups):
        coeff = groups[key]
        if coeff.is_zero:
            continue
        eq = pctx.from_poly(coeff)
        index[pctx.monomial_expr(key)] = eq
        seen.setdefault(poly_key(coeff), eq)
    return AlgebraicSystem(tuple(seen.values()), tuple(assumptions), index)


def collect(numerator: Expr, ctx: RiccatiContext, extra=()) -> AlgebraicSystem:
    """One equation per phi/variable monomial of ``numerator`` (a polynomial in the atoms)."""
    pctx = PolyContext.for_exprs(numerator, extra=ctx.atom_list)
    collect_gens = {i for i, leaf in enumerate(pctx.leaves) if isinstance(leaf, (PhiAtom, Var))}
    p = pctx.to_poly(numerator)
    return _system_from_groups(pctx, _collect_poly(pctx, p, collect_gens), extra)


def build_system(pde: PdeSpec, tf: TrialFunction) -> AlgebraicSystem:
    """Steps 3-4 in one pass over the polynomial representation."""
    pctx = _pipeline_context(pde, tf)
    r = residual_form(pde, tf, pctx)
    collect_gens = {i for i, leaf in enumerate(pctx.leaves) if isinstance(leaf, (PhiAtom, Var))}
    assumptions = [pctx.from_poly(b) for b, _ in r.den]
    return _system_from_groups(pctx, _collect_poly(pctx, r.num, collect_gens), assumptions)


def render_system(sys: AlgebraicSystem) -> str:
    lines = [f"{render(eq)} = 0" for eq in sys.equations]
    lines += [f"{render(a)} <> 0" for a in sys.assumptions]
    return "\n".join(lines) + ("\n" if lines else "")
