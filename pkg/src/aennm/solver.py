"""Case-splitting solver for the collected algebraic systems.

The search alternates cheap deterministic moves:

1. equations that are a single monomial force one of its symbols to vanish;
2. an equation linear in a symbol with a constant coefficient is solved and
   substituted everywhere;
3. symbol factors are split off (``s = 0`` or ``s != 0``);
4. an equation linear in ``s`` with a monomial coefficient ``a`` is split into
   ``a = 0`` cases and the solved case;
5. small equations are factored over QQ and split on their factors;
6. an equation linear in ``s`` with a polynomial coefficient ``a`` is split
   into ``a != 0`` (solve) and ``a = 0`` (two new equations).

Branches of a split are made disjoint by recording the earlier alternatives as
nonzero conditions.  Every emitted family is re-verified exactly.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .expr import (
    ZERO, Expr, PhiAtom, Symbol, Var, atoms, num, render, substitute, symbols_of,
)
from .polys import PolyContext, poly_key

__all__ = [
    "SolutionFamily", "SearchBudget", "VerificationReport", "SolveResult",
    "verify_assignment", "solve", "resolve_assignment", "render_family", "family_key",
]


@dataclass(frozen=True)
class SolutionFamily:
    assignment: dict  # Symbol -> Expr in free symbols
    free: frozenset = frozenset()
    conditions: tuple = ()
    tags: frozenset = frozenset()
    name: str = ""

    @property
    def solved(self) -> set:
        return set(self.assignment)

    def with_tags(self, *tags) -> "SolutionFamily":
        return SolutionFamily(self.assignment, self.free, self.conditions,
                              self.tags | set(tags), self.name)

    def renamed(self, name: str) -> "SolutionFamily":
        return SolutionFamily(self.assignment, self.free, self.conditions, self.tags, name)


def family_key(fam: SolutionFamily):
    return tuple(sorted((s.name, render(v)) for s, v in fam.assignment.items()))


@dataclass
class SearchBudget:
    max_depth: int = 6
    max_zeros: int = 4
    branch_seconds: float = 10.0
    total_seconds: float = 300.0
    factor_terms: int = 60  # only factor equations up to this many terms
    resultant_terms: int = 30  # only eliminate between equations up to this size


@dataclass
class VerificationReport:
    verdict: str
    residuals: list  # (equation, substituted value) pairs
    annihilated: list = field(default_factory=list)  # assumptions/conditions forced to zero

    @property
    def ok(self) -> bool:
        return self.verdict == "PASS"

    def failing(self) -> list:
        return [(eq, val) for eq, val in self.residuals if val != ZERO]

    def render(self, width: int = 160) -> str:
        lines = [f"verdict: {self.verdict}"]
        for k, (eq, val) in enumerate(self.residuals, 1):
            if val != ZERO:
                lines.append(f"equation {k} nonzero: {_clip(render(val), width)}")
        for a in self.annihilated:
            lines.append(f"annihilated assumption: {_clip(render(a), width)}")
        return "\n".join(lines) + "\n"


def _clip(text: str, width: int) -> str:
    return text if len(text) <= width else text[:width - 3] + "..."


@dataclass
class SolveResult:
    families: list
    incomplete: bool = False
    nodes: int = 0
    reports: list = field(default_factory=list)  # VerificationReport per family

    def __iter__(self):
        return iter(self.families)

    def __len__(self):
        return len(self.families)

    def __getitem__(self, i):
        return self.families[i]


# ---------------------------------------------------------------------------
# substitution helpers on polynomials


def _hom_subst(p, gen, n, d, powers=None):
    """Numerator of p(gen = n/d) times d**deg; returns (poly, deg)."""
    m = p.degree(gen)
    if m <= 0:
        return p, 0
    if powers is None:
        powers = _Powers(n, d)
    out = p.ring.zero
    for k in range(m + 1):
        c = p.coeff_wrt(gen, k)
        if not c.is_zero:
            out += c * powers.n(k) * powers.d(m - k)
    return out, m


class _Powers:
    def __init__(self, n, d):
        self._n = [n.ring.one, n]
        self._d = [d.ring.one, d]

    def n(self, k):
        while len(self._n) <= k:
            self._n.append(self._n[-1] * self._n[1])
        return self._n[k]

    def d(self, k):
        while len(self._d) <= k:
            self._d.append(self._d[-1] * self._d[1])
        return self._d[k]


class _Substituter:
    """Clear-denominator substitution of several gens at once (values free of those gens).

    Powers and products of the substituted numerators/denominators are cached, so
    one instance should serve every polynomial of a substitution pass."""

    def __init__(self, values: Mapping):
        self.values = values
        self.powers = {g: _Powers(*v) for g, v in values.items()}
        self.index = {}
        self._products = {}

    def _product(self, gens, key, maxdeg):
        ck = (gens, key, maxdeg)
        out = self._products.get(ck)
        if out is None:
            out = None
            for g, e, m in zip(gens, key, maxdeg):
                pw = self.powers[g]
                f = pw.n(e) * pw.d(m - e)
                out = f if out is None else out * f
            self._products[ck] = out
        return out

    def __call__(self, p):
        ring = p.ring
        if not self.index:
            self.index = {g: ring.gens.index(g) for g in self.values}
        deg = {}
        for monom in p.itermonoms():
            for g, i in self.index.items():
                if monom[i] > deg.get(g, 0):
                    deg[g] = monom[i]
        if not deg:
            return p
        gens = tuple(sorted(deg, key=lambda g: self.index[g]))
        idx = [self.index[g] for g in gens]
        maxdeg = tuple(deg[g] for g in gens)
        groups: dict = {}
        for monom, c in p.iterterms():
            key = tuple(monom[i] for i in idx)
            rest = list(monom)
            for i in idx:
                rest[i] = 0
            groups.setdefault(key, {})[tuple(rest)] = c
        out = ring.zero
        for key, terms in groups.items():
            out += ring(terms) * self._product(gens, key, maxdeg)
        return out


def _monomial_content(p):
    monoms = list(p.itermonoms())
    return tuple(min(m[i] for m in monoms) for i in range(p.ring.ngens))


def _divide_monomial(p, mono):
    ring = p.ring
    return ring({tuple(a - b for a, b in zip(m, mono)): c for m, c in p.iterterms()})


def _degrees(p) -> list[int]:
    """Degree of p in each generator."""
    out = [0] * p.ring.ngens
    for m in p.itermonoms():
        out = [a if a >= b else b for a, b in zip(out, m)]
    return out


def _support(p) -> set[int]:
    return {i for i, k in enumerate(_degrees(p)) if k}


# ---------------------------------------------------------------------------
# verification


def resolve_assignment(assignment: Mapping[Symbol, Expr]) -> dict:
    """Substitute solved symbols into each other until values mention free symbols only."""
    out = dict(assignment)
    for _ in range(len(out) + 1):
        changed = False
        for s, v in out.items():
            if symbols_of(v) & out.keys():
                nv = substitute(v, {k: out[k] for k in symbols_of(v) & out.keys() if k != s})
                if s in symbols_of(nv):
                    raise ValueError(f"cyclic assignment for {s.name}")
                out[s] = nv
                changed = True
        if not changed:
            return out
    raise ValueError("assignment does not resolve to free symbols")


def _poly_values(pctx: PolyContext, assignment: Mapping[Symbol, Expr]):
    values = {}
    for s, v in assignment.items():
        if s not in pctx.index:
            continue
        r = pctx.to_rational(v)
        values[pctx.gen(s)] = (r.num, r.den_poly())
    return values


def _context_for(exprs: Iterable[Expr], assignment: Mapping) -> PolyContext:
    leaves = set(assignment)
    for e in list(exprs) + list(assignment.values()):
        leaves |= {a for a in atoms(e) if isinstance(a, (Symbol, Var, PhiAtom))}
    return PolyContext(leaves)


def verify_assignment(sys, fam: SolutionFamily) -> VerificationReport:
    """Exact check that ``fam`` annihilates every equation of ``sys``."""
    assignment = resolve_assignment(fam.assignment)
    pctx = _context_for([*sys.equations, *sys.assumptions, *fam.conditions], assignment)
    eqs = [pctx.to_poly(eq) for eq in sys.equations]
    assum = [pctx.to_rational(a).num for a in sys.assumptions]
    return _verify_in(pctx, sys.equations, eqs, sys.assumptions, assum, fam, assignment)


def _verify_in(pctx, equations, eq_polys, assumptions, assum_nums, fam, assignment=None):
    """verify_assignment with the system already converted to ``pctx`` polynomials."""
    if assignment is None:
        assignment = resolve_assignment(fam.assignment)
    subst = _Substituter(_poly_values(pctx, assignment))
    residuals = []
    ok = True
    for eq, p in zip(equations, eq_polys):
        val = subst(p)
        if not val.is_zero:
            ok = False
        residuals.append((eq, pctx.from_poly(val) if not val.is_zero else ZERO))
    annihilated = []
    nums = list(assum_nums) + [pctx.to_rational(c).num for c in fam.conditions]
    for a, num in zip([*assumptions, *fam.conditions], nums):
        if subst(num).is_zero:
            annihilated.append(a)
    if annihilated:
        ok = False
    return VerificationReport("PASS" if ok else "FAIL", residuals, annihilated)


# ---------------------------------------------------------------------------
# search


class _Abort(Exception):
    pass


@dataclass
class _State:
    eqs: list
    assign: dict  # gen index -> (num, den)
    conds: list  # nonzero polynomials
    nz: frozenset  # gen indices known nonzero
    depth: int = 0
    zeros: int = 0


class _Search:
    def __init__(self, pctx: PolyContext, budget: SearchBudget, protected: set[int],
                 rank: dict[int, int] | None = None):
        self.pctx = pctx
        self.rank = rank or {}
        self._rings = {}
        self.ring = pctx.ring
        self.budget = budget
        self.protected = protected
        self.leaves: list[_State] = []
        self.incomplete = False
        self.nodes = 0
        self.start = time.monotonic()
        self.branch_start = self.start
        self._factors = {}  # polynomial terms -> non-constant irreducible factors
        self._resultants = {}

    def _factor(self, p):
        key = frozenset(p.items())
        out = self._factors.get(key)
        if out is None:
            out = self._factors[key] = self._factor_uncached(p)
        return out

    def _factor_uncached(self, p):
        # a x + c with gcd(a, c) = 1 is irreducible; this avoids most factor_list calls
        for i, k in enumerate(_degrees(p)):
            if k == 1:
                g = self.ring.gens[i]
                a = p.coeff_wrt(g, 1)
                if a.gcd(p - a * g).is_ground:
                    return [p]
                break
        return [f for f, _ in p.factor_list()[1] if not f.is_ground]

    # -- bookkeeping -----------------------------------------------------
    def _tick(self):
        self.nodes += 1
        now = time.monotonic()
        if now - self.start > self.budget.total_seconds:
            raise _Abort("total")
        if now - self.branch_start > self.budget.branch_seconds:
            raise _Abort("branch")

    def _normalize(self, p, nz):
        if p.is_zero:
            return None
        mono = _monomial_content(p)
        if any(mono):
            keep = tuple(0 if (k == 0 or i in nz) else 1 for i, k in enumerate(mono))
            p = _divide_monomial(p, mono)
            if any(keep):
                p = p.mul_monom(keep)
        return p.quo_ground(p.LC)

    def _key(self, p):
        return (len(p), p.total_degree() if hasattr(p, "total_degree") else 0, poly_key(p))

    # -- moves -----------------------------------------------------------
    def _assign(self, st: _State, i: int, n, d, extra_conds=(), extra_nz=(), branched=False,
                zero=False) -> _State:
        gen = self.ring.gens[i]
        powers = _Powers(n, d)
        eqs = [_hom_subst(e, gen, n, d, powers)[0] for e in st.eqs]
        conds = []
        for c in list(st.conds) + list(extra_conds):
            conds.append(_hom_subst(c, gen, n, d, powers)[0])
        if not d.is_ground:
            conds.append(d)
        assign = {}
        for j, (nj, dj) in st.assign.items():
            a, ea = _hom_subst(nj, gen, n, d, powers)
            c, ec = _hom_subst(dj, gen, n, d, powers)
            if ec > ea:
                a = a * d ** (ec - ea)
            elif ea > ec:
                c = c * d ** (ea - ec)
            _, a, c = a.cofactors(c)
            assign[j] = (a, c)
        _, n2, d2 = n.cofactors(d)
        assign[i] = (n2, d2)
        nz = st.nz | set(extra_nz)
        return _State(eqs, assign, conds, frozenset(nz),
                      st.depth + (1 if branched else 0), st.zeros + (1 if zero else 0))

    def _zero(self, st, i, nz_extra=(), branched=True):
        r = self.ring
        return self._assign(st, i, r.zero, r.one, extra_nz=nz_extra, zero=branched)

    def _with_nonzero(self, st, idxs, eqs=None, conds=()):
        gens = self.ring.gens
        return _State(list(st.eqs if eqs is None else eqs), dict(st.assign),
                      list(st.conds) + [gens[i] for i in idxs] + list(conds),
                      st.nz | frozenset(idxs), st.depth, st.zeros)

    def _linear_candidates(self, eqs):
        degs = [_degrees(e) for e in eqs]
        occ = [sum(1 for d in degs if d[i]) for i in range(self.ring.ngens)]
        out = []
        for ei, (e, d) in enumerate(zip(eqs, degs)):
            for i, k in enumerate(d):
                if k == 1:
                    a = e.coeff_wrt(self.ring.gens[i], 1)
                    out.append((ei, i, a, occ[i], len(e)))
        return out

    def _pick(self, c):
        _, i, a, occ, size = c
        return (self.rank.get(i, 0), len(a), -occ, size, self.pctx.leaves[i].key)

    def _resultant(self, p, q, i):
        """Resultant of p and q with respect to generator i."""
        key = (frozenset(p.items()), frozenset(q.items()), i)
        if key in self._resultants:
            return self._resultants[key]
        r2 = self._rings.get(i)
        if r2 is None:
            names = list(self.ring.symbols)
            names.insert(0, names.pop(i))
            r2 = self._rings[i] = self.ring.clone(symbols=names)
        out = self._resultants[key] = p.set_ring(r2).resultant(q.set_ring(r2)).set_ring(self.ring)
        return out

    # -- main recursion ----------------------------------------------------
    def run(self, eqs, conds, nz):
        root = _State(eqs, {}, conds, frozenset(nz))
        try:
            self.node(root, top=True)
        except _Abort:
            self.incomplete = True

    def node(self, st: _State, top=False):
        self._tick()
        eqs = {}
        for e in st.eqs:
            p = self._normalize(e, st.nz)
            if p is None:
                continue
            if p.is_ground:
                return  # inconsistent
            eqs.setdefault(poly_key(p), p)
        for c in st.conds:
            if c.is_zero:
                return
        eqs = sorted(eqs.values(), key=self._key)
        st = _State(eqs, st.assign, [c for c in st.conds if not c.is_ground], st.nz,
                    st.depth, st.zeros)
        if not eqs:
            self.leaves.append(st)
            return
        children = self.expand(st)
        if children is None:
            self.incomplete = True
            return
        for child in children:
            if top:
                self.branch_start = time.monotonic()
            try:
                self.node(child)
            except _Abort as exc:
                if str(exc) != "branch" or not top:
                    raise
                self.incomplete = True

    def _can_branch(self, st, zeros=0):
        if zeros:
            ok = st.zeros + zeros <= self.budget.max_zeros
        else:
            ok = st.depth < self.budget.max_depth
        if not ok:
            self.incomplete = True
        return ok

    def _zero_split(self, st, idxs, rest=None):
        """Children: idx_k = 0 with earlier ones nonzero; optionally all nonzero + rest."""
        idxs = [i for i in idxs if i not in self.protected and i not in st.nz]
        children = []
        done = []
        for i in idxs:
            if self._can_branch(st, 1):
                children.append(self._zero(st, i, nz_extra=done))
            done.append(i)
        if rest is not None:
            children.append(rest(done))
        return children

    def expand(self, st: _State):
        eqs = st.eqs
        gens = self.ring.gens
        # 1. monomial equations
        for e in eqs:
            if len(e) == 1:
                idxs = [i for i in sorted(_support(e)) if i not in st.nz and i not in self.protected]
                if not idxs:
                    return []
                if len(idxs) == 1:
                    return [self._zero(st, idxs[0], branched=False)]
                if not self._can_branch(st, 1):
                    return []
                return self._zero_split(st, idxs)
        # 2. linear with constant coefficient
        linear = self._linear_candidates(eqs)
        cands = [c for c in linear if c[2].is_ground]
        if cands:
            ei, i, a, *_ = min(cands, key=self._pick)
            e = eqs[ei]
            c = e - a * gens[i]
            return [self._assign(st, i, -c.quo_ground(a.LC), self.ring.one)]
        # 3. split off symbol factors
        for e in eqs:
            mono = _monomial_content(e)
            idxs = [i for i, k in enumerate(mono) if k]
            if idxs:
                rest_eq = _divide_monomial(e, mono)

                def rest(done, e=e, rest_eq=rest_eq):
                    new = [rest_eq if x is e else x for x in st.eqs]
                    return self._with_nonzero(st, done, new)

                return self._zero_split(st, idxs, rest)
        # 4. linear with monomial coefficient
        cands = [c for c in linear if len(c[2]) == 1]
        if cands:
            ei, i, a, *_ = min(cands, key=self._pick)
            e = eqs[ei]
            c = e - a * gens[i]
            idxs = sorted(_support(a))

            def solved(done, i=i, a=a, c=c):
                child = self._with_nonzero(st, done)
                return self._assign(child, i, -c, a)

            return self._zero_split(st, idxs, solved)
        # 5. factor small equations
        for e in eqs:
            if len(e) > self.budget.factor_terms:
                break
            factors = self._factor(e)
            if len(factors) > 1:
                if not self._can_branch(st):
                    return []
                children = []
                for k, f in enumerate(factors):
                    rest_eqs = [f if x is e else x for x in st.eqs]
                    children.append(_State(rest_eqs, dict(st.assign),
                                           list(st.conds) + factors[:k], st.nz,
                                           st.depth + 1, st.zeros))
                return children
        # 6. linear with polynomial coefficient
        cands = linear
        if cands:
            ei, i, a, *_ = min(cands, key=self._pick)
            if not self._can_branch(st):
                return []
            e = eqs[ei]
            c = e - a * gens[i]
            solved = self._assign(st, i, -c, a)
            degenerate = _State(list(st.eqs) + [a, c], dict(st.assign), list(st.conds), st.nz,
                                st.depth + 1, st.zeros)
            return [solved, degenerate]
        # 7. eliminate a shared generator between two small equations
        small = [e for e in eqs if len(e) <= self.budget.resultant_terms]
        for k, e in enumerate(small):
            for f in small[k + 1:]:
                shared = sorted(_support(e) & _support(f),
                                key=lambda i: (-self.rank.get(i, 0), e.degree(gens[i]) * f.degree(gens[i]),
                                               self.pctx.leaves[i].key))
                for i in shared:
                    res = self._resultant(e, f, i)
                    if res.is_zero:
                        continue
                    if res.is_ground:
                        return []
                    if len(res) > 20 * self.budget.factor_terms:
                        continue
                    if not self._can_branch(st):
                        return []
                    factors = self._factor(res)
                    return [_State(list(st.eqs) + [g], dict(st.assign),
                                   list(st.conds) + factors[:j], st.nz, st.depth + 1, st.zeros)
                            for j, g in enumerate(factors)]
        return None


def solve(sys, budget: SearchBudget | None = None, nonzero: Iterable[Symbol] = (),
          order: Iterable[Symbol] = ()) -> SolveResult:
    """Search for families annihilating ``sys``.

    ``nonzero`` symbols are never set to zero.  ``order`` lists symbols in the
    order they should preferably be solved for; unlisted symbols come after.
    """
    budget = budget or SearchBudget()
    syms = sys.symbols | set(nonzero)
    pctx = PolyContext(syms) if syms else PolyContext([Symbol("$dummy")])
    eqs = [pctx.to_poly(e) for e in sys.equations]
    protected = {pctx.index[s] for s in nonzero if s in pctx.index}
    order = [s for s in order if s in pctx.index]
    rank = {pctx.index[s]: k for k, s in enumerate(order)}
    for i in range(pctx.ngens):
        rank.setdefault(i, len(order))
    search = _Search(pctx, budget, protected, rank)
    search.run(eqs, [pctx.gens[i] for i in sorted(protected)], protected)
    vctx = _context_for([*sys.equations, *sys.assumptions], {s: s for s in syms})
    veqs = [vctx.to_poly(e) for e in sys.equations]
    assum = [vctx.to_rational(a).num for a in sys.assumptions]
    families = []
    reports = {}
    seen = set()
    for leaf in search.leaves:
        fam = _family_from_leaf(pctx, leaf, syms)
        key = family_key(fam)
        if key in seen:
            continue
        seen.add(key)
        rep = _verify_in(vctx, sys.equations, veqs, sys.assumptions, assum, fam)
        if rep.ok:
            families.append(fam)
            reports[key] = rep
        else:
            search.incomplete = True
    families.sort(key=lambda f: (len(f.assignment), family_key(f)))
    named = [f.renamed(f"F{k + 1}") for k, f in enumerate(families)]
    return SolveResult(named, search.incomplete, search.nodes,
                       [reports[family_key(f)] for f in families])


def _family_from_leaf(pctx: PolyContext, leaf: _State, syms) -> SolutionFamily:
    assignment = {}
    for i, (n, d) in sorted(leaf.assign.items()):
        s = pctx.leaves[i]
        assignment[s] = pctx.from_poly(n) / pctx.from_poly(d)
    free = frozenset(s for s in syms if s not in assignment)
    factors = {}
    for c in leaf.conds:
        if c.is_ground:
            continue
        for f, _ in c.factor_list()[1]:
            if not f.is_ground:
                f = f.quo_ground(f.LC)
                factors.setdefault(poly_key(f), f)
    conds = tuple(pctx.from_poly(f) for f in sorted(factors.values(), key=lambda f: (len(f), poly_key(f))))
    return SolutionFamily(assignment, free, conds)


def render_family(fam: SolutionFamily) -> str:
    lines = ["{"]
    if fam.name:
        lines[0] = f"# family {fam.name}" + (f" [{', '.join(sorted(fam.tags))}]" if fam.tags else "")
        lines.append("{")
    for s in sorted(fam.assignment, key=lambda s: s.name):
        lines.append(f"  {s.name} = {render(fam.assignment[s])}")
    if fam.free:
        lines.append(f"  # free: {', '.join(sorted(s.name for s in fam.free))}")
    if fam.conditions:
        lines.append(f"  nonzero: {', '.join(render(c) for c in fam.conditions)}")
    lines.append("}")
    return "\n".join(lines) + "\n"
