"""End-to-end helpers shared by the CLI and the acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .emitter import (BranchError, BranchKind, ClosedFormSolution, NumericDomainError, ResidualReport,
                      bind_coefficients, instantiate, instantiate_all, is_degenerate, verify_numeric)
from .expr import SingularPointError, Symbol, atoms, eval_numeric
from .network import NetworkSpec, TrialFunction, build_trial
from .parsing import PdeSpec
from .solver import (SearchBudget, SolutionFamily, VerificationReport, resolve_assignment, solve)
from .system import AlgebraicSystem, build_system

__all__ = [
    "elimination_order", "DerivedFamily", "Derivation", "derive", "random_coefficients",
    "check_branches", "family_free_symbols", "aligned_point", "NUMERIC_TOL",
]

NUMERIC_TOL = 1e-5


def elimination_order(pde: PdeSpec, spec: NetworkSpec) -> list[Symbol]:
    """PDE parameters, output bias, hidden biases (deepest first), output weights,
    hidden weights, input weights, then the Riccati constant."""
    order = list(pde.param_symbols) + [spec.output_bias]
    order += sorted(spec.bias_symbols.values(), key=lambda s: s.name, reverse=True)
    weights = spec.weight_symbols.items()
    order += [w for (src, dst), w in weights if dst == spec.output]
    order += [w for (src, dst), w in weights if dst != spec.output and not isinstance(src, str)]
    order += [w for (src, dst), w in weights if isinstance(src, str)]
    order.append(spec.riccati)
    seen, out = set(), []
    for s in order:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def family_free_symbols(fam: SolutionFamily, symbols) -> list[Symbol]:
    solved = set(resolve_assignment(fam.assignment))
    return sorted((s for s in symbols if s not in solved), key=lambda s: s.name)


def _draw(rng, names, b_name: str, sign: int):
    out = {}
    for n in names:
        mag = rng.uniform(0.5, 1.5)
        out[n] = mag if rng.random() < 0.5 else -mag
    if b_name in out or sign == 0:
        out[b_name] = sign * rng.uniform(0.3, 1.5)
    return out


def random_coefficients(sol: ClosedFormSolution, pde: PdeSpec, rng, tries: int = 50):
    """Admissible random coefficients for ``sol`` (all free symbols of its family,
    nonzero conditions respected, b of the branch's sign), or None."""
    names = {s.name for s in sol.free_symbols} | set(pde.params)
    if sol.family is not None:
        assign = resolve_assignment(sol.family.assignment)
        for e in assign.values():
            names |= {a.name for a in atoms(e) if isinstance(a, Symbol)}
        for c in sol.family.conditions:
            names |= {a.name for a in atoms(c) if isinstance(a, Symbol)}
        names -= {s.name for s in assign}
    names = sorted(names)
    sign = sol.branch.sign if sol.branch else -1
    for _ in range(tries):
        draw = _draw(rng, names, sol.riccati.name, sign)
        try:
            return bind_coefficients(sol, draw, pde)
        except (ValueError, BranchError, KeyError, ZeroDivisionError):
            continue
    return None


def check_branches(pde: PdeSpec, tf: TrialFunction, fam: SolutionFamily, seed: int = 0,
                   trials: int = 100, redraws: int = 5):
    """Numeric residual check of every sign-compatible branch.

    Returns ``[(BranchKind, ClosedFormSolution | None, ResidualReport | str)]``; a string
    entry explains why the branch could not be checked.
    """
    out = []
    for i, kind in enumerate(BranchKind):
        try:
            sol = instantiate(tf, fam, kind)
        except BranchError as exc:
            out.append((kind, None, f"skipped: {exc}"))
            continue
        rng = np.random.default_rng([seed, i])
        rep = "skipped: no admissible coefficients found"
        for _ in range(redraws):
            # a fast wave can put every sample near a pole; redraw the coefficients
            coeffs = random_coefficients(sol, pde, rng)
            if coeffs is None:
                break
            try:
                rep = verify_numeric(sol, pde, coeffs, trials=trials, seed=seed, family_id=fam.name)
                break
            except NumericDomainError as exc:
                rep = f"skipped: {exc}"
        out.append((kind, sol, rep))
    return out


def branch_ok(entry, tol: float = NUMERIC_TOL) -> bool:
    rep = entry[2]
    return not isinstance(rep, ResidualReport) or rep.max_residual <= tol


@dataclass
class DerivedFamily:
    family: SolutionFamily
    report: VerificationReport
    degenerate: bool
    branches: list = field(default_factory=list)

    @property
    def numeric_ok(self) -> bool:
        return all(branch_ok(b) for b in self.branches)

    @property
    def ok(self) -> bool:
        return self.report.ok and self.numeric_ok


@dataclass
class Derivation:
    system: AlgebraicSystem
    trial: TrialFunction
    families: list
    incomplete: bool

    @property
    def symbols(self) -> set:
        """System symbols plus those only present in the trial (hidden biases)."""
        return self.system.symbols | set(self.trial.spec.all_symbols()) | {self.trial.ctx.b}

    @property
    def good(self) -> list:
        return [d for d in self.families if d.ok and not d.degenerate]


def derive(pde: PdeSpec, spec: NetworkSpec, budget: SearchBudget | None = None, seed: int = 0,
           trials: int = 5, numeric: bool = True) -> Derivation:
    tf = build_trial(spec)
    sys = build_system(pde, tf)
    res = solve(sys, budget, nonzero=pde.param_symbols, order=elimination_order(pde, spec))
    out = []
    for fam, rep in zip(res.families, res.reports):
        degenerate = is_degenerate(tf, fam)
        if degenerate:
            fam = fam.with_tags("degenerate")
        branches = check_branches(pde, tf, fam, seed, trials) if numeric and not degenerate else []
        out.append(DerivedFamily(fam, rep, degenerate, branches))
    return Derivation(sys, tf, out, res.incomplete)


def _close(a: float, b: float, tol: float) -> bool:
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def aligned_point(ours: SolutionFamily, ref: SolutionFamily, symbols, rng, b_sign: int = -1,
                  tol: float = 1e-9, tries: int = 20, b_name: str = "b"):
    """A numeric point of ``ref`` (free symbols drawn at random) that also lies on
    ``ours``, or None.  Lying on ``ours`` means every solved symbol of ``ours``
    evaluates, from the point's values of its free symbols, to the point's value,
    and no condition of ``ours`` vanishes there."""
    ref_free = [s.name for s in family_free_symbols(ref, symbols)]
    ref_assign = resolve_assignment(ref.assignment)
    our_assign = resolve_assignment(ours.assignment)
    for _ in range(tries):
        point = _draw(rng, ref_free, b_name, b_sign)
        try:
            for s, e in ref_assign.items():
                point[s.name] = eval_numeric(e, point)
            if any(abs(eval_numeric(c, point)) < 1e-12 for c in ref.conditions):
                continue
            for s, e in our_assign.items():
                if not _close(eval_numeric(e, point), point[s.name], tol):
                    return None
            if any(abs(eval_numeric(c, point)) < 1e-12 for c in ours.conditions):
                continue
        except (ZeroDivisionError, SingularPointError, ValueError):
            continue
        return point
    return None


def instantiate_branch(tf: TrialFunction, fam: SolutionFamily, kind: BranchKind):
    try:
        return instantiate(tf, fam, kind)
    except BranchError:
        return None


__all__ += ["branch_ok", "instantiate_branch", "instantiate_all"]
