"""Command line front end: ``aennm derive | verify | plot``.

Exit codes: 0 success, 1 parse/input error, 2 no family found,
3 verification failure, 4 numeric domain failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .emitter import (BranchError, BranchKind, ClosedFormSolution, NumericDomainError, ResidualReport,
                      eval_grid, grid_csv)
from .network import build_trial
from .parsing import ParseError, canonical_name, parse_network, parse_pde
from .pipeline import NUMERIC_TOL, branch_ok, check_branches, derive
from .solver import SearchBudget, render_family, verify_assignment
from .system import SystemError_, build_system, render_system
from .textio import parse_coefficients, read_families, read_solution, render_solution

EXIT_OK, EXIT_PARSE, EXIT_NO_FAMILY, EXIT_VERIFY, EXIT_DOMAIN = 0, 1, 2, 3, 4

_SEED_MAX = 2 ** 64


class UsageError(Exception):
    pass


def _seed(value) -> int:
    if value is None:
        value = os.environ.get("AENNM_SEED", "0")
    try:
        seed = int(value)
    except ValueError:
        raise UsageError(f"seed must be an integer, got {value!r}") from None
    if not 0 <= seed < _SEED_MAX:
        raise UsageError("seed must be a 64-bit unsigned integer")
    return seed


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_pde(path):
    return parse_pde(_read(path))


def _load_network(path):
    return parse_network(_read(path))


def parse_grid(text: str) -> dict:
    """``x=a:b:n,t=a:b:n`` -> {var: samples}."""
    axes = {}
    for item in text.split(","):
        if not item.strip():
            continue
        name, sep, rng = item.partition("=")
        parts = rng.split(":")
        if not sep or len(parts) != 3:
            raise UsageError(f"bad grid axis {item!r}; expected var=a:b:n")
        try:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"bad grid axis {item!r}") from None
        if n < 1:
            raise UsageError(f"grid axis {name.strip()} needs at least one sample")
        axes[name.strip()] = np.linspace(a, b, n)
    return axes


def parse_fix(items) -> dict:
    out = {}
    for item in items or ():
        for part in item.split(","):
            name, sep, value = part.partition("=")
            if not sep:
                raise UsageError(f"bad --fix value {part!r}; expected var=value")
            try:
                out[name.strip()] = float(value)
            except ValueError:
                raise UsageError(f"bad --fix value {part!r}") from None
    return out


def _budget(args) -> SearchBudget:
    b = SearchBudget()
    if args.budget_depth is not None:
        b.max_depth = args.budget_depth
    if args.budget_zeros is not None:
        b.max_zeros = args.budget_zeros
    return b


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _branch_lines(branches) -> list[str]:
    lines = []
    for kind, _, rep in branches:
        if isinstance(rep, ResidualReport):
            flag = "PASS" if rep.max_residual <= NUMERIC_TOL else "FAIL"
            lines.append(f"{kind.label}: {flag} max_residual={rep.max_residual:.3e} "
                         f"median_residual={rep.median_residual:.3e} points={rep.points} seed={rep.seed}")
        else:
            lines.append(f"{kind.label}: {rep}")
    return lines


def _branch_json(branches) -> list:
    out = []
    for kind, _, rep in branches:
        if isinstance(rep, ResidualReport):
            out.append(rep.as_dict())
        else:
            out.append({"branch": kind.label, "skipped": rep})
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_derive(args) -> int:
    pde = _load_pde(args.pde)
    spec = _load_network(args.network)
    seed = _seed(args.seed)
    d = derive(pde, spec, _budget(args), seed=seed, trials=args.trials)
    out = args.out
    _write(os.path.join(out, "system.txt"), render_system(d.system))
    summary = []
    for fam_d in d.families:
        fam = fam_d.family
        text = render_family(fam)
        _write(os.path.join(out, "families", f"{fam.name}.fam"), text)
        for kind, sol, rep in fam_d.branches:
            if sol is None:
                continue
            body = render_solution(sol.expr, sol.vars, kind.label, f"../families/{fam.name}.fam",
                                   kind.sign_condition)
            _write(os.path.join(out, "solutions", f"{fam.name}_{kind.label}.sol"), body)
        report = [f"family: {fam.name}", f"degenerate: {fam_d.degenerate}"]
        report += fam_d.report.render().rstrip("\n").split("\n")
        report += _branch_lines(fam_d.branches)
        _write(os.path.join(out, "reports", f"{fam.name}.txt"), "\n".join(report) + "\n")
        _write(os.path.join(out, "reports", f"{fam.name}.json"), json.dumps({
            "family_id": fam.name, "verdict": fam_d.report.verdict, "degenerate": fam_d.degenerate,
            "branches": _branch_json(fam_d.branches)}, indent=2, sort_keys=True) + "\n")
        status = "ok" if fam_d.ok else "FAILED"
        summary.append(f"{fam.name}: {status}{' (degenerate)' if fam_d.degenerate else ''}")
    good = d.good
    head = [f"families: {len(d.families)}", f"non-degenerate verified: {len(good)}",
            f"search: {'incomplete' if d.incomplete else 'complete'}"]
    _write(os.path.join(out, "families.txt"), "\n".join(render_family(f.family) for f in d.families))
    _write(os.path.join(out, "summary.txt"), "\n".join(head + summary) + "\n")
    print("\n".join(head))
    return EXIT_OK if good else EXIT_NO_FAMILY


def cmd_verify(args) -> int:
    pde = _load_pde(args.pde)
    spec = _load_network(args.network)
    seed = _seed(args.seed)
    tf = build_trial(spec)
    sys_ = build_system(pde, tf)
    fams = read_families(args.family)
    status = EXIT_OK
    lines = []
    for k, fam in enumerate(fams):
        name = fam.name or f"#{k + 1}"
        extra = {s for s in fam.assignment if s not in sys_.symbols and s not in set(spec.all_symbols())}
        if extra:
            raise UsageError(f"family {name} binds unknown symbol(s) "
                             f"{', '.join(sorted(s.name for s in extra))}")
        rep = verify_assignment(sys_, fam)
        lines.append(f"family {name}: symbolic {rep.verdict}")
        if not rep.ok:
            lines += ["  " + ln for ln in rep.render().rstrip("\n").split("\n")[1:]]
            status = EXIT_VERIFY
            continue
        branches = check_branches(pde, tf, fam, seed, args.trials)
        lines += ["  " + ln for ln in _branch_lines(branches)]
        if not all(branch_ok(b) for b in branches):
            status = EXIT_VERIFY
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write(os.path.join(args.out, "verify.txt"), text)
    return status


def cmd_plot(args) -> int:
    expr, vars_, branch, family = read_solution(args.solution)
    kind = BranchKind.from_label(branch) if branch else None
    sol = ClosedFormSolution(expr, kind, family, vars_ or ("x", "t"))
    coeffs = parse_coefficients(_read(args.coeffs)) if args.coeffs else {}
    coeffs = {canonical_name(k): v for k, v in coeffs.items()}
    axes = parse_grid(args.grid)
    fixed = parse_fix(args.fix)
    unknown = (set(axes) | set(fixed)) - set(sol.vars)
    if unknown:
        raise UsageError(f"unknown variable(s) {', '.join(sorted(unknown))}")
    g = eval_grid(sol, coeffs, axes, fixed)
    if g.mask.all():
        raise NumericDomainError("every grid point is singular")
    text = grid_csv(g)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aennm", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--pde", required=True, help="PDE file")
        sp.add_argument("--network", required=True, help="network file")
        sp.add_argument("--seed", help="random seed (default: $AENNM_SEED or 0)")

    d = sub.add_parser("derive", help="solve for parameter families and emit solutions")
    common(d)
    d.add_argument("--budget-depth", type=int)
    d.add_argument("--budget-zeros", type=int)
    d.add_argument("--trials", type=int, default=5, help="numeric points per branch")
    d.add_argument("--out", default="aennm-out", help="output directory")
    d.set_defaults(func=cmd_derive)

    v = sub.add_parser("verify", help="check a family file exactly and numerically")
    v.add_argument("family")
    common(v)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--out", help="directory for verify.txt")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("plot", help="evaluate a closed-form solution on a grid (CSV)")
    g.add_argument("solution")
    g.add_argument("--coeffs", help="coefficient file (name = value lines)")
    g.add_argument("--grid", required=True, help="x=a:b:n[,y=...,t=...]")
    g.add_argument("--fix", action="append", help="var=value for variables not on the grid")
    g.add_argument("--out", help="CSV path (default: stdout)")
    g.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ParseError, UsageError, SystemError_, KeyError, ValueError) as exc:
        if isinstance(exc, BranchError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_PARSE
    except (NumericDomainError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
