"""Plain-text formats for families, closed-form solutions and coefficient sets.

Family files hold one or more brace lists::

    # family F1 [degenerate]
    {
      b_4 = -b*w_24
      w_13 = w_14 = 0,  b = b
      nonzero: b, w_24
    }

Bindings may be separated by newlines or commas; ``s = s`` marks a free
symbol and is dropped.  A file without braces is read as a single family.

Solution files::

    vars x, t
    branch tanh
    family ../families/evolution_s1.fam
    u = -w_4u/(2*b*w_24*cosh(2*sqrt(-b)*(t*w_t2 + x*w_x2 + b_2)))

Coefficient files are ``name = number`` lines.
"""
from __future__ import annotations

import os
import re
from fractions import Fraction

from .expr import Expr, Symbol, ZERO, render
from .parsing import ParseError, canonical_name, parse_expr
from .solver import SolutionFamily, render_family

__all__ = [
    "parse_families", "render_families", "read_families", "parse_coefficients",
    "read_coefficients", "parse_solution", "read_solution", "render_solution",
]

_HEADER = re.compile(r"#\s*family\s+(\S+)(?:\s*\[([^\]]*)\])?")
_NAME = re.compile(r"[A-Za-z_Ͱ-Ͽ][A-Za-z0-9_Ͱ-Ͽ]*$")


def _split_commas(line: str):
    """Yield (item, offset) separated by commas outside parentheses."""
    depth, start = 0, 0
    for i, ch in enumerate(line + ","):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            yield line[start:i], start
            start = i + 1


def _strip_comment(line: str) -> str:
    at = line.find("#")
    return line if at < 0 else line[:at]


def _parse_block(body: str, base: int, full: str, name="", tags=()) -> SolutionFamily:
    assignment: dict[Symbol, Expr] = {}
    conditions: list[Expr] = []
    line_off = 0
    for raw in body.split("\n"):
        line = _strip_comment(raw)
        lead = len(line) - len(line.lstrip())
        line = line.strip()
        nonzero = line.startswith("nonzero:")
        if nonzero:
            line = line[len("nonzero:"):]
            lead += len("nonzero:")
        for item, off in _split_commas(line):
            text = item.strip()
            if not text:
                continue
            pos = base + line_off + lead + off
            if nonzero:
                conditions.append(_expr(text, pos, full))
                continue
            parts = text.split("=")
            if len(parts) < 2:
                raise ParseError(f"expected 'symbol = expression', got {text!r}", pos, full)
            rhs = _expr(parts[-1], pos, full)
            for lhs in parts[:-1]:
                lhs = lhs.strip()
                if not _NAME.match(lhs):
                    raise ParseError(f"bad symbol name {lhs!r}", pos, full)
                sym = Symbol(canonical_name(lhs))
                if rhs == sym:
                    continue  # 's = s' marks a free symbol
                if sym in assignment and assignment[sym] != rhs:
                    raise ParseError(f"conflicting bindings for {sym.name}", pos, full)
                assignment[sym] = rhs
        line_off += len(raw) + 1
    return SolutionFamily(assignment, frozenset(), tuple(conditions), frozenset(tags), name)


def _expr(text: str, pos: int, full: str) -> Expr:
    try:
        return parse_expr(text, vars=())
    except ParseError as exc:
        raise ParseError(exc.message, pos + exc.offset, full) from None


def parse_families(text: str) -> list[SolutionFamily]:
    if "{" not in text:
        return [_parse_block(text, 0, text)]
    out = []
    pos = 0
    name, tags = "", ()
    while True:
        open_at = text.find("{", pos)
        if open_at < 0:
            rest = _strip_comment_lines(text[pos:])
            if rest.strip():
                raise ParseError("text outside a brace list", pos, text)
            break
        for m in _HEADER.finditer(text, pos, open_at):
            name = m.group(1)
            tags = tuple(t.strip() for t in (m.group(2) or "").split(",") if t.strip())
        if _strip_comment_lines(text[pos:open_at]).strip():
            raise ParseError("text outside a brace list", pos, text)
        close_at = text.find("}", open_at)
        if close_at < 0:
            raise ParseError("unclosed '{'", open_at, text)
        out.append(_parse_block(text[open_at + 1:close_at], open_at + 1, text, name, tags))
        name, tags = "", ()
        pos = close_at + 1
    return out


def _strip_comment_lines(s: str) -> str:
    return "\n".join(_strip_comment(ln) for ln in s.split("\n"))


def read_families(path) -> list[SolutionFamily]:
    with open(path, encoding="utf-8") as fh:
        return parse_families(fh.read())


def render_families(fams) -> str:
    return "\n".join(render_family(f) for f in fams)


def parse_coefficients(text: str) -> dict[str, float]:
    out = {}
    offset = 0
    for line in text.split("\n"):
        body = _strip_comment(line).strip()
        if body:
            for item in body.split(","):
                if not item.strip():
                    continue
                name, sep, value = item.partition("=")
                if not sep:
                    raise ParseError(f"expected 'name = value', got {item.strip()!r}", offset, text)
                try:
                    out[canonical_name(name.strip())] = float(Fraction(value.strip()))
                except ValueError:
                    raise ParseError(f"bad number {value.strip()!r}", offset, text) from None
        offset += len(line) + 1
    return out


def read_coefficients(path) -> dict[str, float]:
    with open(path, encoding="utf-8") as fh:
        return parse_coefficients(fh.read())


def parse_solution(text: str, base_dir: str = "."):
    """Return ``(expr, vars, branch_label, family)``."""
    vars_ = None
    branch = None
    family = None
    expr = None
    offset = 0
    for line in text.split("\n"):
        body = _strip_comment(line).strip()
        if body.startswith("vars "):
            vars_ = tuple(v.strip() for v in body[5:].split(",") if v.strip())
        elif body.startswith("branch "):
            branch = body[7:].strip()
        elif body.startswith("family "):
            ref = body[7:].strip()
            fams = read_families(os.path.join(base_dir, ref))
            if len(fams) != 1:
                raise ParseError("solution must reference a file with exactly one family", offset, text)
            family = fams[0]
        elif body.startswith("u ="):
            if vars_ is None:
                raise ParseError("'vars' must precede the solution", offset, text)
            try:
                expr = parse_expr(body[3:], vars=vars_)
            except ParseError as exc:
                raise ParseError(exc.message, offset + 3 + exc.offset, text) from None
        elif body:
            raise ParseError(f"unknown directive {body.split()[0]!r}", offset, text)
        offset += len(line) + 1
    if expr is None:
        raise ParseError("no 'u = ...' line", len(text), text)
    return expr, vars_, branch, family


def read_solution(path):
    with open(path, encoding="utf-8") as fh:
        return parse_solution(fh.read(), os.path.dirname(os.path.abspath(path)))


def render_solution(expr: Expr, vars_, branch: str | None = None, family_ref: str | None = None,
                    sign: str | None = None) -> str:
    """``family_ref`` is a path relative to the solution file."""
    lines = []
    if sign:
        lines.append(f"# requires {sign}")
    lines.append(f"vars {', '.join(vars_)}")
    if branch:
        lines.append(f"branch {branch}")
    if family_ref:
        lines.append(f"family {family_ref}")
    lines.append(f"u = {render(expr)}")
    return "\n".join(lines) + "\n"
