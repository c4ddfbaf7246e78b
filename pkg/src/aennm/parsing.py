"""Text front end: expressions, PDE definitions and network files.

Expression grammar (precedence climbing, lowest first)::

    expr    := expr ('+' | '-') expr          # left assoc, 10
             | expr ('*' | '/') expr          # left assoc, 20
             | ('-' | '+') expr               # prefix, 25
             | expr ('^' | '**') expr         # right assoc, 30; integer exponent
             | atom
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')' [ '_' VARS ]

PDE file: ``[params a, b, ...;] u(x, t[, y]); <lhs> = <rhs>``; statements are
separated by ``;`` or newlines, ``#`` starts a comment.  ``u_xxt`` denotes a
partial derivative and ``(u^2)_xx`` a derivative of a power.

Network file, one directive per line::

    inputs [x, t]
    layer1 [phi, phi^2]
    layer2 [arg, arg^-1]
    output [u]
    arch 2-2-2-1          # optional width check
    riccati b             # optional name of the Riccati constant
    symbol w_3u = c       # optional symbol-name override
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .expr import (
    Deriv, Expr, PhiAtom, Symbol, Var, add, atoms, div, func, mul, neg, num, power,
    render, sub, FUNC_KINDS, IntPow, Rational,
)
from .network import ArgPower, NetworkError, NetworkSpec, PhiPower, make_network

__all__ = [
    "ParseError", "PdeSpec", "parse_expr", "parse_pde", "parse_network",
    "render_pde", "render_network", "canonical_name", "DEFAULT_VARS",
]

DEFAULT_VARS = ("x", "y", "t")

GREEK = {
    "α": "alpha", "β": "beta", "γ": "gamma", "δ": "delta", "ε": "epsilon",
    "λ": "lambda", "μ": "mu", "ν": "nu", "σ": "sigma", "κ": "kappa", "ω": "omega",
    "θ": "theta", "η": "eta", "ρ": "rho", "τ": "tau", "ζ": "zeta",
}

_RECIPROCAL = {"sech": "cosh", "csch": "sinh", "sec": "cos", "csc": "sin"}


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        self.message = message
        self.offset = offset
        self.line = text.count("\n", 0, offset) + 1
        self.col = offset - (text.rfind("\n", 0, offset) + 1) + 1
        super().__init__(f"{message} (line {self.line}, column {self.col})")


def canonical_name(name: str) -> str:
    """Normalise Greek letters to ASCII; ``w4u``/``w_{4,u}`` style weights to ``w_4u``."""
    name = "".join(GREEK.get(ch, ch) for ch in name)
    m = re.fullmatch(r"w_?\{?([xyt1-9])_?,?([0-9u])\}?", name)
    if m:
        return f"w_{m.group(1)}{m.group(2)}"
    m = re.fullmatch(r"b_?\{?(\d+)\}?", name)
    if m:
        return f"b_{m.group(1)}"
    return name


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_Ͱ-Ͽ][A-Za-z0-9_Ͱ-Ͽ]*)
  | (?P<op>\*\*|[-+*/^(),])
""", re.X)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str, base: int, full: str) -> list[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", base + pos, full)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            out.append(_Tok(kind, "^" if tok == "**" else tok, base + pos))
        pos = m.end()
    out.append(_Tok("end", "", base + len(text)))
    return out


_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_PREFIX = 25


class _Parser:
    def __init__(self, text, base=0, full=None, vars=DEFAULT_VARS, unknown=None,
                 declared=None, params=()):
        self.full = text if full is None else full
        self.toks = _tokenize(text, base, self.full)
        self.i = 0
        self.vars = set(vars)
        self.unknown = unknown
        self.declared = declared
        self.params = set(params)

    def error(self, msg, tok=None):
        tok = tok or self.toks[self.i]
        raise ParseError(msg, tok.pos, self.full)

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        if self.tok.text != text:
            self.error(f"expected {text!r}")
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr(0)
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self, min_bp: int) -> Expr:
        t = self.tok
        if t.text in ("-", "+") and t.kind == "op":
            self.advance()
            operand = self.expr(_PREFIX)
            left = neg(operand) if t.text == "-" else operand
        else:
            left = self.atom()
        while True:
            op = self.tok
            bp = _BINARY.get(op.text) if op.kind == "op" else None
            if bp is None or bp < min_bp or (bp == min_bp and op.text != "^"):
                break
            self.advance()
            if op.text == "^":
                right = self.expr(bp)  # right associative
                left = self._pow(left, right, op)
            else:
                right = self.expr(bp + 1)
                left = {"+": add, "-": sub, "*": mul, "/": div}[op.text](left, right)
        return left

    def _pow(self, base, exponent, tok):
        if not (isinstance(exponent, Rational) and exponent.value.denominator == 1):
            self.error("exponent must be an integer constant", tok)
        try:
            return power(base, int(exponent.value))
        except ZeroDivisionError as exc:
            self.error(str(exc), tok)

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return num(Fraction(t.text))
        if t.kind == "name":
            self.advance()
            name = canonical_name(t.text)
            if self.tok.text == "(" and (name in FUNC_KINDS or name in _RECIPROCAL):
                self.advance()
                arg = self.expr(0)
                self.expect(")")
                if name in _RECIPROCAL:
                    return power(func(_RECIPROCAL[name], arg), -1)
                try:
                    return func(name, arg)
                except ValueError as exc:
                    self.error(str(exc), t)
            return self.name(name, t)
        if t.text == "(":
            self.advance()
            inner = self.expr(0)
            self.expect(")")
            if self.tok.kind == "name" and self.tok.text.startswith("_"):
                return self.power_deriv(inner, self.advance())
            return inner
        self.error("unexpected end of input" if t.kind == "end" else f"unexpected {t.text!r}")

    def _orders(self, suffix, tok):
        orders = {}
        for ch in suffix:
            if ch not in self.vars:
                self.error(f"derivative with respect to undeclared variable {ch!r}", tok)
            orders[ch] = orders.get(ch, 0) + 1
        return orders

    def power_deriv(self, inner, tok):
        suffix = tok.text[1:]
        if self.unknown is None:
            self.error("derivative outside a PDE", tok)
        k = None
        if isinstance(inner, Deriv) and not inner.orders:
            k = inner.power
        elif isinstance(inner, IntPow) and inner.base == Deriv(self.unknown) and inner.exp > 0:
            k = inner.exp
        if k is None:
            self.error("only powers of the unknown can be differentiated", tok)
        return Deriv(self.unknown, self._orders(suffix, tok), k)

    def name(self, name, tok) -> Expr:
        m = re.fullmatch(r"phi(\d+)", name)
        if m:
            return PhiAtom(int(m.group(1)))
        if name in self.vars:
            return Var(name)
        if self.unknown is not None:
            if name == self.unknown:
                return Deriv(self.unknown)
            head, sep, suffix = name.partition("_")
            if sep and head == self.unknown and suffix:
                return Deriv(self.unknown, self._orders(suffix, tok))
            if sep and head in self.params and suffix and set(suffix) <= self.vars:
                self.error(f"derivative of a parameter {head!r}", tok)
        if self.declared is not None and name not in self.declared:
            self.error(f"undeclared symbol {name!r}", tok)
        return Symbol(name)


def parse_expr(text: str, vars=DEFAULT_VARS, *, unknown=None, declared=None) -> Expr:
    """Parse arithmetic text; names in ``vars`` become independent variables."""
    return _Parser(text, vars=vars, unknown=unknown, declared=declared).parse()


@dataclass(frozen=True)
class PdeSpec:
    unknown: str
    vars: tuple[str, ...]
    params: tuple[str, ...]
    lhs: Expr

    def __post_init__(self):
        if set(self.params) & set(self.vars):
            raise ValueError("parameters and variables overlap")
        if self.unknown in self.params or self.unknown in self.vars:
            raise ValueError("unknown clashes with a parameter or variable")
        for a in atoms(self.lhs):
            if isinstance(a, Deriv):
                if a.unknown != self.unknown or any(v not in self.vars for v, _ in a.orders):
                    raise ValueError(f"bad derivative atom {render(a)}")
            elif isinstance(a, Symbol) and a.name not in self.params:
                raise ValueError(f"undeclared symbol {a.name!r}")

    @property
    def derivs(self) -> list[Deriv]:
        return sorted((a for a in atoms(self.lhs) if isinstance(a, Deriv)), key=lambda d: d.key)

    @property
    def param_symbols(self) -> list[Symbol]:
        return [Symbol(p) for p in self.params]

    def __str__(self):
        return render_pde(self)


def _statements(text: str):
    for m in re.finditer(r"[^;\n]+", text):
        seg = m.group()
        hash_at = seg.find("#")
        if hash_at >= 0:
            seg = seg[:hash_at]
        if seg.strip():
            yield seg, m.start()


def parse_pde(text: str) -> PdeSpec:
    params: list[str] = []
    unknown = vars_ = None
    lhs = None
    for seg, off in _statements(text):
        stripped = seg.strip()
        lead = off + len(seg) - len(seg.lstrip())
        if re.match(r"params\b", stripped):
            body = stripped[len("params"):]
            for m in re.finditer(r"[^,\s]+", body):
                name = m.group()
                if not re.fullmatch(r"[A-Za-z_Ͱ-Ͽ][A-Za-z0-9_Ͱ-Ͽ]*", name):
                    raise ParseError(f"bad parameter name {name!r}",
                                     lead + len("params") + m.start(), text)
                params.append(canonical_name(name))
            continue
        m = re.fullmatch(r"([A-Za-z]\w*)\s*\(([^)]*)\)", stripped)
        if m and "=" not in stripped:
            unknown = m.group(1)
            vars_ = tuple(v.strip() for v in m.group(2).split(",") if v.strip())
            if not vars_:
                raise ParseError("no independent variables declared", lead, text)
            continue
        if "=" not in seg:
            raise ParseError("expected an equation 'lhs = rhs'", lead, text)
        if unknown is None:
            raise ParseError("equation before the unknown declaration", lead, text)
        if lhs is not None:
            raise ParseError("only one equation is supported", lead, text)
        eq = seg.index("=")
        declared = set(params)
        left = _Parser(seg[:eq], off, text, vars_, unknown, declared, params).parse()
        right = _Parser(seg[eq + 1:], off + eq + 1, text, vars_, unknown, declared, params).parse()
        lhs = sub(left, right)
    if unknown is None:
        raise ParseError("missing unknown declaration such as 'u(x,t)'", len(text), text)
    if lhs is None:
        raise ParseError("missing equation", len(text), text)
    clash = set(params) & (set(vars_) | {unknown})
    if clash:
        raise ParseError(f"parameter clashes with a variable: {sorted(clash)}", 0, text)
    return PdeSpec(unknown, vars_, tuple(params), lhs)


def render_pde(pde: PdeSpec) -> str:
    head = f"params {', '.join(pde.params)}; " if pde.params else ""
    return f"{head}{pde.unknown}({', '.join(pde.vars)}); {render(pde.lhs)} = 0"


def _parse_activation(text: str, first: bool, off: int, full: str):
    t = text.replace(" ", "")
    m = re.fullmatch(r"(phi|arg)(?:\^(-?\d+))?", t)
    if not m:
        raise ParseError(f"unknown activation {text.strip()!r}", off, full)
    k = int(m.group(2)) if m.group(2) else 1
    try:
        if m.group(1) == "phi":
            if not first:
                raise ParseError("phi activation outside the first hidden layer", off, full)
            return PhiPower(k)
        return ArgPower(k)
    except NetworkError as exc:
        raise ParseError(str(exc), off, full) from None


def _bracket_items(body: str, off: int, full: str):
    m = re.fullmatch(r"\s*\[(.*)\]\s*", body)
    if not m:
        raise ParseError("expected a bracketed list", off, full)
    start = off + m.start(1)
    items = []
    for im in re.finditer(r"[^,]+", m.group(1)):
        if im.group().strip():
            items.append((im.group().strip(), start + im.start()))
    return items


def parse_network(text: str) -> NetworkSpec:
    inputs = None
    layers: dict[int, list] = {}
    output = "u"
    riccati = "b"
    arch = None
    overrides = {}
    pos = 0
    for raw in text.splitlines(keepends=True):
        line = raw.split("#", 1)[0]
        off = pos + len(line) - len(line.lstrip())
        pos += len(raw)
        if not line.strip():
            continue
        m = re.match(r"\s*(\w+)(.*)", line)
        key, rest = m.group(1), m.group(2)
        rest_off = off + len(key)
        if key == "inputs":
            inputs = tuple(n for n, _ in _bracket_items(rest, rest_off, text))
        elif re.fullmatch(r"layer\d+", key):
            idx = int(key[5:])
            if idx in layers:
                raise ParseError(f"duplicate {key}", off, text)
            items = _bracket_items(rest, rest_off, text)
            layers[idx] = [_parse_activation(a, idx == 1, o, text) for a, o in items]
        elif key == "output":
            outs = _bracket_items(rest, rest_off, text)
            if len(outs) != 1:
                raise ParseError("width mismatch: exactly one output is supported", off, text)
            output = outs[0][0]
        elif key == "riccati":
            riccati = canonical_name(rest.strip())
        elif key == "arch":
            arch = rest.strip()
        elif key == "symbol":
            sm = re.fullmatch(r"\s*(\S+)\s*=\s*(\S+)\s*", rest)
            if not sm:
                raise ParseError("expected 'symbol <default> = <name>'", off, text)
            overrides[sm.group(1)] = sm.group(2)
        else:
            raise ParseError(f"unknown directive {key!r}", off, text)
    if inputs is None:
        raise ParseError("missing 'inputs' line", len(text), text)
    if not layers:
        raise ParseError("fewer than 1 hidden layer", len(text), text)
    if sorted(layers) != list(range(1, len(layers) + 1)):
        raise ParseError("hidden layers must be numbered layer1, layer2, ...", len(text), text)
    hidden = [layers[i] for i in range(1, len(layers) + 1)]
    try:
        spec = make_network(inputs, hidden, overrides, riccati=riccati, output=output)
    except NetworkError as exc:
        raise ParseError(str(exc), 0, text) from None
    if arch is not None and arch != spec.arch():
        raise ParseError(f"width mismatch: declared {arch}, layers give {spec.arch()}", 0, text)
    return spec


def render_network(spec: NetworkSpec) -> str:
    lines = [f"inputs [{', '.join(spec.inputs)}]"]
    for i, layer in enumerate(spec.hidden_layers, 1):
        lines.append(f"layer{i} [{', '.join(str(a) for a in layer)}]")
    lines.append(f"output [{spec.output}]")
    if spec.riccati.name != "b":
        lines.append(f"riccati {spec.riccati.name}")
    return "\n".join(lines) + "\n"
