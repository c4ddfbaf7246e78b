"""Network architectures and their feedforward trial functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .expr import Expr, PhiAtom, Symbol, Var, add, atoms, mul, power, symbols_of

__all__ = [
    "PhiPower", "ArgPower", "ActivationKind", "NetworkSpec", "RiccatiContext",
    "TrialFunction", "make_network", "build_trial", "free_symbols", "NetworkError",
]


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class PhiPower:
    """phi(xi)**k, first hidden layer only."""
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise NetworkError("phi power must be a positive integer")

    def __str__(self):
        return "phi" if self.k == 1 else f"phi^{self.k}"


@dataclass(frozen=True)
class ArgPower:
    """xi**k of the neuron's own affine input."""
    k: int = 1

    def __post_init__(self):
        if self.k == 0:
            raise NetworkError("arg power must be nonzero")

    def __str__(self):
        return "arg" if self.k == 1 else f"arg^{self.k}"


ActivationKind = Union[PhiPower, ArgPower]


def _weight_name(src, dst) -> str:
    s, d = str(src), str(dst)
    if len(s) == 1 and len(d) == 1:
        return f"w_{s}{d}"
    return f"w_{s}_{d}"


@dataclass(frozen=True)
class NetworkSpec:
    inputs: tuple[str, ...]
    hidden_layers: tuple[tuple[ActivationKind, ...], ...]
    weight_symbols: dict  # (src, dst) -> Symbol; src is an input name or neuron id, dst a neuron id or output
    bias_symbols: dict  # neuron id -> Symbol
    output_bias: Symbol
    riccati: Symbol = Symbol("b")
    output: str = "u"

    @property
    def layer_ids(self) -> list[list[int]]:
        out, n = [], 0
        for layer in self.hidden_layers:
            out.append(list(range(n + 1, n + len(layer) + 1)))
            n += len(layer)
        return out

    def all_symbols(self) -> list[Symbol]:
        return [*self.weight_symbols.values(), *self.bias_symbols.values(), self.output_bias]

    def arch(self) -> str:
        return "-".join(str(n) for n in [len(self.inputs), *map(len, self.hidden_layers), 1])


def make_network(inputs, hidden_layers, overrides=None, riccati="b", output="u") -> NetworkSpec:
    """Fully connected spec with the conventional symbol names (w_x1, w_13, w_3u, b_1, ...)."""
    overrides = dict(overrides or {})
    inputs = tuple(inputs)
    hidden_layers = tuple(tuple(layer) for layer in hidden_layers)
    if not hidden_layers:
        raise NetworkError("at least one hidden layer is required")
    if not inputs:
        raise NetworkError("at least one input is required")
    if any(len(layer) == 0 for layer in hidden_layers):
        raise NetworkError("width mismatch: empty hidden layer")
    for layer in hidden_layers[1:]:
        if any(isinstance(a, PhiPower) for a in layer):
            raise NetworkError("phi activations are only allowed in the first hidden layer")
    used = set()

    def sym(default):
        name = overrides.pop(default, default)
        if name in used:
            raise NetworkError(f"duplicate symbol name {name!r}")
        used.add(name)
        return Symbol(name)

    weights, biases = {}, {}
    prev = list(inputs)
    n = 0
    for layer in hidden_layers:
        ids = list(range(n + 1, n + len(layer) + 1))
        for j in ids:
            for i in prev:
                weights[(i, j)] = sym(_weight_name(i, j))
        for j in ids:
            biases[j] = sym(f"b_{j}")
        prev, n = ids, ids[-1]
    for i in prev:
        weights[(i, output)] = sym(_weight_name(i, output))
    out_bias = sym(f"b_{n + 1}")
    ric = overrides.pop(riccati, riccati)
    if ric in used:
        raise NetworkError(f"Riccati constant {ric!r} collides with a network symbol")
    if overrides:
        raise NetworkError(f"override for unknown symbol(s): {', '.join(sorted(overrides))}")
    if output in inputs:
        raise NetworkError("output name collides with an input")
    return NetworkSpec(inputs, hidden_layers, weights, biases, out_bias, Symbol(ric), output)


@dataclass(frozen=True)
class RiccatiContext:
    """Shared Riccati constant and the registered phi atoms with their affine arguments."""

    b: Symbol
    atoms: tuple[tuple[PhiAtom, Expr], ...] = ()

    def argument(self, atom: PhiAtom) -> Expr:
        for a, arg in self.atoms:
            if a == atom:
                return arg
        raise KeyError(f"unregistered atom phi{atom.index}")

    @property
    def atom_list(self) -> list[PhiAtom]:
        return [a for a, _ in self.atoms]


@dataclass(frozen=True)
class TrialFunction:
    expr: Expr
    ctx: RiccatiContext
    spec: NetworkSpec
    absent: frozenset = field(default_factory=frozenset)

    @property
    def vars(self) -> tuple[Var, ...]:
        return tuple(Var(v) for v in self.spec.inputs)


def build_trial(spec: NetworkSpec) -> TrialFunction:
    w, bias = spec.weight_symbols, spec.bias_symbols
    layers = spec.layer_ids
    registered = []
    outputs = {}
    for li, (ids, acts) in enumerate(zip(layers, spec.hidden_layers)):
        for j, act in zip(ids, acts):
            if li == 0:
                xi = add(*(mul(w[(v, j)], Var(v)) for v in spec.inputs), bias[j])
            else:
                xi = add(*(mul(w[(i, j)], outputs[i]) for i in layers[li - 1]), bias[j])
            if isinstance(act, PhiPower):
                if li != 0:
                    raise NetworkError("phi activation outside the first hidden layer")
                atom = PhiAtom(j)
                registered.append((atom, xi))
                outputs[j] = power(atom, act.k)
            else:
                outputs[j] = power(xi, act.k)
    u = add(*(mul(w[(j, spec.output)], outputs[j]) for j in layers[-1]), spec.output_bias)
    ctx = RiccatiContext(spec.riccati, tuple(registered))
    present = symbols_of(u)
    for _, arg in registered:
        present |= symbols_of(arg)
    absent = frozenset(s for s in spec.all_symbols() if s not in present)
    return TrialFunction(u, ctx, spec, absent)


def free_symbols(tf: TrialFunction) -> set[Symbol]:
    """Weight/bias symbols of the trial (atom arguments included) plus b when atoms are used."""
    out = symbols_of(tf.expr)
    used_atoms = {a for a in atoms(tf.expr) if isinstance(a, PhiAtom)}
    for atom, arg in tf.ctx.atoms:
        if atom in used_atoms:
            out |= symbols_of(arg)
    if used_atoms:
        out.add(tf.ctx.b)
    return out
