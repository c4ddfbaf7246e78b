import pytest

from aennm.expr import PhiAtom, Symbol, Var, symbols_of
from aennm.network import ArgPower, NetworkError, PhiPower, build_trial, free_symbols, make_network
from aennm.parsing import parse_expr

from conftest import load_network, load_trial
from helpers import same_rational


def test_example_one_trial_structure():
    tf = load_trial("2221_phi_phi2")
    want = parse_expr("w_3u*(w_13*phi1 + w_23*phi2^2 + b_3) + w_4u/(w_14*phi1 + w_24*phi2^2 + b_4) + b_5")
    assert tf.expr == want
    args = dict(tf.ctx.atoms)
    assert args[PhiAtom(1)] == parse_expr("t*w_t1 + x*w_x1 + b_1")
    assert args[PhiAtom(2)] == parse_expr("t*w_t2 + x*w_x2 + b_2")


def test_example_three_trial_structure():
    tf = load_trial("3221_squares")
    want = parse_expr("w_3u*(w_13*phi1 + w_23*phi2 + b_3)^2 + w_4u/(w_14*phi1 + w_24*phi2 + b_4)^2 + b_5")
    assert tf.expr == want
    assert dict(tf.ctx.atoms)[PhiAtom(2)] == parse_expr("t*w_t2 + x*w_x2 + y*w_y2 + b_2")


def test_affine_collapse():
    spec = make_network(("x", "t"), [[ArgPower(1), ArgPower(1)], [ArgPower(1), ArgPower(1)]])
    tf = build_trial(spec)
    assert tf.ctx.atoms == ()
    # first-degree in x and t, no constant structure beyond an affine map
    from aennm.expr import expand
    e = expand(tf.expr)
    for term in e.terms:
        vs = [a for a in (term.factors if hasattr(term, "factors") else (term,)) if isinstance(a, Var)]
        assert len(vs) <= 1
    assert Symbol("b") not in free_symbols(tf)
    assert free_symbols(tf) == symbols_of(tf.expr)


def test_example_one_free_symbols():
    names = {s.name for s in free_symbols(load_trial("2221_phi_phi2"))}
    assert names == {"w_13", "w_23", "w_14", "w_24", "w_3u", "w_4u", "w_t1", "w_x1", "w_t2", "w_x2",
                     "b", "b_1", "b_2", "b_3", "b_4", "b_5"}


def test_example_three_free_symbols():
    # six input weights, four hidden weights, two output weights, five biases and b
    syms = {s.name for s in free_symbols(load_trial("3221_squares"))}
    assert {"w_y1", "w_y2"} <= syms
    assert len(syms) == 18


@pytest.mark.parametrize("net,count", [("2221_phi_phi2", 2), ("2221_phi_phi", 2), ("3221_squares", 2)])
def test_atom_count_is_first_layer_width(net, count):
    assert len(load_trial(net).ctx.atoms) == count == len(load_network(net).hidden_layers[0])


def test_distinct_atoms_for_equal_activations():
    tf = load_trial("2221_phi_phi")
    assert tf.ctx.atom_list == [PhiAtom(1), PhiAtom(2)]


def test_build_is_deterministic():
    spec = load_network("3221_squares")
    assert build_trial(spec).expr == build_trial(spec).expr


def test_phi_outside_first_layer_rejected():
    with pytest.raises(NetworkError):
        make_network(("x",), [[PhiPower(1)], [PhiPower(1)]])


def test_activation_validation():
    with pytest.raises(NetworkError):
        PhiPower(0)
    with pytest.raises(NetworkError):
        ArgPower(0)


def test_absent_symbols_recorded():
    # a zero-width path cannot occur, so every symbol is present in the full network
    assert load_trial("2221_phi_phi2").absent == frozenset()
