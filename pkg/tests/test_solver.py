import numpy as np
import pytest

from aennm.expr import Symbol, eval_numeric, num, substitute
from aennm.parsing import parse_expr
from aennm.solver import (SearchBudget, SolutionFamily, render_family, resolve_assignment, solve,
                          verify_assignment)
from aennm.system import AlgebraicSystem
from aennm.textio import parse_families

from conftest import EXAMPLES, derived, load_family, setup_for

P = parse_expr

ADMITTED = ["evolution_s1", "kdv_burgers_s1", "kdv_burgers_s2_corrected", "kdv_burgers_s3",
            "kdv_burgers_s4", "boussinesq_s1_b3zero", "boussinesq_s2", "evolution_2221_s1",
            "evolution_2221_s2", "evolution_2221_s3"]


def test_factor_split():
    res = solve(AlgebraicSystem((P("w_13*w_3u"),)))
    got = sorted(tuple((s.name, str(v)) for s, v in f.assignment.items()) for f in res)
    assert got == [(("w_13", "0"),), (("w_3u", "0"),)]
    assert not res.incomplete


def test_inconsistent():
    assert len(solve(AlgebraicSystem((num(1),)))) == 0


def test_linear_chain():
    res = solve(AlgebraicSystem((P("p - 2*q"), P("q - 3"))))
    assert len(res) == 1
    a = resolve_assignment(res[0].assignment)
    assert a[Symbol("p")] == num(6) and a[Symbol("q")] == num(3)


def test_quadratic():
    res = solve(AlgebraicSystem((P("p^2 - 4"),)))
    assert sorted(str(f.assignment[Symbol("p")]) for f in res) == ["-2", "2"]


def test_nonzero_symbols_respected():
    res = solve(AlgebraicSystem((P("w_13*w_3u"),)), nonzero=[Symbol("w_13")])
    assert [dict(f.assignment) for f in res] == [{Symbol("w_3u"): num(0)}]


def test_empty_system_empty_family():
    rep = verify_assignment(AlgebraicSystem(()), SolutionFamily({}))
    assert rep.ok


@pytest.mark.parametrize("name", ADMITTED)
def test_reference_family_admitted(name):
    _, _, sys_ = setup_for(name)
    rep = verify_assignment(sys_, load_family(name))
    assert rep.verdict == "PASS", rep.render()


@pytest.mark.parametrize("name", ["kdv_burgers_s2", "boussinesq_s1"])
def test_verbatim_variants_fail(name):
    """Transcribed verbatim, these two do not annihilate the system;
    the corrected files above do."""
    _, _, sys_ = setup_for(name)
    rep = verify_assignment(sys_, load_family(name))
    assert rep.verdict == "FAIL" and rep.failing()


def test_perturbed_family_fails():
    _, _, sys_ = setup_for("evolution_s1")
    fam = load_family("evolution_s1")
    bad = dict(fam.assignment)
    bad[Symbol("b_4")] = P("b*w_24")
    rep = verify_assignment(sys_, SolutionFamily(bad))
    assert rep.verdict == "FAIL"
    # independent numeric confirmation that some equation is nonzero
    rng = np.random.default_rng(0)
    env = {s.name: rng.uniform(0.5, 1.5) for s in sys_.symbols}
    vals = {k.name: eval_numeric(v, env) for k, v in resolve_assignment(bad).items()}
    env.update(vals)
    assert max(abs(eval_numeric(eq, env)) for eq in sys_.equations) > 1e-6


def test_annihilated_assumption_flagged():
    sys_ = AlgebraicSystem((P("p*q"),), (P("q"),))
    rep = verify_assignment(sys_, SolutionFamily({Symbol("q"): num(0)}))
    assert rep.verdict == "FAIL" and rep.annihilated


def test_report_lists_failing_equations():
    sys_ = AlgebraicSystem((P("p - 1"), P("q")))
    rep = verify_assignment(sys_, SolutionFamily({Symbol("p"): num(1), Symbol("q"): num(2)}))
    text = rep.render()
    assert "equation 2 nonzero: 2" in text and "equation 1" not in text


def test_family_text_round_trip():
    fam = load_family("evolution_s1")
    again = parse_families(render_family(fam))[0]
    assert again.assignment == fam.assignment


def test_budget_exhaustion_flags_incomplete():
    _, _, sys_ = setup_for("evolution_s1")
    res = solve(sys_, SearchBudget(total_seconds=0.0))
    assert res.incomplete


@pytest.mark.parametrize("example", list(EXAMPLES))
def test_emitted_families_reverify(example):
    d, _ = derived(example)
    assert d.families
    for fam_d in d.families:
        assert verify_assignment(d.system, fam_d.family).ok


@pytest.mark.parametrize("example", list(EXAMPLES))
def test_families_pairwise_distinct(example):
    d, _ = derived(example)
    texts = [render_family(f.family.renamed("")) for f in d.families]
    assert len(set(texts)) == len(texts)


def test_solve_is_deterministic():
    _, _, sys_ = setup_for("evolution_s1")
    from aennm.pipeline import elimination_order
    from conftest import load_network, load_pde
    order = elimination_order(load_pde("evolution"), load_network("2221_phi_phi2"))
    nz = load_pde("evolution").param_symbols
    a = solve(sys_, nonzero=nz, order=order)
    b = solve(sys_, nonzero=nz, order=order)
    assert [render_family(f) for f in a] == [render_family(f) for f in b]
    assert a.incomplete == b.incomplete
