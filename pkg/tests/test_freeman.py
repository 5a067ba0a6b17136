"""Filtration ranks, nondegeneracy order, kernel field, jet criteria."""

import math

import pytest

from prekahler.coframe import RankError
from prekahler.dsl import builtin_potential, evaluate, parse
from prekahler.freeman import (
    ad_operator,
    filtration,
    jet_leading_terms,
    jet_leading_terms_check,
    jet_span_condition,
    kernel_field,
    kernel_integrability_check,
)

ORIGIN = {"z1": 0j, "z2": 0j}


@pytest.mark.parametrize("name,params,order", [
    ("kahler", {}, 1),
    ("flat", {}, 2),
    ("homog", {"a": 3.0}, 2),
    ("homog", {"a": 0.25}, 2),
])
def test_nondegeneracy_orders(name, params, order):
    rho, dom = builtin_potential(name, params)
    p = {**ORIGIN, **dom.params}
    rep = filtration(rho, p)
    assert rep.order == order
    assert not rep.degenerate


def test_product_never_becomes_nondegenerate():
    rho, _ = builtin_potential("product", {})
    rep = filtration(rho, ORIGIN)
    assert rep.order == math.inf
    assert rep.degenerate


def test_rank_sequences():
    # ranks list the dimensions of the descending filtration spaces.
    flat, _ = builtin_potential("flat", {})
    kah, _ = builtin_potential("kahler", {})
    prod, _ = builtin_potential("product", {})
    assert filtration(flat, ORIGIN).ranks == (2, 1, 0)
    assert filtration(kah, ORIGIN).ranks == (2, 0, 0)
    assert filtration(prod, ORIGIN).ranks == (2, 1, 1)


def test_ad_values_at_origin():
    flat, _ = builtin_potential("flat", {})
    hom, dom = builtin_potential("homog", {"a": 3.0})
    assert filtration(flat, ORIGIN).ad == pytest.approx(1.0)
    assert filtration(hom, {**ORIGIN, **dom.params}).ad == pytest.approx(-0.5)
    assert ad_operator(flat, ORIGIN) == pytest.approx(1.0)


def test_rank_jump_near_the_base_point_is_detected():
    rho = parse("abs2(z1) + abs2(z2)^2")
    with pytest.raises(RankError):
        filtration(rho, ORIGIN)


def test_kernel_field_requires_a_degenerate_metric():
    kah, dom = builtin_potential("kahler", {})
    with pytest.raises(RankError):
        kernel_field(kah, dom.sample(3, seed=2))


def test_kernel_field_annihilates_the_metric():
    rho, dom = builtin_potential("flat", {})
    envs = dom.sample(4, seed=2)
    y = kernel_field(rho, envs)
    from prekahler.coframe import hessian, hessian_matrix_at
    H = hessian(rho)
    for env in envs:
        m = hessian_matrix_at(H, env)
        vec = y.at(env)[:2]
        assert min(abs(vec @ m).max(), abs(m @ vec).max()) < 1e-9


def test_product_kernel_is_integrable():
    rho, dom = builtin_potential("product", {})
    assert kernel_integrability_check(rho, dom.sample(6, seed=2)) < 1e-12


class TestJetCriteria:
    def test_span_condition(self):
        flat, _ = builtin_potential("flat", {})
        hom, dom = builtin_potential("homog", {"a": 3.0})
        prod, _ = builtin_potential("product", {})
        assert jet_span_condition(flat, ORIGIN, 2)
        assert jet_span_condition(hom, {**ORIGIN, **dom.params}, 2)
        assert not jet_span_condition(prod, ORIGIN, 2)

    def test_flat_leading_terms(self):
        flat, _ = builtin_potential("flat", {})
        lead = jet_leading_terms(flat, ORIGIN)
        assert lead[0] == pytest.approx(0)
        assert lead[1] == pytest.approx(1)
        assert lead[2] == pytest.approx(1)

    def test_leading_check_separates_examples(self):
        flat, _ = builtin_potential("flat", {})
        hom, dom = builtin_potential("homog", {"a": 3.0})
        prod, _ = builtin_potential("product", {})
        assert jet_leading_terms_check(flat, ORIGIN)
        assert jet_leading_terms_check(hom, {**ORIGIN, **dom.params})
        assert not jet_leading_terms_check(prod, ORIGIN)


def test_order_is_invariant_under_translation():
    rho, dom = builtin_potential("flat", {})
    p = dom.sample(1, seed=7)[0]
    assert filtration(rho, p).order == 2
