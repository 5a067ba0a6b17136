"""Adapted coframe construction, structure scalars, gauge action, classify."""

import numpy as np
import pytest

from prekahler.coframe import (
    ChartShift,
    SingularityError,
    T3_extract,
    adapted_coframe,
    circle_lift,
    classify,
    gauge_rotate,
    hessian,
    nondeg_scalar_C,
    rank_at,
    structure_residuals,
)
from prekahler.dsl import Domain, builtin_potential, evaluate, parse

ORIGIN = {"z1": 0j, "z2": 0j, "t": 0.0}


class TestFlatModel:
    def test_frozen_origin_values(self, cf_flat):
        assert evaluate(cf_flat.h, ORIGIN) == pytest.approx(1.0)
        assert evaluate(cf_flat.C, ORIGIN) == pytest.approx(1.0)
        assert evaluate(cf_flat.q, ORIGIN) == pytest.approx(0.0)

    def test_structure_scalars_vanish(self, cf_flat, flat_pair):
        for env in flat_pair[1].sample(4, seed=2):
            full = {**env, "t": 0.0}
            assert abs(evaluate(cf_flat.T1, full)) < 1e-10
            assert abs(evaluate(cf_flat.T2, full)) < 1e-10

    def test_T3_extraction_vanishes_too(self, cf_flat):
        lift = circle_lift(cf_flat)
        env = {"z1": 0.11 + 0.07j, "z2": -0.2 + 0.05j}
        assert abs(T3_extract(cf_flat, env, lift)) < 1e-10

    def test_structure_equations_close(self, cf_flat, flat_pair):
        for env in flat_pair[1].sample(3, seed=6):
            worst = max(structure_residuals(cf_flat, env).values())
            assert worst < 1e-8


class TestHomogeneousFamily:
    def test_frozen_origin_values(self, cf_homog3):
        env = {**ORIGIN, "a": 3.0}
        assert evaluate(cf_homog3.h, env) == pytest.approx(3.0)
        assert evaluate(cf_homog3.q, env) == pytest.approx(-1.0)
        assert evaluate(cf_homog3.C, env) == pytest.approx(-1 / 6)
        assert evaluate(cf_homog3.T1, env) == pytest.approx(-1 / 27)

    def test_T3_at_origin(self, cf_homog3):
        lift = circle_lift(cf_homog3)
        val = T3_extract(cf_homog3, {"z1": 0j, "z2": 0j, "a": 3.0}, lift)
        assert val == pytest.approx(-1j / 27)

    def test_basic_invariants_match_family_formula(self, cf_homog3,
                                                   homog3_pair):
        # kappa(a) = (a+1)(a-2)/(9a(a-1)); T1 = -kappa/rho along the family.
        rho, dom = homog3_pair
        kappa = 4 * 1 / (9 * 3 * 2)
        for env in dom.sample(5, seed=1):
            full = {**env, "t": 0.0}
            expected = -kappa / evaluate(rho, env).real
            assert evaluate(cf_homog3.T1, full) == pytest.approx(expected)


class TestGaugeAction:
    def test_rotation_twists_T1_by_double_phase(self, cf_homog3):
        env = {"z1": 0.05 + 0j, "z2": -0.1 + 0j, "a": 3.0, "t": 0.0}
        before = evaluate(cf_homog3.T1, env)
        after = evaluate(gauge_rotate(cf_homog3, 0.3).T1, env)
        assert after == pytest.approx(before * np.exp(0.6j))
        assert abs(after) == pytest.approx(abs(before))

    def test_rotation_is_recorded_and_composes(self, cf_flat):
        once = gauge_rotate(cf_flat, 0.2)
        twice = gauge_rotate(once, 0.5)
        assert twice.gauge_phase == pytest.approx(0.7)

    def test_moduli_of_C_are_unchanged(self, cf_homog3):
        env = {"z1": 0.02 + 0.01j, "z2": 0.03 - 0.04j, "a": 3.0, "t": 0.0}
        rotated = gauge_rotate(cf_homog3, 1.1)
        assert abs(evaluate(rotated.C, env)) == pytest.approx(
            abs(evaluate(cf_homog3.C, env)))


def test_degenerate_potentials_are_rejected():
    for name in ("kahler", "product"):
        rho, _ = builtin_potential(name, {})
        with pytest.raises(SingularityError):
            adapted_coframe(rho)


def test_chart_shift_default_is_identity():
    s = ChartShift()
    assert not s.swapped
    assert s.eps == 0


def test_rank_of_hessian():
    kah, _ = builtin_potential("kahler", {})
    flat, _ = builtin_potential("flat", {})
    env = {"z1": 0.1 + 0.2j, "z2": 0.05 - 0.1j}
    assert rank_at(hessian(kah), env) == 2
    assert rank_at(hessian(flat), env) == 1


def test_nondeg_scalar_matches_coframe_C(cf_flat, flat_pair):
    rho, dom = flat_pair
    scal = nondeg_scalar_C(rho)
    for env in dom.sample(4, seed=9):
        assert abs(evaluate(scal, env)) == pytest.approx(
            abs(evaluate(cf_flat.C, {**env, "t": 0.0})))


class TestClassification:
    def test_kahler_rank_two(self, kahler_pair):
        rep = classify(*kahler_pair, n=12, seed=0)
        assert rep.verdict == "pseudoKahler"
        assert all(s.rank == 2 for s in rep.samples)

    def test_product_degenerates_holomorphically(self, product_pair):
        rep = classify(*product_pair, n=12, seed=0)
        assert rep.verdict == "holDegenerate"

    def test_flat_model(self, flat_pair):
        rep = classify(*flat_pair, n=16, seed=0)
        assert rep.verdict == "flat2Nondeg"
        assert max(s.bT1 for s in rep.samples) < 1e-10

    def test_homogeneous_example(self, homog3_pair):
        rep = classify(*homog3_pair, n=16, seed=0)
        assert rep.verdict == "twistorT2zero"
        assert min(s.bT1 for s in rep.samples) > 1e-6

    def test_tube_potential(self):
        rho = parse("(re(z1)+1)*exp((re(z2)+1)/(re(z1)+1))")
        dom = Domain({"z1": (-0.5, 0.5, -0.5, 0.5),
                      "z2": (-0.5, 0.5, -0.5, 0.5)}, {})
        rep = classify(rho, dom, n=8, seed=0)
        assert rep.verdict == "twistorT2zero"
