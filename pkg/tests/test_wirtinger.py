"""Symbolic Wirtinger derivatives against closed forms and finite differences."""

import pytest

from prekahler.dsl import evaluate, parse
from prekahler.wirtinger import (
    Diff,
    d_z,
    d_zbar,
    deriv_multi,
    fd_real,
    fd_wirtinger,
    jet,
)

ENV = {"z1": 0.31 + 0.12j, "z2": -0.25 + 0.4j}
ENG = Diff()


class TestClosedForms:
    def test_power(self):
        e = parse("z1^3")
        assert evaluate(d_z(e, "z1", ENG), ENV) == pytest.approx(3 * ENV["z1"] ** 2)
        assert evaluate(d_zbar(e, "z1", ENG), ENV) == 0

    def test_conjugate_coordinate(self):
        e = parse("conj(z1)")
        assert evaluate(d_z(e, "z1", ENG), ENV) == 0
        assert evaluate(d_zbar(e, "z1", ENG), ENV) == 1

    def test_abs2(self):
        e = parse("abs2(z1)")
        assert evaluate(d_z(e, "z1", ENG), ENV) == pytest.approx(
            ENV["z1"].conjugate())

    def test_re_splits_evenly(self):
        e = parse("re(z1)")
        assert evaluate(d_z(e, "z1", ENG), ENV) == pytest.approx(0.5)
        assert evaluate(d_zbar(e, "z1", ENG), ENV) == pytest.approx(0.5)

    def test_mixed_partials_commute(self):
        e = parse("abs2(z1)*re(z2) + exp(re(z1)*im(z2))")
        ab = ENG.d(ENG.d(e, "z1"), "z2~")
        ba = ENG.d(ENG.d(e, "z2~"), "z1")
        assert evaluate(ab, ENV) == pytest.approx(evaluate(ba, ENV))


class TestFiniteDifferenceAgreement:
    CASES = [
        "abs2(z1) + re(z1^2*conj(z2))",
        "exp(re(z2)) * im(z1)",
        "sqrt(1 + abs2(z1))",
        "(re(z1)+2)^(1/3)",
    ]

    @pytest.mark.parametrize("text", CASES)
    @pytest.mark.parametrize("direction", ["z1", "z2", "z1~", "z2~"])
    def test_matches_central_differences(self, text, direction):
        e = parse(text)
        sym = evaluate(ENG.d(e, direction), ENV)
        name = direction.rstrip("~")
        num = fd_wirtinger(e, ENV, name, conjugate=direction.endswith("~"))
        assert abs(sym - num) / max(1.0, abs(num)) < 1e-6


def test_deriv_multi_orders_do_not_matter():
    e = parse("abs2(z1)^2 * re(z2)")
    first = deriv_multi(e, (1, 0), (0, 1), ENG)
    second = ENG.d(ENG.d(e, "z2~"), "z1")
    assert evaluate(first, ENV) == pytest.approx(evaluate(second, ENV))


def test_jet_reads_off_taylor_data():
    # The flat model potential has vanishing rho_{2 1b} at the origin while
    # the third-order slot rho_{2 1b 1b} carries a unit coefficient.
    rho = parse("(abs2(z1)+re(z1^2*conj(z2)))/(1-abs2(z2))")
    j = jet(rho, {"z1": 0j, "z2": 0j}, 3, ENG)
    assert j(0, 0, 0, 0) == pytest.approx(0)
    assert j(1, 0, 1, 0) == pytest.approx(1)
    assert j(0, 1, 1, 0) == pytest.approx(0)
    assert j(0, 1, 2, 0) == pytest.approx(1)


def test_fd_real_differentiates_auxiliary_coordinates():
    e = parse("t^2 + v")
    env = {"t": 0.7, "v": 0.3}
    assert fd_real(e, env, "t") == pytest.approx(1.4)
    assert fd_real(e, env, "v") == pytest.approx(1.0)


def test_engine_caches_are_shared_per_instance():
    eng = Diff()
    e = parse("abs2(z1)")
    assert eng.d(e, "z1") is eng.d(e, "z1")
