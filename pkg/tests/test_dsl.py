"""Expression language: parsing, evaluation, conjugation, builtins."""

import cmath

import pytest
from hypothesis import given, settings, strategies as st

from prekahler.dsl import (
    COMPLEX_COORDS,
    Domain,
    DslError,
    EvalError,
    ParseError,
    abs2,
    add,
    bar,
    builtin_potential,
    builtin_text,
    check_real,
    const,
    coord,
    evaluate,
    im_,
    mul,
    parse,
    re_,
    sub,
    to_text,
)

ENV = {"z1": 0.3 + 0.7j, "z2": -0.4 + 0.2j}


def test_parse_precedence_and_power():
    e = parse("1 + 2*z1^2")
    assert evaluate(e, {"z1": 3 + 0j}) == 19 + 0j


def test_imaginary_unit_is_a_bare_token():
    assert evaluate(parse("2*i"), {}) == 2j
    with pytest.raises(ParseError):
        parse("2i")


def test_parse_functions():
    z = ENV["z1"]
    assert evaluate(parse("conj(z1)"), ENV) == z.conjugate()
    assert evaluate(parse("abs2(z1)"), ENV) == pytest.approx(abs(z) ** 2)
    assert evaluate(parse("re(z1) + i*im(z1)"), ENV) == pytest.approx(z)
    assert evaluate(parse("exp(ln(abs2(z1)))"), ENV) == pytest.approx(abs(z) ** 2)
    assert evaluate(parse("sqrt(abs2(z2))"), ENV) == pytest.approx(abs(ENV["z2"]))


def test_parse_rejects_garbage():
    for text in ("", "z1 +", "unknownfn(z1)", "z1 ** 2", "((z1)"):
        with pytest.raises(ParseError):
            parse(text)


def test_unbound_name_raises_eval_error():
    with pytest.raises(EvalError):
        evaluate(parse("a*z1"), ENV)
    assert issubclass(EvalError, DslError)
    assert issubclass(ParseError, DslError)


class TestBuiltins:
    def test_all_builtins_parse_and_are_real(self):
        for name, params in (("flat", {}), ("homog", {"a": 3.0}),
                             ("kahler", {}), ("product", {})):
            rho, dom = builtin_potential(name, params)
            ok, worst, _ = check_real(rho, dom, n=24, seed=0)
            assert ok, f"{name}: max imaginary part {worst}"

    def test_builtin_text_matches_expression(self):
        rho, dom = builtin_potential("flat", {})
        env = dom.sample(1, seed=5)[0]
        again = parse(builtin_text("flat"))
        assert evaluate(again, env) == pytest.approx(evaluate(rho, env))

    def test_unknown_builtin(self):
        with pytest.raises(DslError):
            builtin_potential("mystery", {})

    def test_homog_guards_its_exponent(self):
        with pytest.raises(DslError):
            builtin_potential("homog", {})
        for bad in (0.0, 1.0):
            with pytest.raises(DslError):
                builtin_potential("homog", {"a": bad})

    def test_homog_binds_parameter_through_domain(self):
        rho, dom = builtin_potential("homog", {"a": 3.0})
        env = dom.sample(1, seed=0)[0]
        assert env["a"] == 3.0
        assert evaluate(rho, env).imag == pytest.approx(0.0, abs=1e-12)


class TestDomain:
    def test_sampling_is_deterministic(self):
        dom = Domain({"z1": (-1, 1, -1, 1), "z2": (-1, 1, -1, 1)}, {})
        assert dom.sample(5, seed=3) == dom.sample(5, seed=3)
        assert dom.sample(5, seed=3) != dom.sample(5, seed=4)

    def test_auxiliary_coordinates_stay_real(self):
        dom = Domain({"z1": (-1, 1, -1, 1), "t": (0.5, 1.5, 0, 0),
                      "v": (-1, 1, 0, 0)}, {})
        for env in dom.sample(8, seed=1):
            assert env["t"].imag == 0.0
            assert env["v"].imag == 0.0
        assert "z1" in COMPLEX_COORDS and "t" not in COMPLEX_COORDS


def test_check_real_flags_a_complex_potential():
    dom = Domain({"z1": (-1, 1, -1, 1), "z2": (-1, 1, -1, 1)}, {})
    ok, worst, witness = check_real(parse("z1*z2"), dom, n=16, seed=0)
    assert not ok
    assert worst > 1e-3
    assert witness is not None


# property tests ------------------------------------------------------------

_leaves = st.sampled_from([coord("z1"), coord("z2")]) | st.builds(
    const, st.complex_numbers(max_magnitude=2, allow_nan=False,
                              allow_infinity=False))


def _combine(children):
    return st.one_of(
        st.builds(lambda a, b: add(a, b), children, children),
        st.builds(lambda a, b: mul(a, b), children, children),
        st.builds(lambda a, b: sub(a, b), children, children),
        st.builds(bar, children),
        st.builds(re_, children),
        st.builds(im_, children),
        st.builds(abs2, children),
    )


exprs = st.recursive(_leaves, _combine, max_leaves=8)
envs = st.fixed_dictionaries({
    "z1": st.complex_numbers(max_magnitude=1.5, allow_nan=False,
                             allow_infinity=False),
    "z2": st.complex_numbers(max_magnitude=1.5, allow_nan=False,
                             allow_infinity=False),
})


@settings(max_examples=100)
@given(e=exprs, env=envs)
def test_bar_is_complex_conjugation(e, env):
    left = evaluate(bar(e), env)
    right = complex(evaluate(e, env)).conjugate()
    assert cmath.isclose(left, right, rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=100)
@given(e=exprs, env=envs)
def test_text_round_trip_is_semantic(e, env):
    """to_text output re-parses to an expression with the same values."""
    again = parse(to_text(e))
    assert cmath.isclose(evaluate(again, env), evaluate(e, env),
                         rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=60)
@given(e=exprs, env=envs)
def test_abs2_splits_into_re_and_im(e, env):
    total = evaluate(abs2(e), env)
    parts = evaluate(re_(e), env) ** 2 + evaluate(im_(e), env) ** 2
    assert cmath.isclose(total, parts, rel_tol=1e-9, abs_tol=1e-9)
