"""Circle-bundle side: contact form, presymplectification, surface symmetries."""

import numpy as np
import pytest

from prekahler.coframe import GeometryError, omega_g_from_potential
from prekahler.dsl import builtin_potential, const, parse
from prekahler.sasaki import (
    Hypersurface,
    RealVectorField,
    algebra_table,
    check_11_presymplectification,
    commutator,
    contact_form,
    homogeneous_surface,
    homogeneous_symmetries,
    presymplectify,
    stabilizer_dim,
    tangency_check,
)


def _with_fiber(env, t=1.0, v=0.0):
    out = dict(env)
    out.setdefault("t", t)
    out.setdefault("v", v)
    return out


def test_contact_form_components():
    rho, _ = builtin_potential("kahler", {})
    env = {"z1": 0.3 + 0.1j, "z2": -0.2 + 0.4j}
    slots = contact_form(rho).at(env)
    assert slots[(4,)] == 1
    assert slots[(0,)] == pytest.approx(1j * env["z1"].conjugate())
    assert slots[(1,)] == pytest.approx(1j * env["z2"].conjugate())
    assert slots[(2,)] == pytest.approx(-1j * env["z1"])
    assert slots[(3,)] == pytest.approx(-1j * env["z2"])


def test_contact_form_of_zero_potential_is_dv():
    slots = contact_form(const(0.0)).at({"z1": 0j, "z2": 0j})
    assert slots == {(4,): 1}


def test_contact_derivative_recovers_the_metric_form():
    rho, dom = builtin_potential("flat", {})
    omega, _ = omega_g_from_potential(rho)
    gap = contact_form(rho).ext_d() - omega.scaled(const(-4.0))
    for env in dom.sample(3, seed=0):
        for val in gap.at(_with_fiber(env)).values():
            assert abs(val) < 1e-12


def test_presymplectification_is_closed():
    rho, dom = builtin_potential("flat", {})
    omega_hat = presymplectify(rho)
    closed = omega_hat.ext_d()
    for env in dom.sample(3, seed=1):
        vals = closed.at(_with_fiber(env)).values()
        assert max(abs(v) for v in vals) < 1e-12 if vals else True


def test_presymplectification_of_zero_potential():
    slots = presymplectify(const(0.0)).at({"z1": 0j, "z2": 0j, "t": 1.0})
    assert slots == {(4, 5): -1}


@pytest.mark.parametrize("name,rank_contact,rank_lifted", [
    ("kahler", 4, 6),
    ("flat", 2, 4),
])
def test_two_form_ranks(name, rank_contact, rank_lifted):
    rho, dom = builtin_potential(name, {})
    env = _with_fiber(dom.sample(1, seed=4)[0])
    d_theta = contact_form(rho).ext_d().matrix(env)
    omega_hat = presymplectify(rho).matrix(env)
    assert np.linalg.matrix_rank(d_theta, tol=1e-9) == rank_contact
    assert np.linalg.matrix_rank(omega_hat, tol=1e-9) == rank_lifted


def test_11_check_accepts_potential_lifts():
    for name in ("kahler", "flat", "product"):
        rho, dom = builtin_potential(name, {})
        samples = [_with_fiber(e) for e in dom.sample(4, seed=2)]
        assert check_11_presymplectification(rho, samples) < 1e-10


class TestSurfaceSymmetries:
    def test_surface_guards_its_exponent(self):
        for bad in (0.0, 1.0):
            with pytest.raises(ValueError):
                homogeneous_surface(bad)

    def test_surface_samples_lie_on_the_level_set(self):
        surf = homogeneous_surface(3.0)
        defining = surf.defining()
        from prekahler.dsl import evaluate
        for env in surf.samples(5, seed=0):
            assert abs(evaluate(defining, env)) < 1e-12

    def test_nonreal_right_hand_side_is_rejected(self):
        surf = Hypersurface(parse("z1"))
        with pytest.raises(GeometryError):
            surf.samples(3, seed=0)

    def test_symmetries_are_tangent(self):
        surf = homogeneous_surface(3.0)
        for field in homogeneous_symmetries():
            assert tangency_check(field, surf, n=8, seed=0)
        assert tangency_check(surf.vertical(), surf, n=8, seed=0)

    def test_a_generic_field_is_not_tangent(self):
        surf = homogeneous_surface(3.0)
        sideways = RealVectorField.from_text("1", "0", "0")
        assert not tangency_check(sideways, surf, n=8, seed=0)

    def test_bracket_constants(self):
        # For exponent a the scaling fields close with b = a/(1-a).
        a = 3.0
        b = a / (1 - a)
        surf = homogeneous_surface(a)
        fields = homogeneous_symmetries()
        base = surf.samples(1, seed=1)[0]
        table = algebra_table(fields, base)
        assert table.residual < 1e-9
        c = table.constants
        assert c[1, 3, 1] == pytest.approx(1.0)
        assert c[2, 3, 2] == pytest.approx(-b)
        assert c[1, 4, 1] == pytest.approx(1.0)
        assert c[2, 4, 2] == pytest.approx(b)
        assert c[0, 4, 0] == pytest.approx(2 * a)
        assert np.allclose(c, -np.swapaxes(c, 0, 1))

    def test_commutator_matches_table_entry(self):
        fields = homogeneous_symmetries()
        lie = commutator(fields[1], fields[3])
        base = homogeneous_surface(3.0).samples(1, seed=2)[0]
        assert np.allclose(lie.components(base), fields[1].components(base))

    def test_stabilizer_dimensions(self):
        surf = homogeneous_surface(3.0)
        table = algebra_table(homogeneous_symmetries(),
                              surf.samples(1, seed=1)[0])
        dims = [stabilizer_dim(np.eye(5)[k], table) for k in range(5)]
        assert dims == [4, 4, 4, 3, 2]
        rng = np.random.default_rng(5)
        for _ in range(10):
            x = rng.normal(size=5)
            assert stabilizer_dim(x, table) == 2
