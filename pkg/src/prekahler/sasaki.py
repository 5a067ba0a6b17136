"""Hypersurface lift of a potential and the contact-side constructions.

A real potential rho on the surface chart defines the hypersurface
{re(w) = rho} in the (w, z1, z2) chart together with the vertical symmetry
d/dv.  This module builds the contact form on the (v, z) chart, its
symplectization on the t-ray bundle, the compatibility check of the lifted
complex structure, and the bracket algebra of ambient holomorphic symmetry
fields restricted to the hypersurface.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .coframe import GeometryError
from .dsl import (Expr, ZERO, add, bar, const, evaluate, mul, parse, sub)
from .forms import CoordForm, basis_form, one_form
from .wirtinger import Diff

_ENGINE = Diff()
_W_DIRS = ("w", "z1", "z2")

Env = Mapping[str, complex]


@dataclass(frozen=True)
class RealVectorField:
    """Realification Z + conj(Z) of a field with holomorphic coefficients.

    ``zeta`` holds the components of Z over (d/dw, d/dz1, d/dz2).  The sum
    with the conjugate is a real vector field on the ambient chart; applying
    it to a function and reading its real frame components both go through
    that presentation.
    """

    zeta: tuple[Expr, Expr, Expr]

    @staticmethod
    def from_text(w: str, z1: str, z2: str) -> "RealVectorField":
        return RealVectorField((parse(w), parse(z1), parse(z2)))

    def holomorphic_apply(self, f: Expr) -> Expr:
        return add(*(mul(c, _ENGINE.d(f, d))
                     for c, d in zip(self.zeta, _W_DIRS)))

    def apply(self, f: Expr) -> Expr:
        zf = self.holomorphic_apply(f)
        return add(zf, bar(zf))

    def components(self, env: Env) -> np.ndarray:
        """Real frame components over (d/du, d/dv, d/dx1, d/dy1, d/dx2, d/dy2)."""
        vals = [evaluate(c, env) for c in self.zeta]
        return np.array([vals[0].real, vals[0].imag, vals[1].real,
                         vals[1].imag, vals[2].real, vals[2].imag])


def commutator(a: RealVectorField, b: RealVectorField) -> RealVectorField:
    """Bracket of two realified fields, again in holomorphic presentation."""
    return RealVectorField(tuple(
        sub(a.holomorphic_apply(cb), b.holomorphic_apply(ca))
        for ca, cb in zip(a.zeta, b.zeta)))


@dataclass(frozen=True)
class Hypersurface:
    """The level set {re(w) = rhs(z)} with its vertical symmetry d/dv."""

    rhs: Expr
    params: tuple[tuple[str, complex], ...] = ()
    box: float = 0.25

    def defining(self) -> Expr:
        return sub(parse("re(w)"), self.rhs)

    def vertical(self) -> RealVectorField:
        return RealVectorField((const(1j), ZERO, ZERO))

    def samples(self, n: int, seed: int = 0) -> list[dict[str, complex]]:
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(n):
            x = rng.uniform(-self.box, self.box, size=5)
            env: dict[str, complex] = {"z1": complex(x[0], x[1]),
                                       "z2": complex(x[2], x[3])}
            env.update({k: complex(v) for k, v in self.params})
            u = evaluate(self.rhs, env)
            if abs(u.imag) > 1e-9 * max(1.0, abs(u)):
                raise GeometryError(
                    f"the right-hand side is not real at {env}")
            env["w"] = complex(u.real, x[4])
            out.append(env)
        return out


def homogeneous_surface(a: float, box: float = 0.25) -> Hypersurface:
    """The realization {re(w) = 2(x1+1)^a (x2+1)^(1-a) - 2} through 0."""
    if a in (0.0, 1.0):
        raise ValueError("the exponent must avoid 0 and 1")
    from .dsl import builtin_potential
    rho, _ = builtin_potential("homog", {"a": a})
    return Hypersurface(sub(rho, const(2.0)), params=(("a", complex(a)),),
                        box=box)


def homogeneous_symmetries() -> tuple[RealVectorField, ...]:
    """Five symmetry fields of the homogeneous family (exponent ``a``)."""
    texts = (("i", "0", "0"),
             ("0", "i", "0"),
             ("0", "0", "i"),
             ("0", "z1+1", "-(a/(1-a))*(z2+1)"),
             ("2*a*(w+2)", "z1+1", "(a/(1-a))*(z2+1)"))
    return tuple(RealVectorField.from_text(*t) for t in texts)


# -- contact and symplectization forms ---------------------------------------

def contact_form(rho: Expr) -> CoordForm:
    """dv + i(d'rho - d''rho): the 1-form annihilating the lifted distribution."""
    return one_form({4: const(1.0),
                     0: mul(const(1j), _ENGINE.d(rho, "z1")),
                     1: mul(const(1j), _ENGINE.d(rho, "z2")),
                     2: mul(const(-1j), _ENGINE.d(rho, "z1~")),
                     3: mul(const(-1j), _ENGINE.d(rho, "z2~"))})


def presymplectify(rho: Expr) -> CoordForm:
    """Exterior derivative of t times the contact form, on the t-ray chart.

    Exact by construction, hence closed; equals dt ^ theta + t d(theta).
    """
    return contact_form(rho).scaled(parse("t")).ext_d()


def _lifted_basis(rho: Expr, env: Env) -> list[np.ndarray]:
    """Columns e1, f1, e2, f2, d/dv, d/dt over the chart slots.

    e_j and f_j = J e_j span the horizontal lift of the kernel-complement
    distribution along constant-t sections.
    """
    g1 = evaluate(_ENGINE.d(rho, "z1"), env)
    g2 = evaluate(_ENGINE.d(rho, "z2"), env)
    return [np.array([1, 0, 1, 0, 2 * g1.imag, 0], dtype=complex),
            np.array([1j, 0, -1j, 0, 2 * g1.real, 0], dtype=complex),
            np.array([0, 1, 0, 1, 2 * g2.imag, 0], dtype=complex),
            np.array([0, 1j, 0, -1j, 2 * g2.real, 0], dtype=complex),
            np.array([0, 0, 0, 0, 1, 0], dtype=complex),
            np.array([0, 0, 0, 0, 0, 1], dtype=complex)]


# images of (e1, f1, e2, f2, d/dv, d/dt) under the lifted complex structure
_J_IMAGE = ((1, 1.0), (0, -1.0), (3, 1.0), (2, -1.0), (5, -1.0), (4, 1.0))


def check_11_presymplectification(rho: Expr, samples: Sequence[Env]) -> float:
    """Worst |omega-hat(v, w) - omega-hat(Jv, Jw)| over lifted basis pairs."""
    omega_hat = presymplectify(rho)
    worst = 0.0
    for env in samples:
        basis = _lifted_basis(rho, env)
        if abs(np.linalg.det(np.column_stack(basis))) < 1e-12:
            raise GeometryError(f"lifted frame degenerate at {env}")
        jbasis = [s * basis[k] for k, s in _J_IMAGE]
        m = omega_hat.matrix(env)
        for i in range(6):
            for j in range(i + 1, 6):
                r = basis[i] @ m @ basis[j] - jbasis[i] @ m @ jbasis[j]
                worst = max(worst, abs(r))
    return worst


# -- symmetry verification ----------------------------------------------------

def tangency_check(field: RealVectorField, surface: Hypersurface,
                   n: int = 16, seed: int = 0, tol: float = 1e-8) -> bool:
    """Does the realified field annihilate the defining function on the surface?"""
    derivative = field.apply(surface.defining())
    return all(abs(evaluate(derivative, env)) <= tol
               for env in surface.samples(n, seed))


@dataclass(frozen=True)
class AlgebraTable:
    """Structure constants of a field family at a base point.

    ``constants[i, j, k]`` is the X_k coefficient of [X_i, X_j]; ``residual``
    is the worst frame-solve defect, reported rather than raised so callers
    can see a family failing to close.
    """

    constants: np.ndarray
    residual: float
    point: dict[str, complex]

    def bracket_coeffs(self, i: int, j: int) -> np.ndarray:
        return self.constants[i, j]


def algebra_table(fields: Sequence[RealVectorField],
                  base: Env) -> AlgebraTable:
    """Brackets of all pairs, expanded in the family frame at one point."""
    k = len(fields)
    frame = np.column_stack([f.components(base) for f in fields])
    constants = np.zeros((k, k, k))
    residual = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            rhs = commutator(fields[i], fields[j]).components(base)
            sol, *_ = np.linalg.lstsq(frame, rhs, rcond=None)
            residual = max(residual,
                           float(np.linalg.norm(frame @ sol - rhs)))
            constants[i, j] = sol
            constants[j, i] = -sol
    return AlgebraTable(constants, residual,
                        {k_: complex(v) for k_, v in base.items()})


def stabilizer_dim(x: Sequence[float], table: AlgebraTable,
                   tol: float = 1e-7) -> int:
    """Dimension of {V in the span : [V, X] = 0} by nullspace of ad(., x)."""
    c = table.constants
    x_arr = np.asarray(x, dtype=float)
    if x_arr.shape != (c.shape[0],):
        raise ValueError(f"coefficient vector must have length {c.shape[0]}")
    m = np.einsum("ijk,j->ki", c, x_arr)
    s = np.linalg.svd(m, compute_uv=False)
    rank = int(np.sum(s > tol * max(1.0, float(s[0]))))
    return c.shape[0] - rank
