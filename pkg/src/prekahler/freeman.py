"""Kernel fields, bracket operators, and the pointwise filtration of a
degenerate potential.

On a surface the two-form built from a rank-1 potential has a line field of
kernel directions.  Bracketing a kernel field against conjugate directions
and projecting modulo the kernel measures how far the potential is from a
product; iterating gives a short filtration whose length is the
nondegeneracy order (1, 2, or infinite).  The jet helpers express the same
dichotomy through derivatives of the potential at an adapted origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .coframe import GeometryError, RankError, hessian, omega_g_from_potential, rank_at
from .dsl import (DslError, Expr, add, bar, const, coord, div, evaluate, mul,
                  neg, sub, subst_coords)
from .wirtinger import Diff, deriv_multi

_ENGINE = Diff()
_DIRS = ("z1", "z2", "z1~", "z2~")
_ZERO = const(0.0)
_ONE = const(1.0)

Env = Mapping[str, complex]


@dataclass(frozen=True)
class VectorField:
    """Field with Expr coefficients over (d/dz1, d/dz2, d/dz1b, d/dz2b)."""

    coeffs: tuple[Expr, Expr, Expr, Expr]

    def apply(self, f: Expr, engine: Diff | None = None) -> Expr:
        eng = engine or _ENGINE
        return add(*(mul(c, eng.d(f, d)) for c, d in zip(self.coeffs, _DIRS)))

    def conj(self) -> "VectorField":
        c = self.coeffs
        return VectorField((bar(c[2]), bar(c[3]), bar(c[0]), bar(c[1])))

    def at(self, env: Env) -> np.ndarray:
        return np.array([evaluate(c, env) for c in self.coeffs])

    def tangent6(self, env: Env) -> np.ndarray:
        """Components padded to the six-slot frame used by form matrices."""
        out = np.zeros(6, dtype=complex)
        out[:4] = self.at(env)
        return out


def bracket(a: VectorField, b: VectorField,
            engine: Diff | None = None) -> VectorField:
    eng = engine or _ENGINE
    return VectorField(tuple(
        sub(a.apply(c_b, eng), b.apply(c_a, eng))
        for c_a, c_b in zip(a.coeffs, b.coeffs)))


@dataclass(frozen=True)
class FiltrationReport:
    point: dict[str, complex]
    ranks: tuple[int, int, int]
    order: int | float
    ad: complex | None
    degenerate: bool = False


def _kernel_slope(rho: Expr) -> Expr:
    """The ratio rho_{2 1b} / rho_{1 1b} whose graph is the kernel line."""
    h = hessian(rho)
    try:
        return div(h[1][0], h[0][0])
    except DslError:
        raise GeometryError(
            "kernel field needs rho_{1 1b} != 0; swap the coordinates") from None


def kernel_field(rho: Expr, envs: Sequence[Env] = (),
                 tol: float = 1e-9) -> VectorField:
    """Field spanning the kernel line where the potential has rank 1.

    Any sample environments passed in are rank-checked first.
    """
    h = hessian(rho)
    for env in envs:
        r = rank_at(h, env, tol)
        if r != 1:
            raise RankError(f"rank {r} at {_fmt_env(env)}; kernel needs rank 1")
    q = _kernel_slope(rho)
    return VectorField((neg(q), _ONE, _ZERO, _ZERO))


def ad_operator(rho: Expr, p: Env, tol: float = 1e-9) -> complex:
    """Matrix entry of x -> [Y, conj(x)] on the line complementing the kernel.

    Built from the symbolic bracket and the projection modulo the kernel;
    the result is nonzero exactly where the potential is 2-nondegenerate.
    """
    y = kernel_field(rho, envs=(p,), tol=tol)
    q = _kernel_slope(rho)
    dbar1 = VectorField((_ZERO, _ZERO, _ONE, _ZERO))
    br = bracket(y, dbar1)
    # w1 d/dz1 + w2 d/dz2 is congruent to (w1 + q w2) d/dz1 modulo Y
    return evaluate(add(br.coeffs[0], mul(q, br.coeffs[1])), p)


def filtration(rho: Expr, p: Env, tol: float = 1e-8,
               probes: int = 8, radius: float = 1e-2,
               seed: int = 0) -> FiltrationReport:
    """Kernel ranks, nondegeneracy order, and the ad value at a point.

    The rank must be locally constant; nearby probe points are sampled and a
    disagreement raises RankError rather than guessing a stratum.
    """
    h = hessian(rho)
    r = rank_at(h, p, tol=1e-9)
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        shift = rng.uniform(-radius, radius, size=4)
        env = dict(p)
        env["z1"] = complex(p.get("z1", 0)) + complex(shift[0], shift[1])
        env["z2"] = complex(p.get("z2", 0)) + complex(shift[2], shift[3])
        rp = rank_at(h, env, tol=1e-9)
        if rp != r:
            raise RankError(
                f"rank jumps from {r} at {_fmt_env(p)} to {rp} nearby; "
                "the filtration needs locally constant rank")
    point = {k: complex(v) for k, v in p.items()}
    if r == 2:
        return FiltrationReport(point, (2, 0, 0), 1, None)
    if r == 0:
        return FiltrationReport(point, (2, 2, 2), math.inf, None,
                                degenerate=True)
    ad = ad_operator(rho, p)
    if abs(ad) > tol:
        return FiltrationReport(point, (2, 1, 0), 2, ad)
    return FiltrationReport(point, (2, 1, 1), math.inf, ad, degenerate=True)


def _adapted_chart(rho: Expr, p: Env,
                   engine: Diff | None = None) -> tuple[Expr, dict[str, complex]]:
    """Move p to the origin, kill the linear part, align the kernel.

    Returns the transformed potential and the environment of the new origin
    (parameters such as exponents ride along unchanged).
    """
    eng = engine or _ENGINE
    z1, z2 = coord("z1"), coord("z2")
    extras = {k: complex(v) for k, v in p.items() if k not in ("z1", "z2")}
    moved = subst_coords(rho, {
        "z1": add(z1, const(complex(p.get("z1", 0)))),
        "z2": add(z2, const(complex(p.get("z2", 0))))})
    origin: dict[str, complex] = {"z1": 0j, "z2": 0j, **extras}
    g1 = evaluate(eng.d(moved, "z1"), origin)
    g2 = evaluate(eng.d(moved, "z2"), origin)
    lin = add(mul(const(g1), z1), mul(const(g2), z2))
    moved = sub(moved, add(lin, bar(lin)))
    h = hessian(moved)
    if rank_at(h, origin) == 1:
        h00 = evaluate(h[0][0], origin)
        h11 = evaluate(h[1][1], origin)
        if abs(h00) < abs(h11):
            moved = subst_coords(moved, {"z1": z2, "z2": z1})
            h = hessian(moved)
        q0 = evaluate(div(h[1][0], h[0][0]), origin)
        if abs(q0) > 1e-12:
            moved = subst_coords(moved, {
                "z1": sub(z1, mul(const(q0), z2)), "z2": z2})
    return moved, origin


def jet_span_condition(rho: Expr, p: Env, k: int,
                       tol: float = 1e-8) -> bool:
    """Do the barred derivatives of the gradient up to order k span C^2?

    Evaluated at the adapted origin; rank is read off a singular value
    threshold relative to the largest entry.
    """
    if k < 1:
        raise ValueError("the span condition needs k >= 1")
    moved, origin = _adapted_chart(rho, p)
    rz1 = _ENGINE.d(moved, "z1")
    rz2 = _ENGINE.d(moved, "z2")
    rows = []
    for b1 in range(k + 1):
        for b2 in range(k + 1 - b1):
            if b1 + b2 == 0:
                continue
            beta = (b1, b2)
            rows.append([
                evaluate(deriv_multi(rz1, (0, 0), beta, _ENGINE), origin),
                evaluate(deriv_multi(rz2, (0, 0), beta, _ENGINE), origin)])
    m = np.array(rows)
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, float(s[0])))) == 2


def jet_leading_terms(rho: Expr, p: Env) -> tuple[complex, complex, complex]:
    """(rho_{2 1b}, rho_{2 1b 1b}, rho_{1 1b}) at the adapted origin."""
    moved, origin = _adapted_chart(rho, p)
    h = hessian(moved)
    return (evaluate(h[1][0], origin),
            evaluate(_ENGINE.d(h[1][0], "z1~"), origin),
            evaluate(h[0][0], origin))


def jet_leading_terms_check(rho: Expr, p: Env, tol: float = 1e-8) -> bool:
    """Surface-case leading-term test: the mixed second derivative vanishes
    at the adapted origin while its barred derivative and rho_{1 1b} do not.
    """
    r21b, r21b1b, r11b = jet_leading_terms(rho, p)
    return abs(r21b) <= tol and abs(r21b1b) > tol and abs(r11b) > tol


def kernel_integrability_check(rho: Expr, samples: Sequence[Env]) -> float:
    """Worst residual of the kernel closing under brackets.

    Contracts [Y, conj(Y)] and [Y, f Y] against the two-form at each sample;
    both must annihilate it when the kernel really is a foliation.
    """
    omega, _ = omega_g_from_potential(rho)
    y = kernel_field(rho)
    scale = add(_ONE, mul(const(0.5), coord("z1")))
    resid1 = bracket(y, y.conj())
    resid2 = bracket(y, VectorField(tuple(mul(scale, c) for c in y.coeffs)))
    worst = 0.0
    for env in samples:
        m = omega.matrix(env)
        for r in (resid1, resid2):
            worst = max(worst, float(np.max(np.abs(m @ r.tangent6(env)))))
    return worst


def _fmt_env(env: Env) -> str:
    zs = ", ".join(f"{k}={complex(env[k]):.3g}" for k in ("z1", "z2")
                   if k in env)
    return zs or "origin"
