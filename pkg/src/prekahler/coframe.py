"""Adapted coframes and structure invariants of rank-1 potentials on C^2.

A real potential rho defines the closed (1,1)-form
omega = (i/2) rho_{i jbar} dz^i ^ dzbar^j.  When its Hessian has rank one
and the obstruction scalar C is nonzero, a distinguished coframe
(theta1, theta2, psi) exists, unique up to a circle action.  Its structure
equations

    d theta1 = -i psi ^ theta1 + bar(theta1) ^ theta2
    d theta2 = -2i psi ^ theta2 + T1 theta1 ^ bar(theta1) + T2 theta1 ^ theta2
    d psi    = i theta2 ^ bar(theta2) + i bar(T2) theta1 ^ bar(theta2)
               - i T2 bar(theta1) ^ theta2 + T3 theta1 ^ bar(theta1)

carry the fundamental scalars T1, T2 (complex) and T3 (purely imaginary).
|T1|^2 and |T2|^2 are invariant under the circle action and under adding a
pluriharmonic term to the potential.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .dsl import (Const, Domain, EvalError, Expr, add, bar, const, coord, div,
                  evaluate, ex, mul, neg, sq, sub, subst_coords)
from .forms import CoordForm, basis_form, decompose, one_form
from .wirtinger import Diff

_ENG = Diff()
_I = const(1j)

VERDICTS = ("pseudoKahler", "flat2Nondeg", "twistorT2zero", "general2Nondeg",
            "holDegenerate", "nonConstantRank")


class GeometryError(Exception):
    """Base for failures tied to the input geometry rather than the code."""


class RankError(GeometryError):
    """The Hessian rank does not match what the operation requires."""


class SingularityError(GeometryError):
    """A coordinate-expression singularity (rho_{1 1bar} or C vanishing)."""


def _d(e: Expr, direction: str) -> Expr:
    return _ENG.d(e, direction)


# ---------------------------------------------------------------------------
# Potential -> form and Hessian
# ---------------------------------------------------------------------------

def hessian(rho: Expr) -> tuple[tuple[Expr, Expr], tuple[Expr, Expr]]:
    """Mixed-derivative matrix H[i][j] = rho_{z^(i+1) zbar^(j+1)}."""
    rows = []
    for up in ("z1", "z2"):
        row = []
        for dn in ("z1~", "z2~"):
            row.append(_d(_d(rho, up), dn))
        rows.append(tuple(row))
    return tuple(rows)


def omega_g_from_potential(rho: Expr) -> tuple[CoordForm, tuple]:
    """Return (omega, H): omega = (i/2) H[i][j] dz^i ^ dzbar^j and H itself."""
    H = hessian(rho)
    half_i = const(0.5j)
    coeffs = {
        (0, 2): mul(half_i, H[0][0]),
        (0, 3): mul(half_i, H[0][1]),
        (1, 2): mul(half_i, H[1][0]),
        (1, 3): mul(half_i, H[1][1]),
    }
    return CoordForm(2, coeffs), H


def hessian_matrix_at(H, env: Mapping[str, complex]) -> np.ndarray:
    return np.array([[evaluate(H[0][0], env), evaluate(H[0][1], env)],
                     [evaluate(H[1][0], env), evaluate(H[1][1], env)]],
                    dtype=complex)


def rank_at(H, env: Mapping[str, complex], tol: float = 1e-9) -> int:
    """Rank of the Hessian at a point, by singular values."""
    m = hessian_matrix_at(H, env)
    s = np.linalg.svd(m, compute_uv=False)
    scale = max(1.0, float(s[0]) if len(s) else 1.0)
    return int(np.sum(s > tol * scale))


def nondeg_scalar_C(rho: Expr) -> Expr:
    """Obstruction scalar whose nonvanishing (at rank one) gives order two.

    C = (rho_{2 1b 1b} rho_{1 1b} - rho_{1 1b 1b} rho_{2 1b}) / rho_{1 1b}^3,
    equivalently (d/dzbar1 of rho_{2 1b}/rho_{1 1b}) / rho_{1 1b}.
    """
    h = _d(_d(rho, "z1"), "z1~")
    q = div(_d(_d(rho, "z2"), "z1~"), h)
    return div(_d(q, "z1~"), h)


# ---------------------------------------------------------------------------
# Chart repair for expression singularities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartShift:
    """Record of the coordinate change applied before coframe construction."""

    translation: tuple[complex, complex] = (0j, 0j)
    swapped: bool = False
    eps: float = 0.0

    def is_identity(self) -> bool:
        return (self.translation == (0j, 0j) and not self.swapped
                and self.eps == 0.0)


def _apply_shift(rho: Expr, shift: ChartShift) -> Expr:
    z1, z2 = coord("z1"), coord("z2")
    t1, t2 = shift.translation
    e1: Expr = add(z1, const(t1)) if t1 else z1
    e2: Expr = add(z2, const(t2)) if t2 else z2
    if shift.swapped:
        e1, e2 = e2, e1
    if shift.eps:
        e1 = add(e1, mul(const(shift.eps), e1, e2))
    return subst_coords(rho, {"z1": e1, "z2": e2})


def _singular_combination(rho: Expr) -> Expr:
    # rho_{1 2b} rho_{1 1b 1b} - rho_{1 1b 2b} rho_{1 1b}; its vanishing at the
    # working point is exactly what breaks the coframe formulas there.
    r12b = _d(_d(rho, "z1"), "z2~")
    r11b = _d(_d(rho, "z1"), "z1~")
    return sub(mul(r12b, _d(r11b, "z1~")), mul(_d(r11b, "z2~"), r11b))


def desingularize(rho: Expr, at: Mapping[str, complex] | None = None,
                  eps_sweep: Sequence[float] = (0.0, 0.1, 0.2, 0.3),
                  tol: float = 1e-9) -> tuple[Expr, ChartShift]:
    """Move ``at`` to the origin and shear until the coframe formulas apply.

    The shear (z1, z2) -> (z1 + eps z1 z2, z2) fixes the origin; all but one
    value of eps breaks the singular locus condition there.  A coordinate
    swap is inserted first when rho_{1 1b}(0) vanishes.
    """
    at = at or {}
    trans = (complex(at.get("z1", 0.0)), complex(at.get("z2", 0.0)))
    base = ChartShift(translation=trans)
    origin = {k: 0j for k in ("z1", "z2")}
    origin.update({k: v for k, v in (at or {}).items()
                   if k not in ("z1", "z2")})

    H = hessian(_apply_shift(rho, base))
    if rank_at(H, origin) != 1:
        raise RankError("chart repair expects Hessian rank one at the point")
    h00 = abs(evaluate(H[0][0], origin))
    h11 = abs(evaluate(H[1][1], origin))
    if h00 < tol * max(1.0, h11):
        base = replace(base, swapped=True)

    scale_probe = max(1.0, h00, h11)
    for eps in eps_sweep:
        cand = replace(base, eps=float(eps))
        rho2 = _apply_shift(rho, cand)
        try:
            sing = abs(evaluate(_singular_combination(rho2), origin))
            h_ok = abs(evaluate(_d(_d(rho2, "z1"), "z1~"), origin))
        except EvalError:
            continue
        if h_ok > tol * scale_probe and sing > tol * scale_probe**2:
            return rho2, cand
    raise SingularityError(
        "no eps in the sweep removed the singularity at the point")


# ---------------------------------------------------------------------------
# The adapted coframe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdaptedCoframe:
    """Coframe (theta1, theta2, psi) with its scalar ingredients.

    All members are symbolic; ``gauge_phase`` records a constant circle
    rotation applied on top of the principal-branch construction and
    ``shift`` any chart repair baked into ``rho``.
    """

    rho: Expr
    theta1: CoordForm
    theta2: CoordForm
    psi: CoordForm
    h: Expr
    q: Expr
    C: Expr
    A1: Expr
    A2: Expr
    B1: Expr
    B2: Expr
    T1: Expr
    T2: Expr
    T3: Expr
    gauge_phase: float = 0.0
    shift: ChartShift = ChartShift()


def adapted_coframe(rho: Expr, shift: ChartShift = ChartShift()
                    ) -> AdaptedCoframe:
    """Build the adapted coframe symbolically (principal square root).

    The caller is responsible for staying on a sample set where the Hessian
    has rank one and C is nonzero; evaluation elsewhere raises.
    """
    h = _d(_d(rho, "z1"), "z1~")                 # rho_{1 1b}
    r21b = _d(_d(rho, "z2"), "z1~")              # rho_{2 1b}
    q = div(r21b, h)
    s = sq(h)                                    # sqrt(rho_{1 1b})
    C = div(_d(q, "z1~"), h)
    if isinstance(C, Const) and C.value == 0:
        raise SingularityError(
            "C vanishes identically: the potential is 1- but not "
            "2-nondegenerate, so no adapted coframe exists")
    L1 = div(_d(C, "z1~"), C)                    # (ln C)_{z1b}
    A1 = div(L1, const(3))
    A2 = sub(mul(A1, q), _d(q, "z1~"))
    r111b = _d(_d(_d(rho, "z1"), "z1"), "z1~")
    r121b = _d(_d(_d(rho, "z1"), "z2"), "z1~")
    B1 = add(mul(const(-1j), bar(A1)), mul(const(-0.5j), div(r111b, h)))
    B2 = add(mul(const(-1j), q, bar(A1)), mul(const(-0.5j), div(r121b, h)))

    # the two structure functions, straight from the closed-form expressions
    r11b1b = _d(h, "z1~")
    L2 = _d(L1, "z1~")
    T1 = add(neg(div(L2, mul(const(3), h))),
             mul(div(const(2), mul(const(9), h)), L1,
                 add(L1, mul(const(1.5), div(r11b1b, h)))))
    M1 = _d(L1, "z1")
    M2 = _d(L1, "z2")
    N1 = div(_d(C, "z1"), C)
    T2 = add(
        mul(_I, div(q, mul(const(3), C, h, s)), M1),
        neg(mul(_I, div(const(1), mul(const(3), C, h, s)), M2)),
        neg(mul(_I, div(const(1), s), N1)),
        neg(mul(div(const(2j), const(3)), div(const(1), s), bar(L1))),
        neg(mul(const(2j), div(r111b, mul(h, s)))),
    )

    theta1 = one_form({0: mul(_I, s), 1: mul(_I, q, s)})
    theta2 = one_form({0: A1, 1: A2})
    psi = one_form({0: B1, 1: B2, 2: bar(B1), 3: bar(B2)})

    # T3 from frame derivatives of T1 and T2 along the circle-bundle frame:
    # T3 = (i/2) (T2_{;1b} - T1_{;2}); both terms are weight-zero, so the
    # result is an honest function of the base point.
    P = mul(_I, s)
    Q = mul(_I, q, s)
    Dd = sub(mul(P, A2), mul(Q, A1))
    u1 = div(neg(Q), Dd)
    u2 = div(P, Dd)
    tau2 = neg(add(mul(B1, u1), mul(B2, u2)))
    T1_2 = add(mul(u1, _d(T1, "z1")), mul(u2, _d(T1, "z2")),
               mul(const(-2j), tau2, T1))
    v1 = bar(div(A2, Dd))
    v2 = bar(div(neg(A1), Dd))
    tau1b = neg(add(mul(bar(B1), v1), mul(bar(B2), v2)))
    T2_1b = add(mul(v1, _d(T2, "z1~")), mul(v2, _d(T2, "z2~")),
                mul(_I, tau1b, T2))
    T3 = mul(const(0.5j), sub(T2_1b, T1_2))

    return AdaptedCoframe(rho=rho, theta1=theta1, theta2=theta2, psi=psi,
                          h=h, q=q, C=C, A1=A1, A2=A2, B1=B1, B2=B2,
                          T1=T1, T2=T2, T3=T3, shift=shift)


def structure_functions(rho: Expr) -> tuple[Expr, Expr]:
    cf = adapted_coframe(rho)
    return cf.T1, cf.T2


def gauge_rotate(cf: AdaptedCoframe, phi: float) -> AdaptedCoframe:
    """Constant circle action: theta1 -> e^{i phi} theta1, theta2 -> e^{2 i phi}.

    psi is unchanged for constant phi; T1 and T2 pick up phases e^{2 i phi}
    and e^{-i phi}, T3 none.
    """
    c1 = const(complex(np.exp(1j * phi)))
    c2 = const(complex(np.exp(2j * phi)))
    return replace(cf,
                   theta1=cf.theta1.scaled(c1),
                   theta2=cf.theta2.scaled(c2),
                   A1=mul(c2, cf.A1), A2=mul(c2, cf.A2),
                   T1=mul(c2, cf.T1),
                   T2=mul(const(complex(np.exp(-1j * phi))), cf.T2),
                   gauge_phase=cf.gauge_phase + phi)


# ---------------------------------------------------------------------------
# Circle-bundle lift: honest coframe on the 5-dimensional total space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleLift:
    """(theta1, theta2, conj pair, psi) with the extra dt absorbed into psi.

    On the 4-manifold the five forms are dependent; after the lift by the
    fiber coordinate t they are a genuine coframe, which is what the
    numeric decompositions need.
    """

    theta1: CoordForm
    theta2: CoordForm
    theta1b: CoordForm
    theta2b: CoordForm
    psi: CoordForm
    T1: Expr            # e^{-2it} T1
    T2: Expr            # e^{+it}  T2

    def frame_forms(self) -> list[CoordForm]:
        return [self.theta1, self.theta2, self.theta1b, self.theta2b, self.psi]


def circle_lift(cf: AdaptedCoframe) -> CircleLift:
    t = coord("t")
    ph1 = ex(mul(const(-1j), t))
    ph2 = ex(mul(const(-2j), t))
    th1 = cf.theta1.scaled(ph1)
    th2 = cf.theta2.scaled(ph2)
    return CircleLift(theta1=th1, theta2=th2,
                      theta1b=th1.conj(), theta2b=th2.conj(),
                      psi=cf.psi + basis_form("dt"),
                      T1=mul(ph2, cf.T1),
                      T2=mul(ex(mul(_I, t)), cf.T2))


def _with_t(env: Mapping[str, complex]) -> dict[str, complex]:
    out = dict(env)
    out.setdefault("t", 0.0)
    return out


def T3_extract(cf: AdaptedCoframe, env: Mapping[str, complex],
               lift: CircleLift | None = None) -> complex:
    """T3 at a point, read off the psi structure equation numerically."""
    lift = lift or circle_lift(cf)
    env = _with_t(env)
    target = lift.psi.ext_d() - lift.theta2.wedge(lift.theta2b).scaled(_I)
    dec = decompose(target, lift.frame_forms(), env)
    return dec[(0, 2)]


def structure_residuals(cf: AdaptedCoframe, env: Mapping[str, complex],
                        lift: CircleLift | None = None) -> dict[str, float]:
    """Max absolute coefficient of each structure-equation residual 2-form.

    Residuals are normalized by max(1, |rho_{1 1b}|) at the point; the T3
    used in the third equation is the numerically extracted one.
    """
    lift = lift or circle_lift(cf)
    env = _with_t(env)
    th1, th2, th1b, th2b, psi = lift.frame_forms()
    scale = max(1.0, abs(evaluate(cf.h, env)))

    def worst(form: CoordForm) -> float:
        vals = form.at(env)
        return max((abs(v) for v in vals.values()), default=0.0) / scale

    E1 = th1.ext_d() + psi.wedge(th1).scaled(_I) - th1b.wedge(th2)
    E2 = (th2.ext_d() + psi.wedge(th2).scaled(const(2j))
          - th1.wedge(th1b).scaled(lift.T1) - th1.wedge(th2).scaled(lift.T2))
    t2v = evaluate(lift.T2, env)
    t3v = T3_extract(cf, env, lift)
    E3 = (psi.ext_d() - th2.wedge(th2b).scaled(_I)
          - th1.wedge(th2b).scaled(const(1j * np.conj(t2v)))
          + th1b.wedge(th2).scaled(const(1j * t2v))
          - th1.wedge(th1b).scaled(const(t3v)))
    return {"E1": worst(E1), "E2": worst(E2), "E3": worst(E3)}


# ---------------------------------------------------------------------------
# Sampled classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleInvariants:
    point: dict
    rank: int
    absC: float | None = None
    T1: complex | None = None
    T2: complex | None = None
    T3: complex | None = None
    bT1: float | None = None
    bT2: float | None = None


@dataclass(frozen=True)
class InvariantReport:
    verdict: str
    samples: list[SampleInvariants]
    notes: tuple[str, ...] = ()


def _classify_from_values(ranks: list[int], absC: list[float],
                          bT1: list[float], bT2: list[float],
                          tol: float) -> str:
    if len(set(ranks)) > 1:
        return "nonConstantRank"
    r = ranks[0]
    if r == 2:
        return "pseudoKahler"
    if r == 0:
        return "holDegenerate"
    if all(c < tol for c in absC):
        return "holDegenerate"
    if max(bT1, default=0.0) < tol and max(bT2, default=0.0) < tol:
        return "flat2Nondeg"
    if max(bT2, default=0.0) < tol:
        return "twistorT2zero"
    return "general2Nondeg"


def classify(rho: Expr, dom: Domain, n: int = 64, seed: int = 0,
             tol: float = 1e-8) -> InvariantReport:
    """Sampled verdict: one of VERDICTS, plus the per-point invariant table."""
    H = hessian(rho)
    envs = dom.sample(n, seed)
    ranks = [rank_at(H, env) for env in envs]
    samples = [SampleInvariants(point=dict(env), rank=r)
               for env, r in zip(envs, ranks)]
    if len(set(ranks)) > 1 or ranks[0] != 1:
        verdict = _classify_from_values(ranks, [], [], [], tol)
        return InvariantReport(verdict=verdict, samples=samples)

    C = nondeg_scalar_C(rho)
    absC: list[float] = []
    bad = 0
    for env in envs:
        try:
            absC.append(abs(evaluate(C, env)))
        except (EvalError, ZeroDivisionError, OverflowError):
            bad += 1
            absC.append(float("nan"))
    if bad > n // 5:
        raise SingularityError(
            "C could not be evaluated on a fifth of the samples; "
            "desingularize first")
    clean = [c for c in absC if not np.isnan(c)]
    if all(c < tol for c in clean):
        samples = [replace(s, absC=c) for s, c in zip(samples, absC)]
        return InvariantReport(verdict="holDegenerate", samples=samples)

    cf = adapted_coframe(rho)
    out: list[SampleInvariants] = []
    bT1s: list[float] = []
    bT2s: list[float] = []
    notes: list[str] = []
    for env, r, c in zip(envs, ranks, absC):
        if np.isnan(c) or c < tol:
            out.append(SampleInvariants(point=dict(env), rank=r, absC=c))
            continue
        t1 = evaluate(cf.T1, env)
        t2 = evaluate(cf.T2, env)
        t3 = evaluate(cf.T3, env)
        b1, b2 = abs(t1) ** 2, abs(t2) ** 2
        bT1s.append(b1)
        bT2s.append(b2)
        if abs(t3.real) > tol:
            notes.append(f"T3 developed a real part {t3.real:.3e} at {env}")
        out.append(SampleInvariants(point=dict(env), rank=r, absC=c,
                                    T1=t1, T2=t2, T3=t3, bT1=b1, bT2=b2))
    verdict = _classify_from_values(ranks, clean, bT1s, bT2s, tol)
    return InvariantReport(verdict=verdict, samples=out, notes=tuple(notes))
