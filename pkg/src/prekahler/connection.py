"""Symplectic connections on a real surface chart.

Two entry points share the invariant layer:

* `SymplecticConnection` wraps Christoffel symbols given as expressions in
  the chart (z1, z2) reused as real coordinates; curvature and the covariant
  Ricci derivative tables are built symbolically.
* `from_prekahler` extracts the curvature data of the connection underlying
  a rank-1 potential whose T2 vanishes, pointwise at requested samples.

Invariants attached to either: the binary quadratic/cubic/quartic built
from the curvature scalars, the scalar K (two formulations), and the
special / critical tests.
"""
from __future__ import annotations

import json
import re
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coframe import AdaptedCoframe, GeometryError, RankError, hessian, rank_at
from .dsl import (Expr, add, bar, const, coord, div, evaluate, evaluate_many,
                  ex, mul, neg, parse, sq, sub, subst_coords, DslError, EvalError)
from .wirtinger import Diff

_I = const(1j)
_COORD_NAMES = ("z1", "z2")


class ConnectionError_(GeometryError):
    """Raised when connection input violates the structural requirements."""


@contextmanager
def _deep_recursion(limit: int = 100000):
    old = sys.getrecursionlimit()
    if old < limit:
        sys.setrecursionlimit(limit)
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


# ---------------------------------------------------------------------------
# Binary forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinaryForm:
    """Homogeneous form in the frame covectors, monomial coefficients.

    ``coeffs[m]`` multiplies (w2)^(d-m) (w1)^m, so the printed coefficient
    conventions (cross terms carry their multiplicity) are kept as is.
    """
    degree: int
    coeffs: tuple[Expr, ...]

    def __post_init__(self):
        if self.degree not in (2, 3, 4):
            raise ValueError("degree must be 2, 3 or 4")
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("need degree+1 coefficients")

    def values(self, env: Mapping[str, complex]) -> np.ndarray:
        with _deep_recursion():
            return np.array(evaluate_many(list(self.coeffs), env))

    def pairing(self, v: Sequence[float], env: Mapping[str, complex]) -> complex:
        """Evaluate on a single tangent vector repeated degree times."""
        c = self.values(env)
        d = self.degree
        return sum(c[m] * v[1] ** (d - m) * v[0] ** m for m in range(d + 1))

    def multilinear(self, vs: Sequence[Sequence[float]],
                    env: Mapping[str, complex]) -> complex:
        """Full symmetric multilinear evaluation (one vector per slot)."""
        if len(vs) != self.degree:
            raise ValueError("one vector per slot")
        c = self.values(env)
        total = 0j
        for assign in np.ndindex(*(2,) * self.degree):
            m = sum(1 for a in assign if a == 0)   # count of w1 slots
            w = c[m] / comb(self.degree, m)
            for vec, a in zip(vs, assign):
                w *= vec[0] if a == 0 else vec[1]
            total += w
        return total


# ---------------------------------------------------------------------------
# Symbolic connections from Christoffel data
# ---------------------------------------------------------------------------

class SymplecticConnection:
    """Torsion-free connection preserving sigma = w1 ^ w2 on the chart.

    ``gamma[(i, j, k)]`` are 1-based Christoffel expressions, symmetric in
    (j, k) and trace-free in the symplectic sense (gamma^1_{1k} + gamma^2_{2k}
    = 0).  Derivative tables are built lazily and cached.
    """

    def __init__(self, gamma: Mapping[tuple[int, int, int], Expr],
                 check: bool = True):
        self.gamma = {key: gamma[key] for key in
                      ((i, j, k) for i in (1, 2) for j in (1, 2) for k in (1, 2))}
        self._eng = Diff()
        self._tables: dict[str, dict] = {}
        if check:
            self._structural_check()

    @classmethod
    def from_nested(cls, rows: Sequence[Sequence[Sequence[Expr]]],
                    check: bool = True) -> "SymplecticConnection":
        gamma = {(i, j, k): rows[i - 1][j - 1][k - 1]
                 for i in (1, 2) for j in (1, 2) for k in (1, 2)}
        return cls(gamma, check=check)

    # -- structural invariants ------------------------------------------------

    def _structural_check(self, tol: float = 1e-9) -> None:
        probes = [{"z1": 0.17 + 0j, "z2": -0.29 + 0j},
                  {"z1": -0.61 + 0j, "z2": 0.43 + 0j}]
        for env in probes:
            try:
                for i in (1, 2):
                    for j in (1, 2):
                        for k in (1, 2):
                            dsym = abs(evaluate(self.gamma[(i, j, k)], env)
                                       - evaluate(self.gamma[(i, k, j)], env))
                            if dsym > tol:
                                raise ConnectionError_(
                                    f"gamma^{i}_{{{j}{k}}} not symmetric in the "
                                    f"lower pair (deviation {dsym:.2e})")
                for k in (1, 2):
                    tr = abs(evaluate(add(self.gamma[(1, 1, k)],
                                          self.gamma[(2, 2, k)]), env))
                    if tr > tol:
                        raise ConnectionError_(
                            f"gamma does not preserve the area form "
                            f"(trace {tr:.2e} in slot {k})")
            except EvalError:
                continue

    # -- derivative machinery -------------------------------------------------

    def _dx(self, e: Expr, k: int) -> Expr:
        name = _COORD_NAMES[k - 1]
        return add(self._eng.d(e, name), self._eng.d(e, name + "~"))

    def _table(self, name: str) -> dict:
        hit = self._tables.get(name)
        if hit is not None:
            return hit
        with _deep_recursion():
            out = getattr(self, "_build_" + name)()
        self._tables[name] = out
        return out

    def _build_rmat(self) -> dict:
        out = {}
        for i in (1, 2):
            for j in (1, 2):
                quad = []
                for m in (1, 2):
                    quad.append(mul(self.gamma[(i, 1, m)], self.gamma[(m, 2, j)]))
                    quad.append(neg(mul(self.gamma[(i, 2, m)],
                                        self.gamma[(m, 1, j)])))
                out[(i, j)] = add(self._dx(self.gamma[(i, 2, j)], 1),
                                  neg(self._dx(self.gamma[(i, 1, j)], 2)), *quad)
        return out

    def _build_ric(self) -> dict:
        # trace over the first curvature slot, written out with the full
        # R^i_{jkl} index formula so the table is an independent object
        def R4(i, j, k, l):
            quad = []
            for m in (1, 2):
                quad.append(mul(self.gamma[(i, k, m)], self.gamma[(m, l, j)]))
                quad.append(neg(mul(self.gamma[(i, l, m)], self.gamma[(m, k, j)])))
            return add(self._dx(self.gamma[(i, l, j)], k),
                       neg(self._dx(self.gamma[(i, k, j)], l)), *quad)
        return {(i, j): add(R4(1, i, 1, j), R4(2, i, 2, j))
                for i in (1, 2) for j in (1, 2)}

    def _build_dr(self) -> dict:
        rmat = self._table("rmat")
        out = {}
        for i in (1, 2):
            for j in (1, 2):
                for k in (1, 2):
                    corr = [mul(self.gamma[(i, k, m)], rmat[(m, j)])
                            for m in (1, 2)]
                    corr += [neg(mul(self.gamma[(m, k, j)], rmat[(i, m)]))
                             for m in (1, 2)]
                    out[(i, j, k)] = add(self._dx(rmat[(i, j)], k), *corr)
        return out

    def _build_dric(self) -> dict:
        ric = self._table("ric")
        out = {}
        for i in (1, 2):
            for j in (1, 2):
                for k in (1, 2):
                    corr = [neg(mul(self.gamma[(m, k, i)], ric[(m, j)]))
                            for m in (1, 2)]
                    corr += [neg(mul(self.gamma[(m, k, j)], ric[(i, m)]))
                             for m in (1, 2)]
                    out[(i, j, k)] = add(self._dx(ric[(i, j)], k), *corr)
        return out

    def _build_ddr(self) -> dict:
        dr = self._table("dr")
        out = {}
        for (i, j) in ((1, 1), (1, 2), (2, 1)):
            for k in (1, 2):
                for l in (1, 2):
                    corr = [mul(self.gamma[(i, l, m)], dr[(m, j, k)])
                            for m in (1, 2)]
                    corr += [neg(mul(self.gamma[(m, l, j)], dr[(i, m, k)]))
                             for m in (1, 2)]
                    corr += [neg(mul(self.gamma[(m, l, k)], dr[(i, j, m)]))
                             for m in (1, 2)]
                    out[(i, j, k, l)] = add(self._dx(dr[(i, j, k)], l), *corr)
        return out

    def _build_ddric(self) -> dict:
        dric = self._table("dric")
        out = {}
        for i in (1, 2):
            for j in (1, 2):
                for k in (1, 2):
                    for l in (1, 2):
                        corr = [neg(mul(self.gamma[(m, l, i)], dric[(m, j, k)]))
                                for m in (1, 2)]
                        corr += [neg(mul(self.gamma[(m, l, j)], dric[(i, m, k)]))
                                 for m in (1, 2)]
                        corr += [neg(mul(self.gamma[(m, l, k)], dric[(i, j, m)]))
                                 for m in (1, 2)]
                        out[(i, j, k, l)] = add(self._dx(dric[(i, j, k)], l),
                                                *corr)
        return out

    # -- public surface ---------------------------------------------------------

    def curvature(self) -> tuple[Expr, Expr, Expr]:
        rmat = self._table("rmat")
        return rmat[(1, 1)], rmat[(1, 2)], rmat[(2, 1)]

    def ricci(self) -> dict[tuple[int, int], Expr]:
        return dict(self._table("ric"))

    def ricci_derivative(self) -> dict[tuple[int, int, int], Expr]:
        return dict(self._table("dric"))

    def ricci_second_derivative(self) -> dict[tuple[int, int, int, int], Expr]:
        return dict(self._table("ddric"))

    def invariant_forms(self) -> tuple[BinaryForm, BinaryForm, BinaryForm]:
        """The quadratic, cubic and quartic built from curvature scalars."""
        rmat = self._table("rmat")
        dr = self._table("dr")
        ddr = self._table("ddr")
        quad = BinaryForm(2, (rmat[(1, 2)],
                              mul(const(2), rmat[(1, 1)]),
                              neg(rmat[(2, 1)])))
        cub = BinaryForm(3, (dr[(1, 2, 2)],
                             add(dr[(1, 2, 1)], mul(const(2), dr[(1, 1, 2)])),
                             sub(mul(const(2), dr[(1, 1, 1)]), dr[(2, 1, 2)]),
                             neg(dr[(2, 1, 1)])))
        quart = BinaryForm(4, (
            ddr[(1, 2, 2, 2)],
            add(mul(const(2), ddr[(1, 2, 2, 1)]),
                mul(const(2), ddr[(1, 1, 2, 2)])),
            add(mul(const(4), ddr[(1, 1, 2, 1)]), neg(ddr[(2, 1, 2, 2)]),
                ddr[(1, 2, 1, 1)]),
            sub(mul(const(2), ddr[(1, 1, 1, 1)]),
                mul(const(2), ddr[(2, 1, 2, 1)])),
            neg(ddr[(2, 1, 1, 1)])))
        return quad, cub, quart

    def ricci_symmetrized_forms(self) -> tuple[BinaryForm, BinaryForm, BinaryForm]:
        """Same three invariants, built by symmetrizing the Ricci tables.

        Kept separate from `invariant_forms` so the two constructions can be
        compared as a consistency check.
        """
        ric = self._table("ric")
        dric = self._table("dric")
        dd = self._table("ddric")
        quad = BinaryForm(2, (ric[(2, 2)],
                              add(ric[(1, 2)], ric[(2, 1)]),
                              ric[(1, 1)]))
        cub = BinaryForm(3, (
            dric[(2, 2, 2)],
            add(dric[(2, 2, 1)], dric[(1, 2, 2)], dric[(2, 1, 2)]),
            add(dric[(1, 1, 2)], dric[(1, 2, 1)], dric[(2, 1, 1)]),
            dric[(1, 1, 1)]))
        quart = BinaryForm(4, (
            dd[(2, 2, 2, 2)],
            add(dd[(2, 2, 2, 1)], dd[(2, 2, 1, 2)], dd[(1, 2, 2, 2)],
                dd[(2, 1, 2, 2)]),
            add(dd[(2, 2, 1, 1)], dd[(1, 1, 2, 2)], dd[(1, 2, 2, 1)],
                dd[(1, 2, 1, 2)], dd[(2, 1, 2, 1)], dd[(2, 1, 1, 2)]),
            add(dd[(1, 1, 1, 2)], dd[(1, 1, 2, 1)], dd[(1, 2, 1, 1)],
                dd[(2, 1, 1, 1)]),
            dd[(1, 1, 1, 1)]))
        return quad, cub, quart

    def K_nabla(self) -> Expr:
        """Double symplectic trace of the second covariant Ricci derivative."""
        dd = self._table("ddric")
        return add(dd[(1, 1, 2, 2)], neg(dd[(1, 2, 1, 2)]),
                   neg(dd[(2, 1, 2, 1)]), dd[(2, 2, 1, 1)])

    def K_nabla_coframe(self) -> Expr:
        """The same scalar assembled from curvature-scalar frame derivatives."""
        ddr = self._table("ddr")
        return add(ddr[(1, 2, 1, 1)], mul(const(-2), ddr[(1, 1, 2, 1)]),
                   neg(ddr[(2, 1, 2, 2)]))

    def invariant_values(self, env: Mapping[str, complex]) -> "InvariantSample":
        rmat = self._table("rmat")
        dr = self._table("dr")
        ddr = self._table("ddr")
        names = [("R", i, j) for (i, j) in rmat] \
            + [("dR",) + k for k in dr] + [("ddR",) + k for k in ddr]
        exprs = list(rmat.values()) + list(dr.values()) + list(ddr.values())
        with _deep_recursion():
            vals = dict(zip(names, evaluate_many(exprs, env)))
        return _assemble_sample(env, lambda *k: vals[k])


def sample_points(n: int, seed: int = 0,
                  lo: float = -0.8, hi: float = 0.8) -> list[dict[str, complex]]:
    """Real sample points in the chart square, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    return [{"z1": complex(rng.uniform(lo, hi)), "z2": complex(rng.uniform(lo, hi))}
            for _ in range(n)]


# ---------------------------------------------------------------------------
# Shared pointwise invariant record
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvariantSample:
    """Numeric curvature invariants of a connection at one point."""
    env: dict
    R11: complex
    R12: complex
    R21: complex
    quadratic: np.ndarray   # monomial coefficients, (w2)^2 first
    cubic: np.ndarray
    quartic: np.ndarray
    K: complex
    K_alt: complex          # covariant-trace formulation
    ric_dot_ric: complex
    c: complex              # K + (3/2) Ric.Ric


def _assemble_sample(env, g) -> InvariantSample:
    R11, R12, R21 = g("R", 1, 1), g("R", 1, 2), g("R", 2, 1)
    quad = np.array([R12, 2 * R11, -R21])
    cub = np.array([
        g("dR", 1, 2, 2),
        g("dR", 1, 2, 1) + 2 * g("dR", 1, 1, 2),
        2 * g("dR", 1, 1, 1) - g("dR", 2, 1, 2),
        -g("dR", 2, 1, 1)])
    quart = np.array([
        g("ddR", 1, 2, 2, 2),
        2 * g("ddR", 1, 2, 2, 1) + 2 * g("ddR", 1, 1, 2, 2),
        4 * g("ddR", 1, 1, 2, 1) - g("ddR", 2, 1, 2, 2) + g("ddR", 1, 2, 1, 1),
        2 * g("ddR", 1, 1, 1, 1) - 2 * g("ddR", 2, 1, 2, 1),
        -g("ddR", 2, 1, 1, 1)])
    K = g("ddR", 1, 2, 1, 1) - 2 * g("ddR", 1, 1, 2, 1) - g("ddR", 2, 1, 2, 2)
    K_alt = (g("ddR", 1, 2, 1, 1) - g("ddR", 1, 1, 2, 1)
             - g("ddR", 1, 1, 1, 2) - g("ddR", 2, 1, 2, 2))
    disc = R11 ** 2 + R12 * R21
    rr = -2 * disc
    return InvariantSample(env=dict(env), R11=R11, R12=R12, R21=R21,
                           quadratic=quad, cubic=cub, quartic=quart,
                           K=K, K_alt=K_alt, ric_dot_ric=rr, c=K + 1.5 * rr)


def _collect_samples(conn, envs) -> list[InvariantSample]:
    if isinstance(conn, PotentialConnection):
        out = list(conn.samples)
    else:
        out = [conn.invariant_values(env) for env in envs]
    if not out:
        raise ValueError("no sample points")
    return out


def special_check(conn, envs: Iterable[Mapping[str, complex]] = (),
                  tol: float = 1e-8) -> bool:
    """True when every cubic coefficient vanishes at the sample points."""
    for s in _collect_samples(conn, envs):
        if np.max(np.abs(s.cubic)) > tol:
            return False
    return True


def critical_check(conn, envs: Iterable[Mapping[str, complex]] = (),
                   tol: float = 1e-8) -> tuple[bool, float]:
    """Constancy test for c = K + (3/2) Ric.Ric across the samples."""
    cs = [s.c.real for s in _collect_samples(conn, envs)]
    var = float(np.var(cs))
    return var < tol, float(np.mean(cs))


def Q_relation_check(conn, a: float,
                     envs: Iterable[Mapping[str, complex]] = ()) -> float:
    """Residual of the quartic against the squared quadratic for the
    two-parameter homogeneous family; `a` outside {-1, 0, 1, 2}."""
    if a in (-1.0, 0.0, 1.0, 2.0):
        raise ValueError("family parameter degenerate for this relation")
    factor = 6 * (2 * a - 1) ** 2 / ((a + 1) * (a - 2))
    worst = 0.0
    for s in _collect_samples(conn, envs):
        A, B, C = s.quadratic
        rsq = np.array([A * A, 2 * A * B, 2 * A * C + B * B, 2 * B * C, C * C])
        worst = max(worst, float(np.max(np.abs(s.quartic - factor * rsq))))
    return worst


# ---------------------------------------------------------------------------
# Extraction from potential data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialSample:
    """One extraction point: frame covectors plus invariants and round trip."""
    invariants: InvariantSample
    frame: dict[str, np.ndarray]
    T1_back: complex
    T3_back: complex
    T1_direct: complex
    T3_direct: complex


class PotentialConnection:
    """Pointwise connection data extracted from a T2 = 0 adapted coframe."""

    def __init__(self, cf: AdaptedCoframe, points: list[PotentialSample]):
        self.cf = cf
        self.points = points

    @property
    def samples(self) -> list[InvariantSample]:
        return [p.invariants for p in self.points]


def _extraction_tower(cf: AdaptedCoframe, eng: Diff) -> dict[str, Expr]:
    """Curvature scalars and frame-derivative tables over (z1, z2, t).

    The fiber coordinate enters through the frame phases; all entries are
    read at t = 0.  T2 = 0 is assumed: the structure scalar T3 is rebuilt
    here from the T1 half of its defining combination, which keeps the
    trees small (the T2 half differentiates an identically vanishing
    function and is dropped).
    """
    tco = coord("t")
    s = sq(cf.h)
    P = mul(_I, s)
    Q = mul(_I, cf.q, s)
    Dd = sub(mul(P, cf.A2), mul(Q, cf.A1))
    # T3 from the T1 half (valid under the T2 = 0 precondition)
    u1_0 = div(neg(Q), Dd)
    u2_0 = div(P, Dd)
    tau2_0 = neg(add(mul(cf.B1, u1_0), mul(cf.B2, u2_0)))
    T1_2 = add(mul(u1_0, eng.d(cf.T1, "z1")), mul(u2_0, eng.d(cf.T1, "z2")),
               mul(const(-2j), tau2_0, cf.T1))
    T3 = mul(const(-0.5j), T1_2)

    e_it = ex(mul(_I, tco))
    u1 = mul(e_it, div(cf.A2, Dd))
    u2 = mul(e_it, neg(div(cf.A1, Dd)))
    tau = neg(add(mul(cf.B1, u1), mul(cf.B2, u2)))
    u1b, u2b = bar(u1), bar(u2)
    tsum = add(tau, bar(tau))
    tdif = mul(_I, sub(tau, bar(tau)))

    def D1(f):
        return add(mul(u1, eng.d(f, "z1")), mul(u2, eng.d(f, "z2")),
                   mul(u1b, eng.d(f, "z1~")), mul(u2b, eng.d(f, "z2~")),
                   mul(tsum, eng.d(f, "t")))

    def D2(f):
        return add(mul(_I, u1, eng.d(f, "z1")), mul(_I, u2, eng.d(f, "z2")),
                   mul(const(-1j), u1b, eng.d(f, "z1~")),
                   mul(const(-1j), u2b, eng.d(f, "z2~")),
                   mul(tdif, eng.d(f, "t")))

    T1h = mul(ex(mul(const(-2j), tco)), cf.T1)
    T1hb = bar(T1h)
    out: dict[str, Expr] = {
        "T3": T3,
        "R11": mul(const(-1j), sub(T1h, T1hb)),
        "R12": add(neg(T1h), neg(T1hb), mul(const(2j), T3)),
        "R21": add(neg(T1h), neg(T1hb), mul(const(-2j), T3)),
    }
    for key in ("R11", "R12", "R21"):
        out[key + ";1"] = D1(out[key])
        out[key + ";2"] = D2(out[key])
    for key in ("R11", "R12", "R21"):
        for k in ("1", "2"):
            out[key + ";" + k + "1"] = D1(out[key + ";" + k])
            out[key + ";" + k + "2"] = D2(out[key + ";" + k])
    return out


def from_prekahler(cf: AdaptedCoframe,
                   envs: Sequence[Mapping[str, complex]],
                   tol: float = 1e-8) -> PotentialConnection:
    """Extract the underlying connection's curvature data at sample points.

    Requires the potential Hessian to have rank 1 at the samples and the
    structure scalar T2 to vanish there; raises otherwise, since no single
    connection underlies the data in either case.
    """
    if not envs:
        raise ValueError("no sample points")
    envs = [dict(e) for e in envs]
    H = hessian(cf.rho)
    for env in envs:
        r = rank_at(H, env)
        if r != 1:
            raise RankError(
                f"potential Hessian has rank {r} at {_fmt_point(env)}; "
                "a rank-1 degenerate metric is required")
    with _deep_recursion():
        try:
            t2vals = [abs(evaluate(cf.T2, {**env, "t": 0.0})) ** 2
                      for env in envs]
        except EvalError as exc:
            raise GeometryError(
                f"structure data undefined on the samples ({exc}); the "
                "potential is not 2-nondegenerate there") from None
    worst_t2 = max(t2vals)
    if worst_t2 > tol:
        raise GeometryError(
            f"T2 does not vanish on the samples (worst |T2|^2 = {worst_t2:.3e}); "
            "no underlying connection")

    eng = Diff()
    with _deep_recursion():
        tower = _extraction_tower(cf, eng)
    keys = list(tower)
    points: list[PotentialSample] = []
    with _deep_recursion():
        for env in envs:
            full = {**env, "t": 0.0}
            vals = dict(zip(keys, evaluate_many([tower[k] for k in keys], full)))
            extra = evaluate_many([cf.T1, cf.T3], full)
            inv = _assemble_sample(env, _tower_getter(vals))
            T1_back = -0.25 * (inv.R12 + inv.R21 - 2j * inv.R11)
            T3_back = -0.25j * (inv.R12 - inv.R21)
            frame = _leaf_frame(cf, full)
            points.append(PotentialSample(
                invariants=inv, frame=frame,
                T1_back=T1_back, T3_back=T3_back,
                T1_direct=extra[0], T3_direct=extra[1]))
    return PotentialConnection(cf, points)


def _tower_getter(vals: Mapping[str, complex]):
    def getter(*key):
        kind, i, j = key[0], key[1], key[2]
        name = f"R{i}{j}"
        if kind == "dR":
            name += f";{key[3]}"
        elif kind == "ddR":
            name += f";{key[3]}{key[4]}"
        return vals[name]
    return getter


def _leaf_frame(cf: AdaptedCoframe, env: Mapping[str, complex]) -> dict[str, np.ndarray]:
    th1 = cf.theta1.covector(env)
    th2 = cf.theta2.covector(env)
    psi = cf.psi.covector(env)
    return {
        "w1": th1.real,
        "w2": th1.imag,
        "w11": th2.real,
        "w21": th2.imag + psi.real,
        "w12": th2.imag - psi.real,
    }


def _fmt_point(env: Mapping[str, complex]) -> str:
    return ", ".join(f"{k}={complex(v):.4g}" for k, v in sorted(env.items())
                     if k in _COORD_NAMES)


# ---------------------------------------------------------------------------
# Loading and transforming Christoffel data
# ---------------------------------------------------------------------------

def connection_from_json(text: str | Mapping) -> SymplecticConnection:
    """Build a connection from a JSON document.

    Expected keys: ``coords`` (two names; they are mapped onto the engine
    chart), ``gamma`` (2x2x2 nested lists of expression strings), and
    optionally ``sigma`` which must be the standard area form "w1^w2".
    """
    doc = json.loads(text) if isinstance(text, str) else dict(text)
    try:
        coords = list(doc["coords"])
        rows = doc["gamma"]
    except KeyError as exc:
        raise ConnectionError_(f"missing key {exc.args[0]!r}") from None
    if len(coords) != 2:
        raise ConnectionError_("exactly two coordinates required")
    sigma = doc.get("sigma")
    if sigma is not None and "".join(str(sigma).split()) not in (
            "w1^w2", "omega1^omega2", "dz1^dz2"):
        raise ConnectionError_("only the standard area form is supported")
    reserved = {"i", "re", "im", "conj", "abs2", "exp", "ln", "sqrt"}
    renames = []
    for name, target in zip(coords, _COORD_NAMES):
        if not str(name).isidentifier() or name in reserved:
            raise ConnectionError_(f"coordinate name {name!r} not usable")
        if name != target:
            renames.append((re.compile(rf"\b{re.escape(name)}\b"), target))
    gamma = {}
    for i in (1, 2):
        for j in (1, 2):
            for k in (1, 2):
                try:
                    raw = str(rows[i - 1][j - 1][k - 1])
                except (IndexError, TypeError):
                    raise ConnectionError_("gamma must be a 2x2x2 nest") from None
                for pattern, target in renames:
                    raw = pattern.sub(target, raw)
                try:
                    gamma[(i, j, k)] = parse(raw)
                except DslError as exc:
                    raise ConnectionError_(
                        f"gamma[{i}][{j}][{k}]: {exc}") from None
    return SymplecticConnection(gamma)


def unimodular_change(conn: SymplecticConnection,
                      g: np.ndarray) -> SymplecticConnection:
    """Pull the connection back along the constant chart change x -> g x.

    `g` must have unit determinant so the area form is preserved.
    """
    g = np.asarray(g, dtype=float)
    if abs(np.linalg.det(g) - 1) > 1e-12:
        raise ConnectionError_("change of frame must have determinant 1")
    ginv = np.linalg.inv(g)
    z1c, z2c = coord("z1"), coord("z2")
    substitution = {
        "z1": add(mul(const(g[0, 0]), z1c), mul(const(g[0, 1]), z2c)),
        "z2": add(mul(const(g[1, 0]), z1c), mul(const(g[1, 1]), z2c)),
    }
    moved = {key: subst_coords(e, substitution) for key, e in conn.gamma.items()}
    gamma = {}
    for i in (1, 2):
        for j in (1, 2):
            for k in (1, 2):
                total = []
                for aa in (1, 2):
                    for b in (1, 2):
                        for c in (1, 2):
                            coef = (ginv[i - 1, aa - 1] * g[b - 1, j - 1]
                                    * g[c - 1, k - 1])
                            if coef == 0:
                                continue
                            total.append(mul(const(coef), moved[(aa, b, c)]))
                gamma[(i, j, k)] = add(*total)
    return SymplecticConnection(gamma)
