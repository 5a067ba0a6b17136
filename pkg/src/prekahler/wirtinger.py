"""Symbolic Wirtinger calculus: derivatives, jets, finite-difference oracles.

``z`` and ``z-bar`` are independent symbols here: on a normalized tree a
coordinate leaf either is or is not conjugated, and the two derivative
operators act accordingly.  The chain rule for ``Pow`` uses the real-constant
exponent contract of the DSL (d (u^r) = r u^(r-1) du), which together with the
principal branch keeps half-integer powers consistent with the single-root
construction used by the coframe formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .dsl import (
    Add, Const, Coord, Div, Exp, Expr, Ln, Mul, Param, Pow, Sqrt,
    add, div, evaluate, mul, pw, sub, ZERO, ONE,
)

__all__ = [
    "Diff", "d_z", "d_zbar", "d_real", "deriv_multi",
    "Jet", "jet", "fd_wirtinger", "fd_real",
]


class Diff:
    """Derivative engine with a cross-call cache.

    Directions are written ``"z1"`` / ``"z1~"`` (holomorphic / conjugate) and
    ``"v"`` / ``"t"`` for the real auxiliaries.
    """

    def __init__(self) -> None:
        self._cache: dict[tuple[int, str], tuple[Expr, Expr]] = {}

    def d(self, e: Expr, direction: str) -> Expr:
        key = (id(e), direction)
        hit = self._cache.get(key)
        if hit is not None:
            return hit[1]
        out = self._compute(e, direction)
        self._cache[key] = (e, out)
        return out

    def _compute(self, e: Expr, dr: str) -> Expr:
        if isinstance(e, (Const, Param)):
            return ZERO
        if isinstance(e, Coord):
            if dr.endswith("~"):
                hit = e.conjugated and e.name == dr[:-1]
            else:
                hit = (not e.conjugated) and e.name == dr
            return ONE if hit else ZERO
        if isinstance(e, Add):
            return add(*(self.d(ch, dr) for ch in e.children))
        if isinstance(e, Mul):
            terms = []
            for k, ch in enumerate(e.children):
                dk = self.d(ch, dr)
                if dk is ZERO or (isinstance(dk, Const) and dk.value == 0):
                    continue
                rest = e.children[:k] + e.children[k + 1:]
                terms.append(mul(dk, *rest))
            return add(*terms) if terms else ZERO
        if isinstance(e, Div):
            du = self.d(e.num, dr)
            dv = self.d(e.den, dr)
            if isinstance(dv, Const) and dv.value == 0:
                return div(du, e.den)
            return div(sub(mul(du, e.den), mul(e.num, dv)), mul(e.den, e.den))
        if isinstance(e, Pow):
            du = self.d(e.base, dr)
            if isinstance(du, Const) and du.value == 0:
                return ZERO
            r = e.exponent
            return mul(r, pw(e.base, sub(r, ONE)), du)
        if isinstance(e, Exp):
            du = self.d(e.arg, dr)
            if isinstance(du, Const) and du.value == 0:
                return ZERO
            return mul(e, du)
        if isinstance(e, Ln):
            return div(self.d(e.arg, dr), e.arg)
        if isinstance(e, Sqrt):
            du = self.d(e.arg, dr)
            if isinstance(du, Const) and du.value == 0:
                return ZERO
            return div(du, mul(Const(2), e))
        raise TypeError(f"cannot differentiate {type(e).__name__} "
                        "(normalize first: Conj nodes are not differentiable)")


_SHARED = Diff()


def d_z(e: Expr, name: str = "z1", engine: Diff | None = None) -> Expr:
    return (engine or _SHARED).d(e, name)


def d_zbar(e: Expr, name: str = "z1", engine: Diff | None = None) -> Expr:
    return (engine or _SHARED).d(e, name + "~")


def d_real(e: Expr, name: str, engine: Diff | None = None) -> Expr:
    return (engine or _SHARED).d(e, name)


def deriv_multi(e: Expr, alpha: tuple[int, int], beta: tuple[int, int],
                engine: Diff | None = None) -> Expr:
    """Apply d_z1^a1 d_z2^a2 d_z1bar^b1 d_z2bar^b2."""
    eng = engine or _SHARED
    out = e
    for _ in range(alpha[0]):
        out = eng.d(out, "z1")
    for _ in range(alpha[1]):
        out = eng.d(out, "z2")
    for _ in range(beta[0]):
        out = eng.d(out, "z1~")
    for _ in range(beta[1]):
        out = eng.d(out, "z2~")
    return out


@dataclass(frozen=True)
class Jet:
    """Evaluated mixed derivatives of a real expression at a point.

    ``entries[(a1, a2, b1, b2)]`` holds d_z1^a1 d_z2^a2 d_z1bar^b1 d_z2bar^b2
    of the expression.  For a real expression, swapping the holomorphic and
    antiholomorphic blocks conjugates the value.
    """

    point: Mapping[str, complex]
    order: int
    entries: Mapping[tuple[int, int, int, int], complex]

    def __call__(self, a1: int, a2: int, b1: int, b2: int) -> complex:
        return self.entries[(a1, a2, b1, b2)]


def jet(e: Expr, env: Mapping[str, complex], order: int,
        engine: Diff | None = None) -> Jet:
    eng = engine or Diff()
    exprs: dict[tuple[int, int, int, int], Expr] = {(0, 0, 0, 0): e}
    steps = (("z1", (1, 0, 0, 0)), ("z2", (0, 1, 0, 0)),
             ("z1~", (0, 0, 1, 0)), ("z2~", (0, 0, 0, 1)))
    frontier = [(0, 0, 0, 0)]
    for _ in range(order):
        nxt = []
        for key in frontier:
            base = exprs[key]
            for dr, inc in steps:
                nk = tuple(k + d for k, d in zip(key, inc))
                if nk not in exprs:
                    exprs[nk] = eng.d(base, dr)
                    nxt.append(nk)
        frontier = nxt
    vals = {k: evaluate(v, env) for k, v in exprs.items()}
    return Jet(point=dict(env), order=order, entries=vals)


# ---------------------------------------------------------------------------
# Finite-difference oracles
# ---------------------------------------------------------------------------

def _shifted(env: Mapping[str, complex], name: str, delta: complex
             ) -> dict[str, complex]:
    out = dict(env)
    out[name] = out[name] + delta
    return out


def fd_wirtinger(e: Expr, env: Mapping[str, complex], name: str,
                 conjugate: bool = False, h: float = 1e-5) -> complex:
    """Central finite-difference d/dz (or d/dz-bar) of the evaluated expression."""
    fx = (evaluate(e, _shifted(env, name, h))
          - evaluate(e, _shifted(env, name, -h))) / (2 * h)
    fy = (evaluate(e, _shifted(env, name, 1j * h))
          - evaluate(e, _shifted(env, name, -1j * h))) / (2 * h)
    if conjugate:
        return (fx + 1j * fy) / 2
    return (fx - 1j * fy) / 2


def fd_real(e: Expr, env: Mapping[str, complex], name: str,
            h: float = 1e-5) -> complex:
    return (evaluate(e, _shifted(env, name, h))
            - evaluate(e, _shifted(env, name, -h))) / (2 * h)
