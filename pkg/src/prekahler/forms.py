"""Exterior algebra over the coordinate chart, with numeric frame decomposition.

Forms live on the chart with cotangent basis

    dz1, dz2, dz1~, dz2~, dv, dt        (indices 0..5)

where ``~`` marks conjugates and v, t are the real auxiliaries.  Coefficients
are DSL expressions; evaluation produces plain complex arrays.  ``decompose``
rewrites a form in a supplied coframe at a point by least squares and reports
the conditioning, so callers can detect a degenerating coframe and switch
charts.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dsl import Const, Expr, ZERO, add, bar, evaluate, mul, neg
from .wirtinger import Diff

__all__ = ["BASIS", "CoordForm", "FrameDecomposition", "basis_form",
           "decompose", "DecomposeError", "wedge"]

BASIS = ("dz1", "dz2", "dz1~", "dz2~", "dv", "dt")
_DIRECTIONS = ("z1", "z2", "z1~", "z2~", "v", "t")
_BAR_INDEX = (2, 3, 0, 1, 4, 5)

_ENGINE = Diff()


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


class CoordForm:
    """Exterior form with Expr coefficients over the chart basis."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int,
                 coeffs: Mapping[tuple[int, ...], Expr] | None = None) -> None:
        self.degree = degree
        self.coeffs: dict[tuple[int, ...], Expr] = {}
        if coeffs:
            for idx, c in coeffs.items():
                if not _is_zero(c):
                    self.coeffs[tuple(idx)] = c

    # -- algebra ------------------------------------------------------------

    def __add__(self, other: "CoordForm") -> "CoordForm":
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        out = dict(self.coeffs)
        for idx, c in other.coeffs.items():
            out[idx] = add(out[idx], c) if idx in out else c
        return CoordForm(self.degree, out)

    def __sub__(self, other: "CoordForm") -> "CoordForm":
        return self + other.scaled(Const(-1))

    def scaled(self, factor: Expr) -> "CoordForm":
        return CoordForm(self.degree,
                         {idx: mul(factor, c) for idx, c in self.coeffs.items()})

    def wedge(self, other: "CoordForm") -> "CoordForm":
        out: dict[tuple[int, ...], Expr] = {}
        for ia, ca in self.coeffs.items():
            for ib, cb in other.coeffs.items():
                if set(ia) & set(ib):
                    continue
                merged, sign = _sort_with_sign(ia + ib)
                term = mul(ca, cb) if sign > 0 else neg(mul(ca, cb))
                out[merged] = add(out[merged], term) if merged in out else term
        return CoordForm(self.degree + other.degree, out)

    def ext_d(self) -> "CoordForm":
        out: dict[tuple[int, ...], Expr] = {}
        for idx, c in self.coeffs.items():
            for j, direction in enumerate(_DIRECTIONS):
                if j in idx:
                    continue
                dc = _ENGINE.d(c, direction)
                if _is_zero(dc):
                    continue
                merged, sign = _sort_with_sign((j,) + idx)
                term = dc if sign > 0 else neg(dc)
                out[merged] = add(out[merged], term) if merged in out else term
        return CoordForm(self.degree + 1, out)

    def conj(self) -> "CoordForm":
        out: dict[tuple[int, ...], Expr] = {}
        for idx, c in self.coeffs.items():
            mapped = tuple(_BAR_INDEX[i] for i in idx)
            merged, sign = _sort_with_sign(mapped)
            cc = bar(c)
            out[merged] = cc if sign > 0 else neg(cc)
        return CoordForm(self.degree, out)

    # -- evaluation ----------------------------------------------------------

    def at(self, env: Mapping[str, complex]) -> dict[tuple[int, ...], complex]:
        return {idx: evaluate(c, env) for idx, c in self.coeffs.items()}

    def covector(self, env: Mapping[str, complex]) -> np.ndarray:
        if self.degree != 1:
            raise ValueError("covector() needs a 1-form")
        v = np.zeros(6, dtype=complex)
        for (i,), c in self.coeffs.items():
            v[i] = evaluate(c, env)
        return v

    def matrix(self, env: Mapping[str, complex]) -> np.ndarray:
        """Antisymmetric 6x6 value matrix of a 2-form: a(e_i, e_j)."""
        if self.degree != 2:
            raise ValueError("matrix() needs a 2-form")
        m = np.zeros((6, 6), dtype=complex)
        for (i, j), c in self.coeffs.items():
            v = evaluate(c, env)
            m[i, j] += v
            m[j, i] -= v
        return m

    def apply(self, env: Mapping[str, complex],
              vectors: Sequence[np.ndarray]) -> complex:
        """Evaluate on tangent vectors given by chart components (length 6)."""
        if len(vectors) != self.degree:
            raise ValueError("wrong number of vectors")
        total = 0j
        vals = self.at(env)
        for idx, c in vals.items():
            sub = np.array([[v[i] for i in idx] for v in vectors])
            total += c * np.linalg.det(sub)
        return total

    def is_zero(self) -> bool:
        return not self.coeffs

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        from .dsl import to_text
        if not self.coeffs:
            return "0"
        bits = []
        for idx, c in sorted(self.coeffs.items()):
            label = "^".join(BASIS[i] for i in idx) or "1"
            bits.append(f"({to_text(c)}) {label}")
        return " + ".join(bits)


def _sort_with_sign(idx: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    lst = list(idx)
    sign = 1
    for a in range(len(lst)):
        for b in range(len(lst) - 1 - a):
            if lst[b] > lst[b + 1]:
                lst[b], lst[b + 1] = lst[b + 1], lst[b]
                sign = -sign
    return tuple(lst), sign


def basis_form(name: str) -> CoordForm:
    return CoordForm(1, {(BASIS.index(name),): Const(1)})


def one_form(coeffs: Mapping[int, Expr]) -> CoordForm:
    return CoordForm(1, {(i,): c for i, c in coeffs.items()})


def wedge(*forms: CoordForm) -> CoordForm:
    out = forms[0]
    for f in forms[1:]:
        out = out.wedge(f)
    return out


class DecomposeError(Exception):
    """Raised when the coframe is numerically degenerate at the point."""


@dataclass(frozen=True)
class FrameDecomposition:
    """Result of rewriting a form in a coframe at one point.

    ``coeffs`` is keyed by strictly increasing tuples of coframe indices
    (length = form degree).  ``residual`` is the coordinate-basis norm of the
    unexplained part; ``cond`` the design-matrix condition number.
    """

    degree: int
    coeffs: Mapping[tuple[int, ...], complex]
    cond: float
    residual: float

    def __getitem__(self, idx: Iterable[int]) -> complex:
        key = tuple(idx)
        merged, sign = _sort_with_sign(key)
        if len(set(merged)) != len(merged):
            return 0j
        return sign * complex(self.coeffs.get(merged, 0j))


def decompose(target: CoordForm, coframe: Sequence[CoordForm],
              env: Mapping[str, complex],
              cond_threshold: float = 1e8) -> FrameDecomposition:
    """Express ``target`` in wedge products of ``coframe`` members at a point."""
    deg = target.degree
    rows = [f.covector(env) for f in coframe]
    combos = list(combinations(range(len(coframe)), deg)) if deg > 1 \
        else [(i,) for i in range(len(coframe))]
    basis_idx = list(combinations(range(6), deg)) if deg > 1 \
        else [(i,) for i in range(6)]
    slot = {idx: k for k, idx in enumerate(basis_idx)}

    design = np.zeros((len(basis_idx), len(combos)), dtype=complex)
    for col, combo in enumerate(combos):
        vecs = [rows[i] for i in combo]
        for idx in basis_idx:
            sub = np.array([[v[i] for i in idx] for v in vecs])
            design[slot[idx], col] = np.linalg.det(sub)

    rhs = np.zeros(len(basis_idx), dtype=complex)
    for idx, c in target.at(env).items():
        rhs[slot[idx]] = c

    sv = np.linalg.svd(design, compute_uv=False)
    smax = sv[0] if len(sv) else 0.0
    smin = sv[-1] if len(sv) else 0.0
    cond = float("inf") if smin == 0 else float(smax / smin)
    if cond > cond_threshold:
        raise DecomposeError(
            f"coframe degenerate at point (condition number {cond:.3e})")

    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    residual = float(np.linalg.norm(design @ sol - rhs))
    coeffs = {combo: complex(sol[k]) for k, combo in enumerate(combos)}
    return FrameDecomposition(degree=deg, coeffs=coeffs, cond=cond,
                              residual=residual)
