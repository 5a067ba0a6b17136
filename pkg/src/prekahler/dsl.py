"""Expression trees, parser, and normalization for potential functions.

The expression language is small: complex constants, real parameters,
coordinates ``z1, z2`` (plus auxiliary ``v``, ``t``, ``w``), arithmetic,
real-constant powers, ``exp/ln/sqrt``, and conjugation.  Conjugation is
eliminated during normalization: every node is pushed to the leaves, where
a coordinate carries a ``conjugated`` flag and parameters are real by
convention.  Pushing ``conj`` through ``Pow``/``Ln``/``Sqrt`` assumes a
positive-real base; every base appearing in the shipped formulas satisfies
this on its domain, and any residual sign ambiguity of square roots is a
coframe phase, which the structure invariants do not see.

Sugar accepted by the parser::

    abs2(e) -> e*conj(e)      re(e) -> (e+conj(e))/2      im(e) -> (e-conj(e))/(2i)

Numbers may be written as decimals or fractions (``p/q`` parses as division).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

__all__ = [
    "Expr", "Const", "Param", "Coord", "Add", "Mul", "Div", "Pow",
    "Exp", "Ln", "Sqrt", "Conj",
    "DslError", "ParseError", "EvalError",
    "parse", "normalize", "bar", "evaluate", "to_text", "subst_coords",
    "add", "mul", "div", "pw", "sq", "ex", "ln_", "re_", "im_", "abs2",
    "const", "coord", "param", "neg", "sub",
    "Domain", "builtin_potential", "check_real",
    "COMPLEX_COORDS", "REAL_COORDS",
]

COMPLEX_COORDS = ("z1", "z2", "w")
REAL_COORDS = ("v", "t")
_ALL_COORDS = COMPLEX_COORDS + REAL_COORDS


class DslError(Exception):
    """Base class for expression-language failures."""


class ParseError(DslError):
    def __init__(self, message: str, pos: int) -> None:
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class EvalError(DslError):
    pass


# ---------------------------------------------------------------------------
# Node types
# ---------------------------------------------------------------------------

class Expr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: complex


@dataclass(frozen=True, slots=True)
class Param(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Coord(Expr):
    name: str
    conjugated: bool = False


@dataclass(frozen=True, slots=True)
class Add(Expr):
    children: tuple[Expr, ...]


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    children: tuple[Expr, ...]


@dataclass(frozen=True, slots=True)
class Div(Expr):
    num: Expr
    den: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: Expr  # constant subtree: Const/Param arithmetic only


@dataclass(frozen=True, slots=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Ln(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Sqrt(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Conj(Expr):
    arg: Expr


ZERO = Const(0)
ONE = Const(1)


def const(v: complex) -> Const:
    return Const(complex(v))


def coord(name: str, conjugated: bool = False) -> Coord:
    if name not in _ALL_COORDS:
        raise DslError(f"unknown coordinate {name!r}")
    if name in REAL_COORDS:
        conjugated = False
    return Coord(name, conjugated)


def param(name: str) -> Param:
    return Param(name)


# ---------------------------------------------------------------------------
# Smart constructors (produce normalized nodes; used by all symbolic code)
# ---------------------------------------------------------------------------

def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    c = 0 + 0j
    for tm in terms:
        if isinstance(tm, Add):
            items: tuple[Expr, ...] = tm.children
        else:
            items = (tm,)
        for it in items:
            if isinstance(it, Const):
                c += it.value
            else:
                flat.append(it)
    if c != 0 or not flat:
        flat.append(Const(c))
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    c = 1 + 0j
    for f in factors:
        if isinstance(f, Mul):
            items: tuple[Expr, ...] = f.children
        else:
            items = (f,)
        for it in items:
            if isinstance(it, Const):
                c *= it.value
            else:
                flat.append(it)
    if c == 0:
        return ZERO
    if c != 1 or not flat:
        flat.insert(0, Const(c))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def div(num: Expr, den: Expr) -> Expr:
    if isinstance(den, Const):
        if den.value == 0:
            raise DslError("division by constant zero")
        if den.value == 1:
            return num
        if isinstance(num, Const):
            return Const(num.value / den.value)
    if isinstance(num, Const) and num.value == 0:
        return ZERO
    return Div(num, den)


def _exponent_is_constant(e: Expr) -> bool:
    if isinstance(e, Const):
        return e.value.imag == 0
    if isinstance(e, Param):
        return True
    if isinstance(e, Add) or isinstance(e, Mul):
        return all(_exponent_is_constant(ch) for ch in e.children)
    if isinstance(e, Div):
        return _exponent_is_constant(e.num) and _exponent_is_constant(e.den)
    if isinstance(e, Conj):
        return _exponent_is_constant(e.arg)
    return False


def pw(base: Expr, exponent: Expr) -> Expr:
    if not _exponent_is_constant(exponent):
        raise DslError("non-constant exponent in `^`")
    if isinstance(exponent, Const):
        ev = exponent.value.real
        if ev == 0:
            return ONE
        if ev == 1:
            return base
        if isinstance(base, Const):
            return Const(base.value ** ev)
    return Pow(base, exponent)


def ex(arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(cmath.exp(arg.value))
    return Exp(arg)


def ln_(arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(cmath.log(arg.value))
    return Ln(arg)


def sq(arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(cmath.sqrt(arg.value))
    return Sqrt(arg)


def neg(e: Expr) -> Expr:
    return mul(Const(-1), e)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def bar(e: Expr) -> Expr:
    """Formal conjugate: swap z and z-bar at the leaves, conjugate constants."""
    if isinstance(e, Const):
        return Const(e.value.conjugate())
    if isinstance(e, Param):
        return e
    if isinstance(e, Coord):
        if e.name in REAL_COORDS:
            return e
        return Coord(e.name, not e.conjugated)
    if isinstance(e, Add):
        return add(*(bar(ch) for ch in e.children))
    if isinstance(e, Mul):
        return mul(*(bar(ch) for ch in e.children))
    if isinstance(e, Div):
        return div(bar(e.num), bar(e.den))
    if isinstance(e, Pow):
        return Pow(bar(e.base), e.exponent)  # real exponent, positive-real base
    if isinstance(e, Exp):
        return ex(bar(e.arg))
    if isinstance(e, Ln):
        return ln_(bar(e.arg))
    if isinstance(e, Sqrt):
        return sq(bar(e.arg))
    if isinstance(e, Conj):
        return normalize(e.arg)
    raise DslError(f"cannot conjugate {type(e).__name__}")


def re_(e: Expr) -> Expr:
    return div(add(e, bar(e)), Const(2))


def im_(e: Expr) -> Expr:
    return div(sub(e, bar(e)), Const(2j))


def abs2(e: Expr) -> Expr:
    return mul(e, bar(e))


def normalize(e: Expr) -> Expr:
    """Rebuild through the smart constructors and eliminate Conj nodes."""
    if isinstance(e, (Const, Param, Coord)):
        return e
    if isinstance(e, Add):
        return add(*(normalize(ch) for ch in e.children))
    if isinstance(e, Mul):
        return mul(*(normalize(ch) for ch in e.children))
    if isinstance(e, Div):
        return div(normalize(e.num), normalize(e.den))
    if isinstance(e, Pow):
        return pw(normalize(e.base), normalize(e.exponent))
    if isinstance(e, Exp):
        return ex(normalize(e.arg))
    if isinstance(e, Ln):
        return ln_(normalize(e.arg))
    if isinstance(e, Sqrt):
        return sq(normalize(e.arg))
    if isinstance(e, Conj):
        return bar(normalize(e.arg))
    raise DslError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _make_evaluator(env: Mapping[str, complex]):
    cache: dict[int, complex] = {}

    def go(n: Expr) -> complex:
        key = id(n)
        hit = cache.get(key)
        if hit is not None:
            return hit
        if isinstance(n, Const):
            val = n.value
        elif isinstance(n, Param):
            try:
                val = complex(env[n.name])
            except KeyError:
                raise EvalError(f"unbound parameter {n.name!r}") from None
        elif isinstance(n, Coord):
            try:
                val = complex(env[n.name])
            except KeyError:
                raise EvalError(f"unbound coordinate {n.name!r}") from None
            if n.conjugated:
                val = val.conjugate()
        elif isinstance(n, Add):
            val = sum(go(ch) for ch in n.children)
        elif isinstance(n, Mul):
            val = 1 + 0j
            for ch in n.children:
                val *= go(ch)
        elif isinstance(n, Div):
            d = go(n.den)
            if d == 0:
                raise EvalError("division by zero during evaluation")
            val = go(n.num) / d
        elif isinstance(n, Pow):
            b = go(n.base)
            p = go(n.exponent).real
            if b == 0 and p <= 0:
                raise EvalError("zero base with nonpositive exponent")
            val = b ** p
        elif isinstance(n, Exp):
            val = cmath.exp(go(n.arg))
        elif isinstance(n, Ln):
            a = go(n.arg)
            if a == 0:
                raise EvalError("ln(0) during evaluation")
            val = cmath.log(a)
        elif isinstance(n, Sqrt):
            val = cmath.sqrt(go(n.arg))
        elif isinstance(n, Conj):
            val = go(n.arg).conjugate()
        else:
            raise EvalError(f"unknown node {type(n).__name__}")
        cache[key] = val
        return val

    return go


def evaluate(e: Expr, env: Mapping[str, complex]) -> complex:
    """Evaluate at a point.

    ``env`` maps coordinate names and parameter names to values.  Shared
    subtrees are evaluated once (id-keyed cache), which matters for the large
    derivative trees the engine builds.
    """
    return _make_evaluator(env)(e)


def evaluate_many(exprs: Sequence[Expr], env: Mapping[str, complex]) -> list[complex]:
    """Evaluate a batch at one point, sharing the subtree cache across roots.

    Derivative towers overlap heavily; evaluating them together is much
    cheaper than one `evaluate` call per root.
    """
    go = _make_evaluator(env)
    return [go(e) for e in exprs]


def subst_coords(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace coordinates by expressions (conjugated slots get the bar image)."""
    bars = {k: bar(normalize(v)) for k, v in mapping.items()}

    def go(n: Expr) -> Expr:
        if isinstance(n, Coord) and n.name in mapping:
            return bars[n.name] if n.conjugated else normalize(mapping[n.name])
        if isinstance(n, (Const, Param, Coord)):
            return n
        if isinstance(n, Add):
            return add(*(go(ch) for ch in n.children))
        if isinstance(n, Mul):
            return mul(*(go(ch) for ch in n.children))
        if isinstance(n, Div):
            return div(go(n.num), go(n.den))
        if isinstance(n, Pow):
            return pw(go(n.base), n.exponent)
        if isinstance(n, Exp):
            return ex(go(n.arg))
        if isinstance(n, Ln):
            return ln_(go(n.arg))
        if isinstance(n, Sqrt):
            return sq(go(n.arg))
        if isinstance(n, Conj):
            return bar(go(n.arg))
        raise DslError(f"unknown node {type(n).__name__}")

    return go(normalize(e))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_FUNCS: dict[str, Callable[..., Expr]] = {
    "conj": lambda a: Conj(a),
    "re": re_,
    "im": im_,
    "abs2": abs2,
    "exp": ex,
    "ln": ln_,
    "sqrt": sq,
}


def _tokens(text: str) -> Iterator[tuple[str, str, int]]:
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^(),":
            yield ("op", ch, i)
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            yield ("num", text[i:j], i)
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            yield ("ident", text[i:j], i)
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    yield ("end", "", n)


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = list(_tokens(text))
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.pos]

    def take(self) -> tuple[str, str, int]:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, value: str) -> None:
        kind, val, at = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", at)

    # expr := term (('+'|'-') term)*
    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    # term := factor (('*'|'/') factor)*
    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.factor()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    # factor := ('-')* atom ('^' exponent)?
    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return neg(self.factor())
        if self.peek()[1] == "+":
            self.take()
            return self.factor()
        node = self.atom()
        if self.peek()[1] == "^":
            at = self.take()[2]
            expo = self.factor()
            try:
                node = pw(node, normalize(expo))
            except DslError as err:
                raise ParseError(str(err), at) from None
        return node

    def atom(self) -> Expr:
        kind, val, at = self.take()
        if kind == "num":
            return Const(float(val))
        if val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "ident":
            if val == "i":
                return Const(1j)
            if val in _FUNCS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                fn = _FUNCS[val]
                if len(args) != 1:
                    raise ParseError(f"{val} takes one argument", at)
                return fn(args[0])
            if val in _ALL_COORDS:
                return coord(val)
            return Param(val)
        raise ParseError(f"unexpected token {val or 'end of input'!r}", at)


def parse(text: str) -> Expr:
    p = _Parser(text)
    node = p.expr()
    kind, val, at = p.peek()
    if kind != "end":
        raise ParseError(f"trailing input {val!r}", at)
    return normalize(node)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _fmt_const(v: complex) -> str:
    def fmt_real(x: float) -> str:
        if x == int(x) and abs(x) < 1e15:
            return str(int(x))
        return repr(x)

    if v.imag == 0:
        s = fmt_real(v.real)
        return f"({s})" if v.real < 0 else s
    if v.real == 0:
        if v.imag == 1:
            return "i"
        if v.imag == -1:
            return "(-i)"
        return f"({fmt_real(v.imag)}*i)"
    sign = "+" if v.imag > 0 else "-"
    return f"({fmt_real(v.real)}{sign}{fmt_real(abs(v.imag))}*i)"


def to_text(e: Expr) -> str:
    """Render in parser-accepted syntax (round-trips through ``parse``)."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Coord):
        return f"conj({e.name})" if e.conjugated else e.name
    if isinstance(e, Add):
        return "(" + "+".join(to_text(ch) for ch in e.children) + ")"
    if isinstance(e, Mul):
        return "*".join(_wrap(ch) for ch in e.children)
    if isinstance(e, Div):
        return f"{_wrap(e.num)}/{_wrap(e.den)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base)}^({to_text(e.exponent)})"
    if isinstance(e, Exp):
        return f"exp({to_text(e.arg)})"
    if isinstance(e, Ln):
        return f"ln({to_text(e.arg)})"
    if isinstance(e, Sqrt):
        return f"sqrt({to_text(e.arg)})"
    if isinstance(e, Conj):
        return f"conj({to_text(e.arg)})"
    raise DslError(f"unknown node {type(e).__name__}")


def _wrap(e: Expr) -> str:
    s = to_text(e)
    if isinstance(e, (Add, Div, Mul)) and not s.startswith("("):
        return f"({s})"
    return s


# ---------------------------------------------------------------------------
# Domains and builtins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """A sampling box: per-coordinate (re_lo, re_hi, im_lo, im_hi) plus bound
    parameters.  Auxiliary coordinates may be included (v, t real)."""

    boxes: Mapping[str, tuple[float, float, float, float]]
    params: Mapping[str, float]

    def sample(self, n: int, seed: int = 0) -> list[dict[str, complex]]:
        import numpy as np

        rng = np.random.default_rng(seed)
        names = sorted(self.boxes)
        out: list[dict[str, complex]] = []
        for _ in range(n):
            env: dict[str, complex] = dict(self.params)
            for name in names:
                re_lo, re_hi, im_lo, im_hi = self.boxes[name]
                x = rng.uniform(re_lo, re_hi)
                y = rng.uniform(im_lo, im_hi) if name in COMPLEX_COORDS else 0.0
                env[name] = complex(x, y)
            out.append(env)
        return out


_BUILTIN_TEXT = {
    "flat": "(abs2(z1)+re(z1^2*conj(z2)))/(1-abs2(z2))",
    "homog": "2*(re(z1)+1)^a*(re(z2)+1)^(1-a)",
    "kahler": "abs2(z1)+abs2(z2)",
    "product": "abs2(z1)",
}

_BUILTIN_BOX = {
    "flat": (-0.55, 0.55, -0.55, 0.55),
    "homog": (-0.5, 0.5, -0.5, 0.5),
    "kahler": (-1.0, 1.0, -1.0, 1.0),
    "product": (-1.0, 1.0, -1.0, 1.0),
}


def builtin_potential(name: str, params: Mapping[str, float] | None = None
                      ) -> tuple[Expr, Domain]:
    """Return ``(expr, safe sampling domain)`` for a named potential.

    ``homog`` requires a parameter ``a`` outside {0, 1} (the two values where
    the defining family degenerates to a product)."""
    params = dict(params or {})
    if name not in _BUILTIN_TEXT:
        raise DslError(f"unknown builtin {name!r} "
                       f"(expected one of {sorted(_BUILTIN_TEXT)})")
    if name == "homog":
        if "a" not in params:
            raise DslError("builtin 'homog' needs --param a=<value>")
        if params["a"] in (0.0, 1.0):
            raise DslError("builtin 'homog' rejects a in {0, 1}")
    expr = parse(_BUILTIN_TEXT[name])
    box = _BUILTIN_BOX[name]
    dom = Domain(boxes={"z1": box, "z2": box}, params=params)
    return expr, dom


def builtin_text(name: str) -> str:
    return _BUILTIN_TEXT[name]


def check_real(e: Expr, dom: Domain, n: int = 64, seed: int = 0
               ) -> tuple[bool, float, dict[str, complex] | None]:
    """Sample |Im| of the expression; return (ok, max imaginary part, witness)."""
    worst = 0.0
    witness: dict[str, complex] | None = None
    for env in dom.sample(n, seed):
        val = evaluate(e, env)
        mag = abs(val.imag)
        if mag > worst:
            worst, witness = mag, env
    scale = 1.0
    return worst <= 1e-9 * max(scale, 1.0), worst, witness if worst > 1e-9 else None
