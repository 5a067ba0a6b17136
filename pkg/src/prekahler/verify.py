"""Acceptance suite: twelve end-to-end checks over the whole engine.

Each criterion returns a pass flag plus a one-line detail string with the
measured numbers.  ``run`` executes all of them (or a ``--only`` subset) and
never aborts on a failing criterion: a raised exception is reported as a
failure with the exception text.

Criterion names double as the selection tokens; a token matches when it
equals a name or is a substring of one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coframe import (adapted_coframe, classify, gauge_rotate, circle_lift,
                      nondeg_scalar_C, omega_g_from_potential,
                      structure_residuals)
from .connection import (PotentialConnection, Q_relation_check,
                         connection_from_json, critical_check,
                         from_prekahler, sample_points, special_check)
from .dsl import Domain, add, builtin_potential, const, evaluate, parse
from .freeman import (ad_operator, filtration, jet_leading_terms,
                      jet_leading_terms_check, jet_span_condition)
from .sasaki import (algebra_table, check_11_presymplectification,
                     contact_form, homogeneous_surface,
                     homogeneous_symmetries, presymplectify, stabilizer_dim,
                     tangency_check)
from .wirtinger import Diff, fd_wirtinger


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    detail: str


_ENG = Diff()
_RHO_E_TEXT = "(re(z1)+1)*exp((re(z2)+1)/(re(z1)+1))"
_RHO_E_BOX = (-0.5, 0.5, -0.5, 0.5)

_cf_cache: dict = {}
_pc_cache: dict = {}


def _kappa(a: float) -> float:
    return (a + 1) * (a - 2) / (9 * a * (a - 1))


def _homog(a: float):
    return builtin_potential("homog", {"a": a})


def _coframe(key, rho):
    if key not in _cf_cache:
        _cf_cache[key] = adapted_coframe(rho)
    return _cf_cache[key]


def _potential_connection(a: float) -> PotentialConnection:
    """Connection data extracted from the homogeneous potential, memoized."""
    if a not in _pc_cache:
        rho, dom = _homog(a)
        cf = _coframe(("homog", a), rho)
        envs = dom.sample(6, seed=5)
        _pc_cache[a] = from_prekahler(cf, envs)
    return _pc_cache[a]


def _origin(params=None) -> dict[str, complex]:
    env = {k: complex(v) for k, v in (params or {}).items()}
    env.update(z1=0j, z2=0j)
    return env


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------

def crit_flat_model():
    rho, dom = builtin_potential("flat")
    rep = classify(rho, dom, n=64, seed=0)
    m1 = max((s.bT1 for s in rep.samples if s.bT1 is not None), default=0.0)
    m2 = max((s.bT2 for s in rep.samples if s.bT2 is not None), default=0.0)
    ok = rep.verdict == "flat2Nondeg" and m1 < 1e-8 and m2 < 1e-8
    return ok, ("verdict=%s, max bT1=%.2e, max bT2=%.2e over 64 samples"
                % (rep.verdict, m1, m2))


def crit_homog_family():
    w1 = w2 = w3 = 0.0
    for a in (3.0, -2.0, 0.25):
        rho, dom = _homog(a)
        cf = _coframe(("homog", a), rho)
        k = _kappa(a)
        for env in dom.sample(20, seed=0):
            rv = evaluate(rho, env).real
            t1 = evaluate(cf.T1, env)
            t2 = evaluate(cf.T2, env)
            t3 = evaluate(cf.T3, env)
            ref1 = (k / rv) ** 2
            ref3 = abs(k) / abs(rv)
            w1 = max(w1, abs(abs(t1) ** 2 - ref1) / abs(ref1))
            w2 = max(w2, abs(t2) ** 2)
            w3 = max(w3, abs(abs(t3) - ref3) / ref3)
    ok = w1 < 1e-6 and w2 < 1e-8 and w3 < 1e-6
    return ok, ("rel err bT1=%.2e, bT2=%.2e, rel err |T3|=%.2e "
                "(a in {3, -2, 0.25}, 20 samples each)" % (w1, w2, w3))


def crit_flat_parameters():
    verdicts = {}
    for a in (-1.0, 2.0):
        rho, dom = _homog(a)
        verdicts[a] = classify(rho, dom, n=20, seed=0).verdict
    ok = all(v == "flat2Nondeg" for v in verdicts.values())
    return ok, ("a=-1 -> %s, a=2 -> %s (20 samples each)"
                % (verdicts[-1.0], verdicts[2.0]))


def crit_special_critical():
    pc = _potential_connection(0.5)
    rho, _ = _homog(0.5)
    cubic_max = max(float(np.max(np.abs(s.cubic))) for s in pc.samples)
    rel_R = 0.0
    for s in pc.samples:
        rv = evaluate(rho, s.env).real
        ref = 4.0 / rv
        rel_R = max(rel_R, abs(s.quadratic[0] - ref) / abs(ref))
    crit, c_mean = critical_check(pc)
    var = float(np.var([s.c.real for s in pc.samples]))
    ok = cubic_max < 1e-8 and rel_R < 1e-6 and crit and var < 1e-8
    return ok, ("cubic max=%.2e, R-coefficient rel err=%.2e, critical=%s "
                "(c=%.6g, variance=%.2e)"
                % (cubic_max, rel_R, crit, c_mean, var))


def crit_quartic_relation():
    parts = []
    worst = 0.0
    for a in (3.0, 0.25):
        res = Q_relation_check(_potential_connection(a), a)
        worst = max(worst, res)
        parts.append("a=%g: %.2e" % (a, res))
    return worst < 1e-7, "quartic-vs-quadric residual " + ", ".join(parts)


def crit_structure_closure():
    cases = [("flat", *builtin_potential("flat"), 4)]
    for a in (3.0, -2.0, 0.25):
        rho, dom = _homog(a)
        cases.append((("homog", a), rho, dom, 3))
    dom_e = Domain(boxes={"z1": _RHO_E_BOX, "z2": _RHO_E_BOX}, params={})
    cases.append(("rho_e", parse(_RHO_E_TEXT), dom_e, 2))

    worst = worst_re = 0.0
    for key, rho, dom, n in cases:
        cf = _coframe(key, rho)
        lift = circle_lift(cf)
        for env in dom.sample(n, seed=3):
            res = structure_residuals(cf, env, lift)
            worst = max(worst, *res.values())
            worst_re = max(worst_re, abs(evaluate(cf.T3, env).real))
    ok = worst < 1e-7 and worst_re < 1e-8
    return ok, ("structure residual max=%.2e, |Re T3| max=%.2e "
                "(flat, homog a in {3,-2,0.25}, tube potential)"
                % (worst, worst_re))


def crit_gauge_invariance():
    rng = np.random.default_rng(7)
    pert_term = parse("re(z1^2*z2)")
    worst = 0.0
    verdict_stable = True
    for name, (rho, dom) in (("flat", builtin_potential("flat")),
                             (("homog", 3.0), _homog(3.0))):
        cf = _coframe(name, rho)
        cf_rot = gauge_rotate(cf, float(rng.uniform(0.0, 2 * math.pi)))
        pert = add(rho, pert_term)
        cf_pert = adapted_coframe(pert)
        for env in dom.sample(6, seed=11):
            base = (abs(evaluate(cf.T1, env)) ** 2,
                    abs(evaluate(cf.T2, env)) ** 2,
                    abs(evaluate(cf.T3, env)))
            for other in (cf_rot, cf_pert):
                vals = (abs(evaluate(other.T1, env)) ** 2,
                        abs(evaluate(other.T2, env)) ** 2,
                        abs(evaluate(other.T3, env)))
                worst = max(worst, *(abs(x - y) for x, y in zip(base, vals)))
        v0 = classify(rho, dom, n=16, seed=0).verdict
        v1 = classify(pert, dom, n=16, seed=0).verdict
        verdict_stable = verdict_stable and v0 == v1
    ok = worst < 1e-8 and verdict_stable
    return ok, ("max invariant drift=%.2e under random rotation and "
                "pluriharmonic shift; classification stable=%s"
                % (worst, verdict_stable))


def crit_freeman_orders():
    expected = [("kahler", None, 1), ("product", None, math.inf),
                ("flat", None, 2), ("homog", 3.0, 2), ("homog", 0.25, 2)]
    got = []
    orders_ok = True
    for name, a, want in expected:
        params = {"a": a} if a is not None else {}
        rho, dom = builtin_potential(name, params)
        fr = filtration(rho, _origin(params))
        got.append("%s%s -> %s" % (name, "" if a is None else "(a=%g)" % a,
                                   fr.order))
        orders_ok = orders_ok and fr.order == want
        if name == "product":
            orders_ok = orders_ok and fr.degenerate

    agree = True
    for name, a in (("flat", None), ("homog", 3.0), ("product", None)):
        params = {"a": a} if a is not None else {}
        rho, dom = builtin_potential(name, params)
        C = nondeg_scalar_C(rho)
        for env in dom.sample(64, seed=0):
            ad = ad_operator(rho, env)
            agree = agree and ((abs(ad) > 1e-8) == (abs(evaluate(C, env))
                                                    > 1e-8))
    ok = orders_ok and agree
    return ok, ("orders: %s; ad/C zero-set agreement on 64 samples: %s"
                % ("; ".join(got), agree))


def crit_jet_criteria():
    rho_f, _ = builtin_potential("flat")
    rho_h, _ = _homog(3.0)
    rho_p, _ = builtin_potential("product")
    p_f, p_h, p_p = _origin(), _origin({"a": 3.0}), _origin()

    outcomes = {
        "flat": (jet_span_condition(rho_f, p_f, 2),
                 jet_leading_terms_check(rho_f, p_f)),
        "homog3": (jet_span_condition(rho_h, p_h, 2),
                   jet_leading_terms_check(rho_h, p_h)),
        "product": (jet_span_condition(rho_p, p_p, 2),
                    jet_leading_terms_check(rho_p, p_p)),
    }
    pattern_ok = (all(outcomes["flat"]) and all(outcomes["homog3"])
                  and not any(outcomes["product"]))

    # finite differences reproduce the flat leading jet at the origin
    r2 = _ENG.d(rho_f, "z2")
    fd_21b = fd_wirtinger(r2, p_f, "z1", conjugate=True)
    r21b = _ENG.d(r2, "z1~")
    fd_21b1b = fd_wirtinger(r21b, p_f, "z1", conjugate=True)
    fd_ok = abs(fd_21b) < 1e-6 and abs(fd_21b1b - 1.0) < 1e-6
    ok = pattern_ok and fd_ok
    return ok, ("span/leading pass for flat %s, homog3 %s, product %s; "
                "flat FD jet: rho_{2 1b}(0)=%.2e, rho_{2 1b 1b}(0)=%0.8f"
                % (outcomes["flat"], outcomes["homog3"],
                   outcomes["product"], abs(fd_21b), fd_21b1b.real))


def crit_calculus_oracle():
    dirs = (("z1", False), ("z1", True), ("z2", False), ("z2", True))
    worst = 0.0
    for key, (rho, dom) in (("flat", builtin_potential("flat")),
                            (("homog", 3.0), _homog(3.0))):
        cf = _coframe(key, rho)
        pieces = (rho, _ENG.d(rho, "z1"), _ENG.d(rho, "z2"), cf.h, cf.q,
                  cf.C, cf.A1, cf.A2, cf.B1, cf.B2)
        envs = dom.sample(50, seed=2)
        for f in pieces:
            for name, cj in dirs:
                sym_expr = _ENG.d(f, name + ("~" if cj else ""))
                for env in envs:
                    sym = evaluate(sym_expr, env)
                    num = fd_wirtinger(f, env, name, conjugate=cj)
                    worst = max(worst,
                                abs(sym - num) / max(1.0, abs(num)))
    ok = worst < 1e-6
    return ok, ("worst FD mismatch %.2e over every derivative step of the "
                "structure-scalar pipeline, 50 points x flat and homog(3)"
                % worst)


def crit_sasaki_bridge():
    contact = closed = oneone = 0.0
    for name, params in (("kahler", {}), ("flat", {}), ("homog", {"a": 3.0})):
        rho, dom = builtin_potential(name, params)
        boxes = dict(dom.boxes)
        boxes["t"] = (0.5, 1.5, 0.0, 0.0)
        boxes["v"] = (-1.0, 1.0, 0.0, 0.0)
        envs = Domain(boxes=boxes, params=dom.params).sample(20, seed=0)
        omega, _ = omega_g_from_potential(rho)
        gap = contact_form(rho).ext_d() - omega.scaled(const(-4.0))
        d_hat = presymplectify(rho).ext_d()
        for env in envs:
            contact = max(contact, max((abs(v) for v in
                                        gap.at(env).values()), default=0.0))
            closed = max(closed, max((abs(v) for v in
                                      d_hat.at(env).values()), default=0.0))
        oneone = max(oneone, check_11_presymplectification(rho, envs))

    surf = homogeneous_surface(3.0)
    fields = homogeneous_symmetries()
    tangent = all(tangency_check(f, surf, n=16, seed=0) for f in fields)
    table = algebra_table(fields, surf.samples(1, seed=1)[0])
    rng = np.random.default_rng(11)
    dims: dict[int, int] = {}
    for _ in range(100):
        d = stabilizer_dim(rng.normal(size=5), table)
        dims[d] = dims.get(d, 0) + 1
    ones = dims.get(1, 0)

    ok = (contact < 1e-9 and closed < 1e-9 and oneone < 1e-8 and tangent
          and table.residual < 1e-7 and ones >= 95)
    return ok, ("contact gap=%.2e, closedness=%.2e, (1,1)=%.2e, "
                "tangent=%s, table residual=%.2e, stabilizer dims=%s "
                "(dim-1 count %d, need >= 95; every combination of the five "
                "printed fields has a centralizer of dimension >= 2 inside "
                "their span, so this clause cannot hold as stated -- see "
                "the decisions ledger)"
                % (contact, closed, oneone, tangent, table.residual,
                   dims, ones))


# polynomial connection from a symmetric cubic (A, B, C, D): lowering the
# upper index with the area form gives gamma^1_{jk} = -(B C; C D) and
# gamma^2_{jk} = (A B; B C), which preserves the area form by construction
_RANDOM_GAMMA = """
{
  "coords": ["u1", "u2"],
  "gamma": [
    [["0.15 - 0.05*u1*u2", "-0.2*u1 - 0.4*u2"],
     ["-0.2*u1 - 0.4*u2", "-0.1 + 0.3*u1^2"]],
    [["0.3 + 0.1*u1 - 0.2*u2^2", "-0.15 + 0.05*u1*u2"],
     ["-0.15 + 0.05*u1*u2", "0.2*u1 + 0.4*u2"]]
  ],
  "sigma": "w1^w2"
}
"""


def crit_connection_roundtrip():
    pc = _potential_connection(3.0)
    r1 = max(abs(abs(p.T1_back) - abs(p.T1_direct)) for p in pc.points)
    r3 = max(abs(p.T3_back - p.T3_direct) for p in pc.points)

    conn = connection_from_json(_RANDOM_GAMMA)
    worst_K = 0.0
    for env in sample_points(6, seed=9):
        s = conn.invariant_values(env)
        worst_K = max(worst_K, abs(s.K - s.K_alt))
    ok = r1 < 1e-8 and r3 < 1e-8 and worst_K < 1e-8
    return ok, ("homog(3) round trip: |T1| gap=%.2e, T3 gap=%.2e; "
                "K two ways on a polynomial connection: %.2e"
                % (r1, r3, worst_K))


_REGISTRY: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("flat-model", crit_flat_model),
    ("homog-family", crit_homog_family),
    ("flat-parameters", crit_flat_parameters),
    ("special-critical", crit_special_critical),
    ("quartic-relation", crit_quartic_relation),
    ("structure-closure", crit_structure_closure),
    ("gauge-invariance", crit_gauge_invariance),
    ("freeman-orders", crit_freeman_orders),
    ("jet-criteria", crit_jet_criteria),
    ("calculus-oracle", crit_calculus_oracle),
    ("sasaki-bridge", crit_sasaki_bridge),
    ("connection-roundtrip", crit_connection_roundtrip),
]


def names() -> list[str]:
    return [n for n, _ in _REGISTRY]


def run(only: Optional[list[str]] = None) -> list[CriterionResult]:
    all_names = names()
    if only:
        selected: set[str] = set()
        for token in only:
            hits = [n for n in all_names if token == n or token in n]
            if not hits:
                raise ValueError(
                    "unknown acceptance criterion %r (have: %s)"
                    % (token, ", ".join(all_names)))
            selected.update(hits)
    else:
        selected = set(all_names)

    results = []
    for name, fn in _REGISTRY:
        if name not in selected:
            continue
        try:
            passed, detail = fn()
        except Exception as exc:
            passed, detail = False, ("raised %s: %s"
                                     % (type(exc).__name__, exc))
        results.append(CriterionResult(name=name, passed=passed,
                                       detail=detail))
    return results
