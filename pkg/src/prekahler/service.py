"""HTTP surface of the engine: one endpoint per analysis command.

The command line talks to this app in process through an ASGI transport, so
the service and the CLI produce identical report documents.  Engine errors
are mapped onto a small set of error classes (``parse``, ``domain``,
``singular``, ``rank``) carried in a 400 response body; the CLI turns those
into exit codes.
"""
from __future__ import annotations

import json
from typing import Optional

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .coframe import (GeometryError, RankError, SingularityError,
                      adapted_coframe, classify, hessian, nondeg_scalar_C,
                      omega_g_from_potential, rank_at)
from .connection import (ConnectionError_, PotentialConnection,
                         Q_relation_check, connection_from_json,
                         critical_check, from_prekahler, sample_points,
                         special_check)
from .dsl import (Domain, DslError, EvalError, builtin_potential,
                  builtin_text, check_real, const, evaluate, parse)
from .freeman import (ad_operator, filtration, jet_leading_terms,
                      jet_leading_terms_check, jet_span_condition)
from .report import ReportDocument, jsonable
from .sampling import map_samples
from .sasaki import (algebra_table, check_11_presymplectification,
                     contact_form, homogeneous_surface,
                     homogeneous_symmetries, presymplectify, stabilizer_dim,
                     tangency_check)
from . import verify as verify_mod

_DEFAULT_BOX = (-0.5, 0.5, -0.5, 0.5)
_FAMILY_EXCLUDED = (-1.0, 0.0, 1.0, 2.0)


# ---------------------------------------------------------------------------
# Request models
# ---------------------------------------------------------------------------

class PotentialSpec(BaseModel):
    """A potential given either as DSL source text or by builtin name."""
    text: Optional[str] = None
    builtin: Optional[str] = None
    params: dict[str, float] = Field(default_factory=dict)


class AnalyzeRequest(PotentialSpec):
    at: Optional[dict[str, tuple[float, float]]] = None
    samples: int = 64
    seed: int = 0
    tol: float = 1e-8
    rel: float = 1e-6


class FreemanRequest(PotentialSpec):
    at: Optional[dict[str, tuple[float, float]]] = None
    samples: int = 64
    seed: int = 0
    tol: float = 1e-8


class ConnectionRequest(BaseModel):
    gamma: Optional[str] = None
    potential: Optional[PotentialSpec] = None
    samples: int = 64
    seed: int = 0
    tol: float = 1e-8


class SasakiRequest(PotentialSpec):
    samples: int = 64
    seed: int = 0
    tol: float = 1e-8


class VerifyRequest(BaseModel):
    only: Optional[list[str]] = None


# ---------------------------------------------------------------------------
# Shared input handling
# ---------------------------------------------------------------------------

def load_potential(spec: PotentialSpec):
    """Resolve a potential spec to (expr, sampling domain, input echo)."""
    if (spec.text is None) == (spec.builtin is None):
        raise DslError("give exactly one potential input: source text "
                       "or a builtin name")
    if spec.builtin is not None:
        rho, dom = builtin_potential(spec.builtin, spec.params)
        src = builtin_text(spec.builtin)
    else:
        src = spec.text
        rho = parse(src)
        dom = Domain(boxes={"z1": _DEFAULT_BOX, "z2": _DEFAULT_BOX},
                     params=dict(spec.params))
        ok, worst, _ = check_real(rho, dom, n=32, seed=1)
        if not ok:
            raise GeometryError(
                "potential is not real-valued on the sampling box "
                "(max |Im| = %.3g)" % worst)
    echo = {
        "builtin": spec.builtin,
        "potential_text": src,
        "params": dict(spec.params),
        "domain": {k: list(v) for k, v in sorted(dom.boxes.items())},
    }
    return rho, dom, echo


def point_env(at: dict[str, tuple[float, float]],
              params) -> dict[str, complex]:
    env: dict[str, complex] = {k: complex(v) for k, v in params.items()}
    for name, pair in at.items():
        if name not in ("z1", "z2"):
            raise DslError("--at accepts z1 and z2 only, got %r" % name)
        env[name] = complex(pair[0], pair[1])
    env.setdefault("z1", 0j)
    env.setdefault("z2", 0j)
    return env


def _at_echo(at):
    if at is None:
        return None
    return {k: [v[0], v[1]] for k, v in sorted(at.items())}


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def run_analyze(req: AnalyzeRequest) -> ReportDocument:
    rho, dom, echo = load_potential(req)
    echo.update(samples=req.samples, seed=req.seed, at=_at_echo(req.at))
    rep = classify(rho, dom, n=req.samples, seed=req.seed, tol=req.tol)

    records = []
    for s in rep.samples:
        rec: dict = {"z1": s.point["z1"], "z2": s.point["z2"], "rank": s.rank}
        if s.absC is not None:
            rec["absC"] = s.absC
        for name in ("T1", "T2", "T3"):
            val = getattr(s, name)
            if val is not None:
                rec[name] = complex(val)
        for name in ("bT1", "bT2"):
            val = getattr(s, name)
            if val is not None:
                rec[name] = float(val)
        records.append(rec)

    bT1s = [r["bT1"] for r in records if "bT1" in r]
    bT2s = [r["bT2"] for r in records if "bT2" in r]
    ranks: dict[str, int] = {}
    for r in records:
        key = str(r["rank"])
        ranks[key] = ranks.get(key, 0) + 1
    agg: dict = {
        "verdict": rep.verdict,
        "rank_histogram": ranks,
        "max_bT1": max(bT1s) if bT1s else None,
        "max_bT2": max(bT2s) if bT2s else None,
    }

    if req.at is not None:
        env = point_env(req.at, dom.params)
        r = rank_at(hessian(rho), env)
        at_rec: dict = {"z1": env["z1"], "z2": env["z2"], "rank": r}
        if r == 1:
            at_rec["absC"] = abs(evaluate(nondeg_scalar_C(rho), env))
            if at_rec["absC"] > req.tol:
                cf = adapted_coframe(rho)
                t1 = complex(evaluate(cf.T1, env))
                t2 = complex(evaluate(cf.T2, env))
                at_rec.update(T1=t1, T2=t2,
                              T3=complex(evaluate(cf.T3, env)),
                              bT1=abs(t1) ** 2, bT2=abs(t2) ** 2)
        agg["at_point"] = at_rec

    return ReportDocument(command="analyze", version=__version__,
                          inputs=echo,
                          tolerances={"abs": req.tol, "rel": req.rel},
                          records=records, aggregate=agg,
                          notes=list(rep.notes))


def run_freeman(req: FreemanRequest) -> ReportDocument:
    rho, dom, echo = load_potential(req)
    echo.update(samples=req.samples, seed=req.seed, at=_at_echo(req.at))
    p = point_env(req.at or {}, dom.params)

    fr = filtration(rho, p, tol=req.tol, seed=req.seed)
    agg: dict = {
        "ranks": list(fr.ranks),
        "order": fr.order,
        "degenerate": fr.degenerate,
        "ad": None if fr.ad is None else complex(fr.ad),
    }
    records: list = []
    if fr.ranks[1] == 1:
        agg["jet_span_k1"] = jet_span_condition(rho, p, 1, tol=req.tol)
        agg["jet_span_k2"] = jet_span_condition(rho, p, 2, tol=req.tol)
        lead = jet_leading_terms(rho, p)
        agg["jet_leading"] = list(lead)
        agg["jet_leading_check"] = jet_leading_terms_check(rho, p,
                                                           tol=req.tol)
        # pointwise table: bracket operator against the obstruction scalar
        C = nondeg_scalar_C(rho)
        envs = dom.sample(req.samples, req.seed)

        def row(env):
            return {"z1": env["z1"], "z2": env["z2"],
                    "ad": ad_operator(rho, env, tol=req.tol),
                    "absC": abs(evaluate(C, env))}

        records = map_samples(row, envs)
        agree = all((abs(r["ad"]) > req.tol) == (r["absC"] > req.tol)
                    for r in records)
        agg["ad_matches_C"] = agree

    return ReportDocument(command="freeman", version=__version__,
                          inputs=echo, tolerances={"abs": req.tol},
                          records=records, aggregate=agg)


def run_connection(req: ConnectionRequest) -> ReportDocument:
    if (req.gamma is None) == (req.potential is None):
        raise DslError("connection input needs exactly one of a gamma "
                       "document or a potential")
    agg: dict = {}
    family_a = None
    if req.gamma is not None:
        conn = connection_from_json(req.gamma)
        envs = sample_points(req.samples, req.seed)
        samples = map_samples(conn.invariant_values, envs)
        check_envs = envs
        echo = {"gamma": json.loads(req.gamma), "samples": req.samples,
                "seed": req.seed}
    else:
        rho, dom, echo = load_potential(req.potential)
        echo.update(samples=req.samples, seed=req.seed)
        cf = adapted_coframe(rho)
        envs = dom.sample(req.samples, req.seed)
        pc = from_prekahler(cf, envs, tol=req.tol)
        conn = pc
        samples = pc.samples
        check_envs = ()
        agg["roundtrip_T1"] = max(abs(p.T1_back - p.T1_direct)
                                  for p in pc.points)
        agg["roundtrip_T3"] = max(abs(p.T3_back - p.T3_direct)
                                  for p in pc.points)
        family_a = req.potential.params.get("a")

    records = [{
        "z1": s.env["z1"], "z2": s.env["z2"],
        "R11": s.R11, "R12": s.R12, "R21": s.R21,
        "quadratic": list(s.quadratic), "cubic": list(s.cubic),
        "quartic": list(s.quartic),
        "K": s.K, "K_alt": s.K_alt, "c": s.c,
    } for s in samples]

    curv = max(max(abs(s.R11), abs(s.R12), abs(s.R21)) for s in samples)
    crit, c_mean = critical_check(conn, check_envs, tol=req.tol)
    agg.update({
        "max_curvature": curv,
        "flat": curv < req.tol,
        "special": special_check(conn, check_envs, tol=req.tol),
        "critical": crit,
        "c_mean": c_mean,
        "max_K_disagreement": max(abs(s.K - s.K_alt) for s in samples),
    })
    if family_a is not None and family_a not in _FAMILY_EXCLUDED:
        agg["Q_residual"] = Q_relation_check(conn, family_a, check_envs)

    return ReportDocument(command="connection", version=__version__,
                          inputs=echo, tolerances={"abs": req.tol},
                          records=records, aggregate=agg)


def run_sasaki(req: SasakiRequest) -> ReportDocument:
    rho, dom, echo = load_potential(req)
    echo.update(samples=req.samples, seed=req.seed)
    boxes = dict(dom.boxes)
    boxes["t"] = (0.5, 1.5, 0.0, 0.0)
    boxes["v"] = (-1.0, 1.0, 0.0, 0.0)
    envs = Domain(boxes=boxes, params=dom.params).sample(req.samples,
                                                         req.seed)

    theta = contact_form(rho)
    dtheta = theta.ext_d()
    omega, _ = omega_g_from_potential(rho)
    contact_gap = dtheta - omega.scaled(const(-4.0))
    omega_hat = presymplectify(rho)
    closedness = omega_hat.ext_d()

    def row(env):
        c_res = max((abs(v) for v in contact_gap.at(env).values()),
                    default=0.0)
        d_res = max((abs(v) for v in closedness.at(env).values()),
                    default=0.0)
        return {"z1": env["z1"], "z2": env["z2"], "t": env["t"].real,
                "contact_residual": c_res, "closed_residual": d_res}

    records = map_samples(row, envs)
    m0 = dict(envs[0])
    m1 = dict(envs[0])
    m1["t"] = 1.0 + 0j
    agg: dict = {
        "contact_residual": max(r["contact_residual"] for r in records),
        "closed_residual": max(r["closed_residual"] for r in records),
        "oneone_residual": check_11_presymplectification(rho, envs),
        "dtheta_rank": int(np.linalg.matrix_rank(dtheta.matrix(m0),
                                                 tol=1e-9)),
        "presympl_rank": int(np.linalg.matrix_rank(omega_hat.matrix(m1),
                                                   tol=1e-9)),
    }

    if req.builtin == "homog":
        a = req.params["a"]
        surf = homogeneous_surface(a)
        fields = homogeneous_symmetries()
        tangent = [tangency_check(f, surf, n=12, seed=req.seed, tol=req.tol)
                   for f in fields]
        base = surf.samples(1, seed=req.seed + 1)[0]
        table = algebra_table(fields, base)
        rng = np.random.default_rng(req.seed)
        dims: dict[str, int] = {}
        for _ in range(100):
            d = stabilizer_dim(rng.normal(size=5), table)
            dims[str(d)] = dims.get(str(d), 0) + 1
        agg["surface"] = {
            "tangent": tangent,
            "algebra_residual": table.residual,
            "stabilizer_dims": dims,
        }

    return ReportDocument(command="sasaki", version=__version__,
                          inputs=echo, tolerances={"abs": req.tol},
                          records=records, aggregate=agg)


def run_verify(req: VerifyRequest) -> ReportDocument:
    results = verify_mod.run(only=req.only)
    records = [{"name": r.name, "passed": r.passed, "detail": r.detail}
               for r in results]
    agg = {
        "total": len(results),
        "passed": sum(1 for r in results if r.passed),
        "failed": sum(1 for r in results if not r.passed),
    }
    return ReportDocument(command="verify", version=__version__,
                          inputs={"only": req.only}, records=records,
                          aggregate=agg)


# ---------------------------------------------------------------------------
# FastAPI wiring
# ---------------------------------------------------------------------------

def error_class(exc: Exception) -> Optional[str]:
    """Name the CLI error class for an engine exception, if it has one."""
    if isinstance(exc, ConnectionError_):
        return "parse"
    if isinstance(exc, SingularityError):
        return "singular"
    if isinstance(exc, RankError):
        return "rank"
    if isinstance(exc, GeometryError):
        return "domain"
    if isinstance(exc, EvalError):
        return "domain"
    if isinstance(exc, DslError):
        return "parse"
    if isinstance(exc, (ValueError, KeyError, json.JSONDecodeError)):
        return "parse"
    return None


def _guarded(runner, req):
    try:
        doc = runner(req)
    except Exception as exc:
        kind = error_class(exc)
        if kind is None:
            raise
        return JSONResponse(status_code=400,
                            content={"error_class": kind,
                                     "message": str(exc)})
    return JSONResponse(content=jsonable(doc.tree()))


app = FastAPI(title="prekahler", version=__version__)


@app.get("/health")
def health():
    return {"version": __version__}


@app.post("/analyze")
def analyze_endpoint(req: AnalyzeRequest):
    return _guarded(run_analyze, req)


@app.post("/freeman")
def freeman_endpoint(req: FreemanRequest):
    return _guarded(run_freeman, req)


@app.post("/connection")
def connection_endpoint(req: ConnectionRequest):
    return _guarded(run_connection, req)


@app.post("/sasaki")
def sasaki_endpoint(req: SasakiRequest):
    return _guarded(run_sasaki, req)


@app.post("/verify")
def verify_endpoint(req: VerifyRequest):
    return _guarded(run_verify, req)
