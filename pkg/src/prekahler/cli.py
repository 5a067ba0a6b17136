"""Command line for the engine.

Every subcommand builds a JSON request and posts it to the service app,
in process by default or to a running server with ``--server``.  Reports
print as a short human summary; ``--json`` writes the canonical document and
``--csv`` the flat per-sample table.

Exit codes: 0 success, 1 failed verification or transport trouble,
2 parse errors (bad flags, bad expressions, bad files), 3 domain errors,
4 singular input, 5 rank conditions violated.
"""
from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

import httpx

from .report import canonical_json, human_summary, records_csv

_EXIT = {"parse": 2, "domain": 3, "singular": 4, "rank": 5}
_BUILTINS = ("flat", "homog", "kahler", "product")


def _param(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(
            "expected name=value, got %r" % text)
    name, _, value = text.partition("=")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            "parameter %r needs a numeric value, got %r"
            % (name, value)) from None


def _complex(text: str) -> complex:
    cleaned = "".join(text.split()).replace("i", "j")
    try:
        return complex(cleaned)
    except ValueError:
        raise argparse.ArgumentTypeError("bad complex literal %r"
                                         % text) from None


def _at(text: str) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for part in text.split(","):
        if "=" not in part:
            raise argparse.ArgumentTypeError(
                "--at expects z1=..,z2=.., got %r" % text)
        name, _, value = part.partition("=")
        z = _complex(value)
        out[name.strip()] = [z.real, z.imag]
    return out


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        print("error (parse): cannot read %s: %s" % (path, exc),
              file=sys.stderr)
        raise SystemExit(_EXIT["parse"]) from None


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="prekahler",
        description="invariants of potentials for degenerate closed "
                    "(1,1)-forms on complex surfaces")
    sub = top.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", metavar="URL",
                        help="talk to a running service instead of "
                             "computing in process")
    common.add_argument("--json", metavar="PATH",
                        help="write the canonical JSON report here")

    potential = argparse.ArgumentParser(add_help=False)
    group = potential.add_mutually_exclusive_group(required=True)
    group.add_argument("--potential", metavar="FILE",
                       help="file with a potential expression in z1, z2")
    group.add_argument("--builtin", choices=_BUILTINS,
                       help="named example potential")
    potential.add_argument("--param", type=_param, action="append",
                           default=[], metavar="NAME=VALUE",
                           help="bind a family parameter (repeatable)")

    sampled = argparse.ArgumentParser(add_help=False)
    sampled.add_argument("--samples", type=int, default=64, metavar="N")
    sampled.add_argument("--seed", type=int, default=0, metavar="S")
    sampled.add_argument("--tol", type=float, default=1e-8, metavar="T",
                         help="absolute tolerance on vanishing checks")
    sampled.add_argument("--csv", metavar="PATH",
                         help="write the per-sample table here")

    p = sub.add_parser("analyze", parents=[common, potential, sampled],
                       help="classify a potential and tabulate its "
                            "invariants")
    p.add_argument("--at", type=_at, metavar="z1=a+bi,z2=c+di",
                   help="also evaluate the invariants at one point")
    p.add_argument("--rel", type=float, default=1e-6,
                   help="relative tolerance on value comparisons")

    p = sub.add_parser("freeman", parents=[common, potential, sampled],
                       help="kernel filtration ranks, nondegeneracy order "
                            "and jet criteria")
    p.add_argument("--at", type=_at, metavar="z1=a+bi,z2=c+di",
                   help="base point (default origin)")

    p = sub.add_parser("connection", parents=[common, sampled],
                       help="curvature invariants of a symplectic "
                            "connection")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--gamma", metavar="FILE",
                       help="JSON file with Christoffel symbol expressions")
    group.add_argument("--from-potential", metavar="NAME_OR_FILE",
                       dest="from_potential",
                       help="extract the connection beneath a potential "
                            "(builtin name or expression file)")
    p.add_argument("--param", type=_param, action="append", default=[],
                   metavar="NAME=VALUE")

    sub.add_parser("sasaki", parents=[common, potential, sampled],
                   help="contact form, presymplectification and symmetry "
                        "checks")

    p = sub.add_parser("verify", parents=[common],
                       help="run the acceptance criteria")
    p.add_argument("--only", action="append", metavar="NAME",
                   help="run the criteria matching this token "
                            "(repeatable)")
    return top


def _payload(args) -> tuple[str, dict]:
    cmd = args.command
    if cmd == "verify":
        return "/verify", {"only": args.only}
    if cmd == "connection":
        body: dict = {"samples": args.samples, "seed": args.seed,
                      "tol": args.tol}
        if args.gamma:
            body["gamma"] = _read(args.gamma)
        else:
            spec: dict = {"params": dict(args.param)}
            if args.from_potential in _BUILTINS:
                spec["builtin"] = args.from_potential
            else:
                spec["text"] = _read(args.from_potential)
            body["potential"] = spec
        return "/connection", body

    body = {"params": dict(args.param), "samples": args.samples,
            "seed": args.seed, "tol": args.tol}
    if args.builtin:
        body["builtin"] = args.builtin
    else:
        body["text"] = _read(args.potential)
    if cmd == "analyze":
        body["at"] = args.at
        body["rel"] = args.rel
    elif cmd == "freeman":
        body["at"] = args.at
    return "/" + cmd, body


def _post(server: str | None, path: str, body: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            return client.post(path, json=body)

    from .service import app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://prekahler.internal",
                                     timeout=600.0) as client:
            return await client.post(path, json=body)

    return asyncio.run(go())


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    path, body = _payload(args)
    try:
        resp = _post(args.server, path, body)
    except httpx.HTTPError as exc:
        print("error (transport): %s" % exc, file=sys.stderr)
        return 1

    if resp.status_code != 200:
        try:
            err = resp.json()
        except ValueError:
            err = {}
        kind = err.get("error_class", "internal")
        message = err.get("message", resp.text.strip())
        print("error (%s): %s" % (kind, message), file=sys.stderr)
        return _EXIT.get(kind, 1)

    tree = resp.json()
    if args.json:
        Path(args.json).write_text(canonical_json(tree))
    if getattr(args, "csv", None):
        Path(args.csv).write_text(records_csv(tree.get("records", [])))

    if args.command == "verify":
        for rec in tree["records"]:
            print("%s %s: %s" % ("PASS" if rec["passed"] else "FAIL",
                                 rec["name"], rec["detail"]))
        agg = tree["aggregate"]
        print("%d/%d criteria passed" % (agg["passed"], agg["total"]))
        return 0 if agg["failed"] == 0 else 1

    sys.stdout.write(human_summary(tree))
    return 0


if __name__ == "__main__":
    sys.exit(main())
