"""Command-line front end: ``minmax-lab {gallery,reduce,solve,verify,pipeline,report}``."""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dynamics, gallery, io, kernels, reductions, sperner, verify
from .core import (
    AffineOperator,
    Certificate,
    CorrespondenceSpec,
    LinearVIInstance,
    MinMaxInstance,
    PolymatrixGame,
    QVIInstance,
    _plain,
)
from .errors import InfeasibleError, PromiseViolation, SchemaError

EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_PROMISE = 3
EXIT_USAGE = 64

GALLERY_NAMES = ("eq-not-vi", "irrational-kakutani", "nonexistence", "indep-set", "matching-pennies",
                 "random-polymatrix", "random-linearvi")
CONCEPTS = ("linearvi", "qvi", "kakutani", "local-minmax", "gda", "sgda", "global", "polymatrix")
METHODS = ("gda", "sgda", "extragradient", "sperner", "grid")
REDUCE_TARGETS = ("linearvi", "minmax-jc", "minmax-bilinear", "qvi", "vi")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# helpers


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([io.num(t) for t in text.split(",") if t.strip()], dtype=float)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse vector {text!r}") from exc


class _Inputs:
    """Loaded documents with their hashes, in the order they were read."""

    def __init__(self):
        self.items = []

    def load(self, path):
        doc, digest = io.load(path)
        self.items.append({"path": str(path), "kind": doc["kind"], "sha256": digest})
        return doc

    def to_list(self):
        return list(self.items)


def _emit(doc: dict, out, summary: str, quiet: bool) -> None:
    if out:
        io.save(doc, out)
    else:
        sys.stdout.write(io.dumps(doc))
    if summary and not quiet:
        print(summary, file=sys.stderr)


def _run_record(args, inputs: _Inputs) -> dict:
    return {"argv": list(args.argv), "version": __version__, "backend": kernels.BACKEND,
            "threads": args.threads}


def _cert_summary(cert: Certificate) -> str:
    verdict = "PASS" if cert.passed else "FAIL"
    return f"{verdict} {cert.concept} residual={cert.residual:.6g} method={cert.method}"


def _cert_exit(cert: Certificate) -> int:
    return EXIT_PASS if cert.passed else EXIT_FAIL


def _write_cert(args, cert: Certificate, inputs: _Inputs, extra=None) -> int:
    doc = io.certificate_doc(cert, inputs.to_list())
    doc["run"] = _plain(_run_record(args, inputs))
    if extra:
        doc.update(_plain(extra))
    _emit(doc, args.out, _cert_summary(cert), args.quiet)
    return _cert_exit(cert)


def _probe(doc):
    p = doc.get("probe")
    if p is None:
        return None
    return {k: io.arr(v) for k, v in p.items()}


def _point(args, doc, inputs: _Inputs) -> dict:
    pt = {}
    if args.candidate:
        pt.update(io.read_point(inputs.load(args.candidate)))
    for key in ("x", "y", "z"):
        v = getattr(args, key, None)
        if v is not None:
            pt[key] = _vector(v)
    if not pt:
        pt = _probe(doc) or {}
    if not pt:
        raise UsageError("no candidate point: pass a candidate document, --x/--y/--z, or use an instance with a probe")
    return pt


def _xy(pt, d):
    if "x" in pt and "y" in pt:
        return pt["x"], pt["y"]
    if "z" in pt and len(pt["z"]) == 2 * d:
        return pt["z"][:d], pt["z"][d:]
    raise UsageError("this concept needs x and y (or a joint z of length 2d)")


def _z(pt):
    if "z" in pt:
        return pt["z"]
    if "x" in pt and "y" in pt:
        return np.concatenate([pt["x"], pt["y"]])
    raise UsageError("this concept needs z (or x and y)")


def _as_qvi(obj, form: str, eps=None) -> QVIInstance:
    if isinstance(obj, QVIInstance):
        return obj
    if isinstance(obj, CorrespondenceSpec):
        d = obj.d
        return QVIInstance(obj, AffineOperator(np.zeros((d, d)), np.zeros(d)), 0.0 if eps is None else eps,
                           L=reductions.spec_lipschitz(obj), name=obj.name)
    if isinstance(obj, MinMaxInstance):
        if form == "joint":
            return reductions.minmax_to_vi(obj, eps)
        return reductions.minmax_to_qvi(obj, eps)
    if isinstance(obj, LinearVIInstance):
        d = obj.d
        spec = CorrespondenceSpec(d, (), 0.0, name="box")
        return QVIInstance(spec, AffineOperator(obj.D, obj.c), obj.rho if eps is None else eps, L=0.0, name="box-vi")
    raise UsageError(f"cannot read a {type(obj).__name__} as a QVI")


def _need(obj, cls, what):
    if not isinstance(obj, cls):
        raise UsageError(f"{what} needs a {cls.__name__} document, got {type(obj).__name__}")
    return obj


# ---------------------------------------------------------------------------
# gallery


def cmd_gallery(args) -> int:
    name = args.name
    if name == "eq-not-vi":
        inst, probe = gallery.eq_not_vi()
        doc = io.minmax_doc(inst, probe)
    elif name == "irrational-kakutani":
        nu = 0.05 if args.nu is None else args.nu
        doc = io.qvi_doc(gallery.irrational_kakutani_qvi(nu, 0.0 if args.eps is None else args.eps))
    elif name == "nonexistence":
        inst = gallery.nonexistence_instance(args.reading, 0.1 if args.eps is None else args.eps,
                                             0.0 if args.nu is None else args.nu)
        doc = io.minmax_doc(inst, (np.zeros(1), np.zeros(1)))
    elif name == "indep-set":
        edges = [(0, 1), (0, 2), (1, 2)] if args.edges is None else _edges(args.edges)
        n = args.n if args.n is not None else 1 + max(max(e) for e in edges)
        inst, zero = reductions.independent_set_localmin_instance(n, edges, args.k)
        doc = io.minmax_doc(inst, (zero, np.zeros(n)))
    elif name == "matching-pennies":
        doc = io.polymatrix_doc(gallery.matching_pennies())
    elif name == "random-polymatrix":
        doc = io.polymatrix_doc(gallery.random_polymatrix(args.n or 2, args.seed, args.max_degree))
    else:
        doc = io.linearvi_doc(gallery.random_linearvi(args.d, args.seed, args.monotone))
    doc["gallery"] = {"name": name, "version": gallery.GALLERY_VERSION}
    _emit(doc, args.out, f"wrote {doc['kind']} document '{name}'", args.quiet)
    return EXIT_PASS


def _edges(text: str):
    try:
        return [tuple(int(t) for t in e.split("-")) for e in text.split(",") if e.strip()]
    except ValueError as exc:
        raise UsageError(f"edges must look like 0-1,1-2 (got {text!r})") from exc


# ---------------------------------------------------------------------------
# reduce


def cmd_reduce(args) -> int:
    inputs = _Inputs()
    doc = inputs.load(args.input)
    kind = doc["kind"]
    src = args.source or kind
    if src != kind:
        raise UsageError(f"--from {src} does not match the document kind {kind}")
    obj = io.from_doc(doc)
    prior = [reductions.ReductionTrace.from_dict(t) for t in doc.get("trace", [])]
    to = args.to
    if kind == "polymatrix" and to == "linearvi":
        if args.eps_star is not None:
            obj = PolymatrixGame(obj.n, obj.edges, obj.payoffs, args.eps_star, obj.degree_bounded)
        vi, tr = reductions.polymatrix_to_linearvi(obj)
        out = io.linearvi_doc(vi, prior + [tr])
    elif kind == "linearvi" and to in ("minmax-jc", "minmax-bilinear"):
        fn = reductions.linearvi_to_jc_minmax if to == "minmax-jc" else reductions.linearvi_to_bilinear_minmax
        inst, tr = fn(obj, args.gamma)
        out = io.minmax_doc(inst, trace=prior + [tr])
    elif kind == "minmax" and to in ("qvi", "vi"):
        qvi = reductions.minmax_to_vi(obj) if to == "vi" else reductions.minmax_to_qvi(obj)
        tr = reductions.ReductionTrace("minmax", to, {"nu": obj.nu, "eps": obj.eps}, "split-z", {"d": obj.d})
        out = io.qvi_doc(qvi, prior + [tr])
    elif kind == "gnep" and to == "qvi":
        tr = reductions.ReductionTrace("gnep", "qvi", {"nu": obj.nu}, "identity", {})
        out = io.qvi_doc(obj, prior + [tr])
    else:
        raise UsageError(f"no reduction from {kind} to {to}")
    _emit(out, args.output, f"reduced {kind} -> {to}", args.quiet)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    inputs = _Inputs()
    doc = inputs.load(args.input)
    obj = io.from_doc(doc)
    m = args.method
    t0 = time.perf_counter()
    if m in ("gda", "sgda"):
        inst = _need(obj, MinMaxInstance, m)
        d = inst.d
        start = _z(_point(args, doc, inputs)) if (args.x or args.z or args.candidate or "probe" in doc) \
            else np.full(2 * d, 0.5)
        res = dynamics.iterate(inst, start, m, args.damping, args.max_iters, args.target)
        cert = verify.verify_gda_fixed_point(inst, res.x, res.y, args.target, m)
        extra = {"solver": {"iterations": res.iterations, "converged": res.converged,
                            "best_iteration": res.best_iteration}}
    elif m == "extragradient":
        vi = _need(obj, LinearVIInstance, m)
        res = dynamics.extragradient_vi(vi.D, vi.c, tol=args.target, max_iters=args.max_iters)
        cert = verify.verify_linearvi(vi, res.z)
        extra = {"solver": {"iterations": res.iterations, "converged": res.converged, "step": res.step}}
    elif m == "sperner":
        qvi = _as_qvi(obj, args.form, args.eps)
        params = sperner.SpernerSolverParams(args.eta, args.gamma, args.grid, L=max(qvi.L, 1e-12), d=qvi.d)
        cert = sperner.solve_qvi(qvi, params, args.eps, args.nu, threads=args.threads, empty=args.empty)
        extra = {"solver": {"grid": args.grid, "eta": args.eta, "gamma": args.gamma, "empty": args.empty}}
        zero_op = isinstance(qvi.F, AffineOperator) and not np.any(qvi.F.D) and not np.any(qvi.F.c)
        if isinstance(obj, CorrespondenceSpec) or zero_op:
            kak = verify.verify_kakutani(qvi.correspondence, cert.point["z"], args.nu)
            extra["kakutani"] = kak.to_dict()
    elif m == "grid":
        inst = _need(obj, MinMaxInstance, m)
        cert = verify.grid_search_local_minmax(inst, args.grid, args.dev_steps)
        extra = {"solver": {"grid": args.grid, "dev_steps": args.dev_steps}}
    else:
        raise UsageError(f"unknown method {m}")
    extra["solver"]["method"] = m
    extra["solver"]["seconds"] = time.perf_counter() - t0
    return _write_cert(args, cert, inputs, extra)


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    inputs = _Inputs()
    doc = inputs.load(args.input)
    obj = io.from_doc(doc)
    pt = _point(args, doc, inputs)
    c = args.concept
    if c == "linearvi":
        vi = _need(obj, LinearVIInstance, c)
        cert = verify.verify_linearvi(vi, _z(pt), args.eps, args.single_component)
    elif c == "qvi":
        qvi = _as_qvi(obj, args.form, args.eps)
        cert = verify.verify_qvi(qvi, _z(pt), args.eps, args.nu)
    elif c == "kakutani":
        spec = obj.correspondence if isinstance(obj, QVIInstance) else _need(obj, CorrespondenceSpec, c)
        cert = verify.verify_kakutani(spec, _z(pt), args.nu)
    elif c == "local-minmax":
        inst = _need(obj, MinMaxInstance, c)
        x, y = _xy(pt, inst.d)
        cert = verify.verify_local_minmax(inst, x, y, args.grid_step, args.eps, args.delta, args.nu)
    elif c in ("gda", "sgda"):
        inst = _need(obj, MinMaxInstance, c)
        x, y = _xy(pt, inst.d)
        cert = verify.verify_gda_fixed_point(inst, x, y, args.alpha, c)
    elif c == "global":
        inst = _need(obj, MinMaxInstance, c)
        x, y = _xy(pt, inst.d)
        cert = verify.verify_globalization(inst, x, y, args.eps, args.delta,
                                           0.01 if args.grid_step is None else args.grid_step)
    elif c == "polymatrix":
        game = _need(obj, PolymatrixGame, c)
        cert = reductions.linearvi_solution_to_polymatrix(_z(pt), game)
    else:
        raise UsageError(f"unknown concept {c}")
    return _write_cert(args, cert, inputs)


# ---------------------------------------------------------------------------
# pipeline


def cmd_pipeline(args) -> int:
    inputs = _Inputs()
    if args.game:
        game = _need(io.from_doc(inputs.load(args.game)), PolymatrixGame, "pipeline")
    else:
        game = gallery.random_polymatrix(args.n, args.seed, args.max_degree)
    if args.eps_star is not None:
        game = PolymatrixGame(game.n, game.edges, game.payoffs, args.eps_star, game.degree_bounded)
    gadgets = ("jc", "bilinear") if args.gadget == "both" else (args.gadget,)
    stages = []
    passed = True
    for g in gadgets:
        t0 = time.perf_counter()
        res = reductions.polymatrix_pipeline(game, g, args.gamma, args.grid, args.dev_steps, args.grid_slack)
        st = {"gadget": g, "passed": bool(res["passed"]), "regret": res["regret"],
              "tolerance": game.eps_star + args.grid_slack, "seconds": time.perf_counter() - t0,
              "search": res["search"].to_dict(), "traces": [t.to_dict() for t in res["traces"]]}
        if "pullback" in res:
            st["pullback"] = res["pullback"].to_dict()
            st["polymatrix"] = res["polymatrix"].to_dict()
        stages.append(st)
        passed &= bool(res["passed"])
    report = {"format": io.FORMAT, "kind": "report", "command": "pipeline", "passed": passed,
              "seed": args.seed, "gamma": args.gamma, "game": io.polymatrix_doc(game), "stages": stages,
              "run": _run_record(args, inputs)}
    lines = [f"{'PASS' if s['passed'] else 'FAIL'} pipeline gadget={s['gadget']} regret={s['regret']:.6g} "
             f"tolerance={s['tolerance']:.6g}" for s in stages]
    _emit(_plain(report), args.out, "\n".join(lines), args.quiet)
    return EXIT_PASS if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# report


def _summarise(doc: dict) -> list:
    kind = doc["kind"]
    if kind == "certificate":
        return [{"concept": doc["concept"], "passed": doc["passed"], "residual": doc["residual"],
                 "method": doc["method"]}]
    if kind == "report":
        rows = [{"concept": doc.get("command"), "passed": doc["passed"], "residual": None, "method": "report"}]
        # pipeline stages: residual column carries the pulled-back regret
        for s in doc.get("stages", []):
            rows.append({"concept": f"{doc.get('command')}/{s.get('gadget')}", "passed": s.get("passed"),
                         "residual": s.get("regret"), "method": "regret"})
        return rows
    return [{"concept": kind, "passed": None, "residual": None, "method": "instance"}]


def cmd_report(args) -> int:
    inputs = _Inputs()
    rows = []
    for path in args.inputs:
        doc = inputs.load(path)
        for row in _summarise(doc):
            row["path"] = str(path)
            rows.append(row)
    verdicts = [r["passed"] for r in rows if r["passed"] is not None]
    passed = all(verdicts)
    report = {"format": io.FORMAT, "kind": "report", "command": "report", "passed": passed, "entries": rows,
              "run": _run_record(args, inputs)}
    width = max([len("document")] + [len(r["path"]) for r in rows])
    lines = [f"{'document':<{width}}  {'verdict':<7}  {'concept':<18}  {'residual':>12}  method"]
    for r in rows:
        verdict = "-" if r["passed"] is None else ("PASS" if r["passed"] else "FAIL")
        res = "" if r["residual"] is None else f"{io.num(r['residual']) if r['residual'] != 'nan' else math.nan:.6g}"
        lines.append(f"{r['path']:<{width}}  {verdict:<7}  {str(r['concept']):<18}  {res:>12}  {r['method']}")
    text = "\n".join(lines)
    if args.text:
        Path(args.text).write_text(text + "\n", encoding="utf-8")
    _emit(_plain(report), args.out, text, args.quiet)
    return EXIT_PASS if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def _default_threads() -> int:
    raw = os.environ.get("MINMAX_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker threads for the Sperner colouring (default: $MINMAX_LAB_THREADS or 1)")
    common.add_argument("--quiet", action="store_true", help="suppress the text summary on stderr")

    p = _Parser(prog="minmax-lab", description="Constrained min-max, VI and QVI instances, solvers and verifiers.")
    p.add_argument("--version", action="version", version=f"minmax-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gallery", parents=[common], help="emit a named instance")
    g.add_argument("--name", required=True, choices=GALLERY_NAMES)
    g.add_argument("--out")
    g.add_argument("--reading", choices=gallery.NONEXISTENCE_READINGS, default="claimed")
    g.add_argument("--eps", type=float)
    g.add_argument("--nu", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--edges", help="edge list like 0-1,1-2 for indep-set")
    g.add_argument("--max-degree", type=int, default=3)
    g.add_argument("--monotone", action="store_true")
    g.set_defaults(func=cmd_gallery)

    r = sub.add_parser("reduce", parents=[common], help="transform an instance document")
    r.add_argument("--from", dest="source", choices=("polymatrix", "linearvi", "minmax", "gnep"))
    r.add_argument("--to", required=True, choices=REDUCE_TARGETS)
    r.add_argument("--gamma", type=float, default=1.0)
    r.add_argument("--eps-star", type=float)
    r.add_argument("input")
    r.add_argument("output", nargs="?")
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("solve", parents=[common], help="run a solver and certify its output")
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--out")
    s.add_argument("--damping", type=float, default=1.0)
    s.add_argument("--max-iters", type=int, default=10000)
    s.add_argument("--target", type=float, default=1e-9, help="residual target (also the certificate alpha)")
    s.add_argument("--grid", type=int, default=128)
    s.add_argument("--eta", type=float, default=1.0)
    s.add_argument("--gamma", type=float, default=0.02)
    s.add_argument("--empty", choices=sperner.EMPTY_POLICIES, default="relax")
    s.add_argument("--form", choices=("product", "joint"), default="product")
    s.add_argument("--dev-steps", type=int, default=6)
    s.add_argument("--eps", type=float)
    s.add_argument("--nu", type=float)
    s.add_argument("--candidate")
    s.add_argument("--x")
    s.add_argument("--y")
    s.add_argument("--z")
    s.add_argument("input")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", parents=[common], help="certify a candidate point")
    v.add_argument("--concept", required=True, choices=CONCEPTS)
    v.add_argument("--out")
    v.add_argument("--grid-step", type=float)
    v.add_argument("--eps", type=float)
    v.add_argument("--delta", type=float)
    v.add_argument("--nu", type=float)
    v.add_argument("--alpha", type=float, default=1e-9)
    v.add_argument("--form", choices=("product", "joint"), default="product")
    v.add_argument("--single-component", action="store_true")
    v.add_argument("--x")
    v.add_argument("--y")
    v.add_argument("--z")
    v.add_argument("input")
    v.add_argument("candidate", nargs="?")
    v.set_defaults(func=cmd_verify)

    q = sub.add_parser("pipeline", parents=[common], help="polymatrix -> linear VI -> min-max -> solve -> pull back")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--gamma", type=float, default=1.0)
    q.add_argument("--n", type=int, default=2)
    q.add_argument("--max-degree", type=int, default=3)
    q.add_argument("--gadget", choices=("jc", "bilinear", "both"), default="both")
    q.add_argument("--grid", type=int, default=200)
    q.add_argument("--dev-steps", type=int, default=6)
    q.add_argument("--grid-slack", type=float, default=0.02)
    q.add_argument("--eps-star", type=float)
    q.add_argument("--game", help="polymatrix document to use instead of a random game")
    q.add_argument("--out")
    q.set_defaults(func=cmd_pipeline)

    t = sub.add_parser("report", parents=[common], help="summarise certificate and report documents")
    t.add_argument("inputs", nargs="+")
    t.add_argument("--out")
    t.add_argument("--text", help="also write the text table to this file")
    t.set_defaults(func=cmd_report)
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    if args.threads < 1:
        print("minmax-lab: error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, SchemaError) as exc:
        print(f"minmax-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PromiseViolation as exc:
        print(f"minmax-lab: promise violation: {exc}", file=sys.stderr)
        return EXIT_PROMISE
    except InfeasibleError as exc:
        print(f"minmax-lab: infeasible: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"minmax-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
