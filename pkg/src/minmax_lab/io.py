"""JSON documents (format 1): serialisation, parsing and schema validation."""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from .core import (
    AffineOperator,
    BilinearConstraintSet,
    Certificate,
    ConstraintPiece,
    CorrespondenceSpec,
    LinearVIInstance,
    MinMaxInstance,
    PolymatrixGame,
    QuadraticObjective,
    QVIInstance,
    _plain,
)
from .errors import SchemaError

FORMAT = 1
KINDS = ("minmax", "linearvi", "correspondence", "qvi", "polymatrix", "gnep", "candidate", "certificate", "report")

# ---------------------------------------------------------------------------
# schema

_NUM = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\.\d+)?(\s*/\s*\d+)?\s*$"}]}
_VEC = {"type": "array", "items": _NUM}
_MAT = {"type": "array", "items": _VEC}
_PIECE = {
    "type": "object",
    "required": ["B", "b1", "b2", "c"],
    "properties": {"B": _MAT, "b1": _VEC, "b2": _VEC, "c": _NUM},
}
_GSET = {
    "type": "object",
    "required": ["pieces"],
    "properties": {"owner": {"enum": [1, 2]}, "pieces": {"type": "array", "items": _PIECE, "minItems": 1}},
}
_OBJECTIVE = {
    "oneOf": [
        {"type": "object", "required": ["M", "h"], "properties": {"M": _MAT, "h": _VEC, "k": _NUM},
         "not": {"required": ["evaluator"]}},
        {"type": "object", "required": ["evaluator", "D", "c"],
         "properties": {"evaluator": {"enum": ["gadget-jc", "gadget-bilinear"]}, "D": _MAT, "c": _VEC}},
    ]
}
_POINT = {"type": "object", "additionalProperties": _VEC}

SCHEMAS = {
    "minmax": {
        "type": "object",
        "required": ["d", "objective", "constraint_kind", "eps", "delta"],
        "properties": {
            "d": {"type": "integer", "minimum": 1},
            "objective": _OBJECTIVE,
            "constraint_kind": {"enum": ["product", "jointly-convex", "bilinear"]},
            "joint": _GSET,
            "g1": _GSET,
            "g2": _GSET,
            "eps": _NUM, "delta": _NUM, "nu": _NUM, "G": _NUM, "L": _NUM,
            "lr": {"type": "boolean"},
            "probe": _POINT,
        },
        "if": {"properties": {"constraint_kind": {"const": "jointly-convex"}}},
        "then": {"required": ["joint"]},
        "else": {"required": ["g1", "g2"]},
    },
    "linearvi": {
        "type": "object",
        "required": ["D", "c", "rho"],
        "properties": {"D": _MAT, "c": _VEC, "rho": _NUM, "norm_certified": {"type": "boolean"}},
    },
    "correspondence": {
        "type": "object",
        "required": ["d", "rows"],
        "properties": {"d": {"type": "integer", "minimum": 1}, "rows": {"type": "array", "items": _PIECE}, "nu": _NUM},
    },
    "qvi": {
        "type": "object",
        "required": ["correspondence", "operator", "eps"],
        "properties": {
            "correspondence": {"type": "object", "required": ["d", "rows"]},
            "operator": {"type": "object", "required": ["type", "D", "c"],
                         "properties": {"type": {"const": "affine"}, "D": _MAT, "c": _VEC}},
            "eps": _NUM, "L": _NUM, "G": _NUM,
        },
    },
    "polymatrix": {
        "type": "object",
        "required": ["n", "edges", "eps_star"],
        "properties": {
            "n": {"type": "integer", "minimum": 1},
            "eps_star": _NUM,
            "edges": {"type": "array", "items": {
                "type": "object", "required": ["edge", "A_ij", "A_ji"],
                "properties": {"edge": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                               "A_ij": _MAT, "A_ji": _MAT}}},
        },
    },
    "gnep": {
        "type": "object",
        "required": ["n", "l", "utilities", "constraints"],
        "properties": {
            "n": {"type": "integer", "minimum": 1}, "l": {"type": "integer", "minimum": 1},
            "utilities": {"type": "array", "items": {"type": "object", "required": ["M", "h"]}},
            "constraints": {"type": "array", "items": {"type": "array", "items": {
                "type": "object", "required": ["B", "b1", "b2", "c"]}}},
            "nu": _NUM, "eps": _NUM,
        },
    },
    "candidate": {"type": "object", "anyOf": [{"required": ["x", "y"]}, {"required": ["z"]}],
                  "properties": {"x": _VEC, "y": _VEC, "z": _VEC}},
    "certificate": {"type": "object", "required": ["concept", "passed", "residual", "method"]},
    "report": {"type": "object", "required": ["command", "passed"]},
}


def validate(doc) -> None:
    if not isinstance(doc, dict):
        raise SchemaError("document must be a JSON object")
    if doc.get("format") != FORMAT:
        raise SchemaError(f"unsupported format {doc.get('format')!r}; expected {FORMAT}")
    kind = doc.get("kind")
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown kind {kind!r}")
    try:
        jsonschema.validate(doc, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaError(f"{kind} document invalid at '{path}': {exc.message}") from None


# ---------------------------------------------------------------------------
# numbers


def num(v) -> float:
    if isinstance(v, str):
        return float(Fraction(v.replace(" ", "")))
    return float(v)


def arr(v) -> np.ndarray:
    if isinstance(v, list):
        return np.array([arr(t) if isinstance(t, list) else num(t) for t in v], dtype=float)
    return np.array(num(v))


# ---------------------------------------------------------------------------
# writers


def _piece(p: ConstraintPiece) -> dict:
    return {"B": p.B.tolist(), "b1": p.b1.tolist(), "b2": p.b2.tolist(), "c": p.c}


def _gset(g: BilinearConstraintSet) -> dict:
    return {"owner": g.owner, "pieces": [_piece(p) for p in g.pieces]}


def _doc(kind: str, body: dict) -> dict:
    out = {"format": FORMAT, "kind": kind}
    out.update(_plain(body))
    return out


def minmax_doc(inst: MinMaxInstance, probe=None, trace=None) -> dict:
    obj = inst.objective
    if not isinstance(obj, QuadraticObjective):
        raise SchemaError("only quadratic objectives can be serialised")
    if obj.source is not None:
        objective = dict(obj.source)
    else:
        objective = {"M": obj.M.tolist(), "h": obj.h.tolist(), "k": obj.k}
    body = {"name": inst.name, "d": inst.d, "objective": objective, "constraint_kind": inst.kind,
            "eps": inst.eps, "delta": inst.delta, "nu": inst.nu, "G": inst.G, "L": inst.L, "lr": inst.lr,
            "claimed": inst.claimed}
    if inst.kind == "jointly-convex":
        body["joint"] = _gset(inst.g1)
    else:
        body["g1"] = _gset(inst.g1)
        body["g2"] = _gset(inst.g2)
    if probe is not None:
        body["probe"] = {"x": np.ravel(probe[0]).tolist(), "y": np.ravel(probe[1]).tolist()}
    if trace is not None:
        body["trace"] = [t.to_dict() for t in trace]
    return _doc("minmax", body)


def linearvi_doc(vi: LinearVIInstance, trace=None) -> dict:
    body = {"D": vi.D.tolist(), "c": vi.c.tolist(), "rho": vi.rho, "norm_certified": vi.norm_certified}
    if trace is not None:
        body["trace"] = [t.to_dict() for t in trace]
    return _doc("linearvi", body)


def correspondence_doc(spec: CorrespondenceSpec) -> dict:
    return _doc("correspondence", {"name": spec.name, "d": spec.d, "nu": spec.nu,
                                   "rows": [_piece(r) for r in spec.rows]})


def qvi_doc(qvi: QVIInstance, trace=None) -> dict:
    if not isinstance(qvi.F, AffineOperator):
        raise SchemaError("only affine operators can be serialised")
    corr = correspondence_doc(qvi.correspondence)
    corr.pop("format")
    corr.pop("kind")
    body = {"name": qvi.name, "correspondence": corr, "operator": {"type": "affine", "D": qvi.F.D.tolist(),
            "c": qvi.F.c.tolist()}, "eps": qvi.eps, "L": qvi.L, "G": qvi.G, "claimed": qvi.claimed}
    if trace is not None:
        body["trace"] = [t.to_dict() for t in trace]
    return _doc("qvi", body)


def polymatrix_doc(game: PolymatrixGame) -> dict:
    edges = [{"edge": [i, j], "A_ij": game.payoffs[(i, j)].tolist(), "A_ji": game.payoffs[(j, i)].tolist()}
             for i, j in game.edges]
    return _doc("polymatrix", {"n": game.n, "edges": edges, "eps_star": game.eps_star,
                               "degree_bounded": game.degree_bounded})


def candidate_doc(**point) -> dict:
    return _doc("candidate", {k: np.ravel(v).tolist() for k, v in point.items()})


def certificate_doc(cert: Certificate, inputs=None) -> dict:
    body = cert.to_dict()
    if inputs is not None:
        body["inputs"] = inputs
    return _doc("certificate", body)


def to_doc(obj, **kw) -> dict:
    if isinstance(obj, MinMaxInstance):
        return minmax_doc(obj, **kw)
    if isinstance(obj, LinearVIInstance):
        return linearvi_doc(obj, **kw)
    if isinstance(obj, QVIInstance):
        return qvi_doc(obj, **kw)
    if isinstance(obj, CorrespondenceSpec):
        return correspondence_doc(obj)
    if isinstance(obj, PolymatrixGame):
        return polymatrix_doc(obj)
    if isinstance(obj, Certificate):
        return certificate_doc(obj, **kw)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# ---------------------------------------------------------------------------
# readers


def _read_piece(p) -> ConstraintPiece:
    return ConstraintPiece(arr(p["B"]), arr(p["b1"]), arr(p["b2"]), num(p["c"]))


def _read_gset(g, owner=None) -> BilinearConstraintSet:
    return BilinearConstraintSet(tuple(_read_piece(p) for p in g["pieces"]), owner or g.get("owner", 1))


def _read_objective(o, d) -> QuadraticObjective:
    from .reductions import bilinear_objective, jc_objective

    if "evaluator" in o:
        D, c = arr(o["D"]), arr(o["c"])
        return jc_objective(D, c) if o["evaluator"] == "gadget-jc" else bilinear_objective(D, c)
    return QuadraticObjective(d, arr(o["M"]), arr(o["h"]), num(o.get("k", 0)))


def _opt(doc, key):
    v = doc.get(key)
    return None if v is None else num(v)


def read_minmax(doc) -> MinMaxInstance:
    d = int(doc["d"])
    obj = _read_objective(doc["objective"], d)
    kind = doc["constraint_kind"]
    common = dict(eps=num(doc["eps"]), delta=num(doc["delta"]), nu=num(doc.get("nu", 0)), G=_opt(doc, "G"),
                  L=_opt(doc, "L"), lr=bool(doc.get("lr", False)), name=doc.get("name", ""),
                  claimed=doc.get("claimed", {}))
    if kind == "jointly-convex":
        return MinMaxInstance.jointly_convex(obj, _read_gset(doc["joint"]), **common)
    return MinMaxInstance(d, obj, _read_gset(doc["g1"], 1), _read_gset(doc["g2"], 2), kind=kind, **common)


def read_linearvi(doc) -> LinearVIInstance:
    return LinearVIInstance(arr(doc["D"]), arr(doc["c"]), num(doc["rho"]), bool(doc.get("norm_certified", False)))


def read_correspondence(doc) -> CorrespondenceSpec:
    return CorrespondenceSpec(int(doc["d"]), tuple(_read_piece(r) for r in doc["rows"]), num(doc.get("nu", 0)),
                              doc.get("name", ""))


def read_qvi(doc) -> QVIInstance:
    spec = read_correspondence(doc["correspondence"])
    op = doc["operator"]
    return QVIInstance(spec, AffineOperator(arr(op["D"]), arr(op["c"])), num(doc["eps"]), num(doc.get("L", 1.0)),
                       _opt(doc, "G"), doc.get("name", ""), doc.get("claimed", {}))


def read_polymatrix(doc) -> PolymatrixGame:
    payoffs = {}
    edges = []
    for e in doc["edges"]:
        i, j = e["edge"]
        edges.append((i, j))
        payoffs[(i, j)] = arr(e["A_ij"])
        payoffs[(j, i)] = arr(e["A_ji"])
    return PolymatrixGame(int(doc["n"]), tuple(edges), payoffs, num(doc["eps_star"]),
                          bool(doc.get("degree_bounded", True)))


def read_gnep(doc) -> QVIInstance:
    from .reductions import gnep_to_qvi

    utils = [(arr(u["M"]), arr(u["h"]), num(u.get("k", 0))) for u in doc["utilities"]]
    cons = [[(arr(r["B"]), arr(r["b1"]), arr(r["b2"]), num(r["c"])) for r in rows] for rows in doc["constraints"]]
    return gnep_to_qvi(int(doc["n"]), int(doc["l"]), utils, cons, num(doc.get("nu", 0)), num(doc.get("eps", 0)))


READERS = {
    "minmax": read_minmax,
    "linearvi": read_linearvi,
    "correspondence": read_correspondence,
    "qvi": read_qvi,
    "polymatrix": read_polymatrix,
    "gnep": read_gnep,
}


def from_doc(doc):
    validate(doc)
    kind = doc["kind"]
    if kind not in READERS:
        raise SchemaError(f"documents of kind {kind!r} do not describe an instance")
    try:
        return READERS[kind](doc)
    except (ValueError, KeyError) as exc:
        raise SchemaError(f"invalid {kind} document: {exc}") from exc


def read_point(doc):
    validate(doc)
    if doc["kind"] != "candidate":
        raise SchemaError("expected a candidate document")
    return {k: arr(v) for k, v in doc.items() if k in ("x", "y", "z")}


# ---------------------------------------------------------------------------
# files


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def load(path):
    """Return ``(document, sha256 of the raw bytes)``."""
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: not valid UTF-8 JSON ({exc})") from None
    validate(doc)
    return doc, hashlib.sha256(raw).hexdigest()


def save(doc, path) -> str:
    text = dumps(doc)
    Path(path).write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
