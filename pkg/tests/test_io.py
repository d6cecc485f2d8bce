import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from minmax_lab import gallery, io, reductions as R
from minmax_lab.core import Certificate
from minmax_lab.errors import SchemaError


def _same_minmax(a, b, rng):
    assert a.d == b.d and a.kind == b.kind
    assert (a.eps, a.delta, a.nu, a.G, a.L) == (b.eps, b.delta, b.nu, b.G, b.L)
    for _ in range(20):
        x, y = rng.random(a.d), rng.random(a.d)
        assert a.objective.value(x, y) == pytest.approx(b.objective.value(x, y), abs=1e-14)
        assert a.g1.value(x, y) == pytest.approx(b.g1.value(x, y), abs=1e-14)
        assert a.g2.value(x, y) == pytest.approx(b.g2.value(x, y), abs=1e-14)


def test_minmax_round_trip(rng):
    inst, probe = gallery.eq_not_vi()
    doc = json.loads(io.dumps(io.minmax_doc(inst, probe)))
    _same_minmax(inst, io.from_doc(doc), rng)
    for reading in gallery.NONEXISTENCE_READINGS:
        inst = gallery.nonexistence_instance(reading)
        _same_minmax(inst, io.from_doc(json.loads(io.dumps(io.minmax_doc(inst)))), rng)


@pytest.mark.parametrize("make", [R.linearvi_to_jc_minmax, R.linearvi_to_bilinear_minmax])
def test_gadget_round_trip_keeps_evaluator(make, rng):
    vi, _ = R.polymatrix_to_linearvi(gallery.random_polymatrix(3, 1))
    inst, trace = make(vi, 1.0)
    doc = json.loads(io.dumps(io.minmax_doc(inst, trace=[trace])))
    assert "evaluator" in doc["objective"]
    _same_minmax(inst, io.from_doc(doc), rng)
    back = R.ReductionTrace.from_dict(doc["trace"][0])
    assert back.to_dict() == trace.to_dict()


def test_linearvi_qvi_polymatrix_round_trip(rng):
    vi = gallery.random_linearvi(4, 2)
    vi2 = io.from_doc(io.linearvi_doc(vi))
    assert np.array_equal(vi.D, vi2.D) and np.array_equal(vi.c, vi2.c) and vi.rho == vi2.rho

    qvi = gallery.irrational_kakutani_qvi(0.05)
    qvi2 = io.from_doc(json.loads(io.dumps(io.qvi_doc(qvi))))
    for _ in range(10):
        z = rng.random(2)
        assert np.array_equal(qvi.F(z), qvi2.F(z))
        assert qvi.correspondence.at(z, 0.0).contains(z) == qvi2.correspondence.at(z, 0.0).contains(z)

    game = gallery.random_polymatrix(6, 4)
    game2 = io.from_doc(io.polymatrix_doc(game))
    assert game2.edges == game.edges
    for key, A in game.payoffs.items():
        assert np.array_equal(A, game2.payoffs[key])


def test_rational_strings_parse_exactly():
    assert io.num("1/3") == 1 / 3
    assert io.num(" -7 / 2 ") == -3.5
    assert io.num("0.25") == 0.25
    assert np.array_equal(io.arr([["1/2", 1], [0, "-3/4"]]), [[0.5, 1.0], [0.0, -0.75]])


def test_rational_strings_in_documents():
    doc = {"format": 1, "kind": "linearvi", "D": [["1/2", 0], [0, "1/2"]], "c": ["-1/3", "1/3"], "rho": "1/10"}
    vi = io.from_doc(doc)
    assert vi.rho == 0.1 and vi.c[0] == -1 / 3


@given(st.fractions(min_value=-100, max_value=100, max_denominator=1000))
def test_rational_string_property(f):
    assert io.num(f"{f.numerator}/{f.denominator}") == float(f)


@pytest.mark.parametrize("doc, fragment", [
    ([], "JSON object"),
    ({"kind": "linearvi"}, "format"),
    ({"format": 2, "kind": "linearvi"}, "format"),
    ({"format": 1, "kind": "banana"}, "unknown kind"),
    ({"format": 1, "kind": "linearvi", "D": [[1]], "c": [0]}, "rho"),
    ({"format": 1, "kind": "linearvi", "D": [["x"]], "c": [0], "rho": 0.1}, "D"),
])
def test_schema_errors(doc, fragment):
    with pytest.raises(SchemaError, match=fragment):
        io.from_doc(doc)


def test_non_instance_kinds_rejected():
    with pytest.raises(SchemaError):
        io.from_doc(io.candidate_doc(z=[0.1, 0.2]))
    with pytest.raises(SchemaError):
        io.read_point(io.linearvi_doc(gallery.random_linearvi(2, 0)))
    assert np.array_equal(io.read_point(io.candidate_doc(x=[1], y=[0]))["x"], [1.0])


def test_load_save_and_hash(tmp_path):
    doc = io.linearvi_doc(gallery.random_linearvi(3, 0))
    path = tmp_path / "vi.json"
    digest = io.save(doc, path)
    loaded, digest2 = io.load(path)
    assert loaded == json.loads(io.dumps(doc)) and digest == digest2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(SchemaError, match="not valid"):
        io.load(bad)


def test_certificate_doc_is_valid():
    cert = Certificate("qvi", False, -0.8, {"z": np.array([1.0, 0.0])}, "probe", {"eps": 0.1}, {})
    doc = json.loads(io.dumps(io.certificate_doc(cert, inputs=[{"path": "a", "kind": "qvi", "sha256": "0"}])))
    io.validate(doc)
    assert doc["passed"] is False and doc["residual"] == -0.8


def test_non_finite_numbers_are_plain_json():
    cert = Certificate("local-minmax", False, float("nan"), {}, "grid-search", {}, {"x": float("inf")})
    text = io.dumps(io.certificate_doc(cert))
    json.loads(text)
    assert "NaN" not in text and "Infinity" not in text
