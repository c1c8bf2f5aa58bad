import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catbounds.catalog import example_model, example_weights, published_claims
from catbounds.errors import InvalidWeightsError, ModelValidationError
from catbounds.model import WeightSequence
from catbounds.schema import (
    ModelSpec,
    csv_text,
    dump_spec,
    load_spec,
    model_from_json,
    model_to_json,
    parse_spec,
    parse_weights,
    timefn_from_json,
    timefn_to_json,
    write_atomic,
)

from _models import random_model

T = np.linspace(0.0, 3.0, 31)


def _same_rates(a, b, N=8):
    for t in (0.0, 0.37, 1.9):
        for j in range(N + 1):
            assert a.total_outflow(j, t) == pytest.approx(b.total_outflow(j, t), abs=1e-14)


@pytest.mark.parametrize("variant", ["published", "corrected"])
def test_example_round_trip(variant):
    spec = ModelSpec(example_model(variant), example_weights(), published_claims())
    data = json.loads(json.dumps(dump_spec(spec)))
    back = parse_spec(data)
    assert dump_spec(back) == data
    _same_rates(back.model, spec.model)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_model_round_trip(seed):
    model = random_model(np.random.default_rng(seed), 8)
    data = json.loads(json.dumps(model_to_json(model)))
    back = model_from_json(data)
    assert model_to_json(back) == data
    _same_rates(back, model)


@pytest.mark.parametrize("fn", [
    {"kind": "constant", "value": 1.5},
    {"kind": "trig_poly", "offset": 2.0, "terms": [{"cos": 1.0, "sin": 0.5, "freq": 2.0}]},
    {"kind": "piecewise_constant", "breakpoints": [0.5], "values": [1.0, 2.0], "period": 1.0},
    {"kind": "tabulated", "times": [0.0, 1.0], "values": [0.0, 1.0]},
])
def test_time_function_round_trip(fn):
    f = timefn_from_json(fn)
    g = timefn_from_json(timefn_to_json(f))
    assert np.array_equal(f.evaluate(T), g.evaluate(T))


@pytest.mark.parametrize("bad", [
    {"kind": "constant", "value": 1.0, "extra": 2},
    {"kind": "constant"},
    {"kind": "spline", "value": 1.0},
    {"kind": "constant", "value": "1"},
    {"kind": "constant", "value": -1.0},
    {"kind": "constant", "value": 1.0, "signed": True},
    [1.0],
])
def test_time_function_rejects(bad):
    with pytest.raises(ModelValidationError):
        timefn_from_json(bad)


def test_unknown_model_key_rejected():
    data = model_to_json(example_model("corrected"))
    data["lamda"] = data["lambda"]
    with pytest.raises(ModelValidationError, match="lamda"):
        model_from_json(data)


def test_unknown_spec_key_rejected():
    with pytest.raises(ModelValidationError):
        parse_spec({"model": model_to_json(example_model("corrected")), "notes": "x"})


def test_mu_and_services_are_exclusive():
    data = model_to_json(example_model("corrected"))
    data["services"] = [{"from": 1, "size": 1, "rate": {"kind": "constant", "value": 1.0}}]
    with pytest.raises(ModelValidationError):
        model_from_json(data)


def test_invalid_json_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(ModelValidationError, match="invalid JSON"):
        load_spec(path)


@pytest.mark.parametrize("arg,first", [("linear", [1, 2, 3]), ("one", [1, 1, 1]),
                                       ("geometric:2", [1, 2, 4])])
def test_parse_weights(arg, first):
    assert np.array_equal(parse_weights(arg).d(np.arange(3)), first)


def test_weights_from_file(tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps({"kind": "explicit", "values": [1.0, 3.0],
                                "tail_slope": 2.0, "tail_intercept": 1.0}))
    w = parse_weights(f"file:{path}")
    assert np.array_equal(w.d(np.arange(4)), [1.0, 3.0, 5.0, 7.0])


@pytest.mark.parametrize("arg", ["quadratic", "geometric:x", "geometric:0.5", "file:/nonexistent"])
def test_parse_weights_rejects(arg):
    with pytest.raises(InvalidWeightsError):
        parse_weights(arg)


def test_weights_in_spec():
    data = {"model": model_to_json(example_model("corrected")), "weights": "one"}
    assert parse_spec(data).weights == WeightSequence.ones()


def test_csv_uses_round_trip_floats():
    text = csv_text(["t", "x"], [(0.1, 1 / 3)])
    assert text.splitlines()[1] == "0.10000000000000001,0.33333333333333331"
    assert float(text.splitlines()[1].split(",")[1]) == 1 / 3


def test_write_atomic_replaces_whole_file(tmp_path):
    path = tmp_path / "sub" / "f.txt"
    write_atomic(path, "old\n")
    write_atomic(path, "new\n")
    assert path.read_text() == "new\n"
    assert sorted(p.name for p in path.parent.iterdir()) == ["f.txt"]


def test_write_atomic_failure_leaves_nothing(tmp_path):
    path = tmp_path / "g.txt"
    with pytest.raises(TypeError):
        write_atomic(path, 123)  # not text
    assert list(tmp_path.iterdir()) == []
