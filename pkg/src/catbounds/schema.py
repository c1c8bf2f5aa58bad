"""JSON model specifications (strict: unknown keys are errors) and output writers."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .bounds import PublishedClaims
from .errors import InvalidWeightsError, ModelValidationError
from .model import (
    BatchArrivals,
    BSequence,
    Catastrophes,
    CatastropheTail,
    LevelJumpArrivals,
    QueueModel,
    RateTable,
    SingleServer,
    TimeFunction,
    WeightSequence,
)

__all__ = [
    "ModelSpec",
    "load_spec",
    "parse_spec",
    "dump_spec",
    "parse_weights",
    "write_atomic",
    "write_csv",
    "format_float",
]

FAMILIES = ("level_jump", "batch", "general")


def _fail(where: str, msg: str):
    raise ModelValidationError(f"{where}: {msg}")


def _obj(x, where: str, required=(), optional=()) -> dict:
    if not isinstance(x, dict):
        _fail(where, f"expected an object, got {type(x).__name__}")
    unknown = set(x) - set(required) - set(optional)
    if unknown:
        _fail(where, f"unknown field(s) {sorted(unknown)}")
    missing = [k for k in required if k not in x]
    if missing:
        _fail(where, f"missing field(s) {missing}")
    return x


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(where, f"expected a number, got {x!r}")
    return float(x)


def _int(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        _fail(where, f"expected an integer, got {x!r}")
    return x


def _nums(x, where: str) -> list[float]:
    if not isinstance(x, list):
        _fail(where, "expected a list of numbers")
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(x)]


# -- time functions -----------------------------------------------------------
_TF_FIELDS = {
    "constant": ("value",),
    "trig_poly": ("offset", "terms"),
    "piecewise_constant": ("breakpoints", "values"),
    "tabulated": ("times", "values"),
}


def timefn_from_json(x, where: str = "function", allow_signed: bool = False) -> TimeFunction:
    if not isinstance(x, dict) or x.get("kind") not in _TF_FIELDS:
        _fail(where, f"kind must be one of {list(_TF_FIELDS)}")
    kind = x["kind"]
    optional = ["name", "period"] + (["signed"] if allow_signed else [])
    if kind == "constant":
        optional.remove("period")
    _obj(x, where, ("kind",) + _TF_FIELDS[kind], optional)
    name = x.get("name", "")
    if not isinstance(name, str):
        _fail(f"{where}.name", "expected a string")
    signed = x.get("signed", False)
    if not isinstance(signed, bool):
        _fail(f"{where}.signed", "expected true or false")
    period = None if x.get("period") is None else _num(x["period"], f"{where}.period")
    if kind == "constant":
        return TimeFunction.constant(_num(x["value"], f"{where}.value"), name=name, signed=signed)
    if kind == "trig_poly":
        if not isinstance(x["terms"], list):
            _fail(f"{where}.terms", "expected a list")
        terms = []
        for i, term in enumerate(x["terms"]):
            w = f"{where}.terms[{i}]"
            _obj(term, w, ("freq",), ("cos", "sin"))
            terms.append((_num(term.get("cos", 0.0), f"{w}.cos"),
                          _num(term.get("sin", 0.0), f"{w}.sin"),
                          _num(term["freq"], f"{w}.freq")))
        return TimeFunction.trig(_num(x["offset"], f"{where}.offset"), terms, period,
                                 name=name, signed=signed)
    if kind == "piecewise_constant":
        return TimeFunction("piecewise_constant",
                            breakpoints=tuple(_nums(x["breakpoints"], f"{where}.breakpoints")),
                            values=tuple(_nums(x["values"], f"{where}.values")),
                            period=period, signed=signed, name=name)
    return TimeFunction("tabulated", times=tuple(_nums(x["times"], f"{where}.times")),
                        values=tuple(_nums(x["values"], f"{where}.values")),
                        period=period, signed=signed, name=name)


def timefn_to_json(f: TimeFunction) -> dict:
    out: dict = {"kind": f.kind}
    if f.kind == "constant":
        out["value"] = f.value
    elif f.kind == "trig_poly":
        out["offset"] = f.offset
        out["terms"] = [{"cos": a, "sin": b, "freq": fr} for a, b, fr in f.terms]
    elif f.kind == "piecewise_constant":
        out["breakpoints"] = list(f.breakpoints)
        out["values"] = list(f.values)
    else:
        out["times"] = list(f.times)
        out["values"] = list(f.values)
    if f.period is not None:
        out["period"] = f.period
    if f.signed:
        out["signed"] = True
    if f.name:
        out["name"] = f.name
    return out


# -- model --------------------------------------------------------------------
def _table_from_json(x, where: str) -> RateTable:
    if not isinstance(x, list):
        _fail(where, "expected a list of transitions")
    entries = []
    for i, e in enumerate(x):
        w = f"{where}[{i}]"
        _obj(e, w, ("from", "size", "rate"))
        entries.append((_int(e["from"], f"{w}.from"), _int(e["size"], f"{w}.size"),
                        timefn_from_json(e["rate"], f"{w}.rate")))
    return RateTable(tuple(entries))


def _table_to_json(t: RateTable) -> list:
    return [{"from": s, "size": k, "rate": timefn_to_json(f)} for s, k, f in t.entries]


def _b_from_json(x, where: str) -> BSequence:
    _obj(x, where, ("kind",), ("values",))
    if x["kind"] == "cubic_telescoping":
        if "values" in x:
            _fail(where, "cubic_telescoping takes no values")
        return BSequence.cubic()
    if x["kind"] != "explicit" or "values" not in x:
        _fail(where, "kind must be cubic_telescoping or explicit with values")
    return BSequence("explicit", tuple(_nums(x["values"], f"{where}.values")))


def _gamma_from_json(x, where: str) -> Catastrophes:
    _obj(x, where, (), ("prefix", "tail"))
    prefix = x.get("prefix", [])
    if not isinstance(prefix, list):
        _fail(f"{where}.prefix", "expected a list")
    fs = tuple(timefn_from_json(f, f"{where}.prefix[{i}]") for i, f in enumerate(prefix))
    tail = x.get("tail")
    if tail is not None:
        w = f"{where}.tail"
        _obj(tail, w, ("kind", "base"), ("coefficient",))
        coef = tail.get("coefficient")
        tail = CatastropheTail(tail["kind"], timefn_from_json(tail["base"], f"{w}.base"),
                               None if coef is None else timefn_from_json(coef, f"{w}.coefficient"))
    return Catastrophes(fs, tail)


def model_from_json(x, where: str = "model") -> QueueModel:
    _obj(x, where, ("family",),
         ("lambda", "b", "batch_sizes", "arrivals", "mu", "services", "gamma"))
    family = x["family"]
    if family not in FAMILIES:
        _fail(f"{where}.family", f"must be one of {list(FAMILIES)}")
    allowed = {"level_jump": {"lambda", "b"}, "batch": {"lambda", "batch_sizes"},
               "general": {"arrivals"}}[family]
    for key in {"lambda", "b", "batch_sizes", "arrivals"} - allowed:
        if key in x:
            _fail(where, f"field {key!r} does not belong to family {family!r}")
    missing = [k for k in allowed if k not in x and k != "arrivals"]
    if missing:
        _fail(where, f"family {family!r} needs {missing}")
    if family == "level_jump":
        arrivals = LevelJumpArrivals(timefn_from_json(x["lambda"], f"{where}.lambda"),
                                     _b_from_json(x["b"], f"{where}.b"))
    elif family == "batch":
        arrivals = BatchArrivals(timefn_from_json(x["lambda"], f"{where}.lambda"),
                                 tuple(_nums(x["batch_sizes"], f"{where}.batch_sizes")))
    else:
        arrivals = _table_from_json(x["arrivals"], f"{where}.arrivals") if "arrivals" in x else None
    if "mu" in x and "services" in x:
        _fail(where, "give either mu (single server) or services, not both")
    services = None
    if "mu" in x:
        services = SingleServer(timefn_from_json(x["mu"], f"{where}.mu"))
    elif "services" in x:
        services = _table_from_json(x["services"], f"{where}.services")
    cats = _gamma_from_json(x["gamma"], f"{where}.gamma") if "gamma" in x else Catastrophes()
    return QueueModel(arrivals, services, cats)


def model_to_json(m: QueueModel) -> dict:
    out: dict = {"family": m.family}
    a = m.arrivals
    if isinstance(a, LevelJumpArrivals):
        out["lambda"] = timefn_to_json(a.rate)
        out["b"] = ({"kind": "cubic_telescoping"} if a.b.kind == "cubic_telescoping"
                    else {"kind": "explicit", "values": list(a.b.values)})
    elif isinstance(a, BatchArrivals):
        out["lambda"] = timefn_to_json(a.rate)
        out["batch_sizes"] = list(a.sizes)
    elif isinstance(a, RateTable):
        out["arrivals"] = _table_to_json(a)
    if isinstance(m.services, SingleServer):
        out["mu"] = timefn_to_json(m.services.rate)
    elif isinstance(m.services, RateTable):
        out["services"] = _table_to_json(m.services)
    c = m.catastrophes
    if not c.is_zero:
        g: dict = {}
        if c.prefix:
            g["prefix"] = [timefn_to_json(f) for f in c.prefix]
        if c.tail is not None:
            g["tail"] = {"kind": c.tail.kind, "base": timefn_to_json(c.tail.base)}
            if c.tail.coefficient is not None:
                g["tail"]["coefficient"] = timefn_to_json(c.tail.coefficient)
        out["gamma"] = g
    return out


# -- weights ------------------------------------------------------------------
def parse_weights(arg: str) -> WeightSequence:
    """``linear``, ``one``, ``geometric:RHO`` or ``file:PATH`` (a JSON weights object)."""
    if arg == "linear":
        return WeightSequence.linear()
    if arg == "one":
        return WeightSequence.ones()
    if arg.startswith("geometric:"):
        try:
            rho = float(arg.split(":", 1)[1])
        except ValueError:
            raise InvalidWeightsError(f"bad geometric ratio in {arg!r}") from None
        return WeightSequence.geometric(rho)
    if arg.startswith("file:"):
        path = Path(arg.split(":", 1)[1])
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidWeightsError(f"cannot read weights from {path}: {exc}") from None
        return weights_from_json(data)
    raise InvalidWeightsError(f"weights must be linear, one, geometric:RHO or file:PATH, got {arg!r}")


def weights_from_json(x, where: str = "weights") -> WeightSequence:
    if x == "linear":
        return WeightSequence.linear()
    if x == "one":
        return WeightSequence.ones()
    _obj(x, where, ("kind",), ("rho", "values", "tail_slope", "tail_intercept"))
    kind = x["kind"]
    if kind == "geometric":
        _obj(x, where, ("kind", "rho"))
        return WeightSequence.geometric(_num(x["rho"], f"{where}.rho"))
    if kind == "explicit":
        _obj(x, where, ("kind", "values"), ("tail_slope", "tail_intercept"))
        icpt = x.get("tail_intercept")
        return WeightSequence("explicit", values=tuple(_nums(x["values"], f"{where}.values")),
                              tail_slope=_num(x.get("tail_slope", 0.0), f"{where}.tail_slope"),
                              tail_intercept=None if icpt is None else _num(icpt, where))
    if kind in ("linear", "constant_one") and set(x) == {"kind"}:
        return WeightSequence(kind)
    _fail(f"{where}.kind", "must be linear, constant_one, geometric or explicit")


def weights_to_json(w: WeightSequence):
    if w.kind == "linear":
        return "linear"
    if w.kind == "constant_one":
        return "one"
    if w.kind == "geometric":
        return {"kind": "geometric", "rho": w.rho}
    out = {"kind": "explicit", "values": list(w.values), "tail_slope": w.tail_slope}
    if w.tail_intercept is not None:
        out["tail_intercept"] = w.tail_intercept
    return out


# -- claims -------------------------------------------------------------------
_CLAIM_NUMS = ("weighted_arrival_excess", "R_star_star", "b_star_star", "b_star", "limit_bound")


def claims_from_json(x, where: str = "claims") -> PublishedClaims:
    _obj(x, where, (), _CLAIM_NUMS + ("beta_double_star", "mean_coefficient"))
    kw = {k: _num(x[k], f"{where}.{k}") for k in _CLAIM_NUMS if k in x}
    if "beta_double_star" in x:
        kw["beta_double_star"] = timefn_from_json(x["beta_double_star"],
                                                  f"{where}.beta_double_star", allow_signed=True)
    if "mean_coefficient" in x:
        mc = _nums(x["mean_coefficient"], f"{where}.mean_coefficient")
        if len(mc) != 2:
            _fail(f"{where}.mean_coefficient", "expected [c0, c1] for c0 + c1*j")
        kw["mean_coefficient"] = (mc[0], mc[1])
    return PublishedClaims(**kw)


def claims_to_json(c: PublishedClaims) -> dict:
    out: dict = {}
    for k in _CLAIM_NUMS:
        if getattr(c, k) is not None:
            out[k] = getattr(c, k)
    if c.beta_double_star is not None:
        out["beta_double_star"] = timefn_to_json(c.beta_double_star)
    if c.mean_coefficient is not None:
        out["mean_coefficient"] = list(c.mean_coefficient)
    return out


# -- top level ----------------------------------------------------------------
@dataclass(frozen=True)
class ModelSpec:
    model: QueueModel
    weights: WeightSequence | None = None
    claims: PublishedClaims | None = None


def parse_spec(data) -> ModelSpec:
    _obj(data, "spec", ("model",), ("weights", "claims"))
    return ModelSpec(
        model_from_json(data["model"]),
        weights_from_json(data["weights"]) if "weights" in data else None,
        claims_from_json(data["claims"]) if "claims" in data else None,
    )


def load_spec(path) -> ModelSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelValidationError(f"{path}: invalid JSON ({exc})") from None
    return parse_spec(data)


def dump_spec(spec: ModelSpec) -> dict:
    out: dict = {"model": model_to_json(spec.model)}
    if spec.weights is not None:
        out["weights"] = weights_to_json(spec.weights)
    if spec.claims is not None:
        out["claims"] = claims_to_json(spec.claims)
    return out


# -- writers ------------------------------------------------------------------
def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([v if isinstance(v, (int, str)) and not isinstance(v, bool)
                     else format_float(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    write_atomic(path, csv_text(header, rows))
