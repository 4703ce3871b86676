"""Model definition files: a small JSON schema shared by CLI and library.

Two shapes are accepted:

* a family shortcut::

    {"kind": "rate", "family": "rate-family-2",
     "params": {"alpha": "0.1", "beta": "0.05"}}

* raw coefficients (arrays of decimal or rational strings, constant term
  first)::

    {"kind": "rate", "n": 2,
     "a": ["0.005", "-0.1"], "b2": ["0", "0", "0", "1"], "R": ["0", "1"],
     "domain": {"lo": "0", "hi": "inf"}}

Volatility files use ``kind: "vol"`` with fields ``N, h2, b2, bh, a,
n_values`` (``n_values[i-1]`` is the polynomial degree used at theta = i/N).
Coefficients are parsed as exact rationals, so constraint checking is never
corrupted by binary float parsing, and ``save_model`` -> ``load_model`` is
the identity.
"""

from __future__ import annotations

import hashlib
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Union

from .errors import DegreeError, ParamError, SchemaError
from .models import Interval, RateModelSpec, VolModelSpec, build_family
from .polynomials import Polynomial

__all__ = ["load_model", "save_model", "model_digest", "spec_to_dict"]

Spec = Union[RateModelSpec, VolModelSpec]


def _parse_number(value, field: str) -> Fraction:
    try:
        if isinstance(value, str):
            return Fraction(value)
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        pass
    raise SchemaError(f"field {field!r}: cannot parse {value!r} as a rational number")


def _parse_poly(values, field: str) -> Polynomial:
    if not isinstance(values, list):
        raise SchemaError(f"field {field!r} must be an array of coefficient strings")
    return Polynomial([_parse_number(v, f"{field}[{i}]") for i, v in enumerate(values)])


def _parse_bound(value, field: str) -> float:
    if isinstance(value, str) and value.strip() in ("inf", "+inf", "Infinity"):
        return math.inf
    if isinstance(value, str) and value.strip() in ("-inf", "-Infinity"):
        return -math.inf
    return float(_parse_number(value, field))


def _parse_domain(obj) -> Interval:
    if not isinstance(obj, dict) or "lo" not in obj or "hi" not in obj:
        raise SchemaError('field "domain" must be {"lo": ..., "hi": ...}')
    return Interval(_parse_bound(obj["lo"], "domain.lo"), _parse_bound(obj["hi"], "domain.hi"))


def load_model(path) -> Spec:
    """Load and validate a model definition file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise SchemaError(f"model file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("model file must contain a JSON object")

    kind = data.get("kind")
    if kind not in ("rate", "vol"):
        raise SchemaError(f'field "kind" must be "rate" or "vol", got {kind!r}')

    if "family" in data:
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise SchemaError('field "params" must be an object')
        spec = build_family(data["family"], **params)
        want = RateModelSpec if kind == "rate" else VolModelSpec
        if not isinstance(spec, want):
            raise SchemaError(
                f'family {data["family"]!r} does not produce a {kind!r} model'
            )
        return spec

    try:
        if kind == "rate":
            for f in ("n", "a", "b2", "R", "domain"):
                if f not in data:
                    raise SchemaError(f"rate model file missing field {f!r}")
            return RateModelSpec(
                n=int(data["n"]),
                a=_parse_poly(data["a"], "a"),
                b2=_parse_poly(data["b2"], "b2"),
                R=_parse_poly(data["R"], "R"),
                domain=_parse_domain(data["domain"]),
            )
        for f in ("N", "h2", "b2", "bh", "a", "n_values", "domain"):
            if f not in data:
                raise SchemaError(f"vol model file missing field {f!r}")
        n_values = data["n_values"]
        N = int(data["N"])
        if not (isinstance(n_values, list) and len(n_values) == N - 1
                and all(isinstance(v, int) and v >= 0 for v in n_values)):
            raise SchemaError('"n_values" must be an array of N-1 non-negative integers')
        return VolModelSpec(
            N=N,
            h2=_parse_poly(data["h2"], "h2"),
            b2=_parse_poly(data["b2"], "b2"),
            bh=_parse_poly(data["bh"], "bh"),
            a=_parse_poly(data["a"], "a"),
            nmap=lambda i, _nv=tuple(n_values): _nv[i - 1],
            domain=_parse_domain(data["domain"]),
        )
    except DegreeError as exc:
        raise SchemaError(f"degree bound violated: {exc}") from None
    except ParamError as exc:
        raise SchemaError(str(exc)) from None


def _fmt(value) -> str:
    return str(Fraction(value) if not isinstance(value, Fraction) else value)


def _poly_list(p: Polynomial):
    return [_fmt(c) for c in p.as_fraction().coeffs]


def _bound_str(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return _fmt(Fraction(str(v)))


def spec_to_dict(spec: Spec) -> dict:
    """Canonical raw-coefficient dictionary form of a spec."""
    domain = {"lo": _bound_str(spec.domain.lo), "hi": _bound_str(spec.domain.hi)}
    if isinstance(spec, RateModelSpec):
        return {
            "kind": "rate",
            "n": spec.n,
            "a": _poly_list(spec.a),
            "b2": _poly_list(spec.b2),
            "R": _poly_list(spec.R),
            "domain": domain,
        }
    return {
        "kind": "vol",
        "N": spec.N,
        "h2": _poly_list(spec.h2),
        "b2": _poly_list(spec.b2),
        "bh": _poly_list(spec.bh),
        "a": _poly_list(spec.a),
        "n_values": [spec.nmap(i) for i in range(1, spec.N)],
        "domain": domain,
    }


def save_model(spec: Spec, path) -> None:
    """Write the canonical raw-coefficient form; load(save(x)) == x."""
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")


def model_digest(spec: Spec) -> str:
    """Short SHA-256 digest of the canonical form, for provenance lines."""
    blob = json.dumps(spec_to_dict(spec), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
