"""Curve spec files and the period cache (decimal-string serialization)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .curve import INFINITY
from .errors import FiniteGapError

CACHE_VERSION = 1
MODELS = ("odd", "even-degree")
INVOLUTIONS = ("negate-x", "hyperelliptic", "none")
QUADRATURE_KEYS = ("chebyshev_nodes", "chebyshev_max", "legendre_nodes")


class SpecError(FiniteGapError, ValueError):
    """Malformed curve spec or cache file."""


class CacheMismatchError(SpecError):
    """Cache written for a different spec, or by another cache version."""


# -- numbers as decimal strings ------------------------------------------------------

def fmt_real(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0"  # folds -0.0
    return format(x, ".17g")


def fmt_complex(z) -> list:
    z = complex(z)
    return [fmt_real(z.real), fmt_real(z.imag)]


def parse_complex_pair(v) -> complex:
    return complex(float(v[0]), float(v[1]))


def encode_array(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return fmt_complex(a)
    return [encode_array(r) for r in a]


def decode_array(v) -> np.ndarray:
    def rec(x):
        if len(x) == 2 and isinstance(x[0], str):
            return parse_complex_pair(x)
        return [rec(r) for r in x]
    return np.array(rec(v), dtype=complex)


def _canonical_number(text, where: str) -> str:
    """Parse a real or complex decimal literal and print it canonically."""
    try:
        if isinstance(text, bool):
            raise ValueError
        if isinstance(text, (int, float)):
            z = complex(text)
        elif isinstance(text, str):
            z = complex(text.replace(" ", "").replace("i", "j"))
        else:
            raise ValueError
    except ValueError:
        raise SpecError(f"field '{where}': cannot read {text!r} as a number") from None
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise SpecError(f"field '{where}': non-finite value {text!r}")
    if z.imag == 0.0:
        return fmt_real(z.real)
    im = fmt_real(z.imag)
    sign = "" if im.startswith("-") else "+"
    return f"{fmt_real(z.real)}{sign}{im}j"


# -- spec file -----------------------------------------------------------------------

@dataclass
class CurveSpecFile:
    name: str
    f_coeffs: list
    model: str
    involution: str = "none"
    marked_points: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"name": self.name, "f_coeffs": list(self.f_coeffs), "model": self.model,
                "involution": self.involution,
                "marked_points": [dict(p) for p in self.marked_points],
                "tolerances": dict(self.tolerances), "quadrature": dict(self.quadrature),
                "seed": self.seed}

    @property
    def coefficients(self) -> list:
        return [complex(c) for c in self.f_coeffs]

    def point_x(self, p: dict):
        return None if p["x"] == INFINITY else complex(p["x"])


def _require(d: dict, key: str, kind, where: str = ""):
    if key not in d:
        raise SpecError(f"field '{where}{key}' is missing")
    v = d[key]
    if not isinstance(v, kind) or isinstance(v, bool) and kind is not bool:
        raise SpecError(f"field '{where}{key}': expected {getattr(kind, '__name__', kind)}, "
                        f"got {type(v).__name__}")
    return v


def spec_from_dict(d) -> CurveSpecFile:
    if not isinstance(d, dict):
        raise SpecError("spec must be a mapping at top level")
    known = {"name", "f_coeffs", "model", "involution", "marked_points", "tolerances",
             "quadrature", "seed"}
    extra = sorted(set(d) - known)
    if extra:
        raise SpecError(f"unknown field '{extra[0]}'")
    name = _require(d, "name", str)
    coeffs = _require(d, "f_coeffs", list)
    if len(coeffs) < 4:
        raise SpecError("field 'f_coeffs': need at least 4 coefficients (degree >= 3)")
    coeffs = [_canonical_number(c, f"f_coeffs[{i}]") for i, c in enumerate(coeffs)]
    if complex(coeffs[0]) == 0:
        raise SpecError("field 'f_coeffs[0]': leading coefficient is zero")
    model = _require(d, "model", str)
    if model not in MODELS:
        raise SpecError(f"field 'model': expected one of {MODELS}, got {model!r}")
    degree = len(coeffs) - 1
    if (degree % 2 == 1) != (model == "odd"):
        raise SpecError(f"field 'model': {model!r} does not match degree {degree}")
    inv = d.get("involution", "none")
    if inv not in INVOLUTIONS:
        raise SpecError(f"field 'involution': expected one of {INVOLUTIONS}, got {inv!r}")
    if inv == "negate-x":
        odd = [c for c in coeffs[::-1][1::2] if complex(c) != 0]
        if odd:
            raise SpecError("field 'involution': negate-x needs an even polynomial in x")
    pts = []
    for i, p in enumerate(d.get("marked_points") or []):
        where = f"marked_points[{i}]."
        if not isinstance(p, dict):
            raise SpecError(f"field 'marked_points[{i}]': expected a mapping")
        if set(p) - {"x", "sheet"}:
            raise SpecError(f"field '{where}{sorted(set(p) - {'x', 'sheet'})[0]}' is unknown")
        x = p.get("x", INFINITY)
        x = INFINITY if x == INFINITY else _canonical_number(x, where + "x")
        sheet = p.get("sheet", 1)
        if sheet not in (1, -1) or isinstance(sheet, bool):
            raise SpecError(f"field '{where}sheet': expected 1 or -1, got {sheet!r}")
        pts.append({"x": x, "sheet": int(sheet)})
    tols = d.get("tolerances") or {}
    if not isinstance(tols, dict):
        raise SpecError("field 'tolerances': expected a mapping")
    tols = {str(k): fmt_real(_positive(v, f"tolerances.{k}")) for k, v in sorted(tols.items())}
    quad = d.get("quadrature") or {}
    if not isinstance(quad, dict):
        raise SpecError("field 'quadrature': expected a mapping")
    for k, v in quad.items():
        if k not in QUADRATURE_KEYS:
            raise SpecError(f"field 'quadrature.{k}' is unknown")
        if not isinstance(v, int) or isinstance(v, bool) or v < 2:
            raise SpecError(f"field 'quadrature.{k}': expected an integer >= 2")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise SpecError(f"field 'seed': expected a non-negative integer, got {seed!r}")
    return CurveSpecFile(name, coeffs, model, inv, pts, tols, dict(sorted(quad.items())), seed)


def _positive(v, where):
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise SpecError(f"field '{where}': expected a positive number") from None
    if not x > 0:
        raise SpecError(f"field '{where}': expected a positive number")
    return x


def parse_spec(text: str) -> CurveSpecFile:
    """Read a YAML (or JSON, a YAML subset) curve spec."""
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise SpecError(f"parse error{where}: {getattr(exc, 'problem', exc)}") from None
    return spec_from_dict(d)


def write_spec(spec: CurveSpecFile) -> str:
    return json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"


def normalize(text: str) -> str:
    return write_spec(parse_spec(text))


def load_spec(path) -> CurveSpecFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc.strerror}") from None
    return parse_spec(text)


def spec_hash(spec: CurveSpecFile) -> str:
    return hashlib.sha256(write_spec(spec).encode()).hexdigest()


# -- cache --------------------------------------------------------------------------

def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_cache(path, payload: dict) -> None:
    Path(path).write_text(dump_json(payload))


def read_cache(path, spec: CurveSpecFile | None = None) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpecError(f"cannot read cache {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"cache {path} is not valid JSON (line {exc.lineno})") from None
    if payload.get("version") != CACHE_VERSION:
        raise CacheMismatchError(f"cache version {payload.get('version')} != {CACHE_VERSION}")
    stored = spec_from_dict(payload.get("spec"))
    if spec_hash(stored) != payload.get("curve_hash"):
        raise CacheMismatchError("cache spec does not match its curve hash")
    if spec is not None and spec_hash(spec) != payload["curve_hash"]:
        raise CacheMismatchError("cache was written for a different curve spec")
    return payload
