"""Hyperelliptic curve models y^2 = f(x) and rational differential forms on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (ParameterError, SingularCurveError, UnsupportedConfigurationError,
                     UnsupportedGenusError)

INFINITY = "infinity"


@dataclass(frozen=True)
class MarkedPoint:
    """A point on the curve.

    ``x`` is a complex number or ``None`` for a point over infinity.  The
    sheet sign selects y relative to the principal square root of f(x)
    (or of the leading coefficient at infinity).
    """

    x: complex | None
    sheet: int = 1
    weierstrass: bool = False

    @property
    def at_infinity(self) -> bool:
        return self.x is None

    def to_dict(self) -> dict:
        return {"x": INFINITY if self.x is None else self.x, "sheet": self.sheet,
                "weierstrass": self.weierstrass}


@dataclass(frozen=True)
class QuadratureSettings:
    chebyshev_nodes: int = 32
    chebyshev_max: int = 2048
    legendre_nodes: int = 16
    ellipse_nodes: int = 128
    ellipse_max: int = 8192
    chart_nodes: int = 64
    step_fraction: float = 0.5
    min_branch_distance: float = 1e-6


@dataclass(frozen=True)
class CurveModel:
    f_coeffs: tuple            # descending powers
    genus: int
    roots: tuple               # finite branch points, sorted by (re, im)
    even_symmetry: bool
    marked_points: tuple = ()
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    tolerance: float = 1e-10

    @property
    def degree(self) -> int:
        return len(self.f_coeffs) - 1

    @property
    def odd_model(self) -> bool:
        return self.degree % 2 == 1

    @property
    def lead(self) -> complex:
        return self.f_coeffs[0]

    @property
    def sqrt_lead(self) -> complex:
        return np.sqrt(complex(self.lead))

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.roots))))

    @property
    def branch_points(self) -> tuple:
        """Finite branch points followed by infinity for odd models."""
        return self.roots + ((INFINITY,) if self.odd_model else ())

    def f(self, x):
        return np.polyval(np.asarray(self.f_coeffs, dtype=complex), x)

    def df(self, x):
        return np.polyval(np.polyder(np.asarray(self.f_coeffs, dtype=complex)), x)

    def y_principal(self, x, sheet: int = 1):
        return sheet * np.sqrt(self.f(np.asarray(x, dtype=complex)))

    # -- cut structure -----------------------------------------------------
    @property
    def cuts(self) -> list[tuple[complex, complex]]:
        """Finite cuts (pairs of consecutive branch points); odd models add a ray."""
        e = self.roots
        return [(e[2 * k], e[2 * k + 1]) for k in range(len(e) // 2)]

    @property
    def ray(self) -> tuple[complex, complex] | None:
        """(start, unit direction) of the cut to infinity for odd models."""
        if not self.odd_model:
            return None
        e = np.asarray(self.roots)
        start = e[-1]
        d = start - np.mean(e[:-1])
        d = d / abs(d) if abs(d) > 1e-12 else 1.0 + 0j
        return complex(start), complex(d)

    @property
    def gaps(self) -> list[tuple[complex, complex]]:
        e = self.roots
        return [(e[2 * j + 1], e[2 * j + 2]) for j in range(self.genus)]

    def _pair_factor(self, k: int, x):
        a, b = self.cuts[k]
        m, h = 0.5 * (a + b), 0.5 * (b - a)
        u = x - m
        return u * np.sqrt(1.0 - (h / u) ** 2)

    def _ray_factor(self, x):
        start, d = self.ray
        return np.sqrt(d) * 1j * np.sqrt(-(x - start) / d)

    def y_plus(self, x, skip: int | None = None):
        """Branch of y analytic off the cuts (sheet +1 for the homology basis).

        ``skip`` omits the factor of one finite cut; used for boundary values.
        """
        x = np.asarray(x, dtype=complex)
        out = np.full(x.shape, self.sqrt_lead, dtype=complex)
        for k in range(len(self.cuts)):
            if k != skip:
                out = out * self._pair_factor(k, x)
        if self.odd_model:
            out = out * self._ray_factor(x)
        return out

    def y_cut_side(self, k: int, t, side: int):
        """Boundary value of y_plus on cut k at x = m + h t; side -1 is the right side."""
        a, b = self.cuts[k]
        m, h = 0.5 * (a + b), 0.5 * (b - a)
        t = np.asarray(t, dtype=float)
        x = m + h * t
        return self.y_plus(x, skip=k) * (side * 1j * h * np.sqrt(1.0 - t * t))

    def point_y(self, point: MarkedPoint) -> complex:
        if point.at_infinity:
            raise ParameterError("point at infinity has no finite y")
        return complex(self.y_principal(point.x, point.sheet))

    def is_branch_x(self, x, rtol: float = 1e-9) -> bool:
        return bool(np.min(np.abs(np.asarray(self.roots) - x)) <= rtol * self.scale)


def _segments_cross(p1, p2, q1, q2, tol=1e-12) -> bool:
    """True if closed segments [p1,p2] and [q1,q2] meet outside shared endpoints."""
    def cross(a, b):
        return a.real * b.imag - a.imag * b.real

    d1, d2 = p2 - p1, q2 - q1
    denom = cross(d1, d2)
    if abs(denom) < tol:
        if abs(cross(q1 - p1, d1)) > tol * max(1, abs(d1)):
            return False
        # collinear: overlap test on the projection
        L = abs(d1) ** 2
        ts = sorted(((q1 - p1) * np.conj(d1)).real / L for _ in [0]) + \
            [((q2 - p1) * np.conj(d1)).real / L]
        lo, hi = min(ts), max(ts)
        return hi > tol and lo < 1 - tol
    t = cross(q1 - p1, d2) / denom
    s = cross(q1 - p1, d1) / denom
    if -tol <= t <= 1 + tol and -tol <= s <= 1 + tol:
        pt = p1 + t * d1
        shared = [pt for e in (p1, p2) if abs(pt - e) < 1e-9 and (abs(pt - q1) < 1e-9 or abs(pt - q2) < 1e-9)]
        return not shared
    return False


def _validate_cut_structure(curve: CurveModel) -> None:
    segs = [("cut", a, b) for a, b in curve.cuts] + [("gap", a, b) for a, b in curve.gaps]
    if curve.odd_model:
        start, d = curve.ray
        far = start + d * 1e3 * curve.scale
        segs.append(("ray", start, far))
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            ki, a1, b1 = segs[i]
            kj, a2, b2 = segs[j]
            if ki == "gap" and kj == "gap":
                continue
            if _segments_cross(a1, b1, a2, b2):
                raise UnsupportedConfigurationError(
                    f"{ki} [{a1:.4g}, {b1:.4g}] meets {kj} [{a2:.4g}, {b2:.4g}]; "
                    "branch points are not in a supported position")


def _sorted_roots(roots: Iterable[complex]) -> tuple:
    roots = [complex(r) for r in roots]
    return tuple(sorted(roots, key=lambda r: (round(r.real, 9), r.imag)))


def _polish(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    d = np.polyder(coeffs)
    out = roots.astype(complex)
    for _ in range(4):
        step = np.polyval(coeffs, out) / np.polyval(d, out)
        out = out - np.where(np.isfinite(step), step, 0)
    return out


def _parse_complex(v) -> complex:
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _parse_point(p) -> MarkedPoint:
    if isinstance(p, MarkedPoint):
        return p
    if isinstance(p, str) and p == INFINITY:
        return MarkedPoint(None)
    if isinstance(p, Mapping):
        x = p.get("x", INFINITY)
        x = None if (isinstance(x, str) and x == INFINITY) else _parse_complex(x)
        return MarkedPoint(x, int(p.get("sheet", 1)), bool(p.get("weierstrass", False)))
    x, sheet = p
    x = None if (isinstance(x, str) and x == INFINITY) else _parse_complex(x)
    return MarkedPoint(x, int(sheet))


def build_curve(f_coeffs: Sequence | Mapping, *, even_symmetry: bool | None = None,
                marked_points: Sequence = (), quadrature: QuadratureSettings | None = None,
                tolerance: float = 1e-10) -> CurveModel:
    """Validate a curve description and fix its branch structure.

    ``f_coeffs`` lists coefficients of f from the highest power down; a
    mapping with keys ``f_coeffs``, ``even_symmetry``, ``marked_points`` is
    also accepted.
    """
    if isinstance(f_coeffs, Mapping):
        spec = dict(f_coeffs)
        return build_curve(spec["f_coeffs"], even_symmetry=spec.get("even_symmetry"),
                           marked_points=spec.get("marked_points", ()),
                           quadrature=spec.get("quadrature"),
                           tolerance=spec.get("tolerance", tolerance))
    c = np.array([_parse_complex(v) for v in f_coeffs], dtype=complex)
    nz = np.flatnonzero(np.abs(c) > 0)
    if len(nz) == 0:
        raise UnsupportedGenusError("zero polynomial")
    c = c[nz[0]:]
    n = len(c) - 1
    if n < 3:
        raise UnsupportedGenusError(f"degree {n} < 3 does not define a curve of genus >= 1")
    g = (n - 1) // 2
    scale_c = float(np.max(np.abs(c)))
    odd_mag = float(np.max(np.abs(c[::-1][1::2]))) if n >= 1 else 0.0
    is_even = odd_mag <= 1e-12 * scale_c
    if even_symmetry is None:
        even_symmetry = is_even
    if even_symmetry and not is_even:
        raise ParameterError(f"even_symmetry requested but odd coefficients reach {odd_mag:.3g}")
    if even_symmetry:
        c = c.copy()
        c[::-1][1::2] = 0
        h = c[::-1][0::2][::-1]  # f(x) = h(x^2)
        hr = _polish(h, np.roots(h))
        r = np.sqrt(hr.astype(complex))
        roots = np.concatenate([r, -r])
        if n % 2 == 1:
            roots = np.concatenate([roots, [0.0]])
    else:
        roots = _polish(c, np.roots(c))
    roots = _sorted_roots(roots)
    scale = max(1.0, max(abs(r) for r in roots))
    ra = np.asarray(roots)
    dist = np.abs(ra[:, None] - ra[None, :])
    np.fill_diagonal(dist, np.inf)
    if np.min(dist) <= 1e-8 * scale:
        raise SingularCurveError(f"singular curve: f has a repeated root (min separation {np.min(dist):.3g})")
    pts = tuple(_parse_point(p) for p in marked_points)
    curve = CurveModel(tuple(complex(v) for v in c), g, roots, bool(even_symmetry), pts,
                       quadrature or QuadratureSettings(), float(tolerance))
    for p in pts:
        if p.x is not None and curve.is_branch_x(p.x) and not p.weierstrass:
            raise UnsupportedConfigurationError(
                f"marked point x={p.x} is a branch point; declare it weierstrass")
        if p.x is None and curve.odd_model and not p.weierstrass:
            pts = tuple(MarkedPoint(None, 1, True) if q is p else q for q in pts)
    curve = CurveModel(curve.f_coeffs, g, roots, curve.even_symmetry, pts, curve.quadrature,
                       curve.tolerance)
    _validate_cut_structure(curve)
    return curve


# -- rational differentials ---------------------------------------------------

@dataclass(frozen=True)
class Rational:
    """Finite sum of terms coef * (x - center)^power."""

    terms: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.zeros(x.shape, dtype=complex)
        for coef, center, power in self.terms:
            out = out + coef * (x - center) ** power
        return out

    def __add__(self, other: "Rational") -> "Rational":
        return Rational(self.terms + other.terms).simplify()

    def scale(self, a: complex) -> "Rational":
        return Rational(tuple((a * c, z, p) for c, z, p in self.terms))

    def simplify(self) -> "Rational":
        acc: dict = {}
        for coef, center, power in self.terms:
            key = (complex(center), int(power))
            acc[key] = acc.get(key, 0) + complex(coef)
        return Rational(tuple((v, k[0], k[1]) for k, v in sorted(
            acc.items(), key=lambda kv: (kv[0][0].real, kv[0][0].imag, kv[0][1])) if v != 0))

    @property
    def poles(self) -> tuple:
        return tuple(sorted({complex(z) for c, z, p in self.terms if p < 0},
                            key=lambda z: (z.real, z.imag)))

    @staticmethod
    def polynomial(coeffs_ascending: Sequence, center: complex = 0.0) -> "Rational":
        return Rational(tuple((complex(c), complex(center), n)
                              for n, c in enumerate(coeffs_ascending) if c != 0))


@dataclass(frozen=True)
class Differential:
    """The differential (R(x) + S(x)/y) dx."""

    R: Rational = Rational()
    S: Rational = Rational()
    name: str = ""

    def __call__(self, x, y):
        return self.R(x) + self.S(x) / y

    @property
    def poles(self) -> tuple:
        return tuple(sorted(set(self.R.poles) | set(self.S.poles), key=lambda z: (z.real, z.imag)))

    def __add__(self, other: "Differential") -> "Differential":
        return Differential(self.R + other.R, self.S + other.S, self.name or other.name)

    def scale(self, a: complex) -> "Differential":
        return Differential(self.R.scale(a), self.S.scale(a), self.name)

    def to_dict(self) -> dict:
        return {"name": self.name, "R": [list(t) for t in self.R.terms],
                "S": [list(t) for t in self.S.terms]}


def holomorphic_basis(curve: CurveModel) -> list[Differential]:
    """Raw holomorphic differentials x^j dx / y, j = 0..g-1."""
    return [Differential(S=Rational(((1.0 + 0j, 0j, j),)), name=f"nu{j}") for j in range(curve.genus)]


def sqrt_series(coeffs: Sequence[complex], y0: complex, n: int) -> np.ndarray:
    """Taylor coefficients of the branch of sqrt(sum coeffs[k] u^k) with value y0 at 0."""
    f = np.zeros(n + 1, dtype=complex)
    f[: min(n + 1, len(coeffs))] = np.asarray(coeffs, dtype=complex)[: n + 1]
    y = np.zeros(n + 1, dtype=complex)
    y[0] = y0
    for k in range(1, n + 1):
        y[k] = (f[k] - np.dot(y[1:k], y[k - 1:0:-1])) / (2 * y0)
    return y


def taylor_at(curve: CurveModel, x0: complex) -> np.ndarray:
    """Coefficients of f(x0 + u) in ascending powers of u."""
    c = np.poly1d(np.asarray(curve.f_coeffs, dtype=complex))
    n = curve.degree
    out = np.zeros(n + 1, dtype=complex)
    d = c
    fact = 1.0
    for k in range(n + 1):
        out[k] = d(x0) / fact
        d = d.deriv()
        fact *= k + 1
    return out
