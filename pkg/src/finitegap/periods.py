"""Homology basis, period matrix, Abel map and Riemann constants."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .curve import CurveModel, Differential, MarkedPoint, Rational, holomorphic_basis
from .errors import ParameterError, PathError, PrecisionError, UnsupportedConfigurationError
from .paths import EXIT_FRACTION, Chart, PathIntegrator, PathOnCurve
from .theta import RiemannMatrix, reduce_mod_lattice, theta


def _cheb(N: int):
    j = np.arange(1, N + 1)
    return np.cos((2 * j - 1) * np.pi / (2 * N)), np.pi / N


def _converged(fun, start: int, cap: int, tol: float, what: str):
    """Evaluate fun(N) with N doubling until two values agree to tol."""
    N = start
    prev = fun(N)
    while True:
        N *= 2
        cur = fun(N)
        err = float(np.max(np.abs(cur - prev)) / max(1.0, float(np.max(np.abs(cur)))))
        if err <= tol:
            return cur, err
        if N >= cap:
            raise PrecisionError(f"{what}: quadrature did not converge (estimate {err:.3g})",
                                 achieved=err, requested=tol)
        prev = cur


def cut_periods(curve: CurveModel, S: Rational, k: int, tol: float = 1e-12):
    """a_k-period of S(x) dx / y as twice the integral along the right side of cut k."""
    a, b = curve.cuts[k]
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    q = curve.quadrature

    def fun(N):
        t, w = _cheb(N)
        x = m + h * t
        # y_right = rest(x) * (-i h sqrt(1-t^2)); dx = h dt
        G = S(x) / (curve.y_plus(x, skip=k) * (-1j))
        return 2 * w * np.sum(G)

    return _converged(fun, q.chebyshev_nodes, q.chebyshev_max, tol, f"a-period {k}")


def gap_integral(curve: CurveModel, S: Rational, j: int, tol: float = 1e-12):
    """Integral of S(x) dx / y_plus along the straight gap between cut j and cut j+1."""
    a, b = curve.gaps[j]
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    q = curve.quadrature
    poles = np.asarray(S.poles, dtype=complex)
    if poles.size:
        t = np.clip(((poles - a) * np.conj(b - a)).real / abs(b - a) ** 2, 0, 1)
        dist = np.min(np.abs(a + t * (b - a) - poles))
        if dist < 0.05 * abs(h):
            raise UnsupportedConfigurationError("a marked point lies too close to a b-cycle")

    def fun(N):
        t, w = _cheb(N)
        x = m + h * t
        G = S(x) * h * np.sqrt(1 - t * t) / curve.y_plus(x)
        return w * np.sum(G)

    return _converged(fun, q.chebyshev_nodes, q.chebyshev_max, tol, f"gap {j}")


def ellipse_radius(curve: CurveModel, k: int, obstacles: Sequence[complex] = ()) -> float:
    """Joukowski parameter for a loop around cut k avoiding other cuts and obstacles."""
    a, b = curve.cuts[k]
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    pts = [e for e in curve.roots if e not in (a, b)]
    for j, (c, d) in enumerate(curve.cuts):
        if j != k:
            pts.extend(c + (d - c) * np.linspace(0, 1, 33))
    if curve.odd_model:
        start, d = curve.ray
        pts.extend(start + d * np.geomspace(1e-3, 1e3, 60) * curve.scale)
    pts.extend(obstacles)
    z = (np.asarray(pts, dtype=complex) - m) / h
    w = z + np.sqrt(z - 1) * np.sqrt(z + 1)
    rho = np.log(np.abs(w))
    rho = rho[rho > 1e-9]
    return 0.5 * float(np.min(rho))


def ellipse_period(curve: CurveModel, D: Differential, k: int, tol: float = 1e-13,
                   obstacles: Sequence[complex] = ()):
    """Counterclockwise loop integral of D around cut k on sheet +1."""
    a, b = curve.cuts[k]
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    obst = [p for p in D.poles if _outside(p, a, b)] + list(obstacles)
    rho = ellipse_radius(curve, k, obst)
    q = curve.quadrature

    def fun(N):
        th = 2 * np.pi * np.arange(N) / N
        w = np.exp(rho + 1j * th)
        x = m + 0.5 * h * (w + 1 / w)
        dx = 0.5j * h * (w - 1 / w)
        return np.sum(D(x, curve.y_plus(x)) * dx) * (2 * np.pi / N)

    return _converged(fun, q.ellipse_nodes, q.ellipse_max, tol, f"loop around cut {k}")


def _outside(p, a, b) -> bool:
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    z = (p - m) / h
    return not (abs(z.imag) < 1e-9 and abs(z.real) <= 1 + 1e-9)


@dataclass(frozen=True)
class HomologyBasis:
    cuts: tuple
    gaps: tuple
    b_sign: int

    def to_dict(self) -> dict:
        return {"cuts": [list(c) for c in self.cuts], "gaps": [list(g) for g in self.gaps],
                "b_sign": self.b_sign}


@dataclass(frozen=True)
class PeriodData:
    curve: CurveModel
    B: RiemannMatrix
    C: np.ndarray
    a_raw: np.ndarray
    b_raw: np.ndarray
    basis: HomologyBasis
    base: MarkedPoint
    symmetry_residual: float
    quadrature_error: float
    riemann_constants: np.ndarray | None = None

    @property
    def g(self) -> int:
        return self.curve.genus

    @cached_property
    def omegas(self) -> list[Differential]:
        return normalized_holomorphic(self.curve, self.C)

    @cached_property
    def integrator(self) -> PathIntegrator:
        return PathIntegrator(self.curve, self.omegas, self.base)

    def a_period(self, D: Differential, k: int, obstacles: Sequence[complex] = ()) -> complex:
        return ellipse_period(self.curve, D, k, obstacles=obstacles)[0]

    def b_period(self, D: Differential, k: int) -> complex:
        """b_k-period of an anti-invariant part; invariant R(x)dx parts cancel."""
        tot = 0j
        for j in range(k, self.g):
            tot += 2 * gap_integral(self.curve, D.S, j)[0]
        return self.basis.b_sign * tot

    def with_constants(self, K) -> "PeriodData":
        return replace(self, riemann_constants=np.asarray(K, dtype=complex))


def normalized_holomorphic(curve: CurveModel, C: np.ndarray) -> list[Differential]:
    g = curve.genus
    return [Differential(S=Rational.polynomial(C[k]), name=f"omega{k + 1}") for k in range(g)]


def default_base(curve: CurveModel) -> MarkedPoint:
    if curve.marked_points:
        return curve.marked_points[0]
    if curve.odd_model:
        return MarkedPoint(None, 1, True)
    raise ParameterError("even-degree curve needs an explicit marked base point")


def riemann_matrix(curve: CurveModel, base: MarkedPoint | None = None) -> PeriodData:
    """Period matrix in the cut/gap homology basis."""
    g = curve.genus
    nus = holomorphic_basis(curve)
    a_raw = np.zeros((g, g), dtype=complex)
    b_gap = np.zeros((g, g), dtype=complex)
    err = 0.0
    for k in range(g):
        for j, nu in enumerate(nus):
            a_raw[k, j], e1 = cut_periods(curve, nu.S, k)
            b_gap[k, j], e2 = gap_integral(curve, nu.S, k)
            err = max(err, e1, e2)
    # b_k = sum of gap cycles k..g-1 (each twice the gap integral)
    b_raw = np.array([2 * b_gap[k:].sum(axis=0) for k in range(g)])
    C = np.linalg.inv(a_raw.T)
    Bm = C @ b_raw.T
    sign = 1
    if np.min(np.linalg.eigvalsh(0.5 * (Bm.imag + Bm.imag.T))) < 0:
        sign = -1
        Bm, b_raw = -Bm, -b_raw
    sym = float(np.max(np.abs(Bm - Bm.T)))
    if sym > 1e-6 * max(1.0, np.max(np.abs(Bm))):
        raise UnsupportedConfigurationError(
            f"period matrix not symmetric (residual {sym:.3g}); homology basis is not canonical")
    B = RiemannMatrix(0.5 * (Bm + Bm.T))
    basis = HomologyBasis(tuple(curve.cuts), tuple(curve.gaps), sign)
    return PeriodData(curve, B, C, a_raw, b_raw, basis, base or default_base(curve), sym, err)


# -- Abel map -------------------------------------------------------------------

def abel_map(period: PeriodData, path: PathOnCurve) -> np.ndarray:
    """A(p) along a path from the base point."""
    return _abel_with_end(period, path)[0]


def _abel_with_end(period: PeriodData, path: PathOnCurve):
    integ = period.integrator
    if path.end is not None:
        ch, _ = integ.end_chart(path.end)
        last = path.waypoints[-1] if path.waypoints else None
        if last is None or not _in_chart(ch, last):
            target = _chart_entry(ch, last)
            path = path.then(target)
    return integ.evaluate(path)


def _in_chart(ch: Chart, x) -> bool:
    r = EXIT_FRACTION * ch.radius
    if ch.kind == "regular":
        return abs((x - ch.x0) / ch.alpha) <= r
    if ch.kind == "branch":
        return abs(x - ch.x0) <= r * r
    if ch.kind == "infinity_branch":
        return abs(x) >= r ** -2
    return abs(x) >= 1 / r


def _chart_entry(ch: Chart, last) -> complex:
    r = 0.5 * ch.radius
    if ch.kind in ("regular", "branch"):
        d = (last - ch.x0) if last is not None else 1.0
        d = d / abs(d) if abs(d) else 1.0
        return ch.x0 + d * (r * abs(ch.alpha) if ch.kind == "regular" else r * r)
    d = last / abs(last) if last else 1.0
    return d * (r ** -2 if ch.kind == "infinity_branch" else 1 / r)


def loop_around(center: complex, radius: float, start_angle: float, n: int = 8) -> list:
    """Waypoints of a counterclockwise polygonal loop around a point."""
    ang = start_angle + 2 * np.pi * np.arange(1, n + 1) / n
    return list(center + radius * np.exp(1j * ang))


def conjugate_point_path(period: PeriodData) -> PathOnCurve:
    """Path from a finite base point P to its sheet-conjugate point (x(P), -y(P))."""
    curve = period.curve
    x0 = period.base.x
    e = np.asarray(curve.roots)
    j = int(np.argmin(np.abs(e - x0)))
    ej = e[j]
    others = np.delete(e, j)
    rho = 0.3 * min(np.min(np.abs(others - ej)), abs(ej - x0))
    d = (x0 - ej) / abs(x0 - ej)
    ang = np.angle(d)
    start = ej + rho * d
    return PathOnCurve(tuple([start] + loop_around(ej, rho, ang, 12) + [x0]))


def canonical_class_image(period: PeriodData) -> np.ndarray:
    """A(K) for the canonical class with A(base) = 0."""
    base = period.base
    g = period.g
    if base.x is None or base.weierstrass:
        return np.zeros(g, dtype=complex)
    vals, x, y = period.integrator.evaluate(conjugate_point_path(period))
    y0 = period.curve.point_y(base)
    if abs(y + y0) > 1e-6 * max(1.0, abs(y0)):
        raise PathError("loop around branch point did not reach the conjugate point")
    return (g - 1) * vals


def random_points(period: PeriodData, n: int, rng: np.random.Generator, spread: float | None = None):
    """Random curve points reached by straight paths from the base point."""
    curve = period.curve
    R = spread if spread is not None else 1.5 * curve.scale
    out = []
    e = np.asarray(curve.roots)
    while len(out) < n:
        x = R * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1))
        if np.min(np.abs(e - x)) < 0.1 * curve.scale:
            continue
        sheet = int(rng.choice([-1, 1]))
        path = PathOnCurve((x,), start_sheet=sheet)
        try:
            vals, xe, ye = period.integrator.evaluate(path)
        except PathError:
            continue
        out.append((path, vals, xe, ye))
    return out


def riemann_constants(period: PeriodData, rng: np.random.Generator | None = None,
                      calibration: int = 3) -> np.ndarray:
    """Vector of Riemann constants for the base point.

    2K is the image of the canonical class; the half-lattice ambiguity is
    removed by the vanishing test on calibration divisors of degree g-1.
    """
    rng = rng or np.random.default_rng(20240611)
    g = period.g
    B = period.B
    AK = canonical_class_image(period)
    divisors = []
    for _ in range(calibration):
        pts = random_points(period, g - 1, rng)
        divisors.append(sum((p[1] for p in pts), np.zeros(g, dtype=complex)))
    best, best_score = None, np.inf
    for bits in itertools.product((0, 1), repeat=2 * g):
        n = np.array(bits[:g], dtype=float)
        m = np.array(bits[g:], dtype=float)
        K = 0.5 * AK + 0.5 * (n + B.B @ m)
        score = max(normalized_abs_theta(K - D, B) for D in divisors)
        if score < best_score:
            best, best_score = K, score
    w, _, _ = reduce_mod_lattice(best, B)
    return w


def theta_scale(z, B: RiemannMatrix) -> float:
    """Size of the dominant lattice term at z, exp(pi y^T Y^-1 y) with y = Im z."""
    y = np.imag(np.asarray(z, dtype=complex))
    return float(np.exp(np.pi * y @ B.Yinv @ y))


def normalized_abs_theta(z, B: RiemannMatrix, char=None) -> float:
    return abs(theta(z, B, char)) / theta_scale(z, B)


def with_riemann_constants(period: PeriodData, rng=None) -> PeriodData:
    return period.with_constants(riemann_constants(period, rng))
