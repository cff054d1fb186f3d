"""Local charts at marked points and path integration of differentials."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curve import CurveModel, Differential, MarkedPoint
from .errors import ParameterError, PathError

CHART_FRACTION = 0.2
EXIT_FRACTION = 0.8


@dataclass(frozen=True)
class PathOnCurve:
    """Polyline in the x-plane leaving the base point.

    ``start_sheet`` picks the exit branch when the base chart is ramified
    (two s-values over one x).  ``end`` optionally names a marked point
    (typically a branch point) that the path runs into after its last
    waypoint.
    """

    waypoints: tuple = ()
    start_sheet: int = 1
    step_bound: float | None = None
    end: MarkedPoint | None = None

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(complex(w) for w in self.waypoints))

    def mirrored(self) -> "PathOnCurve":
        end = None if self.end is None else MarkedPoint(
            None if self.end.x is None else -self.end.x, self.end.sheet, self.end.weierstrass)
        return PathOnCurve(tuple(-w for w in self.waypoints), self.start_sheet, self.step_bound, end)

    def then(self, *points) -> "PathOnCurve":
        return PathOnCurve(self.waypoints + tuple(complex(p) for p in points),
                           self.start_sheet, self.step_bound, self.end)


class Chart:
    """Local parameter s at a point of the curve (s = 0 at the point).

    kinds: ``regular`` x = x0 + alpha s; ``branch`` x = e + s^2;
    ``infinity_branch`` x = s^-2; ``infinity_regular`` x = 1/s.
    """

    def __init__(self, curve: CurveModel, point: MarkedPoint, alpha: complex = 1.0,
                 radius: float | None = None, avoid: Sequence[complex] = (), nodes: int | None = None):
        self.curve = curve
        self.point = point
        self.alpha = complex(alpha)
        e = np.asarray(curve.roots, dtype=complex)
        avoid = np.asarray([a for a in avoid if a is not None], dtype=complex)
        self.nodes = nodes or curve.quadrature.chart_nodes
        if point.x is None:
            big = max(np.max(np.abs(e)), np.max(np.abs(avoid)) if avoid.size else 0.0, 1e-3)
            if curve.odd_model:
                self.kind = "infinity_branch"
                r = np.sqrt(CHART_FRACTION / big)
            else:
                self.kind = "infinity_regular"
                r = CHART_FRACTION / big
            self.x0 = None
        elif curve.is_branch_x(point.x):
            self.kind = "branch"
            j = int(np.argmin(np.abs(e - point.x)))
            self.x0 = complex(e[j])
            others = np.delete(e, j)
            d = np.min(np.abs(np.concatenate([others - self.x0, avoid - self.x0])))
            r = np.sqrt(CHART_FRACTION * d)
            self._c = np.sqrt(curve.lead * np.prod(self.x0 - others)) * point.sheet
            self._others = others
        else:
            self.kind = "regular"
            self.x0 = complex(point.x)
            near = [x for x in avoid if abs(x - self.x0) > 1e-12]
            d = np.min(np.abs(np.concatenate([e - self.x0, np.asarray(near, dtype=complex) - self.x0])))
            r = CHART_FRACTION * d / abs(self.alpha)
            self.y0 = complex(curve.y_principal(self.x0, point.sheet))
        self.radius = float(radius if radius is not None else r)
        self._roots = e

    # -- coordinates -------------------------------------------------------
    def x(self, s):
        s = np.asarray(s, dtype=complex)
        if self.kind == "regular":
            return self.x0 + self.alpha * s
        if self.kind == "branch":
            return self.x0 + s * s
        if self.kind == "infinity_branch":
            return s ** -2
        return 1.0 / s

    def dx(self, s):
        s = np.asarray(s, dtype=complex)
        if self.kind == "regular":
            return np.full(s.shape, self.alpha)
        if self.kind == "branch":
            return 2 * s
        if self.kind == "infinity_branch":
            return -2 * s ** -3
        return -s ** -2

    def y(self, s):
        s = np.asarray(s, dtype=complex)
        e = self._roots
        c = self.curve
        if self.kind == "regular":
            out = np.full(s.shape, self.y0)
            for ei in e:
                out = out * np.sqrt(1 + self.alpha * s / (self.x0 - ei))
            return out
        if self.kind == "branch":
            out = self._c * s
            for ei in self._others:
                out = out * np.sqrt(1 + s * s / (self.x0 - ei))
            return out
        sheet = self.point.sheet
        if self.kind == "infinity_branch":
            out = sheet * c.sqrt_lead * s ** (-(2 * c.genus + 1))
            for ei in e:
                out = out * np.sqrt(1 - ei * s * s)
            return out
        out = sheet * c.sqrt_lead * s ** (-(c.genus + 1))
        for ei in e:
            out = out * np.sqrt(1 - ei * s)
        return out

    def s_of_x(self, x, sheet: int = 1):
        x = complex(x)
        if self.kind == "regular":
            return (x - self.x0) / self.alpha
        if self.kind == "branch":
            return sheet * np.sqrt(x - self.x0)
        if self.kind == "infinity_branch":
            return sheet / np.sqrt(x)
        return 1.0 / x

    def s_of_point(self, x, y):
        """Chart parameter of the curve point (x, y), which must lie in the chart."""
        cands = [self.s_of_x(x, 1)]
        if self.kind in ("branch", "infinity_branch"):
            cands.append(-cands[0])
        best = min(cands, key=lambda s: abs(self.y(s) - y))
        if abs(self.y(best) - y) > 1e-6 * max(1.0, abs(y)):
            raise PathError("point is not on the branch of this chart (opposite sheet)")
        return complex(best)

    def circle(self, radius: float | None = None, nodes: int | None = None):
        M = nodes or self.nodes
        r = self.radius if radius is None else radius
        return r * np.exp(2j * np.pi * np.arange(M) / M)

    # -- expansions --------------------------------------------------------
    def laurent(self, diffs: Sequence[Differential], radius: float | None = None,
                nodes: int | None = None) -> "LaurentTable":
        """Laurent coefficients in s of each differential, D = sum c_n s^n ds."""
        M = nodes or self.nodes
        r = self.radius if radius is None else radius
        s = self.circle(r, M)
        xs, ys, dxs = self.x(s), self.y(s), self.dx(s)
        vals = np.array([d(xs, ys) * dxs for d in diffs])
        return LaurentTable.from_samples(vals, r)

    def laurent_of_values(self, values, radius: float | None = None) -> "LaurentTable":
        r = self.radius if radius is None else radius
        return LaurentTable.from_samples(np.atleast_2d(values), r)


@dataclass
class LaurentTable:
    """Coefficients c[k, n] for n in [nmin, nmax]."""

    coeffs: np.ndarray
    nmin: int
    radius: float

    @classmethod
    def from_samples(cls, vals: np.ndarray, r: float) -> "LaurentTable":
        M = vals.shape[-1]
        F = np.fft.fft(vals, axis=-1) / M          # F[k] = c_k r^k, aliased mod M
        n = np.fft.fftfreq(M, 1.0 / M).astype(int)
        order = np.argsort(n)
        n = n[order]
        scaled = F[:, order]
        mag = np.max(np.abs(scaled), axis=1, keepdims=True)
        keep = (n >= 0) | (np.abs(scaled) > 1e-10 * mag)
        scaled = np.where(keep, scaled, 0)
        coeffs = scaled * float(r) ** (-n.astype(float))
        return cls(coeffs, int(n[0]), float(r))

    def c(self, n: int):
        i = n - self.nmin
        if i < 0 or i >= self.coeffs.shape[1]:
            return np.zeros(self.coeffs.shape[0], dtype=complex)
        return self.coeffs[:, i]

    def antiderivative(self, s, with_log: bool = True):
        """Sum_{n != -1} c_n s^{n+1}/(n+1) + c_{-1} log s, shape (k, len(s))."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        n = np.arange(self.nmin, self.nmin + self.coeffs.shape[1])
        mask = n != -1
        p = (n[mask] + 1)
        pw = s[None, :] ** p[:, None] / p[:, None]
        out = self.coeffs[:, mask] @ pw
        if with_log:
            out = out + self.c(-1)[:, None] * np.log(s)[None, :]
        return out

    def taylor(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        n = np.arange(self.nmin, self.nmin + self.coeffs.shape[1])
        return self.coeffs @ (s[None, :] ** n[:, None])


_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        t, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (t + 1), 0.5 * w)
    return _GL_CACHE[n]


def continue_y(curve: CurveModel, xs: np.ndarray, y_prev: complex) -> np.ndarray:
    """Analytic continuation of y along consecutive points xs by nearest-root choice."""
    r = np.sqrt(curve.f(xs))
    prev = np.concatenate([[y_prev], r[:-1]])
    flip = np.where((r * np.conj(prev)).real < 0, -1.0, 1.0)
    first = 1.0 if (r[0] * np.conj(y_prev)).real >= 0 else -1.0
    flip[0] = first
    signs = np.cumprod(flip)
    ys = signs * r
    jump = np.abs(np.diff(np.concatenate([[y_prev], ys])))
    if np.any(jump > 0.5 * np.maximum(np.abs(ys), 1e-300)):
        raise _StepTooLarge()
    return ys


class _StepTooLarge(Exception):
    pass


def _segment_pieces(p: complex, q: complex, singular: np.ndarray, frac: float,
                    step_bound: float | None, min_dist: float, depth: int = 0):
    """Split [p, q] so each piece is short relative to its distance to singular points."""
    L = abs(q - p)
    if L == 0:
        return []
    d = q - p
    if singular.size:
        t = np.clip(((singular - p) * np.conj(d)).real / (L * L), 0, 1)
        dist = float(np.min(np.abs(p + t * d - singular)))
    else:
        dist = np.inf
    if dist < min_dist:
        raise PathError(f"path passes within {dist:.3g} of a singular point")
    limit = frac * dist
    if step_bound is not None:
        limit = min(limit, step_bound)
    if L <= limit or depth > 60:
        return [(p, q)]
    m = 0.5 * (p + q)
    return (_segment_pieces(p, m, singular, frac, step_bound, min_dist, depth + 1)
            + _segment_pieces(m, q, singular, frac, step_bound, min_dist, depth + 1))


def integrate_polyline(curve: CurveModel, diffs: Sequence[Differential], xs: Sequence[complex],
                       y_start: complex, step_bound: float | None = None,
                       extra_singular: Sequence[complex] = ()):
    """Integrate differentials along a polyline starting at (xs[0], y_start).

    Returns (integrals, y_end).
    """
    q = curve.quadrature
    sing = list(curve.roots) + [p for d in diffs for p in d.poles] + list(extra_singular)
    sing = np.asarray(sing, dtype=complex)
    total = np.zeros(len(diffs), dtype=complex)
    y = complex(y_start)
    t, w = _gauss_legendre(q.legendre_nodes)
    min_dist = q.min_branch_distance * curve.scale
    stack = []
    for a, b in zip(xs[:-1], xs[1:]):
        stack.extend(_segment_pieces(complex(a), complex(b), sing, q.step_fraction, step_bound, min_dist))
    stack.reverse()
    while stack:
        a, b = stack.pop()
        pts = a + (b - a) * np.concatenate([t, [1.0]])
        try:
            ys = continue_y(curve, pts, y)
        except _StepTooLarge:
            if abs(b - a) < min_dist:
                raise PathError("sheet tracking failed: step cannot be refined further")
            m = 0.5 * (a + b)
            stack.extend([(m, b), (a, m)])
            continue
        vals = np.array([d(pts[:-1], ys[:-1]) for d in diffs])
        total += (vals @ w) * (b - a)
        y = complex(ys[-1])
    return total, y


class PathIntegrator:
    """Integrals of a fixed family of differentials from a base point.

    Every differential is normalized by zero constant term in the local
    expansion at the base point (log terms use the principal branch).
    """

    def __init__(self, curve: CurveModel, diffs: Sequence[Differential], base: MarkedPoint,
                 alpha: complex = 1.0, avoid: Sequence[complex] = ()):
        self.curve = curve
        self.diffs = list(diffs)
        self.base = base
        poles = [p for d in self.diffs for p in d.poles]
        marks = [m.x for m in curve.marked_points if m.x is not None]
        self.chart = Chart(curve, base, alpha, avoid=list(avoid) + poles + marks)
        self.table = self.chart.laurent(self.diffs) if self.diffs else None
        self._end_charts: dict = {}

    def chart_values(self, s):
        """Integrals from the base point to chart points s (array)."""
        return self.table.antiderivative(s)

    def _exit(self, path: PathOnCurve):
        ch = self.chart
        first = path.waypoints[0]
        if ch.kind in ("regular", "branch"):
            d = first - ch.x0
            if ch.kind == "regular":
                s_first = d / ch.alpha
                if abs(s_first) <= EXIT_FRACTION * ch.radius:
                    return s_first, path.waypoints[1:]
                s_exit = EXIT_FRACTION * ch.radius * s_first / abs(s_first)
            else:
                rad = EXIT_FRACTION * ch.radius
                if abs(d) <= rad * rad:
                    return ch.s_of_x(first, path.start_sheet), path.waypoints[1:]
                s_exit = path.start_sheet * rad * np.sqrt(d / abs(d))
            return s_exit, path.waypoints
        rad = EXIT_FRACTION * ch.radius
        if ch.kind == "infinity_branch":
            R = rad ** -2
            if abs(first) >= R:
                return ch.s_of_x(first, path.start_sheet), path.waypoints[1:]
            direction = first / abs(first) if abs(first) > 0 else 1.0
            return ch.s_of_x(R * direction, path.start_sheet), path.waypoints
        R = 1.0 / rad
        if abs(first) >= R:
            return ch.s_of_x(first), path.waypoints[1:]
        direction = first / abs(first) if abs(first) > 0 else 1.0
        return ch.s_of_x(R * direction), path.waypoints

    def end_chart(self, point: MarkedPoint) -> tuple:
        key = (point.x, point.sheet)
        if key not in self._end_charts:
            marks = [m.x for m in self.curve.marked_points if m.x is not None and m.x != point.x]
            ch = Chart(self.curve, point, avoid=marks)
            self._end_charts[key] = (ch, ch.laurent(self.diffs))
        return self._end_charts[key]

    def evaluate(self, path: PathOnCurve):
        """Returns (integrals, x_end, y_end) along the path."""
        if not path.waypoints and path.end is None:
            return np.zeros(len(self.diffs), dtype=complex), self.chart.x0, None
        if not path.waypoints:
            raise ParameterError("a path to an end point needs at least one waypoint")
        s_exit, rest = self._exit(path)
        vals = self.table.antiderivative([s_exit])[:, 0]
        x = complex(self.chart.x(s_exit))
        y = complex(self.chart.y(s_exit))
        xs = [x] + list(rest)
        if len(xs) > 1:
            more, y = integrate_polyline(self.curve, self.diffs, xs, y, path.step_bound)
            vals = vals + more
            x = xs[-1]
        if path.end is not None:
            ch, tab = self.end_chart(path.end)
            s_in = ch.s_of_point(x, y)
            F = tab.antiderivative([s_in], with_log=False)[:, 0]
            vals = vals - F
            x = ch.x0 if ch.x0 is not None else None
            y = 0.0 if ch.kind in ("branch",) else None
        return vals, x, y
