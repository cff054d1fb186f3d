"""Normalized second- and third-kind differentials, flow vectors and expansion constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curve import Differential, MarkedPoint, Rational, sqrt_series, taylor_at
from .errors import ParameterError, PathError, PrecisionError, UnsupportedConfigurationError
from .paths import Chart, PathIntegrator, PathOnCurve
from .periods import PeriodData, loop_around
from .theta import reduce_mod_lattice

S_MAX = 6


@dataclass(frozen=True)
class KindTag:
    """``second`` (index i at the base point), ``third`` (pair P1, P2) or
    ``second_at`` (index i at marked point number ``alpha`` of a two-point setup)."""

    kind: str
    index: int = 1
    alpha: int = 1


@dataclass
class MeromorphicData:
    tag: KindTag
    differential: Differential
    U: np.ndarray
    constants: dict
    a_periods: np.ndarray
    principal_part: np.ndarray
    U_bilinear: np.ndarray | None = None
    integrator: PathIntegrator | None = field(default=None, repr=False)

    def evaluate(self, path: PathOnCurve) -> complex:
        """Omega(p) along the path (normalized at the base point)."""
        return complex(self.integrator.evaluate(path)[0][0])


# -- raw differentials with prescribed principal parts ------------------------

def second_kind_regular(curve, x0: complex, y0: complex, i: int, alpha: complex = 1.0) -> Differential:
    """Differential with principal part d(s^-i), s = (x - x0)/alpha, at (x0, y0), regular elsewhere."""
    ycoef = sqrt_series(taylor_at(curve, x0), y0, i)
    pref = -0.5 * i * alpha ** i
    R = Rational(((pref, x0, -i - 1),))
    S = Rational(tuple((pref * ycoef[n], x0, n - i - 1) for n in range(i + 1)))
    return Differential(R.simplify(), S.simplify(), f"eta{i}")


def _candidates_branch(curve, chart: Chart, order: int):
    g = curve.genus
    cands = []
    if chart.kind == "infinity_branch":
        n = 0
        while 2 * n + 2 <= order:
            cands.append((2 * n + 2, Differential(S=Rational(((1.0, 0j, g + n),)))))
            n += 1
        m = 0
        while 2 * m + 3 <= order:
            cands.append((2 * m + 3, Differential(R=Rational(((1.0, 0j, m),)))))
            m += 1
    elif chart.kind == "branch":
        e = chart.x0
        n = 1
        while 2 * n <= order:
            cands.append((2 * n, Differential(S=Rational(((1.0, e, -n),)))))
            n += 1
        m = 2
        while 2 * m - 1 <= order:
            cands.append((2 * m - 1, Differential(R=Rational(((1.0, e, -m),)))))
            m += 1
    else:
        raise UnsupportedConfigurationError(f"no candidate family for chart kind {chart.kind}")
    return cands


def second_kind_branch(curve, chart: Chart, i: int) -> Differential:
    """Principal part d(s^-i) at a ramified chart, by a triangular linear solve."""
    cands = _candidates_branch(curve, chart, i + 1)
    tab = chart.laurent([d for _, d in cands])
    orders = list(range(2, i + 2))
    A = np.array([[tab.c(-p)[k] for k in range(len(cands))] for p in orders])
    rhs = np.array([-i if p == i + 1 else 0.0 for p in orders], dtype=complex)
    cond = np.linalg.cond(A)
    if cond > 1e10:
        raise PrecisionError(f"principal-part system ill-conditioned (cond {cond:.3g})",
                             achieved=cond, requested=1e10)
    coef = np.linalg.solve(A, rhs)
    out = Differential(name=f"eta{i}")
    for c, (_, d) in zip(coef, cands):
        if abs(c) > 0:
            out = out + d.scale(c)
    return Differential(out.R, out.S, f"eta{i}")


def third_kind(curve, p1: tuple, p2: tuple) -> Differential:
    """Residue -1 at p1 = (x1, y1) and +1 at p2 = (x2, y2)."""
    (x1, y1), (x2, y2) = p1, p2
    R = Rational(((0.5, x2, -1), (-0.5, x1, -1)))
    S = Rational(((0.5 * y2, x2, -1), (-0.5 * y1, x1, -1)))
    return Differential(R, S, "eta0")


def normalize(period: PeriodData, D: Differential, obstacles: Sequence[complex] = ()):
    """Subtract holomorphic differentials so that all a-periods vanish."""
    g = period.g
    ap = np.array([period.a_period(D, k, obstacles) for k in range(g)])
    S = D.S
    for k in range(g):
        S = S + period.omegas[k].S.scale(-ap[k])
    out = Differential(D.R, S, D.name)
    check = np.array([period.a_period(out, k, obstacles) for k in range(g)])
    return out, ap, check


def b_vector(period: PeriodData, D: Differential) -> np.ndarray:
    return np.array([period.b_period(D, k) for k in range(period.g)]) / (2j * np.pi)


def _chart_for(period: PeriodData, point: MarkedPoint, alpha: complex = 1.0, avoid=()) -> Chart:
    marks = [m.x for m in period.curve.marked_points if m.x is not None]
    return Chart(period.curve, point, alpha, avoid=list(avoid) + marks)


def _expansion(tab, k: int, smax: int = S_MAX) -> np.ndarray:
    """a_s, s = 0..smax: coefficient of s^s in the zero-constant antiderivative."""
    out = np.zeros(smax + 1, dtype=complex)
    for s in range(1, smax + 1):
        out[s] = tab.c(s - 1)[k] / s
    return out


def meromorphic_data(period: PeriodData, tag: KindTag, points: Sequence[MarkedPoint] | None = None,
                     alphas: Sequence[complex] = (1.0, -1.0)) -> MeromorphicData:
    """Normalized differential of the requested kind with its flow vector and constants.

    ``points`` defaults to the curve's marked points; for the two-point
    kinds the local parameters are s_alpha = (x - x(P_alpha)) / alphas[alpha-1].
    """
    curve = period.curve
    points = list(points or curve.marked_points or [period.base])
    if tag.kind == "second":
        P = points[0]
        chart = _chart_for(period, P, alphas[0] if P.x is not None and not P.weierstrass else 1.0)
        if chart.kind == "regular":
            D = second_kind_regular(curve, chart.x0, chart.y0, tag.index, chart.alpha)
        else:
            D = second_kind_branch(curve, chart, tag.index)
        obst = []
        where = chart
    elif tag.kind == "second_at":
        P = points[tag.alpha - 1]
        chart = _chart_for(period, P, alphas[tag.alpha - 1])
        if chart.kind != "regular":
            raise UnsupportedConfigurationError("two-point marked points must be regular points")
        D = second_kind_regular(curve, chart.x0, chart.y0, tag.index, chart.alpha)
        obst = [p.x for p in points]
        where = chart
    elif tag.kind == "third":
        if len(points) < 2:
            raise ParameterError("third-kind data needs two marked points")
        ys = [curve.point_y(p) for p in points[:2]]
        D = third_kind(curve, (points[0].x, ys[0]), (points[1].x, ys[1]))
        obst = [p.x for p in points[:2]]
        where = _chart_for(period, points[0], alphas[0])
    else:
        raise ParameterError(f"unknown kind {tag.kind!r}")
    dOmega, ap, check = normalize(period, D, obst)
    if np.max(np.abs(check)) > 1e-8:
        raise PrecisionError("a-periods of the normalized differential do not vanish",
                             achieved=float(np.max(np.abs(check))), requested=1e-8)
    U = b_vector(period, dOmega)
    tab = where.laurent([dOmega] + period.omegas)
    order = tag.index + 1 if tag.kind != "third" else 1
    principal = np.array([tab.c(-n)[0] for n in range(1, order + 2)])
    consts = {"a": _expansion(tab, 0)}
    U_bil = None
    if tag.kind in ("second", "second_at"):
        # coefficient of s^(i-1) in omega_k / ds
        U_bil = -np.array([tab.c(tag.index - 1)[1 + k] for k in range(period.g)])
    mer = MeromorphicData(tag, dOmega, U, consts, check, principal, U_bil)
    return mer


# -- bundles used by the BA functions ------------------------------------------

class OnePointData:
    """Period data plus dOmega_1..3 at the base point P, sharing one integrator."""

    def __init__(self, period: PeriodData, indices: Sequence[int] = (1, 2, 3)):
        self.period = period
        self.P = period.base
        self.indices = tuple(indices)
        self.mer = [meromorphic_data(period, KindTag("second", i), [self.P]) for i in self.indices]
        diffs = list(period.omegas) + [m.differential for m in self.mer]
        self.integrator = PathIntegrator(period.curve, diffs, self.P)
        self.chart = self.integrator.chart
        self.U = np.array([m.U for m in self.mer])          # (3, g)
        self.a = np.array([m.constants["a"] for m in self.mer])  # (3, S_MAX + 1)
        self.g = period.g

    @property
    def B(self):
        return self.period.B

    @property
    def K(self):
        return self.period.riemann_constants

    def integrals(self, path: PathOnCurve):
        """(A(p), Omega_i(p)) along the same path."""
        vals, x, y = self.integrator.evaluate(path)
        return vals[: self.g], vals[self.g:], x, y

    def chart_integrals(self, s):
        """A and Omega_i at chart points s (regular parts included)."""
        vals = self.integrator.chart_values(np.atleast_1d(s))
        return vals[: self.g], vals[self.g:]


class TwoPointData:
    """Third-kind and first second-kind differentials at P1, P2 (base P1)."""

    def __init__(self, period: PeriodData, lattice_shift=None):
        """``lattice_shift = (n, m)`` replaces U by U + n + B m; the B m part is
        realized by adding 2 pi i sum m_k omega_k to dOmega_0 (values at
        integer x are unchanged)."""
        curve = period.curve
        if len(curve.marked_points) < 2:
            raise ParameterError("two-point data needs two marked points")
        self.period = period
        self.P1, self.P2 = curve.marked_points[:2]
        self.g = period.g
        pts = [self.P1, self.P2]
        self.third = meromorphic_data(period, KindTag("third"), pts)
        self.lattice_shift = None
        if lattice_shift is not None:
            n, m = (np.asarray(v, dtype=float) for v in lattice_shift)
            D = self.third.differential
            for k in range(self.g):
                if m[k]:
                    D = D + period.omegas[k].scale(2j * np.pi * m[k])
            D = Differential(D.R, D.S, D.name)
            U = self.third.U + n + period.B.B @ m
            self.third = MeromorphicData(self.third.tag, D, U, self.third.constants,
                                         self.third.a_periods, self.third.principal_part)
            self.lattice_shift = (n, m)
        self.second = [meromorphic_data(period, KindTag("second_at", 1, a), pts) for a in (1, 2)]
        self.mer = [self.third] + self.second
        diffs = list(period.omegas) + [m.differential for m in self.mer]
        self.integrator = PathIntegrator(curve, diffs, self.P1, 1.0, avoid=[self.P2.x])
        self.chart1 = self.integrator.chart
        self.chart2 = Chart(curve, self.P2, -1.0, avoid=[self.P1.x])
        self.table2 = self.chart2.laurent(diffs)
        self.U0 = self.third.U
        self.U11, self.U21 = self.second[0].U, self.second[1].U
        self._anchor()

    @property
    def B(self):
        return self.period.B

    @property
    def K(self):
        return self.period.riemann_constants

    @property
    def V(self):
        return self.U11

    @property
    def W(self):
        return self.U11 - self.U21

    def path_to_P2(self) -> PathOnCurve:
        """A path from P1 into the P2 chart arriving on the sheet of P2."""
        curve = self.period.curve
        x2 = self.P2.x
        target = x2 + 0.5 * self.chart2.radius * (-1.0) * (1 + 0j)
        mid = 0.5 * (self.P1.x + x2)
        e = np.asarray(curve.roots)
        base = [self.P1.x + 0.5 * (mid - self.P1.x) + 0.6j * curve.scale, target]
        for attempt in range(2 * len(e) + 1):
            if attempt == 0:
                way = base
            else:
                j = (attempt - 1) // 2
                ej = e[np.argsort(np.abs(e - mid))[j]]
                others = np.delete(e, np.argsort(np.abs(e - mid))[j])
                rho = 0.3 * np.min(np.abs(others - ej))
                way = [ej + rho] + loop_around(ej, rho, 0.0, 12) + [target]
            path = PathOnCurve(tuple(way))
            try:
                _, x, y = self.integrator.evaluate(path)
            except PathError:
                continue
            s = (x - x2) / self.chart2.alpha
            if abs(y - self.chart2.y(s)) < 1e-6 * max(1.0, abs(y)):
                return path
        raise PathError("could not reach the second marked point on its sheet")

    def _anchor(self):
        g = self.g
        path = self.path_to_P2()
        vals, x, y = self.integrator.evaluate(path)
        s2 = self.chart2.s_of_point(x, y)
        local = self.table2.antiderivative([s2])[:, 0]
        const = vals - local                     # values at P2 of the regular parts
        A2 = const[:g]
        w, n, m = reduce_mod_lattice(A2 - self.U0, self.B)
        self.lattice_defect = float(np.max(np.abs(w)))
        self.A_P2 = A2 - n - self.B.B @ m
        Us = [self.U0, self.U11, self.U21]
        self.c2 = np.array([const[g + j] - 2j * np.pi * (m @ Us[j]) for j in range(3)])
        if self.lattice_shift is not None:
            # dOmega_0 now has a-periods 2 pi i m_shift
            self.c2[0] -= 2j * np.pi * (n @ self.lattice_shift[1])
        self.path2 = path
        # expansion tables
        t1 = self.integrator.table
        self.a1 = np.array([_expansion(t1, g + j) for j in range(3)])     # at P1
        self.a2 = np.array([_expansion(self.table2, g + j) for j in range(3)])
        self.a2[:, 0] = self.c2

    @property
    def b1(self) -> complex:
        # (1 - T) xi_{1,1} = u forces the minus sign in front of a_{1,1}^{(0)}
        return complex(-self.a1[0, 1])

    @property
    def b2(self) -> complex:
        return complex(np.exp(self.a2[0, 0]))

    def integrals(self, path: PathOnCurve):
        vals, x, y = self.integrator.evaluate(path)
        return vals[: self.g], vals[self.g:], x, y

    def chart_integrals(self, s, at: int = 1):
        s = np.atleast_1d(s)
        if at == 1:
            vals = self.integrator.chart_values(s)
        else:
            vals = self.table2.antiderivative(s)
            vals[: self.g] += self.A_P2[:, None]
            vals[self.g:] += self.c2[:, None]
        return vals[: self.g], vals[self.g:]
