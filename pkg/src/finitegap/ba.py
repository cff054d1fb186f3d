"""One-point and two-point Baker-Akhiezer functions, wave coefficients and fields."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .differentials import OnePointData, TwoPointData
from .errors import ParameterError, PrecisionError, ThetaDivisorWarning
from .paths import PathOnCurve
from .periods import theta_scale
from .theta import theta, theta_derivatives

POLE_LEVEL = 1e-10


@dataclass(frozen=True)
class FlowState:
    """Theta shift Z and times (x, y, t).

    One-point: t1 = x, t2 = y, t3 = t.  Two-point: t_{1,1} = y + t,
    t_{2,1} = -t and x is the discrete variable.
    """

    Z: np.ndarray
    x: complex = 0.0
    y: complex = 0.0
    t: complex = 0.0

    def shifted(self, dx=0.0, dy=0.0, dt=0.0) -> "FlowState":
        return FlowState(self.Z, self.x + dx, self.y + dy, self.t + dt)


@dataclass
class BAEvaluation:
    value: complex
    exponents: np.ndarray
    path: PathOnCurve | None
    near_pole: bool = False


@dataclass
class WaveCoefficients:
    xi: np.ndarray            # xi[0] = 1, xi[1..N]
    radius: float
    nodes: int
    leading: complex = 1.0    # e^f for expansions at P2


@dataclass
class DerivedFields:
    u: complex
    w: complex
    f: complex | None
    constants: dict


def flow_vector(data, x, y, t):
    """Linear flow sum t_i U_i for either setup (broadcasts over times)."""
    x, y, t = (np.asarray(v, dtype=complex)[..., None] for v in (x, y, t))
    if isinstance(data, OnePointData):
        return x * data.U[0] + y * data.U[1] + t * data.U[2]
    return x * data.U0 + (y + t) * data.U11 - t * data.U21


def flow_directions(data):
    """(d/dx, d/dy, d/dt) directions in C^g (x continuous)."""
    if isinstance(data, OnePointData):
        return data.U[0], data.U[1], data.U[2]
    return data.U0, data.U11, data.U11 - data.U21


def _exponent(data, x, y, t, Om):
    x, y, t = (np.asarray(v, dtype=complex) for v in (x, y, t))
    if isinstance(data, OnePointData):
        return x * Om[0] + y * Om[1] + t * Om[2]
    return x * Om[0] + (y + t) * Om[1] - t * Om[2]


def _check_pole(values, args, B, where: str) -> bool:
    near = False
    for v, z in zip(values, args):
        sc = theta_scale(z, B)
        if abs(v) < POLE_LEVEL * sc:
            warnings.warn(f"{where}: theta argument on the theta divisor", ThetaDivisorWarning)
            near = True
    return near


def psi_values(data, Z, A, Om, x, y, t, dual: bool = False):
    """BA function (or its dual) at fixed p for arrays of times."""
    B = data.B
    Z = np.asarray(Z, dtype=complex)
    x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (x, y, t)))
    two = isinstance(data, TwoPointData)
    fl = flow_vector(data, x, y, t)
    if not dual:
        num = theta(A + fl + Z, B) * theta(Z, B)
        den = theta(fl + Z, B) * theta(A + Z, B)
        return num / den * np.exp(_exponent(data, x, y, t, Om))
    if two:
        U = data.U0
        num = theta(A - fl - U - Z, B) * theta(Z + U, B)
        den = theta(fl + U + Z, B) * theta(A - Z - U, B)
    else:
        num = theta(A - fl - Z, B) * theta(Z, B)
        den = theta(fl + Z, B) * theta(A - Z, B)
    return num / den * np.exp(-_exponent(data, x, y, t, Om))


def ba_one_point(data: OnePointData, state: FlowState, path: PathOnCurve,
                 dual: bool = False) -> BAEvaluation:
    """psi(t, p) (or psi*) with A(p) and Omega_i(p) taken along one path."""
    A, Om, _, _ = data.integrals(path)
    return _ba(data, state, A, Om, path, dual)


def ba_two_point(data: TwoPointData, state: FlowState, path: PathOnCurve,
                 dual: bool = False) -> BAEvaluation:
    A, Om, _, _ = data.integrals(path)
    return _ba(data, state, A, Om, path, dual)


def _ba(data, state, A, Om, path, dual):
    B = data.B
    Z = np.asarray(state.Z, dtype=complex)
    fl = flow_vector(data, state.x, state.y, state.t)
    if dual and isinstance(data, TwoPointData):
        shift = -Z - data.U0
        args = [-(fl + data.U0 + Z), A + shift]
    elif dual:
        args = [-(fl + Z), A - Z]
    else:
        args = [fl + Z, A + Z]
    vals = [theta(a, B) for a in args]
    near = _check_pole(vals, args, B, "BA evaluation")
    value = complex(psi_values(data, Z, A, Om, state.x, state.y, state.t, dual))
    return BAEvaluation(value, np.asarray(Om), path, near)


# -- local expansions ------------------------------------------------------------

def _local_phi(data, state: FlowState, s, dual: bool, at: int):
    """psi divided by its essential singularity, at chart points s."""
    B = data.B
    Z = np.asarray(state.Z, dtype=complex)
    x, y, t = state.x, state.y, state.t
    if isinstance(data, OnePointData):
        A, Om = data.chart_integrals(s)
        n = np.arange(1, len(data.indices) + 1)
        H = Om - (np.asarray(s)[None, :] ** (-n[:, None].astype(float)))
        times = np.array([x, y, t][: len(data.indices)])
        fl = flow_vector(data, x, y, t)
        if not dual:
            q = theta(A.T + fl + Z, B) * theta(Z, B) / (theta(fl + Z, B) * theta(A.T + Z, B))
            return q * np.exp(times @ H)
        q = theta(A.T - fl - Z, B) * theta(Z, B) / (theta(fl + Z, B) * theta(A.T - Z, B))
        return q * np.exp(-(times @ H))
    A, Om = data.chart_integrals(s, at)
    s = np.asarray(s, dtype=complex)
    T11, T21 = y + t, -t
    H = Om.copy()
    if at == 1:
        H[0] = H[0] + np.log(s)        # Omega_0 = -log s + ...
        H[1] = H[1] - 1.0 / s          # Omega_{1,1} = 1/s + ...
    else:
        H[0] = H[0] - np.log(s)        # Omega_0 = log s + ...
        H[2] = H[2] - 1.0 / s
    fl = flow_vector(data, x, y, t)
    e = x * H[0] + T11 * H[1] + T21 * H[2]
    if not dual:
        q = theta(A.T + fl + Z, B) * theta(Z, B) / (theta(fl + Z, B) * theta(A.T + Z, B))
        return q * np.exp(e)
    U = data.U0
    q = (theta(A.T - fl - U - Z, B) * theta(Z + U, B)
         / (theta(fl + U + Z, B) * theta(A.T - Z - U, B)))
    return q * np.exp(-e)


def _chart_radius(data, at: int) -> float:
    if isinstance(data, OnePointData):
        return data.chart.radius
    return (data.chart1 if at == 1 else data.chart2).radius


def wave_coefficients(data, state: FlowState, N: int = 4, dual: bool = False, at: int = 1,
                      radius: float | None = None, nodes: int = 64, tol: float = 1e-9,
                      max_nodes: int = 1024) -> WaveCoefficients:
    """xi_1..xi_N by discrete contour integration on a circle in the chart."""
    if N > 6:
        raise ParameterError("at most six wave coefficients are supported")
    r = radius if radius is not None else _chart_radius(data, at)
    prev = None
    M = nodes
    while True:
        s = r * np.exp(2j * np.pi * np.arange(M) / M)
        phi = _local_phi(data, state, s, dual, at)
        c = np.fft.fft(phi) / M
        coef = c[: N + 1] / r ** np.arange(N + 1)
        if prev is not None and np.max(np.abs(coef - prev)) <= tol * max(1.0, np.max(np.abs(coef))):
            break
        if M >= max_nodes:
            if prev is None:
                prev = coef
                M *= 2
                continue
            err = float(np.max(np.abs(coef - prev)))
            raise PrecisionError("wave coefficients did not converge", achieved=err, requested=tol)
        prev = coef
        M *= 2
    lead = coef[0]
    return WaveCoefficients(coef / lead, r, M, complex(lead))


# -- analytic theta-jet forms ----------------------------------------------------

def log_theta_jets(z, B, dirs: Sequence[Sequence]):
    """theta and derivative values along the given direction lists at z."""
    return theta_derivatives(z, B, [[]] + [list(d) for d in dirs])


def xi_analytic(data: OnePointData, state: FlowState):
    """xi_1, xi_2 of the one-point function from theta jets."""
    B = data.B
    Z = np.asarray(state.Z, dtype=complex)
    U, V, W = data.U
    z = flow_vector(data, state.x, state.y, state.t) + Z

    def ell(w):
        th, tU, tV, tUU = log_theta_jets(w, B, [[U], [V], [U, U]])
        l1 = -tU / th
        l2 = -0.5 * tV / th + 0.5 * (tUU / th - (tU / th) ** 2)
        return l1, l2

    l1z, l2z = ell(z)
    l1Z, l2Z = ell(Z)
    times = np.array([state.x, state.y, state.t])
    e1 = l1z - l1Z + times @ data.a[:, 1]
    e2 = l2z - l2Z + times @ data.a[:, 2]
    return e1, e2 + 0.5 * e1 * e1


def derived_fields(data, state: FlowState) -> DerivedFields:
    """u, w (and f for the two-point setup) from the theta formulas."""
    B = data.B
    Z = np.asarray(state.Z, dtype=complex)
    z = flow_vector(data, state.x, state.y, state.t) + Z
    if isinstance(data, OnePointData):
        U, V, W = data.U
        th, tU, tUU, tUUU, tV, tUV = log_theta_jets(z, B, [[U], [U, U], [U, U, U], [V], [U, V]])
        lU, lUU = tU / th, tUU / th
        d2 = lUU - lU ** 2
        d3 = tUUU / th - 3 * lUU * lU + 2 * lU ** 3
        dxy = tUV / th - lU * tV / th
        b1 = 2 * data.a[0, 1]
        u = -2 * d2 + b1
        ux = -2 * d3
        xi1, xi2 = xi_analytic(data, state)
        # w from the B3 relation: w = 3 d_x xi_2 + 3 d_x^2 xi_1 - (3/2) u xi_1
        w = _w_from_xi(data, state, u)
        b3 = w - 0.75 * ux + 1.5 * dxy
        _check_pole([th], [z], B, "derived fields")
        return DerivedFields(complex(u), complex(w), None,
                             {"b1": complex(b1), "b3": complex(b3)})
    U, V = data.U0, data.U11
    th0 = theta(z, B)
    thp, tVp = log_theta_jets(z + U, B, [[V]])
    thm = theta(z - U, B)
    th, tV = log_theta_jets(z, B, [[V]])
    b1 = data.b1
    u = b1 + tVp / thp - tV / th
    b2 = data.b2
    w = b2 * thp * thm / th ** 2
    c = data.a2[:, 0]
    f = (np.log(thp / th0) + state.x * c[0] + (state.y + state.t) * c[1] - state.t * c[2])
    _check_pole([th0], [z], B, "derived fields")
    return DerivedFields(complex(u), complex(w), complex(f), {"b1": complex(b1), "b2": complex(b2)})


def field_grid(data, Z, xs, ys, ts, name: str = "u"):
    """u (or the Toda field f) on the tensor grid xs x ys x ts.

    Returns the values, shape (len(xs), len(ys), len(ts)), and a boolean mask
    of samples within 1e-10 * scale of the theta divisor.
    """
    X, Y, T = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), np.asarray(ts, float),
                          indexing="ij")
    z = flow_vector(data, X, Y, T) + np.asarray(Z, dtype=complex)
    B = data.B
    y = z.imag
    scale = np.exp(np.pi * np.einsum("...i,ij,...j->...", y, B.Yinv, y))
    if isinstance(data, OnePointData):
        if name != "u":
            raise ParameterError("the field f needs two-point data")
        U = data.U[0]
        th, tU, tUU = theta_derivatives(z, B, [[], [U], [U, U]])
        vals = -2 * (tUU / th - (tU / th) ** 2) + 2 * data.a[0, 1]
        pole = np.abs(th) < 1e-10 * scale
        return vals, pole
    U, V = data.U0, data.U11
    th, tV = theta_derivatives(z, B, [[], [V]])
    thp, tVp = theta_derivatives(z + U, B, [[], [V]])
    yp = (z + U).imag
    scale_p = np.exp(np.pi * np.einsum("...i,ij,...j->...", yp, B.Yinv, yp))
    pole = (np.abs(th) < 1e-10 * scale) | (np.abs(thp) < 1e-10 * scale_p)
    if name == "u":
        vals = data.b1 + tVp / thp - tV / th
    elif name == "f":
        c = data.a2[:, 0]
        vals = np.log(thp / th) + X * c[0] + (Y + T) * c[1] - T * c[2]
    else:
        raise ParameterError(f"unknown field {name!r}; expected u or f")
    return vals, pole


def _w_from_xi(data: OnePointData, state: FlowState, u) -> complex:
    """w = 3 d_x xi_2 + 3 d_x^2 xi_1 - (3/2) u xi_1 using Richardson-extrapolated differences."""
    def d(fun, h):
        return (fun(h) - fun(-h)) / (2 * h)

    def xi(k, dx):
        return xi_analytic(data, state.shifted(dx=dx))[k]

    def first(k, h):
        return (4 * d(lambda e: xi(k, e), h / 2) - d(lambda e: xi(k, e), h)) / 3

    def second(k, h):
        def dd(hh):
            return (xi(k, hh) - 2 * xi(k, 0) + xi(k, -hh)) / hh ** 2
        return (4 * dd(h / 2) - dd(h)) / 3

    h = 1e-2
    xi1 = xi(0, 0.0)
    return complex(3 * first(1, h) + 3 * second(0, h) - 1.5 * u * xi1)


# -- residue pairings --------------------------------------------------------------

def divisor_differential(data, points_xy: Sequence[tuple]):
    """Coefficients alpha with dOmega + sum alpha_k omega_k vanishing at the points.

    For the one-point setup dOmega = dOmega_1, otherwise dOmega_0.
    """
    base = data.mer[0].differential
    M = np.array([[w(x, y) for w in data.period.omegas] for x, y in points_xy])
    rhs = -np.array([base(x, y) for x, y in points_xy])
    return np.linalg.solve(M, rhs)


def residue_pairing(data, i: int, m: int, state: FlowState, divisor_points: Sequence[tuple],
                    h: float = 1e-2, nodes: int = 128) -> complex:
    """Residue at P (or P1) of (d^i psi*)(d^m psi) dOmega on a chart circle.

    One-point: x-derivatives of orders i, m by Richardson-extrapolated
    central differences.  Two-point: psi* times T^m psi (i must be 0).
    ``state.Z`` must be K - sum A(gamma_s) for the listed divisor points.
    """
    alpha = divisor_differential(data, divisor_points)
    if isinstance(data, OnePointData):
        chart = data.chart
    else:
        chart = data.chart1
    r = 0.5 * chart.radius
    s = r * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    xs, ys, dxs = chart.x(s), chart.y(s), chart.dx(s)
    base = data.mer[0].differential
    dOm = (base(xs, ys) + sum(a * w(xs, ys) for a, w in zip(alpha, data.period.omegas))) * dxs
    if isinstance(data, OnePointData):
        A, Om = data.chart_integrals(s)
    else:
        A, Om = data.chart_integrals(s, 1)

    def psi_at(dx, dual):
        return _psi_on_circle(data, state.shifted(dx=dx), A, Om, dual)

    if isinstance(data, OnePointData):
        left = _xderiv(lambda e: psi_at(e, True), i, h)
        right = _xderiv(lambda e: psi_at(e, False), m, h)
    else:
        if i != 0:
            raise ParameterError("two-point pairing uses shifts of psi only (i = 0)")
        left = psi_at(0.0, True)
        right = psi_at(float(m), False)
    # (1/2 pi i) \oint F ds with ds = i s dphi
    return complex(np.mean(left * right * dOm * s))


def _psi_on_circle(data, state, A, Om, dual):
    Z = np.asarray(state.Z, dtype=complex)
    vals = []
    for k in range(A.shape[1]):
        vals.append(psi_values(data, Z, A[:, k], Om[:, k], state.x, state.y, state.t, dual))
    return np.array(vals, dtype=complex)


def _xderiv(fun, order: int, h: float):
    if order == 0:
        return fun(0.0)

    def stencil(hh):
        if order == 1:
            return (fun(hh) - fun(-hh)) / (2 * hh)
        if order == 2:
            return (fun(hh) - 2 * fun(0.0) + fun(-hh)) / hh ** 2
        raise ParameterError("derivative order above 2 is not supported")

    return (4 * stencil(h / 2) - stencil(h)) / 3
