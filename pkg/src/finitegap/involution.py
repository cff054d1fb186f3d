"""Action of sigma(x, y) = (-x, y) on the Jacobian of an even curve and the Prym shift."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .curve import MarkedPoint
from .errors import InvolutionError, LocusError, ParameterError, PathError
from .paths import PathIntegrator, PathOnCurve
from .periods import PeriodData
from .theta import reduce_mod_lattice, theta

FIT_TOL = 1e-7


@dataclass
class InvolutionData:
    M: np.ndarray               # A(sigma p) = M A(p) + v
    v: np.ndarray
    fit_residual: float
    fixed_points: list
    kappa: np.ndarray           # right-hand side of (1 + M) zeta = kappa mod lattice
    zeta: np.ndarray
    plus: np.ndarray            # basis of E+ (columns), M = +1
    minus: np.ndarray           # basis of E- (columns), M = -1
    mode: str

    @property
    def prym_directions(self) -> np.ndarray:
        return self.minus

    def perturbed(self, eps: float, rng: np.random.Generator | None = None) -> np.ndarray:
        """zeta moved by eps along a unit invariant direction (off the locus)."""
        rng = rng or np.random.default_rng(0)
        c = rng.normal(size=self.plus.shape[1]) + 1j * rng.normal(size=self.plus.shape[1])
        d = self.plus @ c
        return self.zeta + eps * d / np.linalg.norm(d)

    def to_dict(self) -> dict:
        return {"M": self.M, "v": self.v, "fit_residual": self.fit_residual,
                "fixed_points": [p.to_dict() for p in self.fixed_points],
                "kappa": self.kappa, "zeta": self.zeta, "mode": self.mode}


def action_matrix(period: PeriodData) -> np.ndarray:
    """sigma* x^j dx/y = (-1)^(j+1) x^j dx/y, conjugated into the normalized basis."""
    g = period.g
    D = np.diag([(-1.0) ** (j + 1) for j in range(g)])
    return period.C @ D @ np.linalg.inv(period.C)


def eigenbases(M: np.ndarray, tol: float = 1e-8):
    w, vec = np.linalg.eig(M)
    plus = vec[:, np.abs(w - 1) < tol]
    minus = vec[:, np.abs(w + 1) < tol]
    if plus.shape[1] + minus.shape[1] != M.shape[0]:
        raise InvolutionError("involution matrix is not diagonalizable with eigenvalues +-1")
    return plus, minus


def fit_action(period: PeriodData, M: np.ndarray, n: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Largest lattice-reduced mismatch of A(sigma p) - M A(p) over mirrored paths.

    Paths start at the sigma-fixed point (0, sqrt f(0)), so no translation enters.
    """
    curve = period.curve
    g = period.g
    rng = rng or np.random.default_rng(7)
    n = n or 2 * g
    integ = PathIntegrator(curve, period.omegas, MarkedPoint(0j, 1))
    e = np.asarray(curve.roots)
    rows, worst = 0, 0.0
    R = 1.2 * curve.scale
    while rows < n:
        x = R * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1))
        if np.min(np.abs(e - x)) < 0.1 * curve.scale or np.min(np.abs(e + x)) < 0.1 * curve.scale:
            continue
        path = PathOnCurve((0.5 * x, x))
        try:
            A = integ.evaluate(path)[0]
            As = integ.evaluate(path.mirrored())[0]
        except PathError:
            continue
        w, _, _ = reduce_mod_lattice(As - M @ A, period.B)
        worst = max(worst, float(np.max(np.abs(w))))
        rows += 1
    return worst


def _lattice_solutions(R: np.ndarray, M: np.ndarray, B, span: int = 2):
    g = len(R)
    Pm = 0.5 * (np.eye(g) - M)
    out = []
    for nm in itertools.product(range(-span, span + 1), repeat=2 * g):
        lam = np.array(nm[:g], dtype=float) + B.B @ np.array(nm[g:], dtype=float)
        if np.max(np.abs(Pm @ (R + lam))) < 1e-9:
            out.append(reduce_mod_lattice(0.5 * (R + lam), B)[0])
    return out


def involution_action(period: PeriodData, mode: str = "flex", U0: np.ndarray | None = None,
                      A_P2: np.ndarray | None = None) -> InvolutionData:
    """M, fixed points and a Prym shift zeta.

    flex: base point P sigma-fixed, (1 + M) zeta = (M - 1) K.
    toda: base P1 with sigma(P1) = P2, (1 + M) zeta = (M - 1) K + (g - 1) U0.
    """
    curve = period.curve
    g = period.g
    if not curve.even_symmetry:
        raise ParameterError("the involution x -> -x needs an even polynomial")
    roots = np.asarray(curve.roots)
    if max(np.min(np.abs(roots + r)) for r in roots) > 1e-9 * curve.scale:
        raise InvolutionError("branch set is not invariant under x -> -x")
    K = period.riemann_constants
    if K is None:
        raise ParameterError("Riemann constants are needed for the Prym shift")
    M = action_matrix(period)
    if np.max(np.abs(M @ M - np.eye(g))) > 1e-8:
        raise InvolutionError("computed action does not square to the identity")
    resid = fit_action(period, M)
    if resid > FIT_TOL:
        raise InvolutionError(f"mirrored-path fit residual {resid:.3g} exceeds {FIT_TOL}")
    plus, minus = eigenbases(M)
    fixed = [MarkedPoint(0j, 1), MarkedPoint(0j, -1)]
    if mode == "flex":
        base = period.base
        if base.x is None or abs(base.x) > 1e-12:
            raise ParameterError("flex mode needs the sigma-fixed base point x = 0")
        v = np.zeros(g, dtype=complex)
        kappa = (M - np.eye(g)) @ K
    elif mode == "toda":
        if U0 is None or A_P2 is None:
            raise ParameterError("toda mode needs U0 and A(P2)")
        v = np.asarray(A_P2, dtype=complex)
        kappa = (M - np.eye(g)) @ K + (g - 1) * np.asarray(U0)
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    sols = _lattice_solutions(kappa, M, period.B)
    if not sols:
        raise LocusError("(1 + M) zeta = kappa has no solution modulo the lattice")
    # prefer a component on which theta does not vanish identically along E-
    zeta = None
    probe = minus @ np.linspace(0.13, 0.71, minus.shape[1]) if minus.shape[1] else np.zeros(g)
    for z in sols:
        vals = [abs(theta(z + s * probe, period.B)) for s in (0.37, 1.21)]
        if max(vals) > 1e-6:
            zeta = z
            break
    if zeta is None:
        raise LocusError("theta vanishes identically on every Prym component found")
    return InvolutionData(M, v, resid, fixed, kappa, zeta, plus, minus, mode)


def odd_lattice_shift(U0: np.ndarray, M: np.ndarray, B, span: int = 2):
    """(n, m) with U0 + n + B m in E-, i.e. (1 + M)(U0 + n + B m) = 0, smallest first."""
    g = len(U0)
    best = None
    for nm in sorted(itertools.product(range(-span, span + 1), repeat=2 * g),
                     key=lambda v: (sum(abs(k) for k in v), v)):
        n, m = np.array(nm[:g], dtype=float), np.array(nm[g:], dtype=float)
        if np.max(np.abs((np.eye(g) + M) @ (U0 + n + B.B @ m))) < 1e-8:
            best = (n, m)
            break
    if best is None:
        raise LocusError("no lattice representative of U0 lies in E-")
    return best


def prym_two_point_data(period: PeriodData):
    """Two-point data whose U0 is sigma-odd, plus the matching Toda-mode involution data.

    The third-kind differential is shifted by holomorphic periods so that the
    real line x U0 + zeta stays inside zeta + E- (values at integer x are unchanged).
    """
    from .differentials import TwoPointData

    base = TwoPointData(period)
    M = action_matrix(period)
    n, m = odd_lattice_shift(base.U0, M, period.B)
    data = base if not (n.any() or m.any()) else TwoPointData(period, (n, m))
    inv = involution_action(period, "toda", data.U0, data.A_P2)
    return data, inv
