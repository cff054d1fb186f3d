"""Riemann theta functions with half-integer characteristics.

The series

    theta[eps, 0](z | B) = sum_{n in Z^g + eps} exp(pi i n.B.n + 2 pi i n.z)

is summed over an ellipsoid of lattice points around the dominant term.
Truncation is controlled by an explicit tail bound, so the requested
tolerance is honest.  Tolerances are absolute with respect to the size of
the dominant term, ``exp(pi c.Y.c)`` with ``c = Y^{-1} Im z``; for real
``z`` this is 1.

Derivatives are computed term-by-term: every direction ``d`` multiplies a
term by ``2 pi i (n . d)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import InvalidMatrixError, ParameterError

DEFAULT_TOL = 1e-14
MAX_DERIVATIVE_ORDER = 4
_CHUNK = 2048


class RiemannMatrix:
    """Symmetric g x g complex matrix with positive definite imaginary part."""

    def __init__(self, entries):
        B = np.atleast_2d(np.asarray(entries, dtype=complex))
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 1:
            raise InvalidMatrixError(f"expected a square matrix, got shape {B.shape}")
        scale = max(np.max(np.abs(B)), 1.0)
        asym = np.max(np.abs(B - B.T))
        if asym > 1e-12 * scale:
            raise InvalidMatrixError(f"matrix is not symmetric (|B - B^T| = {asym:.3g})")
        B = 0.5 * (B + B.T)
        Y = B.imag
        evals = np.linalg.eigvalsh(Y)
        if evals[0] <= 0:
            raise InvalidMatrixError(
                f"imaginary part is not positive definite (min eigenvalue {evals[0]:.3g})")
        self.B = B
        self.Y = Y
        self.g = B.shape[0]
        self.Yinv = np.linalg.inv(Y)
        # pi * Y = T^T T with T upper triangular
        self.T = np.linalg.cholesky(math.pi * Y).T
        self.Tinv = np.linalg.inv(self.T)
        self.rho = math.sqrt(math.pi * evals[0])

    def __repr__(self):
        return f"RiemannMatrix(g={self.g})"

    def __eq__(self, other):
        return isinstance(other, RiemannMatrix) and np.array_equal(self.B, other.B)

    def __hash__(self):
        return hash(self.B.tobytes())

    @cached_property
    def doubled(self) -> "RiemannMatrix":
        return RiemannMatrix(2.0 * self.B)

    def lattice_vector(self, n, m):
        """Return ``n + B m`` for integer vectors ``n, m``."""
        return np.asarray(n, dtype=float) + self.B @ np.asarray(m, dtype=float)

    @cached_property
    def _lattice_cache(self):
        return {}

    def lattice_points(self, radius: float) -> np.ndarray:
        """Integer points ``m`` with ``|T m| <= radius``, as an (N, g) array."""
        key = round(float(radius), 6)
        cache = self._lattice_cache
        if key not in cache:
            cache[key] = _ellipsoid_points(self.T, key)
        return cache[key]


def _ellipsoid_points(T: np.ndarray, radius: float) -> np.ndarray:
    g = T.shape[0]
    Q = T.T @ T
    Qinv = np.linalg.inv(Q)
    half = np.floor(radius * np.sqrt(np.diag(Qinv)) + 1e-9).astype(int)
    axes = [np.arange(-h, h + 1) for h in half]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g)
    norms = np.einsum("ij,ij->i", grid @ Q, grid)
    keep = norms <= radius * radius + 1e-12
    pts, norms = grid[keep], norms[keep]
    # small terms first so the reduction order is fixed
    order = np.lexsort(tuple(pts[:, k] for k in reversed(range(g))) + (-np.round(norms, 10),))
    return pts[order].astype(float)


def characteristics(g: int) -> np.ndarray:
    """All eps in {0, 1/2}^g in lexicographic order (last index fastest)."""
    return 0.5 * np.array(list(itertools.product((0, 1), repeat=g)), dtype=float).reshape(-1, g)


def _as_matrix(B) -> RiemannMatrix:
    return B if isinstance(B, RiemannMatrix) else RiemannMatrix(B)


def _tail_integral(g: int, rho: float, a: float, b: float, order: int, R: float) -> float:
    # bound on sum_{|x_n| >= R} (a|x_n| + b)^order exp(-|x_n|^2) over a lattice
    # with packing radius rho/2: compare each term with the mean over its ball
    h = 0.5 * rho
    lo = R - h

    def integrand(s):
        return s ** (g - 1) * (a * (s + h) + b) ** order * math.exp(-(s - h) ** 2)

    val, _ = integrate.quad(integrand, lo, np.inf, limit=200)
    sphere = 2 * math.pi ** (g / 2) / special.gamma(g / 2)
    ball = math.pi ** (g / 2) / special.gamma(g / 2 + 1) * h ** g
    return sphere / ball * val


def truncation_radius(B, order: int = 0, tol: float = DEFAULT_TOL, *,
                      center_norm: float = 0.0, direction_norms: Sequence[float] = ()) -> float:
    """Radius R such that dropping lattice points with |T(n - c)| > R costs <= tol.

    ``order`` is the derivative order; ``direction_norms`` the norms of the
    derivative directions (default 1 each); ``center_norm`` bounds |c|.
    """
    B = _as_matrix(B)
    if not tol > 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    if math.isinf(tol):
        return 0.0
    if order < 0 or order > MAX_DERIVATIVE_ORDER:
        raise ParameterError(f"derivative order must be in [0, {MAX_DERIVATIVE_ORDER}]")
    dn = list(direction_norms) if direction_norms else [1.0] * order
    prefactor = float(np.prod([2 * math.pi * d for d in dn])) if order else 1.0
    a = np.linalg.norm(B.Tinv, 2)
    b = center_norm + 0.5 * math.sqrt(B.g)
    # polynomial bound: prod |2 pi n.d| <= prefactor * (a r + b)^order
    log_target = math.log(tol / prefactor)
    R = max(B.rho, 1.0)
    while math.log(max(_tail_integral(B.g, B.rho, a, b, order, R), 1e-300)) > log_target:
        R *= 1.25
        if R > 1e3:
            raise ParameterError("truncation radius diverged")
    lo, hi = R / 1.25, R
    if lo < B.rho:
        return hi
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if math.log(max(_tail_integral(B.g, B.rho, a, b, order, mid), 1e-300)) > log_target:
            lo = mid
        else:
            hi = mid
    return hi


@lru_cache(maxsize=256)
def _cached_radius(B: RiemannMatrix, order: int, tol: float, center_norm: float, dn: tuple) -> float:
    return truncation_radius(B, order, tol, center_norm=center_norm, direction_norms=dn)


def _theta_core(z: np.ndarray, B: RiemannMatrix, eps: np.ndarray,
                derivs: Sequence[Sequence[np.ndarray]], scale: float, tol: float) -> np.ndarray:
    """Sum the series for a batch z of shape (N, g); returns (len(derivs), N)."""
    g = B.g
    c = -(z.imag @ B.Yinv.T)  # centre of the Gaussian in n-space
    order = max((len(d) for d in derivs), default=0)
    if order > MAX_DERIVATIVE_ORDER:
        raise ParameterError(f"derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}")
    dnorms = []
    for d in derivs:
        dnorms.extend(np.linalg.norm(v) * scale for v in d)
    dmax = max(dnorms, default=1.0)
    cnorm = float(np.max(np.linalg.norm(c, axis=1))) if len(c) else 0.0
    cnorm = math.ceil(cnorm * 4) / 4  # coarse key for caching
    R = _cached_radius(B, order, float(tol), cnorm, tuple([round(dmax, 6)] * order))
    shift = 0.5 * np.linalg.norm(B.T, 2) * math.sqrt(g)
    M = B.lattice_points(R + shift)
    k0 = np.round(c - eps)
    out = np.empty((len(derivs), len(z)), dtype=complex)
    for s in range(0, len(z), _CHUNK):
        zc = z[s:s + _CHUNK]
        n = k0[s:s + _CHUNK, None, :] + eps + M[None, :, :]  # (N, m, g)
        quad = np.einsum("nmi,ij,nmj->nm", n, B.B, n)
        lin = np.einsum("nmi,ni->nm", n, zc)
        terms = np.exp(1j * math.pi * quad + 2j * math.pi * lin)
        for j, d in enumerate(derivs):
            w = terms
            for v in d:
                w = w * (2j * math.pi * scale * (n @ np.asarray(v, dtype=complex)))
            out[j, s:s + _CHUNK] = w.sum(axis=1)
    return out


def theta_derivatives(z, B, derivs: Sequence[Sequence], char=None, *, level_two: bool = False,
                      tol: float = DEFAULT_TOL) -> np.ndarray:
    """Several directional derivatives of one theta function in a single pass.

    ``derivs`` is a list of direction lists, e.g. ``[[], [U], [U, U], [V]]``.
    Returns an array of shape ``(len(derivs),) + z.shape[:-1]``.
    """
    B = _as_matrix(B)
    if not tol > 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != B.g:
        raise ParameterError(f"z has length {z.shape[-1]}, expected {B.g}")
    eps = np.zeros(B.g) if char is None else np.asarray(char, dtype=float)
    if eps.shape != (B.g,) or not np.all(np.isin(eps, (0.0, 0.5))):
        raise ParameterError(f"characteristic must lie in {{0, 1/2}}^{B.g}, got {char}")
    lead = z.shape[:-1]
    zf = z.reshape(-1, B.g)
    if level_two:
        Bm, zf, scale = B.doubled, 2.0 * zf, 2.0
    else:
        Bm, scale = B, 1.0
    if math.isinf(tol):
        return np.zeros((len(derivs),) + lead, dtype=complex)
    out = _theta_core(zf, Bm, eps, [list(d) for d in derivs], scale, tol)
    return out.reshape((len(derivs),) + lead)


def theta(z, B, char=None, derivs: Sequence = (), *, level_two: bool = False,
          tol: float = DEFAULT_TOL):
    """theta[char, 0](z | B) or its level-two version theta[char, 0](2z | 2B).

    ``derivs`` is an ordered list of direction vectors.  Accepts a single
    vector or a batch of shape (..., g).
    """
    val = theta_derivatives(z, B, [list(derivs)], char, level_two=level_two, tol=tol)[0]
    return complex(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class ThetaRequest:
    z: np.ndarray
    characteristic: tuple = ()
    derivatives: tuple = ()
    level_two: bool = False
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if len(self.derivatives) > MAX_DERIVATIVE_ORDER:
            raise ParameterError("at most four derivative directions are supported")


def eval_theta(req: ThetaRequest, B) -> complex:
    char = req.characteristic if len(req.characteristic) else None
    return theta(req.z, B, char, req.derivatives, level_two=req.level_two, tol=req.tolerance)


@dataclass(frozen=True)
class KummerPoint:
    values: np.ndarray
    ordering: np.ndarray = field(repr=False)


def kummer_map(Z, B, tol: float = DEFAULT_TOL, derivs: Sequence = ()) -> KummerPoint:
    """Level-two theta values Theta[eps, 0](Z) for all eps, lexicographic order."""
    B = _as_matrix(B)
    chars = characteristics(B.g)
    vals = np.array([theta(Z, B, e, derivs, level_two=True, tol=tol) for e in chars])
    return KummerPoint(values=vals, ordering=chars)


def kummer_values(Z, B, derivs: Sequence[Sequence] = ((),), tol: float = DEFAULT_TOL) -> np.ndarray:
    """Array (2^g, len(derivs), ...) of level-two theta derivatives at Z."""
    B = _as_matrix(B)
    return np.stack([theta_derivatives(Z, B, derivs, e, level_two=True, tol=tol)
                     for e in characteristics(B.g)])


def reduce_mod_lattice(z, B):
    """Reduce z modulo Z^g + B Z^g.

    Returns ``(w, n, m)`` with ``z = w + n + B m`` and ``w`` in the
    fundamental cell (coefficients in [-1/2, 1/2)).
    """
    B = _as_matrix(B)
    z = np.asarray(z, dtype=complex)
    m = np.round(z.imag @ B.Yinv.T)
    w = z - m @ B.B.T
    n = np.round(w.real)
    return w - n, n, m


def lattice_residual(z, B) -> float:
    """Distance of z from the nearest lattice point (after reduction)."""
    w, _, _ = reduce_mod_lattice(z, B)
    return float(np.max(np.abs(w))) if np.ndim(w) else abs(w)
