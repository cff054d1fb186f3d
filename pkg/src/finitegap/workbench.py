"""Assemble curve data from a spec file and run the named checkers."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import checks
from .curve import INFINITY, MarkedPoint, QuadratureSettings, build_curve
from .differentials import OnePointData, TwoPointData
from .errors import LocusError, ParameterError
from .involution import InvolutionData, involution_action, odd_lattice_shift, action_matrix
from .io import CACHE_VERSION, CurveSpecFile, decode_array, encode_array, fmt_real, spec_hash
from .periods import random_points, riemann_constants, riemann_matrix

CHECKERS = ("kp-pde", "flex-a", "flex-b", "flex-semi", "flatness-flex",
            "toda-a", "toda-semi", "toda-b", "flatness-toda")
DEFAULT_SAMPLES = 20


class NotApplicable(ParameterError):
    """The checker needs data this spec does not provide."""


def _point(p: dict) -> MarkedPoint:
    x = None if p["x"] == INFINITY else complex(p["x"])
    return MarkedPoint(x, p["sheet"])


def _roles(spec: CurveSpecFile):
    """(one-point base, two-point pair) chosen from the marked points."""
    pts = [_point(p) for p in spec.marked_points]
    base = next((p for p in pts if p.x is not None and p.x == 0), None)
    if base is None:
        base = pts[0] if pts else (MarkedPoint(None, 1, True) if spec.model == "odd" else None)
    pair = None
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            if p.x is not None and q.x is not None and p.x != 0 and q.x == -p.x:
                pair = (p, q)
                break
        if pair:
            break
    if pair is None:
        rest = [p for p in pts if p is not base]
        if len(rest) >= 2:
            pair = (rest[0], rest[1])
    return base, pair


class Workbench:
    """Period data, BA data and Prym shifts for one spec."""

    def __init__(self, spec: CurveSpecFile, cached: dict | None = None):
        self.spec = spec
        base, pair = _roles(spec)
        quad = QuadratureSettings(**spec.quadrature)
        tol = float(spec.tolerances.get("curve", 1e-10))
        coeffs = spec.coefficients
        even = spec.involution == "negate-x"
        self.check_tol = float(spec.tolerances.get("check", checks.DEFAULT_TOL))
        self.one = self.two = None
        self.inv_flex = self.inv_toda = None
        self.notes = []
        rng = np.random.default_rng(spec.seed)
        period = None
        if base is not None:
            curve = build_curve(coeffs, even_symmetry=even, marked_points=[base],
                                quadrature=quad, tolerance=tol)
            period = riemann_matrix(curve, base)
            K = self._constants(cached, "one_point", period, rng)
            self.one = OnePointData(period.with_constants(K))
            if even and base.x is not None and base.x == 0:
                self.inv_flex = self._involution(period.with_constants(K), "flex")
        if pair is not None:
            curve2 = build_curve(coeffs, even_symmetry=even, marked_points=list(pair),
                                 quadrature=quad, tolerance=tol)
            if period is None:
                p2 = riemann_matrix(curve2, pair[0])
            else:
                p2 = replace(period, curve=curve2, base=pair[0], riemann_constants=None)
            K2 = self._constants(cached, "two_point", p2, rng)
            p2 = p2.with_constants(K2)
            shift = None
            if even and pair[1].x == -pair[0].x:
                M = action_matrix(p2)
                probe = TwoPointData(p2)
                n, m = odd_lattice_shift(probe.U0, M, p2.B)
                shift = (n, m) if (n.any() or m.any()) else None
                self.two = TwoPointData(p2, shift) if shift else probe
                self.inv_toda = self._involution(p2, "toda", self.two)
            else:
                self.two = TwoPointData(p2)
            period = period or p2
        if period is None:
            raise ParameterError("even-degree curve needs at least one marked point")
        self.period = period
        if cached is not None:
            B = decode_array(cached["B"])
            if np.max(np.abs(B - period.B.B)) > 1e-12 * max(1.0, np.max(np.abs(B))):
                self.notes.append("recomputed B differs from the cached value")

    @staticmethod
    def _constants(cached, key, period, rng):
        if cached is not None and cached.get(key):
            return decode_array(cached[key]["K"])
        return riemann_constants(period, rng)

    def _involution(self, period, mode, two=None):
        try:
            if mode == "flex":
                return involution_action(period, "flex")
            return involution_action(period, "toda", two.U0, two.A_P2)
        except LocusError as exc:
            self.notes.append(f"{mode}: {exc}")
            return None

    # -- cache payload ----------------------------------------------------------------

    def cache_payload(self) -> dict:
        per = self.period
        out = {"version": CACHE_VERSION, "curve_hash": spec_hash(self.spec),
               "spec": self.spec.to_dict(), "genus": per.g,
               "B": encode_array(per.B.B), "C": encode_array(per.C),
               "symmetry_residual": fmt_real(per.symmetry_residual),
               "quadrature_error": fmt_real(per.quadrature_error),
               "one_point": None, "two_point": None}
        if self.one is not None:
            d = self.one
            out["one_point"] = {
                "base": _point_dict(d.P), "K": encode_array(d.K), "U": encode_array(d.U),
                "a": encode_array(d.a),
                "principal_parts": [encode_array(m.principal_part) for m in d.mer],
                "involution": _inv_dict(self.inv_flex)}
        if self.two is not None:
            d = self.two
            shift = None if d.lattice_shift is None else [encode_array(v) for v in d.lattice_shift]
            out["two_point"] = {
                "P1": _point_dict(d.P1), "P2": _point_dict(d.P2), "K": encode_array(d.K),
                "lattice_shift": shift, "U0": encode_array(d.U0), "U11": encode_array(d.U11),
                "U21": encode_array(d.U21), "A_P2": encode_array(d.A_P2),
                "a1": encode_array(d.a1), "a2": encode_array(d.a2),
                "b1": encode_array(d.b1), "b2": encode_array(d.b2),
                "principal_parts": [encode_array(m.principal_part) for m in d.mer],
                "involution": _inv_dict(self.inv_toda)}
        return out

    # -- checkers -------------------------------------------------------------------

    def zeta(self, mode: str, perturb: float, rng) -> np.ndarray:
        inv = self.inv_flex if mode == "flex" else self.inv_toda
        if inv is None:
            raise NotApplicable(f"no {mode} Prym shift: needs involution negate-x and "
                                + ("a marked point over x = 0" if mode == "flex"
                                   else "a pair of marked points over +-a"))
        return inv.perturbed(perturb, rng) if perturb else inv.zeta

    def _need_one(self):
        if self.one is None:
            raise NotApplicable("no one-point data in this spec")
        return self.one

    def _need_two(self):
        if self.two is None:
            raise NotApplicable("needs two marked points")
        return self.two

    def _sample_Z(self, rng, n):
        g = self.period.g
        B = self.period.B.B
        return [rng.uniform(0, 1, g) + B @ rng.uniform(0, 1, g) for _ in range(n)]

    def _sample_paths(self, period, rng, n):
        return [p[0] for p in random_points(period, n, rng)]

    def run(self, name: str, samples: int = DEFAULT_SAMPLES, seed: int = 0,
            tol: float | None = None, perturb: float = 0.0) -> checks.ConditionReport:
        if name not in CHECKERS:
            raise ParameterError(f"unknown checker {name!r}")
        tol = self.check_tol if tol is None else tol
        rng = np.random.default_rng([seed, CHECKERS.index(name)])
        k = max(5, samples // 4)
        if name == "kp-pde":
            d = self._need_one()
            return checks.kp_theta_check(d, self._sample_Z(rng, 1)[0], tol)
        if name == "flex-a":
            d = self._need_one()
            paths = self._sample_paths(d.period, rng, k)
            return checks.flex_A_check(d, paths, self._sample_Z(rng, k), tol)
        if name == "toda-a":
            d = self._need_two()
            paths = self._sample_paths(d.period, rng, k)
            return checks.toda_A_check(d, paths, self._sample_Z(rng, k), tol)
        if name in ("flex-b", "flex-semi", "flatness-flex"):
            d = self._need_one()
            if np.linalg.norm(d.U[1]) < checks.VACUOUS_NORM:
                zeta = np.zeros(d.g, dtype=complex)
            else:
                zeta = self.zeta("flex", perturb, rng)
            if name == "flex-b":
                return checks.flex_B_check(d, zeta, samples, tol, rng)
            semi = checks.flex_semi_check(d, zeta, max(samples, 8), tol, rng)
            if name == "flex-semi":
                return semi
            return checks.flatness_vector("flex", d, zeta, {"b2": semi.constants.get("b2", 0j)},
                                          samples, tol, rng)
        d = self._need_two()
        zeta = self.zeta("toda", perturb, rng)
        if name == "toda-b":
            return checks.toda_B_check(d, zeta, samples, tol, rng)
        semi = checks.toda_semi_check(d, zeta, max(samples, 8), tol, rng)
        if name == "toda-semi":
            return semi
        return checks.flatness_vector("toda", d, zeta, {"b2": d.b2, "b3": semi.constants["b3"]},
                                      samples, tol, rng)

    def applicable(self) -> list:
        out = []
        for name in CHECKERS:
            if name.startswith(("flex", "kp")) and self.one is None:
                continue
            if name in ("flex-b", "flex-semi", "flatness-flex") and self.inv_flex is None \
                    and np.linalg.norm(self.one.U[1]) >= checks.VACUOUS_NORM:
                continue
            if name.startswith(("toda", "flatness-toda")) and self.two is None:
                continue
            if name in ("toda-semi", "toda-b", "flatness-toda") and self.inv_toda is None:
                continue
            out.append(name)
        return out


def _point_dict(p: MarkedPoint) -> dict:
    return {"x": INFINITY if p.x is None else encode_array(p.x), "sheet": p.sheet}


def _inv_dict(inv: InvolutionData | None):
    if inv is None:
        return None
    return {"M": encode_array(inv.M), "v": encode_array(inv.v),
            "fit_residual": fmt_real(inv.fit_residual), "kappa": encode_array(inv.kappa),
            "zeta": encode_array(inv.zeta), "mode": inv.mode}
