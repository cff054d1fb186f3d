import numpy as np
import pytest

from finitegap.curve import INFINITY, MarkedPoint, build_curve
from finitegap.differentials import KindTag, meromorphic_data
from finitegap.errors import (ParameterError, SingularCurveError, UnsupportedConfigurationError,
                              UnsupportedGenusError)
from finitegap.involution import action_matrix, fit_action, involution_action
from finitegap.paths import PathOnCurve
from finitegap.periods import (abel_map, loop_around, random_points, riemann_matrix, theta_scale)
from finitegap.theta import lattice_residual, reduce_mod_lattice, theta

# tau = i agm(sqrt(e1-e3), sqrt(e1-e2)) / agm(sqrt(e1-e3), sqrt(e2-e3)) for x(x-1)(x-3),
# confirmed by scipy quadrature of the two real half-periods
TAU_LAMBDA3 = 1.1701593773031342


def test_build_curve_examples():
    c = build_curve([4, 0, -4, 0])
    assert c.genus == 1
    assert np.allclose(sorted(np.real(c.roots)), [-1, 0, 1])
    assert INFINITY in c.branch_points
    q = build_curve([1, 0, 0, 0, 0, -1])
    assert q.genus == 2 and len(q.roots) == 5
    assert np.allclose(np.abs(q.roots), 1)
    s = build_curve([1, 0, -14, 0, 49, 0, -36], even_symmetry=True)
    assert s.genus == 2 and s.even_symmetry


def test_build_curve_errors():
    with pytest.raises(SingularCurveError):
        build_curve([1, -2, 1, 0])           # x (x - 1)^2
    with pytest.raises(UnsupportedGenusError):
        build_curve([1, 0, -1])
    with pytest.raises(ParameterError):
        build_curve([1, 1, -14, 0, 49, 0, -36], even_symmetry=True)
    with pytest.raises(UnsupportedConfigurationError):
        build_curve([4, 0, -4, 0], marked_points=[MarkedPoint(1.0)])


def test_lemniscate_period_matrix(lemniscate):
    assert abs(lemniscate.B.B[0, 0] - 1j) < 1e-6


@pytest.mark.parametrize("lam, tau", [(2, 1.0), (3, TAU_LAMBDA3)])
def test_legendre_family_periods(lam, tau):
    per = riemann_matrix(build_curve([1, -(1 + lam), lam, 0]))
    assert abs(per.B.B[0, 0] - 1j * tau) < 1e-6


def test_symmetry_and_positivity(lemniscate, quintic, sextic_period):
    for per in (lemniscate, quintic, sextic_period):
        B = per.B.B
        assert np.max(np.abs(B - B.T)) < 1e-8
        assert per.symmetry_residual < 1e-8
        assert np.min(np.linalg.eigvalsh(B.imag)) > 0


def test_a_period_normalization(quintic):
    ap = np.array([[quintic.a_period(w, k) for w in quintic.omegas] for k in range(quintic.g)])
    assert np.max(np.abs(ap - np.eye(quintic.g))) < 1e-8


def test_abel_map_basics(sextic_period, quintic):
    assert np.allclose(abel_map(sextic_period, PathOnCurve(())), 0)
    # Weierstrass base point at infinity: branch points map to half periods
    A = abel_map(quintic, PathOnCurve((0.5 + 0.3j,), end=MarkedPoint(1.0, 1, True)))
    assert lattice_residual(2 * A, quintic.B) < 1e-7
    # finite base point: differences of branch points are half periods
    A1 = abel_map(sextic_period, PathOnCurve((0.5 + 0.3j,), end=MarkedPoint(1.0, 1, True)))
    A2 = abel_map(sextic_period, PathOnCurve((1.5 + 0.3j,), end=MarkedPoint(2.0, 1, True)))
    assert lattice_residual(2 * (A1 - A2), sextic_period.B) < 1e-7


def test_appended_a_loop_adds_unit_vector(sextic_period):
    per = sextic_period
    e = np.asarray(per.curve.roots)
    p = PathOnCurve((0.3 + 1.2j, -2.5 + 0.9j))
    A = abel_map(per, p)
    loop = loop_around(-2.5, 0.9, np.pi / 2, 16)
    A2 = abel_map(per, p.then(*loop))
    d = A2 - A
    assert np.min(np.abs(np.abs(e + 2.5) - 0.9)) > 0.3
    assert min(np.max(np.abs(d - s * np.eye(2)[0])) for s in (1, -1)) < 1e-8


def test_homotopic_paths_agree(sextic_period):
    per = sextic_period
    A1 = abel_map(per, PathOnCurve((0.4 + 0.8j,)))
    A2 = abel_map(per, PathOnCurve((0.2 + 0.5j, 0.6 + 0.6j, 0.4 + 0.8j)))
    assert np.max(np.abs(A1 - A2)) < 1e-8


def test_riemann_constants_vanishing(lemniscate, quintic, sextic_period, rng):
    for per in (lemniscate, quintic, sextic_period):
        K = per.riemann_constants
        g = per.g
        for _ in range(10):
            pts = random_points(per, g - 1, rng)
            D = sum((q[1] for q in pts), np.zeros(g, dtype=complex))
            z = K - D
            assert abs(theta(z, per.B)) < 1e-6 * theta_scale(z, per.B)
        generic = []
        for _ in range(5):
            pts = random_points(per, g, rng)
            z = K - sum(q[1] for q in pts)
            generic.append(abs(theta(z, per.B)) / theta_scale(z, per.B))
        assert max(generic) > 1e-3


def test_genus_one_half_period(lemniscate):
    K = lemniscate.riemann_constants
    target = 0.5 * (1 + lemniscate.B.B[0, 0])
    assert lattice_residual(K - target, lemniscate.B) < 1e-7


def test_hyperelliptic_V_vanishes(quintic_one, lemniscate_one):
    for d in (quintic_one, lemniscate_one):
        assert np.linalg.norm(d.U[1]) < 1e-8


def test_third_kind_data(sextic_two):
    d = sextic_two
    g = d.g
    assert abs(d.third.principal_part[0] + 1) < 1e-8
    assert abs(d.table2.c(-1)[g] - 1) < 1e-8
    assert np.max(np.abs(d.third.a_periods)) < 1e-8
    assert lattice_residual(d.U0 - d.A_P2, d.B) < 1e-7


def test_second_kind_principal_parts(sextic_one):
    for i, m in enumerate(sextic_one.mer, start=1):
        expect = np.zeros(i + 2, dtype=complex)
        expect[i] = -i          # d(k^i) = -i s^(-i-1) ds with s = 1/k
        assert np.max(np.abs(m.principal_part - expect)) < 1e-8
        assert np.max(np.abs(m.a_periods)) < 1e-8


def test_first_differential_is_odd(sextic_one, rng):
    D = sextic_one.mer[0].differential
    curve = sextic_one.period.curve
    xs = rng.uniform(-2, 2, 6) + 1j * rng.uniform(0.2, 1, 6)
    ys = np.sqrt(np.polyval(curve.f_coeffs, xs))
    assert np.max(np.abs(D(-xs, ys) - D(xs, ys))) < 1e-7 * np.max(np.abs(D(xs, ys)))


def test_involution_matrix(sextic_period, sextic_flex):
    M = sextic_flex.M
    assert np.max(np.abs(M @ M - np.eye(2))) < 1e-8
    assert sextic_flex.fit_residual < 1e-7
    assert fit_action(sextic_period, action_matrix(sextic_period)) < 1e-7
    w, _, _ = reduce_mod_lattice((np.eye(2) + M) @ sextic_flex.v, sextic_period.B)
    assert np.max(np.abs(w)) < 1e-8


def test_prym_shift_solves_locus_equation(sextic_period, sextic_flex):
    M, K, z = sextic_flex.M, sextic_period.riemann_constants, sextic_flex.zeta
    r = (np.eye(2) + M) @ z - (M - np.eye(2)) @ K
    assert lattice_residual(r, sextic_period.B) < 1e-9


def test_involution_needs_even_curve(quintic):
    with pytest.raises(ParameterError):
        involution_action(quintic, "flex")


def test_meromorphic_data_rejects_unknown_kind(sextic_period):
    with pytest.raises(ParameterError):
        meromorphic_data(sextic_period, KindTag("fourth"))
