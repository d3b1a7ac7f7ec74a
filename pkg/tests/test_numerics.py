from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sint

from cknstab.errors import InvalidBracket, InvalidInput
from cknstab.numerics import (QuadratureSpec, build_radial_rule, gamma_fn, gamma_moment,
                              integrate_axisym, integrate_interval, integrate_radial,
                              minimize_2d, minimize_scalar, sphere_area)

# ---------------------------------------------------------------------------
# special functions


def test_gamma_values():
    assert gamma_fn(2) == 1.0
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)
    # 50-digit independent reference
    with mpmath.workdps(50):
        ref = float(mpmath.gamma(mpmath.mpf(9) / 2))
    assert gamma_fn(4.5) == pytest.approx(ref, rel=1e-14)
    assert gamma_fn(4.5) == pytest.approx(105 * math.sqrt(math.pi) / 16, rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
def test_gamma_domain(x):
    with pytest.raises(InvalidInput):
        gamma_fn(x)


@pytest.mark.parametrize("n,ref", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi),
                                   (4, 2 * math.pi ** 2)])
def test_sphere_area(n, ref):
    assert sphere_area(n) == pytest.approx(ref, rel=1e-15)


@given(st.floats(-0.9, 6), st.floats(0.2, 4), st.floats(0.3, 3))
def test_gamma_moment_against_mpmath(s, q, g):
    # quadrature oracle in w = q r^g: int w^{beta-1} e^{-w} dw / (g q^beta), beta = (s+1)/g;
    # on [0, c] the substitution w = v^{1/beta} gives a bounded integrand
    with mpmath.workdps(30):
        beta = mpmath.mpf(s + 1) / g
        c = min(beta, 1)
        head = mpmath.quad(lambda v: mpmath.exp(-v ** (1 / beta)), [0, c ** beta]) / beta
        pts = sorted({c, *(beta * f for f in (1, 2, 4) if beta * f > c), beta * 4 + 60})
        tail = mpmath.quad(lambda w: w ** (beta - 1) * mpmath.exp(-w), pts + [mpmath.inf])
        ref = (head + tail) / (g * mpmath.mpf(q) ** beta)
    assert gamma_moment(s, q, g) == pytest.approx(float(ref), rel=1e-9)


# ---------------------------------------------------------------------------
# quadrature


def test_spec_validation():
    with pytest.raises(InvalidInput):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(InvalidInput):
        QuadratureSpec(split_points=(2.0, 1.0))
    with pytest.raises(InvalidInput):
        QuadratureSpec(tail_cutoff_strategy="fixed_R")
    with pytest.raises(InvalidInput):
        QuadratureSpec(tail_cutoff_strategy="guess")
    t = QuadratureSpec().tightened(10)
    assert t.rel_tol == pytest.approx(1e-11)


def test_radial_examples(p_case1):
    val, err = integrate_radial(lambda r: np.exp(-2 * r), 1)
    assert val == pytest.approx(0.25, rel=1e-12) and err < 1e-10
    val, _ = integrate_radial(lambda r: np.exp(-r * r), 3)
    assert val == pytest.approx(0.5, rel=1e-12)
    # unnormalized minimizer profile e^{-r}: its weighted square integrates to 1/(C1^2 |S^3|)
    C1 = p_case1.C1
    val, _ = integrate_radial(lambda r: np.exp(-r) ** 2, 1)
    assert val == pytest.approx(1 / (C1 ** 2 * 2 * math.pi ** 2), rel=1e-12)
    val, _ = integrate_radial(lambda r: (C1 * np.exp(-r)) ** 2, 1)
    assert 2 * math.pi ** 2 * val == pytest.approx(1.0, rel=1e-12)


def test_radial_vector_valued():
    vals, errs = integrate_radial(lambda r: np.stack([np.exp(-r), np.exp(-r * r)], axis=1), [2, 0])
    assert vals == pytest.approx([2.0, math.sqrt(math.pi) / 2], rel=1e-12)
    assert errs.shape == (2,)


def test_radial_singular_endpoint():
    # integrable power singularity at the origin
    val, _ = integrate_radial(lambda r: np.exp(-r), -0.5)
    assert val == pytest.approx(math.sqrt(math.pi), rel=1e-10)


def test_radial_compact_support_and_zero():
    val, _ = integrate_radial(lambda r: np.where(r < 2, 1.0, 0.0), 1, support=(1.0, 2.0))
    assert val == pytest.approx(1.5, rel=1e-13)
    val, err = integrate_radial(lambda r: np.zeros_like(r), 1)
    assert val == 0.0 and err == 0.0


def _gamma_grid():
    return [(s, q, g) for s in (-0.5, 0.5, 2.0, 4.0, 7.0) for q, g in
            ((1.0, 1.0), (2.0, 2.0), (0.5, 0.75), (3.0, 1.5))]


def test_halving_tolerance_does_not_hurt():
    cases = _gamma_grid()
    assert len(cases) == 20
    for s, q, g in cases:
        exact = gamma_moment(s, q, g)
        f = lambda r: np.exp(-q * r ** g)
        e1 = abs(integrate_radial(f, s, QuadratureSpec(rel_tol=1e-8))[0] - exact)
        e2 = abs(integrate_radial(f, s, QuadratureSpec(rel_tol=5e-9))[0] - exact)
        # below a few ulps both results sit on the rounding floor
        assert e2 <= max(e1, 8 * np.finfo(float).eps * exact), (s, q, g, e1, e2)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.3, 3), st.floats(0.3, 3))
def test_radial_linearity(al, be, q1, q2):
    spec = QuadratureSpec()
    f = lambda r: np.exp(-q1 * r)
    g = lambda r: np.exp(-q2 * r * r)
    lhs, _ = integrate_radial(lambda r: al * f(r) + be * g(r), 2, spec)
    rf, _ = integrate_radial(f, 2, spec)
    rg, _ = integrate_radial(g, 2, spec)
    rhs = al * rf + be * rg
    scale = abs(al * rf) + abs(be * rg)
    assert abs(lhs - rhs) <= 10 * spec.rel_tol * scale + 1e-15


def test_interval():
    val, _ = integrate_interval(np.sin, 0.0, math.pi)
    assert val == pytest.approx(2.0, rel=1e-13)
    assert integrate_interval(np.sin, 1.0, 1.0) == (0.0, 0.0)


def test_axisym_gaussian():
    val, _ = integrate_axisym(lambda rho, z: np.exp(-rho ** 2 - z ** 2), 4)
    assert val == pytest.approx(math.pi ** 2, rel=1e-10)


def test_axisym_tensor_oracle():
    g = lambda rho, z: np.exp(-rho - np.abs(z)) * np.sqrt(rho ** 2 + z ** 2) / np.maximum(rho, 1e-300)
    val, _ = integrate_axisym(g, 3)
    # in N = 3, dx = 2 pi rho d rho dz over the half plane
    ref, _ = sint.dblquad(lambda z, rho: 2 * math.pi * math.exp(-rho - z) * math.hypot(rho, z),
                          0, np.inf, 0, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert val == pytest.approx(2 * ref, rel=1e-8)


def test_axisym_separable():
    # N = 2: x' is one-dimensional, so the integral splits into two 1D factors
    val, _ = integrate_axisym(lambda rho, z: np.exp(-rho ** 2 - z ** 4), 2)
    ref = math.sqrt(math.pi) * 2 * math.gamma(1.25)
    assert val == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("N", [2, 3, 4, 6])
def test_axisym_matches_radial(N):
    f = lambda r: np.exp(-r ** 1.5) * (1 + r)
    ax, _ = integrate_axisym(lambda rho, z: f(np.hypot(rho, z)), N, weight=-1.0)
    rad, _ = integrate_radial(f, N - 2)
    assert ax == pytest.approx(sphere_area(N) * rad, rel=1e-8)


def test_axisym_needs_N2():
    with pytest.raises(InvalidInput):
        integrate_axisym(lambda rho, z: rho, 1)


def test_fixed_rule_matches_adaptive():
    f = lambda r: np.exp(-r * r) * r
    rule = build_radial_rule(f, 2)
    assert rule.integrate(f(rule.r), 2) == pytest.approx(integrate_radial(f, 2)[0], rel=1e-12)


# ---------------------------------------------------------------------------
# minimization


def test_minimize_scalar_quadratic():
    res = minimize_scalar(lambda x: (x - 2) ** 2, (0, 5))
    assert res.argmin[0] == pytest.approx(2, abs=1e-8)
    assert res.value == pytest.approx(0, abs=1e-15)
    assert res.converged and not res.at_boundary


def test_minimize_scalar_boundary():
    res = minimize_scalar(lambda x: -x, (0, 5))
    assert res.at_boundary


def test_minimize_scalar_bad_bracket():
    with pytest.raises(InvalidBracket):
        minimize_scalar(lambda x: x, (1, 1))


@given(st.floats(-4, 4), st.floats(0.1, 10))
def test_minimize_scalar_unimodal(c, w):
    res = minimize_scalar(lambda x: math.cosh(w * (x - c)), (-5, 5), tol=1e-9)
    assert abs(res.argmin[0] - c) <= 1e-6


def test_minimize_scalar_projection_oracle(p_case1):
    """Best L^2_c fit of e^{-r^2} over lambda against a 10^4-point log grid."""
    P = p_case1
    area = sphere_area(P.N)
    u = lambda r: np.exp(-r * r)

    def inner(lam):
        # <u, v(1, lam)> with unit-norm members: weight r^{N-1-2c} = r
        return area * integrate_radial(lambda r: u(r) * P.C1 * lam * np.exp(-lam * r), 1)[0]

    unorm2 = area * integrate_radial(lambda r: u(r) ** 2, 1)[0]
    phi = lambda t: math.sqrt(max(unorm2 - inner(math.exp(t)) ** 2, 0.0))
    res = minimize_scalar(phi, (-6, 6))
    assert res.converged and not res.at_boundary

    grid = np.linspace(-6, 6, 10_000)

    def inner_ref(lam):
        return area * sint.quad(lambda r: math.exp(-r * r) * P.C1 * lam * math.exp(-lam * r) * r,
                                0, np.inf, epsabs=1e-14, epsrel=1e-13)[0]

    coarse = grid[::100]
    vals = [unorm2 - inner_ref(math.exp(t)) ** 2 for t in coarse]
    i = int(np.argmin(vals))
    fine = grid[max(0, (i - 1) * 100):(i + 1) * 100 + 1]
    vals = [unorm2 - inner_ref(math.exp(t)) ** 2 for t in fine]
    t_ref = fine[int(np.argmin(vals))]
    assert abs(res.argmin[0] - t_ref) <= 2 * (grid[1] - grid[0])


def test_minimize_2d_quadratic():
    res = minimize_2d(lambda x, y: (x - 1) ** 2 + (y + 2) ** 2, (0, 0), ((-5, 5), (-5, 5)))
    assert res.argmin == pytest.approx([1, -2], abs=1e-7)


def test_minimize_2d_constant():
    res = minimize_2d(lambda x, y: 3.0, (0.5, 0.5), ((-1, 1), (-1, 1)))
    assert res.converged
    assert res.value == 3.0
    assert res.argmin == pytest.approx([0.5, 0.5])


def test_minimize_2d_matches_nested(p_case1):
    """(k, log lambda) fit of a perturbed member against nested 1D minimization."""
    P = p_case1
    u = lambda r: P.C1 * np.exp(-r) * (1 + 0.05 * np.exp(-(r - 1) ** 2))
    rule = build_radial_rule(lambda r: u(r) ** 2, 1)
    ur = u(rule.r)

    def obj(k, t):
        lam = math.exp(t)
        v = k * P.C1 * lam * np.exp(-lam * rule.r)
        return rule.integrate((ur - v) ** 2, 1)

    def best_k(t):
        lam = math.exp(t)
        w = P.C1 * lam * np.exp(-lam * rule.r)
        return rule.integrate(ur * w, 1) / rule.integrate(w * w, 1)

    nested = minimize_scalar(lambda t: obj(best_k(t), t), (-3, 3), tol=1e-12)
    t0 = nested.argmin[0]
    res = minimize_2d(obj, (1.0, 0.0), ((0.1, 5.0), (-3.0, 3.0)), tol=1e-12)
    assert res.value == pytest.approx(nested.value, rel=1e-8, abs=1e-16)
    assert res.argmin[1] == pytest.approx(t0, abs=1e-5)
    assert res.argmin[0] == pytest.approx(best_k(t0), abs=1e-5)
