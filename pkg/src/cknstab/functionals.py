"""Weighted norms, deficits, pointwise kernels and Euler-Lagrange residuals.

All integrals over R^N are reduced to radial integrals (times the sphere
measure) or to meridian-plane integrals for axisymmetric functions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInput, MissingSecondDerivative, ZeroDenominator
from .model import MinimizerPoint, TestFunction, family_function, _check_family
from .numerics import (DEFAULT_SPEC, QuadratureSpec, integrate_axisym, integrate_radial,
                       minimize_scalar, sphere_area)
from .params import Ckn2Params, CknParams

ZERO_RATIO = 1e-12


@dataclass(frozen=True)
class NormTriple:
    H_b: float
    L_a: float
    L_c: float
    err_est: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DeficitReport:
    norms: NormTriple
    delta: float
    delta_tilde: float
    regime: str

    def to_dict(self):
        return {"norms": self.norms.to_dict(), "delta": self.delta,
                "delta_tilde": self.delta_tilde, "regime": self.regime}


@dataclass(frozen=True)
class Norms2:
    dL_b: float
    H_a: float
    H_c: float
    err_est: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Deficit2Report:
    dL_b: float
    H_a: float
    H_c: float
    sigma: float
    sigma_tilde: float
    err_est: float = 0.0

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# integration helpers


def radial_integrals(parts: Sequence[Callable], exps: Sequence[float], N: int,
                     spec: QuadratureSpec = DEFAULT_SPEC, support=None):
    """int_{R^N} f_i(|x|) |x|^{e_i} dx for radial integrands f_i, on a shared mesh."""
    exps = np.asarray(exps, dtype=float)

    def f(r):
        return np.stack([np.broadcast_to(np.asarray(g(r), dtype=float), r.shape) for g in parts],
                        axis=1)

    vals, errs = integrate_radial(f, exps + (N - 1), spec, support=support)
    V = sphere_area(N)
    return V * np.atleast_1d(vals), V * np.atleast_1d(errs)


def axisym_integrals(parts: Sequence[Callable], exps: Sequence[float], N: int,
                     spec: QuadratureSpec = DEFAULT_SPEC):
    """int_{R^N} g_i(rho, z) |x|^{e_i} dx for axisymmetric integrands."""
    def g(rho, z):
        return np.stack([np.broadcast_to(np.asarray(h(rho, z), dtype=float), rho.shape)
                         for h in parts], axis=1)

    vals, errs = integrate_axisym(g, N, spec, weight=np.asarray(exps, dtype=float))
    return np.atleast_1d(vals), np.atleast_1d(errs)


def _root_with_err(I, e, p):
    I = np.maximum(I, 0.0)
    roots = I ** (1.0 / p)
    with np.errstate(divide="ignore", invalid="ignore"):
        errs = np.where(I > 0, roots * e / (p * I), e ** (1.0 / p))
    return roots, errs


# ---------------------------------------------------------------------------
# first-order norms and deficits


def first_order_powers(u: TestFunction, params: CknParams, spec: QuadratureSpec = DEFAULT_SPEC):
    """(||u||_{H_b}^p, ||u||_{L_a}^p, ||u||_{L_c}^p) and error estimates."""
    p = params.p
    exps = [-p * params.b, -p * params.a, -p * params.c]
    if u.is_radial:
        parts = [lambda r: np.abs(u.du(r)) ** p,
                 lambda r: np.abs(u.u(r)) ** p]
        return radial_integrals([parts[0], parts[1], parts[1]], exps, params.N, spec,
                                support=u.compact_support())

    def grad_p(rho, z):
        gr, gz = u.du(rho, z)
        return np.hypot(gr, gz) ** p

    def val_p(rho, z):
        return np.abs(u.u(rho, z)) ** p

    return axisym_integrals([grad_p, val_p, val_p], exps, params.N, spec)


def norms_first_order(u: TestFunction, params: CknParams,
                      spec: QuadratureSpec = DEFAULT_SPEC) -> NormTriple:
    I, e = first_order_powers(u, params, spec)
    n, ne = _root_with_err(I, e, params.p)
    return NormTriple(float(n[0]), float(n[1]), float(n[2]), float(ne.max()))


def deficit_from_norms(H, L, Lc, params: CknParams):
    p, S = params.p, params.S
    if not (Lc > ZERO_RATIO * max(H, L)) or Lc <= 0:
        raise ZeroDenominator("L_c norm vanishes relative to the other norms")
    delta = H * L ** (p - 1) / Lc ** p - S
    delta_tilde = (H ** p + (p - 1) * L ** p) / Lc ** p - p * S
    return delta, delta_tilde


def deficit(u: TestFunction, params: CknParams, spec: QuadratureSpec = DEFAULT_SPEC) -> DeficitReport:
    nt = norms_first_order(u, params, spec)
    d, dt = deficit_from_norms(nt.H_b, nt.L_a, nt.L_c, params)
    return DeficitReport(nt, d, dt, params.regime.value)


# ---------------------------------------------------------------------------
# second-order norms and deficits


def _require_second(u: TestFunction):
    if not u.is_radial:
        raise InvalidInput("second-order functionals are implemented for radial functions only")
    if u.d2u is None:
        raise MissingSecondDerivative(f"{u.label or 'function'} lacks a second derivative")


def second_order_powers(u: TestFunction, params2: Ckn2Params,
                        spec: QuadratureSpec = DEFAULT_SPEC):
    _require_second(u)
    p, N = params2.p, params2.N
    parts = [lambda r: np.abs(u.laplacian(r, N)) ** p,
             lambda r: np.abs(u.du(r)) ** p]
    exps = [-p * params2.b, -p * params2.a, -p * params2.c2]
    return radial_integrals([parts[0], parts[1], parts[1]], exps, N, spec,
                            support=u.compact_support())


def norms_second_order(u: TestFunction, params2: Ckn2Params,
                       spec: QuadratureSpec = DEFAULT_SPEC) -> Norms2:
    I, e = second_order_powers(u, params2, spec)
    n, ne = _root_with_err(I, e, params2.p)
    return Norms2(float(n[0]), float(n[1]), float(n[2]), float(ne.max()))


def deficit2_from_norms(D, Ha, Hc, params2: Ckn2Params):
    p, K = params2.p, params2.K
    if not (Hc > ZERO_RATIO * max(D, Ha)) or Hc <= 0:
        raise ZeroDenominator("H_c seminorm vanishes relative to the other norms")
    sigma = D * Ha ** (p - 1) / Hc ** p - K
    sigma_tilde = (D ** p + (p - 1) * Ha ** p) / Hc ** p - p * K
    return sigma, sigma_tilde


def deficit2(u: TestFunction, params2: Ckn2Params,
             spec: QuadratureSpec = DEFAULT_SPEC) -> Deficit2Report:
    n = norms_second_order(u, params2, spec)
    s, st = deficit2_from_norms(n.dL_b, n.H_a, n.H_c, params2)
    return Deficit2Report(n.dL_b, n.H_a, n.H_c, s, st, n.err_est)


# ---------------------------------------------------------------------------
# pointwise kernels


def rp_kernel(s, t, p):
    """R_p(s, t) = |t|^p + (p-1)|s|^p - p |s|^{p-2} s t."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if p == 2:
        out = (t - s) ** 2
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            sp2 = np.where(s == 0, 0.0, np.abs(s) ** (p - 2))
        out = np.abs(t) ** p + (p - 1) * np.abs(s) ** p - p * sp2 * s * t
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelConstants:
    p: float
    kappa: float
    c0: float
    c1: float
    m_p: float
    n_samples: int
    seed: int

    def to_dict(self):
        return asdict(self)


def w_vector(y, yz, p):
    """Auxiliary vector w(y, y+z): y if |y| <= |y+z|, else (|y+z|/|y|)^{1/(p-2)} (y+z)."""
    y = np.atleast_2d(y)
    yz = np.atleast_2d(yz)
    ny = np.linalg.norm(y, axis=1)
    nyz = np.linalg.norm(yz, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(ny > 0, (nyz / np.where(ny > 0, ny, 1.0)) ** (1.0 / (p - 2.0)), 0.0)
    return np.where((ny <= nyz)[:, None], y, fac[:, None] * yz)


def _lower_gap(y, z, p, kappa):
    """|y+z|^p minus the lower bound of part (i) without the c0 term."""
    yz = y + z
    ny = np.linalg.norm(y, axis=1)
    nz = np.linalg.norm(z, axis=1)
    nyz = np.linalg.norm(yz, axis=1)
    w = np.linalg.norm(w_vector(y, yz, p), axis=1)
    dot = np.einsum("ij,ij->i", y, z)
    rhs = (ny ** p + p * ny ** (p - 2) * dot
           + 0.5 * (1 - kappa) * (p * ny ** (p - 2) * nz ** 2
                                  + p * (p - 2) * w ** (p - 2) * (ny - nyz) ** 2))
    return nyz ** p - rhs, nz ** p


def _upper_gap(a, b, p, kappa):
    """Part (ii) right side without the c1 term minus |a+b|^p."""
    rhs = (np.abs(a) ** p + p * np.abs(a) ** (p - 2) * a * b
           + (p * (p - 1) / 2 + kappa) * np.abs(a) ** (p - 2) * b * b)
    return rhs - np.abs(a + b) ** p, np.abs(b) ** p


def _scalar_pair(y, z):
    """Scalars for part (ii): the first Cartesian components of y and z (any sign)."""
    return y[:, 0], z[:, 0]


def _sample_pairs(rng, n, dim=3):
    y = rng.standard_normal((n, dim))
    z = rng.standard_normal((n, dim))
    y *= np.exp(rng.uniform(-4, 4, size=n))[:, None]
    z *= np.exp(rng.uniform(-4, 4, size=n))[:, None]
    # collinear pairs exercise both branches of w
    k = n // 4
    z[:k] = y[:k] * rng.uniform(-3, 3, size=k)[:, None]
    return y, z


def fz_inequalities(y, z, p: float, kappa: float, consts: KernelConstants):
    """Check the two vector inequalities on (arrays of) samples.

    Returns (lower_ok, upper_ok, (lower_slack, upper_slack)) where the slacks
    are the minimum scaled margins over the samples.  Part (ii) is applied to
    the scalars a = y_1, b = z_1.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    gap, zp = _lower_gap(y, z, p, kappa)
    scale = np.linalg.norm(y, axis=1) ** p + np.linalg.norm(z, axis=1) ** p
    scale = np.where(scale > 0, scale, 1.0)
    low = (gap - consts.c0 * zp) / scale
    a, b = _scalar_pair(y, z)
    ugap, bp = _upper_gap(a, b, p, kappa)
    up = (ugap + consts.c1 * bp) / (np.abs(a) ** p + np.abs(b) ** p + (scale == 0))
    lo_s, up_s = float(np.min(low)), float(np.min(up))
    return lo_s >= -1e-12, up_s >= -1e-12, (lo_s, up_s)


def _mp_refine(p):
    """m_p = min over directions of R_p(s, t)/|s - t|^p by a fine angle scan and Brent."""
    def ratio(th):
        s, t = math.cos(th), math.sin(th)
        return rp_kernel(s, t, p) / abs(s - t) ** p

    th = np.linspace(-0.75 * math.pi, 0.25 * math.pi, 20001)[1:-1]
    s, t = np.cos(th), np.sin(th)
    vals = rp_kernel(s, t, p) / np.abs(s - t) ** p
    i = int(np.argmin(vals))
    lo, hi = th[max(i - 1, 0)], th[min(i + 1, len(th) - 1)]
    res = minimize_scalar(ratio, (lo, hi), tol=1e-12)
    return min(res.value, float(vals[i]))


_CANCEL = 1e-2


def calibrate_kernel_constants(p: float, kappa: float = 0.5, n_samples: int = 1_000_000,
                               seed: int = 12345) -> KernelConstants:
    """Empirical c0, c1 for the vector inequalities and a lower bound m_p for R_p.

    c0 is half the smallest sampled ratio, c1 twice the largest one; m_p is
    the refined directional minimum of R_p(s,t)/|s-t|^p times 0.999.
    """
    if not p >= 2:
        raise InvalidInput("kernel constants need p >= 2")
    if not 0 < kappa < 1:
        raise InvalidInput("kappa must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    c0 = c1 = float("nan")
    if p > 2:
        low_min = math.inf
        up_max = 0.0
        chunk = 200_000
        left = n_samples
        while left > 0:
            n = min(chunk, left)
            left -= n
            y, z = _sample_pairs(rng, n)
            # ratios are only trusted where cancellation in the gaps is negligible
            gap, zp = _lower_gap(y, z, p, kappa)
            ok = zp > (_CANCEL * np.linalg.norm(y, axis=1)) ** p
            low_min = min(low_min, float(np.min(gap[ok] / zp[ok])))
            a, b = _scalar_pair(y, z)
            ugap, bp = _upper_gap(a, b, p, kappa)
            ok = bp > (_CANCEL * np.abs(a)) ** p
            up_max = max(up_max, float(np.max(-ugap[ok] / bp[ok])))
        if not low_min > 0:
            raise InvalidInput(f"no positive c0 found for p={p}, kappa={kappa}")
        c0 = 0.5 * low_min
        c1 = 2.0 * max(up_max, 1e-12)
    # R_p sample sweep, then directional refinement
    s = rng.uniform(-10, 10, size=n_samples)
    t = rng.uniform(-10, 10, size=n_samples)
    d = np.abs(s - t)
    ok = d >= 1e-6
    sampled = float(np.min(rp_kernel(s[ok], t[ok], p) / d[ok] ** p))
    m_p = 0.999 * min(sampled, _mp_refine(p))
    return KernelConstants(float(p), float(kappa), c0, c1, m_p, int(n_samples), int(seed))


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals


def _signed_pow(x, q):
    """|x|^{q-1} x, safe at zero."""
    return np.sign(x) * np.abs(x) ** (q - 1.0)


def el_terms(params: CknParams, v: TestFunction, lam: float, phi: TestFunction,
             spec: QuadratureSpec = DEFAULT_SPEC):
    """The three weak-form integrals of the first-order equation (radial v, phi)."""
    p = params.p
    parts = [lambda r: _signed_pow(v.du(r), p) * phi.du(r),
             lambda r: _signed_pow(v.u(r), p) * phi.u(r),
             lambda r: _signed_pow(v.u(r), p) * phi.u(r)]
    exps = [-p * params.b, -p * params.a, -p * params.c]
    vals, errs = radial_integrals(parts, exps, params.N, spec, support=phi.compact_support())
    t = np.array([vals[0], (p - 1) * lam ** p * vals[1], -p * params.S * lam ** (p - 1) * vals[2]])
    return t, errs


def el_residual(params: CknParams, pt: MinimizerPoint, phi: TestFunction,
                spec: QuadratureSpec = DEFAULT_SPEC, v: TestFunction | None = None,
                with_scale: bool = False):
    """Weak residual of the first-order Euler-Lagrange equation tested against phi.

    ``v`` overrides the family member (used to show the residual is nonzero
    off the manifold); the scale ``pt.lam`` is still used as lambda.
    """
    _check_family(params, pt)
    if not phi.is_radial:
        raise InvalidInput("el_residual expects a radial test function")
    vf = v if v is not None else family_function(params, pt.k, pt.lam)
    t, _ = el_terms(params, vf, pt.lam, phi, spec)
    res = float(t.sum())
    if with_scale:
        return res, float(np.abs(t).sum())
    return res


def el_terms2(params2: Ckn2Params, v: TestFunction, lam: float, phi: TestFunction,
              spec: QuadratureSpec = DEFAULT_SPEC):
    _require_second(v)
    _require_second(phi)
    p, N = params2.p, params2.N
    parts = [lambda r: _signed_pow(v.laplacian(r, N), p) * phi.laplacian(r, N),
             lambda r: _signed_pow(v.du(r), p) * phi.du(r),
             lambda r: _signed_pow(v.du(r), p) * phi.du(r)]
    exps = [-p * params2.b, -p * params2.a, -p * params2.c2]
    vals, errs = radial_integrals(parts, exps, N, spec, support=phi.compact_support())
    t = np.array([vals[0], (p - 1) * lam ** p * vals[1],
                  -p * params2.K * lam ** (p - 1) * vals[2]])
    return t, errs


def el_residual2(params2: Ckn2Params, pt: MinimizerPoint, phi: TestFunction,
                 spec: QuadratureSpec = DEFAULT_SPEC, v: TestFunction | None = None,
                 with_scale: bool = False):
    """Weak residual of the second-order equation, Laplacian term tested by Lap(phi)."""
    _check_family(params2, pt)
    vf = v if v is not None else family_function(params2, pt.k, pt.lam)
    t, _ = el_terms2(params2, vf, pt.lam, phi, spec)
    res = float(t.sum())
    if with_scale:
        return res, float(np.abs(t).sum())
    return res


# ---------------------------------------------------------------------------
# second-order identity for radial functions


@dataclass(frozen=True)
class IdentitySides:
    lhs: float
    rhs: float
    lam: float
    lhs_err: float
    rhs_err: float
    scale: float

    def to_dict(self):
        return asdict(self)


def identity2_sides(u: TestFunction, params2: Ckn2Params,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> IdentitySides:
    """Both sides of the radial second-order identity (the angular term vanishes)."""
    _require_second(u)
    p, N = params2.p, params2.N
    n = norms_second_order(u, params2, spec)
    if not n.H_a > 0:
        raise ZeroDenominator("H_a seminorm vanishes")
    lam = n.dL_b / n.H_a
    first = n.dL_b * n.H_a ** (p - 1)
    second = params2.K * n.H_c ** p
    lhs = first - second
    g = params2.b - params2.a
    s_fac = -lam ** (1.0 / p)
    t_fac = lam ** (-(p - 1.0) / p)

    def kern(r):
        s = s_fac * r ** g * u.du(r)
        t = t_fac * u.laplacian(r, N)
        return rp_kernel(s, t, p)

    vals, errs = radial_integrals([kern], [-p * params2.b], N, spec, support=u.compact_support())
    rhs = float(vals[0]) / p
    lhs_err = n.err_est * p * max(first, second) / max(min(n.dL_b, n.H_a, n.H_c), 1e-300)
    return IdentitySides(float(lhs), rhs, float(lam), float(lhs_err), float(errs[0]) / p,
                         float(max(first, second)))
