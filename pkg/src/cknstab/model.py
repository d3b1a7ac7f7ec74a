"""Test functions, the explicit minimizer families, and profile construction."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BadSamples, InvalidInput, RegimeMismatch
from .numerics import DEFAULT_SPEC, QuadratureSpec, _WK, _XK, integrate_radial
from .params import Ckn2Params, CknParams, Regime


class Family(str, enum.Enum):
    FirstOrderCase1 = "FirstOrderCase1"
    FirstOrderCase2 = "FirstOrderCase2"
    SecondOrder = "SecondOrder"


def family_for(params) -> Family:
    if isinstance(params, Ckn2Params):
        return Family.SecondOrder
    if params.regime is Regime.P2Case2:
        return Family.FirstOrderCase2
    return Family.FirstOrderCase1


@dataclass(frozen=True)
class MinimizerPoint:
    family: Family
    k: float
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k != 0.0):
            raise InvalidInput("minimizer amplitude k must be finite and nonzero")
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise InvalidInput("minimizer scale lambda must be positive")

    def to_dict(self) -> dict:
        return {"family": self.family.value, "k": self.k, "lambda": self.lam}


@dataclass(frozen=True)
class TestFunction:
    """A radial or axisymmetric function with its derivatives.

    Radial: ``u(r)``, ``du(r) = u'(r)``, optional ``d2u(r) = u''(r)``.
    Axisymmetric: ``u(rho, z)`` and ``du(rho, z) -> (d_rho u, d_z u)``.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    u: Callable
    du: Callable
    d2u: Callable | None = None
    support_hint: tuple[float, float] = (0.0, math.inf)
    decay_rate: tuple[float, float] | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("radial", "axisymmetric"):
            raise InvalidInput(f"unknown TestFunction kind {self.kind!r}")

    @property
    def is_radial(self) -> bool:
        return self.kind == "radial"

    def laplacian(self, r, N):
        """Radial Laplacian u'' + (N-1) u'/r."""
        if self.d2u is None:
            from .errors import MissingSecondDerivative
            raise MissingSecondDerivative(f"{self.label or 'function'} has no second derivative")
        return self.d2u(r) + (N - 1) * self.du(r) / r

    def compact_support(self) -> tuple[float, float] | None:
        lo, hi = self.support_hint
        if lo > 0 and math.isfinite(hi):
            return (lo, hi)
        return None


def radial_from_jet(jet: Callable, *, support=(0.0, math.inf), decay=None, label="",
                    second=True) -> TestFunction:
    """Build a radial TestFunction from ``jet(r) -> (u, u', u'')``."""
    return TestFunction(
        kind="radial",
        u=lambda r: jet(np.asarray(r, dtype=float))[0],
        du=lambda r: jet(np.asarray(r, dtype=float))[1],
        d2u=(lambda r: jet(np.asarray(r, dtype=float))[2]) if second else None,
        support_hint=tuple(support), decay_rate=decay, label=label)


def _merge_support(funcs):
    lo = min(f.support_hint[0] for f in funcs)
    hi = max(f.support_hint[1] for f in funcs)
    return (lo, hi)


def _merge_decay(funcs):
    rates = [f.decay_rate for f in funcs]
    if any(r is None for r in rates):
        return None
    # slowest decay dominates
    return min(rates, key=lambda qg: (qg[1], qg[0]))


def combine(terms: Sequence[tuple[float, TestFunction]], label: str = "") -> TestFunction:
    """Linear combination sum_i c_i f_i of radial functions."""
    funcs = [f for _, f in terms]
    if not all(f.is_radial for f in funcs):
        raise InvalidInput("combine() expects radial functions; use combine_axisym")
    coefs = [float(c) for c, _ in terms]
    has2 = all(f.d2u is not None for f in funcs)

    def lin(attr):
        def g(r):
            r = np.asarray(r, dtype=float)
            return sum(c * getattr(f, attr)(r) for c, f in zip(coefs, funcs))
        return g

    return TestFunction("radial", lin("u"), lin("du"), lin("d2u") if has2 else None,
                        _merge_support(funcs), _merge_decay(funcs), label)


def as_axisym(f: TestFunction) -> TestFunction:
    """View a radial function as an axisymmetric one."""
    if not f.is_radial:
        return f

    def u(rho, z):
        return f.u(np.hypot(rho, z))

    def du(rho, z):
        R = np.hypot(rho, z)
        d = f.du(R) / R
        return d * rho, d * z

    return TestFunction("axisymmetric", u, du, None, f.support_hint, f.decay_rate, f.label)


def combine_axisym(terms: Sequence[tuple[float, TestFunction]], label: str = "") -> TestFunction:
    funcs = [as_axisym(f) for _, f in terms]
    coefs = [float(c) for c, _ in terms]

    def u(rho, z):
        return sum(c * f.u(rho, z) for c, f in zip(coefs, funcs))

    def du(rho, z):
        gr = 0.0
        gz = 0.0
        for c, f in zip(coefs, funcs):
            a, b = f.du(rho, z)
            gr = gr + c * a
            gz = gz + c * b
        return gr, gz

    return TestFunction("axisymmetric", u, du, None, _merge_support(funcs),
                        _merge_decay(funcs), label)


# ---------------------------------------------------------------------------
# first-order minimizers


def _check_family(params, pt: MinimizerPoint):
    fam = family_for(params)
    if pt.family is not fam:
        raise RegimeMismatch(f"minimizer family {pt.family.value} does not match {fam.value}")


def _first_jet(params: CknParams, k, lam, r):
    g = params.gamma1
    e0 = params.e0
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        logv = math.log(params.C1) + params.alpha * math.log(lam) + e0 * np.log(r) - lam * r ** g / g
        w = np.exp(logv)
        q = e0 / r - lam * r ** (g - 1.0)
        # scale by k last so that the jet is exactly linear in k
        d1 = k * (w * q)
        d2 = k * (w * (q * q - e0 / r ** 2 - lam * (g - 1.0) * r ** (g - 2.0)))
    return k * w, d1, d2


def minimizer_eval(params: CknParams, pt: MinimizerPoint, r):
    """Value and radial derivative of v(k, lambda) at r."""
    _check_family(params, pt)
    v, d1, _ = _first_jet(params, pt.k, pt.lam, r)
    return v, d1


def minimizer_function(params: CknParams, pt: MinimizerPoint) -> TestFunction:
    _check_family(params, pt)
    k, lam = pt.k, pt.lam
    return radial_from_jet(lambda r: _first_jet(params, k, lam, r),
                           decay=(lam / params.gamma1, params.gamma1),
                           label=f"v({k:g},{lam:g})")


def minimizer_norms(params: CknParams, pt: MinimizerPoint):
    """Closed-form (H_b, L_a, L_c) norms of v(k, lambda)."""
    _check_family(params, pt)
    p, S = params.p, params.S
    k, lam = abs(pt.k), pt.lam
    return (k * lam ** (1 - 1 / p) * S ** (1 / p), k * (S / lam) ** (1 / p), k)


# ---------------------------------------------------------------------------
# second-order minimizers


@lru_cache(maxsize=32)
def _tail_table(N: int, gam: float):
    """Spline for J(x) = int_x^inf s^{1-N} exp(-s^gam/gam) ds on x >= 1.

    Stores log of the scaled tail H(x) = J(x) exp(x^gam/gam), which is smooth.
    """
    t_end = 800.0
    x_end = (gam * t_end) ** (1.0 / gam)
    h = 0.02
    n = max(4, int(math.ceil(math.log(x_end) / h)))
    edges = np.linspace(0.0, math.log(x_end), n + 1)
    a = (2.0 - N) / gam
    # asymptotic expansion of the upper incomplete Gamma at t_end
    corr = 1.0 + (a - 1) / t_end + (a - 1) * (a - 2) / t_end ** 2 + (a - 1) * (a - 2) * (a - 3) / t_end ** 3
    H = np.empty(n + 1)
    H[-1] = gam ** (a - 1.0) * t_end ** (a - 1.0) * corr
    lo, hi = edges[:-1], edges[1:]
    c, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    s = c[:, None] + hw[:, None] * _XK[None, :]
    xs = np.exp(s)
    x0 = np.exp(lo)[:, None]
    integrand = xs ** (2.0 - N) * np.exp(-(xs ** gam - x0 ** gam) / gam)
    Q = hw * (integrand * _WK[None, :]).sum(axis=1)
    decay = np.exp(-(np.exp(hi) ** gam - np.exp(lo) ** gam) / gam)
    for i in range(n - 1, -1, -1):
        H[i] = Q[i] + H[i + 1] * decay[i]
    return CubicSpline(edges, np.log(H)), x_end


def _small_tail(x, N, gam, nterms=60):
    """int_x^1 s^{1-N} exp(-s^gam/gam) ds for 0 < x <= 1 by the exponential series."""
    out = np.zeros_like(x)
    coef = 1.0
    for kk in range(nterms):
        if kk > 0:
            coef *= -1.0 / (gam * kk)
        m1 = 2.0 - N + kk * gam
        if abs(m1) < 1e-14:
            term = -np.log(x)
        else:
            term = (1.0 - x ** m1) / m1
        out += coef * term
    return out


def tail_integral(x, N: int, gam: float):
    """J(x) = int_x^inf s^{1-N} exp(-s^gam/gam) ds, vectorized over x > 0."""
    x = np.asarray(x, dtype=float)
    spl, x_end = _tail_table(int(N), float(gam))
    out = np.zeros_like(x)
    big = x >= 1.0
    xb = np.minimum(x[big], x_end)
    with np.errstate(under="ignore"):
        out[big] = np.where(x[big] >= x_end, 0.0,
                            np.exp(spl(np.log(xb)) - xb ** gam / gam))
    small = ~big
    if np.any(small):
        J1 = math.exp(float(spl(0.0)) - 1.0 / gam)
        out[small] = J1 + _small_tail(x[small], N, gam)
    return out


def _second_jet(params2: Ckn2Params, k, lam, r):
    N, g = params2.N, params2.gamma2
    r = np.asarray(r, dtype=float)
    A = k * params2.C3 * lam ** params2.beta
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        E = np.exp(-lam * r ** g / g)
        d1 = -A * r ** (1.0 - N) * E
        lap = A * lam * r ** (g - N) * E
        d2 = lap - (N - 1) * d1 / r
        val = A * lam ** ((N - 2.0) / g) * tail_integral(lam ** (1.0 / g) * r, N, g)
    return val, d1, d2


def second_minimizer_eval(params2: Ckn2Params, pt: MinimizerPoint, r):
    """(value, derivative, laplacian) of the second-order family member."""
    _check_family(params2, pt)
    val, d1, d2 = _second_jet(params2, pt.k, pt.lam, r)
    r = np.asarray(r, dtype=float)
    return val, d1, d2 + (params2.N - 1) * d1 / r


def second_minimizer_function(params2: Ckn2Params, pt: MinimizerPoint) -> TestFunction:
    _check_family(params2, pt)
    k, lam = pt.k, pt.lam
    return radial_from_jet(lambda r: _second_jet(params2, k, lam, r),
                           decay=(lam / params2.gamma2, params2.gamma2),
                           label=f"v2({k:g},{lam:g})")


def second_minimizer_norms(params2: Ckn2Params, pt: MinimizerPoint):
    """Closed-form (||Lap v||_{L_b}, ||v||_{H_a}, ||v||_{H_c})."""
    _check_family(params2, pt)
    p, K = params2.p, params2.K
    k, lam = abs(pt.k), pt.lam
    return (k * lam ** (1 - 1 / p) * K ** (1 / p), k * (K / lam) ** (1 / p), k)


def family_function(params, k: float, lam: float) -> TestFunction:
    pt = MinimizerPoint(family_for(params), k, lam)
    if isinstance(params, Ckn2Params):
        return second_minimizer_function(params, pt)
    return minimizer_function(params, pt)


# ---------------------------------------------------------------------------
# profile specifications


@dataclass(frozen=True)
class MinimizerSpec:
    k: float = 1.0
    lam: float = 1.0
    kind: str = field(default="minimizer", init=False)


PERTURBATION_MODES = ("gauss_bump", "poly_tilt", "scale_split")


@dataclass(frozen=True)
class PerturbedMinimizer:
    k: float = 1.0
    lam: float = 1.0
    eps: float = 0.01
    mode: str = "gauss_bump"
    kind: str = field(default="perturbed", init=False)

    def __post_init__(self):
        if self.mode not in PERTURBATION_MODES:
            raise InvalidInput(f"unknown perturbation mode {self.mode!r}")


CLOSED_FORMS = ("gaussian", "exp_r", "bump", "quartic")


@dataclass(frozen=True)
class ClosedForm:
    name: str = "gaussian"
    scale: float = 1.0
    kind: str = field(default="closed_form", init=False)

    def __post_init__(self):
        if self.name not in CLOSED_FORMS:
            raise InvalidInput(f"unknown closed form {self.name!r}")
        if not self.scale > 0:
            raise InvalidInput("scale must be positive")


@dataclass(frozen=True)
class Samples:
    r_grid: tuple
    values: tuple
    kind: str = field(default="samples", init=False)

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or len(r) < 8:
            raise BadSamples("sampled profiles need at least 8 grid points")
        if v.shape != r.shape:
            raise BadSamples("r_grid and values must have equal length")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(v)):
            raise BadSamples("samples must be finite")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise BadSamples("r_grid must be positive and strictly increasing")
        object.__setattr__(self, "r_grid", tuple(float(x) for x in r))
        object.__setattr__(self, "values", tuple(float(x) for x in v))


ProfileSpec = Union[MinimizerSpec, PerturbedMinimizer, ClosedForm, Samples]


def profile_to_dict(spec) -> dict:
    if isinstance(spec, MinimizerSpec):
        return {"kind": "minimizer", "k": spec.k, "lambda": spec.lam}
    if isinstance(spec, PerturbedMinimizer):
        return {"kind": "perturbed", "k": spec.k, "lambda": spec.lam, "eps": spec.eps,
                "mode": spec.mode}
    if isinstance(spec, ClosedForm):
        return {"kind": "closed_form", "name": spec.name, "scale": spec.scale}
    if isinstance(spec, Samples):
        return {"kind": "samples", "r_grid": list(spec.r_grid), "values": list(spec.values)}
    raise InvalidInput(f"not a profile spec: {spec!r}")


def profile_from_dict(d: dict):
    kind = d.get("kind")
    try:
        if kind == "minimizer":
            return MinimizerSpec(float(d.get("k", 1.0)), float(d.get("lambda", 1.0)))
        if kind == "perturbed":
            return PerturbedMinimizer(float(d.get("k", 1.0)), float(d.get("lambda", 1.0)),
                                      float(d.get("eps", 0.01)), d.get("mode", "gauss_bump"))
        if kind == "closed_form":
            return ClosedForm(d.get("name", "gaussian"), float(d.get("scale", 1.0)))
        if kind == "samples":
            return Samples(tuple(d["r_grid"]), tuple(d["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"malformed profile spec: {exc}") from None
    raise InvalidInput(f"unknown profile kind {kind!r}")


def _scaled_jet(jet, s):
    """Jet of x -> f(x / s)."""
    def g(r):
        f0, f1, f2 = jet(r / s)
        return f0, f1 / s, f2 / s ** 2
    return g


def _times_power(jet, e0):
    """Jet of r^{e0} f(r)."""
    if e0 == 0:
        return jet

    def g(r):
        f0, f1, f2 = jet(r)
        P = r ** e0
        P1 = e0 * r ** (e0 - 1)
        P2 = e0 * (e0 - 1) * r ** (e0 - 2)
        return P * f0, P1 * f0 + P * f1, P2 * f0 + 2 * P1 * f1 + P * f2
    return g


def _closed_form_jet(name):
    if name == "gaussian":
        def jet(r):
            e = np.exp(-r * r)
            return e, -2 * r * e, (4 * r * r - 2) * e
        return jet, (1.0, 2.0), (0.0, math.inf)
    if name == "exp_r":
        def jet(r):
            e = np.exp(-r)
            return e, -e, e
        return jet, (1.0, 1.0), (0.0, math.inf)
    if name == "quartic":
        def jet(r):
            e = np.exp(-r ** 4)
            return e, -4 * r ** 3 * e, (16 * r ** 6 - 12 * r ** 2) * e
        return jet, (1.0, 4.0), (0.0, math.inf)
    if name == "bump":
        # C-infinity bump exp(-1/(1-r^2)) on r < 1
        def jet(r):
            inside = r < 1.0
            rr = np.where(inside, r, 0.0)
            w = 1.0 - rr * rr
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                e = np.where(inside, np.exp(-1.0 / w), 0.0)
                q = -2 * rr / w ** 2
                dq = -2 / w ** 2 - 8 * rr * rr / w ** 3
                f1 = np.where(inside, q * e, 0.0)
                f2 = np.where(inside, (q * q + dq) * e, 0.0)
            return e, f1, f2
        return jet, None, (0.0, 1.0)
    raise InvalidInput(f"unknown closed form {name!r}")


def _smoothstep(t):
    """Quintic smoothstep on [0, 1] with zero first/second derivatives at ends."""
    t = np.clip(t, 0.0, 1.0)
    h = t ** 3 * (10 - 15 * t + 6 * t * t)
    h1 = 30 * t * t * (1 - t) ** 2
    h2 = 60 * t * (1 - t) * (1 - 2 * t)
    return h, h1, h2


def samples_jet(r_grid, values):
    """C^2 spline in log r, extended by zero with a one-cell smoothstep blend at both ends."""
    rg = np.asarray(r_grid, dtype=float)
    x = np.log(rg)
    spl = CubicSpline(x, np.asarray(values, dtype=float), bc_type="natural")
    d1s, d2s = spl.derivative(1), spl.derivative(2)
    r1, r2, rm, rn = rg[0], rg[1], rg[-2], rg[-1]

    def jet(r):
        r = np.asarray(r, dtype=float)
        inside = (r > r1) & (r < rn)
        rc = np.clip(r, r1, rn)
        xl = np.log(rc)
        s0, s1, s2 = spl(xl), d1s(xl), d2s(xl)
        f0 = s0
        f1 = s1 / rc
        f2 = (s2 - s1) / rc ** 2
        # left blend on [r1, r2], right blend on [rm, rn]
        hl, hl1, hl2 = _smoothstep((rc - r1) / (r2 - r1))
        hl1, hl2 = hl1 / (r2 - r1), hl2 / (r2 - r1) ** 2
        hr, hr1, hr2 = _smoothstep((rn - rc) / (rn - rm))
        hr1, hr2 = -hr1 / (rn - rm), hr2 / (rn - rm) ** 2
        B0 = hl * hr
        B1 = hl1 * hr + hl * hr1
        B2 = hl2 * hr + 2 * hl1 * hr1 + hl * hr2
        g0 = f0 * B0
        g1 = f1 * B0 + f0 * B1
        g2 = f2 * B0 + 2 * f1 * B1 + f0 * B2
        z = np.zeros_like(r)
        return np.where(inside, g0, z), np.where(inside, g1, z), np.where(inside, g2, z)

    return jet, (float(r1), float(rn))


def _log_bump(t, center=0.3, width=0.6):
    """Gaussian in t = log(r / r_scale) and its t-derivatives."""
    s = (t - center) / width
    g = np.exp(-0.5 * s * s)
    return g, -s / width * g, (s * s - 1.0) / width ** 2 * g


def _first_order_perturbation(params: CknParams, k, lam, eps, mode, spec):
    base = family_function(params, k, lam)
    if mode == "scale_split":
        other = family_function(params, k, 3.0 * lam)
        return combine([(1.0 - eps, base), (eps, other)],
                       label=f"split({k:g},{lam:g},{eps:g})")
    g = params.gamma1
    unit = family_function(params, 1.0, lam)
    rs = lam ** (-1.0 / g)

    if mode == "gauss_bump":
        def pjet(r):
            v0, v1, v2 = unit.u(r), unit.du(r), unit.d2u(r)
            b0, bt, btt = _log_bump(np.log(r / rs))
            f1 = bt / r
            f2 = (btt - bt) / r ** 2
            return v0 * b0, v1 * b0 + v0 * f1, v2 * b0 + 2 * v1 * f1 + v0 * f2
    else:  # poly_tilt
        def pjet(r):
            v0, v1, v2 = unit.u(r), unit.du(r), unit.d2u(r)
            t = lam * r ** g
            t1 = g * lam * r ** (g - 1)
            t2 = g * (g - 1) * lam * r ** (g - 2)
            q0, q1, q2 = 0.5 * t * t, t * t1, t1 * t1 + t * t2
            return v0 * q0, v1 * q0 + v0 * q1, v2 * q0 + 2 * v1 * q1 + v0 * q2

    pert = radial_from_jet(pjet, decay=(lam / g / 2, g), label=mode)
    p = params.p
    nrm, _ = integrate_radial(lambda r: np.abs(pert.u(r)) ** p, params.N - 1 - p * params.c, spec)
    nrm = nrm ** (1.0 / p) * _sphere(params.N) ** (1.0 / p)
    return combine([(1.0, base), (eps * abs(k) / nrm, pert)],
                   label=f"{mode}({k:g},{lam:g},{eps:g})")


def _second_order_perturbation(params2: Ckn2Params, k, lam, eps, mode, spec):
    base = family_function(params2, k, lam)
    if mode == "scale_split":
        other = family_function(params2, k, 3.0 * lam)
        return combine([(1.0 - eps, base), (eps, other)],
                       label=f"split({k:g},{lam:g},{eps:g})")
    g = params2.gamma2
    s = lam ** (-1.0 / g)
    if mode == "gauss_bump":
        def jet(t):
            e = np.exp(-t * t)
            return t * t * e, (2 * t - 2 * t ** 3) * e, (2 - 10 * t * t + 4 * t ** 4) * e
    else:
        def jet(t):
            e = np.exp(-t * t)
            return (1 + t * t) * e, -2 * t ** 3 * e, (-6 * t * t + 4 * t ** 4) * e
    pert = radial_from_jet(_scaled_jet(jet, s), decay=(1.0 / s ** 2, 2.0), label=mode)
    p = params2.p
    nrm, _ = integrate_radial(lambda r: np.abs(pert.du(r)) ** p,
                              params2.N - 1 - p * params2.c2, spec)
    nrm = (nrm * _sphere(params2.N)) ** (1.0 / p)
    return combine([(1.0, base), (eps * abs(k) / nrm, pert)],
                   label=f"{mode}({k:g},{lam:g},{eps:g})")


def _sphere(N):
    from .numerics import sphere_area
    return sphere_area(N)


def make_profile(spec, params, qspec: QuadratureSpec = DEFAULT_SPEC) -> TestFunction:
    """Turn a ProfileSpec into a TestFunction for the given parameter bundle."""
    if isinstance(spec, dict):
        spec = profile_from_dict(spec)
    second = isinstance(params, Ckn2Params)
    if isinstance(spec, MinimizerSpec):
        return family_function(params, spec.k, spec.lam)
    if isinstance(spec, PerturbedMinimizer):
        if second:
            return _second_order_perturbation(params, spec.k, spec.lam, spec.eps, spec.mode, qspec)
        return _first_order_perturbation(params, spec.k, spec.lam, spec.eps, spec.mode, qspec)
    if isinstance(spec, ClosedForm):
        jet, decay, support = _closed_form_jet(spec.name)
        jet = _scaled_jet(jet, spec.scale)
        if decay is not None:
            decay = (decay[0] / spec.scale ** decay[1], decay[1])
        support = (support[0] * spec.scale, support[1] * spec.scale)
        if not second and params.e0 != 0:
            jet = _times_power(jet, params.e0)
        if spec.name == "bump":
            support = (0.0, support[1])
        return radial_from_jet(jet, support=support, decay=decay,
                               label=f"{spec.name}(scale={spec.scale:g})")
    if isinstance(spec, Samples):
        jet, support = samples_jet(spec.r_grid, spec.values)
        return radial_from_jet(jet, support=support, label="samples")
    raise InvalidInput(f"not a profile spec: {spec!r}")


def anisotropic_wrap(params: CknParams, pt: MinimizerPoint, A_last: float) -> TestFunction:
    """u(x) = v(Ax) with A = diag(1, ..., 1, A_last) as a function of (rho, z)."""
    if isinstance(params, Ckn2Params):
        raise RegimeMismatch("anisotropic_wrap needs a first-order regime")
    _check_family(params, pt)
    if not (math.isfinite(A_last) and A_last > 0):
        raise InvalidInput("A_last must be positive")
    A2 = float(A_last) ** 2
    k, lam = pt.k, pt.lam

    def u(rho, z):
        R = np.sqrt(rho * rho + A2 * z * z)
        return _first_jet(params, k, lam, R)[0]

    def du(rho, z):
        R = np.sqrt(rho * rho + A2 * z * z)
        d = _first_jet(params, k, lam, R)[1] / R
        return d * rho, d * A2 * z

    q = lam / params.gamma1 * min(1.0, A_last) ** params.gamma1
    return TestFunction("axisymmetric", u, du, None, (0.0, math.inf), (q, params.gamma1),
                        f"v({k:g},{lam:g})(A x), A_last={A_last:g}")
