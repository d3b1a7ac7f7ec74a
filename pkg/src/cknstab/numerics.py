"""Quadrature for singular/improper radial integrals, Gamma, and 1D/2D minimizers.

Radial integrals are computed in the logarithmic variable ``s = log r``:

    int_0^inf f(r) r^m dr = int_R f(e^s) e^{(m+1)s} ds

so an algebraic singularity at the origin becomes exponential decay at
``s -> -inf`` and an exponential tail becomes double-exponential decay at
``s -> +inf``.  The truncated interval is found by a coarse scan and the
integral itself by a vectorized adaptive Gauss-Kronrod (10/21) rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as _sopt

from .errors import InvalidBracket, InvalidInput, NonConvergence, SingularEndpoint

# Kronrod 21-point nodes and weights on [-1, 1]; Gauss 10-point nodes are the
# odd-indexed Kronrod nodes.
_XK = np.array([
    -0.9956571630258081, -0.9739065285171717, -0.9301574913557082,
    -0.8650633666889845, -0.7808177265864169, -0.6794095682990244,
    -0.5627571346686047, -0.4333953941292472, -0.2943928627014602,
    -0.14887433898163122, 0.0, 0.14887433898163122, 0.2943928627014602,
    0.4333953941292472, 0.5627571346686047, 0.6794095682990244,
    0.7808177265864169, 0.8650633666889845, 0.9301574913557082,
    0.9739065285171717, 0.9956571630258081,
])
_WK = np.array([
    0.011694638867371874, 0.032558162307964725, 0.054755896574351995,
    0.07503967481091996, 0.0931254545836976, 0.10938715880229764,
    0.12349197626206584, 0.13470921731147334, 0.14277593857706009,
    0.14773910490133849, 0.1494455540029169, 0.14773910490133849,
    0.14277593857706009, 0.13470921731147334, 0.12349197626206584,
    0.10938715880229764, 0.0931254545836976, 0.07503967481091996,
    0.054755896574351995, 0.032558162307964725, 0.011694638867371874,
])
_GAUSS_IDX = np.arange(1, 21, 2)
_WG = np.array([
    0.06667134430868714, 0.14945134915058053, 0.21908636251598224,
    0.26926671930999674, 0.2955242247147533, 0.2955242247147533,
    0.26926671930999674, 0.21908636251598224, 0.14945134915058053,
    0.06667134430868714,
])

_EPS = np.finfo(float).eps
_S_MAX = 100.0          # scan |log r| up to 100
_SCAN_STEP = 0.25
_SIGNIFICANT = 1e-17    # relative to the component's peak on the scan
_MIN_TAIL_RATE = 0.01   # slower decay in log r is treated as divergent


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and truncation controls for radial/axisymmetric quadrature."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    split_points: tuple[float, ...] = (1.0,)
    tail_cutoff_strategy: str = "exp_decay_bound"
    max_subdivisions: int = 4000
    r_max: float | None = None          # used by tail_cutoff_strategy="fixed_R"

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidInput("rel_tol and abs_tol must be positive")
        pts = tuple(float(x) for x in self.split_points)
        if any(x <= 0 or not math.isfinite(x) for x in pts):
            raise InvalidInput("split points must be positive and finite")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise InvalidInput("split points must be strictly increasing")
        object.__setattr__(self, "split_points", pts)
        if self.tail_cutoff_strategy not in ("exp_decay_bound", "fixed_R"):
            raise InvalidInput(f"unknown tail strategy {self.tail_cutoff_strategy!r}")
        if self.tail_cutoff_strategy == "fixed_R" and not (self.r_max and self.r_max > 0):
            raise InvalidInput("fixed_R needs a positive r_max")
        if self.max_subdivisions < 1:
            raise InvalidInput("max_subdivisions must be >= 1")

    def tightened(self, factor: float = 10.0) -> "QuadratureSpec":
        return QuadratureSpec(self.rel_tol / factor, self.abs_tol / factor, self.split_points,
                              self.tail_cutoff_strategy, self.max_subdivisions * 2, self.r_max)

    def to_dict(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "split_points": list(self.split_points),
                "tail_cutoff_strategy": self.tail_cutoff_strategy,
                "max_subdivisions": self.max_subdivisions, "r_max": self.r_max}


DEFAULT_SPEC = QuadratureSpec()


@dataclass
class OptimizeResult:
    argmin: np.ndarray
    value: float
    iterations: int
    converged: bool
    at_boundary: bool


# ---------------------------------------------------------------------------
# special functions


def gamma_fn(x: float) -> float:
    """Gamma function on the positive half line."""
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise InvalidInput(f"gamma_fn needs a finite positive argument, got {x}")
    return math.gamma(x)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n (n >= 1)."""
    if n < 1:
        raise InvalidInput("sphere dimension must be >= 1")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def gamma_moment(s: float, q: float, g: float) -> float:
    """Closed form of int_0^inf r^s exp(-q r^g) dr for s > -1, q, g > 0."""
    t = (s + 1.0) / g
    return gamma_fn(t) / (g * q ** t)


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod on a set of intervals, vector valued


def _gk_eval(F, lo, hi):
    """Apply GK21 to every interval; returns (K, err, resabs) of shape (n, k)."""
    c = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    s = c[:, None] + hw[:, None] * _XK[None, :]
    vals = F(s.ravel())
    vals = vals.reshape(s.shape + vals.shape[1:])          # (n, 21, k)
    hw3 = hw[:, None]
    K = hw3 * np.einsum("j,njk->nk", _WK, vals)
    G = hw3 * np.einsum("j,njk->nk", _WG, vals[:, _GAUSS_IDX])
    resabs = hw3 * np.einsum("j,njk->nk", _WK, np.abs(vals))
    mean = K / np.where(hw3 == 0, 1.0, 2.0 * hw3)
    resasc = hw3 * np.einsum("j,njk->nk", _WK, np.abs(vals - mean[:, None, :]))
    err = np.abs(K - G)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    err = np.maximum(err, 50.0 * _EPS * resabs)
    return K, err, resabs


def _adaptive(F, breaks, rel_tol, abs_tol, max_sub):
    breaks = np.asarray(breaks, dtype=float)
    lo, hi = breaks[:-1].copy(), breaks[1:].copy()
    K, err, rabs = _gk_eval(F, lo, hi)
    while True:
        total = K.sum(axis=0)
        total_err = err.sum(axis=0)
        tol = np.maximum(np.maximum(abs_tol, rel_tol * np.abs(total)),
                         100.0 * _EPS * rabs.sum(axis=0))
        bad = total_err > tol
        if not bad.any():
            return total, total_err
        if len(lo) >= max_sub:
            raise NonConvergence(
                f"subdivision budget {max_sub} exhausted (error {total_err.max():.3e})")
        pick = np.zeros(len(lo), dtype=bool)
        for c in np.flatnonzero(bad):
            order = np.argsort(-err[:, c], kind="stable")
            excess = total_err[c] - 0.5 * tol[c]
            n_pick = int(np.searchsorted(np.cumsum(err[order, c]), excess)) + 1
            pick[order[:n_pick]] = True
        mid = 0.5 * (lo[pick] + hi[pick])
        nlo = np.concatenate([lo[pick], mid])
        nhi = np.concatenate([mid, hi[pick]])
        nK, nerr, nabs = _gk_eval(F, nlo, nhi)
        keep = ~pick
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        K = np.concatenate([K[keep], nK])
        err = np.concatenate([err[keep], nerr])
        rabs = np.concatenate([rabs[keep], nabs])


# ---------------------------------------------------------------------------
# radial integrals


def _log_integrand(f, m):
    """Map f(r)·r^m dr to an integrand in s = log r, evaluated overflow-safely."""
    m = np.atleast_1d(np.asarray(m, dtype=float))

    def F(s, strict=True):
        r = np.exp(s)
        with np.errstate(all="ignore"):
            v = np.asarray(f(r), dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            v = np.broadcast_to(v, (len(s), len(m))) if v.shape[1] == 1 else v
            mag = np.log(np.abs(v)) + (m[None, :] + 1.0) * s[:, None]
            out = np.sign(v) * np.exp(mag)
        out = np.where(v == 0, 0.0, out)
        if strict and not np.all(np.isfinite(out)):
            raise SingularEndpoint("integrand is not finite on the integration range")
        return out

    return F, len(m)


def _truncate(F, spec: QuadratureSpec):
    """Find [A, B] in log r holding the integrand plus analytic tail corrections.

    Rows of the scan where evaluation overflows are accepted only at the two
    ends of the scan and only when the integrand is already negligible next to
    them; the integration range is then clipped to the finite part.
    """
    hi_lim = _S_MAX
    if spec.tail_cutoff_strategy == "fixed_R":
        hi_lim = math.log(spec.r_max)
    s = np.arange(-_S_MAX, hi_lim + 0.5 * _SCAN_STEP, _SCAN_STEP)
    if s[-1] > hi_lim:
        s[-1] = hi_lim
    vals = F(s, strict=False)
    finite_rows = np.all(np.isfinite(vals), axis=1)
    if not finite_rows.any():
        raise SingularEndpoint("integrand is not finite anywhere on the scan range")
    # keep the finite run holding the largest value; everything outside must be negligible
    mag = np.where(finite_rows[:, None], np.abs(np.where(np.isfinite(vals), vals, 0.0)), 0.0)
    jpk = int(np.argmax(mag.max(axis=1)))
    j0 = jpk
    while j0 > 0 and finite_rows[j0 - 1]:
        j0 -= 1
    j1 = jpk
    while j1 < len(s) - 1 and finite_rows[j1 + 1]:
        j1 += 1
    clipped_lo, clipped_hi = j0 > 0, j1 < len(s) - 1
    s = s[j0:j1 + 1]
    vals = vals[j0:j1 + 1]
    absv = np.abs(vals)
    peak = absv.max(axis=0)
    for edge, clipped in ((0, clipped_lo), (-1, clipped_hi)):
        if clipped and np.any(absv[edge] > _SIGNIFICANT * np.where(peak > 0, peak, 1.0)):
            raise SingularEndpoint("integrand overflows where it is not negligible")
    ncomp = vals.shape[1]
    if not np.any(peak > 0):
        return None
    sig = absv > _SIGNIFICANT * np.where(peak > 0, peak, 1.0)[None, :]
    sig &= peak[None, :] > 0
    any_sig = sig.any(axis=1)
    idx = np.flatnonzero(any_sig)
    i0, i1 = idx[0], idx[-1]
    tails = np.zeros(ncomp)
    tail_err = np.zeros(ncomp)
    n = len(s)
    if i0 == 0:
        d = 4
        a0, a1 = vals[0], vals[d]
        for c in range(ncomp):
            if not sig[0, c]:
                continue
            if a0[c] == 0 or a1[c] == 0 or np.sign(a0[c]) != np.sign(a1[c]):
                raise SingularEndpoint("cannot extrapolate the integrand at r -> 0")
            rate = math.log(abs(a1[c] / a0[c])) / (s[d] - s[0])
            if rate < _MIN_TAIL_RATE:
                raise SingularEndpoint(
                    f"integrand not integrable at r = 0 (log-slope {rate:.3g})")
            tails[c] += a0[c] / rate
            tail_err[c] += 1e-3 * abs(a0[c] / rate)
        A = s[0]
    else:
        A = s[max(i0 - 2, 0)]
    if i1 == n - 1 and spec.tail_cutoff_strategy != "fixed_R":
        d = 4
        a0, a1 = vals[-1 - d], vals[-1]
        for c in range(ncomp):
            if not sig[-1, c]:
                continue
            if a0[c] == 0 or a1[c] == 0 or np.sign(a0[c]) != np.sign(a1[c]):
                raise SingularEndpoint("cannot extrapolate the integrand at r -> inf")
            rate = -math.log(abs(a1[c] / a0[c])) / (s[-1] - s[-1 - d])
            if rate < _MIN_TAIL_RATE:
                raise SingularEndpoint(
                    f"integrand not integrable at r = inf (log-slope {-rate:.3g})")
            tails[c] += a1[c] / rate
            tail_err[c] += 1e-3 * abs(a1[c] / rate)
        B = s[-1]
    else:
        B = s[min(i1 + 2, n - 1)]
    return A, B, tails, tail_err


def _breaks(A, B, spec: QuadratureSpec, extra=(), width=1.0):
    pts = [math.log(x) for x in spec.split_points] + [math.log(x) for x in extra if x > 0]
    pts = sorted(p for p in pts if A < p < B)
    edges = [A] + pts + [B]
    out = [A]
    for a, b in zip(edges, edges[1:]):
        k = max(1, int(math.ceil((b - a) / width)))
        out.extend(list(a + (b - a) * np.arange(1, k + 1) / k))
    return np.array(out)


def integrate_radial(f: Callable, m, spec: QuadratureSpec = DEFAULT_SPEC, extra_splits=(),
                     support=None):
    """Compute int_0^inf f(r) r^m dr with an error estimate.

    ``f`` is vectorized over r.  It may return shape (n,) or (n, k); ``m`` may
    be a scalar or a length-k sequence of weight exponents, in which case k
    integrals are computed on a shared adaptive mesh and arrays are returned.
    ``support=(lo, hi)`` with 0 < lo < hi < inf restricts the integral to a
    known compact support and skips the tail scan.
    """
    scalar = np.ndim(m) == 0
    F, ncomp = _log_integrand(f, m)
    if support is not None and support[0] > 0 and math.isfinite(support[1]):
        lo, hi = math.log(support[0]), math.log(support[1])
        trunc = (lo, hi, np.zeros(ncomp), np.zeros(ncomp))
    else:
        trunc = _truncate(F, spec)
        if support is not None and math.isfinite(support[1]) and support[1] > 0:
            extra_splits = tuple(extra_splits) + (support[1],)
    if trunc is None:
        zero = np.zeros(ncomp)
        return (0.0, 0.0) if scalar else (zero, zero.copy())
    A, B, tails, tail_err = trunc
    breaks = _breaks(A, B, spec, extra_splits)
    val, err = _adaptive(F, breaks, spec.rel_tol, spec.abs_tol, spec.max_subdivisions)
    val = val + tails
    err = err + tail_err
    if scalar:
        return float(val[0]), float(err[0])
    return val, err


def integrate_interval(f: Callable, a: float, b: float, spec: QuadratureSpec = DEFAULT_SPEC):
    """Plain adaptive integral of a smooth f over a finite [a, b]."""
    if not b > a:
        return 0.0, 0.0

    def F(x):
        v = np.asarray(f(x), dtype=float)
        return v[:, None] if v.ndim == 1 else v

    n = max(1, int(math.ceil((b - a) / 1.0)))
    val, err = _adaptive(F, np.linspace(a, b, n + 1), spec.rel_tol, spec.abs_tol,
                         spec.max_subdivisions)
    return float(val[0]), float(err[0])


# ---------------------------------------------------------------------------
# axisymmetric integrals


def _polar_nodes(n):
    x, w = np.polynomial.legendre.leggauss(n)
    # Gauss-Legendre on [0, pi/2] and [pi/2, pi]; the split keeps |z|-type kinks at nodes' edge
    q = math.pi / 4.0
    th = np.concatenate([q * (x + 1.0), q * (x + 1.0) + 2.0 * q])
    wt = np.concatenate([q * w, q * w])
    return th, wt


def integrate_axisym(g: Callable, N: int, spec: QuadratureSpec = DEFAULT_SPEC,
                     weight=0.0, levels: Sequence[int] = (10, 20, 40, 80)):
    """Compute int_{R^N} g(|x'|, x_N) |x|^weight dx for x = (x', x_N).

    Uses polar coordinates (R, theta) in the meridian half plane,
    rho = R sin(theta), z = R cos(theta), so that

        int = |S^{N-2}| int_0^pi sin^{N-2}(theta) int_0^inf g R^{N-1+weight} dR dtheta.

    The angular rule is Gauss-Legendre doubled until two levels agree.
    ``g`` may return (n,) or (n, k) arrays and ``weight`` may be a length-k
    vector; the inner radial integral is vector valued across angular nodes.
    """
    if N < 2:
        raise InvalidInput("axisymmetric integrals need N >= 2")
    scalar = np.ndim(weight) == 0
    w_exp = np.atleast_1d(np.asarray(weight, dtype=float))
    k = len(w_exp)
    area = sphere_area(N - 1)
    prev = None
    for lvl in levels:
        th, wt = _polar_nodes(lvl)
        nth = len(th)
        sin_t, cos_t = np.sin(th), np.cos(th)

        def f(r, sin_t=sin_t, cos_t=cos_t, nth=nth):
            rho = (r[:, None] * sin_t[None, :]).ravel()
            z = (r[:, None] * cos_t[None, :]).ravel()
            v = np.asarray(g(rho, z), dtype=float)
            v = v.reshape(len(r), nth, -1)
            if v.shape[2] == 1 and k > 1:
                v = np.broadcast_to(v, (len(r), nth, k))
            return v.reshape(len(r), nth * k)

        m = np.tile(w_exp, nth) + (N - 1)
        vals, errs = integrate_radial(f, m, spec)
        vals = vals.reshape(nth, k)
        errs = errs.reshape(nth, k)
        ang = (wt * sin_t ** (N - 2))[:, None]
        cur = area * (ang * vals).sum(axis=0)
        cur_err = area * (ang * errs).sum(axis=0)
        if prev is not None:
            diff = np.abs(cur - prev)
            tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(cur))
            if np.all(diff <= tol):
                tot_err = cur_err + diff
                if scalar:
                    return float(cur[0]), float(tot_err[0])
                return cur, tot_err
        prev = cur
    raise NonConvergence("angular quadrature did not converge")


# ---------------------------------------------------------------------------
# minimization


def minimize_scalar(phi: Callable[[float], float], bracket: tuple[float, float],
                    tol: float = 1e-10, maxiter: int = 500) -> OptimizeResult:
    """Bounded Brent minimization of phi on [lo, hi]."""
    lo, hi = map(float, bracket)
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise InvalidBracket(f"invalid bracket ({lo}, {hi})")
    res = _sopt.minimize_scalar(phi, bounds=(lo, hi), method="bounded",
                                options={"xatol": tol, "maxiter": maxiter})
    x = float(res.x)
    edge = max(1e-6, 3.0 * tol)
    return OptimizeResult(argmin=np.array([x]), value=float(res.fun), iterations=int(res.nfev),
                          converged=bool(res.success),
                          at_boundary=(x - lo <= edge) or (hi - x <= edge))


def minimize_2d(phi: Callable[[float, float], float], init, box, tol: float = 1e-10,
                maxiter: int = 4000) -> OptimizeResult:
    """Nelder-Mead on a box; deterministic for a given starting point."""
    (x_lo, x_hi), (y_lo, y_hi) = box
    if not (x_lo < x_hi and y_lo < y_hi):
        raise InvalidBracket("invalid box")
    x0 = np.clip(np.asarray(init, dtype=float), [x_lo, y_lo], [x_hi, y_hi])
    step = 0.05 * np.array([x_hi - x_lo, y_hi - y_lo])
    step = np.minimum(step, 0.25 * np.maximum(np.abs(x0), 1.0))
    simplex = np.array([x0, x0 + [step[0], 0.0], x0 + [0.0, step[1]]])
    simplex = np.clip(simplex, [x_lo, y_lo], [x_hi, y_hi])

    def fun(x):
        return float(phi(x[0], x[1]))

    res = _sopt.minimize(fun, x0, method="Nelder-Mead", bounds=[(x_lo, x_hi), (y_lo, y_hi)],
                         options={"xatol": tol, "fatol": 0.0, "maxiter": maxiter,
                                  "maxfev": 4 * maxiter, "initial_simplex": simplex})
    x = np.asarray(res.x, dtype=float)
    edge = max(1e-6, 3.0 * tol)
    at_b = bool(np.any(x - [x_lo, y_lo] <= edge) or np.any([x_hi, y_hi] - x <= edge))
    return OptimizeResult(argmin=x, value=float(res.fun), iterations=int(res.nit),
                          converged=bool(res.success), at_boundary=at_b)


def find_root(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-14) -> float:
    """Brent root finder; lo/hi must bracket a sign change."""
    return float(_sopt.brentq(g, lo, hi, xtol=tol, rtol=4 * _EPS, maxiter=200))


@dataclass
class RadialRule:
    """Fixed nodes/weights for fast repeated radial integrals.

    ``integrate(values, m)`` approximates int_0^inf f(r) r^m dr given
    ``values = f(self.r)``.  Built from the adaptive mesh of a reference
    integrand and used inside optimizer loops; final quantities are always
    recomputed with :func:`integrate_radial`.
    """

    r: np.ndarray
    logw: np.ndarray          # log of (GK weight * jacobian r)
    logr: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.logr = np.log(self.r)

    def integrate(self, values, m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        with np.errstate(all="ignore"):
            w = np.exp(self.logw[:, None] + m[None, :] * self.logr[:, None])
            out = np.where(values == 0, 0.0, values * w).sum(axis=0)
        return out if len(m) > 1 else float(out[0])


def build_radial_rule(f: Callable, m, spec: QuadratureSpec = DEFAULT_SPEC,
                      widen: float = 0.0, max_width: float = 0.25) -> RadialRule:
    """Composite GK21 rule on the support of f(r) r^m (in log r), widened by ``widen``."""
    F, _ = _log_integrand(f, m)
    trunc = _truncate(F, spec)
    if trunc is None:
        raise InvalidInput("reference integrand vanishes identically")
    A, B = trunc[0] - widen, trunc[1] + widen
    edges = _breaks(A, B, spec, width=max_width)
    lo, hi = edges[:-1], edges[1:]
    c = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    s = (c[:, None] + hw[:, None] * _XK[None, :]).ravel()
    logw = np.log((hw[:, None] * _WK[None, :]).ravel()) + s
    return RadialRule(r=np.exp(s), logw=logw)
