"""Distances to the minimizer families, alignment functionals and orthogonality residuals.

All searches run over (k, log lambda).  A fixed composite Gauss-Kronrod rule
on the support of the target function is used inside the optimizer loops;
the reported distances, stationarity values and residuals are recomputed with
the adaptive integrator at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryHit, InvalidInput, NonConvergence, RegimeMismatch
from .functionals import radial_integrals
from .model import (Family, MinimizerPoint, TestFunction, family_for, family_function)
from .numerics import (DEFAULT_SPEC, QuadratureSpec, _WK, _XK, _breaks, _log_integrand,
                       _truncate, find_root, minimize_2d, minimize_scalar, sphere_area)
from .params import Ckn2Params, CknParams


@dataclass(frozen=True)
class ProjectionOptions:
    box: tuple[float, float] = (-14.0, 14.0)          # search box in log lambda
    seeds: tuple[float, ...] = (-4.0, -1.0, 0.0, 1.0, 4.0)
    scan_step: float = 0.25
    strict: bool = False                              # raise BoundaryHit when pinned
    spec: QuadratureSpec = DEFAULT_SPEC
    panel: float = 0.25                               # fixed-rule panel width in log r


DEFAULT_OPTIONS = ProjectionOptions()


@dataclass
class ProjectionResult:
    point: MinimizerPoint
    distance: float
    mu: float | None
    ortho_residuals: list
    converged: bool
    at_boundary: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"point": self.point.to_dict(), "distance": self.distance, "mu": self.mu,
                "ortho_residuals": list(self.ortho_residuals), "converged": self.converged,
                "at_boundary": self.at_boundary, "diagnostics": self.diagnostics}


# ---------------------------------------------------------------------------
# component description


@dataclass(frozen=True)
class _Comp:
    name: str
    kind: str          # "value", "gradient" or "laplacian"
    exponent: float    # weight |x|^exponent


def _components(params) -> dict:
    p = params.p
    if isinstance(params, Ckn2Params):
        return {"D_b": _Comp("D_b", "laplacian", -p * params.b),
                "H_a": _Comp("H_a", "gradient", -p * params.a),
                "H_c": _Comp("H_c", "gradient", -p * params.c2)}
    return {"H_b": _Comp("H_b", "gradient", -p * params.b),
            "L_a": _Comp("L_a", "value", -p * params.a),
            "L_c": _Comp("L_c", "value", -p * params.c)}


def unit_member(params, comp: _Comp, lam: float, r):
    """The component of the unit member (k = 1) at scale lam, evaluated on r."""
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        if isinstance(params, Ckn2Params):
            g, N = params.gamma2, params.N
            base = (math.log(params.C3) + params.beta * math.log(lam)
                    - lam * r ** g / g)
            if comp.kind == "gradient":
                return -np.exp(base + (1.0 - N) * np.log(r))
            if comp.kind == "laplacian":
                return np.exp(base + math.log(lam) + (g - N) * np.log(r))
            raise InvalidInput("second-order components are gradient or laplacian")
        g, e0 = params.gamma1, params.e0
        v = np.exp(math.log(params.C1) + params.alpha * math.log(lam) + e0 * np.log(r)
                   - lam * r ** g / g)
        if comp.kind == "value":
            return v
        if comp.kind == "gradient":
            return v * (e0 / r - lam * r ** (g - 1.0))
    raise InvalidInput(f"unsupported component {comp.kind}")


def unit_norm_p(params, comp: _Comp, lam: float) -> float:
    """Closed-form p-th power of the weighted norm of the unit member."""
    p = params.p
    C = params.K if isinstance(params, Ckn2Params) else params.S
    if comp.name in ("L_c", "H_c"):
        return 1.0
    if comp.name in ("L_a", "H_a"):
        return C / lam
    return lam ** (p - 1.0) * C


def _theta(params):
    if isinstance(params, Ckn2Params):
        return params.beta, params.gamma2
    return params.alpha, params.gamma1


# ---------------------------------------------------------------------------
# fixed-rule engine


class ManifoldFit:
    """Weighted distances between a fixed u and members k * v(1, lam) on a fixed rule.

    For each requested component X the engine evaluates
    ``D_X(k, lam) = ||u - v(k, lam)||_X^p`` and the pairing
    ``P_X(lam) = int w |phi|^{p-2} phi * u`` with phi the unit member.
    Mass of the family member outside the rule is accounted for with the
    closed-form unit norms, so the rule only needs to cover the support of u.
    """

    def __init__(self, u: TestFunction, params, comps=None, spec: QuadratureSpec = DEFAULT_SPEC,
                 panel: float = 0.25, n_theta: int = 24):
        self.params = params
        self.p = float(params.p)
        self.N = int(params.N)
        allc = _components(params)
        names = list(comps) if comps is not None else list(allc)
        self.comps = {n: allc[n] for n in names}
        self.u = u
        self.axisym = not u.is_radial
        if isinstance(params, Ckn2Params) and self.axisym:
            raise InvalidInput("second-order fits need radial functions")
        self._build(spec, panel, n_theta)

    # -- construction -----------------------------------------------------

    def _targets(self, r, th=None):
        """Per-component target arrays; for axisymmetric gradients a pair (|grad u|^2, d_R u)."""
        u, N = self.u, self.N
        out = {}
        if not self.axisym:
            for n, c in self.comps.items():
                if c.kind == "value":
                    out[n] = u.u(r)
                elif c.kind == "gradient":
                    out[n] = u.du(r)
                else:
                    out[n] = u.laplacian(r, N)
            return out
        st, ct = np.sin(th), np.cos(th)
        rho = r[:, None] * st[None, :]
        z = r[:, None] * ct[None, :]
        for n, c in self.comps.items():
            if c.kind == "value":
                out[n] = u.u(rho, z)
            elif c.kind == "gradient":
                gr, gz = u.du(rho, z)
                out[n] = (gr * gr + gz * gz, gr * st[None, :] + gz * ct[None, :])
            else:
                raise InvalidInput("laplacian component needs a radial function")
        return out

    def _build(self, spec, panel, n_theta):
        p = self.p
        if self.axisym:
            x, w = np.polynomial.legendre.leggauss(n_theta)
            q = math.pi / 4.0
            th = np.concatenate([q * (x + 1.0), q * (x + 1.0) + 2.0 * q])
            wth = np.concatenate([q * w, q * w]) * np.sin(th) ** (self.N - 2)
            self.th, self.wth = th, wth * sphere_area(self.N - 1)
        else:
            self.th = None

        def ref(r):
            t = self._targets(r, self.th)
            cols = []
            for n, c in self.comps.items():
                val = t[n]
                if isinstance(val, tuple):
                    val = np.sqrt(val[0])
                val = np.abs(val) ** p
                if val.ndim == 2:
                    val = val.max(axis=1)
                cols.append(val)
            return np.stack(cols, axis=1)

        exps = np.array([c.exponent for c in self.comps.values()]) + self.N - 1
        support = self.u.compact_support()
        if support is not None:
            A, B = math.log(support[0]), math.log(support[1])
        else:
            F, _ = _log_integrand(ref, exps)
            tr = _truncate(F, spec)
            if tr is None:
                raise InvalidInput("target function vanishes identically")
            A, B = tr[0] - 1.0, tr[1] + 1.0
        edges = _breaks(A, B, spec, width=panel)
        lo, hi = edges[:-1], edges[1:]
        c, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
        s = (c[:, None] + hw[:, None] * _XK[None, :]).ravel()
        self.r = np.exp(s)
        base = np.log((hw[:, None] * _WK[None, :]).ravel()) + s
        self.logw = {n: base + (cc.exponent + self.N - 1) * s for n, cc in self.comps.items()}
        self.t = self._targets(self.r, self.th)
        self._area = sphere_area(self.N)
        self._cache: dict = {}
        self.range = (float(A), float(B))
        self.tnorm_p = {n: self.dist_p(n, 0.0, 1.0) for n in self.comps}

    # -- evaluation -------------------------------------------------------

    def _sum(self, n, sign, logabs):
        """Weighted rule sum of sign * exp(logabs) over radial nodes or (r, theta) grids.

        Zero entries carry logabs = -inf, so no masking is needed.  Callers run
        under a quiet floating-point error state.
        """
        lw = self.logw[n]
        if np.ndim(sign) == 2:
            terms = sign * np.exp(logabs + lw[:, None])
            return float((terms @ self.wth).sum())
        return float(self._area * np.dot(sign, np.exp(logabs + lw)))

    def _member(self, n, lam):
        """Cached (phi, log|phi|, sign(phi), rule mass of |phi|^p) at scale lam."""
        key = (n, lam)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if len(self._cache) > 512:
            self._cache.clear()
        with np.errstate(all="ignore"):
            ph = unit_member(self.params, self.comps[n], lam, self.r)
            la = np.log(np.abs(ph))
            sg = np.sign(ph)
            if self.axisym:
                sg2 = np.broadcast_to(sg[:, None], (len(sg), len(self.th)))
                own = self._sum(n, sg2 * sg2, np.broadcast_to(self.p * la[:, None], sg2.shape))
            else:
                own = self._sum(n, sg * sg, self.p * la)
        hit = (ph, la, sg, own)
        self._cache[key] = hit
        return hit

    def phi(self, n, lam):
        return self._member(n, lam)[0]

    def dist_p(self, n, k, lam, phi=None):
        """||u - k v(1, lam)||_n^p with the out-of-rule mass of the member added analytically."""
        p = self.p
        ph, _, _, own = self._member(n, lam)
        tg = self.t[n]
        with np.errstate(all="ignore"):
            if isinstance(tg, tuple):
                G2, gR = tg
                kp = (k * ph)[:, None]
                d2 = np.maximum(G2 - 2.0 * kp * gR + kp * kp, 0.0)
                inner = self._sum(n, np.sign(d2), 0.5 * p * np.log(d2))
            else:
                d = tg - k * (ph if tg.ndim == 1 else ph[:, None])
                inner = self._sum(n, np.abs(np.sign(d)), p * np.log(np.abs(d)))
        U = unit_norm_p(self.params, self.comps[n], lam)
        return max(inner + abs(k) ** p * (U - own), 0.0)

    def pair(self, n, lam, extra=None):
        """int w |phi|^{p-2} phi u on the rule, optionally times extra(r) on the nodes."""
        p = self.p
        ph, la0, sgn, _ = self._member(n, lam)
        tg = self.t[n]
        with np.errstate(all="ignore"):
            la = (p - 1.0) * la0
            if extra is not None:
                sgn = sgn * np.sign(extra)
                la = la + np.log(np.abs(extra))
            if isinstance(tg, tuple):
                gR = tg[1]
                return self._sum(n, sgn[:, None] * np.sign(gR), la[:, None] + np.log(np.abs(gR)))
            if tg.ndim == 2:
                sgn, la = sgn[:, None], la[:, None]
            return self._sum(n, sgn * np.sign(tg), la + np.log(np.abs(tg)))

    def dk(self, n, k, lam, phi=None):
        """(1/p) d/dk of dist_p for radial targets; increasing in k."""
        p = self.p
        ph, la, sg, own = self._member(n, lam)
        with np.errstate(all="ignore"):
            d = self.t[n] - k * ph
            inner = self._sum(n, np.sign(d) * sg, (p - 1.0) * np.log(np.abs(d)) + la)
        U = unit_norm_p(self.params, self.comps[n], lam)
        return -inner + np.sign(k) * abs(k) ** (p - 1.0) * (U - own)

    def kopt(self, n, lam, phi=None):
        """k minimizing D_n(k, lam) for fixed lam."""
        p = self.p
        U = unit_norm_p(self.params, self.comps[n], lam)
        if p == 2.0:
            return self.pair(n, lam) / U
        ph = self.phi(n, lam) if phi is None else phi
        K = 2.0 * (self.tnorm_p[n] / U) ** (1 / p) + 1e-300

        def f(k):
            return self.dist_p(n, k, lam, ph)

        k = None
        if not self.axisym:
            lo, hi = self.dk(n, -K, lam, ph), self.dk(n, K, lam, ph)
            if lo < 0 < hi:
                k = find_root(lambda k: self.dk(n, k, lam, ph), -K, K, tol=1e-15 * K)
            elif lo >= 0 and hi >= 0 and lo <= hi:
                return 0.0 if lo == 0 else -K
        if k is None:
            grid = np.linspace(-K, K, 41)
            vals = np.array([f(k) for k in grid])
            i = int(np.argmin(vals))
            lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, 40)]
            k = float(minimize_scalar(f, (lo, hi), tol=1e-13 * max(K, 1e-300)).argmin[0])
        # the derivative is flat to order p-1 at an exact match, which limits the
        # root to about sqrt(eps); the weighted ratio is exact for members
        k_ratio = self.pair(n, lam) / U
        if math.isfinite(k_ratio) and f(k_ratio) <= f(k):
            return float(k_ratio)
        return k

    def dmin(self, n, lam):
        k = self.kopt(n, lam)
        return self.dist_p(n, k, lam), k


# ---------------------------------------------------------------------------
# 1-D searches in log lambda


def _multistart(obj, opts: ProjectionOptions):
    """Global-ish minimization of obj(log lambda) on the box: scan + seeded local refinement."""
    lo, hi = opts.box
    n = int(round((hi - lo) / opts.scan_step))
    grid = np.linspace(lo, hi, n + 1)
    vals = np.array([obj(x) for x in grid])
    finite = np.isfinite(vals)
    if not finite.any():
        raise NonConvergence("objective is not finite on the search box")
    vals = np.where(finite, vals, np.inf)

    def descend(i):
        while True:
            j = i
            if i > 0 and vals[i - 1] < vals[j]:
                j = i - 1
            if i < n and vals[i + 1] < vals[j]:
                j = i + 1
            if j == i:
                return i
            i = j

    starts = {int(np.argmin(vals))}
    for sd in opts.seeds:
        if lo <= sd <= hi:
            starts.add(descend(int(round((sd - lo) / opts.scan_step))))
    cands = []
    for i in sorted(starts):
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, n)]
        res = minimize_scalar(obj, (a, b), tol=1e-10)
        x = float(res.argmin[0])
        val = float(res.value)
        if vals[i] < val:
            x, val = float(grid[i]), float(vals[i])
        cands.append((val, abs(x), x))
    cands.sort()
    best = cands[0]
    spread = max(abs(c[2] - best[2]) for c in cands
                 if c[0] <= best[0] + 1e-9 * max(abs(best[0]), 1e-300))
    at_b = best[2] - lo <= max(1e-6, opts.scan_step * 0.5) or hi - best[2] <= max(1e-6, opts.scan_step * 0.5)
    return best[2], best[0], at_b, spread, len(cands)


def _polish_root(g, x0, h=0.05, tries=8):
    """Root of g near x0 by bracketing outward then Brent; returns None if no sign change."""
    g0 = g(x0)
    if g0 == 0:
        return x0
    for t in range(tries):
        step = h * (2 ** t)
        for a, b in ((x0 - step, x0), (x0, x0 + step)):
            ga, gb = g(a), g(b)
            if np.sign(ga) != np.sign(gb):
                return find_root(g, a, b, tol=1e-14)
    return None


# ---------------------------------------------------------------------------
# adaptive-quadrature helpers at the optimum


def _target_fun(u: TestFunction, comp: _Comp, N):
    if comp.kind == "value":
        return u.u
    if comp.kind == "gradient":
        return u.du
    return lambda r: u.laplacian(r, N)


def _adaptive_pair(u, params, comp, lam, spec, extra=None):
    """int w |phi|^{p-2} phi u [ * extra(r) ] dx with the adaptive integrator (radial u)."""
    p = params.p
    tf = _target_fun(u, comp, params.N)

    def f(r):
        ph = unit_member(params, comp, lam, r)
        val = np.sign(ph) * np.abs(ph) ** (p - 1.0) * tf(r)
        return val if extra is None else val * extra(r)

    vals, errs = radial_integrals([f], [comp.exponent], params.N, spec,
                                  support=u.compact_support())
    return float(vals[0]), float(errs[0])


def _adaptive_dist_p(u, params, comp, k, lam, spec):
    tf = _target_fun(u, comp, params.N)
    p = params.p

    def f(r):
        return np.abs(tf(r) - k * unit_member(params, comp, lam, r)) ** p

    vals, _ = radial_integrals([f], [comp.exponent], params.N, spec)
    return float(vals[0])


def _check_first(params):
    if isinstance(params, Ckn2Params):
        raise RegimeMismatch("expected first-order parameters")


def _check_second(params):
    if not isinstance(params, Ckn2Params):
        raise RegimeMismatch("expected second-order parameters")


def _boundary(at_b, opts, what):
    if at_b and opts.strict:
        raise BoundaryHit(f"{what}: lambda pinned to the edge of the search box")


# ---------------------------------------------------------------------------
# projections


def _project(u, params, comp_name, opts: ProjectionOptions):
    p = float(params.p)
    fit = ManifoldFit(u, params, [comp_name], opts.spec, opts.panel)
    comp = fit.comps[comp_name]
    theta, gam = _theta(params)
    unit = comp_name in ("L_c", "H_c")   # lambda-derivative formulas below need a unit-norm family
    if p == 2.0:
        obj = lambda x: -fit.pair(comp_name, math.exp(x)) ** 2 / unit_norm_p(
            params, comp, math.exp(x))
    else:
        obj = lambda x: fit.dmin(comp_name, math.exp(x))[0]
    x, val, at_b, spread, ncand = _multistart(obj, opts)
    stationarity = None
    if not at_b and unit:
        if p == 2.0:
            def g(xx):
                lam = math.exp(xx)
                return _adaptive_pair(u, params, comp, lam, opts.spec,
                                      extra=lambda r: theta - lam * r ** gam / gam)[0]
            root = _polish_root(g, x) if u.is_radial else None
            if root is not None:
                x = root
        else:
            def g(xx):
                lam = math.exp(xx)
                k = fit.kopt(comp_name, lam)
                ph = fit.phi(comp_name, lam)
                tg = fit.t[comp_name]
                d = tg - k * ph
                ex = ph * (theta - lam * fit.r ** gam / gam)
                with np.errstate(all="ignore"):
                    return fit._sum(comp_name, np.sign(d) * np.sign(ex),
                                    (p - 1.0) * np.log(np.abs(d)) + np.log(np.abs(ex)))
            root = _polish_root(g, x)
            if root is not None:
                x = root
    lam = math.exp(x)
    if p == 2.0:
        if u.is_radial and unit:
            k = _adaptive_pair(u, params, comp, lam, opts.spec)[0] / unit_norm_p(params, comp, lam)
        else:
            k = fit.kopt(comp_name, lam)
    else:
        k = fit.kopt(comp_name, lam)
    if k == 0.0:
        k = 1e-300
    pt = MinimizerPoint(family_for(params), k, lam)
    if u.is_radial:
        dist = _adaptive_dist_p(u, params, comp, k, lam, opts.spec) ** (1.0 / p)
    else:
        dist = fit.dist_p(comp_name, k, lam) ** (1.0 / p)
    if u.is_radial and unit:
        # first-order conditions: d/dk and lambda d/dlambda of the p-th power distance
        tf = _target_fun(u, comp, params.N)

        def dk(r):
            ph = unit_member(params, comp, lam, r)
            d = tf(r) - k * ph
            return np.sign(d) * np.abs(d) ** (p - 1.0) * ph

        def dl(r):
            return dk(r) * (theta - lam * r ** gam / gam)

        vals, _ = radial_integrals([dk, dl], [comp.exponent] * 2, params.N, opts.spec,
                                   support=None)
        unorm = max(fit.tnorm_p[comp_name], 1e-300) ** (1.0 / p)
        scale = unorm ** (p - 1.0)
        stationarity = [float(vals[0]) / scale, float(vals[1]) / scale]
    converged = not at_b
    _boundary(at_b, opts, "projection")
    diag = {"log_lambda": x, "multistart_spread": spread, "candidates": ncand,
            "stationarity": stationarity, "component": comp_name}
    return pt, dist, converged, at_b, diag


def inf_distance(u: TestFunction, params, comp_name: str,
                 opts: ProjectionOptions = DEFAULT_OPTIONS) -> ProjectionResult:
    """inf over the family of ||u - v||_X for a single weighted norm X.

    X is one of "H_b", "L_a", "L_c" (first order) or "D_b", "H_a", "H_c"
    (second order).
    """
    if comp_name not in _components(params):
        raise InvalidInput(f"unknown norm {comp_name!r} for these parameters")
    pt, dist, conv, at_b, diag = _project(u, params, comp_name, opts)
    return ProjectionResult(pt, dist, None, [], conv, at_b, diag)


def project_Lc(u: TestFunction, params: CknParams,
               opts: ProjectionOptions = DEFAULT_OPTIONS) -> ProjectionResult:
    """Nearest member of the first-order family in the weighted L^p_c norm."""
    _check_first(params)
    pt, dist, conv, at_b, diag = _project(u, params, "L_c", opts)
    res = ProjectionResult(pt, dist, None, [], conv, at_b, diag)
    if params.p == 2.0 and u.is_radial:
        res.ortho_residuals = orthogonality_residuals(u, pt, params, opts.spec)
    return res


def project_Hc2(u: TestFunction, params2: Ckn2Params,
                opts: ProjectionOptions = DEFAULT_OPTIONS) -> ProjectionResult:
    """Nearest member of the second-order family in the gradient-level H^p_{c2} norm."""
    _check_second(params2)
    if not u.is_radial:
        raise InvalidInput("second-order projection needs a radial function")
    pt, dist, conv, at_b, diag = _project(u, params2, "H_c", opts)
    res = ProjectionResult(pt, dist, None, [], conv, at_b, diag)
    if params2.p == 2.0:
        res.ortho_residuals = orthogonality_residuals(u, pt, params2, opts.spec)
    return res


def _align(u, params, comp_name, opts: ProjectionOptions):
    fit = ManifoldFit(u, params, [comp_name], opts.spec, opts.panel)
    comp = fit.comps[comp_name]
    theta, gam = _theta(params)
    x, val, at_b, spread, ncand = _multistart(lambda xx: -abs(fit.pair(comp_name, math.exp(xx))),
                                               opts)
    if not at_b and u.is_radial:
        def g(xx):
            lam = math.exp(xx)
            return _adaptive_pair(u, params, comp, lam, opts.spec,
                                  extra=lambda r: theta - lam * r ** gam / gam)[0]
        root = _polish_root(g, x)
        if root is not None:
            x = root
    lam = math.exp(x)
    if u.is_radial:
        P, _ = _adaptive_pair(u, params, comp, lam, opts.spec)
        stat, _ = _adaptive_pair(u, params, comp, lam, opts.spec,
                                 extra=lambda r: theta - lam * r ** gam / gam)
    else:
        P = fit.pair(comp_name, lam)
        stat = None
    sgn = 1.0 if P >= 0 else -1.0
    mu = abs(P)
    if mu == 0.0:
        mu = 1e-300
    pt = MinimizerPoint(family_for(params), sgn * mu, lam)
    unorm = fit.tnorm_p[comp_name] ** (1.0 / fit.p)
    dist = (_adaptive_dist_p(u, params, comp, sgn * mu, lam, opts.spec) if u.is_radial
            else fit.dist_p(comp_name, sgn * mu, lam)) ** (1.0 / fit.p)
    _boundary(at_b, opts, "alignment")
    diag = {"log_lambda": x, "sign": sgn, "multistart_spread": spread, "candidates": ncand,
            "stationarity": None if stat is None else stat / max(mu, 1e-300),
            "mu_normalized": mu / unorm if unorm > 0 else float("nan"),
            "u_norm": unorm, "component": comp_name}
    return pt, mu, dist, not at_b, at_b, diag


def best_aligned(u: TestFunction, params: CknParams,
                 opts: ProjectionOptions = DEFAULT_OPTIONS) -> ProjectionResult:
    """Maximize int |x|^{-pc} |w|^{p-2} w u over unit-norm members w = v(+-1, lambda).

    The returned point is vbar = mu * w, i.e. k = sign * mu.
    """
    _check_first(params)
    pt, mu, dist, conv, at_b, diag = _align(u, params, "L_c", opts)
    res = ProjectionResult(pt, dist, mu, [], conv, at_b, diag)
    if u.is_radial:
        res.ortho_residuals = orthogonality_residuals(u, pt, params, opts.spec)
    return res


def best_aligned2(u: TestFunction, params2: Ckn2Params,
                  opts: ProjectionOptions = DEFAULT_OPTIONS) -> ProjectionResult:
    """Second-order alignment over unit H_{c2} members; vbar = mu * w."""
    _check_second(params2)
    if not u.is_radial:
        raise InvalidInput("second-order alignment needs a radial function")
    pt, mu, dist, conv, at_b, diag = _align(u, params2, "H_c", opts)
    res = ProjectionResult(pt, dist, mu, [], conv, at_b, diag)
    res.ortho_residuals = orthogonality_residuals(u, pt, params2, opts.spec)
    return res


# ---------------------------------------------------------------------------
# orthogonality residuals


def orthogonality_residuals(u: TestFunction, vbar: MinimizerPoint, params,
                            spec: QuadratureSpec = DEFAULT_SPEC) -> list:
    """Normalized residuals of the three orthogonality conditions at vbar.

    Each raw residual int w_X |vbar_X|^{p-2} vbar_X (u_X - vbar_X) is divided
    by ||u||_X ||vbar||_X^{p-1} in the same weighted norm X.  First order uses
    X = L_c, L_a, H_b; second order uses X = H_c, H_a and the weighted
    Laplacian norm.
    """
    if not u.is_radial:
        raise InvalidInput("orthogonality residuals are computed for radial functions")
    p = params.p
    comps = _components(params)
    order = ["H_c", "H_a", "D_b"] if isinstance(params, Ckn2Params) else ["L_c", "L_a", "H_b"]
    out = []
    for name in order:
        comp = comps[name]
        tf = _target_fun(u, comp, params.N)
        k, lam = vbar.k, vbar.lam

        def raw(r, tf=tf, comp=comp):
            vb = k * unit_member(params, comp, lam, r)
            return np.sign(vb) * np.abs(vb) ** (p - 1.0) * (tf(r) - vb)

        def un(r, tf=tf):
            return np.abs(tf(r)) ** p

        vals, _ = radial_integrals([raw, un], [comp.exponent] * 2, params.N, spec,
                                   support=None)
        vnorm = abs(k) * unit_norm_p(params, comp, lam) ** (1.0 / p)
        unorm = max(vals[1], 0.0) ** (1.0 / p)
        scale = unorm * vnorm ** (p - 1.0)
        out.append(float(vals[0] / scale) if scale > 0 else 0.0)
    return out


# ---------------------------------------------------------------------------
# product and sum distance quotients


def _quotient_parts(params):
    if isinstance(params, Ckn2Params):
        return "D_b", "H_a"
    return "H_b", "L_a"


def strong_quotients(u: TestFunction, params, opts: ProjectionOptions = DEFAULT_OPTIONS,
                     which=("product", "sum"), fit: ManifoldFit | None = None,
                     seeds_k=None) -> dict:
    """inf over the family of the product and sum distance quotients.

    product: ||u-v||_X ||u-v||_Y^{p-1} / (||u||_X ||u||_Y^{p-1})
    sum:     (||u-v||_X^p + (p-1)||u-v||_Y^p) / (||u||_X^p + (p-1)||u||_Y^p)
    with (X, Y) = (H_b, L_a) in first order and (Lap in L_b, H_a) in second order.
    The product denominator follows the numerator's norms (see the decisions ledger).
    """
    p = float(params.p)
    X, Y = _quotient_parts(params)
    if fit is None:
        fit = ManifoldFit(u, params, [X, Y], opts.spec, opts.panel)
    nX, nY = fit.tnorm_p[X], fit.tnorm_p[Y]
    out = {}
    kcache: dict = {}

    def product_k(lam, k):
        dx = fit.dist_p(X, k, lam)
        dy = fit.dist_p(Y, k, lam)
        return (dx / nX) ** (1 / p) * (dy / nY) ** ((p - 1) / p)

    def sum_k(lam, k):
        dx = fit.dist_p(X, k, lam)
        dy = fit.dist_p(Y, k, lam)
        return (dx + (p - 1) * dy) / (nX + (p - 1) * nY)

    def inner(lam, f, kind):
        if p == 2.0:
            ax, bx, cx = nX, fit.pair(X, lam), unit_norm_p(params, fit.comps[X], lam)
            ay, by, cy = nY, fit.pair(Y, lam), unit_norm_p(params, fit.comps[Y], lam)
            if kind == "sum":
                ks = [(bx + by) / (cx + cy)]
            else:
                # d/dk of (ax - 2 bx k + cx k^2)(ay - 2 by k + cy k^2) = 0
                qx = np.array([cx, -2 * bx, ax])
                qy = np.array([cy, -2 * by, ay])
                roots = np.roots(np.polyder(np.polymul(qx, qy)))
                ks = [float(z.real) for z in roots if abs(z.imag) <= 1e-9 * (1 + abs(z))]
                ks.append(bx / cx)
            vals = [(f(lam, k), k) for k in ks]
            return min(vals)
        if lam not in kcache:
            kcache[lam] = (fit.kopt(X, lam), fit.kopt(Y, lam))
        kc, ky = kcache[lam]
        lo, hi = min(kc, ky), max(kc, ky)
        if kind == "sum" and not fit.axisym:
            # the sum objective is convex in k: solve its first-order condition
            phx, phy = fit.phi(X, lam), fit.phi(Y, lam)

            def h(k):
                return fit.dk(X, k, lam, phx) + (p - 1.0) * fit.dk(Y, k, lam, phy)

            if lo == hi or h(lo) >= 0:
                k = lo
            elif h(hi) <= 0:
                k = hi
            else:
                k = find_root(h, lo, hi, tol=1e-15 * max(abs(hi), 1e-300))
            return (f(lam, k), k)
        w = max(hi - lo, 1e-6 * max(abs(lo), abs(hi), 1e-300))
        a, b = lo - 0.25 * w, hi + 0.25 * w
        grid = np.linspace(a, b, 9)
        vals = np.array([f(lam, k) for k in grid])
        i = int(np.argmin(vals))
        r = minimize_scalar(lambda k: f(lam, k), (grid[max(i - 1, 0)], grid[min(i + 1, 8)]),
                            tol=1e-12 * max(abs(b - a), 1e-300))
        return (r.value, float(r.argmin[0]))

    for kind in which:
        f = product_k if kind == "product" else sum_k
        obj = lambda x: inner(math.exp(x), f, kind)[0]
        x, val, at_b, spread, _ = _multistart(obj, opts)
        k = inner(math.exp(x), f, kind)[1]
        # direct 2-D polish of the joint objective in (k, log lambda)
        res = minimize_2d(lambda kk, xx: f(math.exp(xx), kk), (k, x),
                          ((k - 1.0 - 2 * abs(k), k + 1.0 + 2 * abs(k)), opts.box), tol=1e-10,
                          maxiter=300)
        if res.value < val:
            k, x, val = float(res.argmin[0]), float(res.argmin[1]), float(res.value)
        out[kind] = {"value": float(val), "k": float(k), "log_lambda": float(x),
                     "at_boundary": bool(at_b)}
    return out


def exact_quotients(u: TestFunction, params, k: float, lam: float,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> dict:
    """Product and sum quotients at a given member, with the adaptive integrator."""
    from .functionals import first_order_powers, second_order_powers
    from .model import combine, combine_axisym
    v = family_function(params, k, lam)
    p = float(params.p)
    if isinstance(params, Ckn2Params):
        Iu, _ = second_order_powers(u, params, spec)
        Id, _ = second_order_powers(combine([(1.0, u), (-1.0, v)]), params, spec)
        nX, nY, dX, dY = Iu[0], Iu[1], Id[0], Id[1]
    else:
        diff = combine([(1.0, u), (-1.0, v)]) if u.is_radial else combine_axisym([(1.0, u), (-1.0, v)])
        Iu, _ = first_order_powers(u, params, spec)
        Id, _ = first_order_powers(diff, params, spec)
        nX, nY, dX, dY = Iu[0], Iu[1], Id[0], Id[1]
    prod = (max(dX, 0) / nX) ** (1 / p) * (max(dY, 0) / nY) ** ((p - 1) / p)
    summ = (dX + (p - 1) * dY) / (nX + (p - 1) * nY)
    return {"product": float(prod), "sum": float(summ)}
