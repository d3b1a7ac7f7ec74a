"""Verification campaigns: weak and strong stability ratios, sharpness and
scaling rates, the second-order identity and the weighted Poincare probe.

Every campaign is deterministic given its corpus seed and quadrature settings.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CknError, InvalidInput, RegimeMismatch
from .functionals import deficit, deficit2, identity2_sides, radial_integrals
from .model import (CLOSED_FORMS, PERTURBATION_MODES, ClosedForm, MinimizerPoint, MinimizerSpec,
                    PerturbedMinimizer, Samples, TestFunction, anisotropic_wrap, make_profile,
                    profile_to_dict, radial_from_jet)
from .numerics import DEFAULT_SPEC, QuadratureSpec, minimize_scalar
from .params import Ckn2Params, CknParams, Regime
from .projection import (DEFAULT_OPTIONS, ProjectionOptions, exact_quotients, inf_distance,
                         project_Hc2, project_Lc, strong_quotients)
from .transforms import scale_phi

EQUALITY_THRESHOLD = 1e-10
SLACK = 1e-8


class Theorem(str, enum.Enum):
    T1_3 = "T1_3"
    T1_4 = "T1_4"
    T1_7 = "T1_7"
    T1_8 = "T1_8"
    T1_9 = "T1_9"
    T1_10 = "T1_10"
    T1_11 = "T1_11"


# ---------------------------------------------------------------------------
# corpora


@dataclass(frozen=True)
class CorpusSpec:
    params: object
    n_perturbed: int = 50
    n_closed: int = 10
    n_samples: int = 5
    n_minimizers: int = 0
    seed: int = 0
    eps_range: tuple = (0.005, 0.2)

    def __post_init__(self):
        counts = (self.n_perturbed, self.n_closed, self.n_samples, self.n_minimizers)
        if any(int(c) != c or c < 0 for c in counts) or sum(counts) < 1:
            raise InvalidInput("corpus counts must be non-negative integers with a positive total")
        lo, hi = self.eps_range
        if not 0 < lo <= hi:
            raise InvalidInput("eps_range must satisfy 0 < lo <= hi")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidInput("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "n_perturbed": self.n_perturbed,
                "n_closed": self.n_closed, "n_samples": self.n_samples,
                "n_minimizers": self.n_minimizers, "seed": int(self.seed),
                "eps_range": list(self.eps_range)}


def _sample_profile(rng, second: bool):
    r = np.geomspace(0.05, 6.0, 40)
    s = float(np.exp(rng.uniform(np.log(0.6), np.log(1.6))))
    amp = float(rng.uniform(0.05, 0.3))
    om = float(rng.uniform(1.0, 3.0))
    ph = float(rng.uniform(0.0, 2 * math.pi))
    vals = np.exp(-(r / s) ** 2) * (1.0 + amp * np.sin(om * np.log(r) + ph))
    return Samples(tuple(r), tuple(vals))


def generate_corpus(cs: CorpusSpec) -> list:
    """Profile specs for the corpus; identical seeds give identical lists."""
    rng = np.random.default_rng(int(cs.seed))
    second = isinstance(cs.params, Ckn2Params)
    out = []
    lo, hi = cs.eps_range
    for i in range(cs.n_minimizers):
        out.append(MinimizerSpec(float(rng.uniform(0.5, 2.0)),
                                 float(np.exp(rng.uniform(-0.7, 0.7)))))
    for i in range(cs.n_perturbed):
        k = float(rng.uniform(0.5, 2.0)) * (1.0 if rng.uniform() < 0.8 else -1.0)
        lam = float(np.exp(rng.uniform(-0.7, 0.7)))
        eps = float(np.exp(rng.uniform(math.log(lo), math.log(hi))))
        out.append(PerturbedMinimizer(k, lam, eps, PERTURBATION_MODES[i % 3]))
    for i in range(cs.n_closed):
        out.append(ClosedForm(CLOSED_FORMS[i % len(CLOSED_FORMS)],
                              float(np.exp(rng.uniform(-0.5, 0.5)))))
    for i in range(cs.n_samples):
        out.append(_sample_profile(rng, second))
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CKNSTAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    n = _threads()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# reports


@dataclass
class StabilityReport:
    theorem: Theorem
    params: dict
    rows: list
    empirical_C_min: float | None
    empirical_C_max: float | None
    mesh_stability: float | None
    violations: int
    failures: int = 0
    equality_rows: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"theorem": self.theorem.value, "params": self.params, "rows": self.rows,
                "empirical_C_min": self.empirical_C_min, "empirical_C_max": self.empirical_C_max,
                "mesh_stability": self.mesh_stability, "violations": self.violations,
                "failures": self.failures, "equality_rows": self.equality_rows,
                "extra": self.extra}


ROW_COLUMNS = ("index", "label", "status", "deficit", "measure", "ratio", "slack", "at_boundary")


def _fine(opts: ProjectionOptions, spec: QuadratureSpec, x: float | None) -> ProjectionOptions:
    """Tightened options for the mesh-stability rerun: finer rule, local search near x."""
    if x is None:
        return replace(opts, spec=spec, panel=opts.panel / 2)
    return replace(opts, spec=spec, panel=opts.panel / 2, box=(x - 1.0, x + 1.0), seeds=(x,),
                   scan_step=0.05)


def _summarize(theorem, params, rows, key_stat, mesh_rows=None, extra=None):
    ratios = [r["ratio"] for r in rows if r["status"] in ("ok", "violation")
              and r["ratio"] is not None and math.isfinite(r["ratio"])]
    cmin = min(ratios) if ratios else None
    cmax = max(ratios) if ratios else None
    mesh = None
    if mesh_rows is not None:
        mr = [r["ratio"] for r in mesh_rows if r is not None and r["status"] in ("ok", "violation")
              and r["ratio"] is not None and math.isfinite(r["ratio"])]
        if ratios and mr:
            a = cmin if key_stat == "min" else cmax
            b = min(mr) if key_stat == "min" else max(mr)
            mesh = abs(b - a) / abs(a) if a != 0 else None
    return StabilityReport(
        theorem=theorem, params=params.to_dict(), rows=rows, empirical_C_min=cmin,
        empirical_C_max=cmax, mesh_stability=mesh,
        violations=sum(1 for r in rows if r["status"] == "violation"),
        failures=sum(1 for r in rows if r["status"] == "failed"),
        equality_rows=sum(1 for r in rows if r["status"] == "equality"),
        extra=extra or {})


def _row(index, spec, **kw):
    base = {"index": index, "label": _label(spec), "profile": profile_to_dict(spec),
            "status": "ok", "deficit": None, "measure": None, "ratio": None, "slack": None,
            "at_boundary": False}
    base.update(kw)
    return base


def _label(spec) -> str:
    d = profile_to_dict(spec)
    if d["kind"] == "samples":
        return "samples"
    return d["kind"] + "(" + ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                                      for k, v in d.items() if k != "kind") + ")"


def _failed(index, spec, exc):
    return _row(index, spec, status="failed", error=f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# first-order weak stability


def weak_theorem_for(params: CknParams) -> Theorem:
    return Theorem.T1_4 if params.regime is Regime.P2Case2 else Theorem.T1_3


def _weak_row(i, pspec, u, params, spec, opts):
    p = params.p
    rep = deficit(u, params, spec)
    n = rep.norms
    first = n.H_b * n.L_a ** (p - 1.0)
    numer = first - params.S * n.L_c ** p
    scale = max(first, 1e-300)
    if rep.delta < EQUALITY_THRESHOLD and numer >= -SLACK * scale:
        return _row(i, pspec, status="equality", deficit=rep.delta, slack=numer / scale), None
    pr = project_Lc(u, params, opts)
    dist_p = pr.distance ** p
    ratio = numer / dist_p if dist_p > 0 else math.inf
    status = "violation" if (numer < -SLACK * scale or not math.isfinite(ratio)) else "ok"
    return _row(i, pspec, status=status, deficit=rep.delta, measure=dist_p, ratio=ratio,
                slack=numer / scale, at_boundary=pr.at_boundary,
                numerator=numer), pr.diagnostics["log_lambda"]


def verify_weak_stability(corpus: CorpusSpec, spec: QuadratureSpec = DEFAULT_SPEC,
                          opts: ProjectionOptions = DEFAULT_OPTIONS,
                          mesh_check: bool = True) -> StabilityReport:
    """Unnormalized deficit against the squared L_c distance to the family."""
    params = corpus.params
    if not isinstance(params, CknParams):
        raise RegimeMismatch("weak stability needs first-order parameters")
    profiles = generate_corpus(corpus)
    opts = replace(opts, spec=spec)
    tight = spec.tightened(10.0)

    def work(item):
        i, ps = item
        try:
            u = make_profile(ps, params, spec)
            row, x = _weak_row(i, ps, u, params, spec, opts)
        except CknError as exc:
            return _failed(i, ps, exc), None
        mrow = None
        if mesh_check and row["status"] in ("ok", "violation"):
            try:
                u2 = make_profile(ps, params, tight)
                mrow, _ = _weak_row(i, ps, u2, params, tight, _fine(opts, tight, x))
            except CknError:
                mrow = None
        return row, mrow

    out = _map(work, list(enumerate(profiles)))
    rows = [r for r, _ in out]
    mesh = [m for _, m in out] if mesh_check else None
    return _summarize(weak_theorem_for(params), params, rows, "min", mesh)


# ---------------------------------------------------------------------------
# first-order strong stability


def _strong_row(i, pspec, u, params, spec, opts, x0=None):
    p = params.p
    rep = deficit(u, params, spec)
    if rep.delta < EQUALITY_THRESHOLD and rep.delta >= -SLACK:
        return {"equality": True, "delta": rep.delta, "delta_tilde": rep.delta_tilde}
    q = strong_quotients(u, params, opts)
    vals = {}
    for kind in ("product", "sum"):
        k, x = q[kind]["k"], q[kind]["log_lambda"]
        try:
            ex = exact_quotients(u, params, k, math.exp(x), spec)[kind]
        except CknError:
            ex = q[kind]["value"]
        vals[kind] = {"value": float(ex), "k": k, "log_lambda": x,
                      "at_boundary": q[kind]["at_boundary"]}
    return {"equality": False, "delta": rep.delta, "delta_tilde": rep.delta_tilde, "q": vals}


def _strong_report_rows(theorem, params, data):
    p = params.p
    rows = []
    for i, ps, d in data:
        if d is None:
            continue
        if isinstance(d, Exception):
            rows.append(_failed(i, ps, d))
            continue
        if d["equality"]:
            rows.append(_row(i, ps, status="equality", deficit=d["delta"]))
            continue
        if theorem is Theorem.T1_9:
            dd, q = d["delta_tilde"], d["q"]["sum"]
        else:
            dd, q = d["delta"], d["q"]["product"]
        expo = 1.0 if p == 2.0 else 1.0 / p
        bound = dd ** expo if dd > 0 else 0.0
        ratio = q["value"] / bound if bound > 0 else math.inf
        bad = dd < -SLACK or not math.isfinite(ratio) or q["value"] > 1.0 + SLACK
        rows.append(_row(i, ps, status="violation" if bad else "ok", deficit=dd,
                         measure=q["value"], ratio=ratio, slack=dd,
                         at_boundary=q["at_boundary"]))
    return rows


def strong_theorems_for(params: CknParams) -> tuple:
    return (Theorem.T1_7, Theorem.T1_9) if params.p == 2.0 else (Theorem.T1_8, Theorem.T1_9)


def _exponent_fit(rows):
    pts = [(r["deficit"], r["measure"]) for r in rows
           if r["status"] == "ok" and r["profile"]["kind"] == "perturbed"
           and r["deficit"] > 0 and r["measure"] > 0]
    if len(pts) < 3:
        return None
    x = np.log([a for a, _ in pts])
    y = np.log([b for _, b in pts])
    return float(np.polyfit(x, y, 1)[0])


def strong_stability_reports(corpus: CorpusSpec, spec: QuadratureSpec = DEFAULT_SPEC,
                             opts: ProjectionOptions = DEFAULT_OPTIONS,
                             mesh_check: bool = True) -> dict:
    """Product and sum quotient reports sharing one pass over the corpus."""
    params = corpus.params
    if not isinstance(params, CknParams):
        raise RegimeMismatch("strong stability needs first-order parameters")
    profiles = generate_corpus(corpus)
    opts = replace(opts, spec=spec)
    tight = spec.tightened(10.0)

    def work(item):
        i, ps = item
        try:
            u = make_profile(ps, params, spec)
            d = _strong_row(i, ps, u, params, spec, opts)
        except CknError as exc:
            return (i, ps, exc), None
        m = None
        if mesh_check and not d["equality"]:
            try:
                u2 = make_profile(ps, params, tight)
                m = _mesh_strong(u2, params, tight, opts, d)
            except CknError:
                m = None
        return (i, ps, d), (i, ps, m)

    out = _map(work, list(enumerate(profiles)))
    data = [a for a, _ in out]
    mesh = [b for _, b in out]
    reports = {}
    for th in strong_theorems_for(params):
        rows = _strong_report_rows(th, params, data)
        mrows = _strong_report_rows(th, params, [m for m in mesh if m is not None]) \
            if mesh_check else None
        extra = {}
        if th is not Theorem.T1_7:
            extra["exponent_fit"] = _exponent_fit(rows)
        reports[th.value] = _summarize(th, params, rows, "max", mrows, extra)
    return reports


def _mesh_strong(u, params, spec, opts, d):
    """Re-solve locally on a finer rule with tighter quadrature."""
    rep = deficit(u, params, spec)
    vals = {}
    for kind in ("product", "sum"):
        x0 = d["q"][kind]["log_lambda"]
        q = strong_quotients(u, params, _fine(opts, spec, x0), which=(kind,))[kind]
        ex = exact_quotients(u, params, q["k"], math.exp(q["log_lambda"]), spec)[kind]
        vals[kind] = {"value": float(ex), "k": q["k"], "log_lambda": q["log_lambda"],
                      "at_boundary": False}
    return {"equality": False, "delta": rep.delta, "delta_tilde": rep.delta_tilde, "q": vals}


def verify_strong_stability(corpus: CorpusSpec, theorem: Theorem | str | None = None,
                            spec: QuadratureSpec = DEFAULT_SPEC,
                            opts: ProjectionOptions = DEFAULT_OPTIONS,
                            mesh_check: bool = True) -> StabilityReport:
    """One strong-stability report; the theorem defaults to the product form for the regime."""
    reps = strong_stability_reports(corpus, spec, opts, mesh_check)
    if theorem is None:
        theorem = strong_theorems_for(corpus.params)[0]
    key = Theorem(theorem).value
    if key not in reps:
        raise RegimeMismatch(f"{key} does not apply to p = {corpus.params.p:g}")
    return reps[key]


# ---------------------------------------------------------------------------
# sharpness under anisotropic stretching


@dataclass
class SharpnessResult:
    slope_delta: float
    slope_dist: float
    table: list

    def to_dict(self) -> dict:
        return {"slope_delta": self.slope_delta, "slope_dist": self.slope_dist,
                "table": self.table}


def sharpness_scan(params: CknParams, j_list=(4, 8, 16, 32), spec: QuadratureSpec = DEFAULT_SPEC,
                   opts: ProjectionOptions = DEFAULT_OPTIONS) -> SharpnessResult:
    """u_j = v(1,1)(A_j x), A_j = diag(1,...,1,1+1/j): log-log slopes of delta and the product quotient."""
    if not isinstance(params, CknParams) or params.p != 2.0:
        raise RegimeMismatch("the sharpness scan is defined for p = 2")
    js = [int(j) for j in j_list]
    if len(js) < 3 or any(j < 1 for j in js):
        raise InvalidInput("need at least three positive j values")
    opts = replace(opts, spec=spec)
    table = []
    for j in js:
        u = anisotropic_wrap(params, MinimizerPoint(params_family(params), 1.0, 1.0), 1.0 + 1.0 / j)
        d = deficit(u, params, spec).delta
        q = strong_quotients(u, params, opts, which=("product",))["product"]
        ex = exact_quotients(u, params, q["k"], math.exp(q["log_lambda"]), spec)["product"]
        table.append({"j": j, "delta": d, "quotient": float(ex), "k": q["k"],
                      "log_lambda": q["log_lambda"]})
    x = np.log([1.0 / t["j"] for t in table])
    sd = float(np.polyfit(x, np.log([t["delta"] for t in table]), 1)[0])
    sq = float(np.polyfit(x, np.log([t["quotient"] for t in table]), 1)[0])
    return SharpnessResult(sd, sq, table)


def params_family(params):
    from .model import family_for
    return family_for(params)


# ---------------------------------------------------------------------------
# scaling blow-up


@dataclass
class ScalingResult:
    slope_H: float
    slope_L: float
    delta_drift: float
    expected_H: float
    expected_L: float
    table: list

    def to_dict(self) -> dict:
        return {"slope_H": self.slope_H, "slope_L": self.slope_L, "delta_drift": self.delta_drift,
                "expected_H": self.expected_H, "expected_L": self.expected_L, "table": self.table}


def scaling_blowup(u: TestFunction, params: CknParams, lam_list=(0.25, 0.5, 1.0, 2.0, 4.0),
                   spec: QuadratureSpec = DEFAULT_SPEC,
                   opts: ProjectionOptions = DEFAULT_OPTIONS) -> ScalingResult:
    """Deficit along Phi_lambda u stays fixed while the relative H_b and L_a distances scale."""
    if not isinstance(params, CknParams):
        raise RegimeMismatch("scaling needs first-order parameters")
    if abs(params.b + 1.0 - params.a) <= 1e-12:
        raise InvalidInput("b + 1 = a gives no scaling")
    lams = [float(x) for x in lam_list]
    if len(lams) < 2 or any(not (x > 0) for x in lams):
        raise InvalidInput("need at least two positive lambda values")
    d0 = deficit(u, params, spec)
    if d0.delta < EQUALITY_THRESHOLD:
        raise InvalidInput("u lies on the minimizer family; the distance ratios are all zero")
    opts = replace(opts, spec=spec)
    table = []
    for lam in lams:
        w = scale_phi(u, lam, params)
        rep = deficit(w, params, spec)
        h = inf_distance(w, params, "H_b", opts).distance / rep.norms.L_c
        l = inf_distance(w, params, "L_a", opts).distance / rep.norms.L_c
        table.append({"lambda": lam, "delta": rep.delta, "H_ratio": h, "L_ratio": l})
    x = np.log(lams)
    sH = float(np.polyfit(x, np.log([t["H_ratio"] for t in table]), 1)[0])
    sL = float(np.polyfit(x, np.log([t["L_ratio"] for t in table]), 1)[0])
    ds = np.array([t["delta"] for t in table])
    drift = float(np.max(np.abs(ds - d0.delta)) / abs(d0.delta))
    return ScalingResult(sH, sL, drift, params.b - params.c + 1.0, params.a - params.c, table)


# ---------------------------------------------------------------------------
# second order


def _second_row(i, pspec, u, params2, spec, opts):
    p = params2.p
    rep = deficit2(u, params2, spec)
    first = rep.dL_b * rep.H_a ** (p - 1.0)
    lhs = first - params2.K * rep.H_c ** p
    scale = max(first, 1e-300)
    ids = identity2_sides(u, params2, spec)
    id_res = abs(ids.lhs - ids.rhs) / max(abs(ids.lhs), ids.scale, 1e-300)
    common = {"sigma": rep.sigma, "sigma_tilde": rep.sigma_tilde, "identity_residual": id_res}
    if rep.sigma < EQUALITY_THRESHOLD and lhs >= -SLACK * scale:
        return {"equality": True, **common}
    pr = project_Hc2(u, params2, opts)
    q = strong_quotients(u, params2, opts, which=("product",))["product"]
    try:
        qv = exact_quotients(u, params2, q["k"], math.exp(q["log_lambda"]), spec)["product"]
    except CknError:
        qv = q["value"]
    return {"equality": False, "lhs": lhs, "scale": scale, "dist_p": pr.distance ** p,
            "quotient": float(qv), "at_boundary": pr.at_boundary or q["at_boundary"],
            "x_proj": pr.diagnostics["log_lambda"], "x_q": q["log_lambda"], **common}


def _second_rows(theorem, params2, data):
    p = params2.p
    rows = []
    for i, ps, d in data:
        if d is None:
            continue
        if isinstance(d, Exception):
            rows.append(_failed(i, ps, d))
            continue
        if d["equality"]:
            rows.append(_row(i, ps, status="equality", deficit=d["sigma"],
                             identity_residual=d["identity_residual"]))
            continue
        if theorem is Theorem.T1_10:
            ratio = d["lhs"] / d["dist_p"] if d["dist_p"] > 0 else math.inf
            bad = d["lhs"] < -SLACK * d["scale"] or not math.isfinite(ratio)
            rows.append(_row(i, ps, status="violation" if bad else "ok", deficit=d["sigma"],
                             measure=d["dist_p"], ratio=ratio, slack=d["lhs"] / d["scale"],
                             at_boundary=d["at_boundary"],
                             identity_residual=d["identity_residual"]))
        else:
            s = d["sigma"]
            bound = (s if p == 2.0 else s ** (1.0 / p)) if s > 0 else 0.0
            ratio = d["quotient"] / bound if bound > 0 else math.inf
            bad = s < -SLACK or not math.isfinite(ratio) or d["quotient"] > 1.0 + SLACK
            rows.append(_row(i, ps, status="violation" if bad else "ok", deficit=s,
                             measure=d["quotient"], ratio=ratio, slack=s,
                             at_boundary=d["at_boundary"],
                             identity_residual=d["identity_residual"]))
    return rows


def second_order_reports(corpus: CorpusSpec, spec: QuadratureSpec = DEFAULT_SPEC,
                         opts: ProjectionOptions = DEFAULT_OPTIONS,
                         mesh_check: bool = True) -> dict:
    params2 = corpus.params
    if not isinstance(params2, Ckn2Params):
        raise RegimeMismatch("second-order verification needs second-order parameters")
    profiles = generate_corpus(corpus)
    opts = replace(opts, spec=spec)
    tight = spec.tightened(10.0)

    def work(item):
        i, ps = item
        try:
            u = make_profile(ps, params2, spec)
            d = _second_row(i, ps, u, params2, spec, opts)
        except CknError as exc:
            return (i, ps, exc), None
        m = None
        if mesh_check and not d["equality"]:
            try:
                u2 = make_profile(ps, params2, tight)
                rep = deficit2(u2, params2, tight)
                first = rep.dL_b * rep.H_a ** (params2.p - 1.0)
                pr = project_Hc2(u2, params2, _fine(opts, tight, d["x_proj"]))
                q = strong_quotients(u2, params2, _fine(opts, tight, d["x_q"]),
                                     which=("product",))["product"]
                qv = exact_quotients(u2, params2, q["k"], math.exp(q["log_lambda"]),
                                     tight)["product"]
                m = {**d, "lhs": first - params2.K * rep.H_c ** params2.p,
                     "sigma": rep.sigma, "dist_p": pr.distance ** params2.p, "quotient": qv}
            except CknError:
                m = None
        return (i, ps, d), (i, ps, m)

    out = _map(work, list(enumerate(profiles)))
    data = [a for a, _ in out]
    mesh = [b for _, b in out]
    reports = {}
    for th, stat in ((Theorem.T1_10, "min"), (Theorem.T1_11, "max")):
        rows = _second_rows(th, params2, data)
        mrows = _second_rows(th, params2, [m for m in mesh if m is not None]) if mesh_check else None
        ids = [r["identity_residual"] for r in rows if r.get("identity_residual") is not None]
        extra = {"identity_residual_max": max(ids) if ids else None}
        if th is Theorem.T1_11 and params2.p > 2:
            extra["exponent_fit"] = _exponent_fit(rows)
        reports[th.value] = _summarize(th, params2, rows, stat, mrows, extra)
    return reports


def verify_second_order(corpus: CorpusSpec, theorem: Theorem | str = Theorem.T1_10,
                        spec: QuadratureSpec = DEFAULT_SPEC,
                        opts: ProjectionOptions = DEFAULT_OPTIONS,
                        mesh_check: bool = True) -> StabilityReport:
    return second_order_reports(corpus, spec, opts, mesh_check)[Theorem(theorem).value]


# ---------------------------------------------------------------------------
# weighted Poincare probe


@dataclass(frozen=True)
class PoincareSides:
    lhs: float          # prefactor times the gradient integral
    prefactor: float
    gradient_integral: float
    rhs: float          # inf over c of the shifted integral
    c_opt: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.inf

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "prefactor": self.prefactor,
                "gradient_integral": self.gradient_integral, "rhs": self.rhs,
                "c_opt": self.c_opt, "ratio": self.ratio}


def _check_poincare(N, p, mu, gamma, m, lam_tilde):
    if not (N - p > mu >= 0):
        raise InvalidInput("need N - p > mu >= 0")
    if not gamma >= (N - p - mu) / (N - p):
        raise InvalidInput("need gamma >= (N - p - mu)/(N - p)")
    if not (m > 0 and lam_tilde > 0):
        raise InvalidInput("need m > 0 and lam_tilde > 0")


def poincare_sides(v: TestFunction, N: int, p: float, mu: float, gamma: float, m: float,
                   lam_tilde: float, spec: QuadratureSpec = DEFAULT_SPEC) -> PoincareSides:
    """Both sides of the exponentially weighted Poincare inequality for radial v."""
    _check_poincare(N, p, mu, gamma, m, lam_tilde)
    if not v.is_radial:
        raise InvalidInput("the Poincare probe takes radial functions")
    q = N * mu / (N - p)
    pref = lam_tilde ** (q - p - mu)

    def wexp(r):
        return np.exp(-m * (lam_tilde * r) ** gamma)

    g, _ = radial_integrals([lambda r: np.abs(v.du(r)) ** p * wexp(r)], [-mu], N, spec)

    def shifted(c):
        val, _ = radial_integrals([lambda r: np.abs(v.u(r) - c) ** p * wexp(r)], [-q], N, spec)
        return float(val[0])

    if p == 2.0:
        parts, _ = radial_integrals([lambda r: v.u(r) * wexp(r), wexp], [-q, -q], N, spec)
        c = float(parts[0] / parts[1])
    else:
        rr = np.geomspace(1e-3, 1e3, 400)
        vv = v.u(rr)
        lo, hi = min(0.0, float(vv.min())), max(0.0, float(vv.max()))
        if hi - lo <= 0:
            c = 0.0
        else:
            c = float(minimize_scalar(shifted, (lo - 1e-9, hi + 1e-9), tol=1e-12).argmin[0])
    rhs = shifted(c)
    return PoincareSides(pref * float(g[0]), pref, float(g[0]), rhs, c)


def _bump_sum(rng, N):
    """Smooth radial function compactly supported away from the origin."""
    nb = int(rng.integers(1, 4))
    cs = rng.uniform(-1.0, 1.0, nb)
    ws = rng.uniform(0.3, 1.0, nb)
    amps = rng.uniform(0.5, 2.0, nb) * np.where(rng.uniform(size=nb) < 0.5, -1.0, 1.0)

    def jet(r):
        t = np.log(r)
        val = np.zeros_like(r)
        d1 = np.zeros_like(r)
        d2 = np.zeros_like(r)
        for c, w, a in zip(cs, ws, amps):
            s = (t - c) / w
            inside = np.abs(s) < 1
            ss = np.where(inside, s, 0.0)
            den = 1.0 - ss * ss
            e = np.where(inside, np.exp(-1.0 / np.where(inside, den, 1.0)), 0.0)
            # derivatives with respect to s, then chain rule through t = log r
            f1 = np.where(inside, -2 * ss / np.where(inside, den, 1.0) ** 2, 0.0) * e
            f2 = np.where(inside, (6 * ss ** 4 - 2) / np.where(inside, den, 1.0) ** 4, 0.0) * e
            val += a * e
            d1 += a * f1 / (w * r)
            d2 += a * (f2 / (w * w) - f1 / w) / (r * r)
        return val, d1, d2

    lo = float(np.exp(np.min(cs - ws)))
    hi = float(np.exp(np.max(cs + ws)))
    return radial_from_jet(jet, support=(lo, hi), label="bumps")


def poincare_corpus(n: int, N: int, seed: int = 0) -> list:
    rng = np.random.default_rng(int(seed))
    return [_bump_sum(rng, N) for _ in range(int(n))]


def poincare_probe(corpus, N: int, p: float, mu: float, gamma: float, m: float,
                   lam_tilde: float, spec: QuadratureSpec = DEFAULT_SPEC) -> dict:
    """Minimum over the corpus of LHS/RHS for the weighted Poincare inequality."""
    _check_poincare(N, p, mu, gamma, m, lam_tilde)
    rows = _map(lambda v: poincare_sides(v, N, p, mu, gamma, m, lam_tilde, spec).to_dict(),
                list(corpus))
    ratios = [r["ratio"] for r in rows if math.isfinite(r["ratio"])]
    return {"empirical_constant": min(ratios) if ratios else None, "rows": rows,
            "N": N, "p": p, "mu": mu, "gamma": gamma, "m": m, "lam_tilde": lam_tilde}
