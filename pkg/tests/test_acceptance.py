"""Acceptance suite: one test per criterion, each recorded for the end-of-run summary.

Every test records its outcome before asserting, so the summary shows a
PASS/FAIL line per criterion whether or not the assertion holds.
"""

from __future__ import annotations

import math
import re

import numpy as np
import pytest

from acceptance_log import record
from cases import FIRST, SECOND
from cknstab import cli
from cknstab.experiments import (CorpusSpec, Theorem, generate_corpus, scaling_blowup,
                                 second_order_reports, sharpness_scan, strong_stability_reports,
                                 verify_weak_stability)
from cknstab.functionals import (calibrate_kernel_constants, deficit, deficit2, el_residual,
                                 el_residual2, fz_inequalities, identity2_sides,
                                 norms_first_order, norms_second_order, rp_kernel)
from cknstab.model import (ClosedForm, Family, MinimizerPoint, MinimizerSpec, PerturbedMinimizer,
                           family_for, make_profile, minimizer_norms, radial_from_jet,
                           second_minimizer_norms)
from cknstab.params import derive_first_order, derive_second_order
from cknstab.projection import best_aligned, best_aligned2, project_Lc
from cknstab.transforms import horiuchi_reduce

P1 = {name: derive_first_order(*args) for name, args in FIRST.items()}
P2 = derive_second_order(*SECOND)


def _kl_pairs(n, seed):
    rng = np.random.default_rng(seed)
    k = rng.uniform(0.2, 5.0, n) * np.where(rng.uniform(size=n) < 0.8, 1.0, -1.0)
    lam = np.exp(rng.uniform(-1.5, 1.5, n))
    return list(zip(k.tolist(), lam.tolist()))


def _bump_at(center, width):
    def jet(r):
        s = (r - center) / width
        inside = np.abs(s) < 1
        ss = np.where(inside, s, 0.0)
        w = 1 - ss * ss
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            e = np.where(inside, np.exp(-1 / w), 0.0)
            q = -2 * ss / w ** 2 / width
            dq = (-2 / w ** 2 - 8 * ss * ss / w ** 3) / width ** 2
            return e, np.where(inside, q * e, 0.0), np.where(inside, (q * q + dq) * e, 0.0)
    return radial_from_jet(jet, support=(center - width, center + width), label="bump")


TEST_FUNCTIONS = [(0.3, 0.2), (0.8, 0.5), (1.5, 0.7), (3.0, 1.5), (6.0, 3.0)]


def test_criterion_01_closed_form_norms():
    worst1 = 0.0
    for i, name in enumerate(sorted(P1)):
        P = P1[name]
        fam = family_for(P)
        for k, lam in _kl_pairs(20, 100 + i):
            n = norms_first_order(make_profile(MinimizerSpec(k, lam), P), P)
            ref = minimizer_norms(P, MinimizerPoint(fam, k, lam))
            got = (n.H_b, n.L_a, n.L_c)
            worst1 = max(worst1, max(abs(g - r) / abs(r) for g, r in zip(got, ref)))
    worst2 = 0.0
    for k, lam in _kl_pairs(20, 200):
        n = norms_second_order(make_profile(MinimizerSpec(k, lam), P2), P2)
        ref = second_minimizer_norms(P2, MinimizerPoint(Family.SecondOrder, k, lam))
        got = (n.dL_b, n.H_a, n.H_c)
        worst2 = max(worst2, max(abs(g - r) / abs(r) for g, r in zip(got, ref)))
    ok = record(1, worst1 < 1e-8 and worst2 < 1e-6,
                f"max rel err first order {worst1:.2e} (< 1e-8), second order {worst2:.2e} (< 1e-6)")
    assert ok


def test_criterion_02_equality_cases():
    d_max = dt_max = el_max = 0.0
    for P in P1.values():
        fam = family_for(P)
        for k, lam in _kl_pairs(10, 300):
            d_max = max(d_max, abs(deficit(make_profile(MinimizerSpec(k, lam), P), P).delta))
            # the strong deficit also penalizes unbalanced scales; it vanishes at lambda = 1
            rep = deficit(make_profile(MinimizerSpec(k, 1.0), P), P)
            dt_max = max(dt_max, abs(rep.delta_tilde), abs(rep.delta))
        for k, lam in ((1.0, 1.0), (1.3, 0.8), (-0.7, 2.0)):
            pt = MinimizerPoint(fam, k, lam)
            for c, w in TEST_FUNCTIONS:
                res, scale = el_residual(P, pt, _bump_at(c, w), with_scale=True)
                el_max = max(el_max, abs(res) / scale)
    s_max = el2_max = 0.0
    for k, lam in _kl_pairs(10, 301):
        s_max = max(s_max, abs(deficit2(make_profile(MinimizerSpec(k, lam), P2), P2).sigma))
    for k, lam in ((1.0, 1.0), (1.2, 0.9), (0.6, 1.8)):
        pt = MinimizerPoint(Family.SecondOrder, k, lam)
        for c, w in TEST_FUNCTIONS:
            res, scale = el_residual2(P2, pt, _bump_at(c, w), with_scale=True)
            el2_max = max(el2_max, abs(res) / scale)
    ok = record(2, d_max <= 1e-8 and dt_max <= 1e-8 and s_max <= 1e-5 and el_max <= 1e-7
                and el2_max <= 1e-5,
                f"|delta| {d_max:.1e}, |delta~| {dt_max:.1e}, |sigma| {s_max:.1e}, "
                f"EL {el_max:.1e} / {el2_max:.1e}")
    assert ok


CORPUS_100 = dict(n_perturbed=70, n_closed=15, n_samples=15)


def test_criterion_03_deficit_order():
    worst = math.inf
    count = 0
    for seed in (0, 1, 2):
        for P in P1.values():
            for ps in generate_corpus(CorpusSpec(P, seed=seed, **CORPUS_100)):
                rep = deficit(make_profile(ps, P), P)
                scale = max(abs(rep.delta_tilde), P.p * P.S)
                worst = min(worst, (rep.delta_tilde - P.p * rep.delta) / scale, rep.delta / scale)
                count += 1
        for ps in generate_corpus(CorpusSpec(P2, seed=seed, **CORPUS_100)):
            rep = deficit2(make_profile(ps, P2), P2)
            scale = max(abs(rep.sigma_tilde), P2.p * P2.K)
            worst = min(worst, (rep.sigma_tilde - P2.p * rep.sigma) / scale, rep.sigma / scale)
            count += 1
    ok = record(3, worst >= -1e-9, f"{count} functions, smallest scaled slack {worst:.2e}")
    assert ok


def test_criterion_04_scaling():
    P = P1["case1"]
    lines, ok = [], True
    for spec in (ClosedForm("gaussian", 1.0), ClosedForm("quartic", 0.8),
                 PerturbedMinimizer(1.0, 1.0, 0.1, "gauss_bump")):
        res = scaling_blowup(make_profile(spec, P), P)
        good = (res.delta_drift <= 1e-5 and abs(res.slope_H - (P.b - P.c + 1)) <= 0.05
                and abs(res.slope_L - (P.a - P.c)) <= 0.05)
        ok &= good
        lines.append(f"drift {res.delta_drift:.1e} slopes {res.slope_H:.3f}/{res.slope_L:.3f}")
    record(4, ok, "; ".join(lines) + " (targets 0.5/-0.5)")
    assert ok


def test_criterion_05_horiuchi():
    P = P1["pgt2"]
    specs = generate_corpus(CorpusSpec(P, n_perturbed=10, n_closed=6, n_samples=4, seed=5,
                                       eps_range=(0.05, 0.2)))
    assert len(specs) == 20
    worst = 0.0
    for ps in specs:
        u = make_profile(ps, P)
        u1, red = horiuchi_reduce(u, P)
        d = deficit(u, P).delta
        d_red = deficit(u1, red).delta
        worst = max(worst, abs(d - P.l * d_red) / abs(d))
    ok = record(5, worst < 1e-6 and P.l == 0.5, f"20 profiles, l = {P.l:g}, max rel err {worst:.2e}")
    assert ok


def test_criterion_06_sharpness():
    res = sharpness_scan(P1["case1"], j_list=(4, 8, 16, 32))
    ok = record(6, 1.8 <= res.slope_delta <= 2.2 and 1.8 <= res.slope_dist <= 2.2,
                f"slopes delta {res.slope_delta:.3f}, quotient {res.slope_dist:.3f} in [1.8, 2.2]")
    assert ok


def _small(P, seed):
    return generate_corpus(CorpusSpec(P, n_perturbed=20, n_closed=0, n_samples=0, seed=seed,
                                      eps_range=(0.005, 0.05)))


def test_criterion_07_orthogonality():
    w2 = 0.0
    for name in ("case1", "case2"):
        P = P1[name]
        for ps in _small(P, 11):
            w2 = max(w2, max(map(abs, project_Lc(make_profile(ps, P), P).ortho_residuals)))
    P = P1["pgt2"]
    w3 = 0.0
    for ps in _small(P, 12):
        w3 = max(w3, max(map(abs, best_aligned(make_profile(ps, P), P).ortho_residuals)))
    ws = 0.0
    for ps in _small(P2, 13):
        ws = max(ws, max(map(abs, best_aligned2(make_profile(ps, P2), P2).ortho_residuals)))
    ok = record(7, w2 <= 1e-6 and w3 <= 1e-6 and ws <= 1e-5,
                f"max residual p=2 {w2:.1e}, p=3 {w3:.1e}, second order {ws:.1e}")
    assert ok


def test_criterion_08_stability_campaigns():
    reports = {}
    for name in ("case1", "case2"):
        rep = verify_weak_stability(CorpusSpec(P1[name]))
        reports[f"{rep.theorem.value}@{name}"] = rep
    for name in ("case1", "pgt2"):
        for th, rep in strong_stability_reports(CorpusSpec(P1[name])).items():
            reports[f"{th}@{name}"] = rep
    for th, rep in second_order_reports(CorpusSpec(P2)).items():
        reports[f"{th}@second"] = rep
    covered = {key.split("@")[0] for key in reports}
    expected = {t.value for t in Theorem}
    ok = covered == expected
    parts = []
    for key, rep in reports.items():
        mesh = rep.mesh_stability
        good = rep.violations == 0 and rep.failures == 0 and mesh is not None and mesh < 0.05
        ok &= good
        parts.append(f"{key} v={rep.violations} f={rep.failures} mesh={mesh:.1e}")
    record(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_second_order_identity():
    worst = 0.0
    specs = generate_corpus(CorpusSpec(P2))
    for ps in specs:
        s = identity2_sides(make_profile(ps, P2), P2)
        worst = max(worst, abs(s.lhs - s.rhs) / max(abs(s.lhs), s.scale))
    ok = record(9, worst <= 1e-6, f"{len(specs)} functions, max scaled residual {worst:.2e}")
    assert ok


def test_criterion_10_kernels():
    n = 100_000
    parts, ok = [], True
    s = np.random.default_rng(2).uniform(-10, 10, (2, 1_000_000))
    ok &= bool(np.array_equal(rp_kernel(s[0], s[1], 2.0), (s[0] - s[1]) ** 2))
    for p in (2.5, 3.0, 4.0):
        kc = calibrate_kernel_constants(p, 0.5, seed=12345)
        rng = np.random.default_rng(777 + int(10 * p))     # independent of the calibration draw
        mag = np.exp(rng.uniform(-3, 3, (n, 1)))
        y = rng.standard_normal((n, 3)) * mag
        z = rng.standard_normal((n, 3)) * np.exp(rng.uniform(-3, 3, (n, 1)))
        lo, up, _ = fz_inequalities(y, z, p, 0.5, kc)
        st = rng.uniform(-10, 10, (2, n))
        rp = rp_kernel(st[0], st[1], p)
        bad = int(np.sum(rp < kc.m_p * np.abs(st[0] - st[1]) ** p))
        good = lo and up and bad == 0
        ok &= good
        parts.append(f"p={p:g}: {'ok' if good else 'violations'}")
    record(10, ok, ", ".join(parts) + ", R_2 exact")
    assert ok


_STAMP = re.compile(r'^\s*"generated_at": .*\n', re.M)


def test_criterion_11_determinism(tmp_path):
    runs = [
        ["verify", "--theorem", "T1_7", "--N", "4", "--p", "2", "--a", "0.5", "--b", "0.5",
         "--seed", "9", "--n-perturbed", "4", "--n-closed", "2", "--n-samples", "1"],
        ["verify", "--theorem", "T1_10", "--N", "4", "--p", "2", "--a", "-2.5", "--b", "-2.5",
         "--seed", "9", "--n-perturbed", "3", "--n-closed", "1", "--n-samples", "1"],
        ["scaling", "--N", "4", "--p", "2", "--a", "0.5", "--b", "0.5", "--format", "csv",
         "--profile", '{"kind": "closed_form", "name": "gaussian"}'],
    ]
    ok = True
    for argv in runs:
        texts = []
        for rep in range(2):
            out = tmp_path / "report.out"
            code = cli.main([*argv, "-o", str(out)])
            ok &= code == 0
            texts.append(_STAMP.sub("", out.read_text(encoding="utf-8")))
        ok &= texts[0] == texts[1]
    record(11, ok, f"{len(runs)} commands run twice, reports identical apart from the timestamp")
    assert ok
