from __future__ import annotations

import math

import numpy as np
import pytest

from cknstab.errors import InvalidInput, RegimeMismatch
from cknstab.experiments import (ROW_COLUMNS, CorpusSpec, Theorem, generate_corpus,
                                 poincare_corpus, poincare_probe, poincare_sides, scaling_blowup,
                                 sharpness_scan, strong_stability_reports, verify_second_order,
                                 verify_strong_stability, verify_weak_stability, weak_theorem_for)
from cknstab.model import ClosedForm, MinimizerSpec, combine, make_profile, radial_from_jet
from cknstab.transforms import dilate

SMALL = dict(n_perturbed=6, n_closed=2, n_samples=1)


def _check_report(rep, theorem):
    assert rep.theorem is Theorem(theorem)
    assert rep.violations == 0 and rep.failures == 0
    for row in rep.rows:
        assert set(ROW_COLUMNS) <= set(row)
    d = rep.to_dict()
    assert d["theorem"] == theorem and len(d["rows"]) == len(rep.rows)


# ---------------------------------------------------------------------------
# corpora


def test_corpus_deterministic(p_case1):
    cs = CorpusSpec(p_case1, seed=11)
    assert generate_corpus(cs) == generate_corpus(cs)
    assert generate_corpus(cs) != generate_corpus(CorpusSpec(p_case1, seed=12))
    assert len(generate_corpus(cs)) == 65


@pytest.mark.parametrize("kw", [dict(n_perturbed=-1), dict(n_perturbed=0, n_closed=0, n_samples=0),
                                dict(eps_range=(0.1, 0.01)), dict(seed=-3), dict(n_closed=1.5)])
def test_corpus_validation(p_case1, kw):
    with pytest.raises(InvalidInput):
        CorpusSpec(p_case1, **kw)


# ---------------------------------------------------------------------------
# weak stability


def test_weak_case1_with_members(p_case1):
    rep = verify_weak_stability(CorpusSpec(p_case1, n_minimizers=2, seed=3, **SMALL))
    _check_report(rep, "T1_3")
    kinds = {r["profile"]["kind"] for r in rep.rows if r["status"] == "equality"}
    assert "minimizer" in kinds
    assert all(r["status"] == "equality" for r in rep.rows if r["profile"]["kind"] == "minimizer")
    assert rep.empirical_C_min > 0
    assert rep.mesh_stability < 0.05


def test_weak_case2(p_case2):
    assert weak_theorem_for(p_case2) is Theorem.T1_4
    rep = verify_weak_stability(CorpusSpec(p_case2, seed=4, **SMALL))
    _check_report(rep, "T1_4")
    assert rep.empirical_C_min > 0


def test_weak_rejects_second(p_second):
    with pytest.raises(RegimeMismatch):
        verify_weak_stability(CorpusSpec(p_second, **SMALL))


# ---------------------------------------------------------------------------
# strong stability


def test_strong_p2(p_case1):
    reps = strong_stability_reports(CorpusSpec(p_case1, n_minimizers=1, seed=5, **SMALL))
    assert set(reps) == {"T1_7", "T1_9"}
    for th, rep in reps.items():
        _check_report(rep, th)
        assert rep.equality_rows >= 1
        assert math.isfinite(rep.empirical_C_max)
        assert rep.mesh_stability < 0.05


def test_strong_p3(p_pgt2):
    rep = verify_strong_stability(CorpusSpec(p_pgt2, n_perturbed=4, n_closed=1, n_samples=0,
                                             seed=6), mesh_check=False)
    _check_report(rep, "T1_8")
    assert math.isfinite(rep.empirical_C_max)
    assert "exponent_fit" in rep.extra


# ---------------------------------------------------------------------------
# sharpness and scaling


def test_sharpness_monotone(p_case1):
    res = sharpness_scan(p_case1, j_list=(4, 8, 16))
    deltas = [t["delta"] for t in res.table]
    assert deltas == sorted(deltas, reverse=True)
    assert 1.6 < res.slope_delta < 2.4


def test_sharpness_rejects(p_pgt2, p_case1):
    with pytest.raises(RegimeMismatch):
        sharpness_scan(p_pgt2)
    with pytest.raises(InvalidInput):
        sharpness_scan(p_case1, j_list=(4, 8))


def test_scaling(p_case1):
    u = make_profile(ClosedForm("gaussian", 1.0), p_case1)
    res = scaling_blowup(u, p_case1)
    assert res.delta_drift <= 1e-5
    assert res.slope_H == pytest.approx(0.5, abs=0.05)
    assert res.slope_L == pytest.approx(-0.5, abs=0.05)
    assert (res.expected_H, res.expected_L) == (0.5, -0.5)


def test_scaling_rejects_member(p_case1):
    with pytest.raises(InvalidInput):
        scaling_blowup(make_profile(MinimizerSpec(1, 1), p_case1), p_case1)


# ---------------------------------------------------------------------------
# second order


def test_second_order_reports(p_second):
    cs = CorpusSpec(p_second, n_perturbed=30, n_closed=0, n_samples=0, n_minimizers=2, seed=8)
    rep10 = verify_second_order(cs, "T1_10", mesh_check=False)
    _check_report(rep10, "T1_10")
    assert all(r["status"] == "equality" for r in rep10.rows
               if r["profile"]["kind"] == "minimizer")
    assert rep10.equality_rows >= 2
    assert rep10.extra["identity_residual_max"] <= 1e-6


# ---------------------------------------------------------------------------
# Poincare probe


def test_bump_derivatives():
    for v in poincare_corpus(5, 4, seed=2):
        lo, hi = v.support_hint
        r = np.linspace(lo, hi, 203)[1:-1]
        h = 1e-6 * r
        np.testing.assert_allclose((v.u(r + h) - v.u(r - h)) / (2 * h), v.du(r), rtol=1e-5,
                                   atol=1e-7)
        np.testing.assert_allclose((v.du(r + h) - v.du(r - h)) / (2 * h), v.d2u(r), rtol=1e-4,
                                   atol=1e-5)


def _const(K):
    return radial_from_jet(lambda r: (np.full_like(r, K), np.zeros_like(r), np.zeros_like(r)))


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_poincare_shift_invariance(p):
    """Adding a constant only moves the optimal shift; both sides are unchanged."""
    N, mu, gam, m = (4, 1.0, 1.0, 2.0) if p == 2 else (6, 1.0, 1.0, 1.0)
    v = poincare_corpus(1, N, seed=4)[0]
    a = poincare_sides(v, N, p, mu, gam, m, 1.0)
    b = poincare_sides(combine([(1.0, v), (1.0, _const(3.0))]), N, p, mu, gam, m, 1.0)
    assert b.c_opt == pytest.approx(a.c_opt + 3.0, abs=1e-6)
    assert b.rhs == pytest.approx(a.rhs, rel=1e-6)
    assert b.lhs == pytest.approx(a.lhs, rel=1e-12)
    c = poincare_sides(_const(3.0), N, p, mu, gam, m, 1.0)
    assert c.c_opt == pytest.approx(3.0, abs=1e-6) and c.rhs <= 1e-12 and c.lhs == 0


def test_poincare_prefactor_scaling():
    N, p, mu, gam, m = 4, 2.0, 1.0, 1.0, 2.0
    v = poincare_corpus(1, N, seed=1)[0]
    a = poincare_sides(v, N, p, mu, gam, m, 1.0)
    b = poincare_sides(v, N, p, mu, gam, m, 2.0)
    expo = N * mu / (N - p) - p - mu
    assert b.prefactor / a.prefactor == pytest.approx(2 ** expo, rel=1e-15)


@pytest.mark.parametrize("s", [0.5, 3.0])
def test_poincare_joint_scaling(s):
    """v -> v(./s) with lam_tilde -> lam_tilde/s multiplies both sides by s^{N - N mu/(N-p)}."""
    N, p, mu, gam, m = 4, 2.0, 1.0, 1.0, 2.0
    v = poincare_corpus(1, N, seed=3)[0]
    a = poincare_sides(v, N, p, mu, gam, m, 1.0)
    b = poincare_sides(dilate(v, 1 / s), N, p, mu, gam, m, 1 / s)
    fac = s ** (N - N * mu / (N - p))
    assert b.lhs == pytest.approx(fac * a.lhs, rel=1e-9)
    assert b.rhs == pytest.approx(fac * a.rhs, rel=1e-9)
    assert b.ratio == pytest.approx(a.ratio, rel=1e-9)


def test_poincare_probe():
    res = poincare_probe(poincare_corpus(20, 4, seed=0), 4, 2.0, 1.0, 1.0, 2.0, 1.0)
    assert res["empirical_constant"] > 0
    assert len(res["rows"]) == 20


@pytest.mark.parametrize("bad", [dict(mu=2.0), dict(mu=-0.1), dict(gamma=0.1), dict(m=0.0),
                                 dict(lam_tilde=-1.0)])
def test_poincare_rejects(bad):
    kw = dict(mu=1.0, gamma=1.0, m=2.0, lam_tilde=1.0)
    kw.update(bad)
    with pytest.raises(InvalidInput):
        poincare_probe([], 4, 2.0, **kw)


def test_threads_do_not_change_results(p_case1, monkeypatch):
    cs = CorpusSpec(p_case1, n_perturbed=3, n_closed=1, n_samples=0, seed=9)
    serial = verify_weak_stability(cs, mesh_check=False).to_dict()
    monkeypatch.setenv("CKNSTAB_THREADS", "3")
    parallel = verify_weak_stability(cs, mesh_check=False).to_dict()
    assert serial == parallel
