"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import itertools
import math

import numpy as np
import pytest

from corrtensor import harness, localreg, maxcorr, prob, ribbon, twoway
from corrtensor.dualreg import g_fork_k2
from corrtensor.results import Verdict

from conftest import record_acceptance

pytestmark = pytest.mark.acceptance


def rand(rng, cards, alpha=1.0):
    return prob.random_distribution(rng, cards, alpha)


def independent(rng, cards):
    arr = rng.dirichlet(np.ones(cards[0]))
    for c in cards[1:]:
        arr = np.multiply.outer(arr, rng.dirichlet(np.ones(c)))
    return prob.JointDistribution(arr)


def test_ac01_rho_correctness():
    rng = np.random.default_rng(101)
    indep = max(maxcorr.rho(independent(rng, [int(rng.integers(2, 5)), int(rng.integers(2, 5))]))
                for _ in range(50))
    perfect = abs(maxcorr.rho(prob.perfectly_correlated_bits()) - 1.0)
    worst, n = 0.0, 0
    for shape in [(2, 2), (2, 3)]:
        cells = list(itertools.product(range(shape[0]), range(shape[1])))
        for r in range(1, len(cells) + 1):
            for support in itertools.combinations(cells, r):
                arr = np.zeros(shape)
                for c in support:
                    arr[c] = rng.uniform(0.05, 1.0)
                d = prob.JointDistribution(arr / arr.sum())
                worst = max(worst, abs(maxcorr.rho(d) - maxcorr.rho_brute_force(d.p)))
                n += 1
    ok = indep <= 1e-9 and perfect <= 1e-9 and worst <= 1e-8
    record_acceptance(1, ok, f"rho: independent max {indep:.1e}, perfect bits err {perfect:.1e}, "
                             f"brute force max err {worst:.1e} over {n} supports")
    assert ok


def test_ac02_rho_tensorization_and_data_processing():
    rng = np.random.default_rng(102)
    tens, dp = 0.0, 0.0
    for _ in range(50):
        cp = [int(rng.integers(2, 4)) for _ in range(2)]
        cq = [int(rng.integers(2, 4)) for _ in range(2)]
        p, q = rand(rng, cp), rand(rng, cq)
        # variable-wise product (X X', Y Y')
        t = prob.group(prob.product(p, q), [[0, 2], [1, 3]])
        tens = max(tens, abs(maxcorr.rho(t) - max(maxcorr.rho(p), maxcorr.rho(q))))
        a = prob.apply_local_channel(p, prob.random_channel(rng, cp[0], int(rng.integers(2, 4))), 0)
        a = prob.apply_local_channel(a, prob.random_channel(rng, cp[1], int(rng.integers(2, 4))), 1)
        dp = max(dp, maxcorr.rho(a) - maxcorr.rho(p))
    ok = tens <= 1e-8 and dp <= 1e-8
    record_acceptance(2, ok, f"rho tensorization max violation {tens:.1e}, data processing max increase "
                             f"{max(dp, 0):.1e} on 50 pairs")
    assert ok


def test_ac03_ribbon_simplex_and_cube():
    rng = np.random.default_rng(103)
    exceptions, checked = 0, 0
    for _ in range(20):
        k = int(rng.integers(2, 4))
        d = rand(rng, [int(rng.integers(2, 4)) if k == 2 else 2 for _ in range(k)])
        for _ in range(3):
            w = rng.dirichlet(np.ones(k)) * rng.uniform(0.05, 1.0)
            exceptions += not ribbon.hc_member_aux(d, w).is_member
            out = rng.uniform(0, 1.5, k)
            out[int(rng.integers(k))] = rng.uniform(1.0 + 1e-3, 1.5)
            exceptions += ribbon.hc_member_aux(d, out).is_member
            checked += 2
    ok = exceptions == 0
    record_acceptance(3, ok, f"ribbon simplex containment and cube bound: {exceptions} exceptions "
                             f"in {checked} checks on 20 distributions")
    assert ok


def test_ac04_independence_characterization():
    rng = np.random.default_rng(104)
    mismatches = 0
    for n in range(20):
        k = 2 + n % 2
        cards = [2 + (i + n) % 2 for i in range(k)] if k == 2 else [2] * k
        d = independent(rng, cards) if n % 4 < 2 else rand(rng, cards)
        indep = prob.total_correlation(d) <= 1e-9
        mismatches += ribbon.hc_member_aux(d, np.ones(k)).is_member != indep
    ok = mismatches == 0
    record_acceptance(4, ok, f"verdict at all-ones equals independence test: {mismatches} mismatches in 20")
    assert ok


def test_ac05_norms_and_aux_agree():
    rng = np.random.default_rng(105)
    mismatches, compared, excluded = 0, 0, 0
    for n in range(20):
        d = rand(rng, [2, 2 + n % 2])
        for _ in range(20):
            lam = rng.uniform(0.02, 1.0, 2)
            a = ribbon.hc_member_aux(d, lam).is_member
            lo = ribbon.hc_member_aux(d, lam * (1 - 1e-3)).is_member
            hi = ribbon.hc_member_aux(d, lam * (1 + 1e-3)).is_member
            if not (a == lo == hi):
                excluded += 1
                continue
            compared += 1
            mismatches += ribbon.hc_member_norms(d, lam[0], lam[1]).is_member != a
    ok = mismatches == 0
    record_acceptance(5, ok, f"norms vs aux membership: {mismatches} mismatches in {compared} "
                             f"comparisons ({excluded} in the 1e-3 boundary band)")
    assert ok


def test_ac06_s_star_consistency():
    rng = np.random.default_rng(106)
    dists = [prob.dsbs(0.1), prob.dsbs(0.25)] + [rand(rng, [2, 2]) for _ in range(5)]
    spread, sandwich = 0.0, math.inf
    for d in dists:
        vals = [ribbon.s_star(d, method=m) for m in ("direct", "ribbon", "lce")]
        spread = max(spread, max(vals) - min(vals))
        sandwich = min(sandwich, min(vals) + 1e-6 - maxcorr.rho(d) ** 2)
    ok = spread <= 2e-3 and sandwich >= 0
    record_acceptance(6, ok, f"s* direct/ribbon/lce max spread {spread:.1e} on 7 pairs; "
                             f"min (s* + 1e-6 - rho^2) = {sandwich:.1e}")
    assert ok


def test_ac07_local_region_exactness():
    rng = np.random.default_rng(107)
    bnd, tens_bad, dp_bad = 0.0, 0, 0
    for _ in range(50):
        pair = rand(rng, [2, 2])
        r = maxcorr.rho(pair)
        bnd = max(bnd, abs(localreg.lambda_boundary(pair, 1, [1.0]) - 1 / r ** 2))
        d = rand(rng, [2, 2, 2])
        d2 = prob.iid_power(d, 2)
        ch = [prob.random_channel(rng, 2, 2) for _ in range(2)]
        e = prob.apply_local_channel(prob.apply_local_channel(d, ch[0], 0), ch[1], 1)
        for lam in harness.sobol_lambdas(2, 8, seed=int(rng.integers(1 << 30))):
            m = localreg.lambda_member(d, 2, lam).is_member
            tens_bad += m != localreg.lambda_member(d2, 2, lam).is_member
            dp_bad += m and not localreg.lambda_member(e, 2, lam).is_member
    ok = bnd <= 1e-8 and tens_bad == 0 and dp_bad == 0
    record_acceptance(7, ok, f"local region: k=1 boundary max err {bnd:.1e}; tensorization mismatches "
                             f"{tens_bad}, data-processing violations {dp_bad} on 50 cases")
    assert ok


def test_ac08_second_derivative_formula():
    rng = np.random.default_rng(108)
    worst, printed_best = 0.0, math.inf
    for n in range(20):
        cards = [int(rng.integers(2, 4)) for _ in range(2 + n % 2)]
        d = rand(rng, cards)
        helper = d.k - 1
        ph = prob.marginal_array(d.p, (helper,))
        f = rng.standard_normal(cards[helper])
        f -= ph @ f
        f /= np.max(np.abs(f))
        lam = rng.uniform(0.2, 1.5, d.k - 1)
        r = localreg.perturbation_second_derivative(d, helper, lam, f, eps_list=(1e-3,))
        worst = max(worst, r["rows"][0]["rel_error_variance_form"])
        printed_best = min(printed_best, r["rows"][0]["rel_error_printed_form"])
    ok = worst <= 1e-4
    record_acceptance(8, ok, f"second derivative: variance form max rel err {worst:.1e} at eps=1e-3 on 20 "
                             f"cases; alternative reading min rel err {printed_best:.1e}")
    assert ok


def test_ac09_g_additivity():
    rng = np.random.default_rng(109)
    lower, upper, modes = math.inf, -math.inf, set()
    for measure, cards in [("g_helper", [2, 2]), ("g_side_info", [2, 2]), ("g_fork", [2, 2, 2])]:
        for _ in range(3):
            p, q = rand(rng, cards), rand(rng, cards)
            rep = harness.check_additivity(measure, p, q, n_samples=4, seed=int(rng.integers(1 << 30)))
            modes.add(rep.oracle_mode)
            for s in rep.samples:
                lower = min(lower, s["lower_slack"])
                upper = max(upper, s["upper_excess"])
    ok = lower >= -1e-9 and upper <= 2e-3 and modes == {"exhaustive-grid"}
    record_acceptance(9, ok, f"G additivity (g_helper, g_side_info, g_fork): min certified slack {lower:.1e}, "
                             f"max grid excess {upper:.1e}, modes {sorted(modes)}")
    assert ok


def test_ac10_fork_collapse_and_alternative_form():
    rng = np.random.default_rng(110)
    failures, n_dep = 0, 0
    while n_dep < 10:
        d = rand(rng, [2, 2, 2], alpha=0.5)
        if prob.mutual_information(d, [0], [1]) <= 0.01:
            continue
        n_dep += 1
        for _ in range(5):
            lam = rng.uniform(0, 1.5, 2)
            lam[int(rng.integers(2))] = rng.uniform(0.05, 1.5)
            r = ribbon.fork_member(d, lam[0], lam[1])
            failures += not (r.verdict is Verdict.CERTIFIED_NON_MEMBER
                             and r.diagnostics.get("certificate") == "constant")
    alt = 0.0
    for _ in range(5):
        pxx = np.outer(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2))).reshape(4, 1)
        d = prob.JointDistribution((pxx * rng.dirichlet(np.ones(2), size=4)).reshape(2, 2, 2))
        for lam in rng.uniform(0, 1.5, (3, 2)):
            s = g_fork_k2(d, lam[0], lam[1], form="standard", method="best").value
            a = g_fork_k2(d, lam[0], lam[1], form="alternative", method="best").value
            alt = max(alt, abs(s - a))
    ok = failures == 0 and alt <= 1e-6
    record_acceptance(10, ok, f"fork collapse: {failures} uncertified of 50 lambdas on 10 dependent "
                              f"sources; alternative form max diff {alt:.1e}")
    assert ok


def test_ac11_pr_box_separation():
    rep = twoway.simulation_precondition(twoway.pr_box(0.6), twoway.pr_box(0.9))
    zc = all(twoway.zero_capacity_check(twoway.pr_box(e), tol=0.0)[0] for e in (0, 0.25, 0.5, 0.75, 1))
    g = rep["g_values"] or {}
    ok = (rep["status"] == "witness" and g["p_grid"] <= 1e-6 and g["q_certified"] > 1e-3 and zc)
    record_acceptance(11, ok, f"PR-box separation: witness {rep['witness_lambda']}, grid G(PR_0.6) "
                              f"{g.get('p_grid', float('nan')):.1e}, certified G(PR_0.9) "
                              f"{g.get('q_certified', float('nan')):.3g}; zero capacity exact: {zc}")
    assert ok


def test_ac12_lemma_check():
    rng = np.random.default_rng(112)
    worst, n = -math.inf, 0
    for i in range(20):
        p_ab = rand(rng, [2, 2])
        f_map, g_map = rng.integers(0, 2, 2), rng.integers(0, 2, 2)
        if i % 2:
            ch = twoway.pr_box(float(rng.uniform()))
        else:
            ch = prob.Channel((2, 2), (2, 2), rng.dirichlet(np.ones(4), size=4))
        lam = rng.uniform(0, 1, 2)
        r = twoway.lemma12_check(p_ab, f_map, g_map, ch, lam[0], lam[1], seed=i)
        worst = max(worst, r["violation"])
        n += 1
    ok = worst <= 5e-3
    record_acceptance(12, ok, f"one-use lemma: max (lhs - rhs) {worst:.1e} on {n} binary instances")
    assert ok


def test_ac13_variance_identities():
    rng = np.random.default_rng(113)
    resid, slack = 0.0, math.inf
    for s in range(100):
        d = rand(rng, [int(rng.integers(2, 4)) for _ in range(3)])
        r = localreg.variance_identity_checks(d, trials=1, seed=s)
        resid = max(resid, r["total_variance_max_residual"])
        slack = min(slack, r["markov_min_slack"], r["markov_constant_d_min_slack"])
    ok = resid <= 1e-10 and slack >= -1e-10
    record_acceptance(13, ok, f"variance identities: total variance max residual {resid:.1e}, "
                              f"Markov inequality min slack {slack:.1e} over 100 draws")
    assert ok
