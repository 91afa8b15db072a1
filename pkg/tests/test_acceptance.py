"""The twelve acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed in the terminal summary.  Run this file directly for a standalone
report.
"""
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from heisgeom import cayley, cocycle as cc, distortion, poincare
from heisgeom.cli import run
from heisgeom.group import GroupElement, power
from heisgeom.report import validate_report

import conftest


def record(number, ok, detail, elapsed):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s) {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture
def clock():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start


def test_criterion_01_central_word_lengths(clock):
    got = {n: cayley.dist(power(GroupElement(0, 0, 1), n * n), 30) for n in range(1, 6)}
    ok = all(d == 4 * n for n, d in got.items()) and clock() < 60
    assert record(1, ok, f"d(c^(n^2)) for n=1..5: {list(got.values())}", clock())


def test_criterion_02_growth_exponent(clock):
    cayley.clear_cache()
    rep = cayley.growth_report(8, 32)
    ok = 3.5 <= rep.slope <= 4.5 and clock() < 120
    assert record(2, ok, f"slope {rep.slope:.4f}, |B_32| = {rep.sizes[-1]}", clock())


def test_criterion_03_poincare_oracle(clock):
    fp = poincare.build_forms(1, "mini:5")
    dense = poincare.best_constant(fp, "dense").constant
    it = poincare.best_constant(fp, "iterative").constant
    rel = abs(dense - it) / dense
    rng = np.random.default_rng(0)
    F = rng.standard_normal((fp.vertex_count, 1000))
    L = fp.L.matrix()
    M = fp.M.matrix()
    ratios = np.einsum("ij,ij->j", F, L @ F) / np.einsum("ij,ij->j", F, M @ F)
    excess = float(ratios.max() / dense - 1)
    ok = rel <= 1e-6 and excess <= 1e-8 and clock() < 60
    assert record(3, ok, f"dense {dense:.12f}, iterative {it:.12f} (rel {rel:.1e}); "
                         f"max sampled ratio / C - 1 = {excess:.3f}", clock())


def test_criterion_04_paper_preset(clock):
    fp = poincare.build_forms(1, "paper")
    res = poincare.best_constant(fp, "iterative")
    lb = poincare.distortion_lower_bound(1, res.constant)
    ok = res.residual < 1e-8 and math.isfinite(res.constant) and lb > 0 and clock() < 600
    assert record(4, ok, f"C = {res.constant:.6f}, residual {res.residual:.1e}, "
                         f"{fp.vertex_count} vertices, lower bound {lb:.4g}", clock())


def test_criterion_05_sdp_oracles(clock):
    path = distortion.min_distortion_l2(distortion.path_instance(5))
    c4_inst = distortion.cycle_instance(4)
    c4 = distortion.min_distortion_l2(c4_inst)
    c4_check = distortion.verify_embedding(c4_inst, c4.D, gram=c4.gram)
    series = []
    b2_ok = False
    for R in (2, 3, 4):
        inst = distortion.ball_instance(R)
        r = distortion.min_distortion_l2(inst)
        if R == 2:
            b2_ok = distortion.verify_embedding(inst, r.D, gram=r.gram)["ok"]
        series.append((R, r.D))
    fit = distortion.trend_fit(series)
    ok = (abs(path.D - 1) <= 1e-6 and abs(c4.D - math.sqrt(2)) <= 1e-3 and c4.gram_min_eig >= -1e-4
          and c4_check["ok"] and b2_ok and fit.slope > 0 and clock() < 900)
    ds = ", ".join(f"B_{R}: {D:.6f}" for R, D in series)
    assert record(5, ok, f"path5 {path.D:.8f}, C4 {c4.D:.8f}; {ds}; trend slope {fit.slope:.4f}", clock())


def test_criterion_06_convexity_and_dyadic_averages(clock):
    rng = np.random.default_rng(0)
    worst_conv = worst_avg = math.inf
    for _ in range(1000):
        n = int(rng.integers(1, 33))
        d = int(rng.integers(1, 65))
        xs = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
        xs = xs * rng.uniform(0.01, 100) + rng.standard_normal(d)
        worst_conv = min(worst_conv, cc.check_convexity(xs, 2.0, 1.0)["slack"])
    for _ in range(1000):
        d = int(rng.integers(1, 65))
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        ell = int(rng.integers(1, 4))
        worst_avg = min(worst_avg, cc.check_lemma31(Q, z, ell, 8, 2.0, 1.0)["slack"])
    ok = worst_conv >= -1e-9 and worst_avg >= -1e-9 and clock() < 300
    assert record(6, ok, f"min slack: convexity {worst_conv:.3g}, dyadic series {worst_avg:.3g}", clock())


def test_criterion_07_explicit_averaging_bound(clock):
    worst = math.inf
    count = 0
    for q in (2**8, 2**10, 2**12):
        rep = cc.make_finite_rep(q)
        rng = np.random.default_rng(q)
        for _ in range(10):
            f = cc.Coboundary.random(rep, rng)
            for m in (6, 10, 14):
                for n in (2, 4, 8):
                    r = cc.check_lemma43(f, m, n, range(1, 33))
                    worst = min(worst, r["min_slack"])
                    count += len(r["per_k"])
    ok = worst >= -1e-9 and clock() < 300
    assert record(7, ok, f"{count} inequalities, min slack {worst:.4g}", clock())


def test_criterion_08_window_search(clock):
    sel = cc.select_parameters(2, 100)
    f = cc.Coboundary.random(cc.make_finite_rep(2**10), np.random.default_rng(0))
    r = cc.check_lemma42(f, sel.k, sel.m, sel.ell, 2.0, 1.0, n_list=(4, 16))
    slacks = [row["slack"] for row in r["per_n"]]
    ok = r["gen_bound_ok"] and all(s >= 0 for s in slacks) and clock() < 120
    assert record(8, ok, f"(i, j) = ({r['i']}, {r['j']}), generator max {r['gen_max']:.3g} <= "
                         f"{r['gen_bound']:.4g}; slacks {[round(s, 4) for s in slacks]}", clock())


def test_criterion_09_parameter_engine(clock):
    rows = []
    ok = True
    for p in (2, 3):
        for t in (10**2, 10**3, 10**4):
            if Fraction(t) < Fraction(8) ** p:
                with pytest.raises(cc.ParameterError):
                    cc.select_parameters(p, t)
                continue
            sel = cc.select_parameters(p, t)
            checks = cc.verify_selection(sel)
            sandwich = all(t <= 4 * n <= t * t for n in sel.n_of_i.values())
            ok &= checks["all"] and sandwich
            rows.append(f"p={p},t={t}:(m,k,l)=({sel.m},{sel.k},{sel.ell})")
    ok &= clock() < 1
    assert record(9, ok, "; ".join(rows), clock())


def test_criterion_10_central_energy(clock):
    guard = {}
    identity = 0.0
    disagreement = 0.0
    for lam in (0.01, 0.1, 1.0, 10.0, 100.0):
        r = cc.check_thm71(lam, "gaussian")
        guard[lam] = (r["lhs_upper"], r["w_bound"], r["w_bound_ok"])
        identity = max(identity, r["central_identity_error"])
        disagreement = max(disagreement, r["refinement_disagreement"])
    ratios = {}
    for kind in cc.H_KINDS:
        r = cc.check_thm71(1.0, kind)
        ratios[kind] = r["ratio"]
        identity = max(identity, r["central_identity_error"])
        disagreement = max(disagreement, r["refinement_disagreement"])
    failed = [lam for lam, (_, _, good) in guard.items() if not good]
    ok = (identity <= 1e-10 and not failed and all(0 < v < math.inf for v in ratios.values())
          and disagreement < 0.01 and clock() < 300)
    guard_txt = ", ".join(f"lam={lam:g}: {v:.4g} vs {cap:.3g}" for lam, (v, cap, _) in guard.items())
    ratio_txt = ", ".join(f"{k} {v:.4g}" for k, v in ratios.items())
    detail = (f"identity err {identity:.1e}; refinement {disagreement:.2%}; guard {guard_txt}; "
              f"lhs/rhs at lam=1: {ratio_txt}")
    if failed:
        detail += f"; guard fails for lam in {failed}"
    assert record(10, ok, detail, clock())


def test_criterion_11_admissibility(clock):
    verdicts = {
        "t": cc.admissibility(cc.theta_family("linear"), 1e12)["verdict"],
        "sqrt t": cc.admissibility(cc.theta_family("sqrt"), 1e12)["verdict"],
        "alpha 0.6": cc.admissibility(cc.theta_family("log", 0.6), 1e12)["verdict"],
        "alpha 0.4": cc.admissibility(cc.theta_family("log", 0.4), 1e12)["verdict"],
    }
    expected = {"t": "diverging", "sqrt t": "converging", "alpha 0.6": "converging", "alpha 0.4": "diverging"}
    ok = verdicts == expected and clock() < 10
    assert record(11, ok, str(verdicts), clock())


# the CLI side of every criterion above
DETERMINISM_RUNS = [
    ["profile", "--k", "25"],
    ["growth", "--rmin", "8", "--rmax", "32"],
    ["poincare", "--radius", "1", "--preset", "mini:5", "--method", "dense"],
    ["poincare", "--radius", "1", "--preset", "mini:5"],
    ["poincare", "--radius", "1", "--preset", "paper"],
    ["distort", "--radius", "2"],
    ["trend", "--radii", "2,3,4"],
    ["lemma31", "--trials", "1000"],
    ["lemma43", "--q", "4096", "--m", "10", "--n", "8"],
    ["lemma42", "--q", "1024", "--p", "2", "--t", "100"],
    ["params", "--p", "3", "--t", "10000"],
    ["compress", "--q", "4096"],
    ["thm71", "--lambda", "0.1"],
    ["thm71", "--lambda", "10", "--h", "hat"],
    ["admissible", "--family", "log", "--alpha", "0.4"],
]
CSV_RUNS = {"ball": ["ball", "--radius", "6"], "growth": ["growth", "--rmin", "8", "--rmax", "32"],
            "witness": ["poincare", "--radius", "1", "--preset", "mini:5", "--method", "dense"],
            "coords": ["distort", "--radius", "2"]}


def _one_pass(tmp_path, tag, capsys):
    reports, csvs = [], {}
    for argv in DETERMINISM_RUNS:
        code = run(argv + ["--seed", "0"])
        out, _ = capsys.readouterr()
        rep = json.loads(out)
        validate_report(rep)
        rep.pop("wall_ms")
        reports.append((code, rep))
    for name, argv in CSV_RUNS.items():
        path = tmp_path / f"{name}-{tag}.csv"
        run(argv + ["--seed", "0", "--out", str(path)])
        capsys.readouterr()
        csvs[name] = path.read_bytes()
    return reports, csvs


def test_criterion_12_determinism(tmp_path, clock, capsys):
    first = _one_pass(tmp_path, "a", capsys)
    second = _one_pass(tmp_path, "b", capsys)
    json_same = first[0] == second[0]
    csv_same = all(first[1][k] == second[1][k] for k in CSV_RUNS)
    ok = json_same and csv_same
    with capsys.disabled():
        assert record(12, ok, f"{len(DETERMINISM_RUNS)} reports identical: {json_same}; "
                              f"{len(CSV_RUNS)} CSV artifacts byte-identical: {csv_same}", clock())


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
