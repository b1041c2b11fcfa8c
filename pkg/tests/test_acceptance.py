"""Acceptance checks, one per numbered criterion.

Each test prints a single ``[PASS]`` / ``[FAIL]`` line with the measured
quantity before asserting. Run with ``pytest tests/test_acceptance.py -v`` or
directly as a script.
"""

import csv
import io
import math
import time

import numpy as np
import pytest

from vlsf.channel import build_channel
from vlsf.cli import main
from vlsf.expansions import CramerSeries2, hermite, moments_to_cumulants, partitions, edgeworth_p, petrov_tail
from vlsf.montecarlo import default_shards, mc_stopping, mc_tail_curve
from vlsf.scheduler import (ProgramSpec, exhaustive, greedy, greedy_path, kkt_residuals, n_m_star, objective,
                            rate_curve, sdo_gap, sdo_nogap)
from vlsf.tail import TailModel

from conftest import synthetic_instances
from test_expansions import brute_partitions, hermite_recurrence
from test_tail import richardson_derivative

MC_SEED = 12345


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        return ok

    return emit


def test_criterion_1_capacity(report, capsys):
    t0 = time.perf_counter()
    rc = main(["channel", "--snr-db", "0.2"])
    elapsed = time.perf_counter() - t0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    cap = float(rows[0]["capacity"])
    ok = rc == 0 and abs(cap - 0.5) <= 0.005 and elapsed < 1.0
    report(1, ok, f"C = {cap:.6f} (0.500 +/- 0.005), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_last_decoding_time(report):
    t0 = time.perf_counter()
    spec = ProgramSpec(20, 1e-2)
    tail = TailModel(build_channel(0.2), spec.gamma, "hybrid")
    n = tail.F_inverse(1 - spec.epsilon / 2)
    elapsed = time.perf_counter() - t0
    ok = abs(n - 101.91) <= 0.5 and elapsed < 5.0
    report(2, ok, f"n_m* = {n:.4f} (101.91 +/- 0.5), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_3_rate_gap(report, channel):
    t0 = time.perf_counter()
    cells = rate_curve(range(10, 101, 10), [16], 1e-2, 0.2, "sdo-gap", channel=channel)
    elapsed = time.perf_counter() - t0
    ratios = {c.k: c.ratio for c in cells}
    worst = min(ratios, key=ratios.get)
    ok = all(r >= 0.995 for r in ratios.values()) and elapsed < 120
    table = ", ".join(f"k={k}: {r:.4f}" for k, r in ratios.items())
    report(3, ok, f"min R_sdo/R_vlf = {ratios[worst]:.4f} at k={worst} (>= 0.995), {elapsed:.1f} s; {table}")
    assert ok


def test_criterion_4_model_ranking(report, channel, k10_spec, k10_tail):
    t0 = time.perf_counter()
    ns = np.arange(1, 61)
    est = mc_tail_curve(ns, k10_spec.gamma, channel, 10_000_000, MC_SEED, default_shards())
    elapsed = time.perf_counter() - t0
    mc = np.array([e.value for e in est])
    se = np.array([e.stderr for e in est])
    hyb = k10_tail.F(ns.astype(float))
    gau = k10_tail.F_gaussian(ns.astype(float))
    err_h, err_g = np.max(np.abs(hyb - mc)), np.max(np.abs(gau - mc))
    band = (mc >= 1e-3) & (mc <= 1 - 1e-3)
    excess = np.abs(hyb - mc) - (3 * se + 1e-3)
    bad = ns[band & (excess > 0)]
    ok = err_h < err_g and bad.size == 0 and elapsed < 300
    worst = int(ns[band][np.argmax(excess[band])])
    report(4, ok, f"max|hyb-MC| = {err_h:.3g} vs max|gauss-MC| = {err_g:.3g}; worst band point n={worst} "
                  f"|hyb-MC| = {abs(hyb - mc)[worst - 1]:.4g} vs 3se+1e-3 = {3 * se[worst - 1] + 1e-3:.4g}; "
                  f"violations at n = {bad.tolist()}; {elapsed:.0f} s")
    assert ok


def test_criterion_5_sdo_suite(report, channel, k20_spec, k20_tail):
    rng = np.random.default_rng(5)
    worst_stat = worst_slack = 0.0
    min_gap = math.inf
    max_diff = 0.0
    compared = 0
    for _ in range(20):
        k, eps, m = int(rng.integers(5, 101)), float(10 ** rng.uniform(-4, -1)), int(rng.integers(2, 41))
        spec = ProgramSpec(k, eps)
        tail = TailModel(channel, spec.gamma)
        spec = spec.with_m(min(m, math.ceil(n_m_star(spec, tail))))
        s = sdo_gap(spec, tail)
        stat, scaled, slack = kkt_residuals(s, tail)
        worst_stat = max(worst_stat, np.max(np.abs(stat)), np.max(np.abs(scaled)))
        worst_slack = max(worst_slack, np.max(np.abs(slack)))
        min_gap = min(min_gap, np.min(s.gaps))
        u = sdo_nogap(spec, tail)
        if np.all(u.gaps >= 1):
            max_diff = max(max_diff, np.max(np.abs(u.times - s.times)))
            compared += 1
    for m in range(1, 21):
        spec = k20_spec.with_m(m)
        s, u = sdo_gap(spec, k20_tail), sdo_nogap(spec, k20_tail)
        min_gap = min(min_gap, np.min(s.gaps, initial=math.inf))
        if np.all(u.gaps >= 1):
            max_diff = max(max_diff, np.max(np.abs(u.times - s.times)))
            compared += 1
    ok = worst_stat < 1e-6 and worst_slack < 1e-8 and max_diff < 1e-4 and min_gap >= 1 - 1e-9 and compared >= 20
    report(5, ok, f"KKT residual {worst_stat:.2e} (< 1e-6), slackness {worst_slack:.2e} (< 1e-8), "
                  f"gap/no-gap diff {max_diff:.2e} over {compared} runs (< 1e-4), min gap {min_gap:.6f}")
    assert ok


def test_criterion_6_greedy_oracle(report, k20_tail):
    instances = synthetic_instances()
    rel_gaps = []
    never_better = True
    for spec, tail, ns in instances:
        for m in (2, 3, 4):
            if m > ns:
                continue
            g, e = greedy(spec, tail, m), exhaustive(spec, tail, m)
            never_better &= g.objective >= e.objective - 1e-12
            rel_gaps.append((g.objective - e.objective) / e.objective)

    rng = np.random.default_rng(6)
    insert_ok = 0
    for _ in range(200):
        m = int(rng.integers(2, 13))
        pts = np.sort(rng.uniform(32.0, 140.0, m))
        pts = pts[np.r_[True, np.diff(pts) > 0.05]]
        if pts.size < 2:
            pts = np.array([40.0, 80.0])
        i = int(rng.integers(1, pts.size))
        a, b = pts[i - 1], pts[i]
        n_new = rng.uniform(a + 0.25 * (b - a), b - 0.25 * (b - a))
        insert_ok += objective(np.insert(pts, i, n_new), k20_tail) < objective(pts, k20_tail)

    positive = [c for c in instances if c[1].mode == "gaussian"]
    mono_ok = 0
    for _ in range(200):
        spec, tail, ns = positive[int(rng.integers(len(positive)))]
        m = int(rng.integers(1, ns))
        path = greedy_path(spec, tail)
        fewer, more = path[ns - m], path[ns - m - 1]
        mono_ok += fewer.diagnostics["increment"] > 0 and fewer.objective >= more.objective

    ok = len(instances) >= 20 and never_better and insert_ok == 200 and mono_ok == 200
    report(6, ok, f"{len(instances)} instances, {len(rel_gaps)} (instance, m) pairs, greedy >= exhaustive: "
                  f"{never_better}, relative gap max {max(rel_gaps):.3e} mean {np.mean(rel_gaps):.3e}; "
                  f"insertion {insert_ok}/200, monotone in m {mono_ok}/200")
    assert ok


def test_criterion_7_bound_by_simulation(report, channel, k20_spec, k20_tail):
    t0 = time.perf_counter()
    lines, ok = [], True
    for m in (4, 16, 64):
        s = greedy(k20_spec.with_m(m), k20_tail)
        true, marg = mc_stopping(s.times, k20_spec.gamma, channel, 1_000_000, MC_SEED, default_shards())
        ok &= true.value <= s.objective + 3 * true.stderr
        lines.append(f"m={m}: E[tau] = {true.value:.4f} +/- {true.stderr:.4f} vs N = {s.objective:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    report(7, ok, "; ".join(lines) + f"; {elapsed:.0f} s")
    assert ok


def test_criterion_8_series_identities(report, k20_spec, k20_tail):
    x = np.linspace(-5, 5, 41)
    herm = max(np.max(np.abs(hermite(j, x) - hermite_recurrence(j, x)) / np.maximum(np.abs(hermite_recurrence(j, x)), 1.0))
               for j in range(18))
    counts = [len(partitions(j)) for j in range(1, 8)]
    parts_ok = counts == [1, 2, 3, 5, 7, 11, 15] and all(
        {p.counts for p in partitions(j)} == brute_partitions(j) for j in range(1, 8))
    kap = {3: 0.37, 4: -0.2, 5: 0.1}
    p1 = np.max(np.abs(edgeworth_p(1, x, kap) + kap[3] / 6 * (x * x - 1)))
    gk = moments_to_cumulants([0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0])
    gauss = max(abs(gk[m]) for m in range(3, 8))
    petrov0 = petrov_tail(30, 0.0, CramerSeries2(0.2, -0.1, 0.05))

    t = k20_tail
    worst = 0.0
    for n in np.linspace(1.0, 2 * n_m_star(k20_spec, t), 400):
        h = 1e-3 * n
        if abs(n - t.switch_n) <= h:
            continue
        f = t.f(n)
        worst = max(worst, abs(f - richardson_derivative(t.F, n, h)) / max(f, 1e-12))
    ok = herm <= 1e-9 and parts_ok and p1 <= 1e-12 and gauss <= 1e-12 and petrov0 == 0.5 and worst <= 1e-6
    report(8, ok, f"Hermite rel err {herm:.1e}, partition counts {counts}, p1 err {p1:.1e}, "
                  f"Gaussian cumulants {gauss:.1e}, Petrov(x=0) = {petrov0}, derivative rel err {worst:.2e}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
