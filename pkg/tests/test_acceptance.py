"""Acceptance criteria, one verdict line each (see the terminal summary)."""
import time

import numpy as np
import pytest

from nlconsensus import graphs, signals
from nlconsensus.dynamics import check_hypercube_invariance, check_order_preservation, integrate, residual
from nlconsensus.equilibria import (
    SeedPlan, bifurcation_sweep, classify_equilibrium, find_equilibria, nfse_admissible, nfse_conditions,
)
from nlconsensus.rng import stream
from nlconsensus.scenarios import karate_clustering
from nlconsensus.spectral import normalized_spectrum


def random_graph_with_positive_lambda(rng, n_lo=4, n_hi=8, p=0.5):
    while True:
        g = graphs.random_connected(int(rng.integers(n_lo, n_hi + 1)), p, rng)
        sp = normalized_spectrum(g)
        if sp.lambda_second > 0:
            return g, sp


def random_admissible_pwl(rng, max_breaks=8):
    n = int(rng.integers(0, max_breaks + 1))
    xs = np.unique(np.concatenate([[-1.0, 1.0], rng.uniform(-0.95, 0.95, n)]))
    ys = np.sort(rng.uniform(-1, 1, xs.size))
    return signals.piecewise_linear(np.column_stack([xs, ys]).tolist())


# --- 1 -------------------------------------------------------------------

def test_c1_line_spectrum(verdict):
    t0 = time.perf_counter()
    g = graphs.builtin("line", 5)
    w = normalized_spectrum(g).eigenvalues
    elapsed = time.perf_counter() - t0
    closed = np.sort(np.cos(np.pi * np.arange(5) / 4))
    dense = np.sort(np.linalg.eigvals(g.transition).real)
    err = max(np.max(np.abs(w - closed)), np.max(np.abs(w - dense)))
    ok = err < 1e-9 and elapsed < 1.0
    verdict("C1 line(5) spectrum", ok, f"max error {err:.2e} (tol 1e-9), {elapsed:.3f}s (limit 1s)")
    assert ok


# --- 2, 3 ----------------------------------------------------------------

@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    d = bifurcation_sweep(graphs.builtin("line", 5), signals.tanh_gain, (0.5, 3.5), 0.01)
    return d, time.perf_counter() - t0


def test_c2_bifurcation_onset(sweep, verdict):
    d, elapsed = sweep
    ok = d.detected_k_bif is not None and 1.404 <= d.detected_k_bif <= 1.424 and elapsed < 30
    verdict("C2 bifurcation onset", ok,
            f"K_bif = {d.detected_k_bif:.6f} (target [1.404, 1.424]), sweep {elapsed:.1f}s (limit 30s)")
    assert ok


def test_c3_transverse_stabilization(sweep, verdict):
    d, elapsed = sweep
    ok = d.detected_k_stab is not None and 2.453 <= d.detected_k_stab <= 2.473 and elapsed < 30
    verdict("C3 transverse stabilization", ok,
            f"K_stab = {d.detected_k_stab:.6f} (target [2.453, 2.473]), sweep {elapsed:.1f}s (limit 30s)")
    assert ok


# --- 4 -------------------------------------------------------------------

def test_c4_sharp_threshold(verdict):
    t0 = time.perf_counter()
    rng = stream(2024, "acceptance_threshold_graphs")
    nfse_below, worst_at = 0, 0.0
    for i in range(50):
        g, sp = random_graph_with_positive_lambda(rng)
        k_below = 0.95 / sp.lambda_second
        eqs = find_equilibria(g, signals.clip_linear(k_below), SeedPlan(n_random=1024, seed=i))
        nfse_below += sum(not e.is_fse for e in eqs)
        k_at = 1.0 / sp.lambda_second
        x = (0.5 / k_at) * sp.top_eigenvector
        worst_at = max(worst_at, residual(g, signals.clip_linear(k_at), x))
    elapsed = time.perf_counter() - t0
    ok = nfse_below == 0 and worst_at < 1e-12 and elapsed < 300
    verdict("C4 sharp threshold", ok,
            f"NFSE below threshold: {nfse_below} (want 0); worst residual at threshold "
            f"{worst_at:.1e} (tol 1e-12); {elapsed:.0f}s (limit 300s)")
    assert ok


# --- 5 -------------------------------------------------------------------

def test_c5_dense_graphs(verdict):
    t0 = time.perf_counter()
    gs = [graphs.builtin("complete", n) for n in range(4, 9)]
    gs += [graphs.builtin("complete_bipartite", (p, q)) for p in range(2, 5) for q in range(2, 5)]
    nfse = 0
    for g in gs:
        for k in (2.0, 5.0, 10.0):
            eqs = find_equilibria(g, signals.clip_linear(k), SeedPlan(seed=g.n))
            nfse += sum(not e.is_fse for e in eqs)
    elapsed = time.perf_counter() - t0
    ok = nfse == 0 and elapsed < 120
    verdict("C5 dense-graph guarantee", ok,
            f"{len(gs)} graphs x 3 gains, NFSE found: {nfse} (want 0); {elapsed:.0f}s (limit 120s)")
    assert ok


# --- 6 -------------------------------------------------------------------

def test_c6_exponential_envelope(verdict):
    rng = stream(6, "acceptance_envelope")
    worst = 0.0
    for i in range(20):
        g = graphs.random_connected(int(rng.integers(4, 13)), 0.4, rng)
        lam = normalized_spectrum(g).lambda_abs_max_nontrivial
        k = rng.uniform(0.3, 0.9) / lam
        s = signals.tanh_gain(k) if i % 2 else signals.clip_linear(k)
        traj = integrate(g, s, rng.uniform(-1, 1, g.n), t_end=40, early_stop=False)
        env = traj.disagreement[0] * np.exp(-(1 - k * lam) * traj.times)
        mask = env > 0
        worst = max(worst, float(np.max(traj.disagreement[mask] / env[mask])))
    ok = worst <= 1 + 1e-6
    verdict("C6 exponential envelope", ok, f"20 runs, max disagreement/envelope {worst:.6f} (limit 1 + 1e-6)")
    assert ok


# --- 7, 8 ----------------------------------------------------------------

@pytest.fixture(scope="module")
def karate_runs():
    runs = []
    for seed in range(10):
        t0 = time.perf_counter()
        run = karate_clustering(seed)
        runs.append((run, time.perf_counter() - t0))
    return runs


def test_c7_karate_clustering(karate_runs, verdict):
    bad = []
    for run, elapsed in karate_runs:
        ok = (run.kind == "NFSE" and run.sign_matches >= 33 and max(run.cluster_spreads) < 0.2
              and run.mean_gap > 0.5 and elapsed < 30)
        if not ok:
            bad.append(run.seed)
    r0 = karate_runs[0][0]
    detail = (f"{10 - len(bad)}/10 seeds reach a factional NFSE; seed 0: kind={r0.kind}, "
              f"sign matches {r0.sign_matches}/34, spreads {max(r0.cluster_spreads):.2g}, "
              f"gap {r0.mean_gap:.2g}; slowest {max(e for _, e in karate_runs):.1f}s")
    verdict("C7 karate clustering", not bad, detail)
    assert not bad, f"seeds without factional clustering: {bad}"


def test_c8_karate_iss(karate_runs, verdict):
    holds = all(t.holds_at_all_samples for run, _ in karate_runs for t in run.traces)
    tails = all(ok for run, _ in karate_runs for ok in run.tail_ok)
    alphas = sorted({round(a.alpha_in, 4) for run, _ in karate_runs for a in run.analyses})
    ok = holds and tails
    verdict("C8 karate ISS inequality", ok,
            f"bound holds at all samples: {holds}; tail under ultimate bound: {tails}; alpha_in {alphas}")
    assert ok


# --- 9 -------------------------------------------------------------------

BUILTIN = {
    "tanh2.5": signals.tanh_gain(2.5), "tanh3": signals.tanh_gain(3.0), "clip1.2": signals.clip_linear(1.2),
    "clip3": signals.clip_linear(3.0), "sinestair": signals.sine_staircase(),
    "staircase": signals.staircase_example(),
}


def test_c9_property_suites(verdict):
    t0 = time.perf_counter()
    rng = stream(9, "acceptance_properties")
    fams = list(BUILTIN.values())
    battery = [graphs.builtin("line", 5), graphs.builtin("ring", 6), graphs.builtin("star", 6),
               graphs.builtin("complete", 5), graphs.builtin("karate")]
    battery += [graphs.random_connected(int(rng.integers(4, 9)), 0.4, rng) for _ in range(5)]
    results = {}

    # cooperativity
    ordered = 0
    for i in range(200):
        g = battery[i % len(battery)]
        s = fams[i % len(fams)]
        lo = rng.uniform(-1, 1, g.n)
        hi = np.minimum(lo + rng.uniform(0, 0.5, g.n), 1.0)
        ordered += check_order_preservation(g, s, lo, hi, t_end=20).ordered
    results["order"] = ordered == 200

    # invariant boxes between successive fixed points
    boxes_ok = True
    for s in fams:
        recs = s.fixed_points
        for a, b in zip(recs, recs[1:]):
            lo, hi = a.hi, b.lo
            for g in battery[:3]:
                x0 = rng.uniform(lo, hi, g.n)
                traj = integrate(g, s, x0, t_end=30)
                boxes_ok &= check_hypercube_invariance(traj, s, lo, hi)
    results["boxes"] = bool(boxes_ok)

    # every admissible signal has a stable fixed point
    gen = [random_admissible_pwl(rng) for _ in range(200)]
    results["stable_fp"] = all(any(r.stable for r in s.fixed_points) for s in gen)

    # scalar vs Jacobian verdict on every synchronized equilibrium
    fse_checked, fse_bad = 0, 0
    found_nfse = []
    for g in battery:
        for name, s in BUILTIN.items():
            eqs = find_equilibria(g, s, SeedPlan(n_random=32, seed=g.n))
            for e in eqs:
                if e.is_fse:
                    fse_checked += 1
                    fse_bad += e.scalar_jacobian_consistent is False
                else:
                    found_nfse.append((g, s, e))
            for rec in s.fixed_points:
                rep = classify_equilibrium(g, s, np.full(g.n, rec.value))
                fse_checked += 1
                fse_bad += rep.scalar_jacobian_consistent is not True
    results["thm1"] = fse_bad == 0

    # three or fewer agents: only synchronized equilibria
    small = [graphs.from_edge_list([(0, 1)], 2), graphs.builtin("line", 3), graphs.builtin("complete", 3)]
    small_nfse = 0
    for g in small:
        for s in fams:
            small_nfse += sum(not e.is_fse for e in find_equilibria(g, s, SeedPlan(n_random=256, seed=3)))
    results["small"] = small_nfse == 0

    # necessary conditions on every clustered equilibrium, impossibility for the sine staircase
    cond_ok = all(nfse_conditions(g, s, e.state).overall_pass for g, s, e in found_nfse)
    sine = BUILTIN["sinestair"]
    sine_nfse = [e for g, s, e in found_nfse if s is sine]
    results["thm2"] = cond_ok and not nfse_admissible(sine).possible and not sine_nfse and len(found_nfse) > 0

    elapsed = time.perf_counter() - t0
    ok = all(results.values()) and elapsed < 600
    verdict("C9 property suites", ok,
            f"order {ordered}/200, boxes {results['boxes']}, stable fp {results['stable_fp']}, "
            f"scalar/Jacobian {fse_checked - fse_bad}/{fse_checked}, N<=3 NFSE {small_nfse}, "
            f"NFSE conditions on {len(found_nfse)} states {cond_ok}, sine impossibility "
            f"{not nfse_admissible(sine).possible}; {elapsed:.0f}s (limit 600s)")
    assert ok, results
