"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The lines are collected in ``RESULTS`` and printed in the terminal summary
(see ``conftest.py``), so ``pytest tests/test_acceptance.py`` ends with a
compact table whatever the verbosity.
"""
import dataclasses
import itertools
import random
import time

import numpy as np
import pytest

from lnc_wdm import analysis, cli, codec
from lnc_wdm.analysis import CONDITIONAL, UNIFORM
from lnc_wdm.codec import GenerationParams, InsufficientRankError
from lnc_wdm.netmodel import Path, PathTable, Scenario
from conftest import hub_scenario, tapped_ids
from oracles import brute_force, exact_subset_form, mean, tail

RESULTS: list[str] = []


def record(name: str, ok: bool, detail: str) -> bool:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    print(RESULTS[-1])
    return ok


# -- 1 -------------------------------------------------------------------------------

def _toy(rng: random.Random):
    n = rng.randint(3, 10)
    hubs = list(range(2, 2 + rng.randint(2, max(2, n // 2))))
    spec = [(i, rng.randint(1, 5), round(rng.uniform(0.05, 0.95), 4), rng.choice(hubs))
            for i in range(n)]
    used = sorted({h for *_, h in spec})
    tapped = rng.sample(used, rng.randint(1, len(used) - 1)) if len(used) > 1 else used
    return hub_scenario(spec, tapped), spec, tapped, rng.randint(1, n)


def test_oracle_equivalence():
    rng = random.Random(20240601)
    worst = 0.0
    checks = 0
    start = time.perf_counter()
    for _ in range(25):
        scn, spec, hubs, xi = _toy(rng)
        paths = [(i, d, p) for i, d, p, _ in spec]
        tapped = tapped_ids(spec, hubs)
        edges = scn.attack.eavesdrop_edges
        blocking, pmf_opt = brute_force(paths, tapped, xi, "opt")
        _, pmf_uni = brute_force(paths, tapped, xi, "rnd")
        _, pmf_exact = brute_force(paths, tapped, xi, "rnd-exact")
        pairs = [
            (analysis.blocking_probability(scn.paths.availabilities, xi), blocking),
            (analysis.expected_wiretap_paths_opt(scn, xi, edges), mean(pmf_opt)),
            (analysis.expected_wiretap_paths_rnd(scn, xi, edges, UNIFORM), mean(pmf_uni)),
            (analysis.expected_wiretap_paths_rnd(scn, xi, edges, CONDITIONAL), mean(pmf_exact)),
            (analysis.expected_wiretap_paths_rnd(scn, xi, edges, CONDITIONAL),
             exact_subset_form(paths, tapped, xi)),
        ]
        for nu in range(1, xi + 1):
            pairs += [
                (analysis.catastrophic_threat(scn, "opt", nu, xi, edges), tail(pmf_opt, nu)),
                (analysis.catastrophic_threat(scn, "rnd", nu, xi, edges, UNIFORM), tail(pmf_uni, nu)),
                (analysis.catastrophic_threat(scn, "rnd", nu, xi, edges, CONDITIONAL),
                 tail(pmf_exact, nu)),
            ]
        worst = max([worst] + [abs(a - b) for a, b in pairs])
        checks += len(pairs)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 10
    record("oracle equivalence", ok,
           f"25 scenarios, {checks} values, max |diff| {worst:.1e} (<= 1e-12), {elapsed:.1f}s (< 10s)")
    assert ok


# -- 2 -------------------------------------------------------------------------------

def test_probability_normalization(nsfnet):
    analysis._outcomes.cache_clear()
    start = time.perf_counter()
    probs = nsfnet.paths.availabilities
    total = sum(analysis.prob_n_available(probs, j) for j in range(len(probs) + 1))
    elapsed = time.perf_counter() - start
    ok = abs(total - 1.0) <= 1e-9 and elapsed < 5
    record("probability normalization", ok,
           f"sum = {total!r} over 2^18 outcomes, {elapsed:.2f}s (< 5s)")
    assert ok


# -- 3, 4 ----------------------------------------------------------------------------

def test_codec_round_trip():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    decodes = failures = 0
    for k, n in ((4, 5), (4, 7), (8, 9), (8, 11)):
        params = GenerationParams(k, n - k)
        subsets = np.array(list(itertools.combinations(range(n), k)))
        for _ in range(1000):
            src = rng.integers(0, 256, (k, codec.DEFAULT_BLOCK_LEN)).astype(np.uint8)
            coded = codec.encode_generation(src, codec.make_coefficients(params, rng))
            got, solved = codec.decode_subsets(coded, subsets, k)
            failures += int((~solved | (got != src).any(axis=(1, 2))).sum())
            decodes += len(subsets)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 60
    record("codec round-trip", ok,
           f"{decodes} decodes, {failures} failures, {elapsed:.1f}s (< 60s)")
    assert ok


def test_wiretap_rank_property():
    rng = np.random.default_rng(8)
    params = GenerationParams(4, 3)
    attempts = leaks = 0
    for _ in range(1000):
        src = rng.integers(0, 256, (4, codec.DEFAULT_BLOCK_LEN)).astype(np.uint8)
        coded = codec.encode_generation(src, codec.make_coefficients(params, rng))
        for j in (1, 2, 3):
            for s in itertools.combinations(range(7), j):
                attempts += 1
                try:
                    codec.decode_blocks([coded[i] for i in s], 4)
                    leaks += 1
                except InsufficientRankError:
                    pass
    ok = leaks == 0
    record("wiretap-rank property", ok,
           f"{attempts} captures of 1-3 blocks (every subset of 7), {leaks} unique decodes")
    assert ok


# -- 5 -------------------------------------------------------------------------------

def test_analysis_simulation_agreement():
    spec = cli.ExperimentSpec(mode="compare", trials=100_000)
    start = time.perf_counter()
    result = cli.run(spec)
    elapsed = time.perf_counter() - start
    cells = [r for r in result.rows if r.metric in cli.SUBSET_METRICS]
    inside = sum(r.within_ci for r in cells)
    frac = inside / len(cells)
    ok = len(cells) == 2 * 2 * 4 * 7 * 4 and frac >= 0.95 and elapsed < 600
    record("analysis-simulation agreement", ok,
           f"{inside}/{len(cells)} cells within the 95% CI ({100 * frac:.1f}% >= 95%), "
           f"seed {spec.seed}, {elapsed:.0f}s (< 600s)")
    assert ok


# -- 6 -------------------------------------------------------------------------------

BAND = 0.10


def _lam(scn, policy, k, r, edge):
    return analysis.exposure(scn, policy, k, r, [edge]).lambda_fraction


def _lam_star(scn, policy, k, r, edge):
    return analysis.exposure(scn, policy, k, r, [edge]).lam_star


def _single_edge_jam_success(scn, r):
    edges = sorted(scn.attack.eavesdrop_edges)
    return sum(analysis.exposure(scn, "rnd", 4, r, [e]).theta_jam for e in edges) / len(edges)


def test_reference_values(nsfnet):
    e25, e89 = (2, 5), (8, 9)
    jam = [analysis.exposure(nsfnet, "rnd", 4, r, [e25]).theta_jam for r in range(4)]
    eav = [analysis.exposure(nsfnet, "opt", 4, r, [e25]).theta_eavesdrop for r in range(4)]
    targets = [
        ("opt k=4 exposure on 2-5", _lam(nsfnet, "opt", 4, 0, e25), 0.95),
        ("opt k=8 exposure on 2-5", _lam(nsfnet, "opt", 8, 0, e25), 0.57),
        ("rnd k=4+3 exposure on 8-9", _lam_star(nsfnet, "rnd", 4, 3, e89), 0.55),
        ("rnd k=4 jam threat r=0", jam[0], 0.97),
        ("rnd k=4 jam threat r=3", jam[3], 0.46),
    ] + [(f"opt k=4 eavesdrop threat r={r}", eav[r], 0.84) for r in range(4)]
    misses = [f"{name} {got:.3f} vs {want}" for name, got, want in targets
              if abs(got - want) > BAND]
    rnd25 = _lam_star(nsfnet, "rnd", 4, 3, e25)
    orderings = {
        "rnd k=4+3 on 2-5 at most 84.8%": rnd25 <= 0.848 + BAND,
        "opt exposure on 2-5 drops from k=4 to k=8": targets[0][1] > targets[1][1],
        "rnd jam threat falls as r grows": all(a > b for a, b in zip(jam, jam[1:])),
        "opt eavesdrop threat nearly flat in r": max(eav) - min(eav) < 0.05,
        "opt k=4 r=1 exposes a full generation on 2-5":
            analysis.exposure(nsfnet, "opt", 4, 1, [e25]).lam_star >= 1,
        "rnd exposes less than opt on 2-5 (k=4+3)": rnd25 < _lam_star(nsfnet, "opt", 4, 3, e25),
    }
    broken = [name for name, held in orderings.items() if not held]
    ok = not misses and not broken
    record("reference-value reproduction (bands and orderings)", ok,
           f"{len(targets) - len(misses)}/{len(targets)} targets within +-10 points, "
           f"{len(orderings) - len(broken)}/{len(orderings)} orderings"
           + (f"; misses: {misses}; broken: {broken}" if not ok else ""))
    assert ok


@pytest.mark.xfail(strict=True, reason=(
    "single-edge jam success cannot reach the 66.4%/69.6% targets with the bundled topology: "
    "the per-edge mean is bounded by the 2-5 value, which is 46% at r=3; see docs/reproduction.md"))
def test_reference_single_edge_jam_success(nsfnet):
    got = {r: _single_edge_jam_success(nsfnet, r) for r in (1, 3)}
    ok = abs(got[1] - 0.664) <= BAND and abs(got[3] - 0.696) <= BAND
    record("reference-value reproduction (single-edge jam success)", ok,
           f"r=1 {got[1]:.3f} vs 0.664, r=3 {got[3]:.3f} vs 0.696 "
           "(documented gap, strict xfail)")
    assert ok


# -- 7 -------------------------------------------------------------------------------

def test_determinism(tmp_path):
    outs = []
    for i in range(2):
        dest = tmp_path / f"run{i}.csv"
        code = cli.main(["run", "--mode", "simulate", "--trials", "20000", "--seed", "123",
                         "--out", str(dest)])
        assert code == 0
        outs.append(dest.read_bytes())
    same = outs[0] == outs[1]
    record("determinism", same,
           f"two simulate runs of the full sweep, {len(outs[0])} bytes each, "
           + ("byte-identical" if same else "differ"))
    assert same


# -- 8 -------------------------------------------------------------------------------

def test_degenerate_scenarios(nsfnet):
    sure = Scenario("sure", nsfnet.topology,
                    PathTable(tuple(dataclasses.replace(p, availability=1.0) for p in nsfnet.paths)),
                    nsfnet.attack)
    failures = []
    edge_sets = [s for w in (1, 2, 3) for s in
                 itertools.combinations(sorted(nsfnet.attack.eavesdrop_edges), w)]
    for xi in range(1, 19):
        for s in edge_sets:
            want = int(sure.paths.wiretap_mask(s)[:xi].sum())
            got = analysis.expected_wiretap_paths_opt(sure, xi, s)
            if got != want:
                failures.append(f"all-up xi={xi} {s}: {got} != {want}")
    for pol in ("opt", "rnd"):
        for xi in (1, 4, 7):
            for nu in (xi + 1, xi + 5):
                if analysis.catastrophic_threat(nsfnet, pol, nu, xi, [(2, 5)]) != 0.0:
                    failures.append(f"{pol} nu={nu} > xi={xi} not zero")
        for k, r in ((4, 0), (4, 3), (8, 2)):
            rep = analysis.exposure(nsfnet, pol, k, r, [])
            if (rep.expected_wiretap_paths, rep.lam, rep.theta_eavesdrop, rep.theta_jam) != (0, 0, 0, 0):
                failures.append(f"{pol} k={k} r={r} empty set not zero")
    ok = not failures
    record("degenerate scenarios", ok,
           "all-up collapse for xi=1..18 x 7 edge sets, nu > xi, empty wiretap set"
           + (f"; {failures[:3]}" if failures else ""))
    assert ok
