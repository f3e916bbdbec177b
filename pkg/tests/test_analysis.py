import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lnc_wdm import analysis
from lnc_wdm.analysis import (CONDITIONAL, UNIFORM, AnalysisError, PathCombination, Policy,
                              SelectionPolicy)
from lnc_wdm.netmodel import Path
from conftest import hub_scenario, random_hub_scenario, tapped_ids
from oracles import (brute_force, exact_subset_form, mean, poisson_binomial,
                     tail)

TOL = 1e-12


# -- availability -------------------------------------------------------------------

def test_combo_probability():
    assert analysis.combo_probability([0.8, 0.5], {0}) == pytest.approx(0.40, abs=TOL)
    assert analysis.combo_probability([0.8, 0.5, 0.3], {0, 1, 2}) == pytest.approx(0.12, abs=TOL)
    assert analysis.combo_probability([0.0, 0.5], {0, 1}) == 0.0
    with pytest.raises(AnalysisError):
        analysis.combo_probability([0.5], {3})


def test_path_combination_complement():
    c = PathCombination((0, 1, 2), {1})
    assert c.complement == {0, 2}
    with pytest.raises(AnalysisError):
        PathCombination((0, 1), {5})


def test_prob_n_available_two_paths():
    p = [0.8, 0.5]
    assert analysis.prob_n_available(p, 2) == pytest.approx(0.40, abs=TOL)
    assert analysis.prob_n_available(p, 1) == pytest.approx(0.50, abs=TOL)
    assert analysis.prob_n_available(p, 0) == pytest.approx(0.10, abs=TOL)
    with pytest.raises(AnalysisError):
        analysis.prob_n_available(p, 3)


def test_all_up_puts_mass_on_full_set():
    dist = analysis.availability_distribution([1.0] * 5)
    assert dist[5] == 1.0 and dist[:5].sum() == 0.0


def test_blocking_examples():
    assert analysis.blocking_probability([0.8, 0.5], 2) == pytest.approx(0.60, abs=TOL)
    assert analysis.blocking_probability([1.0, 1.0, 1.0], 1) == 0.0
    with pytest.raises(AnalysisError):
        analysis.blocking_probability([0.8, 0.5], 3)
    with pytest.raises(AnalysisError):
        analysis.blocking_probability([0.8, 0.5], 0)


@settings(max_examples=60)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_distribution_matches_recursion(probs):
    got = analysis.availability_distribution(probs)
    assert np.allclose(got, poisson_binomial(probs), atol=1e-12)
    assert math.isclose(math.fsum(got), 1.0, abs_tol=1e-12)


def test_bundled_distribution_normalised(nsfnet):
    p = nsfnet.paths.availabilities
    total = math.fsum(analysis.prob_n_available(p, j) for j in range(19))
    assert abs(total - 1.0) < 1e-9


def test_probability_validation():
    with pytest.raises(AnalysisError):
        analysis.blocking_probability([1.5], 1)
    with pytest.raises(AnalysisError):
        analysis.availability_distribution([0.5] * (analysis.MAX_ENUM_PATHS + 1))


# -- wiretap counts ---------------------------------------------------------------------

def test_wiretap_path_count():
    a = Path.from_nodes(0, (0, 1, 9), 1, 1)
    b = Path.from_nodes(1, (0, 2, 9), 1, 1)
    c = Path.from_nodes(2, (0, 3, 9), 1, 1)
    d = Path.from_nodes(3, (0, 4, 9), 1, 1)
    assert analysis.wiretap_path_count([a, b, c, d], []) == 0
    assert analysis.wiretap_path_count([a, b], [(0, 1), (0, 2)]) == 2
    assert analysis.wiretap_path_count([a, b, c, d], [(1, 9), (3, 9)]) == 2


def test_single_certain_path():
    scn = hub_scenario([(0, 1, 1.0, 2)], tapped_hubs=[2])
    assert analysis.expected_wiretap_paths_opt(scn, 1) == 1.0
    assert analysis.catastrophic_threat(scn, "opt", 1, 1, (0, 2)) == 1.0


def test_wiretap_edge_on_no_path(three_path):
    for pol in ("opt", "rnd"):
        assert analysis.expected_wiretap_paths(three_path, pol, 2, [(9, 1)]) == 0.0
        assert analysis.catastrophic_threat(three_path, pol, 1, 2, (9, 1)) == 0.0


def test_three_path_toy_opt(three_path):
    _, pmf = brute_force([(0, 1, 0.9), (1, 2, 0.8), (2, 3, 0.7)], {0}, 2, "opt")
    assert analysis.expected_wiretap_paths_opt(three_path, 2) == pytest.approx(mean(pmf), abs=TOL)


def test_three_path_toy_rnd_by_hand(three_path):
    # the three 2-subsets: {0,1} .216 (tapped 1), {0,2} .126 (1), {1,2} .056 (0)
    want = (0.9 * 0.8 * 0.3 + 0.9 * 0.2 * 0.7) / (0.9 * 0.8 * 0.3 + 0.9 * 0.2 * 0.7 + 0.1 * 0.8 * 0.7)
    got = analysis.expected_wiretap_paths_rnd(three_path, 2)
    assert got == pytest.approx(want, abs=TOL)


def test_rnd_all_or_none_tapped(three_path):
    every = [(0, 2), (0, 3), (0, 4)]
    for model in (CONDITIONAL, UNIFORM):
        assert analysis.expected_wiretap_paths_rnd(three_path, 2, every, model) == pytest.approx(2.0)
        assert analysis.expected_wiretap_paths_rnd(three_path, 2, [], model) == 0.0


def test_catastrophic_threat_shared_edge():
    # the two shortest paths share hub 2
    spec = [(0, 1, 0.9, 2), (1, 2, 0.8, 2), (2, 3, 0.7, 3)]
    scn = hub_scenario(spec)
    paths = [(i, d, p) for i, d, p, _ in spec]
    for pol, mode in (("opt", "opt"), ("rnd", "rnd-exact")):
        _, pmf = brute_force(paths, {0, 1}, 2, mode)
        assert analysis.catastrophic_threat(scn, pol, 2, 2, (0, 2)) == pytest.approx(tail(pmf, 2), abs=TOL)
    _, pmf = brute_force(paths, {0, 1}, 2, "rnd")
    got = analysis.catastrophic_threat(scn, "rnd", 2, 2, (0, 2), rnd_model=UNIFORM)
    assert got == pytest.approx(tail(pmf, 2), abs=TOL)


def test_threshold_above_xi_is_zero(three_path):
    assert analysis.catastrophic_threat(three_path, "opt", 3, 2, (0, 2)) == 0.0
    with pytest.raises(AnalysisError):
        analysis.catastrophic_threat(three_path, "opt", 0, 2, (0, 2))


# -- randomised oracle equivalence --------------------------------------------------------

def _cases(n_cases, seed):
    rng = random.Random(seed)
    for _ in range(n_cases):
        n = rng.randint(1, 10)
        scn, spec, hubs = random_hub_scenario(rng, n)
        yield scn, spec, hubs, rng.randint(1, n)


@pytest.mark.parametrize("case", range(30))
def test_matches_brute_force(case):
    scn, spec, hubs, xi = next(iter(_cases(1, 1000 + case)))
    paths = [(i, d, p) for i, d, p, _ in spec]
    tapped = tapped_ids(spec, hubs)
    edges = scn.attack.eavesdrop_edges
    blocking, pmf_opt = brute_force(paths, tapped, xi, "opt")
    assert analysis.blocking_probability(scn.paths.availabilities, xi) == pytest.approx(blocking, abs=TOL)
    if pmf_opt is None:
        with pytest.raises(AnalysisError):
            analysis.expected_wiretap_paths_opt(scn, xi, edges)
        return
    _, pmf_uni = brute_force(paths, tapped, xi, "rnd")
    _, pmf_exact = brute_force(paths, tapped, xi, "rnd-exact")
    assert analysis.expected_wiretap_paths_opt(scn, xi, edges) == pytest.approx(mean(pmf_opt), abs=TOL)
    assert analysis.expected_wiretap_paths_rnd(scn, xi, edges, UNIFORM) == pytest.approx(mean(pmf_uni), abs=TOL)
    for nu in range(1, xi + 2):
        assert analysis.catastrophic_threat(scn, "opt", nu, xi, edges) == pytest.approx(tail(pmf_opt, nu), abs=TOL)
        assert analysis.catastrophic_threat(scn, "rnd", nu, xi, edges, UNIFORM) == pytest.approx(
            tail(pmf_uni, nu), abs=TOL)
    if pmf_exact is None:
        with pytest.raises(AnalysisError):
            analysis.expected_wiretap_paths_rnd(scn, xi, edges, CONDITIONAL)
        return
    got = analysis.expected_wiretap_paths_rnd(scn, xi, edges, CONDITIONAL)
    assert got == pytest.approx(mean(pmf_exact), abs=TOL)
    assert got == pytest.approx(exact_subset_form(paths, tapped, xi), abs=TOL)
    for nu in range(1, xi + 1):
        assert analysis.catastrophic_threat(scn, "rnd", nu, xi, edges) == pytest.approx(
            tail(pmf_exact, nu), abs=TOL)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.data())
def test_more_wiretap_edges_never_expose_less(seed, data):
    scn, spec, hubs, xi = next(iter(_cases(1, seed)))
    all_edges = sorted(scn.topology.capacities)
    small = set(data.draw(st.lists(st.sampled_from(all_edges), max_size=3)))
    big = small | set(data.draw(st.lists(st.sampled_from(all_edges), max_size=3)))
    try:
        for pol, model in (("opt", CONDITIONAL), ("rnd", UNIFORM), ("rnd", CONDITIONAL)):
            lo = analysis.expected_wiretap_paths(scn, pol, xi, small, model)
            hi = analysis.expected_wiretap_paths(scn, pol, xi, big, model)
            assert -TOL <= lo <= hi + TOL and hi <= xi + TOL
    except AnalysisError:
        pass  # no outcome admits xi paths


# -- degenerate scenarios -------------------------------------------------------------------

def test_all_available_collapses_to_shortest():
    spec = [(0, 3, 1.0, 2), (1, 1, 1.0, 3), (2, 2, 1.0, 2), (3, 2, 1.0, 4), (4, 5, 1.0, 2)]
    scn = hub_scenario(spec, tapped_hubs=[2])
    # table order: 1 (d1), 2 (d2), 3 (d2), 0 (d3), 4 (d5); tapped ids {0, 2, 4}
    for xi, want in ((1, 0), (2, 1), (3, 1), (4, 2), (5, 3)):
        assert analysis.expected_wiretap_paths_opt(scn, xi) == want
        assert analysis.catastrophic_threat(scn, "opt", want or 1, xi, [(0, 2)]) == (1.0 if want else 0.0)


def test_empty_wiretap_set_exposes_nothing(nsfnet):
    for pol in ("opt", "rnd"):
        rep = analysis.exposure(nsfnet, pol, 4, 2, [])
        assert rep.expected_wiretap_paths == rep.lam == rep.lam_star == 0.0
        assert rep.theta_eavesdrop == rep.theta_jam == 0.0


def test_xi_out_of_range(three_path):
    with pytest.raises(AnalysisError):
        analysis.expected_wiretap_paths_opt(three_path, 4)


# -- block counts ---------------------------------------------------------------------------

def test_attacked_blocks():
    assert analysis.attacked_blocks(2, 20, 4) == 10
    assert analysis.attacked_blocks(0, 20, 4) == 0
    assert analysis.attacked_blocks(4, 20, 4) == 20
    assert analysis.attacked_blocks_per_generation(4, 4) == 1.0
    assert analysis.attacked_blocks_per_generation(2, 8) == 0.25
    with pytest.raises(AnalysisError):
        analysis.attacked_blocks(1, 20, 0)


def test_recommend_redundancy():
    assert analysis.recommend_redundancy(0, 20, 4) == (0, 1)
    assert analysis.recommend_redundancy(1, 20, 5) == (4, 5)
    assert analysis.recommend_redundancy(2, 20, 4) == (10, 11)


def test_opt_with_one_redundant_block_exposes_a_full_generation(nsfnet):
    rep = analysis.exposure(nsfnet, "opt", 4, 1, [(2, 5)])
    assert rep.lam_star >= 1.0


def test_exposure_report_consistency(nsfnet):
    rep = analysis.exposure(nsfnet, Policy.RND, 4, 3, [(2, 5)], M=20)
    assert rep.xi == 7
    assert rep.lam == pytest.approx(20 * rep.expected_wiretap_paths / 7)
    assert rep.lambda_fraction == pytest.approx(rep.lam / 20)
    assert rep.theta_jam == pytest.approx(analysis.catastrophic_threat(nsfnet, "rnd", 4, 7, (2, 5)))


def test_selection_policy():
    assert SelectionPolicy("opt", 3).kind is Policy.OPT
    with pytest.raises(AnalysisError):
        SelectionPolicy("rnd", 0)
    with pytest.raises(ValueError):
        SelectionPolicy("best", 1)
