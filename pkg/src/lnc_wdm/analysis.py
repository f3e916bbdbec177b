"""Exact exposure metrics by enumerating every availability outcome.

All ``2^N`` subsets of the candidate paths are enumerated once per path
table (N <= MAX_ENUM_PATHS). Each outcome carries its probability and the
paths each selection policy would use in it, and every metric is a
compensated sum over those outcomes.

Two models of random selection are provided:

``conditional``
    the published closed form: average over ``xi``-subsets weighted by the
    probability that exactly that subset is available.
``uniform``
    the operational process the simulator runs: ``xi`` paths drawn
    uniformly from whatever ``N >= xi`` paths are available.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .netmodel import Edge, Path, PathTable, Scenario, path_is_wiretapped

MAX_ENUM_PATHS = 22

CONDITIONAL = "conditional"
UNIFORM = "uniform"
RND_MODELS = (CONDITIONAL, UNIFORM)


class AnalysisError(ValueError):
    pass


class Policy(str, Enum):
    OPT = "opt"
    RND = "rnd"


@dataclass(frozen=True)
class SelectionPolicy:
    kind: Policy
    xi: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Policy(self.kind))
        if self.xi < 1:
            raise AnalysisError(f"xi must be >= 1, got {self.xi}")


@dataclass(frozen=True)
class PathCombination:
    universe: tuple[int, ...]
    members: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        if not self.members <= set(self.universe):
            raise AnalysisError("combination members must come from the universe")

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(self.universe) - self.members


# -- availability combinatorics ---------------------------------------------------

def combo_probability(probs: Sequence[float], members: Iterable[int]) -> float:
    """P(exactly the paths in ``members`` are up, all others down).

    ``probs`` lists availability per path of the universe; ``members`` are
    positions into it.
    """
    members = set(members)
    if not members <= set(range(len(probs))):
        raise AnalysisError("member index outside the universe")
    return math.prod(p if i in members else 1.0 - p for i, p in enumerate(probs))


@dataclass(frozen=True, eq=False)
class _Outcomes:
    """Every availability outcome of a universe of N paths."""

    avail: np.ndarray      # (2^N, N) bool, column l = path l up
    prob: np.ndarray       # (2^N,) outcome probability
    count: np.ndarray      # (2^N,) number of available paths
    n_paths: int


def _check_probs(probs) -> tuple[float, ...]:
    probs = tuple(float(p) for p in probs)
    if len(probs) > MAX_ENUM_PATHS:
        raise AnalysisError(
            f"exact enumeration supports at most {MAX_ENUM_PATHS} paths, got {len(probs)}"
        )
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise AnalysisError("availability probabilities must lie in [0, 1]")
    return probs


@lru_cache(maxsize=16)
def _outcomes(probs: tuple[float, ...]) -> _Outcomes:
    n = len(probs)
    masks = np.arange(1 << n, dtype=np.int64)
    avail = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    prob = np.ones(1 << n)
    for l, p in enumerate(probs):
        prob *= np.where(avail[:, l], p, 1.0 - p)
    count = avail.sum(axis=1)
    for arr in (avail, prob, count):
        arr.setflags(write=False)
    return _Outcomes(avail, prob, count, n)


def _fsum(x: np.ndarray) -> float:
    return math.fsum(x.tolist())


def availability_distribution(probs: Sequence[float]) -> np.ndarray:
    """``out[j]`` = P(exactly j of the paths are available), j = 0..N."""
    oc = _outcomes(_check_probs(probs))
    return np.array([_fsum(oc.prob[oc.count == j]) for j in range(oc.n_paths + 1)])


def prob_n_available(probs: Sequence[float], j: int) -> float:
    probs = _check_probs(probs)
    if not 0 <= j <= len(probs):
        raise AnalysisError(f"j must be in [0, {len(probs)}], got {j}")
    oc = _outcomes(probs)
    return _fsum(oc.prob[oc.count == j])


def blocking_probability(probs: Sequence[float], xi: int) -> float:
    """P(fewer than ``xi`` paths are available)."""
    probs = _check_probs(probs)
    if not 1 <= xi <= len(probs):
        raise AnalysisError(f"xi must be in [1, {len(probs)}], got {xi}")
    oc = _outcomes(probs)
    return _fsum(oc.prob[oc.count < xi])


# -- wiretap paths ------------------------------------------------------------------

def wiretap_path_count(combination: Iterable[Path], wiretap_edges: Iterable[Edge]) -> int:
    w = frozenset(wiretap_edges)
    return sum(path_is_wiretapped(p, w) for p in combination)


def _as_table(obj) -> PathTable:
    if isinstance(obj, Scenario):
        return obj.paths
    if isinstance(obj, PathTable):
        return obj
    raise TypeError(f"expected Scenario or PathTable, got {type(obj).__name__}")


@lru_cache(maxsize=64)
def _opt_selection(probs: tuple[float, ...], xi: int) -> np.ndarray:
    """(2^N, N) bool: paths P-OPT uses in each outcome (first xi available)."""
    oc = _outcomes(probs)
    sel = oc.avail & (np.cumsum(oc.avail, axis=1) <= xi)
    sel[oc.count < xi] = False
    sel.setflags(write=False)
    return sel


@dataclass(frozen=True)
class _Distribution:
    """Distribution of the number of wiretap paths used, given not blocked."""

    pmf: np.ndarray        # pmf[v] = P(y = v | not blocked), v = 0..xi
    mean: float

    def tail(self, nu: int) -> float:
        if nu > len(self.pmf) - 1:
            return 0.0
        return min(1.0, math.fsum(self.pmf[max(nu, 0):].tolist()))


def _wiretap_distribution(table: PathTable, wiretap_edges, xi: int, policy: Policy,
                          rnd_model: str = CONDITIONAL) -> _Distribution:
    probs = _check_probs(table.availabilities)
    n = len(probs)
    if not 1 <= xi <= n:
        raise AnalysisError(f"xi must be in [1, {n}], got {xi}")
    oc = _outcomes(probs)
    q = table.wiretap_mask(wiretap_edges)
    policy = Policy(policy)

    if policy is Policy.OPT or rnd_model == UNIFORM:
        valid = oc.count >= xi
        norm = _fsum(oc.prob[valid])
    elif rnd_model == CONDITIONAL:
        valid = oc.count == xi
        norm = _fsum(oc.prob[valid])
    else:
        raise AnalysisError(f"unknown random-selection model {rnd_model!r}")
    if norm <= 0.0:
        raise AnalysisError(f"no availability outcome admits {xi} paths; expectation undefined")

    prob = oc.prob[valid]
    pmf = np.zeros(xi + 1)
    if policy is Policy.OPT or rnd_model == CONDITIONAL:
        avail = _opt_selection(probs, xi)[valid] if policy is Policy.OPT else oc.avail[valid]
        y = (avail & q).sum(axis=1)
        for v in range(xi + 1):
            pmf[v] = _fsum(prob[y == v]) / norm
    else:
        n_avail = oc.count[valid]
        n_tapped = (oc.avail[valid] & q).sum(axis=1)
        # Weight of y = v given (N, w) is hypergeometric.
        key = n_avail * (n + 1) + n_tapped
        for kv in np.unique(key):
            N, w = divmod(int(kv), n + 1)
            mass = _fsum(prob[key == kv]) / norm
            tot = math.comb(N, xi)
            for v in range(max(0, xi - (N - w)), min(w, xi) + 1):
                pmf[v] += mass * math.comb(w, v) * math.comb(N - w, xi - v) / tot
    mean = math.fsum(v * pmf[v] for v in range(xi + 1))
    return _Distribution(pmf, mean)


def expected_wiretap_paths_opt(scenario, xi: int, wiretap_edges=None) -> float:
    """Mean wiretap paths used when the ``xi`` lowest-delay available paths carry the data."""
    table = _as_table(scenario)
    if wiretap_edges is None:
        wiretap_edges = scenario.attack.wiretap_edges
    return _wiretap_distribution(table, wiretap_edges, xi, Policy.OPT).mean


def expected_wiretap_paths_rnd(scenario, xi: int, wiretap_edges=None,
                               model: str = CONDITIONAL) -> float:
    table = _as_table(scenario)
    if wiretap_edges is None:
        wiretap_edges = scenario.attack.wiretap_edges
    return _wiretap_distribution(table, wiretap_edges, xi, Policy.RND, model).mean


def expected_wiretap_paths(scenario, policy, xi: int, wiretap_edges=None,
                           rnd_model: str = CONDITIONAL) -> float:
    if Policy(policy) is Policy.OPT:
        return expected_wiretap_paths_opt(scenario, xi, wiretap_edges)
    return expected_wiretap_paths_rnd(scenario, xi, wiretap_edges, rnd_model)


def attacked_blocks(y: float, M: int, xi: int) -> float:
    """Blocks of an M-block secret seen on ``y`` wiretap paths out of ``xi``."""
    if xi <= 0:
        raise AnalysisError("xi must be positive")
    return M * y / xi


def attacked_blocks_per_generation(y: float, k: int) -> float:
    if k < 1:
        raise AnalysisError("k must be >= 1")
    return y / k


def recommend_redundancy(y: float, M: int, xi: int) -> tuple[int, int]:
    """Redundant-block budget for a secret and the per-generation jam threshold.

    Returns ``(r, nu)`` where ``r = ceil(M * y / xi)`` and ``nu = r + 1`` is
    the number of blocks a jammer must hit in one generation to defeat it.
    """
    lam = attacked_blocks(y, M, xi)
    r = math.ceil(round(lam, 9))
    return r, r + 1


def catastrophic_threat(scenario, policy, nu: int, xi: int, edges,
                        rnd_model: str = CONDITIONAL) -> float:
    """P(at least ``nu`` of the ``xi`` used paths cross the attacked edge(s)).

    ``edges`` is normally a single edge; a collection is accepted and
    treated as one wiretap set. ``nu > xi`` gives 0.
    """
    table = _as_table(scenario)
    if isinstance(edges, tuple) and len(edges) == 2 and all(isinstance(v, int) for v in edges):
        edges = [edges]
    if nu < 1:
        raise AnalysisError(f"nu must be >= 1, got {nu}")
    if nu > xi:
        return 0.0
    return _wiretap_distribution(table, edges, xi, Policy(policy), rnd_model).tail(nu)


@dataclass(frozen=True)
class ExposureReport:
    policy: Policy
    k: int
    r: int
    xi: int
    M: int
    expected_wiretap_paths: float
    blocking: float
    lam: float
    lam_star: float
    theta_eavesdrop: float
    theta_jam: float

    @property
    def lambda_fraction(self) -> float:
        return self.lam / self.M


def exposure(scenario, policy, k: int, r: int, wiretap_edges, M: int = 20,
             rnd_model: str = CONDITIONAL) -> ExposureReport:
    """All analytical metrics for one policy, generation size and attacked set.

    The same edge set is evaluated as eavesdropped (``theta_eavesdrop``,
    threshold k) and as jammed (``theta_jam``, threshold r + 1).
    """
    table = _as_table(scenario)
    xi = k + r
    dist = _wiretap_distribution(table, wiretap_edges, xi, Policy(policy), rnd_model)
    y = dist.mean
    return ExposureReport(
        policy=Policy(policy), k=k, r=r, xi=xi, M=M,
        expected_wiretap_paths=y,
        blocking=blocking_probability(table.availabilities, xi),
        lam=attacked_blocks(y, M, xi),
        lam_star=attacked_blocks_per_generation(y, k),
        theta_eavesdrop=dist.tail(k),
        theta_jam=dist.tail(r + 1),
    )
