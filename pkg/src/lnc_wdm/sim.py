"""Seeded Monte Carlo of path availability, selection and attacks.

Trials are processed in fixed-size chunks. Chunk ``c`` draws from its own
generator seeded with ``SeedSequence(seed, spawn_key=(c,))``, so the result
depends only on the seed and the configuration, never on how chunks are
scheduled. Per-metric statistics are integer sums and merge exactly.

Two execution modes share the same availability and selection draws:

* counting (default): one coded block per path per generation, so the
  attacker's share of every generation is the number of wiretap paths used;
* codec: every generation is really encoded, and the receiver and the
  eavesdropper really decode whatever reaches them (slow; for checks).
"""
from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import analysis
from .analysis import Policy
from .codec import (CodecError, Encoder, GenerationParams, InsufficientRankError,
                    decode_blocks, num_generations)
from .gf import FieldSpec, field_for
from .netmodel import AttackScenario, Scenario

CHUNK = 4096
Z95 = 1.959963984540054

METRICS = ("lambda_fraction", "lambda_star", "theta_eavesdrop", "theta_jam", "blocking")
BINARY = {"theta_eavesdrop", "theta_jam", "blocking"}


class SimulationError(RuntimeError):
    pass


class Blocked:
    """Fewer than xi paths were available."""

    def __repr__(self):
        return "BLOCKED"


BLOCKED = Blocked()


@dataclass(frozen=True)
class TrialConfig:
    scenario: Scenario
    policy: Policy
    k: int
    r: int = 0
    M: int = 20
    trials: int = 10_000
    seed: int = 0
    attacks: tuple[AttackScenario, ...] = ()
    # Each group is a tuple of attack indices whose eavesdrop/jam success
    # is averaged per trial (eavesdrop_success / jam_success metrics).
    groups: tuple[tuple[int, ...], ...] = ()
    use_codec: bool = False
    block_len: int = 80
    field: FieldSpec = FieldSpec()

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.trials < 1:
            raise SimulationError("trials must be >= 1")
        if self.M < 1:
            raise SimulationError("M must be >= 1")
        GenerationParams(self.k, self.r)
        if self.xi > self.scenario.num_paths:
            raise SimulationError(
                f"xi = {self.xi} exceeds the {self.scenario.num_paths} candidate paths"
            )
        if not self.attacks:
            object.__setattr__(self, "attacks", (self.scenario.attack,))
        for g in self.groups:
            if not g or any(not 0 <= a < len(self.attacks) for a in g):
                raise SimulationError(f"bad attack group {g!r}")

    @property
    def xi(self) -> int:
        return self.k + self.r


@dataclass
class TrialOutcome:
    blocked: bool
    wiretap_paths_used: int = 0
    eavesdropped_per_generation: list[int] = field(default_factory=list)
    jam_disrupted_per_generation: list[int] = field(default_factory=list)
    secret_recovered_by_attacker: bool = False
    decode_failed_at_receiver: bool = False


@dataclass
class Stats:
    """Integer sufficient statistics of an integer-valued sample."""

    n: int = 0
    s1: int = 0
    s2: int = 0

    def add(self, values: np.ndarray) -> None:
        v = values.astype(np.int64)
        self.n += int(v.size)
        self.s1 += int(v.sum())
        self.s2 += int((v * v).sum())

    def merge(self, other: "Stats") -> "Stats":
        return Stats(self.n + other.n, self.s1 + other.s1, self.s2 + other.s2)


@dataclass(frozen=True)
class MetricEstimate:
    mean: float
    low: float
    high: float
    n: int

    @property
    def halfwidth(self) -> float:
        return (self.high - self.low) / 2

    def covers(self, value: float, slack: float = 1e-12) -> bool:
        return self.low - slack <= value <= self.high + slack


def _estimate(st: Stats, scale: float, binary: bool) -> MetricEstimate:
    n = st.n
    if n == 0:
        raise SimulationError("no samples for metric")
    mean = st.s1 / n
    if binary:
        # Wilson score interval; stays non-degenerate at 0 and 1.
        z2 = Z95 * Z95
        centre = (mean + z2 / (2 * n)) / (1 + z2 / n)
        half = Z95 * math.sqrt(mean * (1 - mean) / n + z2 / (4 * n * n)) / (1 + z2 / n)
        low, high = max(0.0, centre - half), min(1.0, centre + half)
    else:
        var = (st.s2 - n * mean * mean) / (n - 1) if n > 1 else 0.0
        half = Z95 * math.sqrt(max(var, 0.0) / n)
        low, high = mean - half, mean + half
    return MetricEstimate(mean * scale, low * scale, high * scale, n)


@dataclass
class SimReport:
    config: TrialConfig
    trials: int
    blocked_trials: int
    metrics: dict[tuple[int, str], MetricEstimate]
    analytical: dict[tuple[int, str], float]

    def group_estimate(self, metric: str, group: int) -> MetricEstimate:
        return self.metrics[(("group", group), metric)]

    def estimate(self, metric: str, attack: int = 0) -> MetricEstimate:
        return self.metrics[(attack, metric)]

    def delta(self, metric: str, attack: int = 0) -> float:
        return self.metrics[(attack, metric)].mean - self.analytical[(attack, metric)]

    def agreement(self) -> dict[tuple[int, str], bool]:
        return {key: est.covers(self.analytical[key]) for key, est in self.metrics.items()}


# -- single-trial operations ----------------------------------------------------------

def sample_availability(probs: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Boolean availability per path, each independent with its own probability."""
    p = np.asarray(probs, dtype=float)
    return rng.random(p.size) < p


def select_paths(policy, available, xi: int, rng: np.random.Generator | None = None):
    """Pick ``xi`` of the available paths, or :data:`BLOCKED`.

    ``available`` is a boolean mask in path-table order (ascending delay, id
    tie-break) or a collection of table positions. OPT takes the first
    ``xi`` available; RND a uniformly random ``xi``-subset.
    """
    avail = np.asarray(available)
    idx = np.flatnonzero(avail) if avail.dtype == bool else np.sort(avail.astype(int))
    if idx.size < xi:
        return BLOCKED
    if Policy(policy) is Policy.OPT:
        return tuple(int(i) for i in idx[:xi])
    if rng is None:
        raise SimulationError("random selection needs an rng")
    return tuple(sorted(int(i) for i in rng.choice(idx, size=xi, replace=False)))


def run_transmission(scenario: Scenario, chosen, k: int, r: int, M: int,
                     attack: AttackScenario, rng: np.random.Generator,
                     block_len: int = 80, spec: FieldSpec = FieldSpec()) -> TrialOutcome:
    """Send an M-block secret over the chosen paths with real coding.

    Coded block ``j`` of every generation travels on ``chosen[j]``. Blocks on
    jammed paths are erased; blocks on eavesdropped paths are copied to the
    attacker. Both sides then try to decode each generation.
    """
    if chosen is BLOCKED:
        return TrialOutcome(blocked=True)
    chosen = list(chosen)
    if len(chosen) != k + r:
        raise SimulationError(f"need {k + r} paths for k={k}, r={r}, got {len(chosen)}")
    table = scenario.paths
    tapped = table.wiretap_mask(attack.eavesdrop_edges)[chosen]
    jammed = table.wiretap_mask(attack.jam_edges)[chosen]
    F = field_for(spec)

    secret = list(rng.integers(0, F.order, size=(M, block_len)).astype(F.dtype))
    enc = Encoder(GenerationParams(k, r), rng, spec)
    coded, count = enc.encode(secret)
    src_gens = [np.stack(secret[g * k:(g + 1) * k]) for g in range(num_generations(M, k))]

    eaves, disrupted = [], []
    recovered = True
    failed = False
    for g, blocks in enumerate(coded):
        truth = src_gens[g]
        captured = [b for b, t in zip(blocks, tapped) if t]
        clean = [b for b, j in zip(blocks, jammed) if not j]
        eaves.append(len(captured))
        disrupted.append(len(blocks) - len(clean))
        try:
            got = decode_blocks(clean, k, F)
            failed |= not np.array_equal(got[: len(truth)], truth)
        except InsufficientRankError:
            failed = True
        try:
            stolen = decode_blocks(captured, k, F)
            recovered &= np.array_equal(stolen[: len(truth)], truth)
        except InsufficientRankError:
            recovered = False
    return TrialOutcome(
        blocked=False,
        wiretap_paths_used=int(np.count_nonzero(tapped | jammed)),
        eavesdropped_per_generation=eaves,
        jam_disrupted_per_generation=disrupted,
        secret_recovered_by_attacker=recovered,
        decode_failed_at_receiver=failed,
    )


# -- vectorised experiment ----------------------------------------------------------------

def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _select_batch(policy: Policy, avail: np.ndarray, xi: int,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Selection masks for a batch of availability rows, plus the blocked flags."""
    count = avail.sum(axis=1)
    blocked = count < xi
    if policy is Policy.OPT:
        sel = avail & (np.cumsum(avail, axis=1) <= xi)
    else:
        # Random priorities; unavailable paths sort last.
        keys = np.where(avail, rng.random(avail.shape), 2.0)
        rank = np.argsort(np.argsort(keys, axis=1, kind="stable"), axis=1, kind="stable")
        sel = avail & (rank < xi)
    sel[blocked] = False
    return sel, blocked


def _run_chunk(args) -> tuple[int, list[tuple[Stats, ...]], list[tuple[Stats, Stats]], Stats]:
    cfg, chunk, size = args
    rng = _chunk_rng(cfg.seed, chunk)
    table = cfg.scenario.paths
    avail = rng.random((size, len(table))) < table.availabilities
    sel, blocked = _select_batch(cfg.policy, avail, cfg.xi, rng)
    block_stats = Stats()
    block_stats.add(blocked)
    ok = ~blocked
    per_attack = []
    flags = []
    if cfg.use_codec:
        outcomes = []
        for i in np.flatnonzero(ok):
            chosen = tuple(int(j) for j in np.flatnonzero(sel[i]))
            trial_rng = np.random.default_rng(
                np.random.SeedSequence(cfg.seed, spawn_key=(chunk, int(i))))
            outcomes.append([run_transmission(cfg.scenario, chosen, cfg.k, cfg.r, cfg.M, a,
                                              trial_rng, cfg.block_len, cfg.field)
                             for a in cfg.attacks])
    for a_idx, attack in enumerate(cfg.attacks):
        if cfg.use_codec:
            outs = [o[a_idx] for o in outcomes]
            y_e = np.array([min(o.eavesdropped_per_generation, default=0) for o in outs],
                           dtype=np.int64)
            stolen = np.array([o.secret_recovered_by_attacker for o in outs], dtype=bool)
            jam_fail = np.array([o.decode_failed_at_receiver for o in outs], dtype=bool)
        else:
            q_e = table.wiretap_mask(attack.eavesdrop_edges)
            q_j = table.wiretap_mask(attack.jam_edges)
            y_e = (sel[ok] & q_e).sum(axis=1)
            y_j = (sel[ok] & q_j).sum(axis=1)
            stolen = y_e >= cfg.k
            jam_fail = y_j >= cfg.r + 1
        st = tuple(Stats() for _ in range(4))
        st[0].add(y_e)          # lambda_fraction, lambda_star share y
        st[1].add(y_e)
        st[2].add(stolen)
        st[3].add(jam_fail)
        per_attack.append(st)
        flags.append((stolen, jam_fail))
    per_group = []
    for g in cfg.groups:
        e_st, j_st = Stats(), Stats()
        e_st.add(sum(flags[a][0].astype(np.int64) for a in g))
        j_st.add(sum(flags[a][1].astype(np.int64) for a in g))
        per_group.append((e_st, j_st))
    return chunk, per_attack, per_group, block_stats


def _analytical(cfg: TrialConfig) -> dict[tuple[int, str], float]:
    out = {}
    blocking = analysis.blocking_probability(cfg.scenario.paths.availabilities, cfg.xi)
    for a_idx, attack in enumerate(cfg.attacks):
        kw = dict(rnd_model=analysis.UNIFORM)
        try:
            e = analysis.exposure(cfg.scenario, cfg.policy, cfg.k, cfg.r,
                                  attack.eavesdrop_edges, cfg.M, **kw)
            j = analysis.exposure(cfg.scenario, cfg.policy, cfg.k, cfg.r,
                                  attack.jam_edges, cfg.M, **kw)
        except analysis.AnalysisError:
            continue
        out[(a_idx, "lambda_fraction")] = e.lambda_fraction
        out[(a_idx, "lambda_star")] = e.lam_star
        out[(a_idx, "theta_eavesdrop")] = e.theta_eavesdrop
        out[(a_idx, "theta_jam")] = j.theta_jam
        out[(a_idx, "blocking")] = blocking
    for g_idx, group in enumerate(cfg.groups):
        for metric, src in (("eavesdrop_success", "theta_eavesdrop"), ("jam_success", "theta_jam")):
            vals = [out.get((a, src)) for a in group]
            if None not in vals:
                out[(("group", g_idx), metric)] = math.fsum(vals) / len(vals)
    return out


def run_experiment(cfg: TrialConfig, executor: Executor | None = None) -> SimReport:
    """Run all trials and summarise them against the analytical values.

    Blocked trials only count toward ``blocking``; every exposure metric is
    averaged over unblocked trials. Random selection is compared with the
    uniform-choice closed form, which is the process simulated here.
    """
    jobs = []
    for chunk in range(math.ceil(cfg.trials / CHUNK)):
        size = min(CHUNK, cfg.trials - chunk * CHUNK)
        jobs.append((cfg, chunk, size))
    results = executor.map(_run_chunk, jobs) if executor else map(_run_chunk, jobs)

    n_att = len(cfg.attacks)
    totals = [[Stats() for _ in range(4)] for _ in range(n_att)]
    gtotals = [(Stats(), Stats()) for _ in cfg.groups]
    blocked = Stats()
    for _, per_attack, per_group, bst in sorted(results, key=lambda r: r[0]):
        blocked = blocked.merge(bst)
        for a in range(n_att):
            totals[a] = [t.merge(s) for t, s in zip(totals[a], per_attack[a])]
        gtotals = [(e.merge(pe), j.merge(pj)) for (e, j), (pe, pj) in zip(gtotals, per_group)]

    if blocked.n - blocked.s1 == 0:
        raise SimulationError(
            f"all {cfg.trials} trials were blocked; exposure metrics are undefined"
        )
    metrics = {}
    for a in range(n_att):
        y, _, stolen, jam = totals[a]
        metrics[(a, "lambda_fraction")] = _estimate(y, 1.0 / cfg.xi, False)
        metrics[(a, "lambda_star")] = _estimate(y, 1.0 / cfg.k, False)
        metrics[(a, "theta_eavesdrop")] = _estimate(stolen, 1.0, True)
        metrics[(a, "theta_jam")] = _estimate(jam, 1.0, True)
        metrics[(a, "blocking")] = _estimate(blocked, 1.0, True)
    for g, (e, j) in enumerate(gtotals):
        size = len(cfg.groups[g])
        metrics[(("group", g), "eavesdrop_success")] = _estimate(e, 1.0 / size, size == 1)
        metrics[(("group", g), "jam_success")] = _estimate(j, 1.0 / size, size == 1)
    return SimReport(cfg, cfg.trials, blocked.s1, metrics, _analytical(cfg))
