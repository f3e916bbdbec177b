"""Command-line front end: parameter sweeps to CSV, and scenario validation.

    lnc-wdm run --scenario nsfnet --mode compare --policy both --k 4 8 --r 0 1 2 3
    lnc-wdm validate nsfnet --xi 11

``run`` is the default subcommand, so ``lnc-wdm --mode analyze`` works too.
Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

from . import __version__, analysis, netmodel, sim
from .analysis import Policy
from .gf import FieldError, default_spec
from .netmodel import AttackScenario, Edge, Scenario, ScenarioError, format_edge

log = logging.getLogger("lnc_wdm")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

MODES = ("analyze", "simulate", "compare")
POLICIES = ("opt", "rnd", "both")
COLUMNS = ("scenario", "policy", "k", "r", "xi", "attack", "metric", "analytical",
           "analytical_uniform", "simulated", "ci_low", "ci_high", "ci_halfwidth", "within_ci")
SUBSET_METRICS = ("lambda_fraction", "lambda_star", "theta_eavesdrop", "theta_jam")


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


@dataclass
class ExperimentSpec:
    scenario: str = "nsfnet"
    mode: str = "analyze"
    policy: str = "both"
    k: tuple[int, ...] = (4, 8)
    r: tuple[int, ...] = (0, 1, 2, 3)
    # None means "the scenario's own eavesdrop and jam edges".
    attack_edges: tuple[Edge, ...] | None = None
    # Sizes of the attacked-edge subsets to evaluate; None means all sizes.
    subset_sizes: tuple[int, ...] | None = None
    trials: int = 100_000
    seed: int = 0
    M: int = 20
    m: int = 8
    rnd_model: str = analysis.CONDITIONAL
    codec: bool = False
    workers: int = 1
    out: str | None = None
    summary: str | None = None

    def check(self) -> None:
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.policy not in POLICIES:
            raise UsageError(f"policy must be one of {', '.join(POLICIES)}, got {self.policy!r}")
        if self.rnd_model not in analysis.RND_MODELS:
            raise UsageError(f"rnd-model must be one of {', '.join(analysis.RND_MODELS)}")
        if not self.k or not self.r:
            raise UsageError("k and r sweeps must be non-empty")
        if min(self.k) < 1:
            raise UsageError("k values must be >= 1")
        if min(self.r) < 0:
            raise UsageError("r values must be >= 0")
        if self.subset_sizes is not None and (not self.subset_sizes or min(self.subset_sizes) < 1):
            raise UsageError("subset sizes must be >= 1")
        if self.trials < 1 or self.M < 1 or self.workers < 1:
            raise UsageError("trials, M and workers must be >= 1")
        try:
            default_spec(self.m)
        except FieldError as exc:
            raise UsageError(str(exc)) from None

    @property
    def policies(self) -> tuple[Policy, ...]:
        return (Policy.OPT, Policy.RND) if self.policy == "both" else (Policy(self.policy),)


@dataclass
class ResultRow:
    scenario: str
    policy: str
    k: int
    r: int
    xi: int
    attack: str
    metric: str
    analytical: float | None = None
    analytical_uniform: float | None = None
    simulated: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    ci_halfwidth: float | None = None
    within_ci: bool | None = None

    def cells(self) -> list[str]:
        out = []
        for name in COLUMNS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


@dataclass
class RunResult:
    rows: list[ResultRow] = field(default_factory=list)
    blocked_trials: dict[str, int] = field(default_factory=dict)

    def agreement(self) -> tuple[int, int]:
        judged = [row.within_ci for row in self.rows if row.within_ci is not None]
        return len(judged), sum(judged)


# -- sweep ------------------------------------------------------------------------

def subset_label(edges: Sequence[Edge]) -> str:
    return "+".join(format_edge(e) for e in edges)


def attack_subsets(edges: Sequence[Edge], sizes=None) -> list[tuple[Edge, ...]]:
    """Non-empty subsets of ``edges``, by size then lexicographically."""
    edges = sorted(set(edges))
    sizes = range(1, len(edges) + 1) if sizes is None else sorted(set(sizes))
    return [c for w in sizes if w <= len(edges) for c in itertools.combinations(edges, w)]


def _resolve(spec: ExperimentSpec) -> tuple[Scenario, list[tuple[Edge, ...]]]:
    try:
        scn = netmodel.load_scenario(spec.scenario)
    except ScenarioError as exc:
        raise ValidationFailure(str(exc)) from None
    edges = spec.attack_edges
    if edges is None:
        edges = tuple(sorted(scn.attack.wiretap_edges))
    unknown = [format_edge(e) for e in edges if e not in scn.topology.capacities]
    if unknown:
        raise ValidationFailure(f"attack edges not in the topology: {' '.join(unknown)}")
    largest = max(spec.k) + max(spec.r)
    if largest > scn.num_paths:
        raise ValidationFailure(
            f"xi = {largest} exceeds the {scn.num_paths} candidate paths of {scn.name}")
    if not netmodel.min_cut_check(scn.topology, largest):
        raise ValidationFailure(
            f"min-cut {netmodel.max_flow(scn.topology)} is below xi = {largest}")
    if spec.subset_sizes is not None and max(spec.subset_sizes) > len(set(edges)):
        raise ValidationFailure(
            f"subset size {max(spec.subset_sizes)} exceeds the {len(set(edges))} attack edges")
    return scn, attack_subsets(edges, spec.subset_sizes)


def _analytic_cells(scn, policy, k, r, M, subsets, rnd_model):
    """{(label, metric): (chosen-model value, uniform-model value)}."""
    out = {}
    for model_idx, model in enumerate((rnd_model, analysis.UNIFORM)):
        vals = {}
        xi = k + r
        vals[("-", "blocking")] = analysis.blocking_probability(scn.paths.availabilities, xi)
        by_size: dict[int, list[tuple[float, float]]] = {}
        for s in subsets:
            rep = analysis.exposure(scn, policy, k, r, s, M, rnd_model=model)
            label = subset_label(s)
            vals[(label, "lambda_fraction")] = rep.lambda_fraction
            vals[(label, "lambda_star")] = rep.lam_star
            vals[(label, "theta_eavesdrop")] = rep.theta_eavesdrop
            vals[(label, "theta_jam")] = rep.theta_jam
            by_size.setdefault(len(s), []).append((rep.theta_eavesdrop, rep.theta_jam))
        for w, pairs in by_size.items():
            vals[(f"w={w}", "eavesdrop_success")] = sum(p[0] for p in pairs) / len(pairs)
            vals[(f"w={w}", "jam_success")] = sum(p[1] for p in pairs) / len(pairs)
        for key, v in vals.items():
            out.setdefault(key, [None, None])[model_idx] = v
    return out


def _sim_cells(scn, spec, policy, k, r, subsets, executor):
    attacks, groups_e, groups_j, sizes = [], [], [], []
    by_size: dict[int, list[int]] = {}
    for i, s in enumerate(subsets):
        attacks += [AttackScenario(eavesdrop_edges=frozenset(s)),
                    AttackScenario(jam_edges=frozenset(s))]
        by_size.setdefault(len(s), []).append(i)
    for w, idx in by_size.items():
        sizes.append(w)
        groups_e.append(tuple(2 * i for i in idx))
        groups_j.append(tuple(2 * i + 1 for i in idx))
    if not attacks:
        attacks = [AttackScenario()]
    cfg = sim.TrialConfig(scn, policy, k, r, M=spec.M, trials=spec.trials, seed=spec.seed,
                          attacks=tuple(attacks), groups=tuple(groups_e + groups_j),
                          use_codec=spec.codec, field=default_spec(spec.m))
    rep = sim.run_experiment(cfg, executor)
    out = {("-", "blocking"): rep.estimate("blocking", 0)}
    for i, s in enumerate(subsets):
        label = subset_label(s)
        for metric in ("lambda_fraction", "lambda_star", "theta_eavesdrop"):
            out[(label, metric)] = rep.estimate(metric, 2 * i)
        out[(label, "theta_jam")] = rep.estimate("theta_jam", 2 * i + 1)
    for g, w in enumerate(sizes):
        out[(f"w={w}", "eavesdrop_success")] = rep.group_estimate("eavesdrop_success", g)
        out[(f"w={w}", "jam_success")] = rep.group_estimate("jam_success", len(sizes) + g)
    return out, rep.blocked_trials


def _cell_keys(subsets) -> list[tuple[str, str]]:
    keys = [("-", "blocking")]
    for s in subsets:
        keys += [(subset_label(s), m) for m in SUBSET_METRICS]
    for w in sorted({len(s) for s in subsets}):
        keys += [(f"w={w}", "eavesdrop_success"), (f"w={w}", "jam_success")]
    return keys


def run(spec: ExperimentSpec) -> RunResult:
    """Execute the Cartesian product of the sweep; rows come back in a fixed order."""
    spec.check()
    scn, subsets = _resolve(spec)
    result = RunResult()
    executor = ProcessPoolExecutor(spec.workers) if spec.workers > 1 else None
    try:
        for policy, k, r in itertools.product(spec.policies, sorted(spec.k), sorted(spec.r)):
            log.info("%s k=%d r=%d", policy.value, k, r)
            ana = sim_cells = None
            if spec.mode in ("analyze", "compare"):
                ana = _analytic_cells(scn, policy, k, r, spec.M, subsets, spec.rnd_model)
            if spec.mode in ("simulate", "compare"):
                sim_cells, blocked = _sim_cells(scn, spec, policy, k, r, subsets, executor)
                result.blocked_trials[f"{policy.value} k={k} r={r}"] = blocked
            for label, metric in _cell_keys(subsets):
                row = ResultRow(scn.name, policy.value, k, r, k + r, label, metric)
                if ana is not None:
                    row.analytical, row.analytical_uniform = ana[(label, metric)]
                if sim_cells is not None:
                    est = sim_cells[(label, metric)]
                    row.simulated, row.ci_low, row.ci_high = est.mean, est.low, est.high
                    row.ci_halfwidth = est.halfwidth
                if ana is not None and sim_cells is not None:
                    # The simulator draws uniformly among available paths.
                    row.within_ci = est.covers(row.analytical_uniform)
                result.rows.append(row)
    finally:
        if executor is not None:
            executor.shutdown()
    return result


def render_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow(row.cells())
    return buf.getvalue()


def summary_document(spec: ExperimentSpec, result: RunResult) -> dict:
    doc = asdict(spec)
    doc.pop("out"), doc.pop("summary"), doc.pop("workers")
    if doc["attack_edges"] is not None:
        doc["attack_edges"] = [format_edge(e) for e in doc["attack_edges"]]
    doc["rows"] = len(result.rows)
    if result.blocked_trials:
        doc["blocked_trials"] = result.blocked_trials
    cells, ok = result.agreement()
    if cells:
        doc["agreement"] = {"cells": cells, "within_ci": ok, "fraction": ok / cells}
    return doc


# -- argument handling ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _edge(text: str) -> Edge:
    try:
        return netmodel.parse_edge(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lnc-wdm", description="Exposure analysis and simulation of "
                "network-coded transmission over parallel WDM paths.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("run", help="sweep k, r, policies and attack subsets; write CSV")
    r.add_argument("--spec", help="experiment file ([experiment] section); flags override it")
    r.add_argument("--scenario", help="scenario file or bundled name (default nsfnet)")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--policy", choices=POLICIES)
    r.add_argument("--k", type=int, nargs="+", help="generation sizes (default 4 8)")
    r.add_argument("--r", type=int, nargs="+", help="redundancy values (default 0 1 2 3)")
    r.add_argument("--attack-edges", type=_edge, nargs="+", metavar="U-V",
                   help="edges whose subsets are attacked (default: the scenario's)")
    r.add_argument("--subset-sizes", type=int, nargs="+", metavar="W",
                   help="only evaluate attacked subsets of these sizes")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--M", type=int, metavar="BLOCKS", help="secret size in blocks (default 20)")
    r.add_argument("--m", type=int, metavar="BITS", help="field width for --codec (default 8)")
    r.add_argument("--rnd-model", choices=analysis.RND_MODELS,
                   help="model for the 'analytical' column under random selection")
    r.add_argument("--codec", action="store_true", default=None,
                   help="really encode and decode in every simulated trial (slow)")
    r.add_argument("--workers", type=int, help="worker processes for simulation")
    r.add_argument("--out", help="CSV destination (default stdout)")
    r.add_argument("--summary", help="also write a JSON summary here")
    r.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario", nargs="?", default="nsfnet")
    v.add_argument("--xi", type=int, help="path count the min-cut must support")
    return p


_INT_LISTS = ("k", "r", "subset_sizes")
_INTS = ("trials", "seed", "M", "m", "workers")


def read_spec_file(path: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read experiment file {path}: {exc}") from None
    if not cp.has_section("experiment"):
        raise UsageError(f"{path}: missing [experiment] section")
    known = {f for f in ExperimentSpec.__dataclass_fields__}
    out = {}
    for raw_key, val in cp["experiment"].items():
        key = raw_key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}: unknown key {raw_key!r}")
        try:
            if key in _INT_LISTS:
                out[key] = tuple(int(t) for t in val.replace(",", " ").split())
            elif key in _INTS:
                out[key] = int(val)
            elif key == "attack_edges":
                out[key] = tuple(netmodel.parse_edge_list(val))
            elif key == "codec":
                out[key] = cp["experiment"].getboolean(raw_key)
            else:
                out[key] = val.strip()
        except ValueError as exc:
            raise UsageError(f"{path}: bad value for {raw_key}: {exc}") from None
    if "scenario" in out and not FsPath(out["scenario"]).is_absolute():
        candidate = FsPath(path).parent / out["scenario"]
        if candidate.exists():
            out["scenario"] = str(candidate)
    return out


def spec_from_args(args) -> ExperimentSpec:
    values = read_spec_file(args.spec) if args.spec else {}
    for name in ExperimentSpec.__dataclass_fields__:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = tuple(v) if isinstance(v, list) else v
    spec = ExperimentSpec(**values)
    spec.check()
    return spec


def _cmd_run(args) -> int:
    spec = spec_from_args(args)
    result = run(spec)
    text = render_csv(result.rows)
    if spec.out:
        FsPath(spec.out).write_text(text)
    else:
        sys.stdout.write(text)
    if spec.summary:
        FsPath(spec.summary).write_text(
            json.dumps(summary_document(spec, result), indent=2, sort_keys=True) + "\n")
    cells, ok = result.agreement()
    if cells:
        log.info("within CI: %d of %d cells (%.1f%%)", ok, cells, 100 * ok / cells)
    return EXIT_OK


def _cmd_validate(args) -> int:
    report = netmodel.validate(args.scenario, args.xi)
    print(report.render())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("run", "validate", "-h", "--help", "--version"):
        argv.insert(0, "run")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_run(args)
    except UsageError as exc:
        print(f"lnc-wdm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        print(f"lnc-wdm: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (sim.SimulationError, analysis.AnalysisError, OSError) as exc:
        print(f"lnc-wdm: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
