"""Network, candidate paths and attacked edges.

Scenarios live in INI files with four sections::

    [scenario]
    name = toy
    source = 0
    destination = 3

    [nodes]
    ids = 0 1 2 3

    [edges]
    # tail-head = capacity in wavelengths
    0-1 = 2

    [paths]
    # id = delay availability route
    0 = 2 0.9 0-1-3

    [attack]
    eavesdrop = 1-3
    jam =

Edges are directed and written ``tail-head``. A path route is the node
sequence from source to destination.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

Edge = tuple[int, int]


class ScenarioError(ValueError):
    """Scenario failed to parse or validate; ``issues`` lists every problem."""

    def __init__(self, issues: list["Issue"], origin: str = "<scenario>"):
        self.issues = issues
        self.origin = origin
        lines = "\n".join(f"  {i}" for i in issues)
        super().__init__(f"invalid scenario {origin}:\n{lines}")


@dataclass(frozen=True)
class Issue:
    field: str
    message: str
    line: int | None = None

    def __str__(self):
        where = f" (line {self.line})" if self.line else ""
        return f"{self.field}{where}: {self.message}"


def format_edge(e: Edge) -> str:
    return f"{e[0]}-{e[1]}"


def parse_edge(text: str) -> Edge:
    m = re.fullmatch(r"\s*(\d+)\s*-\s*(\d+)\s*", text)
    if not m:
        raise ValueError(f"bad edge {text!r}, expected tail-head")
    return int(m.group(1)), int(m.group(2))


def parse_edge_list(text: str) -> list[Edge]:
    return [parse_edge(tok) for tok in re.split(r"[\s,]+", text.strip()) if tok]


@dataclass(frozen=True)
class Topology:
    nodes: tuple[int, ...]
    capacities: Mapping[Edge, int]
    source: int
    destination: int

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(self.capacities)

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for (u, v), c in self.capacities.items():
            g.add_edge(u, v, capacity=c)
        return g

    def __hash__(self):
        return hash((self.nodes, tuple(sorted(self.capacities.items())),
                     self.source, self.destination))

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.nodes == other.nodes and dict(self.capacities) == dict(other.capacities)
                and self.source == other.source and self.destination == other.destination)


@dataclass(frozen=True)
class Path:
    id: int
    edges: tuple[Edge, ...]
    delay: float
    availability: float

    @property
    def nodes(self) -> tuple[int, ...]:
        return (self.edges[0][0],) + tuple(v for _, v in self.edges)

    @classmethod
    def from_nodes(cls, id: int, nodes: Iterable[int], delay: float, availability: float):
        nodes = list(nodes)
        return cls(id, tuple(zip(nodes[:-1], nodes[1:])), delay, availability)


@dataclass(frozen=True)
class PathTable:
    """Candidate paths in ascending delay order; equal delays keep id order."""

    paths: tuple[Path, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.paths, key=lambda p: (p.delay, p.id)))
        object.__setattr__(self, "paths", ordered)

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def __getitem__(self, i):
        return self.paths[i]

    @property
    def availabilities(self) -> np.ndarray:
        return np.array([p.availability for p in self.paths], dtype=float)

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths], dtype=float)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self.paths)

    def wiretap_mask(self, wiretap_edges: Iterable[Edge]) -> np.ndarray:
        """Boolean vector, one entry per path in table order."""
        w = frozenset(wiretap_edges)
        return np.array([path_is_wiretapped(p, w) for p in self.paths], dtype=bool)


@dataclass(frozen=True)
class AttackScenario:
    eavesdrop_edges: frozenset[Edge] = frozenset()
    jam_edges: frozenset[Edge] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "eavesdrop_edges", frozenset(self.eavesdrop_edges))
        object.__setattr__(self, "jam_edges", frozenset(self.jam_edges))
        both = self.eavesdrop_edges & self.jam_edges
        if both:
            raise ValueError(
                "an edge cannot be both eavesdropped and jammed: "
                + ", ".join(format_edge(e) for e in sorted(both))
            )

    @property
    def wiretap_edges(self) -> frozenset[Edge]:
        return self.eavesdrop_edges | self.jam_edges

    def wiretap_links(self, topology: Topology) -> int:
        """Total attacked wavelengths: every wavelength of every attacked edge."""
        return sum(topology.capacities[e] for e in self.wiretap_edges)


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: Topology
    paths: PathTable
    attack: AttackScenario
    description: str = ""

    @property
    def num_paths(self) -> int:
        return len(self.paths)


# -- indicator functions --------------------------------------------------------

def link_on_path(topology: Topology, edge: Edge, wavelength: int, path: Path) -> int:
    """1 if wavelength ``wavelength`` (1-based) of ``edge`` lies on ``path``.

    An attacker on an edge reads every wavelength, so membership is decided
    per edge and the wavelength index only has to exist.
    """
    if edge not in topology.capacities:
        raise KeyError(f"edge {format_edge(edge)} not in topology")
    if not 1 <= wavelength <= topology.capacities[edge]:
        raise KeyError(f"edge {format_edge(edge)} has no wavelength {wavelength}")
    return int(edge in path.edges)


def path_is_wiretapped(path: Path, wiretap_edges: Iterable[Edge]) -> int:
    """1 if ``path`` crosses any wiretap edge; a path counts once at most."""
    w = wiretap_edges if isinstance(wiretap_edges, (set, frozenset)) else set(wiretap_edges)
    return int(any(e in w for e in path.edges))


def max_flow(topology: Topology) -> int:
    return int(nx.maximum_flow_value(topology.graph(), topology.source,
                                     topology.destination, capacity="capacity"))


def min_cut_check(topology: Topology, n: int) -> bool:
    return max_flow(topology) >= n


# -- config I/O -------------------------------------------------------------------

def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Map (section, key) to its 1-based line number; key None marks the header."""
    index: dict[tuple[str, str | None], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip().lower()), no)
    return index


def parse_scenario(text: str, origin: str = "<scenario>") -> Scenario:
    """Parse and validate scenario text; raises :class:`ScenarioError`."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ScenarioError([Issue("<syntax>", str(exc).splitlines()[0], line)], origin) from exc

    lines = _line_index(text)
    issues: list[Issue] = []

    def bad(section, key, msg, fieldpath=None):
        issues.append(Issue(fieldpath or f"{section}.{key}", msg,
                            lines.get((section, key)) or lines.get((section, None))))

    for sec in ("scenario", "nodes", "edges", "paths", "attack"):
        if not cp.has_section(sec):
            issues.append(Issue(sec, "missing section"))
    if issues:
        raise ScenarioError(issues, origin)

    meta = cp["scenario"]
    name = meta.get("name", "").strip() or "scenario"
    description = meta.get("description", "").strip()
    src = dst = None
    for key in ("source", "destination"):
        try:
            val = int(meta[key])
        except KeyError:
            bad("scenario", key, "missing")
            continue
        except ValueError:
            bad("scenario", key, f"not an integer: {meta[key]!r}")
            continue
        if key == "source":
            src = val
        else:
            dst = val

    try:
        nodes = tuple(int(t) for t in cp["nodes"].get("ids", "").split())
    except ValueError:
        bad("nodes", "ids", "node ids must be integers")
        nodes = ()
    if not nodes:
        bad("nodes", "ids", "no nodes declared")
    if len(set(nodes)) != len(nodes):
        bad("nodes", "ids", "duplicate node ids")
    node_set = set(nodes)
    for key, val in (("source", src), ("destination", dst)):
        if val is not None and node_set and val not in node_set:
            bad("scenario", key, f"node {val} not declared")
    if src is not None and src == dst:
        bad("scenario", "destination", "source and destination coincide")

    capacities: dict[Edge, int] = {}
    for key, val in cp["edges"].items():
        try:
            e = parse_edge(key)
        except ValueError as exc:
            bad("edges", key, str(exc))
            continue
        try:
            c = int(val)
        except ValueError:
            bad("edges", key, f"capacity not an integer: {val!r}", f"edges.{key}.capacity")
            continue
        if c < 1:
            bad("edges", key, f"capacity must be >= 1, got {c}", f"edges.{key}.capacity")
        if e[0] == e[1]:
            bad("edges", key, "self-loop")
        for v in e:
            if node_set and v not in node_set:
                bad("edges", key, f"node {v} not declared")
        if e in capacities:
            bad("edges", key, "duplicate edge")
        capacities[e] = c

    paths = []
    seen_ids = set()
    for key, val in cp["paths"].items():
        fp = f"paths.{key}"
        try:
            pid = int(key)
        except ValueError:
            bad("paths", key, "path id must be an integer", fp + ".id")
            continue
        if pid in seen_ids:
            bad("paths", key, "duplicate path id", fp + ".id")
        seen_ids.add(pid)
        parts = val.split()
        if len(parts) != 3:
            bad("paths", key, "expected 'delay availability route'", fp)
            continue
        try:
            delay = float(parts[0])
        except ValueError:
            bad("paths", key, f"delay not a number: {parts[0]!r}", fp + ".delay")
            continue
        try:
            prob = float(parts[1])
        except ValueError:
            bad("paths", key, f"availability not a number: {parts[1]!r}", fp + ".availability")
            continue
        try:
            route = [int(t) for t in parts[2].split("-")]
        except ValueError:
            bad("paths", key, f"route must be dash-separated node ids: {parts[2]!r}", fp + ".route")
            continue
        if not delay > 0:
            bad("paths", key, f"delay must be positive, got {delay}", fp + ".delay")
        if not 0.0 <= prob <= 1.0:
            bad("paths", key, f"availability {prob} outside [0, 1]", fp + ".availability")
        if len(route) < 2:
            bad("paths", key, "route needs at least two nodes", fp + ".route")
            continue
        if src is not None and route[0] != src:
            bad("paths", key, f"route starts at {route[0]}, not source {src}", fp + ".route")
        if dst is not None and route[-1] != dst:
            bad("paths", key, f"route ends at {route[-1]}, not destination {dst}", fp + ".route")
        if len(set(route)) != len(route):
            bad("paths", key, "route revisits a node", fp + ".route")
        path = Path.from_nodes(pid, route, delay, prob)
        for e in path.edges:
            if e not in capacities:
                bad("paths", key, f"edge {format_edge(e)} not declared in [edges]", fp + ".route")
        paths.append(path)
    if not paths:
        issues.append(Issue("paths", "no paths declared", lines.get(("paths", None))))

    # Each path holds one wavelength on each of its edges.
    load: dict[Edge, int] = {}
    for p in paths:
        for e in p.edges:
            load[e] = load.get(e, 0) + 1
    for e, used in sorted(load.items()):
        if e in capacities and used > capacities[e]:
            key = format_edge(e)
            bad("edges", key, f"{used} paths share an edge of capacity {capacities[e]}",
                f"edges.{key}.capacity")

    attack_sets = {}
    for key in ("eavesdrop", "jam"):
        try:
            es = parse_edge_list(cp["attack"].get(key, ""))
        except ValueError as exc:
            bad("attack", key, str(exc), f"attack.{key}")
            es = []
        for e in es:
            if e not in capacities:
                bad("attack", key, f"edge {format_edge(e)} not in topology", f"attack.{key}")
        attack_sets[key] = frozenset(es)
    overlap = attack_sets["eavesdrop"] & attack_sets["jam"]
    if overlap:
        bad("attack", "jam", "edges both eavesdropped and jammed: "
            + ", ".join(format_edge(e) for e in sorted(overlap)), "attack.jam")

    if issues:
        raise ScenarioError(issues, origin)
    return Scenario(
        name=name,
        topology=Topology(nodes, dict(capacities), src, dst),
        paths=PathTable(tuple(paths)),
        attack=AttackScenario(attack_sets["eavesdrop"], attack_sets["jam"]),
        description=description,
    )


def load_scenario(source) -> Scenario:
    """Load from a path, or from a bundled scenario name such as ``"nsfnet"``."""
    p = FsPath(source)
    if not p.exists() and not p.suffix and "/" not in str(source):
        return parse_scenario(bundled_text(str(source)), f"<bundled {source}>")
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError([Issue("<file>", str(exc))], str(source)) from exc
    return parse_scenario(text, str(source))


def bundled_text(name: str) -> str:
    try:
        return resources.files(__package__).joinpath("scenarios").joinpath(f"{name}.cfg").read_text()
    except FileNotFoundError as exc:
        raise ScenarioError([Issue("<file>", f"no bundled scenario named {name!r}")],
                            name) from exc


def bundled_path(name: str = "nsfnet"):
    return resources.files(__package__).joinpath("scenarios").joinpath(f"{name}.cfg")


def dump_scenario(scn: Scenario) -> str:
    top = scn.topology
    out = ["[scenario]", f"name = {scn.name}"]
    if scn.description:
        out.append(f"description = {scn.description}")
    out += [f"source = {top.source}", f"destination = {top.destination}", "",
            "[nodes]", "ids = " + " ".join(str(n) for n in top.nodes), "",
            "[edges]"]
    out += [f"{format_edge(e)} = {c}" for e, c in top.capacities.items()]
    out += ["", "[paths]"]
    for p in sorted(scn.paths, key=lambda p: p.id):
        route = "-".join(str(v) for v in p.nodes)
        out.append(f"{p.id} = {p.delay!r} {p.availability!r} {route}")
    out += ["", "[attack]",
            "eavesdrop = " + " ".join(format_edge(e) for e in sorted(scn.attack.eavesdrop_edges)),
            "jam = " + " ".join(format_edge(e) for e in sorted(scn.attack.jam_edges)), ""]
    return "\n".join(out)


def save_scenario(scn: Scenario, dest) -> None:
    FsPath(dest).write_text(dump_scenario(scn))


@dataclass
class ValidationReport:
    origin: str
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def render(self) -> str:
        out = [f"scenario {self.origin}"]
        for name, passed, detail in self.checks:
            mark = "PASS" if passed else "FAIL"
            out.append(f"  [{mark}] {name}" + (f": {detail}" if detail else ""))
        out.append("result: " + ("pass" if self.ok else "fail"))
        return "\n".join(out)


def validate(source, xi: int | None = None) -> ValidationReport:
    """Run every scenario check plus the min-cut bound for ``xi`` paths.

    ``xi`` defaults to the number of declared paths. Failures are report
    content, never exceptions.
    """
    report = ValidationReport(str(source))
    try:
        scn = load_scenario(source)
    except ScenarioError as exc:
        for issue in exc.issues:
            report.checks.append((issue.field, False, str(issue)))
        return report
    report.checks.append(("parse and field invariants", True,
                          f"{scn.num_paths} paths, {len(scn.topology.capacities)} edges"))
    load = {e: 0 for e in scn.topology.capacities}
    for p in scn.paths:
        for e in p.edges:
            load[e] += 1
    spare = min(scn.topology.capacities[e] - u for e, u in load.items())
    report.checks.append(("wavelength capacity covers every path", spare >= 0,
                          f"minimum spare wavelengths {spare}"))
    xi = scn.num_paths if xi is None else xi
    flow = max_flow(scn.topology)
    report.checks.append((f"min-cut >= {xi}", flow >= xi, f"max-flow {flow}"))
    return report
