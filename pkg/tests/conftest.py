import sys
import random

import pytest

from lnc_wdm.netmodel import (AttackScenario, Path, PathTable, Scenario, Topology,
                              load_scenario)


def hub_scenario(paths, tapped_hubs=(), name="toy"):
    """Source 0, destination 1; path ``i`` runs 0 -> hub -> 1.

    ``paths`` is a list of (id, delay, p, hub) with hubs >= 2. Paths through
    the same hub share both of its edges, so tapping ``(0, hub)`` taps them all.
    """
    usage = {}
    built = []
    for pid, delay, p, hub in paths:
        route = Path.from_nodes(pid, (0, hub, 1), delay, p)
        for e in route.edges:
            usage[e] = usage.get(e, 0) + 1
        built.append(route)
    nodes = tuple(sorted({0, 1} | {h for *_, h in paths}))
    topo = Topology(nodes, usage, 0, 1)
    attack = AttackScenario(eavesdrop_edges=frozenset((0, h) for h in tapped_hubs))
    return Scenario(name, topo, PathTable(tuple(built)), attack)


def random_hub_scenario(rng: random.Random, n_paths: int):
    hubs = list(range(2, 2 + max(1, n_paths // 2)))
    spec = []
    for pid in range(n_paths):
        p = rng.choice([0.0, 1.0]) if rng.random() < 0.1 else round(rng.uniform(0.05, 0.95), 3)
        spec.append((pid, rng.randint(1, 4), p, rng.choice(hubs)))
    used = sorted({h for *_, h in spec})
    tapped = rng.sample(used, rng.randint(0, len(used)))
    return hub_scenario(spec, tapped), spec, tapped


def tapped_ids(spec, tapped_hubs):
    return {pid for pid, _, _, h in spec if h in tapped_hubs}


@pytest.fixture(scope="session")
def nsfnet():
    return load_scenario("nsfnet")


@pytest.fixture
def three_path():
    # p = 0.9/0.8/0.7, delays 1/2/3; the shortest path alone is tapped.
    return hub_scenario([(0, 1, 0.9, 2), (1, 2, 0.8, 3), (2, 3, 0.7, 4)], tapped_hubs=[2])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
