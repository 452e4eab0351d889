"""Bundled desk-scale instances for tests, demos, and the CLI.

All four fixtures are deterministic: no ambient randomness, fixed seeds where
any sampling appears.  The coastal40 scenario set is a stylized landfall
corridor (flood levels fall off with distance from a sampled landfall index
along the coast), sized so brute-force and sweep tooling stay fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import Branch, Bus, GridNetwork, Substation
from .scenario_gen import Coastline
from .scenario_model import FloodScenario, FloodScenarioSet

FIXTURE_NAMES = ("tiny3", "star8", "ring12", "coastal40")


@dataclass(frozen=True)
class Fixture:
    name: str
    network: GridNetwork
    scenarios: FloodScenarioSet
    coastline: Coastline | None = None


def make_fixture(name: str) -> Fixture:
    if name == "tiny3":
        return _tiny3()
    if name == "star8":
        return _star8()
    if name == "ring12":
        return _ring12()
    if name == "coastal40":
        return _coastal40()
    raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURE_NAMES}")


def _tiny3() -> Fixture:
    network = GridNetwork(
        buses=(
            Bus("B1", "S1", p_load=1.0, p_gen_min=0.0, p_gen_max=3.0, is_reference=True),
            Bus("B2", "S2", p_load=1.0),
            Bus("B3", "S2", p_gen_min=0.0, p_gen_max=2.0),
        ),
        branches=(
            Branch("L1", "B1", "B2", susceptance=-10.0, flow_limit=1.5),
            Branch("L2", "B2", "B3", susceptance=-10.0, flow_limit=1.5),
        ),
        substations=(Substation("S1", "115_161"), Substation("S2", "115_161")),
    )
    scenarios = FloodScenarioSet(
        scenarios=(
            FloodScenario("w1", 0.5, {"S1": 1, "S2": 1}),
            FloodScenario("w2", 0.5, {}),
        ),
        level_count=3,
        unattainable_level=3,
    )
    return Fixture("tiny3", network, scenarios)


def _star8() -> Fixture:
    # Hub substation feeding three spoke substations; two intra-substation
    # ties exercise branch-status aliasing.  Scenario w2/w3 carry level-3
    # floods, preventable only when the attainability cap is raised to 4.
    network = GridNetwork(
        buses=(
            Bus("B0", "S0", p_load=0.5, p_gen_min=0.0, p_gen_max=6.0, is_reference=True),
            Bus("B1", "S1", p_load=1.0),
            Bus("B2", "S1", p_load=0.8),
            Bus("B3", "S1", p_gen_min=0.0, p_gen_max=1.0),
            Bus("B4", "S2", p_load=1.2),
            Bus("B5", "S2", p_gen_min=0.0, p_gen_max=0.5),
            Bus("B6", "S3", p_load=0.6),
            Bus("B7", "S3", p_load=0.4),
        ),
        branches=(
            Branch("L0", "B0", "B1", susceptance=-8.0, flow_limit=2.0),
            Branch("L1", "B0", "B2", susceptance=-8.0, flow_limit=1.5),
            Branch("L2", "B0", "B4", susceptance=-8.0, flow_limit=1.8),
            Branch("L3", "B0", "B6", susceptance=-8.0, flow_limit=1.2),
            Branch("L4", "B0", "B7", susceptance=-8.0, flow_limit=1.0),
            Branch("L5", "B1", "B3", susceptance=-5.0, flow_limit=1.2),
            Branch("L6", "B2", "B3", susceptance=-5.0, flow_limit=1.2),
            Branch("L7", "B4", "B5", susceptance=-5.0, flow_limit=0.8),
        ),
        substations=(
            Substation("S0", "500", lon=-95.40, lat=29.20),
            Substation("S1", "230", lon=-95.10, lat=29.05),
            Substation("S2", "115_161", lon=-95.65, lat=29.00),
            Substation("S3", "115_161", lon=-95.35, lat=28.80),
        ),
    )
    scenarios = FloodScenarioSet(
        scenarios=(
            FloodScenario("w1", 0.25, {"S1": 2, "S2": 1}),
            FloodScenario("w2", 0.25, {"S2": 3, "S3": 1}),
            FloodScenario("w3", 0.25, {"S0": 1, "S1": 3}),
            FloodScenario("w4", 0.25, {"S3": 2}),
        ),
        level_count=4,
        unattainable_level=3,
    )
    return Fixture("star8", network, scenarios)


def _ring12() -> Fixture:
    subs = ("SA", "SB", "SC", "SD")
    classes = ("115_161", "230", "115_161", "500")
    loads = (0.3, 0.3, 0.3, 0.5, 0.7, 0.0, 0.4, 0.6, 0.2, 0.0, 0.3, 0.4)
    gen_max = (4.0, 0, 0, 0, 0, 1.0, 0, 0, 0, 3.0, 0, 0)
    buses = tuple(
        Bus(
            f"B{i}",
            subs[i // 3],
            p_load=loads[i],
            p_gen_min=0.0,
            p_gen_max=gen_max[i],
            is_reference=(i == 0),
        )
        for i in range(12)
    )
    branches = tuple(
        Branch(f"R{i}", f"B{i}", f"B{(i + 1) % 12}", susceptance=-6.0, flow_limit=1.6)
        for i in range(12)
    )
    coords = {
        "SA": (-96.0, 28.6), "SB": (-95.6, 28.9), "SC": (-95.2, 28.6), "SD": (-95.6, 28.3),
    }
    network = GridNetwork(
        buses=buses,
        branches=branches,
        substations=tuple(
            Substation(s, c, lon=coords[s][0], lat=coords[s][1])
            for s, c in zip(subs, classes)
        ),
    )
    scenarios = FloodScenarioSet(
        scenarios=(
            FloodScenario("w1", 0.4, {"SA": 1}),
            FloodScenario("w2", 0.35, {"SB": 2, "SC": 1}),
            FloodScenario("w3", 0.25, {"SD": 3, "SC": 2}),
        ),
        level_count=4,
        unattainable_level=3,
    )
    return Fixture("ring12", network, scenarios)


COASTAL40_COASTLINE = Coastline(
    (
        (-97.40, 26.10),
        (-97.05, 26.85),
        (-96.55, 27.55),
        (-95.95, 28.25),
        (-95.25, 28.80),
        (-94.55, 29.25),
        (-94.20, 29.45),
    )
)


def _coastal40() -> Fixture:
    """40 buses / 20 substations / 25 equiprobable landfall scenarios.

    Twelve coastal substations sit just inland of the coastline polyline and
    bear most of the load; eight inland substations carry the generation.
    Each scenario floods a corridor of coastal substations around a landfall
    position, hardest at the center, with an occasional reach into the
    nearest inland substation.
    """
    rng = np.random.default_rng(4031)
    n_coast, n_inland = 12, 8
    line = COASTAL40_COASTLINE
    total = line.total_length_km

    substations = []
    buses = []
    branches = []

    coast_ids = [f"C{k:02d}" for k in range(n_coast)]
    inland_ids = [f"I{k}" for k in range(n_inland)]

    coast_classes = [
        "115_161", "115_161", "230", "115_161", "115_161", "115_161",
        "230", "115_161", "115_161", "115_161", "230", "115_161",
    ]
    coast_loads = [0.55, 0.70, 1.10, 0.60, 0.85, 0.95, 1.20, 0.65, 0.50, 0.75, 1.00, 0.45]
    for k, sid in enumerate(coast_ids):
        lon, lat = line.point_at_arc(total * (k + 0.5) / n_coast)
        substations.append(Substation(sid, coast_classes[k], lon=lon + 0.10, lat=lat + 0.06))
        buses.append(Bus(f"{sid}a", sid, p_load=coast_loads[k]))
        buses.append(
            Bus(f"{sid}b", sid, p_load=0.15, p_gen_min=0.0, p_gen_max=(0.6 if k % 4 == 2 else 0.0))
        )
        branches.append(Branch(f"T{sid}", f"{sid}a", f"{sid}b", susceptance=-12.0, flow_limit=2.0))

    inland_classes = ["500", "230", "230", "500", "230", "230", "500", "230"]
    inland_gen = [3.5, 2.0, 2.5, 3.0, 1.5, 2.0, 3.5, 1.5]
    for k, sid in enumerate(inland_ids):
        lon, lat = line.point_at_arc(total * (k + 0.5) / n_inland)
        substations.append(Substation(sid, inland_classes[k], lon=lon - 0.55, lat=lat + 0.45))
        buses.append(
            Bus(
                f"{sid}a",
                sid,
                p_load=0.25,
                p_gen_min=0.0,
                p_gen_max=inland_gen[k],
                is_reference=(k == 0),
            )
        )
        buses.append(Bus(f"{sid}b", sid, p_load=0.35))
        branches.append(Branch(f"T{sid}", f"{sid}a", f"{sid}b", susceptance=-12.0, flow_limit=2.5))

    for k in range(n_coast - 1):  # coastal corridor
        branches.append(
            Branch(
                f"CC{k:02d}", f"{coast_ids[k]}a", f"{coast_ids[k + 1]}a",
                susceptance=-8.0, flow_limit=1.6,
            )
        )
    for k in range(n_inland - 1):  # inland backbone
        branches.append(
            Branch(
                f"II{k}", f"{inland_ids[k]}a", f"{inland_ids[k + 1]}a",
                susceptance=-10.0, flow_limit=3.0,
            )
        )
    for k in range(n_inland):  # feeders: each inland substation serves the coast
        coast_k = min(n_coast - 1, round(k * (n_coast - 1) / (n_inland - 1)))
        branches.append(
            Branch(
                f"F{k}", f"{inland_ids[k]}a", f"{coast_ids[coast_k]}b",
                susceptance=-9.0, flow_limit=2.2,
            )
        )

    network = GridNetwork(
        buses=tuple(buses), branches=tuple(branches), substations=tuple(substations)
    )

    # 25 landfall positions, stratified over an index range that overhangs the
    # coast so edge scenarios flood less.  Severity falls off with corridor
    # distance; every fourth scenario reaches one inland substation.
    count = 25
    scenarios = []
    for i in range(count):
        center = -1.5 + 15.0 * (i + rng.random()) / count
        levels: dict[str, int] = {}
        for k, sid in enumerate(coast_ids):
            d = abs(k - center)
            if d <= 0.8:
                levels[sid] = 3
            elif d <= 1.3:
                levels[sid] = 2
            elif d <= 2.1:
                levels[sid] = 1
        if i % 5 == 0:
            near = min(max(int(round(center * (n_inland - 1) / (n_coast - 1))), 0), n_inland - 1)
            levels[inland_ids[near]] = 1
        scenarios.append(FloodScenario(f"h{i:02d}", 1.0 / count, levels))

    scenario_set = FloodScenarioSet(
        scenarios=tuple(scenarios), level_count=4, unattainable_level=3
    )
    return Fixture("coastal40", network, scenario_set, coastline=line)
