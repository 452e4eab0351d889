"""Flooding uncertainty: scenarios, probabilities, and flood levels.

A flooding scenario assigns each substation an integer flood level.  Level 0
means dry; level r means the water requires at least resilience level r of
stacked barriers to keep the substation operational.  Levels convert to
cumulative indicator rows: flooded to level r implies flooded to every level
below r, which is why scenario files store one level per substation rather
than raw indicator matrices (a level cannot encode a non-cumulative row).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .grid_model import GridNetwork

PROBABILITY_TOL = 1e-9


class ScenarioFormatError(ValueError):
    """Raised when a scenario file is malformed or inconsistent."""


@dataclass(frozen=True)
class DepthThresholds:
    """Cumulative protection heights per resilience level, meters.

    ``heights[r-1]`` is the deepest flood that level-r barriers still hold.
    """

    heights: tuple[float, ...]

    def __post_init__(self):
        if not self.heights:
            raise ValueError("at least one threshold required")
        prev = 0.0
        for h in self.heights:
            if h <= prev:
                raise ValueError("thresholds must be positive and strictly increasing")
            prev = h

    @property
    def level_count(self) -> int:
        return len(self.heights)


# Stackable-barrier geometry: one ring holds 0.534 m, two hold exactly 1 m,
# three would hold 1.464 m.
STANDARD_THRESHOLDS = DepthThresholds((0.534, 1.0, 1.464))


@dataclass(frozen=True)
class FloodScenario:
    id: str
    probability: float
    levels: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.probability <= 1.0:
            raise ValueError(f"scenario {self.id}: probability must lie in (0, 1]")

    def level_of(self, substation_id: str) -> int:
        return self.levels.get(substation_id, 0)

    def indicator_row(self, substation_id: str, level_count: int) -> tuple[int, ...]:
        return level_to_indicators(self.level_of(substation_id), level_count)


@dataclass(frozen=True)
class FloodScenarioSet:
    scenarios: tuple[FloodScenario, ...]
    level_count: int
    unattainable_level: int

    def __post_init__(self):
        if self.level_count < 1:
            raise ValueError("level_count must be >= 1")
        if not 1 <= self.unattainable_level <= self.level_count:
            raise ValueError("unattainable_level must lie in [1, level_count]")
        total = sum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise ValueError(f"scenario probabilities sum to {total!r}, not 1")

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(s.probability for s in self.scenarios)

    def substation_ids(self) -> set[str]:
        ids: set[str] = set()
        for s in self.scenarios:
            ids.update(s.levels)
        return ids

    def worst_levels(self) -> dict[str, int]:
        """Worst flood level per substation across all scenarios."""
        worst: dict[str, int] = {}
        for s in self.scenarios:
            for sub, lvl in s.levels.items():
                if lvl > worst.get(sub, 0):
                    worst[sub] = lvl
        return worst


def depth_to_level(depth: float, thresholds: DepthThresholds) -> int:
    """Smallest resilience level whose barrier height covers ``depth``.

    Zero depth is level 0 (dry).  A depth exactly at a threshold maps to that
    threshold's level: the protection is sufficient and not excessive.  Depth
    beyond the top threshold maps to ``level_count + 1``, which no barrier
    stack can hold.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth == 0:
        return 0
    for r, height in enumerate(thresholds.heights, start=1):
        if depth <= height:
            return r
    return thresholds.level_count + 1


def level_to_indicators(level: int, level_count: int) -> tuple[int, ...]:
    """Cumulative indicator row for a flood level; saturates at level_count."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    filled = min(level, level_count)
    return tuple(1 if r <= filled else 0 for r in range(1, level_count + 1))


def level_from_indicators(row) -> int:
    """Flood level encoded by a cumulative indicator row.

    The flooded levels of a substation always form a prefix of the level set;
    a row like (1, 0, 1) has no level representation and is rejected.
    """
    seen_zero = False
    level = 0
    for v in row:
        if v not in (0, 1):
            raise ScenarioFormatError(f"indicator entries must be 0/1, got {v!r}")
        if v == 1:
            if seen_zero:
                raise ScenarioFormatError(f"non-cumulative indicators {tuple(row)!r}")
            level += 1
        else:
            seen_zero = True
    return level


def scenario_set_from_dict(
    doc: dict,
    network: GridNetwork | None = None,
    normalize: bool = False,
) -> FloodScenarioSet:
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario document must be an object")
    unknown = set(doc) - {"level_count", "unattainable_level", "scenarios"}
    if unknown:
        raise ScenarioFormatError(f"scenario file: unknown keys {sorted(unknown)}")
    try:
        level_count = int(doc["level_count"])
        unattainable = int(doc["unattainable_level"])
        entries = doc["scenarios"]
    except KeyError as exc:
        raise ScenarioFormatError(f"scenario file: missing key {exc}") from exc

    known_subs = None if network is None else {s.id for s in network.substations}

    scenarios: list[FloodScenario] = []
    seen_ids: set[str] = set()
    for entry in entries:
        unknown = set(entry) - {"id", "probability", "levels"}
        if unknown:
            raise ScenarioFormatError(
                f"scenario {entry.get('id', '?')}: unknown keys {sorted(unknown)}"
            )
        sid = str(entry["id"])
        if sid in seen_ids:
            raise ScenarioFormatError(f"scenario {sid}: duplicate id")
        seen_ids.add(sid)
        prob = float(entry["probability"])
        if not 0 < prob <= 1:
            raise ScenarioFormatError(f"scenario {sid}: probability must lie in (0, 1]")
        levels: dict[str, int] = {}
        for sub, lvl in entry.get("levels", {}).items():
            if known_subs is not None and sub not in known_subs:
                raise ScenarioFormatError(
                    f"scenario {sid}: substation {sub} not present in the network"
                )
            lvl = int(lvl)
            if lvl < 0:
                raise ScenarioFormatError(f"scenario {sid}: negative flood level at {sub}")
            if lvl > 0:
                levels[sub] = lvl
        scenarios.append(FloodScenario(id=sid, probability=prob, levels=levels))

    total = sum(s.probability for s in scenarios)
    if abs(total - 1.0) > PROBABILITY_TOL:
        if not normalize:
            raise ScenarioFormatError(
                f"scenario probabilities sum to {total!r}, not 1 (pass normalize to rescale)"
            )
        scenarios = [
            FloodScenario(id=s.id, probability=s.probability / total, levels=s.levels)
            for s in scenarios
        ]

    return FloodScenarioSet(
        scenarios=tuple(scenarios),
        level_count=level_count,
        unattainable_level=unattainable,
    )


def load_scenarios(path, network: GridNetwork | None = None, normalize: bool = False) -> FloodScenarioSet:
    """Parse and validate a scenario file.

    Probabilities must sum to 1 within 1e-9 unless ``normalize`` rescales
    them.  When a network is given, every substation named by a scenario must
    exist in it; substations a scenario omits default to level 0.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return scenario_set_from_dict(doc, network=network, normalize=normalize)


def scenario_set_to_dict(scenario_set: FloodScenarioSet) -> dict:
    return {
        "level_count": scenario_set.level_count,
        "unattainable_level": scenario_set.unattainable_level,
        "scenarios": [
            {
                "id": s.id,
                "probability": s.probability,
                "levels": {k: s.levels[k] for k in sorted(s.levels)},
            }
            for s in scenario_set.scenarios
        ],
    }


def save_scenarios(scenario_set: FloodScenarioSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(scenario_set_to_dict(scenario_set), fh, indent=2, sort_keys=True)
        fh.write("\n")
