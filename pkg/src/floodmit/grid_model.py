"""Immutable power-grid data model.

The grid is a graph of buses (nodes) and branches (edges: lines and
transformers alike).  Buses are grouped into substations; flooding a
substation knocks out all of its buses, their generation and load, and every
incident branch.  All electrical quantities are per-unit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

VOLTAGE_CLASSES = ("115_161", "230", "500")

DEFAULT_ANGLE_ABS_MAX = math.pi / 2
DEFAULT_ANGLE_DIFF_MAX = math.pi / 6


class NetworkFormatError(ValueError):
    """Raised when a network file is structurally malformed."""


@dataclass(frozen=True)
class Bus:
    id: str
    substation_id: str
    p_load: float = 0.0
    p_gen_min: float = 0.0
    p_gen_max: float = 0.0
    is_reference: bool = False


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    susceptance: float
    flow_limit: float


@dataclass(frozen=True)
class Substation:
    id: str
    voltage_class: str
    lon: float | None = None
    lat: float | None = None

    @property
    def coordinates(self) -> tuple[float, float] | None:
        if self.lon is None or self.lat is None:
            return None
        return (self.lon, self.lat)


@dataclass(frozen=True)
class GridNetwork:
    """Buses, branches and substations plus system-wide angle limits.

    The graph may be disconnected; islands arise from flooding anyway.
    Construction performs no semantic checks so that broken networks can be
    built and fed to :func:`validate`.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    substations: tuple[Substation, ...]
    angle_abs_max: float = DEFAULT_ANGLE_ABS_MAX
    angle_diff_max: float = DEFAULT_ANGLE_DIFF_MAX
    base_mva: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- index helpers -------------------------------------------------

    @property
    def bus_by_id(self) -> dict[str, Bus]:
        if "bus_by_id" not in self._cache:
            self._cache["bus_by_id"] = {b.id: b for b in self.buses}
        return self._cache["bus_by_id"]

    @property
    def branch_by_id(self) -> dict[str, Branch]:
        if "branch_by_id" not in self._cache:
            self._cache["branch_by_id"] = {br.id: br for br in self.branches}
        return self._cache["branch_by_id"]

    @property
    def substation_by_id(self) -> dict[str, Substation]:
        if "substation_by_id" not in self._cache:
            self._cache["substation_by_id"] = {s.id: s for s in self.substations}
        return self._cache["substation_by_id"]

    @property
    def substation_buses(self) -> dict[str, tuple[str, ...]]:
        """Bus ids grouped by substation, in bus declaration order."""
        if "substation_buses" not in self._cache:
            groups: dict[str, list[str]] = {s.id: [] for s in self.substations}
            for b in self.buses:
                groups.setdefault(b.substation_id, []).append(b.id)
            self._cache["substation_buses"] = {k: tuple(v) for k, v in groups.items()}
        return self._cache["substation_buses"]

    @property
    def branches_at_bus(self) -> dict[str, tuple[str, ...]]:
        if "branches_at_bus" not in self._cache:
            inc: dict[str, list[str]] = {b.id: [] for b in self.buses}
            for br in self.branches:
                if br.from_bus in inc:
                    inc[br.from_bus].append(br.id)
                if br.to_bus in inc and br.to_bus != br.from_bus:
                    inc[br.to_bus].append(br.id)
            self._cache["branches_at_bus"] = {k: tuple(v) for k, v in inc.items()}
        return self._cache["branches_at_bus"]

    @property
    def reference_bus(self) -> str | None:
        refs = [b.id for b in self.buses if b.is_reference]
        return refs[0] if len(refs) == 1 else None

    @property
    def total_load(self) -> float:
        return sum(b.p_load for b in self.buses)

    @property
    def total_gen_capacity(self) -> float:
        return sum(b.p_gen_max for b in self.buses)


def validate(network: GridNetwork) -> list[str]:
    """Check every structural invariant; violations are data, not faults.

    Returns an empty list iff the network is well formed.  Each violation
    names the offending entity and the broken invariant.
    """
    violations: list[str] = []

    seen_bus: set[str] = set()
    for b in network.buses:
        if b.id in seen_bus:
            violations.append(f"bus {b.id}: duplicate id")
        seen_bus.add(b.id)
        if b.p_load < 0:
            violations.append(f"bus {b.id}: negative load")
        if b.p_gen_min > b.p_gen_max:
            violations.append(f"bus {b.id}: generation lower bound exceeds upper bound")
        if not math.isfinite(b.p_load) or not math.isfinite(b.p_gen_min) or not math.isfinite(b.p_gen_max):
            violations.append(f"bus {b.id}: non-finite power datum")

    sub_ids = {s.id for s in network.substations}
    for b in network.buses:
        if b.substation_id not in sub_ids:
            violations.append(f"bus {b.id}: unknown substation {b.substation_id}")

    refs = [b.id for b in network.buses if b.is_reference]
    if len(refs) == 0:
        violations.append("network: no reference bus")
    elif len(refs) > 1:
        violations.append(f"network: multiple reference buses ({', '.join(refs)})")

    seen_branch: set[str] = set()
    for br in network.branches:
        if br.id in seen_branch:
            violations.append(f"branch {br.id}: duplicate id")
        seen_branch.add(br.id)
        if br.from_bus == br.to_bus:
            violations.append(f"branch {br.id}: self loop")
        for end in (br.from_bus, br.to_bus):
            if end not in seen_bus:
                violations.append(f"branch {br.id}: unknown endpoint {end}")
        if br.flow_limit <= 0:
            violations.append(f"branch {br.id}: nonpositive flow limit")
        if br.susceptance == 0:
            violations.append(f"branch {br.id}: zero susceptance")

    seen_sub: set[str] = set()
    for s in network.substations:
        if s.id in seen_sub:
            violations.append(f"substation {s.id}: duplicate id")
        seen_sub.add(s.id)
        if s.voltage_class not in VOLTAGE_CLASSES:
            violations.append(f"substation {s.id}: unknown voltage class {s.voltage_class}")
        if not network.substation_buses.get(s.id):
            violations.append(f"substation {s.id}: no buses")

    if network.angle_abs_max <= 0:
        violations.append("network: nonpositive absolute angle limit")
    if network.angle_diff_max <= 0:
        violations.append("network: nonpositive angle difference limit")
    if network.angle_diff_max > 2 * network.angle_abs_max:
        violations.append("network: angle difference limit exceeds twice the absolute limit")

    return violations


def incident_branches(network: GridNetwork, bus_id: str) -> set[str]:
    """Branch ids touching ``bus_id``; flooding the bus disables them all."""
    if bus_id not in network.bus_by_id:
        raise KeyError(f"unknown bus id {bus_id!r}")
    return set(network.branches_at_bus[bus_id])


# -- file format -------------------------------------------------------

_TOP_KEYS = {"buses", "branches", "substations", "angle_limits", "base_mva"}
_BUS_KEYS = {"id", "substation", "load", "gen_min", "gen_max", "reference"}
_BRANCH_KEYS = {"id", "from", "to", "susceptance", "flow_limit"}
_SUB_KEYS = {"id", "voltage_class", "lon", "lat"}
_ANGLE_KEYS = {"abs_max_rad", "diff_max_rad"}


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise NetworkFormatError(f"{where}: unknown keys {sorted(unknown)}")


def network_from_dict(doc: dict) -> GridNetwork:
    if not isinstance(doc, dict):
        raise NetworkFormatError("network document must be an object")
    _reject_unknown(doc, _TOP_KEYS, "network")
    for key in ("buses", "branches", "substations"):
        if key not in doc:
            raise NetworkFormatError(f"network: missing required key {key!r}")

    buses = []
    for entry in doc["buses"]:
        _reject_unknown(entry, _BUS_KEYS, f"bus {entry.get('id', '?')}")
        gen_max = float(entry.get("gen_max", 0.0))
        if gen_max < 0:
            # The load-shed recourse relies on zero generation being admissible.
            raise NetworkFormatError(
                f"bus {entry['id']}: negative generation upper bound not supported"
            )
        buses.append(
            Bus(
                id=str(entry["id"]),
                substation_id=str(entry["substation"]),
                p_load=float(entry.get("load", 0.0)),
                p_gen_min=float(entry.get("gen_min", 0.0)),
                p_gen_max=gen_max,
                is_reference=bool(entry.get("reference", False)),
            )
        )

    branches = []
    for entry in doc["branches"]:
        _reject_unknown(entry, _BRANCH_KEYS, f"branch {entry.get('id', '?')}")
        susceptance = float(entry["susceptance"])
        if susceptance == 0:
            raise NetworkFormatError(f"branch {entry['id']}: zero susceptance")
        branches.append(
            Branch(
                id=str(entry["id"]),
                from_bus=str(entry["from"]),
                to_bus=str(entry["to"]),
                susceptance=susceptance,
                flow_limit=float(entry["flow_limit"]),
            )
        )

    substations = []
    for entry in doc["substations"]:
        _reject_unknown(entry, _SUB_KEYS, f"substation {entry.get('id', '?')}")
        substations.append(
            Substation(
                id=str(entry["id"]),
                voltage_class=str(entry["voltage_class"]),
                lon=None if entry.get("lon") is None else float(entry["lon"]),
                lat=None if entry.get("lat") is None else float(entry["lat"]),
            )
        )

    angle_abs = DEFAULT_ANGLE_ABS_MAX
    angle_diff = DEFAULT_ANGLE_DIFF_MAX
    if "angle_limits" in doc:
        _reject_unknown(doc["angle_limits"], _ANGLE_KEYS, "angle_limits")
        angle_abs = float(doc["angle_limits"].get("abs_max_rad", angle_abs))
        angle_diff = float(doc["angle_limits"].get("diff_max_rad", angle_diff))

    return GridNetwork(
        buses=tuple(buses),
        branches=tuple(branches),
        substations=tuple(substations),
        angle_abs_max=angle_abs,
        angle_diff_max=angle_diff,
        base_mva=None if doc.get("base_mva") is None else float(doc["base_mva"]),
    )


def network_to_dict(network: GridNetwork) -> dict:
    doc: dict = {
        "angle_limits": {
            "abs_max_rad": network.angle_abs_max,
            "diff_max_rad": network.angle_diff_max,
        },
        "buses": [
            {
                "id": b.id,
                "substation": b.substation_id,
                "load": b.p_load,
                "gen_min": b.p_gen_min,
                "gen_max": b.p_gen_max,
                "reference": b.is_reference,
            }
            for b in network.buses
        ],
        "branches": [
            {
                "id": br.id,
                "from": br.from_bus,
                "to": br.to_bus,
                "susceptance": br.susceptance,
                "flow_limit": br.flow_limit,
            }
            for br in network.branches
        ],
        "substations": [
            {
                "id": s.id,
                "voltage_class": s.voltage_class,
                **({"lon": s.lon, "lat": s.lat} if s.lon is not None else {}),
            }
            for s in network.substations
        ],
    }
    if network.base_mva is not None:
        doc["base_mva"] = network.base_mva
    return doc


def load_network(path) -> GridNetwork:
    """Parse a network file, rejecting unknown keys and degenerate branches."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return network_from_dict(doc)


def save_network(network: GridNetwork, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(network_to_dict(network), fh, indent=2, sort_keys=True)
        fh.write("\n")
