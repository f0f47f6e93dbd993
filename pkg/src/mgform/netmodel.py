"""Feeder data model, scenario documents and the bundled IEEE 37-node case.

A scenario document is JSON with four top-level keys::

    {
      "description": "...",
      "probe_magnitude_default": 100,
      "buses":    [{"id": "701", "load_p": 630, "load_q": 315, ...}, ...],
      "branches": [{"id": "701-702", "from": "701", "to": "702", ...}, ...]
    }

Loads and DG capacities are integer kW / kvar so that flow conservation can
be checked exactly.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable


class SchemaError(ValueError):
    """The document does not follow the scenario schema."""


class ValidationError(ValueError):
    """The document parses but describes an invalid network."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class DG:
    cap_p: int
    cap_q: int


@dataclass(frozen=True)
class Bus:
    id: str
    load_p: int = 0
    load_q: int = 0
    weight: float = 1.0
    dg: DG | None = None
    ftu_online: bool = True
    probe_allowed: bool = True

    @property
    def is_dg(self) -> bool:
        return self.dg is not None


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    switchable: bool = True
    faulted: bool = False
    ctrl_bus: str = ""
    initial_closed: bool = True

    def __post_init__(self):
        if not self.ctrl_bus:
            object.__setattr__(self, "ctrl_bus", self.from_bus)

    @property
    def ends(self) -> tuple[str, str]:
        return (self.from_bus, self.to_bus)

    def other(self, bus_id: str) -> str:
        if bus_id == self.from_bus:
            return self.to_bus
        if bus_id == self.to_bus:
            return self.from_bus
        raise KeyError(f"bus {bus_id} is not an end of branch {self.id}")


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        tail = f": {self.detail}" if self.detail else ""
        return f"{self.code} [{self.subject}]{tail}"


@dataclass(frozen=True)
class Network:
    """Immutable feeder graph.

    Construction never fails on bad references; call :func:`validate` to get
    the list of problems. ``incidence`` maps each bus to the ids of the
    branches touching it, in document order.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    incidence: dict[str, tuple[str, ...]] = field(init=False, repr=False, compare=False)
    _bus_by_id: dict[str, Bus] = field(init=False, repr=False, compare=False)
    _branch_by_id: dict[str, Branch] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        by_bus = {b.id: b for b in self.buses}
        by_branch = {k.id: k for k in self.branches}
        inc: dict[str, list[str]] = {b.id: [] for b in self.buses}
        for k in self.branches:
            for end in dict.fromkeys(k.ends):
                if end in inc:
                    inc[end].append(k.id)
        object.__setattr__(self, "_bus_by_id", by_bus)
        object.__setattr__(self, "_branch_by_id", by_branch)
        object.__setattr__(self, "incidence", {b: tuple(v) for b, v in inc.items()})

    def bus(self, bus_id: str) -> Bus:
        return self._bus_by_id[bus_id]

    def branch(self, branch_id: str) -> Branch:
        return self._branch_by_id[branch_id]

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    @property
    def branch_ids(self) -> list[str]:
        return [k.id for k in self.branches]

    @property
    def dg_buses(self) -> list[str]:
        return [b.id for b in self.buses if b.dg is not None]

    def online(self, bus_id: str) -> bool:
        return self._bus_by_id[bus_id].ftu_online

    def controllable(self, branch_id: str) -> bool:
        """True when the FTU owning the branch switch talks to the OC."""
        return self.online(self._branch_by_id[branch_id].ctrl_bus)

    def neighbors(self, bus_id: str) -> Iterable[tuple[str, str]]:
        """Yield ``(branch id, far bus id)`` for every incident branch."""
        for kid in self.incidence[bus_id]:
            yield kid, self._branch_by_id[kid].other(bus_id)


@dataclass(frozen=True)
class Scenario:
    network: Network
    description: str = ""
    probe_magnitude_default: int = 100


def validate(net: Network) -> list[Violation]:
    """Return every invariant violation in ``net``; empty means valid."""
    out: list[Violation] = []
    seen: set[str] = set()
    for b in net.buses:
        if b.id in seen:
            out.append(Violation("duplicate-bus-id", b.id))
        seen.add(b.id)
        if b.load_p < 0 or b.load_q < 0:
            out.append(Violation("negative-load", b.id))
        if b.weight < 0:
            out.append(Violation("negative-weight", b.id))
        if b.dg is not None and (b.dg.cap_p <= 0 or b.dg.cap_q < 0):
            out.append(Violation("bad-dg-capacity", b.id, "cap_p must be > 0 and cap_q >= 0"))
    seen = set()
    for k in net.branches:
        if k.id in seen:
            out.append(Violation("duplicate-branch-id", k.id))
        seen.add(k.id)
        for end in k.ends:
            if end not in net.incidence:
                out.append(Violation("dangling-endpoint", k.id, f"unknown bus {end!r}"))
        if k.from_bus == k.to_bus:
            out.append(Violation("self-loop", k.id))
        if k.ctrl_bus not in k.ends:
            out.append(Violation("ctrl-bus-not-endpoint", k.id, f"ctrl_bus {k.ctrl_bus!r}"))
    if not net.dg_buses:
        out.append(Violation("no-dg", "network"))
    if net.buses:
        start = net.buses[0].id
        reached = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for kid in net.incidence.get(u, ()):
                k = net.branch(kid)
                if u not in k.ends:
                    continue
                v = k.other(u)
                if v in net.incidence and v not in reached:
                    reached.add(v)
                    queue.append(v)
        for b in net.buses:
            if b.id not in reached:
                out.append(Violation("disconnected", b.id, f"not reachable from {start}"))
    return out


# -- document (de)serialisation ------------------------------------------------

_TOP_KEYS = {"description", "probe_magnitude_default", "buses", "branches"}
_BUS_KEYS = {"id", "load_p", "load_q", "weight", "dg", "ftu_online", "probe_allowed"}
_DG_KEYS = {"cap_p", "cap_q"}
_BRANCH_KEYS = {"id", "from", "to", "switchable", "faulted", "ctrl_bus", "initial_closed"}


def _expect(obj: dict, key: str, kind, where: str, default: Any = ...):
    if key not in obj:
        if default is ...:
            raise SchemaError(f"{where}: missing key {key!r}")
        return default
    val = obj[key]
    if kind is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
    elif kind is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
    else:
        ok = isinstance(val, kind)
    if not ok:
        raise SchemaError(f"{where}: key {key!r} must be {kind.__name__}, got {type(val).__name__}")
    return val


def _check_keys(obj: Any, allowed: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SchemaError(f"{where}: unknown keys {extra}")


def _parse_bus(obj: Any, i: int) -> Bus:
    where = f"buses[{i}]"
    _check_keys(obj, _BUS_KEYS, where)
    dg_obj = obj.get("dg")
    dg = None
    if dg_obj is not None:
        _check_keys(dg_obj, _DG_KEYS, where + ".dg")
        dg = DG(_expect(dg_obj, "cap_p", int, where + ".dg"), _expect(dg_obj, "cap_q", int, where + ".dg"))
    return Bus(
        id=_expect(obj, "id", str, where),
        load_p=_expect(obj, "load_p", int, where),
        load_q=_expect(obj, "load_q", int, where),
        weight=float(_expect(obj, "weight", float, where, 1.0)),
        dg=dg,
        ftu_online=_expect(obj, "ftu_online", bool, where, True),
        probe_allowed=_expect(obj, "probe_allowed", bool, where, True),
    )


def _parse_branch(obj: Any, i: int) -> Branch:
    where = f"branches[{i}]"
    _check_keys(obj, _BRANCH_KEYS, where)
    src = _expect(obj, "from", str, where)
    return Branch(
        id=_expect(obj, "id", str, where),
        from_bus=src,
        to_bus=_expect(obj, "to", str, where),
        switchable=_expect(obj, "switchable", bool, where, True),
        faulted=_expect(obj, "faulted", bool, where, False),
        ctrl_bus=_expect(obj, "ctrl_bus", str, where, src),
        initial_closed=_expect(obj, "initial_closed", bool, where, True),
    )


def parse_scenario(doc: Any) -> Scenario:
    """Build a Scenario from an already-decoded document (no validation)."""
    _check_keys(doc, _TOP_KEYS, "document")
    buses = _expect(doc, "buses", list, "document")
    branches = _expect(doc, "branches", list, "document")
    probe = _expect(doc, "probe_magnitude_default", int, "document", 100)
    if probe <= 0:
        raise SchemaError("document: probe_magnitude_default must be > 0")
    net = Network(
        tuple(_parse_bus(b, i) for i, b in enumerate(buses)),
        tuple(_parse_branch(k, i) for i, k in enumerate(branches)),
    )
    return Scenario(net, _expect(doc, "description", str, "document", ""), probe)


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document.

    Raises SchemaError for malformed documents and ValidationError when the
    described network breaks an invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    scn = parse_scenario(doc)
    problems = validate(scn.network)
    if problems:
        raise ValidationError(problems)
    return scn


def scenario_to_dict(scn: Scenario) -> dict:
    buses = []
    for b in scn.network.buses:
        buses.append({
            "id": b.id,
            "load_p": b.load_p,
            "load_q": b.load_q,
            "weight": b.weight,
            "dg": None if b.dg is None else {"cap_p": b.dg.cap_p, "cap_q": b.dg.cap_q},
            "ftu_online": b.ftu_online,
            "probe_allowed": b.probe_allowed,
        })
    branches = [
        {
            "id": k.id,
            "from": k.from_bus,
            "to": k.to_bus,
            "switchable": k.switchable,
            "faulted": k.faulted,
            "ctrl_bus": k.ctrl_bus,
            "initial_closed": k.initial_closed,
        }
        for k in scn.network.branches
    ]
    return {
        "description": scn.description,
        "probe_magnitude_default": scn.probe_magnitude_default,
        "buses": buses,
        "branches": branches,
    }


def dump_scenario(scn: Scenario) -> str:
    return json.dumps(scenario_to_dict(scn), indent=2) + "\n"


def read_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def builtin_ieee37() -> Scenario:
    """The shipped 37-node restoration case (see ``data/NOTES.md``)."""
    text = resources.files("mgform.data").joinpath("ieee37.json").read_text(encoding="utf-8")
    return load_scenario(text)


def replace_network(scn: Scenario, **changes) -> Scenario:
    net = scn.network
    buses = changes.pop("buses", net.buses)
    branches = changes.pop("branches", net.branches)
    if changes:
        raise TypeError(f"unexpected fields {sorted(changes)}")
    return Scenario(Network(tuple(buses), tuple(branches)), scn.description, scn.probe_magnitude_default)
