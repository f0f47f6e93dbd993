"""Regenerate src/mgform/data/ieee37.json from the IEEE 37-node tables.

Spot loads are the published per-phase values summed over phases (kW, kvar).
Line segments follow the feeder's line-data table; the regulator 799-701 and
transformer 775-709 are kept as ordinary branches. Everything below the
tables (DGs, tie switches, faults, FTU outages, switch positions) is the
restoration case layered on top; see data/NOTES.md.

    python scripts/build_ieee37.py
"""

import json
from pathlib import Path

SPOT_LOADS = {  # bus: per-phase (kW, kvar) for phases a, b, c
    "701": [(140, 70), (140, 70), (350, 175)],
    "712": [(0, 0), (0, 0), (85, 40)],
    "713": [(0, 0), (0, 0), (85, 40)],
    "714": [(17, 8), (21, 10), (0, 0)],
    "718": [(85, 40), (0, 0), (0, 0)],
    "720": [(0, 0), (0, 0), (85, 40)],
    "722": [(0, 0), (140, 70), (21, 10)],
    "724": [(0, 0), (42, 21), (0, 0)],
    "725": [(0, 0), (42, 21), (0, 0)],
    "727": [(0, 0), (0, 0), (42, 21)],
    "728": [(42, 21), (42, 21), (42, 21)],
    "729": [(42, 21), (0, 0), (0, 0)],
    "730": [(0, 0), (0, 0), (85, 40)],
    "731": [(0, 0), (85, 40), (0, 0)],
    "732": [(0, 0), (0, 0), (42, 21)],
    "733": [(85, 40), (0, 0), (0, 0)],
    "734": [(0, 0), (0, 0), (42, 21)],
    "735": [(0, 0), (0, 0), (85, 40)],
    "736": [(0, 0), (42, 21), (0, 0)],
    "737": [(140, 70), (0, 0), (0, 0)],
    "738": [(126, 62), (0, 0), (0, 0)],
    "740": [(0, 0), (0, 0), (85, 40)],
    "741": [(0, 0), (0, 0), (42, 21)],
    "742": [(8, 4), (85, 40), (0, 0)],
    "744": [(42, 21), (0, 0), (0, 0)],
}

BUSES = [
    "799", "701", "702", "703", "704", "705", "706", "707", "708", "709", "710",
    "711", "712", "713", "714", "718", "720", "722", "724", "725", "727", "728",
    "729", "730", "731", "732", "733", "734", "735", "736", "737", "738", "740",
    "741", "742", "744", "775",
]

# (id, from, to); ids of branches named in the case study keep its orientation
LINES = [
    ("799-701", "799", "701"),
    ("701-702", "701", "702"),
    ("705-702", "705", "702"),
    ("702-713", "702", "713"),
    ("702-703", "702", "703"),
    ("703-727", "703", "727"),
    ("703-730", "703", "730"),
    ("704-714", "704", "714"),
    ("704-720", "704", "720"),
    ("705-742", "705", "742"),
    ("705-712", "705", "712"),
    ("706-725", "706", "725"),
    ("707-724", "707", "724"),
    ("707-722", "707", "722"),
    ("708-733", "708", "733"),
    ("708-732", "708", "732"),
    ("709-731", "709", "731"),
    ("708-709", "708", "709"),
    ("710-735", "710", "735"),
    ("710-736", "710", "736"),
    ("711-741", "711", "741"),
    ("711-740", "711", "740"),
    ("713-704", "713", "704"),
    ("714-718", "714", "718"),
    ("720-707", "720", "707"),
    ("720-706", "720", "706"),
    ("727-744", "727", "744"),
    ("730-709", "730", "709"),
    ("733-734", "733", "734"),
    ("734-737", "734", "737"),
    ("734-710", "734", "710"),
    ("737-738", "737", "738"),
    ("738-711", "738", "711"),
    ("744-728", "744", "728"),
    ("744-729", "744", "729"),
    ("775-709", "775", "709"),
]

# -- restoration case ---------------------------------------------------------

DGS = {  # bus: (cap_p kW, cap_q kvar); DG1, DG2, DG3 in bus order
    "701": (850, 850),
    "704": (600, 600),
    "775": (700, 700),
}

TIES = [
    ("TS1", "701", "742", "701"),
    ("TS2", "724", "728", "724"),
    ("TS3", "708", "713", "708"),
]

FAULTED = {"799-701", "701-702", "727-744", "714-718"}
OPEN_SWITCHES = {"705-702", "704-714", "730-709", "733-734"}
FTU_OFFLINE = {"705", "706", "708", "709", "713", "714", "720"}
NO_PROBE = {"733"}

SWITCHABLE = {
    "705-702", "702-713", "713-704", "704-714", "704-720", "720-706", "709-731",
    "708-709", "730-709", "708-733", "733-734", "734-710", "737-738", "711-740",
    "707-722", "705-742", "702-703", "703-730", "744-729", "720-707",
}

# FTU that owns each branch switch; defaults to the from-bus
CTRL = {
    "705-702": "705", "702-713": "713", "713-704": "713", "704-714": "714",
    "704-720": "720", "720-706": "720", "720-707": "707", "706-725": "725",
    "707-724": "724", "707-722": "722", "705-742": "742", "705-712": "712",
    "714-718": "718", "709-731": "709", "708-709": "709", "730-709": "709",
    "775-709": "775", "708-733": "708", "708-732": "732", "733-734": "734",
    "734-737": "734", "734-710": "710", "737-738": "737", "738-711": "738",
    "711-741": "741", "711-740": "740", "710-735": "735", "710-736": "736",
    "727-744": "744", "744-728": "728", "744-729": "729", "703-727": "727",
    "703-730": "730", "702-703": "702", "701-702": "701", "799-701": "701",
}


def build() -> dict:
    buses = []
    for b in BUSES:
        phases = SPOT_LOADS.get(b, [])
        cap = DGS.get(b)
        buses.append({
            "id": b,
            "load_p": sum(p for p, _ in phases),
            "load_q": sum(q for _, q in phases),
            "weight": 1.0,
            "dg": None if cap is None else {"cap_p": cap[0], "cap_q": cap[1]},
            "ftu_online": b not in FTU_OFFLINE,
            "probe_allowed": b not in NO_PROBE,
        })
    branches = []
    for kid, a, b in LINES:
        branches.append({
            "id": kid,
            "from": a,
            "to": b,
            "switchable": kid in SWITCHABLE,
            "faulted": kid in FAULTED,
            "ctrl_bus": CTRL.get(kid, a),
            "initial_closed": kid not in FAULTED and kid not in OPEN_SWITCHES,
        })
    for kid, a, b, ctrl in TIES:
        branches.append({
            "id": kid, "from": a, "to": b, "switchable": True, "faulted": False,
            "ctrl_bus": ctrl, "initial_closed": False,
        })
    return {
        "description": (
            "IEEE 37-node feeder islanded after a disaster: three DGs, three tie "
            "switches, four faulted branches and seven FTUs out of contact"
        ),
        "probe_magnitude_default": 100,
        "buses": buses,
        "branches": branches,
    }


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "mgform" / "data" / "ieee37.json"
    out.write_text(json.dumps(build(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}")
