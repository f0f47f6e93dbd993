"""Microgrid formation for feeders with partially interrupted FTU communication.

Infers the switch states of unobservable branches from what the online FTUs
still report, then plans DG-fed microgrids around what is known.
"""

from mgform.netmodel import (
    Branch,
    Bus,
    DG,
    Network,
    Scenario,
    SchemaError,
    ValidationError,
    builtin_ieee37,
    dump_scenario,
    load_scenario,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "Bus",
    "DG",
    "Network",
    "Scenario",
    "SchemaError",
    "ValidationError",
    "builtin_ieee37",
    "dump_scenario",
    "load_scenario",
    "validate",
    "__version__",
]
