"""Slotted-network simulation and analysis of prediction-aware resource allocation.

The package is organized as:

- ``traffic``  : arrival-process generators (unicast, imperfect prediction,
  multicast) under linear and polynomial capacity scaling.
- ``sched``    : per-slot service policies (EDF, two-class primary/secondary,
  dynamic primary capacity, multicast alignment, pi2).
- ``sim``      : slot-by-slot Monte Carlo paths, outage estimation, capacity
  sweeps and decay-rate fitting.
- ``analytic`` : closed-form decay-rate (diversity) bounds and a numeric
  Chernoff-exponent optimizer used as an independent cross-check.
- ``oracle``   : exact small-instance ground truth (truncated Markov chains,
  exact event-probability bounds, root verification).
- ``cli``      : batch experiment harness with CSV/JSON outputs.
"""

from proactivenet.traffic import (
    Regime,
    LookaheadLaw,
    PredictionErrorSpec,
    MulticastSpec,
    ArrivalBatch,
    mean_rate,
)
from proactivenet.analytic import BoundValue, Constant

__all__ = [
    "Regime",
    "LookaheadLaw",
    "PredictionErrorSpec",
    "MulticastSpec",
    "ArrivalBatch",
    "mean_rate",
    "BoundValue",
    "Constant",
]

__version__ = "0.1.0"
