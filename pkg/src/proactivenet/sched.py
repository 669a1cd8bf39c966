"""Service policies for the slotted deadline network.

Every policy is a pure state-transition function: it takes a backlog plus a
capacity, returns a ServiceOutcome, and never mutates its input.  Within a
slot the order of events is: arrivals land, service is applied, expirations
are counted, then residual deadlines shift down.

Policies implemented here:
  - earliest-deadline-first (EDF) on a single class
  - selfish primary / dynamic-capacity primary with an opportunistic
    secondary class riding on leftover capacity
  - multicast-aligned EDF (serving a source clears every pending request
    for it at unit cost)
  - the mixed policy serving expiring multicast first, then unicast, then
    the remaining multicast by EDF
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from proactivenet.traffic import ArrivalBatch

SELFISH = "selfish"
DYNAMIC = "dynamic"

# rounding rule for the fractional share f * sum(N_i); ceiling by default so
# the integral policy never serves less than the real-valued one
FRACTION_ROUNDING = {"mode": "ceil"}


def _round_fraction(x: float) -> int:
    if FRACTION_ROUNDING["mode"] == "floor":
        return math.floor(x)
    return math.ceil(x)


@dataclass(frozen=True)
class Backlog:
    """Pending requests grouped by residual deadline.

    counts[i] is the number of requests with i slots remaining before
    expiry; i = 0 means due this slot.  Length is T_star + 1 where T_star
    is the maximum supported look-ahead.
    """

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("backlog counts must be nonnegative")

    @classmethod
    def empty(cls, T_star: int) -> "Backlog":
        return cls(counts=(0,) * (T_star + 1))

    @property
    def T_star(self) -> int:
        return len(self.counts) - 1

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def urgent(self) -> int:
        return self.counts[0]


@dataclass(frozen=True)
class MulticastBacklog:
    """Pending multicast demand: source id -> min residual deadline.

    A source appears at most once; new demand for an already pending
    source aligns with the existing (earlier or equal) deadline.
    """

    residual_deadline: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if any(d < 0 for d in self.residual_deadline.values()):
            raise ValueError("residual deadlines must be nonnegative")

    @property
    def urgent(self) -> int:
        return sum(1 for d in self.residual_deadline.values() if d == 0)

    @property
    def total(self) -> int:
        return len(self.residual_deadline)


@dataclass(frozen=True)
class ServiceOutcome:
    """Result of applying one slot of service to one class.

    served_per_deadline[i] is the number served from residual-deadline
    bucket i; expired counts requests left at residual 0 after service.
    A slot is an outage for the class iff expired > 0.
    """

    served_per_deadline: tuple[int, ...]
    leftover_capacity: int
    expired: int

    @property
    def served(self) -> int:
        return sum(self.served_per_deadline)

    @property
    def outage(self) -> bool:
        return self.expired > 0


def edf_serve(b: Backlog, capacity: int) -> ServiceOutcome:
    """Serve up to `capacity` requests, earliest residual deadline first.

    Work-conserving: leftover capacity is nonzero only if the backlog is
    emptied.  Expired = requests still at residual 0 after service.
    """
    if capacity < 0:
        raise ValueError("capacity must be nonnegative")
    served = []
    left = capacity
    for c in b.counts:
        s = min(c, left)
        served.append(s)
        left -= s
    expired = b.counts[0] - served[0]
    return ServiceOutcome(
        served_per_deadline=tuple(served), leftover_capacity=left, expired=expired
    )


def after_service(b: Backlog, outcome: ServiceOutcome) -> Backlog:
    """Backlog with the served requests removed, before any deadline shift."""
    return Backlog(
        counts=tuple(c - s for c, s in zip(b.counts, outcome.served_per_deadline))
    )


def advance_slot(b: Backlog, arrivals: ArrivalBatch) -> Backlog:
    """Shift residual deadlines down one slot and insert the next arrivals.

    Must be called on a post-service backlog; whatever sits at residual 0
    has expired and is dropped here.
    """
    n = len(b.counts)
    shifted = [0] * n
    for i in range(1, n):
        shifted[i - 1] = b.counts[i]
    for k, cnt in arrivals.per_lookahead_counts.items():
        if not 0 <= k < n:
            raise ValueError(f"lookahead {k} outside backlog range [0, {n - 1}]")
        shifted[k] += cnt
    return Backlog(counts=tuple(shifted))


def dynamic_primary_capacity(bp: Backlog, C: int, f: float) -> int:
    """Capacity a dynamic primary grants itself: urgent demand plus a
    fraction f of its non-urgent backlog, capped at C.

    f=1 reproduces selfish service; f=0 reproduces a primary that ignores
    its predictions.
    """
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f must lie in [0,1], got {f}")
    nonurgent = bp.total - bp.urgent
    return min(C, bp.urgent + _round_fraction(f * nonurgent))


def serve_two_class(
    bp: Backlog, secondary_urgent: int, C: int, mode: str, f: float = 0.5
) -> tuple[ServiceOutcome, ServiceOutcome]:
    """Serve a predictive primary plus an opportunistic urgent secondary.

    mode "selfish": primary uses the full C under EDF, secondary gets the
    leftover.  mode "dynamic": primary restricts itself to
    dynamic_primary_capacity(bp, C, f); secondary gets C minus what the
    primary actually served.  Secondary requests are all urgent, so any
    unserved secondary request expires this slot.
    """
    if C < 1:
        raise ValueError("C must be >= 1")
    if secondary_urgent < 0:
        raise ValueError("secondary_urgent must be nonnegative")
    if mode == SELFISH:
        cap_p = C
    elif mode == DYNAMIC:
        cap_p = dynamic_primary_capacity(bp, C, f)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    primary = edf_serve(bp, cap_p)
    leftover = C - primary.served
    served_s = min(secondary_urgent, leftover)
    secondary = ServiceOutcome(
        served_per_deadline=(served_s,),
        leftover_capacity=leftover - served_s,
        expired=secondary_urgent - served_s,
    )
    return primary, secondary


def multicast_edf_serve(mb: MulticastBacklog, capacity: int) -> ServiceOutcome:
    """Serve multicast sources earliest residual deadline first.

    Serving a source costs one capacity unit and clears its entry entirely
    (all aligned requests delivered at once).  Ties broken by ascending
    source id.  served_per_deadline is indexed by residual deadline of the
    served sources.
    """
    if capacity < 0:
        raise ValueError("capacity must be nonnegative")
    order = sorted(mb.residual_deadline.items(), key=lambda kv: (kv[1], kv[0]))
    tmax = max((d for _, d in order), default=0)
    served = [0] * (tmax + 1)
    left = capacity
    for _, d in order:
        if left == 0:
            break
        served[d] += 1
        left -= 1
    expired = mb.urgent - served[0]
    return ServiceOutcome(
        served_per_deadline=tuple(served), leftover_capacity=left, expired=expired
    )


def multicast_after_service(
    mb: MulticastBacklog, capacity: int
) -> tuple[ServiceOutcome, MulticastBacklog]:
    """multicast_edf_serve plus the residual backlog with served sources
    removed (expired sources are kept; drop them at the shift step)."""
    outcome = multicast_edf_serve(mb, capacity)
    order = sorted(mb.residual_deadline.items(), key=lambda kv: (kv[1], kv[0]))
    kept = dict(mb.residual_deadline)
    for sid, _ in order[: outcome.served]:
        del kept[sid]
    return outcome, MulticastBacklog(residual_deadline=kept)


def multicast_advance_slot(
    mb: MulticastBacklog, arrivals: ArrivalBatch, T: int
) -> MulticastBacklog:
    """Drop expired sources, age the rest one slot, and merge new demand.

    New demand for source s carries residual deadline T after the shift;
    if s is already pending its earlier deadline wins (alignment rule).
    """
    nxt = {
        sid: d - 1 for sid, d in mb.residual_deadline.items() if d > 0
    }
    for sid in arrivals.multicast_sources:
        nxt[sid] = min(nxt.get(sid, T), T)
    return MulticastBacklog(residual_deadline=nxt)


def pi2_serve(
    mb: MulticastBacklog, unicast_urgent: int, capacity: int
) -> tuple[ServiceOutcome, ServiceOutcome]:
    """Mixed-traffic service: expiring multicast sources first, then urgent
    unicast requests, then remaining multicast sources by EDF.

    Returns (multicast outcome, unicast outcome).  The combined slot outage
    is expired multicast + expired unicast > 0.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    if unicast_urgent < 0:
        raise ValueError("unicast_urgent must be nonnegative")
    order = sorted(mb.residual_deadline.items(), key=lambda kv: (kv[1], kv[0]))
    tmax = max((d for _, d in order), default=0)
    served_m = [0] * (tmax + 1)
    left = capacity

    urgent_sources = [item for item in order if item[1] == 0]
    later_sources = [item for item in order if item[1] > 0]

    take = min(len(urgent_sources), left)
    served_m[0] = take
    left -= take

    served_u = min(unicast_urgent, left)
    left -= served_u

    for _, d in later_sources:
        if left == 0:
            break
        served_m[d] += 1
        left -= 1

    expired_m = len(urgent_sources) - served_m[0]
    mc = ServiceOutcome(
        served_per_deadline=tuple(served_m), leftover_capacity=left, expired=expired_m
    )
    uc = ServiceOutcome(
        served_per_deadline=(served_u,),
        leftover_capacity=left,
        expired=unicast_urgent - served_u,
    )
    return mc, uc


def pi2_after_service(
    mb: MulticastBacklog, unicast_urgent: int, capacity: int
) -> tuple[ServiceOutcome, ServiceOutcome, MulticastBacklog]:
    """pi2_serve plus the multicast backlog with served sources removed."""
    mc, uc = pi2_serve(mb, unicast_urgent, capacity)
    order = sorted(mb.residual_deadline.items(), key=lambda kv: (kv[1], kv[0]))
    urgent_sources = [item for item in order if item[1] == 0]
    later_sources = [item for item in order if item[1] > 0]
    kept = dict(mb.residual_deadline)
    for sid, _ in urgent_sources[: mc.served_per_deadline[0]]:
        del kept[sid]
    n_later = mc.served - mc.served_per_deadline[0]
    for sid, _ in later_sources[:n_later]:
        del kept[sid]
    return mc, uc, MulticastBacklog(residual_deadline=kept)
