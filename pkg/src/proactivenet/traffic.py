"""Arrival-process generators for the slotted network model.

All traffic is slot-batched: a generator produces, per slot, the number of
requests that become known to the scheduler, keyed by their look-ahead time
(slots until the request's deadline).  Multicast traffic is generated at the
data-source level: per slot, the set of distinct sources demanded.

Two capacity-scaling regimes are supported: linear (mean gamma*C) and
polynomial (mean C**gamma).  Sampling is exact Poisson / Bernoulli -- never
normal-approximate -- because the tail events are the quantity under study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LINEAR = "linear"
POLY = "poly"


class TrafficSpecError(ValueError):
    """Raised when a traffic specification is internally inconsistent."""


@dataclass(frozen=True)
class Regime:
    """Capacity-scaling regime of an arrival rate.

    kind   : "linear" (rate gamma*C) or "poly" (rate C**gamma)
    gamma  : scaling exponent/utilization factor, strictly inside (0, 1)
    """

    kind: str
    gamma: float

    def __post_init__(self):
        if self.kind not in (LINEAR, POLY):
            raise TrafficSpecError(f"unknown regime kind {self.kind!r}")
        if not 0.0 < self.gamma < 1.0:
            raise TrafficSpecError(f"gamma must lie in (0,1), got {self.gamma}")


def mean_rate(regime: Regime, C: int) -> float:
    """Mean arrivals per slot at capacity C under the given scaling regime."""
    if C < 1:
        raise TrafficSpecError(f"capacity must be >= 1, got {C}")
    if regime.kind == LINEAR:
        return regime.gamma * C
    return C ** regime.gamma


@dataclass(frozen=True)
class LookaheadLaw:
    """Distribution of the look-ahead time (slots between prediction and deadline).

    Supports a deterministic value, an arbitrary pmf on [tmin, tmax], and a
    binomial(tmax, p) law.  ``probs[i]`` is the probability of look-ahead
    ``tmin + i``.
    """

    tmin: int
    tmax: int
    probs: tuple[float, ...]
    kind: str = "finite"

    def __post_init__(self):
        if not 0 <= self.tmin <= self.tmax:
            raise TrafficSpecError(f"need 0 <= tmin <= tmax, got {self.tmin}, {self.tmax}")
        if len(self.probs) != self.tmax - self.tmin + 1:
            raise TrafficSpecError("pmf length does not match [tmin, tmax]")
        if any(p < 0 for p in self.probs):
            raise TrafficSpecError("pmf entries must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise TrafficSpecError(f"pmf sums to {sum(self.probs)}, not 1")

    @classmethod
    def deterministic(cls, T: int) -> "LookaheadLaw":
        return cls(tmin=T, tmax=T, probs=(1.0,), kind="deterministic")

    @classmethod
    def finite(cls, pmf: dict[int, float]) -> "LookaheadLaw":
        """Build from a {lookahead: probability} mapping; zero entries allowed."""
        if not pmf:
            raise TrafficSpecError("empty pmf")
        tmin, tmax = min(pmf), max(pmf)
        probs = tuple(pmf.get(k, 0.0) for k in range(tmin, tmax + 1))
        return cls(tmin=tmin, tmax=tmax, probs=probs, kind="finite")

    @classmethod
    def binomial(cls, tmax: int, p: float) -> "LookaheadLaw":
        """Binomial(tmax, p) look-ahead on {0, ..., tmax}."""
        if not 0.0 <= p <= 1.0:
            raise TrafficSpecError(f"binomial p must be in [0,1], got {p}")
        probs = tuple(
            math.comb(tmax, k) * p**k * (1 - p) ** (tmax - k) for k in range(tmax + 1)
        )
        return cls(tmin=0, tmax=tmax, probs=probs, kind="binomial")

    @property
    def is_deterministic(self) -> bool:
        return self.tmin == self.tmax

    def pmf(self, k: int) -> float:
        if self.tmin <= k <= self.tmax:
            return self.probs[k - self.tmin]
        return 0.0

    def cdf(self, k: int) -> float:
        """F_k = P(lookahead <= k)."""
        if k < self.tmin:
            return 0.0
        if k >= self.tmax:
            return 1.0
        return sum(self.probs[: k - self.tmin + 1])


@dataclass(frozen=True)
class PredictionErrorSpec:
    """Imperfectly predicted traffic: a predicted stream plus a missed stream.

    The predicted stream (rate factor ``alpha_pred``) carries look-ahead T and
    includes falsely predicted requests; the missed stream (``alpha_miss``) is
    urgent.  Rate factors are multiplicative on gamma (linear regime) or on
    the exponent (polynomial regime).
    """

    alpha_pred: float
    alpha_miss: float
    T: int
    regime: Regime

    def __post_init__(self):
        if self.T < 0:
            raise TrafficSpecError("prediction window T must be >= 0")

    def validate(self, C: int) -> None:
        """Check consistency of the rate factors at operating capacity C."""
        g = self.regime.gamma
        if self.regime.kind == LINEAR:
            if not self.alpha_miss < 1.0:
                raise TrafficSpecError(
                    f"alpha_miss={self.alpha_miss} must be < 1 (missed stream is a "
                    "strict subset of the true arrivals)"
                )
            tot = self.alpha_pred + self.alpha_miss
            if not 1.0 <= tot < 1.0 / g:
                raise TrafficSpecError(
                    f"alpha_pred+alpha_miss={tot} must lie in [1, 1/gamma={1/g:.6g})"
                )
        else:
            if not self.alpha_miss < 1.0:
                raise TrafficSpecError(f"alpha_miss={self.alpha_miss} must be < 1")
            total = C ** (self.alpha_pred * g) + C ** (self.alpha_miss * g)
            if not C**g <= total < C:
                raise TrafficSpecError(
                    f"combined predicted rate {total:.6g} outside [C^gamma={C**g:.6g}, C={C}) at C={C}"
                )

    def rates(self, C: int) -> tuple[float, float]:
        """(predicted rate, missed rate) at capacity C, after validation."""
        self.validate(C)
        g = self.regime.gamma
        if self.regime.kind == LINEAR:
            return self.alpha_pred * g * C, self.alpha_miss * g * C
        return C ** (self.alpha_pred * g), C ** (self.alpha_miss * g)


@dataclass(frozen=True)
class MulticastSpec:
    """Symmetric multicast demand over theta*C equally likely data sources."""

    gamma_m: float
    theta: float

    def __post_init__(self):
        if not 0.0 < self.gamma_m < 1.0:
            raise TrafficSpecError(f"gamma_m must be in (0,1), got {self.gamma_m}")
        if self.theta <= 0.0:
            raise TrafficSpecError(f"theta must be > 0, got {self.theta}")

    def num_sources(self, C: int) -> int:
        """L = round(theta*C), at least 1."""
        return max(1, round(self.theta * C))

    def source_prob(self) -> float:
        """Probability a given source is demanded in one slot."""
        return bernoulli_source_prob(self, 1)


def bernoulli_source_prob(spec: MulticastSpec, window: int) -> float:
    """Probability a data source is demanded at least once in `window` slots.

    With per-source Poisson demand of rate gamma_m/theta per slot, this is
    1 - exp(-window * gamma_m / theta).
    """
    if window < 1:
        raise TrafficSpecError(f"window must be >= 1, got {window}")
    return -math.expm1(-window * spec.gamma_m / spec.theta)


@dataclass(frozen=True)
class ScriptedTraffic:
    """Deterministic arrival script for hand-traced tests: counts[n] requests
    arrive at slot n, all with the given look-ahead."""

    counts: tuple[int, ...]
    lookahead: int = 0


@dataclass(frozen=True)
class ArrivalBatch:
    """Arrivals of a single slot.

    per_lookahead_counts maps look-ahead k -> number of requests whose
    deadline is k slots away.  multicast_sources is the set of distinct
    data sources demanded this slot.
    """

    slot: int
    per_lookahead_counts: dict[int, int] = field(default_factory=dict)
    multicast_sources: frozenset[int] = frozenset()

    def __post_init__(self):
        if any(v < 0 for v in self.per_lookahead_counts.values()):
            raise TrafficSpecError("arrival counts must be nonnegative")

    @property
    def total(self) -> int:
        return sum(self.per_lookahead_counts.values())


def sample_unicast(
    regime: Regime, law: LookaheadLaw, C: int, rng: np.random.Generator, slot: int = 0
) -> ArrivalBatch:
    """Draw one slot of unicast arrivals.

    The total is Poisson(mean_rate); the split over look-ahead values is
    realized as independent Poisson(p_k * rate) components, which is
    distributionally identical to a multinomial thinning of the total.
    """
    lam = mean_rate(regime, C)
    counts: dict[int, int] = {}
    for k in range(law.tmin, law.tmax + 1):
        p = law.pmf(k)
        if p > 0.0:
            counts[k] = int(rng.poisson(p * lam))
    return ArrivalBatch(slot=slot, per_lookahead_counts=counts)


def sample_prediction_error(
    spec: PredictionErrorSpec, C: int, rng: np.random.Generator, slot: int = 0
) -> ArrivalBatch:
    """Draw one slot of imperfectly predicted arrivals.

    The missed stream lands at look-ahead 0 (urgent); the predicted stream at
    look-ahead T.  Raises TrafficSpecError if the rate factors are
    inconsistent at this capacity.
    """
    lam_pred, lam_miss = spec.rates(C)
    counts = {0: int(rng.poisson(lam_miss))}
    counts[spec.T] = counts.get(spec.T, 0) + int(rng.poisson(lam_pred))
    return ArrivalBatch(slot=slot, per_lookahead_counts=counts)


def sample_multicast(
    spec: MulticastSpec, C: int, rng: np.random.Generator, slot: int = 0
) -> ArrivalBatch:
    """Draw the set of distinct sources demanded in one slot.

    Each of the L = round(theta*C) sources is independently present with
    probability 1 - exp(-gamma_m/theta); the set size is Binomial(L, A).
    """
    L = spec.num_sources(C)
    present = rng.random(L) < spec.source_prob()
    return ArrivalBatch(
        slot=slot, multicast_sources=frozenset(np.flatnonzero(present).tolist())
    )


# --- vectorized path generation (same distributions, drawn slot-blockwise) ---


def unicast_counts(
    regime: Regime, law: LookaheadLaw, C: int, rng: np.random.Generator, slots: int
) -> np.ndarray:
    """(slots, tmax+1) arrival matrix; column k = look-ahead-k count per slot.

    Deterministic laws draw a single Poisson stream placed at column T so
    that paths with different T but the same seed see identical arrival
    totals (paired-seed comparisons).
    """
    lam = mean_rate(regime, C)
    out = np.zeros((slots, law.tmax + 1), dtype=np.int64)
    if law.is_deterministic:
        out[:, law.tmax] = rng.poisson(lam, slots)
        return out
    for k in range(law.tmin, law.tmax + 1):
        p = law.pmf(k)
        if p > 0.0:
            out[:, k] = rng.poisson(p * lam, slots)
    return out


def prediction_error_counts(
    spec: PredictionErrorSpec, C: int, rng: np.random.Generator, slots: int
) -> np.ndarray:
    """(slots, T+1) arrival matrix: column 0 = missed, column T = predicted."""
    lam_pred, lam_miss = spec.rates(C)
    out = np.zeros((slots, spec.T + 1), dtype=np.int64)
    pred = rng.poisson(lam_pred, slots)
    miss = rng.poisson(lam_miss, slots)
    out[:, spec.T] += pred
    out[:, 0] += miss
    return out


def multicast_presence(
    spec: MulticastSpec, C: int, rng: np.random.Generator, slots: int
) -> np.ndarray:
    """(slots, L) boolean matrix of per-slot source demand indicators."""
    L = spec.num_sources(C)
    return rng.random((slots, L)) < spec.source_prob()
