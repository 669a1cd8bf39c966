"""Monte Carlo engine: slot-by-slot sample paths and outage estimation.

A path executes slots sequentially (arrivals land, service applies,
expirations are counted, deadlines shift).  A slot is an outage for a class
iff at least one request of that class expires in it; the per-path outage
ratio divides by all post-warmup slots.  Estimates average path ratios and
report the standard error across paths.

Seeding uses a counter-based split of the master seed so that path i sees
the same randomness regardless of how many paths are run, and so that two
configs sharing (seed, path index) and the same draw layout see identical
arrival totals (paired comparisons across policies and look-ahead windows).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from proactivenet import sched
from proactivenet.traffic import (
    LookaheadLaw,
    MulticastSpec,
    PredictionErrorSpec,
    Regime,
    ScriptedTraffic,
    mean_rate,
    multicast_presence,
    prediction_error_counts,
    unicast_counts,
)

REACTIVE = "reactive"
EDF = "edf"
SELFISH = "selfish"
DYNAMIC = "dynamic"
MULTICAST = "multicast"
PI2 = "pi2"

POLICIES = (REACTIVE, EDF, SELFISH, DYNAMIC, MULTICAST, PI2)

# backlog sizes beyond this abort the path as pathologically unstable
BACKLOG_OVERFLOW = 10**9


class SimConfigError(ValueError):
    pass


class PathOverflowError(RuntimeError):
    """A path's backlog exceeded the overflow guard (unstable run)."""


def default_warmup(tmax: int) -> int:
    return max(100, 10 * (tmax + 1))


@dataclass(frozen=True)
class SimConfig:
    """One simulation setup.

    Traffic roles are optional and policy-dependent: `regime`+`law` drive
    the single-class policies (reactive ignores the law); `rate` overrides
    the regime's mean for stress runs at or beyond the critical load, which
    the scaling regimes exclude by construction; `secondary` adds
    an urgent secondary class for the two-class policies, `pred_error`
    replaces regime/law for imperfect-prediction runs, `multicast` (plus
    optionally `regime` as the unicast stream for pi2) drives the
    multicast policies.
    """

    C: int
    policy: str
    slots: int
    seed: int
    warmup: int | None = None
    regime: Regime | None = None
    rate: float | None = None
    law: LookaheadLaw | None = None
    secondary: Regime | None = None
    pred_error: PredictionErrorSpec | None = None
    multicast: MulticastSpec | None = None
    f: float = 0.5
    scripted: ScriptedTraffic | None = None
    trace: bool = False

    def __post_init__(self):
        if self.C < 0:
            raise SimConfigError("C must be nonnegative")
        if self.policy not in POLICIES:
            raise SimConfigError(f"unknown policy {self.policy!r}")
        if self.slots < 1:
            raise SimConfigError("slots must be positive")
        if self.effective_warmup >= self.slots:
            raise SimConfigError("slots must exceed warmup")
        if self.policy in (SELFISH, DYNAMIC) and self.secondary is None:
            raise SimConfigError(f"policy {self.policy} needs a secondary traffic spec")
        if self.policy in (MULTICAST, PI2) and self.multicast is None:
            raise SimConfigError(f"policy {self.policy} needs a multicast spec")
        self.check_stability()

    @property
    def tmax(self) -> int:
        if self.pred_error is not None:
            return self.pred_error.T
        if self.law is not None and self.policy != REACTIVE:
            return self.law.tmax
        if self.scripted is not None:
            return self.scripted.lookahead
        return 0

    @property
    def primary_rate(self) -> float | None:
        """Mean arrivals per slot of the primary stream, honoring `rate`."""
        if self.rate is not None:
            return self.rate
        if self.regime is None:
            return None
        if self.C < 1:
            return 0.0
        return mean_rate(self.regime, self.C)

    @property
    def effective_warmup(self) -> int:
        if self.warmup is not None:
            return self.warmup
        return default_warmup(self.tmax)

    def check_stability(self) -> None:
        """Warn (never raise) when the configured rates exceed capacity."""
        if self.C == 0:
            return
        load = self.primary_rate or 0.0
        if self.secondary is not None:
            load += mean_rate(self.secondary, self.C)
        if self.pred_error is not None:
            try:
                load += sum(self.pred_error.rates(self.C))
            except ValueError:
                pass
        if self.multicast is not None:
            L = self.multicast.num_sources(self.C)
            load += L * self.multicast.source_prob()
        if load >= self.C:
            warnings.warn(
                f"offered load {load:.4g} >= capacity {self.C}; run is unstable "
                "but still well-defined",
                stacklevel=2,
            )


@dataclass(frozen=True)
class PathResult:
    """Outage counts of one sample path, post-warmup slots only."""

    outage_slots: dict[str, int]
    total_counted_slots: int
    per_slot_trace: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        for cls, cnt in self.outage_slots.items():
            if not 0 <= cnt <= self.total_counted_slots:
                raise ValueError(f"outage count for {cls!r} out of range")

    def ratio(self, cls: str) -> float:
        return self.outage_slots[cls] / self.total_counted_slots


@dataclass(frozen=True)
class OutageEstimate:
    """Mean outage ratio across paths with its standard error."""

    p_hat: float
    stderr: float
    n_paths: int
    per_path_values: tuple[float, ...]

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("p_hat must lie in [0,1]")

    @classmethod
    def from_values(cls, values: list[float]) -> "OutageEstimate":
        arr = np.asarray(values, dtype=float)
        n = len(arr)
        se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(
            p_hat=float(arr.mean()), stderr=se, n_paths=n, per_path_values=tuple(arr)
        )


def path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    """Counter-split RNG: adding paths never perturbs earlier paths."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, path_index)))


def run_path(cfg: SimConfig, seed_index: int = 0) -> PathResult:
    """Execute one sample path and count post-warmup outage slots per class.

    Deterministic given (cfg.seed, seed_index).  Raises PathOverflowError if
    a backlog counter exceeds the overflow guard.
    """
    rng = path_rng(cfg.seed, seed_index)
    if cfg.policy == REACTIVE:
        return _run_reactive(cfg, rng)
    if cfg.policy == EDF:
        return _run_edf(cfg, rng)
    if cfg.policy in (SELFISH, DYNAMIC):
        return _run_two_class(cfg, rng)
    if cfg.policy == MULTICAST:
        return _run_multicast(cfg, rng)
    return _run_pi2(cfg, rng)


def _trace_or_none(cfg, flags):
    if not cfg.trace:
        return None
    return {cls: np.asarray(v, dtype=bool) for cls, v in flags.items()}


def _scripted_matrix(cfg: SimConfig) -> np.ndarray:
    s = cfg.scripted
    out = np.zeros((cfg.slots, s.lookahead + 1), dtype=np.int64)
    n = min(cfg.slots, len(s.counts))
    out[:n, s.lookahead] = s.counts[:n]
    return out


def _run_reactive(cfg: SimConfig, rng: np.random.Generator) -> PathResult:
    if cfg.scripted is not None:
        arr = _scripted_matrix(cfg).sum(axis=1)
    elif cfg.primary_rate is None:
        arr = np.zeros(cfg.slots, dtype=np.int64)
    else:
        arr = rng.poisson(cfg.primary_rate, cfg.slots)
    outage = arr > cfg.C
    w = cfg.effective_warmup
    counted = outage[w:]
    return PathResult(
        outage_slots={"default": int(counted.sum())},
        total_counted_slots=cfg.slots - w,
        per_slot_trace=_trace_or_none(cfg, {"default": counted}),
    )


def _arrival_matrix(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.scripted is not None:
        return _scripted_matrix(cfg)
    if cfg.pred_error is not None:
        return prediction_error_counts(cfg.pred_error, cfg.C, rng, cfg.slots)
    lam = cfg.primary_rate
    if lam is None:
        return np.zeros((cfg.slots, 1), dtype=np.int64)
    law = cfg.law or LookaheadLaw.deterministic(0)
    if cfg.rate is None and cfg.regime is not None:
        return unicast_counts(cfg.regime, law, cfg.C, rng, cfg.slots)
    out = np.zeros((cfg.slots, law.tmax + 1), dtype=np.int64)
    if law.is_deterministic:
        out[:, law.tmax] = rng.poisson(lam, cfg.slots)
    else:
        for k in range(law.tmin, law.tmax + 1):
            p = law.pmf(k)
            if p > 0.0:
                out[:, k] = rng.poisson(p * lam, cfg.slots)
    return out


def _run_edf(cfg: SimConfig, rng: np.random.Generator) -> PathResult:
    arr = _arrival_matrix(cfg, rng)
    tmax = arr.shape[1] - 1
    C = cfg.C
    w = cfg.effective_warmup
    counts = [0] * (tmax + 1)
    flags = np.zeros(cfg.slots, dtype=bool)
    for n in range(cfg.slots):
        row = arr[n]
        for k in range(tmax + 1):
            counts[k] += int(row[k])
        # serve earliest deadlines first
        left = C
        for k in range(tmax + 1):
            if left == 0:
                break
            s = counts[k] if counts[k] <= left else left
            counts[k] -= s
            left -= s
        if counts[0] > 0:
            flags[n] = True
        # expired requests dropped by the shift
        for k in range(tmax):
            counts[k] = counts[k + 1]
        counts[tmax] = 0
        if counts[0] > BACKLOG_OVERFLOW:
            raise PathOverflowError(f"backlog overflow at slot {n + 1}")
    counted = flags[w:]
    return PathResult(
        outage_slots={"default": int(counted.sum())},
        total_counted_slots=cfg.slots - w,
        per_slot_trace=_trace_or_none(cfg, {"default": counted}),
    )


def _run_two_class(cfg: SimConfig, rng: np.random.Generator) -> PathResult:
    arr_p = _arrival_matrix(cfg, rng)
    lam_s = mean_rate(cfg.secondary, cfg.C)
    arr_s = rng.poisson(lam_s, cfg.slots)
    tmax = arr_p.shape[1] - 1
    C = cfg.C
    w = cfg.effective_warmup
    f = cfg.f if cfg.policy == DYNAMIC else 1.0
    counts = [0] * (tmax + 1)
    flags_p = np.zeros(cfg.slots, dtype=bool)
    flags_s = np.zeros(cfg.slots, dtype=bool)
    for n in range(cfg.slots):
        row = arr_p[n]
        for k in range(tmax + 1):
            counts[k] += int(row[k])
        if cfg.policy == DYNAMIC:
            nonurgent = sum(counts[1:])
            cap_p = min(C, counts[0] + sched._round_fraction(f * nonurgent))
        else:
            cap_p = C
        left = cap_p
        for k in range(tmax + 1):
            if left == 0:
                break
            s = counts[k] if counts[k] <= left else left
            counts[k] -= s
            left -= s
        served_p = cap_p - left
        if counts[0] > 0:
            flags_p[n] = True
        q_s = int(arr_s[n])
        leftover = C - served_p
        if q_s > leftover:
            flags_s[n] = True
        for k in range(tmax):
            counts[k] = counts[k + 1]
        counts[tmax] = 0
        if counts[0] > BACKLOG_OVERFLOW:
            raise PathOverflowError(f"backlog overflow at slot {n + 1}")
    cp, cs = flags_p[w:], flags_s[w:]
    return PathResult(
        outage_slots={"primary": int(cp.sum()), "secondary": int(cs.sum())},
        total_counted_slots=cfg.slots - w,
        per_slot_trace=_trace_or_none(cfg, {"primary": cp, "secondary": cs}),
    )


def _run_multicast(cfg: SimConfig, rng: np.random.Generator) -> PathResult:
    pres = multicast_presence(cfg.multicast, cfg.C, rng, cfg.slots)
    T = cfg.law.tmax if cfg.law is not None else 0
    C = cfg.C
    w = cfg.effective_warmup
    # residual[s] = slots left for source s; -1 when idle
    L = pres.shape[1]
    residual = np.full(L, -1, dtype=np.int64)
    flags = np.zeros(cfg.slots, dtype=bool)
    for n in range(cfg.slots):
        newly = pres[n]
        fresh = newly & (residual < 0)
        residual[fresh] = T
        # EDF over pending sources, ties by source id (argsort is stable)
        pending = np.flatnonzero(residual >= 0)
        if pending.size:
            order = pending[np.argsort(residual[pending], kind="stable")]
            served = order[:C]
            n_urgent = int((residual[pending] == 0).sum())
            served_urgent = int((residual[served] == 0).sum())
            if n_urgent > served_urgent:
                flags[n] = True
            residual[served] = -1
        residual[residual == 0] = -1
        residual[residual > 0] -= 1
    counted = flags[w:]
    return PathResult(
        outage_slots={"multicast": int(counted.sum()), "default": int(counted.sum())},
        total_counted_slots=cfg.slots - w,
        per_slot_trace=_trace_or_none(cfg, {"multicast": counted}),
    )


def _run_pi2(cfg: SimConfig, rng: np.random.Generator) -> PathResult:
    pres = multicast_presence(cfg.multicast, cfg.C, rng, cfg.slots)
    if cfg.regime is not None:
        arr_u = rng.poisson(mean_rate(cfg.regime, cfg.C), cfg.slots)
    else:
        arr_u = np.zeros(cfg.slots, dtype=np.int64)
    T = cfg.law.tmax if cfg.law is not None else 0
    C = cfg.C
    w = cfg.effective_warmup
    L = pres.shape[1]
    residual = np.full(L, -1, dtype=np.int64)
    flags_m = np.zeros(cfg.slots, dtype=bool)
    flags_u = np.zeros(cfg.slots, dtype=bool)
    for n in range(cfg.slots):
        fresh = pres[n] & (residual < 0)
        residual[fresh] = T
        urgent = np.flatnonzero(residual == 0)
        later = np.flatnonzero(residual > 0)
        left = C
        take = min(urgent.size, left)
        if urgent.size > take:
            flags_m[n] = True
        residual[urgent[:take]] = -1
        left -= take
        q_u = int(arr_u[n])
        served_u = min(q_u, left)
        if q_u > served_u:
            flags_u[n] = True
        left -= served_u
        if left and later.size:
            order = later[np.argsort(residual[later], kind="stable")]
            residual[order[:left]] = -1
        residual[residual == 0] = -1
        residual[residual > 0] -= 1
    cm, cu = flags_m[w:], flags_u[w:]
    combined = cm | cu
    return PathResult(
        outage_slots={
            "multicast": int(cm.sum()),
            "unicast": int(cu.sum()),
            "combined": int(combined.sum()),
        },
        total_counted_slots=cfg.slots - w,
        per_slot_trace=_trace_or_none(
            cfg, {"multicast": cm, "unicast": cu, "combined": combined}
        ),
    )


def estimate_outage(cfg: SimConfig, n_paths: int) -> dict[str, OutageEstimate]:
    """Average per-path outage ratios over independent sub-seeded paths."""
    if n_paths < 2:
        raise SimConfigError("n_paths must be >= 2")
    values: dict[str, list[float]] = {}
    for i in range(n_paths):
        res = run_path(cfg, i)
        for cls in res.outage_slots:
            values.setdefault(cls, []).append(res.ratio(cls))
    return {cls: OutageEstimate.from_values(v) for cls, v in values.items()}


def sweep_capacity(
    cfg: SimConfig, C_grid: list[int], n_paths: int
) -> list[tuple[int, dict[str, OutageEstimate]]]:
    """One outage estimate per capacity, with common sub-seeding across the grid."""
    if any(b <= a for a, b in zip(C_grid, C_grid[1:])):
        raise SimConfigError("capacity grid must be strictly ascending")
    out = []
    for C in C_grid:
        out.append((C, estimate_outage(replace(cfg, C=C), n_paths)))
    return out


def estimate_diversity(curve: list[tuple[int, float]], regime: Regime) -> float:
    """Least-squares decay rate of -ln p against C (linear regime) or
    C ln C (polynomial regime).

    Requires at least 3 points with strictly positive outage estimates.
    """
    if len(curve) < 3:
        raise ValueError("need at least 3 (C, p_hat) points")
    C = np.asarray([c for c, _ in curve], dtype=float)
    p = np.asarray([v for _, v in curve], dtype=float)
    if np.any(p <= 0.0):
        raise ValueError(
            "p_hat = 0 in curve: capacity grid too large for the sample size "
            "(tail unobservable)"
        )
    x = C if regime.kind == "linear" else C * np.log(C)
    slope, _ = np.polyfit(x, -np.log(p), 1)
    return float(slope)
