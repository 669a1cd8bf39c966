"""Exact ground truth on small instances, independent of the simulator.

Three facilities:
  - stationary outage probabilities of the slotted system computed by
    state-space enumeration of a truncated Markov chain (power iteration),
  - exact probabilities of the necessary / sufficient outage events that
    sandwich the simulated outage probability,
  - residual checks of every derived root constant against its defining
    equation.

These are the anti-regression backstop for both the simulator and the
closed forms: they share no code path with either.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from proactivenet import analytic
from proactivenet.analytic import Constant, poisson_tail
from proactivenet.sim import EDF, REACTIVE, SimConfig


class OracleError(ValueError):
    pass


MAX_STATES = 10**6


def default_cap(lam: float, C: int, T: int) -> int:
    return math.ceil(lam + 12.0 * math.sqrt(lam)) + C * (T + 1)


def _poisson_pmf_lumped(lam: float, cap: int) -> np.ndarray:
    """pmf on {0..cap} with all tail mass lumped at cap."""
    p = np.zeros(cap + 1)
    term = math.exp(-lam)
    for q in range(cap):
        p[q] = term
        term *= lam / (q + 1)
    p[cap] = max(0.0, 1.0 - p.sum())
    return p


@dataclass(frozen=True)
class TruncatedChain:
    """Truncated chain over backlog states with its per-state outage law."""

    states: list[tuple[int, ...]]
    transition: np.ndarray
    outage_prob: np.ndarray
    truncation_mass: float

    def __post_init__(self):
        rows = self.transition.sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-12):
            raise OracleError("transition rows must sum to 1")

    def stationary(self, tol: float = 1e-12, max_iter: int = 10**6) -> np.ndarray:
        pi = np.full(len(self.states), 1.0 / len(self.states))
        for _ in range(max_iter):
            nxt = pi @ self.transition
            if np.abs(nxt - pi).sum() < tol:
                return nxt
            pi = nxt
        raise OracleError("power iteration did not converge")


def build_edf_chain(C: int, lam: float, T: int, cap: int) -> TruncatedChain:
    """Chain of the single-class EDF system with a deterministic look-ahead
    of T slots.

    State = backlog counts at residual deadlines 0..T-1 at slot start (the
    current slot's arrivals land at residual T).  Each bucket is capped at
    `cap`; clipped probability mass is lumped at the cap and reported.
    """
    if T < 1:
        raise OracleError("build_edf_chain needs T >= 1; reactive is stateless")
    n_states = (cap + 1) ** T
    if n_states > MAX_STATES:
        raise OracleError(
            f"state space {n_states} exceeds {MAX_STATES}; reduce C, T or the rate"
        )
    pmf = _poisson_pmf_lumped(lam, cap)
    states = list(itertools.product(range(cap + 1), repeat=T))
    index = {s: i for i, s in enumerate(states)}
    P = np.zeros((n_states, n_states))
    out = np.zeros(n_states)
    clipped = 0.0
    for s in states:
        i = index[s]
        for q, pq in enumerate(pmf):
            if pq == 0.0:
                continue
            v = list(s) + [q]
            left = C
            for k in range(T + 1):
                take = min(v[k], left)
                v[k] -= take
                left -= take
            if v[0] > 0:
                out[i] += pq
            nxt = v[1:]
            for k in range(T):
                if nxt[k] > cap:
                    nxt[k] = cap
                    clipped += pq
            P[i, index[tuple(nxt)]] += pq
    return TruncatedChain(
        states=states, transition=P, outage_prob=out, truncation_mass=clipped
    )


@dataclass(frozen=True)
class StationaryResult:
    value: float
    truncation_mass: float
    n_states: int


def exact_outage_stationary(cfg: SimConfig, cap: int | None = None) -> StationaryResult:
    """Stationary outage probability of a small single-class config.

    Supports the reactive policy (any law; outage is iid per slot) and the
    EDF policy with a deterministic look-ahead law.  Other policies need
    state the chain builder does not model and raise OracleError.
    """
    lam = cfg.primary_rate
    if lam is None:
        return StationaryResult(0.0, 0.0, 1)
    if lam == 0.0:
        return StationaryResult(0.0, 0.0, 1)
    T = cfg.tmax
    if cap is None:
        cap = default_cap(lam, cfg.C, T)
    if cfg.policy == REACTIVE or T == 0:
        return StationaryResult(poisson_tail(lam, cfg.C), 0.0, 1)
    if cfg.policy != EDF:
        raise OracleError(f"no exact chain for policy {cfg.policy!r}")
    if cfg.law is not None and not cfg.law.is_deterministic:
        raise OracleError("exact chain supports deterministic look-ahead only")
    chain = build_edf_chain(cfg.C, lam, T, cap)
    pi = chain.stationary()
    return StationaryResult(
        value=float(pi @ chain.outage_prob),
        truncation_mass=chain.truncation_mass,
        n_states=len(chain.states),
    )


# --- exact event bounds ---


def _union_partial_sums(rates: list[float], thresholds: list[int]) -> float:
    """P(exists k: X_0 + ... + X_k > thresholds[k]) for independent Poisson
    X_j ~ rates[j], computed exactly by eliminating the surviving partial
    sums level by level."""
    assert len(rates) == len(thresholds)
    # dist[s] = P(no threshold crossed so far, partial sum = s)
    dist = np.array([1.0])
    crossed = 0.0
    for lam, thr in zip(rates, thresholds):
        pmf = _poisson_pmf_lumped(lam, thr + 1)  # any increment beyond thr crosses
        new = np.convolve(dist, pmf)
        if len(new) > thr + 1:
            crossed += new[thr + 1 :].sum()
            new = new[: thr + 1]
        dist = new
    return min(1.0, float(crossed))


def exact_event_bounds(cfg: SimConfig) -> tuple[float, float]:
    """Exact probabilities (P_L, P_U) of the sufficient and necessary outage
    events that sandwich the simulated steady-state outage probability.

    Deterministic window T: P_L = tail(lam, C(T+1)), P_U = tail((T+1)lam,
    C(T+1)).  Random window: P_L is the exact union over k of {sum of the
    k-earliest window arrivals > C(k+1)}; P_U adds the exact probability of
    the busy-history event to P_L's companion union (a union bound over the
    two dependent events, capped at 1).
    """
    lam = cfg.primary_rate
    if lam is None:
        return 0.0, 0.0
    C = cfg.C
    law = cfg.law
    if law is None or law.is_deterministic:
        T = cfg.tmax
        return (
            poisson_tail(lam, C * (T + 1)),
            poisson_tail((T + 1) * lam, C * (T + 1)),
        )
    tmin, tmax = law.tmin, law.tmax
    # sufficient event: nested partial sums of per-window arrival components
    rates_l = [lam * law.pmf(j) for j in range(tmin, tmax + 1)]
    thr_l = [C * (k + 1) for k in range(tmin, tmax + 1)]
    p_l = _union_partial_sums(rates_l, thr_l)
    # necessary event: busy-history term plus the partial-CDF union
    p_i = poisson_tail(lam * (tmax + 1), C * (tmax + 1))
    rates_j = [lam * law.cdf(j) for j in range(tmin, tmax)]
    thr_j = [C * (k + 1) for k in range(tmin, tmax)]
    p_j = _union_partial_sums(rates_j, thr_j) if rates_j else 0.0
    return p_l, min(1.0, p_i + p_j)


# --- dynamic-capacity chain (two-class, f=0.5, window 1) ---


def build_dynamic_urgent_chain(C: int, lam: float, cap: int) -> TruncatedChain:
    """Chain of the primary urgent count under the dynamic capacity policy
    with f=0.5 and a one-slot look-ahead.

    From urgent count i with arrivals q, the policy grants the primary
    min(C, i + ceil(q/2)) units, urgent requests are served first, and the
    unserved remainder of q becomes the next urgent count:
    q - min(C - i, ceil(q/2)) when i < C, else q.
    """
    if (cap + 1) > MAX_STATES:
        raise OracleError("state space too large")
    pmf = _poisson_pmf_lumped(lam, cap)
    n = cap + 1
    P = np.zeros((n, n))
    out = np.zeros(n)
    clipped = 0.0
    for i in range(n):
        for q, pq in enumerate(pmf):
            if pq == 0.0:
                continue
            if i >= C:
                nxt = q
            else:
                nxt = q - min(C - i, math.ceil(q / 2))
            if i > C:
                out[i] += pq
            if nxt > cap:
                clipped += pq
                nxt = cap
            P[i, nxt] += pq
    return TruncatedChain(
        states=[(i,) for i in range(n)], transition=P, outage_prob=out,
        truncation_mass=clipped,
    )


def chain_drift(chain: TruncatedChain) -> np.ndarray:
    """E[next urgent count - current | current = i] for each state i."""
    levels = np.array([s[0] for s in chain.states], dtype=float)
    return chain.transition @ levels - levels


# --- root verification ---


def _quad_residual(a: float, b: float, c: float, v: float) -> float:
    """Backward-error residual of v in a*v^2 + b*v + c = 0: the raw residual
    scaled by the term magnitudes, so the check is coefficient-scale free."""
    mag = abs(a * v * v) + abs(b * v) + abs(c)
    return abs(a * v * v + b * v + c) / max(mag, 1.0)


def verify_root(constant: Constant) -> float:
    """Normalized |residual| of a derived constant in its defining equation."""
    p = constant.params
    v = constant.value
    name = constant.name
    if name == "y_bar":
        return _quad_residual(p["gs"], p["gp"], -1.0, v)
    if name == "y1":
        E = math.exp(p["gm"] / p["theta"])
        a = p["gu"] * (E - 1.0)
        b = (p["theta"] - 1.0) * E - p["theta"] + p["gu"] + 1.0
        return _quad_residual(a, b, -1.0, v)
    if name == "y2":
        x = analytic.x_m(p["gm"], p["theta"], p["T"]).value
        w = p["T"] + 1
        a = w * p["gu"] * x
        b = w * p["gu"] * (1.0 - x) - w * x + p["theta"] * x
        c = -w * (1.0 - x)
        return _quad_residual(a, b, c, v)
    if name == "y4":
        A = -math.expm1(-p["gm"] / p["theta"])
        a = p["gu"] * A
        b = p["gu"] * (1.0 - A) + 2.0 * p["theta"] * A - 2.0 * A
        c = -2.0 * (1.0 - A)
        return _quad_residual(a, b, c, v)
    if name == "x_m":
        return abs(v + math.expm1(-(p["T"] + 1) * p["gm"] / p["theta"]))
    if name == "A_m":
        return abs(v + math.expm1(-p["gm"] / p["theta"]))
    raise OracleError(f"no defining equation registered for {name!r}")
