"""Piecewise-linear harvester model and McCormick envelopes for mu*rho products."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import GE, LE, Constraint
from .model import NetworkConfig, harvest_power

BREAKPOINT_SPAN = 1e-6


@dataclass(frozen=True)
class IntervalSet:
    """Contiguous received-power intervals ``(lower[s], upper[s]]`` covering ``(0, p_cap]``.

    ``edges`` keeps the geometric breakpoints used to compute each efficiency;
    ``lower[0]`` is zero so the first interval reaches down to no input.
    """

    edges: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eta: np.ndarray
    p_cap: float

    @property
    def size(self) -> int:
        return len(self.eta)

    def locate(self, p_in: float) -> int:
        if p_in <= 0:
            return 0
        if p_in > self.p_cap * (1 + 1e-12):
            raise ValueError(f"received power {p_in:.6g} W exceeds the interval cap {self.p_cap:.6g} W")
        return min(int(np.searchsorted(self.upper, p_in, side="left")), self.size - 1)


def interval_efficiency(p_lo: float, p_hi: float, config: NetworkConfig) -> float:
    return float(harvest_power(p_lo, config) / (2 * p_lo) + harvest_power(p_hi, config) / (2 * p_hi))


def build_intervals(config: NetworkConfig, S: int | None = None,
                    p_cap: float | None = None) -> IntervalSet:
    """Geometric breakpoints from ``p_cap * 1e-6`` up to ``p_cap``."""
    S = config.n_intervals if S is None else S
    if S < 1:
        raise ValueError("need at least one interval")
    if p_cap is None:
        p_cap = config.hap_power_max * max(config.distance_array ** (-config.pathloss_beta))
    if not p_cap > 0:
        raise ValueError("p_cap must be positive")
    edges = np.geomspace(p_cap * BREAKPOINT_SPAN, p_cap, S + 1)
    edges[-1] = p_cap
    eta = np.array([interval_efficiency(edges[s], edges[s + 1], config) for s in range(S)])
    lower = edges[:-1].copy()
    lower[0] = 0.0
    return IntervalSet(edges=edges, lower=lower, upper=edges[1:].copy(), eta=eta, p_cap=float(p_cap))


def intervals_for_channels(config: NetworkConfig, gains: np.ndarray, S: int | None = None) -> IntervalSet:
    """Interval set whose cap covers every received power reachable on ``gains``."""
    return build_intervals(config, S, config.hap_power_max * float(np.max(gains)))


def piecewise_harvest(p_in: float, intervals: IntervalSet, rel_tol: float = 1e-9) -> float:
    """Interval-model harvested power ``eta_s * p_in``.

    A point on (or within ``rel_tol`` of) a shared breakpoint satisfies the
    indicator rows of both neighbouring intervals, so it takes the larger of
    the two secant values, as an optimizer choosing the interval would.
    """
    if p_in <= 0:
        return 0.0
    s = intervals.locate(p_in)
    tol = rel_tol * intervals.p_cap
    best = intervals.eta[s]
    for k in (s - 1, s + 1):
        if 0 <= k < intervals.size and intervals.lower[k] - tol <= p_in <= intervals.upper[k] + tol:
            best = max(best, intervals.eta[k])
    return float(best * p_in)


@dataclass(frozen=True)
class BilinearEnvelope:
    omega: object
    mu: object
    rho: object
    mu_bounds: tuple[float, float]
    rho_bounds: tuple[float, float]
    constraints: tuple[Constraint, ...]


def envelope(mu_id, rho_id, omega_id, mu_bounds=(0.0, 1.0), rho_bounds=(0.0, 1.0)) -> BilinearEnvelope:
    """McCormick inequalities bounding ``omega = mu * rho`` on a box.

    With unit bounds these reduce to ``max(0, mu + rho - 1) <= omega <= min(mu, rho)``.
    """
    mL, mU = mu_bounds
    rL, rU = rho_bounds

    def row(c_mu, c_rho, sense, rhs):
        coeffs = {omega_id: 1.0}
        coeffs[mu_id] = coeffs.get(mu_id, 0.0) - c_mu
        coeffs[rho_id] = coeffs.get(rho_id, 0.0) - c_rho
        return Constraint(coeffs, sense, rhs)

    cons = (
        row(rL, mL, GE, -mL * rL),   # omega >= mL*rho + mu*rL - mL*rL
        row(rU, mU, GE, -mU * rU),   # omega >= mU*rho + mu*rU - mU*rU
        row(rL, mU, LE, -mU * rL),   # omega <= mU*rho + mu*rL - mU*rL
        row(rU, mL, LE, -mL * rU),   # omega <= mL*rho + mu*rU - mL*rU
    )
    return BilinearEnvelope(omega_id, mu_id, rho_id, tuple(mu_bounds), tuple(rho_bounds), cons)


def envelope_interval(mu: float, rho: float, mu_bounds=(0.0, 1.0), rho_bounds=(0.0, 1.0)) -> tuple[float, float]:
    """Range of ``omega`` admitted by the envelope at a fixed ``(mu, rho)``."""
    mL, mU = mu_bounds
    rL, rU = rho_bounds
    lo = max(mL * rho + mu * rL - mL * rL, mU * rho + mu * rU - mU * rU)
    hi = min(mU * rho + mu * rL - mU * rL, mL * rho + mu * rU - mL * rU)
    return lo, hi
