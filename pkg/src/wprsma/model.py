"""Domain types and physical-layer formulas for the wirelessly powered RSMA network.

Devices and sub-messages are indexed from zero: device ``n`` in ``0..N-1``
and uplink sub-message ``j`` in ``{0, 1}``.  Energies are in joules, powers
in watts, and times in seconds throughout.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

# Battery: 2500 mAh at a nominal 1.2 V.
DEFAULT_BATTERY_J = 2.5 * 3600.0 * 1.2

ENERGY_TOL = 1e-12
SINR_TOL = 1e-9


class Mode(IntEnum):
    DOWNLINK = 0
    UPLINK = 1


class EnergyViolation(ValueError):
    """A device spent more energy than it had stored."""

    def __init__(self, device: int, deficit: float, slot: int | None = None):
        self.device = device
        self.deficit = deficit
        self.slot = slot
        where = f"slot {slot}, " if slot is not None else ""
        super().__init__(f"{where}device {device}: energy overdraw of {deficit:.3e} J")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    n_devices: int = 2
    horizon_T: int = 10
    slot_tau: float = 1e-3
    distances: tuple[float, ...] | None = None
    pathloss_beta: float = 2.0
    hap_power_max: float = 2.0
    device_power_max: float = 10e-3
    sinr_threshold_db: float = 2.0
    noise_density: float = 1e-13
    bandwidth: float = 20e6
    eh_M: float = 0.024
    eh_a: float = 150.0
    eh_b: float = 0.014
    battery_capacity: float = DEFAULT_BATTERY_J
    downlink_weight: float = 0.4
    initial_energy: float = 0.0
    n_intervals: int = 16
    rng_seed: int = 0

    def __post_init__(self):
        if self.distances is None:
            object.__setattr__(self, "distances", (5.0,) * self.n_devices)
        else:
            object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        self.validate()

    def validate(self) -> None:
        if self.n_devices < 1:
            raise ConfigError("n_devices must be >= 1")
        if self.horizon_T < 0:
            raise ConfigError("horizon_T must be >= 0")
        if len(self.distances) != self.n_devices:
            raise ConfigError(
                f"expected {self.n_devices} distances, got {len(self.distances)}")
        positive = ["slot_tau", "pathloss_beta", "hap_power_max", "device_power_max",
                    "noise_density", "bandwidth", "eh_M", "eh_a", "eh_b",
                    "battery_capacity"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if any(not d > 0 for d in self.distances):
            raise ConfigError("distances must be > 0")
        if not 0.0 <= self.downlink_weight <= 1.0:
            raise ConfigError("downlink_weight must lie in [0, 1]")
        if self.initial_energy < 0:
            raise ConfigError("initial_energy must be >= 0")
        if self.n_intervals < 1:
            raise ConfigError("n_intervals must be >= 1")

    @property
    def gamma(self) -> float:
        """SINR threshold as a linear ratio."""
        return 10.0 ** (self.sinr_threshold_db / 10.0)

    @property
    def noise_power(self) -> float:
        return self.noise_density * self.bandwidth

    @property
    def uplink_weight(self) -> float:
        return 1.0 - self.downlink_weight

    @property
    def distance_array(self) -> np.ndarray:
        return np.asarray(self.distances, dtype=float)

    def with_devices(self, n: int, distance: float | None = None) -> "NetworkConfig":
        d = self.distances[0] if distance is None else distance
        return dataclasses.replace(self, n_devices=n, distances=(d,) * n)

    def replace(self, **changes) -> "NetworkConfig":
        if "n_devices" in changes and "distances" not in changes:
            changes["distances"] = (self.distances[0],) * changes["n_devices"]
        if "distance" in changes:
            d = changes.pop("distance")
            n = changes.get("n_devices", self.n_devices)
            changes["distances"] = (float(d),) * n
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["distances"] = list(self.distances)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)


def load_config(path: str | Path) -> NetworkConfig:
    with open(path) as fh:
        return NetworkConfig.from_dict(json.load(fh))


def save_config(config: NetworkConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class ChannelRealization:
    fading: np.ndarray  # (T, N)
    gains: np.ndarray   # (T, N)

    @property
    def horizon(self) -> int:
        return self.gains.shape[0]

    @property
    def n_devices(self) -> int:
        return self.gains.shape[1]

    def slot(self, t: int) -> np.ndarray:
        return self.gains[t]


def channels_from_fading(fading: np.ndarray, config: NetworkConfig) -> ChannelRealization:
    fading = np.asarray(fading, dtype=float)
    gains = fading * config.distance_array ** (-config.pathloss_beta)
    return ChannelRealization(fading=fading, gains=gains)


def sample_channels(config: NetworkConfig, rng: np.random.Generator,
                    horizon: int | None = None) -> ChannelRealization:
    """Draw i.i.d. unit-mean exponential fading and apply distance path loss."""
    T = config.horizon_T if horizon is None else horizon
    fading = rng.exponential(1.0, size=(T, config.n_devices))
    return channels_from_fading(fading, config)


# ---------------------------------------------------------------------------
# Energy harvesting


def harvest_power(p_in, config: NetworkConfig):
    """Logistic harvester output, shifted so that zero input yields zero output."""
    M, a, b = config.eh_M, config.eh_a, config.eh_b
    omega = expit(-a * b)  # 1 / (1 + e^{ab})
    p_in = np.asarray(p_in, dtype=float)
    out = (M * expit(a * (p_in - b)) - M * omega) / (1.0 - omega)
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def harvest_headroom(p_in, config: NetworkConfig):
    """Saturation deficit ``M - harvest_power(p_in)`` in a form that stays accurate near ``M``.

    In floating point the harvester output rounds to ``M`` once the input is a
    few tenths of a watt; the complementary logistic keeps the deficit
    representable far beyond that.
    """
    M, a, b = config.eh_M, config.eh_a, config.eh_b
    omega = expit(-a * b)
    p_in = np.asarray(p_in, dtype=float)
    out = np.minimum(M * expit(-a * (p_in - b)) / (1.0 - omega), M)
    return out if out.ndim else float(out)


def harvested_energy(p_hap, g, rho, config: NetworkConfig):
    """Energy collected over one slot when a fraction ``rho`` feeds the decoder."""
    received = (1.0 - np.asarray(rho, dtype=float)) * p_hap * np.asarray(g, dtype=float)
    return harvest_power(received, config) * config.slot_tau


# ---------------------------------------------------------------------------
# Decoding orders


@dataclass(frozen=True)
class DecodingOrder:
    """SIC order: ``sequence[0]`` is decoded first.

    ``positions`` maps each message to its rank; the first-decoded message has
    rank ``2N`` and the last-decoded rank ``1``.  A message sees interference
    from every active message of strictly smaller rank.
    """

    sequence: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seq = tuple((int(n), int(j)) for n, j in self.sequence)
        object.__setattr__(self, "sequence", seq)
        n_dev = len(seq) // 2
        expected = {(n, j) for n in range(n_dev) for j in (0, 1)}
        if len(seq) % 2 or set(seq) != expected or len(set(seq)) != len(seq):
            raise ValueError(f"not a permutation of the 2N messages: {seq}")

    @property
    def n_devices(self) -> int:
        return len(self.sequence) // 2

    @property
    def positions(self) -> dict[tuple[int, int], int]:
        total = len(self.sequence)
        return {msg: total - i for i, msg in enumerate(self.sequence)}

    def later(self, message: tuple[int, int]) -> tuple[tuple[int, int], ...]:
        """Messages decoded after ``message``, i.e. its potential interferers."""
        i = self.sequence.index(tuple(message))
        return self.sequence[i + 1:]


# ---------------------------------------------------------------------------
# Slot decisions and schedules


@dataclass
class SlotDecision:
    mode: Mode
    mu_c: float
    mu: np.ndarray          # (N,)
    rho: np.ndarray         # (N,)
    common_ok: np.ndarray   # (N,) int
    private_ok: np.ndarray  # (N,) int
    tx_power: np.ndarray    # (N, 2)
    uplink_ok: np.ndarray   # (N, 2) int
    order: DecodingOrder | None = None
    order_index: int = -1
    # McCormick surrogates: omega_c[n] ~ mu_c*rho[n], nu[m, n] ~ mu[m]*rho[n].
    omega_c: np.ndarray | None = None
    nu: np.ndarray | None = None

    @classmethod
    def idle(cls, n: int, mode: Mode = Mode.DOWNLINK) -> "SlotDecision":
        return cls(mode=Mode(mode), mu_c=0.0, mu=np.zeros(n), rho=np.zeros(n),
                   common_ok=np.zeros(n, dtype=int), private_ok=np.zeros(n, dtype=int),
                   tx_power=np.zeros((n, 2)), uplink_ok=np.zeros((n, 2), dtype=int),
                   omega_c=np.zeros(n), nu=np.zeros((n, n)))

    @property
    def n_devices(self) -> int:
        return len(self.mu)

    def surrogates(self) -> tuple[np.ndarray, np.ndarray]:
        """Envelope surrogates, defaulting to the true products when absent."""
        oc = self.omega_c if self.omega_c is not None else self.mu_c * self.rho
        nu = self.nu if self.nu is not None else np.outer(self.mu, self.rho)
        return np.asarray(oc, float), np.asarray(nu, float)

    def downlink_count(self) -> np.ndarray:
        return np.asarray(self.common_ok) + np.asarray(self.private_ok)

    def uplink_count(self) -> np.ndarray:
        return np.asarray(self.uplink_ok).sum(axis=1)

    def spend(self, config: NetworkConfig) -> np.ndarray:
        return np.asarray(self.tx_power).sum(axis=1) * config.slot_tau

    def reward(self, config: NetworkConfig) -> float:
        return float(config.downlink_weight * self.downlink_count().sum()
                     + config.uplink_weight * self.uplink_count().sum())


@dataclass
class Schedule:
    decisions: list[SlotDecision]
    energy: np.ndarray      # (T+1, N); energy[t] is the level at the start of slot t
    harvested: np.ndarray   # (T, N)
    harvest_model: str = "exact"
    intervals: object = None  # IntervalSet behind a piecewise harvest model

    @property
    def horizon(self) -> int:
        return len(self.decisions)

    @property
    def modes(self) -> list[Mode]:
        return [d.mode for d in self.decisions]

    def downlink_counts(self) -> np.ndarray:
        n = self.energy.shape[1]
        if not self.decisions:
            return np.zeros((0, n), dtype=int)
        return np.array([d.downlink_count() for d in self.decisions], dtype=int)

    def uplink_counts(self) -> np.ndarray:
        n = self.energy.shape[1]
        if not self.decisions:
            return np.zeros((0, n), dtype=int)
        return np.array([d.uplink_count() for d in self.decisions], dtype=int)

    def throughput_report(self, config: NetworkConfig) -> dict:
        return {
            "downlink": self.downlink_counts(),
            "uplink": self.uplink_counts(),
            "weighted": weighted_throughput(self, config),
        }


# ---------------------------------------------------------------------------
# SINR


def downlink_sinr(decision: SlotDecision, g: np.ndarray, n: int,
                  config: NetworkConfig) -> tuple[float, float]:
    """Common and private SINR at device ``n`` with the true mu*rho products.

    The interference sums are kept exactly in this form:
    the common-message sum scales every private coefficient by ``g[n]`` while
    the private-message sum uses each interferer's own gain.
    """
    if decision.mode != Mode.DOWNLINK:
        raise ValueError("downlink_sinr requires a Downlink decision")
    g = np.asarray(g, float)
    P, N0 = config.hap_power_max, config.noise_power
    mu = np.asarray(decision.mu, float)
    rho_n = float(decision.rho[n])
    common = decision.mu_c * rho_n * P * g[n] / (mu.sum() * rho_n * P * g[n] + N0)
    others = np.arange(len(mu)) != n
    private = mu[n] * rho_n * P * g[n] / ((mu[others] * rho_n * P * g[others]).sum() + N0)
    return float(common), float(private)


def downlink_sinr_envelope(decision: SlotDecision, g: np.ndarray, n: int,
                           config: NetworkConfig) -> tuple[float, float]:
    """Same ratios as :func:`downlink_sinr` evaluated on the envelope surrogates."""
    if decision.mode != Mode.DOWNLINK:
        raise ValueError("downlink_sinr_envelope requires a Downlink decision")
    g = np.asarray(g, float)
    P, N0 = config.hap_power_max, config.noise_power
    oc, nu = decision.surrogates()
    col = nu[:, n]
    common = oc[n] * P * g[n] / (col.sum() * P * g[n] + N0)
    others = np.arange(len(col)) != n
    private = col[n] * P * g[n] / ((col[others] * P * g[others]).sum() + N0)
    return float(common), float(private)


def uplink_sinr(decision: SlotDecision, order: DecodingOrder, g: np.ndarray,
                message: tuple[int, int], config: NetworkConfig) -> float:
    if decision.mode != Mode.UPLINK:
        raise ValueError("uplink_sinr requires an Uplink decision")
    message = (int(message[0]), int(message[1]))
    if message not in order.positions:
        raise ValueError(f"message {message} is not part of the decoding order")
    g = np.asarray(g, float)
    p, U = decision.tx_power, decision.uplink_ok
    interference = sum(p[m][l] * g[m] for m, l in order.later(message) if U[m][l])
    n, j = message
    return float(p[n][j] * g[n] / (interference + config.noise_power))


# ---------------------------------------------------------------------------
# Energy and throughput


def step_energy(e_prev, decision: SlotDecision, harvested,
                config: NetworkConfig, slot: int | None = None) -> np.ndarray:
    e_prev = np.asarray(e_prev, float)
    gain = np.asarray(harvested, float) if decision.mode == Mode.DOWNLINK else 0.0
    raw = e_prev + gain - decision.spend(config)
    worst = int(np.argmin(raw))
    if raw[worst] < -ENERGY_TOL:
        raise EnergyViolation(worst, float(-raw[worst]), slot)
    return np.clip(raw, 0.0, config.battery_capacity)


def weighted_throughput(schedule: Schedule, config: NetworkConfig) -> float:
    if schedule.horizon == 0:
        return 0.0
    down = schedule.downlink_counts().sum()
    up = schedule.uplink_counts().sum()
    return float(config.downlink_weight * down + config.uplink_weight * up)


def slot_harvest(decision: SlotDecision, g: np.ndarray, config: NetworkConfig,
                 model: str = "exact", intervals=None) -> np.ndarray:
    """Energy harvested in one slot under the chosen harvester semantics."""
    n = decision.n_devices
    if decision.mode != Mode.DOWNLINK:
        return np.zeros(n)
    received = (1.0 - np.asarray(decision.rho, float)) * config.hap_power_max * np.asarray(g, float)
    if model == "exact":
        return harvest_power(received, config) * config.slot_tau
    if model == "piecewise":
        from .linearize import piecewise_harvest
        if intervals is None:
            raise ValueError("piecewise harvest requires an IntervalSet")
        return np.array([piecewise_harvest(p, intervals) for p in received]) * config.slot_tau
    raise ValueError(f"unknown harvest model {model!r}")


def build_schedule(decisions: Sequence[SlotDecision], channels: ChannelRealization,
                   config: NetworkConfig, harvest_model: str = "exact",
                   intervals=None, initial_energy=None) -> Schedule:
    """Roll the energy recursion forward over a list of decisions."""
    n = config.n_devices
    T = len(decisions)
    energy = np.zeros((T + 1, n))
    energy[0] = config.initial_energy if initial_energy is None else initial_energy
    harvested = np.zeros((T, n))
    for t, dec in enumerate(decisions):
        harvested[t] = slot_harvest(dec, channels.gains[t], config, harvest_model, intervals)
        energy[t + 1] = step_energy(energy[t], dec, harvested[t], config, slot=t)
    return Schedule(list(decisions), energy, harvested, harvest_model,
                    intervals if harvest_model == "piecewise" else None)


# ---------------------------------------------------------------------------
# Validation


@dataclass
class Violation:
    slot: int
    device: int | None
    kind: str
    detail: str

    def __str__(self) -> str:
        dev = "" if self.device is None else f" device {self.device}"
        return f"slot {self.slot}{dev}: {self.kind}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    advisories: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def __bool__(self) -> bool:
        return self.ok


def _is_binary(x) -> bool:
    x = np.asarray(x)
    return bool(np.all((x == 0) | (x == 1)))


def _sinr_ok(value: float, gamma: float) -> bool:
    return value >= gamma - SINR_TOL * max(1.0, gamma)


def _envelope_ok(w: float, x: float, y: float, tol: float = 1e-9) -> bool:
    return (w >= -tol and w <= x + tol and w <= y + tol and w >= x + y - 1.0 - tol)


def validate_schedule(schedule: Schedule, channels: ChannelRealization,
                      config: NetworkConfig, *, harvest: str | None = None,
                      intervals=None, downlink: str = "envelope",
                      initial_energy=None) -> ValidationReport:
    """Re-check every slot constraint of a candidate schedule.

    ``downlink="envelope"`` certifies common/private flags on the McCormick
    surrogates the optimizers work with; ``downlink="exact"`` uses the true
    mu*rho products.  ``harvest`` selects the harvester model used to replay
    the energy recursion ("exact" logistic or "piecewise" interval model); it
    defaults to the model the schedule was built with.  Checks that fail only
    under the exact physics are collected in ``advisories``.  The replay
    starts from ``initial_energy`` (per device) when given, otherwise from
    the configured level.
    """
    rep = ValidationReport()
    N, T = config.n_devices, schedule.horizon
    harvest = harvest or schedule.harvest_model
    if intervals is None:
        intervals = schedule.intervals
    if channels.gains.shape[0] < T or channels.gains.shape[1] != N:
        rep.violations.append(Violation(0, None, "dimensions",
                                        f"channels {channels.gains.shape} vs T={T}, N={N}"))
        return rep
    if schedule.energy.shape != (T + 1, N) or schedule.harvested.shape != (T, N):
        rep.violations.append(Violation(0, None, "dimensions", "energy/harvest arrays"))
        return rep
    gamma, tol = config.gamma, 1e-9

    def bad(t, n, kind, detail):
        rep.violations.append(Violation(t, n, kind, detail))

    def note(t, n, kind, detail):
        rep.advisories.append(Violation(t, n, kind, detail))

    for t, dec in enumerate(schedule.decisions):
        g = channels.gains[t]
        if dec.mode not in (Mode.DOWNLINK, Mode.UPLINK):
            bad(t, None, "mode", f"invalid mode {dec.mode!r}")
            continue
        flags = (dec.common_ok, dec.private_ok, dec.uplink_ok)
        if not all(_is_binary(f) for f in flags):
            bad(t, None, "binary", "flags must be 0/1")
            continue
        mu, rho, p = (np.asarray(dec.mu, float), np.asarray(dec.rho, float),
                      np.asarray(dec.tx_power, float))
        oc, nu = dec.surrogates()
        if dec.mode == Mode.DOWNLINK:
            if np.any(np.abs(p) > tol) or np.any(dec.uplink_ok):
                bad(t, None, "mode", "uplink activity in a Downlink slot")
            if dec.mu_c < -tol or np.any(mu < -tol) or dec.mu_c + mu.sum() > 1 + tol:
                bad(t, None, "hap power", f"coefficients sum to {dec.mu_c + mu.sum():.6g}")
            if np.any(rho < -tol) or np.any(rho > 1 + tol):
                bad(t, None, "power split", "rho outside [0, 1]")
            for n in range(N):
                if dec.common_ok[n] or dec.private_ok[n]:
                    exact_c, exact_p = downlink_sinr(dec, g, n, config)
                    if downlink == "envelope":
                        ok_env = _envelope_ok(oc[n], dec.mu_c, rho[n]) and all(
                            _envelope_ok(nu[m, n], mu[m], rho[n]) for m in range(N))
                        if not ok_env:
                            bad(t, n, "envelope", "surrogate outside McCormick envelope")
                        sc, sp = downlink_sinr_envelope(dec, g, n, config)
                    else:
                        sc, sp = exact_c, exact_p
                    if dec.common_ok[n] and not _sinr_ok(sc, gamma):
                        bad(t, n, "SINR", f"common SINR {sc:.6g} < {gamma:.6g}")
                    if dec.private_ok[n] and not _sinr_ok(sp, gamma):
                        bad(t, n, "SINR", f"private SINR {sp:.6g} < {gamma:.6g}")
                    if downlink == "envelope":
                        if dec.common_ok[n] and not _sinr_ok(exact_c, gamma):
                            note(t, n, "SINR (exact products)", f"common {exact_c:.3g}")
                        if dec.private_ok[n] and not _sinr_ok(exact_p, gamma):
                            note(t, n, "SINR (exact products)", f"private {exact_p:.3g}")
        else:
            if (abs(dec.mu_c) > tol or np.any(np.abs(mu) > tol) or np.any(np.abs(rho) > tol)
                    or np.any(dec.common_ok) or np.any(dec.private_ok)):
                bad(t, None, "mode", "downlink activity in an Uplink slot")
            if np.any(p < -tol):
                bad(t, None, "device power", "negative transmit power")
            for n in range(N):
                if p[n].sum() > config.device_power_max * (1 + 1e-9) + 1e-15:
                    bad(t, n, "device power", f"{p[n].sum():.6g} W > p0")
            if np.any(dec.uplink_ok):
                order = dec.order
                if order is None or order.n_devices != N:
                    bad(t, None, "order", "active uplink slot without a valid decoding order")
                else:
                    for n in range(N):
                        for j in (0, 1):
                            if dec.uplink_ok[n][j]:
                                s = uplink_sinr(dec, order, g, (n, j), config)
                                if not _sinr_ok(s, gamma):
                                    bad(t, n, "SINR", f"uplink message {j} SINR {s:.6g} < {gamma:.6g}")

    # Energy replay under the requested harvester semantics.
    def replay(model):
        e = np.zeros((T + 1, N))
        e[0] = config.initial_energy if initial_energy is None else initial_energy
        h = np.zeros((T, N))
        events = []
        for t, dec in enumerate(schedule.decisions):
            h[t] = slot_harvest(dec, channels.gains[t], config, model, intervals)
            raw = e[t] + (h[t] if dec.mode == Mode.DOWNLINK else 0.0) - dec.spend(config)
            for n in np.flatnonzero(raw < -ENERGY_TOL):
                events.append((t, int(n), float(-raw[n])))
            e[t + 1] = np.clip(raw, 0.0, config.battery_capacity)
        return e, h, events

    try:
        e_ref, h_ref, events = replay(harvest)
    except ValueError as exc:
        bad(0, None, "harvest model", str(exc))
        return rep
    for t, n, deficit in events:
        bad(t, n, "energy", f"overdraw of {deficit:.3e} J")
    scale = max(1.0, float(np.abs(e_ref).max(initial=0.0)))
    if not np.allclose(schedule.harvested, h_ref, rtol=1e-9, atol=ENERGY_TOL):
        t, n = np.unravel_index(np.argmax(np.abs(schedule.harvested - h_ref)), h_ref.shape)
        bad(int(t), int(n), "harvest", "stored harvest disagrees with the harvester model")
    if not events and not np.allclose(schedule.energy, e_ref, rtol=0, atol=ENERGY_TOL * scale):
        t, n = np.unravel_index(np.argmax(np.abs(schedule.energy - e_ref)), e_ref.shape)
        bad(int(t), int(n), "energy", "stored trajectory disagrees with the energy recursion")
    if harvest != "exact":
        _, _, exact_events = replay("exact")
        for t, n, deficit in exact_events:
            note(t, n, "energy (exact harvester)", f"overdraw of {deficit:.3e} J")
    rep.violations.sort(key=lambda v: v.slot)
    return rep


def validate_slot(decision: SlotDecision, g: np.ndarray, energy: np.ndarray,
                  config: NetworkConfig, **kwargs) -> ValidationReport:
    """Validate a single decision taken with stored energies ``energy``."""
    g = np.asarray(g, float).reshape(1, -1)
    channels = ChannelRealization(np.ones_like(g), g)
    sched = build_schedule([decision], channels, config, initial_energy=energy) \
        if _affordable(decision, energy, config) else _raw_schedule(decision, channels, config, energy)
    return validate_schedule(sched, channels, config, initial_energy=energy, **kwargs)


def _affordable(decision, energy, config) -> bool:
    return bool(np.all(np.asarray(energy) - decision.spend(config) >= -ENERGY_TOL))


def _raw_schedule(decision, channels, config, energy) -> Schedule:
    h = slot_harvest(decision, channels.gains[0], config)
    e1 = np.asarray(energy, float) + h - decision.spend(config)
    return Schedule([decision], np.vstack([energy, e1]), h[None, :])
