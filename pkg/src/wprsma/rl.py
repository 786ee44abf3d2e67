"""Tabular Q-learning over the Downlink/Uplink choice of each slot.

The agent observes, per device, the quantised received power the device
could deliver to the HAP (``min(E / tau, p0) * g``), picks a mode
epsilon-greedily and obtains the slot reward from the per-slot optimisers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .model import (ChannelRealization, Mode, NetworkConfig, Schedule, SlotDecision,
                    build_schedule, harvest_power, sample_channels)
from .slotopt import SlotState, solve_dlp, solve_ulp, solve_ulp_fixed_order

DOWNLINK, UPLINK = 0, 1
QTABLE_VERSION = 1


def discretize(energy, gains, config: NetworkConfig, levels: int = 16,
               unit_power: float = 1e-6) -> tuple[int, ...]:
    """Quantised deliverable uplink power per device, saturating at ``levels - 1``."""
    energy = np.asarray(energy, float)
    gains = np.asarray(gains, float)
    tx = np.minimum(energy / config.slot_tau, config.device_power_max)
    lv = np.floor(tx * gains / unit_power)
    return tuple(int(v) for v in np.minimum(levels - 1, np.maximum(lv, 0)))


@dataclass
class QTable:
    values: dict = field(default_factory=dict)   # state -> array([Q_down, Q_up])
    visits: dict = field(default_factory=dict)   # state -> array([n_down, n_up])

    def q(self, state) -> np.ndarray:
        v = self.values.get(tuple(state))
        return v if v is not None else np.zeros(2)

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict:
        rows = [{"state": list(s), "q": [float(x) for x in self.values[s]],
                 "visits": [int(x) for x in self.visits.get(s, (0, 0))]}
                for s in sorted(self.values)]
        return {"version": QTABLE_VERSION, "entries": rows}

    @classmethod
    def from_dict(cls, data: dict) -> "QTable":
        if data.get("version") != QTABLE_VERSION:
            raise ValueError(f"unsupported Q-table version {data.get('version')!r}")
        table = cls()
        for row in data["entries"]:
            s = tuple(int(v) for v in row["state"])
            table.values[s] = np.array(row["q"], float)
            table.visits[s] = np.array(row["visits"], int)
        return table

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTable) or self.values.keys() != other.values.keys():
            return False
        return all(np.array_equal(self.values[s], other.values[s])
                   and np.array_equal(self.visits.get(s, np.zeros(2, int)),
                                      other.visits.get(s, np.zeros(2, int)))
                   for s in self.values)


def select_action(table: QTable, state, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(2))
    q = table.q(state)
    return UPLINK if q[UPLINK] > q[DOWNLINK] else DOWNLINK


def decay_epsilon(epsilon: float, delta: float) -> float:
    return max(0.0, epsilon - delta)


def bellman_update(table: QTable, state, action: int, reward: float, next_state,
                   alpha: float, gamma: float, terminal: bool = False) -> None:
    s = tuple(state)
    q = table.values.get(s)
    if q is None:
        q = table.values[s] = np.zeros(2)
        table.visits[s] = np.zeros(2, dtype=int)
    future = 0.0 if terminal else float(np.max(table.q(next_state)))
    q[action] = (1.0 - alpha) * q[action] + alpha * (reward + gamma * future)
    table.visits[s][action] += 1


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 200_000          # slot-steps of experience
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    decay: float = 1e-5           # subtracted from epsilon after every slot
    levels: int = 16
    unit_power: float = 1e-6
    seed: int = 0
    uplink: str = "full"          # "full" order search or "fixed" gain order

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not self.decay > 0:
            raise ValueError("decay must be positive")
        if not 0 <= self.alpha <= 1 or not 0 <= self.gamma < 1:
            raise ValueError("alpha must lie in [0, 1] and gamma in [0, 1)")
        if self.uplink not in ("full", "fixed"):
            raise ValueError("uplink must be 'full' or 'fixed'")
        object.__setattr__(self, "epsilon_start", min(1.0, max(0.0, self.epsilon_start)))


def slot_action(action: int, gains, energy, config: NetworkConfig,
                uplink: str = "full") -> SlotDecision:
    state = SlotState(gains, energy, config)
    if action == DOWNLINK:
        return solve_dlp(state)
    if uplink == "fixed":
        return solve_ulp_fixed_order(state)
    return solve_ulp(state)


def _next_energy(energy, decision: SlotDecision, gains, config: NetworkConfig) -> np.ndarray:
    if decision.mode == Mode.DOWNLINK:
        received = (1.0 - decision.rho) * config.hap_power_max * gains
        gain = harvest_power(received, config) * config.slot_tau
    else:
        gain = 0.0
    # spend never exceeds the stored energy: the slot optimisers cap it
    return np.clip(energy + gain - decision.spend(config), 0.0, config.battery_capacity)


ChannelSampler = Callable[[np.random.Generator], ChannelRealization]


def train(config: NetworkConfig, train_config: TrainConfig,
          channel_sampler: ChannelSampler | None = None,
          monitor: Callable[[int, QTable], None] | None = None,
          monitor_every: int = 0) -> QTable:
    """Run ``train_config.steps`` slot-steps of epsilon-greedy Q-learning.

    Episodes last ``config.horizon_T`` slots and restart from the configured
    initial energy with fresh channels.  ``monitor(step, table)`` is called
    every ``monitor_every`` steps and once at the end.
    """
    tc = train_config
    rng = np.random.default_rng(tc.seed)
    sampler = channel_sampler or (lambda r: sample_channels(config, r))
    table = QTable()
    eps = tc.epsilon_start
    T = config.horizon_T
    step = 0
    while step < tc.steps and T > 0:
        channels = sampler(rng)
        energy = np.full(config.n_devices, float(config.initial_energy))
        state = discretize(energy, channels.gains[0], config, tc.levels, tc.unit_power)
        for t in range(T):
            if step >= tc.steps:
                break
            g = channels.gains[t]
            action = select_action(table, state, eps, rng)
            dec = slot_action(action, g, energy, config, tc.uplink)
            reward = dec.reward(config)
            energy = _next_energy(energy, dec, g, config)
            terminal = t == T - 1
            nxt = state if terminal else discretize(energy, channels.gains[t + 1], config,
                                                     tc.levels, tc.unit_power)
            bellman_update(table, state, action, reward, nxt, tc.alpha, tc.gamma, terminal)
            eps = decay_epsilon(eps, tc.decay)
            state = nxt
            step += 1
            if monitor and monitor_every and step % monitor_every == 0:
                monitor(step, table)
    if monitor and (not monitor_every or step % monitor_every):
        monitor(step, table)
    return table


def evaluate(table: QTable, config: NetworkConfig, channels: ChannelRealization,
             train_config: TrainConfig | None = None) -> Schedule:
    """Greedy rollout over ``channels`` using the exact harvester."""
    tc = train_config or TrainConfig()
    energy = np.full(config.n_devices, float(config.initial_energy))
    decisions = []
    for t in range(config.horizon_T):
        g = channels.gains[t]
        state = discretize(energy, g, config, tc.levels, tc.unit_power)
        q = table.q(state)
        action = UPLINK if q[UPLINK] > q[DOWNLINK] else DOWNLINK
        dec = slot_action(action, g, energy, config, tc.uplink)
        decisions.append(dec)
        energy = _next_energy(energy, dec, g, config)
    return build_schedule(decisions, channels, config)


def learning_curve(config: NetworkConfig, train_config: TrainConfig,
                   eval_channels: list[ChannelRealization], every: int,
                   channel_sampler: ChannelSampler | None = None):
    """Mean greedy throughput on ``eval_channels`` recorded every ``every`` steps."""
    from .model import weighted_throughput

    steps, values = [], []

    def record(step, table):
        scores = [weighted_throughput(evaluate(table, config, ch, train_config), config)
                  for ch in eval_channels]
        steps.append(step)
        values.append(float(np.mean(scores)))

    table = train(config, train_config, channel_sampler, monitor=record, monitor_every=every)
    return np.array(steps), np.array(values), table


def convergence_step(steps, values, tolerance: float = 0.02) -> int:
    """First checkpoint after which every later value stays within ``tolerance`` of the last."""
    steps, values = np.asarray(steps), np.asarray(values, float)
    final = values[-1]
    band = tolerance * max(abs(final), 1e-12)
    inside = np.abs(values - final) <= band
    for i in range(len(values)):
        if inside[i:].all():
            return int(steps[i])
    return int(steps[-1])
