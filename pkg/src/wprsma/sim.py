"""Episode engine, baseline policies and parameter sweeps."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .model import (ChannelRealization, DecodingOrder, Mode, NetworkConfig, Schedule,
                    SlotDecision, build_schedule, channels_from_fading, validate_schedule,
                    weighted_throughput)
from .rl import (DOWNLINK, UPLINK, QTable, TrainConfig, _next_energy, evaluate, slot_action,
                 train)

CSV_HEADER = ["policy", "param", "value", "run", "seed", "weighted_throughput",
              "downlink_msgs", "uplink_msgs", "wall_ms"]
SWEEP_PARAMS = ("distance", "hap_power", "sic_threshold", "n_devices", "decay")
SCHEDULE_VERSION = 1


class PolicyKind(str, Enum):
    MILP = "Milp"
    MILP_REDUCED = "MilpReduced"
    QLEARNING = "QLearning"
    TDD = "Tdd"
    RANDOM = "Random"


class ScheduleInvalid(RuntimeError):
    def __init__(self, policy: str, report):
        self.report = report
        super().__init__(f"{policy} produced an invalid schedule: {report.first}")


@dataclass
class Policy:
    kind: PolicyKind
    schedule: Schedule | None = None
    table: QTable | None = None
    train_config: TrainConfig | None = None
    rng: np.random.Generator | None = None
    uplink: str = "full"

    @classmethod
    def milp(cls, schedule: Schedule, reduced: bool = False) -> "Policy":
        return cls(PolicyKind.MILP_REDUCED if reduced else PolicyKind.MILP, schedule=schedule)

    @classmethod
    def qlearning(cls, table: QTable, train_config: TrainConfig | None = None) -> "Policy":
        tc = train_config or TrainConfig()
        return cls(PolicyKind.QLEARNING, table=table, train_config=tc, uplink=tc.uplink)

    @classmethod
    def tdd(cls, uplink: str = "full") -> "Policy":
        return cls(PolicyKind.TDD, uplink=uplink)

    @classmethod
    def random(cls, seed, uplink: str = "full") -> "Policy":
        return cls(PolicyKind.RANDOM, rng=np.random.default_rng(seed), uplink=uplink)


def _online_episode(modes_fn, config: NetworkConfig, channels: ChannelRealization,
                    uplink: str) -> Schedule:
    energy = np.full(config.n_devices, float(config.initial_energy))
    decisions = []
    for t in range(config.horizon_T):
        g = channels.gains[t]
        dec = slot_action(modes_fn(t), g, energy, config, uplink)
        decisions.append(dec)
        energy = _next_energy(energy, dec, g, config)
    return build_schedule(decisions, channels, config)


def run_episode(policy: Policy, config: NetworkConfig, channels: ChannelRealization,
                check: bool = True) -> Schedule:
    """Play one horizon under ``policy``; every schedule is validated before returning."""
    kind = policy.kind
    if kind in (PolicyKind.MILP, PolicyKind.MILP_REDUCED):
        if policy.schedule is None:
            raise ValueError("MILP policies carry a precomputed schedule")
        sched = policy.schedule
    elif kind == PolicyKind.QLEARNING:
        sched = evaluate(policy.table, config, channels, policy.train_config)
    elif kind == PolicyKind.TDD:
        sched = _online_episode(lambda t: DOWNLINK if t % 2 == 0 else UPLINK,
                                config, channels, policy.uplink)
    elif kind == PolicyKind.RANDOM:
        rng = policy.rng
        sched = _online_episode(lambda t: int(rng.integers(2)), config, channels, policy.uplink)
    else:
        raise ValueError(f"unknown policy kind {kind!r}")
    if check:
        report = validate_schedule(sched, channels, config)
        if not report.ok:
            raise ScheduleInvalid(kind.value, report)
    return sched


# ---------------------------------------------------------------------------
# Sweeps


@dataclass
class ExperimentSpec:
    param: str
    values: list
    runs: int = 1000
    base: NetworkConfig = field(default_factory=NetworkConfig)
    seed_base: int = 0
    policies: list = field(default_factory=lambda: ["QLearning", "Tdd", "Random"])
    train_steps: int = 200_000
    train_decay: float = 1e-5
    milp_solver: str = "highs"
    fixed_order: bool = False
    # fading drawn per run only, shared by every grid value (common random numbers)
    common_fading: bool = True

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"param must be one of {SWEEP_PARAMS}")
        if not self.values:
            raise ValueError("value grid must be non-empty")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if isinstance(self.base, dict):
            self.base = NetworkConfig.from_dict(self.base)
        unknown = set(self.policies) - {k.value for k in PolicyKind}
        if unknown:
            raise ValueError(f"unknown policies {sorted(unknown)}")
        if self.param == "n_devices":
            self.fixed_order = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def config_for(self, value) -> NetworkConfig:
        b = self.base
        if self.param == "distance":
            return b.replace(distances=(float(value),) * b.n_devices)
        if self.param == "hap_power":
            return b.replace(hap_power_max=float(value))
        if self.param == "sic_threshold":
            return b.replace(sinr_threshold_db=float(value))
        if self.param == "n_devices":
            d = b.distance_array[0]
            return b.replace(n_devices=int(value), distances=(float(d),) * int(value))
        return b

    def decay_for(self, value) -> float:
        return float(value) if self.param == "decay" else self.train_decay

    def max_devices(self) -> int:
        if self.param == "n_devices":
            return int(max(self.values))
        return self.base.n_devices


@dataclass
class ResultRow:
    policy: str
    param: str
    value: float
    run: int
    seed: int
    weighted_throughput: float
    downlink_msgs: int
    uplink_msgs: int
    wall_ms: float

    def as_list(self) -> list:
        return [self.policy, self.param, repr(float(self.value)), self.run, self.seed,
                repr(float(self.weighted_throughput)), self.downlink_msgs, self.uplink_msgs,
                f"{self.wall_ms:.3f}"]


def cell_seed(seed_base: int, value_index: int, run: int) -> int:
    return int(np.random.SeedSequence([seed_base, value_index, run]).generate_state(1)[0])


def fading_for(spec: ExperimentSpec, value_index: int, run: int, T: int) -> np.ndarray:
    """Fading matrix for one cell, wide enough for the largest device count."""
    key = [spec.seed_base, run] if spec.common_fading else [spec.seed_base, value_index, run]
    rng = np.random.default_rng(np.random.SeedSequence([*key, 0xFAD]))
    return rng.exponential(1.0, size=(T, spec.max_devices()))


def run_sweep(spec: ExperimentSpec, out: str | Path | None = None,
              tables: dict | None = None, timing: bool = True) -> list[ResultRow]:
    """Evaluate every policy on every (value, run) cell with shared channels.

    Rows are produced in (value, run, policy) order.  When ``out`` is given
    the CSV is written incrementally, so an interrupted sweep leaves every
    completed row on disk.  ``tables`` may supply pre-trained Q-tables keyed
    by value index.  With ``timing=False`` the wall-time column is zero,
    which makes the file byte-reproducible.
    """
    from .milp import solve_horizon

    rows: list[ResultRow] = []
    fh = writer = None
    if out is not None:
        fh = open(out, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
    uplink = "fixed" if spec.fixed_order else "full"
    try:
        for vi, value in enumerate(spec.values):
            cfg = spec.config_for(value)
            table = tc = None
            if "QLearning" in spec.policies:
                tc = TrainConfig(steps=spec.train_steps, decay=spec.decay_for(value),
                                 seed=spec.seed_base, uplink=uplink)
                table = (tables or {}).get(vi)
                if table is None:
                    table = train(cfg, tc)
            for run in range(spec.runs):
                seed = cell_seed(spec.seed_base, vi, run)
                fading = fading_for(spec, vi, run, cfg.horizon_T)[:, :cfg.n_devices]
                channels = channels_from_fading(fading, cfg)
                for name in spec.policies:
                    t0 = time.perf_counter()
                    if name in ("Milp", "MilpReduced"):
                        sol = solve_horizon(cfg, channels, reduced=name == "MilpReduced",
                                            solver=spec.milp_solver)
                        policy = Policy.milp(sol.schedule, name == "MilpReduced")
                    elif name == "QLearning":
                        policy = Policy.qlearning(table, tc)
                    elif name == "Tdd":
                        policy = Policy.tdd(uplink)
                    else:
                        policy = Policy.random(seed, uplink)
                    sched = run_episode(policy, cfg, channels)
                    wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
                    row = ResultRow(name, spec.param, float(value), run, seed,
                                    weighted_throughput(sched, cfg),
                                    int(sched.downlink_counts().sum()),
                                    int(sched.uplink_counts().sum()), wall)
                    rows.append(row)
                    if writer is not None:
                        writer.writerow(row.as_list())
                        fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return rows


def read_rows(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [ResultRow(r[0], r[1], float(r[2]), int(r[3]), int(r[4]), float(r[5]),
                          int(r[6]), int(r[7]), float(r[8])) for r in reader]


def summarize(rows: list[ResultRow]) -> dict:
    """Mean weighted throughput per (policy, value)."""
    acc: dict = {}
    for r in rows:
        acc.setdefault((r.policy, r.value), []).append(r.weighted_throughput)
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


# ---------------------------------------------------------------------------
# Schedule files


def _arr(x):
    return None if x is None else np.asarray(x).tolist()


def schedule_to_dict(schedule: Schedule, channels: ChannelRealization,
                     config: NetworkConfig) -> dict:
    slots = []
    for dec in schedule.decisions:
        slots.append({
            "mode": "D" if dec.mode == Mode.DOWNLINK else "U",
            "mu_c": float(dec.mu_c), "mu": _arr(dec.mu), "rho": _arr(dec.rho),
            "omega_c": _arr(dec.omega_c), "nu": _arr(dec.nu),
            "C": _arr(dec.common_ok), "D": _arr(dec.private_ok),
            "p": _arr(dec.tx_power), "U": _arr(dec.uplink_ok),
            "order_index": int(dec.order_index),
            "order": None if dec.order is None else [list(m) for m in dec.order.sequence],
        })
    iv = schedule.intervals
    return {
        "version": SCHEDULE_VERSION,
        "config": config.to_dict(),
        "gains": _arr(channels.gains),
        "fading": _arr(channels.fading),
        "harvest_model": schedule.harvest_model,
        "intervals": None if iv is None else {
            "edges": _arr(iv.edges), "lower": _arr(iv.lower), "upper": _arr(iv.upper),
            "eta": _arr(iv.eta), "p_cap": iv.p_cap},
        "energy": _arr(schedule.energy),
        "harvested": _arr(schedule.harvested),
        "slots": slots,
    }


def schedule_from_dict(data: dict):
    """Inverse of :func:`schedule_to_dict`; returns (schedule, channels, config)."""
    from .linearize import IntervalSet

    if data.get("version") != SCHEDULE_VERSION:
        raise ValueError(f"unsupported schedule version {data.get('version')!r}")
    config = NetworkConfig.from_dict(data["config"])
    channels = ChannelRealization(np.array(data["fading"], float), np.array(data["gains"], float))
    decisions = []
    for s in data["slots"]:
        f = lambda k, dt=float: None if s[k] is None else np.array(s[k], dt)
        decisions.append(SlotDecision(
            mode=Mode.DOWNLINK if s["mode"] == "D" else Mode.UPLINK,
            mu_c=float(s["mu_c"]), mu=f("mu"), rho=f("rho"),
            common_ok=f("C", int), private_ok=f("D", int),
            tx_power=f("p"), uplink_ok=f("U", int),
            order=None if s["order"] is None else DecodingOrder(tuple(tuple(m) for m in s["order"])),
            order_index=int(s["order_index"]), omega_c=f("omega_c"), nu=f("nu")))
    iv = data.get("intervals")
    intervals = None if iv is None else IntervalSet(
        np.array(iv["edges"]), np.array(iv["lower"]), np.array(iv["upper"]),
        np.array(iv["eta"]), float(iv["p_cap"]))
    n = config.n_devices
    T = len(decisions)
    energy = np.array(data["energy"], float).reshape(T + 1, n)
    harvested = np.array(data["harvested"], float).reshape(T, n)
    schedule = Schedule(decisions, energy, harvested, data["harvest_model"], intervals)
    return schedule, channels, config


def save_schedule(path, schedule: Schedule, channels: ChannelRealization,
                  config: NetworkConfig) -> None:
    Path(path).write_text(json.dumps(schedule_to_dict(schedule, channels, config), indent=1))


def load_schedule(path):
    return schedule_from_dict(json.loads(Path(path).read_text()))
