"""Full-horizon mixed-integer model of the joint uplink/downlink schedule.

The builder assembles every slot constraint (mode exclusivity, HAP and device
power budgets, big-M SINR activation for common/private/uplink messages,
decoding-order selection, energy recursion) together with the interval model
of the harvester and McCormick envelopes for the mu*rho products.  Models are
solved exactly by :func:`branch_and_bound` on top of :mod:`wprsma.lp`.

Unit conventions inside the model: powers in watts, stored energy in
microjoules, SINR rows divided by the noise power.
"""

from __future__ import annotations

import heapq
import itertools
import math
from fractions import Fraction
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import lp as lpmod
from .linearize import IntervalSet, envelope, intervals_for_channels
from .lp import EQ, GE, LE, LinearProgram, LpBuilder, LpStatus
from .model import (ChannelRealization, DecodingOrder, Mode, NetworkConfig, Schedule,
                    SlotDecision, build_schedule)

ORDER_CAP = 720
BIG_M_SAFETY = 2.0
ENERGY_SCALE = 1e6  # model energies in microjoules
INT_TOL = 1e-6


# ---------------------------------------------------------------------------
# Decoding-order sets


@dataclass(frozen=True)
class OrderSet:
    orders: tuple[DecodingOrder, ...]
    reduced: bool

    def __len__(self) -> int:
        return len(self.orders)

    def __getitem__(self, k: int) -> DecodingOrder:
        return self.orders[k]

    def __iter__(self):
        return iter(self.orders)


def enumerate_orders(N: int, reduced: bool = False, cap: int = ORDER_CAP) -> OrderSet:
    """All SIC orders of the ``2N`` uplink messages, optionally one per swap class.

    The reduced set keeps the representative in which each device's first
    message is decoded before its second.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    count = math.factorial(2 * N) // (2 ** N if reduced else 1)
    if count > cap:
        raise ValueError(f"{count} decoding orders exceed the enumeration cap of {cap}")
    messages = [(n, j) for n in range(N) for j in (0, 1)]
    orders = []
    for perm in itertools.permutations(messages):
        if reduced:
            pos = {m: i for i, m in enumerate(perm)}
            if any(pos[(n, 0)] > pos[(n, 1)] for n in range(N)):
                continue
        orders.append(DecodingOrder(perm))
    return OrderSet(tuple(orders), reduced)


def fixed_gain_order(g: np.ndarray) -> DecodingOrder:
    """Stronger devices are decoded first; a device's two messages stay adjacent."""
    g = np.asarray(g, float)
    devices = sorted(range(len(g)), key=lambda n: (-g[n], n))
    return DecodingOrder(tuple((n, j) for n in devices for j in (0, 1)))


def solution_space_size(N: int, T: int) -> int:
    per_slot = sum(math.comb(2 * N, j) * math.factorial(2 * N) for j in range(1, N + 1))
    return sum(math.comb(T, i) * per_slot ** i for i in range(T + 1))


# ---------------------------------------------------------------------------
# Model


@dataclass
class MilpModel:
    lp: LinearProgram
    integer: np.ndarray
    registry: dict[str, int]
    big_m: dict[str, float] = field(default_factory=dict)
    config: NetworkConfig | None = None
    channels: ChannelRealization | None = None
    orders: OrderSet | None = None
    intervals: IntervalSet | None = None
    row_names: list[str] = field(default_factory=list)

    def var(self, name: str) -> int:
        return self.registry[name]

    def has(self, name: str) -> bool:
        return name in self.registry

    def value(self, x: np.ndarray, name: str, default: float = 0.0) -> float:
        j = self.registry.get(name)
        return default if j is None else float(x[j])

    def fix(self, **fixed: float) -> "MilpModel":
        """Copy of the model with the named variables pinned to values."""
        lb, ub = self.lp.lb.copy(), self.lp.ub.copy()
        for name, v in fixed.items():
            j = self.registry[name]
            lb[j] = ub[j] = v
        out = MilpModel(**{**self.__dict__})
        out.lp = self.lp.with_bounds(lb, ub)
        return out


class _Builder:
    """Shared row generators for the horizon model and the per-slot problems."""

    def __init__(self, config: NetworkConfig):
        self.cfg = config
        self.b = LpBuilder()
        self.integer: list[bool] = []
        self.big_m: dict[str, float] = {}

    def var(self, name, lb=0.0, ub=np.inf, obj=0.0, binary=False):
        self.b.add_var(name, 0.0 if binary else lb, 1.0 if binary else ub, obj)
        self.integer.append(binary)
        return name

    def row(self, coeffs, sense, rhs, name=""):
        self.b.add_row(coeffs, sense, rhs, name)

    def note_m(self, family, value):
        self.big_m[family] = max(self.big_m.get(family, 0.0), value)

    @staticmethod
    def gated(coeffs: dict, rhs: float, gate, coef: float):
        """Add ``coef * gate`` to a row, folding it into ``rhs`` when the gate is the constant 1."""
        coeffs = dict(coeffs)
        if gate is None:
            return coeffs, rhs - coef
        coeffs[gate] = coeffs.get(gate, 0.0) + coef
        return coeffs, rhs

    # -- downlink ----------------------------------------------------------

    def downlink_block(self, t, g, gate, w_down, tiebreak=0.0):
        """Variables and rows for one Downlink-capable slot.

        ``gate`` is the name of the Downlink indicator, or None when the slot
        is fixed to Downlink.  ``tiebreak`` rewards keeping rho small.
        """
        cfg = self.cfg
        N, P, N0, G = cfg.n_devices, cfg.hap_power_max, cfg.noise_power, cfg.gamma
        mu_c = self.var(f"muc_{t}", 0.0, 1.0)
        mu = [self.var(f"mu_{t}_{n}", 0.0, 1.0) for n in range(N)]
        rho = [self.var(f"rho_{t}_{n}", 0.0, 1.0, obj=-tiebreak * P * g[n]) for n in range(N)]
        C = [self.var(f"C_{t}_{n}", obj=w_down, binary=True) for n in range(N)]
        D = [self.var(f"D_{t}_{n}", obj=w_down, binary=True) for n in range(N)]
        wc = [self.var(f"wc_{t}_{n}", 0.0, 1.0) for n in range(N)]
        nu = [[self.var(f"nu_{t}_{m}_{n}", 0.0, 1.0) for n in range(N)] for m in range(N)]

        coeffs, rhs = self.gated({mu_c: 1.0, **{v: 1.0 for v in mu}}, 0.0, gate, -1.0)
        self.row(coeffs, LE, rhs, f"hap_power_{t}")
        for n in range(N):
            for flag in (C[n], D[n], rho[n]):
                coeffs, rhs = self.gated({flag: 1.0}, 0.0, gate, -1.0)
                self.row(coeffs, LE, rhs, f"dl_gate_{flag}")

        for n in range(N):
            for con in envelope(mu_c, rho[n], wc[n]).constraints:
                if len([v for v in con.coeffs.values() if v]) > 1:
                    self.row(con.coeffs, con.sense, con.rhs, f"env_{wc[n]}")
            for m in range(N):
                for con in envelope(mu[m], rho[n], nu[m][n]).constraints:
                    if len([v for v in con.coeffs.values() if v]) > 1:
                        self.row(con.coeffs, con.sense, con.rhs, f"env_{nu[m][n]}")

        for n in range(N):
            # common: wc*Pg_n >= G * (sum_m nu[m][n]*Pg_n + N0), rows divided by N0
            s = P * g[n] / N0
            phi = BIG_M_SAFETY * (G * (N * s + 1.0) + s)
            self.note_m("common_sinr", phi)
            coeffs = {wc[n]: s, C[n]: -phi}
            for m in range(N):
                coeffs[nu[m][n]] = coeffs.get(nu[m][n], 0.0) - G * s
            self.row(coeffs, GE, G - phi, f"common_sinr_{t}_{n}")
            # private: nu[n][n]*Pg_n >= G * (sum_{m!=n} nu[m][n]*Pg_m + N0)
            interf = sum(P * g[m] / N0 for m in range(N) if m != n)
            phi = BIG_M_SAFETY * (G * (interf + 1.0) + s)
            self.note_m("private_sinr", phi)
            coeffs = {nu[n][n]: s, D[n]: -phi}
            for m in range(N):
                if m != n:
                    coeffs[nu[m][n]] = -G * P * g[m] / N0
            self.row(coeffs, GE, G - phi, f"private_sinr_{t}_{n}")
        return rho

    # -- uplink ------------------------------------------------------------

    def uplink_block(self, t, g, gate, orders: OrderSet, w_up, budgets=None, tiebreak=0.0):
        cfg = self.cfg
        N, N0, G, p0 = cfg.n_devices, cfg.noise_power, cfg.gamma, cfg.device_power_max
        p = [[self.var(f"p_{t}_{n}_{j}", 0.0, p0, obj=-tiebreak) for j in (0, 1)] for n in range(N)]
        a = [[self.var(f"a_{t}_{n}_{j}", 0.0, p0) for j in (0, 1)] for n in range(N)]
        U = [[self.var(f"U_{t}_{n}_{j}", obj=w_up, binary=True) for j in (0, 1)] for n in range(N)]
        O = [self.var(f"O_{t}_{k}", binary=True) for k in range(len(orders))]

        for n in range(N):
            cap = p0 if budgets is None else min(p0, budgets[n])
            coeffs, rhs = self.gated({p[n][0]: 1.0, p[n][1]: 1.0}, 0.0, gate, -cap)
            self.row(coeffs, LE, rhs, f"ul_power_{t}_{n}")
        coeffs, rhs = self.gated({o: 1.0 for o in O}, 0.0, gate, -1.0)
        self.row(coeffs, EQ, rhs, f"order_pick_{t}")
        for n in range(N):
            for j in (0, 1):
                coeffs, rhs = self.gated({U[n][j]: 1.0}, 0.0, gate, -1.0)
                self.row(coeffs, LE, rhs, f"ul_gate_{t}_{n}_{j}")
                coeffs = {U[n][j]: 1.0, **{o: -1.0 for o in O}}
                self.row(coeffs, LE, 0.0, f"ul_order_gate_{t}_{n}_{j}")
                # a = p*U, exact because U is binary
                self.row({a[n][j]: 1.0, p[n][j]: -1.0}, LE, 0.0, f"pu_{t}_{n}_{j}")
                self.row({a[n][j]: 1.0, U[n][j]: -p0}, LE, 0.0, f"pu_{t}_{n}_{j}")
                self.row({a[n][j]: 1.0, p[n][j]: -1.0, U[n][j]: -p0}, GE, -p0, f"pu_{t}_{n}_{j}")

        # Any SIC order needs total received power >= N0*((1+G)^c - 1) for c
        # decoded messages; the chords of this convex curve are valid cuts.
        recv = {p[n][j]: g[n] / N0 for n in range(N) for j in (0, 1)}
        ups = {U[n][j]: 1.0 for n in range(N) for j in (0, 1)}
        for c in range(2 * N):
            base, slope = (1 + G) ** c - 1.0, G * (1 + G) ** c
            coeffs = dict(recv)
            for u in ups:
                coeffs[u] = -slope
            self.row(coeffs, GE, base - slope * c, f"ul_cascade_{t}_{c}")
        for n in range(N):
            for j in (0, 1):
                self.row({p[n][j]: g[n] / N0, U[n][j]: -G}, GE, 0.0, f"ul_floor_{t}_{n}_{j}")

        for k, order in enumerate(orders):
            for n, j in order.sequence:
                later = order.later((n, j))
                s = p0 * g[n] / N0
                den_ub = 1.0 + sum(p0 * g[m] / N0 for m, _ in later)
                phi = BIG_M_SAFETY * (G * den_ub + s)
                self.note_m("uplink_sinr", phi)
                coeffs = {p[n][j]: g[n] / N0, O[k]: -phi, U[n][j]: -phi}
                for m, l in later:
                    coeffs[a[m][l]] = coeffs.get(a[m][l], 0.0) - G * g[m] / N0
                self.row(coeffs, GE, G - 2 * phi, f"ul_sinr_{t}_{k}_{n}_{j}")
        return p

    # -- harvester ---------------------------------------------------------

    def harvest_block(self, t, g, gate, rho, intervals: IntervalSet):
        cfg = self.cfg
        N, P = cfg.n_devices, cfg.hap_power_max
        Mh = []
        for n in range(N):
            Pg = P * g[n]
            Js, Ms = [], []
            for s in range(intervals.size):
                J = self.var(f"J_{t}_{s}_{n}", binary=True)
                M = self.var(f"M_{t}_{s}_{n}", 0.0, np.inf)
                Js.append(J)
                Ms.append(M)
                lo, hi, eta = intervals.lower[s], intervals.upper[s], intervals.eta[s]
                # received power Pg*(1 - rho) >= lo*J: no big-M needed since power >= 0
                self.row({rho[n]: -Pg, J: -lo}, GE, -Pg, f"J_lo_{t}_{s}_{n}")
                # received power <= hi + (1 - J)*phi, phi covering the excess Pg - hi
                phi_j = BIG_M_SAFETY * max(Pg - hi, 0.0)
                if phi_j > 0:
                    self.note_m("interval", phi_j)
                    self.row({rho[n]: -Pg, J: phi_j}, LE, hi + phi_j - Pg, f"J_hi_{t}_{s}_{n}")
                phi_m = BIG_M_SAFETY * eta * Pg
                self.note_m("harvest", phi_m)
                self.row({M: 1.0, rho[n]: eta * Pg}, LE, eta * Pg, f"M_le_{t}_{s}_{n}")
                self.row({M: 1.0, rho[n]: eta * Pg, J: -phi_m}, GE, eta * Pg - phi_m,
                         f"M_ge_{t}_{s}_{n}")
                # harvested power inside interval s never exceeds eta_s * min(hi, Pg)
                self.row({M: 1.0, J: -eta * min(hi, Pg)}, LE, 0.0, f"M_on_{t}_{s}_{n}")
            coeffs, rhs = self.gated({J: 1.0 for J in Js}, 0.0, gate, -1.0)
            self.row(coeffs, LE, rhs, f"J_pick_{t}_{n}")
            Mh.append(Ms)
        return Mh

    def finish(self, **meta) -> MilpModel:
        lp = self.b.build()
        return MilpModel(lp=lp, integer=np.array(self.integer, dtype=bool),
                         registry=dict(self.b.index), big_m=dict(self.big_m),
                         row_names=list(self.b.row_names), **meta)


def build_model(config: NetworkConfig, channels: ChannelRealization, orders: OrderSet,
                intervals: IntervalSet | None = None, slot_caps: bool = True) -> MilpModel:
    """Horizon model over the given decoding-order set.

    With ``slot_caps`` each slot also gets two valid cuts bounding its message
    counts by what the slot could carry on its own, times the mode indicator.
    They leave the optimum unchanged and tighten the relaxation of the modes.
    """
    T, N = channels.gains.shape
    if N != config.n_devices:
        raise ValueError(f"channels cover {N} devices, config has {config.n_devices}")
    if T < config.horizon_T:
        raise ValueError(f"channels cover {T} slots, horizon is {config.horizon_T}")
    T = config.horizon_T
    if orders[0].n_devices != N:
        raise ValueError("decoding orders do not match the device count")
    if intervals is None:
        intervals = intervals_for_channels(config, channels.gains[:T] if T else channels.gains)
    bld = _Builder(config)
    scale = ENERGY_SCALE * config.slot_tau
    e_cap = config.battery_capacity * ENERGY_SCALE
    prev = None
    for t in range(T):
        g = channels.gains[t]
        Id = bld.var(f"Id_{t}", binary=True)
        Iu = bld.var(f"Iu_{t}", binary=True)
        bld.row({Id: 1.0, Iu: 1.0}, EQ, 1.0, f"mode_{t}")
        rho = bld.downlink_block(t, g, Id, config.downlink_weight)
        p = bld.uplink_block(t, g, Iu, orders, config.uplink_weight)
        Mh = bld.harvest_block(t, g, Id, rho, intervals)
        if slot_caps:
            from .slotopt import slot_message_caps
            down, up = slot_message_caps(g, config)
            flags = {f"{c}_{t}_{n}": 1.0 for c in "CD" for n in range(N)}
            bld.row({**flags, Id: -float(down)}, LE, 0.0, f"dl_cap_{t}")
            ups = {f"U_{t}_{n}_{j}": 1.0 for n in range(N) for j in (0, 1)}
            bld.row({**ups, Iu: -float(up)}, LE, 0.0, f"ul_cap_{t}")
        for n in range(N):
            E = bld.var(f"E_{t + 1}_{n}", 0.0, e_cap)
            coeffs = {E: 1.0, p[n][0]: scale, p[n][1]: scale}
            for M in Mh[n]:
                coeffs[M] = -scale
            rhs = 0.0
            if prev is None:
                rhs = config.initial_energy * ENERGY_SCALE
            else:
                coeffs[prev[n]] = -1.0
            bld.row(coeffs, EQ, rhs, f"energy_{t + 1}_{n}")
        prev = [f"E_{t + 1}_{n}" for n in range(N)]
    return bld.finish(config=config, channels=channels, orders=orders, intervals=intervals)


# ---------------------------------------------------------------------------
# Branch and bound


@dataclass
class BnbResult:
    status: str               # "optimal" | "infeasible" | "node_limit"
    x: np.ndarray | None
    objective: float
    bound: float
    nodes: int
    gap: float
    seconds: float = 0.0
    schedule: Schedule | None = None

    @property
    def proven(self) -> bool:
        return self.status == "optimal"


def _most_fractional(x, integer, tol):
    frac = np.abs(x - np.round(x))
    score = np.where(integer & (frac > tol), np.minimum(x - np.floor(x), np.ceil(x) - x), -1.0)
    j = int(np.argmax(score))
    return j if score[j] > 0 else -1


def objective_step(c: np.ndarray, integer: np.ndarray) -> float:
    """Smallest possible objective improvement when only integer columns carry cost.

    Returns 0 when a continuous column has a cost or the coefficients have no
    small common rational divisor.
    """
    nz = np.flatnonzero(c)
    if len(nz) == 0 or not integer[nz].all():
        return 0.0
    fracs = [Fraction(float(v)).limit_denominator(10 ** 6) for v in c[nz]]
    if any(abs(float(f) - v) > 1e-12 for f, v in zip(fracs, c[nz])):
        return 0.0
    step = fracs[0]
    for f in fracs[1:]:
        num = math.gcd(step.numerator * f.denominator, f.numerator * step.denominator)
        step = Fraction(num, step.denominator * f.denominator)
    return abs(float(step))


def _solve_lp(lp: LinearProgram, method: str):
    return lpmod.solve(lp, method)


def branch_and_bound(model: MilpModel, *, lp_method: str = "simplex",
                     node_limit: int = 200_000, abs_gap: float = 1e-7,
                     int_tol: float = INT_TOL) -> BnbResult:
    """Exact maximisation over the binary variables of ``model``.

    Best-first on LP bounds, branching on the most fractional binary (lowest
    index on ties).  Until an incumbent exists the search dives depth-first,
    following the rounding direction of the branching variable.
    """
    start = time.perf_counter()
    base = model.lp
    integer = model.integer
    counter = itertools.count()
    best_x, best_obj = None, -np.inf
    # a better integer point must beat the incumbent by at least this much
    margin = max(abs_gap, objective_step(base.c, integer) - 1e-7)
    nodes = 0

    def evaluate(lb, ub):
        nonlocal nodes
        nodes += 1
        return _solve_lp(base.with_bounds(lb, ub), lp_method)

    def polish(x):
        lb, ub = base.lb.copy(), base.ub.copy()
        r = np.round(x[integer])
        lb[integer] = r
        ub[integer] = r
        sol = _solve_lp(base.with_bounds(lb, ub), lp_method)
        return sol if sol.optimal else None

    heap: list = []
    root = evaluate(base.lb.copy(), base.ub.copy())
    if not root.optimal:
        status = "infeasible" if root.status == LpStatus.INFEASIBLE else root.status.value
        return BnbResult(status, None, -np.inf, -np.inf, nodes, 0.0, time.perf_counter() - start)
    pending = [(root, base.lb.copy(), base.ub.copy())]  # depth-first stack of solved nodes

    def process(sol, lb, ub):
        """Handle a solved node; returns children as (bound, lb, ub, prefer_first)."""
        nonlocal best_x, best_obj
        if sol.objective <= best_obj + margin:
            return []
        j = _most_fractional(sol.x, integer, int_tol)
        if j < 0:
            clean = polish(sol.x)
            if clean is not None and clean.objective > best_obj + abs_gap:
                best_x, best_obj = clean.x, clean.objective
            return []
        v = sol.x[j]
        down_ub = ub.copy()
        down_ub[j] = math.floor(v)
        up_lb = lb.copy()
        up_lb[j] = math.ceil(v)
        down = (lb, down_ub)
        up = (up_lb, ub)
        return [up, down] if v - math.floor(v) >= 0.5 else [down, up]

    while pending or heap:
        if nodes >= node_limit:
            break
        if pending:
            sol, lb, ub = pending.pop()
            children = process(sol, lb, ub)
            bound = sol.objective
            if best_x is None and children:
                # dive: evaluate the preferred child now, queue the sibling
                first, second = children
                heapq.heappush(heap, (-bound, next(counter), second[0], second[1]))
                child = evaluate(*first)
                if child.optimal:
                    pending.append((child, first[0], first[1]))
            else:
                for c_lb, c_ub in children:
                    heapq.heappush(heap, (-bound, next(counter), c_lb, c_ub))
            continue
        neg_bound, _, lb, ub = heapq.heappop(heap)
        if -neg_bound <= best_obj + margin:
            continue
        sol = evaluate(lb, ub)
        if sol.optimal:
            pending.append((sol, lb, ub))

    open_bounds = [-h[0] for h in heap if -h[0] > best_obj + margin]
    open_bounds += [s.objective for s, _, _ in pending if s.objective > best_obj + margin]
    elapsed = time.perf_counter() - start
    if open_bounds:
        bound = max(open_bounds)
        gap = (bound - best_obj) if best_x is not None else np.inf
        return BnbResult("node_limit", best_x, best_obj, bound, nodes, gap, elapsed)
    if best_x is None:
        return BnbResult("infeasible", None, -np.inf, -np.inf, nodes, 0.0, elapsed)
    return BnbResult("optimal", best_x, best_obj, best_obj, nodes, 0.0, elapsed)


def solve_highs(model: MilpModel, time_limit: float | None = None,
                feasibility_tol: float | None = None) -> BnbResult:
    """Solve ``model`` with the HiGHS MIP solver (fast route for larger horizons).

    When every cost sits on binaries, objective values lie on a lattice of
    step ``objective_step``; the absolute gap is then set just below one
    step, which still proves optimality.  The incumbent is polished by an LP
    with the binaries fixed so the returned point satisfies every row to the
    tolerance of :mod:`wprsma.lp`; an incumbent that only fits within the
    default feasibility tolerance triggers one re-solve at ``1e-9``.
    """
    import highspy

    start = time.perf_counter()
    lp = model.lp
    A = sp.csr_matrix(lp.A)
    senses = np.asarray(lp.senses)
    lo = np.where(senses == LE, -highspy.kHighsInf, lp.rhs)
    hi = np.where(senses == GE, highspy.kHighsInf, lp.rhs)
    inf = highspy.kHighsInf
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("mip_rel_gap", 0.0)
    if feasibility_tol is not None:
        for option in ("mip_feasibility_tolerance", "primal_feasibility_tolerance"):
            h.setOptionValue(option, feasibility_tol)
    step = objective_step(lp.c, model.integer)
    h.setOptionValue("mip_abs_gap", 0.99 * step if step > 0 else 1e-9)
    if time_limit:
        h.setOptionValue("time_limit", float(time_limit))
    n = lp.n_vars
    h.addVars(n, np.where(np.isinf(lp.lb), -inf, lp.lb), np.where(np.isinf(lp.ub), inf, lp.ub))
    h.changeColsCost(n, np.arange(n, dtype=np.int32), lp.c.astype(float))
    h.changeObjectiveSense(highspy.ObjSense.kMaximize)
    h.addRows(len(lo), lo, hi, A.nnz, A.indptr.astype(np.int32), A.indices.astype(np.int32),
              A.data.astype(float))
    ints = np.flatnonzero(model.integer).astype(np.int32)
    h.changeColsIntegrality(len(ints), ints,
                            np.full(len(ints), highspy.HighsVarType.kInteger))
    h.run()
    status = h.getModelStatus()
    info = h.getInfo()
    elapsed = time.perf_counter() - start
    nodes = int(info.mip_node_count)
    if status == highspy.HighsModelStatus.kInfeasible:
        return BnbResult("infeasible", None, -np.inf, -np.inf, nodes, 0.0, elapsed)
    if info.primal_solution_status != 2:  # no feasible point found
        return BnbResult("node_limit", None, -np.inf, float(info.mip_dual_bound), nodes,
                         np.inf, elapsed)
    raw = np.array(h.getSolution().col_value)
    try:
        x = _polish(model, raw)
    except lpmod.NumericalFailure:
        if feasibility_tol is not None:
            raise
        # big-M rows met only within the default tolerance: re-solve tightly
        return solve_highs(model, time_limit, feasibility_tol=1e-9)
    obj = float(lp.c @ x)
    optimal = status == highspy.HighsModelStatus.kOptimal
    bound = obj if optimal else max(float(info.mip_dual_bound), obj)
    return BnbResult("optimal" if optimal else "node_limit", x, obj, bound, nodes,
                     bound - obj, time.perf_counter() - start)


def _polish(model: MilpModel, x: np.ndarray) -> np.ndarray:
    """Re-solve the continuous part with binaries fixed at their rounded values."""
    lp = model.lp
    lb, ub = lp.lb.copy(), lp.ub.copy()
    r = np.round(x[model.integer])
    lb[model.integer] = r
    ub[model.integer] = r
    fixed = lp.with_bounds(lb, ub)
    try:
        clean = lpmod.solve(fixed, "simplex", presolve=True)
    except lpmod.NumericalFailure:
        clean = lpmod.solve(fixed, "highs")
    if not clean.optimal:
        raise lpmod.NumericalFailure(
            "integer point from HiGHS is infeasible once its binaries are fixed")
    return clean.x


# ---------------------------------------------------------------------------
# Decoding solutions


def _b(model, x, name):
    return int(round(model.value(x, name)))


def decision_at(model: MilpModel, x: np.ndarray, t: int, mode: Mode) -> SlotDecision:
    """Decode slot ``t`` of a solution vector into a :class:`SlotDecision`."""
    N = model.config.n_devices
    dec = SlotDecision.idle(N, mode)
    clip = lambda v: min(1.0, max(0.0, v))
    if mode == Mode.UPLINK:
        U = np.array([[_b(model, x, f"U_{t}_{n}_{j}") for j in (0, 1)] for n in range(N)])
        p = np.array([[max(0.0, model.value(x, f"p_{t}_{n}_{j}")) for j in (0, 1)]
                      for n in range(N)])
        dec.uplink_ok = U
        dec.tx_power = np.where(U == 1, p, 0.0)
        ks = [k for k in range(len(model.orders)) if _b(model, x, f"O_{t}_{k}")]
        if ks:
            dec.order_index = ks[0]
            dec.order = model.orders[ks[0]]
    else:
        dec.mu_c = clip(model.value(x, f"muc_{t}"))
        dec.mu = np.array([clip(model.value(x, f"mu_{t}_{n}")) for n in range(N)])
        dec.rho = np.array([clip(model.value(x, f"rho_{t}_{n}")) for n in range(N)])
        dec.common_ok = np.array([_b(model, x, f"C_{t}_{n}") for n in range(N)])
        dec.private_ok = np.array([_b(model, x, f"D_{t}_{n}") for n in range(N)])
        dec.omega_c = np.array([clip(model.value(x, f"wc_{t}_{n}")) for n in range(N)])
        dec.nu = np.array([[clip(model.value(x, f"nu_{t}_{m}_{n}")) for n in range(N)]
                           for m in range(N)])
    return dec


def extract_decisions(model: MilpModel, x: np.ndarray) -> list[SlotDecision]:
    return [decision_at(model, x, t, Mode.UPLINK if _b(model, x, f"Iu_{t}") else Mode.DOWNLINK)
            for t in range(model.config.horizon_T)]


def extract_schedule(model: MilpModel, x: np.ndarray) -> Schedule:
    decisions = extract_decisions(model, x)
    return build_schedule(decisions, model.channels, model.config,
                          harvest_model="piecewise", intervals=model.intervals)


@dataclass
class MilpSolution:
    result: BnbResult
    model: MilpModel
    schedule: Schedule | None

    @property
    def objective(self) -> float:
        return self.result.objective


def solve_horizon(config: NetworkConfig, channels: ChannelRealization, *,
                  reduced: bool = False, solver: str = "bnb", lp_method: str = "simplex",
                  n_intervals: int | None = None, node_limit: int = 200_000,
                  orders: OrderSet | None = None) -> MilpSolution:
    """Build and solve the horizon model over the full or the reduced order set."""
    orders = orders or enumerate_orders(config.n_devices, reduced)
    T = config.horizon_T
    intervals = intervals_for_channels(config, channels.gains[:T], n_intervals) if T else None
    model = build_model(config, channels, orders, intervals)
    if solver == "bnb":
        res = branch_and_bound(model, lp_method=lp_method, node_limit=node_limit)
    elif solver == "highs":
        res = solve_highs(model)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    schedule = extract_schedule(model, res.x) if res.x is not None else None
    res.schedule = schedule
    return MilpSolution(res, model, schedule)


# ---------------------------------------------------------------------------
# LP-format export


def _fmt(v: float) -> str:
    return repr(float(v))


def _terms(items) -> str:
    parts = []
    for name, v in items:
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(v))} {name}")
    text = " ".join(parts) if parts else "0 x_dummy"
    return text[2:] if text.startswith("+ ") else text


def export_lp_text(model: MilpModel, path: str | Path | None = None) -> str:
    """Write the model in CPLEX LP format, columns in index order."""
    lp = model.lp
    names = lp.names
    lines = ["\\ wprsma schedule model", "Maximize"]
    obj = [(names[j], lp.c[j]) for j in range(lp.n_vars) if lp.c[j] != 0.0]
    lines.append(" obj: " + _terms(obj))
    lines.append("Subject To")
    A = lp.A.tocsr()
    sym = {LE: "<=", GE: ">=", EQ: "="}
    row_names = model.row_names or [f"r{i}" for i in range(lp.n_rows)]
    for i in range(lp.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        order = np.argsort(A.indices[lo:hi], kind="stable")
        items = [(names[A.indices[lo + k]], A.data[lo + k]) for k in order]
        lines.append(f" c{i}_{row_names[i]}: {_terms(items)} {sym[lp.senses[i]]} {_fmt(lp.rhs[i])}")
    lines.append("Bounds")
    for j in range(lp.n_vars):
        if model.integer[j]:
            continue
        lo, hi = lp.lb[j], lp.ub[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" {names[j]} free")
        elif np.isfinite(hi):
            lo_txt = _fmt(lo) if np.isfinite(lo) else "-inf"
            lines.append(f" {lo_txt} <= {names[j]} <= {_fmt(hi)}")
        else:
            lines.append(f" {names[j]} >= {_fmt(lo)}")
    lines.append("Binaries")
    bins = [names[j] for j in range(lp.n_vars) if model.integer[j]]
    for k in range(0, len(bins), 8):
        lines.append(" " + " ".join(bins[k:k + 8]))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
