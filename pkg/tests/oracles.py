"""Independent reference solvers used only by the tests.

``vertex_lp`` solves a small bounded LP by enumerating every basic point.
``exhaustive_horizon`` maximises the weighted message count of a horizon by
walking every per-slot choice (mode, flags, harvester interval, decoding
order, active messages) and solving one feasibility LP per candidate with
SciPy's HiGHS.  Neither route touches the package's simplex, model builder
or branch-and-bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from wprsma.lp import EQ, GE, LE


# ---------------------------------------------------------------------------
# LP by vertex enumeration


def vertex_lp(c, A, senses, rhs, lb, ub, tol=1e-9):
    """Return ``(status, objective)`` for ``max c@x`` over a box-bounded LP."""
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    n = len(c)
    G, h = [], []
    for row, s, b in zip(A, senses, rhs):
        if s in (LE, EQ):
            G.append(row)
            h.append(b)
        if s in (GE, EQ):
            G.append(-row)
            h.append(-b)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        G.append(e)
        h.append(ub[j])
        G.append(-e)
        h.append(-lb[j])
    G, h = np.array(G), np.array(h)
    combos = np.array(list(itertools.combinations(range(len(G)), n)))
    M = G[combos]                                   # (K, n, n)
    rhs_k = h[combos]
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-12
    if not ok.any():
        return "infeasible", None
    X = np.linalg.solve(M[ok], rhs_k[ok][..., None])[..., 0]
    scale = 1.0 + np.abs(h).max()
    feasible = np.all(X @ G.T <= h + tol * scale, axis=1)
    if not feasible.any():
        return "infeasible", None
    return "optimal", float((X[feasible] @ c).max())


# ---------------------------------------------------------------------------
# Exhaustive horizon search


@dataclass(frozen=True)
class SlotChoice:
    mode: str                  # "D" or "U"
    reward: float
    common: tuple = ()         # D: per-device flags
    private: tuple = ()
    interval: tuple = ()       # D: per-device interval index or -1 for no harvest
    sequence: tuple = ()       # U: active messages, first decoded first


def _downlink_choices(N, S, w_down):
    out = []
    for cflags in itertools.product((0, 1), repeat=N):
        for pflags in itertools.product((0, 1), repeat=N):
            for iv in itertools.product(range(-1, S), repeat=N):
                out.append(SlotChoice("D", w_down * (sum(cflags) + sum(pflags)),
                                      cflags, pflags, iv))
    return out


def _uplink_choices(N, w_up, orders):
    """One choice per distinct decoding sequence of an active message set.

    Two orders that rank the active messages identically give identical
    constraints, so each induced sequence is kept once.
    """
    seen = set()
    out = []
    for order in orders:
        seq = tuple(order.sequence)
        for k in range(len(seq) + 1):
            for active in itertools.combinations(seq, k):
                if active not in seen:
                    seen.add(active)
                    out.append(SlotChoice("U", w_up * k, sequence=active))
    return out


class _LeafLP:
    """Accumulates rows over named continuous variables for one candidate."""

    def __init__(self):
        self.index = {}
        self.lb, self.ub = [], []
        self.A_ub, self.b_ub, self.A_eq, self.b_eq = [], [], [], []

    def var(self, name, lo=0.0, hi=None):
        self.index[name] = len(self.lb)
        self.lb.append(lo)
        self.ub.append(hi)
        return name

    def _dense(self, coeffs):
        row = np.zeros(len(self.lb))
        for k, v in coeffs.items():
            row[self.index[k]] += v
        return row

    def le(self, coeffs, b):
        self.A_ub.append(coeffs)
        self.b_ub.append(b)

    def ge(self, coeffs, b):
        self.le({k: -v for k, v in coeffs.items()}, -b)

    def eq(self, coeffs, b):
        self.A_eq.append(coeffs)
        self.b_eq.append(b)

    def feasible(self) -> bool:
        n = len(self.lb)
        A_ub = np.array([self._dense(r) for r in self.A_ub]) if self.A_ub else None
        A_eq = np.array([self._dense(r) for r in self.A_eq]) if self.A_eq else None
        res = linprog(np.zeros(n), A_ub=A_ub, b_ub=self.b_ub or None, A_eq=A_eq,
                      b_eq=self.b_eq or None, bounds=list(zip(self.lb, self.ub)),
                      method="highs")
        return res.status == 0


def _add_slot(lp: _LeafLP, t, choice: SlotChoice, g, cfg, intervals):
    """Rows for one slot; returns (harvest terms, spend terms) per device in watts."""
    N = cfg.n_devices
    P, N0, G, p0 = cfg.hap_power_max, cfg.noise_power, cfg.gamma, cfg.device_power_max
    harvest = [dict() for _ in range(N)]
    spend = [dict() for _ in range(N)]
    if choice.mode == "D":
        muc = lp.var(f"muc{t}", 0.0, 1.0)
        mu = [lp.var(f"mu{t}_{n}", 0.0, 1.0) for n in range(N)]
        rho = [lp.var(f"rho{t}_{n}", 0.0, 1.0) for n in range(N)]
        lp.le({muc: 1.0, **{m: 1.0 for m in mu}}, 1.0)

        def product(x, y, name):
            # w = x*y relaxed to its four McCormick inequalities on [0,1]^2
            w = lp.var(name, 0.0, 1.0)
            lp.le({w: 1.0, x: -1.0}, 0.0)
            lp.le({w: 1.0, y: -1.0}, 0.0)
            lp.ge({w: 1.0, x: -1.0, y: -1.0}, -1.0)
            return w

        for n in range(N):
            s = P * g[n] / N0
            wc = product(muc, rho[n], f"wc{t}_{n}")
            nu = [product(mu[m], rho[n], f"nu{t}_{m}_{n}") for m in range(N)]
            if choice.common[n]:
                row = {wc: s}
                for m in range(N):
                    row[nu[m]] = row.get(nu[m], 0.0) - G * s
                lp.ge(row, G)
            if choice.private[n]:
                row = {nu[n]: s}
                for m in range(N):
                    if m != n:
                        row[nu[m]] = row.get(nu[m], 0.0) - G * P * g[m] / N0
                lp.ge(row, G)
            k = choice.interval[n]
            if k >= 0:
                # received power (1 - rho) * P * g inside interval k, harvest eta_k of it
                Pg = P * g[n]
                lp.ge({rho[n]: -Pg}, intervals.lower[k] - Pg)
                lp.le({rho[n]: -Pg}, intervals.upper[k] - Pg)
                harvest[n] = {"const": intervals.eta[k] * Pg, rho[n]: -intervals.eta[k] * Pg}
    else:
        p = {}
        for n in range(N):
            for j in (0, 1):
                p[(n, j)] = lp.var(f"p{t}_{n}_{j}", 0.0, p0)
        for n in range(N):
            lp.le({p[(n, 0)]: 1.0, p[(n, 1)]: 1.0}, p0)
            spend[n] = {p[(n, 0)]: 1.0, p[(n, 1)]: 1.0}
        active = set(choice.sequence)
        for n, j in p:
            if (n, j) not in active:
                lp.le({p[(n, j)]: 1.0}, 0.0)
        for pos, (n, j) in enumerate(choice.sequence):
            row = {p[(n, j)]: g[n] / N0}
            for m, l in choice.sequence[pos + 1:]:
                row[p[(m, l)]] = row.get(p[(m, l)], 0.0) - G * g[m] / N0
            lp.ge(row, G)
    return harvest, spend


def _prefix_feasible(choices, channels, cfg, intervals) -> bool:
    lp = _LeafLP()
    N = cfg.n_devices
    uj = 1e6 * cfg.slot_tau              # watts held for one slot, in microjoules
    prev = None
    for t, ch in enumerate(choices):
        harvest, spend = _add_slot(lp, t, ch, channels.gains[t], cfg, intervals)
        cur = [lp.var(f"E{t + 1}_{n}", 0.0, cfg.battery_capacity * 1e6) for n in range(N)]
        for n in range(N):
            row = {cur[n]: 1.0}
            const = 0.0
            for k, v in harvest[n].items():
                if k == "const":
                    const += v * uj
                else:
                    row[k] = row.get(k, 0.0) - v * uj
            for k, v in spend[n].items():
                row[k] = row.get(k, 0.0) + v * uj
            if prev is None:
                lp.eq(row, cfg.initial_energy * 1e6 + const)
            else:
                row[prev[n]] = row.get(prev[n], 0.0) - 1.0
                lp.eq(row, const)
        prev = cur
    return lp.feasible()


def exhaustive_horizon(cfg, channels, intervals, orders):
    """Best weighted message count over every per-slot choice, plus search statistics."""
    T = cfg.horizon_T
    N = cfg.n_devices
    per_slot = (_downlink_choices(N, intervals.size, cfg.downlink_weight)
                + _uplink_choices(N, cfg.uplink_weight, orders))
    # discard choices infeasible on their own (energy aside), best reward first
    options = []
    for t in range(T):
        cfg_free = cfg.replace(initial_energy=cfg.device_power_max * cfg.slot_tau)
        keep = []
        for ch in per_slot:
            sub = cfg_free.replace(horizon_T=1)
            if _prefix_feasible([ch], _Shift(channels, t), sub, intervals):
                keep.append(ch)
        keep.sort(key=lambda c: -c.reward)
        options.append(keep)
    best_rest = [0.0] * (T + 1)
    for t in range(T - 1, -1, -1):
        best_rest[t] = best_rest[t + 1] + max(c.reward for c in options[t])
    best = [-1.0]
    leaves = [0]

    def search(t, prefix, reward):
        if reward + best_rest[t] <= best[0] + 1e-12:
            return
        if t == T:
            best[0] = reward
            return
        for ch in options[t]:
            if reward + ch.reward + best_rest[t + 1] <= best[0] + 1e-12:
                break
            leaves[0] += 1
            if _prefix_feasible(prefix + [ch], channels, cfg, intervals):
                search(t + 1, prefix + [ch], reward + ch.reward)

    search(0, [], 0.0)
    return best[0], leaves[0]


class _Shift:
    """Channel view starting at slot ``t`` (for single-slot screening)."""

    def __init__(self, channels, t):
        self.gains = channels.gains[t:]
