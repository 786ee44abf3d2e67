"""Single-slot downlink (DLP) and uplink (ULP) message-count maximisation.

Each problem has two exact routes.  ``method="bnb"`` builds the slot's
mixed-integer model and runs :func:`wprsma.milp.branch_and_bound`.
``method="direct"`` uses structure: the downlink optimum follows from a
greedy over the common-message share whenever no cross interference is
forced, and the uplink optimum follows from the minimum-power SIC cascade,
which is componentwise minimal for a fixed order and set of active
messages.  ``method="auto"`` (the default) takes the direct route and falls
back to branch-and-bound in the rare downlink slots the greedy cannot settle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .milp import (OrderSet, _Builder, branch_and_bound, decision_at, enumerate_orders,
                   fixed_gain_order)
from .model import DecodingOrder, Mode, NetworkConfig, SlotDecision

# Relative tolerance when comparing transmit energies between candidates.
ENERGY_TIE = 1e-9
# Secondary objectives stay below one message in the branch-and-bound models.
TIEBREAK_WEIGHT = 0.5


@dataclass(frozen=True)
class SlotState:
    gains: np.ndarray
    energy: np.ndarray
    config: NetworkConfig

    def __post_init__(self):
        g = np.asarray(self.gains, float).reshape(-1)
        e = np.asarray(self.energy, float).reshape(-1)
        if len(g) != self.config.n_devices or len(e) != self.config.n_devices:
            raise ValueError("state vectors must have one entry per device")
        if np.any(g < 0) or np.any(e < 0):
            raise ValueError("gains and energies must be nonnegative")
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "energy", e)

    @property
    def budgets(self) -> np.ndarray:
        """Per-device transmit power cap for this slot: ``min(p0, E / tau)``."""
        return np.minimum(self.config.device_power_max, self.energy / self.config.slot_tau)


# ---------------------------------------------------------------------------
# Downlink


def _dlp_required(state: SlotState) -> np.ndarray:
    """Smallest private-message power share per device, Gamma * N0 / (P0 * g)."""
    cfg = state.config
    with np.errstate(divide="ignore"):
        return cfg.gamma * cfg.noise_power / (cfg.hap_power_max * state.gains)


def _dlp_greedy(state: SlotState) -> SlotDecision | None:
    """Exact downlink optimum when no cross interference is forced, else None.

    Private decoding at device n needs ``nu[n, n] >= c[n]``; its common
    message then needs ``omega_c[n] >= c[n]`` alone or ``(1 + Gamma) c[n]``
    next to a private one.  Each surrogate is capped by its factors, so for
    a common share ``L = mu_c`` every device with ``c[n] <= L`` decodes its
    common message for free, and each further message costs ``c[n]`` of the
    remaining budget ``1 - L``: a private message on top of a common one
    (allowed when ``(1 + Gamma) c[n] <= L``) or a private message alone
    (when ``c[n] > L``).  Unit gains make cheapest-first optimal for each L,
    and only the values ``c[n]`` and ``(1 + Gamma) c[n]`` can be binding.
    Among equal counts the smallest total ``P g rho`` (most harvest) wins;
    it only depends on how many devices fall in each category.
    """
    cfg = state.config
    N = cfg.n_devices
    c = _dlp_required(state)
    k = 1.0 + cfg.gamma
    finite = np.isfinite(c)
    cands = np.unique(np.concatenate([[0.0], c[finite], k * c[finite]]))
    cands = [float(L) for L in cands if L <= 1.0]
    cs = [float(x) for x in c]
    by_cost = [int(n) for n in np.argsort(c, kind="stable")]
    best = None
    for L in cands:
        # scalar loop: N is small and this runs once per training step
        common = [x <= L for x in cs]
        private = [False] * N
        budget = (1.0 - L) * (1 + 1e-12)
        spent = 0.0
        for n in by_cost:
            x = cs[n]
            if x > 1.0:
                break
            if k * x <= L or x > L:
                spent += x
                if spent > budget:
                    break
                private[n] = True
        n_cd = sum(a and b for a, b in zip(common, private))
        count = sum(common) + sum(private)
        proxy = (count - n_cd) + k * n_cd
        key = (-count, proxy, L)
        if best is None or key < best[0]:
            best = (key, common, private)
    best = (best[0], np.array(best[1], dtype=bool), np.array(best[2], dtype=bool))
    _, common, private = best
    if not common.any() and not private.any():
        return SlotDecision.idle(N, Mode.DOWNLINK)
    rho = np.where(common & private, k * c, np.where(common | private, c, 0.0))
    mu = np.where(private, c, 0.0)
    mu_c = float(rho[common].max()) if common.any() else 0.0
    cross = mu[:, None] + rho[None, :] - 1.0
    np.fill_diagonal(cross, 0.0)
    if np.any(cross > 0):
        return None
    dec = SlotDecision.idle(N, Mode.DOWNLINK)
    dec.mu_c = mu_c
    dec.mu = mu
    dec.rho = rho
    dec.common_ok = common.astype(int)
    dec.private_ok = private.astype(int)
    dec.omega_c = np.where(common, rho, np.maximum(0.0, mu_c + rho - 1.0))
    dec.nu = np.diag(mu)
    return dec


def dlp_model(state: SlotState):
    cfg = state.config
    b = _Builder(cfg)
    scale = cfg.hap_power_max * max(float(state.gains.sum()), 1e-300)
    b.downlink_block(0, state.gains, None, 1.0, tiebreak=TIEBREAK_WEIGHT / scale)
    return b.finish(config=cfg)


def solve_dlp(state: SlotState, method: str = "auto", lp_method: str = "simplex") -> SlotDecision:
    """Maximise the number of decodable downlink messages in one slot.

    Ties are broken towards small power splits, i.e. more received power
    routed to the harvesters.
    """
    if method not in ("auto", "direct", "bnb"):
        raise ValueError(f"unknown method {method!r}")
    N = state.config.n_devices
    if method != "bnb":
        dec = _dlp_greedy(state)
        if dec is not None:
            return dec
        if method == "direct":
            raise ValueError("no closed form: the optimum forces cross interference")
    if not np.any(state.gains > 0):
        return SlotDecision.idle(N, Mode.DOWNLINK)
    model = dlp_model(state)
    res = branch_and_bound(model, lp_method=lp_method)
    if res.x is None:
        return SlotDecision.idle(N, Mode.DOWNLINK)
    dec = decision_at(model, res.x, 0, Mode.DOWNLINK)
    _clean_downlink(dec)
    return dec


def _clean_downlink(dec: SlotDecision) -> None:
    """Zero the split of devices with no decoded message; it only costs harvest."""
    idle = (dec.common_ok == 0) & (dec.private_ok == 0)
    if np.any(idle):
        dec.rho = np.where(idle, 0.0, dec.rho)
        dec.omega_c = np.where(idle, 0.0, dec.omega_c)
        dec.nu = np.where(idle[None, :], 0.0, dec.nu)


# ---------------------------------------------------------------------------
# Uplink


def message_index(N: int) -> list[tuple[int, int]]:
    return [(n, j) for n in range(N) for j in (0, 1)]


@lru_cache(maxsize=16)
def _order_tables(N: int, reduced: bool):
    """Per order, a matrix ``later[i, m]`` = 1 if message m is decoded after message i."""
    orders = enumerate_orders(N, reduced)
    msgs = message_index(N)
    idx = {m: i for i, m in enumerate(msgs)}
    later = np.zeros((len(orders), 2 * N, 2 * N))
    for k, order in enumerate(orders):
        for m in order.sequence:
            for l in order.later(m):
                later[k, idx[m], idx[l]] = 1.0
    return orders, later


@lru_cache(maxsize=16)
def _masks(N: int) -> np.ndarray:
    M = 2 * N
    codes = np.arange(2 ** M)
    return ((codes[:, None] >> np.arange(M)[None, :]) & 1).astype(float)


@lru_cache(maxsize=64)
def _cascade_growth(N: int, reduced: bool, gamma: float):
    """Orders, and per (order, mask, message) the factor ``(1 + Gamma) ** r`` on active messages.

    ``r`` counts active messages decoded after the message; inactive entries are 0.
    """
    orders, later = _order_tables(N, reduced)
    masks = _masks(N)
    r = np.einsum("kim,bm->kbi", later, masks)
    return orders, (1.0 + gamma) ** r * masks[None]


def cascade_powers(order: DecodingOrder, active: np.ndarray, g: np.ndarray,
                   config: NetworkConfig) -> np.ndarray:
    """Minimum transmit powers making every active message decodable.

    Solving from the last-decoded message backwards, each active message
    needs received power ``Gamma * N0 * (1 + Gamma) ** r`` where ``r`` counts
    active messages decoded after it.
    """
    active = np.asarray(active, dtype=int).reshape(-1, 2)
    p = np.zeros(active.shape, float)
    G, N0 = config.gamma, config.noise_power
    for m in order.sequence:
        n, j = m
        if active[n, j]:
            r = sum(active[a, b] for a, b in order.later(m))
            p[n, j] = G * N0 * (1.0 + G) ** r / g[n]
    return p


def _uplink_decision(N, order, order_index, mask_row, powers) -> SlotDecision:
    dec = SlotDecision.idle(N, Mode.UPLINK)
    U = mask_row.reshape(N, 2).astype(int)
    dec.uplink_ok = U
    dec.tx_power = np.where(U == 1, powers.reshape(N, 2), 0.0)
    if U.any():
        dec.order = order
        dec.order_index = order_index
    return dec


def _ulp_enumerate(state: SlotState, orders: OrderSet, growth: np.ndarray) -> SlotDecision:
    """Exhaustive search over orders and active sets with cascade powers."""
    cfg = state.config
    N = cfg.n_devices
    masks = _masks(N)                                 # (B, 2N)
    g = np.repeat(state.gains, 2)                     # per message
    with np.errstate(divide="ignore", invalid="ignore"):
        q = cfg.gamma * cfg.noise_power * growth
        p = np.where(masks[None] > 0, q / g[None, None, :], 0.0)
    dev = p.reshape(len(orders), len(masks), N, 2).sum(axis=3)
    feasible = np.all(dev <= state.budgets[None, None, :] * (1 + 1e-12), axis=2)
    count = np.where(feasible, masks.sum(axis=1)[None, :], -1.0)
    best = count.max()
    if best <= 0:
        return SlotDecision.idle(N, Mode.UPLINK)
    energy = np.where(count == best, p.sum(axis=2), np.inf)
    emin = energy.min()
    ok = energy <= emin * (1 + ENERGY_TIE)
    k, b = np.argwhere(ok)[0]                         # lowest order, then lowest mask
    return _uplink_decision(N, orders[k], int(k), masks[b], p[k, b])


def _ulp_fixed_dp(state: SlotState, order: DecodingOrder) -> SlotDecision:
    """Exact search for a block order (each device's messages adjacent).

    Devices are processed from the last decoded to the first; the state is
    the number of active messages decoded later, which is also the running
    message count.  Transitions keep the minimum total transmit power.
    """
    cfg = state.config
    N = cfg.n_devices
    G, N0 = cfg.gamma, cfg.noise_power
    devices = [order.sequence[2 * i][0] for i in range(N)]
    first_j = {order.sequence[2 * i][0]: order.sequence[2 * i][1] for i in range(N)}
    budgets = state.budgets
    INF = np.inf
    cost = np.full(2 * N + 1, INF)
    cost[0] = 0.0
    choice = []
    for n in reversed(devices):
        new = np.full(2 * N + 1, INF)
        pick = np.full(2 * N + 1, -1, dtype=int)
        g = state.gains[n]
        for r in range(2 * N + 1):
            if not np.isfinite(cost[r]):
                continue
            for k in (0, 1, 2):
                if r + k > 2 * N:
                    continue
                if k == 0:
                    pw = 0.0
                elif g <= 0:
                    continue
                elif k == 1:
                    pw = G * N0 * (1 + G) ** r / g
                else:
                    pw = G * N0 * ((1 + G) ** r + (1 + G) ** (r + 1)) / g
                if pw > budgets[n] * (1 + 1e-12):
                    continue
                total = cost[r] + pw
                if total < new[r + k] * (1 - ENERGY_TIE):
                    new[r + k], pick[r + k] = total, r * 3 + k
        cost = new
        choice.append((n, pick))
    best = int(max(np.flatnonzero(np.isfinite(cost)), default=0))
    if best == 0:
        return SlotDecision.idle(N, Mode.UPLINK)
    active = np.zeros((N, 2), dtype=int)
    state_r = best
    for n, pick in reversed(choice):
        r, k = divmod(int(pick[state_r]), 3)
        if k == 2:
            active[n] = 1
        elif k == 1:
            # a lone message is sent on the device's first-decoded sub-message
            active[n, first_j[n]] = 1
        state_r = r
    p = cascade_powers(order, active, state.gains, cfg)
    return _uplink_decision(N, order, 0, active.reshape(-1), p)


def ulp_model(state: SlotState, orders: OrderSet):
    cfg = state.config
    b = _Builder(cfg)
    tie = TIEBREAK_WEIGHT / (cfg.n_devices * cfg.device_power_max)
    b.uplink_block(0, state.gains, None, orders, 1.0, budgets=state.budgets, tiebreak=tie)
    return b.finish(config=cfg, orders=orders)


def _ulp_bnb(state: SlotState, orders: OrderSet, lp_method: str) -> SlotDecision:
    N = state.config.n_devices
    model = ulp_model(state, orders)
    res = branch_and_bound(model, lp_method=lp_method)
    if res.x is None:
        return SlotDecision.idle(N, Mode.UPLINK)
    dec = decision_at(model, res.x, 0, Mode.UPLINK)
    if not dec.uplink_ok.any():
        return SlotDecision.idle(N, Mode.UPLINK)
    return dec


def solve_ulp(state: SlotState, method: str = "auto", reduced: bool = False,
              lp_method: str = "simplex") -> SlotDecision:
    """Maximise decodable uplink messages over every decoding order.

    Ties go to the lowest total transmit energy, then the lowest order index.
    """
    N = state.config.n_devices
    if method in ("auto", "direct"):
        orders, growth = _cascade_growth(N, reduced, state.config.gamma)
        return _ulp_enumerate(state, orders, growth)
    if method == "bnb":
        return _ulp_bnb(state, enumerate_orders(N, reduced), lp_method)
    raise ValueError(f"unknown method {method!r}")


def solve_ulp_fixed_order(state: SlotState, method: str = "auto",
                          lp_method: str = "simplex") -> SlotDecision:
    """ULP restricted to the gain-sorted order (strongest device decoded first)."""
    order = fixed_gain_order(state.gains)
    if method in ("auto", "direct"):
        return _ulp_fixed_dp(state, order)
    if method == "bnb":
        return _ulp_bnb(state, OrderSet((order,), False), lp_method)
    raise ValueError(f"unknown method {method!r}")


def slot_message_caps(gains, config: NetworkConfig) -> tuple[int, int]:
    """Most Downlink and most Uplink messages a slot can carry, energy aside.

    The uplink count uses the full order set with a tiny power slack, so it
    bounds the count under any order subset and any solver tolerance.
    """
    N = config.n_devices
    g = np.asarray(gains, float)
    down = int(solve_dlp(SlotState(g, np.zeros(N), config)).downlink_count().sum())
    if N > 3:
        return down, 2 * N
    orders, growth = _cascade_growth(N, False, config.gamma)
    roomy = replace(config, device_power_max=config.device_power_max * (1 + 1e-6))
    state = SlotState(g, np.full(N, roomy.device_power_max * roomy.slot_tau), roomy)
    up = int(_ulp_enumerate(state, orders, growth).uplink_count().sum())
    return down, up
