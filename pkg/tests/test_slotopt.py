import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wprsma.lp import GE, LpBuilder, solve
from wprsma.milp import enumerate_orders
from wprsma.model import Mode, NetworkConfig, SlotDecision, downlink_sinr, validate_slot
from wprsma.slotopt import (SlotState, cascade_powers, slot_message_caps, solve_dlp, solve_ulp,
                            solve_ulp_fixed_order)

CFG1 = NetworkConfig(n_devices=1)
CFG2 = NetworkConfig(n_devices=2)
FULL = 1.0  # joules: far above any single-slot spend


def state(cfg, g, e=None):
    g = np.atleast_1d(np.asarray(g, float))
    e = np.full(cfg.n_devices, FULL) if e is None else np.atleast_1d(np.asarray(e, float))
    return SlotState(g, e, cfg)


def count(dec):
    return int(dec.downlink_count().sum() + dec.uplink_count().sum())


def random_state(rng, N, cfg=None):
    cfg = cfg or NetworkConfig(n_devices=N, sinr_threshold_db=float(rng.uniform(0, 10)),
                               hap_power_max=float(rng.uniform(0.3, 2.5)))
    g = rng.exponential(1.0, N) * float(rng.choice([1e-2, 1e-4, 1e-6, 1e-7]))
    e = rng.uniform(0, 1.5e-5, N)
    return SlotState(g, e, cfg)


# ---------------------------------------------------------------------------
# downlink


def test_dlp_single_device_example():
    st_ = state(CFG1, 0.04)
    dec = solve_dlp(st_)
    assert dec.mode == Mode.DOWNLINK
    assert count(dec) == 2
    need = CFG1.gamma * CFG1.noise_power / (CFG1.hap_power_max * 0.04)
    assert need == pytest.approx(3.96e-5, rel=1e-3)
    # certified on the envelope surrogate of mu * rho
    assert dec.nu[0, 0] >= need * (1 - 1e-9)
    assert validate_slot(dec, st_.gains, st_.energy, CFG1).ok
    # and achievable with true products: full split to the decoder, mu_c near 1
    witness = SlotDecision.idle(1, Mode.DOWNLINK)
    witness.mu, witness.rho, witness.mu_c = np.array([need]), np.array([1.0]), 1.0 - need
    witness.omega_c = witness.nu = None
    common, private = downlink_sinr(witness, st_.gains, 0, CFG1)
    assert common >= CFG1.gamma and private >= CFG1.gamma * (1 - 1e-12)


def test_dlp_without_signal():
    assert count(solve_dlp(state(CFG1, 1e-15))) == 0


def test_dlp_unreachable_threshold():
    cfg = NetworkConfig(n_devices=1, sinr_threshold_db=200.0)
    assert count(solve_dlp(state(cfg, 0.04))) == 0


def test_dlp_routes_agree():
    rng = np.random.default_rng(1)
    for _ in range(60):
        s = random_state(rng, int(rng.integers(1, 4)))
        a = solve_dlp(s)
        b = solve_dlp(s, method="bnb")
        assert count(a) == count(b)
        assert validate_slot(a, s.gains, s.energy, s.config).ok
        assert validate_slot(b, s.gains, s.energy, s.config).ok
        # equal counts: the direct route never harvests less
        assert np.sum(a.rho * s.gains) <= np.sum(b.rho * s.gains) * (1 + 1e-6) + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.0, 8.0), st.floats(0.0, 4.0))
def test_dlp_monotone(seed, db, extra_db):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 5))
    g = rng.exponential(1.0, N) * 1e-6
    lo = NetworkConfig(n_devices=N, sinr_threshold_db=db)
    hi = lo.replace(sinr_threshold_db=db + extra_db)
    assert count(solve_dlp(state(hi, g))) <= count(solve_dlp(state(lo, g)))
    more = lo.replace(hap_power_max=lo.hap_power_max * (1 + extra_db))
    assert count(solve_dlp(state(more, g))) >= count(solve_dlp(state(lo, g)))


# ---------------------------------------------------------------------------
# uplink


def test_ulp_single_device_example():
    st_ = state(CFG1, 0.04)
    dec = solve_ulp(st_)
    assert dec.mode == Mode.UPLINK and count(dec) == 2
    G, N0 = CFG1.gamma, CFG1.noise_power
    last, first = dec.order.sequence[1], dec.order.sequence[0]
    p_last = dec.tx_power[last]
    assert p_last == pytest.approx(G * N0 / 0.04) and p_last == pytest.approx(7.93e-5, rel=1e-3)
    assert dec.tx_power[first] == pytest.approx(G * (p_last * 0.04 + N0) / 0.04)
    assert dec.tx_power.sum() <= CFG1.device_power_max
    assert validate_slot(dec, st_.gains, st_.energy, CFG1).ok


def test_ulp_without_energy():
    assert count(solve_ulp(state(CFG2, [0.04, 0.03], [0.0, 0.0]))) == 0


def test_ulp_overwhelming_noise():
    cfg = NetworkConfig(n_devices=2, noise_density=1e3)
    assert count(solve_ulp(state(cfg, [0.04, 0.03]))) == 0


def test_ulp_respects_energy_budget():
    s = state(CFG1, 0.04, [1e-7])      # 0.1 mW over a 1 ms slot
    dec = solve_ulp(s)
    assert dec.tx_power.sum() * CFG1.slot_tau <= 1e-7 * (1 + 1e-12)
    assert count(dec) == 1


def test_fixed_order_positions():
    dec = solve_ulp_fixed_order(state(CFG2, [0.04, 0.01]))
    assert dec.order.sequence == ((0, 0), (0, 1), (1, 0), (1, 1))
    dec = solve_ulp_fixed_order(state(CFG2, [0.01, 0.04]))
    assert dec.order.sequence == ((1, 0), (1, 1), (0, 0), (0, 1))
    dec = solve_ulp_fixed_order(state(CFG2, [0.02, 0.02]))
    assert dec.order.sequence[0][0] == 0


def test_fixed_order_never_beats_full():
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = random_state(rng, int(rng.integers(1, 4)))
        assert count(solve_ulp_fixed_order(s)) <= count(solve_ulp(s))


def test_ulp_routes_agree():
    rng = np.random.default_rng(5)
    for _ in range(25):
        s = random_state(rng, int(rng.integers(1, 3)))
        a, b = solve_ulp(s), solve_ulp(s, method="bnb")
        assert count(a) == count(b)
        for dec in (a, b):
            assert validate_slot(dec, s.gains, s.energy, s.config).ok
        # direct route picks the least transmit energy among optimal decisions
        assert a.tx_power.sum() <= b.tx_power.sum() * (1 + 1e-6) + 1e-15
        f, fb = solve_ulp_fixed_order(s), solve_ulp_fixed_order(s, method="bnb")
        assert count(f) == count(fb)
        assert validate_slot(f, s.gains, s.energy, s.config).ok


def test_reduced_order_search_loses_nothing_in_one_slot():
    rng = np.random.default_rng(6)
    for _ in range(50):
        s = random_state(rng, 2)
        assert count(solve_ulp(s, reduced=True)) == count(solve_ulp(s))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1.0, 3.0))
def test_ulp_monotone(seed, factor):
    rng = np.random.default_rng(seed)
    s = random_state(rng, int(rng.integers(1, 4)))
    richer = SlotState(s.gains, s.energy * factor, s.config)
    assert count(solve_ulp(richer)) >= count(solve_ulp(s))
    stronger = s.config.replace(device_power_max=s.config.device_power_max * factor)
    assert count(solve_ulp(SlotState(s.gains, s.energy, stronger))) >= count(solve_ulp(s))
    assert count(solve_ulp_fixed_order(richer)) >= count(solve_ulp_fixed_order(s))


def test_cascade_matches_leaf_lp():
    rng = np.random.default_rng(8)
    cfg = NetworkConfig(n_devices=3, sinr_threshold_db=3.0)
    G, N0 = cfg.gamma, cfg.noise_power
    orders = enumerate_orders(3, reduced=True)
    for _ in range(40):
        g = rng.exponential(1.0, 3) * 0.04
        order = orders[int(rng.integers(len(orders)))]
        active = rng.integers(0, 2, size=(3, 2))
        if not active.any():
            continue
        closed = cascade_powers(order, active, g, cfg)
        b = LpBuilder()
        for n in range(3):
            for j in (0, 1):
                b.add_var(f"p{n}{j}", 0.0, np.inf if active[n, j] else 0.0, obj=-1.0)
        for n, j in order.sequence:
            if active[n, j]:
                row = {f"p{n}{j}": g[n] / N0}
                for m, l in order.later((n, j)):
                    if active[m, l]:
                        row[f"p{m}{l}"] = -G * g[m] / N0
                b.add_row(row, GE, G)
        sol = solve(b.build())
        assert -sol.objective == pytest.approx(closed.sum(), rel=1e-9)
        assert sol.x.reshape(3, 2) == pytest.approx(closed, rel=1e-9, abs=1e-18)


def test_zero_decision_always_available():
    rng = np.random.default_rng(9)
    for _ in range(30):
        s = random_state(rng, int(rng.integers(1, 4)))
        s = SlotState(s.gains * 1e-12, np.zeros_like(s.energy), s.config)
        for dec in (solve_dlp(s), solve_ulp(s), solve_ulp_fixed_order(s)):
            assert count(dec) == 0
            assert validate_slot(dec, s.gains, s.energy, s.config).ok


def test_slot_message_caps_bound_both_modes():
    rng = np.random.default_rng(10)
    for _ in range(30):
        s = random_state(rng, 2)
        down, up = slot_message_caps(s.gains, s.config)
        assert count(solve_dlp(s)) <= down
        assert count(solve_ulp(s)) <= up


def test_state_validation():
    with pytest.raises(ValueError):
        SlotState(np.ones(3), np.ones(2), CFG2)
    with pytest.raises(ValueError):
        SlotState(np.array([-1.0, 1.0]), np.ones(2), CFG2)
    with pytest.raises(ValueError):
        solve_dlp(state(CFG2, [0.1, 0.1]), method="magic")
