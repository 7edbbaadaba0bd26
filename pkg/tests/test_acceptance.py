"""Acceptance suite: every exit criterion at its stated tolerance.

Desk scale: two users, eight antennas, 100 trials x 500 slots per campaign
cell.  The campaign grid is shared by the latency, trend, safety and
queue-shape criteria; cross-solver and timing criteria run on dedicated
instance sets.  Each criterion prints one PASS/FAIL line.
"""

import json
import time

import numpy as np
import pytest
from types import SimpleNamespace

from swiptsim import channel, control, harness, kkt, model, records, sca, sdr_fp
from swiptsim.config import desk_config, reference_config
from tests_oracles import grid_oracle_battery, grid_oracle_batteryless

TRIALS = 100
SLOTS = 500
TRADEOFFS = (1.0, 2.0, 4.0, 8.0)
ARRIVALS = (2.0, 3.0)


def _report(num, ok, detail):
    print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'} — {detail}")
    return ok


def _campaign_cell(V, alpha):
    cfg = desk_config(
        tradeoff=V, mean_arrival=alpha, num_trials=TRIALS, horizon=SLOTS,
        rng_seed=20_000 + int(10 * V) + int(alpha),
        sca_tol=1e-3, sca_max_iter=12,
    )
    recs, summary = harness.run_experiment(cfg, "sca", workers=2)
    K = cfg.num_users
    q = np.stack([r.queue for r in recs]).reshape(TRIALS, SLOTS, K)
    z = np.stack([r.virtual for r in recs]).reshape(TRIALS, SLOTS, K)
    b = np.stack([r.battery for r in recs]).reshape(TRIALS, SLOTS, K)
    e = np.stack([r.harvest for r in recs]).reshape(TRIALS, SLOTS, K)
    used = np.stack([r.energy_used for r in recs]).reshape(TRIALS, SLOTS, K)
    p = np.array([r.tx_power for r in recs]).reshape(TRIALS, SLOTS)
    return {
        "config": cfg,
        "summary": summary,
        "prob_exceed": [(q[:, :, u] >= cfg.queue_threshold[u]).mean()
                        for u in range(K)],
        "q_trace": q.mean(axis=0),          # trial-averaged per-slot traces
        "z_trace": z.mean(axis=0),
        "avg_power": float(p.mean()),
        "avg_harvest": float(e.sum(axis=2).mean()),
        "battery_min": float(b.min()),
        "overdraw": int(np.sum(used > b + 1e-9)),
        "full_slots": int(np.sum(b >= cfg.battery_capacity[None, None, :] - 0.0)),
        "full_slot_harvest_max": float(
            np.abs(e[b >= cfg.battery_capacity[None, None, :]]).max()
        ) if np.any(b >= cfg.battery_capacity[None, None, :]) else 0.0,
    }


@pytest.fixture(scope="module")
def campaign():
    cells = {}
    for V in TRADEOFFS:
        for alpha in ARRIVALS:
            cells[(V, alpha)] = _campaign_cell(V, alpha)
    return cells


@pytest.fixture(scope="module")
def battery_instances():
    cfg = desk_config()
    return cfg, harness.random_instances(cfg, 50, seed=1)


@pytest.fixture(scope="module")
def batteryless_results():
    cfg = reference_config()
    instances = harness.random_instances(cfg, 50, seed=2)
    rows = []
    for chan, state in instances:
        weights = control.compute_weights(state, cfg)
        weights.rate_weight = np.maximum(weights.rate_weight, 1e-2)
        t0 = time.perf_counter()
        ref = sca.solve_sca_batteryless(weights, chan, cfg)
        t_sca = time.perf_counter() - t0
        t0 = time.perf_counter()
        fast = kkt.solve_kkt(weights, chan, cfg)
        t_kkt = time.perf_counter() - t0
        rows.append((ref, fast, t_sca, t_kkt))
    return cfg, rows


def test_criterion_1_latency(campaign):
    bound = 0.10 + 0.03
    worst = []
    for alpha in ARRIVALS:
        cell = campaign[(1.0, alpha)]
        worst.extend(cell["prob_exceed"])
    ok = all(p <= bound for p in worst)
    assert _report(
        1, ok,
        f"Pr[Q >= threshold] per user across arrivals {ARRIVALS}: "
        f"{[f'{p:.4f}' for p in worst]} (bound {bound})",
    )


def test_criterion_2_cross_solver_agreement(battery_instances):
    cfg, instances = battery_instances
    rels = []
    traces = {"sca": [], "sdr-fp": []}
    for chan, state in instances:
        a = control.control_step(chan, state, cfg, "sdr-fp")
        b = control.control_step(chan, state, cfg, "sca")
        rel = abs(a.objective - b.objective) / max(abs(b.objective), 1e-9)
        rels.append(rel)
        traces["sdr-fp"].append(a.diagnostics["objective_trace"])
        traces["sca"].append(b.diagnostics["objective_trace"])
    ok = max(rels) <= 0.01
    assert _report(
        2, ok,
        f"lifted vs direct objectives on 50 instances: max rel gap "
        f"{max(rels):.2e}, median {np.median(rels):.2e}",
    )
    test_criterion_2_cross_solver_agreement.traces = traces


def test_criterion_3_batteryless_agreement_speed(batteryless_results):
    cfg, rows = batteryless_results
    rels = [abs(f.objective - r.objective) / max(abs(r.objective), 1e-9)
            for r, f, _, _ in rows]
    med_sca = float(np.median([t for *_, t, _ in rows]))
    med_kkt = float(np.median([t for *_, t in rows]))
    speedup = med_sca / med_kkt
    ok = max(rels) <= 0.01 and speedup >= 10.0
    assert _report(
        3, ok,
        f"closed form vs conic route: max rel gap {max(rels):.2e}; median "
        f"times {med_sca * 1e3:.1f} ms vs {med_kkt * 1e3:.2f} ms "
        f"({speedup:.1f}x, need >= 10x)",
    )


def test_criterion_4_sweep_monotonicity(campaign):
    power = {a: [campaign[(V, a)]["avg_power"] for V in TRADEOFFS]
             for a in ARRIVALS}
    harvest = {a: [campaign[(V, a)]["avg_harvest"] for V in TRADEOFFS]
               for a in ARRIVALS}
    p3, h3 = power[3.0], harvest[3.0]
    mono_p = all(b <= a * (1 + 1e-9) for a, b in zip(p3, p3[1:]))
    mono_h = all(b <= a * (1 + 1e-9) for a, b in zip(h3, h3[1:]))
    arrival_mono = all(
        power[3.0][i] > power[2.0][i] for i in range(len(TRADEOFFS))
    )
    ok = mono_p and mono_h and arrival_mono
    assert _report(
        4, ok,
        f"avg power across V {[f'{x:.2f}' for x in p3]} (non-increasing: "
        f"{mono_p}); avg harvest {[f'{x:.3f}' for x in h3]} (non-increasing: "
        f"{mono_h}); power alpha=3 > alpha=2 at each V: {arrival_mono}",
    )


def test_criterion_5_battery_safety(campaign):
    worst_min = min(cell["battery_min"] for cell in campaign.values())
    overdraws = sum(cell["overdraw"] for cell in campaign.values())
    full_harvest = max(cell["full_slot_harvest_max"] for cell in campaign.values())
    full_slots = sum(cell["full_slots"] for cell in campaign.values())
    ok = worst_min >= 0.0 and overdraws == 0 and full_harvest == 0.0
    assert _report(
        5, ok,
        f"battery min {worst_min:.3e}, overdraw slots {overdraws}, "
        f"max banked energy over {full_slots} battery-full slots "
        f"{full_harvest:.1e} (must be exactly 0)",
    )


def test_criterion_6_single_user_oracle():
    cfg_b = desk_config(num_users=1, num_antennas=1)
    cfg_l = reference_config(num_users=1, num_antennas=1)
    rng = np.random.default_rng(3)
    rels = {"sca": [], "sdr-fp": [], "kkt": []}
    for trial in range(20):
        th = channel.draw_angles(rng, 1)
        chan = channel.generate_channel(
            rng, th, cfg_b.rician_factor, cfg_b.pathloss_amplitude, 1
        )
        state = harness.random_instances(cfg_b, 1, seed=100 + trial)[0][1]
        w = control.compute_weights(state, cfg_b)
        want = grid_oracle_battery(
            abs(chan.H[0, 0]) ** 2, w.rate_weight[0], w.energy_weight[0],
            w.gamma_cap[0], w.e_cap[0], cfg_b.tradeoff, cfg_b,
        )
        for solver in ("sca", "sdr-fp"):
            dec = control.control_step(chan, state, cfg_b, solver)
            rels[solver].append(
                abs(dec.objective - want) / max(abs(want), 1e-9)
            )
        # closed-form route solves the harvest-and-use variant
        wb = SimpleNamespace(
            rate_weight=np.maximum(w.rate_weight, 1e-2), tradeoff=1.0
        )
        chan_l = channel.generate_channel(
            np.random.default_rng(300 + trial), th, cfg_l.rician_factor,
            cfg_l.pathloss_amplitude, 1,
        )
        res = kkt.solve_kkt(wb, chan_l, cfg_l)
        want_l = grid_oracle_batteryless(
            abs(chan_l.H[0, 0]) ** 2, wb.rate_weight[0], cfg_l.min_harvest[0],
            1.0, cfg_l,
        )
        rels["kkt"].append(abs(res.objective - want_l) / abs(want_l))
    worst = {k: max(v) for k, v in rels.items()}
    ok = all(v <= 0.005 for v in worst.values())
    assert _report(
        6, ok,
        "worst relative gap to the dense grid over 20 states: "
        + ", ".join(f"{k}={v:.2e}" for k, v in worst.items())
        + " (bound 5e-3)",
    )


def test_criterion_7_property_suites(battery_instances, batteryless_results,
                                     tmp_path):
    rng = np.random.default_rng(11)
    notes = []

    # quadratic-transform substitution identity
    worst_tf = 0.0
    for _ in range(200):
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        F = A @ A.conj().T
        g = rng.uniform(0.1, 10.0)
        quad = float(np.real(h.conj() @ F @ h))
        nu = sdr_fp.update_nu(F, g, h)
        worst_tf = max(worst_tf, abs(2 * nu * np.sqrt(quad) - nu ** 2 * g
                                     - quad / g) / max(quad / g, 1e-12))
    ok_tf = worst_tf <= 1e-9
    notes.append(f"transform identity {worst_tf:.1e}")

    # tangency and global minorant for the three linearizations
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    f0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    F0 = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    ling = sca.linearize_rate_quad(h, f0, 1.3)
    lins = sca.linearize_harvest_quad(h, F0, 0.7, 0.2)
    lint = sca.linearize_total_power(h, F0, 0.2)
    tangency = max(
        abs(ling.value(f0, 1.3) - ling.exact(f0, 1.3)) / abs(ling.exact(f0, 1.3)),
        abs(lins.value(F0, 0.7) - lins.exact(F0, 0.7)) / abs(lins.exact(F0, 0.7)),
        abs(lint.value(F0) - lint.exact(F0)) / abs(lint.exact(F0)),
    )
    ok_tan = tangency <= 1e-12
    minorant_ok = True
    for _ in range(10_000):
        f = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        F = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        g = rng.uniform(0.05, 8.0)
        e = rng.uniform(0.05, 5.0)
        minorant_ok &= ling.value(f, g) <= ling.exact(f, g) + 1e-9
        minorant_ok &= lins.value(F, e) <= lins.exact(F, e) + 1e-9
        minorant_ok &= lint.value(F) <= lint.exact(F) + 1e-9
    notes.append(f"tangency {tangency:.1e}, minorant on 3x1e4 samples {minorant_ok}")

    # per-iterate descent and feasibility on the acceptance instance sets
    cfg, instances = battery_instances
    descent_ok = True
    feas_ok = True
    for chan, state in instances[:25]:
        w = control.compute_weights(state, cfg)
        res = sca.solve_sca(w, chan, cfg)
        for a, b in zip(res.objectives, res.objectives[1:]):
            descent_ok &= b <= a + 1e-6 * (1.0 + abs(a))
        feas_ok &= res.feasibility_gap <= 1e-5
    notes.append(f"surrogate descent {descent_ok}, iterate feasibility {feas_ok}")

    # first-order residuals at convergence of the closed-form route
    _, rows = batteryless_results
    res_ok = True
    n_conv = 0
    for ref, fast, _, _ in rows:
        if fast.converged:
            n_conv += 1
            res_ok &= fast.kkt_residual < 1e-5
    notes.append(f"residuals < 1e-5 on {n_conv}/50 converged closed-form solves")

    # byte determinism
    cfg_d = desk_config(num_trials=2, horizon=40, rng_seed=77)
    recs1, sum1 = harness.run_experiment(cfg_d, "sca", workers=1)
    recs2, sum2 = harness.run_experiment(cfg_d, "sca", workers=2)
    p1, s1 = harness.export(recs1, sum1, tmp_path / "d1", cfg_d)
    p2, s2 = harness.export(recs2, sum2, tmp_path / "d2", cfg_d)
    bytes_ok = open(p1, "rb").read() == open(p2, "rb").read()
    j1, j2 = json.load(open(s1)), json.load(open(s2))
    j1.pop("timing")
    j2.pop("timing")
    bytes_ok &= j1 == j2
    notes.append(f"byte determinism {bytes_ok}")

    ok = ok_tf and ok_tan and minorant_ok and descent_ok and feas_ok \
        and res_ok and bytes_ok and n_conv >= 40
    assert _report(7, ok, "; ".join(notes))


def test_criterion_8_queue_dynamics_shape(campaign):
    cell = campaign[(1.0, 3.0)]
    z = cell["z_trace"]
    q = cell["q_trace"]
    n = z.shape[0]
    ok = True
    details = []
    for u in range(z.shape[1]):
        z20 = z[-n // 5:, u].mean()
        z10 = z[-n // 10:, u].mean()
        # a plateau at (near) zero is still a plateau
        plateau = abs(z20 - z10) <= max(0.15 * z10, 0.05)
        below = np.all(q[-n // 5:, u] < cell["config"].queue_threshold[u])
        ok &= plateau and below
        details.append(
            f"user {u}: Z last-20% {z20:.3f} vs last-10% {z10:.3f} "
            f"(plateau {plateau}), tail mean-Q below threshold {below}"
        )
    assert _report(8, ok, "; ".join(details))
