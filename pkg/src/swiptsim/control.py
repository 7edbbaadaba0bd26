"""Per-slot drift-plus-penalty control and the horizon loop.

Each slot the controller weighs queue pressure (actual, arrival and virtual
backlogs) against spare battery capacity, caps rates and harvesting by the
battery state, hands the resulting weighted subproblem to the chosen
solver, and certifies the returned decision against the exact link model
before applying it.
"""

import numpy as np
from dataclasses import dataclass

from . import kkt as kkt_mod
from . import model, sca, sdr_fp
from .dynamics import advance_state, sample_arrivals
from .channel import draw_angles, generate_channel

SOLVERS = ("sca", "sdr-fp", "kkt")


class ControlError(RuntimeError):
    pass


@dataclass
class SlotWeights:
    """Drift-plus-penalty weights and battery-derived caps for one slot."""

    rate_weight: np.ndarray     # Q + A + Z [bits]
    energy_weight: np.ndarray   # omega * (B_max - B)
    tradeoff: float             # V
    r_max: np.ndarray           # battery-supported rate cap [bits/slot]
    gamma_cap: np.ndarray       # 2^r_max - 1
    e_cap: np.ndarray           # spare battery capacity [J]


def compute_weights(state, config):
    rate_weight = state.data_queue + state.arrivals + state.virtual_queue
    spare = state.spare_battery(config)
    r_max = model.max_rate(
        state.battery, config.circuit_power, config.decoder_efficiency,
        config.slot_duration,
    )
    # exp2 overflows past ~1024 bits; the cap is unreachable long before that
    gamma_cap = np.where(r_max < 50.0, np.exp2(np.minimum(r_max, 50.0)) - 1.0, 2.0 ** 50)
    return SlotWeights(
        rate_weight=rate_weight,
        energy_weight=config.battery_weight * spare,
        tradeoff=config.tradeoff,
        r_max=r_max,
        gamma_cap=gamma_cap,
        e_cap=np.maximum(spare, 0.0),
    )


def certify_decision(decision, channel, weights, config, tol=1e-6):
    """Re-check the decision against the exact link formulas.

    The SINR epigraph may exceed the achieved SINR only within solver
    tolerance; harvested energy may not exceed the harvesting branch's
    intake nor the spare battery room.  Returns the worst relative optimism.
    """
    H = channel.H
    achieved = model.compute_sinr_all(
        H, decision.F, decision.rho, config.rx_noise_var, config.id_noise_var
    )
    harvest = model.compute_harvested_power_all(
        H, decision.F, decision.rho, config.eh_efficiency, config.rx_noise_var
    ) * config.slot_duration
    gap_sinr = np.max((decision.gamma - achieved) / np.maximum(1.0, achieved))
    gap_harv = np.max(
        (decision.harvest - np.minimum(harvest, weights.e_cap))
        / np.maximum(1e-12, harvest)
    )
    return float(max(gap_sinr, gap_harv)), achieved, harvest


def restore_feasibility(decision, channel, weights, config):
    """Re-optimize each user's splitting ratio with the beams frozen.

    Used when rank-one recovery (or solver tolerance) leaves the epigraph
    variables optimistic: for fixed beams the per-user objective is a
    one-dimensional function of the splitting ratio, with the SINR and
    harvest epigraphs taking their exact capped values.
    """
    H = channel.H
    K = H.shape[0]
    gains = np.abs(H.conj() @ decision.F.T) ** 2
    rho_lo, rho_hi = config.ps_bounds
    grid = np.linspace(rho_lo, rho_hi, 4097)
    rho = decision.rho.copy()
    gamma = decision.gamma.copy()
    harvest_e = decision.harvest.copy()
    for k in range(K):
        own = gains[k, k]
        interf = gains[k].sum() - own
        sinr = grid * own / (
            grid * interf + grid * config.rx_noise_var[k] + config.id_noise_var[k]
        )
        g = np.minimum(sinr, weights.gamma_cap[k])
        e = np.minimum(
            config.eh_efficiency[k] * (1.0 - grid)
            * (gains[k].sum() + config.rx_noise_var[k]) * config.slot_duration,
            weights.e_cap[k],
        )
        objective = (
            -weights.rate_weight[k] * np.log2(1.0 + g) - weights.energy_weight[k] * e
        )
        j = int(np.argmin(objective))
        rho[k], gamma[k], harvest_e[k] = grid[j], g[j], e[j]
    return model.BeamDecision(
        F=decision.F, rho=rho, gamma=gamma, harvest=harvest_e,
        diagnostics=dict(decision.diagnostics, restored=True),
    )


def _subproblem_objective(decision, weights):
    return float(
        weights.tradeoff * decision.tx_power
        - np.sum(weights.rate_weight * decision.rates)
        - np.sum(weights.energy_weight * decision.harvest)
    )


def control_step(channel, state, config, solver="sca", warm=None,
                 mode="battery", min_harvest=None):
    """Solve one slot's weighted subproblem and certify the decision.

    ``solver`` is one of "sca", "sdr-fp" or "kkt"; the closed-form solver
    applies to the batteryless mode only.  A zero decision is returned
    without solving when every weight vanishes.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    K, Nt = channel.H.shape
    if K != config.num_users or Nt != config.num_antennas:
        raise ValueError("channel dimensions do not match the configuration")
    weights = compute_weights(state, config)

    if mode == "batteryless":
        if solver == "sdr-fp":
            raise ValueError("the lifted solver is wired for battery mode only")
        edot = np.asarray(
            config.min_harvest if min_harvest is None else min_harvest, float
        )
        if solver == "kkt":
            result = kkt_mod.solve_kkt(weights, channel, config, min_harvest=edot)
        else:
            result = sca.solve_sca_batteryless(
                weights, channel, config, min_harvest=edot
            )
        decision = model.BeamDecision(
            F=result.F, rho=result.rho, gamma=result.gamma,
            harvest=result.e, objective=result.objective,
            diagnostics={
                "solver": solver, "iterations": result.iterations,
                "status": result.status, "converged": result.converged,
                "objective_trace": result.objectives,
                "kkt_residual": getattr(result, "kkt_residual", np.nan),
            },
        )
        return decision

    if solver == "kkt":
        raise ValueError("the closed-form solver handles the batteryless mode only")

    if not np.any(weights.rate_weight > 0) and not np.any(
            (weights.energy_weight > 0) & (weights.e_cap > 0)):
        return model.BeamDecision.zero(
            K, Nt, solver=solver, iterations=0, status="optimal", converged=True
        )

    if solver == "sca":
        result = sca.solve_sca(weights, channel, config, init=warm)
    else:
        result = sdr_fp.solve_sdr_fp(weights, channel, config)
    if result.status in ("infeasible", "unbounded"):
        # the all-off decision is always feasible, so this cannot legitimately
        # happen for the battery-mode subproblem
        raise ControlError(f"per-slot subproblem reported {result.status}")

    decision = model.BeamDecision(
        F=result.F, rho=result.rho,
        gamma=np.minimum(result.gamma, weights.gamma_cap),
        harvest=np.minimum(result.e, weights.e_cap),
        diagnostics={
            "solver": solver, "iterations": result.iterations,
            "status": result.status, "converged": result.converged,
            "objective_trace": result.objectives,
            "eigen_ratio": getattr(result, "eigen_ratio", np.nan),
        },
    )
    gap, achieved, harvest = certify_decision(decision, channel, weights, config)
    if gap > 1e-6:
        decision = restore_feasibility(decision, channel, weights, config)
        gap, achieved, harvest = certify_decision(decision, channel, weights, config)
        if gap > 1e-6:
            raise ControlError(f"feasibility restoration failed (gap {gap:.2e})")
    # exact clips: numerical slack never leaks into the state update
    decision.gamma = np.minimum(decision.gamma, achieved)
    decision.harvest = np.minimum(
        decision.harvest, np.minimum(harvest, weights.e_cap)
    )
    decision.objective = _subproblem_objective(decision, weights)
    decision.diagnostics["certify_gap"] = gap
    return decision


def run_horizon(config, solver="sca", trial=0, record_hook=None):
    """Simulate one trajectory: arrivals, channel, per-slot solve, advance.

    Returns the list of per-slot records produced by ``record_hook`` (or
    plain dicts when no hook is given).  Solver failures fall back to the
    all-off decision for that slot and are flagged, never fatal.
    """
    from .dynamics import NetworkState

    if solver == "kkt":
        raise ValueError("the closed-form solver handles the batteryless mode only")
    rng = np.random.default_rng(config.rng_seed + trial)
    state = NetworkState.initial(config)
    K = config.num_users
    thetas = draw_angles(rng, K)
    records = []
    warm = None
    for slot in range(config.horizon):
        state.arrivals = sample_arrivals(rng, config.mean_arrival, K)
        if config.angles_per_slot:
            thetas = draw_angles(rng, K)
        channel = generate_channel(
            rng, thetas, config.rician_factor, config.pathloss_amplitude,
            config.num_antennas,
        )
        failed = False
        try:
            decision = control_step(channel, state, config, solver, warm=warm)
        except ControlError:
            decision = model.BeamDecision.zero(K, config.num_antennas)
            failed = True
        pre_state = state.copy()
        transition = advance_state(state, decision, config)
        entry = {
            "trial": trial, "slot": slot,
            "state": pre_state, "decision": decision,
            "transition": transition, "solver_failed": failed,
        }
        records.append(record_hook(**entry) if record_hook else entry)
        warm = decision if decision.tx_power > 0 else None
    return records
