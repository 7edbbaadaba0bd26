"""Semidefinite-relaxation solver with the quadratic-transform outer loop.

Beamformer outer products are lifted to Hermitian PSD matrices; the two
coupled fractional constraints (decoder SINR and harvested energy) are
decoupled by scalar auxiliaries whose closed-form optima reproduce the
original ratios.  Alternating the auxiliary updates with one convex conic
solve per round is monotone in the lifted objective.  Beamformers are
recovered from the principal eigenpair, with the second-to-first eigenvalue
ratio logged as the rank-one diagnostic.
"""

import numpy as np
from dataclasses import dataclass, field

from . import backend, model, sca

LN2 = float(np.log(2.0))


@dataclass
class FpState:
    """Auxiliary scalars of the quadratic transform plus loop bookkeeping."""

    nu: np.ndarray            # decoder-branch ratio auxiliaries
    mu: np.ndarray            # harvesting ratio auxiliaries
    iteration: int = 0
    objectives: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(self.nu < 0) or np.any(self.mu < 0):
            raise ValueError("auxiliary scalars must be non-negative")


@dataclass
class LiftedDecision:
    """Solution of one lifted convex round."""

    F_mats: list              # Hermitian PSD matrices, one per user
    gamma: np.ndarray
    e: np.ndarray
    rho: np.ndarray
    objective: float
    status: str


def update_nu(F_k, gamma_k, h_k):
    """Closed-form auxiliary for the SINR fraction: sqrt(h^H F h) / gamma."""
    if gamma_k <= 0:
        raise ValueError("zero-rate users are excluded from the ratio update")
    h_k = np.asarray(h_k, dtype=complex)
    quad = float(np.real(h_k.conj() @ np.asarray(F_k) @ h_k))
    return float(np.sqrt(max(quad, 0.0)) / gamma_k)


def update_mu(F_mats, e_k, h_k, rx_noise_var):
    """Closed-form auxiliary for the harvesting fraction:
    sqrt(sum_j h^H F_j h + sigma^2) / e."""
    if e_k <= 0:
        raise ValueError("full-battery users keep their auxiliary frozen")
    h_k = np.asarray(h_k, dtype=complex)
    tot = sum(float(np.real(h_k.conj() @ np.asarray(F) @ h_k)) for F in F_mats)
    return float(np.sqrt(max(tot + rx_noise_var, 0.0)) / e_k)


def build_and_solve_lifted(weights, H, nu, mu, config, rate_on, eh_on,
                           e_cap_pw, v_pw, hint):
    """One convex round of the lifted problem at fixed auxiliaries.

    ``hint`` carries the previous round's (gamma, e, rho) iterate purely as
    solver conditioning scales; it never changes the feasible set.
    """
    H = np.asarray(H, dtype=complex)
    K, Nt = H.shape
    V = float(weights.tradeoff)
    g_hint, e_hint, rho_hint = hint
    p = backend.ConicSubproblem()
    for k in range(K):
        p.add_hermitian(f"F{k}", Nt)
        p.add_psd(f"F{k}")
        p.add_objective(V * p.trace(f"F{k}"))
    p.add_reals("rho", K, lb=config.ps_bounds[0], ub=config.ps_bounds[1])

    outers = [np.outer(H[k], H[k].conj()) for k in range(K)]
    for k in range(K):
        h = H[k]
        del2 = float(config.id_noise_var[k])
        rho_pt = float(np.clip(rho_hint[k], 0.05, 0.95))
        if rate_on[k]:
            cap = weights.gamma_cap[k]
            ub = cap if np.isfinite(cap) and cap < 2.0 ** 50 else None
            g_pt = max(float(g_hint[k]), 1.0)
            p.add_reals(f"gamma{k}", 1, lb=0.0, ub=ub, unit=g_pt)
            p.add_reals(f"r{k}", 1)
            p.add_objective(-weights.rate_weight[k] * p.entry(f"r{k}"))
            p.add_log_hyp(LN2 * p.entry(f"r{k}"), p.entry(f"gamma{k}") + 1.0)
            # y <= sqrt(h^H F_k h) via y^2 <= h^H F_k h; at consistency
            # y = nu * gamma
            y_pt = max(nu[k] * g_pt, 1e-9)
            p.add_reals(f"y{k}", 1, lb=0.0, unit=y_pt)
            own = p.herm_form(f"F{k}", outers[k])
            p.add_sq_leq([p.entry(f"y{k}")], own, scale=y_pt ** 2)
            s_pt = del2 / rho_pt
            p.add_reals(f"s{k}", 1, lb=0.0, unit=s_pt)
            p.add_hyperbolic(
                p.entry(f"s{k}"), p.entry("rho", k), float(np.sqrt(del2)),
                balance=float(np.sqrt(rho_pt / s_pt)),
            )
            lhs = 2.0 * nu[k] * p.entry(f"y{k}") \
                - nu[k] ** 2 * p.entry(f"gamma{k}") \
                - config.rx_noise_var[k] - p.entry(f"s{k}")
            for u in range(K):
                if u != k:
                    lhs = lhs - p.herm_form(f"F{u}", outers[k])
            p.add_ineq(lhs)
        if eh_on[k]:
            e_pt = max(float(e_hint[k]), config.harvest_floor)
            p.add_reals(f"e{k}", 1, lb=0.0, ub=e_cap_pw[k], unit=e_pt)
            p.add_objective(-v_pw[k] * p.entry(f"e{k}"))
            z_pt = max(mu[k] * e_pt, 1e-9)     # z = mu * e at consistency
            p.add_reals(f"z{k}", 1, lb=0.0, unit=z_pt)
            tot = backend.Affine.constant(float(config.rx_noise_var[k]))
            for j in range(K):
                tot = tot + p.herm_form(f"F{j}", outers[k])
            p.add_sq_leq([p.entry(f"z{k}")], tot, scale=z_pt ** 2)
            # c >= 1 / (zeta (1 - rho)) as a hyperbolic product
            c_pt = 1.0 / (float(config.eh_efficiency[k]) * (1.0 - rho_pt))
            p.add_reals(f"c{k}", 1, lb=0.0, unit=c_pt)
            p.add_hyperbolic(
                p.entry(f"c{k}"), 1.0 - p.entry("rho", k),
                float(1.0 / np.sqrt(config.eh_efficiency[k])),
                balance=float(np.sqrt((1.0 - rho_pt) / c_pt)),
            )
            p.add_ineq(
                2.0 * mu[k] * p.entry(f"z{k}") - mu[k] ** 2 * p.entry(f"e{k}")
                - p.entry(f"c{k}")
            )
    sol = backend.solve_subproblem(p, config.feas_tol, config.gap_tol)
    if not sol.ok:
        return LiftedDecision(
            F_mats=[np.zeros((Nt, Nt), complex)] * K, gamma=np.zeros(K),
            e=np.zeros(K), rho=np.full(K, 0.5), objective=np.nan,
            status=sol.status,
        )
    F_mats = [sol.value(f"F{k}") for k in range(K)]
    gamma = np.array([
        float(sol.value(f"gamma{k}")[0]) if rate_on[k] else 0.0 for k in range(K)
    ])
    e = np.array([
        float(sol.value(f"e{k}")[0]) if eh_on[k] else 0.0 for k in range(K)
    ])
    rho = np.clip(sol.value("rho"), *config.ps_bounds)
    obj = (
        V * sum(float(np.real(np.trace(F))) for F in F_mats)
        - float(np.sum(weights.rate_weight * np.log2(1.0 + gamma)))
        - float(np.sum(v_pw * e))
    )
    return LiftedDecision(F_mats=F_mats, gamma=gamma, e=e, rho=rho,
                          objective=obj, status="optimal")


def recover_beamformers(F_k, tol=1e-12):
    """Principal-eigenpair scaling f = sqrt(lambda_1) q_1.

    Returns the beamformer and the second-to-first eigenvalue ratio (zero
    for the zero matrix)."""
    F_k = np.asarray(F_k, dtype=complex)
    vals, vecs = np.linalg.eigh(F_k)
    lead = float(max(vals[-1], 0.0))
    if lead <= tol:
        return np.zeros(F_k.shape[0], dtype=complex), 0.0
    second = float(max(vals[-2], 0.0)) if F_k.shape[0] > 1 else 0.0
    return np.sqrt(lead) * vecs[:, -1], second / lead


def _init_auxiliaries(weights, H, config, rate_on, eh_on, e_cap_pw):
    """Auxiliaries at their closed-form optima for the shared starting point,
    so the first convex round reproduces the transform exactly."""
    F0, g0, e0, rho0 = sca.feasible_start(weights, H, config)
    K = H.shape[0]
    F_mats = [np.outer(F0[k], F0[k].conj()) for k in range(K)]
    harvest = model.compute_harvested_power_all(
        H, F0, rho0, config.eh_efficiency, config.rx_noise_var
    )
    nu = np.zeros(K)
    mu = np.zeros(K)
    e_start = np.minimum(np.maximum(harvest, config.harvest_floor), e_cap_pw)
    for k in range(K):
        if rate_on[k] and g0[k] > 0:
            nu[k] = update_nu(F_mats[k], g0[k], H[k])
        if eh_on[k] and e_start[k] > 0:
            mu[k] = update_mu(F_mats, e_start[k], H[k], config.rx_noise_var[k])
    return nu, mu, (np.maximum(g0, 1.0), e_start, rho0)


def solve_sdr_fp(weights, channel, config, init=None):
    """Alternate auxiliary updates with lifted convex rounds to convergence,
    then recover rank-one beamformers and re-certify feasibility."""
    H_full = np.asarray(channel.H, dtype=complex)
    basis = None
    if H_full.shape[1] > H_full.shape[0]:
        basis = sca.channel_subspace(H_full)
        H = H_full @ basis.conj()
    else:
        H = H_full
    K, Nt = H.shape
    caps = np.asarray(weights.gamma_cap, dtype=float)
    e_cap_pw = np.asarray(weights.e_cap, dtype=float) / config.slot_duration
    v_pw = np.asarray(weights.energy_weight, dtype=float) * config.slot_duration
    rate_on = (np.asarray(weights.rate_weight) > 0) & (caps > 0)
    eh_on = (v_pw > 0) & (e_cap_pw > config.harvest_floor)
    scale = float(
        np.sum(weights.rate_weight * np.log2(1.0 + np.minimum(caps, 2.0 ** 50)))
        + np.sum(v_pw * e_cap_pw)
    )
    eh_on &= v_pw * e_cap_pw > 1e-5 * max(scale, 1e-12)

    if not np.any(rate_on) and not np.any(eh_on):
        res = sca.ScaResult(
            F=np.zeros((K, H_full.shape[1]), complex), gamma=np.zeros(K),
            e=np.zeros(K), rho=np.full(K, 0.5), objective=0.0,
            objectives=[0.0], iterations=0, converged=True, status="optimal",
        )
        res.eigen_ratio = 0.0
        return res

    if init is not None:
        nu, mu = (np.array(a, dtype=float, copy=True) for a in init)
        hint = (np.ones(K), np.full(K, 1e-3), np.full(K, 0.5))
    else:
        nu, mu, hint = _init_auxiliaries(
            weights, H, config, rate_on, eh_on, e_cap_pw
        )

    objs = []
    lifted = None
    status = "optimal"
    converged = False
    eh_active = eh_on.copy()
    it = 0
    for it in range(1, config.fp_max_iter + 1):
        step = build_and_solve_lifted(
            weights, H, nu, mu, config, rate_on, eh_active, e_cap_pw, v_pw,
            hint,
        )
        if step.status != "optimal":
            status = step.status
            break
        lifted = step
        hint = (np.maximum(step.gamma, 1.0),
                np.maximum(step.e, config.harvest_floor), step.rho)
        objs.append(step.objective)
        for k in range(K):
            if rate_on[k] and step.gamma[k] > config.gamma_floor:
                nu[k] = update_nu(step.F_mats[k], step.gamma[k], H[k])
            if eh_active[k]:
                if step.e[k] > config.harvest_floor:
                    mu[k] = update_mu(step.F_mats, step.e[k], H[k],
                                      config.rx_noise_var[k])
                else:
                    # harvesting priced itself out of this user's trade: the
                    # constraint is vacuous at e = 0 but a frozen auxiliary
                    # would keep capping the splitting ratio, so drop it
                    eh_active[k] = False
        if len(objs) > 1 and abs(objs[-1] - objs[-2]) <= config.fp_tol * (
                1.0 + abs(objs[-2])):
            converged = True
            break

    if lifted is None:
        res = sca.ScaResult(
            F=np.zeros((K, H_full.shape[1]), complex), gamma=np.zeros(K),
            e=np.zeros(K), rho=np.full(K, 0.5), objective=0.0, objectives=objs,
            iterations=it, converged=False, status=status,
        )
        res.eigen_ratio = np.nan
        return res

    F = np.zeros((K, Nt), dtype=complex)
    ratios = np.zeros(K)
    for k in range(K):
        F[k], ratios[k] = recover_beamformers(lifted.F_mats[k])
    if basis is not None:
        F = F @ basis.T
        lifted.F_mats = [basis @ Fk @ basis.conj().T for Fk in lifted.F_mats]

    res = sca.ScaResult(
        F=F, gamma=lifted.gamma, e=lifted.e * config.slot_duration,
        rho=lifted.rho,
        objective=float(
            weights.tradeoff * np.sum(np.abs(F) ** 2)
            - np.sum(weights.rate_weight * np.log2(1.0 + lifted.gamma))
            - np.sum(v_pw * lifted.e)
        ),
        objectives=objs, iterations=it, converged=converged, status=status,
    )
    res.eigen_ratio = float(np.max(ratios))
    res.rank_one = bool(np.max(ratios) < config.rank_one_tol)
    res.F_mats = lifted.F_mats
    return res
