"""Successive convex approximation for the per-slot subproblems.

The nonconvex SINR and harvesting constraints are differences of convex
functions; their convex parts are replaced by first-order Taylor minorants
around the current operating point and the resulting convex subproblem is
solved repeatedly.  Every iterate stays feasible for the original
constraints (inner approximation) and the surrogate objective is
non-increasing.
"""

import numpy as np
from dataclasses import dataclass

from . import backend, model

LN2 = float(np.log(2.0))


@dataclass
class RateQuadLinearization:
    """Affine minorant of |h^H f|^2 / gamma around (f0, gamma0).

    value(f, gamma) = Re(grad_f^H f) + coef_gamma * gamma; the constant term
    cancels identically.  Tangent at the expansion point, and a global
    underestimate by joint convexity of the quadratic-over-linear form.
    """

    h: np.ndarray
    grad_f: np.ndarray
    coef_gamma: float

    def value(self, f, gamma):
        return float(np.real(np.vdot(self.grad_f, f))) + self.coef_gamma * gamma

    def exact(self, f, gamma):
        return abs(np.vdot(self.h, f)) ** 2 / gamma


def linearize_rate_quad(h, f0, gamma0, gamma_floor=1e-9):
    """Tangent minorant of the decoder-branch quadratic-over-linear term."""
    if gamma0 < gamma_floor:
        raise ValueError("expansion point gamma must sit above the floor")
    h = np.asarray(h, dtype=complex)
    a0 = np.vdot(h, f0)  # h^H f0
    return RateQuadLinearization(
        h=h,
        grad_f=2.0 * a0 * h / gamma0,
        coef_gamma=-abs(a0) ** 2 / gamma0 ** 2,
    )


@dataclass
class HarvestQuadLinearization:
    """Affine minorant of (sum_j |h^H f_j|^2 + sigma^2) / e around (F0, e0)."""

    h: np.ndarray
    rx_noise_var: float
    grad_f: np.ndarray   # K x Nt, one gradient row per beamformer
    coef_e: float
    const: float

    def value(self, F, e):
        acc = self.const + self.coef_e * e
        F = np.atleast_2d(F)
        for j in range(self.grad_f.shape[0]):
            acc += float(np.real(np.vdot(self.grad_f[j], F[j])))
        return acc

    def exact(self, F, e):
        tot = float(np.sum(np.abs(np.atleast_2d(F) @ self.h.conj()) ** 2))
        return (tot + self.rx_noise_var) / e


def linearize_harvest_quad(h, F0, e0, rx_noise_var, harvest_floor=1e-9):
    """Tangent minorant of the harvested-sum-over-e term."""
    if e0 < harvest_floor:
        raise ValueError("expansion point e must sit above the floor")
    h = np.asarray(h, dtype=complex)
    F0 = np.atleast_2d(np.asarray(F0, dtype=complex))
    a0 = F0 @ h.conj()                       # a0[j] = h^H f0_j
    tot0 = float(np.sum(np.abs(a0) ** 2)) + rx_noise_var
    return HarvestQuadLinearization(
        h=h,
        rx_noise_var=rx_noise_var,
        grad_f=2.0 * a0[:, None] * h[None, :] / e0,
        coef_e=-tot0 / e0 ** 2,
        const=2.0 * rx_noise_var / e0,
    )


@dataclass
class TotalPowerLinearization:
    """Affine minorant of sum_j |h^H f_j|^2 + sigma^2 around F0 (harvest-and-use)."""

    h: np.ndarray
    rx_noise_var: float
    grad_f: np.ndarray
    const: float

    def value(self, F):
        acc = self.const
        F = np.atleast_2d(F)
        for j in range(self.grad_f.shape[0]):
            acc += float(np.real(np.vdot(self.grad_f[j], F[j])))
        return acc

    def exact(self, F):
        return float(
            np.sum(np.abs(np.atleast_2d(F) @ self.h.conj()) ** 2)
        ) + self.rx_noise_var


def linearize_total_power(h, F0, rx_noise_var):
    h = np.asarray(h, dtype=complex)
    F0 = np.atleast_2d(np.asarray(F0, dtype=complex))
    a0 = F0 @ h.conj()
    return TotalPowerLinearization(
        h=h,
        rx_noise_var=rx_noise_var,
        grad_f=2.0 * a0[:, None] * h[None, :],
        const=rx_noise_var - float(np.sum(np.abs(a0) ** 2)),
    )


@dataclass
class ScaResult:
    F: np.ndarray
    gamma: np.ndarray
    e: np.ndarray
    rho: np.ndarray
    objective: float
    objectives: list
    iterations: int
    converged: bool
    status: str
    feasibility_gap: float = 0.0


class _ProjectedWarm:
    """Warm-start decision expressed in subspace coordinates."""

    def __init__(self, warm, basis):
        self.F = np.asarray(warm.F, dtype=complex) @ basis.conj()
        self.rho = warm.rho


def _lift(result, basis):
    if basis is not None:
        result.F = result.F @ basis.T
    return result


def channel_subspace(H):
    """Orthonormal basis of the span of the channel vectors.

    Beams never profit from leaving this span: every link gain h_k^H f_j is
    invariant under projecting f_j onto it while the spent power can only
    drop.  Solving in the K-dimensional subspace is therefore exact and much
    cheaper whenever the antenna count exceeds the user count.
    """
    H = np.asarray(H, dtype=complex)
    q, r = np.linalg.qr(H.T)               # columns span {h_k}
    keep = np.abs(np.diag(r)) > 1e-12 * max(np.max(np.abs(r)), 1e-300)
    return q[:, keep]


# ---------------------------------------------------------------------------
# feasible starting points (shared by the SCA and KKT methods)
# ---------------------------------------------------------------------------

def feasible_start(weights, H, config, min_harvest=None):
    """Feasible starting point shared by the iterative solvers.

    Interference-nulled beams at a balanced split.  Battery mode sizes each
    user's power by the rate economics w/(V ln 2); with a harvesting floor
    (the batteryless problem) powers instead cover the floors with a joint
    top-up.  The epigraph variables start at the values the beams actually
    achieve: the solvers are local, and a start whose achieved SINRs sit at
    the right scale keeps them inside the attraction basin instead of
    crawling up from an underpowered point.
    """
    H = np.asarray(H, dtype=complex)
    K = H.shape[0]
    rho0 = np.full(K, 0.5)
    caps = getattr(weights, "gamma_cap", None)
    if caps is None:
        caps = np.full(K, np.inf)
    w = np.asarray(weights.rate_weight, dtype=float)
    active = (w > 0) & (np.asarray(caps) > 0)

    # interference-nulled beams with powers at the rate-economics scale
    # w/(V ln 2): at high SINR that is where the marginal power cost meets
    # the marginal rate reward, so the surrogate starts near the right
    # magnitude instead of crawling up from an underpowered point
    V = max(float(getattr(weights, "tradeoff", 1.0)), 1e-12)
    dirs = zf_directions(H)
    p = np.where(active, w / (V * LN2), 0.0)
    if not np.any(p > 0):
        p = np.where(active, 1e-6, 0.0)
    F0 = np.sqrt(p)[:, None] * dirs

    if min_harvest is not None:
        edot = np.broadcast_to(np.asarray(min_harvest, dtype=float), (K,))
        if np.any(edot > 0):
            dirs = zf_directions(H)
            gains = np.abs(H.conj() @ dirs.T) ** 2
            need = edot / (config.eh_efficiency * (1.0 - rho0)) - config.rx_noise_var
            # own-beam power covering each floor, then joint top-up
            p = np.maximum(need, 0.0) / np.maximum(np.diag(gains), 1e-300)
            for _ in range(64):
                beam_rx = gains @ p
                if np.all(beam_rx >= need * (1.0 - 1e-9)):
                    break
                ratio = np.max(need / np.maximum(beam_rx, 1e-300))
                p = p * 1.0001 * max(ratio, 1.0)
            else:
                raise ValueError("harvesting floor unreachable from nulled start")
            F0 = np.sqrt(p)[:, None] * dirs

    # the SINR targets only size the transmit powers; the epigraph variables
    # start at the SINR actually achieved there, which keeps the first
    # linearization self-consistent (a target of 1 at high power makes the
    # fixed-point updates overshoot and the surrogate crawl)
    achieved = model.compute_sinr_all(
        H, F0, rho0, config.rx_noise_var, config.id_noise_var
    )
    gamma0 = np.where(active, np.minimum(achieved, caps), 0.0)
    gamma0 = np.where(active, np.maximum(gamma0, config.gamma_floor), 0.0)
    harvest = model.compute_harvested_power_all(
        H, F0, rho0, config.eh_efficiency, config.rx_noise_var
    )
    e0 = 0.5 * harvest
    return F0, gamma0, e0, rho0


def _warm_point(warm, weights, H, config):
    """Re-feasibilize a previous decision for the current channel and caps."""
    F0 = np.asarray(warm.F, dtype=complex)
    if not np.all(np.isfinite(F0)):
        return None
    rho0 = np.clip(np.asarray(warm.rho, dtype=float), *config.ps_bounds)
    caps = np.asarray(weights.gamma_cap, dtype=float)
    active = (np.asarray(weights.rate_weight) > 0) & (caps > 0)
    achieved = model.compute_sinr_all(
        H, F0, rho0, config.rx_noise_var, config.id_noise_var
    )
    if np.any(active & (achieved < config.gamma_floor)):
        return None  # stale warm start; fall back to the fresh nulled point
    # starvation check: the tangent of the rate ratio vanishes with a dead
    # link, so the surrogate sequence can never revive a user on its own and
    # the stalled-objective test cannot see that user's latent value.  A dead
    # link is only a trap when reviving it would actually pay: estimate the
    # net gain of a rate-economics-sized beam at a neutral split against the
    # harvesting value the split change would sacrifice.
    w = np.asarray(weights.rate_weight, dtype=float)
    v = np.asarray(weights.energy_weight, dtype=float)
    V = max(float(getattr(weights, "tradeoff", 1.0)), 1e-12)
    harvest0 = model.compute_harvested_power_all(
        H, F0, rho0, config.eh_efficiency, config.rx_noise_var
    ) * config.slot_duration
    e_now = np.minimum(harvest0, np.asarray(weights.e_cap, dtype=float))
    for k in np.flatnonzero(active & (achieved < 1.0)):
        p_try = w[k] / (V * LN2)
        own = p_try * float(np.linalg.norm(H[k]) ** 2)
        gamma_try = 0.5 * own / (0.5 * config.rx_noise_var[k]
                                 + config.id_noise_var[k])
        gain = w[k] * np.log2(1.0 + min(gamma_try, caps[k])) - V * p_try
        loss = v[k] * e_now[k] * max(1.0 - 0.5 / (1.0 - rho0[k]), 0.0)
        if gain - loss > 1e-3 * (1.0 + abs(float(np.sum(
                w * np.log2(1.0 + achieved))))):
            return None
    gamma0 = np.where(active, np.minimum(achieved, caps), 0.0)
    harvest = model.compute_harvested_power_all(
        H, F0, rho0, config.eh_efficiency, config.rx_noise_var
    )
    e0 = np.minimum(harvest, weights.e_cap / config.slot_duration)
    return F0, gamma0, e0, rho0


# ---------------------------------------------------------------------------
# subproblem assembly and the outer loops
# ---------------------------------------------------------------------------

def _objective_battery(V, w, v, F, gamma, e):
    return (
        V * float(np.sum(np.abs(F) ** 2))
        - float(np.sum(w * np.log2(1.0 + gamma)))
        - float(np.sum(v * e))
    )


def _base_problem(K, Nt, V, config, Fi):
    p = backend.ConicSubproblem()
    for k in range(K):
        p.add_complex(f"f{k}", Nt)
    p.add_reals("rho", K, lb=config.ps_bounds[0], ub=config.ps_bounds[1])
    for k in range(K):
        p.add_reals(f"t{k}", 1, lb=0.0)
        p.add_objective(V * p.entry(f"t{k}"))
        p.norm_sq_leq(
            f"f{k}", p.entry(f"t{k}"),
            scale=max(float(np.sum(np.abs(Fi[k]) ** 2)), 1e-2),
        )
    return p


def _add_rate_block(p, k, K, h, weights, config, Fi, gi_k, rho_k):
    """Rate hypograph + linearized SINR constraint for one active user.

    Caps far beyond any reachable operating point are left out of the
    subproblem (the decision is still clipped to them afterwards); keeping
    them would only poison the conic problem's scaling.
    """
    cap = weights.gamma_cap[k]
    cap = cap if np.isfinite(cap) and cap < 2.0 ** 50 else None
    del2 = float(config.id_noise_var[k])
    p.add_reals(f"gamma{k}", 1, lb=0.0, ub=cap, unit=max(gi_k, 1.0))
    p.add_reals(f"r{k}", 1)
    # decoder-noise epigraph s >= delta^2 / rho, in units of its current value
    s_pt = del2 / rho_k
    p.add_reals(f"s{k}", 1, lb=0.0, unit=s_pt)
    p.add_objective(-weights.rate_weight[k] * p.entry(f"r{k}"))
    p.add_log_hyp(LN2 * p.entry(f"r{k}"), p.entry(f"gamma{k}") + 1.0)
    lin = linearize_rate_quad(h, Fi[k], gi_k, config.gamma_floor)
    bound = (
        p.re_dot(f"f{k}", lin.grad_f)
        + lin.coef_gamma * p.entry(f"gamma{k}")
        - config.rx_noise_var[k]
        - p.entry(f"s{k}")
    )
    # natural magnitude of the whole constraint at the expansion point
    blk_scale = max(
        abs(np.vdot(h, Fi[k])) ** 2 / gi_k,
        float(config.rx_noise_var[k]) + s_pt,
    )
    interf = [p.dot_complex(f"f{u}", h) for u in range(K) if u != k]
    if interf:
        p.add_sq_leq(interf, bound, scale=blk_scale)
    else:
        p.add_ineq(bound)
    p.add_hyperbolic(
        p.entry(f"s{k}"), p.entry("rho", k), float(np.sqrt(del2)),
        balance=float(np.sqrt(rho_k / s_pt)),
    )


def solve_sca(weights, channel, config, init=None):
    """Battery-aware per-slot solve working on the beamformer vectors directly."""
    H_full = np.asarray(channel.H, dtype=complex)
    basis = None
    if H_full.shape[1] > H_full.shape[0]:
        basis = channel_subspace(H_full)
        H = H_full @ basis.conj()          # channels in subspace coordinates
        if init is not None:
            init = _ProjectedWarm(init, basis)
    else:
        H = H_full
    K, Nt = H.shape
    caps = np.asarray(weights.gamma_cap, dtype=float)
    e_cap_pw = np.asarray(weights.e_cap, dtype=float) / config.slot_duration
    # the energy reward is per joule; fold the slot duration into the weight
    v_pw = np.asarray(weights.energy_weight, dtype=float) * config.slot_duration
    rate_on = (np.asarray(weights.rate_weight) > 0) & (caps > 0)
    eh_on = (v_pw > 0) & (e_cap_pw > config.harvest_floor)
    # harvesting terms whose whole attainable reward is negligible against
    # the objective scale only damage conditioning; drop them (their epigraph
    # stays at zero, well inside tolerance)
    scale = float(
        np.sum(weights.rate_weight * np.log2(1.0 + np.minimum(caps, 2.0 ** 50)))
        + np.sum(v_pw * e_cap_pw)
    )
    eh_on &= v_pw * e_cap_pw > 1e-5 * max(scale, 1e-12)

    if not np.any(rate_on) and not np.any(eh_on):
        return ScaResult(
            F=np.zeros((K, H_full.shape[1]), complex), gamma=np.zeros(K),
            e=np.zeros(K), rho=np.full(K, 0.5), objective=0.0,
            objectives=[0.0], iterations=0, converged=True, status="optimal",
        )

    point = _warm_point(init, weights, H, config) if init is not None else None
    if point is None:
        point = feasible_start(weights, H, config)
    Fi, gi, ei, rho_i = (np.array(a, copy=True) for a in point)
    gi = np.where(rate_on, np.maximum(gi, config.gamma_floor), 0.0)
    ei = np.where(eh_on, np.clip(ei, 0.0, e_cap_pw), 0.0)

    objs = [_objective_battery(weights.tradeoff, weights.rate_weight,
                               v_pw, Fi, gi, ei)]
    status = "optimal"
    converged = False
    worst_gap = 0.0
    it = 0
    for it in range(1, config.sca_max_iter + 1):
        p = _base_problem(K, Nt, weights.tradeoff, config, Fi)
        for k in range(K):
            if rate_on[k]:
                _add_rate_block(
                    p, k, K, H[k], weights, config, Fi,
                    max(gi[k], config.gamma_floor), rho_i[k],
                )
            if eh_on[k]:
                e_pt = max(ei[k], config.harvest_floor)
                p.add_reals(f"e{k}", 1, lb=0.0, ub=e_cap_pw[k], unit=e_pt)
                p.add_objective(-v_pw[k] * p.entry(f"e{k}"))
                lin = linearize_harvest_quad(
                    H[k], Fi, e_pt, config.rx_noise_var[k], config.harvest_floor,
                )
                st = backend.Affine.constant(lin.const) + lin.coef_e * p.entry(f"e{k}")
                for j in range(K):
                    st = st + p.re_dot(f"f{j}", lin.grad_f[j])
                s_pt = lin.exact(Fi, e_pt)
                p.add_hyperbolic(
                    1.0 - p.entry("rho", k), st,
                    float(1.0 / np.sqrt(config.eh_efficiency[k])),
                    balance=float(np.sqrt(s_pt / max(1.0 - rho_i[k], 1e-6))),
                )
        sol = backend.solve_subproblem(p, config.feas_tol, config.gap_tol)
        if not sol.ok:
            if it == 1 and init is not None:
                # a stale warm start can produce a badly scaled first round;
                # try once more from the fresh matched-beam point
                return solve_sca(weights, channel, config, init=None)
            status = sol.status
            break
        Fi = np.stack([sol.value(f"f{k}") for k in range(K)])
        rho_i = np.clip(sol.value("rho"), *config.ps_bounds)
        gi = np.array([
            max(float(sol.value(f"gamma{k}")[0]), 0.0) if rate_on[k] else 0.0
            for k in range(K)
        ])
        ei = np.array([
            max(float(sol.value(f"e{k}")[0]), 0.0) if eh_on[k] else 0.0
            for k in range(K)
        ])

        # inner approximation: every iterate must satisfy the true constraints
        achieved = model.compute_sinr_all(
            H, Fi, rho_i, config.rx_noise_var, config.id_noise_var
        )
        harvest = model.compute_harvested_power_all(
            H, Fi, rho_i, config.eh_efficiency, config.rx_noise_var
        )
        gap = max(
            float(np.max((gi - achieved) / np.maximum(1.0, achieved))),
            float(np.max((ei - harvest) / np.maximum(1e-12, harvest))),
        )
        worst_gap = max(worst_gap, gap)
        if gap > 1e-3:
            raise RuntimeError(
                f"SCA iterate lost feasibility (gap {gap:.2e}); "
                "the inner approximation should prevent this"
            )
        gi = np.minimum(gi, achieved)
        ei = np.minimum(ei, harvest)

        objs.append(_objective_battery(weights.tradeoff, weights.rate_weight,
                                       v_pw, Fi, gi, ei))
        if abs(objs[-1] - objs[-2]) <= config.sca_tol * (1.0 + abs(objs[-2])):
            converged = True
            break

    return _lift(ScaResult(
        F=Fi, gamma=gi, e=ei * config.slot_duration, rho=rho_i,
        objective=objs[-1], objectives=objs,
        iterations=it, converged=converged, status=status,
        feasibility_gap=worst_gap,
    ), basis)


def _objective_batteryless(V, w, F, gamma):
    return V * float(np.sum(np.abs(F) ** 2)) - float(np.sum(w * np.log2(1.0 + gamma)))


def solve_sca_batteryless(weights, channel, config, min_harvest=None, init=None):
    """Harvest-and-use variant: per-user harvested-power floors, no battery caps."""
    H_full = np.asarray(channel.H, dtype=complex)
    basis = None
    if H_full.shape[1] > H_full.shape[0]:
        basis = channel_subspace(H_full)
        H = H_full @ basis.conj()
        if init is not None:
            F0p = np.asarray(init[0], complex) @ basis.conj()
            init = (F0p, init[1], init[2])
    else:
        H = H_full
    K, Nt = H.shape
    edot = np.asarray(
        config.min_harvest if min_harvest is None else min_harvest, dtype=float
    )
    edot = np.broadcast_to(edot, (K,)).copy()
    rate_on = np.asarray(weights.rate_weight) > 0

    class _NoCaps:
        rate_weight = weights.rate_weight
        gamma_cap = np.full(K, np.inf)
        e_cap = np.full(K, np.inf)
        energy_weight = np.zeros(K)
        tradeoff = weights.tradeoff

    w = _NoCaps()
    if init is not None:
        Fi, gi, rho_i = (np.array(a, copy=True) for a in init)
    else:
        Fi, gi, _, rho_i = feasible_start(w, H, config, min_harvest=edot)
    gi = np.where(rate_on, np.maximum(gi, config.gamma_floor), 0.0)

    objs = [_objective_batteryless(weights.tradeoff, weights.rate_weight, Fi, gi)]
    status = "optimal"
    converged = False
    worst_gap = 0.0
    it = 0
    for it in range(1, config.sca_max_iter + 1):
        p = _base_problem(K, Nt, weights.tradeoff, config, Fi)
        for k in range(K):
            if rate_on[k]:
                _add_rate_block(
                    p, k, K, H[k], w, config, Fi,
                    max(gi[k], config.gamma_floor), rho_i[k],
                )
            if edot[k] > 0:
                lin = linearize_total_power(H[k], Fi, config.rx_noise_var[k])
                st = backend.Affine.constant(lin.const)
                for j in range(K):
                    st = st + p.re_dot(f"f{j}", lin.grad_f[j])
                p.add_hyperbolic(
                    1.0 - p.entry("rho", k), st,
                    float(np.sqrt(edot[k] / config.eh_efficiency[k])),
                    balance=float(np.sqrt(
                        lin.exact(Fi) / max(1.0 - rho_i[k], 1e-6)
                    )),
                )
        sol = backend.solve_subproblem(p, config.feas_tol, config.gap_tol)
        if not sol.ok:
            status = sol.status
            break
        Fi = np.stack([sol.value(f"f{k}") for k in range(K)])
        rho_i = np.clip(sol.value("rho"), *config.ps_bounds)
        gi = np.array([
            max(float(sol.value(f"gamma{k}")[0]), 0.0) if rate_on[k] else 0.0
            for k in range(K)
        ])

        achieved = model.compute_sinr_all(
            H, Fi, rho_i, config.rx_noise_var, config.id_noise_var
        )
        harvest = model.compute_harvested_power_all(
            H, Fi, rho_i, config.eh_efficiency, config.rx_noise_var
        )
        gap = max(
            float(np.max((gi - achieved) / np.maximum(1.0, achieved))),
            float(np.max((edot - harvest) / np.maximum(1e-12, edot + 1e-300))),
        )
        worst_gap = max(worst_gap, gap)
        if gap > 1e-3:
            raise RuntimeError(
                f"batteryless SCA iterate lost feasibility (gap {gap:.2e})"
            )
        gi = np.minimum(gi, achieved)

        objs.append(
            _objective_batteryless(weights.tradeoff, weights.rate_weight, Fi, gi)
        )
        if abs(objs[-1] - objs[-2]) <= config.sca_tol * (1.0 + abs(objs[-2])):
            converged = True
            break

    return _lift(ScaResult(
        F=Fi, gamma=gi, e=np.zeros(K), rho=rho_i, objective=objs[-1],
        objectives=objs, iterations=it, converged=converged, status=status,
        feasibility_gap=worst_gap,
    ), basis)
