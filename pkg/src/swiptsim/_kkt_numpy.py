"""Pure-numpy kernel for the closed-form first-order-condition iteration.

This is the portable fallback for the compiled extension; both implement the
same sweep and must agree to float precision (see the kernel parity tests).

One sweep: damped best-response beamformer solves, then exact tightness
updates of the splitting ratios (harvesting floor) and SINR variables, then
the closed-form multipliers evaluated self-consistently at the new iterate.
"""

import numpy as np

_TINY = 1e-300
_LN2 = float(np.log(2.0))


def kkt_run(H, w, V, delta2, sigma2, zeta, edot,
            f, gamma, rho, lam1, lam2,
            beta, rho_lo, rho_hi, gamma_floor,
            obj_tol, step_tol, max_iter):
    """Iterate sweeps; stop when the objective stalls and the beams settle.

    Returns (f, gamma, rho, lam1, lam2, best_state, obj_hist, iters, clamps)
    where best_state is the lowest-objective iterate seen (a 5-tuple).
    """
    H = np.asarray(H, dtype=complex)
    K, Nt = H.shape
    outer = H[:, :, None] * H[:, None, :].conj()   # outer[k] = h_k h_k^H
    f = np.array(f, dtype=complex)
    gamma = np.array(gamma, dtype=float)
    rho = np.array(rho, dtype=float)
    lam1 = np.array(lam1, dtype=float)
    lam2 = np.array(lam2, dtype=float)
    eye = np.eye(Nt)

    def objective(fv, gv):
        return V * float(np.sum(np.abs(fv) ** 2)) \
            - float(np.sum(w * np.log2(1.0 + gv)))

    obj_hist = [objective(f, gamma)]
    best_obj = obj_hist[0]
    best = (f.copy(), gamma.copy(), rho.copy(), lam1.copy(), lam2.copy())
    clamps = 0
    it = 0
    for it in range(1, max_iter + 1):
        f_old = f
        g_old = gamma
        lam1_old = lam1
        lam2_old = lam2

        A_all = np.tensordot(lam1_old, outer, axes=1)
        B_all = np.tensordot(lam2_old, outer, axes=1)
        M = (V * eye + A_all)[None, :, :] - lam1_old[:, None, None] * outer
        gains_old = H.conj() @ f_old.T          # gains_old[k, j] = h_k^H f_old_j
        rhs = (lam1_old / np.maximum(g_old, _TINY))[:, None] \
            * (gains_old.diagonal()[:, None] * H) \
            + np.einsum("ij,kj->ki", B_all, f_old)
        f_tilde = np.linalg.solve(M, rhs[:, :, None])[:, :, 0]
        f = f_old + beta * (f_tilde - f_old)

        gains = H.conj() @ f.T
        tot = np.sum(np.abs(gains) ** 2, axis=1) + sigma2
        rho = 1.0 - edot / np.maximum(zeta * tot, _TINY)
        hits = np.count_nonzero((rho < rho_lo) | (rho > rho_hi))
        clamps += int(hits)
        rho = np.clip(rho, rho_lo, rho_hi)

        own = np.abs(gains.diagonal()) ** 2
        interf = tot - sigma2 - own
        gamma = rho * own / (rho * interf + rho * sigma2 + delta2)
        floors = np.count_nonzero(gamma < gamma_floor)
        clamps += int(floors)
        gamma = np.maximum(gamma, gamma_floor)

        own_safe = np.maximum(own, _TINY)
        lam1 = w * gamma ** 2 / ((1.0 + gamma) * own_safe * _LN2)
        lam2 = zeta * delta2 * lam1 * (1.0 - rho) ** 2 \
            / np.maximum(edot * rho ** 2, _TINY)

        obj_hist.append(objective(f, gamma))
        if obj_hist[-1] < best_obj:
            best_obj = obj_hist[-1]
            best = (f.copy(), gamma.copy(), rho.copy(), lam1.copy(), lam2.copy())
        step = float(np.max(np.abs(f - f_old))) / max(1.0, float(np.max(np.abs(f_old))))
        if abs(obj_hist[-1] - obj_hist[-2]) <= obj_tol * (1.0 + abs(obj_hist[-2])) \
                and step <= step_tol:
            break

    return f, gamma, rho, lam1, lam2, best, np.asarray(obj_hist), it, clamps
