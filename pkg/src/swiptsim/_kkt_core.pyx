# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel for the closed-form first-order-condition iteration.

Mirrors _kkt_numpy.kkt_run exactly; selected at import when available.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2, fabs, sqrt
from scipy.linalg.cython_lapack cimport zposv

cnp.import_array()

ctypedef double complex dcomplex

_LN2 = 0.6931471805599453


def kkt_run(H_in, w_in, double V, delta2_in, sigma2_in, zeta_in, edot_in,
            f_in, gamma_in, rho_in, lam1_in, lam2_in,
            double beta, double rho_lo, double rho_hi, double gamma_floor,
            double obj_tol, double step_tol, int max_iter):
    cdef cnp.ndarray[dcomplex, ndim=2] H = np.ascontiguousarray(H_in, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] delta2 = np.ascontiguousarray(delta2_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] sigma2 = np.ascontiguousarray(sigma2_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] zeta = np.ascontiguousarray(zeta_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] edot = np.ascontiguousarray(edot_in, dtype=np.float64)

    cdef int K = H.shape[0]
    cdef int Nt = H.shape[1]

    cdef cnp.ndarray[dcomplex, ndim=2] f = np.array(f_in, dtype=np.complex128, order="C")
    cdef cnp.ndarray[dcomplex, ndim=2] f_old = np.empty((K, Nt), dtype=np.complex128)
    cdef cnp.ndarray[dcomplex, ndim=2] f_best = f.copy()
    cdef cnp.ndarray[double, ndim=1] gamma = np.array(gamma_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rho = np.array(rho_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] lam1 = np.array(lam1_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] lam2 = np.array(lam2_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] g_best = gamma.copy()
    cdef cnp.ndarray[double, ndim=1] rho_best = rho.copy()
    cdef cnp.ndarray[double, ndim=1] lam1_best = lam1.copy()
    cdef cnp.ndarray[double, ndim=1] lam2_best = lam2.copy()
    cdef cnp.ndarray[double, ndim=1] g_old = np.empty(K, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] lam1_old = np.empty(K, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] lam2_old = np.empty(K, dtype=np.float64)

    cdef cnp.ndarray[dcomplex, ndim=2] gains_old = np.empty((K, K), dtype=np.complex128)
    cdef cnp.ndarray[dcomplex, ndim=2] gains = np.empty((K, K), dtype=np.complex128)
    cdef cnp.ndarray[dcomplex, ndim=1] M = np.empty(Nt * Nt, dtype=np.complex128)
    cdef cnp.ndarray[dcomplex, ndim=1] rhs = np.empty(Nt, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1] obj_hist = np.empty(max_iter + 1, dtype=np.float64)

    cdef int it = 0, k, u, i, j, n_obj = 1, clamps = 0
    cdef int info = 0, nrhs = 1
    cdef dcomplex acc, coef
    cdef double obj, best_obj, tot, own, interf, rk, gk, step, diff, fmax
    cdef double ln2 = 0.6931471805599453
    cdef double tiny = 1e-300

    obj = 0.0
    for k in range(K):
        for i in range(Nt):
            obj += V * (f[k, i].real * f[k, i].real + f[k, i].imag * f[k, i].imag)
        obj -= w[k] * log2(1.0 + gamma[k])
    obj_hist[0] = obj
    best_obj = obj

    for it in range(1, max_iter + 1):
        for k in range(K):
            g_old[k] = gamma[k]
            lam1_old[k] = lam1[k]
            lam2_old[k] = lam2[k]
            for i in range(Nt):
                f_old[k, i] = f[k, i]

        # gains_old[k, j] = h_k^H f_old_j
        for k in range(K):
            for j in range(K):
                acc = 0
                for i in range(Nt):
                    acc += H[k, i].conjugate() * f_old[j, i]
                gains_old[k, j] = acc

        for k in range(K):
            # M = V I + sum_{u != k} lam1_u h_u h_u^H, column-major for LAPACK
            for j in range(Nt):
                for i in range(Nt):
                    acc = 0
                    for u in range(K):
                        if u != k:
                            acc += lam1_old[u] * H[u, i] * H[u, j].conjugate()
                    if i == j:
                        acc += V
                    M[i + j * Nt] = acc
            for i in range(Nt):
                coef = (lam1_old[k] / max(g_old[k], tiny)) * gains_old[k, k]
                acc = coef * H[k, i]
                for j in range(K):
                    acc += lam2_old[j] * gains_old[j, k] * H[j, i]
                rhs[i] = acc
            zposv("L", &Nt, &nrhs, &M[0], &Nt, &rhs[0], &Nt, &info)
            if info != 0:
                return None  # singular system; driver falls back
            for i in range(Nt):
                f[k, i] = f_old[k, i] + beta * (rhs[i] - f_old[k, i])

        for k in range(K):
            for j in range(K):
                acc = 0
                for i in range(Nt):
                    acc += H[k, i].conjugate() * f[j, i]
                gains[k, j] = acc

        for k in range(K):
            tot = sigma2[k]
            for j in range(K):
                tot += gains[k, j].real * gains[k, j].real \
                    + gains[k, j].imag * gains[k, j].imag
            rk = 1.0 - edot[k] / max(zeta[k] * tot, tiny)
            if rk < rho_lo or rk > rho_hi:
                clamps += 1
                rk = min(max(rk, rho_lo), rho_hi)
            rho[k] = rk

            own = gains[k, k].real * gains[k, k].real \
                + gains[k, k].imag * gains[k, k].imag
            interf = tot - sigma2[k] - own
            gk = rk * own / (rk * interf + rk * sigma2[k] + delta2[k])
            if gk < gamma_floor:
                clamps += 1
                gk = gamma_floor
            gamma[k] = gk
            lam1[k] = w[k] * gk * gk / ((1.0 + gk) * max(own, tiny) * ln2)
            lam2[k] = zeta[k] * delta2[k] * lam1[k] * (1.0 - rk) * (1.0 - rk) \
                / max(edot[k] * rk * rk, tiny)

        obj = 0.0
        for k in range(K):
            for i in range(Nt):
                obj += V * (f[k, i].real * f[k, i].real + f[k, i].imag * f[k, i].imag)
            obj -= w[k] * log2(1.0 + gamma[k])
        obj_hist[n_obj] = obj
        n_obj += 1
        if obj < best_obj:
            best_obj = obj
            for k in range(K):
                g_best[k] = gamma[k]
                rho_best[k] = rho[k]
                lam1_best[k] = lam1[k]
                lam2_best[k] = lam2[k]
                for i in range(Nt):
                    f_best[k, i] = f[k, i]

        step = 0.0
        fmax = 1.0
        for k in range(K):
            for i in range(Nt):
                acc = f[k, i] - f_old[k, i]
                diff = sqrt(acc.real * acc.real + acc.imag * acc.imag)
                if diff > step: step = diff
                diff = sqrt(f_old[k, i].real * f_old[k, i].real
                            + f_old[k, i].imag * f_old[k, i].imag)
                if diff > fmax: fmax = diff
        if fabs(obj_hist[n_obj - 1] - obj_hist[n_obj - 2]) <= obj_tol * (1.0 + fabs(obj_hist[n_obj - 2])) \
                and step / fmax <= step_tol:
            break

    best = (f_best, g_best, rho_best, lam1_best, lam2_best)
    return f, gamma, rho, lam1, lam2, best, obj_hist[:n_obj].copy(), it, clamps
