# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled likelihood and compensator recursions (see backends.pure for the
reference semantics; both backends must agree to float rounding)."""

from libc.math cimport exp, expm1, isfinite, log

import numpy as np


def loglik_terms(times, types0, double horizon, mu, alpha, beta, bint want_grad=False):
    cdef const double[::1] t_v = np.ascontiguousarray(times, dtype=np.float64)
    cdef const int[::1] z_v = np.ascontiguousarray(types0, dtype=np.int32)
    cdef const double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, ::1] a_v = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef const double[:, ::1] b_v = np.ascontiguousarray(beta, dtype=np.float64)

    cdef Py_ssize_t m_dim = mu_v.shape[0]
    cdef Py_ssize_t n_ev = t_v.shape[0]

    c_arr = np.zeros((m_dim, m_dim))
    d_arr = np.zeros((m_dim, m_dim))
    log_arr = np.zeros(m_dim)
    comp_arr = np.zeros(m_dim)
    gmu_arr = np.zeros(m_dim)
    ga_arr = np.zeros((m_dim, m_dim))
    gb_arr = np.zeros((m_dim, m_dim))
    gca_arr = np.zeros((m_dim, m_dim))
    gcb_arr = np.zeros((m_dim, m_dim))

    cdef double[:, ::1] c_state = c_arr
    cdef double[:, ::1] d_state = d_arr
    cdef double[::1] log_sum = log_arr
    cdef double[::1] comp = comp_arr
    cdef double[::1] g_mu = gmu_arr
    cdef double[:, ::1] g_alpha = ga_arr
    cdef double[:, ::1] g_beta = gb_arr
    cdef double[:, ::1] gc_alpha = gca_arr
    cdef double[:, ::1] gc_beta = gcb_arr

    cdef Py_ssize_t k, m, n, z
    cdef double t, t_prev = 0.0, dt, dec, lam, s, x, om, ex, bmn
    cdef int bad = -1

    for k in range(n_ev):
        t = t_v[k]
        if k > 0:
            dt = t - t_prev
            for m in range(m_dim):
                for n in range(m_dim):
                    dec = exp(-b_v[m, n] * dt)
                    if want_grad:
                        d_state[m, n] = (d_state[m, n] - dt * c_state[m, n]) * dec
                    c_state[m, n] = c_state[m, n] * dec
        z = z_v[k]
        lam = mu_v[z]
        for n in range(m_dim):
            lam += a_v[z, n] * c_state[z, n]
        if not isfinite(lam) or lam <= 0.0:
            bad = <int> k
            break
        log_sum[z] += log(lam)
        if want_grad:
            g_mu[z] += 1.0 / lam
            for n in range(m_dim):
                g_alpha[z, n] += c_state[z, n] / lam
                g_beta[z, n] += a_v[z, n] * d_state[z, n] / lam

        s = horizon - t
        for m in range(m_dim):
            bmn = b_v[m, z]
            x = bmn * s
            om = -expm1(-x)
            comp[m] += a_v[m, z] / bmn * om
            if want_grad:
                ex = exp(-x)
                gc_alpha[m, z] += om / bmn
                gc_beta[m, z] += a_v[m, z] * (s * ex / bmn - om / (bmn * bmn))

        for m in range(m_dim):
            c_state[m, z] += 1.0
        t_prev = t

    if bad >= 0:
        raise ValueError(f"non-positive or non-finite intensity at event index {bad}")

    terms = horizon - np.asarray(mu_v) * horizon - comp_arr + log_arr
    if not want_grad:
        return terms, None
    grad = np.concatenate(
        [gmu_arr - horizon, (ga_arr - gca_arr).ravel(), (gb_arr - gcb_arr).ravel()]
    )
    return terms, grad


def compensators_at_events(times, types0, mu, alpha, beta):
    cdef const double[::1] t_v = np.ascontiguousarray(times, dtype=np.float64)
    cdef const int[::1] z_v = np.ascontiguousarray(types0, dtype=np.int32)
    cdef const double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, ::1] a_v = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef const double[:, ::1] b_v = np.ascontiguousarray(beta, dtype=np.float64)

    cdef Py_ssize_t m_dim = mu_v.shape[0]
    cdef Py_ssize_t n_ev = t_v.shape[0]

    gamma_arr = np.asarray(a_v) / np.asarray(b_v)
    c_arr = np.zeros((m_dim, m_dim))
    gt_arr = np.zeros(m_dim)
    out_arr = np.empty(n_ev)

    cdef double[:, ::1] gamma = np.ascontiguousarray(gamma_arr)
    cdef double[:, ::1] c_state = c_arr
    cdef double[::1] g_total = gt_arr
    cdef double[::1] out = out_arr

    cdef Py_ssize_t k, m, n, z
    cdef double t, t_prev = 0.0, dt, acc

    for k in range(n_ev):
        t = t_v[k]
        if k > 0:
            dt = t - t_prev
            for m in range(m_dim):
                for n in range(m_dim):
                    c_state[m, n] = c_state[m, n] * exp(-b_v[m, n] * dt)
        z = z_v[k]
        acc = mu_v[z] * t + g_total[z]
        for n in range(m_dim):
            acc -= gamma[z, n] * c_state[z, n]
        out[k] = acc
        for m in range(m_dim):
            c_state[m, z] += 1.0
            g_total[m] += gamma[m, z]
        t_prev = t
    return out_arr
