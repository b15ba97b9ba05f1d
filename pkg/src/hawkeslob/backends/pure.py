"""Pure numpy implementation of the likelihood and compensator recursions.

State per receiving type m and exciting type n, carried event to event:

    C[m, n] = sum over past type-n events of exp(-beta[m, n] * (t - t_k))
    D[m, n] = d C[m, n] / d beta[m, n]

so each event costs O(M^2) elementwise work instead of a scan over history.
The per-type likelihood term follows the unit-rate-benchmark convention

    term_m = T - integral of lambda_m + sum over type-m events of log lambda_m

The gradient is exact (forward accumulation of the recursion derivatives),
not a finite-difference approximation.
"""

from __future__ import annotations

import math

import numpy as np


def loglik_terms(times, types0, horizon, mu, alpha, beta, want_grad=False):
    """Per-type log-likelihood terms and optionally the full gradient.

    Returns (terms, grad) where terms has shape (M,) and grad is a flat
    (2 M^2 + M,) vector ordered [mu, alpha row-major, beta row-major], or
    None when want_grad is false.  Raises ValueError at the first event whose
    intensity is non-positive or non-finite.
    """
    times = np.asarray(times, dtype=float)
    types0 = np.asarray(types0)
    mu = np.asarray(mu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    m_dim = mu.shape[0]
    n_ev = times.shape[0]
    big_t = float(horizon)

    c_state = np.zeros((m_dim, m_dim))
    d_state = np.zeros((m_dim, m_dim)) if want_grad else None
    log_sum = np.zeros(m_dim)
    comp = np.zeros(m_dim)
    if want_grad:
        g_mu = np.zeros(m_dim)
        g_alpha = np.zeros((m_dim, m_dim))
        g_beta = np.zeros((m_dim, m_dim))
        gc_alpha = np.zeros((m_dim, m_dim))
        gc_beta = np.zeros((m_dim, m_dim))

    t_prev = 0.0
    for k in range(n_ev):
        t = times[k]
        if k > 0:
            dt = t - t_prev
            decay = np.exp(-beta * dt)
            if want_grad:
                d_state -= dt * c_state
                d_state *= decay
            c_state *= decay
        z = types0[k]
        row = c_state[z]
        lam = mu[z] + alpha[z] @ row
        if not math.isfinite(lam) or lam <= 0.0:
            raise ValueError(f"non-positive or non-finite intensity at event index {k}")
        log_sum[z] += math.log(lam)
        if want_grad:
            g_mu[z] += 1.0 / lam
            g_alpha[z] += row / lam
            g_beta[z] += alpha[z] * d_state[z] / lam

        # remaining-kernel mass of event k on every receiving type
        s = big_t - t
        x = beta[:, z] * s
        om = -np.expm1(-x)  # 1 - exp(-x)
        comp += alpha[:, z] / beta[:, z] * om
        if want_grad:
            gc_alpha[:, z] += om / beta[:, z]
            gc_beta[:, z] += alpha[:, z] * (s * np.exp(-x) / beta[:, z] - om / beta[:, z] ** 2)

        c_state[:, z] += 1.0
        t_prev = t

    terms = big_t - mu * big_t - comp + log_sum
    if not want_grad:
        return terms, None
    grad = np.concatenate([g_mu - big_t, (g_alpha - gc_alpha).ravel(), (g_beta - gc_beta).ravel()])
    return terms, grad


def compensators_at_events(times, types0, mu, alpha, beta):
    """Integrated own-type intensity at each event time (event itself excluded).

    Entry k is the compensator of component types0[k] evaluated on (0, t_k);
    differencing consecutive same-type entries yields generalized residuals.
    """
    times = np.asarray(times, dtype=float)
    types0 = np.asarray(types0)
    mu = np.asarray(mu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    m_dim = mu.shape[0]
    n_ev = times.shape[0]
    gamma = alpha / beta

    c_state = np.zeros((m_dim, m_dim))
    g_total = np.zeros(m_dim)  # sum of gamma[m, z_j] over past events j
    out = np.empty(n_ev)
    t_prev = 0.0
    for k in range(n_ev):
        t = times[k]
        if k > 0:
            c_state *= np.exp(-beta * (t - t_prev))
        z = types0[k]
        out[k] = mu[z] * t + g_total[z] - gamma[z] @ c_state[z]
        c_state[:, z] += 1.0
        g_total += gamma[:, z]
        t_prev = t
    return out
