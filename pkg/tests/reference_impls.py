"""Independent oracles the production code is checked against.

Nothing here shares code paths with the package: the log-likelihood is the
direct O(n^2) double sum, the matcher is a naive scan over all resting
orders, gradients come from central finite differences, and compensators from
quadrature-free direct summation.
"""

from __future__ import annotations

import numpy as np

from hawkeslob.hawkes import HawkesParams


def brute_loglik_terms(times, types, horizon, params: HawkesParams) -> np.ndarray:
    """Direct evaluation: per-type term = T - integral lambda_m + sum log lambda_m,
    with lambda_m(t_i) computed by an explicit sum over the full history."""
    times = np.asarray(times, dtype=float)
    types0 = np.asarray(types, dtype=int) - 1
    mu, alpha, beta = params.mu, params.alpha, params.beta
    m_dim = params.dimension
    big_t = float(horizon)

    terms = np.empty(m_dim)
    for m in range(m_dim):
        comp = mu[m] * big_t
        for k in range(times.size):
            n = types0[k]
            comp += alpha[m, n] / beta[m, n] * (1.0 - np.exp(-beta[m, n] * (big_t - times[k])))
        log_sum = 0.0
        for i in np.flatnonzero(types0 == m):
            past = times < times[i]
            lam = mu[m] + np.sum(
                alpha[m, types0[past]] * np.exp(-beta[m, types0[past]] * (times[i] - times[past]))
            )
            log_sum += np.log(lam)
        terms[m] = big_t - comp + log_sum
    return terms


def brute_loglik(times, types, horizon, params: HawkesParams) -> float:
    return float(np.sum(brute_loglik_terms(times, types, horizon, params)))


def fd_gradient_logspace(times, types, horizon, params: HawkesParams, step=1e-5) -> np.ndarray:
    """Central finite differences of the brute-force log-likelihood over
    log-parameters, mapped back to the raw-parameter gradient."""
    eta = np.log(params.flat())
    m = params.dimension
    grad_eta = np.empty(eta.size)
    for i in range(eta.size):
        up, dn = eta.copy(), eta.copy()
        up[i] += step
        dn[i] -= step
        f_up = brute_loglik(times, types, horizon, HawkesParams.from_flat(np.exp(up), m))
        f_dn = brute_loglik(times, types, horizon, HawkesParams.from_flat(np.exp(dn), m))
        grad_eta[i] = (f_up - f_dn) / (2.0 * step)
    return grad_eta / params.flat()  # d/d theta = (d/d eta) / theta


def direct_compensator(params: HawkesParams, times, types, m: int, a: float, b: float) -> float:
    """Integral of lambda_m over (a, b] by the closed-form kernel integral,
    summed directly over the history (no recursion)."""
    times = np.asarray(times, dtype=float)
    types0 = np.asarray(types, dtype=int) - 1
    mu, alpha, beta = params.mu, params.alpha, params.beta
    row = m - 1
    total = mu[row] * (b - a)
    for k in range(times.size):
        t_k = times[k]
        if t_k >= b:
            break
        n = types0[k]
        lo = max(a, t_k)
        total += (
            alpha[row, n] / beta[row, n]
            * (np.exp(-beta[row, n] * (lo - t_k)) - np.exp(-beta[row, n] * (b - t_k)))
        )
    return float(total)


def numeric_intensity_integral(params: HawkesParams, times, types, m: int,
                               a: float, b: float, n_grid: int = 200_001) -> float:
    """Trapezoid quadrature of lambda_m over [a, b] straight from the
    definition (for small cross-checks only)."""
    times = np.asarray(times, dtype=float)
    types0 = np.asarray(types, dtype=int) - 1
    mu, alpha, beta = params.mu, params.alpha, params.beta
    row = m - 1
    grid = np.linspace(a, b, n_grid)
    lam = np.full(grid.size, mu[row])
    for k in range(times.size):
        n = types0[k]
        mask = grid > times[k]
        lam[mask] += alpha[row, n] * np.exp(-beta[row, n] * (grid[mask] - times[k]))
    return float(np.trapezoid(lam, grid))


class NaiveMatcher:
    """Reference continuous-double-auction semantics via brute-force scans.

    Resting orders live in one flat list; every match re-sorts makers by
    (price aggressiveness, arrival index).  Used to cross-check the engine on
    exhaustively enumerated small books.
    """

    def __init__(self):
        self.resting: list[dict] = []  # {side, price, volume, seq}
        self._seq = 0

    def _makers(self, taker_side: str):
        contra = "ask" if taker_side == "bid" else "bid"
        makers = [o for o in self.resting if o["side"] == contra]
        key = (lambda o: (o["price"], o["seq"])) if taker_side == "bid" else (
            lambda o: (-o["price"], o["seq"]))
        return sorted(makers, key=key)

    def submit_limit(self, side: str, price: int, volume: int):
        trades = []
        for maker in self._makers(side):
            if volume == 0:
                break
            crosses = maker["price"] <= price if side == "bid" else maker["price"] >= price
            if not crosses:
                break
            qty = min(volume, maker["volume"])
            trades.append((maker["price"], qty))
            maker["volume"] -= qty
            volume -= qty
        self.resting = [o for o in self.resting if o["volume"] > 0]
        if volume > 0:
            self.resting.append({"side": side, "price": price, "volume": volume, "seq": self._seq})
        self._seq += 1
        return trades

    def submit_market(self, side: str, volume: int):
        trades = []
        for maker in self._makers(side):
            if volume == 0:
                break
            qty = min(volume, maker["volume"])
            trades.append((maker["price"], qty))
            maker["volume"] -= qty
            volume -= qty
        self.resting = [o for o in self.resting if o["volume"] > 0]
        self._seq += 1
        return trades

    def book_state(self):
        bids = sorted(
            ((o["price"], o["volume"], o["seq"]) for o in self.resting if o["side"] == "bid"),
            key=lambda r: (-r[0], r[2]),
        )
        asks = sorted(
            ((o["price"], o["volume"], o["seq"]) for o in self.resting if o["side"] == "ask"),
            key=lambda r: (r[0], r[2]),
        )
        return bids, asks

    def best_quotes(self):
        bids, asks = self.book_state()
        bb = bids[0][0] if bids else 0
        ba = asks[0][0] if asks else 0
        bbv = sum(v for p, v, _ in bids if p == bb)
        bav = sum(v for p, v, _ in asks if p == ba)
        return (bb, bbv if bb else 0, ba, bav if ba else 0)
