"""Validation battery: residual analysis, goodness-of-fit tests, and
parameter-uncertainty reporting.

Under the generating parameters, the integrated intensity between consecutive
same-type events is an IID unit-mean exponential sequence (random time
change), so per-type residuals are screened with a one-sample
Kolmogorov-Smirnov test against Exponential(1) and a Ljung-Box test for
serial correlation.  A likelihood-ratio statistic compares the generating
parameter vector against the unrestricted maximum.  Asymptotic variances come
from the observed Fisher information (negative Hessian at the fit); negative
variance estimates are reported and flagged, never clamped, and Wald/score
tests are deliberately not offered.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

from . import backends
from .calibration import deviation_measures, log_likelihood, log_likelihood_grad
from .hawkes import HawkesParams, branching_ratios, half_life
from .util import meta_dict, write_meta_header


def generalized_residuals(params: HawkesParams, stream) -> dict[int, np.ndarray]:
    """Per-type vectors of integrated intensity between consecutive same-type
    events, in closed form for exponential kernels.  Types with fewer than two
    events get an empty vector."""
    times = np.asarray(stream.times, dtype=float)
    types = np.asarray(stream.types)
    t_arr, z_arr = backends.prepare_events(times, types)
    values = backends.compensators_at_events(t_arr, z_arr, params.mu, params.alpha, params.beta)
    out: dict[int, np.ndarray] = {}
    for m in range(1, params.dimension + 1):
        idx = np.flatnonzero(types == m)
        out[m] = np.diff(values[idx]) if idx.size >= 2 else np.empty(0)
    return out


def kolmogorov_sf(x: float, terms: int = 100) -> float:
    """Survival function of the Kolmogorov distribution.

    Alternating series for large arguments, Jacobi-theta form for small ones
    (the plain series needs O(1/x) terms there); both truncated at `terms`.
    """
    if x <= 0.0:
        return 1.0
    if x >= 1.0:
        total = 0.0
        sign = 1.0
        for k in range(1, terms + 1):
            term = sign * math.exp(-2.0 * k * k * x * x)
            total += term
            if abs(term) < 1e-16 * max(abs(total), 1e-300):
                break
            sign = -sign
        return min(max(2.0 * total, 0.0), 1.0)
    cdf = 0.0
    for k in range(1, terms + 1):
        term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * x * x))
        cdf += term
        if term < 1e-16 * max(cdf, 1e-300):
            break
    cdf *= math.sqrt(2.0 * math.pi) / x
    return min(max(1.0 - cdf, 0.0), 1.0)


def ks_test(sample) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against Exponential(1)."""
    sample = np.sort(np.asarray(sample, dtype=float))
    n = sample.size
    if n == 0:
        raise ValueError("empty sample")
    cdf = 1.0 - np.exp(-sample)
    grid = np.arange(1, n + 1) / n
    d_plus = np.max(grid - cdf)
    d_minus = np.max(cdf - (grid - 1.0 / n))
    stat = max(d_plus, d_minus)
    return float(stat), kolmogorov_sf(math.sqrt(n) * stat)


def chi2_sf(x: float, df: float) -> float:
    """Upper chi-square tail via the regularized upper incomplete gamma."""
    if x < 0:
        raise ValueError("chi-square statistic must be >= 0")
    return float(gammaincc(df / 2.0, x / 2.0))


def ljung_box(sample, lags: int = 20) -> tuple[float, float]:
    """Portmanteau autocorrelation test: Q = n(n+2) sum rho_k^2/(n-k), with an
    upper chi-square(h) p-value."""
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n <= lags:
        raise ValueError(f"need more than lags={lags} observations, got {n}")
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0.0:
        raise ValueError("constant sample has no autocorrelation")
    q = 0.0
    for k in range(1, lags + 1):
        rho = float(x[:-k] @ x[k:]) / denom
        q += rho * rho / (n - k)
    q *= n * (n + 2.0)
    return q, chi2_sf(q, lags)


def lr_test(loglik_true: float, loglik_hat: float, df: int = 210) -> tuple[float, float]:
    """Wilks statistic -2 (ll_true - ll_hat) with an asymptotic chi-square(df)
    p-value; a negative statistic means the optimiser failed dominance."""
    stat = -2.0 * (loglik_true - loglik_hat)
    if stat < 0:
        raise ValueError(f"negative likelihood-ratio statistic {stat:.6g}")
    return stat, chi2_sf(stat, df)


def observed_fisher(
    params_hat: HawkesParams,
    stream,
    horizon: float | None = None,
    *,
    rel_step: float = 1e-5,
    return_asymmetry: bool = False,
):
    """Negative Hessian of the log-likelihood at the fit, by central
    differences of the exact gradient over the raw parameter vector.

    The raw estimate is checked for symmetry and then symmetrised; entries
    must be finite."""
    if horizon is None:
        horizon = getattr(stream, "horizon", None)
        if horizon is None:
            raise ValueError("horizon required when the stream does not carry one")
    theta = params_hat.flat()
    p = theta.size
    m = params_hat.dimension
    t_arr, z_arr = backends.prepare_events(stream.times, stream.types)

    def grad_at(vec: np.ndarray) -> np.ndarray:
        # raw arrays, not HawkesParams: boundary entries (alpha = 0) may be
        # perturbed slightly negative during differentiation
        _, grad = backends.loglik_terms(
            t_arr, z_arr, horizon, vec[:m], vec[m : m + m * m].reshape(m, m),
            vec[m + m * m :].reshape(m, m), True,
        )
        return grad

    hess = np.empty((p, p))
    for i in range(p):
        h = rel_step * abs(theta[i]) if theta[i] != 0 else 1e-8
        up = theta.copy()
        up[i] += h
        dn = theta.copy()
        dn[i] -= h
        hess[:, i] = (grad_at(up) - grad_at(dn)) / (2.0 * h)
    info = -hess
    if not np.all(np.isfinite(info)):
        raise ValueError("observed information contains non-finite entries")
    scale = np.max(np.abs(info))
    asym = float(np.max(np.abs(info - info.T)) / scale) if scale > 0 else 0.0
    if asym > 1e-2:
        raise ValueError(f"observed information wildly asymmetric ({asym:.2e}): "
                         "differentiation failed")
    if asym > 1e-6:
        warnings.warn(f"observed information asymmetry {asym:.2e} above 1e-6")
    info = 0.5 * (info + info.T)
    if return_asymmetry:
        return info, asym
    return info


def _param_names(m: int) -> list[str]:
    names = [f"mu[{i + 1}]" for i in range(m)]
    names += [f"alpha[{i + 1},{j + 1}]" for i in range(m) for j in range(m)]
    names += [f"beta[{i + 1},{j + 1}]" for i in range(m) for j in range(m)]
    return names


@dataclass(frozen=True)
class CIRow:
    name: str
    estimate: float
    half_width: float | None
    negative_variance: bool


def confidence_intervals(params_hat: HawkesParams, info: np.ndarray, horizon: float) -> list[CIRow]:
    """95% asymptotic intervals theta_i +- 1.96 sqrt((I^-1)_ii / T); entries
    with a negative variance estimate keep the estimate but lose the interval."""
    theta = params_hat.flat()
    names = _param_names(params_hat.dimension)
    try:
        inv = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        return [CIRow(nm, float(th), None, True) for nm, th in zip(names, theta)]
    rows = []
    for i, (nm, th) in enumerate(zip(names, theta)):
        var = inv[i, i] / horizon
        if var < 0:
            rows.append(CIRow(nm, float(th), None, True))
        else:
            rows.append(CIRow(nm, float(th), 1.96 * math.sqrt(var), False))
    return rows


def branching_ratio_cis(params_hat: HawkesParams, info: np.ndarray) -> list[CIRow]:
    """First-order error propagation for Gamma = alpha/beta:

        Var Gamma ~= Var(a)/b^2 + a^2 Var(b)/b^4 - 2 a Cov(a, b)/b^3

    using (co)variances straight from the inverse observed information.
    Intervals are omitted whenever an ingredient variance (or the propagated
    variance itself) is negative."""
    m = params_hat.dimension
    if np.any(params_hat.beta == 0):
        raise ValueError("zero decay entry")
    gamma = branching_ratios(params_hat)
    try:
        inv = np.linalg.inv(info)
        singular = False
    except np.linalg.LinAlgError:
        inv = None
        singular = True
    rows = []
    for i in range(m):
        for j in range(m):
            name = f"gamma[{i + 1},{j + 1}]"
            est = float(gamma[i, j])
            if singular:
                rows.append(CIRow(name, est, None, True))
                continue
            ia = m + i * m + j
            ib = m + m * m + i * m + j
            var_a, var_b, cov = inv[ia, ia], inv[ib, ib], inv[ia, ib]
            a, b = params_hat.alpha[i, j], params_hat.beta[i, j]
            var_g = var_a / b**2 + a**2 * var_b / b**4 - 2.0 * a * cov / b**3
            if var_a < 0 or var_b < 0 or var_g < 0:
                rows.append(CIRow(name, est, None, True))
            else:
                rows.append(CIRow(name, est, 1.96 * math.sqrt(var_g), False))
    return rows


def qq_data(residuals) -> tuple[np.ndarray, np.ndarray]:
    """Empirical order statistics vs unit-exponential quantiles at (i-0.5)/n."""
    emp = np.sort(np.asarray(residuals, dtype=float))
    n = emp.size
    if n == 0:
        raise ValueError("empty residual vector")
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = -np.log1p(-probs)
    return theo, emp


def distortion_tables(theta_hat: HawkesParams, theta_true: HawkesParams) -> dict[str, np.ndarray]:
    """Elementwise parameter deviations plus the fitted decay half-lives,
    heatmap-ready."""
    if theta_hat.dimension != theta_true.dimension:
        raise ValueError("dimension mismatch")
    return {
        "d_mu": theta_hat.mu - theta_true.mu,
        "d_alpha": theta_hat.alpha - theta_true.alpha,
        "d_beta": theta_hat.beta - theta_true.beta,
        "d_gamma": branching_ratios(theta_hat) - branching_ratios(theta_true),
        "half_life": half_life(theta_hat.beta),
    }


@dataclass
class DiagnosticsReport:
    dimension: int
    lags: int
    residuals: dict[int, np.ndarray]
    ks: dict[int, tuple[float, float] | None]
    lb: dict[int, tuple[float, float] | None]
    loglik_true: float
    loglik_hat: float
    lr_stat: float
    lr_p: float
    lr_df: int
    mae: float
    rmse: float
    distortion: dict[str, np.ndarray]
    counts: np.ndarray
    theta_hat: HawkesParams
    theta_true: HawkesParams
    ci_rows: list[CIRow] | None = None
    gamma_ci_rows: list[CIRow] | None = None
    info_asymmetry: float | None = None

    def summary_json(self) -> dict:
        def pair(v):
            return None if v is None else [v[0], v[1]]

        doc = {
            "meta": meta_dict(),
            "dimension": self.dimension,
            "lags": self.lags,
            "loglik_true": self.loglik_true,
            "loglik_hat": self.loglik_hat,
            "lr": {"stat": self.lr_stat, "p": self.lr_p, "df": self.lr_df},
            "deviation": {"mae": self.mae, "rmse": self.rmse},
            "counts": {str(m + 1): int(c) for m, c in enumerate(self.counts)},
            "ks": {str(m): pair(v) for m, v in self.ks.items()},
            "ljung_box": {str(m): pair(v) for m, v in self.lb.items()},
            "residual_lengths": {str(m): int(v.size) for m, v in self.residuals.items()},
        }
        if self.ci_rows is not None:
            doc["negative_variances"] = sum(r.negative_variance for r in self.ci_rows)
            doc["info_asymmetry"] = self.info_asymmetry
        return doc

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_json(), fh, indent=2)
            fh.write("\n")

    def write_csvs(self, outdir, meta: dict | None = None) -> None:
        import os

        meta = meta or {}
        for m, res in self.residuals.items():
            with open(os.path.join(outdir, f"residuals_{m}.csv"), "w") as fh:
                write_meta_header(fh, meta)
                fh.write("residual\n")
                for v in res:
                    fh.write(f"{v:.9f}\n")
            if res.size:
                theo, emp = qq_data(res)
                with open(os.path.join(outdir, f"qq_{m}.csv"), "w") as fh:
                    write_meta_header(fh, meta)
                    fh.write("theoretical,empirical\n")
                    for a, b in zip(theo, emp):
                        fh.write(f"{a:.9f},{b:.9f}\n")

        labels = {"d_mu": "mu", "d_alpha": "alpha", "d_beta": "beta", "d_gamma": "gamma"}
        for key, label in labels.items():
            arr = np.atleast_2d(self.distortion[key])
            with open(os.path.join(outdir, f"distortion_{label}.csv"), "w") as fh:
                write_meta_header(fh, meta)
                fh.write("row,col,delta\n")
                for i in range(arr.shape[0]):
                    for j in range(arr.shape[1]):
                        fh.write(f"{i + 1},{j + 1},{arr[i, j]:.9f}\n")

        if self.ci_rows is not None:
            with open(os.path.join(outdir, "confidence_intervals.csv"), "w") as fh:
                write_meta_header(fh, meta)
                fh.write("parameter,estimate,half_width,negative_variance\n")
                for row in self.ci_rows + (self.gamma_ci_rows or []):
                    hw = "" if row.half_width is None else f"{row.half_width:.9g}"
                    fh.write(f"{row.name},{row.estimate:.9g},{hw},{int(row.negative_variance)}\n")

        # excitation-effect bubble data: one file per receiving type, rows are
        # exciting types with (expected offspring, decay half-life, event count)
        gamma = branching_ratios(self.theta_hat)
        hl = half_life(self.theta_hat.beta)
        for m in range(self.dimension):
            with open(os.path.join(outdir, f"bubble_{m + 1}.csv"), "w") as fh:
                write_meta_header(fh, meta)
                fh.write("exciting_type,branching_ratio,half_life_s,event_count\n")
                for n in range(self.dimension):
                    fh.write(
                        f"{n + 1},{gamma[m, n]:.9f},{hl[m, n]:.9f},{int(self.counts[n])}\n"
                    )


def run_diagnostics(
    stream,
    theta_hat: HawkesParams,
    theta_true: HawkesParams,
    *,
    lags: int = 20,
    compute_fisher: bool = True,
    horizon: float | None = None,
) -> DiagnosticsReport:
    """Full battery on one calibrated stream."""
    if horizon is None:
        horizon = stream.horizon
    m_dim = theta_hat.dimension

    residuals = generalized_residuals(theta_hat, stream)
    ks: dict[int, tuple[float, float] | None] = {}
    lb: dict[int, tuple[float, float] | None] = {}
    for m in range(1, m_dim + 1):
        res = residuals[m]
        ks[m] = ks_test(res) if res.size else None
        lb[m] = ljung_box(res, lags) if res.size > lags else None

    ll_true = log_likelihood(theta_true, stream, horizon)
    ll_hat = log_likelihood(theta_hat, stream, horizon)
    lr_stat, lr_p = lr_test(ll_true, ll_hat, df=theta_hat.n_params)
    mae, rmse = deviation_measures(theta_hat, theta_true)

    counts = np.bincount(np.asarray(stream.types), minlength=m_dim + 1)[1:]

    ci_rows = gamma_rows = None
    asym = None
    if compute_fisher:
        info, asym = observed_fisher(theta_hat, stream, horizon, return_asymmetry=True)
        ci_rows = confidence_intervals(theta_hat, info, horizon)
        gamma_rows = branching_ratio_cis(theta_hat, info)

    return DiagnosticsReport(
        dimension=m_dim,
        lags=lags,
        residuals=residuals,
        ks=ks,
        lb=lb,
        loglik_true=ll_true,
        loglik_hat=ll_hat,
        lr_stat=lr_stat,
        lr_p=lr_p,
        lr_df=theta_hat.n_params,
        mae=mae,
        rmse=rmse,
        distortion=distortion_tables(theta_hat, theta_true),
        counts=counts,
        theta_hat=theta_hat,
        theta_true=theta_true,
        ci_rows=ci_rows,
        gamma_ci_rows=gamma_rows,
        info_asymmetry=asym,
    )
