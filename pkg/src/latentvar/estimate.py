"""Least-squares estimation of the lagged coefficient matrix from an observed
panel, entry significance tests, and the analytic error bounds used to gate
support extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import InsufficientData, SingularCovariance
from .model import LinearMeasurements
from .simulate import TimeSeriesPanel

#: Condition number above which the lagged covariance gets a ridge.
COND_LIMIT = 1e12

#: Ridge strength relative to the mean diagonal of the lagged covariance.
RIDGE_FACTOR = 1e-8


@dataclass(frozen=True)
class BoundPriors:
    """Prior bounds needed to evaluate the coefficient error bound on data.

    ``rho12`` bounds the spectral norm of the latent-to-observed block,
    ``rho22`` (< 1) that of the latent block, ``sigma_z2_max`` the latent
    noise variance, and ``a_min`` the smallest nonzero path-coefficient
    magnitude per lag index (a single value broadcasts to all lags).
    """

    rho12: float
    rho22: float
    sigma_z2_max: float
    a_min: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not 0.0 < self.rho22 < 1.0:
            raise ValueError("rho22 must lie in (0, 1)")
        if self.rho12 < 0 or self.sigma_z2_max <= 0:
            raise ValueError("rho12 must be >= 0 and sigma_z2_max > 0")
        a_min = self.a_min
        if isinstance(a_min, (int, float)):
            a_min = (float(a_min),)
        object.__setattr__(self, "a_min", tuple(float(v) for v in a_min))

    def a_min_at(self, k: int) -> float:
        return self.a_min[min(k, len(self.a_min) - 1)]


@dataclass
class EstimationReport:
    """Fit artifacts: coefficient blocks B_0..B_l plus everything the support
    test needs (standard errors, residual covariance, lag-0 autocovariance).

    ``alpha``, ``bounds`` and ``supports`` are filled in by extract_support.
    """

    lag: int
    names: tuple[str, ...]
    nobs: int
    b_hat: tuple[np.ndarray, ...]
    residual_cov: np.ndarray
    entry_stderr: tuple[np.ndarray, ...]
    gamma0: np.ndarray
    alpha: float | None = None
    bounds: tuple[float, ...] | None = None
    supports: LinearMeasurements | None = None

    @property
    def n(self) -> int:
        return len(self.names)


def autocov(panel: TimeSeriesPanel, h: int) -> np.ndarray:
    """Biased (1/T) sample autocovariance at lag h, after mean removal."""
    t_len = panel.t_len
    if h < 0:
        raise ValueError("h must be >= 0")
    if t_len <= h:
        raise InsufficientData(f"need T > {h}, got T = {t_len}")
    x = panel.data - panel.data.mean(axis=0)
    return (x[h:].T @ x[: t_len - h]) / t_len


def block_toeplitz(gammas: Sequence[np.ndarray], l: int) -> np.ndarray:
    """Lagged covariance of the stacked vector [X(t); ...; X(t-l)].

    Block (r, c) is E[X(t-r) X(t-c)^T] = gamma(c - r) above the diagonal and
    gamma(r - c)^T below it, which makes the result symmetric by construction.
    """
    if len(gammas) != l + 1:
        raise ValueError(f"need gammas 0..{l}, got {len(gammas)} matrices")
    n = gammas[0].shape[0]
    out = np.empty((n * (l + 1), n * (l + 1)))
    for r in range(l + 1):
        for c in range(l + 1):
            block = gammas[c - r] if c >= r else gammas[r - c].T
            out[r * n : (r + 1) * n, c * n : (c + 1) * n] = block
    return out


def _prepare_toeplitz(gammas: Sequence[np.ndarray], l: int) -> np.ndarray:
    """Block-Toeplitz matrix with the ridge fallback applied when needed."""
    big = block_toeplitz(list(gammas[: l + 1]), l)
    cond = np.linalg.cond(big)
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        eps = RIDGE_FACTOR * np.trace(big) / big.shape[0]
        big = big + eps * np.eye(big.shape[0])
        cond = np.linalg.cond(big)
        if not np.isfinite(cond) or cond >= COND_LIMIT:
            raise SingularCovariance(
                f"lagged covariance condition number {cond:.3g} after ridge"
            )
    return big


def fit_from_autocovariances(
    gammas: Sequence[np.ndarray], l: int
) -> tuple[list[np.ndarray], np.ndarray]:
    """Moment-level fit: blocks of [gamma(1)..gamma(l+1)] Gamma(l)^-1.

    Takes gamma(0..l+1) and returns (B_0..B_l, residual covariance), all at
    the population level.  Useful on exact autocovariances, where the result
    matches the probability-limit coefficients.
    """
    if len(gammas) < l + 2:
        raise ValueError(f"need gammas 0..{l + 1}")
    n = gammas[0].shape[0]
    big = _prepare_toeplitz(gammas, l)
    stacked = np.hstack([gammas[h] for h in range(1, l + 2)])
    coeffs = np.linalg.solve(big, stacked.T).T
    blocks = [coeffs[:, k * n : (k + 1) * n] for k in range(l + 1)]
    resid = gammas[0] - sum(b @ gammas[k + 1].T for k, b in enumerate(blocks))
    return blocks, resid


def fit_coefficients(panel: TimeSeriesPanel, l: int) -> EstimationReport:
    """Fit the lag-l coefficient matrix of the observed process.

    B-hat comes from the sample Yule-Walker relation
    [gamma(1)..gamma(l+1)] Gamma(l)^-1; the residual covariance from the
    actual one-step-ahead residuals; entry standard errors from the diagonal
    of (Gamma(l)^-1 kron Sigma-hat) / T.
    """
    if l < 0:
        raise ValueError("lag must be >= 0")
    t_len, n = panel.t_len, panel.n
    if t_len <= l + 1:
        raise InsufficientData(f"need T > l + 1 = {l + 1}, got T = {t_len}")
    gammas = [autocov(panel, h) for h in range(l + 2)]
    big = _prepare_toeplitz(gammas, l)
    stacked = np.hstack([gammas[h] for h in range(1, l + 2)])
    coeffs = np.linalg.solve(big, stacked.T).T
    blocks = tuple(coeffs[:, k * n : (k + 1) * n] for k in range(l + 1))

    x = panel.data - panel.data.mean(axis=0)
    n_eff = t_len - l - 1
    design = np.hstack([x[l - k : l - k + n_eff] for k in range(l + 1)])
    resid = x[l + 1 :] - design @ coeffs.T
    sigma = (resid.T @ resid) / n_eff

    inv_big = np.linalg.inv(big)
    col_var = np.diag(inv_big)  # variance factor per stacked regressor
    stderr = tuple(
        np.sqrt(np.outer(np.diag(sigma), col_var[k * n : (k + 1) * n]) / t_len)
        for k in range(l + 1)
    )
    return EstimationReport(
        lag=l,
        names=panel.names,
        nobs=t_len,
        b_hat=blocks,
        residual_cov=sigma,
        entry_stderr=stderr,
        gamma0=gammas[0],
    )


def select_lag(panel: TimeSeriesPanel, l_max: int, criterion: str = "aic") -> int:
    """Pick the fit lag in 1..l_max by AIC or FPE; ties go to the smaller lag.

    AIC(l) = ln det Sigma(l) + 2 l n^2 / T and
    FPE(l) = ((T + n l + 1) / (T - n l - 1))^n det Sigma(l), with Sigma(l)
    the residual covariance of the lag-l fit.
    """
    crit = criterion.lower()
    if crit not in ("aic", "fpe"):
        raise ValueError(f"criterion must be 'aic' or 'fpe', got {criterion!r}")
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    t_len, n = panel.t_len, panel.n
    if l_max * n >= t_len / 2:
        raise InsufficientData(f"l_max * n = {l_max * n} must stay below T/2 = {t_len / 2}")
    best_l, best_score = 1, math.inf
    for l in range(1, l_max + 1):
        sigma = fit_coefficients(panel, l).residual_cov
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            logdet = -math.inf
        if crit == "aic":
            score = logdet + 2.0 * l * n * n / t_len
        else:
            ratio = (t_len + n * l + 1) / (t_len - n * l - 1)
            score = ratio**n * sign * math.exp(logdet)
        if score < best_score:
            best_l, best_score = l, score
    return best_l


def prop1_bound(n: int, l: int, k: int, m_over_l: float, rho12: float, rho22: float) -> float:
    """Analytic bound on the induced 1-norm gap between B_k and the true A_k*.

    sqrt(n (l-k-1) M/L) * rho12 * rho22^(k+1); zero when k = l-1 because the
    projection residue has no terms left.
    """
    if k > l - 1:
        raise ValueError("bound is only defined for k <= l - 1")
    if not 0.0 <= rho22 < 1.0:
        raise ValueError("rho22 must lie in [0, 1)")
    return math.sqrt(n * (l - k - 1) * m_over_l) * rho12 * rho22 ** (k + 1)


def recoverability_check(priors: BoundPriors, n: int, l: int, k: int, l_hat: float) -> bool:
    """Whether the support of the lag-k block is recoverable under the priors.

    True iff 4 n (l-k-1) rho12^2 / a_min,k^2 * rho22^(2(k+1)) <= l_hat / sigma_z2_max.
    """
    a_min = priors.a_min_at(k)
    if a_min == math.inf:
        return True
    if a_min <= 0:
        return k == l - 1
    lhs = (
        4.0 * n * (l - k - 1) * priors.rho12**2 / a_min**2 * priors.rho22 ** (2 * (k + 1))
    )
    return lhs <= l_hat / priors.sigma_z2_max


def extract_support(
    report: EstimationReport,
    alpha: float = 0.05,
    priors: BoundPriors | None = None,
) -> LinearMeasurements:
    """Threshold the fitted blocks into 0/1 supports.

    Entry (j, i) of S_k is set iff the two-sided z-test at level alpha rejects
    zero, and, when priors are supplied, |B_k[j, i]| additionally exceeds the
    analytic bound for that lag.  The decisions are recorded on the report
    (alpha, bounds, supports) and the trimmed measurements returned.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    z_crit = NormalDist().inv_cdf(1.0 - alpha / 2.0)
    l = report.lag
    n = report.n
    bounds: list[float] = []
    if priors is not None:
        l_hat = float(np.min(np.linalg.eigvalsh(report.gamma0)))
        m_over_l = priors.sigma_z2_max / l_hat
        bounds = [
            prop1_bound(n, l, k, m_over_l, priors.rho12, priors.rho22) for k in range(l)
        ]
    supports = []
    for k, (b, se) in enumerate(zip(report.b_hat, report.entry_stderr)):
        mask = np.abs(b) > z_crit * se
        if priors is not None and k <= l - 1:
            mask &= np.abs(b) > bounds[k]
        supports.append(mask.astype(np.uint8))
    meas = LinearMeasurements(n, supports, report.names)
    report.alpha = alpha
    report.bounds = tuple(bounds) if priors is not None else None
    report.supports = meas
    return meas
