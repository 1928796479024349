"""Geometric Brownian motion price model.

Prices are always the value of the counterparty's locked coins denominated
in the initiator's asset.  Transitions over a horizon of ``lam`` hours are
log-normal: ln(x_{t+lam}/x_t) ~ Normal((mu - sigma^2/2) * lam, sigma^2 * lam).
All functions are pure; the path sampler draws from a seeded generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GbmParams",
    "PriceState",
    "expected_price",
    "transition_pdf",
    "transition_cdf",
    "transition_quantile",
    "partial_expectation_below",
    "partial_expectation_above",
    "erfc",
    "sample_path",
    "sample_endpoints",
]


@dataclass(frozen=True)
class GbmParams:
    """Drift (per hour) and volatility (per sqrt-hour) of the price process."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError("sigma must be >= 0")

    def require_diffusive(self) -> None:
        """Density/distribution functions need a genuinely random process."""
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0 for density/distribution queries")


@dataclass(frozen=True)
class PriceState:
    """A price point: value in the initiator's asset at ``at_time`` hours."""

    value: float
    at_time: float = 0.0

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise ValueError("price value must be > 0")
        if self.at_time < 0:
            raise ValueError("at_time must be >= 0")


def erfc(x: float):
    """Complementary error function, vectorized over numpy arrays."""
    if isinstance(x, np.ndarray):
        return _erfc_vec(x)
    return math.erfc(x)


try:
    from scipy.special import erfc as _erfc_vec  # fast array path
except ImportError:  # pragma: no cover
    _erfc_vec = np.vectorize(math.erfc)


def expected_price(state: PriceState, params: GbmParams, lam: float) -> float:
    """Expected price after ``lam`` hours: value * exp(mu * lam)."""
    if lam < 0:
        raise ValueError("horizon must be >= 0")
    return state.value * math.exp(params.mu * lam)


def _log_moments(state: PriceState, params: GbmParams, lam: float) -> tuple[float, float]:
    """Mean and std of ln(price_{t+lam} / price_t)."""
    m = (params.mu - 0.5 * params.sigma**2) * lam
    s = params.sigma * math.sqrt(lam)
    return m, s


def transition_pdf(target, state: PriceState, params: GbmParams, lam: float):
    """Log-normal transition density of the price after ``lam`` hours.

    Accepts a scalar or ndarray ``target``; broadcasts elementwise.
    """
    params.require_diffusive()
    if lam <= 0:
        raise ValueError("horizon must be > 0")
    arr = np.asarray(target, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("target price must be > 0")
    m, s = _log_moments(state, params, lam)
    z = (np.log(arr / state.value) - m) / s
    out = np.exp(-0.5 * z * z) / (arr * s * math.sqrt(2.0 * math.pi))
    if np.isscalar(target):
        return float(out)
    return out


def transition_cdf(target, state: PriceState, params: GbmParams, lam: float):
    """P[price_{t+lam} <= target | price_t], via erfc."""
    params.require_diffusive()
    if lam <= 0:
        raise ValueError("horizon must be > 0")
    arr = np.asarray(target, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("target price must be > 0")
    m, s = _log_moments(state, params, lam)
    z = (np.log(arr / state.value) - m) / s
    out = 0.5 * erfc(-z / math.sqrt(2.0))
    if np.isscalar(target):
        return float(out)
    return out


def partial_expectation_below(target, state: PriceState, params: GbmParams, lam: float):
    """E[price_{t+lam} * 1{price_{t+lam} <= target}], closed form.

    Standard log-normal identity: x0 * e^{mu*lam} * Phi((ln(k/x0) - (mu + sigma^2/2)*lam)
    / (sigma*sqrt(lam))).  Vectorized over ``target``.
    """
    params.require_diffusive()
    if lam <= 0:
        raise ValueError("horizon must be > 0")
    arr = np.asarray(target, dtype=float)
    s = params.sigma * math.sqrt(lam)
    z = (np.log(arr / state.value) - (params.mu + 0.5 * params.sigma**2) * lam) / s
    out = state.value * math.exp(params.mu * lam) * 0.5 * erfc(-z / math.sqrt(2.0))
    if np.isscalar(target):
        return float(out)
    return out


def partial_expectation_above(target, state: PriceState, params: GbmParams, lam: float):
    """E[price_{t+lam} * 1{price_{t+lam} > target}], closed form."""
    return expected_price(state, params, lam) - partial_expectation_below(target, state, params, lam)


def transition_quantile(q: float, state: PriceState, params: GbmParams, lam: float) -> float:
    """Inverse of transition_cdf at probability ``q``."""
    params.require_diffusive()
    if lam <= 0:
        raise ValueError("horizon must be > 0")
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must be in (0, 1)")
    from statistics import NormalDist

    m, s = _log_moments(state, params, lam)
    return state.value * math.exp(m + s * NormalDist().inv_cdf(q))


def sample_path(
    state: PriceState,
    params: GbmParams,
    horizon: float,
    step: float,
    seed: int | np.random.Generator,
) -> list[PriceState]:
    """Sample one GBM path from ``state`` with exact per-step increments.

    Returns the path including the starting point.  Deterministic given a
    seed; a Generator may be passed to continue an existing stream.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    if horizon < step:
        raise ValueError("horizon must be >= step")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = int(round(horizon / step))
    drift = (params.mu - 0.5 * params.sigma**2) * step
    vol = params.sigma * math.sqrt(step)
    increments = drift + vol * rng.standard_normal(n)
    log_prices = math.log(state.value) + np.cumsum(increments)
    path = [state]
    for i in range(n):
        path.append(PriceState(value=float(np.exp(log_prices[i])), at_time=state.at_time + (i + 1) * step))
    return path


def sample_endpoints(
    state: PriceState,
    params: GbmParams,
    lam: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``n`` terminal prices after ``lam`` hours in one vectorized step."""
    if lam <= 0:
        raise ValueError("horizon must be > 0")
    m, s = _log_moments(state, params, lam)
    return state.value * np.exp(m + s * rng.standard_normal(n))
