"""Backward-induction solver for the sequential HTLC swap game.

The swap has three decision nodes: the initiator A claims or stops at the
final step (t3), the responder B locks or stops at the middle step (t2),
and A locks or stops at the start (t1).  Continuation values are expected,
time-discounted payoffs under the log-normal price transitions; the
thresholds (A's claim threshold, B's continuation price band, A's
participation constraint) fall out of comparing continue vs stop at each
node.  The success-rate surface integrates the resulting policy over the
price law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import Bracket, QuadratureSpec, find_roots, integrate
from .pricemodel import GbmParams, PriceState, erfc, transition_cdf, transition_pdf

__all__ = [
    "SwapParams",
    "HtlcThresholds",
    "SRGrid",
    "payoff_t3",
    "claim_threshold_t3",
    "payoff_t2",
    "continuation_band_t2",
    "payoff_t1",
    "success_rate",
    "sr_surface",
    "participation_range",
]

_ROOT_SCAN_POINTS = 256
_ROOT_TOL = 1e-10


@dataclass(frozen=True)
class SwapParams:
    """Economic and timing parameters of one swap (all times in hours).

    ``x_yb_t1`` is the value of B's locked coins denominated in A's asset
    at the moment A decides whether to start.  ``uniform_delay_discounting``
    switches the middle-node stop terms from their printed horizon (tau_b)
    to tau_b + T, for sensitivity analysis only.
    """

    x_a: float
    x_yb_t1: float
    t_a: float
    t_b: float
    tau_a: float
    tau_b: float
    t_eps: float
    eps: float
    sp_a: float
    sp_b: float
    r_a: float
    r_b: float
    f_a: float
    f_b: float
    theta_1: float
    theta_2: float
    gbm: GbmParams
    uniform_delay_discounting: bool = False
    # Value A assigns, at the root node, to the branch where B never locks:
    # "principal" treats her coins as recovered at face value (the only
    # reading under which the baseline swap ever starts), "discounted"
    # applies the full t_a lockup discount to that branch as well.
    t1_stop_value: str = "principal"
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self) -> None:
        if not self.t_a > self.t_b > 0:
            raise ValueError("locktimes must satisfy t_a > t_b > 0")
        for name in ("tau_a", "tau_b", "t_eps", "eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("theta_1", "theta_2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("x_a", "x_yb_t1", "f_a", "f_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.sp_a <= -1.0:
            raise ValueError("sp_a must exceed -1")
        if self.t_a < self.t_b + self.eps + self.t_eps + self.tau_a:
            raise ValueError("delay windows ill-formed: need t_a >= t_b + eps + t_eps + tau_a")
        if self.t1_stop_value not in ("principal", "discounted"):
            raise ValueError("t1_stop_value must be 'principal' or 'discounted'")

    @property
    def claim_delay_window(self) -> float:
        """Upper bound of A's claim delay T."""
        return self.t_b - self.tau_b - self.eps

    @property
    def lock_delay_window(self) -> float:
        """Upper bound of B's lock delay T'."""
        return self.t_a - (self.t_b - self.eps + self.t_eps) - self.tau_a

    def with_x_a(self, x_a: float) -> "SwapParams":
        return replace(self, x_a=x_a)


@dataclass(frozen=True)
class HtlcThresholds:
    """Decision thresholds: A's claim cutoff, B's continuation band, and the
    x_a participation range (absent when the swap never starts)."""

    x_t3_star: float
    x1: float | None
    x2: float | None
    x_star: float | None = None
    x_star_prime: float | None = None

    @property
    def band(self) -> Bracket | None:
        if self.x1 is None or self.x2 is None:
            return None
        return Bracket(self.x1, self.x2)


@dataclass(frozen=True)
class SRGrid:
    """Success-rate surface over (x_a, T, T') with NA marked by NaN."""

    xa_axis: np.ndarray
    t_axis: np.ndarray
    tp_axis: np.ndarray
    raw: np.ndarray          # Eq-level value in [0, theta_1 * theta_2]; NaN where NA
    conditional: np.ndarray  # raw / (theta_1 * theta_2); NaN where NA
    na_mask: np.ndarray      # True exactly where the participation constraint fails


def _check_price(price: float) -> None:
    if not price > 0:
        raise ValueError("price must be > 0")


def _t3_stop_A(p: SwapParams) -> float:
    return p.x_a * math.exp(-p.r_a * p.t_a) - p.f_a


def _t3_stop_B(p: SwapParams, price_t3) -> float:
    # B's refund arrives after his full locktime; price drifts meanwhile.
    return price_t3 * math.exp((p.gbm.mu - p.r_b) * p.t_b) - p.f_b


def payoff_t3(p: SwapParams, price_t3: float, action: str) -> tuple[float, float]:
    """Final-node payoffs (A, B) for ``continue`` (A claims) or ``stop``."""
    _check_price(price_t3)
    if action == "continue":
        u_a = (1.0 + p.sp_a) * price_t3 * math.exp(p.gbm.mu * p.tau_b) * math.exp(-p.r_a * p.tau_b) - p.f_b
        u_b = (1.0 + p.sp_b) * p.x_a * math.exp(-p.r_b * (p.tau_a + p.t_eps)) - p.f_a
        return u_a, u_b
    if action == "stop":
        return _t3_stop_A(p), _t3_stop_B(p, price_t3)
    raise ValueError(f"unknown action {action!r}")


def claim_threshold_t3(p: SwapParams) -> float:
    """Price above which A prefers claiming at the final node (closed form)."""
    num = p.x_a * math.exp(-p.r_a * (p.t_a - p.tau_b)) - (p.f_a - p.f_b) * math.exp(p.r_a * p.tau_b)
    return num * math.exp(-p.gbm.mu * p.tau_b) / (1.0 + p.sp_a)


def _check_T(p: SwapParams, T: float) -> None:
    if not 0.0 <= T <= p.claim_delay_window + 1e-12:
        raise ValueError(f"claim delay T={T} outside [0, {p.claim_delay_window}]")


def _check_Tp(p: SwapParams, Tp: float) -> None:
    if not 0.0 <= Tp <= p.lock_delay_window + 1e-12:
        raise ValueError(f"lock delay T'={Tp} outside [0, {p.lock_delay_window}]")


def _cdf_from(p: SwapParams, target: float, start, lam: float):
    """transition_cdf vectorized over the *starting* price."""
    m = (p.gbm.mu - 0.5 * p.gbm.sigma**2) * lam
    s = p.gbm.sigma * math.sqrt(lam)
    z = (np.log(target / np.asarray(start, dtype=float)) - m) / s
    return 0.5 * erfc(-z / math.sqrt(2.0))


def _pe_below_from(p: SwapParams, target: float, start, lam: float):
    """partial_expectation_below vectorized over the starting price."""
    s = p.gbm.sigma * math.sqrt(lam)
    start = np.asarray(start, dtype=float)
    z = (np.log(target / start) - (p.gbm.mu + 0.5 * p.gbm.sigma**2) * lam) / s
    return start * math.exp(p.gbm.mu * lam) * 0.5 * erfc(-z / math.sqrt(2.0))


def _u_B_cont_t2(p: SwapParams, price_t2, T: float):
    """B's expected continuation value at the middle node (vectorized)."""
    x_star = claim_threshold_t3(p)
    h_cont = p.tau_b + T
    h_stop = h_cont if p.uniform_delay_discounting else p.tau_b
    arr = np.asarray(price_t2, dtype=float)
    u_b_cont_t3 = (1.0 + p.sp_b) * p.x_a * math.exp(-p.r_b * (p.tau_a + p.t_eps)) - p.f_a
    slope = math.exp((p.gbm.mu - p.r_b) * p.t_b)  # stop payoff is linear in the t3 price

    cont = (1.0 - _cdf_from(p, x_star, arr, h_cont)) * u_b_cont_t3 * math.exp(-p.r_b * h_cont)
    stop_int = math.exp(-p.r_b * h_stop) * (
        slope * _pe_below_from(p, x_star, arr, h_stop) - p.f_b * _cdf_from(p, x_star, arr, h_stop)
    )
    # Malicious A never claims; B is stuck refunding after t_b.
    outside = math.exp(-p.r_b * p.tau_b) * (arr * math.exp(p.gbm.mu * p.tau_b) * slope - p.f_b)
    out = p.theta_1 * (cont + stop_int) + (1.0 - p.theta_1) * outside
    if np.isscalar(price_t2):
        return float(out)
    return out


def _u_A_cont_t2(p: SwapParams, price_t2, T: float):
    """A's expected continuation value at the middle node (vectorized)."""
    x_star = claim_threshold_t3(p)
    h_cont = p.tau_b + T
    h_stop = h_cont if p.uniform_delay_discounting else p.tau_b
    arr = np.asarray(price_t2, dtype=float)
    a = (1.0 + p.sp_a) * math.exp((p.gbm.mu - p.r_a) * p.tau_b)  # claim payoff slope in the t3 price
    stop_val = _t3_stop_A(p)

    above = arr * math.exp(p.gbm.mu * h_cont) - _pe_below_from(p, x_star, arr, h_cont)
    tail = 1.0 - _cdf_from(p, x_star, arr, h_cont)
    claim_part = math.exp(-p.r_a * h_cont) * (a * above - p.f_b * tail)
    stop_part = math.exp(-p.r_a * h_stop) * _cdf_from(p, x_star, arr, h_stop) * stop_val
    out = claim_part + stop_part
    if np.isscalar(price_t2):
        return float(out)
    return out


def payoff_t2(p: SwapParams, price_t2: float, T: float) -> tuple[float, float, float, float]:
    """Middle-node values: (A continue, B continue, A stop, B stop)."""
    _check_price(price_t2)
    _check_T(p, T)
    u_a_cont = _u_A_cont_t2(p, price_t2, T)
    u_b_cont = _u_B_cont_t2(p, price_t2, T)
    u_a_stop = p.x_a * math.exp(-p.r_a * p.t_a) - p.f_a
    u_b_stop = price_t2
    return float(u_a_cont), float(u_b_cont), u_a_stop, u_b_stop


def _band_scan_bracket(p: SwapParams) -> Bracket:
    ref = max(p.x_yb_t1, p.x_a, claim_threshold_t3(p))
    return Bracket(ref * 1e-3, ref * 12.0)


def continuation_band_t2(p: SwapParams, T: float, scan: Bracket | None = None) -> Bracket | None:
    """Price band over which B prefers locking at the middle node.

    Roots of u_B(continue) - u_B(stop); when more than two crossings
    appear, the widest interval where continuing wins is kept.
    """
    _check_T(p, T)
    scan = scan or _band_scan_bracket(p)

    def g(x: float) -> float:
        return float(_u_B_cont_t2(p, x, T)) - x

    roots = find_roots(g, scan, grid_points=_ROOT_SCAN_POINTS, tol=_ROOT_TOL)
    if not roots:
        return None
    edges = [scan.lo] + roots + [scan.hi]
    best: tuple[float, float] | None = None
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0 and (best is None or hi - lo > best[1] - best[0]):
            best = (lo, hi)
    if best is None:
        return None
    lo, hi = best
    # Open-ended winning region at a scan edge means the scan missed a
    # crossing; widen rather than report a fake endpoint.
    if lo == scan.lo or hi == scan.hi:
        if scan.hi / max(scan.lo, 1e-12) > 1e8:
            return Bracket(lo, hi)
        return continuation_band_t2(p, T, Bracket(scan.lo * 0.1, scan.hi * 10.0))
    return Bracket(lo, hi)


def payoff_t1(p: SwapParams, T: float, Tp: float) -> tuple[float, float]:
    """Root-node values (A continue, A stop); A starts iff continue >= x_a."""
    return payoff_t1_with_band(p, T, Tp, continuation_band_t2(p, T))


def success_rate(p: SwapParams, T: float, Tp: float) -> float | None:
    """Probability the swap completes once started; None when A never starts."""
    u_cont, u_stop = payoff_t1(p, T, Tp)
    if u_cont < u_stop:
        return None
    band = continuation_band_t2(p, T)
    if band is None:
        return 0.0
    x_star = claim_threshold_t3(p)
    st1 = PriceState(p.x_yb_t1)
    h_lock = p.tau_a + Tp
    h_claim = p.tau_b + T

    def integrand(price):
        dens = p.theta_2 * transition_pdf(price, st1, p.gbm, h_lock)
        tails = 1.0 - _cdf_from(p, x_star, price, h_claim)
        return dens * p.theta_1 * tails

    return max(0.0, integrate(integrand, band, p.quad))


def compute_thresholds(p: SwapParams, T: float = 0.0, Tp: float = 0.0) -> HtlcThresholds:
    band = continuation_band_t2(p, T)
    return HtlcThresholds(
        x_t3_star=claim_threshold_t3(p),
        x1=None if band is None else band.lo,
        x2=None if band is None else band.hi,
    )


def participation_range(
    p: SwapParams, xa_scan: Bracket, T: float = 0.0, Tp: float = 0.0, grid_points: int = 128
) -> tuple[float, float] | None:
    """Range of x_a over which A is willing to start, by scanning x_a.

    Returns the outermost pair of crossings of u_A(continue, t1) - x_a, or
    None when participation fails everywhere on the scan.
    """

    def g(x_a: float) -> float:
        q = p.with_x_a(x_a)
        u_cont, u_stop = payoff_t1(q, T, Tp)
        return u_cont - u_stop

    roots = find_roots(g, xa_scan, grid_points=grid_points, tol=1e-8)
    lo_ok = g(xa_scan.lo) >= 0.0
    if not roots:
        return (xa_scan.lo, xa_scan.hi) if lo_ok else None
    lo = xa_scan.lo if lo_ok else roots[0]
    hi_ok = g(xa_scan.hi) >= 0.0
    hi = xa_scan.hi if hi_ok else roots[-1]
    if hi <= lo:
        return None
    return lo, hi


def sr_surface(
    p: SwapParams,
    xa_grid,
    T_grid,
    Tp_grid,
) -> SRGrid:
    """Evaluate the success rate over the full (x_a, T, T') grid.

    B's continuation band is independent of T', so it is computed once per
    (x_a, T) pair.
    """
    xa = np.asarray(xa_grid, dtype=float)
    ts = np.asarray(T_grid, dtype=float)
    tps = np.asarray(Tp_grid, dtype=float)
    norm = p.theta_1 * p.theta_2
    raw = np.full((len(xa), len(ts), len(tps)), np.nan)
    na = np.zeros_like(raw, dtype=bool)

    for i, x_a in enumerate(xa):
        q = p.with_x_a(float(x_a))
        x_star = claim_threshold_t3(q)
        st1 = PriceState(q.x_yb_t1)
        for j, T in enumerate(ts):
            band = continuation_band_t2(q, float(T))
            for k, Tp in enumerate(tps):
                u_cont, u_stop = payoff_t1_with_band(q, float(T), float(Tp), band)
                if u_cont < u_stop:
                    na[i, j, k] = True
                    continue
                if band is None:
                    raw[i, j, k] = 0.0
                    continue
                raw[i, j, k] = _sr_integral(q, band, x_star, st1, float(T), float(Tp))

    conditional = raw / norm if norm > 0 else np.where(np.isnan(raw), np.nan, 0.0)
    return SRGrid(xa_axis=xa, t_axis=ts, tp_axis=tps, raw=raw, conditional=conditional, na_mask=na)


def payoff_t1_with_band(p: SwapParams, T: float, Tp: float, band: Bracket | None) -> tuple[float, float]:
    """payoff_t1 with a precomputed middle-node band (grid fast path)."""
    _check_T(p, T)
    _check_Tp(p, Tp)
    if p.t1_stop_value == "principal":
        u_a_stop_t2 = p.x_a - p.f_a
    else:
        u_a_stop_t2 = p.x_a * math.exp(-p.r_a * p.t_a) - p.f_a
    if band is None:
        return u_a_stop_t2 * math.exp(-p.r_a * p.tau_a), p.x_a
    st1 = PriceState(p.x_yb_t1)
    h = p.tau_a + Tp

    def integrand(price):
        return transition_pdf(price, st1, p.gbm, h) * _u_A_cont_t2(p, price, T)

    cont_int = integrate(integrand, band, p.quad)
    # Complement of the band under the same tau_a + T' law as the integral,
    # so the two branch weights sum to one.
    mass_outside = (
        1.0
        - transition_cdf(band.hi, st1, p.gbm, h)
        + transition_cdf(band.lo, st1, p.gbm, h)
    )
    u_a_cont = p.theta_2 * (
        cont_int * math.exp(-p.r_a * h) + mass_outside * u_a_stop_t2 * math.exp(-p.r_a * p.tau_a)
    ) + (1.0 - p.theta_2) * u_a_stop_t2 * math.exp(-p.r_a * p.tau_a)
    return u_a_cont, p.x_a


def _sr_integral(p: SwapParams, band: Bracket, x_star: float, st1: PriceState, T: float, Tp: float) -> float:
    h_lock = p.tau_a + Tp
    h_claim = p.tau_b + T

    def integrand(price):
        dens = p.theta_2 * transition_pdf(price, st1, p.gbm, h_lock)
        tails = 1.0 - _cdf_from(p, x_star, price, h_claim)
        return dens * p.theta_1 * tails

    return max(0.0, integrate(integrand, band, p.quad))
