import math

import numpy as np
import pytest

from conftest import baseline
from swapsim.htlcgame import (
    SwapParams,
    claim_threshold_t3,
    compute_thresholds,
    continuation_band_t2,
    participation_range,
    payoff_t1,
    payoff_t2,
    payoff_t3,
    sr_surface,
    success_rate,
)
from swapsim.numerics import Bracket, QuadratureSpec, integrate
from swapsim.pricemodel import PriceState, transition_pdf


def _brute_force_threshold(g, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Independent sign-change scan + bisection of a payoff comparison."""
    xs = np.linspace(lo, hi, 2001)
    vals = [g(x) for x in xs]
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            return float(a)
        if fa * fb < 0.0:
            while b - a > tol:
                m = 0.5 * (a + b)
                if fa * g(m) <= 0.0:
                    b = m
                else:
                    a, fa = m, g(m)
            return 0.5 * (a + b)
    raise AssertionError("no sign change found")


def test_final_claim_payoffs():
    p = baseline()
    u_cont_a, u_cont_b = payoff_t3(p, 2.0, "continue")
    u_stop_a, u_stop_b = payoff_t3(p, 2.0, "stop")
    # Claiming at the market price beats refunding at the baseline.
    assert u_cont_a > u_stop_a
    # B's side of the claim branch: A's principal plus spread, discounted
    # over the confirmation and observation lag.
    assert u_cont_b == pytest.approx(
        (1 + p.sp_b) * p.x_a * math.exp(-p.r_b * (p.tau_a + p.t_eps)) - p.f_a, rel=1e-12
    )


def test_claim_threshold_matches_brute_force():
    for x_a in (1.5, 2.0, 2.7):
        p = baseline(x_a=x_a)
        star = claim_threshold_t3(p)
        brute = _brute_force_threshold(
            lambda x: payoff_t3(p, x, "continue")[0] - payoff_t3(p, x, "stop")[0],
            0.2, 5.0,
        )
        assert star == pytest.approx(brute, abs=1e-6)


def test_claim_threshold_baseline_value():
    # Spot value of the indifference price at the reference configuration.
    assert claim_threshold_t3(baseline()) == pytest.approx(1.2211, abs=5e-4)


def test_middle_node_value_matches_quadrature():
    """The closed-form continuation value equals the defining integral."""
    p = baseline()
    x_star = claim_threshold_t3(p)
    spec = QuadratureSpec(abs_tol=1e-11, rel_tol=1e-9)
    lam = p.tau_b  # zero claim delay
    u_claim_b = payoff_t3(p, 1.0, "continue")[1]  # constant in the t3 price
    slope = math.exp((p.gbm.mu - p.r_b) * p.t_b)
    for price_t2 in (1.6, 2.0, 2.4):
        st = PriceState(price_t2)

        def claim_part(x):
            return u_claim_b * transition_pdf(x, st, p.gbm, lam)

        def refund_part(x):
            # A refunds; B unlocks after its full locktime.
            return (x * slope - p.f_b) * transition_pdf(x, st, p.gbm, lam)

        honest = (integrate(refund_part, Bracket(1e-3, x_star), spec)
                  + integrate(claim_part, Bracket(x_star, 12.0), spec))
        outside = price_t2 * math.exp(p.gbm.mu * lam) * slope - p.f_b
        direct = math.exp(-p.r_b * lam) * (
            p.theta_1 * honest + (1 - p.theta_1) * outside
        )
        u_cont_b = payoff_t2(p, price_t2, 0.0)[1]
        assert u_cont_b == pytest.approx(direct, rel=1e-6)


def test_continuation_band_brackets_root_crossings():
    p = baseline()
    band = continuation_band_t2(p, 0.0)
    assert band is not None
    lo, hi = band.lo, band.hi
    g = lambda x: payoff_t2(p, x, 0.0)[1] - payoff_t2(p, x, 0.0)[3]
    # Inside the band B prefers locking; at the edges it is indifferent.
    assert g(0.5 * (lo + hi)) > 0
    assert abs(g(lo)) <= 1e-6 and abs(g(hi)) <= 1e-6
    assert lo < p.x_yb_t1 < hi


def test_band_edges_match_brute_force():
    p = baseline()
    band = continuation_band_t2(p, 0.0)
    g = lambda x: payoff_t2(p, x, 0.0)[1] - payoff_t2(p, x, 0.0)[3]
    lo = _brute_force_threshold(g, 0.5, 0.5 * (band.lo + band.hi))
    hi = _brute_force_threshold(g, 0.5 * (band.lo + band.hi), 6.0)
    assert band.lo == pytest.approx(lo, abs=1e-6)
    assert band.hi == pytest.approx(hi, abs=1e-6)


def test_root_payoff_supports_participation_at_baseline():
    p = baseline()
    u_cont, u_stop = payoff_t1(p, 0.0, 0.0)
    assert u_cont >= u_stop


def test_unwilling_counterparty_kills_participation():
    p = baseline(theta_2=0.0)
    assert success_rate(p, 0.0, 0.0) is None


def test_literal_discounted_stop_never_participates():
    p = baseline(t1_stop_value="discounted")
    for x_a in np.linspace(1.0, 3.0, 11):
        assert success_rate(p.with_x_a(float(x_a)), 0.0, 0.0) is None


def test_success_rate_semantics_and_normalization():
    p = baseline()
    raw = success_rate(p, 0.0, 0.0)
    assert raw is not None
    assert 0.0 < raw <= p.theta_1 * p.theta_2
    cond = raw / (p.theta_1 * p.theta_2)
    assert cond == pytest.approx(0.798, abs=5e-3)


def test_success_rate_nonincreasing_in_each_delay_at_baseline():
    p = baseline()
    srs_T = [success_rate(p, T, 0.0) for T in (0.0, 5.0, 10.0, 15.0, 20.0)]
    vals = [s for s in srs_T if s is not None]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    srs_Tp = [success_rate(p, 0.0, Tp) for Tp in (0.0, 5.0, 10.0, 15.0, 21.0)]
    vals = [s for s in srs_Tp if s is not None]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_delay_window_bounds_enforced():
    p = baseline()
    with pytest.raises(ValueError):
        success_rate(p, p.claim_delay_window + 1.0, 0.0)
    with pytest.raises(ValueError):
        success_rate(p, 0.0, p.lock_delay_window + 1.0)


def test_participation_range_brackets_baseline():
    p = baseline()
    rng = participation_range(p, Bracket(1.0, 3.0))
    assert rng is not None
    lo, hi = rng
    assert lo < 2.0 < hi
    assert 1.0 <= lo <= 1.6 and 2.2 <= hi <= 3.0


def test_thresholds_snapshot():
    th = compute_thresholds(baseline())
    assert th.band is not None
    assert th.x1 < th.x2
    assert th.x_t3_star == pytest.approx(claim_threshold_t3(baseline()), rel=1e-12)


def test_surface_shape_and_na_mask():
    p = baseline()
    grid = sr_surface(p, [1.0, 2.0, 3.0], [0.0, 10.0], [0.0, 10.0])
    assert grid.raw.shape == (3, 2, 2)
    # x_a = 1 and x_a = 3 never start; x_a = 2 participates at zero delay.
    assert grid.na_mask[0].all() and grid.na_mask[2].all()
    assert not grid.na_mask[1, 0, 0]
    assert np.isnan(grid.raw[0]).all()
    cond = grid.conditional[1, 0, 0]
    assert cond == pytest.approx(
        success_rate(p, 0.0, 0.0) / (p.theta_1 * p.theta_2), rel=1e-12
    )


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        baseline(t_a=10.0)  # violates t_a > t_b
    with pytest.raises(ValueError):
        baseline(theta_1=1.5)
    with pytest.raises(ValueError):
        baseline(t1_stop_value="bogus")
