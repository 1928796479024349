import pytest

from conftest import baseline, quick_baseline
from swapsim.htlcgame import claim_threshold_t3, continuation_band_t2, success_rate
from swapsim.protocol import (
    Strategy,
    StrategyProfile,
    build_htlc_instance,
    build_quickswap_instance,
    check_properties,
    liveness_bound,
    mc_success_rate_htlc,
    mc_success_rate_quickswap,
    run,
    strategy_grid,
)
from swapsim.quickswapgame import success_rate as quick_success_rate

COMPLIANT = StrategyProfile(Strategy("compliant"), Strategy("compliant"))


def test_compliant_htlc_swaps():
    v = run(build_htlc_instance(baseline()), COMPLIANT)
    assert v.outcome == "swapped"
    assert v.correctness and v.safety and v.liveness
    # Exactly the payment preimage is revealed on-chain.
    revealed = [h for e in v.events for h in e.revealed]
    assert len(set(revealed)) == 1


def test_compliant_quickswap_swaps():
    v = run(build_quickswap_instance(quick_baseline()), COMPLIANT)
    assert v.outcome == "swapped"
    assert v.correctness and v.safety and v.liveness
    # Premiums return to their owners on the happy path: net value is the
    # pure principal exchange.
    assert v.net_value["A"] == pytest.approx(-v.net_value["B"], abs=1e-9)


def test_htlc_griefing_violates_safety():
    inst = build_htlc_instance(baseline())
    v = run(inst, StrategyProfile(Strategy("compliant"), Strategy("grief", phase="start")))
    assert v.outcome == "griefed"
    assert not v.safety          # A's principal sat locked with no compensation
    assert v.liveness            # ...but every lock is eventually released


def test_quickswap_griefing_compensated():
    inst = build_quickswap_instance(quick_baseline())
    q = quick_baseline()
    v = run(inst, StrategyProfile(Strategy("compliant"), Strategy("grief", phase="premium")))
    assert v.outcome == "griefed"
    assert v.safety and v.liveness
    # B walked away after posting the premium; A pockets it.
    assert v.net_value["A"] == pytest.approx(q.Q, abs=1e-9)


def test_quickswap_a_griefing_pays_b():
    inst = build_quickswap_instance(quick_baseline())
    q = quick_baseline()
    v = run(inst, StrategyProfile(Strategy("grief", phase="lock"), Strategy("compliant")))
    assert v.safety and v.liveness
    # A's 1.5Q collateral times out to B, who forfeits its own Q: net +Q/2.
    assert v.net_value["B"] == pytest.approx(0.5 * q.Q, abs=1e-9)


def test_cancel_path_is_safe():
    inst = build_quickswap_instance(quick_baseline())
    v = run(inst, StrategyProfile(Strategy("compliant"), Strategy("cancel", phase="lock")))
    assert v.outcome == "cancelled"
    assert v.safety and v.liveness


def test_delayed_compliance_still_swaps_within_bound():
    inst = build_quickswap_instance(quick_baseline())
    profile = StrategyProfile(Strategy("delay", phase="claim", hours=6.0),
                              Strategy("delay", phase="lock", hours=1.0))
    v = run(inst, profile)
    assert v.outcome == "swapped"
    assert v.final_time <= liveness_bound(inst, profile)
    assert v.liveness


def test_liveness_bound_grows_with_delays():
    inst = build_htlc_instance(baseline())
    slow = StrategyProfile(Strategy("delay", phase="claim", hours=12.0), Strategy("compliant"))
    assert liveness_bound(inst, slow) > liveness_bound(inst, COMPLIANT)


def test_strategy_grid_composition():
    grid = strategy_grid("htlc")
    assert set(grid) == {"A", "B"}
    # compliant + grief(start, lock) + cancel(2 phases) + delay(3h x 2 phases)
    assert len(grid["A"]) == 11
    labels = {s.label() for s in grid["A"]}
    assert "compliant" in labels and "grief(start)" in labels


def test_check_properties_quickswap_clean():
    report = check_properties(build_quickswap_instance(quick_baseline()))
    assert report.safety_violations == []
    assert report.liveness_ok and report.correctness_ok


def test_check_properties_htlc_violations_present_and_confined():
    report = check_properties(build_htlc_instance(baseline()))
    violations = report.safety_violations
    assert violations, "the plain swap must exhibit griefing damage"
    assert all("grief" in r.profile for r in violations)
    assert report.liveness_ok


def test_threshold_strategies_follow_price():
    p = baseline()
    inst = build_htlc_instance(p)
    profile = StrategyProfile(Strategy("threshold"), Strategy("threshold"))
    band = continuation_band_t2(p, 0.0)
    x_star = claim_threshold_t3(p)
    good = 0.5 * (band.lo + band.hi)
    assert run(inst, profile, price_path=lambda t: max(good, x_star + 0.1)).outcome == "swapped"
    # A price below B's lock band keeps B out.
    v = run(inst, profile, price_path=lambda t: band.lo * 0.5)
    assert v.outcome == "cancelled"
    assert v.safety and v.liveness


def test_mc_oracle_matches_analytic_htlc():
    p = baseline()
    analytic = success_rate(p, 0.0, 0.0)
    freq, se = mc_success_rate_htlc(p, 0.0, 0.0, 100_000, seed=42)
    assert se > 0
    assert abs(freq - analytic) <= 3.0 * se


def test_mc_oracle_matches_analytic_quickswap():
    q = quick_baseline()
    analytic = quick_success_rate(q)
    freq, se = mc_success_rate_quickswap(q, 100_000, seed=43)
    assert abs(freq - analytic) <= 3.0 * se


def test_mc_oracles_deterministic():
    p = baseline()
    assert mc_success_rate_htlc(p, 1.0, 2.0, 5_000, seed=7) == \
        mc_success_rate_htlc(p, 1.0, 2.0, 5_000, seed=7)
