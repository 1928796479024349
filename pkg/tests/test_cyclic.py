import pytest

from conftest import quick_baseline
from swapsim.cyclic import CyclicSpec, generate, run_cyclic, validate_plan


def make_spec(n: int, **overrides) -> CyclicSpec:
    kwargs = dict(
        n=n,
        amounts=tuple(2.0 for _ in range(n)),
        taus=tuple(3.0 for _ in range(n)),
        locktimes=tuple(48.0 - 6.0 * i for i in range(n)),
        D=12.0,
        Delta=1.0,
        rho=0.001,
    )
    kwargs.update(overrides)
    return CyclicSpec(**kwargs)


def test_spec_invariants():
    with pytest.raises(ValueError):
        make_spec(1)
    with pytest.raises(ValueError):
        make_spec(3, locktimes=(48.0, 48.0, 36.0))  # not strictly decreasing
    with pytest.raises(ValueError):
        make_spec(3, locktimes=(20.0, 16.0, 13.0))  # ladder exceeds T_last
    with pytest.raises(ValueError):
        make_spec(3, amounts=(2.0, 2.0))  # wrong arity


def test_generated_plan_validates():
    for n in (2, 3, 4, 5):
        plan = generate(make_spec(n))
        assert validate_plan(plan) == []
        assert len(plan.actions) == 2 * n
        assert len(plan.principal_actions()) == n
        assert len(plan.premium_actions()) == n


def test_premium_ladder_strictly_staggered():
    plan = generate(make_spec(4))
    premiums = sorted(plan.premium_actions(), key=lambda a: a.start_time)
    timeouts = [a.timeout for a in premiums]
    # Earlier premiums time out later: each step down is exactly Delta.
    assert all(a - b == pytest.approx(1.0) for a, b in zip(timeouts, timeouts[1:]))


def test_each_principal_has_predecessor_cancel_hash():
    plan = generate(make_spec(5))
    for a in plan.principal_actions():
        pred = (a.party - 1) % 5
        assert a.early_refund_hash == f"H{pred}"
        assert a.hashlocks == ("Hbar",)


def test_validate_plan_reports_tampering():
    plan = generate(make_spec(3))
    from dataclasses import replace

    bad_actions = tuple(
        replace(a, early_refund_hash=None) if a.kind == "principal" and a.party == 1 else a
        for a in plan.actions
    )
    bad = replace(plan, actions=bad_actions)
    problems = validate_plan(bad)
    assert any("party 1" in p for p in problems)


def test_all_compliant_swaps_atomically():
    for n in (2, 3, 4, 5):
        v = run_cyclic(generate(make_spec(n)))
        assert v.outcome == "swapped"
        assert v.correctness and v.safety and v.liveness
        assert v.witnesses == []
        # Equal amounts everywhere: the cycle nets out to zero per party.
        for net in v.net_value.values():
            assert net == pytest.approx(0.0, abs=1e-9)


def test_success_reveals_exactly_one_preimage():
    plan = generate(make_spec(3))
    v = run_cyclic(plan)
    revealed = {h for e in v.events for h in e.revealed}
    assert len(revealed) == 1


def test_every_single_griefer_position_is_safe():
    for n in (2, 3, 4, 5):
        plan = generate(make_spec(n))
        for g in range(n):
            for mode in ("grief-lock", "grief-claim"):
                v = run_cyclic(plan, {g: mode})
                assert v.outcome != "swapped" or mode == "grief-claim"
                assert v.safety, f"n={n} P{g} {mode}: {v.witnesses}"
                assert v.liveness, f"n={n} P{g} {mode}: {v.witnesses}"


def test_initiator_grief_compensation_amount_and_timing():
    n = 4
    spec = make_spec(n)
    plan = generate(spec)
    v = run_cyclic(plan, {0: "grief-claim"})
    # P1 cannot refund early (P0 withholds its cancel secret) and is
    # compensated by P0's premium c(a_1 * T_1).
    comp = spec.rho * spec.amounts[1] * spec.locktimes[1]
    assert v.net_value["P1"] == pytest.approx(comp, abs=1e-9)
    assert v.net_value["P0"] == pytest.approx(-comp, abs=1e-9)
    # The compensating timeout confirms within the premium ladder window
    # plus confirmation delays.
    p0_premium = next(a for a in plan.premium_actions() if a.party == 0)
    ladder_top = spec.D + (n - 1) * spec.Delta
    comp_events = [e for e in v.events
                   if e.tx_id.startswith("timeout") and e.kind == "confirmed"
                   and e.time >= p0_premium.timeout]
    deadline = ladder_top + max(spec.taus) + spec.t_eps
    assert any(e.time <= deadline for e in comp_events)


def test_two_party_plan_matches_premium_protocol_structure():
    q = quick_baseline()
    b = q.base
    spec = CyclicSpec(
        n=2,
        amounts=(b.x_a, b.x_yb_t1),
        taus=(b.tau_a, b.tau_b),
        locktimes=(b.t_a, b.t_b),
        D=q.D, Delta=q.Delta, rho=q.rho,
    )
    plan = generate(spec)
    assert validate_plan(plan) == []

    premiums = {a.party: a for a in plan.premium_actions()}
    principals = {a.party: a for a in plan.principal_actions()}
    # Counterparty premium Q = c(x_a * t_a); initiator collateral 1.5Q.
    assert premiums[1].amount == pytest.approx(q.premium_of("B"), rel=1e-12)
    assert premiums[0].amount == pytest.approx(q.premium_of("A"), rel=1e-12)
    # Principals mirror the two-party locks: each gated by the payment hash
    # alone, claimable by the counterparty, refundable early on the other
    # side's cancellation secret.
    assert principals[0].amount == b.x_a and principals[0].hashlock_claimant == 1
    assert principals[1].amount == b.x_yb_t1 and principals[1].hashlock_claimant == 0
    assert principals[0].early_refund_hash == "H1"
    assert principals[1].early_refund_hash == "H0"
    # Premiums carry the any-of (payment | own-cancel) gate with a timeout
    # to the counterparty, staggered by Delta.
    assert set(premiums[1].hashlocks) == {"Hbar", "H1"}
    assert set(premiums[0].hashlocks) == {"Hbar", "H0"}
    assert premiums[1].timeout_recipient == 0 and premiums[0].timeout_recipient == 1
    assert premiums[1].timeout - premiums[0].timeout == pytest.approx(q.Delta)


def test_two_party_runs_like_premium_protocol():
    from swapsim.protocol import Strategy, StrategyProfile, build_quickswap_instance, run

    q = quick_baseline()
    b = q.base
    spec = CyclicSpec(
        n=2, amounts=(b.x_a, b.x_yb_t1), taus=(b.tau_a, b.tau_b),
        locktimes=(b.t_a, b.t_b), D=q.D, Delta=q.Delta, rho=q.rho,
    )
    cyc = run_cyclic(generate(spec))
    two = run(build_quickswap_instance(q),
              StrategyProfile(Strategy("compliant"), Strategy("compliant")))
    assert cyc.outcome == two.outcome == "swapped"
    # Equal-value swap nets zero on both formulations.
    assert cyc.net_value["P0"] == pytest.approx(two.net_value["A"], abs=1e-9)
