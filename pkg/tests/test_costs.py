"""Analytic cost accounting for the attack regimes."""

import numpy as np
import pytest

from dropattack import (
    Protocol,
    attack_context,
    build_prediction_ensemble,
    build_qp_udp,
    control_gain,
    cost_increase_alpha0,
    cost_increase_alpha1_tcp,
    cost_increase_alpha1_udp,
    cost_increase_alphamax_udp,
    expected_attacked_cost,
    feedback_benefit,
    initial_state_average,
    nominal_expected_cost,
    solve_box_qp_max,
    stack_channel_means,
    tcp_objective,
    udp_objective,
    udp_objective_coeffs,
)

from conftest import (
    random_channel,
    random_detection,
    random_model,
    shared_channel,
    shared_detection,
    slow_expected_cost,
)

from test_attack_iid import make_ctx


def test_increase_is_objective_plus_blackout_benefit(rng):
    # the structural identity behind every regime formula
    for protocol, scalar in (
        (Protocol.UDP_LIKE, udp_objective),
        (Protocol.TCP_LIKE, tcp_objective),
    ):
        for _ in range(10):
            ctx, model = make_ctx(rng, protocol)
            q0 = feedback_benefit(ctx)
            zero = cost_increase_alpha0(ctx, model)
            assert zero.increase == pytest.approx(q0, rel=1e-12)
            assert zero.increase == pytest.approx(
                scalar(ctx, 0.0) + q0, abs=1e-12 * (1 + abs(q0))
            )
            if protocol is Protocol.UDP_LIKE:
                one = cost_increase_alpha1_udp(ctx, model)
            else:
                one = cost_increase_alpha1_tcp(ctx, model)
            want = scalar(ctx, 1.0) + q0
            assert one.increase == pytest.approx(
                want, rel=1e-9, abs=1e-10 * (1 + abs(want))
            )
            assert one.attacked == pytest.approx(
                one.baseline + one.increase, rel=1e-12
            )


def test_blackout_increase_positive_for_active_feedback(rng):
    for _ in range(10):
        model = random_model(rng)
        ctx, _ = make_ctx(rng, Protocol.UDP_LIKE, model=model)
        if float(ctx.u_star @ ctx.u_star) < 1e-14:
            continue
        assert feedback_benefit(ctx) > 0.0


def test_peak_regime_bonus(rng):
    found = 0
    while found < 6:
        ctx, model = make_ctx(rng, Protocol.UDP_LIKE)
        coeffs = udp_objective_coeffs(ctx)
        if coeffs.curvature >= -1e-10:
            with pytest.raises(ValueError):
                cost_increase_alphamax_udp(ctx, model)
            continue
        found += 1
        report = cost_increase_alphamax_udp(ctx, model)
        peak = report.details["alpha_peak"]
        assert report.details["peak_bonus"] > 0.0
        assert report.increase == pytest.approx(
            udp_objective(ctx, peak) + feedback_benefit(ctx), rel=1e-9
        )
        # the peak is the stationary point of the unconstrained objective
        coeffs = udp_objective_coeffs(ctx)
        scale = abs(coeffs.linear) + abs(coeffs.curvature)
        assert abs(coeffs.slope(peak)) <= 1e-9 * scale
        eps = 1e-6
        slack = 1e-9 * (1.0 + abs(udp_objective(ctx, peak)))
        assert udp_objective(ctx, peak) >= udp_objective(ctx, peak + eps) - slack
        assert udp_objective(ctx, peak) >= udp_objective(ctx, peak - eps) - slack


def test_flooding_flags_match_signs(rng):
    for _ in range(8):
        ctx, model = make_ctx(rng, Protocol.UDP_LIKE)
        rep = cost_increase_alpha1_udp(ctx, model)
        assert rep.details["cost_increasing"] == (rep.increase > 0)
        ctx, model = make_ctx(rng, Protocol.TCP_LIKE)
        rep = cost_increase_alpha1_tcp(ctx, model)
        assert rep.details["flooding_term_positive"] == (
            rep.details["flooding_term"] > 0
        )


def test_protocol_guards():
    rng = np.random.default_rng(5)
    ctx, model = make_ctx(rng, Protocol.TCP_LIKE)
    with pytest.raises(Exception):
        cost_increase_alpha1_udp(ctx, model)
    ctx, model = make_ctx(rng, Protocol.UDP_LIKE)
    with pytest.raises(Exception):
        cost_increase_alpha1_tcp(ctx, model)


def test_attacked_cost_none_reproduces_nominal(rng):
    for protocol in Protocol:
        for _ in range(8):
            ctx, model = make_ctx(rng, protocol)
            want = nominal_expected_cost(ctx.ens, model, ctx.gain, ctx.x)
            got = expected_attacked_cost(ctx, model, attack=None)
            assert got == pytest.approx(want, rel=1e-12)


def test_attacked_cost_matches_bernoulli_moment_oracle(rng):
    for protocol in Protocol:
        for _ in range(8):
            model = random_model(rng)
            ens = build_prediction_ensemble(model)
            channel = random_channel(rng, model.m)
            detection = random_detection(rng, model.m)
            x = rng.normal(size=model.n)
            ctx = attack_context(
                ens, model, channel, detection, protocol, x
            )
            # scalar rate
            alpha = float(rng.uniform(0.0, 1.0))
            got = expected_attacked_cost(ctx, model, alpha)
            wantt = slow_expected_cost(
                model, x, ctx.u_star,
                np.full(model.horizon * model.m, alpha), protocol,
            )
            assert got == pytest.approx(wantt, rel=1e-9)
            # full (N, m) schedule
            sched = rng.uniform(0.0, 1.0, (model.horizon, model.m))
            got = expected_attacked_cost(ctx, model, sched)
            want = slow_expected_cost(
                model, x, ctx.u_star, sched.reshape(-1), protocol
            )
            assert got == pytest.approx(want, rel=1e-9)
            # per-channel vector tiles across the horizon
            vec = rng.uniform(0.0, 1.0, model.m)
            got = expected_attacked_cost(ctx, model, vec)
            want = slow_expected_cost(
                model, x, ctx.u_star,
                stack_channel_means(vec, model.horizon), protocol,
            )
            assert got == pytest.approx(want, rel=1e-9)


def test_attacked_cost_accepts_solver_output(rng):
    ctx, model = make_ctx(rng, Protocol.UDP_LIKE)
    qp = build_qp_udp(ctx)
    sol = solve_box_qp_max(qp)
    via_object = expected_attacked_cost(ctx, model, sol)
    via_array = expected_attacked_cost(ctx, model, sol.means)
    assert via_object == via_array
    # solver output can only raise the cost relative to the nominal law
    nominal = expected_attacked_cost(ctx, model, None)
    assert via_object >= nominal - 1e-9 * (1.0 + abs(nominal))


def test_initial_state_average_exact_on_known_quadratic(rng):
    # contract: closure is a quadratic form plus a constant, which is what
    # every per-state expected cost in the package looks like (u* is linear
    # in x, so no linear term survives)
    model = random_model(rng, n=3)
    H = rng.normal(size=(3, 3))
    H = H @ H.T
    c0 = 1.7

    def cost(x):
        return float(x @ H @ x) + c0

    got = initial_state_average(model, cost)
    want = cost(model.init_mean) + float(np.sum(H * model.init_cov))
    assert got == pytest.approx(want, rel=1e-12)


def test_initial_state_average_consistent_with_pointwise(rng):
    # aggregate minus pointwise equals the covariance trace term
    model = random_model(rng, n=2)
    ens = build_prediction_ensemble(model)
    channel = shared_channel(model.m, 0.7)
    detection = shared_detection(model.m, 0.1)
    gain = control_gain(ens, model, channel.mean_diag, Protocol.UDP_LIKE)

    def attacked(x):
        ctx = attack_context(
            ens, model, channel, detection, Protocol.UDP_LIKE, x, gain=gain
        )
        return expected_attacked_cost(ctx, model, 0.4)

    agg = initial_state_average(model, attacked)
    # recompute the trace correction by finite polarization at scale 1
    e = np.eye(2)
    z = attacked(np.zeros(2))
    d = [attacked(e[i]) - z for i in range(2)]
    cross = attacked(e[0] + e[1]) - z - d[0] - d[1]
    Hm = np.array([[d[0], cross / 2.0], [cross / 2.0, d[1]]])
    want = attacked(model.init_mean) + float(np.sum(Hm * model.init_cov))
    assert agg == pytest.approx(want, rel=1e-10)
