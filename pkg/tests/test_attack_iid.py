"""Stationary attack rates: objective shapes and closed-form optimizers."""

import numpy as np
import pytest

from dropattack import (
    ChannelSpec,
    Convexity,
    DetectionSpec,
    DimensionError,
    InfeasibleRegionError,
    Protocol,
    attack_context,
    build_prediction_ensemble,
    optimal_alpha_tcp,
    optimal_alpha_udp,
    peak_alpha_udp,
    perfect_channel_condition_tcp,
    tcp_objective,
    tcp_objective_coeffs,
    trough_alpha_tcp,
    udp_objective,
    udp_objective_coeffs,
)

from conftest import (
    grid_argmax,
    make_model,
    memoryless_model,
    random_channel,
    random_detection,
    random_model,
    shared_channel,
    shared_detection,
)


def make_ctx(rng, protocol, model=None, channel=None, detection=None, x=None):
    if model is None:
        model = random_model(rng)
    ens = build_prediction_ensemble(model)
    if channel is None:
        channel = random_channel(rng, model.m)
    if detection is None:
        detection = random_detection(rng, model.m)
    if x is None:
        x = rng.normal(size=model.n)
    return attack_context(ens, model, channel, detection, protocol, x), model


def test_coeffs_reproduce_objective_on_grid(rng):
    alphas = np.linspace(0.0, 1.0, 21)
    for _ in range(12):
        ctx, _ = make_ctx(rng, Protocol.UDP_LIKE)
        coeffs = udp_objective_coeffs(ctx)
        for a in alphas:
            assert coeffs.value(a) == pytest.approx(
                udp_objective(ctx, a), rel=1e-10, abs=1e-10
            )
        ctx, _ = make_ctx(rng, Protocol.TCP_LIKE)
        coeffs = tcp_objective_coeffs(ctx)
        for a in alphas:
            assert coeffs.value(a) == pytest.approx(
                tcp_objective(ctx, a), rel=1e-10, abs=1e-10
            )


def test_slope_at_nominal_rate(rng):
    # shared channels: udp slope is -u'(P + D_in)u, tcp slope is -u'Pu
    for _ in range(10):
        model = random_model(rng)
        channel = shared_channel(model.m, mean=rng.uniform(0.3, 0.8))
        mu = float(channel.mean_diag[0])
        ctx, _ = make_ctx(rng, Protocol.UDP_LIKE, model=model, channel=channel)
        u = ctx.u_star
        want = -(u @ (model.input_penalty @ u) + u @ (ctx.ens.input_gram_diag * u))
        assert udp_objective_coeffs(ctx).slope(mu) == pytest.approx(want, rel=1e-9)

        ctx, _ = make_ctx(rng, Protocol.TCP_LIKE, model=model, channel=channel)
        u = ctx.u_star
        want = -u @ (model.input_penalty @ u)
        assert tcp_objective_coeffs(ctx).slope(mu) == pytest.approx(want, rel=1e-9)


def test_tcp_trough_exceeds_nominal(rng):
    # negative slope at the nominal rate pushes the minimizer strictly above
    for _ in range(10):
        model = random_model(rng)
        channel = shared_channel(model.m, mean=rng.uniform(0.3, 0.8))
        ctx, _ = make_ctx(rng, Protocol.TCP_LIKE, model=model, channel=channel)
        if float(ctx.u_star @ ctx.u_star) < 1e-12:
            continue
        assert trough_alpha_tcp(ctx) > float(channel.mean_diag[0])


def test_scalar_tcp_trough_by_hand():
    model = make_model([[1.0]], [[1.0]], horizon=1)
    ens = build_prediction_ensemble(model)
    channel = ChannelSpec(mean_diag=np.array([0.5]))
    det = DetectionSpec(tol_diag=np.array([0.2]))
    ctx = attack_context(
        ens, model, channel, det, Protocol.TCP_LIKE, np.array([1.0])
    )
    # objective -a u^2 (2 - a) has its trough exactly at rate 1
    assert trough_alpha_tcp(ctx) == pytest.approx(1.0, abs=1e-12)
    coeffs = tcp_objective_coeffs(ctx)
    u2 = (2.0 / 3.0) ** 2
    assert coeffs.curvature == pytest.approx(u2, rel=1e-12)
    assert coeffs.linear == pytest.approx(-2.0 * u2, rel=1e-12)


def test_udp_optimizer_matches_grid(rng):
    hits = 0
    while hits < 10:
        ctx, _ = make_ctx(rng, Protocol.UDP_LIKE)
        if ctx.region is None:
            continue
        hits += 1
        char = optimal_alpha_udp(ctx)
        lo, hi = ctx.region
        a_grid, v_grid = grid_argmax(lambda a: udp_objective(ctx, a), lo, hi)
        assert char.objective_star >= v_grid - 1e-9 * (1.0 + abs(v_grid))
        assert abs(char.alpha_star - a_grid) <= 1e-4 or char.objective_star == pytest.approx(v_grid, abs=1e-8)
        assert lo <= char.alpha_star <= hi


def test_tcp_optimizer_is_endpoint(rng):
    hits = 0
    while hits < 10:
        ctx, _ = make_ctx(rng, Protocol.TCP_LIKE)
        if ctx.region is None:
            continue
        hits += 1
        char = optimal_alpha_tcp(ctx)
        lo, hi = ctx.region
        if not char.degenerate:
            assert char.alpha_star in (lo, hi)
        a_grid, v_grid = grid_argmax(lambda a: tcp_objective(ctx, a), lo, hi)
        assert char.objective_star >= v_grid - 1e-9 * (1.0 + abs(v_grid))


def test_memoryless_plant_is_exactly_linear(rng):
    # A = 0 kills the cross Gramian: u* = 0, so the flat case is also
    # degenerate and answered with the nominal rate
    model = memoryless_model(rng, n=3)
    channel = shared_channel(3, mean=0.6)
    ctx, _ = make_ctx(
        rng, Protocol.UDP_LIKE, model=model, channel=channel,
        detection=shared_detection(3, tol=0.15),
    )
    coeffs = udp_objective_coeffs(ctx)
    assert coeffs.curvature == 0.0  # off-diagonal coupling identically absent
    char = optimal_alpha_udp(ctx)
    assert char.convexity is Convexity.LINEAR
    assert char.degenerate and char.alpha_star == pytest.approx(0.6)
    with pytest.raises(ValueError):
        peak_alpha_udp(ctx)


def test_single_step_single_input_is_linear_with_signal(rng):
    # one stacked input: no off-diagonal terms at all, yet u* != 0, so the
    # objective is genuinely linear and the optimum sits at an endpoint
    for _ in range(5):
        model = random_model(rng, n=2, m=1, horizon=1)
        channel = shared_channel(1, mean=0.5)
        ctx, _ = make_ctx(
            rng, Protocol.UDP_LIKE, model=model, channel=channel,
            detection=shared_detection(1, tol=0.2),
            x=np.array([1.0, -2.0]),
        )
        coeffs = udp_objective_coeffs(ctx)
        assert coeffs.curvature == 0.0
        assert coeffs.linear < 0  # slope -u'(P + D_in)u
        char = optimal_alpha_udp(ctx)
        assert char.convexity is Convexity.LINEAR
        assert not char.degenerate
        assert char.alpha_star == ctx.region[0]


def test_zero_state_is_degenerate(rng):
    for protocol, solver in (
        (Protocol.UDP_LIKE, optimal_alpha_udp),
        (Protocol.TCP_LIKE, optimal_alpha_tcp),
    ):
        model = random_model(rng)
        channel = shared_channel(model.m, mean=0.55)
        ctx, _ = make_ctx(
            rng, protocol, model=model, channel=channel,
            detection=shared_detection(model.m, tol=0.2),
            x=np.zeros(model.n),
        )
        char = solver(ctx)
        assert char.degenerate
        assert char.alpha_star == pytest.approx(0.55)
        assert char.objective_star == pytest.approx(0.0, abs=1e-15)


def test_disjoint_bands_have_no_common_rate(rng):
    model = random_model(rng, m=2)
    channel = ChannelSpec(mean_diag=np.array([0.2, 0.9]))
    det = DetectionSpec(tol_diag=np.array([0.05, 0.05]))
    ctx, _ = make_ctx(
        rng, Protocol.UDP_LIKE, model=model, channel=channel, detection=det
    )
    assert ctx.region is None
    with pytest.raises(InfeasibleRegionError):
        ctx.require_region()
    with pytest.raises(InfeasibleRegionError):
        optimal_alpha_udp(ctx)
    # per-channel bounds survive for schedule attacks
    np.testing.assert_allclose(ctx.channel_lo, [0.15, 0.85])
    np.testing.assert_allclose(ctx.channel_hi, [0.25, 0.95])


def test_protocol_mismatch_is_rejected(rng):
    ctx, _ = make_ctx(rng, Protocol.TCP_LIKE)
    with pytest.raises(DimensionError):
        udp_objective(ctx, 0.5)
    ctx, _ = make_ctx(rng, Protocol.UDP_LIKE)
    with pytest.raises(DimensionError):
        optimal_alpha_tcp(ctx)


def test_perfect_channel_report(rng):
    # weak input penalty on an unstable plant: full delivery hurts
    model = make_model(
        [[1.4, 0.3], [0.0, 1.2]], np.eye(2), horizon=4,
        psi=[0.01, 0.01], omega=[1.0, 1.0],
    )
    ens = build_prediction_ensemble(model)
    channel = shared_channel(2, mean=0.05)
    det = shared_detection(2, tol=0.3)
    x = np.array([1.0, -0.5])
    ctx = attack_context(ens, model, channel, det, Protocol.TCP_LIKE, x)
    report = perfect_channel_condition_tcp(ctx)
    assert report.objective_at_one == pytest.approx(
        tcp_objective(ctx, 1.0), rel=1e-12
    )
    if report.matrix_definite:
        assert report.min_eigenvalue > 0
        assert report.state_positive  # sufficient condition in action
    assert report.state_positive == (report.objective_at_one > 0)

    # heavy input penalty flips the answer
    tame = make_model(
        [[0.5, 0.0], [0.0, 0.4]], np.eye(2), horizon=4,
        psi=[50.0, 50.0], omega=[1.0, 1.0],
    )
    ens2 = build_prediction_ensemble(tame)
    ctx2 = attack_context(
        ens2, tame, shared_channel(2, mean=0.6), det, Protocol.TCP_LIKE, x
    )
    report2 = perfect_channel_condition_tcp(ctx2)
    assert not report2.state_positive
    assert not report2.matrix_definite


def test_candidate_lists_cover_region_endpoints(rng):
    hits = 0
    while hits < 6:
        ctx, _ = make_ctx(rng, Protocol.UDP_LIKE)
        if ctx.region is None:
            continue
        hits += 1
        char = optimal_alpha_udp(ctx)
        if char.degenerate:
            continue
        alphas = [a for a, _ in char.candidates]
        lo, hi = ctx.region
        assert lo in alphas and hi in alphas
        if char.alpha_peak is not None and lo <= char.alpha_peak <= hi:
            assert char.alpha_peak in alphas
