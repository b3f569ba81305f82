"""Horizon controllers under both acknowledgment regimes."""

import numpy as np
import pytest

from dropattack import (
    DimensionError,
    Protocol,
    apply_receding_horizon,
    build_prediction_ensemble,
    control_gain,
    nominal_expected_cost,
    optimal_input_sequence,
    stack_channel_means,
)

from conftest import (
    make_model,
    random_channel,
    random_model,
    slow_expected_cost,
)


def test_protocol_parse():
    assert Protocol.parse("udp") is Protocol.UDP_LIKE
    assert Protocol.parse(" TCP ") is Protocol.TCP_LIKE
    with pytest.raises(ValueError):
        Protocol.parse("smtp")


def test_stack_channel_means_is_step_major():
    stacked = stack_channel_means(np.array([0.2, 0.9]), 3)
    np.testing.assert_array_equal(stacked, [0.2, 0.9, 0.2, 0.9, 0.2, 0.9])


def scalar_setup(mean=0.5):
    model = make_model([[1.0]], [[1.0]], horizon=1)
    ens = build_prediction_ensemble(model)
    return model, ens, np.array([mean])


def test_scalar_gains_by_hand():
    # one step, A=B=1, unit weights, mean 0.5:
    # acknowledged kernel 1 + 1*0.5 = 1.5, blind kernel adds (1-0.5)*1
    model, ens, mu = scalar_setup()
    tcp = control_gain(ens, model, mu, Protocol.TCP_LIKE)
    udp = control_gain(ens, model, mu, Protocol.UDP_LIKE)
    assert tcp.kernel[0, 0] == pytest.approx(1.5)
    assert udp.kernel[0, 0] == pytest.approx(2.0)
    x = np.array([1.0])
    assert optimal_input_sequence(tcp, ens, x)[0] == pytest.approx(-2.0 / 3.0)
    assert optimal_input_sequence(udp, ens, x)[0] == pytest.approx(-0.5)


def test_scalar_nominal_cost_by_hand():
    # constant part 1 + 1 + 0.3, feedback benefit 1/3
    model = make_model([[1.0]], [[1.0]], horizon=1, q=[1.0], noise=[0.3])
    ens = build_prediction_ensemble(model)
    gain = control_gain(ens, model, np.array([0.5]), Protocol.TCP_LIKE)
    cost = nominal_expected_cost(ens, model, gain, np.array([1.0]))
    assert cost == pytest.approx(1.0 + 1.0 + 0.3 - 1.0 / 3.0, rel=1e-12)


def test_gain_solves_normal_equations(rng):
    for protocol in Protocol:
        for _ in range(10):
            model = random_model(rng)
            ens = build_prediction_ensemble(model)
            mu = random_channel(rng, model.m).mean_diag
            gain = control_gain(ens, model, mu, protocol)
            x = rng.normal(size=model.n)
            u = optimal_input_sequence(gain, ens, x)
            np.testing.assert_allclose(
                gain.kernel @ u, -ens.cross_gram @ x, atol=1e-8
            )


def test_heterogeneous_means_take_lu_path(rng):
    # unequal means make the blind kernel nonsymmetric; solve still exact
    model = random_model(rng, m=3)
    ens = build_prediction_ensemble(model)
    mu = np.array([0.2, 0.5, 0.8])
    gain = control_gain(ens, model, mu, Protocol.UDP_LIKE)
    assert not np.allclose(gain.kernel, gain.kernel.T)
    rhs = rng.normal(size=ens.horizon * ens.m)
    np.testing.assert_allclose(gain.kernel @ gain.solve(rhs), rhs, atol=1e-8)
    assert np.isfinite(gain.condition)


def test_nominal_cost_matches_bernoulli_moment_oracle(rng):
    for protocol in Protocol:
        for _ in range(15):
            model = random_model(rng)
            ens = build_prediction_ensemble(model)
            mu = random_channel(rng, model.m).mean_diag
            gain = control_gain(ens, model, mu, protocol)
            x = rng.normal(size=model.n)
            u = optimal_input_sequence(gain, ens, x)
            mine = nominal_expected_cost(ens, model, gain, x)
            thresholds = stack_channel_means(mu, model.horizon)
            want = slow_expected_cost(model, x, u, thresholds, protocol)
            assert mine == pytest.approx(want, rel=1e-10)


def test_receding_horizon_takes_first_block():
    seq = np.arange(12.0)
    np.testing.assert_array_equal(apply_receding_horizon(seq, 3), [0, 1, 2])
    with pytest.raises(DimensionError):
        apply_receding_horizon(seq, 5)


def test_mean_validation():
    model, ens, _ = scalar_setup()
    with pytest.raises(DimensionError):
        control_gain(ens, model, np.array([1.0]), Protocol.TCP_LIKE)  # kernel needs < 1
    with pytest.raises(DimensionError):
        control_gain(ens, model, np.array([-0.1]), Protocol.TCP_LIKE)
    with pytest.raises(DimensionError):
        control_gain(ens, model, np.array([0.5, 0.5]), Protocol.TCP_LIKE)
