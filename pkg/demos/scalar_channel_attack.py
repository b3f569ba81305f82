"""Walk the single-channel attack story end to end.

A two-state plant is actuated through one packet channel that delivers
with probability 0.7, and the loss monitor tolerates empirical rates
within 0.1 of nominal.  The script characterizes the attacker's best
stationary rate under both acknowledgement regimes, evaluates the
closed-form cost increases, and then checks every formula against a
paired common-random-number Monte-Carlo estimate.

    python3 demos/scalar_channel_attack.py
"""

import numpy as np

from dropattack import (
    ChannelSpec,
    DetectionSpec,
    Protocol,
    attack_context,
    build_prediction_ensemble,
    cost_increase_alpha0,
    cost_increase_alpha1_tcp,
    cost_increase_alpha1_udp,
    cost_increase_alphamax_udp,
    empirical_increase,
    expected_attacked_cost,
    feedback_benefit,
    nominal_expected_cost,
    optimal_alpha_tcp,
    optimal_alpha_udp,
    perfect_channel_condition_tcp,
    SystemModel,
)

HORIZON = 5

model = SystemModel(
    A=np.array([[1.03, 0.005], [0.35, 0.5]]),
    B=np.array([[1.0], [1.0]]),
    Q=np.eye(2),
    state_penalty=np.eye(HORIZON * 2),
    input_penalty=np.eye(HORIZON * 1),
    noise_cov=0.01 * np.eye(2),
    init_cov=0.01 * np.eye(2),
    init_mean=np.array([1.0, 1.0]),
    horizon=HORIZON,
)
channel = ChannelSpec(mean_diag=np.array([0.7]))
detection = DetectionSpec(tol_diag=np.array([0.1]))
x = np.array([1.0, 1.0])


def describe(protocol):
    print(f"\n=== {protocol.value}-like loop " + "=" * 40)
    ens = build_prediction_ensemble(model)
    ctx = attack_context(ens, model, channel, detection, protocol, x)
    lo, hi = ctx.require_region()
    baseline = nominal_expected_cost(ens, model, ctx.gain, x)
    print(f"admissible rate band      [{lo:.2f}, {hi:.2f}]")
    print(f"nominal expected cost     {baseline:.4f}")
    print(f"feedback benefit          {feedback_benefit(ctx):.4f}")

    if protocol is Protocol.UDP_LIKE:
        char = optimal_alpha_udp(ctx)
    else:
        char = optimal_alpha_tcp(ctx)
    print(f"objective curvature class {char.convexity.value}")
    print(f"best stationary rate      {char.alpha_star:.4f}"
          f"   (objective {char.objective_star:+.4f})")

    # closed-form increases at the band edges and notable interior points
    reports = [cost_increase_alpha0(ctx, model)]
    if protocol is Protocol.UDP_LIKE:
        reports.append(cost_increase_alpha1_udp(ctx, model))
        if char.convexity.value == "concave":
            reports.append(cost_increase_alphamax_udp(ctx, model))
    else:
        reports.append(cost_increase_alpha1_tcp(ctx, model))
    print("\nclosed-form cost increases")
    for report in reports:
        print(f"  {report.regime:<10} increase {report.increase:+9.4f}")

    attacked = expected_attacked_cost(ctx, model, char.alpha_star)
    print(f"\nexpected cost at the best stationary rate  {attacked:.4f}"
          f"  (+{attacked - baseline:.4f})")

    # paired Monte-Carlo check of the same closed forms
    print("\npaired Monte-Carlo validation (1e5 samples)")
    checks = [("all-drop", 0.0, cost_increase_alpha0(ctx, model).increase)]
    if protocol is Protocol.UDP_LIKE:
        checks.append(
            ("flooding", 1.0, cost_increase_alpha1_udp(ctx, model).increase))
    else:
        checks.append(
            ("flooding", 1.0, cost_increase_alpha1_tcp(ctx, model).increase))
    checks.append(("optimum", char.alpha_star,
                   attacked - baseline))
    for name, alpha, analytic in checks:
        mean, se = empirical_increase(
            ens, model, ctx.gain, x, alpha, samples=100_000, seed=7)
        z = (mean - analytic) / se if se > 0 else 0.0
        print(f"  {name:<10} alpha={alpha:5.3f}  analytic {analytic:+9.4f}"
              f"  empirical {mean:+9.4f} +- {se:.4f}  (z {z:+.2f})")

    if protocol is Protocol.TCP_LIKE:
        report = perfect_channel_condition_tcp(ctx)
        print("\nflooding check: does a perfect channel raise the cost here?")
        print(f"  objective at rate 1     {report.objective_at_one:+.4f}")
        print(f"  state-independent part  "
              f"{'positive definite' if report.matrix_definite else 'indefinite'}"
              f"  (min eigenvalue {report.min_eigenvalue:+.4f})")


def main():
    print("plant: two states, one lossy actuation channel, horizon", HORIZON)
    print("channel delivery rate 0.7, monitor tolerance 0.1")
    for protocol in (Protocol.UDP_LIKE, Protocol.TCP_LIKE):
        describe(protocol)


if __name__ == "__main__":
    main()
