"""Command-line front end.

Subcommands:

    synthesize  characterize and synthesize attacks at the initial mean
    simulate    Monte-Carlo closed-loop runs under the configured attack
    analyze     closed-form cost reports, optionally cross-checked by
                paired horizon sampling (--empirical N)
    compare     Monte-Carlo comparison across attack kinds with shared
                random numbers

All subcommands read one JSON experiment file (--config) and write their
outputs into --out (default: current directory).  Outputs are
deterministic for a fixed config: floats are serialized with %.17g and no
timestamps are emitted.  Exit codes: 0 success, 2 configuration problem,
3 numerical failure, 4 infeasible attack region.  Log verbosity comes
from the DROPATTACK_LOG environment variable (DEBUG, INFO, WARNING, ...).
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .attack_iid import (
    attack_context,
    optimal_alpha_tcp,
    optimal_alpha_udp,
    perfect_channel_condition_tcp,
    tcp_objective_coeffs,
    trough_alpha_tcp,
    udp_objective_coeffs,
)
from .attack_qp import build_qp_tcp, build_qp_udp, solve_box_qp_max, solve_iid_constrained
from .config import load_experiment
from .controller import Protocol, control_gain, nominal_expected_cost
from .costs import (
    cost_increase_alpha0,
    cost_increase_alpha1_tcp,
    cost_increase_alpha1_udp,
    cost_increase_alphamax_udp,
    expected_attacked_cost,
    feedback_benefit,
)
from .errors import ConfigError, DimensionError, InfeasibleRegionError, NumericalError
from .model import build_prediction_ensemble
from .simulate import AttackPlan, empirical_increase, monte_carlo, resolve_attack

__all__ = ["main"]

log = logging.getLogger("dropattack.cli")


# ------------------------------------------------------------- serializers

def _json_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not np.isfinite(value):
            return "null"
        return format(value, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json_text(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v, indent) for v in obj) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [
            f'{pad}  {json.dumps(str(k))}: {_json_text(v, indent + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path: str, obj) -> None:
    with open(path, "w") as handle:
        handle.write(_json_text(obj) + "\n")
    log.info("wrote %s", path)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_trace_csv(path: str, mean_states, mean_cumulative) -> None:
    n = mean_states.shape[1]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step"] + [f"x{i + 1}" for i in range(n)] + ["cost"])
        for k in range(mean_states.shape[0]):
            cost = 0.0 if k == 0 else mean_cumulative[k - 1]
            writer.writerow(
                [k] + [_fmt(v) for v in mean_states[k]] + [_fmt(cost)]
            )
    log.info("wrote %s", path)


def _write_realizations_csv(path: str, reports: dict) -> None:
    """One row per realization, one terminal-cost column per attack kind."""
    kinds = list(reports)
    counts = {report.realizations for report in reports.values()}
    rows = max(counts)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["realization"] + [f"terminal_cost_{kind}" for kind in kinds]
        )
        for r in range(rows):
            writer.writerow(
                [r] + [_fmt(reports[k].terminal_costs[r]) for k in kinds]
            )
    log.info("wrote %s", path)


def _report_json(report) -> dict:
    return {
        "regime": report.regime,
        "protocol": report.protocol.value,
        "baseline": report.baseline,
        "attacked": report.attacked,
        "increase": report.increase,
        "details": report.details,
    }


def _characterization_json(char) -> dict:
    return {
        "protocol": char.protocol.value,
        "convexity": char.convexity.name.lower(),
        "alpha_star": char.alpha_star,
        "objective_star": char.objective_star,
        "candidates": [
            {"alpha": alpha, "objective": value}
            for alpha, value in char.candidates
        ],
        "alpha_peak": char.alpha_peak,
        "curvature": char.curvature,
        "degenerate": char.degenerate,
    }


def _aggregate_json(report) -> dict:
    return {
        "realizations": report.realizations,
        "mean_terminal_cost": report.mean_terminal,
        "se_terminal_cost": report.se_terminal,
        "detection_rate": report.detection_rate,
        "mean_first_detection": report.mean_first_detection,
        "attack": report.attack_info,
    }


# ------------------------------------------------------------- subcommands

def _cmd_synthesize(args) -> int:
    exp = load_experiment(args.config)
    model = exp.model
    ens = build_prediction_ensemble(model)
    gain = control_gain(ens, model, exp.channel.mean_diag, exp.protocol)
    x = model.init_mean
    ctx = attack_context(
        ens, model, exp.channel, exp.detection, exp.protocol, x, gain
    )

    out = {
        "protocol": exp.protocol.value,
        "state": x,
        "nominal_rates": exp.channel.mean_diag,
        "region": {
            "per_channel_lo": ctx.channel_lo,
            "per_channel_hi": ctx.channel_hi,
            "scalar_lo": None if ctx.region is None else ctx.region[0],
            "scalar_hi": None if ctx.region is None else ctx.region[1],
        },
    }

    if ctx.region is not None:
        char = (
            optimal_alpha_udp(ctx)
            if exp.protocol is Protocol.UDP_LIKE
            else optimal_alpha_tcp(ctx)
        )
        out["iid_scalar"] = _characterization_json(char)
    else:
        out["iid_scalar"] = None

    qp = build_qp_udp(ctx) if exp.protocol is Protocol.UDP_LIKE else build_qp_tcp(ctx)
    iid_sol = solve_iid_constrained(qp)
    sched_sol = solve_box_qp_max(qp)
    out["iid_per_channel"] = {
        "means": iid_sol.means[0],
        "objective": iid_sol.objective,
        "winner": iid_sol.winner,
    }
    out["nonstationary"] = {
        "schedule": sched_sol.means,
        "objective": sched_sol.objective,
        "winner": sched_sol.winner,
        "stationarity": sched_sol.stationarity,
    }

    if exp.protocol is Protocol.TCP_LIKE:
        perfect = perfect_channel_condition_tcp(ctx)
        out["perfect_channel"] = {
            "state_positive": perfect.state_positive,
            "objective_at_one": perfect.objective_at_one,
            "matrix_definite": perfect.matrix_definite,
            "min_eigenvalue": perfect.min_eigenvalue,
        }

    baseline = nominal_expected_cost(ens, model, gain, x)
    out["cost"] = {
        "baseline": baseline,
        "feedback_benefit": feedback_benefit(ctx),
        "attacked_iid_per_channel": baseline + iid_sol.objective
        - qp.objective(qp.nominal),
        "attacked_nonstationary": baseline + sched_sol.objective
        - qp.objective(qp.nominal),
    }

    _write_json(os.path.join(args.out, "synthesis.json"), out)
    return 0


def _cmd_simulate(args) -> int:
    exp = load_experiment(args.config)
    realizations = args.realizations or exp.realizations
    report = monte_carlo(exp.episode(), realizations)
    _write_json(
        os.path.join(args.out, "aggregate.json"), _aggregate_json(report)
    )
    _write_trace_csv(
        os.path.join(args.out, "trace_mean.csv"),
        report.mean_states,
        report.mean_cumulative,
    )
    _write_realizations_csv(
        os.path.join(args.out, "realizations.csv"),
        {exp.plan.kind: report},
    )
    return 0


def _cmd_analyze(args) -> int:
    exp = load_experiment(args.config)
    model = exp.model
    ens = build_prediction_ensemble(model)
    gain = control_gain(ens, model, exp.channel.mean_diag, exp.protocol)
    x = model.init_mean
    ctx = attack_context(
        ens, model, exp.channel, exp.detection, exp.protocol, x, gain
    )
    udp = exp.protocol is Protocol.UDP_LIKE

    regimes = {"alpha_0": _report_json(cost_increase_alpha0(ctx, model))}
    if udp:
        regimes["alpha_1"] = _report_json(cost_increase_alpha1_udp(ctx, model))
        coeffs = udp_objective_coeffs(ctx)
        if coeffs.curvature < 0:
            regimes["alpha_peak"] = _report_json(
                cost_increase_alphamax_udp(ctx, model)
            )
    else:
        regimes["alpha_1"] = _report_json(cost_increase_alpha1_tcp(ctx, model))

    out = {
        "protocol": exp.protocol.value,
        "state": x,
        "baseline_expected_cost": nominal_expected_cost(ens, model, gain, x),
        "feedback_benefit": feedback_benefit(ctx),
        "regimes": regimes,
    }

    if ctx.region is not None:
        char = optimal_alpha_udp(ctx) if udp else optimal_alpha_tcp(ctx)
        optimal = {
            "characterization": _characterization_json(char),
            "expected_cost": expected_attacked_cost(
                ctx, model, char.alpha_star
            ),
        }
        if not udp:
            coeffs = tcp_objective_coeffs(ctx)
            if coeffs.curvature > 0:
                optimal["trough_alpha"] = trough_alpha_tcp(ctx, coeffs)
        out["optimal_iid"] = optimal
    else:
        out["optimal_iid"] = None

    if args.empirical:
        samples = args.empirical
        empirical = {}
        if ctx.region is not None:
            char = optimal_alpha_udp(ctx) if udp else optimal_alpha_tcp(ctx)
            mean, se = empirical_increase(
                ens, model, gain, x, char.alpha_star, samples, exp.seed
            )
            empirical["optimal_iid"] = {
                "alpha": char.alpha_star,
                "analytic_increase": char.objective_star
                + feedback_benefit(ctx),
                "empirical_increase": mean,
                "standard_error": se,
                "samples": samples,
            }
        qp = build_qp_udp(ctx) if udp else build_qp_tcp(ctx)
        sched = solve_box_qp_max(qp)
        mean, se = empirical_increase(
            ens, model, gain, x, sched.means, samples, exp.seed
        )
        empirical["nonstationary"] = {
            "analytic_increase": sched.objective - qp.objective(qp.nominal),
            "empirical_increase": mean,
            "standard_error": se,
            "samples": samples,
        }
        out["empirical"] = empirical
    else:
        out["empirical"] = None

    _write_json(os.path.join(args.out, "cost_report.json"), out)
    return 0


def _plan_for_kind(base: AttackPlan, kind: str) -> AttackPlan:
    if kind == "none":
        return AttackPlan(kind="none")
    if kind == "iid":
        return AttackPlan(
            kind="iid",
            onset=base.onset,
            alpha=base.alpha,
            means=base.means,
            state_mode=base.state_mode,
        )
    return AttackPlan(
        kind="nonstat",
        onset=base.onset,
        schedule=base.schedule,
        state_mode=base.state_mode,
        resynthesize=base.resynthesize,
    )


def _cmd_compare(args) -> int:
    exp = load_experiment(args.config)
    kinds = [kind.strip() for kind in args.attacks.split(",") if kind.strip()]
    valid = ("none", "iid", "nonstat")
    bad = [kind for kind in kinds if kind not in valid]
    if bad:
        raise ConfigError(
            [f"--attacks: unknown kind '{kind}'" for kind in bad]
        )
    realizations = args.realizations or exp.realizations

    reports = {}
    for kind in kinds:
        cfg = exp.episode(plan=_plan_for_kind(exp.plan, kind))
        reports[kind] = monte_carlo(cfg, realizations)
        log.info(
            "%s: mean terminal cost %.6g (se %.2g)",
            kind, reports[kind].mean_terminal, reports[kind].se_terminal,
        )

    out = {
        "protocol": exp.protocol.value,
        "realizations": realizations,
        "horizon_steps": exp.T,
        "attacks": {kind: _aggregate_json(reports[kind]) for kind in kinds},
    }
    # paired differences: arms share noise and loss uniforms per realization
    diffs = {}
    for i, a in enumerate(kinds):
        for b in kinds[i + 1:]:
            delta = reports[b].terminal_costs - reports[a].terminal_costs
            diffs[f"{b}_minus_{a}"] = {
                "mean": float(np.mean(delta)),
                "se": float(np.std(delta, ddof=1) / np.sqrt(delta.size))
                if delta.size > 1 else 0.0,
            }
    out["paired_differences"] = diffs

    _write_json(os.path.join(args.out, "comparison.json"), out)
    _write_realizations_csv(
        os.path.join(args.out, "realizations.csv"), reports
    )
    return 0


# ------------------------------------------------------------------ driver

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dropattack",
        description=(
            "Simulation and attack synthesis for linear control over "
            "lossy actuation channels."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", default=".", help="output directory")

    p_syn = sub.add_parser(
        "synthesize", help="characterize and synthesize attacks"
    )
    common(p_syn)
    p_syn.set_defaults(func=_cmd_synthesize)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo closed-loop runs")
    common(p_sim)
    p_sim.add_argument(
        "--realizations", type=int, default=0,
        help="override the config's realization count",
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_ana = sub.add_parser("analyze", help="closed-form cost reports")
    common(p_ana)
    p_ana.add_argument(
        "--empirical", type=int, default=0, metavar="SAMPLES",
        help="cross-check increases with paired horizon sampling",
    )
    p_ana.set_defaults(func=_cmd_analyze)

    p_cmp = sub.add_parser(
        "compare", help="Monte-Carlo comparison across attack kinds"
    )
    common(p_cmp)
    p_cmp.add_argument(
        "--attacks", default="none,iid,nonstat",
        help="comma-separated attack kinds (none, iid, nonstat)",
    )
    p_cmp.add_argument(
        "--realizations", type=int, default=0,
        help="override the config's realization count",
    )
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("DROPATTACK_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DimensionError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except InfeasibleRegionError as exc:
        print(f"infeasible attack region: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
