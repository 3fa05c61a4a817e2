"""Command-line interface: planar tracking demo and model-file pipelines."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import baselines, forward
from .backward import backward_pass, likelihood_moments
from .model import (
    Proper,
    attach_observations,
    load_model,
    simulate,
    validate,
    wiener_acceleration_model,
)


@dataclass
class DemoConfig:
    dt: float = 1.0
    horizon: int = 256
    first_obs_index: int = 127
    sigma1: float = 1.0
    sigma2: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    seed: int = 0
    reference_initial_state: tuple = (0.0, 1.0, 0.0, 0.0, 1.0, 0.0)
    output_path: str = "demo.csv"
    estimator: str = "both"  # smoother | mle | both
    replications: int = 1


def _position_stats(marginal):
    mean = np.array([marginal.mean[0], marginal.mean[3]])
    var = np.array([max(marginal.cov[0, 0], 0.0), max(marginal.cov[3, 3], 0.0)])
    return mean, 2.0 * np.sqrt(var)


def run_demo_single(config, seed):
    """One replication: simulate, smooth with a flat prior, per-time MLE.

    Returns a dict with per-time arrays and summary error metrics.
    """
    big_t = config.horizon
    inference_model = wiener_acceleration_model(
        config.dt,
        (config.sigma1, config.sigma2),
        (config.lambda1, config.lambda2),
        big_t,
        config.first_obs_index,
    )
    ref = np.asarray(config.reference_initial_state, dtype=float)
    sim_model = replace(inference_model, initial=Proper(ref, np.zeros((6, 6))))
    states, ys = simulate(sim_model, seed)
    inference_model = attach_observations(inference_model, ys)

    truth = np.array([[x[0], x[3]] for x in states])  # (T+1, 2)
    want_smooth = config.estimator in ("smoother", "both")
    want_mle = config.estimator in ("mle", "both")

    backward = backward_pass(inference_model)
    out = {"truth": truth, "observations": ys}

    if want_smooth:
        result = forward.smooth(inference_model, backward=backward)
        means, widths = zip(*(_position_stats(m) for m in result.marginals))
        out["smooth_mean"] = np.array(means)
        out["smooth_width"] = np.array(widths)
    if want_mle:
        means, widths = [], []
        for t in range(big_t + 1):
            est = baselines.stacked_mle(inference_model, t, backward=backward)
            means.append(np.array([est.mean[0], est.mean[3]]))
            widths.append(
                2.0 * np.sqrt(np.array([max(est.cov[0, 0], 0.0), max(est.cov[3, 3], 0.0)]))
            )
        out["mle_mean"] = np.array(means)
        out["mle_width"] = np.array(widths)

    prefix = slice(0, config.first_obs_index)  # t = 0..k0-1
    for key in ("smooth", "mle"):
        if f"{key}_mean" not in out:
            continue
        err = out[f"{key}_mean"] - truth
        out[f"{key}_rmse_prefix"] = float(np.sqrt(np.mean(err[prefix] ** 2)))
        out[f"{key}_rmse_overall"] = float(np.sqrt(np.mean(err**2)))
    if want_smooth:
        inside = np.abs(truth - out["smooth_mean"]) <= out["smooth_width"]
        out["coverage"] = float(np.mean(inside))
    return out


def _write_detail_csv(path, config, rep):
    big_t = config.horizon
    header = [
        "t",
        "true_pos1",
        "true_pos2",
        "obs1",
        "obs2",
        "smooth_mean1",
        "smooth_mean2",
        "smooth_2sigma1",
        "smooth_2sigma2",
        "mle_mean1",
        "mle_mean2",
        "mle_2sigma1",
        "mle_2sigma2",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(big_t + 1):
            row = [t, repr(rep["truth"][t, 0]), repr(rep["truth"][t, 1])]
            y = rep["observations"][t - 1] if t >= 1 else None
            row += ["", ""] if y is None else [repr(y[0]), repr(y[1])]
            for key in ("smooth", "mle"):
                if f"{key}_mean" in rep:
                    row += [
                        repr(rep[f"{key}_mean"][t, 0]),
                        repr(rep[f"{key}_mean"][t, 1]),
                        repr(rep[f"{key}_width"][t, 0]),
                        repr(rep[f"{key}_width"][t, 1]),
                    ]
                else:
                    row += ["", "", "", ""]
            writer.writerow(row)


def run_demo(config):
    """Run the tracking demo and write result files.

    One replication writes the per-time detail CSV; several replications
    write a per-replication summary CSV instead. Returns a summary dict.
    """
    if config.estimator not in ("smoother", "mle", "both"):
        raise ValueError(f"unknown estimator {config.estimator!r}")
    if config.replications < 1:
        raise ValueError("replications must be at least 1")

    reps = []
    for i in range(config.replications):
        reps.append(run_demo_single(config, config.seed + i))

    summary = {"replications": config.replications, "output": config.output_path}
    if config.replications == 1:
        _write_detail_csv(config.output_path, config, reps[0])
        for key in ("smooth", "mle"):
            if f"{key}_rmse_prefix" in reps[0]:
                summary[f"{key}_rmse_prefix"] = reps[0][f"{key}_rmse_prefix"]
                summary[f"{key}_rmse_overall"] = reps[0][f"{key}_rmse_overall"]
        if "coverage" in reps[0]:
            summary["coverage"] = reps[0]["coverage"]
    else:
        with open(config.output_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "seed",
                    "smooth_rmse_prefix",
                    "mle_rmse_prefix",
                    "smooth_rmse_overall",
                    "mle_rmse_overall",
                    "coverage",
                ]
            )
            for i, rep in enumerate(reps):
                writer.writerow(
                    [
                        config.seed + i,
                        repr(rep.get("smooth_rmse_prefix", "")),
                        repr(rep.get("mle_rmse_prefix", "")),
                        repr(rep.get("smooth_rmse_overall", "")),
                        repr(rep.get("mle_rmse_overall", "")),
                        repr(rep.get("coverage", "")),
                    ]
                )
        if config.estimator == "both":
            wins = [
                rep["smooth_rmse_prefix"] <= rep["mle_rmse_prefix"] for rep in reps
            ]
            summary["smoother_beats_mle_fraction"] = float(np.mean(wins))
        if config.estimator in ("smoother", "both"):
            summary["mean_coverage"] = float(
                np.mean([rep["coverage"] for rep in reps])
            )
    return summary


PIPELINES = ("filter", "smoother", "two-filter", "backward-only", "evidence")


def _marginal_rows(marginals):
    rows = []
    for t, marg in enumerate(marginals):
        rows.append(
            [t]
            + [repr(v) for v in marg.mean]
            + [repr(v) for v in np.diag(marg.cov)]
        )
    return rows


def run_model_file(path, pipeline, output_prefix):
    """Run the requested pipeline on a JSON model file.

    Writes ``<prefix>.csv`` (per-time results) and ``<prefix>.json`` (a
    summary including the log marginal likelihood). Returns the summary.
    """
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}; choose from {PIPELINES}")
    mdl = load_model(path)
    violations = validate(mdl)
    if violations:
        raise ValueError("model validation failed:\n" + "\n".join(violations))

    n = mdl.state_dim
    summary = {
        "pipeline": pipeline,
        "state_dim": n,
        "horizon": mdl.horizon,
        "log_marginal_likelihood": None,
    }
    rows = None

    if pipeline == "filter":
        kal = baselines.kalman_filter(mdl)
        rows = _marginal_rows(kal.filtered)
        summary["log_marginal_likelihood"] = kal.log_likelihood
    elif pipeline == "smoother":
        result = forward.smooth(mdl)
        rows = _marginal_rows(result.marginals)
        summary["log_marginal_likelihood"] = (
            "infinite"
            if math.isinf(result.log_marginal_likelihood)
            else result.log_marginal_likelihood
        )
    elif pipeline == "two-filter":
        kal = baselines.kalman_filter(mdl)
        backward = backward_pass(mdl)
        from .backward import LogQuadLikelihood

        marginals = []
        for t in range(mdl.horizon + 1):
            future = (
                backward.likelihood_given_prev[t]
                if t < mdl.horizon
                else LogQuadLikelihood.empty(n)
            )
            marginals.append(baselines.two_filter_combine(kal.filtered[t], future))
        rows = _marginal_rows(marginals)
        summary["log_marginal_likelihood"] = kal.log_likelihood
    elif pipeline == "backward-only":
        backward = backward_pass(mdl)
        rows = []
        for t in range(mdl.horizon + 1):
            lik = (
                backward.initial_likelihood
                if t == 0
                else backward.likelihood_given_t[t - 1]
            )
            est = likelihood_moments(lik)
            rows.append(
                [t, lik.m_bar, repr(lik.log_c), est.rank]
                + [repr(v) for v in est.mean]
            )
    else:  # evidence
        backward = backward_pass(mdl)
        _, log_l = forward.fuse_initial(backward.initial_likelihood, mdl.initial)
        summary["log_marginal_likelihood"] = (
            "infinite" if math.isinf(log_l) else log_l
        )

    if rows is not None:
        header = (
            ["t", "m_bar", "log_c", "rank"] + [f"mle_{i}" for i in range(n)]
            if pipeline == "backward-only"
            else ["t"] + [f"mean_{i}" for i in range(n)] + [f"var_{i}" for i in range(n)]
        )
        with open(output_prefix + ".csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        summary["csv"] = output_prefix + ".csv"
    with open(output_prefix + ".json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gmsmooth",
        description="Backward-forward smoothing for Gauss-Markov models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo", help="planar tracking demo with a flat prior")
    demo.add_argument("--dt", type=float, default=1.0)
    demo.add_argument("--horizon", type=int, default=256)
    demo.add_argument("--first-obs-index", type=int, default=127)
    demo.add_argument("--sigma1", type=float, default=1.0)
    demo.add_argument("--sigma2", type=float, default=1.0)
    demo.add_argument("--lambda1", type=float, default=1.0)
    demo.add_argument("--lambda2", type=float, default=1.0)
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument(
        "--reference-initial-state",
        type=float,
        nargs=6,
        default=[0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        metavar=("P1", "V1", "A1", "P2", "V2", "A2"),
    )
    demo.add_argument("--estimator", choices=["smoother", "mle", "both"], default="both")
    demo.add_argument("--replications", type=int, default=1)
    demo.add_argument("--output", default="demo.csv")

    run = sub.add_parser("run", help="run a pipeline on a JSON model file")
    run.add_argument("model_file")
    run.add_argument("--pipeline", choices=list(PIPELINES), default="smoother")
    run.add_argument("--output", default="result", help="output file prefix")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "demo":
            config = DemoConfig(
                dt=args.dt,
                horizon=args.horizon,
                first_obs_index=args.first_obs_index,
                sigma1=args.sigma1,
                sigma2=args.sigma2,
                lambda1=args.lambda1,
                lambda2=args.lambda2,
                seed=args.seed,
                reference_initial_state=tuple(args.reference_initial_state),
                output_path=args.output,
                estimator=args.estimator,
                replications=args.replications,
            )
            summary = run_demo(config)
        else:
            summary = run_model_file(args.model_file, args.pipeline, args.output)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for key, value in summary.items():
        print(f"{key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
