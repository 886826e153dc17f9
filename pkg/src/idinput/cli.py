"""Command-line surface.

Subcommands: identify, plan, simulate, benchmark, signals.  Exit codes:
0 success, 2 configuration problems, 3 numerical failures, 4 infeasible
planning problems.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, config as cfgmod, dmdc, harness, planner, results
from .core import assemble_data, estimate_noise_scale, estimate_theta, gamma_matrix, rmse
from .errors import ConfigError, PlannerError, RankDeficiencyError, SignalError, SizeError, TruncationError

log = logging.getLogger("idinput")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

_NUMERICAL_ERRORS = (
    RankDeficiencyError,
    TruncationError,
    SizeError,
    SignalError,
    PlannerError,
    np.linalg.LinAlgError,
)


def _out_dir(args, cfg=None) -> Path:
    if args.out is not None:
        return Path(args.out)
    if cfg is not None:
        return Path(cfg.out_dir)
    return Path("results")


def _load_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.parse_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    return cfg


def cmd_identify(args) -> int:
    traj, _ = results.read_trajectory(args.data_file)
    data = assemble_data(traj)
    sigma = args.sigma if args.sigma is not None else estimate_noise_scale(data)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    if args.dmdc:
        p, r = dmdc.choose_ranks(data, args.energy)
        model = dmdc.reduce(data, p, r)
        gamma = gamma_matrix(dmdc.reduce_data(model, data).Z, sigma)
        trace_g = float(np.trace(gamma))
        rmse_val = float(np.sqrt(trace_g / (r + traj.m)))
        print(f"reduced Theta_hat: {r} x {r + traj.m} (p={p}, r={r}, full n={traj.n})")
        path = results.write_model(out / "model.json", model, sigma=sigma)
    else:
        est = estimate_theta(data, sigma)
        trace_g = float(np.trace(est.gamma))
        rmse_val = rmse(est)
        print(f"Theta_hat: {traj.n} x {traj.n + traj.m}")
        path = results.write_model(out / "model.json", est)
    print(f"sigma: {sigma!r}")
    print(f"trace_gamma: {trace_g!r}")
    print(f"rmse_predicted: {rmse_val!r}")
    log.info("model written to %s", path)
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    if cfg.data is None:
        raise ConfigError("plan requires a 'data' trajectory path in the config")
    method = cfg.methods[0]
    if method not in ("sdp", "lp"):
        raise ConfigError(f"plan requires methods[0] to be 'sdp' or 'lp', got {method!r}")
    model, sigma = results.read_model(args.model_file)
    data_path = Path(cfg.data)
    if not data_path.is_absolute():
        data_path = Path(args.config).parent / data_path
    traj, _ = results.read_trajectory(data_path)
    data = assemble_data(traj)
    cons = cfgmod.build_constraints(cfg)
    if isinstance(model, dmdc.ReducedModel):
        z_past = dmdc.reduce_data(model, data).Z
        x_init = model.basis.T @ traj.states[-1]
        x_lo = x_hi = None
    else:
        z_past = data.Z
        x_init = traj.states[-1]
        x_lo, x_hi = cons.x_lo, cons.x_hi
    m = traj.m
    problem = planner.PlanProblem(
        model=model,
        Z_past=z_past,
        x_init=x_init,
        horizon=cfg.horizon,
        u_lo=cons.u_lo * np.ones(m),
        u_hi=cons.u_hi * np.ones(m),
        du_max=cons.du_max * np.ones(m),
        u_prev=traj.inputs[-1],
        sigma=cfg.sigma if cfg.sigma is not None else sigma,
        beta=cons.beta,
        x_lo=x_lo,
        x_hi=x_hi,
    )
    result = planner.ccp(problem, objective=method, max_iter=cfg.ccp_max_iter, tol=cfg.ccp_tol)
    if result.solver_status == "infeasible":
        print("planning problem is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = _out_dir(args, cfg)
    written = results.write_plan(out, result.inputs, result.predicted_states, cfg.dt)
    print(f"objective tr(W^-1): {result.objective_true!r} after {result.ccp_iterations} iterations")
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    method = cfg.methods[0]
    if len(cfg.methods) > 1:
        log.info("simulate uses the first configured method: %s", method)
    plant = cfgmod.build_plant(cfg)
    cons = cfgmod.build_constraints(cfg)
    rec = harness.run_experiment(
        plant,
        method,
        cfg.epochs,
        cfg.horizon,
        cons,
        seed=(cfg.master_seed, 0),
        **cfgmod.run_kwargs(cfg),
    )
    out = _out_dir(args, cfg)
    for path in results.write_results(out, run=rec, timings=args.timings):
        log.info("wrote %s", path)
    final = rec.logs[-1]
    print(f"method={method} epochs={cfg.epochs} k={final.k}")
    print(f"final trace_gamma: {final.trace_gamma!r}")
    print(f"final rmse_true: {final.rmse_true!r}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    plant = cfgmod.build_plant(cfg)
    cons = cfgmod.build_constraints(cfg)
    bench = harness.benchmark(
        plant,
        cfg.methods,
        cfg.seeds,
        cfg.epochs,
        cfg.horizon,
        cons,
        master_seed=cfg.master_seed,
        **cfgmod.run_kwargs(cfg),
    )
    out = _out_dir(args, cfg)
    for path in results.write_results(out, bench=bench, timings=args.timings):
        log.info("wrote %s", path)
    for s in bench.summaries:
        print(
            f"{s.method:10s} trace_gamma={s.trace_gamma_median:.6g} "
            f"rmse_true={s.rmse_true_median:.6g} wallclock={s.wallclock_median:.4f}s"
        )
    return EXIT_OK


def cmd_signals(args) -> int:
    cfg = _load_config(args)
    cons = cfgmod.build_constraints(cfg)
    spec = baselines.SignalSpec(
        horizon=cfg.horizon,
        dt=cfg.dt,
        m=cfg.plant.m,
        u_lo=cons.u_lo,
        u_hi=cons.u_hi,
        du_max=cons.du_max,
        seed=(cfg.master_seed, cfgmod._MULTISINE_STREAM if args.method == "multisine" else 1),
    )
    if args.method == "random":
        u = baselines.random_inputs(spec)
    elif args.method == "prbs":
        u = baselines.prbs(spec, hold_steps=cfg.prbs_hold)
    else:
        u = baselines.multisine(
            spec,
            num_components=cfg.multisine.num_components,
            freq_band_hz=None if cfg.multisine.freq_band_hz is None else tuple(cfg.multisine.freq_band_hz),
            rpf_iters=cfg.multisine.rpf_iters,
        ).inputs
    score = baselines.score_signal(u)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    results.write_signal(out / f"signal_{args.method}.csv", u, cfg.dt)
    results.write_signal_scores(out / f"signal_scores_{args.method}.csv", {args.method: score})
    for c in range(cfg.plant.m):
        rpf_txt = "nan(constant)" if score.degenerate[c] else f"{score.rpf[c]:.4f}"
        print(f"channel {c + 1}: rpf={rpf_txt} max_diff={score.max_diff[c]:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idinput", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="override the config master seed")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--verbose", "-v", action="store_true")
    parser.add_argument(
        "--timings", action="store_true", help="include wallclock columns (non-reproducible) in output files"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="least-squares fit from a trajectory file")
    p.add_argument("data_file")
    p.add_argument("--sigma", type=float, default=None, help="noise scale; estimated from residuals if omitted")
    p.add_argument("--dmdc", action="store_true", help="fit a reduced DMDc model")
    p.add_argument("--energy", type=float, default=0.99, help="singular-value energy for rank selection")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("plan", help="design future inputs from a model file")
    p.add_argument("model_file")
    p.add_argument("config")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run one method end-to-end on a synthetic plant")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="compare methods over seeds")
    p.add_argument("config")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("signals", help="emit a baseline signal and its scores")
    p.add_argument("config")
    p.add_argument("--method", required=True, choices=["prbs", "multisine", "random"])
    p.set_defaults(func=cmd_signals)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
