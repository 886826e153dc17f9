"""Synthetic plants and the iterative estimate-plan-execute loop.

A run alternates between refitting the model on all data collected so
far, designing the next block of inputs (adaptive planner or one of the
baseline generators), applying it to the plant, and appending the new
measurements.  When the state dimension exceeds a cutoff the fit and
the planning problem move to reduced DMDc coordinates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, dmdc, planner
from .core import DataMatrices, Trajectory, assemble_data, estimate_theta, gamma_matrix, rmse

METHODS = ("sdp", "lp", "random", "prbs", "multisine")

# Stable per-method stream offsets so seeding is independent of call order.
_METHOD_IDS = {name: i + 1 for i, name in enumerate(METHODS)}


@dataclass(frozen=True)
class Plant:
    """Ground-truth linear system x_{t+1} = A x_t + B u_t + v_t."""

    A: np.ndarray
    B: np.ndarray
    sigma: float
    x0: np.ndarray
    seed: int = 0
    kind: str = "lti"

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def theta(self) -> np.ndarray:
        return np.hstack([self.A, self.B])


@dataclass(frozen=True)
class Constraints:
    """Box, slew, and state-box limits shared by every design method."""

    u_lo: np.ndarray
    u_hi: np.ndarray
    du_max: np.ndarray
    x_lo: np.ndarray | None = None
    x_hi: np.ndarray | None = None
    beta: float = 1.0


@dataclass
class EpochLog:
    """Metrics after one estimate-plan-execute cycle.

    Epoch 0 is the initial-excitation fit; k counts committed data
    columns.  rmse_predicted is the covariance-based prediction,
    rmse_true the actual parameter error against the plant.
    """

    epoch: int
    k: int
    trace_gamma: float
    rmse_predicted: float
    rmse_true: float
    plan_wallclock: float
    solver_status: str
    constraint_margin_min: float
    ccp_iterations: int


@dataclass
class RunRecord:
    """Everything one experiment run produced."""

    method: str
    logs: list[EpochLog]
    trajectory: Trajectory
    designed: np.ndarray
    reduced: bool


@dataclass
class MethodSummary:
    method: str
    trace_gamma_median: float
    trace_gamma_iqr: float
    rmse_true_median: float
    rmse_true_iqr: float
    wallclock_median: float
    wallclock_iqr: float


@dataclass
class BenchmarkResult:
    summaries: list[MethodSummary]
    runs: dict = field(default_factory=dict)


def _scale_to_radius(A: np.ndarray, radius: float) -> np.ndarray:
    eigs = np.abs(np.linalg.eigvals(A))
    top = eigs.max()
    return A * (radius / top) if top > 0 else A


def make_random_plant(
    n: int, m: int, sigma: float, spectral_radius: float = 0.95, seed: int = 0
) -> Plant:
    """Dense random plant, rescaled to the requested spectral radius."""
    rng = np.random.default_rng(seed)
    A = _scale_to_radius(rng.normal(size=(n, n)) / np.sqrt(n), spectral_radius)
    B = rng.normal(size=(n, m)) / np.sqrt(n)
    return Plant(A=A, B=B, sigma=sigma, x0=np.zeros(n), seed=seed)


def make_highdim_plant(
    n: int,
    m: int,
    latent_rank: int,
    sigma: float,
    spectral_radius: float = 0.95,
    seed: int = 0,
) -> Plant:
    """High-dimensional plant with low-rank dynamics.

    A = Q A_z Q^T and B = Q B_z for an orthonormal Q (n x latent_rank)
    and a random stable latent system (A_z, B_z); the observed state
    lives near an r-dimensional subspace up to the process noise.
    """
    if latent_rank >= n:
        raise ValueError("latent_rank must be smaller than n")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, latent_rank)))
    Az = _scale_to_radius(rng.normal(size=(latent_rank, latent_rank)) / np.sqrt(latent_rank), spectral_radius)
    Bz = rng.normal(size=(latent_rank, m)) / np.sqrt(latent_rank)
    return Plant(A=Q @ Az @ Q.T, B=Q @ Bz, sigma=sigma, x0=np.zeros(n), seed=seed, kind="lti_highdim")


def simulate_plant(
    plant: Plant,
    inputs: np.ndarray,
    rng: np.random.Generator | None = None,
    x0: np.ndarray | None = None,
    dt: float = 1.0,
) -> Trajectory:
    """Iterate the plant over an input sequence with i.i.d. Gaussian noise.

    Deterministic given the generator state (defaults to a fresh one
    from plant.seed).
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    steps = inputs.shape[0]
    if rng is None:
        rng = np.random.default_rng(plant.seed)
    x = np.asarray(plant.x0 if x0 is None else x0, dtype=float)
    states = np.empty((steps + 1, plant.n))
    states[0] = x
    for t in range(steps):
        noise = plant.sigma * rng.standard_normal(plant.n) if plant.sigma > 0 else 0.0
        x = plant.A @ x + plant.B @ inputs[t] + noise
        states[t + 1] = x
    return Trajectory(states=states, inputs=inputs, dt=dt)


def _signal_margin(constraints: Constraints, inputs: np.ndarray) -> float:
    """Box plus within-signal slew margin for generator outputs."""
    margins = []
    for v in (inputs - constraints.u_lo, constraints.u_hi - inputs):
        finite = np.isfinite(v)
        if finite.any():
            margins.append(v[finite].min())
    if inputs.shape[0] > 1:
        v = constraints.du_max - np.abs(np.diff(inputs, axis=0))
        finite = np.isfinite(v)
        if finite.any():
            margins.append(v[finite].min())
    return float(min(margins)) if margins else float("inf")


def _seed_tuple(seed) -> tuple:
    return (seed,) if isinstance(seed, (int, np.integer)) else tuple(seed)


def run_experiment(
    plant: Plant,
    method: str,
    epochs: int,
    horizon: int,
    constraints: Constraints,
    *,
    dt: float = 1.0,
    sigma: float | None = None,
    seed: int | tuple = 0,
    initial_excitation: int | np.ndarray | None = None,
    dmdc_cutoff: int = 50,
    dmdc_energy: float = 0.99,
    dmdc_ranks: tuple[int, int] | None = None,
    ccp_tol: float = 1e-4,
    ccp_max_iter: int = 20,
    multisine_components: int = 8,
    multisine_band: tuple[float, float] | None = None,
    multisine_rpf_iters: int = 50,
    multisine_seed: int | tuple | None = None,
    prbs_hold: int = 1,
) -> RunRecord:
    """Run ``epochs`` design-and-collect cycles of one method.

    Epoch 0 fits the initial slew-limited random excitation (length
    3(n+m) unless overridden); every later epoch refits, plans
    ``horizon`` inputs, executes them, and appends the data.  An
    infeasible planner epoch falls back to holding the last input.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if epochs < 0:
        raise ValueError("epochs must be nonnegative")
    n, m = plant.n, plant.m
    sigma_est = plant.sigma if sigma is None else sigma
    base = _seed_tuple(seed)
    noise_rng = np.random.default_rng(np.random.SeedSequence(base + (101,)))

    def signal_spec(length, stream):
        return baselines.SignalSpec(
            horizon=length,
            dt=dt,
            m=m,
            u_lo=constraints.u_lo,
            u_hi=constraints.u_hi,
            du_max=constraints.du_max,
            seed=base + stream,
        )

    if initial_excitation is None or isinstance(initial_excitation, (int, np.integer)):
        k0 = 3 * (n + m) if initial_excitation is None else int(initial_excitation)
        if k0 < n + m:
            raise ValueError(f"initial excitation must provide at least n+m={n + m} samples")
        u_init = baselines.random_inputs(signal_spec(k0, (202,)))
    else:
        u_init = np.atleast_2d(np.asarray(initial_excitation, dtype=float))
        k0 = u_init.shape[0]
        if k0 < n + m:
            raise ValueError(f"initial excitation must provide at least n+m={n + m} samples")

    traj = simulate_plant(plant, u_init, rng=noise_rng, x0=plant.x0, dt=dt)
    states = traj.states
    inputs = traj.inputs
    designed = [False] * k0
    use_dmdc = n > dmdc_cutoff
    logs: list[EpochLog] = []

    def fit(data: DataMatrices):
        """Returns (model, trace_gamma, rmse_pred, rmse_true)."""
        if not use_dmdc:
            est = estimate_theta(data, sigma_est)
            err = np.linalg.norm(est.theta - plant.theta) / np.sqrt(n * (n + m))
            return est, float(np.trace(est.gamma)), rmse(est), float(err)
        p, r = dmdc_ranks if dmdc_ranks is not None else dmdc.choose_ranks(data, dmdc_energy)
        model = dmdc.reduce(data, p, r)
        red = dmdc.reduce_data(model, data)
        gam = gamma_matrix(red.Z, sigma_est)
        trace_g = float(np.trace(gam))
        rmse_pred = float(np.sqrt(r * trace_g / (r * (r + m))))
        lifted = np.hstack([model.basis @ model.A @ model.basis.T, model.basis @ model.B])
        err = np.linalg.norm(lifted - plant.theta) / np.sqrt(n * (n + m))
        return model, trace_g, rmse_pred, float(err)

    def log_epoch(e, data, wall, status, margin, iters):
        _, trace_g, rmse_pred, rmse_true = fit(data)
        logs.append(
            EpochLog(
                epoch=e,
                k=data.k,
                trace_gamma=trace_g,
                rmse_predicted=rmse_pred,
                rmse_true=rmse_true,
                plan_wallclock=wall,
                solver_status=status,
                constraint_margin_min=margin,
                ccp_iterations=iters,
            )
        )

    log_epoch(0, assemble_data(Trajectory(states, inputs, dt)), 0.0, "initial", float("inf"), 0)

    for e in range(1, epochs + 1):
        data = assemble_data(Trajectory(states, inputs, dt))
        u_prev = inputs[-1]
        if method in ("sdp", "lp"):
            model, *_ = fit(data)
            if use_dmdc:
                z_past = dmdc.reduce_data(model, data).Z
                x_init = model.basis.T @ states[-1]
                x_lo = x_hi = None  # full-space boxes do not map to reduced boxes
            else:
                z_past = data.Z
                x_init = states[-1]
                x_lo, x_hi = constraints.x_lo, constraints.x_hi
            problem = planner.PlanProblem(
                model=model,
                Z_past=z_past,
                x_init=x_init,
                horizon=horizon,
                u_lo=constraints.u_lo * np.ones(m),
                u_hi=constraints.u_hi * np.ones(m),
                du_max=constraints.du_max * np.ones(m),
                u_prev=u_prev,
                sigma=sigma_est,
                beta=constraints.beta,
                x_lo=x_lo,
                x_hi=x_hi,
            )
            t0 = time.perf_counter()
            result = planner.ccp(problem, objective=method, max_iter=ccp_max_iter, tol=ccp_tol)
            wall = time.perf_counter() - t0
            if result.solver_status == "infeasible":
                u_plan = planner.initial_inputs(problem)
                status, iters = "infeasible", result.ccp_iterations
            else:
                u_plan = result.inputs
                status, iters = result.solver_status, result.ccp_iterations
            margin = planner.min_constraint_margin(problem, u_plan)
        else:
            t0 = time.perf_counter()
            if method == "random":
                u_plan = baselines.random_inputs(signal_spec(horizon, (_METHOD_IDS[method], e)))
            elif method == "prbs":
                u_plan = baselines.prbs(signal_spec(horizon, (_METHOD_IDS[method], e)), hold_steps=prbs_hold)
            else:
                # One fixed multisine per run: a phase redraw each epoch could
                # exceed a du_max that was derived from a different realization.
                spec = signal_spec(horizon, (_METHOD_IDS[method],))
                if multisine_seed is not None:
                    spec = replace(spec, seed=_seed_tuple(multisine_seed))
                u_plan = baselines.multisine(
                    spec,
                    num_components=multisine_components,
                    freq_band_hz=multisine_band,
                    rpf_iters=multisine_rpf_iters,
                ).inputs
            wall = time.perf_counter() - t0
            status, iters = "n/a", 0
            margin = _signal_margin(constraints, u_plan)

        segment = simulate_plant(plant, u_plan, rng=noise_rng, x0=states[-1], dt=dt)
        states = np.vstack([states, segment.states[1:]])
        inputs = np.vstack([inputs, u_plan])
        designed.extend([True] * horizon)
        log_epoch(e, assemble_data(Trajectory(states, inputs, dt)), wall, status, margin, iters)

    return RunRecord(
        method=method,
        logs=logs,
        trajectory=Trajectory(states=states, inputs=inputs, dt=dt),
        designed=np.array(designed, dtype=bool),
        reduced=use_dmdc,
    )


def _iqr(values: np.ndarray) -> float:
    return float(np.percentile(values, 75) - np.percentile(values, 25))


def benchmark(
    plant: Plant,
    methods: list[str],
    seeds: int,
    epochs: int,
    horizon: int,
    constraints: Constraints,
    master_seed: int = 0,
    **run_kwargs,
) -> BenchmarkResult:
    """Compare methods over noise seeds on one fixed plant.

    Each (method, seed index) run is seeded independently of method
    order; the plant noise stream depends only on the seed index, so
    every method faces identical initial data and disturbances.
    Summaries report median and IQR of the final trace_gamma, final
    rmse_true, and per-run mean planning wallclock.
    """
    if not methods:
        raise ValueError("at least one method is required")
    if seeds < 1:
        raise ValueError("at least one seed is required")
    # One multisine realization for the whole comparison, consistent with a
    # du_max that may have been derived from it.
    run_kwargs.setdefault("multisine_seed", (master_seed, 900))
    runs = {}
    summaries = []
    for method in methods:
        finals_g, finals_r, walls = [], [], []
        for i in range(seeds):
            rec = run_experiment(
                plant,
                method,
                epochs,
                horizon,
                constraints,
                seed=(master_seed, i),
                **run_kwargs,
            )
            runs[(method, i)] = rec
            finals_g.append(rec.logs[-1].trace_gamma)
            finals_r.append(rec.logs[-1].rmse_true)
            plan_walls = [log.plan_wallclock for log in rec.logs[1:]]
            walls.append(float(np.mean(plan_walls)) if plan_walls else 0.0)
        summaries.append(
            MethodSummary(
                method=method,
                trace_gamma_median=float(np.median(finals_g)),
                trace_gamma_iqr=_iqr(np.array(finals_g)),
                rmse_true_median=float(np.median(finals_r)),
                rmse_true_iqr=_iqr(np.array(finals_r)),
                wallclock_median=float(np.median(walls)),
                wallclock_iqr=_iqr(np.array(walls)),
            )
        )
    return BenchmarkResult(summaries=summaries, runs=runs)
