"""Plain-text result files: trajectories, epoch metrics, summaries, models.

Everything is comma-delimited with a header row and full double
precision (shortest round-trip repr), so written trajectories read back
bit-exactly.  Planning wallclock is inherently non-reproducible and is
therefore only written when explicitly requested via ``timings``; all
default outputs are byte-identical across reruns of the same seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import ModelEstimate, Trajectory
from .dmdc import ReducedModel
from .errors import ConfigError
from .harness import BenchmarkResult, EpochLog, RunRecord

MODEL_FORMAT_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def write_trajectory(path, traj: Trajectory, designed=None) -> Path:
    """One row per timestep: t, states, inputs, designed flag.

    The final row carries the last state with nan input columns (there
    are k inputs for k+1 states).
    """
    path = Path(path)
    n, m, k = traj.n, traj.m, traj.k
    if designed is None:
        designed = np.zeros(k, dtype=bool)
    header = ["t"] + [f"x{i+1}" for i in range(n)] + [f"u{j+1}" for j in range(m)] + ["designed"]
    rows = []
    for i in range(k + 1):
        row = [i * traj.dt] + list(traj.states[i])
        if i < k:
            row += list(traj.inputs[i]) + [float(designed[i])]
        else:
            row += [float("nan")] * m + [float("nan")]
        rows.append(row)
    _write_csv(path, header, rows)
    return path


def read_trajectory(path) -> tuple[Trajectory, np.ndarray]:
    """Inverse of write_trajectory; returns the trajectory and designed mask."""
    path = Path(path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    n = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("u"))
    body = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    if body.shape[0] < 2:
        raise ValueError(f"trajectory file {path} must contain at least two timesteps")
    states = body[:, 1 : 1 + n]
    inputs = body[:-1, 1 + n : 1 + n + m]
    designed = body[:-1, -1] > 0.5
    dt = float(body[1, 0] - body[0, 0])
    return Trajectory(states=states, inputs=inputs, dt=dt), designed


_EPOCH_FIELDS = [
    "epoch",
    "k",
    "trace_gamma",
    "rmse_predicted",
    "rmse_true",
    "solver_status",
    "constraint_margin_min",
    "ccp_iterations",
]


def write_epoch_logs(path, logs: list[EpochLog], timings: bool = False) -> Path:
    path = Path(path)
    header = list(_EPOCH_FIELDS) + (["plan_wallclock"] if timings else [])
    rows = []
    for log in logs:
        row = [getattr(log, f) for f in _EPOCH_FIELDS]
        if timings:
            row.append(log.plan_wallclock)
        rows.append(row)
    _write_csv(path, header, rows)
    return path


def write_benchmark_summary(path, result: BenchmarkResult, timings: bool = False) -> Path:
    path = Path(path)
    header = [
        "method",
        "trace_gamma_median",
        "trace_gamma_iqr",
        "rmse_true_median",
        "rmse_true_iqr",
    ] + (["wallclock_median", "wallclock_iqr"] if timings else [])
    rows = []
    for s in result.summaries:
        row = [s.method, s.trace_gamma_median, s.trace_gamma_iqr, s.rmse_true_median, s.rmse_true_iqr]
        if timings:
            row += [s.wallclock_median, s.wallclock_iqr]
        rows.append(row)
    _write_csv(path, header, rows)
    return path


def write_signal(path, inputs: np.ndarray, dt: float) -> Path:
    path = Path(path)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    m = inputs.shape[1]
    header = ["t"] + [f"u{j+1}" for j in range(m)]
    rows = [[i * dt] + list(inputs[i]) for i in range(inputs.shape[0])]
    _write_csv(path, header, rows)
    return path


def write_signal_scores(path, methods_scores: dict) -> Path:
    """Table-style summary: one row per (method, channel) with rpf and max step."""
    path = Path(path)
    header = ["method", "channel", "rpf", "degenerate", "max_diff"]
    rows = []
    for method, score in methods_scores.items():
        for c in range(score.rpf.size):
            rows.append([method, c + 1, score.rpf[c], int(score.degenerate[c]), score.max_diff[c]])
    _write_csv(path, header, rows)
    return path


def write_model(path, model: ModelEstimate | ReducedModel, sigma: float | None = None) -> Path:
    """JSON model file with a format-version field.

    Full models store A, B, sigma, gamma; reduced models additionally
    keep every DMDc factor needed to rebuild the reduction.
    """
    path = Path(path)
    if isinstance(model, ModelEstimate):
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "type": "full",
            "sigma": model.sigma,
            "A": model.A.tolist(),
            "B": model.B.tolist(),
            "gamma": model.gamma.tolist(),
        }
    elif isinstance(model, ReducedModel):
        if sigma is None:
            raise ValueError("sigma is required when writing a reduced model")
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "type": "reduced",
            "sigma": float(sigma),
            "A": model.A.tolist(),
            "B": model.B.tolist(),
            "U1": model.U1.tolist(),
            "U2": model.U2.tolist(),
            "sing_vals": model.sing_vals.tolist(),
            "V": model.V.tolist(),
            "basis": model.basis.tolist(),
            "p": model.p,
            "r": model.r,
        }
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def read_model(path) -> tuple[ModelEstimate | ReducedModel, float]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"model file not found: {path}")
    doc = json.loads(path.read_text())
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ConfigError(f"unsupported model format_version {version!r}")
    sigma = float(doc["sigma"])
    arr = lambda key: np.asarray(doc[key], dtype=float)
    if doc["type"] == "full":
        return ModelEstimate(A=arr("A"), B=arr("B"), sigma=sigma, gamma=arr("gamma")), sigma
    if doc["type"] == "reduced":
        model = ReducedModel(
            U1=arr("U1"),
            U2=arr("U2"),
            sing_vals=arr("sing_vals"),
            V=arr("V"),
            basis=arr("basis"),
            A=arr("A"),
            B=arr("B"),
            p=int(doc["p"]),
            r=int(doc["r"]),
        )
        return model, sigma
    raise ConfigError(f"unknown model type {doc['type']!r}")


def write_plan(out_dir, inputs: np.ndarray, predicted_states: np.ndarray, dt: float) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [write_signal(out_dir / "planned_inputs.csv", inputs, dt)]
    states = np.atleast_2d(np.asarray(predicted_states, dtype=float))
    d = states.shape[1]
    header = ["t"] + [f"x{i+1}" for i in range(d)]
    rows = [[i * dt] + list(states[i]) for i in range(states.shape[0])]
    _write_csv(out_dir / "predicted_states.csv", header, rows)
    written.append(out_dir / "predicted_states.csv")
    return written


def write_results(
    out_dir,
    run: RunRecord | None = None,
    bench: BenchmarkResult | None = None,
    timings: bool = False,
) -> list[Path]:
    """Write the standard file set for a run and/or a benchmark."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if run is not None:
        written.append(write_trajectory(out_dir / f"trajectory_{run.method}.csv", run.trajectory, run.designed))
        written.append(write_epoch_logs(out_dir / f"epochs_{run.method}.csv", run.logs, timings=timings))
    if bench is not None:
        written.append(write_benchmark_summary(out_dir / "benchmark_summary.csv", bench, timings=timings))
        for (method, i), rec in bench.runs.items():
            written.append(write_epoch_logs(out_dir / f"epochs_{method}_seed{i}.csv", rec.logs, timings=timings))
    return written
