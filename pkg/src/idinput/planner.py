"""Input planning that minimizes model-estimate covariance.

The design objective is tr(W^-1) where W = sigma^-2 Z Z^T is the scaled
information matrix of the combined past-plus-planned data.  Z -> W is
matrix convex, so the affine expansion of W at the current iterate Z_c,

    sigma^2 What(Z) = Z_c Z_c^T + Z_c (Z - Z_c)^T + (Z - Z_c) Z_c^T,

is a global minorant (What(Z) <= W(Z) in the Loewner order), which makes
tr(What^-1) an upper bound on the true objective.  Iterating convex
solves of the surrogate (the convex-concave procedure) therefore
descends monotonically without line searches or trust regions.

Two subproblem solvers are provided: an SDP that minimizes tr(What^-1)
through a Schur-complement epigraph block, and a cheaper LP that
maximizes tr(What) instead.  Future states are eliminated before
solving: each planned state is an affine function of the stacked future
inputs, so the subproblems only carry input variables.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

from .core import ModelEstimate, propagate_uncertainty
from .dmdc import ReducedModel
from .errors import PlannerError, RankDeficiencyError

# Pairwise |correlation| above which an LP solution counts as
# concentrating all excitation in one direction.
DEGENERATE_CORR = 0.99

_FEAS_TOL = 1e-8


def _vec(x, m: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise ValueError(f"{name} must have shape ({m},), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class PlanProblem:
    """One receding-horizon input-design instance.

    model           : full or reduced dynamics used for prediction.
    Z_past          : (d+m, k) committed data columns (reduced coordinates
                      when the model is reduced).
    x_init          : measured state the plan starts from (d,).
    horizon         : number of future inputs to design.
    u_lo, u_hi      : input box (m,); entries may be +-inf.
    du_max          : per-step slew bound (m,), nonnegative, inf allowed.
    x_lo, x_hi      : optional state box (d,), tightened by beta sigma_x.
    beta            : state-box inflation in propagated stddevs.
    sigma           : process-noise scale entering W.
    u_prev          : last executed input, anchoring the first slew step.
    terminal_target : optional hard equality on the final predicted state.
    """

    model: ModelEstimate | ReducedModel
    Z_past: np.ndarray
    x_init: np.ndarray
    horizon: int
    u_lo: np.ndarray
    u_hi: np.ndarray
    du_max: np.ndarray
    u_prev: np.ndarray
    sigma: float
    beta: float = 1.0
    x_lo: np.ndarray | None = None
    x_hi: np.ndarray | None = None
    terminal_target: np.ndarray | None = None

    def __post_init__(self):
        A, B = dynamics_of(self.model)
        d, m = A.shape[0], B.shape[1]
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        Z_past = np.asarray(self.Z_past, dtype=float)
        if Z_past.shape[0] != d + m:
            raise ValueError(f"Z_past must have {d + m} rows, got {Z_past.shape[0]}")
        object.__setattr__(self, "Z_past", Z_past)
        object.__setattr__(self, "x_init", _vec(self.x_init, d, "x_init"))
        object.__setattr__(self, "u_lo", _vec(self.u_lo, m, "u_lo"))
        object.__setattr__(self, "u_hi", _vec(self.u_hi, m, "u_hi"))
        object.__setattr__(self, "du_max", _vec(self.du_max, m, "du_max"))
        object.__setattr__(self, "u_prev", _vec(self.u_prev, m, "u_prev"))
        if np.any(self.u_lo > self.u_hi):
            raise ValueError("u_lo must not exceed u_hi")
        if np.any(self.du_max < 0):
            raise ValueError("du_max must be nonnegative")
        for name in ("x_lo", "x_hi", "terminal_target"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _vec(val, d, name))

    @property
    def A(self) -> np.ndarray:
        return dynamics_of(self.model)[0]

    @property
    def B(self) -> np.ndarray:
        return dynamics_of(self.model)[1]

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def k(self) -> int:
        return self.Z_past.shape[1]


@dataclass
class PlanResult:
    """Planned inputs with predicted states and objective diagnostics.

    objective_true is tr(W^-1) at the returned plan; objective_surrogate
    is the subproblem objective there (tr(What^-1) for the SDP mode,
    -tr(What) for the LP mode).  objective_trace records tr(W^-1) at the
    initial iterate and after every subproblem solve.
    """

    inputs: np.ndarray | None
    predicted_states: np.ndarray | None
    objective_true: float
    objective_surrogate: float
    ccp_iterations: int
    solver_status: str
    objective_trace: list[float] = field(default_factory=list)
    degenerate_direction: bool = False


def dynamics_of(model) -> tuple[np.ndarray, np.ndarray]:
    """Extract the (A, B) pair a plan predicts with."""
    if isinstance(model, (ModelEstimate, ReducedModel)):
        return model.A, model.B
    raise TypeError(f"model must be ModelEstimate or ReducedModel, got {type(model).__name__}")


def condense_dynamics(problem: PlanProblem) -> tuple[np.ndarray, np.ndarray]:
    """Affine map from stacked future inputs to stacked predicted states.

    Returns (F, g) with F of shape (d*horizon, m*horizon) and g of
    shape (d*horizon,) such that block i of F u + g equals the state
    i+1 steps after x_init:  x = A^{i+1} x_init + sum_j A^{i-j} B u_j.
    """
    A, B = problem.A, problem.B
    d, m, h = problem.d, problem.m, problem.horizon
    powers = [np.eye(d)]
    for _ in range(h):
        powers.append(A @ powers[-1])
    F = np.zeros((d * h, m * h))
    g = np.zeros(d * h)
    for i in range(h):
        g[i * d : (i + 1) * d] = powers[i + 1] @ problem.x_init
        for j in range(i + 1):
            F[i * d : (i + 1) * d, j * m : (j + 1) * m] = powers[i - j] @ B
    return F, g


def predict_states(problem: PlanProblem, inputs: np.ndarray) -> np.ndarray:
    """Roll the model forward: returns (horizon+1, d) states from x_init."""
    inputs = np.asarray(inputs, dtype=float).reshape(problem.horizon, problem.m)
    states = np.empty((problem.horizon + 1, problem.d))
    states[0] = problem.x_init
    for t in range(problem.horizon):
        states[t + 1] = problem.A @ states[t] + problem.B @ inputs[t]
    return states


def assemble_z_new(problem: PlanProblem, inputs: np.ndarray) -> np.ndarray:
    """Future data columns (x_t; u_t) induced by an input plan, (d+m, horizon)."""
    inputs = np.asarray(inputs, dtype=float).reshape(problem.horizon, problem.m)
    states = predict_states(problem, inputs)
    return np.vstack([states[:-1].T, inputs.T])


def assemble_z_full(problem: PlanProblem, inputs: np.ndarray) -> np.ndarray:
    """Past data columns followed by the planned future columns."""
    return np.hstack([problem.Z_past, assemble_z_new(problem, inputs)])


def linearize_W(Z_c: np.ndarray, sigma: float):
    """Affine surrogate of the information matrix, expanded at Z_c.

    Returns a callable What with What(Z_c) = sigma^-2 Z_c Z_c^T and
    What(Z) <= W(Z) in the Loewner order for every Z; the gap is
    sigma^-2 (Z - Z_c)(Z - Z_c)^T.
    """
    Z_c = np.asarray(Z_c, dtype=float)
    scale = 1.0 / sigma**2

    def what(Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        M = Z_c @ Z.T + Z @ Z_c.T - Z_c @ Z_c.T
        return scale * 0.5 * (M + M.T)

    return what


def trace_inv_information(Z: np.ndarray, sigma: float) -> float:
    """True design objective tr(W^-1) = sigma^2 tr((Z Z^T)^-1)."""
    G = Z @ Z.T
    return float(sigma**2 * np.trace(np.linalg.solve(G, np.eye(G.shape[0]))))


def initial_inputs(problem: PlanProblem) -> np.ndarray:
    """Hold-last-input starting plan, projected into the box."""
    u0 = np.clip(problem.u_prev, problem.u_lo, problem.u_hi)
    return np.tile(u0, (problem.horizon, 1))


def inflated_state_bounds(problem: PlanProblem) -> tuple[np.ndarray, np.ndarray] | None:
    """Per-step state bounds tightened by beta propagated stddevs.

    Returns (lo, hi) of shape (horizon-1, d) for the constrained steps
    (the second predicted state through the last one entering Z), or
    None when the problem carries no state box or the horizon admits no
    constrained step.  The uncertainty recursion starts from a zero
    covariance at the measured state and does not depend on the inputs,
    so the bounds are fixed within one planning call.
    """
    if (problem.x_lo is None and problem.x_hi is None) or problem.horizon < 2:
        return None
    d, h = problem.d, problem.horizon
    sig = propagate_uncertainty(problem.A, np.zeros((d, d)), problem.sigma, h).stddevs
    lo = np.full((h - 1, d), -np.inf) if problem.x_lo is None else problem.x_lo + problem.beta * sig[1:h]
    hi = np.full((h - 1, d), np.inf) if problem.x_hi is None else problem.x_hi - problem.beta * sig[1:h]
    return lo, hi


def _state_box_empty(bounds) -> bool:
    if bounds is None:
        return False
    lo, hi = bounds
    return bool(np.any(lo > hi))


def _slew_system(problem: PlanProblem) -> tuple[np.ndarray, np.ndarray]:
    """Difference operator D and offset so slew constraints read |D u - off| <= du."""
    m, h = problem.m, problem.horizon
    D = np.eye(m * h)
    for t in range(1, h):
        D[t * m : (t + 1) * m, (t - 1) * m : t * m] = -np.eye(m)
    off = np.zeros(m * h)
    off[:m] = problem.u_prev
    return D, off


def min_constraint_margin(problem: PlanProblem, inputs: np.ndarray) -> float:
    """Smallest slack over box, slew, inflated state, and terminal constraints.

    Nonnegative means feasible; equality constraints contribute minus
    their absolute residual.
    """
    inputs = np.asarray(inputs, dtype=float).reshape(problem.horizon, problem.m)
    margins = []
    for v in (inputs - problem.u_lo, problem.u_hi - inputs):
        finite = np.isfinite(v)
        if finite.any():
            margins.append(v[finite].min())
    diffs = np.abs(np.diff(np.vstack([problem.u_prev, inputs]), axis=0))
    v = problem.du_max - diffs
    finite = np.isfinite(v)
    if finite.any():
        margins.append(v[finite].min())
    bounds = inflated_state_bounds(problem)
    if bounds is not None:
        lo, hi = bounds
        states = predict_states(problem, inputs)[1 : problem.horizon]
        for v in (states - lo, hi - states):
            finite = np.isfinite(v)
            if finite.any():
                margins.append(v[finite].min())
    if problem.terminal_target is not None:
        final = predict_states(problem, inputs)[-1]
        resid = np.abs(final - problem.terminal_target)
        margins.append(-resid.max() if resid.size else 0.0)
    return float(min(margins)) if margins else float("inf")


def _degenerate_direction(inputs: np.ndarray, threshold: float = DEGENERATE_CORR) -> bool:
    """True when every input-channel pair is (near-)perfectly correlated.

    Channels with zero variance count as degenerate: a constant channel
    is the extreme case of excitation concentrated in one direction.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    h, m = inputs.shape
    scale = max(1.0, float(np.max(np.abs(inputs))) if inputs.size else 1.0)
    centered = inputs - inputs.mean(axis=0)
    norms = np.linalg.norm(centered, axis=0)
    constant = norms <= 1e-12 * scale * np.sqrt(h)
    if m == 1:
        return bool(constant[0])
    for i in range(m):
        for j in range(i + 1, m):
            if constant[i] or constant[j]:
                continue
            corr = abs(float(centered[:, i] @ centered[:, j])) / (norms[i] * norms[j])
            if corr <= threshold:
                return False
    return True


def _infeasible_result() -> PlanResult:
    return PlanResult(
        inputs=None,
        predicted_states=None,
        objective_true=float("nan"),
        objective_surrogate=float("nan"),
        ccp_iterations=0,
        solver_status="infeasible",
    )


class _SdpSubproblem:
    """Reusable epigraph SDP: minimize tr(Y) s.t. [[What, I], [I, Y]] >= 0.

    The linearization point enters through parameters, so repeated CCP
    iterations reuse one compiled problem.
    """

    def __init__(self, problem: PlanProblem):
        self.problem = problem
        d, m, h = problem.d, problem.m, problem.horizon
        q = d + m
        F, g = condense_dynamics(problem)
        self.F, self.g = F, g
        G_past = problem.Z_past @ problem.Z_past.T

        u = cp.Variable(m * h)
        self.u = u
        if d > 0:
            x_stack = F @ u + g
            cols = [cp.Constant(problem.x_init.reshape(d, 1))]
            if h > 1:
                cols.append(cp.reshape(x_stack[: d * (h - 1)], (d, h - 1), order="F"))
            X_new = cp.hstack(cols) if len(cols) > 1 else cols[0]
            Z_new = cp.vstack([X_new, cp.reshape(u, (m, h), order="F")])
        else:
            Z_new = cp.reshape(u, (m, h), order="F")

        self.Zc = cp.Parameter((q, h))
        self.Gc = cp.Parameter((q, q), symmetric=True)  # Zc Zc^T, kept DPP-affine
        What = (G_past + self.Zc @ Z_new.T + Z_new @ self.Zc.T - self.Gc) / problem.sigma**2
        Y = cp.Variable((q, q), symmetric=True)
        Iq = np.eye(q)
        cons = [cp.bmat([[What, Iq], [Iq, Y]]) >> 0]

        lo, hi = np.tile(problem.u_lo, h), np.tile(problem.u_hi, h)
        if np.isfinite(lo).any():
            cons.append(u[np.isfinite(lo)] >= lo[np.isfinite(lo)])
        if np.isfinite(hi).any():
            cons.append(u[np.isfinite(hi)] <= hi[np.isfinite(hi)])
        D, off = _slew_system(problem)
        du = np.tile(problem.du_max, h)
        mask = np.isfinite(du)
        if mask.any():
            cons.append(cp.abs((D @ u - off)[mask]) <= du[mask])
        self.state_bounds = inflated_state_bounds(problem)
        if self.state_bounds is not None and d > 0:
            lo_s, hi_s = (b.reshape(-1) for b in self.state_bounds)
            xs = x_stack[: d * (h - 1)]
            if np.isfinite(lo_s).any():
                cons.append(xs[np.isfinite(lo_s)] >= lo_s[np.isfinite(lo_s)])
            if np.isfinite(hi_s).any():
                cons.append(xs[np.isfinite(hi_s)] <= hi_s[np.isfinite(hi_s)])
        if problem.terminal_target is not None and d > 0:
            cons.append(x_stack[d * (h - 1) :] == problem.terminal_target)

        self.cvx_problem = cp.Problem(cp.Minimize(cp.trace(Y)), cons)

    def solve(self, z_new_c: np.ndarray) -> tuple[str, np.ndarray | None, float]:
        if _state_box_empty(self.state_bounds):
            return "infeasible", None, float("nan")
        self.Zc.value = z_new_c
        self.Gc.value = z_new_c @ z_new_c.T
        try:
            self.cvx_problem.solve(solver=cp.CLARABEL)
        except cp.error.SolverError as exc:
            raise PlannerError(f"SDP subproblem solver failed: {exc}") from exc
        status = self.cvx_problem.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return "optimal", np.asarray(self.u.value), float(self.cvx_problem.value)
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return "infeasible", None, float("nan")
        raise PlannerError(f"SDP subproblem ended with status {status}; the surrogate likely lost definiteness")


class _LpSubproblem:
    """Surrogate-trace LP: maximize tr(What(Z)) under the same constraints.

    tr(What) is affine in the planned data columns, so after eliminating
    states the subproblem is a plain LP over the stacked inputs.
    """

    def __init__(self, problem: PlanProblem):
        self.problem = problem
        d, m, h = problem.d, problem.m, problem.horizon
        F, g = condense_dynamics(problem)
        self.F, self.g = F, g
        self.Fz = F[: d * (h - 1)]
        self.gz = g[: d * (h - 1)]

        lo, hi = np.tile(problem.u_lo, h), np.tile(problem.u_hi, h)
        self.bounds = list(zip(lo, hi))
        rows, rhs = [], []
        D, off = _slew_system(problem)
        du = np.tile(problem.du_max, h)
        mask = np.isfinite(du)
        if mask.any():
            rows.append(D[mask])
            rhs.append(du[mask] + off[mask])
            rows.append(-D[mask])
            rhs.append(du[mask] - off[mask])
        self.state_bounds = inflated_state_bounds(problem)
        if self.state_bounds is not None and d > 0:
            lo_s, hi_s = (b.reshape(-1) for b in self.state_bounds)
            up = np.isfinite(hi_s)
            if up.any():
                rows.append(self.Fz[up])
                rhs.append(hi_s[up] - self.gz[up])
            dn = np.isfinite(lo_s)
            if dn.any():
                rows.append(-self.Fz[dn])
                rhs.append(self.gz[dn] - lo_s[dn])
        self.A_ub = np.vstack(rows) if rows else None
        self.b_ub = np.concatenate(rhs) if rhs else None
        if problem.terminal_target is not None and d > 0:
            self.A_eq = F[d * (h - 1) :]
            self.b_eq = problem.terminal_target - g[d * (h - 1) :]
        else:
            self.A_eq, self.b_eq = None, None

    def _objective_coefficients(self, z_new_c: np.ndarray) -> np.ndarray:
        # maximize <Z_c, Z_new(u)>: the input block contributes Zc_u
        # directly, the predicted-state block pulls back through F.
        d, m, h = self.problem.d, self.problem.m, self.problem.horizon
        c = z_new_c[d:, :].flatten(order="F")
        if d > 0 and h > 1:
            w = z_new_c[:d, 1:].flatten(order="F")
            c = c + self.Fz.T @ w
        return c

    def solve(self, z_new_c: np.ndarray) -> tuple[str, np.ndarray | None]:
        if _state_box_empty(self.state_bounds):
            return "infeasible", None
        c = self._objective_coefficients(z_new_c)
        res = linprog(
            -c,
            A_ub=self.A_ub,
            b_ub=self.b_ub,
            A_eq=self.A_eq,
            b_eq=self.b_eq,
            bounds=self.bounds,
            method="highs",
        )
        if res.status == 0:
            return "optimal", np.asarray(res.x)
        if res.status == 2:
            return "infeasible", None
        if res.status == 3:
            raise PlannerError("internal error: LP reported unbounded on a compact feasible set")
        raise PlannerError(f"LP subproblem failed: {res.message}")


def _surrogate_value(problem: PlanProblem, objective: str, z_c_full: np.ndarray, inputs: np.ndarray) -> float:
    what = linearize_W(z_c_full, problem.sigma)(assemble_z_full(problem, inputs))
    if objective == "sdp":
        return float(np.trace(np.linalg.solve(what, np.eye(what.shape[0]))))
    return float(-np.trace(what))


def _finish(problem, objective, inputs, z_c_full, iterations, status, trace) -> PlanResult:
    inputs = inputs.reshape(problem.horizon, problem.m)
    result = PlanResult(
        inputs=inputs,
        predicted_states=predict_states(problem, inputs),
        objective_true=trace_inv_information(assemble_z_full(problem, inputs), problem.sigma),
        objective_surrogate=_surrogate_value(problem, objective, z_c_full, inputs),
        ccp_iterations=iterations,
        solver_status=status,
        objective_trace=list(trace),
    )
    if objective == "lp":
        result.degenerate_direction = _degenerate_direction(inputs)
        if result.degenerate_direction:
            warnings.warn(
                "LP surrogate solution concentrates excitation in a single input "
                "direction; information gain may be poor in orthogonal directions",
                stacklevel=3,
            )
    return result


def _split_z_c(problem: PlanProblem, Z_c: np.ndarray) -> np.ndarray:
    Z_c = np.asarray(Z_c, dtype=float)
    expected = (problem.d + problem.m, problem.k + problem.horizon)
    if Z_c.shape != expected:
        raise ValueError(f"Z_c must have shape {expected}, got {Z_c.shape}")
    return Z_c[:, problem.k :]


def solve_subproblem_sdp(problem: PlanProblem, Z_c: np.ndarray) -> PlanResult:
    """One SDP solve of the linearized objective tr(What^-1) at Z_c."""
    z_new_c = _split_z_c(problem, Z_c)
    status, u, _ = _SdpSubproblem(problem).solve(z_new_c)
    if status != "optimal":
        return _infeasible_result()
    return _finish(problem, "sdp", u, np.asarray(Z_c, dtype=float), 1, "optimal", [])


def solve_subproblem_lp(problem: PlanProblem, Z_c: np.ndarray) -> PlanResult:
    """One LP solve of the surrogate -tr(What) at Z_c."""
    z_new_c = _split_z_c(problem, Z_c)
    status, u = _LpSubproblem(problem).solve(z_new_c)
    if status != "optimal":
        return _infeasible_result()
    return _finish(problem, "lp", u, np.asarray(Z_c, dtype=float), 1, "optimal", [])


def ccp(
    problem: PlanProblem,
    objective: str = "sdp",
    max_iter: int = 20,
    tol: float = 1e-4,
    start_inputs: np.ndarray | None = None,
) -> PlanResult:
    """Convex-concave iteration: linearize at the iterate, solve, repeat.

    Starts from hold-last-input (projected into the box) unless
    ``start_inputs`` overrides it; that start requires the combined data
    matrix to have full row rank.  Stops when the relative change of the
    true objective drops below ``tol`` or after ``max_iter`` subproblem
    solves, and returns the best iterate seen.  With max_iter=1 this is
    a single linearize-and-solve step.
    """
    if objective not in ("sdp", "lp"):
        raise ValueError(f"objective must be 'sdp' or 'lp', got {objective!r}")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    u = initial_inputs(problem) if start_inputs is None else np.asarray(start_inputs, dtype=float)
    u = u.reshape(problem.horizon, problem.m)
    Z = assemble_z_full(problem, u)
    sv = np.linalg.svd(Z, compute_uv=False)
    if sv.size == 0 or sv[0] <= 0 or np.sum(sv > sv[0] * 1e-12) < Z.shape[0]:
        raise RankDeficiencyError("data matrix at the initial iterate is not full row rank")

    sub = _SdpSubproblem(problem) if objective == "sdp" else _LpSubproblem(problem)
    f_prev = trace_inv_information(Z, problem.sigma)
    trace = [f_prev]
    best_u, best_f = None, np.inf
    last_z_c = Z
    status = "max_iter"
    iterations = 0
    for _ in range(max_iter):
        out = sub.solve(Z[:, problem.k :])
        sub_status, u_new = out[0], out[1]
        if sub_status == "infeasible":
            if iterations == 0:
                return _infeasible_result()
            raise PlannerError("subproblem became infeasible after the first iterate")
        iterations += 1
        f_new = trace_inv_information(assemble_z_full(problem, u_new), problem.sigma)
        trace.append(f_new)
        if f_new < best_f:
            best_f, best_u = f_new, u_new
            last_z_c = Z
        if abs(f_new - f_prev) <= tol * max(1.0, abs(f_new)):
            status = "optimal"
            break
        f_prev = f_new
        Z = assemble_z_full(problem, u_new)

    return _finish(problem, objective, best_u, last_z_c, iterations, status, trace)
