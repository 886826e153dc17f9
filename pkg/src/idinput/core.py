"""Least-squares identification of linear dynamics and its uncertainty.

Data model: a run of the system x_{t+1} = A x_t + B u_t + v_t with
v_t ~ N(0, sigma^2 I) is stored as snapshot matrices

    X  = [x_1 .. x_k],   Xp = [x_2 .. x_{k+1}],   U = [u_1 .. u_k],
    Z  = [X; U]                                   (stacked regressors)

so that Xp = Theta Z + V with Theta = [A B].  The least-squares estimate
is Theta_hat = Xp Z^+, and its covariance factorizes as I_n (x) Gamma
with Gamma = sigma^2 (Z Z^T)^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficiencyError, SizeError

# Relative singular-value cutoff used for numerical rank decisions.
RCOND = 1e-12

# Condition-number cap on Z Z^T before Gamma is considered meaningful.
COND_CAP = 1e12


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Trajectory:
    """A recorded run: k+1 states and the k inputs applied between them.

    states : (k+1, n) array, one state per row.
    inputs : (k, m) array; inputs[t] acts between states[t] and states[t+1].
    dt     : sample period in seconds.
    """

    states: np.ndarray
    inputs: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        states = _as_matrix(self.states, "states")
        inputs = _as_matrix(self.inputs, "inputs")
        if states.shape[0] != inputs.shape[0] + 1:
            raise ValueError(
                "states must have exactly one more row than inputs, got "
                f"{states.shape[0]} states and {inputs.shape[0]} inputs"
            )
        if states.shape[1] < 1:
            raise ValueError("state dimension must be at least 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def k(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class DataMatrices:
    """Snapshot matrices X, Xp, U and the stacked regressor Z = [X; U]."""

    X: np.ndarray
    Xp: np.ndarray
    U: np.ndarray
    Z: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class ModelEstimate:
    """Identified model Theta_hat = [A B] with noise scale and covariance factor.

    gamma is sigma^2 (Z Z^T)^{-1}; the full parameter covariance is the
    Kronecker product I_n (x) gamma and is never materialized here.
    """

    A: np.ndarray
    B: np.ndarray
    sigma: float
    gamma: np.ndarray

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def theta(self) -> np.ndarray:
        return np.hstack([self.A, self.B])

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class UncertaintyTrajectory:
    """Forward-propagated state covariances and their diagonal stddevs.

    covariances : (steps+1, n, n), symmetric PSD.
    stddevs     : (steps+1, n), sqrt of each covariance diagonal.
    """

    covariances: np.ndarray
    stddevs: np.ndarray


def assemble_data(traj: Trajectory) -> DataMatrices:
    """Stack a trajectory into the regression matrices X, Xp, U, Z.

    Column j of each matrix is sample j: X holds x_1..x_k, Xp holds
    x_2..x_{k+1}, U holds u_1..u_k, and Z is X stacked over U.
    """
    if traj.k < 1:
        raise ValueError("trajectory must contain at least one transition")
    X = traj.states[:-1].T.copy()
    Xp = traj.states[1:].T.copy()
    U = traj.inputs.T.copy()
    Z = np.vstack([X, U])
    return DataMatrices(X=X, Xp=Xp, U=U, Z=Z)


def gamma_matrix(Z: np.ndarray, sigma: float, cond_cap: float = COND_CAP) -> np.ndarray:
    """Covariance factor sigma^2 (Z Z^T)^{-1}, symmetric by construction.

    Raises RankDeficiencyError when Z Z^T is singular or its condition
    number exceeds ``cond_cap`` (the inverse would be numerically
    meaningless past that point).
    """
    q = Z.shape[0]
    u, s, _ = np.linalg.svd(Z, full_matrices=False)
    rank = int(np.sum(s > s[0] * RCOND)) if s.size and s[0] > 0 else 0
    if rank < q:
        raise RankDeficiencyError(
            f"Z Z^T is singular: numerical rank {rank} < {q} rows "
            f"(k={Z.shape[1]} columns)"
        )
    cond = (s[0] / s[-1]) ** 2
    if cond > cond_cap:
        raise RankDeficiencyError(
            f"Z Z^T condition number {cond:.3e} exceeds cap {cond_cap:.1e} "
            f"(numerical rank {rank})"
        )
    gamma = (u / s**2) @ u.T * sigma**2
    return 0.5 * (gamma + gamma.T)


def estimate_theta(data: DataMatrices, sigma: float, cond_cap: float = COND_CAP) -> ModelEstimate:
    """Least-squares fit Theta_hat = Xp Z^+ with covariance factor Gamma.

    Parameters
    ----------
    data : DataMatrices
        Snapshot matrices; Z Z^T must be invertible.
    sigma : float
        Process-noise standard deviation (>= 0). Scales Gamma only.
    cond_cap : float
        Condition-number cap on Z Z^T; beyond it the fit is rejected.

    Returns
    -------
    ModelEstimate
        A is the first n columns of Theta_hat, B the remaining m.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    n, m = data.n, data.m
    gamma = gamma_matrix(data.Z, sigma, cond_cap)  # also validates rank
    # Solve min ||Theta Z - Xp||_F via the transposed least-squares problem.
    theta_t, *_ = np.linalg.lstsq(data.Z.T, data.Xp.T, rcond=RCOND)
    theta = theta_t.T
    return ModelEstimate(A=theta[:, :n], B=theta[:, n:], sigma=float(sigma), gamma=gamma)


def estimate_noise_scale(data: DataMatrices) -> float:
    """Residual-based noise estimate sigma_hat = ||Theta_hat Z - Xp||_F / sqrt(n k)."""
    theta_t, *_ = np.linalg.lstsq(data.Z.T, data.Xp.T, rcond=RCOND)
    resid = theta_t.T @ data.Z - data.Xp
    return float(np.linalg.norm(resid) / np.sqrt(data.n * data.k))


def cov_theta_trace(est: ModelEstimate) -> float:
    """Trace of the full parameter covariance, n * tr(gamma).

    Uses tr(I_n (x) gamma) = n tr(gamma); the n(n+m) x n(n+m) Kronecker
    matrix is never formed.
    """
    return est.n * float(np.trace(est.gamma))


def rmse(est: ModelEstimate) -> float:
    """Predicted parameter RMSE, sqrt(tr(Cov) / (n (n+m)))."""
    n, m = est.n, est.m
    return float(np.sqrt(cov_theta_trace(est) / (n * (n + m))))


def propagate_uncertainty(
    A: np.ndarray, Sigma0: np.ndarray, sigma: float, steps: int
) -> UncertaintyTrajectory:
    """Propagate state covariance through Sigma_{t+1} = A Sigma_t A^T + sigma^2 I.

    Returns steps+1 covariances starting at Sigma0, with per-step
    standard deviations sqrt(diag(Sigma_t)).
    """
    A = _as_matrix(A, "A")
    n = A.shape[0]
    Sigma = 0.5 * (np.asarray(Sigma0, dtype=float) + np.asarray(Sigma0, dtype=float).T)
    covs = [Sigma]
    for _ in range(steps):
        Sigma = A @ Sigma @ A.T + sigma**2 * np.eye(n)
        Sigma = 0.5 * (Sigma + Sigma.T)
        covs.append(Sigma)
    covariances = np.array(covs)
    stddevs = np.sqrt(np.maximum(np.diagonal(covariances, axis1=1, axis2=2), 0.0))
    return UncertaintyTrajectory(covariances=covariances, stddevs=stddevs)


def verify_kronecker_identity(
    data: DataMatrices, max_dim: int = 200, tol: float = 1e-12
) -> tuple[bool, float]:
    """Check Phi^T Phi = I_n (x) Z Z^T on a materialized regression matrix.

    Phi is the block design matrix of the vectorized regression
    vec(Xp) = Phi vec_rows(Theta): sample i contributes n rows, row j
    carrying z_i in block j.  Returns (ok, max absolute residual).

    Only valid on small instances; raises SizeError when n (n+m)
    exceeds ``max_dim``.
    """
    n, q, k = data.n, data.n + data.m, data.k
    if n * q > max_dim:
        raise SizeError(f"instance too large to materialize Phi: n(n+m) = {n * q} > {max_dim}")
    eye = np.eye(n)
    phi = np.vstack([np.kron(eye, z[None, :]) for z in data.Z.T])
    lhs = phi.T @ phi
    rhs = np.kron(eye, data.Z @ data.Z.T)
    residual = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    return residual <= tol, residual
