"""Model reduction via dynamic mode decomposition with control.

Two truncated SVDs: Z = U1/U2-split left factors at rank p on the stacked
regressors, and an output basis Uhat at rank r on Xp.  The reduced
operators act on xt = Uhat^T x:

    A_r = Uhat^T Xp V diag(1/s) U1^T Uhat        (r x r)
    B_r = Uhat^T Xp V diag(1/s) U2^T             (r x m)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RCOND, DataMatrices
from .errors import TruncationError


@dataclass(frozen=True)
class ReducedModel:
    """Truncation factors and reduced operators from DMDc.

    U1 (n x p) and U2 (m x p) are the state/input rows of the rank-p left
    singular vectors of Z; sing_vals holds the p singular values; V is
    k x p.  basis (n x r) is the orthonormal output basis, A (r x r) and
    B (r x m) the reduced dynamics.
    """

    U1: np.ndarray
    U2: np.ndarray
    sing_vals: np.ndarray
    V: np.ndarray
    basis: np.ndarray
    A: np.ndarray
    B: np.ndarray
    p: int
    r: int

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def _numerical_rank(s: np.ndarray) -> int:
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > s[0] * RCOND))


def reduce(data: DataMatrices, p: int, r: int) -> ReducedModel:
    """Build the rank-(p, r) reduced model from snapshot data.

    Requires 1 <= r <= n, 1 <= p <= n+m, r <= p, and both requested ranks
    within the numerical rank of the corresponding matrix; otherwise a
    TruncationError names the achievable rank.
    """
    n, m, k = data.n, data.m, data.k
    if not (1 <= p <= min(n + m, k)):
        raise ValueError(f"p must be in [1, min(n+m, k)] = [1, {min(n + m, k)}], got {p}")
    if not (1 <= r <= min(n, k)):
        raise ValueError(f"r must be in [1, min(n, k)] = [1, {min(n, k)}], got {r}")
    if r > p:
        raise ValueError(f"output rank r={r} must not exceed input rank p={p}")

    Uz, sz, Vzt = np.linalg.svd(data.Z, full_matrices=False)
    rank_z = _numerical_rank(sz)
    if p > rank_z:
        raise TruncationError(f"requested p={p} exceeds numerical rank of Z; achievable rank is {rank_z}")
    Ux, sx, _ = np.linalg.svd(data.Xp, full_matrices=False)
    rank_x = _numerical_rank(sx)
    if r > rank_x:
        raise TruncationError(f"requested r={r} exceeds numerical rank of Xp; achievable rank is {rank_x}")

    U1 = Uz[:n, :p]
    U2 = Uz[n:, :p]
    s = sz[:p]
    V = Vzt[:p, :].T
    basis = Ux[:, :r]

    core = data.Xp @ (V / s)  # Xp V diag(1/s), shape n x p
    A = basis.T @ core @ U1.T @ basis
    B = basis.T @ core @ U2.T
    return ReducedModel(U1=U1, U2=U2, sing_vals=s, V=V, basis=basis, A=A, B=B, p=p, r=r)


def project_state(model: ReducedModel, x: np.ndarray) -> np.ndarray:
    """Reduced coordinates Uhat^T x."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise ValueError(f"expected state dimension {model.n}, got {x.shape[-1]}")
    return x @ model.basis


def lift_state(model: ReducedModel, xt: np.ndarray) -> np.ndarray:
    """Full-space reconstruction Uhat xt."""
    xt = np.asarray(xt, dtype=float)
    if xt.shape[-1] != model.r:
        raise ValueError(f"expected reduced dimension {model.r}, got {xt.shape[-1]}")
    return xt @ model.basis.T


def step_reduced(model: ReducedModel, xt: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One reduced-dynamics step A xt + B u."""
    return model.A @ xt + model.B @ np.asarray(u, dtype=float)


def predict_full(model: ReducedModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One-step full-space prediction Uhat (A Uhat^T x + B u)."""
    return lift_state(model, step_reduced(model, project_state(model, x), u))


def choose_ranks(data: DataMatrices, energy: float = 0.99) -> tuple[int, int]:
    """Smallest (p, r) capturing ``energy`` of squared singular-value mass.

    p is chosen on Z, r on Xp, then r is clamped to p.
    """
    if not 0 < energy <= 1:
        raise ValueError("energy must lie in (0, 1]")

    def pick(mat):
        s = np.linalg.svd(mat, compute_uv=False)
        rank = _numerical_rank(s)
        if rank == 0:
            raise ValueError("cannot choose a rank for a numerically zero matrix")
        mass = np.cumsum(s[:rank] ** 2)
        return int(np.searchsorted(mass, energy * mass[-1]) + 1)

    p = pick(data.Z)
    r = min(pick(data.Xp), p)
    return p, r


def reduce_data(model: ReducedModel, data: DataMatrices) -> DataMatrices:
    """Project snapshot data into reduced coordinates: Zr = [Uhat^T X; U].

    The result feeds the same covariance machinery as full-order data,
    giving Gamma_r = sigma^2 (Zr Zr^T)^{-1}.
    """
    Xr = model.basis.T @ data.X
    Xpr = model.basis.T @ data.Xp
    return DataMatrices(X=Xr, Xp=Xpr, U=data.U, Z=np.vstack([Xr, data.U]))
