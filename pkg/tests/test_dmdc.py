import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from idinput.core import DataMatrices, Trajectory, assemble_data, estimate_theta, gamma_matrix
from idinput.dmdc import (
    choose_ranks,
    lift_state,
    predict_full,
    project_state,
    reduce,
    reduce_data,
)
from idinput.errors import TruncationError

from conftest import excite, stable_system


def random_data(rng, n, m, k, sigma=0.0):
    A, B = stable_system(rng, n, m)
    states, inputs = excite(A, B, rng, k=k, sigma=sigma)
    return assemble_data(Trajectory(states, inputs)), A, B


def matrix_with_singular_values(rng, rows, cols, svals):
    q, _ = np.linalg.qr(rng.normal(size=(rows, rows)))
    p, _ = np.linalg.qr(rng.normal(size=(cols, cols)))
    s = np.zeros((rows, cols))
    s[: len(svals), : len(svals)] = np.diag(svals)
    return q @ s @ p.T


class TestReduce:
    def test_scalar_hand_system(self):
        # n=1, m=1 data solving to A=0, B=1; full-rank reduction must
        # reproduce it up to the 1x1 orthogonal factor basis in {+1,-1}.
        X = np.array([[0.0, 1.0]])
        Xp = np.array([[1.0, 2.0]])
        U = np.array([[1.0, 2.0]])
        d = DataMatrices(X=X, Xp=Xp, U=U, Z=np.vstack([X, U]))
        model = reduce(d, p=2, r=1)
        uhat = model.basis[0, 0]
        assert abs(abs(uhat) - 1.0) < 1e-12
        assert abs(uhat * model.A[0, 0] * uhat) < 1e-10
        assert abs(uhat * model.B[0, 0] - 1.0) < 1e-10

    def test_full_rank_matches_projected_least_squares(self):
        rng = np.random.default_rng(0)
        d, _, _ = random_data(rng, 4, 2, 40, sigma=0.02)
        est = estimate_theta(d, sigma=0.02)
        model = reduce(d, p=6, r=4)
        U = model.basis
        assert np.linalg.norm(model.A - U.T @ est.A @ U) < 1e-8
        assert np.linalg.norm(model.B - U.T @ est.B) < 1e-8

    def test_basis_orthonormal_and_svals_ordered(self):
        rng = np.random.default_rng(1)
        d, _, _ = random_data(rng, 5, 2, 30, sigma=0.05)
        model = reduce(d, p=5, r=3)
        assert np.linalg.norm(model.basis.T @ model.basis - np.eye(3)) < 1e-10
        assert np.all(model.sing_vals > 0)
        assert np.all(np.diff(model.sing_vals) <= 0)

    def test_rank_too_high_raises(self):
        rng = np.random.default_rng(2)
        # rank-2 latent dynamics observed in 4 dims, noiseless
        Q, _ = np.linalg.qr(rng.normal(size=(4, 2)))
        Az, Bz = stable_system(rng, 2, 1)
        z_states, inputs = excite(Az, Bz, rng, k=20)
        states = z_states @ Q.T
        d = assemble_data(Trajectory(states, inputs))
        with pytest.raises(TruncationError, match="achievable rank"):
            reduce(d, p=3, r=3)

    def test_r_greater_than_p_rejected(self):
        rng = np.random.default_rng(3)
        d, _, _ = random_data(rng, 4, 2, 30, sigma=0.05)
        with pytest.raises(ValueError, match="must not exceed"):
            reduce(d, p=2, r=3)

    def test_one_step_prediction_on_latent_system(self):
        rng = np.random.default_rng(4)
        n, r_true, m, sigma = 12, 3, 2, 1e-3
        Q, _ = np.linalg.qr(rng.normal(size=(n, r_true)))
        Az, Bz = stable_system(rng, r_true, m)
        z_states, inputs = excite(Az, Bz, rng, k=60)
        states = z_states @ Q.T + sigma * rng.standard_normal((61, n))
        d = assemble_data(Trajectory(states, inputs))
        model = reduce(d, p=r_true + m, r=r_true)
        errs = [
            np.linalg.norm(predict_full(model, states[t], inputs[t]) - states[t + 1])
            for t in range(60)
        ]
        # prediction error stays at the noise floor, not the signal scale
        assert np.median(errs) < 10 * sigma * np.sqrt(n)


class TestProjectLift:
    @pytest.fixture(scope="class")
    def model(self):
        rng = np.random.default_rng(5)
        d, _, _ = random_data(rng, 5, 2, 40, sigma=0.05)
        return reduce(d, p=6, r=3)

    def test_project_after_lift_is_identity(self, model):
        rng = np.random.default_rng(6)
        xt = rng.normal(size=3)
        assert np.allclose(project_state(model, lift_state(model, xt)), xt, atol=1e-12)

    def test_lift_after_project_on_column_space(self, model):
        rng = np.random.default_rng(7)
        x = model.basis @ rng.normal(size=3)
        assert np.allclose(lift_state(model, project_state(model, x)), x, atol=1e-12)

    @given(x=arrays(np.float64, (5,), elements=st.floats(-1e6, 1e6)))
    @settings(max_examples=25, deadline=None)
    def test_projection_non_expansive(self, model, x):
        projected = lift_state(model, project_state(model, x))
        assert np.linalg.norm(projected) <= np.linalg.norm(x) * (1 + 1e-12) + 1e-9

    def test_dimension_mismatch(self, model):
        with pytest.raises(ValueError, match="dimension"):
            project_state(model, np.zeros(4))
        with pytest.raises(ValueError, match="dimension"):
            lift_state(model, np.zeros(4))


class TestChooseRanks:
    def test_full_energy_gives_full_ranks(self):
        rng = np.random.default_rng(8)
        d, _, _ = random_data(rng, 4, 2, 30, sigma=0.05)
        p, r = choose_ranks(d, energy=1.0)
        assert p == 6
        assert r == 4

    def test_rank_one_z(self):
        z_col = np.array([1.0, 2.0, 0.5])
        Z = np.outer(z_col, [1.0, 1.0, 1.0, 1.0])
        d = DataMatrices(X=Z[:2], Xp=np.ones((2, 4)), U=Z[2:], Z=Z)
        p, _ = choose_ranks(d, energy=0.9)
        assert p == 1

    @pytest.mark.parametrize(
        "svals,energy,expected",
        [((10.0, 1.0, 0.1), 0.99, 1), ((10.0, 3.0, 0.1), 0.99, 2), ((10.0, 1.0, 0.1), 0.999999, 3)],
    )
    def test_cumulative_sum_oracle(self, svals, energy, expected):
        rng = np.random.default_rng(9)
        Z = matrix_with_singular_values(rng, 3, 8, svals)
        Xp = matrix_with_singular_values(rng, 2, 8, (1.0,))
        d = DataMatrices(X=Z[:2], Xp=Xp, U=Z[2:], Z=Z)
        # oracle: direct cumulative sum over squared singular values
        sq = np.array(svals) ** 2
        oracle = int(np.argmax(np.cumsum(sq) >= energy * sq.sum())) + 1
        assert oracle == expected
        p, _ = choose_ranks(d, energy=energy)
        assert p == expected

    def test_r_clamped_to_p(self):
        rng = np.random.default_rng(10)
        # Z nearly rank-1, Xp full rank: r must come down to p
        Z = matrix_with_singular_values(rng, 3, 10, (10.0, 1e-3, 1e-4))
        Xp = matrix_with_singular_values(rng, 2, 10, (1.0, 0.9))
        d = DataMatrices(X=Z[:2], Xp=Xp, U=Z[2:], Z=Z)
        p, r = choose_ranks(d, energy=0.99)
        assert p == 1
        assert r == 1


class TestReducedCovariance:
    def test_reduced_gamma_spd(self):
        rng = np.random.default_rng(11)
        d, _, _ = random_data(rng, 6, 2, 50, sigma=0.05)
        model = reduce(d, p=5, r=3)
        red = reduce_data(model, d)
        assert red.Z.shape == (5, 50)
        gam = gamma_matrix(red.Z, sigma=0.05)
        assert np.linalg.norm(gam - gam.T) / np.linalg.norm(gam) < 1e-10
        assert np.linalg.eigvalsh(gam).min() > 0

    def test_reduced_stack_is_projection(self):
        rng = np.random.default_rng(12)
        d, _, _ = random_data(rng, 4, 1, 20, sigma=0.05)
        model = reduce(d, p=4, r=2)
        red = reduce_data(model, d)
        assert np.allclose(red.X, model.basis.T @ d.X)
        assert np.array_equal(red.U, d.U)
