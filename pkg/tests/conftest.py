import numpy as np
import pytest

from idinput import harness


def stable_system(rng, n, m, radius=0.9):
    """Random (A, B) with spectral radius exactly `radius`."""
    A = rng.normal(size=(n, n))
    A *= radius / np.max(np.abs(np.linalg.eigvals(A)))
    B = rng.normal(size=(n, m))
    return A, B


def excite(A, B, rng, k, scale=1.0, sigma=0.0, x0=None):
    """Simulate k transitions under random inputs; returns (states, inputs)."""
    n, m = A.shape[0], B.shape[1]
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    states = [x]
    inputs = rng.uniform(-scale, scale, size=(k, m))
    for t in range(k):
        noise = sigma * rng.standard_normal(n) if sigma > 0 else 0.0
        x = A @ states[-1] + B @ inputs[t] + noise
        states.append(x)
    return np.array(states), inputs


# Benchmark settings shared by the acceptance criteria and the
# statistical harness checks (computed once per session).
BENCH_SEEDS = 20
BENCH_EPOCHS = 3
BENCH_HORIZON = 16


@pytest.fixture(scope="session")
def benchmark_result():
    from idinput import baselines, config as cfgmod

    plant = harness.make_random_plant(4, 2, sigma=0.01, seed=7)
    spec = baselines.SignalSpec(
        horizon=BENCH_HORIZON,
        dt=0.1,
        m=2,
        u_lo=-1.0,
        u_hi=1.0,
        du_max=np.inf,
        seed=(0, cfgmod._MULTISINE_STREAM),
    )
    du = baselines.derive_du_max(spec, num_components=4, rpf_iters=50)
    cons = harness.Constraints(
        u_lo=-np.ones(2),
        u_hi=np.ones(2),
        du_max=du,
        x_lo=-25.0 * np.ones(4),
        x_hi=25.0 * np.ones(4),
        beta=1.0,
    )
    return harness.benchmark(
        plant,
        ["sdp", "lp", "multisine", "random"],
        seeds=BENCH_SEEDS,
        epochs=BENCH_EPOCHS,
        horizon=BENCH_HORIZON,
        constraints=cons,
        master_seed=0,
        dt=0.1,
        multisine_components=4,
        multisine_rpf_iters=50,
    )
