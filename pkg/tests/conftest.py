"""Shared helpers: random instances and slow independent oracles.

The slow oracles rebuild every stacked operator with explicit loops and
evaluate expected costs from first and second Bernoulli moments directly.
They share no code with the package internals beyond the model dataclass,
so agreement is evidence, not tautology.
"""

import numpy as np
import pytest

from dropattack import ChannelSpec, DetectionSpec, Protocol, SystemModel


def make_model(
    A, B, *, horizon, q=None, omega=None, psi=None,
    noise=None, init_cov=None, init_mean=None,
):
    """SystemModel with sensible defaults for scalar test data."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = A.shape[0], B.shape[1]
    return SystemModel(
        A=A,
        B=B,
        Q=np.diag(np.full(n, 1.0) if q is None else np.asarray(q, float)),
        state_penalty=np.diag(
            np.tile(np.full(n, 1.0) if omega is None else np.asarray(omega, float), horizon)
            if (omega is None or np.asarray(omega).size == n)
            else np.asarray(omega, float)
        ),
        input_penalty=np.diag(
            np.tile(np.full(m, 1.0) if psi is None else np.asarray(psi, float), horizon)
            if (psi is None or np.asarray(psi).size == m)
            else np.asarray(psi, float)
        ),
        noise_cov=np.diag(np.full(n, 0.01) if noise is None else np.asarray(noise, float))
        if (noise is None or np.asarray(noise).ndim == 1)
        else np.asarray(noise, float),
        init_cov=np.eye(n) * 0.01 if init_cov is None else np.asarray(init_cov, float),
        init_mean=np.ones(n) if init_mean is None else np.asarray(init_mean, float),
        horizon=horizon,
    )


def random_model(rng, n=None, m=None, horizon=None, spread=1.1):
    """Random instance; `spread` scales A (values above 1 allow instability)."""
    n = n or int(rng.integers(1, 5))
    m = m or int(rng.integers(1, 5))
    horizon = horizon or int(rng.integers(2, 9))
    A = rng.normal(size=(n, n)) * spread / np.sqrt(n)
    B = rng.normal(size=(n, m))
    return SystemModel(
        A=A,
        B=B,
        Q=np.diag(rng.uniform(0.5, 2.0, n)),
        state_penalty=np.diag(rng.uniform(0.5, 2.0, horizon * n)),
        input_penalty=np.diag(rng.uniform(0.5, 2.0, horizon * m)),
        noise_cov=np.diag(rng.uniform(0.02, 0.2, n)),
        init_cov=np.diag(rng.uniform(0.02, 0.2, n)),
        init_mean=rng.normal(size=n),
        horizon=horizon,
    )


def rotation_model(rng, horizon=None, scale=None):
    """Planar rotation plants; their cross terms oscillate in sign, which
    makes the rate objective's curvature flip across instances."""
    theta = rng.uniform(0.6, 2.4)
    scale = scale if scale is not None else rng.uniform(0.8, 1.25)
    A = scale * np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    B = np.eye(2) + 0.2 * rng.normal(size=(2, 2))
    horizon = horizon or int(rng.integers(3, 9))
    return SystemModel(
        A=A,
        B=B,
        Q=np.diag(rng.uniform(0.5, 2.0, 2)),
        state_penalty=np.diag(rng.uniform(0.5, 2.0, horizon * 2)),
        input_penalty=np.diag(rng.uniform(0.1, 0.6, horizon * 2)),
        noise_cov=np.diag(rng.uniform(0.02, 0.2, 2)),
        init_cov=np.diag(rng.uniform(0.02, 0.2, 2)),
        init_mean=rng.normal(size=2) * 2.0,
        horizon=horizon,
    )


def memoryless_model(rng, n=None, horizon=None):
    """A = 0 with diagonal B: drops at different steps never interact, so
    the shared-rate objective is exactly linear."""
    n = n or int(rng.integers(1, 4))
    horizon = horizon or int(rng.integers(2, 7))
    B = np.diag(rng.uniform(0.5, 2.0, n))
    return SystemModel(
        A=np.zeros((n, n)),
        B=B,
        Q=np.diag(rng.uniform(0.5, 2.0, n)),
        state_penalty=np.diag(rng.uniform(0.5, 2.0, horizon * n)),
        input_penalty=np.diag(rng.uniform(0.1, 1.0, horizon * n)),
        noise_cov=np.diag(rng.uniform(0.02, 0.2, n)),
        init_cov=np.diag(rng.uniform(0.02, 0.2, n)),
        init_mean=rng.normal(size=n) * 2.0,
        horizon=horizon,
    )


def random_channel(rng, m, lo=0.25, hi=0.85):
    return ChannelSpec(mean_diag=rng.uniform(lo, hi, m))


def shared_channel(m, mean=0.7):
    return ChannelSpec(mean_diag=np.full(m, mean))


def random_detection(rng, m, lo=0.05, hi=0.3):
    return DetectionSpec(tol_diag=rng.uniform(lo, hi, m))


def shared_detection(m, tol=0.1):
    return DetectionSpec(tol_diag=np.full(m, tol))


# ------------------------------------------------------------ slow oracles

def slow_stack(model):
    """Prediction operators assembled block by block with matrix powers."""
    n, m, N = model.n, model.m, model.horizon
    Phi = np.zeros((N * n, n))
    Gamma = np.zeros((N * n, N * m))
    Lam = np.zeros((N * n, N * n))
    for i in range(1, N + 1):
        Phi[(i - 1) * n : i * n] = np.linalg.matrix_power(model.A, i)
        for j in range(1, i + 1):
            power = np.linalg.matrix_power(model.A, i - j)
            Gamma[(i - 1) * n : i * n, (j - 1) * m : j * m] = power @ model.B
            Lam[(i - 1) * n : i * n, (j - 1) * n : j * n] = power
    return Phi, Gamma, Lam


def slow_expected_cost(model, x, u, thresholds, protocol):
    """Expected horizon cost from Bernoulli moments, no package formulas.

    `u` is the commanded stacked sequence, `thresholds` the stacked
    delivery rates.  The fire-and-forget loop pays the full second moment
    of the deliveries in the predicted-state quadratic; the acknowledged
    loop pays only the product of first moments (delivery outcomes are
    known to its accounting by the time that penalty is charged).  Both
    pay the realized-input penalty, linear in the rates.
    """
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    nb = np.asarray(thresholds, float)
    Phi, Gamma, Lam = slow_stack(model)
    Om = model.state_penalty
    psi_diag = np.diagonal(model.input_penalty)
    Sigma = np.kron(np.eye(model.horizon), model.noise_cov)

    base = Phi @ x
    const = (
        float(x @ model.Q @ x)
        + float(base @ Om @ base)
        + float(np.trace(Lam.T @ Om @ Lam @ Sigma))
    )
    gram = Gamma.T @ Om @ Gamma
    cross = Gamma.T @ Om @ base
    second = np.outer(nb, nb)
    if protocol is Protocol.UDP_LIKE:
        np.fill_diagonal(second, nb)
    state_quad = float(np.sum(gram * second * np.outer(u, u)))
    state_cross = 2.0 * float((nb * u) @ cross)
    input_term = float(np.sum(psi_diag * nb * u * u))
    return const + state_cross + state_quad + input_term


def grid_argmax(fn, lo, hi, num=20001):
    """Dense-grid argmax of a scalar function on [lo, hi]."""
    grid = np.linspace(lo, hi, num)
    values = np.array([fn(a) for a in grid])
    k = int(np.argmax(values))
    return float(grid[k]), float(values[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


# ------------------------------------------------------- acceptance ledger

ACCEPTANCE_RESULTS = {}


def record_criterion(number, passed, detail):
    """Register one acceptance verdict for the end-of-run summary."""
    ACCEPTANCE_RESULTS[number] = (bool(passed), str(detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"CRITERION {number}: {verdict} - {detail}")
