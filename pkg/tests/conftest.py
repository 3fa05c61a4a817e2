import numpy as np
import pytest

from gmsmooth.model import (
    GaussMarkovModel,
    ObservationModel,
    ObservationRecord,
    Proper,
    Transition,
)


def random_psd(rng, n, scale=1.0, rank=None):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, max(rank, 1))) * scale
    if rank == 0:
        return np.zeros((n, n))
    s = a @ a.T
    return 0.5 * (s + s.T)


def random_model(
    rng,
    n=None,
    horizon=None,
    singular_phi_frac=0.2,
    zero_q_frac=0.2,
    missing_frac=0.0,
    initial="proper",
):
    """Random well-posed model at desk scale (n <= 4, T <= 12)."""
    n = int(rng.integers(1, 5)) if n is None else n
    horizon = int(rng.integers(1, 13)) if horizon is None else horizon

    transitions = []
    for _ in range(horizon):
        phi = rng.standard_normal((n, n))
        if rng.random() < singular_phi_frac:
            phi[rng.integers(n), :] = 0.0
        q = np.zeros((n, n)) if rng.random() < zero_q_frac else random_psd(rng, n)
        transitions.append(
            Transition(phi, rng.standard_normal(n), q).with_noise_chol()
        )

    m = int(rng.integers(1, n + 1))
    records = []
    for t in range(1, horizon + 1):
        c = rng.standard_normal((m, n))
        r = random_psd(rng, m) + np.diag(rng.uniform(0.5, 1.5, size=m))
        sensor = ObservationModel(c, r)
        value = None if rng.random() < missing_frac else rng.standard_normal(m)
        records.append(ObservationRecord(t, sensor, value))
    if all(rec.value is None for rec in records):
        rec = records[rng.integers(horizon)]
        records[rec.time_index - 1] = ObservationRecord(
            rec.time_index, rec.model, rng.standard_normal(m)
        )

    if initial == "proper":
        init = Proper(rng.standard_normal(n), random_psd(rng, n)).with_chol()
    else:
        init = initial
    return GaussMarkovModel(n, horizon, transitions, records, init)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
