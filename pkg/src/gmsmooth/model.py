"""Partially observed Gauss-Markov models.

A model is a time-indexed collection of linear-Gaussian transitions
x_t = Phi x_{t-1} + u + w, w ~ N(0, Q), observed through y_t = C x_t + v,
v ~ N(0, R), with R positive definite. Observations may be structurally
missing (no sensor at t: record.model is None) or simply not yet attached
(record.value is None). The initial state is either a proper Gaussian or a
flat improper prior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg


@dataclass
class Transition:
    """One step x_t = phi x_{t-1} + offset + noise, noise ~ N(0, noise_cov)."""

    phi: np.ndarray
    offset: np.ndarray
    noise_cov: np.ndarray
    noise_chol: np.ndarray | None = None

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.offset = np.asarray(self.offset, dtype=float).ravel()
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        if self.noise_chol is not None:
            self.noise_chol = np.asarray(self.noise_chol, dtype=float)

    def with_noise_chol(self):
        """Return a copy with a PSD triangular factor of noise_cov filled in."""
        if self.noise_chol is not None:
            return self
        return replace(self, noise_chol=linalg.psd_chol(self.noise_cov))


@dataclass
class ObservationModel:
    """Linear-Gaussian sensor y = c x + v with PD noise covariance."""

    c: np.ndarray
    noise_cov: np.ndarray
    noise_chol: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        if self.noise_chol is None:
            try:
                self.noise_chol = linalg.chol_lower(self.noise_cov)
            except linalg.FactorizationError:
                # left unset; validate() reports the non-PD covariance
                self.noise_chol = None
        else:
            self.noise_chol = np.asarray(self.noise_chol, dtype=float)

    @property
    def obs_dim(self):
        return self.c.shape[0]


@dataclass
class ObservationRecord:
    """Observation slot at time t; model None means no sensor at t."""

    time_index: int
    model: ObservationModel | None = None
    value: np.ndarray | None = None

    def __post_init__(self):
        if self.value is not None:
            self.value = np.asarray(self.value, dtype=float).ravel()

    @property
    def is_missing(self):
        return self.model is None or self.value is None


@dataclass
class Proper:
    """Proper Gaussian initial distribution N(mean, cov)."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray | None = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.cov = np.asarray(self.cov, dtype=float)
        if self.chol is not None:
            self.chol = np.asarray(self.chol, dtype=float)

    def with_chol(self):
        if self.chol is not None:
            return self
        return replace(self, chol=linalg.psd_chol(self.cov))


class FlatOnSupport:
    """Improper prior: indicator of the affine support of the x0-likelihood."""

    def __repr__(self):
        return "FlatOnSupport()"


class FlatEverywhere:
    """Improper prior flat on all of R^n; x0 is effectively a parameter."""

    def __repr__(self):
        return "FlatEverywhere()"


InitialDistribution = Proper | FlatOnSupport | FlatEverywhere


@dataclass
class GaussMarkovModel:
    state_dim: int
    horizon: int
    transitions: list[Transition]
    observations: list[ObservationRecord]
    initial: InitialDistribution

    def transition(self, t):
        """Transition taking x_{t-1} to x_t, for t = 1..T."""
        return self.transitions[t - 1]

    def observation(self, t):
        """Observation record at time t, for t = 1..T."""
        return self.observations[t - 1]


def validate(model):
    """Return a list of violation messages; empty list means the model is ok."""
    violations = []
    n, big_t = model.state_dim, model.horizon
    if len(model.transitions) != big_t:
        violations.append(
            f"expected {big_t} transitions, got {len(model.transitions)}"
        )
    if len(model.observations) != big_t:
        violations.append(
            f"expected {big_t} observation records, got {len(model.observations)}"
        )
    for t, trans in enumerate(model.transitions, start=1):
        if trans.phi.shape != (n, n):
            violations.append(f"transition matrix at t={t} has shape {trans.phi.shape}")
        if trans.offset.shape != (n,):
            violations.append(f"transition offset at t={t} has shape {trans.offset.shape}")
        if trans.noise_cov.shape != (n, n):
            violations.append(
                f"transition noise covariance at t={t} has shape {trans.noise_cov.shape}"
            )
        else:
            sym_err = np.max(np.abs(trans.noise_cov - trans.noise_cov.T), initial=0.0)
            if sym_err > 1e-10 * max(1.0, np.max(np.abs(trans.noise_cov))):
                violations.append(f"transition noise covariance at t={t} not symmetric")
            else:
                w = np.linalg.eigvalsh(trans.noise_cov)
                if w.min(initial=0.0) < -1e-10 * max(1.0, w.max(initial=0.0)):
                    violations.append(f"transition noise covariance at t={t} not PSD")
        if trans.noise_chol is not None and trans.noise_cov.shape == (n, n):
            rec = trans.noise_chol @ trans.noise_chol.T
            if np.max(np.abs(rec - trans.noise_cov)) > 1e-10 * max(
                1.0, np.max(np.abs(trans.noise_cov))
            ):
                violations.append(
                    f"transition noise factor at t={t} does not reconstruct covariance"
                )
    n_present = 0
    for rec in model.observations:
        t = rec.time_index
        if rec.model is None:
            if rec.value is not None:
                violations.append(f"observation value without sensor model at t={t}")
            continue
        obs = rec.model
        m = obs.c.shape[0]
        if obs.c.ndim != 2 or obs.c.shape[1] != n:
            violations.append(f"observation matrix at t={t} has shape {obs.c.shape}")
        if m > n:
            violations.append(f"observation dimension {m} exceeds state dimension at t={t}")
        if obs.noise_cov.shape != (m, m):
            violations.append(
                f"observation covariance at t={t} has shape {obs.noise_cov.shape}"
            )
        else:
            w = np.linalg.eigvalsh(0.5 * (obs.noise_cov + obs.noise_cov.T))
            if w.size == 0 or w.min() <= 0.0:
                violations.append(f"observation covariance not PD at t={t}")
        if rec.value is not None:
            n_present += 1
            if rec.value.shape != (m,):
                violations.append(
                    f"observation value at t={t} has dimension {rec.value.shape[0]}, "
                    f"expected {m}"
                )
    if isinstance(model.initial, Proper):
        init = model.initial
        if init.mean.shape != (n,):
            violations.append(f"initial mean has shape {init.mean.shape}")
        if init.cov.shape != (n, n):
            violations.append(f"initial covariance has shape {init.cov.shape}")
        else:
            w = np.linalg.eigvalsh(0.5 * (init.cov + init.cov.T))
            if w.min(initial=0.0) < -1e-10 * max(1.0, w.max(initial=0.0)):
                violations.append("initial covariance not PSD")
    if n_present == 0:
        violations.append("model has no non-missing observation")
    return violations


def simulate(model, seed):
    """Draw a state trajectory and observations; deterministic given seed.

    Returns (states, observations) with states indexed t = 0..T and
    observations indexed t = 1..T (None wherever no sensor is defined).
    """
    if not isinstance(model.initial, Proper):
        raise ValueError("simulation requires a proper initial distribution")
    rng = np.random.default_rng(seed)
    init = model.initial.with_chol()
    x = init.mean + init.chol @ rng.standard_normal(model.state_dim)
    states = [x]
    observations = []
    for t in range(1, model.horizon + 1):
        trans = model.transition(t).with_noise_chol()
        x = trans.phi @ x + trans.offset + trans.noise_chol @ rng.standard_normal(
            model.state_dim
        )
        states.append(x)
        rec = model.observation(t)
        if rec.model is None:
            observations.append(None)
        else:
            obs = rec.model
            y = obs.c @ x + obs.noise_chol @ rng.standard_normal(obs.obs_dim)
            observations.append(y)
    return states, observations


def attach_observations(model, values):
    """Return a copy of the model with observation values filled in.

    ``values`` is a length-T list of vectors or None, as produced by
    :func:`simulate`; entries at times without a sensor must be None.
    """
    if len(values) != model.horizon:
        raise ValueError("values must have one entry per time step")
    records = []
    for rec, y in zip(model.observations, values):
        if y is not None and rec.model is None:
            raise ValueError(f"value supplied at t={rec.time_index} without a sensor")
        records.append(ObservationRecord(rec.time_index, rec.model, y))
    return replace(model, observations=records)


def wiener_acceleration_model(dt, sigmas, lambdas, horizon, first_obs_index):
    """Planar tracking model: two independent integrated-Wiener-acceleration axes.

    State ordering is (p1, v1, a1, p2, v2, a2). Position is observed with
    noise variances ``lambdas``; times before ``first_obs_index`` carry no
    sensor. The initial distribution is flat on all of R^6. Observation
    values are left unset; use :func:`attach_observations` after simulating.
    """
    sigmas = np.asarray(sigmas, dtype=float).ravel()
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if sigmas.shape != (2,) or lambdas.shape != (2,):
        raise ValueError("sigmas and lambdas must each have two entries")
    if np.any(sigmas <= 0.0) or np.any(lambdas <= 0.0):
        raise ValueError("sigmas and lambdas must be positive")
    if not 1 <= first_obs_index <= horizon:
        raise ValueError("first_obs_index must lie in 1..horizon")

    phi_axis = np.array(
        [[1.0, dt, 0.5 * dt**2], [0.0, 1.0, dt], [0.0, 0.0, 1.0]]
    )
    q_unit = np.array(
        [
            [dt**5 / 20.0, dt**4 / 8.0, dt**3 / 6.0],
            [dt**4 / 8.0, dt**3 / 3.0, dt**2 / 2.0],
            [dt**3 / 6.0, dt**2 / 2.0, dt],
        ]
    )
    phi = np.zeros((6, 6))
    q = np.zeros((6, 6))
    phi[:3, :3] = phi_axis
    phi[3:, 3:] = phi_axis
    q[:3, :3] = sigmas[0] ** 2 * q_unit
    q[3:, 3:] = sigmas[1] ** 2 * q_unit
    trans = Transition(phi, np.zeros(6), q).with_noise_chol()

    c = np.zeros((2, 6))
    c[0, 0] = 1.0
    c[1, 3] = 1.0
    sensor = ObservationModel(c, np.diag(lambdas))

    records = [
        ObservationRecord(t, sensor if t >= first_obs_index else None, None)
        for t in range(1, horizon + 1)
    ]
    return GaussMarkovModel(
        state_dim=6,
        horizon=horizon,
        transitions=[trans] * horizon,
        observations=records,
        initial=FlatEverywhere(),
    )


# ---------------------------------------------------------------------------
# JSON model files
#
# Schema (all matrices are nested lists, row-major):
#   {
#     "state_dim": n,
#     "horizon": T,
#     "transitions": [{"phi": ..., "offset": ..., "noise_cov": ...}, ...]
#                    or a single such object (repeated for every step),
#     "observation_models": [{"c": ..., "noise_cov": ...} or null, ...]
#                    or a single object via "observation_model",
#     "observations": [[...] or null, ...],   # length T, values y_t
#     "initial": {"kind": "proper", "mean": [...], "cov": [[...]]}
#                | {"kind": "flat_on_support"} | {"kind": "flat_everywhere"}
#   }
# ---------------------------------------------------------------------------


def model_to_dict(model):
    """Serialize a model to the JSON schema (always in expanded per-step form)."""
    if isinstance(model.initial, Proper):
        initial = {
            "kind": "proper",
            "mean": model.initial.mean.tolist(),
            "cov": model.initial.cov.tolist(),
        }
    elif isinstance(model.initial, FlatOnSupport):
        initial = {"kind": "flat_on_support"}
    else:
        initial = {"kind": "flat_everywhere"}
    return {
        "state_dim": model.state_dim,
        "horizon": model.horizon,
        "transitions": [
            {
                "phi": tr.phi.tolist(),
                "offset": tr.offset.tolist(),
                "noise_cov": tr.noise_cov.tolist(),
            }
            for tr in model.transitions
        ],
        "observation_models": [
            None
            if rec.model is None
            else {"c": rec.model.c.tolist(), "noise_cov": rec.model.noise_cov.tolist()}
            for rec in model.observations
        ],
        "observations": [
            None if rec.value is None else rec.value.tolist()
            for rec in model.observations
        ],
        "initial": initial,
    }


def model_from_dict(data):
    """Parse a model from the JSON schema; see :func:`model_to_dict`."""
    n = int(data["state_dim"])
    big_t = int(data["horizon"])

    raw_trans = data["transitions"]
    if isinstance(raw_trans, dict):
        raw_trans = [raw_trans] * big_t
    transitions = [
        Transition(tr["phi"], tr["offset"], tr["noise_cov"]) for tr in raw_trans
    ]

    if "observation_models" in data:
        raw_obs_models = data["observation_models"]
    else:
        raw_obs_models = [data.get("observation_model")] * big_t
    sensors = [
        None if om is None else ObservationModel(om["c"], om["noise_cov"])
        for om in raw_obs_models
    ]

    values = data.get("observations", [None] * big_t)
    records = [
        ObservationRecord(t, sensors[t - 1], values[t - 1])
        for t in range(1, big_t + 1)
    ]

    init = data["initial"]
    kind = init["kind"]
    if kind == "proper":
        initial = Proper(init["mean"], init["cov"])
    elif kind == "flat_on_support":
        initial = FlatOnSupport()
    elif kind == "flat_everywhere":
        initial = FlatEverywhere()
    else:
        raise ValueError(f"unknown initial distribution kind {kind!r}")

    return GaussMarkovModel(n, big_t, transitions, records, initial)


def load_model(path):
    with open(path) as fh:
        data = json.load(fh)
    return model_from_dict(data)


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")
