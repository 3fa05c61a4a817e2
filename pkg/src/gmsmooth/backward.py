"""Backward recursion over log-quadratic likelihoods.

The likelihood of future observations given the current state is carried as
h(x) = exp(log_c - 0.5 * |y_bar - c_bar x|^2), a linear-Gaussian
pseudo-observation of x with identity noise. The recursion alternates a
prediction step (marginalizing one transition, which also yields the forward
posterior transition kernel) with a fusion step (stacking the pseudo-
observation with the whitened real observation, QR-compressing when the
stack grows past the state dimension).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .linalg import LOG_2PI

# Negative-eigenvalue slack tolerated when clamping posterior noise
# covariances; anything worse is a genuine failure.
_PSD_CLAMP_TOL = 1e-10


@dataclass
class LogQuadLikelihood:
    """Parameters (log_c, y_bar, c_bar) of h(x) = c exp(-|y_bar - c_bar x|^2 / 2)."""

    log_c: float
    y_bar: np.ndarray
    c_bar: np.ndarray

    def __post_init__(self):
        self.y_bar = np.asarray(self.y_bar, dtype=float).ravel()
        self.c_bar = np.atleast_2d(np.asarray(self.c_bar, dtype=float))
        if self.c_bar.shape[0] != self.y_bar.shape[0]:
            raise ValueError("y_bar and c_bar row counts differ")

    @classmethod
    def empty(cls, state_dim):
        """The unit likelihood h = 1 (no data)."""
        return cls(0.0, np.zeros(0), np.zeros((0, state_dim)))

    @property
    def m_bar(self):
        return self.y_bar.shape[0]

    @property
    def state_dim(self):
        return self.c_bar.shape[1]

    @property
    def is_empty(self):
        return self.m_bar == 0

    def log_value(self, x):
        """Evaluate log h(x); x may be a vector or a (k, n) batch."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            r = self.y_bar - self.c_bar @ x
            return self.log_c - 0.5 * float(r @ r)
        r = self.y_bar[None, :] - x @ self.c_bar.T
        return self.log_c - 0.5 * np.sum(r * r, axis=1)


@dataclass
class PosteriorTransition:
    """Forward Markov kernel of the smoothing distribution at one step."""

    phi_post: np.ndarray
    offset_post: np.ndarray
    cov_post: np.ndarray
    cov_post_chol: np.ndarray | None = None

    def __post_init__(self):
        self.phi_post = np.asarray(self.phi_post, dtype=float)
        self.offset_post = np.asarray(self.offset_post, dtype=float).ravel()
        self.cov_post = np.asarray(self.cov_post, dtype=float)
        if self.cov_post_chol is not None:
            self.cov_post_chol = np.asarray(self.cov_post_chol, dtype=float)


@dataclass
class DegenerateGaussian:
    """Gaussian supported on the affine set mean + range(cov)."""

    mean: np.ndarray
    cov: np.ndarray
    rank: int
    support_basis: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.cov = np.asarray(self.cov, dtype=float)
        self.support_basis = np.asarray(self.support_basis, dtype=float)


@dataclass
class BackwardPassResult:
    """All intermediate likelihoods and posterior transitions, t = 1..T."""

    likelihood_given_t: list[LogQuadLikelihood]
    likelihood_given_prev: list[LogQuadLikelihood]
    transitions_post: list[PosteriorTransition]

    @property
    def initial_likelihood(self):
        """h over x_0 carrying all observations (alias of the t=1 entry)."""
        return self.likelihood_given_prev[0]


def terminal_init(obs):
    """Whitened single-observation likelihood; the unit likelihood if missing."""
    if obs.model is None or obs.value is None:
        state_dim = None
        if obs.model is not None:
            state_dim = obs.model.c.shape[1]
        if state_dim is None:
            raise ValueError("missing observation without a sensor has no state dim")
        return LogQuadLikelihood.empty(state_dim)
    sensor = obs.model
    m = sensor.obs_dim
    l = sensor.noise_chol
    y_bar = linalg.solve_triangular(l, obs.value)
    c_bar = linalg.solve_triangular(l, sensor.c)
    log_c = -0.5 * m * LOG_2PI - float(np.sum(np.log(np.diag(l))))
    return LogQuadLikelihood(log_c, y_bar, c_bar)


def terminal_init_missing(state_dim):
    """Unit likelihood for a time step without a sensor."""
    return LogQuadLikelihood.empty(state_dim)


def _clamp_psd(q):
    """Symmetrize and clamp tiny negative eigenvalues of a covariance."""
    q = 0.5 * (q + q.T)
    w, v = np.linalg.eigh(q)
    scale = max(1.0, np.max(np.abs(w), initial=0.0))
    if w.min(initial=0.0) < -_PSD_CLAMP_TOL * scale:
        raise linalg.FactorizationError(
            f"posterior noise covariance has eigenvalue {w.min():.3e}"
        )
    if w.min(initial=0.0) < 0.0:
        q = (v * np.clip(w, 0.0, None)[None, :]) @ v.T
        q = 0.5 * (q + q.T)
    return q


def predict_backward(lik, trans):
    """One backward prediction through a transition.

    Maps the likelihood over x_t to the likelihood over x_{t-1} and returns
    the forward posterior transition kernel for x_t given x_{t-1}.
    """
    if lik.is_empty:
        post = PosteriorTransition(
            trans.phi, trans.offset, trans.noise_cov, trans.noise_chol
        )
        return LogQuadLikelihood.empty(lik.state_dim), post

    c_bar, y_bar = lik.c_bar, lik.y_bar
    q, phi, u = trans.noise_cov, trans.phi, trans.offset
    m_bar = lik.m_bar

    cq = c_bar @ q
    r_hat = np.eye(m_bar) + cq @ c_bar.T
    r_hat = 0.5 * (r_hat + r_hat.T)
    try:
        l_hat = linalg.chol_lower(r_hat)
    except linalg.FactorizationError as exc:
        # min eigenvalue of r_hat is >= 1 in exact arithmetic
        raise linalg.FactorizationError(
            "internal error: innovation covariance I + C Q C' lost positive "
            "definiteness"
        ) from exc

    resid = y_bar - c_bar @ u
    y_new = linalg.solve_triangular(l_hat, resid)
    c_new = linalg.solve_triangular(l_hat, c_bar @ phi)
    log_c_new = lik.log_c - float(np.sum(np.log(np.diag(l_hat))))

    # gain = Q C' R_hat^{-1}, via two triangular solves
    gain = linalg.solve_triangular(
        l_hat, linalg.solve_triangular(l_hat, cq), trans=True
    ).T
    phi_post = (np.eye(lik.state_dim) - gain @ c_bar) @ phi
    u_post = u + gain @ resid
    q_post = _clamp_psd(q - gain @ r_hat @ gain.T)

    lik_prev = LogQuadLikelihood(log_c_new, y_new, c_new)
    post = PosteriorTransition(phi_post, u_post, q_post)
    return lik_prev, post


def fuse_observation(lik_prev, obs_lik):
    """Multiply two log-quadratic likelihoods over the same state.

    Pseudo-observation rows of ``lik_prev`` are stacked on top of
    ``obs_lik``. If the stack stays within the state dimension it is kept as
    is; otherwise the stacked matrix is QR-compressed to n rows and the
    orthogonal data residual is absorbed into the log-constant.
    """
    if lik_prev.state_dim != obs_lik.state_dim:
        raise ValueError("likelihoods are over different state dimensions")
    if lik_prev.is_empty:
        return obs_lik
    if obs_lik.is_empty:
        return lik_prev

    n = lik_prev.state_dim
    y_hat = np.concatenate([lik_prev.y_bar, obs_lik.y_bar])
    c_hat = np.vstack([lik_prev.c_bar, obs_lik.c_bar])
    log_c = lik_prev.log_c + obs_lik.log_c
    if y_hat.shape[0] <= n:
        return LogQuadLikelihood(log_c, y_hat, c_hat)

    v, u = linalg.qr_upper(c_hat, complete=True)
    c_new = u[:n, :]
    y_new = v[:, :n].T @ y_hat
    e = v[:, n:].T @ y_hat
    return LogQuadLikelihood(log_c - 0.5 * float(e @ e), y_new, c_new)


def backward_pass(model, predict=predict_backward):
    """Run the full backward recursion over a validated model.

    ``predict`` may be swapped for the square-root variant; it must have the
    same signature as :func:`predict_backward`.
    """
    n, big_t = model.state_dim, model.horizon
    likelihood_given_t = [None] * big_t
    likelihood_given_prev = [None] * big_t
    transitions_post = [None] * big_t

    lik = LogQuadLikelihood.empty(n)  # h over x_T with no data yet
    for t in range(big_t, 0, -1):
        rec = model.observation(t)
        if rec.model is None or rec.value is None:
            obs_lik = LogQuadLikelihood.empty(n)
        else:
            obs_lik = terminal_init(rec)
        lik_t = fuse_observation(lik, obs_lik)
        likelihood_given_t[t - 1] = lik_t
        lik, post = predict(lik_t, model.transition(t))
        likelihood_given_prev[t - 1] = lik
        transitions_post[t - 1] = post
    return BackwardPassResult(likelihood_given_t, likelihood_given_prev, transitions_post)


def to_information(lik):
    """Information-form parameters (xi, lambda) of the likelihood."""
    xi = lik.c_bar.T @ lik.y_bar
    lam = lik.c_bar.T @ lik.c_bar
    return xi, 0.5 * (lam + lam.T)


def likelihood_moments(lik, rtol=linalg.DEFAULT_RANK_RTOL):
    """Minimum-norm maximizer and pseudo-covariance of a likelihood.

    The mean is the minimum-norm maximum likelihood estimate of the state,
    the covariance is the pseudo-inverse of the information matrix, and the
    support basis spans the affine set on which the induced density lives.
    """
    n = lik.state_dim
    if lik.is_empty:
        return DegenerateGaussian(np.zeros(n), np.zeros((n, n)), 0, np.zeros((n, 0)))
    c_pinv, rank = linalg.pseudo_inverse(lik.c_bar, rtol)
    mean = c_pinv @ lik.y_bar
    cov = c_pinv @ c_pinv.T
    cov = 0.5 * (cov + cov.T)
    if rank == 0:
        basis = np.zeros((n, 0))
    else:
        # orthonormal basis of range(cov) = row space of c_bar
        _, s, vt = np.linalg.svd(lik.c_bar, full_matrices=False)
        basis = vt[:rank, :].T
    return DegenerateGaussian(mean, cov, rank, basis)
