"""Forward half of the backward-forward smoother.

Given the backward pass output, the initial fusion combines the
x0-likelihood with the prior (proper or flat), yielding the marginal
likelihood, and the smoothing marginals then follow by propagating through
the posterior transition kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .backward import (
    DegenerateGaussian,
    backward_pass,
    likelihood_moments,
)
from .linalg import LOG_2PI
from .model import FlatEverywhere, FlatOnSupport, Proper


@dataclass
class GaussianMarginal:
    """Mean and covariance of one smoothing (or filtering) marginal."""

    mean: np.ndarray
    cov: np.ndarray
    cov_chol: np.ndarray | None = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov_chol is not None:
            self.cov_chol = np.asarray(self.cov_chol, dtype=float)


@dataclass
class SmoothingResult:
    """Smoothing marginals t = 0..T plus the path-posterior transition kernels."""

    marginals: list[GaussianMarginal]
    transitions: list
    log_marginal_likelihood: float
    initial_posterior_kind: str  # "proper" | "degenerate-on-support"
    initial_posterior: object = None  # DegenerateGaussian when degenerate


def fuse_initial(lik0, initial, rtol=linalg.DEFAULT_RANK_RTOL):
    """Combine the x0-likelihood with the prior by Bayes' rule.

    Returns (posterior over x0, log marginal likelihood). For a flat prior
    on the likelihood's support, the posterior is the likelihood's own
    degenerate Gaussian and the evidence uses the pseudo-determinant. For a
    prior flat on all of R^n the evidence is infinite.
    """
    if isinstance(initial, Proper):
        if lik0.is_empty:
            init = initial.with_chol()
            return GaussianMarginal(init.mean, init.cov, init.chol), 0.0
        c_bar, y_bar = lik0.c_bar, lik0.y_bar
        s0 = c_bar @ initial.cov @ c_bar.T + np.eye(lik0.m_bar)
        s0 = 0.5 * (s0 + s0.T)
        l0 = linalg.chol_lower(s0)
        resid = y_bar - c_bar @ initial.mean
        white = linalg.solve_triangular(l0, resid)
        gain = linalg.solve_triangular(
            l0, linalg.solve_triangular(l0, c_bar @ initial.cov), trans=True
        ).T
        mean = initial.mean + gain @ resid
        cov = initial.cov - gain @ s0 @ gain.T
        cov = 0.5 * (cov + cov.T)
        # log N(y_bar; c_bar mu0, S0) plus the (2pi)^{m_bar/2} carried by h
        log_l = (
            lik0.log_c
            - float(np.sum(np.log(np.diag(l0))))
            - 0.5 * float(white @ white)
        )
        return GaussianMarginal(mean, cov), log_l

    moments = likelihood_moments(lik0, rtol)
    if isinstance(initial, FlatOnSupport):
        logdet, rank = linalg.pseudo_logdet(moments.cov, rtol)
        log_l = lik0.log_c + 0.5 * (rank * LOG_2PI + logdet)
        return moments, log_l
    if isinstance(initial, FlatEverywhere):
        return moments, math.inf
    raise TypeError(f"unknown initial distribution {initial!r}")


def propagate_marginals(
    posterior0,
    transitions,
    log_marginal_likelihood=math.nan,
    initial_posterior_kind="proper",
):
    """Propagate the x0 posterior through the posterior transition kernels."""
    if isinstance(posterior0, DegenerateGaussian):
        first = GaussianMarginal(posterior0.mean, posterior0.cov)
        initial_posterior = posterior0
    else:
        first = posterior0
        initial_posterior = None
    marginals = [first]
    for trans in transitions:
        prev = marginals[-1]
        mean = trans.phi_post @ prev.mean + trans.offset_post
        cov = trans.phi_post @ prev.cov @ trans.phi_post.T + trans.cov_post
        marginals.append(GaussianMarginal(mean, 0.5 * (cov + cov.T)))
    return SmoothingResult(
        marginals,
        list(transitions),
        log_marginal_likelihood,
        initial_posterior_kind,
        initial_posterior,
    )


def smooth(model, rtol=linalg.DEFAULT_RANK_RTOL, backward=None):
    """Full backward-forward smoothing of a model.

    ``backward`` may supply a precomputed :class:`BackwardPassResult` (for
    example from the square-root pass); otherwise the plain backward pass is
    run.
    """
    if backward is None:
        backward = backward_pass(model)
    posterior0, log_l = fuse_initial(backward.initial_likelihood, model.initial, rtol)
    kind = (
        "proper"
        if isinstance(model.initial, Proper)
        else "degenerate-on-support"
    )
    return propagate_marginals(posterior0, backward.transitions_post, log_l, kind)


def _degenerate_logpdf(x, mean, cov, rtol=linalg.DEFAULT_RANK_RTOL, leak_tol=1e-6):
    """Log-density of a possibly singular Gaussian on its affine support."""
    x = np.asarray(x, dtype=float).ravel()
    d = x - mean
    cov_pinv, rank = linalg.pseudo_inverse(cov, rtol)
    if rank < cov.shape[0]:
        leak = d - cov @ (cov_pinv @ d)
        if np.linalg.norm(leak) > leak_tol * (1.0 + np.linalg.norm(d)):
            raise ValueError("point lies off the support of a degenerate Gaussian")
    if rank == 0:
        return 0.0
    logdet, _ = linalg.pseudo_logdet(cov, rtol)
    return -0.5 * (rank * LOG_2PI + logdet + float(d @ cov_pinv @ d))


def log_path_posterior(result, path, model=None, rtol=linalg.DEFAULT_RANK_RTOL):
    """Log-density of a state path under the forward Markov path posterior."""
    if len(path) != len(result.transitions) + 1:
        raise ValueError("path must have one state per time index 0..T")
    path = [np.asarray(x, dtype=float).ravel() for x in path]
    if model is not None:
        for x in path:
            if x.shape != (model.state_dim,):
                raise ValueError("path state dimension mismatch")
    first = result.marginals[0]
    total = _degenerate_logpdf(path[0], first.mean, first.cov, rtol)
    for t, trans in enumerate(result.transitions, start=1):
        mean = trans.phi_post @ path[t - 1] + trans.offset_post
        total += _degenerate_logpdf(path[t], mean, trans.cov_post, rtol)
    return total
