"""Newton mode finding and the Laplace approximation of the prior normalizer.

The unnormalized log density ``<theta, s> - alpha * k(theta)`` is strictly
concave for proper hyperparameters, so Newton's method from the uniform
point converges to the unique mode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NumericError
from .model import log_partition, probs_from_theta
from .prior import HyperParams

__all__ = [
    "LaplaceResult",
    "log_unnorm_density",
    "density_gradient",
    "density_hessian",
    "find_mode",
    "laplace_log_norm_const",
]

GRAD_TOL = 1e-8
MAX_ITER = 200
STEP_TOL = 1e-6
MIN_CELL = 1e-12
RIDGE = 1e-10
_LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True)
class LaplaceResult:
    mode: np.ndarray
    log_norm_const: float
    gradient_norm_at_mode: float
    newton_iterations: int


def log_unnorm_density(theta, hp: HyperParams) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(theta @ hp.s - hp.alpha * log_partition(theta, hp.iset))


def density_gradient(theta, hp: HyperParams) -> np.ndarray:
    """``s - alpha * m(theta)`` with ``m`` the model margins of ``p(theta)``."""
    p = probs_from_theta(theta, hp.iset)
    return hp.s - hp.alpha * hp.iset.margins(p)


def _grad_hess(theta, hp: HyperParams):
    X = hp.iset.design
    p = probs_from_theta(theta, hp.iset)
    m = X.T @ p
    cov = (X.T * p) @ X - np.outer(m, m)
    return hp.s - hp.alpha * m, -hp.alpha * cov


def density_hessian(theta, hp: HyperParams) -> np.ndarray:
    """``-alpha`` times the covariance of the margin indicators under ``p(theta)``."""
    return _grad_hess(theta, hp)[1]


def _cholesky(neg_hess: np.ndarray):
    try:
        return cho_factor(neg_hess, lower=True)
    except LinAlgError:
        pass
    try:
        return cho_factor(neg_hess + RIDGE * np.eye(len(neg_hess)), lower=True)
    except LinAlgError:
        raise NumericError("negative Hessian is not positive definite") from None


def find_mode(hp: HyperParams, tol: float = GRAD_TOL, max_iter: int = MAX_ITER,
              start=None):
    """Newton ascent with step halving. Returns ``(mode, grad_norm, iterations)``.

    Convergence needs a small gradient and a small Newton step: on the
    boundary of the mean space the gradient vanishes only asymptotically
    while the Newton step stays of order one, which the iteration cap
    turns into an error. A stationary point with a cell probability below
    ``MIN_CELL`` is a boundary artefact of rounding and is rejected too.
    """
    theta = np.zeros(hp.iset.dim) if start is None else np.array(start, dtype=float)
    f = log_unnorm_density(theta, hp)
    grad, hess = _grad_hess(theta, hp)
    gnorm = float(np.max(np.abs(grad), initial=0.0))
    for it in range(max_iter):
        step = cho_solve(_cholesky(-hess), grad)
        if gnorm <= tol and float(np.max(np.abs(step), initial=0.0)) <= STEP_TOL:
            if probs_from_theta(theta, hp.iset).min() <= MIN_CELL:
                break
            return theta, gnorm, it
        slack = 1e-12 * max(1.0, abs(f))
        t = 1.0
        for _ in range(60):
            candidate = theta + t * step
            try:
                f_new = log_unnorm_density(candidate, hp)
            except NumericError:
                f_new = -np.inf
            if f_new >= f - slack:
                break
            t *= 0.5
        else:
            break
        theta, f = candidate, f_new
        grad, hess = _grad_hess(theta, hp)
        gnorm = float(np.max(np.abs(grad), initial=0.0))
    raise NumericError("Newton iteration did not converge", last_iterate=theta,
                       gradient_norm=gnorm)


def laplace_log_norm_const(hp: HyperParams) -> LaplaceResult:
    """``f(mode) + d/2 log(2 pi) - 1/2 log det(-H(mode))``."""
    mode, gnorm, iters = find_mode(hp)
    _, hess = _grad_hess(mode, hp)
    c, _ = _cholesky(-hess)
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    value = log_unnorm_density(mode, hp) + 0.5 * hp.iset.dim * _LOG_2PI - 0.5 * logdet
    if not np.isfinite(value):
        raise NumericError("Laplace approximation is not finite", value=value)
    return LaplaceResult(mode, value, gnorm, iters)
