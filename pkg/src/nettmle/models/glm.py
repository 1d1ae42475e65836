"""Binomial and Poisson GLMs fit by Newton/IRLS with optional L2 penalty.

The intercept column is added here: design matrices passed in hold predictors
only, and the intercept is never penalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg, stats
from scipy.special import expit

from nettmle.errors import SingularDesignError

logger = logging.getLogger(__name__)

Family = Literal["binomial", "poisson"]

TOLERANCE = 1e-8
MAX_ITERATIONS = 100
MAX_HALVINGS = 30
_MAX_ETA = 700.0


@dataclass(frozen=True)
class GlmFit:
    """Fitted coefficients; ``coefficients[0]`` is the intercept."""

    coefficients: np.ndarray
    family: Family
    l2_penalty: float
    converged: bool
    n_iterations: int
    columns: tuple[str, ...] = ()

    @property
    def n_predictors(self) -> int:
        return len(self.coefficients) - 1


def _with_intercept(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


def _mean(family: Family, eta: np.ndarray) -> np.ndarray:
    if family == "binomial":
        return expit(eta)
    return np.exp(np.minimum(eta, _MAX_ETA))


def _penalized_nll(
    family: Family,
    beta: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    offset: np.ndarray,
    l2: float,
) -> float:
    eta = X @ beta + offset
    if family == "binomial":
        loglik = y * eta - np.logaddexp(0.0, eta)
    else:
        loglik = y * eta - np.exp(np.minimum(eta, _MAX_ETA))
    return float(-(w * loglik).sum() + l2 * (beta[1:] ** 2).sum())


def _check_rank(X: np.ndarray, w: np.ndarray, columns: tuple[str, ...]) -> None:
    """Raise SingularDesignError naming the columns that pivoted QR finds redundant."""
    _, r, pivots = linalg.qr(np.sqrt(w)[:, None] * X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return
    tol = max(X.shape) * np.finfo(np.float64).eps * diag[0] * 1e3
    rank = int((diag > tol).sum())
    if rank < X.shape[1]:
        names = ("(intercept)",) + columns
        raise SingularDesignError([names[p] for p in sorted(pivots[rank:])])


def fit(
    family: Family,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None = None,
    offset: np.ndarray | None = None,
    l2: float = 0.0,
    columns: list[str] | tuple[str, ...] | None = None,
    max_iter: int = MAX_ITERATIONS,
    tol: float = TOLERANCE,
) -> GlmFit:
    """Fit a GLM by Newton/IRLS with step-halving on the penalized deviance.

    Solves Xᵀw(y − μ) − 2·l2·β₋₀ = 0, stopping when the max-abs score falls
    below ``tol`` or after ``max_iter`` iterations (``converged=False``).
    """
    if family not in ("binomial", "poisson"):
        raise ValueError(f"unknown family {family!r}")
    Xi = _with_intercept(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = Xi.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, design has {n} rows")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=np.float64)
    if w.shape != (n,) or off.shape != (n,):
        raise ValueError("weights and offset must match the number of rows")
    for name, arr in (("X", Xi), ("y", y), ("weights", w), ("offset", off)):
        if not np.isfinite(arr).all():
            raise ValueError(f"non-finite values in {name}")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    if l2 < 0:
        raise ValueError(f"l2 penalty must be nonnegative, got {l2}")
    if family == "binomial" and ((y < 0) | (y > 1)).any():
        raise ValueError("binomial response must lie in [0, 1]")
    if family == "poisson" and (y < 0).any():
        raise ValueError("poisson response must be nonnegative")

    names = tuple(columns) if columns is not None else tuple(f"x{j}" for j in range(p - 1))
    if len(names) != p - 1:
        raise ValueError(f"{len(names)} column names for {p - 1} predictors")
    if l2 == 0.0:
        _check_rank(Xi, w, names)

    penalty = np.full(p, 2.0 * l2)
    penalty[0] = 0.0

    beta = np.zeros(p)
    if offset is None and w.sum() > 0:
        ybar = np.clip((w * y).sum() / w.sum(), 1e-6, 1 - 1e-6 if family == "binomial" else np.inf)
        beta[0] = np.log(ybar / (1 - ybar)) if family == "binomial" else np.log(max(ybar, 1e-6))

    objective = _penalized_nll(family, beta, Xi, y, w, off, l2)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        mu = _mean(family, Xi @ beta + off)
        score = Xi.T @ (w * (y - mu)) - penalty * beta
        if np.max(np.abs(score)) < tol:
            converged = True
            iteration -= 1
            break
        variance = mu * (1.0 - mu) if family == "binomial" else mu
        hessian = (Xi * (w * variance)[:, None]).T @ Xi + np.diag(penalty)
        try:
            step = linalg.solve(hessian, score, assume_a="sym")
        except (linalg.LinAlgError, ValueError):
            step = linalg.lstsq(hessian, score)[0]

        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = beta + scale * step
            cand_obj = _penalized_nll(family, candidate, Xi, y, w, off, l2)
            if np.isfinite(cand_obj) and cand_obj <= objective + 1e-12 * abs(objective):
                break
            scale *= 0.5
        else:
            logger.debug("step-halving exhausted at iteration %d", iteration)
            break
        beta, objective = candidate, cand_obj
    else:
        mu = _mean(family, Xi @ beta + off)
        score = Xi.T @ (w * (y - mu)) - penalty * beta
        converged = bool(np.max(np.abs(score)) < tol)

    if not converged:
        logger.warning("%s GLM did not converge after %d iterations", family, iteration)
    else:
        logger.debug("%s GLM converged in %d iterations", family, iteration)
    return GlmFit(
        coefficients=beta,
        family=family,
        l2_penalty=l2,
        converged=converged,
        n_iterations=iteration,
        columns=names,
    )


def linear_predictor(glm: GlmFit, X: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
    Xi = _with_intercept(X)
    if Xi.shape[1] != len(glm.coefficients):
        raise ValueError(
            f"design has {Xi.shape[1] - 1} predictors, fit expects {glm.n_predictors}"
        )
    eta = Xi @ glm.coefficients
    if offset is not None:
        eta = eta + np.asarray(offset, dtype=np.float64)
    return eta


def predict(glm: GlmFit, X: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
    """Fitted means: probabilities for binomial, rates for Poisson."""
    return _mean(glm.family, linear_predictor(glm, X, offset))


def density(glm: GlmFit, X: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Model probability of each observed value: Bernoulli or Poisson pmf."""
    observed = np.asarray(observed, dtype=np.float64)
    mu = predict(glm, X)
    if observed.shape != mu.shape:
        raise ValueError(f"observed has shape {observed.shape}, expected {mu.shape}")
    if glm.family == "binomial":
        if not np.isin(observed, (0.0, 1.0)).all():
            raise ValueError("binomial density needs observed values in {0, 1}")
        return np.where(observed == 1.0, mu, 1.0 - mu)
    if (observed < 0).any() or not np.array_equal(observed, np.round(observed)):
        raise ValueError("poisson density needs nonnegative integer observed values")
    return stats.poisson.pmf(observed, mu)
