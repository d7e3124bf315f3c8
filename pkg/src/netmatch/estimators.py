"""Matched-pairs conditional logit, the social-influence plug-in, and baselines.

The slope estimator minimises the kernel-weighted pairwise conditional
log-likelihood

    -sum_{i<j, y_i != y_j} W_ij * log F(z_ij' b),
    z_ij = (X_i - X_j) if y_i = 1 else (X_j - X_i),

which for each discordant pair equals the two-term summand
``y_i log F(dX' b) + y_j log F(-dX' b)``. Pairs whose codegree distance is
near zero get the largest weight, so the unobserved social influence cancels
in the difference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, log_expit

from .distance import KernelSpec, codegree_distance_matrix, weight_matrix
from .errors import ConfigError, DegenerateMatchingError, PreconditionError
from .model import NetworkSample, lambda_true, logit

NORMALIZATIONS = ("mean", "sum")


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning for :func:`estimate_beta` and :func:`estimate_lambda`.

    ``prob_clip=None`` means ``1 / (n + 1)`` at call time.
    """

    kernel: KernelSpec = field(default_factory=KernelSpec)
    max_iterations: int = 100
    gradient_tolerance: float = 1e-8
    step_tolerance: float = 1e-6
    armijo: float = 1e-4
    max_halvings: int = 60
    prob_clip: Optional[float] = None
    normalization: str = "mean"

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise ConfigError("gradient_tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.prob_clip is not None and not 0 < self.prob_clip < 0.5:
            raise ConfigError("prob_clip must lie in (0, 0.5)")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")

    def clip_for(self, n: int) -> float:
        return 1.0 / (n + 1) if self.prob_clip is None else self.prob_clip


@dataclass
class EstimationResult:
    beta_hat: np.ndarray
    converged: bool
    iterations: int
    effective_pair_mass: float
    gradient_norm: float = float("nan")
    lambda_hat: Optional[np.ndarray] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        lam = None
        if self.lambda_hat is not None:
            lam = [None if not np.isfinite(v) else float(v) for v in self.lambda_hat]
        return {
            "beta_hat": [float(v) for v in self.beta_hat],
            "lambda_hat": lam,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "effective_pair_mass": float(self.effective_pair_mass),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def lambda_csv(self) -> str:
        if self.lambda_hat is None:
            raise PreconditionError("no lambda estimates attached")
        lines = ["id,lambda_hat"]
        lines += [f"{i},{'' if not np.isfinite(v) else repr(float(v))}" for i, v in enumerate(self.lambda_hat)]
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# pairwise objective
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Pairs:
    Z: np.ndarray  # oriented covariate differences, winner minus loser
    weights: np.ndarray
    scale: float  # multiplier applied to the weighted sums

    @property
    def mass(self) -> float:
        return float(self.weights.sum())


def _discordant_pairs(sample: NetworkSample, W, normalization: str = "mean") -> _Pairs:
    W = np.asarray(W, dtype=float)
    if W.shape != (sample.n, sample.n):
        raise PreconditionError(f"weight matrix must be {sample.n} x {sample.n}")
    ones = np.flatnonzero(sample.y == 1)
    zeros = np.flatnonzero(sample.y == 0)
    # every unordered discordant pair once, oriented as (y=1 agent, y=0 agent)
    a = np.repeat(ones, zeros.size)
    b = np.tile(zeros, ones.size)
    w = W[a, b]
    keep = w > 0
    a, b, w = a[keep], b[keep], w[keep]
    mass = w.sum()
    if a.size == 0 or not mass > 0:
        raise DegenerateMatchingError(
            "no discordant pair has positive kernel weight; the bandwidth may be too small"
        )
    Z = sample.X[a] - sample.X[b]
    scale = 1.0 / mass if normalization == "mean" else 1.0
    return _Pairs(Z, w, scale)


def _evaluate(pairs: _Pairs, b):
    u = pairs.Z @ b
    value = -pairs.scale * np.dot(pairs.weights, log_expit(u))
    r = pairs.weights * expit(-u)
    grad = -pairs.scale * (pairs.Z.T @ r)
    s = pairs.weights * expit(u) * expit(-u)
    hess = pairs.scale * ((pairs.Z * s[:, None]).T @ pairs.Z)
    return value, grad, hess


def pairwise_objective(b, sample: NetworkSample, W, normalization: str = "mean"):
    """Value, gradient and Hessian of the weighted pairwise conditional logit.

    Parameters
    ----------
    b : array_like, shape (k,)
    sample : NetworkSample
    W : array_like, shape (n, n)
        Symmetric non-negative pair weights.
    normalization : {"mean", "sum"}
        ``"mean"`` divides by the total weight over discordant pairs.

    Returns
    -------
    value : float
    gradient : ndarray, shape (k,)
    hessian : ndarray, shape (k, k)
    """
    if normalization not in NORMALIZATIONS:
        raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")
    pairs = _discordant_pairs(sample, W, normalization)
    return _evaluate(pairs, np.atleast_1d(np.asarray(b, dtype=float)))


def _newton(fun, x0, config: EstimatorConfig):
    """Damped Newton with Armijo backtracking by halving.

    Converged means both a small gradient and a small Newton step, so that
    runs along a separating direction (vanishing gradient, constant step)
    are reported as non-converged.
    """
    x = np.array(x0, dtype=float)
    value, grad, hess = fun(x)
    notes = []
    for it in range(config.max_iterations + 1):
        try:
            step = -np.linalg.solve(hess, grad)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            if not np.dot(step, grad) < 0:
                step = -grad
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= config.gradient_tolerance and np.linalg.norm(step) <= config.step_tolerance * (
            1.0 + np.linalg.norm(x)
        ):
            return x, True, it, gnorm, notes
        if it == config.max_iterations:
            break
        slope = float(np.dot(grad, step))
        t = 1.0
        for _ in range(config.max_halvings):
            cand = x + t * step
            cv, cg, ch = fun(cand)
            if np.isfinite(cv) and cv <= value + config.armijo * t * slope:
                break
            t *= 0.5
        else:
            notes.append(f"line search failed at iteration {it}")
            return x, False, it, gnorm, notes
        x, value, grad, hess = cand, cv, cg, ch
    notes.append(
        f"no convergence after {config.max_iterations} iterations "
        f"(|b|={np.linalg.norm(x):.3g}); possible separation"
    )
    return x, False, config.max_iterations, float(np.linalg.norm(grad)), notes


def estimate_beta(
    sample: NetworkSample, config: Optional[EstimatorConfig] = None, W=None
) -> EstimationResult:
    """Kernel-weighted matched-pairs estimate of the slope vector.

    ``W`` defaults to kernel weights of the empirical codegree distances
    under ``config.kernel``.
    """
    config = config or EstimatorConfig()
    if W is None:
        W = weight_matrix(codegree_distance_matrix(sample.D, validate=False), config.kernel, sample.n)
    pairs = _discordant_pairs(sample, W, config.normalization)
    x, converged, iters, gnorm, notes = _newton(
        lambda b: _evaluate(pairs, b), np.zeros(sample.k), config
    )
    return EstimationResult(
        beta_hat=x,
        converged=converged,
        iterations=iters,
        effective_pair_mass=pairs.mass,
        gradient_norm=gnorm,
        notes=notes,
    )


# --------------------------------------------------------------------------
# social influence
# --------------------------------------------------------------------------

def _row_sums(W):
    return np.asarray(W, dtype=float).sum(axis=1)


def estimate_prob_y(sample: NetworkSample, W, i: Optional[int] = None):
    """Kernel-smoothed ``P(y_i = 1)`` over network neighbours in codegree space.

    The sum runs over every ``j`` including ``i`` itself. With ``i=None``
    returns the vector for all agents (zero-weight rows give NaN).
    """
    W = np.asarray(W, dtype=float)
    if i is not None:
        total = W[i].sum()
        if not total > 0:
            raise DegenerateMatchingError(f"agent {i} has zero total kernel weight")
        return float(W[i] @ sample.y / total)
    total = _row_sums(W)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, W @ sample.y / np.where(total > 0, total, 1.0), np.nan)


def estimate_lambda(
    sample: NetworkSample, beta_hat, W, config: Optional[EstimatorConfig] = None, notes=None
) -> np.ndarray:
    """Plug-in estimate of each agent's social influence.

    ``lam_i = logit(clip(P_i)) - sum_j W_ij X_j' b / sum_j W_ij`` with
    ``P_i`` from :func:`estimate_prob_y` clipped to
    ``[clip, 1 - clip]``. Agents with zero weight get NaN and a note is
    appended to ``notes`` when a list is passed.
    """
    config = config or EstimatorConfig()
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    if not np.all(np.isfinite(beta_hat)):
        raise PreconditionError("beta_hat must be finite")
    W = np.asarray(W, dtype=float)
    total = _row_sums(W)
    ok = total > 0
    c = config.clip_for(sample.n)
    p = np.clip(estimate_prob_y(sample, W), c, 1.0 - c)
    safe = np.where(ok, total, 1.0)
    lam = np.full(sample.n, np.nan)
    lam[ok] = logit(p[ok]) - ((W @ (sample.X @ beta_hat)) / safe)[ok]
    if notes is not None and not ok.all():
        bad = np.flatnonzero(~ok)
        notes.append(f"lambda not estimable for {bad.size} agent(s) with zero kernel weight: {bad[:10].tolist()}")
    return lam


def estimate(sample: NetworkSample, config: Optional[EstimatorConfig] = None) -> EstimationResult:
    """Full pipeline: codegree distances, weights, slope, social influence."""
    config = config or EstimatorConfig()
    W = weight_matrix(codegree_distance_matrix(sample.D, validate=False), config.kernel, sample.n)
    result = estimate_beta(sample, config, W)
    result.lambda_hat = estimate_lambda(sample, result.beta_hat, W, config, notes=result.notes)
    return result


# --------------------------------------------------------------------------
# ordinary logit and the baselines
# --------------------------------------------------------------------------

@dataclass
class LogitFit:
    params: np.ndarray  # intercept first when fitted with one
    converged: bool
    separated: bool
    iterations: int
    gradient_norm: float
    intercept: bool
    notes: list = field(default_factory=list)

    @property
    def slopes(self) -> np.ndarray:
        return self.params[1:] if self.intercept else self.params


def fit_logit_mle(features, y, include_intercept: bool = True, max_iterations: int = 100,
                  tol: float = 1e-8) -> LogitFit:
    """Logistic regression by damped Newton on the mean log-likelihood.

    Separation is reported through ``separated`` rather than raised: the
    fit is flagged when Newton fails to settle and the coefficient norm
    keeps growing, or when the fitted probabilities reproduce ``y``.
    """
    Xf = np.asarray(features, dtype=float)
    if Xf.ndim == 1:
        Xf = Xf[:, None]
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(Xf)):
        raise PreconditionError("features contain non-finite values")
    # fit on standardized columns; neighbour sums can be O(n) and would put
    # the gradient tolerance below rounding noise otherwise
    center = Xf.mean(axis=0) if include_intercept else np.zeros(Xf.shape[1])
    scale = Xf.std(axis=0) if include_intercept else np.sqrt(np.mean(Xf**2, axis=0))
    scale = np.where(scale > 0, scale, 1.0)
    Xf = (Xf - center) / scale
    if include_intercept:
        Xf = np.column_stack([np.ones(Xf.shape[0]), Xf])
    n, m = Xf.shape
    if n <= m:
        raise PreconditionError(f"need more observations ({n}) than coefficients ({m})")
    sgn = 2.0 * y - 1.0

    def fun(b):
        u = Xf @ b
        value = -np.mean(log_expit(sgn * u))
        p = expit(u)
        grad = -(Xf.T @ (y - p)) / n
        hess = (Xf * (p * (1 - p))[:, None]).T @ Xf / n
        return value, grad, hess

    cfg = EstimatorConfig(max_iterations=max_iterations, gradient_tolerance=tol)
    b, converged, iters, gnorm, notes = _newton(fun, np.zeros(m), cfg)
    p = expit(Xf @ b)
    perfect = bool(np.max(np.abs(y - p)) < 1e-6)
    separated = perfect or (not converged and np.linalg.norm(b) > 10.0)
    if separated:
        notes.append(f"separation detected: coefficient norm {np.linalg.norm(b):.3g} diverging")
    if include_intercept:
        slopes = b[1:] / scale
        params = np.concatenate([[b[0] - slopes @ center], slopes])
    else:
        params = b / scale
    return LogitFit(params, converged and not separated, separated, iters, gnorm, include_intercept, notes)


def baseline_naive(sample: NetworkSample) -> LogitFit:
    """Logit of ``y`` on ``X`` (plus intercept), ignoring the network."""
    return fit_logit_mle(sample.X, sample.y)


def baseline_infeasible(sample: NetworkSample, lam=lambda_true) -> LogitFit:
    """Logit on ``X`` and the true social influence ``lam(w)`` with a free coefficient."""
    if sample.latent is None:
        raise PreconditionError("the infeasible logit needs the latent draws w")
    influence = np.asarray(lam(sample.latent.w), dtype=float)
    return fit_logit_mle(np.column_stack([sample.X, influence]), sample.y)


def baseline_with_controls(sample: NetworkSample) -> LogitFit:
    """Logit on ``X``, neighbours' summed covariates and neighbours' summed outcomes."""
    D = sample.D.astype(float)
    feats = np.column_stack([sample.X, D @ sample.X, D @ sample.y.astype(float)])
    return fit_logit_mle(feats, sample.y)
