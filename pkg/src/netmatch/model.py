"""Model primitives and the data-generating process.

Outcomes follow ``y_i = 1{X_i b + lam(w_i) - eps_i >= 0}`` and links follow
``D_ij = 1{f(w_i, w_j) >= eta_ij} 1{i != j}`` with ``w_i``, ``eta_ij``
standard uniform and ``eps_i`` standard logistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import expit

from .errors import DomainError, ValidationError

SeedLike = Union[int, Sequence[int]]

LINK_VARIANTS = ("blockmodel", "beta", "homophily", "grid")

_THIRD = 1.0 / 3.0
_TWO_THIRDS = 2.0 / 3.0


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Counter-based Philox generator keyed by an int or a tuple of ints.

    Tuples are how per-replication streams are derived, e.g.
    ``(master_seed, n, rep_index)``.
    """
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


# --------------------------------------------------------------------------
# link functions
# --------------------------------------------------------------------------

def _blockmodel(x, y):
    bx = np.where(x <= _THIRD, 0, np.where(x <= _TWO_THIRDS, 1, 2))
    by = np.where(y <= _THIRD, 0, np.where(y <= _TWO_THIRDS, 1, 2))
    # 1/3 on the (A,B), (A,C), (B,B), (C,C) block pairs and their mirrors
    on = np.array([[0, 1, 1], [1, 1, 0], [1, 0, 1]], dtype=bool)
    return np.where(on[bx, by], _THIRD, 0.0)


def _beta(x, y):
    return expit(x + y)


def _homophily(x, y):
    return 1.0 - (x - y) ** 2


@dataclass(frozen=True, eq=False)
class LinkFunction:
    """Symmetric link probability ``f: [0,1]^2 -> [0,1]``.

    Use the constructors :meth:`blockmodel`, :meth:`beta`, :meth:`homophily`
    or :meth:`from_grid` rather than instantiating directly.
    """

    variant: str
    grid: Optional[np.ndarray] = None
    _interp: Optional[RegularGridInterpolator] = field(default=None, repr=False)

    @classmethod
    def blockmodel(cls) -> "LinkFunction":
        return cls("blockmodel")

    @classmethod
    def beta(cls) -> "LinkFunction":
        return cls("beta")

    @classmethod
    def homophily(cls) -> "LinkFunction":
        return cls("homophily")

    @classmethod
    def from_grid(cls, values) -> "LinkFunction":
        """Link function from an ``m x m`` table on the uniform mesh of [0,1]^2.

        Evaluation is bilinear, symmetrized as ``(g(x,y) + g(y,x)) / 2`` and
        clamped to [0,1].
        """
        g = np.array(values, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 2:
            raise ValidationError(f"grid must be a square matrix with m >= 2, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValidationError("grid contains non-finite values")
        g.setflags(write=False)
        mesh = np.linspace(0.0, 1.0, g.shape[0])
        interp = RegularGridInterpolator((mesh, mesh), g, method="linear")
        return cls("grid", g, interp)

    @classmethod
    def by_name(cls, name: str) -> "LinkFunction":
        if name == "grid":
            raise ValueError("grid link functions need a table; use LinkFunction.from_grid")
        if name not in LINK_VARIANTS:
            raise ValueError(f"unknown link {name!r}; choose one of {', '.join(LINK_VARIANTS)}")
        return getattr(cls, name)()

    @property
    def breakpoints(self) -> tuple:
        """Interior points of [0,1] where ``f`` may fail to be smooth."""
        if self.variant == "blockmodel":
            return (_THIRD, _TWO_THIRDS)
        if self.variant == "grid":
            return tuple(np.linspace(0.0, 1.0, self.grid.shape[0])[1:-1])
        return ()

    def __call__(self, x, y):
        return eval_link(self, x, y)

    def _raw(self, x, y):
        if self.variant == "blockmodel":
            return _blockmodel(x, y)
        if self.variant == "beta":
            return _beta(x, y)
        if self.variant == "homophily":
            return _homophily(x, y)
        x, y = np.broadcast_arrays(x, y)
        a = self._interp(np.stack([x.ravel(), y.ravel()], axis=-1)).reshape(x.shape)
        b = self._interp(np.stack([y.ravel(), x.ravel()], axis=-1)).reshape(x.shape)
        return np.clip(0.5 * (a + b), 0.0, 1.0)


def eval_link(f: LinkFunction, x, y):
    """Evaluate ``f(x, y)``; broadcasts over array arguments.

    Raises
    ------
    DomainError
        If any argument lies outside [0, 1].
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~((x >= 0) & (x <= 1))) or np.any(~((y >= 0) & (y <= 1))):
        raise DomainError("link function arguments must lie in [0, 1]")
    out = f._raw(x, y)
    return out.item() if out.ndim == 0 else out


# --------------------------------------------------------------------------
# scalar functions
# --------------------------------------------------------------------------

def lambda_true(w):
    """Social influence ``1.5 w^2 + log(w)`` used in the simulation design."""
    w = np.asarray(w, dtype=float)
    if np.any(~((w > 0) & (w < 1))):
        raise DomainError("lambda_true is defined on the open interval (0, 1)")
    out = 1.5 * w**2 + np.log(w)
    return out.item() if out.ndim == 0 else out


def logistic_cdf(x):
    """Standard logistic cdf, overflow-free for any finite input."""
    out = expit(np.asarray(x, dtype=float))
    return out.item() if np.ndim(out) == 0 else out


def logit(p):
    """Inverse of :func:`logistic_cdf` on the open unit interval."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("logit needs probabilities strictly inside (0, 1)")
    out = np.log(p) - np.log1p(-p)
    return out.item() if out.ndim == 0 else out


# --------------------------------------------------------------------------
# data containers
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrueParameters:
    beta: np.ndarray
    lam: Callable = lambda_true

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        if b.ndim != 1 or not np.all(np.isfinite(b)):
            raise ValidationError("beta must be a finite vector")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @property
    def k(self) -> int:
        return self.beta.shape[0]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LatentDraws:
    w: np.ndarray
    eps: np.ndarray
    eta: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(self.w, float))
        object.__setattr__(self, "eps", _frozen(self.eps, float))
        if np.any(~((self.w > 0) & (self.w < 1))):
            raise ValidationError("latent w must lie strictly inside (0, 1)")
        if self.eps.shape != self.w.shape:
            raise ValidationError("latent eps and w lengths differ")
        if self.eta is not None:
            eta = _frozen(self.eta, float)
            if eta.shape != (self.w.size, self.w.size) or not np.array_equal(eta, eta.T):
                raise ValidationError("latent eta must be a symmetric n x n matrix")
            object.__setattr__(self, "eta", eta)


@dataclass(frozen=True, eq=False)
class NetworkSample:
    """Observed data ``(X, y, D)`` plus the latent draws when simulated.

    Arrays are copied and made read-only on construction.
    """

    X: np.ndarray
    y: np.ndarray
    D: np.ndarray
    latent: Optional[LatentDraws] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y)
        D = np.asarray(self.D)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValidationError("X must be an n x k matrix with k >= 1")
        n = X.shape[0]
        if n < 2:
            raise ValidationError("a sample needs at least two agents")
        if not np.all(np.isfinite(X)):
            raise ValidationError("X contains non-finite entries")
        if y.shape != (n,) or not np.all((y == 0) | (y == 1)):
            raise ValidationError("y must be a binary vector of length n")
        validate_adjacency(D, n)
        if self.latent is not None and self.latent.w.shape != (n,):
            raise ValidationError("latent draws do not match the sample size")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", _frozen(y, np.int8))
        object.__setattr__(self, "D", _frozen(D, np.int8))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def __eq__(self, other):
        if not isinstance(other, NetworkSample):
            return NotImplemented
        same = (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.D, other.D)
        )
        if not same or (self.latent is None) != (other.latent is None):
            return False
        if self.latent is None:
            return True
        a, b = self.latent, other.latent
        eta_same = (a.eta is None and b.eta is None) or (
            a.eta is not None and b.eta is not None and np.array_equal(a.eta, b.eta)
        )
        return np.array_equal(a.w, b.w) and np.array_equal(a.eps, b.eps) and eta_same


def validate_adjacency(D, n: Optional[int] = None) -> None:
    D = np.asarray(D)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValidationError(f"adjacency matrix must be square, got shape {D.shape}")
    if n is not None and D.shape[0] != n:
        raise ValidationError(f"adjacency matrix is {D.shape[0]} x {D.shape[0]}, expected {n} x {n}")
    if not np.all((D == 0) | (D == 1)):
        raise ValidationError("adjacency matrix must be binary")
    if not np.array_equal(D, D.T):
        raise ValidationError("adjacency matrix must be symmetric")
    if np.any(np.diagonal(D) != 0):
        raise ValidationError("adjacency matrix must have a zero diagonal (no self-links)")


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    w = rng.uniform(size=size)
    while True:
        bad = w <= 0.0
        if not bad.any():
            return w
        w[bad] = rng.uniform(size=int(bad.sum()))


def simulate_sample(
    n: int,
    link: LinkFunction,
    params: TrueParameters,
    seed: SeedLike,
    *,
    w=None,
    X=None,
) -> NetworkSample:
    """Draw one sample from the network-endogenous binary choice model.

    Parameters
    ----------
    n : int
        Number of agents, at least 2.
    link : LinkFunction
        Link probability ``f``.
    params : TrueParameters
        Slope vector (its length sets the number of covariates) and the
        social-influence function.
    seed : int or sequence of int
        Key for the Philox stream; equal keys give identical samples.
    w, X : array_like, optional
        Fix the latent characteristics or the covariates instead of drawing
        them (the corresponding draws are still consumed so the other
        streams do not shift).

    Returns
    -------
    NetworkSample
        Observed data with the latent ``(w, eps, eta)`` attached.
    """
    if n < 2:
        raise ValidationError("n must be at least 2")
    rng = make_rng(seed)
    k = params.k
    X_draw = rng.standard_normal((n, k))
    w_draw = _open_uniform(rng, n)
    eps = rng.logistic(size=n)
    iu = np.triu_indices(n, 1)
    eta = np.ones((n, n))
    eta[iu] = rng.uniform(size=iu[0].size)
    eta.T[iu] = eta[iu]

    if X is not None:
        X_draw = np.array(X, dtype=float).reshape(n, k)
    if w is not None:
        w_draw = np.broadcast_to(np.asarray(w, dtype=float), (n,)).copy()

    F = eval_link(link, w_draw[:, None], w_draw[None, :])
    D = (F >= eta).astype(np.int8)
    np.fill_diagonal(D, 0)
    index = X_draw @ params.beta + np.asarray(params.lam(w_draw), dtype=float) - eps
    y = (index >= 0).astype(np.int8)
    return NetworkSample(X_draw, y, D, LatentDraws(w_draw, eps, eta))


def no_influence(w):
    """Social influence identically zero (switches off network endogeneity)."""
    return np.zeros_like(np.asarray(w, dtype=float))
