"""Codegree distances, population network distances and kernel weights."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigError, ValidationError
from .model import LinkFunction, eval_link, validate_adjacency

KERNELS = ("epanechnikov",)


# --------------------------------------------------------------------------
# empirical codegree distance
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CodegreeMatrix:
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(f"j{j}" for j in range(self.n)) + "\n")
        for row in self.values:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        """Little-endian uint64 ``n`` followed by row-major float64 values."""
        return struct.pack("<Q", self.n) + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodegreeMatrix":
        if len(data) < 8:
            raise ValidationError("truncated codegree fixture")
        (n,) = struct.unpack("<Q", data[:8])
        if len(data) != 8 + 8 * n * n:
            raise ValidationError(f"codegree fixture has {len(data)} bytes, expected {8 + 8 * n * n}")
        v = np.frombuffer(data, dtype="<f8", offset=8).reshape(n, n).astype(float)
        v.setflags(write=False)
        return cls(v)

    @classmethod
    def from_csv(cls, text: str) -> "CodegreeMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValidationError("empty codegree CSV")
        n = len(lines[0].split(","))
        v = np.array([[float(t) for t in ln.split(",")] for ln in lines[1:]], dtype=float)
        if v.shape != (n, n):
            raise ValidationError(f"codegree CSV is not {n} x {n}")
        v.setflags(write=False)
        return cls(v)


def codegree_distance_matrix(D, validate: bool = True) -> CodegreeMatrix:
    """Empirical codegree distances between all pairs of agents.

    ``delta_ij = sqrt(mean_t((A_ti - A_tj)^2)) / n`` where ``A = D @ D``
    counts common neighbours. Counts are integers, so the Gram matrix of
    ``A`` is exact in float64 (all partial sums stay below 2**53 for
    n < 2**17) and no cancellation error enters the square root.
    """
    D = np.asarray(D)
    if validate:
        validate_adjacency(D)
    n = D.shape[0]
    Df = D.astype(float)
    A = Df @ Df
    G = A.T @ A
    g = np.diag(G)
    sq = np.rint(g[:, None] + g[None, :] - 2.0 * G)
    np.maximum(sq, 0.0, out=sq)
    np.fill_diagonal(sq, 0.0)
    values = np.sqrt(sq) / n**1.5
    values = 0.5 * (values + values.T)
    values.setflags(write=False)
    return CodegreeMatrix(values)


# --------------------------------------------------------------------------
# population distances by quadrature
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule with about ``nodes`` points on [0, 1].

    The budget is split evenly over the smooth panels of the link function,
    with at least ``min_per_panel`` points per panel.
    """

    nodes: int = 200
    min_per_panel: int = 4


@lru_cache(maxsize=64)
def _gl_rule(nodes: int, breaks: tuple, min_per_panel: int = 4):
    edges = (0.0,) + breaks + (1.0,)
    per_panel = max(min_per_panel, nodes // (len(edges) - 1))
    x, w = np.polynomial.legendre.leggauss(per_panel)
    pts, wts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        pts.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wts.append(0.5 * (b - a) * w)
    return np.concatenate(pts), np.concatenate(wts)


@lru_cache(maxsize=16)
def _link_table(f: LinkFunction, quad: QuadratureSpec):
    t, v = _gl_rule(quad.nodes, f.breakpoints, quad.min_per_panel)
    return t, v, eval_link(f, t[:, None], t[None, :])


def _check_w(*ws):
    for w in ws:
        w = np.asarray(w, dtype=float)
        if np.any(~((w >= 0) & (w <= 1))):
            raise ValidationError("characteristics must lie in [0, 1]")


def population_network_distance(f: LinkFunction, wi, wj, quad: Optional[QuadratureSpec] = None):
    """L2 distance between the link profiles ``f(wi, .)`` and ``f(wj, .)``.

    Accepts scalars or equal-shape arrays for ``wi`` and ``wj``.
    """
    quad = quad or QuadratureSpec()
    _check_w(wi, wj)
    wi, wj = np.broadcast_arrays(np.asarray(wi, float), np.asarray(wj, float))
    t, v, _ = _link_table(f, quad)
    diff = eval_link(f, wi.ravel()[:, None], t[None, :]) - eval_link(f, wj.ravel()[:, None], t[None, :])
    out = np.sqrt(np.maximum((diff**2) @ v, 0.0)).reshape(wi.shape)
    return out.item() if out.ndim == 0 else out


def population_codegree_distance(f: LinkFunction, wi, wj, quad: Optional[QuadratureSpec] = None):
    """L2 distance between the codegree profiles of ``wi`` and ``wj``.

    The inner integral over the shared neighbour type and the outer integral
    both use the composite Gauss-Legendre rule.
    """
    quad = quad or QuadratureSpec()
    _check_w(wi, wj)
    wi, wj = np.broadcast_arrays(np.asarray(wi, float), np.asarray(wj, float))
    t, v, F = _link_table(f, quad)
    diff = eval_link(f, wi.ravel()[:, None], t[None, :]) - eval_link(f, wj.ravel()[:, None], t[None, :])
    inner = F @ (diff * v).T  # rows: outer node t, columns: pair
    out = np.sqrt(np.maximum(v @ inner**2, 0.0)).reshape(wi.shape)
    return out.item() if out.ndim == 0 else out


# --------------------------------------------------------------------------
# kernel weights
# --------------------------------------------------------------------------

def default_bandwidth(n: int) -> float:
    return n ** (-1.0 / 9.0) / 10.0


@dataclass(frozen=True)
class KernelSpec:
    """Kernel and bandwidth rule.

    ``bandwidth=None`` selects ``h(n) = n**(-1/9) / 10``; a float fixes ``h``.
    """

    kernel: str = "epanechnikov"
    bandwidth: Optional[float] = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}; choose one of {', '.join(KERNELS)}")
        if self.bandwidth is not None and not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}")

    def h(self, n: int) -> float:
        return default_bandwidth(n) if self.bandwidth is None else float(self.bandwidth)


def epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(u * u < 1.0, 0.75 * (1.0 - u * u), 0.0)


def kernel_weight(spec: KernelSpec, delta_hat, h: float):
    """``K(delta_hat**2 / h)``; the argument is always non-negative."""
    if h <= 0:
        raise ConfigError(f"bandwidth must be positive, got {h}")
    out = epanechnikov(np.square(np.asarray(delta_hat, dtype=float)) / h)
    return out.item() if out.ndim == 0 else out


def weight_matrix(C, spec: Optional[KernelSpec] = None, n: Optional[int] = None) -> np.ndarray:
    """Kernel weights for every pair, with ``h`` from the default rule at ``n``."""
    spec = spec or KernelSpec()
    values = C.values if isinstance(C, CodegreeMatrix) else np.asarray(C, dtype=float)
    n = values.shape[0] if n is None else n
    W = kernel_weight(spec, values, spec.h(n))
    return np.asarray(W, dtype=float)
