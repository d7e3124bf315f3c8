"""File formats for network samples.

* edge list CSV, header ``i,j``, 0-based ids, one row per undirected edge
  with ``i < j``;
* covariate CSV, header ``id,y,x1,...,xk``;
* a JSON bundle with both plus optional latent draws.

Parse errors name the file, line and column.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import LatentDraws, NetworkSample

FORMAT_VERSION = 1


def atomic_write(path, data) -> None:
    """Write text or bytes to ``path`` through a temp file and rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _where(path, line, col=None) -> str:
    return f"{path}:{line}" + (f":{col}" if col is not None else "")


def _parse_int(tok, path, line, col):
    try:
        return int(tok.strip())
    except ValueError:
        raise ValidationError(f"{_where(path, line, col)}: expected an integer, got {tok!r}") from None


def _parse_float(tok, path, line, col):
    try:
        v = float(tok.strip())
    except ValueError:
        raise ValidationError(f"{_where(path, line, col)}: expected a number, got {tok!r}") from None
    if not np.isfinite(v):
        raise ValidationError(f"{_where(path, line, col)}: non-finite value {tok!r}")
    return v


# --------------------------------------------------------------------------
# edge lists
# --------------------------------------------------------------------------

def edges_from_adjacency(D) -> np.ndarray:
    i, j = np.nonzero(np.triu(np.asarray(D), 1))
    return np.column_stack([i, j])


def format_edges_csv(D) -> str:
    buf = io.StringIO()
    buf.write("i,j\n")
    for i, j in edges_from_adjacency(D):
        buf.write(f"{i},{j}\n")
    return buf.getvalue()


def parse_edges_csv(text: str, n: int | None = None, path="<edges>") -> list:
    """Parse edge-list text into a list of ``(i, j)`` with ``i < j``.

    Ids must be non-negative and, when ``n`` is given, below ``n``.
    Self-links and repeated edges are rejected.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["i", "j"]:
        raise ValidationError(f"{_where(path, 1)}: header must be 'i,j'")
    edges, seen = [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ValidationError(f"{_where(path, lineno)}: expected 2 fields, got {len(row)}")
        a = _parse_int(row[0], path, lineno, 1)
        b = _parse_int(row[1], path, lineno, 2)
        for col, v in ((1, a), (2, b)):
            if v < 0:
                raise ValidationError(f"{_where(path, lineno, col)}: negative id {v}")
            if n is not None and v >= n:
                raise ValidationError(
                    f"{_where(path, lineno, col)}: id {v} has no row in the covariate data (n={n})"
                )
        if a == b:
            raise ValidationError(f"{_where(path, lineno)}: self-link ({a},{b}) is not allowed")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ValidationError(f"{_where(path, lineno)}: duplicate edge {key}")
        seen.add(key)
        edges.append(key)
    return edges


def adjacency_from_edges(edges, n: int) -> np.ndarray:
    D = np.zeros((n, n), dtype=np.int8)
    if len(edges):
        e = np.asarray(edges, dtype=int)
        if e.min() < 0 or e.max() >= n:
            raise ValidationError(f"edge ids must lie in 0..{n - 1}")
        D[e[:, 0], e[:, 1]] = 1
        D[e[:, 1], e[:, 0]] = 1
    return D


def read_edges_csv(path, n: int | None = None) -> list:
    return parse_edges_csv(Path(path).read_text(), n=n, path=path)


# --------------------------------------------------------------------------
# covariates
# --------------------------------------------------------------------------

def format_covariates_csv(X, y) -> str:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    buf = io.StringIO()
    buf.write(",".join(["id", "y"] + [f"x{c + 1}" for c in range(X.shape[1])]) + "\n")
    for i in range(X.shape[0]):
        buf.write(",".join([str(i), str(int(y[i]))] + [repr(float(v)) for v in X[i]]) + "\n")
    return buf.getvalue()


def parse_covariates_csv(text: str, path="<covariates>"):
    """Parse covariate text into ``(X, y)``; ids must be exactly 0..n-1."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValidationError(f"{_where(path, 1)}: empty file")
    header = [c.strip() for c in rows[0]]
    k = len(header) - 2
    if header[:2] != ["id", "y"] or k < 1 or header[2:] != [f"x{c + 1}" for c in range(k)]:
        raise ValidationError(f"{_where(path, 1)}: header must be 'id,y,x1,...,xk'")
    by_id = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != k + 2:
            raise ValidationError(f"{_where(path, lineno)}: expected {k + 2} fields, got {len(row)}")
        i = _parse_int(row[0], path, lineno, 1)
        yi = _parse_int(row[1], path, lineno, 2)
        if yi not in (0, 1):
            raise ValidationError(f"{_where(path, lineno, 2)}: outcome must be 0 or 1, got {yi}")
        if i in by_id:
            raise ValidationError(f"{_where(path, lineno, 1)}: duplicate id {i}")
        xs = [_parse_float(row[c], path, lineno, c + 1) for c in range(2, k + 2)]
        by_id[i] = (yi, xs)
    n = len(by_id)
    missing = sorted(set(range(n)) - set(by_id))
    if missing:
        raise ValidationError(f"{path}: ids must be 0..{n - 1}; id {missing[0]} is missing")
    y = np.array([by_id[i][0] for i in range(n)], dtype=np.int8)
    X = np.array([by_id[i][1] for i in range(n)], dtype=float).reshape(n, k)
    return X, y


def read_covariates_csv(path):
    return parse_covariates_csv(Path(path).read_text(), path=path)


def load_sample(edges_path, covariates_path) -> NetworkSample:
    """Build a sample from the two CSV files; the covariate file fixes ``n``."""
    X, y = read_covariates_csv(covariates_path)
    edges = read_edges_csv(edges_path, n=X.shape[0])
    return NetworkSample(X, y, adjacency_from_edges(edges, X.shape[0]))


# --------------------------------------------------------------------------
# JSON bundle
# --------------------------------------------------------------------------

def sample_to_dict(sample: NetworkSample, include_eta: bool = True) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "n": sample.n,
        "k": sample.k,
        "X": sample.X.tolist(),
        "y": sample.y.tolist(),
        "edges": edges_from_adjacency(sample.D).tolist(),
    }
    lat = sample.latent
    if lat is not None:
        out["latent"] = {"w": lat.w.tolist(), "eps": lat.eps.tolist()}
        if include_eta and lat.eta is not None:
            out["latent"]["eta"] = lat.eta.tolist()
    return out


def sample_from_dict(d: dict) -> NetworkSample:
    try:
        n = int(d["n"])
        X = np.array(d["X"], dtype=float).reshape(n, int(d["k"]))
        y = np.array(d["y"])
        D = adjacency_from_edges([tuple(e) for e in d["edges"]], n)
        latent = None
        if d.get("latent") is not None:
            lat = d["latent"]
            latent = LatentDraws(lat["w"], lat["eps"], lat.get("eta"))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed sample document: {exc!r}") from None
    return NetworkSample(X, y, D, latent)


def dumps_sample(sample: NetworkSample, include_eta: bool = True) -> str:
    return json.dumps(sample_to_dict(sample, include_eta))


def loads_sample(text: str) -> NetworkSample:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return sample_from_dict(d)
