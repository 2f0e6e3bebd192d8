"""Double-description conversion between H- and V-representations of cones.

Polytopes are handled through their homogenization: a polytope with vertices
``v`` corresponds to the pointed cone generated by ``(v, 1)``, and a polytope
``{x : A x <= b}`` to the cone ``{(x, t) : b t - A x >= 0, t >= 0}``.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile

import numpy as np
from scipy.linalg import null_space

from .config import settings
from .exceptions import Degenerate, EnumerationOverflow

logger = logging.getLogger(__name__)

_memory_cache: dict[str, np.ndarray] = {}


def _independent_rows(A, tol=1e-10):
    """Indices of a maximal set of linearly independent rows, greedy in row order."""
    chosen = []
    basis = np.zeros((0, A.shape[1]))
    for i, row in enumerate(A):
        if basis.shape[0]:
            resid = row - basis.T @ (basis @ row)
        else:
            resid = row.copy()
        nrm = np.linalg.norm(resid)
        if nrm > tol * max(1.0, np.linalg.norm(row)):
            chosen.append(i)
            basis = np.vstack([basis, resid / nrm])
            if len(chosen) == A.shape[1]:
                break
    return chosen


def extreme_rays(A, E=None, tol=1e-9, max_rays=None):
    """Extreme rays of the pointed cone ``{x : A x >= 0, E x = 0}``.

    Returns an array of shape ``(k, d)``, one ray per row, each scaled to unit
    max-norm.  Raises :class:`Degenerate` if the cone contains a line.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d_full = A.shape[1]
    if E is not None and np.size(E):
        N = null_space(np.atleast_2d(np.asarray(E, dtype=float)))
        if N.shape[1] == 0:
            return np.zeros((0, d_full))
        rays = extreme_rays(A @ N, tol=tol, max_rays=max_rays)
        out = rays @ N.T
        return out / np.abs(out).max(axis=1, keepdims=True) if out.size else out
    max_rays = settings.cap_vertices if max_rays is None else max_rays
    norms = np.linalg.norm(A, axis=1)
    A = A[norms > 0] / norms[norms > 0, None]
    m, d = A.shape
    start = _independent_rows(A)
    if len(start) < d:
        raise Degenerate(f"cone has a lineality space (constraint rank {len(start)} < {d})")
    R = np.linalg.inv(A[start]).T  # row j is tight on start rows except j
    R /= np.abs(R).max(axis=1, keepdims=True)
    order = list(start) + [i for i in range(m) if i not in set(start)]
    Z = np.zeros((d, m), dtype=bool)
    for j in range(d):
        Z[j, start] = True
        Z[j, start[j]] = False
    for i in order[d:]:
        vals = R @ A[i]
        pos = vals > tol
        neg = vals < -tol
        zero = ~(pos | neg)
        Z[zero, i] = True
        pos_idx = np.flatnonzero(pos)
        neg_idx = np.flatnonzero(neg)
        new_rays = []
        new_Z = []
        if pos_idx.size and neg_idx.size:
            Zcols = Z
            for p in pos_idx:
                common = Zcols[p] & Zcols[neg_idx]
                counts = common.sum(axis=1)
                for k in np.flatnonzero(counts >= d - 2):
                    q = neg_idx[k]
                    c = common[k]
                    # combinatorial adjacency: only p and q contain the common zero set
                    if np.count_nonzero(Zcols[:, c].all(axis=1)) != 2:
                        continue
                    r = vals[p] * R[q] - vals[q] * R[p]
                    r /= np.abs(r).max()
                    zr = c.copy()
                    zr[i] = True
                    new_rays.append(r)
                    new_Z.append(zr)
        keep = ~neg
        R = np.vstack([R[keep]] + ([np.array(new_rays)] if new_rays else []))
        Z = np.vstack([Z[keep]] + ([np.array(new_Z)] if new_Z else []))
        if R.shape[0] > max_rays:
            raise EnumerationOverflow(f"double description exceeded {max_rays} rays")
    return _dedupe(R)


def _dedupe(R, decimals=9):
    if R.shape[0] == 0:
        return R
    keys = np.round(R, decimals)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return R[np.sort(idx)]


def cone_facets(rays, tol=1e-9, max_rays=None):
    """Facet normals ``f`` (``f @ r >= 0``) of the full-dimensional cone spanned by ``rays``."""
    return extreme_rays(np.asarray(rays, dtype=float), tol=tol, max_rays=max_rays)


def polytope_vertices(A, b, tol=1e-9):
    """Vertices of the bounded polytope ``{x : A x <= b}``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = A.shape[1]
    H = np.hstack([-A, b[:, None]])
    H = np.vstack([H, np.eye(d + 1)[-1]])
    rays = extreme_rays(H, tol=tol)
    t = rays[:, -1]
    if np.any(t <= tol):
        raise Degenerate("polytope is unbounded")
    return rays[:, :-1] / t[:, None]


def content_hash(*arrays, extra=""):
    h = hashlib.sha256(extra.encode())
    for a in arrays:
        a = np.ascontiguousarray(np.round(np.asarray(a, dtype=float), 12))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:32]


def cached_extreme_rays(A, E=None, tol=1e-9, tag="rays"):
    """:func:`extreme_rays` memoized in memory and, if configured, on disk.

    Disk entries are JSON files named by content hash; they are written to a
    temporary file and atomically renamed, so concurrent readers never see a
    partial file.  An entry whose stored hash does not match is recomputed.
    """
    E_arr = np.zeros((0, np.shape(A)[1])) if E is None else np.asarray(E, dtype=float)
    key = content_hash(A, E_arr, extra=f"{tag}:{tol}")
    if key in _memory_cache:
        return _memory_cache[key].copy()
    path = None
    if settings.cache_dir:
        path = os.path.join(settings.cache_dir, f"{key}.json")
        if os.path.exists(path):
            try:
                with open(path) as fh:
                    payload = json.load(fh)
                if payload.get("hash") == key:
                    rays = np.asarray(payload["rays"], dtype=float).reshape(-1, np.shape(A)[1])
                    _memory_cache[key] = rays
                    return rays.copy()
            except (OSError, ValueError, KeyError):
                logger.warning("ignoring unreadable cache entry %s", path)
    rays = extreme_rays(A, E if E is not None and np.size(E) else None, tol=tol)
    _memory_cache[key] = rays
    if path is not None:
        os.makedirs(settings.cache_dir, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=settings.cache_dir, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump({"hash": key, "rays": rays.tolist()}, fh)
        os.replace(tmp, path)
    return rays.copy()


def clear_memory_cache():
    _memory_cache.clear()
