"""Euclidean distances to a reference sample and the distance regularizers.

``r_bd`` is the mean distance from each generated row to its nearest
reference row. ``r_ad`` is minus the mean distance over all
(generated, reference) pairs. Both accept a differentiable batch and return a
scalar tensor; the reference set is constant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import tensor as T
from .diffcore.tensor import Tensor

EPS = 1e-8
CHUNK = 1024


@dataclass(frozen=True)
class ReferenceSet:
    rows: np.ndarray
    sq_norms: np.ndarray
    space: str = "discrete"
    subsampled_from: int | None = None

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])


def make_reference(rows, space: str = "discrete", subsample: int | None = None, seed: int = 0) -> ReferenceSet:
    """Reference set from encoded (or embedded) rows.

    With ``subsample`` set below the row count, a seeded subset without
    replacement is kept and the original size recorded in ``subsampled_from``.
    """
    rows = np.array(rows, dtype=np.float64, copy=True)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("reference set needs at least one row")
    if space not in ("discrete", "embedded"):
        raise ValueError(f"unknown space {space!r}")
    full = None
    if subsample is not None and subsample < rows.shape[0]:
        full = rows.shape[0]
        idx = np.sort(np.random.default_rng(seed).choice(full, size=int(subsample), replace=False))
        rows = rows[idx]
    rows.setflags(write=False)
    norms = np.einsum("ij,ij->i", rows, rows)
    norms.setflags(write=False)
    return ReferenceSet(rows, norms, space, full)


def _as_array(batch) -> np.ndarray:
    return batch.data if isinstance(batch, Tensor) else np.asarray(batch, dtype=np.float64)


def pairwise_sq_dist(batch, ref: ReferenceSet) -> np.ndarray:
    """(m, N) squared distances via ||a||^2 + ||b||^2 - 2 a.b, clamped at 0."""
    x = _as_array(batch)
    if x.ndim != 2 or x.shape[1] != ref.dim:
        raise ValueError(f"batch width {x.shape[-1]} does not match reference width {ref.dim}")
    out = np.empty((x.shape[0], ref.n))
    for lo in range(0, x.shape[0], CHUNK):
        xb = x[lo:lo + CHUNK]
        sq = np.einsum("ij,ij->i", xb, xb)[:, None] + ref.sq_norms[None, :] - 2.0 * (xb @ ref.rows.T)
        out[lo:lo + CHUNK] = np.maximum(sq, 0.0)
    return out


def nearest(batch, ref: ReferenceSet) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest reference row (lowest index on ties) and its squared distance."""
    x = _as_array(batch)
    if x.ndim != 2 or x.shape[1] != ref.dim:
        raise ValueError(f"batch width {x.shape[-1]} does not match reference width {ref.dim}")
    idx = np.empty(x.shape[0], dtype=np.int64)
    sq = np.empty(x.shape[0])
    for lo in range(0, x.shape[0], CHUNK):
        d = pairwise_sq_dist(x[lo:lo + CHUNK], ref)
        i = np.argmin(d, axis=1)
        idx[lo:lo + CHUNK] = i
        sq[lo:lo + CHUNK] = d[np.arange(d.shape[0]), i]
    return idx, sq


def boundary_distance(batch, ref: ReferenceSet) -> np.ndarray:
    """Per-row distance to the nearest reference row."""
    return np.sqrt(nearest(batch, ref)[1])


def r_bd(batch, ref: ReferenceSet) -> Tensor:
    """Mean nearest-neighbour distance; gradient reaches each row through its nearest reference only."""
    x = T.as_tensor(batch)
    if x.shape[0] < 1:
        raise ValueError("empty batch")
    idx, _ = nearest(x, ref)
    diff = x - ref.rows[idx]
    dist = T.safe_sqrt((diff * diff).sum(axis=1), EPS)
    return dist.mean()


def r_ad(batch, ref: ReferenceSet) -> Tensor:
    """Minus the mean distance over all (batch row, reference row) pairs."""
    x = T.as_tensor(batch)
    if x.shape[0] < 1:
        raise ValueError("empty batch")
    if x.shape[1] != ref.dim:
        raise ValueError(f"batch width {x.shape[1]} does not match reference width {ref.dim}")
    sq = (x * x).sum(axis=1, keepdims=True) + ref.sq_norms[None, :] - 2.0 * (x @ ref.rows.T)
    dist = T.safe_sqrt(T.clamp_min(sq, 0.0), EPS)
    return -dist.mean()
