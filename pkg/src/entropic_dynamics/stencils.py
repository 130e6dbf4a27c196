"""Finite-difference operators on uniform grids.

Operators are stored as sparse matrices acting along one axis of an
n-dimensional field.  Periodic operators are circulant; non-periodic ones
fall back to one-sided stencils of the same formal order near the edges.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp


@lru_cache(maxsize=64)
def fd_weights(derivative: int, offsets: tuple[int, ...]) -> np.ndarray:
    """Weights w_j with sum_j w_j f(x + j h) ~ h**derivative f^(derivative)(x)."""
    offsets_arr = np.asarray(offsets, dtype=float)
    n = len(offsets)
    if derivative >= n:
        raise ValueError("need more stencil points than the derivative order")
    vander = np.vander(offsets_arr, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[derivative] = float(np.prod(np.arange(1, derivative + 1)))
    w = np.linalg.solve(vander, rhs)
    w.setflags(write=False)
    return w


def central_offsets(derivative: int, order: int) -> tuple[int, ...]:
    if order % 2 or order < 2:
        raise ValueError(f"stencil order must be an even integer >= 2, got {order}")
    radius = (derivative + 1) // 2 + order // 2 - 1
    return tuple(range(-radius, radius + 1))


def diff_matrix(n: int, h: float, derivative: int, order: int, periodic: bool) -> sp.csr_matrix:
    """Sparse (n, n) matrix of the ``derivative``-th derivative."""
    offsets = central_offsets(derivative, order)
    radius = offsets[-1]
    if n < 2 * radius + 2:
        raise ValueError(f"grid of {n} points too small for a {order}th-order stencil")
    w = fd_weights(derivative, offsets) / h**derivative
    rows, cols, vals = [], [], []
    for i in range(n):
        if periodic or radius <= i < n - radius:
            for j, wj in zip(offsets, w):
                if wj != 0.0:
                    rows.append(i)
                    cols.append((i + j) % n)
                    vals.append(wj)
        else:
            # one-sided closure, same number of points as the central stencil + 1
            npts = len(offsets) + 1
            start = 0 if i < radius else n - npts
            local = tuple(k - i for k in range(start, start + npts))
            wl = fd_weights(derivative, local) / h**derivative
            for j, wj in zip(local, wl):
                rows.append(i)
                cols.append(i + j)
                vals.append(wj)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def winding_correction(n: int, order: int, h: float) -> np.ndarray:
    """Per-row coefficient of the jump W for f(x + L) = f(x) + W.

    Applying the circulant first-derivative matrix to samples of such an
    f and adding ``W * c`` gives the derivative of the continuous
    extension, not of the wrapped samples.
    """
    offsets = central_offsets(1, order)
    w = fd_weights(1, offsets) / h
    c = np.zeros(n)
    for i in range(n):
        for j, wj in zip(offsets, w):
            c[i] += wj * ((i + j) // n)
    return c


def apply_along(mat: sp.spmatrix, f: np.ndarray, axis: int) -> np.ndarray:
    if f.ndim == 1:
        return mat @ f
    moved = np.moveaxis(f, axis, 0)
    shape = moved.shape
    out = mat @ moved.reshape(shape[0], -1)
    return np.moveaxis(out.reshape(shape), 0, axis)


def modified_wavenumber(k: np.ndarray, h: float, order: int) -> np.ndarray:
    """Fourier symbol of the central first-derivative stencil (real part)."""
    offsets = central_offsets(1, order)
    w = fd_weights(1, offsets)
    return sum(wj * np.sin(j * k * h) for j, wj in zip(offsets, w)) / h


class Differentiator:
    """First and second derivative operators for every axis of a grid."""

    def __init__(self, spacing, points, periodic: bool, order: int = 8):
        self.spacing = tuple(float(s) for s in spacing)
        self.points = tuple(int(n) for n in points)
        self.periodic = periodic
        self.order = order
        self.first = [diff_matrix(n, h, 1, order, periodic) for n, h in zip(self.points, self.spacing)]
        self.second = [diff_matrix(n, h, 2, order, periodic) for n, h in zip(self.points, self.spacing)]
        self._wind = [winding_correction(n, order, h) if periodic else None
                      for n, h in zip(self.points, self.spacing)]

    @property
    def ndim(self) -> int:
        return len(self.points)

    def d(self, f: np.ndarray, axis: int, winding=None) -> np.ndarray:
        out = apply_along(self.first[axis], f, axis)
        if winding is not None and self.periodic:
            shape = [1] * f.ndim
            shape[axis] = -1
            out = out + np.expand_dims(winding, axis) * self._wind[axis].reshape(shape)
        return out

    def d2(self, f: np.ndarray, axis: int) -> np.ndarray:
        return apply_along(self.second[axis], f, axis)

    def grad(self, f: np.ndarray, windings=None) -> list[np.ndarray]:
        if windings is None:
            windings = [None] * self.ndim
        return [self.d(f, a, windings[a]) for a in range(self.ndim)]

    def winding(self, phase: np.ndarray, axis: int, quantum: float | None) -> np.ndarray | None:
        """Estimate the jump of ``phase`` across the periodic seam of ``axis``.

        The raw estimate extrapolates the end slopes.  With ``quantum`` > 0
        the jump is snapped to the nearest multiple of it, which is the
        only value compatible with a single-valued wave function.
        """
        if not self.periodic:
            return None
        p = np.moveaxis(phase, axis, 0)
        raw = p[-1] - p[0] + 0.5 * ((p[-1] - p[-2]) + (p[1] - p[0]))
        if quantum:
            return quantum * np.round(raw / quantum)
        return raw
