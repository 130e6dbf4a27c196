"""Smooth extension of grid fields from a support mask into its complement.

Where the density falls below the floor the quantum potential and the
phase are numerically meaningless, yet centred stencils near the edge of
the support still read those cells.  The operators here replace the
masked values by a C2 continuation of the supported values: a quintic
Hermite bridge between the two edges of every masked run, with edge
slopes and curvatures taken from a least-squares quadratic fit over a
short window of supported cells.  The fit, rather than one-sided
interpolation, keeps the continuation from amplifying noise at the edge.

For a fixed mask the continuation is linear in the data, so it is
assembled once as a sparse matrix and reused until the mask changes.
"""
from __future__ import annotations

from collections import OrderedDict
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

FIT_POINTS = 10


@lru_cache(maxsize=None)
def _fit_weights(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights for f'(0), f''(0) from samples at unit offsets 0..k-1."""
    offs = np.arange(k, dtype=float)
    deg = min(2, k - 1)
    pinv = np.linalg.pinv(np.vander(offs, deg + 1, increasing=True))
    d1 = pinv[1] if deg >= 1 else np.zeros(k)
    d2 = 2.0 * pinv[2] if deg >= 2 else np.zeros(k)
    return d1, d2


def _quintic_basis(s: np.ndarray):
    s2 = s * s
    s3 = s2 * s
    s4 = s3 * s
    s5 = s4 * s
    h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5
    h1 = s - 6 * s3 + 8 * s4 - 3 * s5
    h2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5)
    g0 = 10 * s3 - 15 * s4 + 6 * s5
    g1 = -4 * s3 + 7 * s4 - 3 * s5
    g2 = 0.5 * (s3 - 2 * s4 + s5)
    return h0, h1, h2, g0, g1, g2


def _side(known: np.ndarray, anchor: int, direction: int, h: float, periodic: bool):
    """Window of supported cells starting at ``anchor`` and walking away from the gap."""
    n = len(known)
    cells = []
    i = anchor
    while len(cells) < FIT_POINTS:
        if periodic:
            i %= n
        elif not 0 <= i < n:
            break
        if not known[i] or (cells and i == cells[0]):
            break
        cells.append(i)
        i += direction
    if not cells:
        return None
    d1, d2 = _fit_weights(len(cells))
    # fit is in units of cells along `direction`
    return np.asarray(cells), direction * d1 / h, d2 / h**2


def _masked_runs(known: np.ndarray, periodic: bool) -> list[tuple[int, int]]:
    n = len(known)
    if periodic:
        shift = int(np.flatnonzero(known)[0])
        rolled = np.roll(~known, -shift)
    else:
        shift = 0
        rolled = ~known
    edges = np.diff(np.concatenate(([0], rolled.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [((s + shift) % n if periodic else s, e - s) for s, e in zip(starts, stops)]


def _line_entries(known: np.ndarray, h: float, periodic: bool):
    """Sparse rows (local indices) continuing one line into its masked runs."""
    n = len(known)
    rows, cols, vals = [], [], []
    for start, length in _masked_runs(known, periodic):
        cells = np.arange(start, start + length)
        left = _side(known, start - 1, -1, h, periodic)
        right = _side(known, start + length, +1, h, periodic)
        if periodic:
            cells %= n
        if left is not None and right is not None:
            span = (length + 1) * h
            s = np.arange(1, length + 1) / (length + 1)
            h0, h1, h2, g0, g1, g2 = _quintic_basis(s)
            pieces = [
                (left[0][:1], h0[:, None] * np.ones((1, 1))),
                (left[0], np.outer(h1 * span, left[1]) + np.outer(h2 * span**2, left[2])),
                (right[0][:1], g0[:, None] * np.ones((1, 1))),
                (right[0], np.outer(g1 * span, right[1]) + np.outer(g2 * span**2, right[2])),
            ]
        elif left is not None:
            u = np.arange(1, length + 1) * h
            pieces = [(left[0][:1], np.ones((length, 1))),
                      (left[0], np.outer(u, left[1]) + np.outer(0.5 * u**2, left[2]))]
        elif right is not None:
            u = -np.arange(length, 0, -1) * h
            pieces = [(right[0][:1], np.ones((length, 1))),
                      (right[0], np.outer(u, right[1]) + np.outer(0.5 * u**2, right[2]))]
        else:
            continue
        for src, w in pieces:
            rows.append(np.repeat(cells, len(src)))
            cols.append(np.tile(src, length))
            vals.append(w.ravel())
    if not rows:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def build_extension(known: np.ndarray, spacing, periodic: bool) -> sp.csr_matrix:
    """Sparse operator E with (E f)[i] = f[i] on supported cells.

    Axes are swept in order; cells on lines without any supported cell
    are continued in a later sweep from the values filled before it.
    """
    known = np.asarray(known, dtype=bool)
    shape = known.shape
    size = known.size
    if not known.any():
        raise ValueError("cannot extend from an empty support")
    flat_index = np.arange(size).reshape(shape)
    total = sp.identity(size, format="csr")
    have = known.copy()
    for axis, h in enumerate(spacing):
        if have.all():
            break
        lines_known = np.moveaxis(have, axis, -1).reshape(-1, shape[axis])
        lines_index = np.moveaxis(flat_index, axis, -1).reshape(-1, shape[axis])
        rows, cols, vals = [], [], []
        for line_known, line_index in zip(lines_known, lines_index):
            if line_known.all() or not line_known.any():
                continue
            r, c, v = _line_entries(line_known, h, periodic)
            rows.append(line_index[r])
            cols.append(line_index[c])
            vals.append(v)
        keep = have.ravel()
        ident = sp.diags(keep.astype(float), format="csr")
        if rows:
            fill = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(size, size))
            filled = np.zeros(size, bool)
            filled[np.concatenate(rows)] = True
        else:
            fill = sp.csr_matrix((size, size))
            filled = np.zeros(size, bool)
        untouched = ~keep & ~filled
        step = ident + fill + sp.diags(untouched.astype(float), format="csr")
        total = step @ total
        have = have | filled.reshape(shape)
    if not have.all():
        raise ValueError("support does not reach every grid line")
    return total.tocsr()


def label_periodic(mask: np.ndarray, periodic: bool) -> tuple[np.ndarray, int]:
    """Connected components, glued across the seams when periodic."""
    labels, count = ndimage.label(mask)
    if not periodic or count < 2:
        return labels, count
    parent = np.arange(count + 1)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for axis in range(mask.ndim):
        first = np.take(labels, 0, axis=axis).ravel()
        last = np.take(labels, -1, axis=axis).ravel()
        for a, b in zip(first, last):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(count + 1)])
    uniq, relabel = np.unique(roots, return_inverse=True)
    merged = relabel[labels]
    return merged, len(uniq) - 1


def support_mask(rho: np.ndarray, rel_floor: float, periodic: bool, min_island: int) -> tuple[np.ndarray, float]:
    """Cells at or above the floor, ignoring isolated specks smaller than a stencil."""
    peak = float(np.max(rho))
    floor = rel_floor * peak
    known = rho >= floor
    if min_island > 1 and not known.all():
        labels, count = label_periodic(known, periodic)
        if count > 1:
            sizes = np.bincount(labels.ravel(), minlength=count + 1)
            small = sizes < min_island
            small[0] = False
            if small[1:].all():
                small[np.argmax(sizes[1:]) + 1] = False
            known &= ~small[labels]
    return known, floor


def interior_holes(known: np.ndarray, periodic: bool) -> list[tuple[int, ...]]:
    """First cell of every masked component enclosed by the support.

    On a periodic grid the largest masked component is the exterior; on a
    bounded grid every masked component touching the boundary is.
    """
    masked = ~known
    if not masked.any():
        return []
    labels, count = label_periodic(masked, periodic)
    if count == 0:
        return []
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    exterior = np.zeros(count + 1, bool)
    if periodic:
        exterior[np.argmax(sizes[1:]) + 1] = True
    else:
        for axis in range(known.ndim):
            exterior[np.unique(np.take(labels, 0, axis=axis))] = True
            exterior[np.unique(np.take(labels, -1, axis=axis))] = True
    exterior[0] = True
    holes = []
    for lab in range(1, count + 1):
        if not exterior[lab]:
            holes.append(tuple(int(i) for i in np.argwhere(labels == lab)[0]))
    return holes


class ExtensionCache:
    """Small LRU of extension operators keyed by the mask bytes."""

    def __init__(self, spacing, periodic: bool, maxsize: int = 16):
        self.spacing = tuple(spacing)
        self.periodic = periodic
        self.maxsize = maxsize
        self._store: OrderedDict[bytes, sp.csr_matrix] = OrderedDict()

    def __call__(self, known: np.ndarray) -> sp.csr_matrix:
        key = np.packbits(known.ravel()).tobytes()
        op = self._store.get(key)
        if op is None:
            op = build_extension(known, self.spacing, self.periodic)
            self._store[key] = op
            if len(self._store) > self.maxsize:
                self._store.popitem(last=False)
        else:
            self._store.move_to_end(key)
        return op
