"""Uniform node lattices over a box and sublevel-set components on them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Grid:
    """Uniform lattice with nodes on both box endpoints along every axis.

    Each node carries the cell volume ``prod(h)``; sums ``sum(f * vol)`` are
    the quadrature rule used throughout the package.
    """

    box: tuple
    shape: tuple

    def __post_init__(self):
        box = tuple(tuple(float(v) for v in row) for row in np.atleast_2d(self.box))
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if len(box) != len(shape):
            raise ValueError("box and shape dimensions differ")
        if any(n < 2 for n in shape):
            raise ValueError("need at least two nodes per axis")
        if any(b <= a for a, b in box):
            raise ValueError("empty box")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "shape", shape)

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(b - a) / (n - 1) for (a, b), n in zip(self.box, self.shape)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self) -> tuple:
        return tuple(np.linspace(a, b, n) for (a, b), n in zip(self.box, self.shape))

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape (size, d), C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    @cached_property
    def edges(self):
        """Face-adjacent node pairs ``(i, j, axis)`` with ``i < j``."""
        idx = np.arange(self.size).reshape(self.shape)
        heads, tails, axes = [], [], []
        for ax in range(self.dimension):
            lo = [slice(None)] * self.dimension
            hi = [slice(None)] * self.dimension
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            a = idx[tuple(lo)].reshape(-1)
            b = idx[tuple(hi)].reshape(-1)
            heads.append(a)
            tails.append(b)
            axes.append(np.full(a.size, ax))
        return np.concatenate(heads), np.concatenate(tails), np.concatenate(axes)

    def nearest_index(self, x) -> np.ndarray:
        """Flat index of the node nearest to each point (points clipped to the box)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.dimension == 1 and x.shape[-1] != 1:
            x = x.reshape(-1, 1)
        multi = []
        for ax, ((a, b), n) in enumerate(zip(self.box, self.shape)):
            h = (b - a) / (n - 1)
            k = np.rint((x[:, ax] - a) / h).astype(np.int64)
            multi.append(np.clip(k, 0, n - 1))
        return np.ravel_multi_index(tuple(multi), self.shape)

    def integrate(self, values) -> float:
        return float(np.sum(values) * self.cell_volume)

    def describe(self) -> dict:
        return {"box": [list(r) for r in self.box], "shape": list(self.shape),
                "spacing": self.spacing.tolist()}


def sublevel_component(values, shape, level, seed_index, strict=False):
    """Boolean mask of the face-connected component of ``{values <= level}``
    (``<`` if ``strict``) containing node ``seed_index``.

    Returns an all-False mask if the seed itself lies above the level.
    """
    vals = np.asarray(values).reshape(shape)
    mask = vals < level if strict else vals <= level
    labels, _ = ndimage.label(mask)  # default structure is face connectivity
    lab = labels.reshape(-1)[seed_index]
    if lab == 0:
        return np.zeros(vals.size, dtype=bool)
    return labels.reshape(-1) == lab


def sublevel_labels(values, shape, level):
    """Labels of face-connected components of ``{values <= level}`` (0 = above level)."""
    labels, count = ndimage.label(np.asarray(values).reshape(shape) <= level)
    return labels.reshape(-1), count
