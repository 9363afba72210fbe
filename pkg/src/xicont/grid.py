"""Finite-difference grids on intervals and rectangles.

Fields are plain 1-D numpy arrays holding values at the interior nodes;
the homogeneous Dirichlet boundary values are implicit.  In two dimensions
the nodes are stored in C order of an ``(nx, ny)`` array, so the flat index
of node ``(i, j)`` is ``i * ny + j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GridError",
    "GridSpec",
    "Grid",
    "LaplacianOp",
    "build_grid",
    "build_laplacian",
    "inner_product",
    "norm",
    "project_harmonic",
    "laplacian_1d_eigenvalues",
]


class GridError(ValueError):
    """Invalid grid specification or mismatched field."""


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    extent: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise GridError(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.extent) != self.dimension or len(self.counts) != self.dimension:
            raise GridError("extent and counts must have one entry per axis")
        if any(not np.isfinite(L) or L <= 0 for L in self.extent):
            raise GridError(f"extents must be positive, got {self.extent}")
        if any(int(n) != n or n < 3 for n in self.counts):
            raise GridError(f"need at least 3 interior nodes per axis, got {self.counts}")

    @classmethod
    def interval(cls, length: float, n: int) -> GridSpec:
        return cls(1, (float(length),), (int(n),))

    @classmethod
    def rectangle(cls, lx: float, ly: float, nx: int, ny: int) -> GridSpec:
        return cls(2, (float(lx), float(ly)), (int(nx), int(ny)))


@dataclass(frozen=True, eq=False)
class Grid:
    spec: GridSpec
    h: tuple[float, ...]
    coords: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.spec.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise GridError(f"field of shape {u.shape} does not live on a grid of {self.size} nodes")
        return u

    def constant(self, value: float = 1.0) -> np.ndarray:
        return np.full(self.size, float(value))

    def evaluate(self, func) -> np.ndarray:
        """Sample ``func`` at the interior nodes (``func(x)`` or ``func(x, y)``)."""
        if self.dimension == 1:
            return np.asarray(func(self.coords), dtype=float) * np.ones(self.size)
        return np.asarray(func(self.coords[:, 0], self.coords[:, 1]), dtype=float) * np.ones(self.size)

    @cached_property
    def boundary_adjacent(self) -> list[tuple[np.ndarray, float]]:
        """Index sets of nodes next to each boundary side, with the normal spacing."""
        if self.dimension == 1:
            n = self.shape[0]
            hx = self.h[0]
            return [(np.array([0]), hx), (np.array([n - 1]), hx)]
        nx, ny = self.shape
        idx = np.arange(self.size).reshape(nx, ny)
        hx, hy = self.h
        return [(idx[0, :], hx), (idx[-1, :], hx), (idx[:, 0], hy), (idx[:, -1], hy)]


def build_grid(spec: GridSpec) -> Grid:
    h = tuple(L / (n + 1) for L, n in zip(spec.extent, spec.counts))
    axes = [hk * np.arange(1, n + 1) for hk, n in zip(h, spec.counts)]
    if spec.dimension == 1:
        coords = axes[0]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        coords = np.column_stack([X.ravel(), Y.ravel()])
    size = int(np.prod(spec.counts))
    weights = np.full(size, float(np.prod(h)))
    coords.setflags(write=False)
    weights.setflags(write=False)
    return Grid(spec, h, coords, weights)


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


@dataclass(frozen=True, eq=False)
class LaplacianOp:
    """Sparse SPD matrix ``A`` approximating ``-Δ`` with Dirichlet conditions."""

    grid: Grid
    matrix: sp.csr_matrix = field(repr=False)

    def __matmul__(self, u):
        return self.matrix @ u

    def energy(self, u: np.ndarray) -> float:
        """Discrete Dirichlet energy ``<Au, u>``."""
        u = self.grid.check(u)
        return inner_product(self.grid, self.matrix @ u, u)


def build_laplacian(grid: Grid) -> LaplacianOp:
    if grid.dimension == 1:
        A = _second_difference(grid.shape[0], grid.h[0])
    else:
        (nx, ny), (hx, hy) = grid.shape, grid.h
        A = sp.kron(_second_difference(nx, hx), sp.identity(ny)) + sp.kron(
            sp.identity(nx), _second_difference(ny, hy)
        )
        A = A.tocsr()
    return LaplacianOp(grid, A)


def laplacian_1d_eigenvalues(n: int, length: float) -> np.ndarray:
    """Closed-form spectrum of the 3-point Dirichlet Laplacian, ascending."""
    h = length / (n + 1)
    k = np.arange(1, n + 1)
    return (2.0 / h**2) * (1.0 - np.cos(k * np.pi / (n + 1)))


def inner_product(grid: Grid, u, v) -> float:
    u, v = grid.check(u), grid.check(v)
    return float(np.dot(grid.weights, u * v))


def norm(grid: Grid, u) -> float:
    return float(np.sqrt(inner_product(grid, u, u)))


def project_harmonic(grid: Grid, u, f) -> tuple[float, np.ndarray]:
    """Split ``u = xi * f + U`` with ``<U, f> = 0``.

    Returns the generalized first harmonic ``xi`` and the remainder ``U``.
    """
    u, f = grid.check(u), grid.check(f)
    ff = inner_product(grid, f, f)
    if ff == 0.0:
        raise GridError("cannot project onto a zero weight")
    xi = inner_product(grid, u, f) / ff
    U = u - xi * f
    return xi, U
