"""Leading Dirichlet eigenpairs and the weight constant ``nu``.

For a weight ``f`` with ``f1 = <f, phi1>``,

    nu = lam1 + (lam2 - lam1) * f1**2 / ||f||**2,

and every ``u`` with ``<u, f> = 0`` obeys ``<Au, u> >= nu <u, u>``.  All
quantities here are the discrete ones, so the inequality holds exactly on
the grid (same eigen-expansion argument as in the continuum).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, LaplacianOp, inner_product, norm

__all__ = [
    "EigensolverError",
    "PoincareConstraintError",
    "SpectralData",
    "WeightData",
    "compute_eigenpairs",
    "compute_nu",
    "verify_poincare",
]


class EigensolverError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class PoincareConstraintError(ValueError):
    """Test function is not orthogonal to the weight."""


@dataclass(frozen=True, eq=False)
class SpectralData:
    grid: Grid
    lam1: float
    lam2: float
    phi1: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)
    residuals: tuple[float, float] = (0.0, 0.0)
    iterations: tuple[int, int] = (0, 0)


@dataclass(frozen=True, eq=False)
class WeightData:
    f: np.ndarray = field(repr=False)
    f1: float
    norm_sq: float
    nu: float


def _inverse_iteration(lu, A, grid, x, deflate, tol, maxiter):
    for it in range(1, maxiter + 1):
        y = lu.solve(x)
        for d in deflate:
            y -= inner_product(grid, y, d) * d
        y /= norm(grid, y)
        Ay = A @ y
        lam = inner_product(grid, Ay, y)
        res = norm(grid, Ay - lam * y)
        x = y
        if res <= tol * lam:
            return lam, y, res, it
    raise EigensolverError(f"inverse iteration stalled after {maxiter} sweeps", res)


def compute_eigenpairs(
    op: LaplacianOp, count: int = 2, shift: float = 0.0, tol: float = 1e-10, maxiter: int = 5000
) -> SpectralData:
    """First two eigenpairs of ``A`` by shifted inverse iteration.

    One sparse LU of ``A - shift*I`` serves both pairs; the second pair is
    found with deflation against ``phi1``.  Eigenvectors are normalized in
    the grid quadrature, ``phi1`` is made positive and ``phi2`` has its
    largest-magnitude entry positive.
    """
    if count != 2:
        raise ValueError("only the first two eigenpairs are computed")
    grid = op.grid
    A = op.matrix
    lu = spla.splu((A - shift * sp.identity(grid.size)).tocsc())

    x1 = grid.constant(1.0)
    lam1, phi1, r1, it1 = _inverse_iteration(lu, A, grid, x1, [], tol, maxiter)
    if phi1[0] < 0:
        phi1 = -phi1
    if np.any(phi1 <= 0):
        raise EigensolverError("principal eigenvector is not positive", r1)

    x2 = np.random.default_rng(20240521).standard_normal(grid.size)
    x2 -= inner_product(grid, x2, phi1) * phi1
    x2 /= norm(grid, x2)
    lam2, phi2, r2, it2 = _inverse_iteration(lu, A, grid, x2, [phi1], tol, maxiter)
    if phi2[np.argmax(np.abs(phi2))] < 0:
        phi2 = -phi2
    if not lam1 < lam2:
        raise EigensolverError("eigenvalues came out unordered", r2)

    phi1.setflags(write=False)
    phi2.setflags(write=False)
    return SpectralData(grid, lam1, lam2, phi1, phi2, (r1, r2), (it1, it2))


def compute_nu(spec: SpectralData, f) -> WeightData:
    grid = spec.grid
    f = np.array(grid.check(f))
    norm_sq = inner_product(grid, f, f)
    if norm_sq == 0.0:
        raise ValueError("weight f is identically zero")
    f1 = inner_product(grid, f, spec.phi1)
    nu = spec.lam1 + (spec.lam2 - spec.lam1) * f1**2 / norm_sq
    f.setflags(write=False)
    return WeightData(f, f1, norm_sq, nu)


def verify_poincare(u, w: WeightData, spec: SpectralData, op: LaplacianOp) -> tuple[float, float]:
    """Return ``(<Au, u>, nu <u, u>)`` for a ``u`` orthogonal to the weight."""
    grid = spec.grid
    u = grid.check(u)
    uf = inner_product(grid, u, w.f)
    if abs(uf) > 1e-10 * norm(grid, u) * np.sqrt(w.norm_sq):
        raise PoincareConstraintError(f"<u, f> = {uf:.3e} is not zero")
    return op.energy(u), w.nu * inner_product(grid, u, u)
