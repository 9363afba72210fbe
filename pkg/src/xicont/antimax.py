"""Maximum and anti-maximum principle for ``Δu + λu = f`` with ``f > 0``.

Below ``λ1`` the solution is negative; just above ``λ1`` it is positive,
up to some ``λ1 + δ_f`` that depends on the weight.  ``estimate_delta``
locates the first loss of strict positivity by a scan followed by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid
from .continuation import Problem

__all__ = [
    "NearSingularError",
    "SignPortrait",
    "AntimaxReport",
    "solve_linear_at",
    "sign_portrait",
    "estimate_delta",
]


class NearSingularError(ValueError):
    pass


@dataclass
class SignPortrait:
    min_u: float
    max_u: float
    normal_derivative: np.ndarray = field(repr=False)
    verdict: str  # "strictly-positive", "strictly-negative" or "mixed"

    @property
    def max_normal_derivative(self) -> float:
        return float(np.max(self.normal_derivative))

    @property
    def min_normal_derivative(self) -> float:
        return float(np.min(self.normal_derivative))


@dataclass
class AntimaxReport:
    delta_f: float
    capped: bool
    bracket: tuple[float, float]
    scan: list[tuple[float, float, float, str]] = field(repr=False)
    lam1: float = 0.0
    lam2: float = 0.0
    h: tuple[float, ...] = ()


def solve_linear_at(problem: Problem, lam: float, f=None, guard: float = 1e-8) -> np.ndarray:
    """Solve ``Δu + λ u = f`` (default ``f`` is the problem weight)."""
    grid = problem.grid
    f = problem.f if f is None else grid.check(f)
    for k, lk in ((1, problem.lam1), (2, problem.lam2)):
        if abs(lam - lk) < guard:
            raise NearSingularError(f"lambda={lam!r} lies within {guard:g} of eigenvalue lambda{k}={lk!r}")
    M = (-problem.lap.matrix + lam * sp.identity(grid.size)).tocsc()
    u = spla.spsolve(M, f)
    res = problem.norm(M @ u - f)
    # normwise backward error; near λ1 the absolute residual grows with ||u||
    Mnorm = spla.norm(M, 1)
    if not res <= 1e-11 * (problem.norm(f) + Mnorm * problem.norm(u)):
        raise NearSingularError(f"linear solve at lambda={lam!r} left residual {res:.3e}")
    return u


def sign_portrait(grid: Grid, u) -> SignPortrait:
    """Interior extrema and outward normal-derivative proxies ``(0 - u)/h``
    at the boundary-adjacent nodes."""
    u = grid.check(u)
    dn = np.concatenate([-u[idx] / h for idx, h in grid.boundary_adjacent])
    lo, hi = float(np.min(u)), float(np.max(u))
    if lo > 0 and np.all(dn < 0):
        verdict = "strictly-positive"
    elif hi < 0 and np.all(dn > 0):
        verdict = "strictly-negative"
    else:
        verdict = "mixed"
    return SignPortrait(lo, hi, dn, verdict)


def estimate_delta(
    problem: Problem, f=None, resolution: float | None = None, scan_steps: int = 100
) -> AntimaxReport:
    """Estimate ``δ_f`` such that the solution stays strictly positive for
    ``λ1 < λ < λ1 + δ_f``.

    The scan starts at ``λ1 + ε0`` with ``ε0 = 1e-4 (λ2 - λ1)``.  If no sign
    loss occurs before ``λ2 - ε0`` the estimate is capped at ``λ2 - λ1`` and
    ``capped`` is set.
    """
    grid = problem.grid
    f = problem.f if f is None else grid.check(f)
    if not np.all(f > 0):
        raise ValueError("the anti-maximum scan needs a strictly positive weight")
    lam1, lam2 = problem.lam1, problem.lam2
    gap = lam2 - lam1
    eps0 = 1e-4 * gap
    resolution = 1e-4 * gap if resolution is None else resolution

    def verdict(lam):
        u = solve_linear_at(problem, lam, f)
        sp_ = sign_portrait(grid, u)
        scan.append((float(lam), sp_.min_u, sp_.max_u, sp_.verdict))
        return sp_.verdict

    scan: list[tuple[float, float, float, str]] = []
    lams = np.linspace(lam1 + eps0, lam2 - eps0, scan_steps + 1)
    good = None
    for lam in lams:
        if verdict(lam) != "strictly-positive":
            break
        good = lam
    else:
        return AntimaxReport(gap, True, (lam2 - eps0, lam2), scan, lam1, lam2, grid.h)
    if good is None:
        raise RuntimeError("solution is not positive even at lambda1 + eps0; refine the grid")
    lo, hi = good, lam
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if verdict(mid) == "strictly-positive":
            lo = mid
        else:
            hi = mid
    scan.sort()
    return AntimaxReport(float(lo - lam1), False, (float(lo), float(hi)), scan, lam1, lam2, grid.h)
