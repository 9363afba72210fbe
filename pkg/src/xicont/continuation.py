"""Continuation of ``Δu + g(u) = μ f`` in the generalized first harmonic.

Write ``u = ξ f + U`` with ``<U, f> = 0``.  For fixed ``ξ`` the unknowns are
``(U, μ)`` and Newton's method is applied to

    -A (ξ f + U) + g(ξ f + U) - μ f = 0,     <U, f> = 0,

whose linearization is the bordered matrix

    [ -A + diag(g'(u))   -f ]
    [  (w f)^T            0 ].

Under ``g' < ν`` that matrix is invertible, including the case where the
upper-left block itself is singular, so ``ξ`` is a global parameter and the
curve ``μ = φ(ξ)`` can be marched with plain predictor-corrector steps, no
arclength needed.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, GridSpec, LaplacianOp, build_grid, build_laplacian, inner_product, norm
from .nonlinearity import NonlinearitySpec
from .spectral import SpectralData, WeightData, compute_eigenpairs, compute_nu

log = logging.getLogger(__name__)

__all__ = [
    "BorderedSolveError",
    "HypothesisViolation",
    "HomotopyError",
    "Problem",
    "make_problem",
    "CurvePoint",
    "SolutionCurve",
    "StepControl",
    "bordered_matrix",
    "bordered_solve",
    "newton_correct",
    "bootstrap_homotopy",
    "tangent",
    "trace_curve",
    "fit_growth_bound",
    "write_curve_csv",
]


class HypothesisViolation(ValueError):
    """Coefficient ``q`` reaches ``ν``: the bordered system may be singular."""


class BorderedSolveError(RuntimeError):
    pass


class HomotopyError(RuntimeError):
    def __init__(self, message, last_k):
        super().__init__(f"{message} (last accepted k = {last_k:.6g})")
        self.last_k = last_k


@dataclass(frozen=True, eq=False)
class Problem:
    """Discretized domain, Laplacian, eigen-data and weight bundled together."""

    grid: Grid
    lap: LaplacianOp
    spectral: SpectralData
    weight: WeightData

    @property
    def f(self) -> np.ndarray:
        return self.weight.f

    @property
    def nu(self) -> float:
        return self.weight.nu

    @property
    def lam1(self) -> float:
        return self.spectral.lam1

    @property
    def lam2(self) -> float:
        return self.spectral.lam2

    def inner(self, u, v) -> float:
        return inner_product(self.grid, u, v)

    def norm(self, u) -> float:
        return norm(self.grid, u)

    def with_weight(self, f) -> Problem:
        return Problem(self.grid, self.lap, self.spectral, compute_nu(self.spectral, f))


def make_problem(spec: GridSpec, weight="constant") -> Problem:
    """Build a :class:`Problem`.

    ``weight`` is ``"constant"`` (``f = 1``), ``"phi1"``, a nodal array, or a
    callable sampled at the nodes.
    """
    grid = build_grid(spec)
    lap = build_laplacian(grid)
    spectral = compute_eigenpairs(lap, 2)
    if isinstance(weight, str):
        if weight == "constant":
            f = grid.constant(1.0)
        elif weight == "phi1":
            f = np.array(spectral.phi1)
        else:
            raise ValueError(f"unknown builtin weight {weight!r}")
    elif callable(weight):
        f = grid.evaluate(weight)
    else:
        f = np.asarray(weight, dtype=float)
    return Problem(grid, lap, spectral, compute_nu(spectral, f))


# ---------------------------------------------------------------------------
# bordered linear algebra


def bordered_matrix(lap: LaplacianOp, q, f) -> sp.csc_matrix:
    grid = lap.grid
    q, f = grid.check(q), grid.check(f)
    J = -lap.matrix + sp.diags(q)
    col = sp.csc_matrix(-f.reshape(-1, 1))
    row = sp.csr_matrix((grid.weights * f).reshape(1, -1))
    return sp.bmat([[J, col], [row, None]], format="csc")


class BorderedFactor:
    """LU of the bordered matrix, reusable for several right-hand sides."""

    def __init__(self, lap: LaplacianOp, q, f, nu: float | None = None, margin: float = 1e-8):
        grid = lap.grid
        q = grid.check(q)
        if nu is not None:
            qmax = float(np.max(q))
            if not qmax < nu - margin:
                raise HypothesisViolation(
                    f"coefficient max q = {qmax:.10g} is not below nu - margin = {nu - margin:.10g}"
                )
        self.n = grid.size
        try:
            self.lu = spla.splu(bordered_matrix(lap, q, f))
        except RuntimeError as exc:
            raise BorderedSolveError(f"bordered matrix factorization failed: {exc}") from exc

    def solve(self, rhs, xi_rhs: float) -> tuple[np.ndarray, float]:
        b = np.empty(self.n + 1)
        b[: self.n] = rhs
        b[self.n] = xi_rhs
        x = self.lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise BorderedSolveError("bordered solve produced non-finite values")
        return x[: self.n], float(x[self.n])


def bordered_solve(
    lap: LaplacianOp, q, f, rhs, xi_rhs: float, nu: float | None = None, margin: float = 1e-8
) -> tuple[np.ndarray, float]:
    """Solve ``Δz + q z - μ* f = rhs``, ``<z, f> = xi_rhs`` for ``(z, μ*)``.

    When ``nu`` is given, ``max q < nu - margin`` is checked first and a
    :class:`HypothesisViolation` is raised otherwise.
    """
    return BorderedFactor(lap, q, f, nu, margin).solve(rhs, xi_rhs)


# ---------------------------------------------------------------------------
# points and curves


@dataclass(eq=False)
class CurvePoint:
    """Converged (or best-effort) solution ``u = ξ f + U`` at harmonic ``ξ``."""

    xi: float
    mu: float
    U: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    residual: float = 0.0
    converged: bool = True
    iterations: int = 0
    status: str = "converged"
    U_xi: np.ndarray | None = field(default=None, repr=False)
    dmu: float | None = None

    @property
    def u(self) -> np.ndarray:
        return self.xi * self.f + self.U

    @property
    def u_xi(self) -> np.ndarray | None:
        return None if self.U_xi is None else self.f + self.U_xi

    @property
    def min_u(self) -> float:
        return float(np.min(self.u))

    @property
    def max_u(self) -> float:
        return float(np.max(self.u))


@dataclass
class StepControl:
    """Adaptive ``Δξ = s * (1 + |ξ|)`` with ``s`` in ``[s_min, s_max]``."""

    initial: float = 0.05
    s_max: float = 0.1
    max_step: float = np.inf
    min_step: float = 1e-8
    grow: float = 1.5
    fast_iterations: int = 3
    tol: float = 1e-10
    maxiter: int = 25
    max_halvings: int = 8


@dataclass(eq=False)
class SolutionCurve:
    points: list[CurvePoint]
    problem: Problem = field(repr=False)
    g: NonlinearitySpec = field(repr=False)
    truncated: bool = False
    messages: list[str] = field(default_factory=list)
    classification: object = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def xi(self) -> np.ndarray:
        return np.array([p.xi for p in self.points])

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.points])

    @property
    def dmu(self) -> np.ndarray:
        return np.array([np.nan if p.dmu is None else p.dmu for p in self.points])

    def nearest(self, xi: float) -> CurvePoint:
        return self.points[int(np.argmin(np.abs(self.xi - xi)))]


# ---------------------------------------------------------------------------
# Newton correction


def _residual(problem: Problem, G, xi, U, mu):
    u = xi * problem.f + U
    return -(problem.lap.matrix @ u) + G(u) - mu * problem.f


def _tolerance(problem: Problem, mu, tol):
    return tol * (1.0 + abs(mu)) * np.sqrt(problem.weight.norm_sq)


def _newton(problem: Problem, G, dG, xi, U0, mu0, tol, maxiter, max_halvings, margin=1e-8):
    f = problem.f
    U = np.array(U0, dtype=float)
    mu = float(mu0)
    R = _residual(problem, G, xi, U, mu)
    res = problem.norm(R)
    for it in range(maxiter + 1):
        if res <= _tolerance(problem, mu, tol) and np.isfinite(res):
            return U, mu, res, it, "converged"
        if it == maxiter:
            break
        try:
            factor = BorderedFactor(problem.lap, dG(xi * f + U), f, problem.nu, margin)
            dU, dmu = factor.solve(-R, -problem.inner(U, f))
        except (BorderedSolveError, HypothesisViolation) as exc:
            return U, mu, res, it, f"linear solve failed: {exc}"
        t = 1.0
        for _ in range(max_halvings + 1):
            U_try, mu_try = U + t * dU, mu + t * dmu
            R_try = _residual(problem, G, xi, U_try, mu_try)
            res_try = problem.norm(R_try)
            if np.isfinite(res_try) and res_try < (1.0 - 1e-4 * t) * res:
                break
            t *= 0.5
        else:
            if res_try <= _tolerance(problem, mu_try, tol):
                return U_try, mu_try, res_try, it + 1, "converged"
            return U, mu, res, it, "line search exhausted"
        U, mu, R, res = U_try, mu_try, R_try, res_try
    return U, mu, res, maxiter, "maximum iterations reached"


def newton_correct(
    problem: Problem,
    g: NonlinearitySpec,
    xi: float,
    U0,
    mu0: float,
    tol: float = 1e-10,
    maxiter: int = 25,
    max_halvings: int = 8,
) -> CurvePoint:
    """Converge ``(U, μ)`` at fixed ``ξ`` from the guess ``(U0, μ0)``.

    A failed solve returns the best iterate with ``converged=False`` and the
    reason in ``status``.  The residual is the quadrature norm of
    ``Δu + g(u) - μ f``; convergence means ``res <= tol (1 + |μ|) ||f||``.
    """
    U, mu, res, it, status = _newton(problem, g.g, g.dg, xi, U0, mu0, tol, maxiter, max_halvings)
    return CurvePoint(xi, mu, U, problem.f, res, status == "converged", it, status)


def tangent(problem: Problem, g: NonlinearitySpec, p: CurvePoint) -> tuple[np.ndarray, float]:
    """Solve ``Δu_ξ + g'(u) u_ξ = μ'(ξ) f`` with ``<u_ξ, f> = <f, f>``.

    Returns ``(U_ξ, μ')`` where ``U_ξ = u_ξ - f``; the results are also
    stored on ``p``.
    """
    f = problem.f
    u_xi, dmu = bordered_solve(
        problem.lap, g.dg(p.u), f, np.zeros_like(f), problem.weight.norm_sq, nu=problem.nu
    )
    p.U_xi = u_xi - f
    p.dmu = dmu
    return p.U_xi, dmu


# ---------------------------------------------------------------------------
# k-homotopy from the linear problem at resonance


def bootstrap_homotopy(
    problem: Problem,
    g: NonlinearitySpec,
    xi0: float,
    dk: float = 0.25,
    min_dk: float = 1e-8,
    tol: float = 1e-10,
    maxiter: int = 25,
) -> CurvePoint:
    """Solution of harmonic ``xi0`` reached through the family

        Δu + λ1 u + k (g(u) - λ1 u) = μ f,   <u, f> = xi0,   0 <= k <= 1.

    At ``k = 0`` the solution is ``u = a0 φ1``, ``μ = 0`` with
    ``a0 = xi0 / <φ1, f>``.  Steps in ``k`` use an Euler predictor and are
    halved on corrector failure.
    """
    f, lam1, phi1 = problem.f, problem.lam1, problem.spectral.phi1
    a0 = xi0 / problem.weight.f1
    U = a0 * phi1 - xi0 * f
    U -= problem.inner(U, f) / problem.weight.norm_sq * f
    mu = 0.0
    k = 0.0

    def family(kk):
        return (
            lambda u: lam1 * u + kk * (g.g(u) - lam1 * u),
            lambda u: lam1 + kk * (g.dg(u) - lam1),
        )

    def k_tangent(kk, U, mu):
        _, dG = family(kk)
        u = xi0 * f + U
        return bordered_solve(problem.lap, dG(u), f, -(g.g(u) - lam1 * u), 0.0, nu=problem.nu)

    res = problem.norm(_residual(problem, family(0.0)[0], xi0, U, mu))
    while k < 1.0:
        step = min(dk, 1.0 - k)
        dU, dmu = k_tangent(k, U, mu)
        k_new = 1.0 if step == 1.0 - k else k + step
        G, dG = family(k_new)
        U_new, mu_new, res_new, it, status = _newton(
            problem, G, dG, xi0, U + step * dU, mu + step * dmu, tol, maxiter, 8
        )
        if status == "converged":
            k, U, mu, res = k_new, U_new, mu_new, res_new
            if it <= 4:
                dk = min(2 * dk, 1.0)
        else:
            dk = step / 2
            if dk < min_dk:
                raise HomotopyError("k-step underflow in homotopy", k)
            log.debug("homotopy step to k=%g failed (%s); dk -> %g", k_new, status, dk)
    return CurvePoint(xi0, mu, U, f, res, True, 0, "converged")


# ---------------------------------------------------------------------------
# curve tracing


def _march(problem, g, start: CurvePoint, targets, ctl: StepControl, record_all: bool):
    """Walk from ``start`` through the ordered ``targets`` (all on one side)."""
    out: list[CurvePoint] = []
    p = start
    s = ctl.initial
    for target in targets:
        while p.xi != target:
            direction = np.sign(target - p.xi)
            step = min(s * (1 + abs(p.xi)), ctl.max_step)
            # land exactly on the target instead of leaving a rounding-sized remainder
            if abs(target - p.xi) <= step + 1e-12 * (1 + abs(target)):
                xi_new = target
            else:
                xi_new = p.xi + direction * step
            d = xi_new - p.xi
            q = newton_correct(
                problem, g, xi_new, p.U + d * p.U_xi, p.mu + d * p.dmu, ctl.tol, ctl.maxiter, ctl.max_halvings
            )
            if q.converged:
                tangent(problem, g, q)
                p = q
                if record_all or p.xi == target:
                    out.append(p)
                if q.iterations <= ctl.fast_iterations:
                    s = min(s * ctl.grow, ctl.s_max)
            else:
                s /= 2
                if s * (1 + abs(p.xi)) < ctl.min_step:
                    return out, f"corrector failed near xi={xi_new:.6g} at minimum step ({q.status})"
    return out, None


def trace_curve(
    problem: Problem,
    g: NonlinearitySpec,
    xi_min: float,
    xi_max: float,
    anchor: float | CurvePoint = 0.0,
    step: StepControl | None = None,
    xi_nodes=None,
) -> SolutionCurve:
    """Trace ``μ = φ(ξ)`` on ``[xi_min, xi_max]``.

    The first point comes from :func:`bootstrap_homotopy` at ``anchor`` (or
    is the given converged point); the curve is then marched in both
    directions with an Euler predictor along the tangent and a Newton
    corrector.  With ``xi_nodes`` only those abscissae are stored, which
    makes curves from different anchors directly comparable.
    """
    ctl = step or StepControl()
    if not xi_min < xi_max:
        raise ValueError("need xi_min < xi_max")
    if isinstance(anchor, CurvePoint):
        p0 = anchor
    else:
        a = float(np.clip(anchor, xi_min, xi_max))
        p0 = bootstrap_homotopy(problem, g, a, tol=ctl.tol)
    if p0.dmu is None:
        tangent(problem, g, p0)

    if xi_nodes is None:
        up_targets, down_targets = [xi_max], [xi_min]
        record_all = True
        keep_anchor = True
    else:
        nodes = np.unique(np.asarray(xi_nodes, dtype=float))
        nodes = nodes[(nodes >= xi_min) & (nodes <= xi_max)]
        up_targets = list(nodes[nodes > p0.xi])
        down_targets = list(nodes[nodes < p0.xi][::-1])
        record_all = False
        keep_anchor = bool(np.any(nodes == p0.xi))

    up, msg_up = _march(problem, g, p0, up_targets, ctl, record_all)
    down, msg_down = _march(problem, g, p0, down_targets, ctl, record_all)
    points = down[::-1] + ([p0] if keep_anchor else []) + up
    messages = [m for m in (msg_down, msg_up) if m]
    curve = SolutionCurve(points, problem, g, truncated=bool(messages), messages=messages)
    for m in messages:
        log.warning("curve truncated: %s", m)
    if len(points) >= 2:
        curve.diagnostics["growth_bound"] = fit_growth_bound(curve)
    return curve


def fit_growth_bound(curve: SolutionCurve) -> dict:
    """Linear envelope ``|μ| <= c1 |ξ| + c2`` of the traced points.

    The slope and intercept are least-squares fitted to the vertices of the
    upper concave hull of ``(|ξ|, |μ|)``; the intercept is then raised by
    the largest positive vertex residual.  ``slack`` is the smallest margin
    over all traced points (non-negative when the envelope holds).
    """
    x = np.abs(curve.xi)
    y = np.abs(curve.mu)
    order = np.lexsort((-y, x))
    hull: list[int] = []
    for i in order:
        if hull and x[hull[-1]] == x[i]:
            continue
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (x[i1] - x[i0]) * (y[i] - y[i0]) - (y[i1] - y[i0]) * (x[i] - x[i0])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    hx, hy = x[hull], y[hull]
    if len(hull) >= 2:
        c1, c2 = np.polyfit(hx, hy, 1)
    else:
        c1, c2 = 0.0, float(hy[0])
    c2 += max(0.0, float(np.max(hy - (c1 * hx + c2))))
    slack = float(np.min(c1 * x + c2 - y))
    return {"c1": float(c1), "c2": float(c2), "slack": slack, "hull_size": len(hull)}


def write_curve_csv(curve: SolutionCurve, path, extra: dict[str, Callable[[CurvePoint], float]] | None = None):
    """Write one row per point: xi, mu, dmu, minU, maxU, residual (+ extras).

    ``minU``/``maxU`` are extrema of the full solution ``u = ξ f + U``.
    """
    extra = extra or {}
    header = ["xi", "mu", "dmu", "minU", "maxU", "residual", *extra]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for p in curve.points:
            vals = [p.xi, p.mu, np.nan if p.dmu is None else p.dmu, p.min_u, p.max_u, p.residual]
            vals += [fn(p) for fn in extra.values()]
            w.writerow([format(float(v), ".17g") for v in vals])
