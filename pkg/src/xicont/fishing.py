"""Steady states of a logistic population with spatially distributed harvesting.

    Δu + g(u) = μ f,   u = 0 on the boundary,

with ``g(u) = a u - b u**2`` for ``u >= 0`` and a concave extension to
``u < 0`` (see :func:`~xicont.nonlinearity.make_fishing_family`).  ``μ > 0``
is harvesting, ``μ < 0`` stocking.  At ``μ = 0`` there are the trivial state
and a positive state ``u0``; the curve ``μ(ξ)`` joins them through a single
maximum ``μ̄`` and continues past ``u0`` into the stocking regime.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .analysis import damped_newton, find_solutions, find_turning_point
from .continuation import (
    CurvePoint,
    Problem,
    SolutionCurve,
    StepControl,
    make_problem,
    newton_correct,
    tangent,
    trace_curve,
)
from .grid import GridSpec
from .nonlinearity import NonlinearitySpec, make_fishing_family

log = logging.getLogger(__name__)

__all__ = [
    "FishingError",
    "FishingScenario",
    "FishingResult",
    "default_scenario",
    "find_u0",
    "trace_fishing_curve",
    "solution_on_branch",
    "ordering_check",
]


class FishingError(RuntimeError):
    pass


@dataclass(eq=False)
class FishingScenario:
    a: float
    b: float
    c: float
    problem: Problem = field(repr=False)
    xi0: float | None = None
    mu_bar: float | None = None
    xi_turn: float | None = None
    u0: np.ndarray | None = field(default=None, repr=False)

    @property
    def g(self) -> NonlinearitySpec:
        return make_fishing_family(self.a, self.b, self.c)

    def check(self):
        p = self.problem
        errs = []
        if not p.lam1 < self.a < p.nu:
            errs.append(f"need lambda1 < a < nu, have lambda1={p.lam1:.6g}, a={self.a:.6g}, nu={p.nu:.6g}")
        if not self.b > 0:
            errs.append(f"need b > 0, have b={self.b:.6g}")
        if not self.a < self.c < p.nu:
            errs.append(f"need a < c < nu, have a={self.a:.6g}, c={self.c:.6g}, nu={p.nu:.6g}")
        if not np.all(p.f > 0):
            errs.append("harvesting weight f must be positive")
        if errs:
            raise FishingError("; ".join(errs))


def default_scenario(n: int = 200, problem: Problem | None = None) -> FishingScenario:
    """``L = π``, ``f = 1``, ``a = λ1 + 0.3``, ``b = 1``, ``c = (a + ν)/2``."""
    problem = problem or make_problem(GridSpec.interval(np.pi, n), "constant")
    a = problem.lam1 + 0.3
    return FishingScenario(a, 1.0, 0.5 * (a + problem.nu), problem)


def find_u0(scenario: FishingScenario, retries: int = 5) -> np.ndarray:
    """Positive steady state at ``μ = 0`` by Newton from a scaled ``φ1``.

    The seed amplitude ``(a - λ1) / (b <φ1^3, 1>)`` balances the linear gain
    against the quadratic loss along ``φ1``.  Convergence to the trivial
    state triggers a retry with twice the amplitude.
    """
    p = scenario.problem
    if not scenario.a > p.lam1:
        raise FishingError(f"a={scenario.a:.6g} <= lambda1={p.lam1:.6g}: only the trivial state exists")
    phi1 = p.spectral.phi1
    s = (scenario.a - p.lam1) / (scenario.b * p.inner(phi1**3, np.ones_like(phi1)))
    g = scenario.g
    for attempt in range(retries + 1):
        u = damped_newton(p, g, 0.0, s * phi1, tol=1e-12)
        if u is not None and p.norm(u) > 1e-4:
            if not np.all(u > 0):
                raise FishingError("nontrivial state at mu = 0 is not positive")
            scenario.u0 = u
            scenario.xi0 = p.inner(u, p.f) / p.weight.norm_sq
            return u
        log.debug("u0 attempt %d from amplitude %g failed", attempt, s)
        s *= 2
    raise FishingError(f"no positive state found after {retries} retries")


@dataclass(eq=False)
class FishingResult:
    scenario: FishingScenario
    curve: SolutionCurve = field(repr=False)
    anchor: CurvePoint = field(repr=False)
    turning: object = field(repr=False)
    checks: dict = field(default_factory=dict)
    stocking_point: CurvePoint | None = field(default=None, repr=False)


def trace_fishing_curve(
    scenario: FishingScenario, xi_max_factor: float = 2.0, step: StepControl | None = None
) -> FishingResult:
    """Trace the harvesting curve from ``(ξ0, 0)`` down to ``ξ = 0`` and the
    stocking branch up to ``xi_max_factor * ξ0``, then audit its shape."""
    scenario.check()
    p, g = scenario.problem, scenario.g
    if scenario.u0 is None:
        find_u0(scenario)
    xi0 = scenario.xi0
    anchor = newton_correct(p, g, xi0, scenario.u0 - xi0 * p.f, 0.0, tol=1e-12)
    if not anchor.converged:
        raise FishingError(f"could not re-converge u0 on the curve: {anchor.status}")
    tangent(p, g, anchor)
    # ξ0 is small, so cap Δξ in absolute terms to resolve the arc
    step = step or StepControl(max_step=xi0 / 40)
    curve = trace_curve(p, g, 0.0, xi_max_factor * xi0, anchor=anchor, step=step)
    if curve.truncated:
        raise FishingError("fishing curve truncated: " + "; ".join(curve.messages))

    tp = find_turning_point(curve)
    if tp is None:
        raise FishingError("no interior maximum found on the fishing curve")
    scenario.mu_bar, scenario.xi_turn = tp.mu0, tp.xi0

    xi, mu = curve.xi, curve.mu
    stock = [q for q in curve.points if q.xi > xi0]
    s_pt = solution_on_branch(scenario, curve, xi=1.5 * xi0)
    norms = np.array([p.norm(q.u) for q in stock])
    interior = (xi > 0) & (xi < xi0)
    d2 = np.concatenate([g.d2g(q.u) for q in curve.points])
    checks = {
        "mu_at_zero": float(curve.points[0].mu),
        "xi_at_zero": float(curve.points[0].xi),
        "mu_at_xi0": float(anchor.mu),
        "mu_bar": tp.mu0,
        "xi_turn": tp.xi0,
        "turn_is_maximum": tp.curvature_sign == "negative",
        "turn_inside": bool(0 < tp.xi0 < xi0),
        "mu_positive_inside": bool(np.all(mu[interior] > 0)),
        "stocking_mu_negative": bool(all(q.mu < 0 for q in stock)),
        "stocking_u_positive": bool(all(q.min_u > 0 for q in stock)),
        "stocking_mu_decreasing": bool(np.all(np.diff([q.mu for q in stock]) < 0)),
        "stocking_norm_increasing": bool(np.all(np.diff(norms) > 0)),
        "stocking_point_mu": s_pt.mu,
        "stocking_point_min_u": s_pt.min_u,
        "concave_along_curve": bool(np.all(d2 < 0)),
    }
    return FishingResult(scenario, curve, anchor, tp, checks, s_pt)


def solution_on_branch(
    scenario: FishingScenario,
    curve: SolutionCurve,
    xi: float | None = None,
    mu: float | None = None,
    branch: str = "stocking",
) -> CurvePoint:
    """Converged point on ``curve`` at a given ``ξ``, or at a given ``μ`` on one
    monotone branch: ``"lower"`` (``0..ξ_turn``), ``"upper"``
    (``ξ_turn..ξ0``) or ``"stocking"`` (``ξ > ξ0``)."""
    p, g = scenario.problem, scenario.g

    def at(x):
        base = curve.nearest(x)
        d = x - base.xi
        q = newton_correct(p, g, x, base.U + d * base.U_xi, base.mu + d * base.dmu, tol=1e-12)
        if not q.converged:
            raise FishingError(f"corrector failed at xi={x:.6g}: {q.status}")
        tangent(p, g, q)
        return q

    if xi is not None:
        return at(xi)
    bounds = {
        "lower": (0.0, scenario.xi_turn),
        "upper": (scenario.xi_turn, scenario.xi0),
        "stocking": (scenario.xi0, curve.xi[-1]),
    }[branch]
    lo, hi = bounds
    fl, fh = at(lo).mu - mu, at(hi).mu - mu
    if fl == 0:
        return at(lo)
    if fh == 0:
        return at(hi)
    if fl * fh > 0:
        raise FishingError(f"mu={mu:.6g} not attained on the {branch} branch traced so far")
    x = brentq(lambda s: at(s).mu - mu, lo, hi, xtol=1e-14)
    return at(x)


def ordering_check(scenario: FishingScenario, curve: SolutionCurve, mu1: float, mu2: float, branch="stocking") -> dict:
    """Compare two solutions at ``mu1 <= mu2`` taken from the same branch.

    Reports which ordering holds nodewise, rather than assuming one.
    """
    if mu1 > mu2:
        raise ValueError("need mu1 <= mu2")
    p = scenario.problem
    if branch == "upper" and mu1 == 0.0:
        u1 = scenario.u0
    else:
        u1 = solution_on_branch(scenario, curve, mu=mu1, branch=branch).u
    u2 = solution_on_branch(scenario, curve, mu=mu2, branch=branch).u
    pos1, pos2 = bool(np.all(u1 > 0)), bool(np.all(u2 > 0))
    report = {"mu1": mu1, "mu2": mu2, "branch": branch, "u1_positive": pos1, "u2_positive": pos2}
    if not (pos1 and pos2):
        report["ordering"] = "not-compared"
        return report
    diff = u2 - u1
    if np.all(diff == 0) or mu1 == mu2:
        order = "equal"
    elif np.all(diff > 0):
        order = "u2-above"  # larger mu gives larger u
    elif np.all(diff < 0):
        order = "u1-above"
    else:
        order = "mixed"
    report.update(
        ordering=order,
        uniform=order in ("u2-above", "u1-above", "equal"),
        max_diff=float(np.max(diff)),
        min_diff=float(np.min(diff)),
        norm_u1=p.norm(u1),
        norm_u2=p.norm(u2),
    )
    return report


def count_profile(scenario: FishingScenario, mus, starts: int = 40) -> list[tuple[float, int]]:
    return [(float(m), len(find_solutions(scenario.problem, scenario.g, m, starts))) for m in mus]
