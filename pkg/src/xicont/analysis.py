"""Post-processing of traced curves: turning points, shape classification,
asymptotic slopes, and an independent multistart count of solutions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .continuation import CurvePoint, Problem, SolutionCurve, newton_correct, tangent
from .nonlinearity import NonlinearitySpec

__all__ = [
    "AnalysisError",
    "MultipleTurningPoints",
    "TurningPoint",
    "CurveClassification",
    "HarmonicBridge",
    "find_turning_points",
    "find_turning_point",
    "second_derivative_identity",
    "fd_second_derivative",
    "classify",
    "harmonic_bridge",
    "asymptotic_slopes",
    "damped_newton",
    "find_solutions",
    "count_solutions_oracle",
]


class AnalysisError(RuntimeError):
    pass


class MultipleTurningPoints(AnalysisError):
    """More than one sign change of μ' was found along a single curve."""

    def __init__(self, turning_points):
        locs = ", ".join(f"{tp.xi0:.6g}" for tp in turning_points)
        super().__init__(f"{len(turning_points)} turning points found at xi = {locs}")
        self.turning_points = turning_points


@dataclass(eq=False)
class TurningPoint:
    xi0: float
    mu0: float
    w: np.ndarray = field(repr=False)
    point: CurvePoint = field(repr=False)
    curvature_sign: str  # sign of μ'' from the identity: "positive" / "negative"
    identity_residual: float
    secant_iterations: int


@dataclass
class CurveClassification:
    label: str
    case: str
    mu0: float | None
    predicted_counts: dict
    consistent: bool
    slopes: dict | None = None
    bridge_factor: float | None = None
    notes: list[str] = field(default_factory=list)

    def predicted_count(self, mu: float) -> int:
        if self.mu0 is None or self.label in ("decreasing", "increasing"):
            return 1
        if mu == self.mu0:
            return self.predicted_counts["at"]
        return self.predicted_counts["above" if mu > self.mu0 else "below"]


@dataclass(eq=False)
class HarmonicBridge:
    xi: float
    xibar: float
    Ubar: np.ndarray = field(repr=False)
    residual: float


# ---------------------------------------------------------------------------
# turning points


def _refine(problem, g, a: CurvePoint, b: CurvePoint, tol, maxiter):
    """Illinois-safeguarded secant on ``μ'(ξ)`` inside the bracket ``[a, b]``."""
    fa, fb = a.dmu, b.dmu
    side = 0
    best = a if abs(fa) < abs(fb) else b
    for it in range(1, maxiter + 1):
        xi = (a.xi * fb - b.xi * fa) / (fb - fa)
        # start from the nearer endpoint, predicted along its tangent
        base = a if abs(xi - a.xi) < abs(xi - b.xi) else b
        d = xi - base.xi
        p = newton_correct(problem, g, xi, base.U + d * base.U_xi, base.mu + d * base.dmu, tol=1e-12)
        if not p.converged:
            p = newton_correct(problem, g, xi, base.U, base.mu, tol=1e-12, maxiter=50)
            if not p.converged:
                raise AnalysisError(f"corrector failed during turning-point refinement at xi={xi:.6g}")
        tangent(problem, g, p)
        best = p
        if abs(p.dmu) <= tol:
            return best, it
        if np.sign(p.dmu) == np.sign(fa):
            a, fa = p, p.dmu
            if side == -1:
                fb /= 2
            side = -1
        else:
            b, fb = p, p.dmu
            if side == 1:
                fa /= 2
            side = 1
    raise AnalysisError(f"turning point not resolved to |mu'| <= {tol:g}; best {best.dmu:.3e}")


def _make_turning_point(problem, g, p: CurvePoint, iterations) -> TurningPoint:
    w = p.u_xi
    lhs = problem.inner(g.d2g(p.u) * w**3, np.ones_like(w))
    wf = problem.inner(w, problem.f)
    mu2 = lhs / wf
    # Δw + g'(u) w should vanish at the turning point
    r = -(problem.lap.matrix @ w) + g.dg(p.u) * w
    ident = problem.norm(r) / max(problem.norm(problem.lap.matrix @ w), 1e-300)
    return TurningPoint(
        p.xi, p.mu, w, p, "positive" if mu2 > 0 else "negative", ident, iterations
    )


def find_turning_points(
    curve: SolutionCurve, tol: float = 1e-8, maxiter: int = 60
) -> list[TurningPoint]:
    pts = curve.points
    if any(p.dmu is None for p in pts):
        raise AnalysisError("curve points lack tangents")
    problem, g = curve.problem, curve.g
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        if a.dmu == 0.0:
            out.append(_make_turning_point(problem, g, a, 0))
        elif a.dmu * b.dmu < 0:
            p, it = _refine(problem, g, a, b, tol, maxiter)
            out.append(_make_turning_point(problem, g, p, it))
    return out


def find_turning_point(curve: SolutionCurve, tol: float = 1e-8) -> TurningPoint | None:
    """The unique critical point of ``μ(ξ)``, or ``None`` if ``μ'`` keeps its sign.

    Raises :class:`MultipleTurningPoints` when more than one is detected.
    """
    tps = find_turning_points(curve, tol)
    if len(tps) > 1:
        raise MultipleTurningPoints(tps)
    return tps[0] if tps else None


def second_derivative_identity(
    tp: TurningPoint | CurvePoint, problem: Problem, g: NonlinearitySpec
) -> tuple[str, float]:
    """``μ''(ξ0) = <g''(u) w^3, 1> / <w, f>`` at a turning point.

    Returns the sign of ``<g''(u) w^3, 1>`` and the estimate of ``μ''``.
    """
    p = tp.point if isinstance(tp, TurningPoint) else tp
    w = p.u_xi
    if w is None:
        raise AnalysisError("point has no tangent")
    wf = problem.inner(w, problem.f)
    if wf <= 0:
        raise AnalysisError(f"<w, f> = {wf:.3e} is not positive: discretization anomaly")
    lhs = problem.inner(g.d2g(p.u) * w**3, np.ones_like(w))
    sign = "positive" if lhs > 0 else "negative" if lhs < 0 else "zero"
    return sign, lhs / wf


def fd_second_derivative(problem: Problem, g: NonlinearitySpec, p: CurvePoint, delta: float) -> float:
    """Centered second difference of ``μ(ξ)`` around a converged point."""
    mus = []
    for d in (-delta, delta):
        q = newton_correct(problem, g, p.xi + d, p.U + d * p.U_xi, p.mu + d * p.dmu, tol=1e-12)
        if not q.converged:
            raise AnalysisError(f"corrector failed at xi={p.xi + d:.6g}")
        mus.append(q.mu)
    return (mus[0] - 2 * p.mu + mus[1]) / delta**2


# ---------------------------------------------------------------------------
# classification


def _case(g: NonlinearitySpec, lam1: float, nu: float) -> tuple[str, str]:
    g1, g2 = g.gamma1, g.gamma2
    if not g.nu1 < nu:
        raise AnalysisError(
            f"hypothesis g'(u) <= nu1 < nu fails (nu1={g.nu1:.6g}, nu={nu:.6g}); classification refused"
        )
    if lam1 in (g1, g2):
        raise AnalysisError("an asymptotic slope equals lambda1: boundary case not classified")
    if g1 < lam1 and g2 < lam1:
        return "decreasing", "i"
    if lam1 < g1 < nu and lam1 < g2 < nu:
        return "increasing", "ii"
    if g.convexity == "convex" and g1 < lam1 < g2:
        return "parabola-min", "iii-convex"
    if g.convexity == "concave" and g2 < lam1 < g1:
        return "parabola-max", "iii-concave"
    raise AnalysisError(
        f"slopes gamma1={g1:.6g}, gamma2={g2:.6g} with convexity {g.convexity!r} fall outside the classified cases"
    )


def classify(curve: SolutionCurve, min_range: float = 1.0) -> CurveClassification:
    """Label the curve from ``(gamma1, gamma2, lambda1, nu)`` and check the trace agrees."""
    problem, g = curve.problem, curve.g
    xi = curve.xi
    if xi.size < 3 or xi[-1] - xi[0] < min_range:
        raise AnalysisError(f"curve spans less than the required xi-range {min_range}")
    label, case = _case(g, problem.lam1, problem.nu)
    dmu = curve.dmu
    notes = []
    mu0 = None
    if label == "decreasing":
        consistent = bool(np.all(dmu < 0))
        counts = {"any": 1}
    elif label == "increasing":
        consistent = bool(np.all(dmu > 0))
        counts = {"any": 1}
    else:
        try:
            tp = find_turning_point(curve)
        except MultipleTurningPoints as exc:
            tp = None
            notes.append(str(exc))
        if tp is None:
            consistent = False
            notes.append("no single turning point found on the traced range")
        else:
            mu0 = tp.mu0
            want = "positive" if label == "parabola-min" else "negative"
            consistent = tp.curvature_sign == want
        if label == "parabola-min":
            counts = {"above": 2, "at": 1, "below": 0}
        else:
            counts = {"below": 2, "at": 1, "above": 0}
    cls = CurveClassification(
        label,
        case,
        mu0,
        counts,
        consistent,
        bridge_factor=problem.weight.norm_sq / problem.weight.f1,
        notes=notes,
    )
    curve.classification = cls
    return cls


# ---------------------------------------------------------------------------
# bridge between the generalized and the classical first harmonic


def harmonic_bridge(p: CurvePoint, problem: Problem) -> HarmonicBridge:
    """Classical harmonic ``ξ̄ = <u, φ1>`` and the identity
    ``ξ <f, f> = ξ̄ <f, φ1> + <Ū, f>`` evaluated as a residual."""
    phi1 = problem.spectral.phi1
    u = p.u
    xibar = problem.inner(u, phi1)
    Ubar = u - xibar * phi1
    lhs = p.xi * problem.weight.norm_sq
    rhs = xibar * problem.weight.f1 + problem.inner(Ubar, problem.f)
    scale = 1.0 + abs(lhs) + abs(xibar * problem.weight.f1)
    return HarmonicBridge(p.xi, xibar, Ubar, abs(lhs - rhs) / scale)


def asymptotic_slopes(curve: SolutionCurve, threshold: float = 50.0, fraction: float = 0.2) -> dict:
    """Measured and predicted ``dμ/dξ̄`` at both ends of the curve.

    The measured slope is the secant over the outer ``fraction`` of the
    traced ``ξ``-range on each side; the prediction is
    ``(gamma_i - lambda1) / <f, φ1>``.
    """
    problem, g = curve.problem, curve.g
    xi = curve.xi
    if xi[0] > -threshold or xi[-1] < threshold:
        raise AnalysisError(f"curve must reach |xi| >= {threshold} on both sides")
    span = xi[-1] - xi[0]
    xibar = np.array([harmonic_bridge(p, problem).xibar for p in curve.points])
    mu = curve.mu
    left = np.flatnonzero(xi <= xi[0] + fraction * span)
    right = np.flatnonzero(xi >= xi[-1] - fraction * span)

    def secant(idx):
        i, j = idx[0], idx[-1]
        return (mu[j] - mu[i]) / (xibar[j] - xibar[i])

    f1 = problem.weight.f1
    result = {
        "left": float(secant(left)),
        "right": float(secant(right)),
        "predicted_left": (g.gamma1 - problem.lam1) / f1,
        "predicted_right": (g.gamma2 - problem.lam1) / f1,
        "xibar_range": (float(xibar[0]), float(xibar[-1])),
        "min_u_right": float(curve.points[-1].min_u),
        "max_u_left": float(curve.points[0].max_u),
    }
    if curve.classification is not None:
        curve.classification.slopes = result
    return result


# ---------------------------------------------------------------------------
# independent multistart oracle


def damped_newton(problem: Problem, g: NonlinearitySpec, mu: float, u, tol=1e-10, maxiter=100, max_halvings=30):
    """Damped Newton on the unconstrained system ``Δu + g(u) = μ f``.

    Returns the converged field or ``None``.
    """
    A, f = problem.lap.matrix, problem.f
    scale = tol * (1.0 + abs(mu)) * np.sqrt(problem.weight.norm_sq)

    def resid(v):
        return -(A @ v) + g.g(v) - mu * f

    R = resid(u)
    res = problem.norm(R)
    for _ in range(maxiter):
        if res <= scale:
            return u
        J = (-A + sp.diags(g.dg(u))).tocsc()
        try:
            du = spla.spsolve(J, -R)
        except RuntimeError:
            return None
        if not np.all(np.isfinite(du)):
            return None
        t = 1.0
        for _ in range(max_halvings + 1):
            v = u + t * du
            Rv = resid(v)
            rv = problem.norm(Rv)
            if np.isfinite(rv) and rv < (1 - 1e-4 * t) * res:
                break
            t /= 2
        else:
            return None
        u, R, res = v, Rv, rv
    return u if res <= scale else None


def find_solutions(
    problem: Problem,
    g: NonlinearitySpec,
    mu: float,
    starts: int = 40,
    smin: float = 1e-2,
    smax: float = 1e3,
    tol: float = 1e-10,
    maxiter: int = 100,
    max_halvings: int = 30,
    dedup: float = 1e-6,
) -> list[np.ndarray]:
    """Distinct solutions of ``Δu + g(u) = μ f`` from starts ``s φ1``.

    ``s`` runs over log-spaced magnitudes in ``[smin, smax]`` of both signs
    (plus ``s = 0`` when ``starts`` is odd).  Each start runs damped Newton on
    the unconstrained system; converged solutions closer than
    ``dedup * (1 + ||u||)`` are merged.
    """
    half = starts // 2
    mags = np.logspace(np.log10(smin), np.log10(smax), half)
    svals = np.concatenate([-mags[::-1], [0.0] if starts % 2 else [], mags])
    phi1 = problem.spectral.phi1
    found: list[np.ndarray] = []
    for s in svals:
        u = damped_newton(problem, g, mu, s * phi1, tol, maxiter, max_halvings)
        if u is None:
            continue
        nu_ = problem.norm(u)
        if all(problem.norm(u - v) >= dedup * (1 + nu_) for v in found):
            found.append(u)
    found.sort(key=lambda v: problem.inner(v, problem.f))
    return found


def count_solutions_oracle(problem: Problem, g: NonlinearitySpec, mu: float, starts: int = 40, **kw) -> int:
    return len(find_solutions(problem, g, mu, starts, **kw))
