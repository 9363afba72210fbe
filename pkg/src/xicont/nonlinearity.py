"""Nonlinearity families ``g(u)`` and their hypothesis audit.

Each family carries closed-form ``g, g', g''``, its asymptotic slopes
``gamma1`` (``u -> -inf``) and ``gamma2`` (``u -> +inf``), and the exact
supremum ``nu1`` of ``g'``.  The solver relies on ``nu1 < nu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .spectral import WeightData

__all__ = [
    "NonlinearityError",
    "NonlinearitySpec",
    "ValidationReport",
    "make_softplus_family",
    "make_fishing_family",
    "make_linear",
    "validate",
]

Func = Callable[[np.ndarray], np.ndarray]


class NonlinearityError(ValueError):
    pass


@dataclass(frozen=True)
class NonlinearitySpec:
    name: str
    g: Func = field(repr=False)
    dg: Func = field(repr=False)
    d2g: Func = field(repr=False)
    gamma1: float
    gamma2: float
    nu1: float
    convexity: str  # "convex", "concave" or "none"
    params: dict = field(default_factory=dict)


def _softplus(u):
    # log(1 + e^u) without overflow
    return np.logaddexp(0.0, u)


def make_softplus_family(gamma1: float, gamma2: float) -> NonlinearitySpec:
    """``g(u) = gamma1*u + (gamma2 - gamma1)*log(1 + e^u)``.

    Convex when ``gamma2 > gamma1``, concave when ``gamma2 < gamma1``.
    """
    gamma1, gamma2 = float(gamma1), float(gamma2)
    if gamma1 == gamma2:
        raise NonlinearityError("gamma1 == gamma2 is degenerate; use make_linear")
    jump = gamma2 - gamma1

    def g(u):
        u = np.asarray(u, dtype=float)
        return gamma1 * u + jump * _softplus(u)

    def dg(u):
        return gamma1 + jump * expit(np.asarray(u, dtype=float))

    def d2g(u):
        u = np.asarray(u, dtype=float)
        # sigma(u) * sigma(-u) keeps full relative accuracy in both tails
        return jump * expit(u) * expit(-u)

    return NonlinearitySpec(
        "softplus",
        g,
        dg,
        d2g,
        gamma1,
        gamma2,
        nu1=max(gamma1, gamma2),
        convexity="convex" if jump > 0 else "concave",
        params={"gamma1": gamma1, "gamma2": gamma2},
    )


def make_fishing_family(a: float, b: float, c: float) -> NonlinearitySpec:
    """Logistic growth ``a*u - b*u**2`` for ``u >= 0``, extended to ``u < 0``.

    The extension ``c*u - (c - a)*tau*(exp(u/tau) - 1)`` with
    ``tau = (c - a)/(2b)`` matches value, slope and curvature at zero, is
    strictly concave, and approaches ``c*u + d`` with ``d = (c - a)**2/(2b)``.
    """
    a, b, c = float(a), float(b), float(c)
    if b <= 0:
        raise NonlinearityError(f"fishing family needs b > 0, got b={b}")
    if c <= a:
        raise NonlinearityError(f"fishing family needs c > a for global concavity, got a={a}, c={c}")
    tau = (c - a) / (2.0 * b)

    def g(u):
        u = np.asarray(u, dtype=float)
        neg = np.minimum(u, 0.0)
        return np.where(u >= 0, a * u - b * u**2, c * neg - (c - a) * tau * np.expm1(neg / tau))

    def dg(u):
        u = np.asarray(u, dtype=float)
        neg = np.minimum(u, 0.0)
        return np.where(u >= 0, a - 2.0 * b * u, c - (c - a) * np.exp(neg / tau))

    def d2g(u):
        u = np.asarray(u, dtype=float)
        neg = np.minimum(u, 0.0)
        return np.where(u >= 0, -2.0 * b, -2.0 * b * np.exp(neg / tau))

    return NonlinearitySpec(
        "fishing",
        g,
        dg,
        d2g,
        gamma1=c,
        gamma2=-np.inf,  # quadratic decay, not asymptotically linear
        nu1=c,
        convexity="concave",
        params={"a": a, "b": b, "c": c, "tau": tau, "d": (c - a) ** 2 / (2.0 * b)},
    )


def make_linear(gamma: float) -> NonlinearitySpec:
    gamma = float(gamma)
    return NonlinearitySpec(
        "linear",
        lambda u: gamma * np.asarray(u, dtype=float),
        lambda u: np.full(np.shape(u), gamma),
        lambda u: np.zeros(np.shape(u)),
        gamma,
        gamma,
        nu1=gamma,
        convexity="none",
        params={"gamma": gamma},
    )


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str]
    first_violation: float | None
    nu1: float
    nu: float
    b1_sup: float
    b2_sup: float

    def __bool__(self):
        return self.ok


def validate(
    spec: NonlinearitySpec,
    w: WeightData,
    lo: float = -50.0,
    hi: float = 50.0,
    samples: int = 10_000,
    rtol: float = 1e-6,
) -> ValidationReport:
    """Audit ``spec`` by dense sampling on ``[lo, hi]``.

    Checks the slope cap ``nu1 < nu``, ``g' <= nu1``, finite-difference
    consistency of ``g'`` and ``g''``, the sign of ``g''`` against the
    convexity tag, and boundedness of ``g - gamma_i u`` on each half-line.
    """
    u = np.linspace(lo, hi, samples)
    failures: list[str] = []
    first: list[float] = []

    def fail(msg, where):
        failures.append(msg)
        if where is not None and len(where):
            first.append(float(where[0]))

    if not spec.nu1 < w.nu:
        fail(f"slope cap violated: need g'(u) <= nu1 < nu, have nu1={spec.nu1:.6g} >= nu={w.nu:.6g}", None)

    g, dg, d2g = spec.g(u), spec.dg(u), spec.d2g(u)
    bad = u[dg > spec.nu1 * (1 + 1e-12) + 1e-12]
    if bad.size:
        fail(f"g'(u) exceeds declared nu1={spec.nu1:.6g}", bad)

    step = 1e-4 * np.maximum(1.0, np.abs(u))
    fd1 = (spec.g(u + step) - spec.g(u - step)) / (2 * step)
    fd2 = (spec.dg(u + step) - spec.dg(u - step)) / (2 * step)
    bad = u[np.abs(fd1 - dg) > rtol * np.maximum(1.0, np.abs(dg))]
    if bad.size:
        fail("g' disagrees with finite differences of g", bad)
    bad = u[np.abs(fd2 - d2g) > rtol * np.maximum(1.0, np.abs(d2g))]
    if bad.size:
        fail("g'' disagrees with finite differences of g'", bad)

    if spec.convexity == "convex":
        bad = u[~(d2g > 0)]
    elif spec.convexity == "concave":
        bad = u[~(d2g < 0)]
    else:
        bad = u[d2g != 0]
    if bad.size:
        fail(f"sign of g'' contradicts convexity tag {spec.convexity!r}", bad)

    neg, pos = u <= 0, u >= 0
    b1_sup = float(np.max(np.abs(g[neg] - spec.gamma1 * u[neg]))) if np.isfinite(spec.gamma1) else np.inf
    b2_sup = float(np.max(np.abs(g[pos] - spec.gamma2 * u[pos]))) if np.isfinite(spec.gamma2) else np.inf
    if np.isfinite(spec.gamma1) and not np.isfinite(b1_sup):
        fail("g - gamma1*u is unbounded on u < 0", None)
    if np.isfinite(spec.gamma2) and not np.isfinite(b2_sup):
        fail("g - gamma2*u is unbounded on u > 0", None)

    return ValidationReport(
        ok=not failures,
        failures=failures,
        first_violation=first[0] if first else None,
        nu1=spec.nu1,
        nu=w.nu,
        b1_sup=b1_sup,
        b2_sup=b2_sup,
    )
