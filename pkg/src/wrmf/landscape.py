"""Free-energy landscape of the two-component model.

E(y) = f(a, mu0 + y) + f(a, mu1 - y) - y**2 / (2a)

Its stationary points are the fixed points of
w(y) = a u(a, mu0 + y) - a u(a, mu1 - y), and the global maximizer
selects the equilibrium phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

from wrmf.errors import DomainError, NumericalError
from wrmf.special import f, u, u_prime

TIE_RTOL = 1e-10
DEGENERATE_TOL = 1e-9
TANGENCY_TOL = 1e-6
EPS_MU = 1e-12
ROOT_RTOL = 1e-11


@dataclass(frozen=True)
class ModelParams:
    """Thermodynamic point (a, mu0, mu1) of the two-component model."""

    a: float
    mu0: float
    mu1: float

    def __post_init__(self):
        if not (self.a > 0.0) or not math.isfinite(self.a):
            raise DomainError(f"a must be positive and finite, got {self.a!r}")
        if not (math.isfinite(self.mu0) and math.isfinite(self.mu1)):
            raise DomainError("chemical potentials must be finite")

    def swapped(self) -> "ModelParams":
        return ModelParams(self.a, self.mu1, self.mu0)

    @property
    def mu_c(self) -> float:
        """Critical chemical potential 1 - ln a."""
        return 1.0 - math.log(self.a)

    @property
    def xi(self) -> float:
        return 0.5 * (self.mu0 + self.mu1) + math.log(self.a)


@dataclass
class LandscapeSolution:
    fixed_points: list[float]
    maximizers: list[float]
    degenerate: bool
    e_value: float
    # True when two fixed points merged into a double root.
    tangent: bool = False
    fixed_point_values: list[float] = field(default_factory=list)


def E(params: ModelParams, y):
    a = params.a
    return f(a, params.mu0 + y) + f(a, params.mu1 - y) - y * y / (2.0 * a)


def E1(params: ModelParams, y):
    """First y-derivative of E."""
    a = params.a
    return u(a, params.mu0 + y) - u(a, params.mu1 - y) - y / a


def E2(params: ModelParams, y):
    """Second y-derivative of E."""
    a = params.a
    return u_prime(a, params.mu0 + y) + u_prime(a, params.mu1 - y) - 1.0 / a


def w(params: ModelParams, y):
    a = params.a
    return a * u(a, params.mu0 + y) - a * u(a, params.mu1 - y)


def w_prime(params: ModelParams, y):
    a = params.a
    return a * (u_prime(a, params.mu0 + y) + u_prime(a, params.mu1 - y))


def c(params: ModelParams, y):
    """a^2 u(a, mu0 + y) u(a, mu1 - y) - 1; has the sign of w'(y) - 1."""
    a = params.a
    return a * a * u(a, params.mu0 + y) * u(a, params.mu1 - y) - 1.0


def tangency_points(params: ModelParams) -> tuple[float, float] | None:
    """Points where w'(y) = 1, i.e. c(y) = 0, in ascending order.

    There a*u(mu0+y) and a*u(mu1-y) have product 1 and sum 2*xi, so they are
    xi -+ sqrt(xi^2 - 1).  Returns None when xi < 1 (c < 0 everywhere).
    """
    xi = params.xi
    if xi < 1.0:
        return None
    s = math.sqrt((xi - 1.0) * (xi + 1.0))
    la = math.log(params.a)
    ys = []
    for vp in (xi - s, xi + s):
        ys.append(vp + math.log(vp) - la - params.mu0)
    ys.sort()
    return ys[0], ys[1]


def _outer_bounds(params: ModelParams, g, inner_lo: float, inner_hi: float):
    span = 1.0 + abs(params.mu0) + abs(params.mu1) + params.a
    hi = max(span, inner_hi + span)
    for _ in range(200):
        if g(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise NumericalError("could not bracket the largest fixed point")
    lo = min(-span, inner_lo - span)
    for _ in range(200):
        if g(lo) > 0.0:
            break
        lo *= 2.0
    else:
        raise NumericalError("could not bracket the smallest fixed point")
    return lo, hi


def _polish(params: ModelParams, g, lo: float, hi: float) -> float:
    r = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=400)
    gr = g(r)
    for _ in range(3):
        d = w_prime(params, r) - 1.0
        if d == 0.0:
            break
        cand = r - gr / d
        if not lo <= cand <= hi:
            break
        gc = g(cand)
        if abs(gc) >= abs(gr):
            break
        r, gr = cand, gc
    return r


def _fixed_points(params: ModelParams) -> tuple[list[float], bool]:
    def g(y):
        return w(params, y) - y

    tp = tangency_points(params)
    if tp is None:
        lo, hi = _outer_bounds(params, g, 0.0, 0.0)
        roots = [_polish(params, g, lo, hi)]
        tangent = False
    else:
        ya, yb = tp
        lo, hi = _outer_bounds(params, g, ya, yb)
        ga, gb = g(ya), g(yb)
        if abs(ga) <= ROOT_RTOL * 0.1 * (1.0 + abs(ya)):
            ga = 0.0
        if abs(gb) <= ROOT_RTOL * 0.1 * (1.0 + abs(yb)):
            gb = 0.0
        roots = []
        tangent = False
        # g decreases on (-inf, ya], increases on [ya, yb], decreases on [yb, inf)
        if ga < 0.0:
            roots.append(_polish(params, g, lo, ya))
        elif ga == 0.0:
            roots.append(ya)
            tangent = True
        if ga < 0.0 < gb:
            roots.append(_polish(params, g, ya, yb))
        if gb > 0.0:
            roots.append(_polish(params, g, yb, hi))
        elif gb == 0.0:
            roots.append(yb)
            tangent = True
        roots.sort()
        merged = [roots[0]]
        for r in roots[1:]:
            if abs(r - merged[-1]) <= 1e-12 * (1.0 + abs(r)):
                tangent = True
                continue
            merged.append(r)
        roots = merged
    for r in roots:
        if abs(g(r)) > ROOT_RTOL * (1.0 + abs(r)):
            raise NumericalError(f"fixed point {r!r} failed residual check")
        if abs(w_prime(params, r) - 1.0) <= TANGENCY_TOL and len(roots) == 2:
            tangent = True
    return roots, tangent


def find_fixed_points(params: ModelParams) -> list[float]:
    """All solutions of y = w(y) in ascending order (between one and three)."""
    return _fixed_points(params)[0]


def global_maximizers(params: ModelParams) -> LandscapeSolution:
    """Global maximizer(s) of E among its stationary points."""
    roots, tangent = _fixed_points(params)
    values = [E(params, r) for r in roots]
    best = max(values)
    tied = [r for r, v in zip(roots, values) if abs(v - best) <= TIE_RTOL * (1.0 + abs(best))]
    if len(tied) > 1:
        delta = params.mu0 - params.mu1
        if abs(delta) > EPS_MU:
            # off the diagonal the maximizer sits on the side of the larger mu
            tied = [max(tied)] if delta > 0 else [min(tied)]
        else:
            tied = [min(tied), max(tied)]
    e_val = max(E(params, r) for r in tied)
    degenerate = any(abs(E2(params, r)) <= DEGENERATE_TOL for r in tied)
    return LandscapeSolution(
        fixed_points=roots,
        maximizers=tied,
        degenerate=degenerate,
        e_value=e_val,
        tangent=tangent,
        fixed_point_values=values,
    )
