"""Phase diagram and equations of state.

Two-component model: classification of (a, mu0, mu1) into the single-phase
region R, the coexistence set M (mu0 = mu1 > 1 - ln a) and the critical
line C; activities, densities and pressure of the equilibrium phase(s).

One-component model: obtained from the two-component one at mu0 = mu,
mu1 = ln(theta), with pressure shifted by -theta.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from wrmf.errors import AmbiguityError, CriticalPointError, DomainError
from wrmf.landscape import EPS_MU, ModelParams, find_fixed_points, global_maximizers
from wrmf.special import u

PSI_SERIES_CUTOFF = 1.5
_N_SERIES = 18


@dataclass(frozen=True)
class PhaseClass:
    region: str  # "R", "M" or "C"
    in_spinodal: bool
    order_parameter: float | None = None


@dataclass(frozen=True)
class EosPoint:
    z0: float
    z1: float
    rho0: float
    rho1: float
    pressure: float


@dataclass(frozen=True)
class OneComponentParams:
    a: float
    theta: float
    mu: float

    def __post_init__(self):
        if not (self.a > 0.0) or not math.isfinite(self.a):
            raise DomainError(f"a must be positive and finite, got {self.a!r}")
        if not (self.theta > 0.0) or not math.isfinite(self.theta):
            raise DomainError(f"theta must be positive and finite, got {self.theta!r}")
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")

    def two_component(self) -> ModelParams:
        return ModelParams(self.a, self.mu, math.log(self.theta))

    @property
    def coexistence(self) -> bool:
        """True on the line a > e/theta, mu = ln(theta)."""
        return classify(self.two_component()).region == "M"


@dataclass(frozen=True)
class SpinodalPoint:
    xi: float
    eta: float


@dataclass(frozen=True)
class MaxwellResult:
    z_minus: float
    z_plus: float
    p_star: float
    residual: float
    # both sides of the closed-form equal-area identity
    identity_lhs: float
    identity_rhs: float
    p_star_stable: float = float("nan")


# --- order parameter -------------------------------------------------------


@lru_cache(maxsize=1)
def _psi_coefficients() -> np.ndarray:
    # psi(y) = h coth h - 1 - ln(sinh h / h), h = y/2; both pieces are
    # Bernoulli series, giving sum_n 4^n B_2n / (2n)! * (1 - 1/(2n)) h^(2n).
    # scipy's float Bernoulli numbers lose ~12 digits; take them from mpmath.
    coefs = []
    for n in range(1, _N_SERIES + 1):
        c = mpmath.mpf(4) ** n * mpmath.bernoulli(2 * n) / mpmath.factorial(2 * n)
        coefs.append(float(c * (1 - mpmath.mpf(1) / (2 * n))))
    return np.array(coefs)


def _psi_scalar(y: float) -> float:
    if y < PSI_SERIES_CUTOFF:
        h2 = 0.25 * y * y
        total = 0.0
        for coef in _psi_coefficients()[::-1]:
            total = total * h2 + coef
        return total * h2
    q = y * math.exp(-y) / -math.expm1(-y)  # y / (e^y - 1) without overflow
    lnq = math.log(y) - y - math.log1p(-math.exp(-y))
    return y - 1.0 + q + lnq


def _psi_prime_scalar(y: float) -> float:
    if y < PSI_SERIES_CUTOFF:
        h = 0.5 * y
        h2 = h * h
        coefs = _psi_coefficients()
        n = np.arange(1, len(coefs) + 1)
        total = 0.0
        for coef in (2 * n * coefs)[::-1]:
            total = total * h2 + coef
        return 0.5 * total * h
    h = 0.5 * y
    e2 = math.exp(-2.0 * h)
    return 0.5 * (1.0 / h - 4.0 * h * e2 / (1.0 - e2) ** 2)


def psi(y):
    """Symmetry-breaking function y + y/(e^y - 1) - 1 + ln(y/(e^y - 1)).

    Behaves like y**2/24 near zero and is strictly increasing on (0, inf).
    """
    if np.ndim(y) == 0:
        y = float(y)
        if not y > 0.0:
            raise DomainError(f"psi needs y > 0, got {y!r}")
        return _psi_scalar(y)
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0.0)):
        raise DomainError("psi needs y > 0")
    return np.array([_psi_scalar(v) for v in y.ravel()]).reshape(y.shape)


def psi_prime(y: float) -> float:
    if not y > 0.0:
        raise DomainError(f"psi_prime needs y > 0, got {y!r}")
    return _psi_prime_scalar(float(y))


def order_parameter(a: float, mu: float) -> float:
    """Positive solution ybar of psi(ybar) = mu - (1 - ln a)."""
    if not a > 0.0:
        raise DomainError(f"a must be positive, got {a!r}")
    target = mu - (1.0 - math.log(a))
    if not target > 0.0:
        raise DomainError(f"mu={mu!r} is not above the critical value {1.0 - math.log(a)!r}")

    def g(y):
        return (_psi_scalar(y) if y > 0.0 else 0.0) - target

    hi = 1.0
    while g(hi) < 0.0:
        hi *= 2.0
    y = brentq(g, 0.0, hi, xtol=1e-300, rtol=8.9e-16, maxiter=500)
    gy = g(y)
    if y > 0.0:
        cand = y - gy / _psi_prime_scalar(y)
        if cand > 0.0 and abs(g(cand)) < abs(gy):
            y = cand
    return y


# --- spinodal --------------------------------------------------------------


def spinodal_eta(xi):
    """Half-width eta of the three-fixed-point region at given xi >= 1.

    eta = sqrt(xi^2 - 1) + ln(xi - sqrt(xi^2 - 1)) = sinh(t) - t, t = acosh(xi).
    """
    scalar = np.ndim(xi) == 0
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(~(xi_arr >= 1.0)):
        raise DomainError("spinodal_eta needs xi >= 1")
    t = np.arccosh(xi_arr)
    small = t < 1e-3
    out = np.sinh(t) - t
    ts = t[small]
    out[small] = ts**3 / 6.0 + ts**5 / 120.0 + ts**7 / 5040.0
    return float(out[0]) if scalar else out


def spinodal_coordinates(params: ModelParams) -> SpinodalPoint:
    """(xi, eta) of a point, with eta = |mu0 - mu1| / 2."""
    return SpinodalPoint(params.xi, 0.5 * abs(params.mu0 - params.mu1))


def in_spinodal(params: ModelParams) -> bool:
    """Strictly inside the region where y = w(y) has three solutions."""
    pt = spinodal_coordinates(params)
    if pt.xi <= 1.0:
        return False
    return pt.eta < spinodal_eta(pt.xi)


def spinodal_boundary(a: float, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Both boundary branches in the (mu0, mu1) plane at fixed a.

    Returns ``(mu0_upper, mu1_upper, mu0_lower, mu1_lower)``; the upper
    branch has mu1 > mu0.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = spinodal_eta(xi)
    mid = xi - math.log(a)
    return mid - eta, mid + eta, mid + eta, mid - eta


# --- classification and two-component EOS ---------------------------------


def classify(params: ModelParams) -> PhaseClass:
    spin = in_spinodal(params)
    if abs(params.mu0 - params.mu1) <= EPS_MU:
        mu = 0.5 * (params.mu0 + params.mu1)
        excess = mu - params.mu_c
        if abs(excess) <= EPS_MU:
            return PhaseClass("C", False, None)
        if excess > 0.0:
            return PhaseClass("M", spin, order_parameter(params.a, mu))
    return PhaseClass("R", spin, None)


def _eos_point(a: float, z0: float, z1: float) -> EosPoint:
    return EosPoint(z0, z1, z0, z1, a * z0 * z1 + z0 + z1)


def _polish_densities(a: float, mu0: float, mu1: float, z0: float, z1: float) -> tuple[float, float]:
    """Newton steps on l_i = ln z_i for l0 = mu0 - a z1, l1 = mu1 - a z0.

    Going through y* = w(y*) amplifies rounding by 1/(1 - w'), which reaches
    1 + a z when one species is suppressed.  In log-density variables the
    Jacobian determinant is 1 - a^2 z0 z1 > 0 at every maximizer, so two
    steps restore full precision.
    """
    if z0 == 0.0 or z1 == 0.0:
        # an underflowed density leaves the other one free
        return (0.0, math.exp(mu1)) if z0 == 0.0 else (math.exp(mu0), 0.0)
    for _ in range(2):
        r0 = math.log(z0) - mu0 + a * z1
        r1 = math.log(z1) - mu1 + a * z0
        det = 1.0 - a * a * z0 * z1
        if not det > 0.0:
            break
        d0 = (-r0 + a * z1 * r1) / det
        d1 = (-r1 + a * z0 * r0) / det
        z0, z1 = z0 * math.exp(d0), z1 * math.exp(d1)
    return z0, z1


def two_component_eos(params: ModelParams) -> tuple[EosPoint, ...]:
    """Equilibrium phase(s) at a point of R or M.

    Returns one :class:`EosPoint` on R and two on M, ordered
    ``(z+, z-)`` then ``(z-, z+)``.
    """
    cls = classify(params)
    a = params.a
    if cls.region == "C":
        raise CriticalPointError(f"critical point out of scope: {params}")
    if cls.region == "M":
        mu = 0.5 * (params.mu0 + params.mu1)
        ybar = cls.order_parameter
        zp, zm = _polish_densities(a, mu, mu, u(a, mu + ybar), u(a, mu - ybar))
        return (_eos_point(a, zp, zm), _eos_point(a, zm, zp))
    ystar = global_maximizers(params).maximizers[0]
    z0, z1 = _polish_densities(a, params.mu0, params.mu1, u(a, params.mu0 + ystar), u(a, params.mu1 - ystar))
    return (_eos_point(a, z0, z1),)


def pressure(params: ModelParams) -> float:
    """Pressure a*rho0*rho1 + rho0 + rho1 (same for both phases on M)."""
    return two_component_eos(params)[0].pressure


def eos_residuals(params: ModelParams, pt: EosPoint) -> tuple[float, float]:
    """Log-form residuals of rho0 = exp(mu0 - a rho1), rho1 = exp(mu1 - a rho0)."""
    a = params.a
    r0 = abs(math.log(pt.rho0) - params.mu0 + a * pt.rho1)
    r1 = abs(math.log(pt.rho1) - params.mu1 + a * pt.rho0)
    return r0, r1


def stability(params: ModelParams, pt: EosPoint) -> float:
    """1 - a^2 rho0 rho1; positive at every maximizer of the landscape."""
    return 1.0 - params.a**2 * pt.rho0 * pt.rho1


def critical_isotherm(a: float, eta: float) -> float:
    """Maximizer y* at mu0 + mu1 = 2 - 2 ln a, mu0 - mu1 = eta.

    For small eta this behaves like 2 (6 eta)^(1/3).
    """
    if not eta > 0.0:
        raise DomainError(f"eta must be positive, got {eta!r}")
    mu_c = 1.0 - math.log(a)
    params = ModelParams(a, mu_c + 0.5 * eta, mu_c - 0.5 * eta)
    return global_maximizers(params).maximizers[0]


# --- one-component model ---------------------------------------------------


def coexistence_activities(a: float, theta: float) -> tuple[float, float]:
    """(z-, z+) on the coexistence line; requires a > e/theta."""
    if not a * theta > math.e:
        raise DomainError(f"no coexistence for a={a!r}, theta={theta!r} (need a > e/theta)")
    mu = math.log(theta)
    ybar = order_parameter(a, mu)
    return u(a, mu - ybar), u(a, mu + ybar)


def one_component_density(p: OneComponentParams, side: str = "auto") -> float:
    """Density solving rho = exp(mu - a theta e^(-a rho)) for the stable phase.

    On the coexistence line ``side`` picks the low-density (``"left"``,
    z-) or high-density (``"right"``, z+) phase; ``"auto"`` is ambiguous
    there and raises :class:`AmbiguityError`.  Elsewhere ``side`` is
    ignored.
    """
    if side not in ("left", "right", "auto"):
        raise ValueError(f"side must be 'left', 'right' or 'auto', got {side!r}")
    mp = p.two_component()
    cls = classify(mp)
    if cls.region == "C":
        raise CriticalPointError(f"critical point out of scope: {p}")
    if cls.region == "M":
        if side == "auto":
            raise AmbiguityError(f"two phases coexist at {p}; pass side='left' or 'right'")
        sign = 1.0 if side == "right" else -1.0
        return u(p.a, p.mu + sign * cls.order_parameter)
    ystar = global_maximizers(mp).maximizers[0]
    return u(p.a, p.mu + ystar)


def density_residual(p: OneComponentParams, rho: float) -> float:
    """Log-form residual of rho = exp(mu - a theta e^(-a rho)).

    The factor a follows from eliminating rho1 = theta e^(-a rho) in the
    two-component equations and matches the a theta rho e^(-a rho) term of
    the pressure; without it the identity holds only at a = 1.
    """
    return abs(math.log(rho) - p.mu + p.a * p.theta * math.exp(-p.a * rho))


def _one_minus_exp_poly(t):
    """1 - e^(-t) (1 + t), accurate for small t where it behaves like t^2/2."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 0.5
    ts = t[small]
    acc = np.zeros_like(ts)
    term = np.ones_like(ts)
    for k in range(1, 25):
        term = term * (-ts) / k
        if k >= 2:
            acc += (1 - k) * term
    out[small] = -acc
    tl = t[~small]
    out[~small] = -np.expm1(-tl) - tl * np.exp(-tl)
    return out


def _one_minus_exp_poly_scalar(t: float) -> float:
    """Scalar twin of :func:`_one_minus_exp_poly` for quadrature integrands."""
    if abs(t) >= 0.5:
        return -math.expm1(-t) - t * math.exp(-t)
    acc, term = 0.0, 1.0
    for k in range(1, 25):
        term *= -t / k
        if k >= 2:
            acc += (1 - k) * term
    return -acc


def pressure_of_density(a: float, theta: float, rho):
    """Closed-form a theta rho e^(-a rho) + rho - theta (1 - e^(-a rho)).

    Evaluated formally for any rho; inside (z-, z+) this is the unstable
    van der Waals-like branch.  Computed as rho - theta*(1 - e^(-a rho)(1 + a rho))
    so that small densities keep full relative precision.
    """
    scalar = np.ndim(rho) == 0
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=float))
    out = rho_arr - theta * _one_minus_exp_poly(a * rho_arr)
    return float(out[0]) if scalar else out


def one_component_pressure(p: OneComponentParams, side: str = "auto") -> float:
    """Pressure of the stable phase; equals the plateau value on the coexistence line."""
    if p.coexistence and side == "auto":
        side = "left"
    rho = one_component_density(p, side)
    return float(pressure_of_density(p.a, p.theta, rho))


def plateau_pressure(a: float, theta: float) -> float:
    zm, zp = coexistence_activities(a, theta)
    return a * zp * zm + zp + zm - theta


def maxwell_construction(a: float, theta: float) -> MaxwellResult:
    """Equal-area integral of (p(1/v) - p*) over v in [1/z+, 1/z-].

    Substituting v = e^(-s) turns it into
    int_{ln z-}^{ln z+} (p(e^s) - p*) e^(-s) ds, whose integrand is O(1)
    even when z- is many orders of magnitude below z+.
    """
    zm, zp = coexistence_activities(a, theta)
    p_star = a * zp * zm + zp + zm - theta
    # Same plateau, rewritten with z+ = theta e^(-a z-) to avoid cancelling theta.
    g_m = _one_minus_exp_poly_scalar(a * zm)
    p_star_stable = zm - theta * g_m

    def integrand(s):
        rho = math.exp(s)
        g = _one_minus_exp_poly_scalar(a * rho)
        return ((rho - zm) - theta * (g - g_m)) / rho

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(integrand, math.log(zm), math.log(zp), epsabs=1e-15, epsrel=1e-14, limit=400)
    ybar = order_parameter(a, math.log(theta))
    lhs = math.exp(ybar) - math.exp(-ybar) + ybar
    rhs = zp / zm - zm / zp + a * (zp - zm)
    return MaxwellResult(zm, zp, p_star, val, lhs, rhs, p_star_stable)


def maxwell_check(a: float, theta: float) -> float:
    """Residual of the equal-area rule; vanishes up to quadrature error."""
    return maxwell_construction(a, theta).residual


__all__ = [
    "EosPoint",
    "MaxwellResult",
    "OneComponentParams",
    "PhaseClass",
    "SpinodalPoint",
    "classify",
    "coexistence_activities",
    "critical_isotherm",
    "density_residual",
    "eos_residuals",
    "find_fixed_points",
    "in_spinodal",
    "maxwell_check",
    "maxwell_construction",
    "one_component_density",
    "one_component_pressure",
    "order_parameter",
    "plateau_pressure",
    "pressure",
    "pressure_of_density",
    "psi",
    "psi_prime",
    "spinodal_boundary",
    "spinodal_coordinates",
    "spinodal_eta",
    "stability",
    "two_component_eos",
]
