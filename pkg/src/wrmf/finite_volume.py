"""Finite-volume partition functions and their thermodynamic limits.

All series are summed in the log domain with a single running shift, so
nothing of size exp(V * ...) is ever materialised.  Two representations of
the grand partition function are provided:

* the particle-number series with the type-1 sum done in closed form,
  ``Xi = sum_n0 V^n0/n0! exp(mu0 n0 + V exp(mu1 - a n0 / V))``;
* the Gaussian (Hubbard-Stratonovich) integral
  ``Xi = sqrt(V / (2 pi a)) int exp(V E_V(y)) dy``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import brentq
from scipy.special import gammaln

from wrmf.errors import NumericalError
from wrmf.landscape import E2 as landscape_E2
from wrmf.landscape import ModelParams, global_maximizers
from wrmf.special import u

LOG_DROP = 40.0
TAIL_RTOL = 1e-14
WINDOW_LOG_DROP = -math.log(1e-18)
_GL_T, _GL_W = np.polynomial.legendre.leggauss(24)

_lgamma_lock = threading.Lock()
_lgamma_table = gammaln(np.arange(1, 4097, dtype=float))


def _log_factorials(n_max: int) -> np.ndarray:
    """ln(n!) for n = 0..n_max (shared, grown on demand)."""
    global _lgamma_table
    table = _lgamma_table
    if len(table) <= n_max:
        with _lgamma_lock:
            size = len(_lgamma_table)
            while size <= n_max:
                size *= 2
            _lgamma_table = gammaln(np.arange(1, size + 1, dtype=float))
            table = _lgamma_table
    return table[: n_max + 1]


@dataclass(frozen=True)
class FiniteVolumeState:
    """Truncation window of the single-species series at (a, x, V)."""

    V: float
    n_max: int
    # bound on neglected mass relative to the retained sum
    tail_bound: float


@dataclass(frozen=True)
class SeriesMoments:
    log_sum: float
    mean: float
    var: float
    third: float
    mode: int
    state: FiniteVolumeState


@dataclass(frozen=True)
class FiniteVolumeReport:
    V: float
    F_Lambda: float
    F0: float
    F1: float
    y_star_V: float
    f_V0: float
    f_V1: float
    u_V0: float
    u_V1: float
    mu_tilde0: float
    mu_tilde1: float


def _check(a: float, V: float):
    if not a > 0.0:
        raise ValueError(f"a must be positive, got {a!r}")
    if not V > 0.0:
        raise ValueError(f"V must be positive, got {V!r}")


def _initial_window(a: float, x: float, V: float) -> int:
    peak = V * u(a, x + a / (2.0 * V))
    return int(math.ceil(peak) + math.ceil(12.0 * math.sqrt(1.0 + peak)) + 50)


def _single_log_terms(a: float, x: float, V: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1, dtype=float)
    return n * (math.log(V) + x) - _log_factorials(n_max) - a * n * n / (2.0 * V)


def series_moments(a: float, x: float, V: float) -> SeriesMoments:
    """Log-sum and central moments of pi_V(x, n) ~ V^n/n! exp(x n - a n^2 / 2V)."""
    _check(a, V)
    n_max = _initial_window(a, x, V)
    for _ in range(8):
        logs = _single_log_terms(a, x, V, n_max)
        k = int(np.argmax(logs))
        peak = logs[k]
        # successive-term ratio at the cut; ratios decrease with n
        log_r = math.log(V) + x - a * (2 * n_max + 1) / (2.0 * V) - math.log(n_max + 1)
        if logs[-1] <= peak - LOG_DROP and log_r < 0.0:
            w = np.exp(logs - peak)
            total = w.sum()
            r = math.exp(log_r)
            tail = w[-1] * r / (1.0 - r) / total
            if tail <= TAIL_RTOL:
                n = np.arange(n_max + 1, dtype=float)
                p = w / total
                mean = float(p @ n)
                d = n - mean
                var = float(p @ (d * d))
                third = float(p @ (d * d * d))
                state = FiniteVolumeState(V, n_max, tail)
                return SeriesMoments(peak + math.log(total), mean, var, third, k, state)
        n_max *= 2
    raise NumericalError(f"series truncation not certified at a={a}, x={x}, V={V}")


def truncation(a: float, x: float, V: float) -> FiniteVolumeState:
    return series_moments(a, x, V).state


def f_V(a: float, x: float, V: float) -> float:
    """(1/V) ln sum_n V^n/n! exp(x n - a n^2 / (2V))."""
    return series_moments(a, x, V).log_sum / V


def u_V(a: float, x: float, V: float) -> float:
    """x-derivative of f_V, equal to <n>_V / V."""
    return series_moments(a, x, V).mean / V


def u_V_prime(a: float, x: float, V: float) -> float:
    """Var(n) / V; lies in [0, u_V]."""
    return series_moments(a, x, V).var / V


def u_V_second(a: float, x: float, V: float) -> float:
    """Third central moment / V."""
    return series_moments(a, x, V).third / V


def mode(a: float, x: float, V: float) -> int:
    """Most probable particle number n_* of pi_V(x, .)."""
    return series_moments(a, x, V).mode


def mode_bounds(a: float, x: float, V: float) -> tuple[int, int]:
    """Integer interval [ceil(V u - 1), floor(V u)], u = u(a, x + a/2V), holding the mode.

    Raises NumericalError if the computed mode falls outside it or the
    weights are not unimodal across the truncation window.
    """
    m = series_moments(a, x, V)
    vu = V * u(a, x + a / (2.0 * V))
    lo, hi = math.ceil(vu - 1.0 - 1e-9 * (1.0 + vu)), math.floor(vu + 1e-9 * (1.0 + vu))
    if not lo <= m.mode <= hi:
        raise NumericalError(f"mode {m.mode} outside [{lo}, {hi}] at a={a}, x={x}, V={V}")
    diffs = np.diff(_single_log_terms(a, x, V, m.state.n_max))
    if np.any(diffs[: m.mode] < 0.0) or np.any(diffs[m.mode :] > 0.0):
        raise NumericalError(f"weights not unimodal at a={a}, x={x}, V={V}")
    return lo, hi


# --- landscape at finite V -------------------------------------------------


def E_V(params: ModelParams, y: float, V: float) -> float:
    a = params.a
    return f_V(a, params.mu0 + y, V) + f_V(a, params.mu1 - y, V) - y * y / (2.0 * a)


def E_V1(params: ModelParams, y: float, V: float) -> float:
    a = params.a
    return u_V(a, params.mu0 + y, V) - u_V(a, params.mu1 - y, V) - y / a


def E_V2(params: ModelParams, y: float, V: float) -> float:
    a = params.a
    return u_V_prime(a, params.mu0 + y, V) + u_V_prime(a, params.mu1 - y, V) - 1.0 / a


def _refine_peak(params: ModelParams, y0: float, V: float) -> float | None:
    """Local maximizer of E_V next to y0, or None when it has disappeared."""
    d = max(2.0 / V, 1e-3)
    for _ in range(30):
        lo, hi = y0 - d, y0 + d
        if E_V1(params, lo, V) > 0.0 and E_V1(params, hi, V) < 0.0:
            return brentq(lambda y: E_V1(params, y, V), lo, hi, xtol=1e-14, rtol=8.9e-16)
        d *= 1.6
        if d > 10.0 * (1.0 + abs(y0)):
            break
    return None


def _landscape_peaks(params: ModelParams, V: float) -> list[float]:
    sol = global_maximizers(params)
    candidates = [r for r in sol.fixed_points if landscape_E2(params, r) < 0.0] or sol.maximizers
    peaks = []
    for y0 in candidates:
        yp = _refine_peak(params, y0, V)
        if yp is not None:
            peaks.append(yp)
    if not peaks:
        raise NumericalError(f"no maximum of E_V found at {params}, V={V}")
    return sorted(peaks)


def y_star_V(params: ModelParams, V: float) -> float:
    """Maximizer of E_V tracking the landscape maximizer y*.

    On the coexistence set the positive-side maximizer is returned.
    """
    sol = global_maximizers(params)
    target = max(sol.maximizers)
    yp = _refine_peak(params, target, V)
    if yp is None:
        raise NumericalError(f"E_V has no maximum near y*={target} at V={V}")
    return yp


def _window(params: ModelParams, V: float):
    peaks = _landscape_peaks(params, V)
    values = [E_V(params, p, V) for p in peaks]
    top = max(values)
    edges = []
    for start, sign in ((peaks[0], -1.0), (peaks[-1], 1.0)):
        curv = abs(E_V2(params, start, V))
        step = 1.0 / math.sqrt(V * max(curv, 1e-3))
        y = start
        for _ in range(200):
            y += sign * step
            if V * (E_V(params, y, V) - top) < -WINDOW_LOG_DROP - 5.0:
                break
            step *= 1.5
        else:
            raise NumericalError(f"integration window not found at {params}, V={V}")
        edges.append(y)
    return edges[0], edges[1], peaks, top


def _gaussian_integrals(params: ModelParams, V: float, with_moments: bool):
    lo, hi, peaks, top = _window(params, V)
    a = params.a

    def integrand(y):
        m0 = series_moments(a, params.mu0 + y, V)
        m1 = series_moments(a, params.mu1 - y, V)
        e = m0.log_sum + m1.log_sum - V * y * y / (2.0 * a) - V * top
        g = math.exp(e)
        if with_moments:
            return np.array([g, g * m0.mean / V, g * m1.mean / V])
        return np.array([g])

    pts = [p for p in peaks if lo < p < hi]
    val, err = quad_vec(integrand, lo, hi, epsabs=0.0, epsrel=1e-12, points=pts or None, limit=2000)
    if not np.all(np.isfinite(val)) or val[0] <= 0.0:
        raise NumericalError(f"quadrature failed at {params}, V={V}")
    return val, top


def log_Xi_integral(params: ModelParams, V: float) -> float:
    """ln Xi from the Gaussian representation, integrated adaptively."""
    val, top = _gaussian_integrals(params, V, with_moments=False)
    return 0.5 * math.log(V / (2.0 * math.pi * params.a)) + V * top + math.log(val[0])


def laplace_log_Xi(params: ModelParams, V: float) -> float:
    """Leading Laplace approximation of ln Xi around the maximizer y_{*,V}."""
    ys = y_star_V(params, V)
    curv = abs(E_V2(params, ys, V))
    return (
        V * E_V(params, ys, V)
        + 0.5 * math.log(2.0 * math.pi / (V * curv))
        + 0.5 * math.log(V / (2.0 * math.pi * params.a))
    )


# --- particle-number series ------------------------------------------------


def _xi_series(params: ModelParams, V: float):
    a, mu0, mu1 = params.a, params.mu0, params.mu1
    _check(a, V)
    lam = V * math.exp(mu0)
    n_max = int(math.ceil(lam) + math.ceil(12.0 * math.sqrt(1.0 + lam)) + 50)
    for _ in range(8):
        n = np.arange(n_max + 1, dtype=float)
        inner = mu1 - a * n / V
        logs = n * (math.log(V) + mu0) - _log_factorials(n_max) + V * np.exp(inner)
        peak = logs.max()
        # beyond the cut the Poisson ratio lam/(n+1) bounds the term ratio
        r = lam / (n_max + 1)
        if r < 1.0:
            w = np.exp(logs - peak)
            total = w.sum()
            tail = w[-1] * r / (1.0 - r) / total
            if tail <= TAIL_RTOL:
                p = w / total
                F0 = float(p @ n) / V
                F1 = float(p @ np.exp(inner))
                return peak + math.log(total), F0, F1, FiniteVolumeState(V, n_max, tail)
        n_max *= 2
    raise NumericalError(f"partition series truncation not certified at {params}, V={V}")


def log_Xi_series(params: ModelParams, V: float) -> float:
    """ln Xi from the n0-series (type-1 particles summed in closed form)."""
    return _xi_series(params, V)[0]


def F_Lambda(params: ModelParams, V: float) -> float:
    """(1/V) ln Xi."""
    return log_Xi_series(params, V) / V


def F_derivatives(params: ModelParams, V: float, method: str = "quadrature") -> tuple[float, float]:
    """(dF/dmu0, dF/dmu1) at volume V.

    ``method="quadrature"`` uses the ratio of Gaussian integrals weighted by
    u_V(mu0 + y) and u_V(mu1 - y).  ``method="series"`` differentiates the
    n0-series term by term: F0 = <n0>/V and F1 = <exp(mu1 - a n0 / V)>.
    """
    if method == "series":
        _, F0, F1, _ = _xi_series(params, V)
        return F0, F1
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    val, _ = _gaussian_integrals(params, V, with_moments=True)
    return float(val[1] / val[0]), float(val[2] / val[0])


def effective_mu(
    params: ModelParams, V: float, n0: int, n1: int, method: str = "series"
) -> tuple[float, float]:
    """Effective chemical potentials seen by a cluster of n0 + n1 particles.

    mu~0 = mu0 - a int_0^1 F1(mu0, mu1 - a n0 t / V) dt
    mu~1 = mu1 - a int_0^1 F0(mu0 - a n1 t / V, mu1 - a n0 / V) dt

    The t-integrals use 24-point Gauss-Legendre; the integrands are smooth.
    """
    if n0 < 0 or n1 < 0:
        raise ValueError("particle numbers must be non-negative")
    a, mu0, mu1 = params.a, params.mu0, params.mu1
    ts = 0.5 * (_GL_T + 1.0)
    ws = 0.5 * _GL_W
    if n0 == 0:
        i1 = F_derivatives(params, V, method)[1]
    else:
        i1 = sum(wt * F_derivatives(ModelParams(a, mu0, mu1 - a * n0 * t / V), V, method)[1] for t, wt in zip(ts, ws))
    shifted1 = mu1 - a * n0 / V
    if n1 == 0:
        i0 = F_derivatives(ModelParams(a, mu0, shifted1), V, method)[0]
    else:
        i0 = sum(wt * F_derivatives(ModelParams(a, mu0 - a * n1 * t / V, shifted1), V, method)[0] for t, wt in zip(ts, ws))
    return mu0 - a * float(i1), mu1 - a * float(i0)


def correlation_fn(params: ModelParams, V: float, n0: int, n1: int, method: str = "series") -> float:
    """Finite-volume correlation function k^(n0, n1)."""
    if n0 == 0 and n1 == 0:
        return 1.0
    m0, m1 = effective_mu(params, V, n0, n1, method)
    return math.exp(m0 * n0 + m1 * n1 - params.a * n0 * n1 / V)


def finite_volume_report(params: ModelParams, V: float, n0: int = 1, n1: int = 1) -> FiniteVolumeReport:
    a = params.a
    ys = y_star_V(params, V)
    F0, F1 = F_derivatives(params, V)
    mt0, mt1 = effective_mu(params, V, n0, n1)
    return FiniteVolumeReport(
        V=V,
        F_Lambda=F_Lambda(params, V),
        F0=F0,
        F1=F1,
        y_star_V=ys,
        f_V0=f_V(a, params.mu0 + ys, V),
        f_V1=f_V(a, params.mu1 - ys, V),
        u_V0=u_V(a, params.mu0 + ys, V),
        u_V1=u_V(a, params.mu1 - ys, V),
        mu_tilde0=mt0,
        mu_tilde1=mt1,
    )


def limit_pressure(params: ModelParams) -> float:
    """Thermodynamic-limit value of F_Lambda, a u0 u1 + u0 + u1 at the maximizer.

    Also defined on the critical line, where the maximizer is y = 0.
    """
    sol = global_maximizers(params)
    y = sol.maximizers[0]
    z0, z1 = u(params.a, params.mu0 + y), u(params.a, params.mu1 - y)
    return params.a * z0 * z1 + z0 + z1
