"""Lambert-W based special functions of the mean-field gas.

``u(a, x)`` is the positive solution of ``a*u + ln(u) = x``, i.e.
``u = W(a e^x) / a`` with ``W`` the principal branch of Lambert's function.
Everything is solved in log space: with ``v = a*u`` and ``t = ln v`` the
equation becomes ``e^t + t = s`` with ``s = x + ln a``, a convex increasing
function of ``t``.  Newton's method on it converges globally and never has
to form ``a*e^x``, so large ``x`` cannot overflow.
"""

from __future__ import annotations

import math

import numpy as np

from wrmf.errors import DomainError, NumericalError

MAX_ITER = 60


def _initial_t(s):
    if s <= 0.0:
        return s
    if s > 1.0:
        return math.log(s - math.log(s))
    return 0.0


def _solve_t_scalar(s: float) -> float:
    """Return t with e^t + t = s."""
    if not math.isfinite(s):
        raise DomainError(f"non-finite argument s={s!r}")
    t = _initial_t(s)
    tol_step = 1e-15
    for _ in range(MAX_ITER):
        et = math.exp(t)
        h = et + t - s
        step = h / (et + 1.0)
        t -= step
        if abs(step) <= tol_step * (1.0 + abs(t)):
            break
    else:
        raise NumericalError(f"log-space Newton did not converge for s={s!r}")
    if abs(math.exp(t) + t - s) > 1e-14 * (1.0 + abs(s)):
        raise NumericalError(f"log-space Newton residual too large for s={s!r}")
    return t


def _solve_t_array(s: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(s)):
        raise DomainError("non-finite argument in array input")
    t = np.where(s <= 0.0, s, 0.0)
    big = s > 1.0
    if np.any(big):
        sb = s[big]
        t[big] = np.log(sb - np.log(sb))
    active = np.ones(s.shape, dtype=bool)
    for _ in range(MAX_ITER):
        et = np.exp(t[active])
        step = (et + t[active] - s[active]) / (et + 1.0)
        t[active] -= step
        done = np.abs(step) <= 1e-15 * (1.0 + np.abs(t[active]))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    else:
        raise NumericalError("log-space Newton did not converge on array input")
    if np.any(np.abs(np.exp(t) + t - s) > 1e-14 * (1.0 + np.abs(s))):
        raise NumericalError("log-space Newton residual too large on array input")
    return t


def _check_a(a):
    if not (a > 0.0) or not math.isfinite(a):
        raise DomainError(f"interaction strength must be positive and finite, got a={a!r}")


def lambert_w0(t):
    """Principal branch of Lambert's W on positive reals.

    Returns ``W`` with ``W * exp(W) == t``.  Only ``t > 0`` is supported.
    """
    if np.ndim(t) == 0:
        t = float(t)
        if not math.isfinite(t) or t <= 0.0:
            raise DomainError(f"lambert_w0 needs a finite positive argument, got {t!r}")
        return math.exp(_solve_t_scalar(math.log(t)))
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t <= 0.0):
        raise DomainError("lambert_w0 needs finite positive arguments")
    return np.exp(_solve_t_array(np.log(t)))


def u(a, x):
    """Solution of ``a*u + ln u = x``; equals ``W(a e^x) / a``.

    Parameters
    ----------
    a : float
        Interaction strength, ``a > 0``.  For ``a = 0`` use :func:`u_free`.
    x : float or array_like
        Shifted chemical potential.

    Returns
    -------
    float or ndarray
        Positive, strictly increasing in ``x``.
    """
    _check_a(a)
    la = math.log(a)
    # For v = a u < 1, u = exp(x - v) avoids the |t| eps error of exp(t - ln a)
    # and, since x - v rounds down, keeps u <= e^x exactly.
    if np.ndim(x) == 0:
        x = float(x)
        t = _solve_t_scalar(x + la)
        return math.exp(x - math.exp(t)) if t < 0.0 else math.exp(t - la)
    x = np.asarray(x, dtype=float)
    t = _solve_t_array(x + la)
    return np.where(t < 0.0, np.exp(x - np.exp(np.minimum(t, 0.0))), np.exp(t - la))


def u_free(x):
    """Free-gas limit ``u(0, x) = e^x``."""
    if np.ndim(x) == 0:
        return math.exp(x)
    return np.exp(np.asarray(x, dtype=float))


def x_of_u(a, uval):
    """Inverse of ``u``: ``x = a*u + ln u``."""
    _check_a(a)
    if np.ndim(uval) == 0:
        if uval <= 0.0:
            raise DomainError(f"u must be positive, got {uval!r}")
        return a * uval + math.log(uval)
    uval = np.asarray(uval, dtype=float)
    if np.any(uval <= 0.0):
        raise DomainError("u must be positive")
    return a * uval + np.log(uval)


def u_prime(a, x):
    """x-derivative of ``u``: ``u / (1 + a*u)``."""
    uu = u(a, x)
    return uu / (1.0 + a * uu)


def f(a, x):
    """``a/2 * u**2 + u``; its x-derivative is ``u`` itself."""
    uu = u(a, x)
    return 0.5 * a * uu * uu + uu
