"""Fundamental solutions of the damped Klein-Gordon operator in one space dimension.

The operator is ``d_tt - d_xx + a d_t + m^2``.  Its damping regime is set by
the sign of ``a^2/4 - m^2``; at zero the fundamental solution collapses to a
damped indicator of the light cone.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

CRITICAL_ATOL = 1e-12
SERIES_THRESHOLD = 1e-4
SERIES_TERMS = 6
SMALL_XI_T = 0.1
SMALL_XI_TERMS = 6


class Regime(enum.Enum):
    OSCILLATORY = "oscillatory"
    CRITICAL = "critical"
    MIXED = "mixed"


@dataclass(frozen=True)
class ModelParams:
    """Damping ``a``, mass ``m`` and time horizon ``T`` of the model."""

    a: float
    m: float
    T: float = 1.0

    def __post_init__(self):
        for name in ("a", "m", "T"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite real number, got {value!r}")
        if self.a < 0:
            raise ValueError(f"a must be non-negative, got {self.a}")
        if self.m < 0:
            raise ValueError(f"m must be non-negative, got {self.m}")
        if self.T <= 0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def discriminant(self):
        """``a^2/4 - m^2``; its sign selects the regime."""
        return self.a * self.a / 4.0 - self.m * self.m

    @property
    def b(self):
        """Coefficient of the Lipschitz remainder, equal to the discriminant."""
        return self.discriminant

    @property
    def regime(self):
        return classify(self.a, self.m)


def classify(a, m):
    """Return the damping regime for parameters ``(a, m)``."""
    disc = a * a / 4.0 - m * m
    if abs(disc) <= CRITICAL_ATOL:
        return Regime.CRITICAL
    return Regime.MIXED if disc > 0 else Regime.OSCILLATORY


def _sinc_like(x, sign):
    """``sin(x)/x`` for sign=+1, ``sinh(x)/x`` for sign=-1, with a series near zero."""
    out = np.empty_like(x)
    small = x < SERIES_THRESHOLD
    big = ~small
    xb = x[big]
    sb = sign[big]
    with np.errstate(over="ignore", invalid="ignore"):
        out[big] = np.where(sb > 0, np.sin(xb) / np.where(xb == 0, 1, xb),
                            np.sinh(xb) / np.where(xb == 0, 1, xb))
    xs = x[small]
    ss = sign[small]
    acc = np.zeros_like(xs)
    term = np.ones_like(xs)
    for k in range(SERIES_TERMS):
        acc += term
        term = term * (-ss) * xs * xs / ((2 * k + 2) * (2 * k + 3))
    out[small] = acc
    return out


def fourier_green(t, xi, params):
    """Spatial Fourier transform of the fundamental solution.

    Evaluates ``exp(-a t/2) sin(t sqrt(D)) / sqrt(D)`` with
    ``D = xi^2 + m^2 - a^2/4``, switching to the hyperbolic form when ``D < 0``
    and to ``t exp(-a t/2)`` when ``D = 0``.

    Args:
        t: time(s) in ``[0, T]``.
        xi: spatial frequency (any real).
        params: :class:`ModelParams`.

    Returns:
        Array broadcast from ``t`` and ``xi`` (a float for scalar input).
    """
    t_arr, xi_arr = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(xi, dtype=float))
    if np.any(t_arr < 0) or np.any(t_arr > params.T):
        raise ValueError(f"t must lie in [0, T={params.T}]")
    if not np.all(np.isfinite(xi_arr)):
        raise ValueError("xi must be finite")
    D = xi_arr * xi_arr - params.discriminant
    sign = np.sign(D)
    x = t_arr * np.sqrt(np.abs(D))
    shape = x.shape
    val = _sinc_like(x.ravel(), sign.ravel()).reshape(shape)
    res = np.exp(-params.a * t_arr / 2.0) * t_arr * val
    return float(res) if res.ndim == 0 else res


def critical_kernel(t, x, a):
    """Fundamental solution at critical damping, ``exp(-a t/2)/2`` inside the light cone.

    The boundary ``|x| = t`` is excluded, so the value there is 0.
    """
    if a < 0:
        raise ValueError(f"a must be non-negative, got {a}")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    res = np.where((np.abs(x) < t) & (t > 0), 0.5 * np.exp(-a * t / 2.0), 0.0)
    return float(res) if res.ndim == 0 else res


def exp_moment(n, t, z):
    """``g_n(t, z) = int_0^t r^n exp(r z) dr`` for complex ``z``.

    A power series is used when ``|z t| < 2``; otherwise the upward recursion
    ``g_n = (t^n e^{tz} - n g_{n-1}) / z``.
    """
    t, z = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(z, dtype=complex))
    out = np.empty(t.shape, dtype=complex)
    zt = np.abs(z * t)
    small = zt < 2.0
    if np.any(small):
        ts, zs = t[small], z[small]
        acc = np.zeros(ts.shape, dtype=complex)
        power = np.ones(ts.shape, dtype=complex)  # (z t)^j / j!
        for j in range(60):
            acc += power / (n + j + 1)
            power = power * zs * ts / (j + 1)
        out[small] = acc * ts ** (n + 1)
    big = ~small
    if np.any(big):
        tb, zb = t[big], z[big]
        etz = np.exp(tb * zb)
        g = (etz - 1.0) / zb
        for k in range(1, n + 1):
            g = (tb**k * etz - k * g) / zb
        out[big] = g
    return out


def spacetime_transform(t, x, tau, xi, a):
    """Space-time Fourier transform of the critical kernel seen from ``(t, x)``.

    This is the transform of ``(s, y) -> Gamma(t - s, x - y) 1{0 <= s <= t}``
    against ``exp(-i s tau + i y xi)``, evaluated in the closed form ``exp(-i t tau + i x xi) / (2 i |xi|) [f(t, z+) - f(t, z-)]`` with
    ``f(t, z) = (e^{tz} - 1)/z`` and ``z(+/-) = i tau - a/2 +/- i |xi|``.
    For ``|xi| t`` below ``0.1`` the difference quotient is replaced by its
    Taylor series, so the ``xi -> 0`` limit is continuous.

    Returns a complex scalar or array.
    """
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")
    t, x, tau, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, tau, xi)))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    axi = np.abs(xi)
    zm = 1j * tau - a / 2.0
    q = np.empty(t.shape, dtype=complex)
    small = axi * t < SMALL_XI_T
    if np.any(small):
        ts, xs, zs = t[small], axi[small], zm[small]
        acc = np.zeros(ts.shape, dtype=complex)
        for k in range(SMALL_XI_TERMS):
            acc += (-1) ** k * xs ** (2 * k) / math.factorial(2 * k + 1) * exp_moment(2 * k + 1, ts, zs)
        q[small] = acc
    big = ~small
    if np.any(big):
        tb, xb, zb = t[big], axi[big], zm[big]
        fp = exp_moment(0, tb, zb + 1j * xb)
        fm = exp_moment(0, tb, zb - 1j * xb)
        q[big] = (fp - fm) / (2j * xb)
    res = np.exp(-1j * t * tau + 1j * x * xi) * q
    return complex(res) if res.ndim == 0 else res
