"""Second moments of the solution field, its increments and the auxiliary
processes X and Y that live on characteristic lines.

At critical damping every covariance is an integral of an exponential
against a light-cone overlap length, and is evaluated in closed form.  In the
general regime the covariance is a frequency integral of products of the
spatial Fourier transform of the fundamental solution.
"""
import math
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy import integrate

from .kernels import ModelParams, Regime, fourier_green

SQRT2 = math.sqrt(2.0)
PINV_RTOL = 1e-12
SPECTRAL_TOL = 1e-8
COMBINATION_DPS = 40


class ToleranceError(RuntimeError):
    """Raised when a quadrature cannot certify the requested accuracy."""

    def __init__(self, estimate, error_bound, message="tolerance not met"):
        super().__init__(f"{message}: estimate={estimate!r}, error bound={error_bound!r}")
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class SpaceTimePoint:
    t: float
    x: float

    def to_char(self):
        return CharCoords((self.t - self.x) / SQRT2, (self.t + self.x) / SQRT2)


@dataclass(frozen=True)
class CharCoords:
    """Rotated coordinates: ``w`` runs across characteristics, ``z`` along them."""

    w: float
    z: float

    def to_spacetime(self):
        return SpaceTimePoint((self.w + self.z) / SQRT2, (self.z - self.w) / SQRT2)


def as_tx(points):
    """Coerce points (SpaceTimePoint, CharCoords or (t, x) pairs) to an ``(n, 2)`` array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("point arrays must have shape (n, 2)")
        return arr
    out = []
    for p in points:
        if isinstance(p, CharCoords):
            p = p.to_spacetime()
        if isinstance(p, SpaceTimePoint):
            out.append((p.t, p.x))
        else:
            t, x = p
            out.append((float(t), float(x)))
    return np.array(out, dtype=float).reshape(-1, 2)


def _point(p):
    if isinstance(p, CharCoords):
        p = p.to_spacetime()
    if isinstance(p, SpaceTimePoint):
        return float(p.t), float(p.x)
    t, x = p
    return float(t), float(x)


# ---------------------------------------------------------------------------
# exponential moments


def phi1(x):
    """``(e^x - 1)/x`` with the value 1 at 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x == 0, 1.0, np.expm1(x) / np.where(x == 0, 1.0, x))
    return out


def phi2(x):
    """``(e^x - 1 - x)/x^2`` with the value 1/2 at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1.0
    xs = np.where(small, x, 0.0)
    acc = np.zeros_like(xs)
    term = np.full_like(xs, 0.5)
    for k in range(2, 24):
        acc = acc + term
        term = term * xs / (k + 1)
    xb = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        big = (np.expm1(xb) - xb) / (xb * xb)
    return np.where(small, acc, big)


def wedge_integral(A, L, a):
    """``int_0^L exp(a s) (A - 2 s) ds`` for ``0 <= L``, vectorized."""
    A = np.asarray(A, dtype=float)
    L = np.asarray(L, dtype=float)
    aL = a * L
    return (A - 2.0 * L) * L * phi1(aL) + 2.0 * L * L * phi2(aL)


def _exp_interval(p, q, k):
    """``int_p^q exp(k x) dx``."""
    d = q - p
    return np.exp(k * p) * d * phi1(k * d)


# ---------------------------------------------------------------------------
# critical damping


def cov_critical_arrays(t1, x1, t2, x2, a, s_lo=0.0, s_hi=np.inf):
    """Broadcasting closed form of the critical-damping covariance.

    Only the noise in the time window ``s_lo <= s <= s_hi`` contributes, so
    the same routine gives the covariance of the parts of the field driven
    before and after a fixed time.
    """
    t1, x1, t2, x2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t1, x1, t2, x2)))
    # overlap of [x1 - (t1 - s), x1 + (t1 - s)] and the same for point 2 is (A - 2 s)_+
    A = np.minimum(x1 + t1, x2 + t2) - np.maximum(x1 - t1, x2 - t2)
    S = np.minimum(np.minimum(t1, t2), np.minimum(A / 2.0, s_hi))
    S = np.maximum(S, 0.0)
    lo = float(s_lo)
    L = np.maximum(S - lo, 0.0)
    core = wedge_integral(A - 2.0 * lo, L, a)
    scale = np.exp(-a * (t1 + t2) / 2.0 + a * lo)
    return np.where(L > 0, 0.25 * scale * core, 0.0)


def cov_critical(p, q, a, s_window=(0.0, np.inf)):
    """Covariance of the critically damped field at two space-time points.

    Args:
        p, q: points as ``SpaceTimePoint``, ``CharCoords`` or ``(t, x)`` pairs.
        a: damping constant (``m = a/2`` implied).
        s_window: restrict the driving noise to times in this interval.

    Returns:
        The covariance as a float.
    """
    t1, x1 = _point(p)
    t2, x2 = _point(q)
    if t1 < 0 or t2 < 0:
        raise ValueError("times must be non-negative")
    return float(cov_critical_arrays(t1, x1, t2, x2, a, *s_window))


def _cov_critical_mp(t1, x1, t2, x2, a):
    """The closed form of ``cov_critical`` in the current mpmath precision."""
    A = min(x1 + t1, x2 + t2) - max(x1 - t1, x2 - t2)
    S = min(t1, t2, A / 2)
    if S <= 0:
        return mp.mpf(0)
    x = a * S
    if abs(x) < mp.mpf(10) ** (-mp.mp.dps // 4):
        p1 = 1 + x / 2 + x * x / 6
        p2 = mp.mpf(1) / 2 + x / 6 + x * x / 24
    else:
        p1 = mp.expm1(x) / x
        p2 = (mp.expm1(x) - x) / (x * x)
    return mp.exp(-a * (t1 + t2) / 2) * ((A - 2 * S) * S * p1 + 2 * S * S * p2) / 4


def combination_moment_cov(points, coeffs, a, dps=COMBINATION_DPS):
    """Second moment of ``sum_i c_i u(p_i)`` at critical damping as ``c^T C c``.

    The covariances are evaluated from the closed form in ``dps``-digit
    arithmetic, so the cancellation between the O(1) entries of ``C`` does
    not limit the accuracy of a small combination.
    """
    tx = as_tx(points)
    with mp.workdps(dps):
        pts = [(mp.mpf(float(t)), mp.mpf(float(x))) for t, x in tx]
        return _combination_cov_mp(pts, coeffs, a)


def _combination_cov_mp(pts, coeffs, a):
    """``c^T C c`` for mpmath points, in the caller's precision."""
    cs = [mp.mpf(float(v)) for v in coeffs]
    am = mp.mpf(float(a))
    total = mp.mpf(0)
    for i in range(len(pts)):
        if cs[i] == 0:
            continue
        total += cs[i] * cs[i] * _cov_critical_mp(*pts[i], *pts[i], am)
        for j in range(i + 1, len(pts)):
            if cs[j] != 0:
                total += 2 * cs[i] * cs[j] * _cov_critical_mp(*pts[i], *pts[j], am)
    return float(total)


# ---------------------------------------------------------------------------
# general regime


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
BODY_PERIODS = 50


def _time_integral(xi, t1, t2, params):
    """``int_0^min(t1,t2) Ghat(t1 - s, xi) Ghat(t2 - s, xi) ds``."""
    a = params.a
    S = min(t1, t2)
    if S <= 0:
        return 0.0
    Sig = t1 + t2
    Dl = abs(t1 - t2)
    w = np.sqrt(complex(xi * xi - params.discriminant))
    if abs(w) * Sig < 0.5 or abs(a - 2j * w) * Sig < 0.5 or abs(a + 2j * w) * Sig < 0.5:
        s = 0.5 * S * (_GL_NODES + 1.0)
        big = ModelParams(params.a, params.m, max(Sig, 1.0))
        vals = fourier_green(t1 - s, xi, big) * fourier_green(t2 - s, xi, big)
        return 0.5 * S * float(np.dot(_GL_WEIGHTS, vals))
    E0 = S * float(phi1(a * S))

    def B(om):
        return (math.exp(a * S) * np.exp(1j * Dl * om) - np.exp(1j * Sig * om)) / (a - 2j * om)

    cos_part = 0.5 * (B(w) + B(-w))
    val = math.exp(-a * Sig / 2.0) / (2.0 * w * w) * (np.cos(Dl * w) * E0 - cos_part)
    return float(val.real)


def cov_spectral(p, q, params, tol=SPECTRAL_TOL, xi_split=None):
    """Covariance for general ``(a, m)`` from the spatial Fourier representation.

    The time integral of the product of transforms is done in closed form for
    every frequency; the frequency integral is split into a finite body,
    handled by adaptive quadrature, and an oscillatory tail, handled by
    Fourier-weighted quadrature on ``[Xi, inf)``.

    ``xi_split`` overrides the frequency where the body hands over to the
    tail; results must not depend on it.

    Raises:
        ToleranceError: if the accumulated error bound exceeds ``tol`` times
            ``max(|value|, ref)``, where ``ref`` is the geometric mean of the
            two critical-damping variances with the same ``a``.
    """
    with warnings.catch_warnings():
        # quadpack's own warnings are superseded by the explicit error check
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _cov_spectral(p, q, params, tol, xi_split)


def _cov_spectral(p, q, params, tol, xi_split):
    t1, x1 = _point(p)
    t2, x2 = _point(q)
    for t in (t1, t2):
        if t < 0 or t > params.T:
            raise ValueError(f"times must lie in [0, T={params.T}]")
    S = min(t1, t2)
    if S == 0:
        return 0.0
    a = params.a
    dx = abs(x1 - x2)
    K = math.sqrt(abs(params.discriminant))
    Xi = max(1.0, 2.0 * K, 4.0 / S) if xi_split is None else float(xi_split)
    if Xi <= K:
        raise ValueError("xi_split must exceed sqrt(|a^2/4 - m^2|)")

    def body(xi):
        return _time_integral(xi, t1, t2, params) * math.cos(xi * dx) / math.pi

    points = [K] if 0 < K < Xi else None
    # natural size of the covariance: geometric mean of the critical-damping
    # variances with the same damping (Cauchy-Schwarz scale)
    ref = math.sqrt(cov_critical((t1, 0.0), (t1, 0.0), a) * cov_critical((t2, 0.0), (t2, 0.0), a))
    eps = 1e-3 * tol * ref
    Sig = t1 + t2
    # the body oscillates with frequencies up to Sig + dx; keep at most
    # BODY_PERIODS periods per adaptive call (tiny S pushes Xi far out)
    n_chunks = max(1, math.ceil(Xi * (Sig + dx) / (2.0 * math.pi * BODY_PERIODS)))
    edges = np.linspace(0.0, Xi, n_chunks + 1)
    val = total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts = [K] if points and lo < K < hi else None
        v, e = integrate.quad(body, lo, hi, points=pts, limit=500, epsabs=eps / n_chunks, epsrel=tol * 1e-2)
        val += v
        total_err += e

    Dl = abs(t1 - t2)
    disc = params.discriminant
    ES = math.exp(a * S)
    E0 = S * float(phi1(a * S))

    def omega(xi):
        return math.sqrt(xi * xi - disc)

    def amp(xi, kind):
        w = omega(xi)
        delta = disc / (xi + w)
        pre = math.exp(-a * Sig / 2.0) / (2.0 * math.pi * w * w)
        den = a - 2j * w
        if kind == 0:
            return 0.5 * pre * np.exp(-1j * Dl * delta) * (E0 - ES / den)
        return 0.5 * pre * np.exp(-1j * Sig * delta) / den

    terms = [(Dl + dx, 0), (Dl - dx, 0), (Sig + dx, 1), (Sig - dx, 1)]
    for nu, kind in terms:
        conj = nu < 0
        nu = abs(nu)

        def re_part(xi, kind=kind, conj=conj):
            A = amp(xi, kind)
            return (np.conj(A) if conj else A).real

        def im_part(xi, kind=kind, conj=conj):
            A = amp(xi, kind)
            return (np.conj(A) if conj else A).imag

        if nu < 1e-10:
            v, e = integrate.quad(re_part, Xi, np.inf, limit=200, epsabs=eps, epsrel=0.0)
            val += v
            total_err += e
            continue
        v1, e1 = integrate.quad(re_part, Xi, np.inf, weight="cos", wvar=nu, limlst=100, epsabs=eps)
        v2, e2 = integrate.quad(im_part, Xi, np.inf, weight="sin", wvar=nu, limlst=100, epsabs=eps)
        val += v1 - v2
        total_err += e1 + e2

    scale = max(abs(val), ref)
    if total_err > tol * scale:
        raise ToleranceError(val, total_err)
    return float(val)


# ---------------------------------------------------------------------------
# dispatch


def covariance(p, q, params):
    """Covariance at two points, choosing the closed form at critical damping."""
    if params.regime is Regime.CRITICAL:
        return cov_critical(p, q, params.a)
    return cov_spectral(p, q, params)


def variance(p, params):
    """Variance of the field at one point."""
    return covariance(p, p, params)


def covariance_matrix(points, params, s_window=(0.0, np.inf)):
    """Symmetric covariance matrix of the field on a point list.

    Critical damping is vectorized over all pairs; otherwise each entry of the
    upper triangle is computed with :func:`cov_spectral`.
    """
    tx = as_tx(points)
    if params.regime is Regime.CRITICAL:
        t, x = tx[:, 0], tx[:, 1]
        C = cov_critical_arrays(t[:, None], x[:, None], t[None, :], x[None, :], params.a, *s_window)
        return 0.5 * (C + C.T)
    if s_window != (0.0, np.inf):
        raise ValueError("time windows are only available at critical damping")
    n = len(tx)
    C = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            C[i, j] = C[j, i] = cov_spectral(tx[i], tx[j], params)
    return C


def increment_moment(p, q, params):
    """``E[(u(p) - u(q))^2]``."""
    tx = as_tx([p, q])
    C = covariance_matrix(tx, params)
    return float(C[0, 0] + C[1, 1] - 2.0 * C[0, 1])


def write_covariance_csv(path, points, matrix):
    """Write a covariance matrix as CSV with a header naming each point."""
    tx = as_tx(points)
    header = ",".join(f"({t!r};{x!r})" for t, x in tx)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in np.asarray(matrix):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# region integration in characteristic coordinates


def _region_cell(al0, al1, be0, be1, c, k):
    """``int int exp(k (al + be))`` over a rectangle intersected with ``al + be > c``."""
    if al1 <= al0 or be1 <= be0 or al1 + be1 <= c:
        return 0.0
    total = 0.0
    # part where the whole beta range is above the line
    u0 = max(al0, c - be0)
    if al1 > u0:
        total += float(_exp_interval(u0, al1, k) * _exp_interval(be0, be1, k))
    # part cut by the line
    v0 = max(al0, c - be1)
    v1 = min(al1, c - be0)
    if v1 > v0:
        ua = v0 + be1 - c
        total += math.exp(k * c) * float(_phi2_step(ua, v1 - v0, k))
    return total


def _phi2_step(u, d, k):
    """``(u + d)^2 phi2(k (u + d)) - u^2 phi2(k u)`` without cancellation for small ``d``."""
    return u * phi1(k * u) * d * phi1(k * d) + d * d * phi2(k * d)


def region_cells(al0, al1, be0, be1, c, k):
    """Vectorized :func:`_region_cell` over arrays of ``alpha`` edges (scalar ``beta`` edges)."""
    al0 = np.asarray(al0, dtype=float)
    al1 = np.asarray(al1, dtype=float)
    total = np.zeros(np.broadcast(al0, al1).shape)
    u0 = np.maximum(al0, c - be0)
    ok = al1 > u0
    if np.any(ok):
        total = total + np.where(ok, _exp_interval(np.where(ok, u0, 0.0), np.where(ok, al1, 1.0), k), 0.0) \
            * float(_exp_interval(be0, be1, k))
    v0 = np.maximum(al0, c - be1)
    v1 = np.minimum(al1, c - be0)
    cut = v1 > v0
    ua = np.where(cut, v0 + be1 - c, 0.0)
    part = math.exp(k * c) * _phi2_step(ua, np.where(cut, v1 - v0, 0.0), k)
    total = total + np.where(cut, part, 0.0)
    empty = (al1 <= al0) | (be1 <= be0) | (al1 + be1 <= c)
    return np.where(empty, 0.0, total)


def combination_moment(points, coeffs, a, s_window=(0.0, np.inf)):
    """Second moment of ``sum_i c_i u(p_i)`` at critical damping by region integration.

    The noise domain is cut into cells in the characteristic coordinates
    ``alpha = s + y`` and ``beta = s - y``; on each cell the set of light cones
    containing it is constant, so the squared kernel combination is a single
    exponential whose integral is closed form.  Unlike the covariance
    combination this has no cancellation between large terms.
    """
    tx = as_tx(points)
    return _combination_moment_ab(tx[:, 0] + tx[:, 1], tx[:, 0] - tx[:, 1], coeffs, a, s_window)


def _combination_moment_ab(alpha, beta, coeffs, a, s_window=(0.0, np.inf)):
    """:func:`combination_moment` for points given by ``alpha = t + x`` and ``beta = t - x``."""
    c = np.asarray(coeffs, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    t = (alpha + beta) / 2.0
    lo, hi = float(s_window[0]), float(s_window[1])
    amp = c * np.exp(-a * t / 2.0)
    al_edges = np.unique(np.concatenate([alpha, [2 * lo - beta.max()]]))
    be_edges = np.unique(np.concatenate([beta, [2 * lo - alpha.max()]]))
    k = a / 2.0
    total = 0.0
    for i in range(len(al_edges) - 1):
        al0, al1 = al_edges[i], al_edges[i + 1]
        inside_a = alpha >= al1
        for j in range(len(be_edges) - 1):
            be0, be1 = be_edges[j], be_edges[j + 1]
            active = inside_a & (beta >= be1)
            if not active.any():
                continue
            W = amp[active].sum()
            if W == 0.0:
                continue
            cell = _region_cell(al0, al1, be0, be1, 2 * lo, k)
            if math.isfinite(hi):
                cell -= _region_cell(al0, al1, be0, be1, 2 * hi, k)
            total += W * W * cell
    # kernel squared is exp(-a t)/4 * exp(a s); ds dy = d(alpha) d(beta) / 2
    return total / 8.0


def _rect_ab(t, x, eps1, eps2):
    """Characteristic coordinates ``alpha = t + x``, ``beta = t - x`` of the four corners.

    The corners share their ``alpha`` and ``beta`` values exactly, so the
    rectangle has no sliver cells from rounding.
    """
    a0, b0 = t + x, t - x
    a1, b1 = a0 - SQRT2 * eps2, b0 - SQRT2 * eps1
    return np.array([a0, a0, a1, a1]), np.array([b0, b1, b0, b1])


def rect_corners(t, x, eps1, eps2):
    """Four corners and signs of the rectangular increment along both characteristics.

    Corner ``i`` is ``(t, x)`` moved back by ``eps1`` along ``x - t = const``
    for ``i`` in {1, 3} and by ``eps2`` along ``x + t = const`` for ``i`` in {2, 3}.
    """
    al, be = _rect_ab(t, x, eps1, eps2)
    pts = np.column_stack([(al + be) / 2.0, (al - be) / 2.0])
    return pts, np.array([1.0, -1.0, -1.0, 1.0])


def rect_increment_moment(t, x, eps1, eps2, params, method="region", check=True):
    """Second moment of the rectangular increment spanned by the two characteristics.

    Args:
        method: ``"region"`` (direct integration over the difference region,
            critical damping only) or ``"covariance"`` (4x4 covariance
            combination; extended precision at critical damping, double
            precision from ``cov_spectral`` otherwise).
        check: at critical damping, also compute the other method and raise
            if the two disagree by more than ``1e-10`` relative.
    """
    if not (0 < eps1 < t and 0 < eps2 < t):
        raise ValueError("need 0 < eps1, eps2 < t")
    pts, c = rect_corners(t, x, eps1, eps2)
    if params.regime is not Regime.CRITICAL:
        if method == "region":
            raise ValueError("region integration needs critical damping")
        C = covariance_matrix(pts, params)
        return float(c @ C @ c)
    if method not in ("region", "covariance"):
        raise ValueError("method must be 'region' or 'covariance'")
    al, be = _rect_ab(t, x, eps1, eps2)
    region = cov_val = None
    if check or method == "region":
        region = _combination_moment_ab(al, be, c, params.a)
    if check or method == "covariance":
        with mp.workdps(COMBINATION_DPS):
            exact = [((mp.mpf(float(u)) + mp.mpf(float(v))) / 2, (mp.mpf(float(u)) - mp.mpf(float(v))) / 2)
                     for u, v in zip(al, be)]
            cov_val = _combination_cov_mp(exact, c, params.a)
    if check and abs(cov_val - region) > 1e-10 * abs(cov_val):
        raise ToleranceError(region, abs(cov_val - region), "rectangular increment methods disagree")
    return region if method == "region" else cov_val


# ---------------------------------------------------------------------------
# conditioning


def conditional_variance(target, conditioners, params, check_segment=True):
    """Variance of the field at ``target`` given its values at ``conditioners``.

    All points must lie on one characteristic line (common ``w``) and the
    conditioners must not be later than the target.  Singular conditioning
    matrices are handled with an eigenvalue-threshold pseudo-inverse
    (threshold ``1e-12 * trace``).
    """
    tgt = as_tx([target])[0]
    if len(conditioners) == 0:
        return variance(tuple(tgt), params)
    cond = as_tx(conditioners)
    if check_segment:
        w_t = (tgt[0] - tgt[1]) / SQRT2
        w_c = (cond[:, 0] - cond[:, 1]) / SQRT2
        if np.any(np.abs(w_c - w_t) > 1e-9 * max(1.0, abs(w_t))):
            raise ValueError("conditioners must lie on the target's characteristic line")
        if np.any(cond[:, 0] > tgt[0] + 1e-12):
            raise ValueError("conditioner times must not exceed the target time")
    pts = np.vstack([tgt[None, :], cond])
    C = covariance_matrix(pts, params)
    s_tt = C[0, 0]
    s_tc = C[0, 1:]
    S = C[1:, 1:]
    evals, evecs = np.linalg.eigh(S)
    keep = evals > PINV_RTOL * max(np.trace(S), np.finfo(float).tiny)
    proj = evecs[:, keep].T @ s_tc
    return float(max(s_tt - np.sum(proj * proj / evals[keep]), 0.0))


# ---------------------------------------------------------------------------
# characteristic-line processes


def c0(t0, a):
    """Scale ``sqrt(2) int_0^t0 exp(a s) ds`` so that ``Y / sqrt(c0)`` is standard Brownian motion."""
    return SQRT2 * t0 * float(phi1(a * t0))


def cov_Y(z1, z2, t0, a):
    """Covariance of the early-noise process ``Y`` along a characteristic."""
    return c0(t0, a) * min(z1, z2)


def cov_X(p, q, t0, a):
    """Covariance of the early-noise wedge process ``X(w, z)``.

    ``p`` and ``q`` are ``(w, z)`` pairs or :class:`CharCoords`.
    """
    w1, z1 = (p.w, p.z) if isinstance(p, CharCoords) else p
    w2, z2 = (q.w, q.z) if isinstance(q, CharCoords) else q
    A = SQRT2 * (min(z1, z2) + min(w1, w2))
    S = min(t0, A / 2.0)
    if S <= 0:
        return 0.0
    return float(wedge_integral(A, S, a))


def cov_Xprime(w1, w2, t0, a):
    """Covariance of the part of ``X`` that does not depend on ``z``.

    Requires ``w >= sqrt(2) t0`` so that the wedge contains the full strip;
    then ``X(w, z) = X'(w) + Y(z)`` with ``X'`` independent of ``Y``.
    """
    A = SQRT2 * min(w1, w2)
    if A < 2 * t0 - 1e-12:
        raise ValueError("w must be at least sqrt(2) t0")
    return float(wedge_integral(A, t0, a))


def lipschitz_integrals(t, h, a):
    """Deterministic integrals bounding the Lipschitz increment of ``u_L``.

    Returns ``(I1, I2, I3)`` with
    ``I1 = (1 - e^{-ah/2}) int_0^t r e^{-ar/2} dr``,
    ``I2 = h e^{-ah/2} int_0^t e^{-ar/2} dr`` and
    ``I3 = int_0^h r e^{-ar/2} dr``.
    """
    k = -a / 2.0
    int_r = _int_r_exp(t, k)
    I1 = -math.expm1(-a * h / 2.0) * int_r
    I2 = h * math.exp(-a * h / 2.0) * t * float(phi1(k * t))
    I3 = _int_r_exp(h, k)
    return I1, I2, I3


def _int_r_exp(t, k):
    """``int_0^t r exp(k r) dr``, written as ``t^2 e^{kt} phi2(-kt)`` (substitute r = t - v)."""
    return t * t * math.exp(k * t) * float(phi2(-k * t))
