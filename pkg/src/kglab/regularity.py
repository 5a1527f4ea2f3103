"""Desk-scale experiments on the local regularity of the field along characteristics.

Every experiment looks at increments ``u(t + h, x + h) - u(t, x)`` on dyadic
scales ``h = 2^-n`` and divides them by one of two normalizers:

* ``lil_norm(h) = sqrt(h log log(1/h))`` (iterated logarithm, fixed points),
* ``mc_norm(h) = sqrt(h log(1/h))`` (modulus of continuity, intervals).

The almost-sure limsup statements behind them cannot be computed, so each
experiment reports running maxima over scales, medians across replicas and
null-calibrated exceedances instead.
"""
import bisect
import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_replicas
from .covariance import SQRT2, CharCoords, c0, cov_Xprime
from .kernels import Regime
from .sampler import (
    GaussianEnsemble,
    SeedSpec,
    as_seed,
    check_char_h,
    CharPathSampler,
    sample_Y_path,
    u1_increment,
)

E_POW_E = math.exp(-math.e)
MAX_DENSE_PATH = 4000


def lil_norm(h):
    """``sqrt(h log log(1/h))``, defined for ``0 < h < e^-e``."""
    h = np.asarray(h, dtype=float)
    return np.sqrt(h * np.log(np.log(1.0 / h)))


def mc_norm(h):
    """``sqrt(h log(1/h))``."""
    h = np.asarray(h, dtype=float)
    return np.sqrt(h * np.log(1.0 / h))


def dyadic_scales(n_range):
    """Scales ``2^-n``; every one must lie below ``e^-e`` so both normalizers are real."""
    n = np.array(sorted(int(v) for v in n_range), dtype=int)
    if len(n) == 0:
        raise ValueError("n_range is empty")
    h = 2.0 ** (-n.astype(float))
    if np.any(h >= E_POW_E):
        raise ValueError(f"scales 2^-n must be below e^-e; need n >= 4, got n = {n.min()}")
    return n, h


@dataclass(frozen=True)
class IncrementStatistic:
    """One normalized increment along the ``(+h, +h)`` direction."""

    h: float
    location: CharCoords
    numerator: float
    replica_id: int = 0

    def __post_init__(self):
        if not 0 < self.h < E_POW_E:
            raise ValueError("h must lie in (0, e^-e)")

    @property
    def n(self):
        return -math.log2(self.h)

    @property
    def lil_norm(self):
        return float(lil_norm(self.h))

    @property
    def mc_norm(self):
        return float(mc_norm(self.h))

    @property
    def ratio_lil(self):
        return self.numerator / self.lil_norm

    @property
    def ratio_mc(self):
        return self.numerator / self.mc_norm


CSV_COLUMNS = ["n", "h", "w", "z", "numerator", "ratio_lil", "ratio_mc", "replica_id"]


def write_records(path, records):
    """Write increment records with the columns n, h, w, z, numerator, ratio_lil, ratio_mc, replica_id."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for r in records:
            n = -math.log2(r.h)
            n_txt = str(int(round(n))) if abs(n - round(n)) < 1e-12 else repr(n)
            wr.writerow([n_txt, repr(float(r.h)), repr(float(r.location.w)), repr(float(r.location.z)),
                         repr(float(r.numerator)), repr(float(r.ratio_lil)), repr(float(r.ratio_mc)),
                         int(r.replica_id)])


def _median_iqr(a, axis=0):
    q25, q50, q75 = np.quantile(a, [0.25, 0.5, 0.75], axis=axis)
    return q50, q75 - q25


# ---------------------------------------------------------------------------
# fixed point: iterated logarithm


@dataclass
class LILResult:
    n: np.ndarray
    h: np.ndarray
    numerators: np.ndarray  # (replicas, scales)
    running_max: np.ndarray  # (replicas, scales), running max of ratio_lil over n
    median: np.ndarray
    iqr: np.ndarray
    point: CharCoords = None
    replica_ids: np.ndarray = None

    def stabilization(self, n_lo=12, n_hi=20):
        """Median running max at ``n_hi`` divided by the one at ``n_lo``."""
        i = int(np.flatnonzero(self.n == n_lo)[0])
        j = int(np.flatnonzero(self.n == n_hi)[0])
        return float(self.median[j] / self.median[i])

    def records(self):
        out = []
        for r, rid in enumerate(self.replica_ids):
            for k, h in enumerate(self.h):
                out.append(IncrementStatistic(float(h), self.point, float(self.numerators[r, k]), int(rid)))
        return out


def lil_summary(numerators, n, h, point=None, replica_ids=None):
    """Pipeline shared by the field and the Brownian oracle: ratios, running max, medians."""
    ratios = numerators / lil_norm(h)[None, :]
    running = np.maximum.accumulate(ratios, axis=1)
    med, iqr = _median_iqr(running)
    if replica_ids is None:
        replica_ids = np.arange(len(numerators))
    return LILResult(n, h, numerators, running, med, iqr, point, np.asarray(replica_ids))


def _lil_points(point, h):
    base = point.to_spacetime()
    return np.array([(base.t, base.x)] + [(base.t + hh, base.x + hh) for hh in h])


def _ensemble_rows(ens, master_seed, ids):
    return ens.draw_many(master_seed, ids)


def lil_experiment(point, n_range, params, replicas, seed, workers=1):
    """Iterated-logarithm statistic at a fixed point, sampled exactly.

    For each replica the field is drawn jointly at the point and at its
    shifts ``(t + h, x + h)``; the running maximum over ``n`` of
    ``|increment| / lil_norm(h)`` is recorded.

    Args:
        point: :class:`CharCoords` of the base point.
        n_range: dyadic exponents (each ``2^-n < e^-e``).
        replicas: number of replicas (ids ``0 .. replicas-1``).
        seed: master seed.
    """
    n, h = dyadic_scales(n_range)
    pts = _lil_points(point, h)
    if pts[:, 0].max() > params.T:
        raise ValueError("shifted points exceed the time horizon T")
    ens = GaussianEnsemble(pts, params)
    master = as_seed(seed).master_seed
    vals = map_replicas(functools.partial(_ensemble_rows, ens, master), range(replicas), workers)
    num = np.abs(vals[:, 1:] - vals[:, :1])
    return lil_summary(num, n, h, point, np.arange(replicas))


def _bm_rows(h_sorted, master_seed, ids):
    out = np.empty((len(ids), len(h_sorted)))
    dh = np.diff(np.concatenate([[0.0], h_sorted]))
    for k, r in enumerate(ids):
        rng = SeedSpec(master_seed, int(r)).generator()
        out[k] = np.cumsum(rng.standard_normal(len(h_sorted)) * np.sqrt(dh))
    return out


def brownian_lil(n_range, replicas, seed, workers=1):
    """Same pipeline as :func:`lil_experiment` applied to standard Brownian motion at 0."""
    n, h = dyadic_scales(n_range)
    order = np.argsort(h)
    master = as_seed(seed).master_seed
    vals = map_replicas(functools.partial(_bm_rows, h[order], master), range(replicas), workers)
    B = np.empty_like(vals)
    B[:, order] = vals
    return lil_summary(np.abs(B), n, h, CharCoords(0.0, 0.0), np.arange(replicas))


# ---------------------------------------------------------------------------
# intervals: modulus of continuity


@dataclass
class MCResult:
    n: np.ndarray
    h: np.ndarray
    sup_mc: np.ndarray  # (replicas, scales) sup over the interval of ratio_mc
    sup_lil: np.ndarray  # (replicas, scales) sup over the interval of ratio_lil
    argmax_z: np.ndarray  # (replicas, scales)
    median_mc: np.ndarray
    median_lil: np.ndarray
    w0: float = 0.0
    grid_points: int = 0
    replica_ids: np.ndarray = None

    def records(self):
        out = []
        for r, rid in enumerate(self.replica_ids):
            for k, h in enumerate(self.h):
                num = float(self.sup_mc[r, k] * mc_norm(h))
                out.append(IncrementStatistic(float(h), CharCoords(self.w0, float(self.argmax_z[r, k])), num, int(rid)))
        return out


def mc_grid(J, n_max, points_per_shift, n_min):
    """Base grid on ``J`` and its extension to the largest shift.

    The spacing is ``sqrt(2) 2^-n_max / points_per_shift`` so every shift
    ``sqrt(2) h`` is a whole number of steps.
    """
    dz = SQRT2 * 2.0 ** (-n_max) / points_per_shift
    z_lo, z_hi = J
    n_base = int(math.floor((z_hi - z_lo) / dz + 1e-9)) + 1
    max_shift = points_per_shift * 2 ** (n_max - n_min)
    z = z_lo + dz * np.arange(n_base + max_shift)
    return z, n_base, dz


def sup_statistic(values, n_base, shifts, strides=None, base_mask=None):
    """Per-shift sup of ``|values[i + s] - values[i]|`` over base indices ``i``.

    With ``strides``, scale ``k`` only uses base indices that are multiples of
    ``strides[k]``, so every scale sees the same number of grid points per
    shift.  Restricting ``base_mask`` to a sub-interval can only lower the sup.
    Returns ``(sup, argmax_index)`` arrays over ``shifts``.
    """
    sups = np.empty(len(shifts))
    arg = np.empty(len(shifts), dtype=int)
    all_idx = np.arange(n_base)
    if base_mask is not None:
        all_idx = all_idx[np.asarray(base_mask)[:n_base]]
    for k, s in enumerate(shifts):
        idx = all_idx if strides is None else all_idx[all_idx % strides[k] == 0]
        d = np.abs(values[idx + s] - values[idx])
        j = int(np.argmax(d))
        sups[k] = d[j]
        arg[k] = idx[j]
    return sups, arg


def _mc_rows(process, z, n_base, shifts, strides, w0, params, master_seed, ids):
    out = np.empty((len(ids), 2, len(shifts)))
    t0 = w0 / SQRT2
    dense = line = None
    if process == "u" and params.regime is not Regime.CRITICAL:
        pts = [CharCoords(w0, zz).to_spacetime() for zz in z]
        dense = GaussianEnsemble(pts, params)
    elif process == "u":
        line = CharPathSampler(w0, z, params.a)
    for k, r in enumerate(ids):
        seed = SeedSpec(master_seed, int(r))
        if process == "Y":
            vals = sample_Y_path(z, t0, params.a, seed).values
        elif process == "bm":
            rng = seed.generator()
            dz = np.diff(np.concatenate([[0.0], z]))
            vals = np.cumsum(rng.standard_normal(len(z)) * np.sqrt(dz))
        elif dense is not None:
            vals = dense.draw(seed)
        else:
            vals = line.draw(seed)
        sup, arg = sup_statistic(vals, n_base, shifts, strides)
        out[k, 0] = sup
        out[k, 1] = arg
    return out


def mc_experiment(J, w0, n_range, params, replicas, seed, process="u", points_per_shift=3, workers=1):
    """Modulus-of-continuity statistic over a ``z``-interval of one characteristic line.

    Args:
        J: ``(z_lo, z_hi)`` with ``z_lo > 0``; a single point is allowed.
        w0: the characteristic ``w = w0``.
        process: ``"u"`` (the field), ``"Y"`` (the early-noise Brownian process
            with ``t0 = w0/sqrt(2)``) or ``"bm"`` (standard Brownian motion in z).
        points_per_shift: grid points per shift ``sqrt(2) h``, the same at
            every scale (coarser scales use every ``2^(n_max - n)``-th base
            point); at least 3 so the spacing is at most ``h/2``.
    """
    z_lo, z_hi = J
    if z_lo <= 0 or z_hi < z_lo:
        raise ValueError("J must be an interval with positive left end")
    if process not in ("u", "Y", "bm"):
        raise ValueError("process must be 'u', 'Y' or 'bm'")
    if points_per_shift < 3:
        raise ValueError("points_per_shift must be at least 3 (two grid points per h)")
    n, h = dyadic_scales(n_range)
    z, n_base, dz = mc_grid(J, int(n.max()), points_per_shift, int(n.min()))
    strides = 2 ** (int(n.max()) - n)
    shifts = points_per_shift * strides
    if process == "u":
        t_max = (w0 + z[-1]) / SQRT2
        if t_max > params.T + 1e-12:
            raise ValueError("the path leaves the time horizon T")
        if params.regime is not Regime.CRITICAL and len(z) > MAX_DENSE_PATH:
            raise ValueError(f"non-critical paths are sampled densely; {len(z)} points exceed {MAX_DENSE_PATH}")
    master = as_seed(seed).master_seed
    fn = functools.partial(_mc_rows, process, z, n_base, shifts, strides, w0, params, master)
    rows = map_replicas(fn, range(replicas), workers)
    sup = rows[:, 0, :]
    arg = rows[:, 1, :].astype(int)
    sup_mc = sup / mc_norm(h)[None, :]
    sup_lil = sup / lil_norm(h)[None, :]
    return MCResult(n, h, sup_mc, sup_lil, z[arg], np.median(sup_mc, axis=0), np.median(sup_lil, axis=0),
                    w0, n_base, np.arange(replicas))


def levy_limit(t0, a):
    """Large-grid limit of the ``Y`` modulus statistic: ``sqrt(C0) 2^(3/4)``.

    ``Y`` has increment variance ``C0 |dz|`` and the shift is ``sqrt(2) h``, so
    Levy's modulus gives ``sqrt(2 C0 sqrt(2) h log(1/h))``.
    """
    return math.sqrt(c0(t0, a)) * 2.0 ** 0.75


# ---------------------------------------------------------------------------
# simultaneous bound across characteristics


@dataclass
class SimLILResult:
    n: np.ndarray
    h: np.ndarray
    w_grid: np.ndarray
    per_scale_sup: np.ndarray  # (replicas, scales): sup over w of ratio_lil
    median: np.ndarray
    bound: float
    bounded: bool
    growth: float  # max median / first median


def _sim_points(w_grid, z0, h):
    pts = []
    for w in w_grid:
        pts.append(CharCoords(w, z0).to_spacetime())
        for hh in h:
            pts.append(CharCoords(w, z0 + SQRT2 * hh).to_spacetime())
    return np.array([(p.t, p.x) for p in pts])


def sim_lil_bound(z0, w_grid, n_range, params, replicas, seed, workers=1, growth_limit=2.0):
    """Iterated-logarithm statistic taken simultaneously over ``w`` in ``w_grid``.

    The sup over ``w`` of ``|increment| / lil_norm(h)`` is formed for each scale
    and replica.  The report says whether the per-scale median stays below
    ``growth_limit`` times its value at the coarsest scale.  ``w_grid`` is
    sorted first, so reordering it changes nothing.
    """
    w_grid = np.unique(np.asarray(w_grid, dtype=float))
    n, h = dyadic_scales(n_range)
    pts = _sim_points(w_grid, z0, h)
    if pts[:, 0].max() > params.T:
        raise ValueError("points exceed the time horizon T")
    ens = GaussianEnsemble(pts, params)
    master = as_seed(seed).master_seed
    vals = map_replicas(functools.partial(_ensemble_rows, ens, master), range(replicas), workers)
    m = len(h) + 1
    vals = vals.reshape(replicas, len(w_grid), m)
    num = np.abs(vals[:, :, 1:] - vals[:, :, :1])
    per_scale = (num / lil_norm(h)[None, None, :]).max(axis=1)
    med = np.median(per_scale, axis=0)
    bound = growth_limit * med[0]
    growth = float(med.max() / med[0])
    return SimLILResult(n, h, w_grid, per_scale, med, float(bound), bool(np.all(med <= bound)), growth)


# ---------------------------------------------------------------------------
# singularities


@dataclass
class ScanResult:
    Z_hat: CharCoords
    statistic: float
    statistic_trace: dict
    null_quantiles: dict
    null_samples: np.ndarray
    degenerate: bool
    w0: float
    n_star: int
    a: float
    z_path: np.ndarray = field(repr=False, default=None)
    Y_path: np.ndarray = field(repr=False, default=None)
    seed: SeedSpec = None

    @property
    def h_star(self):
        return 2.0 ** (-self.n_star)

    def exceeds(self, level=0.95):
        return bool(self.statistic > self.null_quantiles[level])

    def Y_at(self, z):
        i = int(np.argmin(np.abs(self.z_path - z)))
        if abs(self.z_path[i] - z) > 1e-12 * max(1.0, abs(z)):
            raise KeyError("z is not on the scanned path")
        return float(self.Y_path[i])


QUANTILE_LEVELS = (0.5, 0.9, 0.95, 0.99)


def y_term_ratio(w, z, h, dY, a):
    """``|Y-driven part of the increment| / lil_norm(h)`` on the characteristic ``w``."""
    _, _, yt = u1_increment(w, z, h, 0.0, dY, a)
    return np.abs(yt) / lil_norm(h)


def singularity_scan(z_interval, w0, n_star, params, seed, null_runs=200, trace_depth=4):
    """Locate the largest Y-driven normalized increment on ``w = w0``.

    The Y path (noise before ``t0 = w0/sqrt(2)``) is sampled on ``2^n_star``
    evenly spaced base points in ``z_interval`` together with their shifts.
    ``Z_hat`` is the base point with the largest ratio at scale ``2^-n_star``;
    ``statistic_trace`` holds the largest ratio at the ``trace_depth``
    coarser scales as well.  The null distribution comes from ``null_runs``
    independent Y paths evaluated at the fixed midpoint of the interval.
    """
    seed = as_seed(seed)
    z_lo, z_hi = z_interval
    if w0 < 0:
        raise ValueError("w0 must be non-negative")
    if not 0 < z_lo < z_hi:
        raise ValueError("z_interval must satisfy 0 < z_lo < z_hi")
    t0 = w0 / SQRT2
    a = params.a
    n_trace, h_trace = dyadic_scales(range(n_star - trace_depth, n_star + 1))
    h_star = 2.0 ** (-n_star)
    check_char_h(z_lo, h_trace)
    if c0(t0, a) == 0.0:
        zero = np.zeros(null_runs)
        return ScanResult(CharCoords(w0, z_lo), 0.0, {int(k): 0.0 for k in n_trace},
                          {q: 0.0 for q in QUANTILE_LEVELS}, zero, True, w0, n_star, a, seed=seed)
    base = np.linspace(z_lo, z_hi, 2**n_star)
    shifted = [base + SQRT2 * hh for hh in h_trace]
    z_all, inv = np.unique(np.concatenate([base] + shifted), return_inverse=True)
    Y = sample_Y_path(z_all, t0, a, seed).values
    nb = len(base)
    Y_base = Y[inv[:nb]]
    trace = {}
    ratio_star = None
    for k, hh in enumerate(h_trace):
        Y_sh = Y[inv[nb * (k + 1): nb * (k + 2)]]
        ratio = y_term_ratio(w0, base, hh, Y_sh - Y_base, a)
        trace[int(n_trace[k])] = float(ratio.max())
        if hh == h_star:
            ratio_star = ratio
    i = int(np.argmax(ratio_star))
    Z = float(base[i])
    null = null_scan_samples(0.5 * (z_lo + z_hi), w0, h_star, a, seed, null_runs)
    qs = {q: float(np.quantile(null, q)) for q in QUANTILE_LEVELS}
    return ScanResult(CharCoords(w0, Z), float(ratio_star[i]), trace, qs, null, False, w0, n_star, a,
                      z_all, Y, seed)


def null_scan_samples(z_fixed, w0, h, a, seed, runs):
    """Scan statistic at a fixed ``z`` for independent Y paths (same formula, no argmax)."""
    t0 = w0 / SQRT2
    out = np.empty(runs)
    for j in range(runs):
        Yp = sample_Y_path([z_fixed, z_fixed + SQRT2 * h], t0, a, seed.child(1, j)).values
        out[j] = float(y_term_ratio(w0, z_fixed, h, Yp[1] - Yp[0], a))
    return out


@dataclass
class PropagationResult:
    w_values: np.ndarray
    statistic: np.ndarray
    null_q95: np.ndarray
    exceed: np.ndarray
    fine_h: np.ndarray
    x_terms: np.ndarray  # (w, fine_h), normalized by lil_norm
    y_terms: np.ndarray  # (fine_h,) per w, normalized by lil_norm
    x_over_y: np.ndarray  # max_h |x_term| / max_h |y_term| for each w
    Z: float = 0.0


def refine_path(z_known, Y_known, targets, diffusion, seed):
    """Insert Brownian-bridge values of a path with ``Var(dY) = diffusion * dz``.

    Each target is conditioned on its nearest known neighbours, including the
    targets inserted before it, so the refined path is an exact sample of the
    process given the known values.
    """
    zs = list(np.asarray(z_known, dtype=float))
    ys = list(np.asarray(Y_known, dtype=float))
    rng = as_seed(seed).generator()
    out = np.empty(len(targets))
    for k, zt in enumerate(targets):
        i = bisect.bisect_left(zs, zt)
        if i < len(zs) and zs[i] == zt:
            out[k] = ys[i]
            continue
        if i == 0 or i == len(zs):
            raise ValueError("targets must lie strictly inside the known path")
        zl, zr, yl, yr = zs[i - 1], zs[i], ys[i - 1], ys[i]
        f = (zt - zl) / (zr - zl)
        val = yl + f * (yr - yl) + math.sqrt(diffusion * (zr - zl) * f * (1.0 - f)) * rng.standard_normal()
        zs.insert(i, zt)
        ys.insert(i, val)
        out[k] = val
    return out


def _u2_ensemble(w_values, z, h, t0, params):
    pts = []
    for w in w_values:
        pts.append(CharCoords(w, z).to_spacetime())
        pts.append(CharCoords(w, z + SQRT2 * h).to_spacetime())
    return GaussianEnsemble(np.array([(p.t, p.x) for p in pts]), params, s_window=(t0, np.inf))


def _full_increment(w_values, z, h, Yz, dY, Xp, u2_ens, u2_seed, a):
    total, _, _ = u1_increment(w_values, z, h, Xp + Yz, dY, a)
    u2 = u2_ens.draw(u2_seed).reshape(len(w_values), 2)
    return total + (u2[:, 1] - u2[:, 0])


def propagation_experiment(scan, w_values, params, seed, null_runs=200, fine_n=range(20, 27)):
    """Follow the scanned singular point along characteristics ``w > w0``.

    The increment at ``(w, Z_hat)`` and scale ``2^-n_star`` is assembled from
    the early-noise part, a deterministic transform of the scanned ``Y`` and a
    fresh ``X'(w)`` (the wedge process minus ``Y``, independent of it), plus
    an independent sample of the part driven after ``t0``.  The fixed-point
    null repeats the same construction at the midpoint ``z`` with fresh ``Y``.

    The ``X`` term is also tracked at finer scales ``2^-n`` for ``n`` in
    ``fine_n``, refining ``Y`` near ``Z_hat`` by Brownian-bridge sampling.
    """
    if params.regime is not Regime.CRITICAL:
        raise ValueError("propagation uses the critical-damping decomposition")
    if scan.degenerate:
        raise ValueError("the scan is degenerate (t0 = 0)")
    seed = as_seed(seed)
    w_values = np.asarray(w_values, dtype=float)
    w0 = scan.w0
    if np.any(w_values <= w0):
        raise ValueError("w_values must exceed w0")
    t0 = w0 / SQRT2
    a = params.a
    h = scan.h_star
    Z = scan.Z_hat.z
    Yz = scan.Y_at(Z)
    dY = scan.Y_at(Z + SQRT2 * h) - Yz
    Xcov = np.array([[cov_Xprime(u, v, t0, a) for v in w_values] for u in w_values])
    Xens = GaussianEnsemble(None, covariance=Xcov)
    u2_ens = _u2_ensemble(w_values, Z, h, t0, params)
    Xp = Xens.draw(seed.child(2))
    total = _full_increment(w_values, Z, h, Yz, dY, Xp, u2_ens, seed.child(3), a)
    stat = np.abs(total) / lil_norm(h)

    z_f = float(0.5 * (scan.z_path.min() + scan.z_path.max()))
    u2_null = _u2_ensemble(w_values, z_f, h, t0, params)
    C0 = c0(t0, a)
    null = np.empty((null_runs, len(w_values)))
    for j in range(null_runs):
        s = seed.child(4, j)
        rng = s.child(0).generator()
        Yf = rng.standard_normal() * math.sqrt(C0 * z_f)
        dYf = rng.standard_normal() * math.sqrt(C0 * SQRT2 * h)
        Xf = Xens.draw(s.child(1))
        null[j] = np.abs(_full_increment(w_values, z_f, h, Yf, dYf, Xf, u2_null, s.child(2), a)) / lil_norm(h)
    q95 = np.quantile(null, 0.95, axis=0)

    fine_n, fine_h = dyadic_scales(fine_n)
    fine_h = np.sort(fine_h)[::-1]
    targets = Z + SQRT2 * fine_h
    Yfine = refine_path(scan.z_path, scan.Y_path, targets, C0, seed.child(5))
    dYs = Yfine - Yz
    _, xt, yt = u1_increment(w_values[:, None], Z, fine_h[None, :], (Xp + Yz)[:, None], dYs[None, :], a)
    xt = np.abs(xt) / lil_norm(fine_h)[None, :]
    yt = np.abs(yt) / lil_norm(fine_h)[None, :]
    x_over_y = xt.max(axis=1) / yt.max(axis=1)
    return PropagationResult(w_values, stat, q95, stat > q95, fine_h, xt, yt, x_over_y, Z)
