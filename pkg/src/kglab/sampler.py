"""Exact and grid-based realizations of the field and of the characteristic-line
processes, each drawn from a reproducible per-replica random stream."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import (
    SQRT2,
    as_tx,
    c0,
    cov_X,
    cov_Xprime,
    covariance_matrix,
    region_cells,
)
from .kernels import ModelParams, Regime

JITTER_STEP = 1e-12
MAX_JITTER_RETRIES = 3


class FactorizationError(RuntimeError):
    """Covariance factorization failed even with the maximal diagonal jitter."""

    def __init__(self, min_eigenvalue, jitter):
        super().__init__(
            f"Cholesky factorization failed after {MAX_JITTER_RETRIES} jitter retries "
            f"(last jitter {jitter:.3g}); smallest eigenvalue {min_eigenvalue:.6g}"
        )
        self.min_eigenvalue = min_eigenvalue


class GridCoverageError(ValueError):
    """A requested light cone leaves the noise grid."""


@dataclass(frozen=True)
class SeedSpec:
    """Seed of one replica; the stream is a Philox generator keyed by both numbers.

    ``substream`` labels independent streams used inside one replica (for
    instance the null runs of an experiment).
    """

    master_seed: int
    replica_id: int = 0
    substream: tuple = ()

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.replica_id < 0:
            raise ValueError("replica_id must be non-negative")

    def child(self, *labels):
        """Independent stream for a labelled sub-task of this replica."""
        return SeedSpec(self.master_seed, self.replica_id, self.substream + tuple(int(v) for v in labels))

    def generator(self):
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.replica_id, *self.substream))
        return np.random.Generator(np.random.Philox(seq))


def as_seed(seed):
    if isinstance(seed, SeedSpec):
        return seed
    if isinstance(seed, tuple):
        return SeedSpec(*seed)
    return SeedSpec(int(seed))


@dataclass
class FieldSample:
    """One realization on a point list.

    ``points`` holds ``(t, x)`` rows; ``values`` one entry per point.
    """

    points: np.ndarray
    values: np.ndarray
    seed: SeedSpec
    sampler: str

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.points) != len(self.values):
            raise ValueError("values and points differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample contains non-finite values")

    def to_csv(self, path, append=False):
        write_samples_csv(path, [self], append=append)


def write_samples_csv(path, samples, append=False):
    """Write samples with columns point-index, t, x, w, z, value, replica_id, sampler."""
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        if not append:
            wr.writerow(["point_index", "t", "x", "w", "z", "value", "replica_id", "sampler"])
        for smp in samples:
            for i, ((t, x), v) in enumerate(zip(smp.points, smp.values)):
                w = (t - x) / SQRT2
                z = (t + x) / SQRT2
                wr.writerow([i, repr(float(t)), repr(float(x)), repr(float(w)), repr(float(z)),
                             repr(float(v)), smp.seed.replica_id, smp.sampler])


# ---------------------------------------------------------------------------
# exact Gaussian sampling


def jittered_cholesky(C):
    """Cholesky factor of ``C`` with escalating diagonal jitter.

    The first attempt uses no jitter; retry ``k`` adds ``k * 1e-12 * trace``.
    """
    C = np.asarray(C, dtype=float)
    n = len(C)
    if n == 0:
        return np.zeros((0, 0))
    tr = float(np.trace(C))
    jitter = 0.0
    for k in range(MAX_JITTER_RETRIES + 1):
        jitter = k * JITTER_STEP * tr
        try:
            return np.linalg.cholesky(C + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(float(np.linalg.eigvalsh(C)[0]), jitter)


class GaussianEnsemble:
    """A point set with its covariance matrix and a sampling factor.

    Coincident points are merged before factorization and points with zero
    variance (for instance at ``t = 0``) are pinned to zero, so duplicated
    points receive identical values.
    """

    def __init__(self, points, params=None, covariance=None, s_window=(0.0, np.inf)):
        self.points = None if points is None else as_tx(points)
        if covariance is None:
            if params is None or self.points is None:
                raise ValueError("need points and params, or an explicit covariance")
            covariance = covariance_matrix(self.points, params, s_window=s_window)
        self.covariance = np.asarray(covariance, dtype=float)
        n = len(self.covariance)
        if self.points is not None:
            _, keep, inverse = np.unique(self.points, axis=0, return_index=True, return_inverse=True)
            self._index = np.ravel(inverse)
        else:
            keep = np.arange(n)
            self._index = keep
        sub = self.covariance[np.ix_(keep, keep)]
        self._live = np.diag(sub) > 0
        self.factor = jittered_cholesky(sub[np.ix_(self._live, self._live)])
        self._n_unique = len(keep)

    def __len__(self):
        return len(self.covariance)

    def transform(self, normals):
        """Map standard normals of shape ``(..., n_live)`` to field values."""
        normals = np.asarray(normals, dtype=float)
        live_vals = normals @ self.factor.T
        full = np.zeros(normals.shape[:-1] + (self._n_unique,))
        full[..., self._live] = live_vals
        return full[..., self._index]

    @property
    def n_live(self):
        return int(self._live.sum())

    def draw(self, seed):
        rng = as_seed(seed).generator()
        return self.transform(rng.standard_normal(self.n_live))

    def draw_many(self, master_seed, replica_ids):
        """Values for several replicas, one row per replica id."""
        rows = [self.draw(SeedSpec(master_seed, int(r))) for r in replica_ids]
        return np.array(rows).reshape(len(rows), len(self))

    def sample(self, seed, sampler="exact"):
        seed = as_seed(seed)
        return FieldSample(self.points, self.draw(seed), seed, sampler)


def sample_exact(points, params, seed):
    """Exact joint sample of the field on a point list.

    Critical damping uses the closed-form covariance, other regimes the
    spectral one; the covariance is factorized with adaptive jitter.
    """
    tx = as_tx(points)
    if np.any(tx[:, 0] < 0) or np.any(tx[:, 0] > params.T):
        raise ValueError(f"point times must lie in [0, T={params.T}]")
    return GaussianEnsemble(tx, params).sample(seed)


# ---------------------------------------------------------------------------
# white noise on a grid


@dataclass
class NoiseGrid:
    """Independent white-noise cell masses on a uniform (s, y) grid.

    Cell ``(k, i)`` covers ``[k s_step, (k+1) s_step] x [y0 + i y_step, y0 + (i+1) y_step]``.
    """

    s_step: float
    y_step: float
    y0: float
    cells: np.ndarray

    @property
    def shape(self):
        return self.cells.shape

    @property
    def s_extent(self):
        return self.cells.shape[0] * self.s_step

    @property
    def y_extent(self):
        return (self.y0, self.y0 + self.cells.shape[1] * self.y_step)

    @classmethod
    def draw(cls, s_step, y_step, y0, n_s, n_y, seed):
        rng = as_seed(seed).generator()
        cells = rng.standard_normal((n_s, n_y)) * math.sqrt(s_step * y_step)
        return cls(float(s_step), float(y_step), float(y0), cells)

    @classmethod
    def zeros(cls, s_step, y_step, y0, n_s, n_y):
        return cls(float(s_step), float(y_step), float(y0), np.zeros((n_s, n_y)))

    @classmethod
    def covering(cls, points, step, seed=None):
        """Smallest grid with spacing ``step`` (aligned at ``y = 0``) covering all light cones."""
        tx = as_tx(points)
        n_s, y0, n_y = _covering_geometry(tx, step)
        if seed is None:
            return cls.zeros(step, step, y0, n_s, n_y)
        return cls.draw(step, step, y0, n_s, n_y, seed)


def _covering_geometry(tx, step):
    t_max = float(tx[:, 0].max())
    n_s = max(int(math.ceil(t_max / step - 1e-9)), 1)
    lo = float((tx[:, 1] - tx[:, 0]).min())
    hi = float((tx[:, 1] + tx[:, 0]).max())
    i_lo = int(math.floor(lo / step + 1e-9))
    i_hi = int(math.ceil(hi / step - 1e-9))
    return n_s, i_lo * step, max(i_hi - i_lo, 1)


def walsh_weights(points, grid, a):
    """Kernel weights ``Gamma(t - s_c, x - y_c)`` at the cell centres.

    Cells whose centre lies exactly on a cone edge are bisected by it and get
    half weight.  Returns an array of shape ``(n_points, n_s, n_y)``.
    """
    tx = as_tx(points)
    n_s, n_y = grid.shape
    s_c = (np.arange(n_s) + 0.5) * grid.s_step
    y_c = grid.y0 + (np.arange(n_y) + 0.5) * grid.y_step
    out = np.zeros((len(tx), n_s, n_y))
    for p, (t, x) in enumerate(tx):
        if t <= 0:
            continue
        if t > grid.s_extent + 1e-9 * grid.s_step:
            raise GridCoverageError(f"point (t={t}, x={x}) is later than the noise grid")
        ylo, yhi = grid.y_extent
        tol = 1e-9 * grid.y_step
        if x - t < ylo - tol or x + t > yhi + tol:
            raise GridCoverageError(f"light cone of (t={t}, x={x}) leaves the noise grid")
        r = t - s_c[:, None]
        d = np.abs(x - y_c[None, :])
        gap = (r - d) / grid.y_step
        wt = np.where(gap > 1e-9, 1.0, np.where(np.abs(gap) <= 1e-9, 0.5, 0.0))
        wt = np.where(r > 0, wt, 0.0)
        out[p] = 0.5 * np.exp(-a * r / 2.0) * wt
    return out


def grid_field_values(points, grid, a):
    """Grid approximation of the critically damped field at ``points`` for one noise grid."""
    W = walsh_weights(points, grid, a)
    return W.reshape(len(W), -1) @ grid.cells.ravel()


def sample_grid_walsh(points, a, seed, step, noise=None):
    """Approximate sample from a white-noise grid of spacing ``step``.

    The field at each point is the kernel-weighted sum of the noise cells.
    ``noise`` may supply the grid explicitly (also used to inject zero noise);
    otherwise the smallest covering grid is drawn from ``seed``.
    """
    seed = as_seed(seed)
    tx = as_tx(points)
    if noise is None:
        noise = NoiseGrid.covering(tx, step, seed)
    return FieldSample(tx, grid_field_values(tx, noise, a), seed, "grid_walsh")


def grid_walsh_many(points, a, step, master_seed, replica_ids):
    """Grid samples for many replicas; row ``r`` equals ``sample_grid_walsh`` for that replica."""
    tx = as_tx(points)
    geom = NoiseGrid.covering(tx, step)
    W = walsh_weights(tx, geom, a).reshape(len(tx), -1)
    active = np.flatnonzero(np.any(W != 0, axis=0))
    Wa = W[:, active]
    n_s, n_y = geom.shape
    sd = step
    out = np.empty((len(replica_ids), len(tx)))
    for k, r in enumerate(replica_ids):
        rng = SeedSpec(master_seed, int(r)).generator()
        cells = rng.standard_normal(n_s * n_y) * sd
        out[k] = Wa @ cells[active]
    return out


def walsh_grid_covariance(points, a, step):
    """Exact covariance of the grid approximation (no Monte Carlo)."""
    tx = as_tx(points)
    geom = NoiseGrid.covering(tx, step)
    W = walsh_weights(tx, geom, a).reshape(len(tx), -1)
    return (W @ W.T) * geom.s_step * geom.y_step


# ---------------------------------------------------------------------------
# characteristic lines at critical damping


def _line_increment_variances(w, z_grid, a, s_window):
    """Variances of the independent increments of the cone-mass process along ``w = const``.

    At critical damping, ``u(w, z) = exp(-a t/2)/2 * M(z)`` where ``M`` sums the
    weighted noise over the cone ``alpha < sqrt(2) z, beta < sqrt(2) w``; ``M``
    has independent increments in ``z``.
    """
    lo, hi = float(s_window[0]), float(s_window[1])
    be1 = SQRT2 * w
    k = a / 2.0
    al = SQRT2 * np.asarray(z_grid, dtype=float)
    be0 = 2 * lo - al.max() - 1.0
    edges = np.concatenate([[2 * lo - be1 - 1.0], al])
    cell = region_cells(edges[:-1], edges[1:], be0, be1, 2 * lo, k)
    if math.isfinite(hi):
        cell = cell - region_cells(edges[:-1], edges[1:], be0, be1, 2 * hi, k)
    return 0.5 * np.maximum(cell, 0.0)


class CharPathSampler:
    """Exact sampler of the critically damped field along the characteristic ``w = const``.

    ``u(w, z) = exp(-a t/2)/2 * M(z)`` with ``M`` a process of independent
    increments, so a path costs O(len(z_grid)).  ``s_window`` restricts the
    driving noise to a time window (the parts driven before or after a fixed
    time).  The increment variances are computed once and reused per draw.
    """

    def __init__(self, w, z_grid, a, s_window=(0.0, np.inf)):
        z = np.asarray(z_grid, dtype=float)
        if np.any(np.diff(z) <= 0):
            raise ValueError("z_grid must be strictly increasing")
        self.w = float(w)
        self.z = z
        self.sd = np.sqrt(_line_increment_variances(w, z, a, s_window))
        t = (w + z) / SQRT2
        self.points = np.column_stack([t, (z - w) / SQRT2])
        self.scale = np.where(t > 0, 0.5 * np.exp(-a * np.maximum(t, 0) / 2.0), 0.0)

    def draw(self, seed):
        rng = as_seed(seed).generator()
        return self.scale * np.cumsum(rng.standard_normal(len(self.z)) * self.sd)

    def sample(self, seed):
        seed = as_seed(seed)
        return FieldSample(self.points, self.draw(seed), seed, "char_line")


def sample_char_path(w, z_grid, a, seed, s_window=(0.0, np.inf)):
    """Exact sample of the critically damped field along ``w = const`` (see :class:`CharPathSampler`)."""
    return CharPathSampler(w, z_grid, a, s_window).sample(seed)


def sample_Y_path(z_grid, t0, a, seed):
    """Brownian path ``Y`` with ``Var(Y(z') - Y(z)) = C0 |z' - z|`` and ``Y(0) = 0``.

    The returned points are the ``(w, z)`` pairs ``(0, z)``; only ``z`` matters.
    """
    z = np.asarray(z_grid, dtype=float)
    if np.any(z < 0) or np.any(np.diff(z) < 0):
        raise ValueError("z_grid must be non-decreasing and non-negative")
    seed = as_seed(seed)
    rng = seed.generator()
    dz = np.diff(np.concatenate([[0.0], z]))
    Y = np.cumsum(rng.standard_normal(len(z)) * np.sqrt(c0(t0, a) * dz))
    pts = np.column_stack([z / SQRT2, z / SQRT2])
    return FieldSample(pts, Y, seed, "Y_path")


def check_char_h(z0, h):
    """Enforce the step restriction ``h <= min(z0, 1)/2`` for the characteristic identity."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("h must be positive")
    if np.any(h > min(z0, 1.0) / 2.0 + 1e-15):
        raise ValueError(f"h must not exceed min(z0, 1)/2 = {min(z0, 1.0) / 2.0}")


def u1_increment(w, z, h, X, dY, a):
    """Increment of the early-noise part of ``u`` from ``(w, z)`` by ``(+h, +h)``.

    ``X`` is the wedge process at ``(w, z)`` and ``dY`` the increment of ``Y``
    over ``[z, z + sqrt(2) h]``.  Returns ``(total, x_term, y_term)``.
    """
    pref = 0.5 * np.exp(-a * (w + z) / (2 * SQRT2))
    decay = np.exp(-a * h / 2.0)
    x_term = pref * (decay - 1.0) * X
    y_term = pref * decay * dY
    return x_term + y_term, x_term, y_term


@dataclass
class CharLineSample:
    """Joint sample of ``X(w, z0)``, ``Y`` increments and the resulting ``u1`` increments."""

    w_grid: np.ndarray
    h_grid: np.ndarray
    X: np.ndarray
    dY: np.ndarray
    increments: np.ndarray  # shape (len(w_grid), len(h_grid))
    x_terms: np.ndarray
    y_terms: np.ndarray
    seed: SeedSpec
    meta: dict = field(default_factory=dict)


def char_line_ensemble(z0, t0, w_grid, h_grid, a):
    """Covariance of ``(X(w, z0) for w in w_grid, Y(z0 + sqrt2 h) - Y(z0) for h in h_grid)``."""
    w_grid = np.asarray(w_grid, dtype=float)
    h_grid = np.asarray(h_grid, dtype=float)
    nw, nh = len(w_grid), len(h_grid)
    C = np.zeros((nw + nh, nw + nh))
    for i in range(nw):
        for j in range(i, nw):
            C[i, j] = C[j, i] = cov_X((w_grid[i], z0), (w_grid[j], z0), t0, a)
    C0 = c0(t0, a)
    dz = SQRT2 * h_grid
    C[nw:, nw:] = C0 * np.minimum(dz[:, None], dz[None, :])
    # X(w, z0) only involves noise with alpha < sqrt2 z0, the Y increments lie beyond it
    return GaussianEnsemble(None, covariance=C)


def sample_char_line(z0, t0, w_grid, h_grid, a, seed):
    """Sample ``u1`` increments along the characteristic through ``(w, z0)``.

    ``t0`` must equal ``w0/sqrt(2)`` for the smallest ``w0`` of interest, all
    ``w`` must satisfy ``w >= sqrt(2) t0`` and ``h <= min(z0, 1)/2``.
    """
    w_grid = np.atleast_1d(np.asarray(w_grid, dtype=float))
    h_grid = np.atleast_1d(np.asarray(h_grid, dtype=float))
    if t0 < 0:
        raise ValueError("t0 must be non-negative")
    if np.any(w_grid < SQRT2 * t0 - 1e-12):
        raise ValueError("w_grid must lie above w0 = sqrt(2) t0")
    if z0 <= 0:
        raise ValueError("z0 must be positive")
    check_char_h(z0, h_grid)
    seed = as_seed(seed)
    nw = len(w_grid)
    if t0 == 0:
        zeros = np.zeros((nw, len(h_grid)))
        return CharLineSample(w_grid, h_grid, np.zeros(nw), np.zeros(len(h_grid)), zeros, zeros.copy(),
                              zeros.copy(), seed)
    ens = char_line_ensemble(z0, t0, w_grid, h_grid, a)
    vals = ens.draw(seed)
    X, dY = vals[:nw], vals[nw:]
    total, xt, yt = u1_increment(w_grid[:, None], z0, h_grid[None, :], X[:, None], dY[None, :], a)
    return CharLineSample(w_grid, h_grid, X, dY, total, xt, yt, seed)


def sample_Xprime(w_values, t0, a, seed):
    """Joint sample of the ``z``-free part ``X'(w)`` of the wedge process."""
    w_values = np.atleast_1d(np.asarray(w_values, dtype=float))
    C = np.array([[cov_Xprime(u, v, t0, a) for v in w_values] for u in w_values])
    return GaussianEnsemble(None, covariance=C).draw(seed)


def require_critical(params):
    if params.regime is not Regime.CRITICAL:
        raise ValueError("this sampler requires critical damping (m = a/2)")
