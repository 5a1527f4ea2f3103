"""Reduction of the general equation to critical damping.

With ``b = a^2/4 - m^2`` the solution satisfies ``u = u_C + b K[u]``, where
``u_C`` is the critically damped stochastic convolution and ``K`` integrates
against the critical kernel over the backward light cone.  Picard iteration
on a grid with equal time and space steps solves this pathwise.
"""
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _hot
from .covariance import lipschitz_integrals
from .sampler import GridCoverageError, NoiseGrid, as_seed

MAGIC = b"KGFIELD1"


class GridMismatchError(ValueError):
    """Two fields live on different grids."""


@dataclass
class GridField:
    """Field values on a uniform ``(t, x)`` node grid (rows are times)."""

    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.t_grid), len(self.x_grid)):
            raise ValueError("values must have shape (len(t_grid), len(x_grid))")
        for g in (self.t_grid, self.x_grid):
            if len(g) > 1 and np.any(np.diff(g) <= 0):
                raise ValueError("grid spacings must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def step(self):
        return float(self.t_grid[1] - self.t_grid[0]) if len(self.t_grid) > 1 else float("nan")

    def same_grid(self, other):
        return (self.values.shape == other.values.shape
                and np.allclose(self.t_grid, other.t_grid, rtol=0, atol=1e-12)
                and np.allclose(self.x_grid, other.x_grid, rtol=0, atol=1e-12))

    def crop(self, x_lo, x_hi):
        """Restrict to nodes with ``x_lo <= x <= x_hi`` (up to rounding)."""
        tol = 1e-9 * max(abs(self.step), 1.0)
        sel = (self.x_grid >= x_lo - tol) & (self.x_grid <= x_hi + tol)
        return GridField(self.t_grid, self.x_grid[sel], self.values[:, sel])

    def value_at(self, t, x):
        """Value at a node given by coordinates (must be on the grid)."""
        n = int(round((t - self.t_grid[0]) / self.step))
        j = int(round((x - self.x_grid[0]) / self.step))
        if not (0 <= n < len(self.t_grid) and 0 <= j < len(self.x_grid)):
            raise IndexError("point outside the grid")
        return float(self.values[n, j])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,x,value\n")
            for n, t in enumerate(self.t_grid):
                for j, x in enumerate(self.x_grid):
                    fh.write(f"{float(t)!r},{float(x)!r},{float(self.values[n, j])!r}\n")

    def to_binary(self, path):
        """Row-major little-endian float64 dump after a magic tag and the two grid sizes."""
        n_t, n_x = self.values.shape
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<qq", n_t, n_x))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())


def read_binary(path):
    """Read the values matrix written by :meth:`GridField.to_binary`."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError("not a KGFIELD1 file")
        n_t, n_x = struct.unpack("<qq", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(n_t, n_x)


@dataclass
class PicardReport:
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False


# ---------------------------------------------------------------------------
# noise grid and convolution


def noise_for_window(x_lo, x_hi, T, step, seed=None):
    """Noise grid whose node grid covers ``[x_lo - T, x_hi + T]`` up to time ``T``.

    Every node with ``x`` in ``[x_lo, x_hi]`` and ``t <= T`` then has its whole
    backward light cone inside the grid.
    """
    n_t = int(round(T / step))
    if abs(n_t * step - T) > 1e-9 * step:
        raise ValueError("T must be a multiple of the grid step")
    i_lo = int(math.floor((x_lo - T) / step + 1e-9))
    i_hi = int(math.ceil((x_hi + T) / step - 1e-9))
    n_x = i_hi - i_lo + 1
    y0 = i_lo * step
    if seed is None:
        return NoiseGrid.zeros(step, step, y0, n_t, n_x - 1)
    return NoiseGrid.draw(step, step, y0, n_t, n_x - 1, as_seed(seed))


def stochastic_convolution(noise, a, x_window=None):
    """Critically damped stochastic convolution ``u_C`` at every node of the noise grid.

    Uses the same cell weights as ``sample_grid_walsh``: each cell counts with
    the kernel at its centre, and cells bisected by the cone edge count half.

    Args:
        noise: :class:`NoiseGrid` with equal ``s_step`` and ``y_step``.
        a: damping constant.
        x_window: optional ``(x_lo, x_hi)``; the result is cropped to it after
            checking that all light cones of those nodes fit in the grid.
    """
    d = noise.s_step
    if abs(noise.y_step - d) > 1e-12 * d:
        raise ValueError("the convolution needs s_step == y_step")
    n_t, n_cells = noise.shape
    n_x = n_cells + 1
    t_grid = np.arange(n_t + 1) * d
    x_grid = noise.y0 + np.arange(n_x) * d
    vals = _hot.cone_sums(noise.cells, n_x, a, d)
    field_ = GridField(t_grid, x_grid, vals)
    if x_window is not None:
        x_lo, x_hi = x_window
        T = t_grid[-1]
        if x_lo - T < x_grid[0] - 1e-9 * d or x_hi + T > x_grid[-1] + 1e-9 * d:
            raise GridCoverageError("light cones of the output window leave the noise grid")
        field_ = field_.crop(x_lo, x_hi)
    return field_


def light_cone_operator(v, a):
    """``K[v]``: trapezoid light-cone integral of a :class:`GridField` against the critical kernel."""
    return GridField(v.t_grid, v.x_grid, _hot.light_cone_integral(v.values, a, v.step))


def picard_solve(u_C, params, tol=1e-8, max_iter=50):
    """Solve ``u = u_C + b K[u]`` with ``b = a^2/4 - m^2`` by fixed-point iteration.

    Starts from ``u_C``; stops when the sup-norm change drops below ``tol``.
    Light cones are truncated at the grid edge, so only nodes whose cones fit
    (see :func:`noise_for_window`) carry the exact discrete solution.

    Returns:
        ``(GridField, PicardReport)``; ``converged`` is False if ``max_iter``
        updates did not reach ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    b = params.b
    if abs(u_C.t_grid[1] - u_C.t_grid[0] - (u_C.x_grid[1] - u_C.x_grid[0])) > 1e-12:
        raise ValueError("Picard iteration needs equal time and space steps")
    u = u_C.values
    report = PicardReport(0)
    d = u_C.step
    for _ in range(max_iter):
        nxt = u_C.values + b * _hot.light_cone_integral(u, params.a, d) if b != 0 else u_C.values.copy()
        res = float(np.max(np.abs(nxt - u))) if u.size else 0.0
        report.iterations += 1
        report.residual_history.append(res)
        u = nxt
        if res < tol:
            report.converged = True
            break
    return GridField(u_C.t_grid, u_C.x_grid, u), report


def fixed_point_residual(u, u_C, params):
    """``sup |u - u_C - b K[u]|`` over the grid."""
    Ku = _hot.light_cone_integral(u.values, params.a, u.step)
    return float(np.max(np.abs(u.values - u_C.values - params.b * Ku)))


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class LipschitzReport:
    u_L: GridField
    statistic: float  # sup |u_L(t+h, x+h) - u_L(t, x)| / h
    sup_u: float  # sup |u| over the light cone of the probed region
    constant: float  # |b| max (I1 + I2 + I3) / h over the probed (t, h)
    max_h: float

    @property
    def bound(self):
        return self.constant * self.sup_u

    @property
    def ratio(self):
        return self.statistic / self.bound if self.bound > 0 else 0.0


def decompose(u, u_C, params, region=None, max_shift=None):
    """Split ``u = u_C + u_L`` and measure the Lipschitz modulus of ``u_L``.

    The statistic is the largest ``|u_L(t+h, x+h) - u_L(t, x)| / h`` over grid
    pairs along the ``(+1, +1)`` characteristic with both ends in ``region``
    (an ``(x_lo, x_hi)`` window, default the whole grid).  It is compared with
    ``C sup|u|`` where ``sup|u|`` runs over the light cone of the region and
    ``C = |b| max (I1 + I2 + I3)/h`` uses the closed-form kernel integrals.

    Raises:
        GridMismatchError: if the two fields are on different grids.
    """
    if not u.same_grid(u_C):
        raise GridMismatchError("u and u_C must share a grid")
    u_L = GridField(u.t_grid, u.x_grid, u.values - u_C.values)
    d = u.step
    n_t, n_x = u.values.shape
    x = u.x_grid
    if region is None:
        region = (x[0], x[-1])
    x_lo, x_hi = region
    tol = 1e-9 * d
    in_reg = (x >= x_lo - tol) & (x <= x_hi + tol)
    if max_shift is None:
        max_shift = min(n_t - 1, int(round(1.0 / d)))
    stat = 0.0
    L = u_L.values
    for k in range(1, max_shift + 1):
        diff = np.abs(L[k:, k:] - L[:-k, :-k]) / (k * d)
        mask = in_reg[:-k] & in_reg[k:]
        if mask.any():
            stat = max(stat, float(diff[:, mask].max()))
    T = float(u.t_grid[-1])
    cone = (x >= x_lo - T - tol) & (x <= x_hi + T + tol)
    sup_u = float(np.abs(u.values[:, cone]).max())
    hs = np.arange(1, max_shift + 1) * d
    const = 0.0
    for h in hs:
        for t in u.t_grid[u.t_grid <= T - h + tol]:
            I1, I2, I3 = lipschitz_integrals(t, h, params.a)
            const = max(const, (I1 + I2 + I3) / h)
    const *= abs(params.b)
    return LipschitzReport(u_L, stat, sup_u, const, float(hs[-1]) if len(hs) else 0.0)


def solve_general(x_window, params, step, seed, tol=1e-8, max_iter=50):
    """Draw a noise grid, build ``u_C`` and solve for ``u`` on the same noise.

    Returns ``(u, u_C, report)`` on the full computational grid; crop to
    ``x_window`` for values whose light cones are complete.
    """
    noise = noise_for_window(x_window[0], x_window[1], params.T, step, seed)
    u_C = stochastic_convolution(noise, params.a)
    u, report = picard_solve(u_C, params, tol=tol, max_iter=max_iter)
    return u, u_C, report
