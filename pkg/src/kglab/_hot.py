"""Light-cone sums on a characteristic-aligned grid.

Both loops cost O(Nt^2 Nx).  Each exists as a numba kernel and as a numpy
version vectorized over x; the public names point at whichever backend
``kglab._accel`` selected.

Grid convention: nodes ``(n, j)`` sit at ``t = n d``, ``x = x0 + j d``.  Noise
cells ``(k, i)`` span ``[k d, (k+1) d] x [x_i, x_{i+1}]``.  Values outside the
grid count as zero.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit


def _padded_prefix(rows, pad):
    n_rows, n_cols = rows.shape
    padded = np.zeros((n_rows, n_cols + 2 * pad))
    padded[:, pad:pad + n_cols] = rows
    prefix = np.zeros((n_rows, n_cols + 2 * pad + 1))
    np.cumsum(padded, axis=1, out=prefix[:, 1:])
    return padded, prefix


def cone_sums_numpy(cells, n_x, a, d):
    """Kernel-weighted noise sums at every node.

    ``out[n, j] = 1/2 sum_{k<n} exp(-a (n-k-1/2) d / 2) S_k(j)`` where ``S_k``
    adds the cells of row ``k`` inside the cone of node ``(n, j)``, the two
    edge cells (bisected by the cone) with weight 1/2.
    """
    n_t = cells.shape[0]
    pad = n_t + 1
    padded, prefix = _padded_prefix(cells, pad)
    out = np.zeros((n_t + 1, n_x))
    j = np.arange(n_x) + pad
    for n in range(1, n_t + 1):
        acc = np.zeros(n_x)
        for k in range(n):
            r = n - k
            s = prefix[k, j + r] - prefix[k, j - r] - 0.5 * (padded[k, j - r] + padded[k, j + r - 1])
            acc += math.exp(-a * (r - 0.5) * d / 2.0) * s
        out[n] = 0.5 * acc
    return out


@njit(cache=True)
def _cone_sums_loop(padded, prefix, n_x, pad, a, d):
    n_t = padded.shape[0]
    out = np.zeros((n_t + 1, n_x))
    for n in range(1, n_t + 1):
        for k in range(n):
            r = n - k
            wt = 0.5 * math.exp(-a * (r - 0.5) * d / 2.0)
            for jj in range(n_x):
                j = jj + pad
                s = prefix[k, j + r] - prefix[k, j - r] - 0.5 * (padded[k, j - r] + padded[k, j + r - 1])
                out[n, jj] += wt * s
    return out


def cone_sums_numba(cells, n_x, a, d):
    n_t = cells.shape[0]
    pad = n_t + 1
    padded, prefix = _padded_prefix(np.ascontiguousarray(cells, dtype=np.float64), pad)
    return _cone_sums_loop(padded, prefix, n_x, pad, float(a), float(d))


def light_cone_integral_numpy(v, a, d):
    """Trapezoid approximation of ``int_0^t int Gamma(t-s, x-y) v(s, y) dy ds`` at every node.

    Trapezoid in ``y`` over ``[x - r, x + r]`` (cone edges fall on nodes) and in
    ``s`` over ``[0, t]``; the row ``s = t`` has zero width and drops out.
    """
    n_rows, n_x = v.shape
    pad = n_rows + 1
    padded, prefix = _padded_prefix(v, pad)
    out = np.zeros((n_rows, n_x))
    j = np.arange(n_x) + pad
    for n in range(1, n_rows):
        acc = np.zeros(n_x)
        for k in range(n):
            r = n - k
            trap = prefix[k, j + r + 1] - prefix[k, j - r] - 0.5 * (padded[k, j - r] + padded[k, j + r])
            wk = 0.5 if k == 0 else 1.0
            acc += wk * math.exp(-a * r * d / 2.0) * trap
        out[n] = 0.5 * d * d * acc
    return out


@njit(cache=True)
def _light_cone_loop(padded, prefix, n_x, pad, a, d):
    n_rows = padded.shape[0]
    out = np.zeros((n_rows, n_x))
    for n in range(1, n_rows):
        for k in range(n):
            r = n - k
            wk = 0.5 if k == 0 else 1.0
            wt = 0.5 * d * d * wk * math.exp(-a * r * d / 2.0)
            for jj in range(n_x):
                j = jj + pad
                trap = prefix[k, j + r + 1] - prefix[k, j - r] - 0.5 * (padded[k, j - r] + padded[k, j + r])
                out[n, jj] += wt * trap
    return out


def light_cone_integral_numba(v, a, d):
    n_rows = v.shape[0]
    pad = n_rows + 1
    padded, prefix = _padded_prefix(np.ascontiguousarray(v, dtype=np.float64), pad)
    return _light_cone_loop(padded, prefix, v.shape[1], pad, float(a), float(d))


if USE_NUMBA:
    cone_sums = cone_sums_numba
    light_cone_integral = light_cone_integral_numba
else:
    cone_sums = cone_sums_numpy
    light_cone_integral = light_cone_integral_numpy
