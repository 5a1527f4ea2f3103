"""Fast self-checks of every module, run by ``kglab validate``.

Each check returns ``(passed, detail)``.  They are small versions of the
properties exercised by the test suite and finish in seconds.
"""
import math
import time

import numpy as np
from scipy import integrate

from . import _hot
from .covariance import (
    c0,
    combination_moment,
    conditional_variance,
    cov_critical,
    cov_spectral,
    cov_X,
    covariance_matrix,
    rect_corners,
)
from .kernels import ModelParams, Regime, classify, critical_kernel, fourier_green, spacetime_transform
from .reduction import fixed_point_residual, picard_solve, solve_general
from .regularity import lil_norm, mc_norm, sup_statistic
from .sampler import (
    GaussianEnsemble,
    SeedSpec,
    sample_char_line,
    sample_exact,
    sample_Y_path,
    walsh_grid_covariance,
)


def _close(x, y, rtol):
    return abs(x - y) <= rtol * max(abs(y), 1e-300)


def check_regimes():
    ok = (classify(2, 1) is Regime.CRITICAL and classify(0, 1) is Regime.OSCILLATORY
          and classify(2, 0) is Regime.MIXED)
    return ok, "regime tags for (2,1), (0,1), (2,0)"


def check_fourier_green():
    P = ModelParams(2, 0, 2)
    want = math.exp(-1) * math.sinh(math.sqrt(0.75)) / math.sqrt(0.75)
    v1 = fourier_green(1.0, 0.5, P)
    v2 = fourier_green(1.0, 0.0, ModelParams(2, 1, 2))
    v3 = fourier_green(math.pi, 1.0, ModelParams(0, 0, 4))
    rng = np.random.default_rng(0)
    xi = rng.normal(size=20) * 5
    even = np.allclose(fourier_green(0.7, xi, P), fourier_green(0.7, -xi, P), rtol=0, atol=0)
    ok = _close(v1, want, 1e-14) and _close(v2, math.exp(-1), 1e-15) and abs(v3) < 1e-15 and even
    return ok, f"sinh branch {v1:.15g}, boundary {v2:.15g}, evenness {even}"


def check_kernel_and_transform():
    ok = critical_kernel(1, 0, 0) == 0.5 and critical_kernel(1, 2, 5) == 0
    ok &= _close(critical_kernel(2, 1, 2), math.exp(-2) / 2, 1e-15)
    F = spacetime_transform(1.0, 0.0, 0.0, 1.0, 2.0)
    zp, zm = -1 + 1j, -1 - 1j
    want = ((np.exp(zp) - 1) / zp - (np.exp(zm) - 1) / zm) / 2j
    ok &= abs(F - want) < 1e-14 and spacetime_transform(0.0, 0.3, 2.0, 1.0, 1.0) == 0
    return bool(ok), f"transform at (1,0,0,1,a=2) = {F:.12g}"


def check_cov_critical():
    p, q, a = (1.0, 0.0), (2.0, 0.3), 1.0
    f = lambda s: 0.25 * math.exp(-a * (3 - 2 * s) / 2) * max(0.0, min(1 - s, 2.3 - s) - max(-1 + s, -1.7 + s))
    ref = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13, points=[0.5 * 2.0])[0]
    got = cov_critical(p, q, a)
    ok = _close(got, ref, 1e-10) and cov_critical((1, 0), (1, 0), 0) == 0.25 and cov_critical((1, 0), (1, 100), 1) == 0
    return ok, f"closed form {got:.15g} vs quadrature {ref:.15g}"


def check_cov_spectral():
    P = ModelParams(1.4, 0.7, 3)
    pairs = [((1.0, 0.0), (1.0, 0.0)), ((1.3, 0.2), (2.1, -0.4)), ((0.5, 0.1), (2.5, 1.0))]
    err = max(abs(cov_spectral(p, q, P) - cov_critical(p, q, 1.4)) / abs(cov_critical(p, q, 1.4)) for p, q in pairs)
    return err < 1e-7, f"max relative difference to closed form {err:.2e}"


def check_rect_and_slnd():
    a = 1.0
    pts, c = rect_corners(1.0, 0.0, 2.0**-6, 2.0**-5)
    C = covariance_matrix(pts, ModelParams(a, a / 2, 2))
    m1, m2 = float(c @ C @ c), combination_moment(pts, c, a)
    P = ModelParams(a, a / 2, 2)
    w = 0.2
    line = [((w + z) / math.sqrt(2), (z - w) / math.sqrt(2)) for z in (0.6, 0.8, 1.0)]
    cv = conditional_variance(line[-1], line[:-1], P)
    self_cond = conditional_variance(line[-1], line, P)
    ok = abs(m1 - m2) < 1e-12 and cv > 0 and self_cond < 1e-12
    return ok, f"rectangle methods {m1:.6g}/{m2:.6g}, conditional variance {cv:.3g}"


def check_char_processes():
    t0, a = 0.6, 1.2
    C0 = c0(t0, a)
    ok = _close(C0, math.sqrt(2) * math.expm1(a * t0) / a, 1e-14)
    ref = integrate.quad(lambda s: math.exp(a * s) * (2 * math.sqrt(2) - 2 * s), 0, min(t0, math.sqrt(2)))[0]
    ok &= _close(cov_X((1, 1), (1, 1), t0, a), ref, 1e-10)
    smp = sample_char_line(1.0, 0.0, [0.5], [0.1], a, 3)
    ok &= bool(np.all(smp.increments == 0))
    return bool(ok), f"C0 = {C0:.12g}"


def check_exact_sampler():
    P = ModelParams(2, 1, 2)
    pts = [(1, 0), (0.5, 0.2), (1, 0), (0, 0.4)]
    s1 = sample_exact(pts, P, SeedSpec(5, 3))
    s2 = sample_exact(pts, P, SeedSpec(5, 3))
    ok = np.array_equal(s1.values, s2.values) and s1.values[0] == s1.values[2] and s1.values[3] == 0
    ens = GaussianEnsemble([(1.0, 0.0)], ModelParams(0, 0, 2))
    v = ens.draw_many(1, range(4000))[:, 0]
    z = (v.var() - 0.25) / (0.25 * math.sqrt(2 / len(v)))
    ok &= abs(z) < 4
    return bool(ok), f"wave variance z-score {z:.2f}"


def check_grid_sampler():
    probe = [(0.5, 0.0), (0.375, 0.125), (0.25, -0.125)]
    C = covariance_matrix(probe, ModelParams(2, 1, 1))
    b1 = np.abs(walsh_grid_covariance(probe, 2.0, 2.0**-5) - C).max()
    b2 = np.abs(walsh_grid_covariance(probe, 2.0, 2.0**-6) - C).max()
    ratio = b1 / b2
    return 1.6 < ratio < 2.4, f"bias ratio under refinement {ratio:.3f}"


def check_Y_path():
    t0, a = 0.5, 1.0
    z = np.linspace(0, 1, 11)
    paths = np.array([sample_Y_path(z, t0, a, SeedSpec(9, r)).values for r in range(3000)])
    v = np.var(paths[:, -1] - paths[:, 5])
    target = c0(t0, a) * 0.5
    zscore = (v - target) / (target * math.sqrt(2 / 3000))
    return bool(abs(zscore) < 4 and np.all(paths[:, 0] == 0)), f"increment variance z-score {zscore:.2f}"


def check_hot_loops():
    rng = np.random.default_rng(2)
    cells = rng.normal(size=(12, 40))
    v = rng.normal(size=(13, 41))
    e1 = np.abs(_hot.cone_sums_numpy(cells, 41, 1.0, 0.1) - _hot.cone_sums_numba(cells, 41, 1.0, 0.1)).max()
    e2 = np.abs(_hot.light_cone_integral_numpy(v, 1.0, 0.1) - _hot.light_cone_integral_numba(v, 1.0, 0.1)).max()
    return max(e1, e2) < 1e-12, f"numba vs numpy max difference {max(e1, e2):.1e}"


def check_picard():
    P = ModelParams(2, 1.2, 1.0)
    u, uC, rep = solve_general((-0.25, 0.25), P, 2.0**-5, 4)
    res = fixed_point_residual(u, uC, P)
    crit = ModelParams(2, 1, 1.0)
    u2, rep2 = picard_solve(uC, crit)
    ok = rep.converged and res < 1e-8 and rep2.iterations == 1 and np.array_equal(u2.values, uC.values)
    return bool(ok), f"{rep.iterations} iterations, fixed-point residual {res:.1e}"


def check_regularity_pipeline():
    h = 2.0 ** -np.arange(4, 21)
    raw = np.random.default_rng(0).normal(size=len(h)) * np.sqrt(h)
    r = raw / lil_norm(h)
    ok = np.allclose(lil_norm(h) ** 2 * r**2, raw**2, rtol=1e-14)
    ok &= bool(np.all(mc_norm(h) > lil_norm(h)))
    vals = np.cumsum(np.random.default_rng(1).normal(size=200))
    mask = np.zeros(150, bool)
    mask[20:60] = True
    full, _ = sup_statistic(vals, 150, [3, 6])
    part, _ = sup_statistic(vals, 150, [3, 6], base_mask=mask)
    ok &= bool(np.all(part <= full))
    return bool(ok), "normalizer identity and sup monotonicity"


CHECKS = [
    ("kernels: regime tags", check_regimes),
    ("kernels: Fourier kernel values and symmetry", check_fourier_green),
    ("kernels: critical kernel and space-time transform", check_kernel_and_transform),
    ("covariance: closed form vs quadrature", check_cov_critical),
    ("covariance: spectral vs closed form", check_cov_spectral),
    ("covariance: rectangle methods and conditioning", check_rect_and_slnd),
    ("covariance: characteristic processes", check_char_processes),
    ("sampler: exact sampler determinism and variance", check_exact_sampler),
    ("sampler: grid bias halves under refinement", check_grid_sampler),
    ("sampler: Y path increments", check_Y_path),
    ("reduction: numba and numpy loops agree", check_hot_loops),
    ("reduction: Picard fixed point", check_picard),
    ("regularity: normalizers and sup statistic", check_regularity_pipeline),
]


def run_validation(stream=None):
    """Run every check; returns a list of ``(name, passed, detail, seconds)``."""
    rows = []
    for name, fn in CHECKS:
        t = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash counts as a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append((name, bool(ok), detail, time.perf_counter() - t))
        if stream is not None:
            print(f"{'PASS' if ok else 'FAIL'}  {name:<52s} {detail}", file=stream, flush=True)
    return rows
