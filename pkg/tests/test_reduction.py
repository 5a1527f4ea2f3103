import math

import numpy as np
import pytest

from kglab.covariance import cov_critical, cov_spectral
from kglab.kernels import ModelParams
from kglab.reduction import (
    GridField,
    GridMismatchError,
    decompose,
    fixed_point_residual,
    light_cone_operator,
    noise_for_window,
    picard_solve,
    read_binary,
    solve_general,
    stochastic_convolution,
)
from kglab.sampler import GridCoverageError, NoiseGrid, SeedSpec, grid_field_values, walsh_grid_covariance


def test_zero_noise_gives_zero_fields():
    noise = noise_for_window(-0.25, 0.25, 0.5, 2.0**-5)
    uC = stochastic_convolution(noise, 2.0)
    assert np.all(uC.values == 0)
    u, rep = picard_solve(uC, ModelParams(2, 1.2, 0.5))
    assert np.all(u.values == 0) and rep.converged


def test_convolution_matches_grid_sampler_weights():
    noise = noise_for_window(-0.25, 0.25, 0.5, 2.0**-5, SeedSpec(4, 0))
    uC = stochastic_convolution(noise, 1.3)
    pts = [(0.5, 0.0), (0.25, 0.125), (0.375, -0.25)]
    direct = grid_field_values(pts, noise, 1.3)
    assert np.allclose([uC.value_at(*p) for p in pts], direct, rtol=1e-12, atol=1e-14)


def test_convolution_window_coverage():
    noise = noise_for_window(-0.25, 0.25, 0.5, 2.0**-5, 0)
    with pytest.raises(GridCoverageError):
        stochastic_convolution(noise, 1.0, x_window=(-0.5, 0.5))
    assert stochastic_convolution(noise, 1.0, x_window=(-0.25, 0.25)).x_grid[0] == pytest.approx(-0.25)


def test_convolution_variance_matches_closed_form():
    a, d = 2.0, 2.0**-6
    probe = [(0.5, 0.0), (0.25, 0.125)]
    vals = []
    for r in range(3000):
        noise = noise_for_window(-0.125, 0.125, 0.5, d, SeedSpec(6, r))
        uC = stochastic_convolution(noise, a)
        vals.append([uC.value_at(*p) for p in probe])
    vals = np.array(vals)
    bias = np.abs(np.diag(walsh_grid_covariance(probe, a, d)) - [cov_critical(p, p, a) for p in probe])
    for i, p in enumerate(probe):
        sq = vals[:, i] ** 2
        assert abs(sq.mean() - cov_critical(p, p, a)) <= 4 * sq.std(ddof=1) / math.sqrt(len(sq)) + bias[i]


def test_stronger_damping_shrinks_field():
    d = 2.0**-5
    small, large = [], []
    for r in range(40):
        noise = noise_for_window(-0.25, 0.25, 1.0, d, SeedSpec(2, r))
        small.append(np.median(np.abs(stochastic_convolution(noise, 8.0).values)))
        large.append(np.median(np.abs(stochastic_convolution(noise, 1.0).values)))
    assert np.median(small) < np.median(large)


def test_critical_damping_single_iteration():
    P = ModelParams(2, 1, 1)
    u, uC, rep = solve_general((-0.25, 0.25), P, 2.0**-5, 3)
    assert rep.iterations == 1 and rep.converged
    assert np.array_equal(u.values, uC.values)
    assert np.all(decompose(u, uC, P).u_L.values == 0)


def test_picard_contraction_on_random_instances(rng):
    for _ in range(6):
        T = rng.choice([0.5, 1.0, 1.5])
        a = rng.uniform(0.5, 3)
        m = rng.uniform(0, 2)
        P = ModelParams(a, m, T)
        bound = abs(P.b) * T * T / 2
        if bound >= 0.9 or P.regime.value == "critical":
            continue
        u, uC, rep = solve_general((-0.125, 0.125), P, 2.0**-5, SeedSpec(1, int(rng.integers(100))))
        h = rep.residual_history
        assert rep.converged == (h[-1] < 1e-8)
        ratios = [h[k + 1] / h[k] for k in range(len(h) - 1) if h[k] > 1e-13]
        assert max(ratios, default=0) <= bound + 0.05
        assert all(h[k + 1] <= h[k] for k in range(1, len(h) - 1))
        assert fixed_point_residual(u, uC, P) < 1e-8 * (1 + abs(P.b))


def test_picard_nonconvergence_is_reported():
    P = ModelParams(2, 1.5, 1)
    _, uC, _ = solve_general((-0.25, 0.25), P, 2.0**-5, 3, max_iter=1)
    u, rep = picard_solve(uC, P, tol=1e-8, max_iter=1)
    assert rep.iterations == 1 and not rep.converged
    with pytest.raises(ValueError):
        picard_solve(uC, P, tol=0)
    with pytest.raises(ValueError):
        picard_solve(uC, P, max_iter=0)


def test_light_cone_operator_on_constant():
    """At a = 0 the cone integral of 1 is int_0^t (t - s) ds = t^2/2."""
    d = 2.0**-6
    T = 0.5
    n = int(T / d)
    x = np.arange(-3 * n, 3 * n + 1) * d
    v = GridField(np.arange(n + 1) * d, x, np.ones((n + 1, len(x))))
    K = light_cone_operator(v, 0.0)
    mid = len(x) // 2
    t = v.t_grid
    assert np.allclose(K.values[:, mid], t * t / 2, rtol=1e-12, atol=1e-14)


def test_decompose_lipschitz_bound_holds():
    P = ModelParams(2, 1.2, 1.0)
    for r in range(10):
        u, uC, _ = solve_general((-0.25, 0.25), P, 2.0**-5, SeedSpec(8, r))
        rep = decompose(u, uC, P, region=(-0.25, 0.25))
        assert 0 < rep.statistic <= rep.bound


def test_decompose_grid_mismatch():
    P = ModelParams(2, 1.2, 1.0)
    u, uC, _ = solve_general((-0.25, 0.25), P, 2.0**-5, 0)
    other = uC.crop(-0.25, 0.25)
    with pytest.raises(GridMismatchError):
        decompose(u, other, P)


def test_u_L_linear_in_coupling():
    """With matched noise, doubling a small coupling doubles u_L to first order."""
    b = 0.01
    P1 = ModelParams(2.0, math.sqrt(1 - b), 1.0)
    P2 = ModelParams(2.0, math.sqrt(1 - 2 * b), 1.0)
    for r in range(5):
        u1, uC1, _ = solve_general((-0.25, 0.25), P1, 2.0**-5, SeedSpec(5, r))
        u2, uC2, _ = solve_general((-0.25, 0.25), P2, 2.0**-5, SeedSpec(5, r))
        L1 = u1.values - uC1.values
        L2 = u2.values - uC2.values
        mask = np.abs(L1) > 0.05 * np.abs(L1).max()
        ratio = L2[mask] / L1[mask]
        assert np.all(np.abs(ratio / 2 - 1) <= 0.1)


def _coarsen(noise):
    n_s, n_y = noise.shape
    cells = noise.cells.reshape(n_s // 2, 2, n_y // 2, 2).sum(axis=(1, 3))
    return NoiseGrid(2 * noise.s_step, 2 * noise.y_step, noise.y0, cells)


def test_grid_convergence_with_shared_noise():
    P = ModelParams(2, 1.2, 0.5)
    probe = [(0.5, 0.0), (0.25, 0.125), (0.375, -0.125)]
    changes = np.zeros(3)
    for r in range(20):
        fine = noise_for_window(-0.25, 0.25, 0.5, 2.0**-8, SeedSpec(9, r))
        levels = [fine]
        for _ in range(3):
            levels.append(_coarsen(levels[-1]))
        vals = []
        for noise in reversed(levels):  # 2^-5, 2^-6, 2^-7, 2^-8
            u, _ = picard_solve(stochastic_convolution(noise, P.a), P)
            vals.append([u.value_at(*p) for p in probe])
        vals = np.array(vals)
        changes += np.mean((vals[1:] - vals[:-1]) ** 2, axis=1)
    rms = np.sqrt(changes / 20)
    assert rms[0] > rms[1] > rms[2]


@pytest.mark.parametrize("m", [1.2, 0.5])
def test_picard_variance_matches_spectral(m):
    P = ModelParams(2.0, m, 0.5)
    d = 2.0**-6
    probe = [(0.5, 0.0), (0.5, 0.125), (0.375, -0.0625)]
    N = 4000
    V = np.array([[u.value_at(*p) for p in probe]
                  for u, _, _ in (solve_general((-0.125, 0.125), P, d, SeedSpec(3, r)) for r in range(N))])
    C = np.array([[cov_spectral(p, q, P) for q in probe] for p in probe])
    crit_bias = np.abs(walsh_grid_covariance(probe, 2.0, d) - np.array([[cov_critical(p, q, 2.0) for q in probe]
                                                                          for p in probe]))
    Vc = V - V.mean(axis=0)
    for i in range(3):
        for j in range(3):
            prod = Vc[:, i] * Vc[:, j]
            se = prod.std(ddof=1) / math.sqrt(N)
            assert abs(prod.mean() - C[i, j]) <= 4 * se + crit_bias[i, j]


def test_grid_field_exports(tmp_path):
    P = ModelParams(2, 1.2, 0.5)
    u, _, _ = solve_general((-0.125, 0.125), P, 2.0**-4, 1)
    u.to_binary(tmp_path / "u.bin")
    raw = (tmp_path / "u.bin").read_bytes()
    assert raw[:8] == b"KGFIELD1"
    assert np.array_equal(read_binary(tmp_path / "u.bin"), u.values)
    u.to_csv(tmp_path / "u.csv")
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "t,x,value" and len(lines) == 1 + u.values.size
    t, x, v = (float(s) for s in lines[5].split(","))
    assert u.value_at(t, x) == v


def test_grid_field_validation():
    with pytest.raises(ValueError):
        GridField([0, 1], [0, 1], np.zeros((3, 2)))
    with pytest.raises(ValueError):
        GridField([0, 1], [1, 0], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        GridField([0, 1], [0, 1], np.full((2, 2), np.nan))
    with pytest.raises(ValueError):
        noise_for_window(0, 1, 0.3, 0.25)
